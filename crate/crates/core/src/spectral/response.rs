use num_complex::Complex64;

/// Magnitude response `|H(w)|` of an FIR filter on `n_points` frequencies
/// evenly spaced over `[0, pi]` (radians per sample).
pub fn freq_response(taps: &[f64], n_points: usize) -> Vec<f64> {
    let n_points = n_points.max(2);
    (0..n_points)
        .map(|j| {
            let w = std::f64::consts::PI * j as f64 / (n_points - 1) as f64;
            taps.iter()
                .enumerate()
                .map(|(l, &h)| Complex64::from_polar(h, -w * l as f64))
                .sum::<Complex64>()
                .norm()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{interp_kernel, InterpMode};

    #[test]
    fn rect_and_triangle_endpoints() {
        let rect = freq_response(&[1.0, 1.0], 5);
        assert!((rect[0] - 2.0).abs() < 1e-12 && rect[4].abs() < 1e-12);
        let tri = freq_response(&[0.5, 1.0, 0.5], 5);
        assert!((tri[0] - 2.0).abs() < 1e-12 && tri[4].abs() < 1e-12);
        for (j, v) in rect.iter().enumerate() {
            let w = std::f64::consts::PI * j as f64 / 4.0;
            assert!((v - 2.0 * (w / 2.0).cos().abs()).abs() < 1e-12);
            assert!((tri[j] - (1.0 + w.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_sits_below_rectangle_in_the_upper_band() {
        for r in 2..=6 {
            let near = interp_kernel(InterpMode::Nearest, r).unwrap();
            let lin = interp_kernel(InterpMode::Linear, r).unwrap();
            let n = 1025;
            let h_near = freq_response(near.weights(), n);
            let h_lin = freq_response(lin.weights(), n);
            // both have DC gain r
            assert!((h_near[0] - h_lin[0]).abs() < 1e-9);
            for j in 0..n {
                let w = std::f64::consts::PI * j as f64 / (n - 1) as f64;
                if w >= std::f64::consts::PI / r as f64 {
                    assert!(h_lin[j] <= h_near[j] + 1e-12, "r={r} j={j}");
                }
            }
        }
    }
}
