//! Radix-2 decimation-in-time FFT.
//!
//! Forward transforms are unnormalized; the inverse divides by `N`.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn check_len(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "fft length {n} is not a power of two"
        )));
    }
    Ok(())
}

fn bit_reverse(data: &mut [Complex64]) {
    let n = data.len();
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            data.swap(i, j);
        }
    }
}

/// In-place transform of a power-of-two buffer.
pub fn fft_in_place(data: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = data.len();
    check_len(n)?;
    bit_reverse(data);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = sign * std::f64::consts::TAU / size as f64;
        // twiddles computed directly per index to avoid drift from repeated products
        let twiddles: Vec<Complex64> = (0..half)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();
        for block in data.chunks_mut(size) {
            let (lo, hi) = block.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        size *= 2;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(())
}

pub fn fft(x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let mut out = x.to_vec();
    fft_in_place(&mut out, inverse)?;
    Ok(out)
}

/// Forward transform of a real buffer, returning bins `0..=N/2`.
pub fn rfft(x: &[f64]) -> Result<Vec<Complex64>> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false)?;
    buf.truncate(x.len() / 2 + 1);
    Ok(buf)
}
