//! Upsampling operators.
//!
//! Convolutions use the cross-correlation convention (no kernel flip) and
//! keep only the valid region. Transposed convolutions emit the full
//! `(T - 1) * stride + length` extent and sum overlapping contributions.
//! `conv1d` and `transposed_conv1d` leave the sample rate untouched; the
//! interpolation and shuffle operators multiply it by their factor.

use crate::error::{Error, Result};
use crate::signal::{Kernel, Signal};

fn check_factor(name: &str, r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidParameter(format!(
            "{name}: factor must be >= 1"
        )));
    }
    Ok(())
}

fn upsampled_rate(rate: u32, r: usize) -> Result<u32> {
    u32::try_from(r)
        .ok()
        .and_then(|r| rate.checked_mul(r))
        .ok_or_else(|| Error::InvalidParameter(format!("sample rate {rate} x {r} overflows")))
}

fn check_channels(x: &Signal, k: &Kernel) -> Result<()> {
    if x.channels() != k.in_channels() {
        return Err(Error::Shape(format!(
            "signal has {} channels, kernel expects {}",
            x.channels(),
            k.in_channels()
        )));
    }
    Ok(())
}

/// Strided valid-region cross-correlation.
///
/// `out[o][t] = sum_{i,l} k[o][i][l] * x[i][t * stride + l] + bias[o]`
pub fn conv1d(x: &Signal, k: &Kernel, stride: usize) -> Result<Signal> {
    check_channels(x, k)?;
    if stride == 0 {
        return Err(Error::InvalidParameter(
            "conv1d: stride must be >= 1".into(),
        ));
    }
    let len = k.length();
    if x.time() < len {
        return Err(Error::Shape(format!(
            "conv1d: signal of {} samples is shorter than kernel length {len}",
            x.time()
        )));
    }
    let out_t = (x.time() - len) / stride + 1;
    let mut out = vec![0.0; k.out_channels() * out_t];
    for (o, row) in out.chunks_mut(out_t).enumerate() {
        for (t, y) in row.iter_mut().enumerate() {
            let start = t * stride;
            let mut acc = 0.0;
            for i in 0..k.in_channels() {
                let xs = &x.channel(i)[start..start + len];
                for (w, v) in k.taps(o, i).iter().zip(xs) {
                    acc += w * v;
                }
            }
            *y = acc;
        }
        if let Some(b) = k.bias() {
            row.iter_mut().for_each(|y| *y += b[o]);
        }
    }
    Ok(Signal::from_parts(out, k.out_channels(), x.sample_rate()))
}

/// Transposed convolution: scatter-adds the kernel, scaled by each input
/// sample, every `stride` output samples.
pub fn transposed_conv1d(x: &Signal, k: &Kernel, stride: usize) -> Result<Signal> {
    check_channels(x, k)?;
    if stride == 0 {
        return Err(Error::InvalidParameter(
            "transposed_conv1d: stride must be >= 1".into(),
        ));
    }
    if x.time() == 0 {
        return Err(Error::Shape("transposed_conv1d: empty input".into()));
    }
    let out_t = transposed_len(x.time(), k.length(), stride);
    let mut out = vec![0.0; k.out_channels() * out_t];
    for (o, row) in out.chunks_mut(out_t).enumerate() {
        for i in 0..k.in_channels() {
            let taps = k.taps(o, i);
            for (t, &v) in x.channel(i).iter().enumerate() {
                let dst = &mut row[t * stride..t * stride + taps.len()];
                for (y, w) in dst.iter_mut().zip(taps) {
                    *y += w * v;
                }
            }
        }
        if let Some(b) = k.bias() {
            row.iter_mut().for_each(|y| *y += b[o]);
        }
    }
    Ok(Signal::from_parts(out, k.out_channels(), x.sample_rate()))
}

/// Output length of a transposed convolution.
pub fn transposed_len(time: usize, length: usize, stride: usize) -> usize {
    (time - 1) * stride + length
}

/// Zero insertion: `out[r * t] = x[t]`, zeros elsewhere.
pub fn stretch(x: &Signal, r: usize) -> Result<Signal> {
    check_factor("stretch", r)?;
    let t = x.time();
    let mut out = vec![0.0; x.channels() * t * r];
    for (c, row) in out
        .chunks_mut((t * r).max(1))
        .take(x.channels())
        .enumerate()
    {
        for (dst, &v) in row.iter_mut().step_by(r).zip(x.channel(c)) {
            *dst = v;
        }
    }
    Ok(Signal::from_parts(
        out,
        x.channels(),
        upsampled_rate(x.sample_rate(), r)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpMode {
    Nearest,
    Linear,
}

/// Fixed interpolation filter applied after `stretch`.
///
/// Nearest is a rectangle of `r` ones; linear is the unit-center triangle
/// of length `2r - 1`. Both are anchored so that tap `r - 1` lands on the
/// current output sample.
pub fn interp_kernel(mode: InterpMode, r: usize) -> Result<Kernel> {
    check_factor("interp_kernel", r)?;
    let taps: Vec<f64> = match mode {
        InterpMode::Nearest => vec![1.0; r],
        InterpMode::Linear => (0..2 * r - 1)
            .map(|l| (r - l.abs_diff(r - 1)) as f64 / r as f64)
            .collect(),
    };
    Kernel::mono(&taps)
}

/// Zero-order hold: `out[n] = x[n / r]`.
pub fn nearest_upsample(x: &Signal, r: usize) -> Result<Signal> {
    check_factor("nearest_upsample", r)?;
    let mut out = Vec::with_capacity(x.samples().len() * r);
    for row in x.rows() {
        for &v in row {
            out.extend(std::iter::repeat_n(v, r));
        }
    }
    Ok(Signal::from_parts(
        out,
        x.channels(),
        upsampled_rate(x.sample_rate(), r)?,
    ))
}

/// Linear interpolation with zero padding past the last input sample.
///
/// Equivalent to `stretch` followed by the triangular `interp_kernel`
/// centered on each output sample, so samples at multiples of `r` reproduce
/// the input and the final `r - 1` samples ramp toward zero.
pub fn linear_upsample(x: &Signal, r: usize) -> Result<Signal> {
    let tri = interp_kernel(InterpMode::Linear, r)?;
    let w = tri.weights();
    let mut out = Vec::with_capacity(x.samples().len() * r);
    for row in x.rows() {
        for (t, &v) in row.iter().enumerate() {
            let next = row.get(t + 1).copied();
            out.push(v * w[r - 1]);
            for j in 1..r {
                let here = v * w[r - 1 - j];
                out.push(match next {
                    Some(n) => here + n * w[2 * r - 1 - j],
                    None => here,
                });
            }
        }
    }
    Ok(Signal::from_parts(
        out,
        x.channels(),
        upsampled_rate(x.sample_rate(), r)?,
    ))
}

/// Interpolation spelled out as its definition: [`stretch`], `r - 1` zeros
/// of padding on the left (and on the right for linear), then a valid
/// [`conv1d`] with [`interp_kernel`]. Slower than [`nearest_upsample`] and
/// [`linear_upsample`] but bit-identical to them.
pub fn stretch_interp(x: &Signal, mode: InterpMode, r: usize) -> Result<Signal> {
    let s = stretch(x, r)?;
    let k = interp_kernel(mode, r)?;
    let right = match mode {
        InterpMode::Nearest => 0,
        InterpMode::Linear => r - 1,
    };
    let rows = s
        .rows()
        .map(|row| {
            let mut p = vec![0.0; r - 1];
            p.extend_from_slice(row);
            p.resize(p.len() + right, 0.0);
            let y = conv1d(&Signal::from_parts(p, 1, s.sample_rate()), &k, 1)?;
            Ok(y.into_samples())
        })
        .collect::<Result<Vec<_>>>()?;
    Signal::from_channels(rows, s.sample_rate())
}

/// Interleaves `r` channel groups along time:
/// `out[c][r * t + j] = x[j * C + c][t]` with `C = channels / r`.
pub fn periodic_shuffle(x: &Signal, r: usize) -> Result<Signal> {
    check_factor("periodic_shuffle", r)?;
    if !x.channels().is_multiple_of(r) {
        return Err(Error::Shape(format!(
            "periodic_shuffle: {} channels not divisible by {r}",
            x.channels()
        )));
    }
    let c_out = x.channels() / r;
    let t = x.time();
    let mut out = vec![0.0; x.samples().len()];
    for c in 0..c_out {
        let row = &mut out[c * t * r..(c + 1) * t * r];
        for j in 0..r {
            for (dst, &v) in row[j..].iter_mut().step_by(r).zip(x.channel(j * c_out + c)) {
                *dst = v;
            }
        }
    }
    Ok(Signal::from_parts(
        out,
        c_out,
        upsampled_rate(x.sample_rate(), r)?,
    ))
}

/// Inverse of [`periodic_shuffle`]; also its adjoint.
pub fn periodic_unshuffle(x: &Signal, r: usize) -> Result<Signal> {
    check_factor("periodic_unshuffle", r)?;
    if !x.time().is_multiple_of(r) {
        return Err(Error::Shape(format!(
            "periodic_unshuffle: {} samples not divisible by {r}",
            x.time()
        )));
    }
    let c_in = x.channels();
    let t = x.time() / r;
    let mut out = vec![0.0; x.samples().len()];
    for c in 0..c_in {
        let src = x.channel(c);
        for j in 0..r {
            let dst = &mut out[(j * c_in + c) * t..(j * c_in + c + 1) * t];
            for (d, &v) in dst.iter_mut().zip(src[j..].iter().step_by(r)) {
                *d = v;
            }
        }
    }
    let rate = (x.sample_rate() / r as u32).max(1);
    Ok(Signal::from_parts(out, c_in * r, rate))
}

/// Subpixel convolution: a stride-1 convolution emitting `r * C` channels,
/// then a periodic shuffle to `C` channels at `r` times the length.
pub fn subpixel_upsample(x: &Signal, k: &Kernel, r: usize) -> Result<Signal> {
    check_factor("subpixel_upsample", r)?;
    if !k.out_channels().is_multiple_of(r) {
        return Err(Error::Shape(format!(
            "subpixel_upsample: kernel emits {} channels, not a multiple of {r}",
            k.out_channels()
        )));
    }
    periodic_shuffle(&conv1d(x, k, 1)?, r)
}

pub fn relu(x: &Signal) -> Signal {
    // ReLU(0) and ReLU(-0) are +0
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(v: &[f64]) -> Signal {
        Signal::mono(v.to_vec(), 1000).unwrap()
    }

    #[test]
    fn conv1d_examples() {
        let y = conv1d(
            &mono(&[1., 2., 3., 4.]),
            &Kernel::mono(&[1., 0., 0.]).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(y.samples(), &[1., 2.]);
        let y = conv1d(
            &mono(&[1., 1., 1., 1.]),
            &Kernel::mono(&[1., 1., 1.]).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(y.samples(), &[3., 3.]);
        let y = conv1d(
            &mono(&[1., 2., 3., 4., 5.]),
            &Kernel::mono(&[1., 1.]).unwrap(),
            2,
        )
        .unwrap();
        assert_eq!(y.samples(), &[3., 7.]);
    }

    #[test]
    fn conv1d_errors() {
        let x = Signal::new(vec![0.0; 8], 2, 1000).unwrap();
        let k = Kernel::mono(&[1.0]).unwrap();
        assert!(matches!(conv1d(&x, &k, 1), Err(Error::Shape(_))));
        assert!(conv1d(&mono(&[1.0]), &Kernel::mono(&[1., 1.]).unwrap(), 1).is_err());
        assert!(conv1d(&mono(&[1.0, 2.0]), &k, 0).is_err());
    }

    #[test]
    fn conv1d_adds_bias() {
        let k = Kernel::mono(&[1.0]).unwrap().with_bias(vec![0.5]).unwrap();
        assert_eq!(
            conv1d(&mono(&[1., 2.]), &k, 1).unwrap().samples(),
            &[1.5, 2.5]
        );
    }

    #[test]
    fn transposed_examples() {
        let (a, b, c) = (0.3, -1.7, 2.25);
        let y = transposed_conv1d(&mono(&[1.0; 4]), &Kernel::mono(&[a, b, c]).unwrap(), 3).unwrap();
        assert_eq!(y.samples(), &[a, b, c, a, b, c, a, b, c, a, b, c]);
        let y = transposed_conv1d(&mono(&[1.0; 4]), &Kernel::mono(&[1.; 3]).unwrap(), 2).unwrap();
        assert_eq!(y.samples(), &[1., 1., 2., 1., 2., 1., 2., 1., 1.]);
        let y = transposed_conv1d(&mono(&[1.0; 5]), &Kernel::mono(&[1.; 3]).unwrap(), 1).unwrap();
        assert_eq!(y.samples(), &[1., 2., 3., 3., 3., 2., 1.]);
    }

    #[test]
    fn transposed_stride_beyond_length_leaves_gaps() {
        let y =
            transposed_conv1d(&mono(&[1.0, 2.0]), &Kernel::mono(&[1.0, 1.0]).unwrap(), 3).unwrap();
        assert_eq!(y.samples(), &[1., 1., 0., 2., 2.]);
    }

    #[test]
    fn transposed_errors() {
        let k = Kernel::mono(&[1.0]).unwrap();
        assert!(transposed_conv1d(&Signal::new(vec![0.0; 4], 2, 10).unwrap(), &k, 1).is_err());
        assert!(transposed_conv1d(&mono(&[]), &k, 1).is_err());
        assert!(transposed_conv1d(&mono(&[1.0]), &k, 0).is_err());
    }

    #[test]
    fn stretch_examples() {
        assert_eq!(stretch(&mono(&[5.]), 3).unwrap().samples(), &[5., 0., 0.]);
        let y = stretch(&mono(&[1., 2.]), 2).unwrap();
        assert_eq!(y.samples(), &[1., 0., 2., 0.]);
        assert_eq!(y.sample_rate(), 2000);
        assert_eq!(stretch(&mono(&[1., 2.]), 1).unwrap(), mono(&[1., 2.]));
        assert!(stretch(&mono(&[1.]), 0).is_err());
    }

    #[test]
    fn stretch_interp_matches_direct_forms() {
        let x =
            Signal::from_channels(vec![vec![0.3, -1.7, 2.9], vec![1e-3, 4.0, -0.5]], 50).unwrap();
        for r in 1..5 {
            assert_eq!(
                stretch_interp(&x, InterpMode::Nearest, r).unwrap(),
                nearest_upsample(&x, r).unwrap()
            );
            assert_eq!(
                stretch_interp(&x, InterpMode::Linear, r).unwrap(),
                linear_upsample(&x, r).unwrap()
            );
        }
    }

    #[test]
    fn interp_kernels() {
        assert_eq!(
            interp_kernel(InterpMode::Nearest, 2).unwrap().weights(),
            &[1., 1.]
        );
        assert_eq!(
            interp_kernel(InterpMode::Linear, 2).unwrap().weights(),
            &[0.5, 1., 0.5]
        );
        assert_eq!(
            interp_kernel(InterpMode::Linear, 3).unwrap().weights(),
            &[1. / 3., 2. / 3., 1., 2. / 3., 1. / 3.]
        );
        assert!(interp_kernel(InterpMode::Linear, 0).is_err());
    }

    #[test]
    fn nearest_examples() {
        assert_eq!(
            nearest_upsample(&mono(&[2., 3.]), 2).unwrap().samples(),
            &[2., 2., 3., 3.]
        );
        assert_eq!(
            nearest_upsample(&mono(&[1., -1., 1.]), 3)
                .unwrap()
                .samples(),
            &[1., 1., 1., -1., -1., -1., 1., 1., 1.]
        );
        assert_eq!(
            nearest_upsample(&mono(&[1., 2.]), 1).unwrap(),
            mono(&[1., 2.])
        );
    }

    #[test]
    fn linear_examples() {
        assert_eq!(
            linear_upsample(&mono(&[0., 2.]), 2).unwrap().samples(),
            &[0., 1., 2., 1.]
        );
        let y = linear_upsample(&mono(&[0.7; 4]), 2).unwrap();
        assert!(y.samples()[..7].iter().all(|&v| v == 0.7));
        assert_eq!(
            linear_upsample(&mono(&[1., 2.]), 1).unwrap(),
            mono(&[1., 2.])
        );
    }

    #[test]
    fn shuffle_examples() {
        let x = Signal::from_channels(vec![vec![1., 2., 3.], vec![10., 20., 30.]], 100).unwrap();
        let y = periodic_shuffle(&x, 2).unwrap();
        assert_eq!(y.samples(), &[1., 10., 2., 20., 3., 30.]);
        assert_eq!(y.sample_rate(), 200);
        assert_eq!(periodic_shuffle(&x, 1).unwrap(), x);
        let x = Signal::from_channels(vec![vec![1.], vec![2.], vec![3.]], 100).unwrap();
        assert_eq!(periodic_shuffle(&x, 3).unwrap().samples(), &[1., 2., 3.]);
        assert!(periodic_shuffle(&x, 2).is_err());
    }

    #[test]
    fn unshuffle_inverts_shuffle() {
        let x = Signal::from_channels(
            (0..6)
                .map(|c| (0..5).map(|t| (c * 10 + t) as f64).collect())
                .collect(),
            100,
        )
        .unwrap();
        for r in [1, 2, 3, 6] {
            let back = periodic_unshuffle(&periodic_shuffle(&x, r).unwrap(), r).unwrap();
            assert_eq!(back.samples(), x.samples());
        }
    }

    #[test]
    fn subpixel_with_identical_groups_is_a_hold() {
        let x = mono(&[0.5, -1.0, 2.0, 0.25, 3.0]);
        let sub = [0.2, -0.4, 0.9];
        let k = Kernel::new([sub, sub].concat(), 2, 1, 3).unwrap();
        let y = subpixel_upsample(&x, &k, 2).unwrap();
        let reference =
            nearest_upsample(&conv1d(&x, &Kernel::mono(&sub).unwrap(), 1).unwrap(), 2).unwrap();
        assert_eq!(y, reference);
        let plain = conv1d(&x, &Kernel::mono(&sub).unwrap(), 1).unwrap();
        assert_eq!(
            subpixel_upsample(&x, &Kernel::mono(&sub).unwrap(), 1).unwrap(),
            plain
        );
    }

    #[test]
    fn relu_clamps_negatives() {
        assert_eq!(relu(&mono(&[-1., 0., 2.])).samples(), &[0., 0., 2.]);
    }
}
