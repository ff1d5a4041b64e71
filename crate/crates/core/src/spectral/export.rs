//! Spectrogram export: CSV matrices and 8-bit PGM images.

use std::io::Write;

use super::stft::Spectrogram;
use crate::error::Result;

/// One row per frequency bin (lowest first), one column per frame.
pub fn write_csv<W: Write>(spec: &Spectrogram, mut out: W) -> Result<()> {
    for b in 0..spec.bins() {
        let row: Vec<String> = spec.bin_row(b).iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Binary PGM (P5) with frames along x and frequency increasing upward.
/// Gray levels map `[floor_db, max_db]` linearly onto `[0, 255]`.
pub fn write_pgm<W: Write>(spec: &Spectrogram, mut out: W) -> Result<()> {
    let lo = spec.floor_db;
    let hi = spec.max_db();
    let span = if hi > lo { hi - lo } else { 1.0 };
    write!(out, "P5\n{} {}\n255\n", spec.frames(), spec.bins())?;
    let mut pixels = Vec::with_capacity(spec.frames() * spec.bins());
    for b in (0..spec.bins()).rev() {
        for &v in spec.bin_row(b) {
            pixels.push((((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Spectrogram {
        // 3 bins x 2 frames
        Spectrogram::from_db(vec![-100., -50., -20., -20., 0., -100.], 3, 2, 8, 2, -100.0).unwrap()
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&tiny(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "-100,-50\n-20,-20\n0,-100\n"
        );
    }

    #[test]
    fn pgm_puts_high_frequencies_on_top() {
        let mut buf = Vec::new();
        write_pgm(&tiny(), &mut buf).unwrap();
        let header = b"P5\n2 3\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[255, 0, 204, 204, 0, 128]);
    }
}
