//! Reading and writing signals as WAV or CSV.

use crate::error::{Error, Result};
use crate::signal::Signal;
use std::io::{BufRead, Write};
use std::path::Path;

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

/// Reads integer or float WAV audio, scaling integer PCM to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Parse("WAV file declares zero channels".into()));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let frames = interleaved.len() / channels;
    let mut planar = vec![0.0; frames * channels];
    for (n, frame) in interleaved.chunks_exact(channels).enumerate() {
        for (c, &v) in frame.iter().enumerate() {
            planar[c * frames + n] = v;
        }
    }
    Signal::new(planar, channels, spec.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, x: &Signal, format: WavFormat) -> Result<()> {
    let channels = u16::try_from(x.channels())
        .map_err(|_| Error::InvalidParameter("too many channels for WAV".into()))?;
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, hound::SampleFormat::Int),
        WavFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels,
        sample_rate: x.sample_rate(),
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for n in 0..x.time() {
        for c in 0..x.channels() {
            let v = x.channel(c)[n];
            match format {
                WavFormat::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    w.write_sample(q)?;
                }
                WavFormat::Float32 => w.write_sample(v as f32)?,
            }
        }
    }
    w.finalize()?;
    Ok(())
}

/// Writes one comma-separated row per channel.
pub fn write_signal_csv(mut out: impl Write, x: &Signal) -> Result<()> {
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parses the format of [`write_signal_csv`]; every row must have equal length.
pub fn read_signal_csv(input: impl BufRead, sample_rate: u32) -> Result<Signal> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("CSV signal has no rows".into()));
    }
    Signal::from_channels(rows, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let x =
            Signal::from_channels(vec![vec![0.1, -2.5, 1e-17], vec![3.0, 0.0, -0.3]], 8).unwrap();
        let mut buf = Vec::new();
        write_signal_csv(&mut buf, &x).unwrap();
        let y = read_signal_csv(buf.as_slice(), 8).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn csv_errors() {
        assert!(read_signal_csv("".as_bytes(), 8).is_err());
        assert!(read_signal_csv("1,2\n3\n".as_bytes(), 8).is_err());
        assert!(read_signal_csv("1,x\n".as_bytes(), 8).is_err());
    }

    #[test]
    fn wav_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let x = Signal::from_channels(vec![vec![0.5, -0.25, 0.0], vec![0.125, 0.75, -1.0]], 4000)
            .unwrap();
        let p = dir.path().join("a.wav");
        write_wav(&p, &x, WavFormat::Float32).unwrap();
        assert_eq!(read_wav(&p).unwrap(), x);
        write_wav(&p, &x, WavFormat::Pcm16).unwrap();
        let y = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate(), 4000);
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn malformed_wav_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFF\x00\x00not a wav").unwrap();
        assert!(read_wav(&p).is_err());
    }
}
