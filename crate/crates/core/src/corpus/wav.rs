use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::write_atomic;
use crate::dsp::Signal;
use crate::{Error, Result};

/// Reads 16-bit mono PCM at 8-48 kHz, scaling samples by 1/32768.
pub fn read_wav(path: &Path) -> Result<Signal> {
    let reader = WavReader::open(path)?;
    let spec = reader.spec();
    let what = || path.display().to_string();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!("{}: {} channels, expected mono", what(), spec.channels)));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!("{}: expected 16-bit PCM", what())));
    }
    if !(8000..=48_000).contains(&spec.sample_rate) {
        return Err(Error::UnsupportedAudio(format!(
            "{}: sample rate {} outside 8-48 kHz",
            what(),
            spec.sample_rate
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Signal::new(samples, spec.sample_rate)
}

/// 16-bit mono PCM encoding; samples are clipped to the i16 range.
pub fn wav_bytes(signal: &Signal) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut buf, spec)?;
        for &s in signal.samples() {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v)?;
        }
        w.finalize()?;
    }
    Ok(buf.into_inner())
}

pub fn write_wav(path: &Path, signal: &Signal) -> Result<()> {
    write_atomic(path, &wav_bytes(signal)?)
}
