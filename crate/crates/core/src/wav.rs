//! RIFF/WAVE input and output.
//!
//! Reading accepts 16-bit integer PCM and 32-bit IEEE float, any channel
//! count; channels are averaged to mono. Writing always produces mono
//! little-endian 32-bit float, so a read after a write returns the same
//! samples for any signal whose amplitudes are representable in `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = WavReader::new(BufReader::new(file))?;
    decode(reader, path)
}

fn decode<R: std::io::Read>(mut reader: WavReader<R>, path: &Path) -> Result<AudioSignal> {
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || spec.sample_rate == 0 {
        return Err(Error::UnsupportedCodec {
            path: path.to_owned(),
            detail: "zero channels or sample rate".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_owned(),
                detail: format!("{format:?} {bits}-bit"),
            })
        }
    };
    if interleaved.len() < channels {
        return Err(Error::ZeroLength(path.to_owned()));
    }
    let samples: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    let signal = AudioSignal {
        samples,
        sample_rate: spec.sample_rate,
    };
    if let Some(i) = signal.samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidSignal(format!(
            "{}: non-finite sample at frame {i}",
            path.display()
        )));
    }
    Ok(signal)
}

pub fn write_wav(signal: &AudioSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    signal.validate()?;
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = WavWriter::new(BufWriter::new(file), spec)?;
    for &x in &signal.samples {
        writer.write_sample(x as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pcm16(path: &Path, channels: u16, data: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &d in data {
            w.write_sample(d).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_pcm16(&p, 1, &[0, 16384, -16384]);
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples, vec![0.0, 0.5, -0.5]);
        assert_eq!(s.sample_rate, 8000);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.2f32).unwrap();
        w.write_sample(0.4f32).unwrap();
        w.finalize().unwrap();
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples.len(), 1);
        assert!((s.samples[0] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn empty_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.wav");
        write_pcm16(&p, 1, &[]);
        assert!(matches!(read_wav(&p), Err(Error::ZeroLength(_))));
    }

    #[test]
    fn missing_file_and_unsupported_depth() {
        assert!(matches!(
            read_wav("/nonexistent/x.wav"),
            Err(Error::Io { .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pcm8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::UnsupportedCodec { .. })));
    }

    #[test]
    fn float_round_trip_is_exact_and_unclipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let s = AudioSignal::new(vec![0.0, 1.5, -0.25, 0.125, -3.0], 22050).unwrap();
        write_wav(&s, &p).unwrap();
        assert_eq!(read_wav(&p).unwrap(), s);
    }

    #[test]
    fn write_rejects_invalid_signal() {
        let dir = tempfile::tempdir().unwrap();
        let s = AudioSignal {
            samples: vec![0.1],
            sample_rate: 0,
        };
        assert!(matches!(
            write_wav(&s, dir.path().join("x.wav")),
            Err(Error::InvalidSignal(_))
        ));
        let ok = AudioSignal::new(vec![0.1], 8000).unwrap();
        assert!(write_wav(&ok, "/nonexistent-dir/x.wav").is_err());
    }

    proptest::proptest! {
        #[test]
        fn round_trip_f32_representable(xs in proptest::collection::vec(-4.0f32..4.0, 1..300)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("p.wav");
            let s = AudioSignal::new(xs.iter().map(|&x| x as f64).collect(), 16000).unwrap();
            write_wav(&s, &p).unwrap();
            proptest::prop_assert_eq!(read_wav(&p).unwrap(), s);
        }
    }
}
