use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Reads a PCM16 or float32 WAV file. PCM16 samples map to `s / 32768`,
/// so full scale reads as 32767/32768.
pub fn read_audio(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} in {}",
                path.as_ref().display()
            )))
        }
    };
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::UnsupportedEncoding("zero channels".into()));
    }
    if interleaved.len() % n_ch != 0 {
        return Err(Error::InvalidBuffer(format!(
            "{} samples do not divide into {n_ch} channels",
            interleaved.len()
        )));
    }
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &x) in channels.iter_mut().zip(frame) {
            c.push(x);
        }
    }
    AudioBuffer::new(channels, spec.sample_rate)
}

/// Reads a WAV file and checks its channel count.
pub fn read_audio_channels(path: impl AsRef<Path>, expected: usize) -> Result<AudioBuffer> {
    let buf = read_audio(path)?;
    if buf.num_channels() != expected {
        return Err(Error::ChannelCount {
            expected,
            actual: buf.num_channels(),
        });
    }
    Ok(buf)
}

fn write_with(
    path: &Path,
    buffer: &AudioBuffer,
    bits: u16,
    format: SampleFormat,
    mut put: impl FnMut(&mut WavWriter<std::io::BufWriter<std::fs::File>>, f64) -> hound::Result<()>,
) -> Result<()> {
    let spec = WavSpec {
        channels: buffer.num_channels() as u16,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..buffer.len() {
        for ch in buffer.channels() {
            put(&mut writer, ch[i])?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Writes 32-bit float WAV.
pub fn write_audio(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<()> {
    write_with(path.as_ref(), buffer, 32, SampleFormat::Float, |w, x| {
        w.write_sample(x as f32)
    })
}

/// Writes 16-bit PCM WAV, rounding and saturating at full scale.
pub fn write_audio_pcm16(path: impl AsRef<Path>, buffer: &AudioBuffer) -> Result<()> {
    write_with(path.as_ref(), buffer, 16, SampleFormat::Int, |w, x| {
        let v = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float32_stereo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let l: Vec<f64> = (0..500).map(|i| ((i as f32) * 0.01).sin() as f64).collect();
        let r: Vec<f64> = l.iter().map(|x| -0.5 * x).collect();
        let buf = AudioBuffer::new(vec![l, r], 16000).unwrap();
        write_audio(&path, &buf).unwrap();
        assert_eq!(read_audio(&path).unwrap(), buf);
    }

    #[test]
    fn pcm16_full_scale_convention() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(i16::MAX).unwrap();
        w.write_sample(i16::MIN).unwrap();
        w.finalize().unwrap();
        let buf = read_audio(&path).unwrap();
        assert_eq!(buf.channel(0), &[32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn mono_file_fails_stereo_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.wav");
        write_audio(&path, &AudioBuffer::silence(1, 10, 16000)).unwrap();
        assert!(matches!(
            read_audio_channels(&path, 2),
            Err(Error::ChannelCount { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        write_audio(&path, &AudioBuffer::silence(2, 100, 16000)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..30]).unwrap();
        assert!(read_audio(&path).is_err());
    }

    #[test]
    fn pcm24_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_audio(&path), Err(Error::UnsupportedEncoding(_))));
    }
}
