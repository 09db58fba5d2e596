use rubato::audioadapter_buffers::direct::SequentialSliceOfVecs;
use rubato::{Fft, FixedSync, Resampler};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Band-limited (windowed-sinc, FFT-applied) resampling to `target_rate`. Identity when the rates
/// already match.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::Resample("target rate must be positive".into()));
    }
    if buffer.sample_rate() == target_rate {
        return Ok(buffer.clone());
    }
    if buffer.is_empty() {
        return Ok(AudioBuffer::silence(buffer.num_channels(), 0, target_rate));
    }
    let channels = buffer.num_channels();
    let frames = buffer.len();
    let mut resampler = Fft::<f64>::new(
        buffer.sample_rate() as usize,
        target_rate as usize,
        1024,
        channels,
        FixedSync::Both,
    )
        .map_err(|e| Error::Resample(e.to_string()))?;
    let input = SequentialSliceOfVecs::new(buffer.channels(), channels, frames)
        .map_err(|e| Error::Resample(e.to_string()))?;
    let out = resampler
        .process_all(&input, frames, None)
        .map_err(|e| Error::Resample(e.to_string()))?;
    let interleaved = out.take_data();
    let out_len = interleaved.len() / channels;
    let mut result = vec![Vec::with_capacity(out_len); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &x) in result.iter_mut().zip(frame) {
            ch.push(x);
        }
    }
    AudioBuffer::new(result, target_rate)
}
