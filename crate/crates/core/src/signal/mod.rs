//! Sample-domain and time-frequency primitives.

mod buffer;
mod resample;
mod stft;
mod wav;

pub use buffer::AudioBuffer;
pub use resample::resample;
pub use stft::{istft, stft, ComplexSpectrogram, StftConfig, WindowKind};
pub use wav::{read_audio, read_audio_channels, write_audio, write_audio_pcm16};

/// Working sample rate of every pipeline stage.
pub const WORKING_RATE: u32 = 16_000;
