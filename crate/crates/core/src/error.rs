use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("empty signal")]
    EmptySignal,
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error("channel count mismatch: expected {expected}, got {actual}")]
    ChannelCount { expected: usize, actual: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("spectrogram geometry mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("resampler: {0}")]
    Resample(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("position {0} lies outside the room")]
    OutsideRoom(String),
    #[error("reverberation time {0} s is outside the model's validity")]
    InvalidT60(f64),
    #[error("image-source list is empty")]
    EmptyImageList,
    #[error("hrir pack: {0}")]
    HrirPack(String),
    #[error("duplicate grid direction (theta {theta} deg, phi {phi} deg)")]
    DuplicateDirection { theta: f64, phi: f64 },
    #[error("hrtf set is empty")]
    EmptyHrtfSet,
    #[error("impulse response of {len} samples exceeds fft length {fft_len}")]
    IrTooLong { len: usize, fft_len: usize },
    #[error("non-finite value in design inputs at bin {bin}")]
    NonFinite { bin: usize },
    #[error("hermitian factorization failed at bin {bin}")]
    Factorization { bin: usize },
    #[error("reference signal is all zero")]
    ZeroReference,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("scene constraints infeasible after {0} attempts")]
    Infeasible(usize),
    #[error("unknown {kind} strategy '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("filter bank file: {0}")]
    FilterBankFormat(String),
    #[error("cue map file: {0}")]
    CueMapFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
