//! Deterministic framing, windowing, STFT, log-mel and MFCC extraction.

mod frame;
mod matrix;
mod mel;
pub mod pitch;
mod signal;
mod stft;

pub use frame::{
    frame_count, resolve_shift_ms, window_coefficients, FrameConfig, FrameGeometry, WindowKind,
};
pub use matrix::Matrix;
pub use mel::{
    dct_matrix, hz_to_mel, log_mel, log_mel_from_spectrogram, mel_filterbank, mel_to_hz, mfcc,
    mfcc_from_spectrogram, FeatureKind, FeatureMatrix, LOG_FLOOR,
};
pub use signal::{rms as signal_rms, Signal};
pub use stft::{stft, Spectrogram};
