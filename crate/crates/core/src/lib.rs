//! Frame-rate based data augmentation (FrAUG) for speech classification.
//!
//! FrAUG creates extra training examples by extracting the same waveform at
//! several (frame-width, frame-shift) pairs instead of altering the audio.
//! The crate bundles everything needed to test that idea end to end:
//!
//! * [`dsp`]: framing, windowing, STFT, log-mel and MFCC features.
//! * [`augment`]: FrAUG plans and the rival waveform/spectral augmentations
//!   (noise mixing, speed and pitch perturbation, VTLP).
//! * [`corpus`]: manifests, WAV I/O, a synthetic two-class corpus, the
//!   crop/segment/balance preprocessing and the binary feature format.
//! * [`trainer`]: a small convolutional classifier with analytic gradients
//!   and a probability-averaging ensemble.
//! * [`stats`]: F1 and McNemar's paired test.
//! * [`cli`]: experiment configuration and the command implementations
//!   behind the `fraug` binary.

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod dsp;
mod error;
pub mod seed;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
