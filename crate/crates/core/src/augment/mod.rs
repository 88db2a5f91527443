//! FrAUG plan generation and the rival augmentations it is compared against.
//!
//! FrAUG never touches the waveform: a plan is only a list of frame rates.
//! The rivals (noise mixing, speed and pitch perturbation, VTLP) each
//! change either the samples or the spectral axis.

mod noise;
mod plan;
mod policy;
mod resample;
mod vtlp;

pub use noise::{mix_noise, pink_noise, white_noise, NoiseSource, NoiseSpec};
pub use plan::{fraug_plan, AugPlan, FrameRate};
pub use policy::{extract_features, AugPolicy, Transform, Variant};
pub use resample::{pitch_perturb, resample_linear, speed_perturb, time_stretch};
pub use vtlp::{vtlp_warp, warp_frequency, WarpSpec, VTLP_ALPHAS};
