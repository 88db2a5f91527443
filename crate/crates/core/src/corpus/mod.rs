//! Manifests, WAV I/O, the synthetic corpus, crop/segment/balance
//! preprocessing and the binary feature-file format.

mod dataset;
mod features;
mod io;
mod manifest;
mod preprocess;
mod synth;
mod wav;

pub use dataset::{build_feature_set, FeatureSet, UtteranceFeatures};
pub use features::{
    decode_matrix, encode_matrix, read_features, sidecar_path, write_features, FeatureSidecar,
    FEATURE_MAGIC, FORMAT_VERSION,
};
pub(crate) use features::{check_magic, read_u32};
pub use io::write_atomic;
pub use manifest::{load_manifest, parse_manifest, save_manifest, Label, Manifest, Split, Utterance};
pub use preprocess::{balanced_sample, random_crop, segmentize, Segment, SegmentTag};
pub use synth::{synth_corpus, synth_utterances, ClassProfile, SynthParams};
pub use wav::{read_wav, wav_bytes, write_wav};
