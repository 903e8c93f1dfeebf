//! The model family: PatchTST, NLPatchTST, Ci and CiTrus.
//!
//! Every model is a patch encoder, a pre-norm transformer over patch
//! tokens, and either a pre-training head (signal decoder or mel-frequency
//! head) or a linear classification head. Multichannel inputs are folded
//! into the batch axis so that one set of weights serves any channel count.

mod config;
mod decoder;
mod encoder;
mod heads;
mod layers;
mod model;
mod params;
mod pass;
mod transformer;

pub use config::{FeatureTap, ModelConfig, PretrainMode, Variant};
pub use decoder::{ConvDecoder, Decoder, PatchDecoder, UpBlock};
pub use encoder::{ConvEncoder, Encoder, ResidualBlock};
pub use heads::{Classifier, FreqHead, PretrainHead};
pub use layers::{BatchNorm, Conv1d, ConvTranspose1d, LayerNorm, Linear};
pub use model::{channel_fold, channel_unfold, FoldRecord, Model};
pub use params::{LoadReport, ParamEntry, ParamKind, ParamStore};
pub use pass::{apply_bn_updates, Pass, BN_MOMENTUM};
pub use transformer::{Transformer, TransformerLayer};
