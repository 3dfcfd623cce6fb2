//! Multimodal conversational emotion recognition.
//!
//! Utterance-level acoustic, lexical and speaker features are fused with
//! modality attention ([`fusion`]), contextualised over the dialog by a
//! bi-directional GRU and multi-head self-attention ([`seqmodel`]), and
//! trained with cross-entropy and Adam on hand-written reverse-mode gradients
//! ([`tensor`], [`train`]).

pub mod data;
pub mod error;
pub mod fusion;
pub mod seqmodel;
pub mod tensor;
pub mod train;

pub use data::{Dataset, DatasetMeta, Dialog, UtteranceRecord};
pub use error::{Error, Result};
pub use fusion::{FusionMode, FusionOutput, FusionParams};
pub use seqmodel::{ClassifierMode, Model, ModelConfig, System};
pub use tensor::{GradStore, Matrix};
pub use train::{evaluate, train, EpochLog, Metrics, TrainConfig, TrainOutcome};
