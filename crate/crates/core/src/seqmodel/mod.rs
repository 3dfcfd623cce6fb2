//! Context classifier over the fused utterance sequence: bi-GRU, multi-head
//! self-attention and a linear softmax head, plus the attention-only and
//! GRU-only ablations.

mod attention;
mod config;
mod gru;
mod model;

pub use attention::{self_attention, self_attention_on_tape, AttentionOutput, AttentionVars, AttnParams, HeadParams};
pub use config::{ClassifierMode, ModelConfig, System};
pub use gru::{bi_gru, bi_gru_on_tape, gru_step, gru_step_on_tape, GruDirection, GruParams};
pub use model::{
    classifier_on_tape, dropout_mask, Classification, ClassifierParams, DialogLoss, Model, Params, Prediction,
};
