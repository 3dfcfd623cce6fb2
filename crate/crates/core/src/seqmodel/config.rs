use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassifierMode {
    /// Bi-GRU followed by multi-head self-attention.
    SaGru,
    /// Self-attention over a linear projection of the fused sequence; no recurrence.
    AttnOnly,
    /// Linear head directly on the bi-GRU states.
    GruOnly,
}

impl ClassifierMode {
    pub fn uses_gru(self) -> bool {
        !matches!(self, ClassifierMode::AttnOnly)
    }

    pub fn uses_attention(self) -> bool {
        !matches!(self, ClassifierMode::GruOnly)
    }

    pub fn label(self) -> &'static str {
        match self {
            ClassifierMode::SaGru => "SA-GRU",
            ClassifierMode::AttnOnly => "Attention",
            ClassifierMode::GruOnly => "Bi-GRU",
        }
    }
}

/// Ablation presets S1–S5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum System {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl System {
    pub const ALL: [System; 5] = [System::S1, System::S2, System::S3, System::S4, System::S5];

    pub fn fusion(self) -> FusionMode {
        match self {
            System::S1 => FusionMode::At,
            System::S2 => FusionMode::Add,
            System::S3 | System::S4 | System::S5 => FusionMode::Ats,
        }
    }

    pub fn classifier(self) -> ClassifierMode {
        match self {
            System::S3 => ClassifierMode::AttnOnly,
            System::S4 => ClassifierMode::GruOnly,
            System::S1 | System::S2 | System::S5 => ClassifierMode::SaGru,
        }
    }

    pub fn modalities(self) -> &'static str {
        if self.fusion().uses_speaker() {
            "A+T+S"
        } else {
            "A+T"
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            System::S1 => "S1",
            System::S2 => "S2",
            System::S3 => "S3",
            System::S4 => "S4",
            System::S5 => "S5",
        }
    }
}

impl std::fmt::Display for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(System::S1),
            "S2" => Ok(System::S2),
            "S3" => Ok(System::S3),
            "S4" => Ok(System::S4),
            "S5" => Ok(System::S5),
            other => Err(Error::Config(format!("unknown system {other:?}; expected S1..S5"))),
        }
    }
}

/// Architecture and input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Model width; each GRU direction has `d / 2` units.
    pub d: usize,
    pub heads: usize,
    pub classifier_mode: ClassifierMode,
    pub fusion_mode: FusionMode,
    pub dropout_p: f64,
    /// Divide attention scores by `sqrt(d / heads)`.
    #[serde(default)]
    pub scaled_attention: bool,
    pub d_a: usize,
    pub d_t: usize,
    pub d_s: usize,
    pub classes: usize,
}

impl ModelConfig {
    pub const DEFAULT_D: usize = 100;
    pub const DEFAULT_HEADS: usize = 4;
    pub const DEFAULT_DROPOUT: f64 = 0.2;

    /// Default-sized model for `system` over the given feature dimensions.
    pub fn for_system(system: System, d_a: usize, d_t: usize, d_s: usize, classes: usize) -> Self {
        ModelConfig {
            d: Self::DEFAULT_D,
            heads: Self::DEFAULT_HEADS,
            classifier_mode: system.classifier(),
            fusion_mode: system.fusion(),
            dropout_p: Self::DEFAULT_DROPOUT,
            scaled_attention: false,
            d_a,
            d_t,
            d_s,
            classes,
        }
    }

    pub fn system(&self) -> Option<System> {
        System::ALL
            .into_iter()
            .find(|s| s.fusion() == self.fusion_mode && s.classifier() == self.classifier_mode)
    }

    pub fn gru_hidden(&self) -> usize {
        self.d / 2
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("model dim d must be positive".into()));
        }
        if self.classifier_mode.uses_attention() && (self.heads == 0 || !self.d.is_multiple_of(self.heads)) {
            return Err(Error::Config(format!(
                "model dim d = {} is not divisible by {} heads",
                self.d, self.heads
            )));
        }
        if self.classifier_mode.uses_gru() && !self.d.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "model dim d = {} must be even to split across two GRU directions",
                self.d
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout p must be in [0, 1), got {}", self.dropout_p)));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.d_a == 0 || self.d_t == 0 || (self.fusion_mode.uses_speaker() && self.d_s == 0) {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        Ok(())
    }
}
