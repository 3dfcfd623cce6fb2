//! Deterministic synthetic dialogs.
//!
//! Each utterance carries a latent cue `k ∈ [0, C)`; its acoustic and lexical
//! vectors are the cue's centroids plus Gaussian noise. Speakers come in
//! sessions of two (one per voice group) and alternate turns; their embeddings
//! are speaker centroids plus noise.
//!
//! Label regimes:
//! - `Pointwise`: `y_t = k_t`.
//! - `Contextual`: `y_1 = k_1`, `y_t = π(k_{t−1})` for `t ≥ 2`. The label is a
//!   function of the previous utterance's features, so a classifier that
//!   ignores order cannot recover it.
//! - `SpeakerContextual`: as `Contextual`, but utterances spoken by the second
//!   voice group use a second permutation `π'` that disagrees with `π` on
//!   every class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Dialog, UtteranceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRegime {
    Pointwise,
    Contextual,
    SpeakerContextual,
}

impl std::str::FromStr for LabelRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pointwise" => Ok(LabelRegime::Pointwise),
            "contextual" => Ok(LabelRegime::Contextual),
            "speaker" | "speaker_contextual" | "speaker-contextual" => Ok(LabelRegime::SpeakerContextual),
            other => Err(Error::Config(format!("unknown label regime {other:?}"))),
        }
    }
}

/// Knobs from which a [`SynthSpec`] is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub classes: usize,
    pub d_a: usize,
    pub d_t: usize,
    pub d_s: usize,
    pub speakers: usize,
    pub dialogs: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub sigma: f64,
    pub centroid_scale: f64,
    pub regime: LabelRegime,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            classes: 4,
            d_a: 8,
            d_t: 6,
            d_s: 4,
            speakers: 10,
            dialogs: 250,
            min_len: 6,
            max_len: 10,
            sigma: 0.1,
            centroid_scale: 1.0,
            regime: LabelRegime::Pointwise,
        }
    }
}

/// Fully specified generator: centroids and permutations are explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub class_names: Vec<String>,
    /// Per-cue acoustic centroid.
    pub acoustic_centroids: Vec<Vec<f64>>,
    /// Per-cue lexical centroid.
    pub lexical_centroids: Vec<Vec<f64>>,
    /// Per-speaker embedding centroid; speaker `j` belongs to voice group `j % 2`
    /// and shares a session with its partner `j ^ 1`.
    pub speaker_centroids: Vec<Vec<f64>>,
    /// `π`, used by both contextual regimes.
    pub permutation: Vec<usize>,
    pub dialogs: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub sigma: f64,
    pub regime: LabelRegime,
}

impl SynthSpec {
    /// Draws centroids and `π` from `seed`.
    pub fn from_params(p: &SynthParams, seed: u64) -> Result<SynthSpec> {
        if p.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", p.classes)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c3a7_0001);
        let normal = Normal::new(0.0, p.centroid_scale)
            .map_err(|e| Error::Config(format!("centroid scale: {e}")))?;
        let draw = |n: usize, dim: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect()
        };
        let acoustic_centroids = draw(p.classes, p.d_a, &mut rng);
        let lexical_centroids = draw(p.classes, p.d_t, &mut rng);
        let group_centers = draw(2, p.d_s, &mut rng);
        let speaker_centroids = (0..p.speakers)
            .map(|j| {
                let center = &group_centers[j % 2];
                center
                    .iter()
                    .map(|c| c + 0.5 * p.centroid_scale * rng.random_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let mut permutation: Vec<usize> = (0..p.classes).collect();
        // Reject the identity so the contextual rule never collapses to copying.
        while permutation.iter().enumerate().all(|(i, &v)| i == v) {
            permutation.shuffle(&mut rng);
        }
        Ok(SynthSpec {
            class_names: default_class_names(p.classes),
            acoustic_centroids,
            lexical_centroids,
            speaker_centroids,
            permutation,
            dialogs: p.dialogs,
            min_len: p.min_len,
            max_len: p.max_len,
            sigma: p.sigma,
            regime: p.regime,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// `π'(c) = π((c + 1) mod C)`, which differs from `π(c)` for every `c`.
    pub fn alternate_permutation(&self) -> Vec<usize> {
        let c = self.permutation.len();
        (0..c).map(|k| self.permutation[(k + 1) % c]).collect()
    }

    fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {}", self.sigma)));
        }
        if c < 2 {
            return Err(Error::Config("need at least 2 classes".into()));
        }
        if self.acoustic_centroids.len() != c || self.lexical_centroids.len() != c {
            return Err(Error::Config(format!(
                "need one acoustic and lexical centroid per class ({c}), got {} and {}",
                self.acoustic_centroids.len(),
                self.lexical_centroids.len()
            )));
        }
        if self.speaker_centroids.len() < 2 || !self.speaker_centroids.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "need an even number (>= 2) of speaker centroids, got {}",
                self.speaker_centroids.len()
            )));
        }
        for set in [&self.acoustic_centroids, &self.lexical_centroids, &self.speaker_centroids] {
            let dim = set[0].len();
            if dim == 0 || set.iter().any(|v| v.len() != dim) {
                return Err(Error::Config("centroids must share one nonzero dimension".into()));
            }
        }
        let mut seen = vec![false; c];
        for &p in &self.permutation {
            if p >= c || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Config(format!("{:?} is not a permutation of 0..{c}", self.permutation)));
            }
        }
        if self.permutation.len() != c {
            return Err(Error::Config("permutation length must equal class count".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "invalid dialog length range {}..={}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

fn default_class_names(c: usize) -> Vec<String> {
    if c == super::EMOTION_CLASSES.len() {
        super::EMOTION_CLASSES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..c).map(|k| format!("class{k}")).collect()
    }
}

/// Generates the dataset described by `spec`; the same seed yields identical output.
pub fn synth_dialogs(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let c = spec.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let jitter = |centroid: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        if spec.sigma == 0.0 {
            centroid.to_vec()
        } else {
            centroid.iter().map(|v| v + noise.sample(rng)).collect()
        }
    };
    let alt = spec.alternate_permutation();
    let sessions = spec.speaker_centroids.len() / 2;

    let mut dialogs = Vec::with_capacity(spec.dialogs);
    for i in 0..spec.dialogs {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let session = rng.random_range(0..sessions);
        let first = 2 * session + rng.random_range(0..2usize);
        let mut prev_cue = None;
        let mut utterances = Vec::with_capacity(len);
        for t in 0..len {
            let speaker = if t % 2 == 0 { first } else { first ^ 1 };
            let cue = rng.random_range(0..c);
            let label = match (spec.regime, prev_cue) {
                (LabelRegime::Pointwise, _) | (_, None) => cue,
                (LabelRegime::Contextual, Some(k)) => spec.permutation[k],
                (LabelRegime::SpeakerContextual, Some(k)) => {
                    if speaker % 2 == 0 {
                        spec.permutation[k]
                    } else {
                        alt[k]
                    }
                }
            };
            utterances.push(UtteranceRecord {
                acoustic: jitter(&spec.acoustic_centroids[cue], &mut rng),
                lexical: jitter(&spec.lexical_centroids[cue], &mut rng),
                speaker_emb: jitter(&spec.speaker_centroids[speaker], &mut rng),
                speaker_tag: Some(format!("spk{speaker}")),
                label,
            });
            prev_cue = Some(cue);
        }
        dialogs.push(Dialog {
            id: format!("dlg{i:05}"),
            utterances,
        });
    }

    Ok(Dataset {
        meta: DatasetMeta {
            d_a: spec.acoustic_centroids[0].len(),
            d_t: spec.lexical_centroids[0].len(),
            d_s: spec.speaker_centroids[0].len(),
            class_names: spec.class_names.clone(),
            split_tag: "synthetic".into(),
        },
        dialogs,
    })
}
