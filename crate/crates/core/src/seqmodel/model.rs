use std::fs;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{self_attention_on_tape, AttentionVars, AttnParams};
use super::config::{ClassifierMode, ModelConfig};
use super::gru::{bi_gru_on_tape, GruParams};
use crate::data::Dialog;
use crate::error::{Error, Result};
use crate::fusion::{fuse_dialog_on_tape, FusionParams};
use crate::tensor::{grad_check, GradCheckReport, GradStore, Matrix, ParamId, Tape, Var};

/// Output projection: `w_out` is `C×d`, `b_out` is `C×1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<T = Matrix> {
    pub w_out: T,
    pub b_out: T,
}

/// Every trainable tensor of the model.
///
/// [`Params::map`] and [`Params::for_each_mut`] visit tensors in the same
/// canonical order; a tensor's position in that order is its [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T = Matrix> {
    pub fusion: FusionParams<T>,
    /// `d×d` input projection of the attention-only classifier.
    pub input_proj: Option<T>,
    pub gru: Option<GruParams<T>>,
    pub attn: Option<AttnParams<T>>,
    pub classifier: ClassifierParams<T>,
}

impl<T> Params<T> {
    pub fn map<'m, U>(&'m self, f: &mut impl FnMut(String, &'m T) -> U) -> Params<U> {
        Params {
            fusion: self.fusion.map("fusion", f),
            input_proj: self.input_proj.as_ref().map(|p| f("input_proj".into(), p)),
            gru: self.gru.as_ref().map(|g| g.map("gru", f)),
            attn: self.attn.as_ref().map(|a| a.map("attn", f)),
            classifier: ClassifierParams {
                w_out: f("classifier.w_out".into(), &self.classifier.w_out),
                b_out: f("classifier.b_out".into(), &self.classifier.b_out),
            },
        }
    }

    pub fn for_each_mut(&mut self, f: &mut impl FnMut(String, &mut T)) {
        self.fusion.for_each_mut("fusion", f);
        if let Some(p) = &mut self.input_proj {
            f("input_proj".into(), p);
        }
        if let Some(g) = &mut self.gru {
            g.for_each_mut("gru", f);
        }
        if let Some(a) = &mut self.attn {
            a.for_each_mut("attn", f);
        }
        f("classifier.w_out".into(), &mut self.classifier.w_out);
        f("classifier.b_out".into(), &mut self.classifier.b_out);
    }
}

impl Params<Matrix> {
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        let mode = cfg.classifier_mode;
        Ok(Params {
            fusion: FusionParams::zeros(cfg.fusion_mode, d, cfg.d_a, cfg.d_t, cfg.d_s),
            input_proj: (mode == ClassifierMode::AttnOnly).then(|| Matrix::zeros(d, d)),
            gru: mode.uses_gru().then(|| GruParams::zeros(d)),
            attn: if mode.uses_attention() {
                Some(AttnParams::zeros(d, cfg.heads)?)
            } else {
                None
            },
            classifier: ClassifierParams {
                w_out: Matrix::zeros(cfg.classes, d),
                b_out: Matrix::zeros(cfg.classes, 1),
            },
        })
    }
}

/// Whether a tensor is a bias (zero-initialised).
fn is_bias(name: &str) -> bool {
    name.rsplit('.').next().is_some_and(|leaf| leaf.starts_with("b_"))
}

/// Class distributions plus intermediate values of one classifier pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `L×C`, rows sum to one.
    pub probs: Matrix,
    /// Attention output `R` (`L×d`) when the classifier has an attention layer.
    pub attention: Option<Matrix>,
    /// Per-head outputs, each `L×(d/h)`.
    pub heads: Vec<Matrix>,
}

/// End-to-end prediction for a dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: Matrix,
    /// Per-utterance fusion weights (`1×M`), absent for `ADD` fusion.
    pub attn_weights: Vec<Option<Matrix>>,
}

impl Prediction {
    /// Argmax per utterance; ties resolve to the lowest class index.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.probs.rows()).map(|t| self.probs.argmax_row(t)).collect()
    }
}

/// Loss of one dialog and its contribution to the parameter gradients.
#[derive(Debug, Clone)]
pub struct DialogLoss {
    /// `Σ_t −log p_t[y_t] / denom`.
    pub loss: f64,
    pub grads: GradStore,
    /// Rows whose true-class probability hit the log clamp.
    pub clamped: usize,
}

/// Model configuration and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Params,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    params: Vec<NamedTensor>,
}

impl Model {
    /// Glorot-uniform weights and zero biases drawn from `seed`, in canonical order.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        let mut params = Params::zeros(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        params.for_each_mut(&mut |name, m| {
            if !is_bias(&name) {
                *m = Matrix::glorot(m.rows(), m.cols(), &mut rng);
            }
        });
        Ok(Model { config, params })
    }

    pub fn zeros(config: ModelConfig) -> Result<Model> {
        let params = Params::zeros(&config)?;
        Ok(Model { config, params })
    }

    pub fn from_params(config: ModelConfig, params: Params) -> Result<Model> {
        let want = Params::zeros(&config)?;
        let mut shapes = Vec::new();
        want.map(&mut |n, m| shapes.push((n, m.shape())));
        let mut got = Vec::new();
        params.map(&mut |n, m| got.push((n, m.shape())));
        if shapes != got {
            return Err(Error::Config(format!(
                "parameter layout does not match config: expected {shapes:?}, got {got:?}"
            )));
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Dropout rate used on the classifier input in train mode.
    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout p must be in [0, 1), got {p}")));
        }
        self.config.dropout_p = p;
        Ok(())
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.params.map(&mut |n, _| names.push(n));
        names
    }

    pub fn param_matrices(&self) -> Vec<&Matrix> {
        let mut mats = Vec::new();
        self.params.map(&mut |_, m| mats.push(m));
        mats
    }

    /// Replaces every parameter from a list in canonical order.
    pub fn set_params_flat(&mut self, flat: &[Matrix]) -> Result<()> {
        let count = self.param_matrices().len();
        if flat.len() != count {
            return Err(Error::Config(format!("expected {count} tensors, got {}", flat.len())));
        }
        let mut err = None;
        let mut i = 0;
        self.params.for_each_mut(&mut |name, m| {
            if flat[i].shape() != m.shape() && err.is_none() {
                err = Some(Error::Config(format!(
                    "{name}: expected {}, got {}",
                    m.shape(),
                    flat[i].shape()
                )));
            } else {
                *m = flat[i].clone();
            }
            i += 1;
        });
        err.map_or(Ok(()), Err)
    }

    pub fn num_parameters(&self) -> usize {
        self.param_matrices().iter().map(|m| m.len()).sum()
    }

    pub fn zero_grads(&self) -> GradStore {
        GradStore::zeros_like(self.param_matrices())
    }

    fn register<'a>(&'a self, tape: &mut Tape<'a>) -> Params<Var> {
        let mut next = 0;
        self.params.map(&mut |_, m| {
            let v = tape.param(ParamId(next), m);
            next += 1;
            v
        })
    }

    /// Classifier on an `L×d` fused sequence. Dropout is applied only when
    /// `train_mode` is set, using `rng` for the mask.
    pub fn classify_dialog(
        &self,
        fused: &Matrix,
        train_mode: bool,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Classification> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let seq = tape.constant_ref(fused);
        let dropout = dropout_rng(train_mode, rng)?;
        let (logits, attn) = classifier_on_tape(&mut tape, &vars, &self.config, seq, dropout)?;
        Ok(Classification {
            probs: tape.value(logits).softmax_rows(),
            attention: attn.as_ref().map(|a| tape.value(a.r).clone()),
            heads: attn
                .map(|a| a.heads.iter().map(|&h| tape.value(h).clone()).collect())
                .unwrap_or_default(),
        })
    }

    /// Fusion plus classifier in inference mode.
    pub fn predict(&self, dialog: &Dialog) -> Result<Prediction> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let (seq, alphas) = fuse_dialog_on_tape(&mut tape, &vars.fusion, dialog)?;
        let (logits, _) = classifier_on_tape(&mut tape, &vars, &self.config, seq, None)?;
        Ok(Prediction {
            probs: tape.value(logits).softmax_rows(),
            attn_weights: alphas
                .into_iter()
                .map(|a| a.map(|v| tape.value(v).clone()))
                .collect(),
        })
    }

    /// Cross-entropy of `dialog` summed over utterances and divided by `denom`,
    /// with gradients for every parameter. Passing an `rng` enables dropout.
    pub fn loss_and_grad(&self, dialog: &Dialog, denom: f64, rng: Option<&mut dyn RngCore>) -> Result<DialogLoss> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape);
        let (seq, _) = fuse_dialog_on_tape(&mut tape, &vars.fusion, dialog)?;
        let (logits, _) = classifier_on_tape(&mut tape, &vars, &self.config, seq, rng)?;
        let labels = dialog.labels();
        let (loss, clamped) = tape.softmax_cross_entropy(logits, &labels, denom)?;
        let mut grads = self.zero_grads();
        tape.backward(loss, &mut grads)?;
        Ok(DialogLoss {
            loss: tape.value(loss).get(0, 0),
            grads,
            clamped,
        })
    }

    /// Loss summed over `dialogs` (mean over all their utterances) with gradients, dropout off.
    pub fn batch_loss(&self, dialogs: &[Dialog]) -> Result<(f64, GradStore)> {
        let denom: usize = dialogs.iter().map(Dialog::len).sum();
        let mut grads = self.zero_grads();
        let mut loss = 0.0;
        for d in dialogs {
            let part = self.loss_and_grad(d, denom as f64, None)?;
            loss += part.loss;
            grads.merge(&part.grads)?;
        }
        Ok((loss, grads))
    }

    /// Central-difference check of every parameter gradient of [`Model::batch_loss`].
    pub fn grad_check(&self, dialogs: &[Dialog], tol: f64) -> Result<GradCheckReport> {
        let flat: Vec<Matrix> = self.param_matrices().into_iter().cloned().collect();
        let mut probe = self.clone();
        grad_check(
            |ps| {
                probe.set_params_flat(ps)?;
                let (loss, grads) = probe.batch_loss(dialogs)?;
                Ok((loss, grads.as_slice().to_vec()))
            },
            &flat,
            &self.param_names(),
            tol,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut params = Vec::new();
        self.params.map(&mut |name, m| {
            params.push(NamedTensor {
                name,
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
        });
        let ckpt = Checkpoint {
            config: self.config.clone(),
            params,
        };
        Ok(serde_json::to_string_pretty(&ckpt)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        let mut model = Model::zeros(ckpt.config)?;
        let names = model.param_names();
        let stored: Vec<&str> = ckpt.params.iter().map(|t| t.name.as_str()).collect();
        if names != stored {
            return Err(Error::Config(format!(
                "checkpoint tensors {stored:?} do not match config layout {names:?}"
            )));
        }
        let flat = ckpt
            .params
            .into_iter()
            .map(|t| Matrix::new(t.rows, t.cols, t.data))
            .collect::<Result<Vec<_>>>()?;
        model.set_params_flat(&flat)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_json(&fs::read_to_string(path)?)
    }
}

fn dropout_rng(train_mode: bool, rng: Option<&mut dyn RngCore>) -> Result<Option<&mut dyn RngCore>> {
    match (train_mode, rng) {
        (true, None) => Err(Error::Config("train mode needs an rng for dropout masks".into())),
        (true, Some(r)) => Ok(Some(r)),
        (false, _) => Ok(None),
    }
}

/// Inverted-dropout mask: entries are `0` with probability `p`, else `1 / (1 − p)`.
pub fn dropout_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Matrix {
    let keep = 1.0 / (1.0 - p);
    Matrix::from_fn(rows, cols, |_, _| if rng.random::<f64>() < p { 0.0 } else { keep })
}

/// Classifier head on the `L×d` node `seq`; returns `L×C` logits.
pub fn classifier_on_tape(
    tape: &mut Tape<'_>,
    vars: &Params<Var>,
    cfg: &ModelConfig,
    seq: Var,
    dropout: Option<&mut dyn RngCore>,
) -> Result<(Var, Option<AttentionVars>)> {
    let missing = |what: &str| Error::Config(format!("{} classifier is missing {what}", cfg.classifier_mode.label()));
    let (features, attn) = match cfg.classifier_mode {
        ClassifierMode::SaGru => {
            let gru = vars.gru.as_ref().ok_or_else(|| missing("GRU weights"))?;
            let attn = vars.attn.as_ref().ok_or_else(|| missing("attention weights"))?;
            let h = bi_gru_on_tape(tape, gru, seq)?;
            let out = self_attention_on_tape(tape, attn, h, cfg.scaled_attention)?;
            (out.r, Some(out))
        }
        ClassifierMode::AttnOnly => {
            let proj = vars.input_proj.ok_or_else(|| missing("input projection"))?;
            let attn = vars.attn.as_ref().ok_or_else(|| missing("attention weights"))?;
            let x = tape.matmul(seq, proj)?;
            let out = self_attention_on_tape(tape, attn, x, cfg.scaled_attention)?;
            (out.r, Some(out))
        }
        ClassifierMode::GruOnly => {
            let gru = vars.gru.as_ref().ok_or_else(|| missing("GRU weights"))?;
            (bi_gru_on_tape(tape, gru, seq)?, None)
        }
    };
    let features = match dropout {
        Some(rng) if cfg.dropout_p > 0.0 => {
            let (rows, cols) = (tape.shape(features).0, tape.shape(features).1);
            let mask = tape.constant(dropout_mask(rows, cols, cfg.dropout_p, rng));
            tape.hadamard(features, mask)?
        }
        _ => features,
    };
    let w_out_t = tape.transpose(vars.classifier.w_out);
    let b_out_t = tape.transpose(vars.classifier.b_out);
    let logits = tape.matmul(features, w_out_t)?;
    Ok((tape.add_row_broadcast(logits, b_out_t)?, attn))
}
