//! Per-utterance modality fusion.
//!
//! In the attention modes each modality is embedded to `d` dimensions, the
//! embeddings are stacked as columns of `U = [W_a a, W_t t, W_s s]` (`d×M`),
//! scored with `α = softmax(w_scoreᵀ tanh(W_fuse U))` and averaged as `f = U αᵀ`.
//! `Add` skips the attention and sums the embeddings.

use serde::{Deserialize, Serialize};

use crate::data::Dialog;
use crate::error::{Error, Result};
use crate::tensor::{GradStore, Matrix, ParamId, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FusionMode {
    /// Audio, text and speaker with attention weights.
    Ats,
    /// Audio and text only, with attention weights.
    At,
    /// Audio, text and speaker embeddings summed.
    Add,
}

impl FusionMode {
    pub fn uses_speaker(self) -> bool {
        !matches!(self, FusionMode::At)
    }

    pub fn uses_attention(self) -> bool {
        !matches!(self, FusionMode::Add)
    }

    pub fn modalities(self) -> usize {
        if self.uses_speaker() {
            3
        } else {
            2
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FusionMode::Ats => "ATS-Fusion",
            FusionMode::At => "AT-Fusion",
            FusionMode::Add => "ADD",
        }
    }
}

/// Fusion weights. `w_s` is absent in `At` mode; `w_fuse` and `w_score` in `Add` mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams<T = Matrix> {
    pub mode: FusionMode,
    /// `d×D_a` acoustic embedding.
    pub w_a: T,
    /// `d×D_t` lexical embedding.
    pub w_t: T,
    /// `d×D_s` speaker embedding.
    pub w_s: Option<T>,
    /// `d×d` projection inside the tanh.
    pub w_fuse: Option<T>,
    /// `d×1` scoring vector.
    pub w_score: Option<T>,
}

impl<T> FusionParams<T> {
    pub fn map<'m, U>(&'m self, prefix: &str, f: &mut impl FnMut(String, &'m T) -> U) -> FusionParams<U> {
        FusionParams {
            mode: self.mode,
            w_a: f(format!("{prefix}.w_a"), &self.w_a),
            w_t: f(format!("{prefix}.w_t"), &self.w_t),
            w_s: self.w_s.as_ref().map(|w| f(format!("{prefix}.w_s"), w)),
            w_fuse: self.w_fuse.as_ref().map(|w| f(format!("{prefix}.w_fuse"), w)),
            w_score: self.w_score.as_ref().map(|w| f(format!("{prefix}.w_score"), w)),
        }
    }

    pub fn for_each_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut T)) {
        f(format!("{prefix}.w_a"), &mut self.w_a);
        f(format!("{prefix}.w_t"), &mut self.w_t);
        if let Some(w) = &mut self.w_s {
            f(format!("{prefix}.w_s"), w);
        }
        if let Some(w) = &mut self.w_fuse {
            f(format!("{prefix}.w_fuse"), w);
        }
        if let Some(w) = &mut self.w_score {
            f(format!("{prefix}.w_score"), w);
        }
    }
}

impl FusionParams<Matrix> {
    /// Zero-filled parameters with the shapes required by `mode`.
    pub fn zeros(mode: FusionMode, d: usize, d_a: usize, d_t: usize, d_s: usize) -> Self {
        FusionParams {
            mode,
            w_a: Matrix::zeros(d, d_a),
            w_t: Matrix::zeros(d, d_t),
            w_s: mode.uses_speaker().then(|| Matrix::zeros(d, d_s)),
            w_fuse: mode.uses_attention().then(|| Matrix::zeros(d, d)),
            w_score: mode.uses_attention().then(|| Matrix::zeros(d, 1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_a.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    /// `d×1` fused representation.
    pub fused: Matrix,
    /// `1×M` modality weights; `None` in `Add` mode.
    pub attn_weights: Option<Matrix>,
}

/// Fuses one utterance on `tape`, returning the `d×1` fused node and the `1×M` weights.
pub fn fuse_on_tape(
    tape: &mut Tape<'_>,
    p: &FusionParams<Var>,
    a: Var,
    t: Var,
    s: Option<Var>,
) -> Result<(Var, Option<Var>)> {
    let ea = tape.matmul(p.w_a, a)?;
    let et = tape.matmul(p.w_t, t)?;
    let es = match (p.mode.uses_speaker(), p.w_s, s) {
        (true, Some(w_s), Some(s)) => Some(tape.matmul(w_s, s)?),
        (true, _, None) => {
            return Err(Error::Config(format!(
                "{} needs speaker features",
                p.mode.label()
            )))
        }
        (false, _, Some(_)) => {
            return Err(Error::Config("AT-Fusion takes no speaker features".into()));
        }
        (true, None, Some(_)) => return Err(Error::Config("speaker embedding matrix missing".into())),
        (false, _, None) => None,
    };

    if !p.mode.uses_attention() {
        let sum = tape.add(ea, et)?;
        let es = es.expect("ADD uses the speaker modality");
        return Ok((tape.add(sum, es)?, None));
    }

    let (Some(w_fuse), Some(w_score)) = (p.w_fuse, p.w_score) else {
        return Err(Error::Config("attention fusion weights missing".into()));
    };
    let mut cols = vec![ea, et];
    cols.extend(es);
    let u_cat = tape.concat_cols(&cols)?;
    let proj = tape.matmul(w_fuse, u_cat)?;
    let p_f = tape.tanh(proj);
    let w_score_t = tape.transpose(w_score);
    let scores = tape.matmul(w_score_t, p_f)?;
    let alpha = tape.softmax_rows(scores);
    let alpha_t = tape.transpose(alpha);
    let fused = tape.matmul(u_cat, alpha_t)?;
    Ok((fused, Some(alpha)))
}

fn register<'a>(tape: &mut Tape<'a>, params: &'a FusionParams) -> FusionParams<Var> {
    let mut next = 0;
    params.map("fusion", &mut |_, m| {
        let v = tape.param(ParamId(next), m);
        next += 1;
        v
    })
}

/// Fuses the features of one utterance.
pub fn fuse(params: &FusionParams, a: &[f64], t: &[f64], s: Option<&[f64]>) -> Result<FusionOutput> {
    let mut tape = Tape::new();
    let vars = register(&mut tape, params);
    let a = tape.constant(Matrix::column(a));
    let t = tape.constant(Matrix::column(t));
    let s = s.map(|s| tape.constant(Matrix::column(s)));
    let (fused, alpha) = fuse_on_tape(&mut tape, &vars, a, t, s)?;
    Ok(FusionOutput {
        fused: tape.value(fused).clone(),
        attn_weights: alpha.map(|v| tape.value(v).clone()),
    })
}

/// Gradient of `Σ weight ∘ fuse(a, t, s)` with respect to every fusion parameter,
/// in [`FusionParams::map`] order.
pub fn fuse_gradient(
    params: &FusionParams,
    a: &[f64],
    t: &[f64],
    s: Option<&[f64]>,
    weight: &Matrix,
) -> Result<(f64, GradStore)> {
    let mut tape = Tape::new();
    let vars = register(&mut tape, params);
    let mut mats = Vec::new();
    params.map("fusion", &mut |_, m| mats.push(m));
    let a = tape.constant(Matrix::column(a));
    let t = tape.constant(Matrix::column(t));
    let s = s.map(|s| tape.constant(Matrix::column(s)));
    let (fused, _) = fuse_on_tape(&mut tape, &vars, a, t, s)?;
    let w = tape.constant(weight.clone());
    let weighted = tape.hadamard(fused, w)?;
    let loss = tape.sum(weighted);
    let mut grads = GradStore::zeros_like(mats);
    tape.backward(loss, &mut grads)?;
    Ok((tape.value(loss).get(0, 0), grads))
}

/// Fused sequence of a dialog.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDialog {
    /// `L×d`; row `i` is `f_iᵀ`.
    pub fused: Matrix,
    pub attn_weights: Vec<Option<Matrix>>,
}

/// Appends the fusion of every utterance of `dialog` to `tape`; returns the `L×d`
/// sequence node and the per-utterance weight nodes.
pub fn fuse_dialog_on_tape(
    tape: &mut Tape<'_>,
    p: &FusionParams<Var>,
    dialog: &Dialog,
) -> Result<(Var, Vec<Option<Var>>)> {
    if dialog.utterances.is_empty() {
        return Err(Error::data(&dialog.id, "dialog has no utterances"));
    }
    let mut columns = Vec::with_capacity(dialog.len());
    let mut alphas = Vec::with_capacity(dialog.len());
    for u in &dialog.utterances {
        let a = tape.constant(Matrix::column(&u.acoustic));
        let t = tape.constant(Matrix::column(&u.lexical));
        let s = p
            .mode
            .uses_speaker()
            .then(|| tape.constant(Matrix::column(&u.speaker_emb)));
        let (f, alpha) = fuse_on_tape(tape, p, a, t, s)?;
        columns.push(f);
        alphas.push(alpha);
    }
    let stacked = tape.concat_cols(&columns)?;
    Ok((tape.transpose(stacked), alphas))
}

/// Fuses every utterance of `dialog` independently, preserving order.
pub fn fuse_dialog(params: &FusionParams, dialog: &Dialog) -> Result<FusedDialog> {
    let mut tape = Tape::new();
    let vars = register(&mut tape, params);
    let (f, alphas) = fuse_dialog_on_tape(&mut tape, &vars, dialog)?;
    Ok(FusedDialog {
        fused: tape.value(f).clone(),
        attn_weights: alphas
            .into_iter()
            .map(|a| a.map(|v| tape.value(v).clone()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UtteranceRecord;
    use crate::tensor::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(mode: FusionMode, d: usize, dims: (usize, usize, usize), seed: u64) -> FusionParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = FusionParams::zeros(mode, d, dims.0, dims.1, dims.2);
        p.for_each_mut("fusion", &mut |_, m| *m = Matrix::uniform(m.rows(), m.cols(), 0.8, &mut rng));
        p
    }

    fn features(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_fuse_matrix_gives_uniform_weights_and_mean_embedding() {
        let mut p = random_params(FusionMode::Ats, 5, (4, 3, 2), 1);
        p.w_fuse = Some(Matrix::zeros(5, 5));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, t, s) = (features(4, &mut rng), features(3, &mut rng), features(2, &mut rng));
        let out = fuse(&p, &a, &t, Some(&s)).unwrap();
        for w in out.attn_weights.unwrap().data() {
            assert_eq!(*w, 1.0 / 3.0);
        }
        let ea = p.w_a.matmul(&Matrix::column(&a)).unwrap();
        let et = p.w_t.matmul(&Matrix::column(&t)).unwrap();
        let es = p.w_s.as_ref().unwrap().matmul(&Matrix::column(&s)).unwrap();
        let mean = ea.add(&et).unwrap().add(&es).unwrap().scale(1.0 / 3.0);
        assert!(out.fused.max_abs_diff(&mean) < 1e-12);
    }

    #[test]
    fn uniform_ats_is_add_over_three() {
        let mut ats = random_params(FusionMode::Ats, 6, (4, 3, 2), 3);
        ats.w_fuse = Some(Matrix::zeros(6, 6));
        let add = FusionParams {
            mode: FusionMode::Add,
            w_fuse: None,
            w_score: None,
            ..ats.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, t, s) = (features(4, &mut rng), features(3, &mut rng), features(2, &mut rng));
        let f_ats = fuse(&ats, &a, &t, Some(&s)).unwrap().fused;
        let out_add = fuse(&add, &a, &t, Some(&s)).unwrap();
        assert!(out_add.attn_weights.is_none());
        assert!(f_ats.max_abs_diff(&out_add.fused.scale(1.0 / 3.0)) < 1e-12);
    }

    #[test]
    fn at_mode_has_two_weights_and_rejects_speaker_input() {
        let p = random_params(FusionMode::At, 4, (3, 3, 2), 5);
        assert!(p.w_s.is_none());
        let out = fuse(&p, &[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1], None).unwrap();
        let w = out.attn_weights.unwrap();
        assert_eq!((w.rows(), w.cols()), (1, 2));
        assert!((w.sum() - 1.0).abs() < 1e-12);
        assert!(fuse(&p, &[0.1, 0.2, 0.3], &[0.3, 0.2, 0.1], Some(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn missing_speaker_and_bad_dims_are_errors() {
        let p = random_params(FusionMode::Ats, 4, (3, 3, 2), 6);
        assert!(fuse(&p, &[0.0; 3], &[0.0; 3], None).is_err());
        assert!(fuse(&p, &[0.0; 2], &[0.0; 3], Some(&[0.0; 2])).is_err());
        let add = random_params(FusionMode::Add, 4, (3, 3, 2), 6);
        assert!(fuse(&add, &[0.0; 3], &[0.0; 3], None).is_err());
    }

    #[test]
    fn raising_one_modality_score_raises_its_weight() {
        // With W_fuse = I and w_score = 1, modality k's score is Σ tanh(column k).
        // Growing a positive acoustic embedding tilts column 0 upwards only.
        let d = 4;
        let mut p = FusionParams::zeros(FusionMode::Ats, d, 2, 2, 2);
        p.w_a = Matrix::filled(d, 2, 0.3);
        p.w_t = Matrix::from_fn(d, 2, |i, j| 0.1 * (i as f64 - j as f64));
        p.w_s = Some(Matrix::from_fn(d, 2, |i, j| 0.05 * (i + j) as f64));
        p.w_fuse = Some(Matrix::identity(d));
        p.w_score = Some(Matrix::filled(d, 1, 1.0));
        let (t, s) = ([0.4, -0.2], [0.7, 0.1]);
        let mut last = 0.0;
        for step in 0..6 {
            let a = [0.1 + step as f64, 0.2 + step as f64];
            let alpha = fuse(&p, &a, &t, Some(&s)).unwrap().attn_weights.unwrap();
            assert!(alpha.get(0, 0) > last, "step {step}: {} <= {last}", alpha.get(0, 0));
            last = alpha.get(0, 0);
        }
    }

    #[test]
    fn fusion_gradient_matches_finite_differences() {
        for mode in [FusionMode::Ats, FusionMode::At, FusionMode::Add] {
            let params = random_params(mode, 5, (4, 3, 2), 7);
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let (a, t, s) = (features(4, &mut rng), features(3, &mut rng), features(2, &mut rng));
            let s = mode.uses_speaker().then_some(s);
            let weight = Matrix::uniform(5, 1, 1.0, &mut rng);
            let mut names = Vec::new();
            let mut flat = Vec::new();
            params.map("fusion", &mut |n, m| {
                names.push(n);
                flat.push(m.clone());
            });
            let rebuild = |ps: &[Matrix]| {
                let mut p = params.clone();
                let mut i = 0;
                p.for_each_mut("fusion", &mut |_, m| {
                    *m = ps[i].clone();
                    i += 1;
                });
                p
            };
            let report = grad_check(
                |ps| {
                    let (v, g) = fuse_gradient(&rebuild(ps), &a, &t, s.as_deref(), &weight)?;
                    Ok((v, g.as_slice().to_vec()))
                },
                &flat,
                &names,
                1e-5,
            )
            .unwrap();
            assert!(report.passed(), "{mode:?}: {report:?}");
            let expected = match mode {
                FusionMode::Ats => 5,
                FusionMode::At => 4,
                FusionMode::Add => 3,
            };
            assert_eq!(report.params.len(), expected);
        }
    }

    fn dialog(n: usize, seed: u64) -> Dialog {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dialog {
            id: "d".into(),
            utterances: (0..n)
                .map(|_| UtteranceRecord {
                    acoustic: features(4, &mut rng),
                    lexical: features(3, &mut rng),
                    speaker_emb: features(2, &mut rng),
                    speaker_tag: None,
                    label: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn singleton_dialog_matches_single_fuse() {
        let p = random_params(FusionMode::Ats, 5, (4, 3, 2), 9);
        let d = dialog(1, 10);
        let seq = fuse_dialog(&p, &d).unwrap();
        let u = &d.utterances[0];
        let one = fuse(&p, &u.acoustic, &u.lexical, Some(&u.speaker_emb)).unwrap();
        assert_eq!((seq.fused.rows(), seq.fused.cols()), (1, 5));
        assert_eq!(seq.fused.transpose(), one.fused);
    }

    #[test]
    fn fusion_is_pointwise_across_the_dialog() {
        let p = random_params(FusionMode::Ats, 5, (4, 3, 2), 11);
        let d = dialog(5, 12);
        let base = fuse_dialog(&p, &d).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let shuffled = fuse_dialog(&p, &d.permuted(&perm)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert_eq!(shuffled.fused.row_slice(i), base.fused.row_slice(j));
        }
        let mut changed = d.clone();
        changed.utterances[2].acoustic[0] += 1.0;
        let after = fuse_dialog(&p, &changed).unwrap();
        for i in 0..5 {
            assert_eq!(after.fused.row_slice(i) == base.fused.row_slice(i), i != 2);
        }
    }

    #[test]
    fn reference_dims_give_d_by_one_outputs() {
        let (d_a, d_t, d_s) = crate::data::REFERENCE_DIMS;
        let p = random_params(FusionMode::Ats, 100, (d_a, d_t, d_s), 13);
        let out = fuse(&p, &vec![0.01; d_a], &vec![0.02; d_t], Some(&vec![0.03; d_s])).unwrap();
        assert_eq!((out.fused.rows(), out.fused.cols()), (100, 1));
    }
}
