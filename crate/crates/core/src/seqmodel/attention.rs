//! Multi-head dot-product self-attention:
//! `head_i = softmax((H W_Q,i)(H W_K,i)ᵀ) (H W_V,i)`, `R = [head_1 … head_h]`.
//!
//! Scores are unscaled unless `scaled` is set, in which case they are divided
//! by `sqrt(d / h)` before the softmax. No positional information is added.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, ParamId, Tape, Var};

/// Projections of one head, each `d×(d/h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<T = Matrix> {
    pub w_q: T,
    pub w_k: T,
    pub w_v: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttnParams<T = Matrix> {
    pub heads: Vec<HeadParams<T>>,
}

impl<T> AttnParams<T> {
    pub fn map<'m, U>(&'m self, prefix: &str, f: &mut impl FnMut(String, &'m T) -> U) -> AttnParams<U> {
        AttnParams {
            heads: self
                .heads
                .iter()
                .enumerate()
                .map(|(i, h)| HeadParams {
                    w_q: f(format!("{prefix}.head{i}.w_q"), &h.w_q),
                    w_k: f(format!("{prefix}.head{i}.w_k"), &h.w_k),
                    w_v: f(format!("{prefix}.head{i}.w_v"), &h.w_v),
                })
                .collect(),
        }
    }

    pub fn for_each_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut T)) {
        for (i, h) in self.heads.iter_mut().enumerate() {
            f(format!("{prefix}.head{i}.w_q"), &mut h.w_q);
            f(format!("{prefix}.head{i}.w_k"), &mut h.w_k);
            f(format!("{prefix}.head{i}.w_v"), &mut h.w_v);
        }
    }
}

impl AttnParams<Matrix> {
    pub fn zeros(d: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(Error::Config(format!("model dim d = {d} is not divisible by {heads} heads")));
        }
        let dk = d / heads;
        Ok(AttnParams {
            heads: (0..heads)
                .map(|_| HeadParams {
                    w_q: Matrix::zeros(d, dk),
                    w_k: Matrix::zeros(d, dk),
                    w_v: Matrix::zeros(d, dk),
                })
                .collect(),
        })
    }
}

/// Output of the attention layer on a tape.
#[derive(Debug, Clone)]
pub struct AttentionVars {
    /// `L×d`.
    pub r: Var,
    /// Each `L×(d/h)`.
    pub heads: Vec<Var>,
}

pub fn self_attention_on_tape(tape: &mut Tape<'_>, p: &AttnParams<Var>, h: Var, scaled: bool) -> Result<AttentionVars> {
    let mut heads = Vec::with_capacity(p.heads.len());
    for head in &p.heads {
        let q = tape.matmul(h, head.w_q)?;
        let k = tape.matmul(h, head.w_k)?;
        let v = tape.matmul(h, head.w_v)?;
        let k_t = tape.transpose(k);
        let mut scores = tape.matmul(q, k_t)?;
        if scaled {
            let dk = tape.shape(head.w_q).1 as f64;
            scores = tape.scale(scores, 1.0 / dk.sqrt());
        }
        let weights = tape.softmax_rows(scores);
        heads.push(tape.matmul(weights, v)?);
    }
    let r = tape.concat_cols(&heads)?;
    Ok(AttentionVars { r, heads })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `L×d` concatenation of the heads.
    pub r: Matrix,
    /// Each `L×(d/h)`.
    pub heads: Vec<Matrix>,
}

/// Multi-head self-attention on a plain `L×d` matrix.
pub fn self_attention(p: &AttnParams, h: &Matrix, scaled: bool) -> Result<AttentionOutput> {
    let d = h.cols();
    if let Some(first) = p.heads.first() {
        if first.w_q.rows() != d || !d.is_multiple_of(p.heads.len()) {
            return Err(Error::Config(format!(
                "attention expects d = {} split over {} heads, input is {}",
                first.w_q.rows(),
                p.heads.len(),
                h.shape()
            )));
        }
    }
    let mut tape = Tape::new();
    let mut next = 0;
    let vars = p.map("attn", &mut |_, m| {
        let v = tape.param(ParamId(next), m);
        next += 1;
        v
    });
    let hv = tape.constant_ref(h);
    let out = self_attention_on_tape(&mut tape, &vars, hv, scaled)?;
    Ok(AttentionOutput {
        r: tape.value(out.r).clone(),
        heads: out.heads.iter().map(|&v| tape.value(v).clone()).collect(),
    })
}
