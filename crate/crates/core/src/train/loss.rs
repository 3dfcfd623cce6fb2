use crate::error::{Error, Result};
use crate::tensor::{backward, cross_entropy_sum, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    /// Mean over utterances of `−log p[t, y_t]`.
    pub loss: f64,
    /// Gradient with respect to the pre-softmax logits: `(p − onehot) / L`.
    pub logit_grad: Matrix,
    /// Rows whose true-class probability was clamped at [`crate::tensor::PROB_FLOOR`].
    pub clamped: usize,
}

/// Cross-entropy of row distributions `probs` (`L×C`) against `labels`.
pub fn cross_entropy_loss(probs: &Matrix, labels: &[usize]) -> Result<CrossEntropy> {
    if probs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::InvalidMatrix(format!(
            "{} label(s) for {} probability rows",
            labels.len(),
            probs.rows()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= probs.cols()) {
        return Err(Error::InvalidMatrix(format!("label {y} outside {} classes", probs.cols())));
    }
    let n = labels.len() as f64;
    let (sum, clamped) = cross_entropy_sum(probs, labels);
    Ok(CrossEntropy {
        loss: sum / n,
        logit_grad: backward::softmax_cross_entropy(probs, labels, n),
        clamped,
    })
}
