//! Dense matrices, their backward rules, an operation tape and a
//! finite-difference gradient oracle.

pub mod backward;
pub mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::{grad_check, numeric_gradient, GradCheckReport, ParamCheck};
pub use matrix::{sigmoid, Matrix};
pub use tape::{GradStore, ParamId, Tape, Var};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `Σ_t −log max(probs[t, y_t], PROB_FLOOR)` and the number of clamped rows.
pub fn cross_entropy_sum(probs: &Matrix, labels: &[usize]) -> (f64, usize) {
    let mut clamped = 0;
    let loss = labels
        .iter()
        .enumerate()
        .map(|(t, &y)| {
            let p = probs.get(t, y);
            if p < PROB_FLOOR {
                clamped += 1;
                return -PROB_FLOOR.ln();
            }
            // NaN falls through so divergence stays visible.
            -p.ln()
        })
        .sum();
    (loss, clamped)
}
