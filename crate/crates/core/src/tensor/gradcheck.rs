//! Central-difference gradient oracle.

use super::Matrix;
use crate::error::{Error, Result};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;

/// `|a − n| / max(1, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / f64::max(1.0, analytic.abs() + numeric.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryFailure {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub max_rel_err: f64,
    pub failures: Vec<EntryFailure>,
}

impl ParamCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(ParamCheck::passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }
}

/// Central differences `(f(θ+h) − f(θ−h)) / 2h` for every entry of every parameter.
pub fn numeric_gradient<F>(mut value: F, params: &[Matrix]) -> Result<Vec<Matrix>>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    let mut work = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Matrix::zeros(params[p].rows(), params[p].cols());
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            work[p].data_mut()[i] = orig + STEP;
            let plus = value(&work)?;
            work[p].data_mut()[i] = orig - STEP;
            let minus = value(&work)?;
            work[p].data_mut()[i] = orig;
            g.data_mut()[i] = (plus - minus) / (2.0 * STEP);
        }
        out.push(g);
    }
    Ok(out)
}

/// Compares the analytic gradient returned by `f` against central differences.
///
/// `f` maps a full parameter list to `(value, gradients)`. It is evaluated twice
/// at the base point first; differing values are reported as
/// [`Error::NonDeterministic`].
pub fn grad_check<F>(mut f: F, params: &[Matrix], names: &[String], tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    if names.len() != params.len() {
        return Err(Error::InvalidMatrix(format!(
            "{} names for {} parameters",
            names.len(),
            params.len()
        )));
    }
    if let Some(p) = params.iter().position(|m| !m.is_finite()) {
        return Err(Error::InvalidMatrix(format!("parameter {} is not finite", names[p])));
    }
    let (first, analytic) = f(params)?;
    let (second, _) = f(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    if analytic.len() != params.len() {
        return Err(Error::InvalidMatrix(format!(
            "objective returned {} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    for (g, p) in analytic.iter().zip(params) {
        if g.shape() != p.shape() {
            return Err(Error::shape("grad_check", g.shape(), p.shape()));
        }
    }

    let numeric = numeric_gradient(|ps| f(ps).map(|(v, _)| v), params)?;

    let checks = names
        .iter()
        .zip(analytic.iter().zip(&numeric))
        .map(|(name, (a, n))| {
            let mut max_rel_err: f64 = 0.0;
            let mut failures = Vec::new();
            for (index, (&ga, &gn)) in a.data().iter().zip(n.data()).enumerate() {
                let rel_err = relative_error(ga, gn);
                max_rel_err = max_rel_err.max(rel_err);
                if rel_err.is_nan() || rel_err >= tol {
                    failures.push(EntryFailure {
                        index,
                        analytic: ga,
                        numeric: gn,
                        rel_err,
                    });
                }
            }
            ParamCheck {
                name: name.clone(),
                rows: a.rows(),
                cols: a.cols(),
                max_rel_err,
                failures,
            }
        })
        .collect();

    Ok(GradCheckReport { tol, params: checks })
}
