//! Gated recurrent unit and its bi-directional wrapper.
//!
//! ```text
//! z_t = σ(W_z f_t + U_z h_{t−1} + b_z)
//! r_t = σ(W_r f_t + U_r h_{t−1} + b_r)
//! h_t = (1 − z_t) ∘ h_{t−1} + z_t ∘ tanh(W_h f_t + U_h (r_t ∘ h_{t−1}) + b_h)
//! ```
//!
//! The update gate `z_t` weights the candidate, not the previous state.

use crate::error::Result;
use crate::tensor::{Matrix, ParamId, Tape, Var};

/// Weights of one GRU direction: `W_*` are `hidden×d`, `U_*` are `hidden×hidden`, `b_*` are `hidden×1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruDirection<T = Matrix> {
    pub w_z: T,
    pub w_r: T,
    pub w_h: T,
    pub u_z: T,
    pub u_r: T,
    pub u_h: T,
    pub b_z: T,
    pub b_r: T,
    pub b_h: T,
}

impl<T> GruDirection<T> {
    pub fn map<'m, U>(&'m self, prefix: &str, f: &mut impl FnMut(String, &'m T) -> U) -> GruDirection<U> {
        GruDirection {
            w_z: f(format!("{prefix}.w_z"), &self.w_z),
            w_r: f(format!("{prefix}.w_r"), &self.w_r),
            w_h: f(format!("{prefix}.w_h"), &self.w_h),
            u_z: f(format!("{prefix}.u_z"), &self.u_z),
            u_r: f(format!("{prefix}.u_r"), &self.u_r),
            u_h: f(format!("{prefix}.u_h"), &self.u_h),
            b_z: f(format!("{prefix}.b_z"), &self.b_z),
            b_r: f(format!("{prefix}.b_r"), &self.b_r),
            b_h: f(format!("{prefix}.b_h"), &self.b_h),
        }
    }

    pub fn for_each_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut T)) {
        f(format!("{prefix}.w_z"), &mut self.w_z);
        f(format!("{prefix}.w_r"), &mut self.w_r);
        f(format!("{prefix}.w_h"), &mut self.w_h);
        f(format!("{prefix}.u_z"), &mut self.u_z);
        f(format!("{prefix}.u_r"), &mut self.u_r);
        f(format!("{prefix}.u_h"), &mut self.u_h);
        f(format!("{prefix}.b_z"), &mut self.b_z);
        f(format!("{prefix}.b_r"), &mut self.b_r);
        f(format!("{prefix}.b_h"), &mut self.b_h);
    }
}

impl GruDirection<Matrix> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruDirection {
            w_z: Matrix::zeros(hidden, input),
            w_r: Matrix::zeros(hidden, input),
            w_h: Matrix::zeros(hidden, input),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_z: Matrix::zeros(hidden, 1),
            b_r: Matrix::zeros(hidden, 1),
            b_h: Matrix::zeros(hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_z.rows()
    }
}

/// Forward (`t = 1..L`) and backward (`t = L..1`) directions.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T = Matrix> {
    pub forward: GruDirection<T>,
    pub backward: GruDirection<T>,
}

impl<T> GruParams<T> {
    pub fn map<'m, U>(&'m self, prefix: &str, f: &mut impl FnMut(String, &'m T) -> U) -> GruParams<U> {
        GruParams {
            forward: self.forward.map(&format!("{prefix}.fwd"), f),
            backward: self.backward.map(&format!("{prefix}.bwd"), f),
        }
    }

    pub fn for_each_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut T)) {
        self.forward.for_each_mut(&format!("{prefix}.fwd"), f);
        self.backward.for_each_mut(&format!("{prefix}.bwd"), f);
    }
}

impl GruParams<Matrix> {
    /// `d` inputs, `d / 2` units per direction.
    pub fn zeros(d: usize) -> Self {
        GruParams {
            forward: GruDirection::zeros(d, d / 2),
            backward: GruDirection::zeros(d, d / 2),
        }
    }
}

/// One recurrence step where the input projections `W_* f_t` are already computed.
fn step_projected(
    tape: &mut Tape<'_>,
    p: &GruDirection<Var>,
    xz: Var,
    xr: Var,
    xh: Var,
    h_prev: Var,
) -> Result<Var> {
    let uz = tape.matmul(p.u_z, h_prev)?;
    let z_pre = tape.add(xz, uz)?;
    let z_pre = tape.add(z_pre, p.b_z)?;
    let z = tape.sigmoid(z_pre);

    let ur = tape.matmul(p.u_r, h_prev)?;
    let r_pre = tape.add(xr, ur)?;
    let r_pre = tape.add(r_pre, p.b_r)?;
    let r = tape.sigmoid(r_pre);

    let gated = tape.hadamard(r, h_prev)?;
    let uh = tape.matmul(p.u_h, gated)?;
    let c_pre = tape.add(xh, uh)?;
    let c_pre = tape.add(c_pre, p.b_h)?;
    let candidate = tape.tanh(c_pre);

    let keep = tape.one_minus(z);
    let carried = tape.hadamard(keep, h_prev)?;
    let update = tape.hadamard(z, candidate)?;
    tape.add(carried, update)
}

/// `h_t` from a `d×1` input `f_t` and `hidden×1` previous state.
pub fn gru_step_on_tape(tape: &mut Tape<'_>, p: &GruDirection<Var>, f_t: Var, h_prev: Var) -> Result<Var> {
    let xz = tape.matmul(p.w_z, f_t)?;
    let xr = tape.matmul(p.w_r, f_t)?;
    let xh = tape.matmul(p.w_h, f_t)?;
    step_projected(tape, p, xz, xr, xh, h_prev)
}

/// Runs one direction over the columns of `f_cols` (`d×L`); returns the `hidden×1`
/// states in input-time order.
fn scan(tape: &mut Tape<'_>, p: &GruDirection<Var>, f_cols: Var, reverse: bool) -> Result<Vec<Var>> {
    let len = tape.shape(f_cols).1;
    let hidden = tape.shape(p.u_z).0;
    let xz_all = tape.matmul(p.w_z, f_cols)?;
    let xr_all = tape.matmul(p.w_r, f_cols)?;
    let xh_all = tape.matmul(p.w_h, f_cols)?;
    let mut h = tape.constant(Matrix::zeros(hidden, 1));
    let mut states = vec![h; len];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    };
    for t in order {
        let xz = tape.slice_cols(xz_all, t, 1)?;
        let xr = tape.slice_cols(xr_all, t, 1)?;
        let xh = tape.slice_cols(xh_all, t, 1)?;
        h = step_projected(tape, p, xz, xr, xh, h)?;
        states[t] = h;
    }
    Ok(states)
}

/// Bi-directional GRU over an `L×d` sequence; row `t` of the `L×d` result is
/// `[h_fwd_t ; h_bwd_t]ᵀ`.
pub fn bi_gru_on_tape(tape: &mut Tape<'_>, p: &GruParams<Var>, seq: Var) -> Result<Var> {
    let f_cols = tape.transpose(seq);
    let fwd = scan(tape, &p.forward, f_cols, false)?;
    let bwd = scan(tape, &p.backward, f_cols, true)?;
    let mut cols = Vec::with_capacity(fwd.len());
    for (hf, hb) in fwd.into_iter().zip(bwd) {
        cols.push(tape.concat_rows(&[hf, hb])?);
    }
    let stacked = tape.concat_cols(&cols)?;
    Ok(tape.transpose(stacked))
}

fn register_direction<'a>(tape: &mut Tape<'a>, p: &'a GruDirection, first_id: usize) -> GruDirection<Var> {
    let mut next = first_id;
    p.map("", &mut |_, m| {
        let v = tape.param(ParamId(next), m);
        next += 1;
        v
    })
}

/// One GRU step on plain matrices.
pub fn gru_step(p: &GruDirection, f_t: &Matrix, h_prev: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = register_direction(&mut tape, p, 0);
    let f = tape.constant_ref(f_t);
    let h = tape.constant_ref(h_prev);
    let out = gru_step_on_tape(&mut tape, &vars, f, h)?;
    Ok(tape.value(out).clone())
}

/// Bi-directional GRU on a plain `L×d` matrix.
pub fn bi_gru(p: &GruParams, seq: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let mut next = 0;
    let vars = p.map("gru", &mut |_, m| {
        let v = tape.param(ParamId(next), m);
        next += 1;
        v
    });
    let s = tape.constant_ref(seq);
    let out = bi_gru_on_tape(&mut tape, &vars, s)?;
    Ok(tape.value(out).clone())
}
