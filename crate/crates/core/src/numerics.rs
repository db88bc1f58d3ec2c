//! Dense f64 primitives shared by the rest of the crate: a row-major matrix,
//! the sigmoid / binary-cross-entropy pair, a bias-corrected Adam step, a
//! central-difference gradient checker, and compensated summation.
//!
//! Reductions that feed reported metrics go through [`kahan_sum`] so the
//! result does not depend on how a caller chunks the work.

use crate::error::{Error, Result};

/// Lower clamp for log arguments inside the cross-entropy, keeping the loss
/// finite when a probability saturates to exactly 0 or 1.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dimension("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self * v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec: vector has {} entries, matrix has {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// `self^T * v`, without materializing the transpose.
    pub fn matvec_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matvec_t: vector has {} entries, matrix has {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let s = v[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o += s * a;
            }
        }
        Ok(out)
    }

    pub fn transposed(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Neumaier-compensated sum; exact to within one rounding of the true sum
/// for the magnitudes used here.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_target_range(target: &[f64]) -> Result<()> {
    for (i, &t) in target.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Parameter(format!(
                "target[{i}] = {t} is outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Summed binary cross-entropy of sigmoid(logits) against a (possibly soft)
/// target vector. Log arguments are clamped at [`LOG_CLAMP`] so saturated
/// probabilities cannot produce infinities.
pub fn bce_loss(target: &[f64], logits: &[f64]) -> Result<f64> {
    if target.len() != logits.len() {
        return Err(Error::Dimension(format!(
            "bce: target has {} entries, logits {}",
            target.len(),
            logits.len()
        )));
    }
    check_target_range(target)?;
    let mut acc = 0.0;
    for (&t, &z) in target.iter().zip(logits) {
        if !z.is_finite() {
            return Err(Error::Numeric("bce: non-finite logit".into()));
        }
        let p = sigmoid(z);
        acc -= t * p.max(LOG_CLAMP).ln() + (1.0 - t) * (1.0 - p).max(LOG_CLAMP).ln();
    }
    Ok(acc)
}

/// Gradient of [`bce_loss`] with respect to the logits: `sigmoid(z) - t`.
pub fn bce_grad(target: &[f64], logits: &[f64]) -> Result<Vec<f64>> {
    if target.len() != logits.len() {
        return Err(Error::Dimension(format!(
            "bce grad: target has {} entries, logits {}",
            target.len(),
            logits.len()
        )));
    }
    check_target_range(target)?;
    Ok(target
        .iter()
        .zip(logits)
        .map(|(&t, &z)| sigmoid(z) - t)
        .collect())
}

/// Adam hyper-parameters. Defaults are the standard (0.9, 0.999, 1e-8) with
/// learning rate 1e-3.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams { lr, ..AdamParams::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Parameter(format!("adam: lr {} must be positive", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Parameter(format!("adam: {name} {b} must be in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("adam: epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// First/second moment buffers plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hp: &AdamParams,
) -> Result<()> {
    hp.validate()?;
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Dimension(format!(
            "adam: params {} / grads {} / state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("adam: non-finite gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
    Ok(())
}

/// Compares an analytic gradient against central differences of `f`.
/// Returns `max_i |analytic[i] - fd[i]| / max(1, |fd[i]|)`.
pub fn grad_check<F: Fn(&[f64]) -> f64>(
    f: F,
    analytic: &[f64],
    params: &[f64],
    h: f64,
) -> Result<f64> {
    if analytic.len() != params.len() {
        return Err(Error::Dimension(format!(
            "grad_check: analytic has {} entries, params {}",
            analytic.len(),
            params.len()
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!("grad_check: step {h} must be positive")));
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        work[i] = params[i] + h;
        let up = f(&work);
        work[i] = params[i] - h;
        let down = f(&work);
        work[i] = params[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!("grad_check: non-finite loss at coordinate {i}")));
        }
        let fd = (up - down) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / fd.abs().max(1.0);
        if err > worst {
            worst = err;
        }
    }
    Ok(worst)
}
