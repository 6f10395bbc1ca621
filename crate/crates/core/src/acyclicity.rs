//! Smooth acyclicity functionals over weighted adjacency matrices and the
//! threshold-then-repair step that turns a weight matrix into a DAG.
//!
//! `W[(i, j)]` is the weight of the edge `i -> j`.

use nalgebra::DMatrix;

use crate::dbn::Adjacency;
use crate::error::{DbnError, Result};

/// Number of Taylor terms in the exponential core, applied after scaling
/// the argument to 1-norm at most 1/2. Truncation error is below 1e-22.
const TAYLOR_TERMS: usize = 18;

/// Dense square weight matrix with a zero diagonal and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    /// Validates shape and finiteness; the diagonal is zeroed.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(DbnError::Range("weight matrix has non-finite entries".into()));
        }
        m.fill_diagonal(0.0);
        Ok(Self(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(DbnError::Dimension("weight matrix must be square".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn h_expm(&self) -> f64 {
        h_expm(&self.0).expect("square")
    }

    pub fn threshold_and_repair(&self, threshold: f64) -> Result<Adjacency> {
        threshold_and_repair(&self.0, threshold)
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(DbnError::Dimension(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring around a fixed-order Taylor
/// polynomial evaluated with Horner's rule.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(DbnError::Range("matrix exponential of non-finite matrix".into()));
    }
    let mut s = 0i32;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled = a / 2f64.powi(s);
    let eye = DMatrix::<f64>::identity(n, n);
    let mut e = eye.clone();
    for k in (1..=TAYLOR_TERMS).rev() {
        e = &eye + (&scaled * &e) / k as f64;
    }
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

fn hadamard_square(w: &DMatrix<f64>) -> DMatrix<f64> {
    w.component_mul(w)
}

/// `tr exp(W o W) - d`. Zero exactly when the support of `W` is acyclic.
pub fn h_expm(w: &DMatrix<f64>) -> Result<f64> {
    let e = expm(&hadamard_square(w))?;
    Ok((e.trace() - w.nrows() as f64).max(0.0))
}

/// `2 exp(W o W)^T o W`.
pub fn h_expm_grad(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = expm(&hadamard_square(w))?;
    Ok(e.transpose().component_mul(w) * 2.0)
}

/// Value and gradient of `h_expm` from one exponential.
pub fn h_expm_with_grad(w: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let e = expm(&hadamard_square(w))?;
    let h = (e.trace() - w.nrows() as f64).max(0.0);
    Ok((h, e.transpose().component_mul(w) * 2.0))
}

/// `tr((I + mu W o W)^d) - d` and its gradient `2 mu d ((I + mu W o W)^{d-1})^T o W`.
pub fn h_poly(w: &DMatrix<f64>, mu: f64) -> Result<(f64, DMatrix<f64>)> {
    check_square(w)?;
    if !(mu > 0.0) {
        return Err(DbnError::Range(format!("mu = {mu} must be positive")));
    }
    let d = w.nrows();
    if d == 0 {
        return Ok((0.0, DMatrix::zeros(0, 0)));
    }
    let b = DMatrix::<f64>::identity(d, d) + hadamard_square(w) * mu;
    let mut pow = DMatrix::<f64>::identity(d, d);
    for _ in 0..d - 1 {
        pow = &pow * &b;
    }
    let h = ((&pow * &b).trace() - d as f64).max(0.0);
    let grad = pow.transpose().component_mul(w) * (2.0 * mu * d as f64);
    Ok((h, grad))
}

/// Marks edges that lie on some directed cycle: `i -> j` does iff `j`
/// reaches `i`.
fn cycle_edges(adj: &Adjacency) -> Vec<(usize, usize)> {
    let n = adj.rows();
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if adj.get(u, v) && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .collect();
    adj.edges().filter(|&(i, j)| reach[j][i]).collect()
}

/// Keeps off-diagonal entries with `|w| >= threshold` (and `w != 0`), then
/// repeatedly deletes the smallest-magnitude edge that lies on a cycle until
/// none remain. Ties go to the smallest `(row, col)`.
pub fn threshold_and_repair(w: &DMatrix<f64>, threshold: f64) -> Result<Adjacency> {
    check_square(w)?;
    if !(threshold >= 0.0) {
        return Err(DbnError::Range(format!("threshold {threshold} must be nonnegative")));
    }
    let d = w.nrows();
    let mut adj = Adjacency::square(d);
    for i in 0..d {
        for j in 0..d {
            let v = w[(i, j)];
            if i != j && v != 0.0 && v.abs() >= threshold {
                adj.set(i, j, true);
            }
        }
    }
    loop {
        let on_cycle = cycle_edges(&adj);
        let Some(&(i, j)) = on_cycle
            .iter()
            .min_by(|a, b| w[**a].abs().total_cmp(&w[**b].abs()).then_with(|| a.cmp(b)))
        else {
            return Ok(adj);
        };
        adj.set(i, j, false);
    }
}
