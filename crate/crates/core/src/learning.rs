//! Pseudoinverse learning rule: the projection component `J0 = Sigma Sigma+`
//! and the associating component `J = Sigma P Sigma+`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cycle::{permutation_matrix, require_admissible, BinaryCycle, RANK_RTOL};
use crate::error::{Error, Result};
use crate::linalg;

/// Storage residual bound used by [`verify_storage`].
pub const STORAGE_TOL: f64 = 1e-9;

/// Moore-Penrose pseudoinverse via SVD, dropping singular values at or below
/// `RANK_RTOL` times the largest.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut out = DMatrix::zeros(cols, rows);
    if m.is_empty() {
        return out;
    }
    let d = linalg::svd(m);
    let max = d.s.iter().copied().fold(0.0, f64::max);
    for (k, &s) in d.s.iter().enumerate() {
        if max > 0.0 && s > RANK_RTOL * max {
            // out += v_k u_k^T / s
            out += (d.v.column(k) * d.u.column(k).transpose()) / s;
        }
    }
    out
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// The two connectivity components built from an admissible cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    pub j0: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub source_cycle: BinaryCycle,
}

impl Connectivity {
    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    /// A connectivity that did not come from the learning rule, for
    /// experiments with hand-built matrices. `source_cycle` is kept only as
    /// a label.
    pub fn from_matrices(j0: DMatrix<f64>, j: DMatrix<f64>, source_cycle: BinaryCycle) -> Result<Self> {
        let n = source_cycle.n_neurons();
        if j0.shape() != (n, n) || j.shape() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "connectivity must be {n}x{n} to match the cycle"
            )));
        }
        Ok(Self { j0, j, source_cycle })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConnectivityExport::from(self)).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: ConnectivityExport = serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let n = e.n;
        if e.j0.len() != n * n || e.j.len() != n * n {
            return Err(Error::InvalidArgument("matrix length does not match n".into()));
        }
        Self::from_matrices(
            DMatrix::from_row_slice(n, n, &e.j0),
            DMatrix::from_row_slice(n, n, &e.j),
            e.cycle,
        )
    }
}

/// JSON layout of an exported connectivity; matrices are row-major.
#[derive(Debug, Serialize, Deserialize)]
pub struct ConnectivityExport {
    pub n: usize,
    pub p: usize,
    pub j0: Vec<f64>,
    pub j: Vec<f64>,
    pub cycle: BinaryCycle,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

impl From<&Connectivity> for ConnectivityExport {
    fn from(c: &Connectivity) -> Self {
        Self {
            n: c.n(),
            p: c.source_cycle.period(),
            j0: row_major(&c.j0),
            j: row_major(&c.j),
            cycle: c.source_cycle.clone(),
        }
    }
}

pub fn build_connectivity(cycle: &BinaryCycle) -> Result<Connectivity> {
    require_admissible(cycle)?;
    let sigma = cycle.to_matrix();
    let pinv = pseudoinverse(&sigma);
    let p = permutation_matrix(cycle.period())?;
    let j0 = &sigma * &pinv;
    let j = &sigma * p * &pinv;
    Ok(Connectivity {
        j0,
        j,
        source_cycle: cycle.clone(),
    })
}

/// `max |J Sigma - Sigma P|` for an arbitrary cycle against a fixed `J`.
pub fn storage_residual(j: &DMatrix<f64>, cycle: &BinaryCycle) -> f64 {
    let sigma = cycle.to_matrix();
    let p = permutation_matrix(cycle.period()).expect("cycle period >= 2");
    max_abs(&(j * &sigma - &sigma * p))
}

/// True iff the transition component maps each stored pattern to its successor.
pub fn verify_storage(conn: &Connectivity) -> bool {
    storage_residual(&conn.j, &conn.source_cycle) < STORAGE_TOL
}

/// Gain and mixing parameters of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Weight of the projection component; `C1 = 1 - C0`.
    pub c0: f64,
    pub beta1: f64,
    pub lambda: f64,
    /// Delay, ms.
    pub tau: f64,
}

impl NetworkParams {
    pub fn new(c0: f64, beta1: f64, lambda: f64, tau: f64) -> Result<Self> {
        let p = Self { c0, beta1, lambda, tau };
        p.validate()?;
        Ok(p)
    }

    /// Parameterizes by the dimensionless gain `beta = arctanh(beta1) / beta1`.
    pub fn from_beta(c0: f64, beta: f64, lambda: f64, tau: f64) -> Result<Self> {
        Self::new(c0, beta1_from_beta(beta)?, lambda, tau)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.c0) {
            return bad("c0 must lie in [0, 1]");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return bad("beta1 must lie in (0, 1)");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau must be non-negative");
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        1.0 - self.c0
    }

    pub fn beta(&self) -> f64 {
        beta_from_beta1(self.beta1)
    }

    pub fn beta_k(&self) -> f64 {
        self.beta() / self.lambda
    }

    /// Amplitude `beta_K beta1` of a memory state.
    pub fn memory_amplitude(&self) -> f64 {
        self.beta1.atanh() / self.lambda
    }

    pub fn with_c0(self, c0: f64) -> Self {
        Self { c0, ..self }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }
}

pub fn beta_from_beta1(beta1: f64) -> f64 {
    beta1.atanh() / beta1
}

/// Inverts `arctanh(b) / b = beta` on `(0, 1)` by bisection.
pub fn beta1_from_beta(beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must exceed 1, got {beta}")));
    }
    let (mut lo, mut hi) = (1e-12_f64, 1.0 - 1e-12);
    if beta_from_beta1(hi) < beta {
        return Err(Error::InvalidArgument(format!("beta = {beta} is out of range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_from_beta1(mid) < beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = ((beta_from_beta1(lo) - beta).abs(), (beta_from_beta1(hi) - beta).abs());
    Ok(if rl <= rh { lo } else { hi })
}
