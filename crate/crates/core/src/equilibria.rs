//! Equilibria of the derived system that governs one delay interval,
//!
//! `f_i(u) = -u_i + C0 bK sum_j J0_ij tanh(lambda u_j) + C1 bK b1 xi_i`,
//!
//! where `xi` is the pattern that the delayed term is currently forcing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::learning::{beta1_from_beta, NetworkParams};

/// Largest `N` for which equilibria are located individually.
pub const MAX_ENUMERATION_N: usize = 3;

/// Both possible eigenvalues of the linearization at a memory state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryEigenvalues {
    /// Along the range of `J0`.
    pub sigma_plus: f64,
    /// Along its kernel.
    pub sigma_minus: f64,
}

/// `g(b1) = arctanh(b1) (1 - b1^2) / b1`, decreasing from 1 to 0 on `(0, 1)`.
pub fn gain_factor(beta1: f64) -> f64 {
    beta1.atanh() * (1.0 - beta1 * beta1) / beta1
}

pub fn memory_eigenvalues(params: &NetworkParams) -> MemoryEigenvalues {
    MemoryEigenvalues {
        sigma_plus: params.c0 * gain_factor(params.beta1) - 1.0,
        sigma_minus: -1.0,
    }
}

/// Critical points `(p, q)` of `-u + C0 bK J0_ii tanh(lambda u)`, present
/// when `C0 beta J0_ii > 1`.
pub fn turning_points(c0: f64, beta: f64, lambda: f64, j0_ii: f64) -> Option<(f64, f64)> {
    let k = c0 * beta * j0_ii;
    if k <= 1.0 {
        return None;
    }
    let q = ((k - 1.0) / k).sqrt().atanh() / lambda;
    Some((-q, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSystem {
    pub j0: DMatrix<f64>,
    pub params: NetworkParams,
    pub forcing_pattern: Vec<i8>,
}

impl DerivedSystem {
    pub fn new(j0: DMatrix<f64>, params: NetworkParams, forcing_pattern: Vec<i8>) -> Result<Self> {
        if !j0.is_square() || j0.nrows() != forcing_pattern.len() {
            return Err(Error::InvalidArgument("J0 and forcing pattern sizes disagree".into()));
        }
        params.validate()?;
        if forcing_pattern.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("forcing pattern must be +-1".into()));
        }
        Ok(Self {
            j0,
            params,
            forcing_pattern,
        })
    }

    pub fn n(&self) -> usize {
        self.forcing_pattern.len()
    }

    fn forcing(&self, i: usize) -> f64 {
        self.params.c1() * self.params.memory_amplitude() * f64::from(self.forcing_pattern[i])
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let lam = self.params.lambda;
        let a = self.params.c0 * self.params.beta_k();
        let t: Vec<f64> = u.iter().map(|&x| (lam * x).tanh()).collect();
        (0..self.n())
            .map(|i| {
                let s: f64 = (0..self.n()).map(|j| self.j0[(i, j)] * t[j]).sum();
                -u[i] + a * s + self.forcing(i)
            })
            .collect()
    }

    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let lam = self.params.lambda;
        let a = self.params.c0 * self.params.beta_k() * lam;
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let th = (lam * u[j]).tanh();
            let d = a * self.j0[(i, j)] * (1.0 - th * th);
            if i == j {
                d - 1.0
            } else {
                d
            }
        })
    }

    /// `u* = bK b1 xi`, an equilibrium whenever `J0 xi = xi`.
    pub fn memory_state(&self) -> Vec<f64> {
        let a = self.params.memory_amplitude();
        self.forcing_pattern.iter().map(|&s| a * f64::from(s)).collect()
    }

    fn diag_gain(&self, i: usize) -> f64 {
        self.params.c0 * self.params.beta_k() * self.j0[(i, i)]
    }

    /// `k_i^+ = C0 bK sum_{j != i} |J0_ij| + C1 bK b1`; `k_i^- = -k_i^+`.
    pub fn envelope_shift(&self, i: usize) -> f64 {
        let off: f64 = (0..self.n()).filter(|&j| j != i).map(|j| self.j0[(i, j)].abs()).sum();
        self.params.c0 * self.params.beta_k() * off + self.params.c1() * self.params.memory_amplitude()
    }

    /// `-u + C0 bK J0_ii tanh(lambda u) + shift`.
    fn envelope(&self, i: usize, shift: f64, u: f64) -> f64 {
        -u + self.diag_gain(i) * (self.params.lambda * u).tanh() + shift
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeBounds {
    /// Lower envelope at the right turning point.
    pub lower_at_q: f64,
    /// Upper envelope at the left turning point.
    pub upper_at_p: f64,
    pub k_minus: f64,
    pub k_plus: f64,
}

pub fn envelope_bounds(system: &DerivedSystem) -> Vec<Result<EnvelopeBounds>> {
    let prm = &system.params;
    (0..system.n())
        .map(|i| {
            let (p, q) = turning_points(prm.c0, prm.beta(), prm.lambda, system.j0[(i, i)])
                .ok_or(Error::BoundsUnavailable { neuron: i })?;
            let k = system.envelope_shift(i);
            Ok(EnvelopeBounds {
                lower_at_q: system.envelope(i, -k, q),
                upper_at_p: system.envelope(i, k, p),
                k_minus: -k,
                k_plus: k,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountClass {
    One,
    OneOrThree,
    ThreeToTheN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NeuronConditions {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
}

/// How the points entering the contraction condition are chosen.
pub const ETA_RULE: &str =
    "outer envelope roots: c = largest root of the lower envelope, a = smallest root of the upper envelope";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub count_class: CountClass,
    /// All of H1, H2, H3 hold for every neuron: `2^N` stable equilibria.
    pub two_to_the_n_stable: bool,
    pub turning_points: Vec<Option<(f64, f64)>>,
    pub conditions: Vec<NeuronConditions>,
    /// `eta_j` used in H3, per neuron.
    pub eta: Vec<f64>,
    pub eta_rule: &'static str,
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == glo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest and largest root of a function that is positive at `-r` and
/// negative at `r`, located on a uniform scan.
fn outer_roots(g: impl Fn(f64) -> f64, r: f64) -> (f64, f64) {
    let m = 4000;
    let xs: Vec<f64> = (0..=m).map(|k| -r + 2.0 * r * k as f64 / m as f64).collect();
    let changes: Vec<(f64, f64)> = xs
        .windows(2)
        .filter(|w| (g(w[0]) > 0.0) != (g(w[1]) > 0.0))
        .map(|w| (w[0], w[1]))
        .collect();
    let first = changes.first().copied().unwrap_or((-r, r));
    let last = changes.last().copied().unwrap_or((-r, r));
    (bisect(&g, first.0, first.1), bisect(&g, last.0, last.1))
}

pub fn count_equilibria(system: &DerivedSystem) -> EquilibriumReport {
    let prm = &system.params;
    let n = system.n();
    let beta = prm.beta();
    let turning: Vec<Option<(f64, f64)>> = (0..n)
        .map(|i| turning_points(prm.c0, beta, prm.lambda, system.j0[(i, i)]))
        .collect();
    let bounds = envelope_bounds(system);

    let eta: Vec<f64> = (0..n)
        .map(|j| {
            let k = system.envelope_shift(j);
            let r = system.diag_gain(j).abs() + k + 1.0;
            let (_, c) = outer_roots(|u| system.envelope(j, -k, u), r);
            let (a, _) = outer_roots(|u| system.envelope(j, k, u), r);
            let t = |x: f64| (prm.lambda * x).tanh().powi(2);
            if t(c) <= t(a) {
                c
            } else {
                a
            }
        })
        .collect();

    let conditions: Vec<NeuronConditions> = (0..n)
        .map(|i| {
            let h1 = turning[i].is_some();
            let h2 = matches!(&bounds[i], Ok(b) if b.lower_at_q > 0.0 && b.upper_at_p < 0.0);
            let s: f64 = (0..n)
                .map(|j| system.j0[(i, j)].abs() * (1.0 - (prm.lambda * eta[j]).tanh().powi(2)))
                .sum();
            NeuronConditions {
                h1,
                h2,
                h3: prm.c0 * beta * s < 1.0,
            }
        })
        .collect();

    let count_class = if turning.iter().all(Option::is_none) {
        CountClass::One
    } else if conditions.iter().all(|c| c.h1 && c.h2) {
        CountClass::ThreeToTheN
    } else {
        CountClass::OneOrThree
    };
    EquilibriumReport {
        count_class,
        two_to_the_n_stable: conditions.iter().all(|c| c.h1 && c.h2 && c.h3),
        turning_points: turning,
        conditions,
        eta,
        eta_rule: ETA_RULE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub u: Vec<f64>,
    /// Largest real part of the Jacobian spectrum.
    pub max_real_eigenvalue: f64,
    pub stable: bool,
}

fn newton_system(system: &DerivedSystem, mut u: Vec<f64>) -> Option<Vec<f64>> {
    let n = system.n();
    for _ in 0..100 {
        let f = DVector::from_vec(system.eval(&u));
        if f.norm() < 1e-13 {
            return Some(u);
        }
        let step = system.jacobian(&u).lu().solve(&f)?;
        for i in 0..n {
            u[i] -= step[i];
        }
        if u.iter().any(|x| !x.is_finite()) {
            return None;
        }
    }
    let f = DVector::from_vec(system.eval(&u));
    (f.norm() < 1e-11).then_some(u)
}

/// All equilibria for `N <= 3`, by Newton from every combination of the
/// per-coordinate roots of the envelopes and their turning points.
pub fn enumerate_equilibria(system: &DerivedSystem) -> Result<Vec<Equilibrium>> {
    let n = system.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::CapabilityExceeded(format!(
            "equilibria are enumerated only for N <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    let prm = &system.params;
    let candidates: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let k = system.envelope_shift(i);
            let r = system.diag_gain(i).abs() + k + 1.0;
            let mut c = Vec::new();
            for shift in [-k, k, system.forcing(i)] {
                let (lo, hi) = outer_roots(|u| system.envelope(i, shift, u), r);
                c.extend([lo, hi]);
            }
            c.push(0.0);
            if let Some((p, q)) = turning_points(prm.c0, prm.beta(), prm.lambda, system.j0[(i, i)]) {
                c.extend([p, q, 0.5 * p, 0.5 * q, 1.5 * p, 1.5 * q]);
            }
            let steps = 24;
            c.extend((0..=steps).map(|s| -r + 2.0 * r * f64::from(s) / f64::from(steps)));
            c
        })
        .collect();
    let mut seeds: Vec<Vec<f64>> = vec![Vec::new()];
    for cand in &candidates {
        seeds = seeds
            .into_iter()
            .flat_map(|s| {
                cand.iter().map(move |&x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    let found: Vec<Vec<f64>> = seeds.into_par_iter().filter_map(|s| newton_system(system, s)).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for u in found {
        if out
            .iter()
            .all(|v| v.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-8)
        {
            out.push(u);
        }
    }
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out
        .into_iter()
        .map(|u| {
            let m = system
                .jacobian(&u)
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            Equilibrium {
                u,
                max_real_eigenvalue: m,
                stable: m < 0.0,
            }
        })
        .collect())
}

/// Left side of the saddle-node condition at the turning point,
/// `arctanh(sqrt((k-1)/k)) - sqrt(k (k-1)) + C1 arctanh(b1)` with `k = C0 beta`.
pub fn saddle_node_residual(c0: f64, beta: f64, beta1: f64) -> f64 {
    let k = c0 * beta;
    ((k - 1.0) / k).sqrt().atanh() - (k * (k - 1.0)).sqrt() + (1.0 - c0) * beta1.atanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleNodePoint {
    pub beta: f64,
    pub c0_star: f64,
}

/// Saddle-node values of `C0` on `(1/beta, 1]` for each grid `beta`; grid
/// points without a sign change are omitted.
pub fn saddle_node_curve(beta_grid: &[f64]) -> Result<Vec<SaddleNodePoint>> {
    if beta_grid.iter().any(|&b| !(b > 1.0 && b <= 5.0)) {
        return Err(Error::InvalidArgument("saddle-node grid must lie in (1, 5]".into()));
    }
    beta_grid
        .par_iter()
        .map(|&beta| {
            let b1 = beta1_from_beta(beta)?;
            let g = |c0: f64| saddle_node_residual(c0, beta, b1);
            let lo = (1.0 / beta) * (1.0 + 1e-12);
            if g(lo) > 0.0 && g(1.0) < 0.0 {
                Ok(Some(SaddleNodePoint {
                    beta,
                    c0_star: bisect(g, lo, 1.0),
                }))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

pub fn saddle_node_csv(points: &[SaddleNodePoint]) -> String {
    let mut s = String::from("beta,c0_star\n");
    for p in points {
        s.push_str(&format!("{},{}\n", p.beta, p.c0_star));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingEquilibrium {
    /// The equilibria are `0` and `+-u_star` along the diagonal.
    pub u_star: f64,
    pub stable: bool,
}

/// Positive root of `x = bK tanh(lambda x)` with `bK = beta / lambda`.
pub fn ring_equilibria(beta: f64, lambda: f64) -> Result<RingEquilibrium> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    if beta.is_nan() || beta <= 1.0 {
        return Err(Error::OnlyTrivialRoot { beta });
    }
    let bk = beta / lambda;
    let g = |x: f64| bk * (lambda * x).tanh() - x;
    let u_star = bisect(g, bk * 1e-12, bk);
    let sech2 = 1.0 - (lambda * u_star).tanh().powi(2);
    Ok(RingEquilibrium {
        u_star,
        stable: beta < 1.0 / sech2,
    })
}
