//! Linear stability of the trivial solution.
//!
//! With time rescaled by the delay, the characteristic equation factors over
//! the selected indices `n` of the stored cycle into
//!
//! `F(s) = s + tau (1 - C0 beta) - tau C1 beta exp(-s + 2 pi i n / p)`,
//!
//! plus the trivial factor `s + tau` for directions annihilated by the
//! connectivity. Roots with zero real part trace the Hopf and pitchfork
//! boundaries in the `(beta, C0)` plane.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cycle::{require_admissible, selected_indices, BinaryCycle, IndexSelection};
use crate::error::{Error, Result};
use crate::learning::{Connectivity, NetworkParams};

/// Newton seeds per axis of the search rectangle.
pub const SEED_GRID: usize = 41;
/// Roots closer than this are identified.
pub const ROOT_DEDUP: f64 = 1e-6;
/// Accepted roots satisfy `|F(s)| < ROOT_TOL`.
pub const ROOT_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharFactor {
    pub n_index: usize,
    pub p: usize,
    /// Delay in units of the membrane time constant; enters as a rate.
    pub tau: f64,
    pub c0: f64,
    pub beta: f64,
}

impl CharFactor {
    pub fn new(n_index: usize, p: usize, tau: f64, c0: f64, beta: f64) -> Result<Self> {
        if p == 0 || n_index >= p {
            return Err(Error::InvalidArgument(format!(
                "index {n_index} out of range for period {p}"
            )));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument("tau must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&c0) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad (c0, beta) = ({c0}, {beta})")));
        }
        Ok(Self {
            n_index,
            p,
            tau,
            c0,
            beta,
        })
    }

    pub fn theta(&self) -> f64 {
        2.0 * PI * self.n_index as f64 / self.p as f64
    }

    fn coefficients(&self) -> (f64, Complex64) {
        let a = self.tau * (1.0 - self.c0 * self.beta);
        let b = Complex64::from_polar(self.tau * (1.0 - self.c0) * self.beta, self.theta());
        (a, b)
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let (a, b) = self.coefficients();
        s + a - b * (-s).exp()
    }

    pub fn derivative(&self, s: Complex64) -> Complex64 {
        let (_, b) = self.coefficients();
        1.0 + b * (-s).exp()
    }

    pub fn second_derivative(&self, s: Complex64) -> Complex64 {
        let (_, b) = self.coefficients();
        -b * (-s).exp()
    }

    /// The single root of the delay-free factor, in unscaled time.
    pub fn no_delay_root(&self) -> Complex64 {
        Complex64::from_polar((1.0 - self.c0) * self.beta, self.theta()) - (1.0 - self.c0 * self.beta)
    }
}

/// Axis-aligned rectangle of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Region {
    pub const DEFAULT: Region = Region {
        re: (-10.0, 10.0),
        im: (-40.0, 40.0),
    };

    pub fn contains(&self, s: Complex64) -> bool {
        s.re >= self.re.0 && s.re <= self.re.1 && s.im >= self.im.0 && s.im <= self.im.1
    }
}

fn newton(f: &CharFactor, mut s: Complex64) -> Option<Complex64> {
    for _ in 0..80 {
        if s.re < -600.0 || !s.is_finite() {
            return None;
        }
        let d = f.derivative(s);
        if d.norm() == 0.0 {
            return None;
        }
        let step = f.eval(s) / d;
        s -= step;
        if step.norm() < 1e-15 * (1.0 + s.norm()) {
            break;
        }
    }
    (s.is_finite() && f.eval(s).norm() < ROOT_TOL).then_some(s)
}

/// Roots of `F` inside `region`, by decreasing real part, at most `max_roots`.
///
/// For `tau = 0` the closed-form root of the delay-free factor is returned
/// (unscaled time). Otherwise Newton runs from a uniform seed grid; an empty
/// list means no seed converged.
pub fn char_roots(f: &CharFactor, region: &Region, max_roots: usize) -> Vec<Complex64> {
    if f.tau == 0.0 {
        return vec![f.no_delay_root()].into_iter().take(max_roots).collect();
    }
    let m = SEED_GRID;
    let mut roots: Vec<Complex64> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let re = region.re.0 + (region.re.1 - region.re.0) * i as f64 / (m - 1) as f64;
            let im = region.im.0 + (region.im.1 - region.im.0) * j as f64 / (m - 1) as f64;
            if let Some(r) = newton(f, Complex64::new(re, im)) {
                if region.contains(r) && roots.iter().all(|q| (q - r).norm() > ROOT_DEDUP) {
                    roots.push(r);
                }
            }
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    roots.truncate(max_roots);
    roots
}

/// Root of largest real part in the default region.
pub fn leading_root(f: &CharFactor) -> Option<Complex64> {
    char_roots(f, &Region::DEFAULT, usize::MAX).into_iter().next()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hopf,
    Pitchfork,
    Bt,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Hopf => "hopf",
            CurveKind::Pitchfork => "pitchfork",
            CurveKind::Bt => "bt",
        }
    }
}

/// Branch of the boundary solutions: a root `s = i omega` with
/// `omega = theta - side * arccos(x) - 2 pi winding`,
/// `x = (1 - C0 beta) / ((1 - C0) beta)`, and `side = sign(omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Branch {
    pub winding: i32,
    pub side: i8,
}

impl Branch {
    pub const PRINCIPAL: Branch = Branch { winding: 0, side: 1 };
}

/// The zero-root boundary `C0 = (1 + beta) / (2 beta)`; also the largest `C0`
/// for which boundary roots exist at all.
pub fn pitchfork_c0(beta: f64) -> f64 {
    (1.0 + beta) / (2.0 * beta)
}

fn arccos_arg(beta: f64, c0: f64) -> f64 {
    ((1.0 - c0 * beta) / ((1.0 - c0) * beta)).clamp(-1.0, 1.0)
}

/// Rescaled frequency of the boundary root on `branch`.
pub fn boundary_omega(n_index: usize, p: usize, beta: f64, c0: f64, branch: Branch) -> f64 {
    let theta = 2.0 * PI * n_index as f64 / p as f64;
    theta - f64::from(branch.side) * arccos_arg(beta, c0).acos() - 2.0 * PI * f64::from(branch.winding)
}

/// `C0 - (beta + 1) / (2 beta) + omega^2 / (2 tau^2 (beta - 1) beta)`.
pub fn boundary_residual(n_index: usize, p: usize, tau: f64, beta: f64, c0: f64, branch: Branch) -> f64 {
    let w = boundary_omega(n_index, p, beta, c0, branch);
    c0 - pitchfork_c0(beta) + w * w / (2.0 * tau * tau * (beta - 1.0) * beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub beta: f64,
    pub c0: f64,
    /// Imaginary part of the boundary root (rescaled time; unscaled for
    /// delay-free curves).
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub n_index: usize,
    pub branch_id: usize,
    pub kind: CurveKind,
    /// `None` for delay-free curves.
    pub branch: Option<Branch>,
    pub points: Vec<CurvePoint>,
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if g(lo).abs() <= g(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Boundary values of `C0` on one branch at fixed `beta`, excluding the
/// zero root at the right end of the domain.
fn branch_roots(n_index: usize, p: usize, tau: f64, beta: f64, branch: Branch) -> Vec<f64> {
    let cm = pitchfork_c0(beta);
    let g = |c0: f64| boundary_residual(n_index, p, tau, beta, c0, branch);
    let valid = |c0: f64| f64::from(branch.side) * boundary_omega(n_index, p, beta, c0, branch) >= 0.0;
    let last = cm - 1e-9;
    let mut grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|j| last * j as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    // omega changes sign inside the domain: add the last valid point, since
    // roots may sit right next to it
    let edges: Vec<f64> = grid
        .windows(2)
        .filter(|w| valid(w[0]) != valid(w[1]))
        .map(|w| {
            let (mut lo, mut hi) = if valid(w[0]) { (w[0], w[1]) } else { (w[1], w[0]) };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if valid(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        })
        .collect();
    grid.extend(edges);
    grid.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(valid(a) && valid(b)) {
            continue;
        }
        let (ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            out.push(a);
        } else if (ga > 0.0) != (gb > 0.0) && gb != 0.0 {
            out.push(bisect(g, a, b));
        }
    }
    out
}

fn windings(theta: f64, tau: f64, beta: f64) -> std::ops::RangeInclusive<i32> {
    let w = tau * (beta * beta - 1.0).max(0.0).sqrt();
    let lo = ((theta - PI - w) / (2.0 * PI)).ceil() as i32;
    let hi = ((theta + PI + w) / (2.0 * PI)).floor() as i32;
    lo..=hi
}

fn check_beta_grid(beta_grid: &[f64]) -> Result<()> {
    if beta_grid.iter().any(|&b| !(b > 1.0 && b.is_finite())) {
        return Err(Error::InvalidArgument("beta grid values must exceed 1".into()));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("beta grid must be increasing".into()));
    }
    Ok(())
}

/// Orders the roots of one branch into polylines. Along a branch the root
/// frequency is monotone, so points are joined in order of `omega`; a new
/// polyline starts where neighbours are not on adjacent grid points.
fn track(beta_grid: &[f64], mut roots: Vec<(usize, f64, f64)>) -> Vec<Vec<CurvePoint>> {
    roots.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut out: Vec<Vec<CurvePoint>> = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, c0, omega) in roots {
        let pt = CurvePoint {
            beta: beta_grid[i],
            c0,
            omega,
        };
        match (prev, out.last_mut()) {
            (Some(j), Some(l)) if i.abs_diff(j) <= 1 => l.push(pt),
            _ => out.push(vec![pt]),
        }
        prev = Some(i);
    }
    for l in &mut out {
        if l.len() > 1 && l[0].beta > l[l.len() - 1].beta {
            l.reverse();
        }
    }
    out.sort_by(|a, b| a[0].beta.total_cmp(&b[0].beta).then(a[0].c0.total_cmp(&b[0].c0)));
    out
}

/// All zero-real-part boundary curves of index `n_index` for a delayed
/// network, as polylines over `beta_grid`.
///
/// For `n_index = p/2` the delay-independent pitchfork line comes first
/// (branch id 0); the remaining curves are Hopf candidates.
pub fn boundary_curve_delay(n_index: usize, p: usize, tau: f64, beta_grid: &[f64]) -> Result<Vec<BoundaryCurve>> {
    CharFactor::new(n_index, p, tau, 0.0, 2.0)?;
    if tau <= 0.0 {
        return Err(Error::InvalidArgument("delayed boundary needs tau > 0".into()));
    }
    check_beta_grid(beta_grid)?;
    let theta = 2.0 * PI * n_index as f64 / p as f64;
    let per_beta: Vec<Vec<(Branch, f64, f64)>> = beta_grid
        .par_iter()
        .map(|&beta| {
            let mut v = Vec::new();
            for winding in windings(theta, tau, beta) {
                for side in [1i8, -1] {
                    let br = Branch { winding, side };
                    for c0 in branch_roots(n_index, p, tau, beta, br) {
                        v.push((br, c0, boundary_omega(n_index, p, beta, c0, br)));
                    }
                }
            }
            v
        })
        .collect();

    let mut keys: Vec<Branch> = per_beta.iter().flatten().map(|(b, _, _)| *b).collect();
    keys.sort();
    keys.dedup();

    let mut curves = Vec::new();
    if 2 * n_index == p {
        curves.push(BoundaryCurve {
            n_index,
            branch_id: 0,
            kind: CurveKind::Pitchfork,
            branch: Some(Branch::PRINCIPAL),
            points: beta_grid
                .iter()
                .map(|&beta| CurvePoint {
                    beta,
                    c0: pitchfork_c0(beta),
                    omega: 0.0,
                })
                .collect(),
        });
    }
    // a real factor has conjugate roots; the branches with omega < 0 repeat
    // those with omega > 0
    let real_factor = (2 * n_index).is_multiple_of(p);
    for key in keys.into_iter().filter(|k| !real_factor || k.side > 0) {
        let roots: Vec<(usize, f64, f64)> = per_beta
            .iter()
            .enumerate()
            .flat_map(|(i, v)| v.iter().filter(|(b, _, _)| *b == key).map(move |&(_, c, w)| (i, c, w)))
            .collect();
        for points in track(beta_grid, roots) {
            curves.push(BoundaryCurve {
                n_index,
                branch_id: curves.len(),
                kind: CurveKind::Hopf,
                branch: Some(key),
                points,
            });
        }
    }
    Ok(curves)
}

/// `C0 = (1 - beta cos theta) / ((1 - cos theta) beta)`, keeping points with
/// `C0` in `[0, 1]`.
pub fn boundary_curve_no_delay(n_index: usize, p: usize, beta_grid: &[f64]) -> Result<BoundaryCurve> {
    CharFactor::new(n_index, p, 0.0, 0.0, 2.0)?;
    if n_index == 0 {
        return Err(Error::UndefinedCurve(
            "index 0 has no delay-free boundary; its root is always unstable".into(),
        ));
    }
    check_beta_grid(beta_grid)?;
    let theta = 2.0 * PI * n_index as f64 / p as f64;
    let points = beta_grid
        .iter()
        .filter_map(|&beta| {
            let c0 = (1.0 - beta * theta.cos()) / ((1.0 - theta.cos()) * beta);
            (0.0..=1.0).contains(&c0).then(|| CurvePoint {
                beta,
                c0,
                omega: (1.0 - c0) * beta * theta.sin(),
            })
        })
        .collect();
    Ok(BoundaryCurve {
        n_index,
        branch_id: 0,
        kind: if 2 * n_index == p {
            CurveKind::Pitchfork
        } else {
            CurveKind::Hopf
        },
        branch: None,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BtPoint {
    pub tau: f64,
    pub beta: f64,
    pub c0: f64,
}

/// Double zero of the `n = p/2` factor for each delay: `F(0) = F'(0) = 0`
/// solved by Newton in `(beta, C0)`.
pub fn bt_locus(p: usize, tau_grid: &[f64]) -> Result<Vec<BtPoint>> {
    if p < 2 || !p.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "double zeros need an even period, got {p}"
        )));
    }
    let mut out = Vec::new();
    for &tau in tau_grid {
        if !(tau > 0.0 && tau.is_finite()) {
            continue;
        }
        // F(0)/tau = 1 + beta - 2 C0 beta, F'(0) = 1 - tau (1 - C0) beta
        let (mut beta, mut c0) = (2.0, 0.75);
        for _ in 0..100 {
            let r1 = 1.0 + beta - 2.0 * c0 * beta;
            let r2 = 1.0 - tau * (1.0 - c0) * beta;
            let (a, b) = (1.0 - 2.0 * c0, -2.0 * beta);
            let (c, d) = (-tau * (1.0 - c0), tau * beta);
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let db = (d * r1 - b * r2) / det;
            let dc = (a * r2 - c * r1) / det;
            beta -= db;
            c0 -= dc;
            if db.abs() + dc.abs() < 1e-15 * (1.0 + beta.abs()) {
                break;
            }
        }
        if !(beta > 1.0 && (0.0..=1.0).contains(&c0)) {
            continue;
        }
        let f = CharFactor::new(p / 2, p, tau, c0, beta)?;
        let zero = Complex64::new(0.0, 0.0);
        if f.eval(zero).norm() < 1e-9 && f.derivative(zero).norm() < 1e-9 {
            out.push(BtPoint { tau, beta, c0 });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexCurves {
    pub n_index: usize,
    pub hopf_curves: Vec<BoundaryCurve>,
    pub pitchfork_curve: Option<BoundaryCurve>,
    pub bt_points: Vec<BtPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationScenario {
    pub p: usize,
    pub tau: f64,
    pub selection: IndexSelection,
    pub indices: Vec<IndexCurves>,
    /// Index 0 is selected: a positive real root exists for every `beta > 1`.
    pub always_unstable: bool,
}

impl BifurcationScenario {
    pub fn has_pitchfork(&self) -> bool {
        self.indices.iter().any(|c| c.pitchfork_curve.is_some())
    }

    pub fn bt_points(&self) -> Vec<BtPoint> {
        self.indices.iter().flat_map(|c| c.bt_points.iter().copied()).collect()
    }

    pub fn hopf_indices(&self) -> Vec<usize> {
        self.indices
            .iter()
            .filter(|c| c.hopf_curves.iter().any(|h| !h.points.is_empty()))
            .map(|c| c.n_index)
            .collect()
    }

    /// CSV `beta,c0,n_index,branch_id,kind`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("beta,c0,n_index,branch_id,kind\n");
        for ic in &self.indices {
            for c in ic.pitchfork_curve.iter().chain(&ic.hopf_curves) {
                for pt in &c.points {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        pt.beta,
                        pt.c0,
                        c.n_index,
                        c.branch_id,
                        c.kind.as_str()
                    );
                }
            }
            for bt in &ic.bt_points {
                let _ = writeln!(s, "{},{},{},0,bt", bt.beta, bt.c0, ic.n_index);
            }
        }
        s
    }
}

/// 400 points evenly covering `(1, 5]`.
pub fn default_beta_grid() -> Vec<f64> {
    (1..=400).map(|i| 1.0 + 4.0 * f64::from(i) / 400.0).collect()
}

pub fn scenario(cycle: &BinaryCycle, tau: f64) -> Result<BifurcationScenario> {
    scenario_on_grid(cycle, tau, &default_beta_grid())
}

/// Boundary curves of exactly the selected indices of `cycle`.
pub fn scenario_on_grid(cycle: &BinaryCycle, tau: f64, beta_grid: &[f64]) -> Result<BifurcationScenario> {
    require_admissible(cycle)?;
    check_beta_grid(beta_grid)?;
    let selection = selected_indices(cycle);
    let p = cycle.period();
    let (bmin, bmax) = match (beta_grid.first(), beta_grid.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::InvalidArgument("empty beta grid".into())),
    };
    let mut indices = Vec::new();
    for &n in &selection.indices {
        let curves = if tau > 0.0 {
            boundary_curve_delay(n, p, tau, beta_grid)?
        } else if n == 0 {
            Vec::new()
        } else {
            vec![boundary_curve_no_delay(n, p, beta_grid)?]
        };
        let (pitch, hopf): (Vec<_>, Vec<_>) = curves.into_iter().partition(|c| c.kind == CurveKind::Pitchfork);
        let bt_points = if 2 * n == p && tau > 0.0 {
            bt_locus(p, &[tau])?
                .into_iter()
                .filter(|b| b.beta >= bmin && b.beta <= bmax)
                .collect()
        } else {
            Vec::new()
        };
        indices.push(IndexCurves {
            n_index: n,
            hopf_curves: hopf,
            pitchfork_curve: pitch.into_iter().next(),
            bt_points,
        });
    }
    Ok(BifurcationScenario {
        p,
        tau,
        always_unstable: selection.contains(0),
        selection,
        indices,
    })
}

/// Largest real part over the leading roots of all factors of the network,
/// in unscaled time units (per membrane time constant). Roots are searched in
/// [`Region::DEFAULT`] of the rescaled plane; the trivial factor contributes
/// `-1` when the cycle is rank deficient.
pub fn max_real_part(conn: &Connectivity, params: &NetworkParams) -> f64 {
    let sel = selected_indices(&conn.source_cycle);
    let p = conn.source_cycle.period();
    let beta = params.beta();
    let mut best = if sel.trivial_multiplicity > 0 {
        -1.0
    } else {
        f64::NEG_INFINITY
    };
    for &n in &sel.indices {
        let Ok(f) = CharFactor::new(n, p, params.tau, params.c0, beta) else {
            continue;
        };
        let re = if params.tau == 0.0 {
            Some(f.no_delay_root().re)
        } else {
            leading_root(&f).map(|r| r.re / params.tau)
        };
        if let Some(re) = re {
            best = best.max(re);
        }
    }
    best
}
