//! Fixed-step integration of the delayed network
//!
//! `u'(t) = -u(t) + C0 bK J0 tanh(lambda u(t)) + C1 bK J tanh(lambda u(t - tau))`
//!
//! from constant initial data, plus read-out of retrieved sign patterns.
//!
//! The delay must be an integer number of steps. Each RK4 step at time `t`
//! reuses the four stage values computed by the step at `t - tau`, which is
//! exactly classical RK4 applied to the method-of-steps system; no
//! interpolation of the history is needed and the scheme stays fourth order.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cycle::BinaryCycle;
use crate::error::{Error, Result};
use crate::learning::{Connectivity, NetworkParams};

pub const DEFAULT_SETTLE_FRACTION: f64 = 0.2;

/// Default step: `tau / 100` for delayed networks, 0.01 ms otherwise.
pub fn default_dt(tau: f64) -> f64 {
    if tau > 0.0 {
        tau / 100.0
    } else {
        0.01
    }
}

/// Constant initial function on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialHistory {
    pub values: Vec<f64>,
}

impl InitialHistory {
    /// `phi = a xi`.
    pub fn pattern(amplitude: f64, xi: &[i8]) -> Self {
        Self {
            values: xi.iter().map(|&s| amplitude * f64::from(s)).collect(),
        }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        Self { values }
    }
}

pub fn firing_rates(u: &[f64], lambda: f64) -> Vec<f64> {
    u.iter().map(|&x| (lambda * x).tanh()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    dt: f64,
    tau: f64,
    lambda: f64,
    history: Vec<f64>,
    // row-major, one row per sample
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.u.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k * self.n..(k + 1) * self.n]
    }

    pub fn v(&self, k: usize) -> &[f64] {
        &self.v[k * self.n..(k + 1) * self.n]
    }

    pub fn last_u(&self) -> &[f64] {
        self.u(self.len() - 1)
    }

    /// Samples per delay interval; zero when there is no delay.
    pub fn steps_per_interval(&self) -> usize {
        if self.tau > 0.0 {
            (self.tau / self.dt).round() as usize
        } else {
            0
        }
    }

    /// CSV with header `t,u1..uN,v1..vN`, one line per `stride` samples.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut s = String::from("t");
        for i in 1..=self.n {
            let _ = write!(s, ",u{i}");
        }
        for i in 1..=self.n {
            let _ = write!(s, ",v{i}");
        }
        s.push('\n');
        for k in (0..self.len()).step_by(stride) {
            let _ = write!(s, "{}", self.time(k));
            for x in self.u(k).iter().chain(self.v(k)) {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}

fn matvec(m: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = m[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

struct Rhs {
    n: usize,
    a0: Vec<f64>,
    a1: Vec<f64>,
    lambda: f64,
    scratch: Vec<f64>,
}

impl Rhs {
    fn new(conn: &Connectivity, params: &NetworkParams) -> Self {
        let n = conn.n();
        let bk = params.beta_k();
        let row_major =
            |m: &nalgebra::DMatrix<f64>, w: f64| -> Vec<f64> { (0..n * n).map(|k| w * m[(k / n, k % n)]).collect() };
        Self {
            n,
            a0: row_major(&conn.j0, params.c0 * bk),
            a1: row_major(&conn.j, params.c1() * bk),
            lambda: params.lambda,
            scratch: vec![0.0; n],
        }
    }

    /// `out = -y + A0 tanh(lambda y) + A1 d`, with `d` the delayed firing rate.
    fn eval(&mut self, y: &[f64], delayed: &[f64], out: &mut [f64]) {
        let n = self.n;
        let act: Vec<f64> = y.iter().map(|&x| (self.lambda * x).tanh()).collect();
        matvec(&self.a0, n, &act, out);
        matvec(&self.a1, n, delayed, &mut self.scratch);
        for i in 0..n {
            out[i] += self.scratch[i] - y[i];
        }
    }
}

/// Integrates from the constant history `initial` up to `t_end` with step `dt`.
pub fn simulate(
    conn: &Connectivity,
    params: &NetworkParams,
    initial: &InitialHistory,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    params.validate()?;
    let n = conn.n();
    if initial.values.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial data has {} components, network has {n}",
            initial.values.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument("dt and t_end must be positive".into()));
    }
    let tau = params.tau;
    let delay_steps = if tau > 0.0 {
        let ratio = tau / dt;
        let m = ratio.round();
        if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidStep { dt, tau });
        }
        m as usize
    } else {
        0
    };
    let steps = (t_end / dt).round().max(1.0) as usize;
    let lambda = params.lambda;
    let mut rhs = Rhs::new(conn, params);

    let phi_rate = firing_rates(&initial.values, lambda);
    // stage firing rates of the last `delay_steps` steps: [step][stage][neuron]
    let mut ring = vec![0.0; delay_steps * 4 * n];

    let mut u_all = Vec::with_capacity((steps + 1) * n);
    let mut v_all = Vec::with_capacity((steps + 1) * n);
    let mut y = initial.values.clone();
    u_all.extend_from_slice(&y);
    v_all.extend(firing_rates(&y, lambda));

    let h = dt;
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut stage = vec![0.0; n];
    let mut delayed = vec![0.0; n];
    for step in 0..steps {
        let slot = if delay_steps > 0 { step % delay_steps } else { 0 };
        for s in 0..4 {
            match s {
                0 => stage.copy_from_slice(&y),
                1 | 2 => {
                    for i in 0..n {
                        stage[i] = y[i] + 0.5 * h * k[s - 1][i];
                    }
                }
                _ => {
                    for i in 0..n {
                        stage[i] = y[i] + h * k[2][i];
                    }
                }
            }
            let rate = firing_rates(&stage, lambda);
            if delay_steps == 0 {
                delayed.copy_from_slice(&rate);
            } else {
                let cell = &mut ring[(slot * 4 + s) * n..(slot * 4 + s + 1) * n];
                if step < delay_steps {
                    delayed.copy_from_slice(&phi_rate);
                } else {
                    delayed.copy_from_slice(cell);
                }
                cell.copy_from_slice(&rate);
            }
            rhs.eval(&stage, &delayed, &mut k[s]);
        }
        for i in 0..n {
            y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::IntegrationDiverged {
                t: (step + 1) as f64 * h,
            });
        }
        u_all.extend_from_slice(&y);
        v_all.extend(firing_rates(&y, lambda));
    }

    Ok(Trajectory {
        n,
        dt,
        tau,
        lambda,
        history: initial.values.clone(),
        u: u_all,
        v: v_all,
    })
}

fn sign_vec(u: &[f64]) -> Option<Vec<i8>> {
    u.iter()
        .map(|&x| {
            if x > 0.0 {
                Some(1)
            } else if x < 0.0 {
                Some(-1)
            } else {
                None
            }
        })
        .collect()
}

/// One entry per complete delay interval `[n tau, (n+1) tau)`: the sign of
/// `u` if it is constant over the interval after skipping its leading
/// `settle_fraction`, otherwise `None` (unresolved).
pub fn extract_sign_sequence(traj: &Trajectory, settle_fraction: f64) -> Result<Vec<Option<Vec<i8>>>> {
    let m = traj.steps_per_interval();
    if m == 0 {
        return Err(Error::InvalidArgument("sign sequence needs tau > 0".into()));
    }
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(Error::InvalidArgument("settle_fraction must lie in [0, 1)".into()));
    }
    let skip = ((settle_fraction * m as f64).ceil() as usize).min(m - 1);
    let intervals = (traj.len() - 1) / m;
    Ok((0..intervals)
        .map(|iv| {
            let first = sign_vec(traj.u(iv * m + skip))?;
            (iv * m + skip + 1..(iv + 1) * m)
                .all(|k| sign_vec(traj.u(k)).as_ref() == Some(&first))
                .then_some(first)
        })
        .collect())
}

/// A sign pattern held continuously over `[start, end]` (ms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternVisit {
    pub pattern: Vec<i8>,
    pub start: f64,
    pub end: f64,
}

/// Maximal runs of constant sign lasting at least `min_dwell`; shorter runs
/// (transient intermediate patterns) are dropped and equal neighbours merged.
pub fn pattern_visits(traj: &Trajectory, min_dwell: f64) -> Vec<PatternVisit> {
    let mut runs: Vec<PatternVisit> = Vec::new();
    let mut cur: Option<(Vec<i8>, usize)> = None;
    let close = |runs: &mut Vec<PatternVisit>, pat: Vec<i8>, a: usize, b: usize| {
        let (start, end) = (traj.time(a), traj.time(b));
        if end - start >= min_dwell {
            match runs.last_mut() {
                Some(last) if last.pattern == pat => last.end = end,
                _ => runs.push(PatternVisit {
                    pattern: pat,
                    start,
                    end,
                }),
            }
        }
    };
    for k in 0..traj.len() {
        let s = sign_vec(traj.u(k));
        match (&cur, s) {
            (Some((p, _)), Some(s)) if *p == s => {}
            (_, s) => {
                if let Some((p, a)) = cur.take() {
                    close(&mut runs, p, a, k - 1);
                }
                cur = s.map(|s| (s, k));
            }
        }
    }
    if let Some((p, a)) = cur {
        close(&mut runs, p, a, traj.len() - 1);
    }
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalReport {
    pub sign_sequence: Vec<Option<Vec<i8>>>,
    /// Length of the initial run of entries matching the transition conditions.
    pub matched_count: usize,
    pub full_traversals: usize,
    /// First entry that breaks the run, if any.
    pub first_failure_interval: Option<usize>,
}

/// Compares `seq[n]` with column `(mu + n + 1) mod p` (0-based `mu`, the
/// pattern the initial history was built from).
pub fn check_retrieval(seq: &[Option<Vec<i8>>], cycle: &BinaryCycle, start_pattern: usize) -> RetrievalReport {
    let p = cycle.period();
    let cols = cycle.columns();
    let matched_count = seq
        .iter()
        .enumerate()
        .take_while(|(n, s)| s.as_deref() == Some(cols[(start_pattern + n + 1) % p].as_slice()))
        .count();
    RetrievalReport {
        sign_sequence: seq.to_vec(),
        matched_count,
        full_traversals: matched_count / p,
        first_failure_interval: (matched_count < seq.len()).then_some(matched_count),
    }
}

/// Tolerances for reading retrieval off a trajectory by pattern visits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalOptions {
    /// Sign patterns held for less than this (ms) are transients.
    pub min_dwell: f64,
    /// A pattern held longer than this (ms) counts as a stall.
    pub max_dwell: f64,
}

impl RetrievalOptions {
    /// `min_dwell = settle_fraction * tau` and `max_dwell = 50 tau`; for
    /// `tau = 0` the time scale is one unit of the membrane time constant.
    pub fn for_delay(tau: f64) -> Self {
        let scale = if tau > 0.0 { tau } else { 1.0 };
        Self {
            min_dwell: DEFAULT_SETTLE_FRACTION * scale,
            max_dwell: 50.0 * scale,
        }
    }
}

/// Retrieval bookkeeping over the sequence of visited patterns instead of
/// a fixed grid of delay intervals, so that transitions lagging behind
/// `n tau` are still counted. Entry `n` of the sequence is the `n`-th
/// pattern visited after the initial one; a visit outlasting `max_dwell`
/// ends the run as a failure.
pub fn retrieve(
    traj: &Trajectory,
    cycle: &BinaryCycle,
    start_pattern: usize,
    opts: &RetrievalOptions,
) -> RetrievalReport {
    let visits = pattern_visits(traj, opts.min_dwell);
    let cols = cycle.columns();
    let skip = usize::from(visits.first().is_some_and(|v| v.pattern == cols[start_pattern]));
    let mut seq = Vec::new();
    for (i, v) in visits.iter().enumerate() {
        if v.end - v.start > opts.max_dwell {
            seq.push(None);
            break;
        }
        if i >= skip {
            seq.push(Some(v.pattern.clone()));
        }
    }
    check_retrieval(&seq, cycle, start_pattern)
}

/// Raster CSV `interval,neuron,sign`; unresolved intervals get sign 0.
pub fn raster_csv(seq: &[Option<Vec<i8>>], n: usize) -> String {
    let mut s = String::from("interval,neuron,sign\n");
    for (iv, e) in seq.iter().enumerate() {
        for i in 0..n {
            let sign = e.as_ref().map_or(0, |v| v[i]);
            let _ = writeln!(s, "{iv},{},{sign}", i + 1);
        }
    }
    s
}

/// `m_mu(t) = xi^(mu) . v(t) / N` for every sample and every column.
pub fn overlap(traj: &Trajectory, cycle: &BinaryCycle) -> Vec<Vec<f64>> {
    let n = cycle.n_neurons() as f64;
    let cols = cycle.columns();
    (0..traj.len())
        .map(|k| {
            let v = traj.v(k);
            cols.iter()
                .map(|c| c.iter().zip(v).map(|(&s, x)| f64::from(s) * x).sum::<f64>() / n)
                .collect()
        })
        .collect()
}

/// Times of sign changes of any component of `u`.
pub fn sign_change_times(traj: &Trajectory) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..traj.len() {
        if traj
            .u(k - 1)
            .iter()
            .zip(traj.u(k))
            .any(|(a, b)| (*a > 0.0) != (*b > 0.0))
        {
            out.push(traj.time(k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::fixtures::*;
    use crate::learning::build_connectivity;
    use nalgebra::DMatrix;

    fn ring_params(c0: f64, tau: f64) -> NetworkParams {
        NetworkParams::from_beta(c0, 3.0, 20.0, tau).unwrap()
    }

    #[test]
    fn rates() {
        assert_eq!(firing_rates(&[0.0], 3.0), vec![0.0]);
        let x = 0.9f64.atanh() / 7.0;
        assert!((firing_rates(&[x], 7.0)[0] - 0.9).abs() < 1e-15);
        let prm = ring_params(0.0, 10.0);
        let u = [prm.memory_amplitude(), -prm.memory_amplitude()];
        let v = firing_rates(&u, prm.lambda);
        assert!((v[0] - prm.beta1).abs() < 1e-12 && (v[1] + prm.beta1).abs() < 1e-12);
    }

    #[test]
    fn pure_decay_without_coupling() {
        let c = BinaryCycle::from_rows(&[vec![1, -1], vec![1, 1]]).unwrap();
        let conn = Connectivity::from_matrices(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), c).unwrap();
        let prm = ring_params(0.3, 1.0);
        let traj = simulate(&conn, &prm, &InitialHistory::constant(vec![1.0, -2.0]), 5.0, 0.01).unwrap();
        for k in (0..traj.len()).step_by(50) {
            let e = (-traj.time(k)).exp();
            assert!((traj.u(k)[0] - e).abs() < 1e-10);
            assert!((traj.u(k)[1] + 2.0 * e).abs() < 1e-10);
        }
    }

    #[test]
    fn step_must_divide_delay() {
        let conn = build_connectivity(&ring_three_by_six()).unwrap();
        let init = InitialHistory::pattern(0.1, &[1, 1, 1]);
        let r = simulate(&conn, &ring_params(0.0, 1.0), &init, 5.0, 0.3);
        assert!(matches!(r, Err(Error::InvalidStep { .. })));
        assert!(simulate(&conn, &ring_params(0.0, 1.0), &init, 5.0, 0.25).is_ok());
    }

    #[test]
    fn rates_match_potentials() {
        let conn = build_connectivity(&ring_three_by_six()).unwrap();
        let prm = ring_params(0.2, 2.0);
        let init = InitialHistory::pattern(prm.memory_amplitude(), &[1, 1, 1]);
        let traj = simulate(&conn, &prm, &init, 20.0, 0.02).unwrap();
        for k in 0..traj.len() {
            for (u, v) in traj.u(k).iter().zip(traj.v(k)) {
                assert!((v - (prm.lambda * u).tanh()).abs() < 1e-12);
                assert!(v.abs() < 1.0);
            }
        }
    }

    #[test]
    fn odd_symmetry() {
        let conn = build_connectivity(&five_by_six()).unwrap();
        let prm = ring_params(0.1, 1.0);
        let xi = five_by_six().column(0);
        let a = prm.memory_amplitude();
        let up = simulate(&conn, &prm, &InitialHistory::pattern(a, &xi), 15.0, 0.01).unwrap();
        let dn = simulate(&conn, &prm, &InitialHistory::pattern(-a, &xi), 15.0, 0.01).unwrap();
        for k in 0..up.len() {
            for (x, y) in up.u(k).iter().zip(dn.u(k)) {
                assert!((x + y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_pattern_reads_constant_signs() {
        // With J = J0 = I and C1 = 0 the memory state is an equilibrium.
        let c = BinaryCycle::from_rows(&[vec![1, -1], vec![-1, 1]]).unwrap();
        let id = DMatrix::identity(2, 2);
        let conn = Connectivity::from_matrices(id.clone(), id, c).unwrap();
        let prm = NetworkParams::from_beta(1.0, 3.0, 10.0, 1.0).unwrap();
        let xi = [1, -1];
        let traj = simulate(
            &conn,
            &prm,
            &InitialHistory::pattern(prm.memory_amplitude(), &xi),
            6.0,
            0.01,
        )
        .unwrap();
        let seq = extract_sign_sequence(&traj, 0.2).unwrap();
        assert_eq!(seq.len(), 6);
        assert!(seq.iter().all(|s| s.as_deref() == Some(&xi[..])));
    }

    #[test]
    fn retrieval_bookkeeping() {
        let c = ring_three_by_six();
        let cols = c.columns();
        let seq: Vec<_> = (0..24).map(|n| Some(cols[(n + 1) % 6].clone())).collect();
        let r = check_retrieval(&seq, &c, 0);
        assert_eq!(
            (r.matched_count, r.full_traversals, r.first_failure_interval),
            (24, 4, None)
        );
        let mut broken = seq.clone();
        broken[7] = None;
        let r = check_retrieval(&broken, &c, 0);
        assert_eq!(
            (r.matched_count, r.full_traversals, r.first_failure_interval),
            (7, 1, Some(7))
        );
    }

    #[test]
    fn overlap_identities() {
        let c = five_by_six();
        let conn = build_connectivity(&c).unwrap();
        let prm = ring_params(0.0, 1.0);
        let xi = c.column(2);
        let traj = simulate(
            &conn,
            &prm,
            &InitialHistory::pattern(prm.memory_amplitude(), &xi),
            0.01,
            0.01,
        )
        .unwrap();
        let m = &overlap(&traj, &c)[0];
        for (nu, col) in c.columns().iter().enumerate() {
            let dot: i32 = col.iter().zip(&xi).map(|(&a, &b)| i32::from(a * b)).sum();
            assert!((m[nu] - prm.beta1 * f64::from(dot) / 5.0).abs() < 1e-12);
        }
        assert!((m[2] - prm.beta1).abs() < 1e-12);
        // orthogonal state
        let c2 = BinaryCycle::from_rows(&[vec![1, 1], vec![1, -1]]).unwrap();
        let z = InitialHistory::constant(vec![0.0, 0.0]);
        let id = DMatrix::identity(2, 2);
        let conn2 = Connectivity::from_matrices(id.clone(), id, c2.clone()).unwrap();
        let t2 = simulate(&conn2, &prm, &z, 0.01, 0.01).unwrap();
        assert!(overlap(&t2, &c2)[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn csv_layout() {
        let conn = build_connectivity(&ring_three_by_six()).unwrap();
        let prm = ring_params(0.0, 1.0);
        let traj = simulate(&conn, &prm, &InitialHistory::pattern(0.1, &[1, 1, 1]), 1.0, 0.1).unwrap();
        let csv = traj.to_csv(1);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,u1,u2,u3,v1,v2,v3"));
        assert_eq!(lines.count(), 11);
        let r = raster_csv(&[Some(vec![1, -1, 1]), None], 3);
        assert_eq!(r.lines().count(), 7);
        assert!(r.ends_with("1,3,0\n"));
    }
}
