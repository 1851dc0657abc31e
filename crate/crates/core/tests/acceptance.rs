//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cyclenet_core::cycle::fixtures::{excitatory_ring, five_by_six, inseparable_three_by_six, ring_three_by_six};
use cyclenet_core::cycle::{numerical_rank, permutation_matrix, shift_left, BinaryCycle};
use cyclenet_core::equilibria::{memory_eigenvalues, saddle_node_curve, DerivedSystem};
use cyclenet_core::graph::{build_graph, loops_as_cycles};
use cyclenet_core::learning::build_connectivity;
use cyclenet_core::sim::{retrieve, sign_change_times, simulate, RetrievalOptions};
use cyclenet_core::stability::{
    boundary_curve_delay, boundary_residual, char_roots, default_beta_grid, pitchfork_c0, scenario, Branch, CharFactor,
    CurveKind, Region,
};
use cyclenet_core::{InitialHistory, NetworkParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn learning_algebra() -> Outcome {
    let mut worst = 0.0f64;
    for c in [five_by_six(), ring_three_by_six(), inseparable_three_by_six()] {
        let conn = build_connectivity(&c).unwrap();
        let (j0, j) = (&conn.j0, &conn.j);
        let s = c.to_matrix();
        let pm = permutation_matrix(c.period()).unwrap();
        let res = [
            max_abs(&(j * &s - &s * &pm)),
            max_abs(&(j0 * j0 - j0)),
            max_abs(&(j0 * j - j * j0)),
        ];
        for r in res {
            worst = worst.max(r);
        }
        check(res.iter().all(|&r| r < 1e-8), format!("residuals {res:?}"))?;
        check(
            (0..c.n_neurons()).all(|i| j0[(i, i)] >= -1e-8),
            "negative diagonal of J0",
        )?;
        for e in j0.clone().symmetric_eigenvalues().iter() {
            check(e.abs() < 1e-8 || (e - 1.0).abs() < 1e-8, format!("J0 eigenvalue {e}"))?;
        }
    }
    Ok(format!("worst residual {worst:.1e}"))
}

fn rows_generated_by(c: &BinaryCycle, generator: &[i8]) -> bool {
    let mut shifts = vec![generator.to_vec()];
    for _ in 1..generator.len() {
        let next = shift_left(shifts.last().unwrap());
        shifts.push(next);
    }
    (0..c.n_neurons()).all(|i| shifts.iter().any(|s| s.as_slice() == c.row(i)))
}

fn derived_cycles() -> Outcome {
    let sigma = five_by_six();
    let conn = build_connectivity(&sigma).unwrap();
    let g = build_graph(&conn).unwrap();
    let mut lens = g.loop_lengths();
    lens.sort();
    check(lens == vec![2, 6, 6, 6], format!("loop lengths {lens:?}"))?;
    let loops = loops_as_cycles(&g);
    let six: Vec<_> = loops.iter().filter(|l| l.period() == 6).collect();
    check(
        six.iter().any(|l| l.equals_up_to_rotation(&sigma)),
        "no loop equals the prescribed cycle",
    )?;
    check(
        six.iter().any(|l| l.equals_up_to_rotation(&sigma.negated())),
        "no loop equals the negated cycle",
    )?;
    check(
        six.iter().any(|l| rows_generated_by(l, &[1, 1, 1, -1, -1, -1])),
        "no loop generated by (+,+,+,-,-,-)",
    )?;
    let two = loops.iter().find(|l| l.period() == 2).unwrap();
    let s4 = two.to_matrix();
    check(
        max_abs(&(&conn.j * &s4 + &s4)) < 1e-12,
        "2-loop is not mapped to its negative",
    )?;
    Ok("lengths {2,6,6,6}, Sigma, -Sigma, (+,+,+,-,-,-) and the 2-loop identified".into())
}

fn fig5_retrieval() -> Outcome {
    let sigma = five_by_six();
    let conn = build_connectivity(&sigma).unwrap();
    let tau = 10.0;
    let prm = NetworkParams::from_beta(0.0, 3.0, 20.0, tau).unwrap();
    let g = build_graph(&conn).unwrap();
    let mut counts = Vec::new();
    for lp in loops_as_cycles(&g) {
        let phi = InitialHistory::pattern(prm.memory_amplitude(), &lp.column(0));
        let t_end = (4 * lp.period() + 2) as f64 * tau;
        let traj = simulate(&conn, &prm, &phi, t_end, 0.1).unwrap();
        let r = retrieve(&traj, &lp, 0, &RetrievalOptions::for_delay(tau));
        counts.push(r.full_traversals);
    }
    check(
        counts.len() == 4 && counts.iter().all(|&c| c >= 3),
        format!("full traversals {counts:?}"),
    )?;
    Ok(format!("full traversals per loop {counts:?}"))
}

fn retrieval_breaking() -> Outcome {
    let c = ring_three_by_six();
    let conn = build_connectivity(&c).unwrap();
    let tau = 2.0;
    let run = |c0: f64| {
        let prm = NetworkParams::from_beta(c0, 3.0, 10.0, tau).unwrap();
        let phi = InitialHistory::pattern(prm.memory_amplitude(), &c.column(0));
        let traj = simulate(&conn, &prm, &phi, 300.0, 0.02).unwrap();
        retrieve(&traj, &c, 0, &RetrievalOptions::for_delay(tau))
    };
    let below = run(0.75);
    let above = run(0.76);
    check(
        below.full_traversals >= 1 && below.first_failure_interval.is_none(),
        format!(
            "C0=0.75: {} matched, failure at {:?}",
            below.matched_count, below.first_failure_interval
        ),
    )?;
    check(
        above.first_failure_interval.is_some(),
        format!("C0=0.76: no failure ({} matched)", above.matched_count),
    )?;
    let sn = saddle_node_curve(&[3.0]).unwrap();
    let c0_star = sn.first().map_or(f64::NAN, |p| p.c0_star);
    check(c0_star > 0.75 && c0_star < 0.76, format!("saddle-node at {c0_star}"))?;
    Ok(format!(
        "C0=0.75: {} traversals; C0=0.76: fails at {:?}; saddle-node C0*={c0_star:.6}",
        below.full_traversals, above.first_failure_interval
    ))
}

fn boundary_consistency() -> Outcome {
    let grid = default_beta_grid();
    let (mut points, mut worst_res, mut worst_re) = (0usize, 0.0f64, 0.0f64);
    for tau in [0.2, 0.4, 0.8] {
        for n in 1..=3 {
            let curves = boundary_curve_delay(n, 6, tau, &grid).unwrap();
            if n == 3 {
                let pf = curves
                    .iter()
                    .find(|c| c.kind == CurveKind::Pitchfork)
                    .ok_or("no pitchfork branch")?;
                check(
                    pf.points.iter().all(|p| (p.c0 - pitchfork_c0(p.beta)).abs() < 1e-9),
                    "pitchfork branch off (1+beta)/(2 beta)",
                )?;
            }
            for c in &curves {
                let br = c.branch.unwrap_or(Branch::PRINCIPAL);
                for p in &c.points {
                    points += 1;
                    if c.kind == CurveKind::Hopf {
                        let r = boundary_residual(n, 6, tau, p.beta, p.c0, br).abs();
                        worst_res = worst_res.max(r);
                        check(r < 1e-8, format!("residual {r} at {p:?}"))?;
                    } else {
                        let r = (p.c0 - pitchfork_c0(p.beta)).abs();
                        worst_res = worst_res.max(r);
                    }
                    let f = CharFactor::new(n, 6, tau, p.c0, p.beta).unwrap();
                    let roots = char_roots(&f, &Region::DEFAULT, usize::MAX);
                    let re = roots.iter().map(|s| s.re.abs()).fold(f64::INFINITY, f64::min);
                    worst_re = worst_re.max(re);
                    check(re < 1e-5, format!("tau {tau} n {n}: nearest root |Re| {re} at {p:?}"))?;
                }
            }
        }
    }
    Ok(format!(
        "{points} points, worst residual {worst_res:.1e}, worst |Re| {worst_re:.1e}"
    ))
}

fn scenario_rules() -> Outcome {
    let tau = 2.0;
    let without = [
        BinaryCycle::consecutive(&[1, 1, -1, -1], 2).unwrap(),
        BinaryCycle::consecutive(&[1, 1, 1, 1, -1, -1, -1, -1], 4).unwrap(),
    ];
    let with = [
        ring_three_by_six(),
        BinaryCycle::consecutive(&[1, 1, 1, 1, 1, -1, -1, -1, -1, -1], 5).unwrap(),
    ];
    for c in &without {
        let s = scenario(c, tau).unwrap();
        check(
            !s.has_pitchfork() && s.bt_points().is_empty(),
            format!("p={}: pitchfork or BT", c.period()),
        )?;
    }
    let mut worst = 0.0f64;
    for c in &with {
        let s = scenario(c, tau).unwrap();
        let bts = s.bt_points();
        check(
            s.has_pitchfork() && !bts.is_empty(),
            format!("p={}: missing pitchfork or BT", c.period()),
        )?;
        for bt in bts {
            let p = c.period();
            let f = CharFactor::new(p / 2, p, tau, bt.c0, bt.beta).unwrap();
            let z = Complex64::new(0.0, 0.0);
            let (a, b) = (f.eval(z).norm(), f.derivative(z).norm());
            worst = worst.max(a).max(b);
            check(a < 1e-8 && b < 1e-8, format!("BT residuals {a} {b}"))?;
        }
    }
    Ok(format!(
        "p=4,8 without; p=6,10 with pitchfork and BT (|F(0)|,|F'(0)| <= {worst:.1e})"
    ))
}

fn memory_stability() -> Outcome {
    let c = five_by_six();
    let conn = build_connectivity(&c).unwrap();
    let prm = NetworkParams::from_beta(0.6, 3.0, 10.0, 1.0).unwrap();
    let sys = DerivedSystem::new(conn.j0.clone(), prm, c.column(1)).unwrap();
    let eig = sys.jacobian(&sys.memory_state()).complex_eigenvalues();
    let me = memory_eigenvalues(&prm);
    let rank = numerical_rank(&c.to_matrix());
    let near = |v: f64| {
        eig.iter()
            .filter(|e| (*e - Complex64::new(v, 0.0)).norm() < 1e-7)
            .count()
    };
    let (np, nm) = (near(me.sigma_plus), near(me.sigma_minus));
    check(
        np == rank && nm == c.n_neurons() - rank,
        format!("multiplicities {np}/{nm}, eigenvalues {eig:?}"),
    )?;
    check(
        me.sigma_plus < 0.0 && me.sigma_minus < 0.0,
        "memory eigenvalues not negative",
    )?;
    Ok(format!("sigma_plus {:.6} x{np}, -1 x{nm}", me.sigma_plus))
}

fn ring_transients() -> Outcome {
    let c = excitatory_ring(6);
    let conn = build_connectivity(&c).unwrap();
    let s = scenario(&c, 5.0).unwrap();
    check(s.always_unstable, "scenario not flagged always unstable")?;
    let t_end = 300.0;
    let mut ratios = Vec::new();
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi: Vec<f64> = (0..6).map(|_| rng.random_range(-0.01..0.01)).collect();
        let duration = |tau: f64| {
            let prm = NetworkParams::from_beta(0.0, 3.0, 10.0, tau).unwrap();
            let traj = simulate(&conn, &prm, &InitialHistory::constant(phi.clone()), t_end, tau / 100.0).unwrap();
            sign_change_times(&traj).last().copied().unwrap_or(0.0)
        };
        let (long, short) = (duration(5.0), duration(0.5));
        check(short > 0.0, format!("seed {seed}: no oscillation at tau=0.5"))?;
        ratios.push(long / short);
    }
    check(ratios.iter().all(|&r| r >= 10.0), format!("duration ratios {ratios:?}"))?;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "duration ratio tau=5 vs tau=0.5 at least {min:.1} (t_end {t_end} ms)"
    ))
}

fn hopf_amplitude() -> Outcome {
    let c = ring_three_by_six();
    let conn = build_connectivity(&c).unwrap();
    let (tau, beta) = (0.8, 1.1);
    let curves = boundary_curve_delay(1, 6, tau, &[beta]).unwrap();
    let c0_h = curves
        .iter()
        .find(|h| h.kind == CurveKind::Hopf && h.branch == Some(Branch::PRINCIPAL))
        .and_then(|h| h.points.first())
        .ok_or("no principal Hopf point")?
        .c0;
    let offsets = [0.1, 0.08, 0.06, 0.04, 0.02];
    let amps: Vec<f64> = offsets
        .iter()
        .map(|d| {
            let prm = NetworkParams::from_beta(c0_h + d, beta, 10.0, tau).unwrap();
            let phi = InitialHistory::pattern(prm.memory_amplitude(), &c.column(0));
            let traj = simulate(&conn, &prm, &phi, 1500.0, tau / 100.0).unwrap();
            (0..traj.len())
                .filter(|&k| traj.time(k) >= 1000.0)
                .map(|k| traj.u(k)[0].abs())
                .fold(0.0, f64::max)
        })
        .collect();
    check(
        amps.windows(2).all(|w| w[1] < w[0]),
        format!("amplitudes not decreasing {amps:?}"),
    )?;
    // squared amplitude is linear in the distance: extrapolate to the curve
    let n = offsets.len() as f64;
    let (mx, my) = (
        offsets.iter().sum::<f64>() / n,
        amps.iter().map(|a| a * a).sum::<f64>() / n,
    );
    let sxy: f64 = offsets.iter().zip(&amps).map(|(x, a)| (x - mx) * (a * a - my)).sum();
    let sxx: f64 = offsets.iter().map(|x| (x - mx) * (x - mx)).sum();
    let intercept = my - sxy / sxx * mx;
    check(
        intercept.abs() < 0.1 * amps[0] * amps[0],
        format!("amplitude does not vanish at the curve (intercept {intercept})"),
    )?;
    Ok(format!("Hopf C0={c0_h:.6}; amplitudes {amps:.4?}"))
}

fn step_order() -> Outcome {
    let c = five_by_six();
    let conn = build_connectivity(&c).unwrap();
    let prm = NetworkParams::from_beta(0.0, 3.0, 20.0, 10.0).unwrap();
    let phi = InitialHistory::pattern(prm.memory_amplitude(), &c.column(0));
    let end = |h: f64| simulate(&conn, &prm, &phi, 15.0, h).unwrap().last_u().to_vec();
    let (a, b, d) = (end(0.2), end(0.1), end(0.05));
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let ratio = diff(&a, &b) / diff(&b, &d);
    check((8.0..=32.0).contains(&ratio), format!("ratio {ratio}"))?;
    Ok(format!("error ratio {ratio:.2}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("learning-rule algebra", learning_algebra, 1),
        ("derived-cycle enumeration", derived_cycles, 1),
        ("retrieval at C0=0, tau=10", fig5_retrieval, 30),
        ("retrieval breaking near the saddle-node", retrieval_breaking, 30),
        ("boundary-curve consistency", boundary_consistency, 60),
        ("scenario rules", scenario_rules, 60),
        ("memory-equilibrium stability", memory_stability, 1),
        ("ring-network transients", ring_transients, 60),
        ("Hopf amplitude scaling", hopf_amplitude, 60),
        ("RK4 step order", step_order, 60),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let elapsed = t.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("{msg}; took {elapsed:.2?}, budget {budget} s"))
            }
            o => o,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{elapsed:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
