use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use cyclenet_core::cycle::{classify, is_admissible, selected_indices};
use cyclenet_core::equilibria::{ring_equilibria, saddle_node_csv, saddle_node_curve};
use cyclenet_core::graph::build_graph;
use cyclenet_core::learning::build_connectivity;
use cyclenet_core::sim::{
    check_retrieval, extract_sign_sequence, raster_csv, retrieve, simulate as integrate, RetrievalOptions,
    DEFAULT_SETTLE_FRACTION,
};
use cyclenet_core::stability::{scenario_on_grid, BifurcationScenario};
use cyclenet_core::{BinaryCycle, Error, InitialHistory};

use crate::config::{InitialKind, RunConfig};

pub const EXIT_NOT_ADMISSIBLE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_CAPABILITY: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EnumerationRefused { .. } | Error::CapabilityExceeded(_) => EXIT_CAPABILITY,
            Error::IntegrationDiverged { .. } | Error::BoundsUnavailable { .. } => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read_cycle(path: &Path) -> Result<BinaryCycle, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    text.parse::<BinaryCycle>()
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

#[derive(Args)]
pub struct AdmissibleArgs {
    pub cycle_file: PathBuf,
    /// Write the cycle back in normalized text form.
    #[arg(long)]
    pub emit: Option<PathBuf>,
}

pub fn admissible(args: &AdmissibleArgs) -> CmdResult {
    let cycle = read_cycle(&args.cycle_file)?;
    let adm = is_admissible(&cycle);
    println!("size: {} x {}", cycle.n_neurons(), cycle.period());
    println!("rank: {}", adm.rank);
    let profile: Vec<String> = adm.dft_column_norms.iter().map(|x| format!("{x:.6}")).collect();
    println!("dft column norms: {}", profile.join(" "));
    println!("nonzero dft columns: {}", adm.nonzero_dft_columns);
    println!("admissible: {}", adm.admissible);
    if adm.admissible {
        let class = classify(&cycle)?;
        println!(
            "class: {:?}{}{}{}",
            class.kind,
            if class.anti_symmetric { ", anti-symmetric" } else { "" },
            if class.mc { ", MC" } else { "" },
            if class.consecutive { ", consecutive" } else { "" },
        );
        let sel = selected_indices(&cycle);
        let idx: Vec<String> = sel.indices.iter().map(usize::to_string).collect();
        println!("selected indices: {}", idx.join(" "));
        println!("trivial multiplicity: {}", sel.trivial_multiplicity);
    }
    if let Some(out) = &args.emit {
        write(out, &cycle.to_text())?;
    }
    Ok(if adm.admissible { 0 } else { EXIT_NOT_ADMISSIBLE })
}

#[derive(Args)]
pub struct GraphArgs {
    pub cycle_file: PathBuf,
    /// Output directory for graph.json and graph.dot.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn graph(args: &GraphArgs) -> CmdResult {
    let cycle = read_cycle(&args.cycle_file)?;
    let conn = build_connectivity(&cycle)?;
    let g = build_graph(&conn)?;
    write(&args.out.join("graph.json"), &g.to_json())?;
    write(&args.out.join("graph.dot"), &g.to_dot())?;
    println!("states: {}", g.successor.len());
    println!("loops: {}", g.loops.len());
    for lp in &g.loops {
        let codes: Vec<String> = lp.iter().map(u32::to_string).collect();
        println!("  length {}: {}", lp.len(), codes.join(" -> "));
    }
    println!("tail lengths:");
    for (len, count) in g.tails_histogram() {
        match len {
            Some(l) => println!("  {l}: {count}"),
            None => println!("  degenerate: {count}"),
        }
    }
    Ok(0)
}

#[derive(Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Output directory for trajectory.csv, raster.csv and retrieval.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub tau_ms: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every k-th sample in trajectory.csv.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(c0) = args.c0 {
        cfg.c0 = c0;
    }
    if let Some(tau) = args.tau_ms {
        cfg.tau_ms = tau;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.stride == 0 {
        return Err(Failure::input("stride must be positive"));
    }
    let cycle = read_cycle(&cfg.cycle_file)?;
    if cfg.start_pattern >= cycle.period() {
        return Err(Failure::input(format!(
            "start_pattern {} exceeds the period {}",
            cfg.start_pattern,
            cycle.period()
        )));
    }
    let params = cfg.params()?;
    let conn = build_connectivity(&cycle)?;
    let a = cfg.a.unwrap_or_else(|| params.memory_amplitude());
    let seed = cfg.seed.unwrap_or(0);
    let initial = match cfg.initial {
        InitialKind::Pattern => InitialHistory::pattern(a, &cycle.column(cfg.start_pattern)),
        InitialKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            InitialHistory::constant((0..cycle.n_neurons()).map(|_| rng.random_range(-a..=a)).collect())
        }
    };
    let dt = cfg.dt();
    let traj = integrate(&conn, &params, &initial, cfg.t_end_ms, dt)?;
    write(&args.out.join("trajectory.csv"), &traj.to_csv(args.stride))?;

    let mut report = json!({
        "cycle_file": cfg.cycle_file,
        "params": params,
        "beta": params.beta(),
        "dt_ms": dt,
        "t_end_ms": cfg.t_end_ms,
        "initial": initial.values,
        "seed": seed,
        "start_pattern": cfg.start_pattern,
    });
    if params.tau > 0.0 {
        let seq = extract_sign_sequence(&traj, DEFAULT_SETTLE_FRACTION)?;
        write(&args.out.join("raster.csv"), &raster_csv(&seq, cycle.n_neurons()))?;
        let intervals = check_retrieval(&seq, &cycle, cfg.start_pattern);
        let visits = retrieve(
            &traj,
            &cycle,
            cfg.start_pattern,
            &RetrievalOptions::for_delay(params.tau),
        );
        report["intervals"] = summary(&intervals);
        report["visits"] = summary(&visits);
        println!(
            "visits: {} matched, {} full traversals, first failure {:?}",
            visits.matched_count, visits.full_traversals, visits.first_failure_interval
        );
    }
    write(&args.out.join("retrieval.json"), &pretty(&report))?;
    Ok(0)
}

fn summary(r: &cyclenet_core::RetrievalReport) -> serde_json::Value {
    json!({
        "matched_count": r.matched_count,
        "full_traversals": r.full_traversals,
        "first_failure_interval": r.first_failure_interval,
        "entries": r.sign_sequence.len(),
    })
}

#[derive(Args)]
pub struct BetaRange {
    #[arg(long, default_value_t = 1.01)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 400)]
    pub beta_points: usize,
}

impl BetaRange {
    fn grid(&self) -> Result<Vec<f64>, Failure> {
        if !(self.beta_min > 1.0 && self.beta_max >= self.beta_min && self.beta_points >= 1) {
            return Err(Failure::input("need 1 < beta-min <= beta-max and beta-points >= 1"));
        }
        if self.beta_points == 1 {
            return Ok(vec![self.beta_min]);
        }
        let h = (self.beta_max - self.beta_min) / (self.beta_points - 1) as f64;
        Ok((0..self.beta_points).map(|i| self.beta_min + h * i as f64).collect())
    }
}

#[derive(Args)]
pub struct CurvesArgs {
    pub cycle_file: PathBuf,
    #[arg(long)]
    pub tau: f64,
    #[command(flatten)]
    pub range: BetaRange,
    /// Output directory for curves.csv, sn_curve.csv and scenario.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn scenario_json(s: &BifurcationScenario) -> serde_json::Value {
    let indices: Vec<_> = s
        .indices
        .iter()
        .map(|ic| {
            json!({
                "n_index": ic.n_index,
                "hopf_branches": ic.hopf_curves.iter().filter(|c| !c.points.is_empty()).count(),
                "pitchfork": ic.pitchfork_curve.is_some(),
                "bt_points": ic.bt_points,
            })
        })
        .collect();
    json!({
        "p": s.p,
        "tau": s.tau,
        "selected_indices": s.selection.indices,
        "always_unstable": s.always_unstable,
        "has_pitchfork": s.has_pitchfork(),
        "indices": indices,
    })
}

pub fn curves(args: &CurvesArgs) -> CmdResult {
    let cycle = read_cycle(&args.cycle_file)?;
    if !(args.tau >= 0.0 && args.tau.is_finite()) {
        return Err(Failure::input("tau must be non-negative"));
    }
    let grid = args.range.grid()?;
    let s = scenario_on_grid(&cycle, args.tau, &grid)?;
    write(&args.out.join("curves.csv"), &s.to_csv())?;
    let sn_grid: Vec<f64> = grid.iter().copied().filter(|&b| b <= 5.0).collect();
    write(
        &args.out.join("sn_curve.csv"),
        &saddle_node_csv(&saddle_node_curve(&sn_grid)?),
    )?;
    let summary = scenario_json(&s);
    write(&args.out.join("scenario.json"), &pretty(&summary))?;
    print!("{}", pretty(&summary));
    Ok(0)
}

#[derive(Args)]
pub struct SnCurveArgs {
    #[command(flatten)]
    pub range: BetaRange,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn sn_curve(args: &SnCurveArgs) -> CmdResult {
    let csv = saddle_node_csv(&saddle_node_curve(&args.range.grid()?)?);
    match &args.out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

#[derive(Args)]
pub struct RingArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub lambda: f64,
}

pub fn ring(args: &RingArgs) -> CmdResult {
    let report = match ring_equilibria(args.beta, args.lambda) {
        Ok(eq) => json!({
            "beta": args.beta,
            "lambda": args.lambda,
            "only_trivial": false,
            "u_star": eq.u_star,
            "stable": eq.stable,
        }),
        Err(Error::OnlyTrivialRoot { .. }) => json!({
            "beta": args.beta,
            "lambda": args.lambda,
            "only_trivial": true,
        }),
        Err(e) => return Err(e.into()),
    };
    print!("{}", pretty(&report));
    Ok(0)
}
