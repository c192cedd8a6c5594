//! Command-line entry points for the cross-border order book toolkit.
//!
//! Every command validates its inputs, runs, writes CSV files into the
//! output directory (`--out`, or `$CROSSLOB_OUT`, or `.`), and prints a
//! one-line summary. Exit codes: 0 success, 2 invalid configuration or
//! arguments, 1 runtime/IO failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crosslob_core::analytics::range::CountControl;
use crosslob_core::analytics::{
    exit_location_density, interface_survival_field, price_change_count_dist, range_distribution,
    survival_probability, upward_probability, InterfaceParams, PdeControl, SeriesControl,
    SummedReinit,
};
use crosslob_core::config::{ConfigError, SimulationConfig, TablesConfig};
use crosslob_core::csv_io::{
    events_to_csv, fmt9, limit_events_to_csv, limit_trajectory_to_csv, trajectory_to_csv,
};
use crosslob_core::experiments::{
    balanced_scenario, imbalanced_scenario, mc_cross_validate, regime_dependent_scenario,
    run_price_change_table, run_scenario, table_reinit_default, AnalyticsQuery, EngineKind,
};
use crosslob_core::limit::{
    simulate_active_limit, simulate_inactive_limit, simulate_regime_switching_limit, BmSpec,
    LimitState,
};
use crosslob_core::micro::{run_active, run_inactive, run_regime_switching};
use crosslob_core::model::{derive_event_moments, MarketState};
use crosslob_core::order_flow::generate_stream;
use crosslob_core::reinit::{ReinitDist, ReinitEngine};

#[derive(Parser)]
#[command(
    name = "crosslob",
    about = "Two-country cross-border limit order book: simulation and analytics",
    version
)]
struct Cli {
    /// Output directory for CSV files (default: $CROSSLOB_OUT or '.').
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel Monte Carlo (default: all cores).
    /// Results are identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Event-level simulation of the coupled/decoupled/switching dynamics.
    SimulateMicro(SimulateMicro),
    /// Diffusion-limit simulation driven by Brownian queue input.
    SimulateLimit(SimulateLimit),
    /// First-passage analytics of the limit dynamics.
    #[command(subcommand)]
    Analytics(Analytics),
    /// Seeded Monte Carlo studies.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Active,
    Inactive,
    Switching,
}

#[derive(Args)]
struct SimulateMicro {
    /// JSON configuration (see the README for the schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Switching)]
    mode: Mode,
    /// Also dump the order stream for replay debugging.
    #[arg(long)]
    dump_stream: bool,
}

#[derive(Args)]
struct SimulateLimit {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Switching)]
    mode: Mode,
    /// Sampling step of the Brownian input (default horizon/10000).
    #[arg(long)]
    grid_dt: Option<f64>,
}

#[derive(Subcommand)]
enum Analytics {
    /// Survival probability of the first price change.
    Survival(SurvivalArgs),
    /// Probability that the first price move is upward.
    Upward(UpwardArgs),
    /// Exit-location density of the driftless first passage.
    ExitDensity(ExitDensityArgs),
    /// Distribution of the price-change count and the bid price range.
    Range(RangeArgs),
    /// Interface PDE for the cross-border direction change.
    InterfacePde(InterfacePdeArgs),
}

#[derive(Args)]
struct SurvivalArgs {
    /// Start of the cumulative (bid, ask) queues, e.g. `1,1`.
    #[arg(long)]
    x: String,
    /// Drift, e.g. `0,0`.
    #[arg(long)]
    mu: String,
    /// Covariance: `I`, `diag:a,b`, or `a,b,c` for [[a,b],[b,c]].
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    t: f64,
    /// Sweep specification `name=lo:hi:count` over one of
    /// `mu` (common drift), `rho-side` (bid-bid correlation),
    /// `rho-cross` (bid-ask correlation); emits survival_sweep.csv.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct UpwardArgs {
    #[arg(long)]
    x: String,
    #[arg(long)]
    mu: String,
    #[arg(long)]
    sigma: String,
    #[arg(long, default_value_t = 40_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    grid_dt: f64,
}

#[derive(Args)]
struct ExitDensityArgs {
    #[arg(long)]
    x: String,
    #[arg(long)]
    sigma: String,
    /// Evaluation grid `lo:hi:count`; emits exit_density.csv.
    #[arg(long, default_value = "0.05:5:100")]
    z_grid: String,
}

#[derive(Args)]
struct RangeArgs {
    #[arg(long)]
    mu: String,
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    t: f64,
    /// Largest range (in ticks) to report.
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    /// Restart law: `point:a,b,c,d` or `steps:lo,hi,unit`.
    #[arg(long, default_value = "point:1,1,1,1")]
    reinit: String,
    #[arg(long, default_value_t = 64)]
    k_max: usize,
}

#[derive(Args)]
struct InterfacePdeArgs {
    /// Domestic-queue variance.
    #[arg(long, default_value_t = 0.25)]
    sigma_f_sq: f64,
    /// Foreign-queue variance.
    #[arg(long, default_value_t = 0.25)]
    sigma_g_sq: f64,
    /// Covariance between the two queues' inputs.
    #[arg(long, default_value_t = 0.0)]
    cross: f64,
    #[arg(long, default_value_t = -2.0)]
    mu_f: f64,
    #[arg(long, default_value_t = -2.0)]
    mu_g: f64,
    /// Evaluation times, comma separated.
    #[arg(long, default_value = "0.25,0.5,0.75,1")]
    ts: String,
    /// Start grid `lo:hi:count` applied to both queue coordinates.
    #[arg(long, default_value = "0.5:1.5:3")]
    eval: String,
    #[arg(long, default_value_t = 0.05)]
    h: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
}

#[derive(Subcommand)]
enum Experiment {
    /// Coupled-vs-national price-change counts and ranges (scenarios a-d).
    Tables(TablesArgs),
    /// Regime-switching scenario study.
    Scenario(ScenarioArgs),
    /// Analytic value vs. matching limit-engine Monte Carlo.
    CrossValidate(CrossValidateArgs),
}

#[derive(Args)]
struct TablesArgs {
    /// Optional JSON overriding { "n", "replications", "reinit" }.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioName {
    Balanced,
    Imbalanced,
    RegimeDependent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Micro,
    Limit,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    name: ScenarioName,
    #[arg(long, default_value_t = 10_000)]
    n: u32,
    #[arg(long, default_value_t = 1_000)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EngineArg::Micro)]
    engine: EngineArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CrossValidateTarget {
    Survival,
    Upward,
    Range,
}

#[derive(Args)]
struct CrossValidateArgs {
    #[arg(long, value_enum)]
    target: CrossValidateTarget,
    #[arg(long, default_value = "1,1")]
    x: String,
    #[arg(long, default_value = "0,0")]
    mu: String,
    #[arg(long, default_value = "diag:0.5,0.5")]
    sigma: String,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 3)]
    n_ticks: usize,
    #[arg(long, default_value_t = 40_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    grid_dt: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_vec2(s: &str) -> Result<[f64; 2]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("cannot parse 2-vector '{s}'"))?;
    if parts.len() != 2 {
        return Err(anyhow!("expected two components in '{s}'"));
    }
    Ok([parts[0], parts[1]])
}

fn parse_sigma(s: &str) -> Result<[[f64; 2]; 2]> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("i") {
        return Ok([[1.0, 0.0], [0.0, 1.0]]);
    }
    if let Some(rest) = s.strip_prefix("diag:") {
        let d = parse_vec2(rest)?;
        return Ok([[d[0], 0.0], [0.0, d[1]]]);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("cannot parse covariance '{s}'"))?;
    if parts.len() != 3 {
        return Err(anyhow!(
            "covariance must be 'I', 'diag:a,b', or 'a,b,c' for [[a,b],[b,c]]"
        ));
    }
    Ok([[parts[0], parts[1]], [parts[1], parts[2]]])
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("grid must be 'lo:hi:count', got '{s}'"));
    }
    let lo: f64 = parts[0].trim().parse()?;
    let hi: f64 = parts[1].trim().parse()?;
    let count: usize = parts[2].trim().parse()?;
    if count < 1 || hi < lo {
        return Err(anyhow!("invalid grid '{s}'"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn parse_reinit(s: &str) -> Result<ReinitDist> {
    if let Some(rest) = s.strip_prefix("point:") {
        let v: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()?;
        if v.len() != 4 {
            return Err(anyhow!("point restart needs 4 components"));
        }
        return Ok(ReinitDist::PointMass {
            value: [v[0], v[1], v[2], v[3]],
        });
    }
    if let Some(rest) = s.strip_prefix("steps:") {
        let v: Vec<f64> = rest
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()?;
        if v.len() != 2 {
            return Err(anyhow!("steps restart needs 'steps:lo,hi'"));
        }
        return Ok(ReinitDist::UniformSteps {
            lo: v[0] as i64,
            hi: v[1] as i64,
        });
    }
    Err(anyhow!("restart law must be 'point:a,b,c,d' or 'steps:lo,hi'"))
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("CROSSLOB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

/// Errors that should exit with code 2 (bad configuration/arguments).
struct ConfigInvalid(anyhow::Error);

fn load_config(path: &Path) -> Result<SimulationConfig, ConfigInvalid> {
    SimulationConfig::from_path(&path.to_string_lossy())
        .map_err(|e| ConfigInvalid(anyhow!("{e}")))
}

fn run() -> Result<(), MainError> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(MainError::Config(anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| MainError::Runtime(anyhow!("thread pool: {e}")))?;
    }
    let dir = out_dir(&cli.out);
    match cli.command {
        Command::SimulateMicro(args) => simulate_micro(&dir, args),
        Command::SimulateLimit(args) => simulate_limit(&dir, args),
        Command::Analytics(cmd) => analytics(&dir, cmd).map_err(MainError::Runtime),
        Command::Experiment(cmd) => experiment(&dir, cmd),
    }
}

enum MainError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ConfigInvalid> for MainError {
    fn from(e: ConfigInvalid) -> Self {
        MainError::Config(e.0)
    }
}

fn simulate_micro(dir: &Path, args: SimulateMicro) -> Result<(), MainError> {
    let cfg = load_config(&args.config)?;
    let params = cfg
        .validate()
        .map_err(|e| MainError::Config(anyhow!("{e}")))?;
    let stream = generate_stream(args.seed, &params);
    let q0 = cfg.initial_queues.unwrap_or_else(|| {
        let mut engine = ReinitEngine::new(cfg.reinit.clone(), params.dv, args.seed, u64::MAX);
        engine.draw_units(crosslob_core::reinit::PriceDir::Up, &[0; 4])
    });
    let s0 = MarketState::new_active(q0);
    let mut reinit = ReinitEngine::new(cfg.reinit.clone(), params.dv, args.seed, 0);
    let traj = match args.mode {
        Mode::Active => run_active(s0, &stream, &mut reinit, &params),
        Mode::Inactive => run_inactive(s0, &stream, &mut reinit, &params),
        Mode::Switching => run_regime_switching(s0, &stream, &mut reinit, &params),
    }
    .map_err(|e| MainError::Runtime(anyhow!("{e}")))?;
    let p1 = write_file(dir, "trajectory.csv", &trajectory_to_csv(&traj))
        .map_err(MainError::Runtime)?;
    write_file(dir, "events.csv", &events_to_csv(&traj)).map_err(MainError::Runtime)?;
    if args.dump_stream {
        write_file(dir, "stream.csv", &stream.to_csv()).map_err(MainError::Runtime)?;
    }
    println!(
        "simulate-micro: {} events, {} price changes, {} decouplings -> {}",
        stream.events.len(),
        traj.price_change_count(),
        traj.decouple_count(),
        p1.display()
    );
    Ok(())
}

fn simulate_limit(dir: &Path, args: SimulateLimit) -> Result<(), MainError> {
    let cfg = load_config(&args.config)?;
    let params = cfg
        .validate()
        .map_err(|e| MainError::Config(anyhow!("{e}")))?;
    let moments = derive_event_moments(&params).map_err(|e| MainError::Config(anyhow!("{e}")))?;
    let grid_dt = args.grid_dt.unwrap_or(params.horizon_t * 1e-4);
    let q0 = cfg
        .initial_queues
        .map(|q| q.map(|x| x as f64 * params.dv))
        .unwrap_or([0.15; 4]);
    let spec = BmSpec::new(q0, moments.mu, moments.covariance(), grid_dt);
    let mut reinit = ReinitEngine::new(cfg.reinit.clone(), params.dv, args.seed, 0);
    let s0 = LimitState::new_active(q0);
    let traj = match args.mode {
        Mode::Active => simulate_active_limit(
            s0,
            args.seed,
            0,
            &spec,
            &mut reinit,
            params.horizon_t,
            params.tick_delta,
        ),
        Mode::Inactive => simulate_inactive_limit(
            s0,
            args.seed,
            0,
            &spec,
            &mut reinit,
            params.horizon_t,
            params.tick_delta,
        ),
        Mode::Switching => {
            let inactive_spec = params
                .regime_overrides
                .as_ref()
                .map(|f| {
                    crosslob_core::model::moments_of_flow(f, params.dv)
                        .map(|m| BmSpec::new(q0, m.mu, m.covariance(), grid_dt))
                })
                .transpose()
                .map_err(|e| MainError::Config(anyhow!("{e}")))?;
            simulate_regime_switching_limit(
                s0,
                args.seed,
                0,
                &spec,
                inactive_spec.as_ref(),
                &mut reinit,
                (
                    params.kappa_minus_units as f64 * params.dv,
                    params.kappa_plus_units as f64 * params.dv,
                ),
                params.horizon_t,
                params.tick_delta,
            )
        }
    }
    .map_err(|e| MainError::Runtime(anyhow!("{e}")))?;
    let p1 = write_file(dir, "limit_trajectory.csv", &limit_trajectory_to_csv(&traj))
        .map_err(MainError::Runtime)?;
    write_file(dir, "limit_events.csv", &limit_events_to_csv(&traj))
        .map_err(MainError::Runtime)?;
    println!(
        "simulate-limit: {} grid points, {} price changes, {} decouplings -> {}",
        traj.queues.len(),
        traj.changes.len(),
        traj.decouple_count(),
        p1.display()
    );
    Ok(())
}

fn analytics(dir: &Path, cmd: Analytics) -> Result<()> {
    let ctl = SeriesControl::default();
    match cmd {
        Analytics::Survival(a) => {
            let x = parse_vec2(&a.x)?;
            let mu = parse_vec2(&a.mu)?;
            let sigma = parse_sigma(&a.sigma)?;
            match a.sweep {
                None => {
                    let p = survival_probability(x, mu, sigma, a.t, &ctl)?;
                    println!("survival({x:?}, mu={mu:?}, t={}) = {}", a.t, fmt9(p));
                }
                Some(sweep) => {
                    let (name, grid) = sweep
                        .split_once('=')
                        .ok_or_else(|| anyhow!("sweep must be 'name=lo:hi:count'"))?;
                    let values = parse_grid(grid)?;
                    let mut csv = String::from("parameter,value\n");
                    for v in &values {
                        let (mu_v, sigma_v) = match name {
                            "mu" => ([*v, *v], sigma),
                            "rho-side" => {
                                // Correlation between the two bid inputs
                                // inflates the bid variance only.
                                let mut s = sigma;
                                s[0][0] = sigma[0][0] * (1.0 + *v);
                                (mu, s)
                            }
                            "rho-cross" => {
                                let mut s = sigma;
                                let off = *v * (sigma[0][0] * sigma[1][1]).sqrt() / 2.0;
                                s[0][1] = off;
                                s[1][0] = off;
                                (mu, s)
                            }
                            other => return Err(anyhow!("unknown sweep '{other}'")),
                        };
                        let p = survival_probability(x, mu_v, sigma_v, a.t, &ctl)?;
                        csv.push_str(&format!("{},{}\n", fmt9(*v), fmt9(p)));
                    }
                    let path = write_file(dir, "survival_sweep.csv", &csv)?;
                    println!(
                        "survival sweep {name}: {} values -> {}",
                        values.len(),
                        path.display()
                    );
                }
            }
        }
        Analytics::Upward(a) => {
            let x = parse_vec2(&a.x)?;
            let mu = parse_vec2(&a.mu)?;
            let sigma = parse_sigma(&a.sigma)?;
            let ctl = SeriesControl {
                mc_paths: a.paths,
                mc_dt: a.grid_dt,
                ..ctl
            };
            let up = upward_probability(x, mu, sigma, &ctl)?;
            println!(
                "upward({x:?}, mu={mu:?}) = {} (se {})",
                fmt9(up.value),
                fmt9(up.std_error)
            );
        }
        Analytics::ExitDensity(a) => {
            let x = parse_vec2(&a.x)?;
            let sigma = parse_sigma(&a.sigma)?;
            let grid = parse_grid(&a.z_grid)?;
            let mut csv = String::from("parameter,value\n");
            for z in &grid {
                csv.push_str(&format!(
                    "{},{}\n",
                    fmt9(*z),
                    fmt9(exit_location_density(x, sigma, *z)?)
                ));
            }
            let path = write_file(dir, "exit_density.csv", &csv)?;
            println!("exit density on {} points -> {}", grid.len(), path.display());
        }
        Analytics::Range(a) => {
            let mu = parse_vec2(&a.mu)?;
            let sigma = parse_sigma(&a.sigma)?;
            let dist = parse_reinit(&a.reinit)?;
            let summed = SummedReinit::from_dist(&dist, 1.0)?;
            let counts = price_change_count_dist(
                &summed,
                mu,
                sigma,
                a.t,
                a.k_max,
                &CountControl::default(),
                &ctl,
            )?;
            let mut csv = String::from("parameter,value\n");
            for (k, p) in counts.iter().enumerate() {
                csv.push_str(&format!("count_{k},{}\n", fmt9(*p)));
            }
            for n in 0..=a.n_max {
                let p = range_distribution(
                    &summed,
                    mu,
                    sigma,
                    a.t,
                    n,
                    &CountControl::default(),
                    &ctl,
                )?;
                csv.push_str(&format!("range_le_{n},{}\n", fmt9(p)));
            }
            let path = write_file(dir, "range.csv", &csv)?;
            println!(
                "count/range distribution (k <= {}, n <= {}) -> {}",
                counts.len() - 1,
                a.n_max,
                path.display()
            );
        }
        Analytics::InterfacePde(a) => {
            let params = InterfaceParams::from_side_moments(
                a.sigma_f_sq,
                a.sigma_g_sq,
                a.cross,
                a.mu_f,
                a.mu_g,
            )?;
            let ts: Vec<f64> = a
                .ts
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()?;
            let grid = parse_grid(&a.eval)?;
            let ctl = PdeControl {
                h: a.h,
                dt: a.dt,
                ..PdeControl::default()
            };
            let mut csv = String::from("x_f,x_g,t,value\n");
            for &xf in &grid {
                for &xg in &grid {
                    let vals = interface_survival_field(xf, xg, &params, &ts, &ctl)?;
                    for (t, v) in ts.iter().zip(vals) {
                        csv.push_str(&format!(
                            "{},{},{},{}\n",
                            fmt9(xf),
                            fmt9(xg),
                            fmt9(*t),
                            fmt9(v)
                        ));
                    }
                }
            }
            let path = write_file(dir, "interface_pde.csv", &csv)?;
            println!(
                "interface PDE on {}x{} starts, {} times -> {}",
                grid.len(),
                grid.len(),
                ts.len(),
                path.display()
            );
        }
    }
    Ok(())
}

fn experiment(dir: &Path, cmd: Experiment) -> Result<(), MainError> {
    match cmd {
        Experiment::Tables(a) => {
            let cfg = match &a.config {
                Some(path) => TablesConfig::from_path(&path.to_string_lossy())
                    .map_err(|e: ConfigError| MainError::Config(anyhow!("{e}")))?,
                None => TablesConfig {
                    reinit: table_reinit_default(),
                    ..TablesConfig::default()
                },
            };
            let table = run_price_change_table(cfg.n, cfg.replications, a.seed, &cfg.reinit);
            let path =
                write_file(dir, "table.csv", &table.to_csv()).map_err(MainError::Runtime)?;
            println!(
                "tables: {} scenarios x {} replications (n = {}) -> {}",
                table.rows.len(),
                cfg.replications,
                cfg.n,
                path.display()
            );
        }
        Experiment::Scenario(a) => {
            let mut spec = match a.name {
                ScenarioName::Balanced => balanced_scenario(a.n, a.reps, a.seed),
                ScenarioName::Imbalanced => imbalanced_scenario(a.n, a.reps, a.seed),
                ScenarioName::RegimeDependent => regime_dependent_scenario(a.n, a.reps, a.seed),
            };
            spec.engine = match a.engine {
                EngineArg::Micro => EngineKind::Micro,
                EngineArg::Limit => EngineKind::Limit,
            };
            let out = run_scenario(&spec).map_err(|e| MainError::Runtime(anyhow!(e)))?;
            let path = write_file(dir, "scenario.csv", &out.summary.to_csv(&spec.name))
                .map_err(MainError::Runtime)?;
            if let Some(t) = &out.example {
                write_file(dir, "scenario_trajectory.csv", &trajectory_to_csv(t))
                    .map_err(MainError::Runtime)?;
            }
            if let Some(t) = &out.example_limit {
                write_file(dir, "scenario_trajectory.csv", &limit_trajectory_to_csv(t))
                    .map_err(MainError::Runtime)?;
            }
            println!(
                "scenario {}: switch frequency {} over {} replications -> {}",
                spec.name,
                fmt9(out.summary.switch_frequency),
                spec.replications,
                path.display()
            );
        }
        Experiment::CrossValidate(a) => {
            let x = parse_vec2(&a.x).map_err(MainError::Config)?;
            let mu = parse_vec2(&a.mu).map_err(MainError::Config)?;
            let sigma = parse_sigma(&a.sigma).map_err(MainError::Config)?;
            let query = match a.target {
                CrossValidateTarget::Survival => AnalyticsQuery::Survival {
                    x,
                    mu_h: mu,
                    sigma_h: sigma,
                    t: a.t,
                    paths: a.paths,
                    grid_dt: a.grid_dt,
                },
                CrossValidateTarget::Upward => AnalyticsQuery::Upward {
                    x,
                    mu_h: mu,
                    sigma_h: sigma,
                    paths: a.paths,
                    grid_dt: a.grid_dt,
                },
                CrossValidateTarget::Range => AnalyticsQuery::RangeLe {
                    reinit: ReinitDist::PointMass { value: [1.0; 4] },
                    mu_h: mu,
                    sigma_h: sigma,
                    t: a.t,
                    n_ticks: a.n_ticks,
                    paths: a.paths,
                    grid_dt: a.grid_dt,
                },
            };
            let cv = mc_cross_validate(&query, a.seed).map_err(|e| MainError::Runtime(anyhow!(e)))?;
            let mut csv = String::from("quantity,value\n");
            csv.push_str(&format!("analytic,{}\n", fmt9(cv.analytic)));
            csv.push_str(&format!("mc_estimate,{}\n", fmt9(cv.mc_estimate)));
            csv.push_str(&format!("se,{}\n", fmt9(cv.se)));
            csv.push_str(&format!("z,{}\n", fmt9(cv.z_score())));
            let path = write_file(dir, "cross_validate.csv", &csv).map_err(MainError::Runtime)?;
            println!(
                "cross-validate: analytic {} vs mc {} (z = {:.2}) -> {}",
                fmt9(cv.analytic),
                fmt9(cv.mc_estimate),
                cv.z_score(),
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(MainError::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(MainError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
