use clap::{Args, Parser, Subcommand, ValueEnum};
use cptsense::bath::{autocorrelation_estimate, ou_path};
use cptsense::crlb::CrlbReport;
use cptsense::estimators::{run_average_count, run_ou_bayes, run_simple_bayes, GridModel};
use cptsense::harness::output::OutputDir;
use cptsense::harness::{self, HarnessError, ScenarioConfig};
use cptsense::photon::CountSeries;
use cptsense::seed::{derive, Purpose};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cptsense", version, about = "Real-time bath sensing from single-emitter photon counts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario JSON; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo runs; overrides the config.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate baths and counts, run all estimators, write per-run series.
    Simulate,
    /// Run the estimators on a count CSV, or on simulated counts without one.
    Estimate {
        /// CSV with a `count` column, one row per update interval.
        #[arg(long)]
        counts: Option<PathBuf>,
    },
    /// Closed-form Cramér–Rao bounds for the configured scenario.
    Crlb,
    /// Estimator variances and bounds over a parameter grid.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        /// First swept parameter: τ_N in s, τ′_N/τ_N ratios, or Ω/2π in MHz.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Second swept parameter: σ′/σ ratios or Δ0/2π in MHz.
        #[arg(long, value_delimiter = ',')]
        values2: Option<Vec<f64>>,
    },
    /// OU-Bayes variance from quantum-jump counts against adiabatic counts.
    CompareSse,
    /// Data behind one of the standard figures.
    Figure {
        #[arg(value_enum)]
        which: FigureKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    TauN,
    Mismatch,
    OmegaBias,
    OmegaOptbias,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureKind {
    #[value(name = "2a")]
    BathAutocorrelation,
    #[value(name = "3")]
    SingleRun,
    #[value(name = "4a")]
    MemoryTime,
    #[value(name = "4b")]
    Mismatch,
    #[value(name = "5")]
    OmegaBias,
    #[value(name = "6b")]
    SseComparison,
    #[value(name = "7")]
    OptimalBias,
}

const TAU_N_VALUES: [f64; 5] = [0.25e-3, 0.5e-3, 1e-3, 2e-3, 4e-3];
const MISMATCH_RATIOS: [f64; 6] = [0.5, 0.8, 1.0, 1.2, 1.5, 2.0];
const RABI_VALUES: [f64; 5] = [1.5, 2.0, 2.5, 3.0, 4.0];
const BIAS_VALUES: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.5];

fn load_config(g: &Global, fallback: ScenarioConfig) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = match &g.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => fallback,
    };
    if let Some(seed) = g.seed {
        cfg.master_seed = seed;
    }
    if let Some(runs) = g.runs {
        cfg.runs = runs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let res = harness::run_scenario(cfg)?;
    dir.write_runs(&res.records)?;
    dir.write_json("summary.json", &res.summary)?;
    print_json(&res.summary)
}

fn read_counts(path: &Path, bin_width: f64) -> Result<CountSeries, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| HarnessError::Config("count file is empty".into()))?;
    let col = header
        .split(',')
        .position(|h| matches!(h.trim(), "count" | "y_n"))
        .ok_or_else(|| HarnessError::Config("count file has no `count` column".into()))?;
    let counts = lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse::<u32>().ok())
                .ok_or_else(|| HarnessError::Config(format!("count file row {}: bad count", i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CountSeries { bin_width, t_start: 0.0, counts })
}

fn estimate_file(cfg: &ScenarioConfig, path: &Path, out: &Path) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let est_cfg = cfg.estimator_config()?;
    let model = GridModel::new(&est_cfg)?;
    let counts = read_counts(path, est_cfg.update_interval)?;
    let avg = run_average_count(&counts, &est_cfg)?;
    let simple = run_simple_bayes(&counts, &model)?;
    let ou = run_ou_bayes(&counts, &model)?;
    let mut w = dir.csv("estimates.csv")?;
    writeln!(w, "bin_index,t_s,count,est_avg,est_simple,est_ou")?;
    for n in 0..counts.len() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            n,
            counts.bin_time(n),
            counts.counts[n],
            avg.estimates[n],
            simple.estimates[n],
            ou.estimates[n]
        )?;
    }
    w.flush()?;
    #[derive(Serialize)]
    struct EstimateSummary {
        bins: usize,
        total_counts: u64,
        mean_rate: f64,
        avg_valid_from: usize,
    }
    let summary = EstimateSummary {
        bins: counts.len(),
        total_counts: counts.total(),
        mean_rate: counts.mean_rate(),
        avg_valid_from: avg.valid_from,
    };
    dir.write_json("summary.json", &summary)?;
    print_json(&summary)
}

fn crlb(cfg: &ScenarioConfig, out: &Path) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let report = CrlbReport::compute(&cfg.cpt_params()?, &cfg.bath_params()?)?;
    dir.write_json("summary.json", &report)?;
    print_json(&report)
}

fn sweep(
    cfg: &ScenarioConfig,
    kind: SweepKind,
    values: Option<Vec<f64>>,
    values2: Option<Vec<f64>>,
    out: &Path,
) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let first = |default: &[f64]| values.clone().unwrap_or_else(|| default.to_vec());
    let second = |default: &[f64]| values2.clone().unwrap_or_else(|| default.to_vec());
    let result = match kind {
        SweepKind::TauN => harness::sweep_tau_n(cfg, &first(&TAU_N_VALUES))?,
        SweepKind::Mismatch => harness::sweep_mismatch(cfg, &first(&MISMATCH_RATIOS), &second(&MISMATCH_RATIOS))?,
        SweepKind::OmegaBias => harness::sweep_omega_bias(cfg, &first(&RABI_VALUES), &second(&BIAS_VALUES))?,
        SweepKind::OmegaOptbias => {
            let r = harness::sweep_omega_optbias(cfg, &first(&RABI_VALUES), &second(&BIAS_VALUES))?;
            dir.write_sweep(&r.grid, "grid.csv")?;
            dir.write_sweep(&r.optimal, "sweep.csv")?;
            dir.write_json("summary.json", &r)?;
            return print_json(&r.optimal);
        }
    };
    dir.write_sweep(&result, "sweep.csv")?;
    dir.write_json("summary.json", &result)?;
    print_json(&result)
}

fn compare_sse(cfg: &ScenarioConfig, out: &Path) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let report = harness::compare_sse_steady(cfg)?;
    dir.write_json("summary.json", &report)?;
    print_json(&report)
}

/// Sample paths and the ensemble autocorrelation of the bath.
fn bath_figure(cfg: &ScenarioConfig, out: &Path) -> Result<(), HarnessError> {
    let dir = OutputDir::create(out, cfg)?;
    let b = cfg.bath_params()?;
    let dt = cfg.sim.update_interval_s;
    let paths = (0..cfg.runs)
        .map(|r| ou_path(&b, cfg.sim.duration_s, dt, &mut derive(cfg.master_seed, r as u64, Purpose::Paths)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut w = dir.csv("path.csv")?;
    writeln!(w, "t_s,x_rad_s")?;
    for (i, x) in paths[0].samples.iter().enumerate() {
        writeln!(w, "{},{}", paths[0].time(i), x)?;
    }
    w.flush()?;
    if paths.len() < 2 {
        return Ok(());
    }
    let acf = autocorrelation_estimate(&paths, (5.0 * b.tau_n()).min(0.5 * cfg.sim.duration_s))?;
    let mut w = dir.csv("autocorrelation.csv")?;
    writeln!(w, "lag_s,r_estimate,r_ou")?;
    for (lag, r) in &acf {
        writeln!(w, "{},{},{}", lag, r, b.variance() * (-lag / b.tau_n()).exp())?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    let out = g.out.as_path();
    match cli.command {
        Command::Simulate => simulate(&load_config(g, ScenarioConfig::default())?, out),
        Command::Estimate { counts: Some(path) } => estimate_file(&load_config(g, ScenarioConfig::default())?, &path, out),
        Command::Estimate { counts: None } => simulate(&load_config(g, ScenarioConfig::default())?, out),
        Command::Crlb => crlb(&load_config(g, ScenarioConfig::default())?, out),
        Command::Sweep { kind, values, values2 } => sweep(&load_config(g, ScenarioConfig::default())?, kind, values, values2, out),
        Command::CompareSse => compare_sse(&load_config(g, ScenarioConfig::sse_preset())?, out),
        Command::Figure { which } => match which {
            FigureKind::BathAutocorrelation => {
                let fallback = ScenarioConfig { runs: 1000, ..ScenarioConfig::default() };
                bath_figure(&load_config(g, fallback)?, out)
            }
            FigureKind::SingleRun => {
                let fallback = ScenarioConfig { runs: 1, ..ScenarioConfig::default() };
                simulate(&load_config(g, fallback)?, out)
            }
            FigureKind::MemoryTime => sweep(&load_config(g, ScenarioConfig::default())?, SweepKind::TauN, None, None, out),
            FigureKind::Mismatch => sweep(&load_config(g, ScenarioConfig::default())?, SweepKind::Mismatch, None, None, out),
            FigureKind::OmegaBias => sweep(&load_config(g, ScenarioConfig::default())?, SweepKind::OmegaBias, None, None, out),
            FigureKind::SseComparison => compare_sse(&load_config(g, ScenarioConfig::sse_preset())?, out),
            FigureKind::OptimalBias => {
                sweep(&load_config(g, ScenarioConfig::default())?, SweepKind::OmegaOptbias, None, None, out)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let report = serde_json::json!({ "error": "usage", "message": e.to_string().trim_end() });
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}
