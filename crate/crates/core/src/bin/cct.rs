use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cct::error::{Error, Result};
use cct::evolve::{build_prerotation_set, modified_projectors, PrerotationOptions};
use cct::harness::{
    run_3q, run_angle_sweep, run_axes_sweep, run_fig1b, write_results_csv, ExperimentConfig, ResultRow, RunManifest,
    Shots,
};
use cct::measure::{mitigate_confusion_with, CountsTensor, Mitigation};
use cct::qmath::concurrence;
use cct::tomo::{cct_reconstruct, mle_standard_from_counts, ReconstructionOptions, ReconstructionResult};

const EXIT_NONCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "cct", version, about = "Tomography of ZZ-coupled qubits with coupling-compensated reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shots per setting, or `exact`.
    #[arg(long, global = true)]
    shots: Option<Shots>,
    /// Extra random starts per reconstruction.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Confusion matrix CSV for readout mitigation.
    #[arg(long, global = true)]
    mitigation: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity against coupling strength, two qubits.
    Fig1b,
    /// Fidelity against the tomography rotation angle.
    Angles,
    /// Fidelity against the angle between tomography axes.
    Axes,
    /// Fidelity against coupling strength, three qubits.
    Threeq,
    /// Reconstruct a state from a counts CSV.
    Reconstruct {
        #[arg(long)]
        counts: PathBuf,
        /// Mitigation mode used with --mitigation.
        #[arg(long, default_value = "inverse")]
        mode: String,
    },
    /// Print the configured states.
    Prepare,
    /// Check the configuration and its pre-rotation operators.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fig1b => "fig1b",
            Command::Angles => "angles",
            Command::Axes => "axes",
            Command::Threeq => "threeq",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Prepare => "prepare",
            Command::Validate => "validate",
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(shots) = common.shots {
        cfg.shots = shots;
    }
    if let Some(k) = common.restarts {
        cfg.restarts = k;
    }
    if let Some(m) = &common.mitigation {
        cfg.mitigation = Some(m.clone());
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct PreparedState {
    name: String,
    re: Vec<f64>,
    im: Vec<f64>,
    purity: f64,
    concurrence: Option<f64>,
}

#[derive(Serialize)]
struct Reconstructions {
    standard: ReconstructionResult,
    cct: ReconstructionResult,
}

/// Runs a command, returning the outputs written and whether every
/// optimization converged.
fn execute(command: &Command, cfg: &ExperimentConfig, dir: &Path) -> Result<(Vec<String>, bool)> {
    let table = |rows: Vec<ResultRow>| -> Result<(Vec<String>, bool)> {
        let path = dir.join("results.csv");
        write_results_csv(&rows, File::create(&path)?)?;
        for r in &rows {
            println!("{:>10.3} {:<10} {:<13} {:.6} +- {:.6}", r.value, r.state, r.method, r.fidelity, r.fidelity_std);
        }
        Ok((vec![path.display().to_string()], rows.iter().all(|r| r.converged)))
    };
    let n = cfg.system.n_qubits;
    match command {
        Command::Fig1b => table(run_fig1b(cfg)?),
        Command::Angles => table(run_angle_sweep(cfg)?),
        Command::Axes => table(run_axes_sweep(cfg)?),
        Command::Threeq => table(run_3q(cfg)?),
        Command::Reconstruct { counts, mode } => {
            let mode: Mitigation = serde_json::from_value(serde_json::Value::String(mode.clone()))
                .map_err(|_| Error::Config(format!("unknown mitigation mode {mode:?}")))?;
            let mut data = CountsTensor::read_csv(File::open(counts)?)?;
            if let Some(m) = cfg.confusion()? {
                data = mitigate_confusion_with(&m, &data, mode)?;
            }
            let system = cfg.system.to_spec(None)?;
            let set = build_prerotation_set(&system, &cfg.pulses.template(n)?, &cfg.axis_pairs(n)?, &PrerotationOptions::default())?;
            let options = ReconstructionOptions { restarts: cfg.restarts, seed: cfg.seed, ..Default::default() };
            let result = Reconstructions {
                standard: mle_standard_from_counts(&data, &options)?,
                cct: cct_reconstruct(&data, &modified_projectors(&set), &options)?,
            };
            let template = cfg.pulses.template(n)?;
            for state in &cfg.states {
                let target = state.resolve(&system, &template)?;
                println!(
                    "{}: standard {:.6}, cct {:.6}",
                    state.name(),
                    target.fidelity(&result.standard.rho)?,
                    target.fidelity(&result.cct.rho)?
                );
            }
            let converged = result.standard.converged && result.cct.converged;
            let path = dir.join("reconstruction.json");
            write_json(&path, &result)?;
            Ok((vec![path.display().to_string()], converged))
        }
        Command::Prepare => {
            let system = cfg.system.to_spec(None)?;
            let template = cfg.pulses.template(n)?;
            let mut out = Vec::new();
            for state in &cfg.states {
                let rho = state.resolve(&system, &template)?.density();
                let (re, im) = if (rho.purity() - 1.0).abs() < 1e-9 {
                    // Pure: report amplitudes with the largest one real.
                    let m = rho.matrix();
                    let k = (0..m.nrows()).max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re)).unwrap_or(0);
                    let col = m.column(k).unscale(m[(k, k)].re.sqrt());
                    (col.iter().map(|c| c.re).collect(), col.iter().map(|c| c.im).collect())
                } else {
                    (Vec::new(), Vec::new())
                };
                let conc = if n == 2 { Some(concurrence(&rho)?) } else { None };
                println!("{}: purity {:.6}, concurrence {:?}", state.name(), rho.purity(), conc);
                out.push(PreparedState { name: state.name().to_string(), re, im, purity: rho.purity(), concurrence: conc });
            }
            let path = dir.join("states.json");
            write_json(&path, &out)?;
            Ok((vec![path.display().to_string()], true))
        }
        Command::Validate => {
            let system = cfg.system.to_spec(None)?;
            let set = build_prerotation_set(&system, &cfg.pulses.template(n)?, &cfg.axis_pairs(n)?, &PrerotationOptions::default())?;
            if let Some(m) = cfg.confusion()? {
                println!("confusion matrix condition number {:.3e}", m.condition_number());
            }
            println!("configuration valid: {} pre-rotation operators are unitary", set.len());
            Ok((Vec::new(), true))
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if matches!(cli.command, Command::Validate) {
        execute(&cli.command, &cfg, Path::new("."))?;
        return Ok(true);
    }
    let dir = output_dir(&cfg)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let (outputs, converged) = execute(&cli.command, &cfg, &dir)?;
    let mut manifest = RunManifest::new(cli.command.name(), &cfg, started, clock.elapsed());
    manifest.outputs = outputs;
    manifest.converged = converged;
    manifest.write(&dir.join("manifest.json"))?;
    log::info!("wrote {} in {:.2}s", dir.display(), manifest.elapsed_seconds);
    Ok(converged)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: at least one reconstruction did not converge; partial output written");
            ExitCode::from(EXIT_NONCONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
