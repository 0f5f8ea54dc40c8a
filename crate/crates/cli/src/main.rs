//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors, 3 when a
//! solve finished without converging, 1 on other failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cogpower_cli::{
    run_solve, run_sweep, run_validate_bound, CliError, ExperimentConfig, ExperimentKind, RunOutput,
};

#[derive(Parser, Debug)]
#[command(
    name = "cogpower",
    version,
    about = "Energy-efficiency-optimal power adaptation for sensing-based spectrum sharing",
    after_help = "Configuration comes from an optional `key = value` file (--config) that \
                  flags of the same names override. Power keys also accept a _db suffix."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single solve; emits one CSV row and an iteration trace.
    Solve(RunArgs),
    /// Run one solve per sweep value; emits one CSV row per value.
    Sweep(RunArgs),
    /// Compare the rate lower bound against Monte Carlo exact rates over a
    /// power grid.
    ValidateBound(RunArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Solve(_) => ExperimentKind::Solve,
            Command::Sweep(_) => ExperimentKind::Sweep,
            Command::ValidateBound(_) => ExperimentKind::ValidateBound,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Sweep(a) | Command::ValidateBound(a) => a,
        }
    }
}

/// Config file plus per-key overrides. Every flag mirrors a config key,
/// so the long names keep the keys' snake_case spelling.
#[derive(Args, Debug, Default)]
#[command(rename_all = "snake_case")]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted. A solve with --out also writes
    /// `<stem>.trace.csv` next to it.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of fading realizations (config key n_samples).
    #[arg(long)]
    samples: Option<usize>,
    /// Worker threads for sweep points; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,

    #[arg(long, hide_short_help = true)]
    n0: Option<f64>,
    #[arg(long, hide_short_help = true)]
    n0_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    sigma_s2: Option<f64>,
    #[arg(long, hide_short_help = true)]
    sigma_s2_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    frame_len: Option<f64>,
    #[arg(long, hide_short_help = true)]
    sense_len: Option<f64>,
    #[arg(long, hide_short_help = true)]
    circuit_power: Option<f64>,
    #[arg(long, hide_short_help = true)]
    circuit_power_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    pd: Option<f64>,
    #[arg(long, hide_short_help = true)]
    pf: Option<f64>,
    #[arg(long, hide_short_help = true)]
    prior_idle: Option<f64>,
    #[arg(long, hide_short_help = true)]
    prior_busy: Option<f64>,
    #[arg(long, hide_short_help = true)]
    mean_gain_h: Option<f64>,
    #[arg(long, hide_short_help = true)]
    mean_gain_g: Option<f64>,
    #[arg(long, hide_short_help = true)]
    regime: Option<String>,
    #[arg(long, hide_short_help = true)]
    p_avg: Option<f64>,
    #[arg(long, hide_short_help = true)]
    p_avg_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    q_avg: Option<f64>,
    #[arg(long, hide_short_help = true)]
    q_avg_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    p_pk0: Option<f64>,
    #[arg(long, hide_short_help = true)]
    p_pk0_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    p_pk1: Option<f64>,
    #[arg(long, hide_short_help = true)]
    p_pk1_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    tolerance: Option<f64>,
    #[arg(long, hide_short_help = true)]
    step_size: Option<f64>,
    #[arg(long, hide_short_help = true)]
    step_rule: Option<String>,
    #[arg(long, hide_short_help = true)]
    max_outer: Option<usize>,
    #[arg(long, hide_short_help = true)]
    max_inner: Option<usize>,
    #[arg(long, hide_short_help = true)]
    alpha_init: Option<f64>,
    #[arg(long, hide_short_help = true)]
    lambda_init: Option<f64>,
    #[arg(long, hide_short_help = true)]
    nu_init: Option<f64>,
    #[arg(long, hide_short_help = true)]
    sweep: Option<String>,
    /// Comma-separated list of sweep values.
    #[arg(long, hide_short_help = true)]
    sweep_values: Option<String>,
    #[arg(long, hide_short_help = true)]
    gain_h: Option<f64>,
    #[arg(long, hide_short_help = true)]
    power_min: Option<f64>,
    #[arg(long, hide_short_help = true)]
    power_min_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    power_max: Option<f64>,
    #[arg(long, hide_short_help = true)]
    power_max_db: Option<f64>,
    #[arg(long, hide_short_help = true)]
    power_points: Option<usize>,
    #[arg(long, hide_short_help = true)]
    n_mc: Option<usize>,
}

macro_rules! collect_flag_pairs {
    ($args:expr, $pairs:expr; $($field:ident),+ $(,)?) => {
        $(
            if let Some(v) = &$args.$field {
                $pairs.push((stringify!($field).to_string(), v.to_string()));
            }
        )+
    };
}

impl RunArgs {
    /// Flag overrides as `key = value` pairs, in declaration order.
    fn pairs(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        if let Some(seed) = self.seed {
            pairs.push(("seed".to_string(), seed.to_string()));
        }
        if let Some(samples) = self.samples {
            pairs.push(("n_samples".to_string(), samples.to_string()));
        }
        if let Some(workers) = self.workers {
            pairs.push(("workers".to_string(), workers.to_string()));
        }
        collect_flag_pairs!(self, pairs;
            n0, n0_db, sigma_s2, sigma_s2_db, frame_len, sense_len,
            circuit_power, circuit_power_db, pd, pf, prior_idle, prior_busy,
            mean_gain_h, mean_gain_g, regime, p_avg, p_avg_db, q_avg, q_avg_db,
            p_pk0, p_pk0_db, p_pk1, p_pk1_db, tolerance, step_size, step_rule,
            max_outer, max_inner, alpha_init, lambda_init, nu_init,
            sweep, sweep_values, gain_h, power_min, power_min_db,
            power_max, power_max_db, power_points, n_mc,
        );
        pairs
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        let pairs = ExperimentConfig::parse_file(path)?;
        cfg.apply_pairs(&pairs)?;
    }
    cfg.apply_pairs(&args.pairs())?;
    if let Some(declared) = cfg.kind {
        if declared != kind {
            return Err(CliError::Config(format!(
                "config declares kind = {} but the subcommand is {}",
                declared.as_key(),
                kind.as_key()
            )));
        }
    }
    cfg.kind = Some(kind);
    Ok(cfg)
}

fn trace_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.trace.csv"))
}

fn emit(output: &RunOutput, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.csv)?;
            if let Some(trace) = &output.trace_csv {
                std::fs::write(trace_path(path), trace)?;
            }
        }
        None => print!("{}", output.csv),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let kind = cli.command.kind();
    let args = cli.command.args();
    let cfg = build_config(kind, args)?;
    let output = match kind {
        ExperimentKind::Solve => run_solve(&cfg)?,
        ExperimentKind::Sweep => run_sweep(&cfg)?,
        ExperimentKind::ValidateBound => run_validate_bound(&cfg)?,
    };
    emit(&output, args.out.as_ref())?;
    Ok(output.all_converged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("cogpower: solve did not converge within the iteration caps");
            ExitCode::from(3)
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("cogpower: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("cogpower: {e}");
            ExitCode::from(1)
        }
    }
}
