//! Experiment orchestration and CSV emission.
//!
//! Three experiment kinds are supported: a single solve, a one-parameter
//! sweep of solves, and a bound-validation sweep that compares the
//! achievable-rate lower bound against the Monte Carlo exact rate. All
//! output is CSV with `#`-prefixed metadata lines (seed and the effective
//! configuration) above the header, and is byte-stable for a given
//! configuration and seed regardless of worker count.

use cogpower::{
    branch_probs, draw_samples, exact_rate_mc, rate_lower_bound_fixed_gain, solve_on_samples,
    write_trace_csv, Branch, ChannelSampleSet, SolveResult,
};

use crate::config::{linear_to_db, ExperimentConfig, ExperimentKind, Regime, SweepParam};
use crate::CliError;

/// CSV text plus convergence status of a finished experiment.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    /// Per-iteration solver trace, present for single solves.
    pub trace_csv: Option<String>,
    pub all_converged: bool,
}

/// dB values are printed to six decimal digits with trailing zeros trimmed,
/// so a parsed dB input reproduces itself.
fn format_db(db: f64) -> String {
    format!("{}", (db * 1e6).round() / 1e6)
}

fn metadata(cfg: &ExperimentConfig) -> String {
    let mut text = format!("# seed = {}\n", cfg.seed);
    for line in cfg.echo() {
        text.push_str("# ");
        text.push_str(&line);
        text.push('\n');
    }
    text
}

const SOLVE_HEADER: &str =
    "Pd,Pf,P_limit_db,Q_avg_db,regime,ee,rate,avg_tx_power,avg_interference,converged";

fn solve_row(cfg: &ExperimentConfig, result: &SolveResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        cfg.pd,
        cfg.pf,
        format_db(cfg.p_limit_db()),
        format_db(linear_to_db(cfg.q_avg)),
        cfg.regime,
        result.breakdown.ee,
        result.breakdown.rate,
        result.breakdown.avg_tx_power,
        result.breakdown.avg_interference,
        result.converged,
    )
}

fn run_one(cfg: &ExperimentConfig, samples: &ChannelSampleSet) -> Result<SolveResult, CliError> {
    Ok(solve_on_samples(
        &cfg.to_system_params(),
        &cfg.to_sensing_spec()?,
        &cfg.to_constraints(),
        samples,
        &cfg.to_solver_config(),
    )?)
}

/// Runs one solve and emits one CSV row plus the iteration trace.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let samples = draw_samples(&cfg.to_fading_config())?;
    let result = run_one(cfg, &samples)?;

    let mut csv = metadata(cfg);
    csv.push_str(SOLVE_HEADER);
    csv.push('\n');
    csv.push_str(&solve_row(cfg, &result));
    csv.push('\n');

    let mut trace = Vec::new();
    write_trace_csv(&result.trace, &mut trace)?;
    Ok(RunOutput {
        csv,
        trace_csv: Some(String::from_utf8(trace).expect("trace CSV is ASCII")),
        all_converged: result.converged,
    })
}

fn apply_sweep_value(
    cfg: &ExperimentConfig,
    param: SweepParam,
    value: f64,
) -> Result<ExperimentConfig, CliError> {
    let mut point = cfg.clone();
    let key = param.as_key();
    match param {
        SweepParam::Pd | SweepParam::Pf | SweepParam::QAvg { .. } => {}
        SweepParam::PAvg { .. } => {
            if cfg.regime != Regime::Avg {
                return Err(CliError::Config(format!(
                    "sweep parameter '{key}' requires regime = avg"
                )));
            }
        }
        SweepParam::PPk { .. } => {
            if cfg.regime != Regime::Peak {
                return Err(CliError::Config(format!(
                    "sweep parameter '{key}' requires regime = peak"
                )));
            }
        }
    }
    match param {
        // Both peaks move together under a peak sweep.
        SweepParam::PPk { db } => {
            let suffix = if db { "_db" } else { "" };
            point.apply(&format!("p_pk0{suffix}"), &value.to_string())?;
            point.apply(&format!("p_pk1{suffix}"), &value.to_string())?;
        }
        _ => point.apply(key, &value.to_string())?,
    }
    point.validate()?;
    Ok(point)
}

fn with_worker_pool<T: Send>(
    workers: usize,
    job: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs one solve per sweep value, in parallel, emitting rows in sweep
/// order. The fading realizations are shared across all points.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let Some(param) = cfg.sweep else {
        return Err(CliError::Config("a sweep requires the 'sweep' key".into()));
    };
    if cfg.sweep_values.is_empty() {
        return Err(CliError::Config(
            "a sweep requires a non-empty 'sweep_values' list".into(),
        ));
    }
    let points: Vec<ExperimentConfig> = cfg
        .sweep_values
        .iter()
        .map(|&v| apply_sweep_value(cfg, param, v))
        .collect::<Result<_, _>>()?;

    // No sweepable parameter touches the fading law, so every point sees
    // the same realizations.
    let samples = draw_samples(&cfg.to_fading_config())?;
    let results: Vec<Result<SolveResult, CliError>> = with_worker_pool(cfg.workers, || {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|point| run_one(point, &samples))
            .collect()
    })?;

    let mut csv = metadata(cfg);
    csv.push_str("sweep_value,");
    csv.push_str(SOLVE_HEADER);
    csv.push_str(",p0_mean,p1_mean\n");
    let mut all_converged = true;
    for ((point, value), result) in points.iter().zip(&cfg.sweep_values).zip(results) {
        let result = result?;
        all_converged &= result.converged;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            value,
            solve_row(point, &result),
            result.policy.mean(Branch::Idle),
            result.policy.mean(Branch::Busy),
        ));
    }
    Ok(RunOutput {
        csv,
        trace_csv: None,
        all_converged,
    })
}

/// Seed for the i-th sweep point, decorrelated from neighbors.
fn point_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer over seed + index.
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sweeps a common scalar power over a geometric grid, comparing the rate
/// lower bound against the Monte Carlo exact rate at a fixed channel gain.
pub fn run_validate_bound(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let mut cfg = cfg.clone();
    cfg.kind = Some(ExperimentKind::ValidateBound);
    cfg.validate()?;
    let grid = cfg.to_power_grid();
    grid.validate()?;
    let params = cfg.to_system_params();
    let probs = branch_probs(&cfg.to_sensing_spec()?)?;
    let powers = grid.values();

    let rows: Vec<Result<String, CliError>> = with_worker_pool(cfg.workers, || {
        use rayon::prelude::*;
        powers
            .par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let bound = rate_lower_bound_fixed_gain(&params, &probs, cfg.gain_h, p, p);
                let exact = exact_rate_mc(
                    &params,
                    &probs,
                    cfg.gain_h,
                    p,
                    p,
                    cfg.n_mc,
                    point_seed(cfg.seed, i),
                )?;
                let total = p + params.circuit_power;
                Ok(format!(
                    "{},{},{},{},{},{}",
                    p,
                    bound,
                    exact.rate,
                    exact.stderr,
                    bound / total,
                    exact.rate / total
                ))
            })
            .collect()
    })?;

    let mut csv = metadata(&cfg);
    csv.push_str("power,rate_lb,rate_exact,rate_exact_stderr,ee_lb,ee_exact\n");
    for row in rows {
        csv.push_str(&row?);
        csv.push('\n');
    }
    Ok(RunOutput {
        csv,
        trace_csv: None,
        all_converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n_samples: 400,
            ..Default::default()
        }
    }

    #[test]
    fn solve_emits_one_row_with_the_documented_header() {
        let out = run_solve(&quick_cfg()).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        let header_idx = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert_eq!(lines[header_idx], SOLVE_HEADER);
        assert_eq!(lines.len(), header_idx + 2, "exactly one data row");
        let row: Vec<&str> = lines[header_idx + 1].split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[0], "0.8");
        assert_eq!(row[2], "-4");
        assert_eq!(row[3], "-8");
        assert_eq!(row[4], "avg");
        assert_eq!(row[9], "true");
        assert!(out.trace_csv.unwrap().starts_with("outer_iter,"));
    }

    #[test]
    fn solve_output_is_byte_stable() {
        let a = run_solve(&quick_cfg()).unwrap();
        let b = run_solve(&quick_cfg()).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.trace_csv, b.trace_csv);
    }

    #[test]
    fn sweep_rows_follow_the_requested_order_and_are_permutation_stable() {
        let mut cfg = quick_cfg();
        cfg.apply("sweep", "pd").unwrap();
        cfg.apply("sweep_values", "0.7,0.9,0.8").unwrap();
        let out = run_sweep(&cfg).unwrap();
        let rows: Vec<&str> = out
            .csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("sweep_value"))
            .collect();
        assert_eq!(rows.len(), 3);
        let firsts: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
        assert_eq!(firsts, vec!["0.7", "0.9", "0.8"], "rows keep sweep order");

        // Permuting the sweep list permutes rows without changing values.
        let mut sorted_cfg = quick_cfg();
        sorted_cfg.apply("sweep", "pd").unwrap();
        sorted_cfg.apply("sweep_values", "0.8,0.7,0.9").unwrap();
        let permuted = run_sweep(&sorted_cfg).unwrap();
        let mut a: Vec<&str> = rows.clone();
        let mut b: Vec<&str> = permuted
            .csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("sweep_value"))
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b, "permuted sweeps contain identical rows");
    }

    #[test]
    fn sweep_is_independent_of_worker_count() {
        let mut cfg = quick_cfg();
        cfg.apply("sweep", "q_avg_db").unwrap();
        cfg.apply("sweep_values", "-10,-8,-6,-4").unwrap();
        cfg.workers = 1;
        let serial = run_sweep(&cfg).unwrap();
        cfg.workers = 4;
        let parallel = run_sweep(&cfg).unwrap();
        assert_eq!(
            serial.csv, parallel.csv,
            "worker count must not change bytes"
        );
    }

    #[test]
    fn sweep_without_values_is_a_usage_error() {
        let mut cfg = quick_cfg();
        cfg.apply("sweep", "pd").unwrap();
        let err = run_sweep(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn peak_sweep_requires_peak_regime() {
        let mut cfg = quick_cfg();
        cfg.apply("sweep", "p_pk_db").unwrap();
        cfg.apply("sweep_values", "-6,-4").unwrap();
        let err = run_sweep(&cfg).unwrap_err();
        assert!(err.to_string().contains("regime"), "got: {err}");
    }

    #[test]
    fn validate_bound_emits_the_documented_schema() {
        let mut cfg = quick_cfg();
        cfg.apply("n_mc", "20000").unwrap();
        cfg.apply("power_points", "4").unwrap();
        let out = run_validate_bound(&cfg).unwrap();
        let lines: Vec<&str> = out.csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            lines[0],
            "power,rate_lb,rate_exact,rate_exact_stderr,ee_lb,ee_exact"
        );
        assert_eq!(lines.len(), 5);
        for row in &lines[1..] {
            let fields: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(fields.len(), 6);
            assert!(fields[3] > 0.0, "stderr must be reported");
        }
    }
}
