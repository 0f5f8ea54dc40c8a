//! Flat key-value experiment configuration.
//!
//! Experiments are described by a text file of `key = value` lines (with
//! `#` comments) that command-line flags of the same names can override.
//! Power quantities accept a `_db` key suffix, converted as
//! `value = 10^(dB/10)`, so 0 dB corresponds to a linear value of 1.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use cogpower::{
    Constraints, FadingConfig, GridSpec, SensingSpec, SolverConfig, Spacing, StepRule, SystemParams,
};

use crate::CliError;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Experiment kinds selected by the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Solve,
    Sweep,
    ValidateBound,
}

impl ExperimentKind {
    pub fn as_key(&self) -> &'static str {
        match self {
            ExperimentKind::Solve => "solve",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::ValidateBound => "validate_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Avg,
    Peak,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Avg => "avg",
            Regime::Peak => "peak",
        })
    }
}

/// Parameters a sweep may range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Pd,
    Pf,
    PAvg { db: bool },
    PPk { db: bool },
    QAvg { db: bool },
}

impl SweepParam {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "pd" => SweepParam::Pd,
            "pf" => SweepParam::Pf,
            "p_avg" => SweepParam::PAvg { db: false },
            "p_avg_db" => SweepParam::PAvg { db: true },
            "p_pk" => SweepParam::PPk { db: false },
            "p_pk_db" => SweepParam::PPk { db: true },
            "q_avg" => SweepParam::QAvg { db: false },
            "q_avg_db" => SweepParam::QAvg { db: true },
            _ => return None,
        })
    }

    pub fn as_key(&self) -> &'static str {
        match self {
            SweepParam::Pd => "pd",
            SweepParam::Pf => "pf",
            SweepParam::PAvg { db: false } => "p_avg",
            SweepParam::PAvg { db: true } => "p_avg_db",
            SweepParam::PPk { db: false } => "p_pk",
            SweepParam::PPk { db: true } => "p_pk_db",
            SweepParam::QAvg { db: false } => "q_avg",
            SweepParam::QAvg { db: true } => "q_avg_db",
        }
    }
}

/// The full flat experiment configuration with every knob at its default.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // System
    pub n0: f64,
    pub sigma_s2: f64,
    pub frame_len: f64,
    pub sense_len: f64,
    pub circuit_power: f64,
    // Sensing
    pub pd: f64,
    pub pf: f64,
    pub prior_idle: f64,
    pub prior_busy: f64,
    // Fading
    pub mean_gain_h: f64,
    pub mean_gain_g: f64,
    pub n_samples: usize,
    pub seed: u64,
    // Constraints
    pub regime: Regime,
    pub p_avg: f64,
    pub q_avg: f64,
    pub p_pk0: f64,
    pub p_pk1: f64,
    // Solver
    pub tolerance: f64,
    pub step_size: f64,
    pub step_rule: StepRule,
    pub max_outer: usize,
    pub max_inner: usize,
    pub alpha_init: f64,
    pub lambda_init: f64,
    pub nu_init: f64,
    // Sweep
    pub sweep: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
    // Bound validation
    pub gain_h: f64,
    pub power_min: f64,
    pub power_max: f64,
    pub power_points: usize,
    pub n_mc: usize,
    // Execution
    pub workers: usize,
    pub kind: Option<ExperimentKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n0: 0.2,
            sigma_s2: 1.0,
            frame_len: 100.0,
            sense_len: 10.0,
            circuit_power: 0.1,
            pd: 0.8,
            pf: 0.1,
            prior_idle: 0.4,
            prior_busy: 0.6,
            mean_gain_h: 1.0,
            mean_gain_g: 1.0,
            n_samples: 10_000,
            seed: 42,
            regime: Regime::Avg,
            p_avg: db_to_linear(-4.0),
            q_avg: db_to_linear(-8.0),
            p_pk0: db_to_linear(-4.0),
            p_pk1: db_to_linear(-4.0),
            tolerance: 1e-4,
            step_size: 0.1,
            step_rule: StepRule::Constant,
            max_outer: 50,
            max_inner: 5000,
            alpha_init: 0.0,
            lambda_init: 0.1,
            nu_init: 0.1,
            sweep: None,
            sweep_values: Vec::new(),
            gain_h: 1.0,
            power_min: 0.01,
            power_max: 10.0,
            power_points: 20,
            n_mc: 2_000_000,
            workers: 0,
            kind: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("key '{key}': '{value}' is not a number")))
}

fn parse_count(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| CliError::Config(format!("key '{key}': '{value}' is not a count")))
}

impl ExperimentConfig {
    /// Applies one `key = value` pair. Unknown keys are a usage error that
    /// names the key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        // Power quantities may carry a _db suffix.
        if let Some(base) = key.strip_suffix("_db") {
            if matches!(
                base,
                "n0" | "sigma_s2"
                    | "circuit_power"
                    | "p_avg"
                    | "q_avg"
                    | "p_pk0"
                    | "p_pk1"
                    | "power_min"
                    | "power_max"
            ) {
                let linear = db_to_linear(parse_f64(key, value)?);
                return self.apply(base, &format!("{linear}"));
            }
        }

        match key {
            "n0" => self.n0 = parse_f64(key, value)?,
            "sigma_s2" => self.sigma_s2 = parse_f64(key, value)?,
            "frame_len" => self.frame_len = parse_f64(key, value)?,
            "sense_len" => self.sense_len = parse_f64(key, value)?,
            "circuit_power" => self.circuit_power = parse_f64(key, value)?,
            "pd" => self.pd = parse_f64(key, value)?,
            "pf" => self.pf = parse_f64(key, value)?,
            "prior_idle" => self.prior_idle = parse_f64(key, value)?,
            "prior_busy" => self.prior_busy = parse_f64(key, value)?,
            "mean_gain_h" => self.mean_gain_h = parse_f64(key, value)?,
            "mean_gain_g" => self.mean_gain_g = parse_f64(key, value)?,
            "n_samples" => self.n_samples = parse_count(key, value)?,
            "seed" => {
                self.seed = value
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("key 'seed': '{value}' is not a u64")))?
            }
            "regime" => {
                self.regime = match value.trim() {
                    "avg" => Regime::Avg,
                    "peak" => Regime::Peak,
                    other => {
                        return Err(CliError::Config(format!(
                            "key 'regime': '{other}' must be 'avg' or 'peak'"
                        )))
                    }
                }
            }
            "p_avg" => self.p_avg = parse_f64(key, value)?,
            "q_avg" => self.q_avg = parse_f64(key, value)?,
            "p_pk0" => self.p_pk0 = parse_f64(key, value)?,
            "p_pk1" => self.p_pk1 = parse_f64(key, value)?,
            "tolerance" => self.tolerance = parse_f64(key, value)?,
            "step_size" => self.step_size = parse_f64(key, value)?,
            "step_rule" => {
                self.step_rule = match value.trim() {
                    "constant" => StepRule::Constant,
                    "diminishing" => StepRule::Diminishing,
                    other => {
                        return Err(CliError::Config(format!(
                            "key 'step_rule': '{other}' must be 'constant' or 'diminishing'"
                        )))
                    }
                }
            }
            "max_outer" => self.max_outer = parse_count(key, value)?,
            "max_inner" => self.max_inner = parse_count(key, value)?,
            "alpha_init" => self.alpha_init = parse_f64(key, value)?,
            "lambda_init" => self.lambda_init = parse_f64(key, value)?,
            "nu_init" => self.nu_init = parse_f64(key, value)?,
            "sweep" => {
                let name = value.trim();
                self.sweep = Some(SweepParam::parse(name).ok_or_else(|| {
                    CliError::Config(format!(
                        "key 'sweep': '{name}' is not a sweepable parameter \
                         (pd, pf, p_avg[_db], p_pk[_db], q_avg[_db])"
                    ))
                })?);
            }
            "sweep_values" => {
                self.sweep_values = value
                    .split(',')
                    .map(|s| parse_f64(key, s))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "gain_h" => self.gain_h = parse_f64(key, value)?,
            "power_min" => self.power_min = parse_f64(key, value)?,
            "power_max" => self.power_max = parse_f64(key, value)?,
            "power_points" => self.power_points = parse_count(key, value)?,
            "n_mc" => self.n_mc = parse_count(key, value)?,
            "workers" => self.workers = parse_count(key, value)?,
            "kind" => {
                self.kind = Some(match value.trim() {
                    "solve" => ExperimentKind::Solve,
                    "sweep" => ExperimentKind::Sweep,
                    "validate_bound" => ExperimentKind::ValidateBound,
                    other => {
                        return Err(CliError::Config(format!(
                            "key 'kind': '{other}' must be solve, sweep, or validate_bound"
                        )))
                    }
                })
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown configuration key '{other}'"
                )))
            }
        }
        Ok(())
    }

    /// Applies a list of pairs after rejecting duplicate keys and
    /// linear/dB conflicts within the list.
    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for (key, _) in pairs {
            let base = key.strip_suffix("_db").unwrap_or(key).to_string();
            if !seen.insert(base.clone()) {
                return Err(CliError::Config(format!(
                    "key '{base}' given more than once (possibly via its _db form)"
                )));
            }
        }
        for (key, value) in pairs {
            self.apply(key, value)?;
        }
        Ok(())
    }

    /// Parses a config file into pairs, keeping file order.
    pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                )));
            };
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(pairs)
    }

    pub fn to_system_params(&self) -> SystemParams {
        SystemParams {
            noise_power: self.n0,
            primary_power: self.sigma_s2,
            frame_len: self.frame_len,
            sense_len: self.sense_len,
            circuit_power: self.circuit_power,
        }
    }

    pub fn to_sensing_spec(&self) -> Result<SensingSpec, CliError> {
        Ok(SensingSpec::new(
            self.pd,
            self.pf,
            self.prior_idle,
            self.prior_busy,
        )?)
    }

    pub fn to_fading_config(&self) -> FadingConfig {
        FadingConfig {
            mean_gain_h: self.mean_gain_h,
            mean_gain_g: self.mean_gain_g,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }

    pub fn to_constraints(&self) -> Constraints {
        match self.regime {
            Regime::Avg => Constraints::AvgTxAvgInterf {
                p_avg: self.p_avg,
                q_avg: self.q_avg,
            },
            Regime::Peak => Constraints::PeakTxAvgInterf {
                p_peak_idle: self.p_pk0,
                p_peak_busy: self.p_pk1,
                q_avg: self.q_avg,
            },
        }
    }

    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            step_size: self.step_size,
            step_rule: self.step_rule,
            max_outer_iters: self.max_outer,
            max_inner_iters: self.max_inner,
            alpha_init: self.alpha_init,
            lambda_init: self.lambda_init,
            nu_init: self.nu_init,
        }
    }

    /// Power grid of the bound-validation sweep.
    pub fn to_power_grid(&self) -> GridSpec {
        GridSpec {
            p_min: self.power_min,
            p_max: self.power_max,
            n_points: self.power_points,
            spacing: Spacing::Geometric,
        }
    }

    /// Transmit-power limit of the active regime, in dB.
    pub fn p_limit_db(&self) -> f64 {
        match self.regime {
            Regime::Avg => linear_to_db(self.p_avg),
            Regime::Peak => linear_to_db(self.p_pk0),
        }
    }

    /// Validates the pieces against the core invariants.
    pub fn validate(&self) -> Result<(), CliError> {
        self.to_system_params().validate()?;
        self.to_sensing_spec()?;
        self.to_fading_config().validate()?;
        self.to_constraints().validate()?;
        self.to_solver_config().validate()?;
        Ok(())
    }

    /// Deterministically ordered `key = value` echo of the effective
    /// configuration, for the CSV metadata block.
    pub fn echo(&self) -> Vec<String> {
        let mut lines = vec![
            format!("n0 = {}", self.n0),
            format!("sigma_s2 = {}", self.sigma_s2),
            format!("frame_len = {}", self.frame_len),
            format!("sense_len = {}", self.sense_len),
            format!("circuit_power = {}", self.circuit_power),
            format!("pd = {}", self.pd),
            format!("pf = {}", self.pf),
            format!("prior_idle = {}", self.prior_idle),
            format!("prior_busy = {}", self.prior_busy),
            format!("mean_gain_h = {}", self.mean_gain_h),
            format!("mean_gain_g = {}", self.mean_gain_g),
            format!("n_samples = {}", self.n_samples),
            format!("regime = {}", self.regime),
        ];
        match self.regime {
            Regime::Avg => {
                lines.push(format!("p_avg = {}", self.p_avg));
            }
            Regime::Peak => {
                lines.push(format!("p_pk0 = {}", self.p_pk0));
                lines.push(format!("p_pk1 = {}", self.p_pk1));
            }
        }
        lines.push(format!("q_avg = {}", self.q_avg));
        lines.push(format!("tolerance = {}", self.tolerance));
        lines.push(format!("step_size = {}", self.step_size));
        lines.push(format!(
            "step_rule = {}",
            match self.step_rule {
                StepRule::Constant => "constant",
                StepRule::Diminishing => "diminishing",
            }
        ));
        lines.push(format!("max_outer = {}", self.max_outer));
        lines.push(format!("max_inner = {}", self.max_inner));
        lines.push(format!("alpha_init = {}", self.alpha_init));
        lines.push(format!("lambda_init = {}", self.lambda_init));
        lines.push(format!("nu_init = {}", self.nu_init));
        if let Some(sweep) = &self.sweep {
            lines.push(format!("sweep = {}", sweep.as_key()));
            let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
            lines.push(format!("sweep_values = {}", values.join(",")));
        }
        if self.kind == Some(ExperimentKind::ValidateBound) {
            lines.push(format!("gain_h = {}", self.gain_h));
            lines.push(format!("power_min = {}", self.power_min));
            lines.push(format!("power_max = {}", self.power_max));
            lines.push(format!("power_points = {}", self.power_points));
            lines.push(format!("n_mc = {}", self.n_mc));
        }
        lines
    }
}
