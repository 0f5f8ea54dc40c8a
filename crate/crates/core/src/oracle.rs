//! Independent brute-force maximizers used to validate the solver.
//!
//! Nothing here shares code with the closed-form policy path: the grid
//! searches see only the rate/accounting evaluators and the constraint
//! limits, so agreement between the two routes is meaningful evidence.

use crate::channel::ChannelSampleSet;
use crate::error::{Error, Result};
use crate::power::Constraints;
use crate::rate::{power_accounting, EEBreakdown, PowerPolicy, SystemParams};
use crate::sensing::{branch_probs, Branch, BranchProbs, SensingSpec};

/// A one-dimensional power grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub p_min: f64,
    pub p_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Geometric,
}

impl Default for GridSpec {
    fn default() -> Self {
        // EE peaks at moderate SNR; geometric spacing resolves the low-power
        // rise of the bell curve.
        Self {
            p_min: 1e-3,
            p_max: 10.0,
            n_points: 200,
            spacing: Spacing::Geometric,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_min < 0.0 || !self.p_min.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "p_min = {} must be >= 0",
                self.p_min
            )));
        }
        if !self.p_max.is_finite() || self.p_max <= self.p_min {
            return Err(Error::InvalidConfig(format!(
                "p_max = {} must exceed p_min = {}",
                self.p_max, self.p_min
            )));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidConfig("n_points must be at least 2".into()));
        }
        if self.spacing == Spacing::Geometric && self.p_min == 0.0 {
            return Err(Error::InvalidConfig(
                "geometric spacing requires p_min > 0".into(),
            ));
        }
        Ok(())
    }

    /// Grid values in increasing order.
    pub fn values(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.p_min + t * (self.p_max - self.p_min),
                    Spacing::Geometric => self.p_min * (self.p_max / self.p_min).powf(t),
                }
            })
            .collect()
    }
}

fn zero_breakdown(params: &SystemParams) -> EEBreakdown {
    EEBreakdown {
        rate: 0.0,
        avg_tx_power: 0.0,
        total_power: params.circuit_power,
        avg_interference: 0.0,
        ee: 0.0,
    }
}

/// Feasibility of a constant `(p_idle, p_busy)` pair, using the sample mean
/// of the interference gain exactly as the accounting does.
fn constant_pair_feasible(
    spec: &SensingSpec,
    probs: &BranchProbs,
    cons: &Constraints,
    mean_gain_g: f64,
    p_idle: f64,
    p_busy: f64,
) -> bool {
    let interference = (spec.interference_coeff(Branch::Idle) * p_idle
        + spec.interference_coeff(Branch::Busy) * p_busy)
        * mean_gain_g;
    if interference > cons.q_avg() {
        return false;
    }
    match *cons {
        Constraints::AvgTxAvgInterf { p_avg, .. } => {
            probs.prob_decision_idle * p_idle + probs.prob_decision_busy * p_busy <= p_avg
        }
        Constraints::PeakTxAvgInterf {
            p_peak_idle,
            p_peak_busy,
            ..
        } => p_idle <= p_peak_idle && p_busy <= p_peak_busy,
    }
}

/// Exhaustive search for the best feasible constant policy over a 2-D grid.
///
/// Returns the maximizing pair and its accounting; ties break toward the
/// lowest grid index. An empty feasible set yields the zero policy.
pub fn best_constant_policy(
    params: &SystemParams,
    spec: &SensingSpec,
    cons: &Constraints,
    samples: &ChannelSampleSet,
    grid: &GridSpec,
) -> Result<(f64, f64, EEBreakdown)> {
    params.validate()?;
    cons.validate()?;
    grid.validate()?;
    let probs = branch_probs(spec)?;
    let values = grid.values();
    let n = samples.len() as f64;
    let mean_gain_g = samples.gains_g().iter().sum::<f64>() / n;

    // The rate separates across branches, so each axis is precomputed once.
    let branch_rates = |branch: Branch| -> Vec<f64> {
        let noise = params.branch_noise(&probs, branch);
        values
            .iter()
            .map(|&p| {
                samples
                    .gains_h()
                    .iter()
                    .map(|&h| (1.0 + p * h / noise).log2())
                    .sum::<f64>()
                    / n
            })
            .collect()
    };
    let rates_idle = branch_rates(Branch::Idle);
    let rates_busy = branch_rates(Branch::Busy);

    let mut best: Option<(f64, f64, f64)> = None;
    for (i, &p_idle) in values.iter().enumerate() {
        for (j, &p_busy) in values.iter().enumerate() {
            if !constant_pair_feasible(spec, &probs, cons, mean_gain_g, p_idle, p_busy) {
                continue;
            }
            let rate = params.tx_fraction()
                * (probs.prob_decision_idle * rates_idle[i]
                    + probs.prob_decision_busy * rates_busy[j]);
            let total = probs.prob_decision_idle * p_idle
                + probs.prob_decision_busy * p_busy
                + params.circuit_power;
            if total <= 0.0 {
                continue;
            }
            let ee = rate / total;
            if best.is_none_or(|(_, _, best_ee)| ee > best_ee) {
                best = Some((p_idle, p_busy, ee));
            }
        }
    }

    match best {
        Some((p_idle, p_busy, _)) => {
            let policy = PowerPolicy::constant(samples.len(), p_idle, p_busy)?;
            let acct = power_accounting(params, spec, &probs, samples, &policy)?;
            Ok((p_idle, p_busy, acct))
        }
        None => Ok((0.0, 0.0, zero_breakdown(params))),
    }
}

/// Left-hand side of the per-realization stationarity condition at a given
/// power: the marginal rate value minus the effective price. Zero at an
/// interior optimum, nonpositive at a zero-clamped one.
#[allow(clippy::too_many_arguments)]
pub fn stationarity_residual(
    branch: Branch,
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    gain_h: f64,
    gain_g: f64,
    duals: &crate::power::DualState,
    power: f64,
) -> f64 {
    let weight = probs.weight(branch);
    let marginal = params.tx_fraction() * weight * gain_h * std::f64::consts::LOG2_E
        / (params.branch_noise(probs, branch) + power * gain_h);
    marginal
        - (duals.lambda + duals.alpha) * weight
        - duals.nu * gain_g * spec.interference_coeff(branch)
}

/// Coordinate-ascent maximization of the energy efficiency over per-sample
/// power grids, with moves projected onto the feasible set.
///
/// Each sweep tries, for every (branch, sample) coordinate, all grid values
/// that remain feasible given the rest of the policy, a multiplicative
/// neighborhood of the current value, and the exact feasibility boundary
/// along that coordinate. Intended for small sample sets where it serves as
/// an independent check on the closed-form solver.
pub fn best_adaptive_policy(
    params: &SystemParams,
    spec: &SensingSpec,
    cons: &Constraints,
    samples: &ChannelSampleSet,
    grid: &GridSpec,
    max_passes: usize,
) -> Result<(PowerPolicy, EEBreakdown)> {
    params.validate()?;
    cons.validate()?;
    grid.validate()?;
    let probs = branch_probs(spec)?;
    let n = samples.len();
    let nf = n as f64;

    // Start from the best feasible constant policy.
    let (p_idle0, p_busy0, _) = best_constant_policy(params, spec, cons, samples, grid)?;
    let mut policy = PowerPolicy::constant(n, p_idle0, p_busy0)?;

    let grid_values = grid.values();
    let weights = [probs.prob_decision_idle, probs.prob_decision_busy];
    let noises = [
        params.branch_noise(&probs, Branch::Idle),
        params.branch_noise(&probs, Branch::Busy),
    ];
    let coeffs = [
        spec.interference_coeff(Branch::Idle),
        spec.interference_coeff(Branch::Busy),
    ];
    let branches = [Branch::Idle, Branch::Busy];

    let ee_of = |rate_sums: &[f64; 2], tx_sum: f64| -> f64 {
        let rate =
            params.tx_fraction() * (weights[0] * rate_sums[0] + weights[1] * rate_sums[1]) / nf;
        let total = tx_sum / nf + params.circuit_power;
        if total <= 0.0 {
            0.0
        } else {
            rate / total
        }
    };

    for _ in 0..max_passes {
        // Fresh sums each pass so incremental updates cannot drift.
        let mut rate_sums = [0.0f64; 2];
        let mut tx_sum = 0.0;
        let mut q_sum = 0.0;
        for (k, &branch) in branches.iter().enumerate() {
            for (i, &p) in policy.branch(branch).iter().enumerate() {
                rate_sums[k] += (1.0 + p * samples.gains_h()[i] / noises[k]).log2();
                tx_sum += weights[k] * p;
                q_sum += coeffs[k] * p * samples.gains_g()[i];
            }
        }
        let mut best_ee = ee_of(&rate_sums, tx_sum);
        let mut improved = false;

        for (k, &branch) in branches.iter().enumerate() {
            for i in 0..n {
                let gain_h = samples.gains_h()[i];
                let gain_g = samples.gains_g()[i];
                let current = policy.branch(branch)[i];

                // Maximum feasible value along this coordinate.
                let mut v_max = f64::INFINITY;
                if let Some(p_avg) = cons.p_avg() {
                    if weights[k] > 0.0 {
                        v_max = v_max.min(current + (p_avg * nf - tx_sum) / weights[k]);
                    }
                }
                if let Some(peak) = cons.peak(branch) {
                    v_max = v_max.min(peak);
                }
                if coeffs[k] * gain_g > 0.0 {
                    v_max = v_max.min(current + (cons.q_avg() * nf - q_sum) / (coeffs[k] * gain_g));
                }
                let v_max = (v_max * (1.0 - 1e-12)).max(0.0);

                let rate_term = |p: f64| (1.0 + p * gain_h / noises[k]).log2();
                let base_rate = rate_sums[k] - rate_term(current);
                let base_tx = tx_sum - weights[k] * current;
                let base_q = q_sum - coeffs[k] * current * gain_g;

                let mut best_v = current;
                let try_value = |v: f64, best_ee: &mut f64, best_v: &mut f64| {
                    if !(0.0..=v_max).contains(&v) {
                        return;
                    }
                    let mut sums = rate_sums;
                    sums[k] = base_rate + rate_term(v);
                    let ee = ee_of(&sums, base_tx + weights[k] * v);
                    if ee > *best_ee * (1.0 + 1e-12) && ee > *best_ee {
                        *best_ee = ee;
                        *best_v = v;
                    }
                };

                try_value(0.0, &mut best_ee, &mut best_v);
                if v_max.is_finite() {
                    try_value(v_max, &mut best_ee, &mut best_v);
                }
                for &v in &grid_values {
                    try_value(v, &mut best_ee, &mut best_v);
                }
                // Multiplicative polish around the incumbent.
                if current > 0.0 {
                    for j in 0..=20 {
                        try_value(
                            current * (0.90 + 0.01 * j as f64),
                            &mut best_ee,
                            &mut best_v,
                        );
                    }
                }

                if best_v != current {
                    improved = true;
                    policy.branch_mut(branch)[i] = best_v;
                    rate_sums[k] = base_rate + rate_term(best_v);
                    tx_sum = base_tx + weights[k] * best_v;
                    q_sum = base_q + coeffs[k] * best_v * gain_g;
                }
            }
        }

        if !improved {
            break;
        }
    }

    let acct = if policy.is_all_zero() && params.circuit_power == 0.0 {
        zero_breakdown(params)
    } else {
        power_accounting(params, spec, &probs, samples, &policy)?
    };
    Ok((policy, acct))
}
