//! Closed-form per-realization optimal powers.
//!
//! For a fixed Dinkelbach parameter and fixed dual prices, the parametrized
//! objective separates across fading realizations and sensing branches, and
//! each per-branch maximizer is a water-filling expression: the reciprocal
//! of an effective power price minus the inverse channel quality, clamped at
//! zero. Under peak limits the same root is additionally clamped at the
//! peak, which realizes the three-region threshold structure exactly.

use crate::error::{Error, Result};
use crate::rate::SystemParams;
use crate::sensing::{Branch, BranchProbs, SensingSpec};

/// Dinkelbach parameter plus the dual prices of the two average constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    /// Energy-efficiency parameter of the linearized objective.
    pub alpha: f64,
    /// Multiplier of the average transmit-power constraint.
    pub lambda: f64,
    /// Multiplier of the average interference constraint.
    pub nu: f64,
}

impl DualState {
    pub fn new(alpha: f64, lambda: f64, nu: f64) -> Result<Self> {
        let state = Self { alpha, lambda, nu };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("nu", self.nu),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be a nonnegative finite value"
                )));
            }
        }
        Ok(())
    }
}

/// Constraint regime of a solve. The variants carry exactly the limits that
/// exist in each regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraints {
    /// Average transmit power and average interference power limits.
    AvgTxAvgInterf { p_avg: f64, q_avg: f64 },
    /// Per-branch peak transmit power and average interference power limits.
    PeakTxAvgInterf {
        p_peak_idle: f64,
        p_peak_busy: f64,
        q_avg: f64,
    },
}

impl Constraints {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be positive"
                )));
            }
            Ok(())
        };
        match *self {
            Constraints::AvgTxAvgInterf { p_avg, q_avg } => {
                positive("p_avg", p_avg)?;
                positive("q_avg", q_avg)
            }
            Constraints::PeakTxAvgInterf {
                p_peak_idle,
                p_peak_busy,
                q_avg,
            } => {
                positive("p_peak_idle", p_peak_idle)?;
                positive("p_peak_busy", p_peak_busy)?;
                positive("q_avg", q_avg)
            }
        }
    }

    pub fn q_avg(&self) -> f64 {
        match *self {
            Constraints::AvgTxAvgInterf { q_avg, .. } => q_avg,
            Constraints::PeakTxAvgInterf { q_avg, .. } => q_avg,
        }
    }

    pub fn peak(&self, branch: Branch) -> Option<f64> {
        match *self {
            Constraints::AvgTxAvgInterf { .. } => None,
            Constraints::PeakTxAvgInterf {
                p_peak_idle,
                p_peak_busy,
                ..
            } => Some(match branch {
                Branch::Idle => p_peak_idle,
                Branch::Busy => p_peak_busy,
            }),
        }
    }

    pub fn p_avg(&self) -> Option<f64> {
        match *self {
            Constraints::AvgTxAvgInterf { p_avg, .. } => Some(p_avg),
            Constraints::PeakTxAvgInterf { .. } => None,
        }
    }
}

/// Effective per-unit power price of one branch at one realization:
/// the rate-trade and transmit-power prices weighted by the decision
/// probability, plus the interference price weighted by the collision
/// probability and the interference channel gain.
fn effective_price(
    spec: &SensingSpec,
    probs: &BranchProbs,
    branch: Branch,
    gain_g: f64,
    tx_price: f64,
    nu: f64,
) -> f64 {
    tx_price * probs.weight(branch) + nu * gain_g * spec.interference_coeff(branch)
}

/// Water-filling root of the per-realization stationarity condition, or
/// `None` when the price is zero and the maximizer diverges.
#[allow(clippy::too_many_arguments)]
fn stationarity_root(
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    branch: Branch,
    gain_h: f64,
    gain_g: f64,
    tx_price: f64,
    nu: f64,
) -> Option<f64> {
    let weight = probs.weight(branch);
    if weight == 0.0 || gain_h == 0.0 {
        // A zero-mass branch earns no rate from power, and a dead channel
        // is below every water level.
        return Some(0.0);
    }
    let price = effective_price(spec, probs, branch, gain_g, tx_price, nu);
    if price <= 0.0 {
        return None;
    }
    let water_level = params.tx_fraction() * weight * std::f64::consts::LOG2_E / price;
    let floor = params.branch_noise(probs, branch) / gain_h;
    Some((water_level - floor).max(0.0))
}

/// Optimal per-realization power under average transmit power and average
/// interference constraints: the exact root of the stationarity condition,
/// clamped at zero.
pub fn optimal_power_avg(
    branch: Branch,
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    gain_h: f64,
    gain_g: f64,
    duals: &DualState,
) -> Result<f64> {
    duals.validate()?;
    stationarity_root(
        params,
        spec,
        probs,
        branch,
        gain_h,
        gain_g,
        duals.lambda + duals.alpha,
        duals.nu,
    )
    .ok_or(Error::UnboundedPower)
}

/// Optimal per-realization power under peak transmit power and average
/// interference constraints: the unconstrained stationarity root with no
/// transmit-power multiplier, clamped to `[0, peak]`. A zero price means
/// the water level is above every finite power, so the peak is returned.
#[allow(clippy::too_many_arguments)]
pub fn optimal_power_peak(
    branch: Branch,
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    gain_h: f64,
    gain_g: f64,
    duals: &DualState,
    cons: &Constraints,
) -> Result<f64> {
    duals.validate()?;
    let peak = cons.peak(branch).ok_or_else(|| {
        Error::InvalidConfig("peak power requested outside the peak regime".into())
    })?;
    let root = stationarity_root(
        params,
        spec,
        probs,
        branch,
        gain_h,
        gain_g,
        duals.alpha,
        duals.nu,
    );
    Ok(match root {
        Some(p) => p.min(peak),
        None => peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::stationarity_residual;
    use crate::sensing::{branch_probs, SensingSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParams {
        SystemParams {
            noise_power: 0.2,
            primary_power: 1.0,
            frame_len: 100.0,
            sense_len: 10.0,
            circuit_power: 0.1,
        }
    }

    fn setup(pd: f64, pf: f64) -> (SensingSpec, BranchProbs) {
        let spec = SensingSpec::new(pd, pf, 0.4, 0.6).unwrap();
        let probs = branch_probs(&spec).unwrap();
        (spec, probs)
    }

    #[test]
    fn idle_power_matches_hand_root() {
        // Perfect sensing, alpha = 1, no multipliers:
        // P = 0.9*log2(e)/1 - 0.2/1.
        let (spec, probs) = setup(1.0, 0.0);
        let duals = DualState::new(1.0, 0.0, 0.0).unwrap();
        let p =
            optimal_power_avg(Branch::Idle, &params(), &spec, &probs, 1.0, 0.7, &duals).unwrap();
        assert_abs_diff_eq!(p, 0.9 * std::f64::consts::LOG2_E - 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 1.09843, epsilon = 1e-5);
    }

    #[test]
    fn dead_channel_gets_zero_power() {
        let (spec, probs) = setup(0.8, 0.1);
        let duals = DualState::new(0.5, 0.1, 0.1).unwrap();
        let p =
            optimal_power_avg(Branch::Busy, &params(), &spec, &probs, 0.0, 1.0, &duals).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn interior_power_zeroes_the_stationarity_residual() {
        let (spec, probs) = setup(0.8, 0.1);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut interior = 0;
        for _ in 0..500 {
            let duals = DualState::new(
                rng.random::<f64>() * 2.0,
                rng.random::<f64>() * 2.0,
                rng.random::<f64>() * 2.0,
            )
            .unwrap();
            let gain_h = rng.random::<f64>() * 4.0 + 1e-3;
            let gain_g = rng.random::<f64>() * 4.0;
            for branch in [Branch::Idle, Branch::Busy] {
                let power =
                    optimal_power_avg(branch, &p, &spec, &probs, gain_h, gain_g, &duals).unwrap();
                let residual =
                    stationarity_residual(branch, &p, &spec, &probs, gain_h, gain_g, &duals, power);
                if power > 0.0 {
                    interior += 1;
                    assert!(
                        residual.abs() <= 1e-10,
                        "interior root must satisfy stationarity, residual = {residual}"
                    );
                } else {
                    assert!(
                        residual <= 1e-12,
                        "clamped root must have nonpositive residual, got {residual}"
                    );
                }
            }
        }
        assert!(interior > 100, "test should exercise interior roots");
    }

    #[test]
    fn zero_price_is_unbounded_on_positive_mass_branch() {
        let (spec, probs) = setup(0.8, 0.1);
        let duals = DualState::new(0.0, 0.0, 0.0).unwrap();
        let err = optimal_power_avg(Branch::Idle, &params(), &spec, &probs, 1.0, 0.0, &duals)
            .unwrap_err();
        assert!(matches!(err, Error::UnboundedPower));
    }

    #[test]
    fn zero_mass_branch_returns_zero_power() {
        // Detector always declares busy: the idle branch has no mass and no
        // meaningful power level.
        let spec = SensingSpec::new(1.0, 1.0, 0.4, 0.6).unwrap();
        let probs = branch_probs(&spec).unwrap();
        let duals = DualState::new(0.0, 0.0, 0.0).unwrap();
        let p =
            optimal_power_avg(Branch::Idle, &params(), &spec, &probs, 1.0, 1.0, &duals).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn peak_power_without_prices_hits_the_peak() {
        let (spec, probs) = setup(0.8, 0.1);
        let cons = Constraints::PeakTxAvgInterf {
            p_peak_idle: 0.8,
            p_peak_busy: 0.5,
            q_avg: 1.0,
        };
        let duals = DualState::new(0.0, 0.0, 0.0).unwrap();
        for (branch, peak) in [(Branch::Idle, 0.8), (Branch::Busy, 0.5)] {
            let p = optimal_power_peak(branch, &params(), &spec, &probs, 2.0, 1.0, &duals, &cons)
                .unwrap();
            assert_eq!(p, peak);
        }
    }

    #[test]
    fn strong_interference_channel_silences_the_peak_policy() {
        let (spec, probs) = setup(0.8, 0.1);
        let cons = Constraints::PeakTxAvgInterf {
            p_peak_idle: 1.0,
            p_peak_busy: 1.0,
            q_avg: 1.0,
        };
        let duals = DualState::new(0.1, 0.0, 5.0).unwrap();
        let p = optimal_power_peak(
            Branch::Busy,
            &params(),
            &spec,
            &probs,
            1.0,
            500.0,
            &duals,
            &cons,
        )
        .unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn peak_policy_can_sit_strictly_inside_the_interval() {
        let (spec, probs) = setup(0.8, 0.1);
        let p = params();
        let cons = Constraints::PeakTxAvgInterf {
            p_peak_idle: 2.0,
            p_peak_busy: 2.0,
            q_avg: 1.0,
        };
        let duals = DualState::new(0.4, 0.0, 0.6).unwrap();
        let power =
            optimal_power_peak(Branch::Busy, &p, &spec, &probs, 1.5, 0.8, &duals, &cons).unwrap();
        assert!(
            power > 0.0 && power < 2.0,
            "expected interior point, got {power}"
        );
        let residual =
            stationarity_residual(Branch::Busy, &p, &spec, &probs, 1.5, 0.8, &duals, power);
        assert!(
            residual.abs() <= 1e-10,
            "interior peak-regime residual = {residual}"
        );
    }

    #[test]
    fn peak_equals_clamped_average_form_with_zero_lambda() {
        let (spec, probs) = setup(0.7, 0.15);
        let p = params();
        let cons = Constraints::PeakTxAvgInterf {
            p_peak_idle: 0.9,
            p_peak_busy: 0.6,
            q_avg: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let duals = DualState::new(rng.random::<f64>(), 0.0, rng.random::<f64>()).unwrap();
            let gain_h = rng.random::<f64>() * 5.0;
            let gain_g = rng.random::<f64>() * 5.0;
            for branch in [Branch::Idle, Branch::Busy] {
                let peak_form =
                    optimal_power_peak(branch, &p, &spec, &probs, gain_h, gain_g, &duals, &cons)
                        .unwrap();
                let clamped = optimal_power_avg(branch, &p, &spec, &probs, gain_h, gain_g, &duals)
                    .map(|v| v.min(cons.peak(branch).unwrap()))
                    .unwrap_or(cons.peak(branch).unwrap());
                assert_eq!(peak_form, clamped, "clamp equivalence must be exact");
            }
        }
    }

    #[test]
    fn power_is_monotone_in_prices_and_gains() {
        let (spec, probs) = setup(0.8, 0.1);
        let p = params();
        let base = DualState::new(0.4, 0.3, 0.2).unwrap();
        let at = |duals: &DualState, gain_h: f64, gain_g: f64, branch: Branch| {
            optimal_power_avg(branch, &p, &spec, &probs, gain_h, gain_g, duals).unwrap()
        };
        let reference = at(&base, 2.0, 1.0, Branch::Busy);
        let bump = 0.5;

        let more_alpha = DualState::new(base.alpha + bump, base.lambda, base.nu).unwrap();
        let more_lambda = DualState::new(base.alpha, base.lambda + bump, base.nu).unwrap();
        let more_nu = DualState::new(base.alpha, base.lambda, base.nu + bump).unwrap();
        assert!(at(&more_alpha, 2.0, 1.0, Branch::Busy) <= reference);
        assert!(at(&more_lambda, 2.0, 1.0, Branch::Busy) <= reference);
        assert!(at(&more_nu, 2.0, 1.0, Branch::Busy) <= reference);
        assert!(at(&base, 2.0, 2.0, Branch::Busy) <= reference);
        assert!(at(&base, 3.0, 1.0, Branch::Busy) >= reference);
    }

    #[test]
    fn perfect_sensing_removes_interference_price_from_idle_branch() {
        let (spec, probs) = setup(1.0, 0.0);
        let p = params();
        let duals = DualState::new(0.0, 0.5, 3.0).unwrap();
        let a = optimal_power_avg(Branch::Idle, &p, &spec, &probs, 1.0, 0.0, &duals).unwrap();
        let b = optimal_power_avg(Branch::Idle, &p, &spec, &probs, 1.0, 100.0, &duals).unwrap();
        assert_eq!(
            a, b,
            "idle power must not depend on the interference gain when detection is perfect"
        );
    }

    #[test]
    fn returned_power_maximizes_the_per_sample_objective() {
        // Brute-force check of per-realization optimality over a dense grid.
        let (spec, probs) = setup(0.8, 0.2);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..50 {
            let duals = DualState::new(
                0.05 + rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            )
            .unwrap();
            let gain_h = 0.1 + rng.random::<f64>() * 4.0;
            let gain_g = rng.random::<f64>() * 2.0;
            for branch in [Branch::Idle, Branch::Busy] {
                let best =
                    optimal_power_avg(branch, &p, &spec, &probs, gain_h, gain_g, &duals).unwrap();
                let objective = |power: f64| {
                    let weight = probs.weight(branch);
                    let price = (duals.lambda + duals.alpha) * weight
                        + duals.nu * gain_g * spec.interference_coeff(branch);
                    p.tx_fraction()
                        * weight
                        * (1.0 + power * gain_h / p.branch_noise(&probs, branch)).log2()
                        - price * power
                };
                let hi = 4.0 * best + 1.0;
                let grid_best = (0..=4000)
                    .map(|i| objective(hi * i as f64 / 4000.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    objective(best) >= grid_best - 1e-9,
                    "closed form {} must dominate grid maximum {}",
                    objective(best),
                    grid_best
                );
            }
        }
    }
}
