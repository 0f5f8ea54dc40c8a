//! Energy-efficiency maximization by parametric outer iteration with
//! subgradient dual updates.
//!
//! The EE objective is a concave-over-affine ratio, so the maximizer is
//! found by driving the auxiliary value `F(alpha) = R - alpha * P_tot` to
//! zero over a nondecreasing alpha sequence. For each alpha the constrained
//! concave subproblem is solved in its dual: the closed-form per-sample
//! powers are recomputed at the current multipliers and the multipliers
//! follow the constraint subgradients until the complementary-slackness
//! products vanish. Termination additionally requires primal feasibility
//! within a small relative tolerance, which is stricter than the slackness
//! test alone.

use std::io::Write;

use crate::channel::{draw_samples, ChannelSampleSet, FadingConfig};
use crate::error::{Error, Result};
use crate::power::{optimal_power_avg, optimal_power_peak, Constraints, DualState};
use crate::rate::{power_accounting, rate_lower_bound, EEBreakdown, PowerPolicy, SystemParams};
use crate::sensing::{branch_probs, Branch, BranchProbs, SensingSpec};

/// Relative constraint violation accepted at termination.
const FEASIBILITY_RTOL: f64 = 1e-3;

/// Step-size schedule of the dual updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Fixed step. Converges to within a small range of the optimum.
    #[default]
    Constant,
    /// Step divided by the square root of the iteration index.
    Diminishing,
}

/// Solver tolerances, step sizes, and iteration caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence tolerance shared by the outer test and the inner
    /// complementary-slackness test.
    pub tolerance: f64,
    /// Base subgradient step size.
    pub step_size: f64,
    pub step_rule: StepRule,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Starting parameter of the outer iteration; zero starts from the pure
    /// rate-maximization problem.
    pub alpha_init: f64,
    pub lambda_init: f64,
    pub nu_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            step_size: 0.1,
            step_rule: StepRule::Constant,
            max_outer_iters: 50,
            max_inner_iters: 5000,
            alpha_init: 0.0,
            lambda_init: 0.1,
            nu_init: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance = {} must be positive",
                self.tolerance
            )));
        }
        if !self.step_size.is_finite() || self.step_size <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "step_size = {} must be positive",
                self.step_size
            )));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return Err(Error::InvalidConfig(
                "iteration caps must be at least 1".into(),
            ));
        }
        for (name, v) in [
            ("alpha_init", self.alpha_init),
            ("lambda_init", self.lambda_init),
            ("nu_init", self.nu_init),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must be nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// One outer iteration of the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub outer_iter: usize,
    pub alpha: f64,
    pub f_alpha: f64,
    pub lambda: f64,
    pub nu: f64,
    pub rate: f64,
    pub avg_tx_power: f64,
    pub avg_interference: f64,
    pub inner_iters: usize,
}

/// Converged policy, duals, accounting, and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Energy efficiency of the returned policy.
    pub ee_opt: f64,
    pub duals: DualState,
    pub policy: PowerPolicy,
    pub breakdown: EEBreakdown,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
}

/// Result of one dual (inner) solve at fixed alpha.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub policy: PowerPolicy,
    pub lambda: f64,
    pub nu: f64,
    pub breakdown: EEBreakdown,
    /// Number of subgradient updates performed.
    pub iters: usize,
    pub converged: bool,
}

/// Auxiliary value of the parametrized objective at a given policy:
/// the achievable rate minus `alpha` times the total power consumption.
pub fn dinkelbach_f(
    alpha: f64,
    params: &SystemParams,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    policy: &PowerPolicy,
) -> Result<f64> {
    let rate = rate_lower_bound(params, probs, samples, policy)?;
    let tx = average_tx_power(probs, policy);
    Ok(rate - alpha * (tx + params.circuit_power))
}

/// Decision-weighted average transmit power of a policy.
fn average_tx_power(probs: &BranchProbs, policy: &PowerPolicy) -> f64 {
    let n = policy.len() as f64;
    let sum_idle: f64 = policy.branch(Branch::Idle).iter().sum();
    let sum_busy: f64 = policy.branch(Branch::Busy).iter().sum();
    (probs.prob_decision_idle * sum_idle + probs.prob_decision_busy * sum_busy) / n
}

/// Projected subgradient update of one multiplier.
pub fn subgradient_step(multiplier: f64, step: f64, limit: f64, achieved: f64) -> f64 {
    (multiplier - step * (limit - achieved)).max(0.0)
}

/// Largest flat power that satisfies every average constraint, used as a
/// stand-in when a zero price makes the per-sample maximizer diverge. The
/// dual iterate is then outside the dual domain; substituting a large
/// feasible policy keeps the subgradient loop moving without overshooting.
fn flat_feasible_power(cons: &Constraints, mean_gain_g: f64) -> f64 {
    let interference_cap = if mean_gain_g > 0.0 {
        cons.q_avg() / mean_gain_g
    } else {
        f64::MAX
    };
    let cap = match cons.p_avg() {
        Some(p_avg) => p_avg.min(interference_cap),
        None => interference_cap,
    };
    cap * (1.0 - 1e-9)
}

/// Recomputes the closed-form policy at the given duals, in place.
#[allow(clippy::too_many_arguments)]
fn compute_policy(
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    cons: &Constraints,
    duals: &DualState,
    unbounded_fallback: f64,
    policy: &mut PowerPolicy,
) -> Result<()> {
    for branch in [Branch::Idle, Branch::Busy] {
        let is_peak = matches!(cons, Constraints::PeakTxAvgInterf { .. });
        let out = policy.branch_mut(branch);
        for (i, (gain_h, gain_g)) in samples.iter().enumerate() {
            out[i] = if is_peak {
                optimal_power_peak(branch, params, spec, probs, gain_h, gain_g, duals, cons)?
            } else {
                match optimal_power_avg(branch, params, spec, probs, gain_h, gain_g, duals) {
                    Ok(p) => p,
                    Err(Error::UnboundedPower) => unbounded_fallback,
                    Err(e) => return Err(e),
                }
            };
        }
    }
    Ok(())
}

/// Accounting that treats the all-zero policy with zero circuit power as a
/// zero-EE point rather than an error; the zero policy is always feasible.
fn accounting_lenient(
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    policy: &PowerPolicy,
) -> Result<EEBreakdown> {
    match power_accounting(params, spec, probs, samples, policy) {
        Ok(acct) => Ok(acct),
        Err(Error::DegenerateObjective) => Ok(EEBreakdown {
            rate: 0.0,
            avg_tx_power: 0.0,
            total_power: params.circuit_power,
            avg_interference: 0.0,
            ee: 0.0,
        }),
        Err(e) => Err(e),
    }
}

struct ConstraintStatus {
    feasible: bool,
    comp_slack_ok: bool,
}

fn constraint_status(
    cons: &Constraints,
    lambda: f64,
    nu: f64,
    tolerance: f64,
    acct: &EEBreakdown,
) -> ConstraintStatus {
    // Each slackness product bounds the duality gap of the returned policy,
    // so both are held to half the shared tolerance. The outer F estimate is
    // then within tolerance of optimal, which keeps the outer parameter
    // sequence monotone: a regression would imply |F| at or below the outer
    // test's threshold, stopping the iteration instead.
    let product_tol = tolerance / 2.0;
    let q_avg = cons.q_avg();
    let q_viol = (acct.avg_interference - q_avg) / q_avg;
    let mut feasible = q_viol <= FEASIBILITY_RTOL;
    let mut comp_slack_ok = (nu * (q_avg - acct.avg_interference)).abs() <= product_tol;
    if let Some(p_avg) = cons.p_avg() {
        feasible &= (acct.avg_tx_power - p_avg) / p_avg <= FEASIBILITY_RTOL;
        comp_slack_ok &= (lambda * (p_avg - acct.avg_tx_power)).abs() <= product_tol;
    }
    ConstraintStatus {
        feasible,
        comp_slack_ok,
    }
}

/// Largest factor that scales a policy onto the feasible set. Both average
/// constraints are linear in the policy, so scaling is an exact projection
/// along the ray through the iterate.
fn feasible_scale(cons: &Constraints, acct: &EEBreakdown) -> f64 {
    let mut scale = 1.0f64;
    if acct.avg_interference > 0.0 {
        scale = scale.min(cons.q_avg() / acct.avg_interference);
    }
    if let (Some(p_avg), true) = (cons.p_avg(), acct.avg_tx_power > 0.0) {
        scale = scale.min(p_avg / acct.avg_tx_power);
    }
    (scale * (1.0 - 1e-12)).clamp(0.0, 1.0)
}

/// Solves the parametrized concave subproblem at fixed `alpha` by projected
/// subgradient ascent on the multipliers.
///
/// In the average-power regime both multipliers are updated; in the peak
/// regime the peaks are enforced by the closed form itself and only the
/// interference multiplier moves. The loop stops once the complementary
/// slackness products fall below the tolerance and the iterate is feasible.
/// If the iteration cap is hit instead, the solution is flagged as not
/// converged and carries the best feasible iterate seen, where infeasible
/// iterates compete through their scaled-to-feasibility projections; the
/// returned multipliers are always the final ones so the next subproblem
/// can warm-start from the end of the dual trajectory.
#[allow(clippy::too_many_arguments)]
pub fn solve_inner(
    alpha: f64,
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    cons: &Constraints,
    lambda_init: f64,
    nu_init: f64,
    cfg: &SolverConfig,
) -> Result<InnerSolution> {
    solve_inner_warm(
        alpha,
        params,
        spec,
        probs,
        samples,
        cons,
        lambda_init,
        nu_init,
        None,
        cfg,
    )
}

/// [`solve_inner`] with an optional feasible warm-start policy that joins
/// the best-iterate competition. Seeding with the previous outer iterate
/// keeps the outer parameter sequence nondecreasing even when this
/// subproblem hits its iteration cap: that iterate's auxiliary value at the
/// new parameter is exactly zero, so the returned policy can never certify
/// a smaller ratio than the one already achieved.
#[allow(clippy::too_many_arguments)]
pub fn solve_inner_warm(
    alpha: f64,
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    cons: &Constraints,
    lambda_init: f64,
    nu_init: f64,
    warm_policy: Option<&PowerPolicy>,
    cfg: &SolverConfig,
) -> Result<InnerSolution> {
    cfg.validate()?;
    cons.validate()?;
    let updates_lambda = cons.p_avg().is_some();
    let mut lambda = if updates_lambda { lambda_init } else { 0.0 };
    let mut nu = nu_init;

    let n = samples.len();
    let mean_gain_g = samples.gains_g().iter().sum::<f64>() / n as f64;
    let fallback = flat_feasible_power(cons, mean_gain_g);
    let mut policy = PowerPolicy::zeros(n);

    // The zero policy is feasible for any limits, so non-convergence always
    // has a feasible iterate to fall back to.
    let zero_acct = accounting_lenient(params, spec, probs, samples, &policy)?;
    let mut best_policy = policy.clone();
    let mut best_acct = zero_acct;
    let mut best_f = zero_acct.rate - alpha * zero_acct.total_power;
    if let Some(warm) = warm_policy {
        let warm_acct = accounting_lenient(params, spec, probs, samples, warm)?;
        let warm_f = warm_acct.rate - alpha * warm_acct.total_power;
        if warm_f > best_f {
            best_f = warm_f;
            best_policy = warm.clone();
            best_acct = warm_acct;
        }
    }

    for iter in 0..=cfg.max_inner_iters {
        let duals = DualState { alpha, lambda, nu };
        compute_policy(
            params,
            spec,
            probs,
            samples,
            cons,
            &duals,
            fallback,
            &mut policy,
        )?;
        let acct = accounting_lenient(params, spec, probs, samples, &policy)?;
        let status = constraint_status(cons, lambda, nu, cfg.tolerance, &acct);

        if status.feasible && status.comp_slack_ok {
            return Ok(InnerSolution {
                policy,
                lambda,
                nu,
                breakdown: acct,
                iters: iter,
                converged: true,
            });
        }

        if status.feasible {
            let f_value = acct.rate - alpha * acct.total_power;
            if f_value > best_f {
                best_f = f_value;
                best_policy.clone_from(&policy);
                best_acct = acct;
            }
        } else {
            let scale = feasible_scale(cons, &acct);
            if scale > 0.0 {
                let scaled = PowerPolicy::new(
                    policy
                        .branch(Branch::Idle)
                        .iter()
                        .map(|&p| p * scale)
                        .collect(),
                    policy
                        .branch(Branch::Busy)
                        .iter()
                        .map(|&p| p * scale)
                        .collect(),
                )?;
                let scaled_acct = accounting_lenient(params, spec, probs, samples, &scaled)?;
                let f_value = scaled_acct.rate - alpha * scaled_acct.total_power;
                if f_value > best_f {
                    best_f = f_value;
                    best_policy = scaled;
                    best_acct = scaled_acct;
                }
            }
        }

        if iter == cfg.max_inner_iters {
            break;
        }

        let step = match cfg.step_rule {
            StepRule::Constant => cfg.step_size,
            StepRule::Diminishing => cfg.step_size / ((iter + 1) as f64).sqrt(),
        };
        if let Some(p_avg) = cons.p_avg() {
            lambda = subgradient_step(lambda, step, p_avg, acct.avg_tx_power);
        }
        nu = subgradient_step(nu, step, cons.q_avg(), acct.avg_interference);
    }

    Ok(InnerSolution {
        policy: best_policy,
        lambda,
        nu,
        breakdown: best_acct,
        iters: cfg.max_inner_iters,
        converged: false,
    })
}

/// Runs the full solve on a caller-provided sample set.
///
/// The same realizations are reused across every iteration, so the
/// discretized problem stays fixed while alpha and the multipliers move.
pub fn solve_on_samples(
    params: &SystemParams,
    spec: &SensingSpec,
    cons: &Constraints,
    samples: &ChannelSampleSet,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    params.validate()?;
    spec.validate()?;
    cons.validate()?;
    cfg.validate()?;
    let probs = branch_probs(spec)?;

    let mut alpha = cfg.alpha_init;
    let mut lambda = cfg.lambda_init;
    let mut nu = cfg.nu_init;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<InnerSolution> = None;

    for outer in 0..cfg.max_outer_iters {
        let warm_policy = last.as_ref().map(|inner| &inner.policy);
        let inner = solve_inner_warm(
            alpha,
            params,
            spec,
            &probs,
            samples,
            cons,
            lambda,
            nu,
            warm_policy,
            cfg,
        )?;
        // Warm-start the next subproblem: successive problems differ only
        // in alpha.
        lambda = inner.lambda;
        nu = inner.nu;
        let acct = inner.breakdown;
        let f_alpha = acct.rate - alpha * acct.total_power;
        trace.push(TraceRecord {
            outer_iter: outer,
            alpha,
            f_alpha,
            lambda,
            nu,
            rate: acct.rate,
            avg_tx_power: acct.avg_tx_power,
            avg_interference: acct.avg_interference,
            inner_iters: inner.iters,
        });

        let done = f_alpha.abs() <= cfg.tolerance;
        if done {
            converged = inner.converged;
        }
        let degenerate = acct.total_power <= 0.0;
        last = Some(inner);
        if done || degenerate {
            break;
        }
        alpha = acct.rate / acct.total_power;
    }

    let inner = last.expect("at least one outer iteration runs");
    let breakdown = inner.breakdown;
    Ok(SolveResult {
        ee_opt: breakdown.ee,
        duals: DualState {
            alpha,
            lambda: inner.lambda,
            nu: inner.nu,
        },
        policy: inner.policy,
        breakdown,
        trace,
        converged,
    })
}

/// Draws the seeded sample set for the fading config and solves on it.
pub fn solve(
    params: &SystemParams,
    spec: &SensingSpec,
    cons: &Constraints,
    fading: &FadingConfig,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let samples = draw_samples(fading)?;
    solve_on_samples(params, spec, cons, &samples, cfg)
}

/// Writes the per-iteration trace as CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], mut w: W) -> Result<()> {
    writeln!(
        w,
        "outer_iter,alpha,F_alpha,lambda,nu,rate,avg_tx_power,avg_interference,inner_iters"
    )?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.outer_iter,
            r.alpha,
            r.f_alpha,
            r.lambda,
            r.nu,
            r.rate,
            r.avg_tx_power,
            r.avg_interference,
            r.inner_iters
        )?;
    }
    Ok(())
}
