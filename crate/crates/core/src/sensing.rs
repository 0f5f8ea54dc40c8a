//! Sensing quality and primary-user occupancy model.
//!
//! A secondary link senses the channel before transmitting and acts on the
//! (possibly wrong) decision. Sensing reliability is abstracted to a
//! detection probability and a false-alarm probability, which together with
//! the occupancy priors determine the probability of each sensing decision
//! and the posterior probability that the primary user is actually active
//! under each decision. Those four numbers drive every rate and power
//! expression downstream.

use crate::error::{Error, Result};

/// Which sensing decision a quantity is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Channel declared idle.
    Idle,
    /// Channel declared busy.
    Busy,
}

/// Sensing quality plus primary-activity priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingSpec {
    /// Probability the channel is declared busy given the primary is active.
    pub p_detect: f64,
    /// Probability the channel is declared busy given the primary is idle.
    pub p_false_alarm: f64,
    /// Prior probability that the primary is idle.
    pub prior_idle: f64,
    /// Prior probability that the primary is active.
    pub prior_busy: f64,
}

impl SensingSpec {
    pub fn new(
        p_detect: f64,
        p_false_alarm: f64,
        prior_idle: f64,
        prior_busy: f64,
    ) -> Result<Self> {
        let spec = Self {
            p_detect,
            p_false_alarm,
            prior_idle,
            prior_busy,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} must lie in [0, 1]"
                )));
            }
            Ok(())
        };
        unit("p_detect", self.p_detect)?;
        unit("p_false_alarm", self.p_false_alarm)?;
        unit("prior_idle", self.prior_idle)?;
        unit("prior_busy", self.prior_busy)?;
        if (self.prior_idle + self.prior_busy - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "priors must sum to 1, got {} + {}",
                self.prior_idle, self.prior_busy
            )));
        }
        Ok(())
    }

    /// Interference weight of a branch: the probability that a transmission
    /// in that branch coincides with an active primary.
    pub fn interference_coeff(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Idle => 1.0 - self.p_detect,
            Branch::Busy => self.p_detect,
        }
    }
}

/// Decision probabilities and busy posteriors for both sensing branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchProbs {
    /// Probability the channel is declared idle.
    pub prob_decision_idle: f64,
    /// Probability the channel is declared busy.
    pub prob_decision_busy: f64,
    /// Probability the primary is active given an idle decision.
    pub posterior_busy_given_idle: f64,
    /// Probability the primary is active given a busy decision.
    pub posterior_busy_given_busy: f64,
    /// Set when one decision carries zero probability mass; its posterior is
    /// defined as 0 and that branch never contributes to rate or power terms.
    pub degenerate_branch: Option<Branch>,
}

impl BranchProbs {
    /// Decision probability of a branch.
    pub fn weight(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Idle => self.prob_decision_idle,
            Branch::Busy => self.prob_decision_busy,
        }
    }

    /// Busy posterior of a branch.
    pub fn posterior_busy(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Idle => self.posterior_busy_given_idle,
            Branch::Busy => self.posterior_busy_given_busy,
        }
    }
}

/// Derives decision probabilities and busy posteriors from sensing quality.
///
/// The decision probabilities mix the priors through the detector's error
/// rates; the posteriors follow by Bayes' rule. A branch with zero decision
/// probability gets a posterior of 0 and is flagged in `degenerate_branch`.
pub fn branch_probs(spec: &SensingSpec) -> Result<BranchProbs> {
    spec.validate()?;

    let p_busy_decision = spec.prior_idle * spec.p_false_alarm + spec.prior_busy * spec.p_detect;
    let p_idle_decision =
        spec.prior_idle * (1.0 - spec.p_false_alarm) + spec.prior_busy * (1.0 - spec.p_detect);

    let mut degenerate = None;
    let posterior_busy_given_busy = if p_busy_decision > 0.0 {
        spec.prior_busy * spec.p_detect / p_busy_decision
    } else {
        degenerate = Some(Branch::Busy);
        0.0
    };
    let posterior_busy_given_idle = if p_idle_decision > 0.0 {
        spec.prior_busy * (1.0 - spec.p_detect) / p_idle_decision
    } else {
        degenerate = Some(Branch::Idle);
        0.0
    };

    Ok(BranchProbs {
        prob_decision_idle: p_idle_decision,
        prob_decision_busy: p_busy_decision,
        posterior_busy_given_idle,
        posterior_busy_given_busy,
        degenerate_branch: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(pd: f64, pf: f64) -> SensingSpec {
        SensingSpec::new(pd, pf, 0.4, 0.6).unwrap()
    }

    #[test]
    fn perfect_sensing_pins_posteriors() {
        let p = branch_probs(&spec(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p.prob_decision_busy, 0.6);
        assert_abs_diff_eq!(p.prob_decision_idle, 0.4);
        assert_eq!(p.posterior_busy_given_idle, 0.0);
        assert_eq!(p.posterior_busy_given_busy, 1.0);
        assert!(p.degenerate_branch.is_none());
    }

    #[test]
    fn imperfect_sensing_matches_bayes_arithmetic() {
        // Direct evaluation: Pr{busy decision} = 0.4*0.1 + 0.6*0.8 = 0.52,
        // posterior on idle = 0.6*0.2/0.48, posterior on busy = 0.48/0.52.
        let p = branch_probs(&spec(0.8, 0.1)).unwrap();
        assert_abs_diff_eq!(p.prob_decision_busy, 0.52, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob_decision_idle, 0.48, epsilon = 1e-15);
        assert_abs_diff_eq!(p.posterior_busy_given_idle, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.posterior_busy_given_busy, 0.48 / 0.52, epsilon = 1e-15);
    }

    #[test]
    fn higher_false_alarm_variant() {
        let p = branch_probs(&spec(0.8, 0.2)).unwrap();
        assert_abs_diff_eq!(p.prob_decision_busy, 0.56, epsilon = 1e-15);
        assert_abs_diff_eq!(p.prob_decision_idle, 0.44, epsilon = 1e-15);
        assert_abs_diff_eq!(p.posterior_busy_given_idle, 0.12 / 0.44, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_branch_is_flagged_with_zero_posterior() {
        // Detector always says busy: the idle decision has zero mass.
        let p = branch_probs(&spec(1.0, 1.0)).unwrap();
        assert_eq!(p.prob_decision_idle, 0.0);
        assert_eq!(p.posterior_busy_given_idle, 0.0);
        assert_eq!(p.degenerate_branch, Some(Branch::Idle));
    }

    #[test]
    fn posterior_on_idle_decreases_with_detection() {
        let mut last = f64::INFINITY;
        for pd in [0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
            let p = branch_probs(&spec(pd, 0.1)).unwrap();
            assert!(
                p.posterior_busy_given_idle < last,
                "posterior should strictly decrease in p_detect"
            );
            last = p.posterior_busy_given_idle;
        }
    }

    #[test]
    fn rejects_invalid_priors() {
        assert!(SensingSpec::new(0.8, 0.1, 0.5, 0.6).is_err());
        assert!(SensingSpec::new(1.2, 0.1, 0.4, 0.6).is_err());
        assert!(SensingSpec::new(0.8, -0.1, 0.4, 0.6).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn branch_probs_are_consistent(
                pd in 0.0f64..=1.0,
                pf in 0.0f64..=1.0,
                prior_idle in 0.0f64..=1.0,
            ) {
                let spec = SensingSpec::new(pd, pf, prior_idle, 1.0 - prior_idle).unwrap();
                let p = branch_probs(&spec).unwrap();

                prop_assert!((p.prob_decision_idle + p.prob_decision_busy - 1.0).abs() < 1e-12);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p.posterior_busy_given_idle));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p.posterior_busy_given_busy));

                // Law of total probability over sensing decisions.
                let recovered = p.posterior_busy_given_idle * p.prob_decision_idle
                    + p.posterior_busy_given_busy * p.prob_decision_busy;
                prop_assert!((recovered - spec.prior_busy).abs() < 1e-12);
            }
        }
    }
}
