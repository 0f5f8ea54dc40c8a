//! Achievable rate, power accounting, and the energy-efficiency objective.
//!
//! Conditioned on a sensing decision, the received disturbance is a
//! two-component Gaussian mixture (noise alone, or noise plus the primary's
//! signal), mixed by the busy posterior of that decision. Replacing the
//! mixture with a Gaussian of equal variance yields a closed-form achievable
//! rate that lower-bounds the true mutual information; [`exact_rate_mc`]
//! estimates the true value by Monte Carlo so the bound's tightness can be
//! measured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{exp_inverse_cdf, ChannelSampleSet};
use crate::error::{Error, Result};
use crate::sensing::{Branch, BranchProbs, SensingSpec};

/// Physical constants of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Noise power at the secondary receiver.
    pub noise_power: f64,
    /// Received power of the primary's signal at the secondary receiver.
    pub primary_power: f64,
    /// Frame duration in symbols.
    pub frame_len: f64,
    /// Sensing duration in symbols; transmission uses the remainder.
    pub sense_len: f64,
    /// Transmission-independent circuitry power draw.
    pub circuit_power: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !self.noise_power.is_finite() || self.noise_power <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_power = {} must be positive",
                self.noise_power
            )));
        }
        if self.primary_power < 0.0 || !self.primary_power.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "primary_power = {} must be nonnegative",
                self.primary_power
            )));
        }
        if !self.frame_len.is_finite() || self.frame_len <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "frame_len = {} must be positive",
                self.frame_len
            )));
        }
        if !(0.0..self.frame_len).contains(&self.sense_len) {
            return Err(Error::InvalidConfig(format!(
                "sense_len = {} must lie in [0, frame_len)",
                self.sense_len
            )));
        }
        if self.circuit_power < 0.0 || !self.circuit_power.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "circuit_power = {} must be nonnegative",
                self.circuit_power
            )));
        }
        Ok(())
    }

    /// Fraction of the frame spent transmitting.
    pub fn tx_fraction(&self) -> f64 {
        (self.frame_len - self.sense_len) / self.frame_len
    }

    /// Effective disturbance variance on a branch under the Gaussian
    /// replacement: noise plus the posterior-weighted primary power.
    pub fn branch_noise(&self, probs: &BranchProbs, branch: Branch) -> f64 {
        self.noise_power + probs.posterior_busy(branch) * self.primary_power
    }
}

/// Per-realization transmit powers, one pair per channel sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPolicy {
    p_idle: Vec<f64>,
    p_busy: Vec<f64>,
}

impl PowerPolicy {
    pub fn new(p_idle: Vec<f64>, p_busy: Vec<f64>) -> Result<Self> {
        if p_idle.len() != p_busy.len() {
            return Err(Error::DimensionMismatch {
                expected: p_idle.len(),
                actual: p_busy.len(),
            });
        }
        for (i, &p) in p_idle.iter().chain(&p_busy).enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "policy entry {i} = {p} must be a nonnegative finite power"
                )));
            }
        }
        Ok(Self { p_idle, p_busy })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            p_idle: vec![0.0; n],
            p_busy: vec![0.0; n],
        }
    }

    pub fn constant(n: usize, p_idle: f64, p_busy: f64) -> Result<Self> {
        Self::new(vec![p_idle; n], vec![p_busy; n])
    }

    pub fn len(&self) -> usize {
        self.p_idle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_idle.is_empty()
    }

    pub fn branch(&self, branch: Branch) -> &[f64] {
        match branch {
            Branch::Idle => &self.p_idle,
            Branch::Busy => &self.p_busy,
        }
    }

    pub fn branch_mut(&mut self, branch: Branch) -> &mut [f64] {
        match branch {
            Branch::Idle => &mut self.p_idle,
            Branch::Busy => &mut self.p_busy,
        }
    }

    /// Plain average of one branch's powers over the sample set.
    pub fn mean(&self, branch: Branch) -> f64 {
        let v = self.branch(branch);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn is_all_zero(&self) -> bool {
        self.p_idle.iter().chain(&self.p_busy).all(|&p| p == 0.0)
    }

    fn check_len(&self, samples: &ChannelSampleSet) -> Result<()> {
        if self.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.len(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

/// Rate, power, and interference accounting for one policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EEBreakdown {
    /// Achievable-rate lower bound.
    pub rate: f64,
    /// Decision-probability-weighted average transmit power.
    pub avg_tx_power: f64,
    /// Average transmit power plus circuit power.
    pub total_power: f64,
    /// Average interference power seen by the primary receiver.
    pub avg_interference: f64,
    /// Energy efficiency: rate divided by total power.
    pub ee: f64,
}

/// Lower-bound rate contribution of one branch at a single realization.
fn branch_rate_term(
    params: &SystemParams,
    probs: &BranchProbs,
    branch: Branch,
    power: f64,
    gain_h: f64,
) -> f64 {
    let noise = params.branch_noise(probs, branch);
    (1.0 + power * gain_h / noise).log2()
}

/// Achievable-rate lower bound of a policy, averaged over the sample set.
///
/// Each branch contributes its decision probability times the sample average
/// of `log2(1 + P·|h|²/(N0 + posterior·primary_power))`, and the sum is
/// scaled by the transmit fraction of the frame.
pub fn rate_lower_bound(
    params: &SystemParams,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    policy: &PowerPolicy,
) -> Result<f64> {
    params.validate()?;
    policy.check_len(samples)?;

    let mut rate = 0.0;
    for branch in [Branch::Idle, Branch::Busy] {
        let weight = probs.weight(branch);
        if weight == 0.0 {
            continue;
        }
        let powers = policy.branch(branch);
        let mut sum = 0.0;
        for (i, &h) in samples.gains_h().iter().enumerate() {
            sum += branch_rate_term(params, probs, branch, powers[i], h);
        }
        rate += weight * sum / samples.len() as f64;
    }
    Ok(params.tx_fraction() * rate)
}

/// Lower-bound rate at one fixed channel gain instead of a fading average.
pub fn rate_lower_bound_fixed_gain(
    params: &SystemParams,
    probs: &BranchProbs,
    gain_h: f64,
    p_idle: f64,
    p_busy: f64,
) -> f64 {
    let mut rate = 0.0;
    for (branch, power) in [(Branch::Idle, p_idle), (Branch::Busy, p_busy)] {
        let weight = probs.weight(branch);
        if weight == 0.0 {
            continue;
        }
        rate += weight * branch_rate_term(params, probs, branch, power, gain_h);
    }
    params.tx_fraction() * rate
}

/// Full rate/power/interference accounting of a policy.
///
/// Transmit power is weighted by decision probabilities; interference is
/// weighted by the probability of colliding with an active primary (miss
/// probability on the idle branch, detection probability on the busy one).
pub fn power_accounting(
    params: &SystemParams,
    spec: &SensingSpec,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    policy: &PowerPolicy,
) -> Result<EEBreakdown> {
    params.validate()?;
    policy.check_len(samples)?;

    let n = samples.len() as f64;
    let w_idle = probs.prob_decision_idle;
    let w_busy = probs.prob_decision_busy;
    let c_idle = spec.interference_coeff(Branch::Idle);
    let c_busy = spec.interference_coeff(Branch::Busy);

    let mut tx_sum = 0.0;
    let mut interference_sum = 0.0;
    for (i, &g) in samples.gains_g().iter().enumerate() {
        let p0 = policy.branch(Branch::Idle)[i];
        let p1 = policy.branch(Branch::Busy)[i];
        tx_sum += w_idle * p0 + w_busy * p1;
        interference_sum += (c_idle * p0 + c_busy * p1) * g;
    }
    let avg_tx_power = tx_sum / n;
    let avg_interference = interference_sum / n;

    let rate = rate_lower_bound(params, probs, samples, policy)?;
    let total_power = avg_tx_power + params.circuit_power;
    if total_power <= 0.0 {
        return Err(Error::DegenerateObjective);
    }
    Ok(EEBreakdown {
        rate,
        avg_tx_power,
        total_power,
        avg_interference,
        ee: rate / total_power,
    })
}

/// A Monte Carlo rate estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactRateEstimate {
    pub rate: f64,
    pub stderr: f64,
}

/// Two-component Gaussian-mixture density over the complex plane, evaluated
/// through the squared magnitude of the point.
#[derive(Debug, Clone, Copy)]
struct ComplexMixture {
    weight_hi: f64,
    var_lo: f64,
    var_hi: f64,
}

impl ComplexMixture {
    fn new(weight_hi: f64, var_lo: f64, var_hi: f64) -> Self {
        Self {
            weight_hi,
            var_lo,
            var_hi,
        }
    }

    /// Draws |y|² for one sample: pick a component, then an exponential
    /// magnitude with that component's variance as mean.
    fn draw_sq_magnitude<R: Rng>(&self, rng: &mut R) -> f64 {
        // Two uniforms are consumed per draw even when the mixture is
        // degenerate, to keep the stream layout independent of the weights.
        let pick = rng.random::<f64>();
        let u = rng.random::<f64>();
        let var = if pick < self.weight_hi {
            self.var_hi
        } else {
            self.var_lo
        };
        exp_inverse_cdf(u, var)
    }

    /// −log2 of the mixture density at squared magnitude `q`, evaluated in
    /// log space so extreme magnitudes cannot underflow.
    fn neg_log2_density(&self, q: f64) -> f64 {
        use std::f64::consts::PI;
        let w_hi = self.weight_hi;
        let w_lo = 1.0 - w_hi;
        if w_hi <= 0.0 {
            return ((PI * self.var_lo).ln() + q / self.var_lo) * std::f64::consts::LOG2_E;
        }
        if w_lo <= 0.0 {
            return ((PI * self.var_hi).ln() + q / self.var_hi) * std::f64::consts::LOG2_E;
        }
        let t_lo = w_lo.ln() - (PI * self.var_lo).ln() - q / self.var_lo;
        let t_hi = w_hi.ln() - (PI * self.var_hi).ln() - q / self.var_hi;
        let m = t_lo.max(t_hi);
        let ln_f = m + ((t_lo - m).exp() + (t_hi - m).exp()).ln();
        -ln_f * std::f64::consts::LOG2_E
    }
}

/// Monte Carlo differential-entropy estimate of a mixture in bits, with the
/// sample variance of the per-draw terms.
fn mc_entropy<R: Rng>(mix: &ComplexMixture, n: usize, rng: &mut R) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let q = mix.draw_sq_magnitude(rng);
        let t = mix.neg_log2_density(q);
        sum += t;
        sumsq += t * t;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, var)
}

/// Estimates the exact achievable rate at one fixed channel gain by Monte
/// Carlo, together with its standard error.
///
/// Per branch, the mutual information of a Gaussian input through the
/// mixture-disturbance channel is `h(Y) − h(N)`, with both differential
/// entropies estimated by averaging −log2 of the known mixture densities
/// over fresh draws. Branch estimates are weighted by decision probability
/// and scaled by the transmit fraction, mirroring the lower bound's shape.
pub fn exact_rate_mc(
    params: &SystemParams,
    probs: &BranchProbs,
    gain_h: f64,
    p_idle: f64,
    p_busy: f64,
    n_mc: usize,
    seed: u64,
) -> Result<ExactRateEstimate> {
    params.validate()?;
    if n_mc < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "n_mc = {n_mc} is below the minimum of 10000"
        )));
    }
    if !gain_h.is_finite() || gain_h < 0.0 || p_idle < 0.0 || p_busy < 0.0 {
        return Err(Error::InvalidConfig(
            "gain and powers must be nonnegative".into(),
        ));
    }

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let prefactor = params.tx_fraction();
    let mut rate = 0.0;
    let mut var_rate = 0.0;

    for (branch, power) in [(Branch::Idle, p_idle), (Branch::Busy, p_busy)] {
        // One derived stream per branch; Y and N use independent draws
        // from it in sequence.
        let mut rng = ChaCha8Rng::seed_from_u64(master.random::<u64>());
        let weight = probs.weight(branch);
        if weight == 0.0 {
            continue;
        }
        let signal = power * gain_h;
        if signal == 0.0 {
            // Y and N coincide; the mutual information is exactly zero.
            continue;
        }
        let posterior = probs.posterior_busy(branch);
        let noise_mix = ComplexMixture::new(
            posterior,
            params.noise_power,
            params.noise_power + params.primary_power,
        );
        let output_mix = ComplexMixture::new(
            posterior,
            signal + params.noise_power,
            signal + params.noise_power + params.primary_power,
        );

        let (h_out, var_out) = mc_entropy(&output_mix, n_mc, &mut rng);
        let (h_noise, var_noise) = mc_entropy(&noise_mix, n_mc, &mut rng);

        let mutual_info = h_out - h_noise;
        let var_mi = (var_out + var_noise) / n_mc as f64;
        rate += weight * mutual_info;
        var_rate += weight * weight * var_mi;
    }

    Ok(ExactRateEstimate {
        rate: prefactor * rate,
        stderr: prefactor * var_rate.sqrt(),
    })
}

/// Fading-averaged exact rate: runs [`exact_rate_mc`] at every channel
/// gain in the sample set and averages, with one derived seed per sample.
/// Costs `n_samples` full Monte Carlo runs, so keep the set small.
pub fn exact_rate_mc_fading_avg(
    params: &SystemParams,
    probs: &BranchProbs,
    samples: &ChannelSampleSet,
    p_idle: f64,
    p_busy: f64,
    n_mc: usize,
    seed: u64,
) -> Result<ExactRateEstimate> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len() as f64;
    let mut rate = 0.0;
    let mut var = 0.0;
    for &gain_h in samples.gains_h() {
        let est = exact_rate_mc(params, probs, gain_h, p_idle, p_busy, n_mc, seeder.random())?;
        rate += est.rate;
        var += est.stderr * est.stderr;
    }
    Ok(ExactRateEstimate {
        rate: rate / n,
        stderr: var.sqrt() / n,
    })
}
