//! Fading realizations and sample-average expectations.
//!
//! All expectations over the fading pair (|h|², |g|²) are replaced by sample
//! averages over one seeded draw that is fixed for the lifetime of a solve.
//! Reusing the same realizations across every solver iteration keeps the
//! discretized problem deterministic and concave, so the convergence
//! guarantees of the outer and inner loops apply to what is actually solved.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Rayleigh-fading configuration: both power gains are exponentially
/// distributed with the given means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingConfig {
    /// Mean power gain of the secondary link, E[|h|²].
    pub mean_gain_h: f64,
    /// Mean power gain of the interference link, E[|g|²].
    pub mean_gain_g: f64,
    /// Number of joint realizations to draw.
    pub n_samples: usize,
    /// RNG seed; identical configs reproduce identical sets bit-for-bit.
    pub seed: u64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            mean_gain_h: 1.0,
            mean_gain_g: 1.0,
            n_samples: 10_000,
            seed: 42,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_gain_h.is_finite() || self.mean_gain_h <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mean_gain_h = {} must be positive",
                self.mean_gain_h
            )));
        }
        if !self.mean_gain_g.is_finite() || self.mean_gain_g <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mean_gain_g = {} must be positive",
                self.mean_gain_g
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// One fixed set of joint fading realizations. Index `i` is one realization
/// of (|h|², |g|²) carrying probability weight `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSampleSet {
    gains_h: Vec<f64>,
    gains_g: Vec<f64>,
}

impl ChannelSampleSet {
    /// Builds a set from explicit gain vectors, validating the invariants.
    pub fn from_gains(gains_h: Vec<f64>, gains_g: Vec<f64>) -> Result<Self> {
        if gains_h.len() != gains_g.len() {
            return Err(Error::DimensionMismatch {
                expected: gains_h.len(),
                actual: gains_g.len(),
            });
        }
        if gains_h.is_empty() {
            return Err(Error::InvalidConfig("sample set must be non-empty".into()));
        }
        for (i, (&h, &g)) in gains_h.iter().zip(&gains_g).enumerate() {
            if !h.is_finite() || h < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "gains_h[{i}] = {h} must be >= 0"
                )));
            }
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "gains_g[{i}] = {g} must be >= 0"
                )));
            }
        }
        Ok(Self { gains_h, gains_g })
    }

    pub fn len(&self) -> usize {
        self.gains_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains_h.is_empty()
    }

    pub fn gains_h(&self) -> &[f64] {
        &self.gains_h
    }

    pub fn gains_g(&self) -> &[f64] {
        &self.gains_g
    }

    /// Iterates joint realizations in index order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.gains_h
            .iter()
            .copied()
            .zip(self.gains_g.iter().copied())
    }

    /// Sample-average expectation of a per-realization functional, summed in
    /// index order so the result does not depend on evaluation strategy.
    pub fn expectation<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut sum = 0.0;
        for (i, (h, g)) in self.iter().enumerate() {
            let v = f(h, g);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { index: i, value: v });
            }
            sum += v;
        }
        Ok(sum / self.len() as f64)
    }

    /// Writes the set as CSV with header `h2,g2`. Values use the shortest
    /// decimal representation that round-trips, so a dump/load cycle
    /// reproduces the set bit-for-bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h2,g2")?;
        for (h, g) in self.iter() {
            writeln!(w, "{h},{g}")?;
        }
        Ok(())
    }

    /// Reads a set previously written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut gains_h = Vec::new();
        let mut gains_g = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != "h2,g2" {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("expected header 'h2,g2', got '{line}'"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> std::result::Result<f64, String> {
                s.ok_or_else(|| "missing field".to_string())?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| e.to_string())
            };
            let h = parse(fields.next()).map_err(|message| Error::Parse {
                line: lineno + 1,
                message,
            })?;
            let g = parse(fields.next()).map_err(|message| Error::Parse {
                line: lineno + 1,
                message,
            })?;
            gains_h.push(h);
            gains_g.push(g);
        }
        Self::from_gains(gains_h, gains_g)
    }
}

/// Draws an exponential variate with the given mean by inverting the CDF.
/// Inversion keeps the draw a pure function of the uniform stream, so sets
/// reproduce exactly across platforms and dependency updates.
pub(crate) fn exp_inverse_cdf(uniform: f64, mean: f64) -> f64 {
    -mean * (1.0 - uniform).ln()
}

/// Draws a seeded set of i.i.d. exponential gain pairs. The two vectors are
/// mutually independent; the h-stream is consumed before the g-stream.
pub fn draw_samples(cfg: &FadingConfig) -> Result<ChannelSampleSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gains_h: Vec<f64> = (0..cfg.n_samples)
        .map(|_| exp_inverse_cdf(rng.random::<f64>(), cfg.mean_gain_h))
        .collect();
    let gains_g: Vec<f64> = (0..cfg.n_samples)
        .map(|_| exp_inverse_cdf(rng.random::<f64>(), cfg.mean_gain_g))
        .collect();
    ChannelSampleSet::from_gains(gains_h, gains_g)
}
