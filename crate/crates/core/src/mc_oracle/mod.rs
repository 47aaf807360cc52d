//! Seeded Monte Carlo oracle for the information densities.
//!
//! Every density is sampled letter by letter from the Gaussian laws that
//! define it and scored with the exact log ratio. Randomness is counter
//! based: sample `k` of term `t` under seed `s` always reads the same words of
//! the ChaCha8 stream `(s, t)`, so estimates do not depend on thread count
//! or batch size.

mod normal;
mod terms;
mod validate;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use normal::inverse_phi;
pub use terms::{Scenario, TermId};
pub use validate::{validate_all, Fault, ValidationCase, ValidationGrid, ValidationReport};

pub(crate) use terms::build_kernel;
use terms::Kernel;

/// Samples per independently seeked block of the stream.
const CHUNK: u64 = 4096;

/// z for a two-sided 99% normal interval.
pub const Z99: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Samples per scheduling unit; affects only how work is split.
    pub batch: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, batch: 65_536 }
    }

    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return domain("Monte Carlo needs at least one sample");
        }
        Ok(())
    }

    /// The same configuration with a seed derived from `key`.
    pub fn derive(&self, key: u64) -> Self {
        Self { seed: splitmix(self.seed ^ splitmix(key)), ..*self }
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self::new(1_000_000, 42)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Pr[i < γ].
    Below,
    /// Pr[i > γ].
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    /// 2.576·√(p̂(1−p̂)/N).
    pub half_width_99: f64,
    pub samples_used: u64,
    /// 99% interval: normal approximation, or Wilson's when p̂·N < 30.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl McEstimate {
    pub fn from_count(hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        let hw = Z99 * (p * (1.0 - p) / n).sqrt();
        let (ci_low, ci_high) = if (hits as f64) < 30.0 {
            let z2 = Z99 * Z99;
            let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
            let w = Z99 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
            ((centre - w).max(0.0), (centre + w).min(1.0))
        } else {
            ((p - hw).max(0.0), (p + hw).min(1.0))
        };
        Self { p_hat: p, half_width_99: hw, samples_used: samples, ci_low, ci_high }
    }

    pub fn covers(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples_used: u64,
}

/// A kernel bound to a blocklength and its stream.
pub(crate) struct Sampler {
    kernel: Kernel,
    n: usize,
    stream: u64,
}

impl Sampler {
    pub(crate) fn new(term: TermId, scenario: &Scenario) -> Result<Self> {
        let n = scenario.n();
        if n == 0 {
            return domain("blocklength must be at least 1");
        }
        Ok(Self { kernel: build_kernel(term, scenario)?, n, stream: term.stream() })
    }

    /// Mutual information per letter of a joint-law term.
    pub(crate) fn joint_information(&self) -> Option<f64> {
        self.kernel.joint_information()
    }

    /// One u64 per normal, i.e. two 32-bit stream words.
    fn words_per_sample(&self) -> u128 {
        2 * (self.n * self.kernel.normals_per_letter()) as u128
    }

    /// Runs `fold` over samples [start, end) of the stream.
    fn run_block<A>(&self, seed: u64, start: u64, end: u64, mut acc: A, fold: &impl Fn(&mut A, f64)) -> A {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(start as u128 * self.words_per_sample());
        let mut z = vec![0.0; self.n * self.kernel.normals_per_letter()];
        for _ in start..end {
            for x in z.iter_mut() {
                *x = inverse_phi(((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0));
            }
            fold(&mut acc, self.kernel.sample(&z));
        }
        acc
    }

    /// Per-block accumulators in block order.
    fn blocks<A: Send>(&self, mc: &McConfig, init: impl Fn() -> A + Sync, fold: impl Fn(&mut A, f64) + Sync) -> Result<Vec<A>> {
        mc.check()?;
        let blocks = mc.samples.div_ceil(CHUNK);
        let per_task = (mc.batch / CHUNK).max(1) as usize;
        Ok((0..blocks as usize)
            .into_par_iter()
            .with_min_len(per_task)
            .map(|b| {
                let start = b as u64 * CHUNK;
                let end = (start + CHUNK).min(mc.samples);
                self.run_block(mc.seed, start, end, init(), &fold)
            })
            .collect())
    }

    pub(crate) fn count(&self, threshold: f64, direction: Direction, mc: &McConfig) -> Result<McEstimate> {
        let hits: u64 = self
            .blocks(mc, || 0u64, |c, v| {
                let hit = match direction {
                    Direction::Below => v < threshold,
                    Direction::Above => v > threshold,
                };
                *c += u64::from(hit);
            })?
            .into_iter()
            .sum();
        Ok(McEstimate::from_count(hits, mc.samples))
    }

    pub(crate) fn mean(&self, mc: &McConfig) -> Result<MeanEstimate> {
        // (count, mean, M2) per block, merged in block order.
        let parts = self.blocks(mc, || (0u64, 0.0f64, 0.0f64), |(k, m, m2), v| {
            *k += 1;
            let d = v - *m;
            *m += d / *k as f64;
            *m2 += d * (v - *m);
        })?;
        let (mut k, mut m, mut m2) = (0u64, 0.0f64, 0.0f64);
        for (kb, mb, m2b) in parts {
            let tot = k + kb;
            let d = mb - m;
            m += d * kb as f64 / tot as f64;
            m2 += m2b + d * d * (k as f64) * (kb as f64) / tot as f64;
            k = tot;
        }
        let var = if k > 1 { m2 / (k - 1) as f64 } else { 0.0 };
        Ok(MeanEstimate { mean: m, std_err: (var / k as f64).sqrt(), samples_used: k })
    }
}

/// All sampled values of `term`, in stream order.
pub fn sample_density(term: TermId, scenario: &Scenario, mc: &McConfig) -> Result<Vec<f64>> {
    let s = Sampler::new(term, scenario)?;
    Ok(s.blocks(mc, Vec::new, |v, x| v.push(x))?.concat())
}

/// Fraction of samples of `term` strictly beyond `threshold`.
pub fn estimate_prob(term: TermId, scenario: &Scenario, threshold: f64, direction: Direction, mc: &McConfig) -> Result<McEstimate> {
    if threshold.is_nan() {
        return domain("threshold is NaN");
    }
    Sampler::new(term, scenario)?.count(threshold, direction, mc)
}

pub fn sample_mean(term: TermId, scenario: &Scenario, mc: &McConfig) -> Result<MeanEstimate> {
    Sampler::new(term, scenario)?.mean(mc)
}

/// Per-letter mutual information of a joint-law pair term, computed from the
/// same second moments the sampler uses.
pub fn pair_information(term: TermId, scenario: &Scenario) -> Result<Option<f64>> {
    Ok(Sampler::new(term, scenario)?.joint_information())
}
