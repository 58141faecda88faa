//! Sampling segmentations for subword regularization, plus n-best helpers.
//!
//! With a finite candidate count `l`, the top-`l` segmentations are drawn
//! from the multinomial `P(x_i)^α / Σ_j P(x_j)^α`. With `l` infinite every
//! segmentation is a candidate: node scores are multiplied by `α` and a path
//! is drawn exactly by forward-filtering backward-sampling, giving
//! `P(x)^α / Σ_x' P(x')^α` over all paths.
//!
//! Nothing is cached between calls; every draw reruns the lattice programs.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, SegPath};
use crate::unigram::UnigramModel;

/// Number of candidates considered when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Finite(l) => write!(f, "{l}"),
            SampleSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SampleSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(SampleSize::Infinite);
        }
        match s.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(SampleSize::Finite(l)),
            _ => Err(Error::Config(format!(
                "sample size must be a positive integer or \"inf\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub l: SampleSize,
    /// Smoothing exponent; smaller is flatter.
    pub alpha: f64,
    /// Samples drawn per sentence.
    pub k: usize,
}

impl SamplingConfig {
    pub fn new(l: SampleSize, alpha: f64) -> Self {
        Self { l, alpha, k: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be a non-negative number, got {}",
                self.alpha
            )));
        }
        if self.l == SampleSize::Finite(0) {
            return Err(Error::Config("sample size l must be at least 1".into()));
        }
        if self.l == SampleSize::Infinite && self.alpha == 0.0 {
            return Err(Error::Config(
                "alpha = 0 with an unbounded candidate set is not supported".into(),
            ));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Length-penalty setting for rescoring n-best hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    pub length_penalty: f64,
}

/// Top-`l` candidates with their selection probabilities
/// `P(x_i)^α / Σ_j P(x_j)^α`.
pub fn candidate_distribution(lattice: &Lattice, l: usize, alpha: f64) -> Vec<(SegPath, f64)> {
    let candidates = lattice.nbest(l);
    if candidates.is_empty() {
        return Vec::new();
    }
    if alpha == 0.0 {
        let uniform = 1.0 / candidates.len() as f64;
        return candidates.into_iter().map(|p| (p, uniform)).collect();
    }
    let best = candidates[0].log_prob;
    let weights: Vec<f64> = candidates
        .iter()
        .map(|p| (alpha * (p.log_prob - best)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    candidates
        .into_iter()
        .zip(weights)
        .map(|(p, w)| (p, w / total))
        .collect()
}

/// Draws one segmentation from a prebuilt lattice.
pub fn sample_lattice<R: Rng + ?Sized>(
    lattice: &Lattice,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<SegPath> {
    config.validate()?;
    match config.l {
        SampleSize::Infinite => Ok(lattice.sample_annealed(config.alpha, rng)),
        SampleSize::Finite(l) => {
            let mut candidates = candidate_distribution(lattice, l, config.alpha);
            let index = if config.alpha == 0.0 {
                rng.random_range(0..candidates.len())
            } else {
                let weights = candidates.iter().map(|(_, p)| *p);
                WeightedIndex::new(weights)
                    .map_err(|e| Error::NonFinite(format!("sampling weights: {e}")))?
                    .sample(rng)
            };
            Ok(candidates.swap_remove(index).0)
        }
    }
}

/// Samples one segmentation of a raw sentence.
pub fn sample<R: Rng + ?Sized>(
    model: &UnigramModel,
    raw: &str,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<SegPath> {
    config.validate()?;
    sample_lattice(&model.lattice(raw)?, config, rng)
}

/// Samples `config.k` segmentations of one sentence.
pub fn sample_k<R: Rng + ?Sized>(
    model: &UnigramModel,
    raw: &str,
    config: &SamplingConfig,
    rng: &mut R,
) -> Result<Vec<SegPath>> {
    config.validate()?;
    let lattice = model.lattice(raw)?;
    (0..config.k)
        .map(|_| sample_lattice(&lattice, config, rng))
        .collect()
}

/// Per-side settings for sampling a source/target pair. `None` on a side
/// means that side is always segmented with Viterbi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairConfig {
    pub source: Option<SamplingConfig>,
    pub target: Option<SamplingConfig>,
    /// Pairs drawn per call.
    pub k: usize,
}

impl PairConfig {
    pub fn both(config: SamplingConfig) -> Self {
        Self {
            source: Some(config),
            target: Some(config),
            k: 1,
        }
    }
}

fn sample_side<R: Rng + ?Sized>(
    lattice: &Lattice,
    config: Option<&SamplingConfig>,
    rng: &mut R,
) -> Result<SegPath> {
    match config {
        Some(c) => sample_lattice(lattice, c, rng),
        None => Ok(lattice.viterbi()),
    }
}

/// Draws `config.k` independent (source, target) segmentation pairs; the
/// call a training loop makes once per parameter update.
pub fn sample_pair<R: Rng + ?Sized>(
    source_model: &UnigramModel,
    target_model: &UnigramModel,
    source: &str,
    target: &str,
    config: &PairConfig,
    rng: &mut R,
) -> Result<Vec<(SegPath, SegPath)>> {
    if config.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    for side in [&config.source, &config.target].into_iter().flatten() {
        side.validate()?;
    }
    let source_lattice = source_model.lattice(source)?;
    let target_lattice = target_model.lattice(target)?;
    (0..config.k)
        .map(|_| {
            let x = sample_side(&source_lattice, config.source.as_ref(), rng)?;
            let y = sample_side(&target_lattice, config.target.as_ref(), rng)?;
            Ok((x, y))
        })
        .collect()
}

/// `log_prob / num_pieces^λ`, the length-normalized score used to rerank
/// n-best translations.
pub fn length_penalized_score(log_prob: f64, num_pieces: usize, config: &ScoreConfig) -> Result<f64> {
    if num_pieces == 0 {
        return Err(Error::Config("cannot score an empty hypothesis".into()));
    }
    if config.length_penalty.is_nan() || config.length_penalty < 0.0 {
        return Err(Error::Config(format!(
            "length penalty must be non-negative, got {}",
            config.length_penalty
        )));
    }
    Ok(log_prob / (num_pieces as f64).powf(config.length_penalty))
}

/// Top-`n` segmentations with their posterior probabilities `P(x) / Z`.
pub fn nbest_encode(model: &UnigramModel, raw: &str, n: usize) -> Result<Vec<(SegPath, f64)>> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let lattice = model.lattice(raw)?;
    let log_z = lattice.log_partition();
    Ok(lattice
        .nbest(n)
        .into_iter()
        .map(|p| {
            let posterior = (p.log_prob - log_z).exp();
            (p, posterior)
        })
        .collect())
}
