//! Pairwise ranking losses: the all-pairs margin (AUC) loss and the
//! rank-weighted WARP loss with its sampled rank estimate.
//!
//! The margin is fixed at 1 throughout.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Weights `alpha_1 >= alpha_2 >= ... >= 0` that turn a rank into a loss
/// through `L(r) = alpha_1 + ... + alpha_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaScheme {
    /// Every position costs the same; equivalent to the AUC objective.
    Uniform,
    /// Only the first `k` positions cost anything.
    PrecisionAtK(usize),
    /// `alpha_i = 1 / i`.
    #[default]
    Harmonic,
}

impl AlphaScheme {
    /// `alpha_i` for a 1-based position `i`.
    pub fn alpha(self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        match self {
            AlphaScheme::Uniform => 1.0,
            AlphaScheme::PrecisionAtK(k) => {
                if i <= k {
                    1.0
                } else {
                    0.0
                }
            }
            AlphaScheme::Harmonic => 1.0 / i as f64,
        }
    }
}

impl fmt::Display for AlphaScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaScheme::Uniform => f.write_str("uniform"),
            AlphaScheme::PrecisionAtK(k) => write!(f, "p@{k}"),
            AlphaScheme::Harmonic => f.write_str("harmonic"),
        }
    }
}

impl FromStr for AlphaScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "uniform" => Ok(AlphaScheme::Uniform),
            "harmonic" => Ok(AlphaScheme::Harmonic),
            _ => s
                .strip_prefix("p@")
                .and_then(|k| k.parse().ok())
                .map(AlphaScheme::PrecisionAtK)
                .ok_or_else(|| {
                    Error::Config(format!("unknown alpha scheme `{s}` (uniform, harmonic, p@K)"))
                }),
        }
    }
}

/// `L(r) = sum_{i=1..r} alpha_i`, with `L(0) = 0`.
pub fn big_l(r: usize, scheme: AlphaScheme) -> f64 {
    match scheme {
        AlphaScheme::Uniform => r as f64,
        AlphaScheme::PrecisionAtK(k) => r.min(k) as f64,
        AlphaScheme::Harmonic => (1..=r).map(|i| 1.0 / i as f64).sum(),
    }
}

/// `max(0, 1 + f_k - f_j)`
#[inline]
pub fn hinge(f_j: f64, f_k: f64) -> f64 {
    (1.0 + f_k - f_j).max(0.0)
}

fn positive_mask(n: usize, positives: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &p in positives {
        if p >= n {
            return Err(Error::OutOfRange {
                kind: "label",
                id: p,
                size: n,
            });
        }
        mask[p] = true;
    }
    Ok(mask)
}

/// Sum of the hinge over every (positive, negative) label pair.
pub fn auc_loss_full(scores: &[f64], positives: &[usize]) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::Config("AUC loss needs at least one positive label".into()));
    }
    let mask = positive_mask(scores.len(), positives)?;
    let mut negatives: Vec<f64> = scores
        .iter()
        .zip(&mask)
        .filter(|(_, &p)| !p)
        .map(|(s, _)| *s)
        .collect();
    negatives.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    // Only negatives with f_k > f_j - 1 contribute; sorted descending they
    // form a prefix.
    let mut prefix = Vec::with_capacity(negatives.len() + 1);
    prefix.push(0.0f64);
    for v in &negatives {
        prefix.push(prefix.last().unwrap() + v);
    }
    let mut total = 0.0;
    let mut seen = vec![false; scores.len()];
    for &j in positives {
        if std::mem::replace(&mut seen[j], true) {
            continue;
        }
        let f_j = scores[j];
        let cnt = negatives.partition_point(|&f_k| 1.0 + f_k - f_j > 0.0);
        total += cnt as f64 * (1.0 - f_j) + prefix[cnt];
    }
    Ok(total)
}

/// Margin-based rank of positive label `j`: the number of negatives with
/// `1 + f_k >= f_j`.
pub fn margin_rank(scores: &[f64], j: usize, positives: &[usize]) -> Result<usize> {
    let mask = positive_mask(scores.len(), positives)?;
    if !mask.get(j).copied().unwrap_or(false) {
        return Err(Error::Config(format!("label {j} is not a positive label")));
    }
    let f_j = scores[j];
    Ok(scores
        .iter()
        .zip(&mask)
        .filter(|(f_k, &p)| !p && 1.0 + **f_k >= f_j)
        .count())
}

/// Sampled rank estimate `floor((Y - 1) / N)` after `N` trials.
pub fn estimate_rank(y: usize, trials: usize) -> Result<usize> {
    if trials == 0 {
        return Err(Error::Config("rank estimate needs at least one trial".into()));
    }
    Ok(y.saturating_sub(1) / trials)
}

/// A violating pair found by negative sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationSample {
    pub positive: usize,
    pub negative: usize,
    pub f_positive: f64,
    pub f_negative: f64,
    /// Number of negatives drawn, including the violator.
    pub trials: usize,
    /// Size of the label universe.
    pub universe: usize,
}

impl ViolationSample {
    pub fn estimated_rank(&self) -> usize {
        // trials >= 1 by construction
        (self.universe - 1) / self.trials
    }
}

/// Map `r` in `0..Y - |positives|` to the `r`-th label not in `positives`
/// (sorted, duplicate-free).
pub(crate) fn nth_negative(r: usize, positives: &[usize]) -> usize {
    let mut label = r;
    for &p in positives {
        if p <= label {
            label += 1;
        } else {
            break;
        }
    }
    label
}

/// Draw one negative label uniformly from `0..y` minus `positives`.
pub fn draw_negative<R: Rng + ?Sized>(y: usize, positives: &[usize], rng: &mut R) -> usize {
    let n_neg = y - positives.len();
    nth_negative(rng.random_range(0..n_neg), positives)
}

fn check_sorted_positives(positives: &[usize], y: usize) -> Result<()> {
    if positives.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("positive labels must be sorted and distinct".into()));
    }
    if let Some(&last) = positives.last() {
        if last >= y {
            return Err(Error::OutOfRange {
                kind: "label",
                id: last,
                size: y,
            });
        }
    }
    if positives.len() >= y {
        return Err(Error::NoExamples("no negative labels exist".into()));
    }
    Ok(())
}

/// Draw negatives uniformly with replacement until one scores within the
/// margin of the positive `j` (`f_k > f_j - 1`) or `Y - 1` draws have been
/// made. Returns `None` when no violator turned up.
///
/// `positives` must be sorted and distinct and contain `j`.
pub fn sample_violator<R: Rng + ?Sized>(
    mut score: impl FnMut(usize) -> f64,
    positives: &[usize],
    j: usize,
    y: usize,
    rng: &mut R,
) -> Result<Option<ViolationSample>> {
    check_sorted_positives(positives, y)?;
    if positives.binary_search(&j).is_err() {
        return Err(Error::Config(format!("label {j} is not a positive label")));
    }
    let f_j = score(j);
    Ok(sample_until_violation(
        score,
        |rng: &mut R| draw_negative(y, positives, rng),
        j,
        f_j,
        y,
        rng,
    ))
}

/// The sampling loop proper: `draw` yields negatives, `y` sets both the
/// trial cap and the universe size reported for the rank estimate.
pub(crate) fn sample_until_violation<R: Rng + ?Sized>(
    mut score: impl FnMut(usize) -> f64,
    mut draw: impl FnMut(&mut R) -> usize,
    j: usize,
    f_j: f64,
    y: usize,
    rng: &mut R,
) -> Option<ViolationSample> {
    let cap = y.saturating_sub(1).max(1);
    let mut trials = 0;
    loop {
        let k = draw(rng);
        let f_k = score(k);
        trials += 1;
        if f_k > f_j - 1.0 {
            return Some(ViolationSample {
                positive: j,
                negative: k,
                f_positive: f_j,
                f_negative: f_k,
                trials,
                universe: y,
            });
        }
        if trials >= cap {
            return None;
        }
    }
}
