//! Permutation-bootstrap inference on a cached Gram matrix, plus the
//! warp-speed harness for size/power studies.
//!
//! A permuted statistic costs O(n^2) index shuffling of precomputed kernel
//! values; the kernel itself is never re-evaluated during resampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::ops::Range;

use crate::cpstat::{profile_from_indices, StatConfig};
use crate::distributions::{DistributionSpec, Sampler};
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelConfig, KernelGram};
use crate::seeding;

/// How ties between permuted and observed statistics enter the p-value.
///
/// `AddOne` computes (1 + #{null >= observed}) / (nb + 1): never zero, and
/// ties count against rejection, so degenerate data yield p = 1 rather
/// than p = 0. `PaperStrict` is the literal mean(null > observed).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    AddOne,
    PaperStrict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    /// Number of permutations.
    pub nb: usize,
    /// Significance level used by callers that make accept/reject decisions.
    pub alpha: f64,
    pub seed: u64,
    pub pvalue_mode: PValueMode,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            nb: 500,
            alpha: 0.05,
            seed: 0,
            pvalue_mode: PValueMode::AddOne,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nb < 1 {
            return Err(Error::InvalidConfig("nb must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Result of a single permutation test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Observed statistic (identity ordering).
    pub statistic: f64,
    /// Estimated change location: smallest maximizing split.
    pub k_hat: usize,
    pub p_value: f64,
    /// Permuted statistics, in draw order.
    pub null_stats: Vec<f64>,
    pub n: usize,
    pub stat_config: StatConfig,
    pub resample_config: ResampleConfig,
    /// True when permutations were drawn with replacement (tiny samples).
    pub permutations_with_replacement: bool,
}

/// Permutations of 0..n drawn for the bootstrap.
pub struct PermutationSample {
    pub perms: Vec<Vec<usize>>,
    /// Set when n! <= nb forced sampling with replacement.
    pub with_replacement: bool,
}

fn permutation_space(n: usize) -> Option<u128> {
    // None stands for "astronomically large".
    if n > 30 {
        return None;
    }
    let mut total: u128 = 1;
    for i in 2..=n as u128 {
        total = total.checked_mul(i)?;
    }
    Some(total)
}

fn enumerate_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    // advance through lexicographic successors
    while let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) {
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
    out
}

/// Draw `nb` uniformly random permutations of 0..n.
///
/// Distinctness: when the permutation space is comfortably larger than nb
/// (n! > 4 nb), rejection sampling yields pairwise distinct draws; when the
/// space is small but still holds nb permutations, the space is enumerated
/// and subsampled without replacement (nb = n! returns every permutation
/// exactly once); only when nb exceeds n! are draws taken with replacement,
/// and the result is flagged.
pub fn sample_permutations(n: usize, nb: usize, rng: &mut impl Rng) -> PermutationSample {
    let space = permutation_space(n);
    match space {
        Some(total) if total <= 4 * nb as u128 => {
            let mut all = enumerate_permutations(n);
            if nb as u128 >= total {
                let mut perms = Vec::with_capacity(nb);
                if nb as u128 == total {
                    all.shuffle(rng);
                    perms = all;
                } else {
                    // more draws than permutations: with replacement
                    for _ in 0..nb {
                        let idx = rng.random_range(0..all.len());
                        perms.push(all[idx].clone());
                    }
                    return PermutationSample {
                        perms,
                        with_replacement: true,
                    };
                }
                PermutationSample {
                    perms,
                    with_replacement: false,
                }
            } else {
                all.shuffle(rng);
                all.truncate(nb);
                PermutationSample {
                    perms: all,
                    with_replacement: false,
                }
            }
        }
        _ => {
            // collision probability per draw is at most nb/n! <= 1/4
            let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(nb);
            let mut perms = Vec::with_capacity(nb);
            let mut draw: Vec<usize> = (0..n).collect();
            while perms.len() < nb {
                draw.shuffle(rng);
                if seen.insert(draw.clone()) {
                    perms.push(draw.clone());
                }
            }
            PermutationSample {
                perms,
                with_replacement: false,
            }
        }
    }
}

fn pvalue_from_null(observed: f64, null_stats: &[f64], mode: PValueMode) -> f64 {
    let nb = null_stats.len() as f64;
    match mode {
        PValueMode::AddOne => {
            let ge = null_stats.iter().filter(|&&s| s >= observed).count() as f64;
            (1.0 + ge) / (nb + 1.0)
        }
        PValueMode::PaperStrict => {
            let gt = null_stats.iter().filter(|&&s| s > observed).count() as f64;
            gt / nb
        }
    }
}

/// Permutation test restricted to the contiguous index range
/// `range` of the Gram (binary segmentation tests sub-segments this way,
/// against the principal sub-block of the one global Gram).
pub fn permutation_pvalue_range(
    gram: &KernelGram,
    range: Range<usize>,
    stat_cfg: &StatConfig,
    rs_cfg: &ResampleConfig,
) -> Result<DetectionResult> {
    stat_cfg.validate()?;
    rs_cfg.validate()?;
    if range.end > gram.n() || range.start >= range.end {
        return Err(Error::InvalidInput(format!(
            "range {range:?} invalid for Gram of size {}",
            gram.n()
        )));
    }
    let base: Vec<usize> = range.collect();
    let n = base.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "permutation test needs n >= 4 (two points per side), got {n}"
        )));
    }

    let observed = profile_from_indices(gram, &base, stat_cfg)?;

    let mut rng = seeding::stream(rs_cfg.seed, &[0x7065_726d]);
    let drawn = sample_permutations(n, rs_cfg.nb, &mut rng);

    let null_stats: Vec<f64> = drawn
        .perms
        .par_iter()
        .map(|perm| {
            let indices: Vec<usize> = perm.iter().map(|&p| base[p]).collect();
            profile_from_indices(gram, &indices, stat_cfg)
                .expect("validated inputs")
                .max
        })
        .collect();

    let p_value = pvalue_from_null(observed.max, &null_stats, rs_cfg.pvalue_mode);

    Ok(DetectionResult {
        statistic: observed.max,
        k_hat: observed.k_hat,
        p_value,
        null_stats,
        n,
        stat_config: *stat_cfg,
        resample_config: *rs_cfg,
        permutations_with_replacement: drawn.with_replacement,
    })
}

/// Permutation-bootstrap p-value for the whole sample behind the Gram.
pub fn permutation_pvalue(
    gram: &KernelGram,
    stat_cfg: &StatConfig,
    rs_cfg: &ResampleConfig,
) -> Result<DetectionResult> {
    permutation_pvalue_range(gram, 0..gram.n(), stat_cfg, rs_cfg)
}

/// Result of a warp-speed size/power run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerEstimate {
    /// Fraction of replicates whose data statistic exceeded the pooled
    /// critical value.
    pub rejection_rate: f64,
    /// (1 - alpha) empirical quantile of the permuted statistics, taken as
    /// the ascending order statistic with 1-based index
    /// ceil((1 - alpha) * n_replicates).
    pub critical_value: f64,
    pub n_replicates: usize,
}

/// Warp-speed bootstrap: each replicate draws a fresh two-regime sample
/// (k elements from `left`, n - k from `right`), computes the statistic and
/// a single permuted statistic on the same Gram; critical values are pooled
/// across replicates.
#[allow(clippy::too_many_arguments)]
pub fn warp_speed_power(
    left: &DistributionSpec,
    right: &DistributionSpec,
    n: usize,
    k: usize,
    stat_cfg: &StatConfig,
    kernel_cfg: &KernelConfig,
    rs_cfg: &ResampleConfig,
    n_replicates: usize,
) -> Result<PowerEstimate> {
    stat_cfg.validate()?;
    rs_cfg.validate()?;
    if n_replicates < 1 {
        return Err(Error::InvalidConfig("n_replicates must be >= 1".into()));
    }
    if k < 1 || k >= n {
        return Err(Error::InvalidInput(format!("split k = {k} out of range 1..{}", n - 1)));
    }
    if left.dim != right.dim {
        return Err(Error::Dimension(format!(
            "regime dimensions differ: {} vs {}",
            left.dim, right.dim
        )));
    }
    let left_sampler = Sampler::new(left.clone())?;
    let right_sampler = Sampler::new(right.clone())?;

    let stats: Vec<(f64, f64)> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeding::stream(rs_cfg.seed, &[0x7761_7270, r as u64]);
            let mut sample = left_sampler.sample_n(k, &mut rng);
            sample.extend(right_sampler.sample_n(n - k, &mut rng));
            let g = gram(&sample, kernel_cfg).expect("validated sampler output");
            let identity: Vec<usize> = (0..n).collect();
            let data_stat = profile_from_indices(&g, &identity, stat_cfg)
                .expect("validated")
                .max;
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let perm_stat = profile_from_indices(&g, &perm, stat_cfg).expect("validated").max;
            (data_stat, perm_stat)
        })
        .collect();

    let mut permuted: Vec<f64> = stats.iter().map(|&(_, p)| p).collect();
    permuted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((1.0 - rs_cfg.alpha) * n_replicates as f64).ceil() as usize;
    let idx = idx.clamp(1, n_replicates);
    let critical_value = permuted[idx - 1];
    let rejections = stats.iter().filter(|&&(d, _)| d > critical_value).count();

    Ok(PowerEstimate {
        rejection_rate: rejections as f64 / n_replicates as f64,
        critical_value,
        n_replicates,
    })
}
