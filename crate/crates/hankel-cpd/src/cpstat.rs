//! The CUSUM-max change-point statistic computed from a cached kernel Gram.
//!
//! For a split after the first k of n elements, the statistic weighs the
//! two-sample distance
//!
//!   bracket(k) = (1/k^2) sum_{i,j<=k} H_ij
//!              + (1/(n-k)^2) sum_{i,j>k} H_ij
//!              - (2/(k(n-k))) sum_{i<=k, j>k} H_ij
//!
//! (diagonal terms included, so the bracket is an exact integrated square and
//! hence nonnegative) by c_{n,k}(gamma) * k(n-k)/n with
//! c_{n,k}(gamma) = (k(n-k)/n^2)^gamma. Prefix sums bring the whole profile
//! to O(n^2) with zero kernel evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelGram;

/// Weight exponent gamma in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatConfig {
    pub gamma: f64,
}

impl Default for StatConfig {
    fn default() -> Self {
        Self { gamma: 0.5 }
    }
}

impl StatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Full per-split profile of the statistic.
///
/// `k[i]` is the split (first k elements vs the rest), `bracket[i]` the raw
/// two-sample distance, `weighted[i]` the weighted value whose maximum is the
/// test statistic. `k_hat` is the smallest maximizing split and doubles as
/// the change-location estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatProfile {
    pub n: usize,
    pub gamma: f64,
    pub k: Vec<usize>,
    pub bracket: Vec<f64>,
    pub weighted: Vec<f64>,
    pub max: f64,
    pub k_hat: usize,
}

impl StatProfile {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("profile serializes")
    }
}

/// Maximum weighted value and the smallest k attaining it.
pub fn statistic_max(profile: &StatProfile) -> (f64, usize) {
    (profile.max, profile.k_hat)
}

/// Profile over the sample order given by `indices` (global Gram indices).
/// The identity ordering reproduces `statistic_profile`; a permuted ordering
/// is how bootstrap replicates reuse the Gram.
pub fn profile_from_indices(gram: &KernelGram, indices: &[usize], cfg: &StatConfig) -> Result<StatProfile> {
    cfg.validate()?;
    let n = indices.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 observations to form a split, got {n}"
        )));
    }
    for &i in indices {
        if i >= gram.n() {
            return Err(Error::InvalidInput(format!(
                "index {i} out of range for Gram of size {}",
                gram.n()
            )));
        }
    }

    // Row totals within the selected index set, their grand total, and the
    // running prefix of the top-left block.
    let mut row_totals = vec![0.0f64; n];
    for (pos, &gi) in indices.iter().enumerate() {
        let mut t = 0.0;
        for &gj in indices {
            t += gram.value(gi, gj);
        }
        row_totals[pos] = t;
    }
    let grand_total: f64 = row_totals.iter().sum();

    let nf = n as f64;
    let mut k_list = Vec::with_capacity(n - 1);
    let mut brackets = Vec::with_capacity(n - 1);
    let mut weighted = Vec::with_capacity(n - 1);
    let mut max = f64::NEG_INFINITY;
    let mut k_hat = 1;

    let mut block = 0.0; // A(k) = sum over the k x k top-left block
    let mut prefix_rows = 0.0; // S(k) = sum of the first k row totals
    for k in 1..n {
        let gk = indices[k - 1];
        let mut cross_new = 0.0;
        for &gi in &indices[..k - 1] {
            cross_new += gram.value(gi, gk);
        }
        block += 2.0 * cross_new + gram.value(gk, gk);
        prefix_rows += row_totals[k - 1];

        let kf = k as f64;
        let rf = (n - k) as f64;
        let cross = prefix_rows - block; // sum_{i<=k, j>k}
        let bottom = grand_total - 2.0 * prefix_rows + block; // sum_{i,j>k}
        let bracket = block / (kf * kf) + bottom / (rf * rf) - 2.0 * cross / (kf * rf);
        let weight = (kf * rf / (nf * nf)).powf(cfg.gamma) * (kf * rf / nf);
        let value = weight * bracket;

        k_list.push(k);
        brackets.push(bracket);
        weighted.push(value);
        if value > max {
            max = value;
            k_hat = k;
        }
    }

    Ok(StatProfile {
        n,
        gamma: cfg.gamma,
        k: k_list,
        bracket: brackets,
        weighted,
        max,
        k_hat,
    })
}

/// Profile of the statistic over the whole sample in its stored order.
pub fn statistic_profile(gram: &KernelGram, cfg: &StatConfig) -> Result<StatProfile> {
    let indices: Vec<usize> = (0..gram.n()).collect();
    profile_from_indices(gram, &indices, cfg)
}

/// The nonnegative two-sample bracket at a single split 1 <= k <= n-1,
/// evaluated directly from the Gram.
pub fn two_sample_bracket(gram: &KernelGram, k: usize) -> Result<f64> {
    let n = gram.n();
    if k < 1 || k >= n {
        return Err(Error::InvalidInput(format!(
            "split k = {k} out of range 1..{}",
            n - 1
        )));
    }
    let mut top = 0.0;
    let mut bottom = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = gram.value(i, j);
            match (i < k, j < k) {
                (true, true) => top += v,
                (false, false) => bottom += v,
                (true, false) => cross += v,
                (false, true) => {}
            }
        }
    }
    let kf = k as f64;
    let rf = (n - k) as f64;
    Ok(top / (kf * kf) + bottom / (rf * rf) - 2.0 * cross / (kf * rf))
}
