//! Truncated two-matrix Bessel series.
//!
//! The quantity computed here is
//!
//!   J_nu(-X, Y) = sum_{k>=0} sum_{kappa of weight k, <= m parts}
//!       C_kappa(X) C_kappa(Y) / (k! (nu + (m+1)/2)_kappa C_kappa(I_m)),
//!
//! where X and Y enter through their (nonnegative) eigenvalues. The sign
//! (-1)^k carried by the classical series cancels against
//! C_kappa(-X) = (-1)^k C_kappa(X), so every degree layer is nonnegative and
//! partial sums are monotone, which makes relative-tolerance truncation safe.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use super::zonal::{eigenvalue_powers, zonal_table, ZonalTable};
use crate::error::{Error, Result};

/// Truncation controls for the series: a hard degree cap plus a quiet rule
/// that stops once several consecutive layers are negligible relative to the
/// running total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Cap on the partition weight |kappa|.
    pub max_degree: usize,
    /// A layer counts as quiet when it is <= rel_tol * running total.
    pub rel_tol: f64,
    /// Number of consecutive quiet layers required to stop.
    pub consecutive_quiet_layers: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_degree: 60,
            rel_tol: 1e-12,
            consecutive_quiet_layers: 2,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::InvalidConfig("max_degree must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.consecutive_quiet_layers < 1 {
            return Err(Error::InvalidConfig("consecutive_quiet_layers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Order parameter of the series; must satisfy nu > (m - 2) / 2 for
/// dimension m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselOrder(pub f64);

impl BesselOrder {
    pub fn check_for_dim(self, m: usize) -> Result<()> {
        if !self.0.is_finite() {
            return Err(Error::Domain(format!("order must be finite, got {}", self.0)));
        }
        let bound = (m as f64 - 2.0) / 2.0;
        if self.0 <= bound {
            return Err(Error::Domain(format!(
                "order nu = {} must exceed (m - 2)/2 = {bound} for dimension {m}",
                self.0
            )));
        }
        Ok(())
    }
}

/// Per-degree vectors, one entry per partition, built lazily.
type DegreeVectors = RwLock<Vec<Arc<Vec<f64>>>>;

/// Per-(dimension, order) series constants: the zonal coefficient tables plus
/// per-partition weight ratios.
///
/// The degree-k layer is evaluated in a scaled form that keeps every
/// intermediate inside f64 range: with normalized eigenvalue profiles
/// (unit trace) supplying zhat_kappa = C_kappa(X) / (tr X)^k in [0, 1],
///
///   layer_k = s_k * sum_kappa ratio_kappa * zhat_kappa(X) zhat_kappa(Y),
///   s_k     = (tr X tr Y)^k / (k! (a)_k),           a = nu + (m+1)/2,
///   ratio_kappa = (a)_k / ((a)_kappa C_kappa(I_m)),
///
/// which reproduces C_kappa(X) C_kappa(Y) / (k! (a)_kappa C_kappa(I_m))
/// exactly while the scalar factor s_k is accumulated incrementally like a
/// modified-Bessel term.
///
/// Degrees are materialized on first use and immutable afterwards, so one
/// table serves any number of concurrent kernel evaluations.
pub struct SeriesTable {
    m: usize,
    nu: f64,
    zonal: Arc<ZonalTable>,
    ratios: DegreeVectors,
}

impl SeriesTable {
    fn new(m: usize, nu: f64) -> Self {
        Self {
            m,
            nu,
            zonal: zonal_table(m),
            ratios: RwLock::new(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> f64 {
        self.nu
    }

    /// nu + (m + 1) / 2, the Pochhammer base of the series.
    fn base(&self) -> f64 {
        self.nu + (self.m as f64 + 1.0) / 2.0
    }

    pub(crate) fn zonal(&self) -> &ZonalTable {
        &self.zonal
    }

    fn ratios(&self, k: usize) -> Arc<Vec<f64>> {
        {
            let read = self.ratios.read().unwrap();
            if k < read.len() {
                return read[k].clone();
            }
        }
        let mut write = self.ratios.write().unwrap();
        while write.len() <= k {
            let deg = write.len();
            let table = self.zonal.degree(deg);
            let a = self.base();
            let ws = table
                .partitions()
                .iter()
                .zip(table.identity_values())
                .map(|(kappa, &c_id)| pochhammer_ratio(a, deg, kappa) / c_id)
                .collect();
            write.push(Arc::new(ws));
        }
        write[k].clone()
    }
}

/// (a)_k / (a)_kappa for |kappa| = k, with the k numerator and k denominator
/// factors interleaved so neither product overflows on its own.
fn pochhammer_ratio(a: f64, k: usize, kappa: &super::Partition) -> f64 {
    let mut out = 1.0;
    let mut j = 0usize;
    for (i, &part) in kappa.parts().iter().enumerate() {
        let base = a - i as f64 * 0.5;
        for step in 0..part {
            out *= (a + j as f64) / (base + f64::from(step));
            j += 1;
        }
    }
    // rows of kappa cover only |kappa| factors; when kappa has fewer cells
    // than k this loop never runs short because |kappa| = k by construction
    debug_assert_eq!(j, k);
    out
}

/// Shared series tables, keyed by dimension and order.
pub fn series_table(m: usize, nu: f64) -> Arc<SeriesTable> {
    type TableCache = Mutex<HashMap<(usize, u64), Arc<SeriesTable>>>;
    static TABLES: OnceLock<TableCache> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().unwrap();
    guard
        .entry((m, nu.to_bits()))
        .or_insert_with(|| Arc::new(SeriesTable::new(m, nu)))
        .clone()
}

struct ProfileState {
    /// pows[slot][e] = normalized_eigenvalue[slot]^e
    pows: Vec<Vec<f64>>,
    /// layers[k][i] = C_kappa_i(normalized eigs) over weight-k partitions;
    /// every entry lies in [0, 1] because the normalized trace is 1.
    layers: Vec<Arc<Vec<f64>>>,
}

/// Zonal polynomial values of one sample matrix, extended degree by degree as
/// series evaluations demand them. Building the profile once per matrix is
/// what makes an n x n kernel Gram cost O(n^2) rather than O(n^2) full series
/// recomputations per pair.
///
/// Values are stored for the trace-normalized eigenvalues; the trace is kept
/// separately and re-enters through the scalar layer factor.
pub struct ZonalProfile {
    normalized: Vec<f64>,
    trace: f64,
    state: RwLock<ProfileState>,
}

impl ZonalProfile {
    /// Build a profile from nonnegative eigenvalues.
    pub fn new(eigenvalues: &[f64]) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Dimension("eigenvalue list must be nonempty".into()));
        }
        let scale = eigenvalues.iter().fold(1.0f64, |m, &e| m.max(e.abs()));
        let mut eigs = Vec::with_capacity(eigenvalues.len());
        for &e in eigenvalues {
            if !e.is_finite() {
                return Err(Error::Domain(format!("eigenvalue {e} is not finite")));
            }
            if e < -1e-9 * scale {
                return Err(Error::Domain(format!(
                    "eigenvalue {e} is negative beyond tolerance"
                )));
            }
            eigs.push(e.max(0.0));
        }
        let trace: f64 = eigs.iter().sum();
        let normalized = if trace > 0.0 {
            eigs.iter().map(|&e| e / trace).collect()
        } else {
            vec![0.0; eigs.len()]
        };
        Ok(Self {
            normalized,
            trace,
            state: RwLock::new(ProfileState {
                pows: Vec::new(),
                layers: Vec::new(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.normalized.len()
    }

    /// Sum of the eigenvalues.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    fn layer(&self, table: &SeriesTable, k: usize) -> Arc<Vec<f64>> {
        {
            let read = self.state.read().unwrap();
            if k < read.layers.len() {
                return read.layers[k].clone();
            }
        }
        let mut write = self.state.write().unwrap();
        while write.layers.len() <= k {
            let deg = write.layers.len();
            if write.pows.is_empty() {
                write.pows = eigenvalue_powers(&self.normalized, deg);
            } else {
                for (slot, row) in write.pows.iter_mut().enumerate() {
                    while row.len() <= deg {
                        let v = row[row.len() - 1] * self.normalized[slot];
                        row.push(v);
                    }
                }
            }
            let values = table
                .zonal()
                .degree(deg)
                .evaluate_all(self.normalized.len(), &write.pows);
            write.layers.push(Arc::new(values));
        }
        write.layers[k].clone()
    }
}

/// Per-degree sums of the series together with a non-convergence flag.
#[derive(Clone, Debug)]
pub struct LayerSums {
    /// `layers[k]` = contribution of all weight-k partitions; each is >= 0.
    /// Entries may overflow to infinity for extreme traces even though
    /// `ln_total` stays finite.
    pub layers: Vec<f64>,
    /// True when the degree cap was hit (or the coefficient tables left f64
    /// range) before the quiet criterion was met.
    pub truncated: bool,
    /// Natural log of the accumulated series value, tracked in shifted form
    /// so that kernels over very large traces remain computable.
    pub ln_total: f64,
}

impl LayerSums {
    pub fn total(&self) -> f64 {
        self.ln_total.exp()
    }
}

/// Value of the series together with its truncation flag.
#[derive(Clone, Copy, Debug)]
pub struct BesselValue {
    pub value: f64,
    pub truncated: bool,
}

/// Accumulate layers for a pair of profiles under the given policy.
///
/// The per-degree scalar factor is carried in log space and the running
/// total in shifted (streaming log-sum-exp) form: heavy-tailed inputs can
/// push the raw series far beyond f64 range while the kernel
/// etr(-x-y) J_nu(-x, y) is still a perfectly ordinary number.
pub(crate) fn layer_sums_profiles(
    table: &SeriesTable,
    px: &ZonalProfile,
    py: &ZonalProfile,
    policy: &TruncationPolicy,
) -> LayerSums {
    let ln_trace_product = px.trace().ln() + py.trace().ln(); // -inf on zero trace
    let base = table.base();
    let mut ln_scalar = 0.0; // ln[(tr X tr Y)^k / (k! (a)_k)]
    let mut layers = Vec::new();
    // running total as exp(shift) * acc with acc in [1, ...)
    let mut shift = f64::NEG_INFINITY;
    let mut acc = 0.0f64;
    let mut quiet = 0;
    for k in 0..=policy.max_degree {
        if k > 0 {
            ln_scalar += ln_trace_product - (k as f64 * (base + (k as f64 - 1.0))).ln();
        }
        let r = table.ratios(k);
        let zx = px.layer(table, k);
        let zy = py.layer(table, k);
        // ri * (xi * yi): grouping the two zonal values first keeps the
        // kernel bit-symmetric in its arguments.
        let structural: f64 = r
            .iter()
            .zip(zx.iter())
            .zip(zy.iter())
            .map(|((ri, xi), yi)| ri * (xi * yi))
            .sum();
        if !structural.is_finite() {
            // coefficient tables themselves left f64 range at this degree
            layers.push(f64::INFINITY);
            return LayerSums {
                layers,
                truncated: true,
                ln_total: shift + acc.ln(),
            };
        }
        let ln_layer = ln_scalar + structural.ln();
        layers.push(ln_layer.exp());
        if ln_layer > shift {
            acc = acc * (shift - ln_layer).exp() + 1.0;
            shift = ln_layer;
        } else {
            acc += (ln_layer - shift).exp();
        }
        // quiet when layer <= rel_tol * running total
        if ln_layer <= policy.rel_tol.ln() + shift + acc.ln() {
            quiet += 1;
            if quiet >= policy.consecutive_quiet_layers {
                return LayerSums {
                    layers,
                    truncated: false,
                    ln_total: shift + acc.ln(),
                };
            }
        } else {
            quiet = 0;
        }
    }
    LayerSums {
        layers,
        truncated: true,
        ln_total: shift + acc.ln(),
    }
}

fn checked_pair(nu: f64, eigs_x: &[f64], eigs_y: &[f64]) -> Result<(ZonalProfile, ZonalProfile)> {
    if eigs_x.len() != eigs_y.len() {
        return Err(Error::Dimension(format!(
            "eigenvalue lists have lengths {} and {}",
            eigs_x.len(),
            eigs_y.len()
        )));
    }
    BesselOrder(nu).check_for_dim(eigs_x.len())?;
    Ok((ZonalProfile::new(eigs_x)?, ZonalProfile::new(eigs_y)?))
}

/// Per-degree layer sums of the series for the two eigenvalue lists.
pub fn bessel_layer_sums(
    nu: f64,
    eigs_x: &[f64],
    eigs_y: &[f64],
    policy: &TruncationPolicy,
) -> Result<LayerSums> {
    policy.validate()?;
    let (px, py) = checked_pair(nu, eigs_x, eigs_y)?;
    let table = series_table(eigs_x.len(), nu);
    Ok(layer_sums_profiles(&table, &px, &py, policy))
}

/// The two-matrix Bessel value J_nu(-S, T), with S and T supplied through the
/// eigenvalues of the underlying positive semidefinite matrices (the sign of
/// the negated argument cancels inside the series).
///
/// The value itself can overflow to infinity for very large traces (it grows
/// like exp(2 sqrt(tr S tr T))); the kernel in the `kernel` module combines
/// `ln_total` with the exponential prefactor instead and stays finite.
pub fn j_two_matrix(
    nu: f64,
    s_eigs: &[f64],
    t_eigs: &[f64],
    policy: &TruncationPolicy,
) -> Result<BesselValue> {
    let sums = bessel_layer_sums(nu, s_eigs, t_eigs, policy)?;
    Ok(BesselValue {
        value: sums.total(),
        truncated: sums.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::zonal::factorial;
    use approx::assert_relative_eq;

    /// Independent scalar oracle: Gamma(nu+1) (st)^(-nu/2) I_nu(2 sqrt(st))
    /// through the ascending series of the modified Bessel function.
    fn scalar_oracle(nu: f64, s: f64, t: f64) -> f64 {
        let x = s * t;
        let mut term = 1.0; // k = 0 term of sum x^k / (k! (nu+1)_k)
        let mut total = term;
        for k in 1..200 {
            let kf = k as f64;
            term *= x / (kf * (nu + kf));
            total += term;
            if term < 1e-17 * total {
                break;
            }
        }
        total
    }

    #[test]
    fn m1_layers_match_closed_form() {
        let sums = bessel_layer_sums(1.0, &[1.0], &[1.0], &TruncationPolicy::default()).unwrap();
        assert!(!sums.truncated);
        for (k, &layer) in sums.layers.iter().enumerate() {
            let expected = 1.0 / (factorial(k) * factorial(k + 1));
            assert_relative_eq!(layer, expected, max_relative = 1e-12);
        }
        assert_relative_eq!(sums.total(), 1.590636854637329, max_relative = 1e-10);
    }

    #[test]
    fn zero_argument_kills_all_higher_layers() {
        let sums = bessel_layer_sums(1.0, &[0.0], &[0.7], &TruncationPolicy::default()).unwrap();
        assert!(!sums.truncated);
        assert_eq!(sums.layers[0], 1.0);
        assert!(sums.layers[1..].iter().all(|&l| l == 0.0));
        let v = j_two_matrix(2.5, &[0.0], &[3.0], &TruncationPolicy::default()).unwrap();
        assert_relative_eq!(v.value, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn m1_matches_scalar_oracle_over_grid() {
        let mut rng = crate::seeding::stream(11, &[]);
        use rand::Rng;
        for &nu in &[0.5, 1.0, 2.0] {
            for _ in 0..200 {
                let s: f64 = rng.random_range(1e-3..10.0);
                let t: f64 = rng.random_range(1e-3..10.0);
                let v = j_two_matrix(nu, &[s], &[t], &TruncationPolicy::default()).unwrap();
                assert!(!v.truncated);
                assert_relative_eq!(v.value, scalar_oracle(nu, s, t), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn layers_are_nonnegative_and_value_positive() {
        let sums =
            bessel_layer_sums(1.0, &[1.3, 0.2], &[2.1, 0.9], &TruncationPolicy::default()).unwrap();
        assert!(!sums.truncated);
        assert!(sums.layers.iter().all(|&l| l >= 0.0));
        assert!(sums.total() > 0.0);
    }

    #[test]
    fn rank_deficient_arguments_converge() {
        let sums =
            bessel_layer_sums(1.0, &[1.0, 0.0], &[1.0, 0.0], &TruncationPolicy::default()).unwrap();
        assert!(!sums.truncated);
        assert!(sums.total().is_finite());
        assert!(sums.total() > 1.0);
    }

    #[test]
    fn degree_cap_raises_truncation_flag() {
        let policy = TruncationPolicy {
            max_degree: 1,
            ..TruncationPolicy::default()
        };
        let sums = bessel_layer_sums(1.0, &[1.0], &[1.0], &policy).unwrap();
        assert!(sums.truncated);
        assert_eq!(sums.layers.len(), 2);
    }

    #[test]
    fn order_bound_enforced() {
        // m = 3 needs nu > 1/2
        assert!(j_two_matrix(0.5, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &TruncationPolicy::default()).is_err());
        assert!(j_two_matrix(0.6, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &TruncationPolicy::default()).is_ok());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(bessel_layer_sums(1.0, &[1.0], &[1.0, 2.0], &TruncationPolicy::default()).is_err());
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        assert!(ZonalProfile::new(&[1.0, -0.5]).is_err());
        // tiny negatives from eigensolver noise are clamped
        let p = ZonalProfile::new(&[1.0, -1e-14]).unwrap();
        assert_eq!(p.dim(), 2);
    }
}
