//! Special functions behind the kernel: partition combinatorics, the
//! multivariate gamma function, generalized Pochhammer symbols, zonal
//! polynomials, and the truncated two-matrix Bessel series.

mod bessel;
mod partition;
mod zonal;

pub use bessel::{
    bessel_layer_sums, j_two_matrix, series_table, BesselOrder, BesselValue, LayerSums,
    SeriesTable, TruncationPolicy, ZonalProfile,
};
pub use partition::{partitions_of_degree, Partition};
pub use zonal::{zonal_c, zonal_table, DegreeTable, ZonalTable};

pub(crate) use bessel::layer_sums_profiles;

use crate::error::{Error, Result};

/// Multivariate gamma function
/// Gamma_m(a) = pi^(m(m-1)/4) prod_{i=1}^m Gamma(a - (i-1)/2).
///
/// Defined for a > (m-1)/2; anything at or below that bound is a domain
/// error.
pub fn mv_gamma(a: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("dimension m must be positive".into()));
    }
    let bound = (m as f64 - 1.0) / 2.0;
    if !a.is_finite() || a <= bound {
        return Err(Error::Domain(format!(
            "mv_gamma requires a > (m-1)/2 = {bound}, got a = {a}"
        )));
    }
    let mut out = std::f64::consts::PI.powf(m as f64 * (m as f64 - 1.0) / 4.0);
    for i in 0..m {
        out *= statrs::function::gamma::gamma(a - i as f64 / 2.0);
    }
    Ok(out)
}

/// Rising factorial x (x+1) ... (x+k-1).
fn rising_factorial(x: f64, k: u32) -> f64 {
    let mut out = 1.0;
    for j in 0..k {
        out *= x + f64::from(j);
    }
    out
}

/// Generalized Pochhammer symbol
/// (a)_kappa = prod_i (a - (i-1)/2)_{kappa_i}, 1-based i.
///
/// Zero is a legal value; guarding divisions is the caller's concern.
pub fn gen_pochhammer(a: f64, kappa: &Partition) -> f64 {
    kappa
        .parts()
        .iter()
        .enumerate()
        .map(|(i, &ki)| rising_factorial(a - i as f64 / 2.0, ki))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mv_gamma_reduces_to_scalar_gamma() {
        // Gamma(2.5) = (3/2)(1/2) sqrt(pi)
        let expected = 0.75 * std::f64::consts::PI.sqrt();
        assert_relative_eq!(mv_gamma(2.5, 1).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(mv_gamma(2.5, 1).unwrap(), 1.329340388179137, max_relative = 1e-10);
        for a in [0.7, 1.3, 4.9] {
            assert_relative_eq!(
                mv_gamma(a, 1).unwrap(),
                statrs::function::gamma::gamma(a),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn mv_gamma_dimension_two_product() {
        // Gamma_2(1.5) = sqrt(pi) Gamma(1.5) Gamma(1) = pi/2
        assert_relative_eq!(
            mv_gamma(1.5, 2).unwrap(),
            std::f64::consts::FRAC_PI_2,
            max_relative = 1e-14
        );
        // Gamma_2(1) = sqrt(pi) Gamma(1) Gamma(0.5) = pi
        assert_relative_eq!(mv_gamma(1.0, 2).unwrap(), std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn mv_gamma_domain_bound() {
        assert!(mv_gamma(0.4, 2).is_err());
        assert!(mv_gamma(0.5, 2).is_err());
        assert!(mv_gamma(0.51, 2).is_ok());
    }

    #[test]
    fn pochhammer_values() {
        let k3 = Partition::new(vec![3]).unwrap();
        assert_relative_eq!(gen_pochhammer(2.0, &k3), 24.0, max_relative = 1e-14);

        let k21 = Partition::new(vec![2, 1]).unwrap();
        assert_relative_eq!(gen_pochhammer(2.0, &k21), 9.0, max_relative = 1e-14);

        assert_eq!(gen_pochhammer(2.0, &Partition::empty()), 1.0);

        // zero is legal: (0.5)_2 * (0)_1 = 0
        assert_eq!(gen_pochhammer(0.5, &k21), 0.0);
    }

    #[test]
    fn pochhammer_matches_scalar_on_single_row() {
        let k5 = Partition::new(vec![5]).unwrap();
        assert_relative_eq!(
            gen_pochhammer(1.75, &k5),
            1.75 * 2.75 * 3.75 * 4.75 * 5.75,
            max_relative = 1e-14
        );
    }
}
