//! Samplers for four families of random SPD matrices, used by power studies
//! and synthetic fixtures.
//!
//! Parametrizations:
//! - `wishart` with shape a and scale Sigma has density proportional to
//!   (det X)^(a-(d+1)/2) etr(-Sigma X); equivalently a standard Wishart with
//!   2a degrees of freedom and scale (2 Sigma)^-1, so `E[X] = a Sigma^-1`.
//! - `inv_wishart` with shape a and scale Sigma is W^-1 for W standard
//!   Wishart with a degrees of freedom and scale Sigma^-1;
//!   `E[X] = Sigma / (a - d - 1)` when a > d + 1.
//! - `cov_uniform` is the sample covariance (mean-centered, n_vec - 1
//!   denominator) of n_vec iid `Uniform[0,1]^d` vectors.
//! - `cov_t` is the sample covariance of n_vec iid multivariate-t vectors
//!   with a degrees of freedom and scale Sigma.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SpdMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Wishart,
    InvWishart,
    CovUniform,
    CovT,
}

/// A distribution over d x d SPD matrices, as parsed from experiment
/// configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    #[serde(rename = "d")]
    pub dim: usize,
    /// Shape parameter a (wishart, inv_wishart, cov_t).
    #[serde(rename = "a", default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    /// Scale matrix Sigma; identity when omitted.
    #[serde(rename = "sigma", default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<Vec<f64>>>,
    /// Vectors per covariance estimate (cov_uniform, cov_t);
    /// defaults to 2(d + 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vec: Option<usize>,
}

impl DistributionSpec {
    pub fn wishart(dim: usize, shape: f64) -> Self {
        Self {
            family: Family::Wishart,
            dim,
            shape: Some(shape),
            scale: None,
            n_vec: None,
        }
    }

    pub fn inv_wishart(dim: usize, shape: f64) -> Self {
        Self {
            family: Family::InvWishart,
            dim,
            shape: Some(shape),
            scale: None,
            n_vec: None,
        }
    }

    pub fn cov_uniform(dim: usize) -> Self {
        Self {
            family: Family::CovUniform,
            dim,
            shape: None,
            scale: None,
            n_vec: None,
        }
    }

    pub fn cov_t(dim: usize, shape: f64) -> Self {
        Self {
            family: Family::CovT,
            dim,
            shape: Some(shape),
            scale: None,
            n_vec: None,
        }
    }

    pub fn with_scale(mut self, sigma: Vec<Vec<f64>>) -> Self {
        self.scale = Some(sigma);
        self
    }

    pub fn with_n_vec(mut self, n_vec: usize) -> Self {
        self.n_vec = Some(n_vec);
        self
    }

    /// Vectors per covariance estimate, applying the 2(d + 1) default.
    pub fn effective_n_vec(&self) -> usize {
        self.n_vec.unwrap_or(2 * (self.dim + 1))
    }

    /// The scale matrix as a dense matrix (identity when omitted).
    pub fn sigma(&self) -> Result<DMatrix<f64>> {
        match &self.scale {
            None => Ok(DMatrix::identity(self.dim, self.dim)),
            Some(rows) => {
                if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::Dimension(format!(
                        "sigma must be {0}x{0} to match d = {0}",
                        self.dim
                    )));
                }
                Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]))
            }
        }
    }

    fn shape_required(&self) -> Result<f64> {
        self.shape.ok_or_else(|| {
            Error::InvalidConfig(format!("family {:?} requires a shape parameter a", self.family))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension d must be positive".into()));
        }
        let d = self.dim as f64;
        let sigma = self.sigma()?;
        let symmetric = (0..self.dim).all(|i| {
            (0..self.dim).all(|j| (sigma[(i, j)] - sigma[(j, i)]).abs() <= 1e-10 * sigma.amax().max(1.0))
        });
        if !symmetric {
            return Err(Error::InvalidConfig("sigma must be symmetric".into()));
        }
        if nalgebra::Cholesky::new(sigma).is_none() {
            return Err(Error::InvalidConfig("sigma must be positive definite".into()));
        }
        match self.family {
            Family::Wishart => {
                let a = self.shape_required()?;
                if a <= (d - 1.0) / 2.0 {
                    return Err(Error::InvalidConfig(format!(
                        "wishart shape a = {a} must exceed (d-1)/2 = {}",
                        (d - 1.0) / 2.0
                    )));
                }
            }
            Family::InvWishart => {
                let a = self.shape_required()?;
                if a <= d - 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "inv_wishart shape a = {a} must exceed d - 1 = {}",
                        d - 1.0
                    )));
                }
            }
            Family::CovT => {
                let a = self.shape_required()?;
                if a <= 0.0 {
                    return Err(Error::InvalidConfig(format!("cov_t shape a = {a} must be positive")));
                }
            }
            Family::CovUniform => {}
        }
        if matches!(self.family, Family::CovUniform | Family::CovT) {
            let n_vec = self.effective_n_vec();
            if n_vec < self.dim + 1 {
                return Err(Error::InvalidConfig(format!(
                    "n_vec = {n_vec} must be at least d + 1 = {} for almost-surely nonsingular sample covariances",
                    self.dim + 1
                )));
            }
        }
        Ok(())
    }

    /// True when the family has a finite mean under its current parameters;
    /// moment-based checks are skipped otherwise.
    pub fn has_finite_mean(&self) -> bool {
        match self.family {
            Family::Wishart | Family::CovUniform => true,
            Family::InvWishart => self.shape.is_some_and(|a| a > self.dim as f64 + 1.0),
            Family::CovT => self.shape.is_some_and(|a| a > 2.0),
        }
    }
}

/// A validated spec with its Cholesky factors precomputed for repeated
/// drawing.
pub struct Sampler {
    spec: DistributionSpec,
    /// wishart: chol((2 Sigma)^-1); inv_wishart: chol(Sigma^-1); cov_t: chol(Sigma)
    factor: Option<DMatrix<f64>>,
}

impl Sampler {
    pub fn new(spec: DistributionSpec) -> Result<Self> {
        spec.validate()?;
        let sigma = spec.sigma()?;
        let factor = match spec.family {
            Family::Wishart => {
                let inv = nalgebra::Cholesky::new(sigma * 2.0)
                    .ok_or_else(|| Error::InvalidConfig("sigma must be positive definite".into()))?
                    .inverse();
                Some(cholesky_lower(&inv)?)
            }
            Family::InvWishart => {
                let inv = nalgebra::Cholesky::new(sigma)
                    .ok_or_else(|| Error::InvalidConfig("sigma must be positive definite".into()))?
                    .inverse();
                Some(cholesky_lower(&inv)?)
            }
            Family::CovT => Some(cholesky_lower(&sigma)?),
            Family::CovUniform => None,
        };
        Ok(Self { spec, factor })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn sample(&self, rng: &mut impl Rng) -> SpdMatrix {
        let d = self.spec.dim;
        let entries = match self.spec.family {
            Family::Wishart => {
                let dof = 2.0 * self.spec.shape.expect("validated");
                standard_wishart(self.factor.as_ref().expect("factor"), dof, rng)
            }
            Family::InvWishart => {
                // invert the triangular Bartlett factor rather than the
                // assembled Wishart draw: near-singular draws (small dof)
                // would make a full Cholesky fragile, while the factor's
                // diagonal is almost surely positive
                let dof = self.spec.shape.expect("validated");
                let f = bartlett_factor(self.factor.as_ref().expect("factor"), dof, rng);
                let g = f
                    .solve_lower_triangular(&DMatrix::identity(d, d))
                    .expect("Bartlett factor has positive diagonal");
                g.transpose() * &g
            }
            Family::CovUniform => {
                let n_vec = self.spec.effective_n_vec();
                let draws = DMatrix::from_fn(n_vec, d, |_, _| rng.random::<f64>());
                sample_covariance(&draws)
            }
            Family::CovT => {
                let a = self.spec.shape.expect("validated");
                let n_vec = self.spec.effective_n_vec();
                let l = self.factor.as_ref().expect("factor");
                let chi = ChiSquared::new(a).expect("validated shape");
                let mut draws = DMatrix::zeros(n_vec, d);
                for r in 0..n_vec {
                    let z = DMatrix::from_fn(d, 1, |_, _| {
                        let v: f64 = StandardNormal.sample(rng);
                        v
                    });
                    let scaled = l * z * (a / chi.sample(rng)).sqrt();
                    for c in 0..d {
                        draws[(r, c)] = scaled[(c, 0)];
                    }
                }
                sample_covariance(&draws)
            }
        };
        let symmetrized = (&entries + entries.transpose()) * 0.5;
        SpdMatrix::new(symmetrized).expect("sampler output is SPD by construction")
    }

    /// Draw a fixed-length sequence.
    pub fn sample_n(&self, n: usize, rng: &mut impl Rng) -> Vec<SpdMatrix> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::Cholesky::new(sym)
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidConfig("matrix must be positive definite".into()))
}

/// Lower-triangular Bartlett factor F with F F' a standard Wishart draw of
/// the given degrees of freedom and scale V = L L'. Fractional degrees of
/// freedom are supported as long as dof > d - 1.
///
/// The diagonal is floored at 1e-120: for shapes close to the d - 1
/// boundary the chi-square factors have nearly zero degrees of freedom and
/// their draws can underflow entirely, which would put the corresponding
/// inverse-Wishart draw outside f64 range. The floor caps those
/// astronomically rare (or astronomically heavy-tailed) events at finite
/// representable values instead of failing.
fn bartlett_factor(l: &DMatrix<f64>, dof: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let d = l.nrows();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
        let chi = ChiSquared::new(dof - i as f64).expect("dof > d - 1 checked by caller");
        a[(i, i)] = chi.sample(rng).sqrt().max(1e-120);
    }
    l * a
}

fn standard_wishart(l: &DMatrix<f64>, dof: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let f = bartlett_factor(l, dof, rng);
    &f * f.transpose()
}

/// Mean-centered sample covariance with the n - 1 denominator; rows are
/// observations.
fn sample_covariance(draws: &DMatrix<f64>) -> DMatrix<f64> {
    let n = draws.nrows();
    let d = draws.ncols();
    let mean: Vec<f64> = (0..d).map(|c| draws.column(c).sum() / n as f64).collect();
    let mut cov = DMatrix::zeros(d, d);
    for r in 0..n {
        for i in 0..d {
            let di = draws[(r, i)] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (draws[(r, j)] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// One draw from the given spec (validating it first). For repeated draws
/// prefer [`Sampler`], which caches the Cholesky factors.
pub fn sample(spec: &DistributionSpec, rng: &mut impl Rng) -> Result<SpdMatrix> {
    Ok(Sampler::new(spec.clone())?.sample(rng))
}

fn expect_family(spec: &DistributionSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::InvalidConfig(format!(
            "expected family {family:?}, got {:?}",
            spec.family
        )));
    }
    Ok(())
}

pub fn sample_wishart(spec: &DistributionSpec, rng: &mut impl Rng) -> Result<SpdMatrix> {
    expect_family(spec, Family::Wishart)?;
    sample(spec, rng)
}

pub fn sample_inv_wishart(spec: &DistributionSpec, rng: &mut impl Rng) -> Result<SpdMatrix> {
    expect_family(spec, Family::InvWishart)?;
    sample(spec, rng)
}

pub fn sample_cov_uniform(spec: &DistributionSpec, rng: &mut impl Rng) -> Result<SpdMatrix> {
    expect_family(spec, Family::CovUniform)?;
    sample(spec, rng)
}

pub fn sample_cov_t(spec: &DistributionSpec, rng: &mut impl Rng) -> Result<SpdMatrix> {
    expect_family(spec, Family::CovT)?;
    sample(spec, rng)
}
