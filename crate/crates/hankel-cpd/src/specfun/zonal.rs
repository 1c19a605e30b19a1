//! Zonal polynomials evaluated through coefficient tables in the monomial
//! symmetric basis.
//!
//! For each degree k and dimension m, the table stores the expansion
//! C_kappa = sum_lambda c[kappa][lambda] m_lambda over partitions of k with
//! at most m parts. Coefficients are produced by the classical second-order
//! differential-operator recurrence: C_kappa is an eigenfunction of
//!
//!   sum_i y_i^2 d^2/dy_i^2 + sum_{i != j} y_i^2/(y_i - y_j) d/dy_i
//!
//! with eigenvalue rho(kappa) + k(m-1), and the operator acts triangularly
//! on monomial symmetric functions with respect to the dominance order.
//! Solving for coefficients top-down gives, for lambda strictly below kappa,
//!
//!   c[kappa][lambda] =
//!       sum_moves (c - d + 2t) * c[kappa][mu] / (rho(kappa) - rho(lambda)),
//!
//! where a move picks two slots of lambda with values c >= d, transfers t in
//! 1..=d from the lower slot to the higher one, and mu is the sorted result.
//! The leading coefficient is 2^k k! over the product of upper hook lengths
//! 2(arm+1) + leg of kappa.
//!
//! All coefficients are nonnegative, so evaluation accumulates without
//! cancellation. The normalization satisfies
//! sum_{kappa of weight k} C_kappa(X) = (tr X)^k.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use super::partition::{partitions_of_degree, Partition};

/// Coefficient table for one degree: every zonal polynomial of that weight,
/// expanded over monomial symmetric functions.
pub struct DegreeTable {
    degree: usize,
    partitions: Vec<Partition>,
    index: HashMap<Vec<u32>, usize>,
    /// coeffs[kappa][lambda]; zero when lambda is not dominated by kappa.
    coeffs: Vec<Vec<f64>>,
    /// C_kappa(I_m) for each kappa, in partition order.
    identity_values: Vec<f64>,
}

impl DegreeTable {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn identity_values(&self) -> &[f64] {
        &self.identity_values
    }

    pub fn partition_index(&self, kappa: &Partition) -> Option<usize> {
        self.index.get(kappa.parts()).copied()
    }

    /// Evaluate every zonal polynomial of this degree at the given
    /// eigenvalues, using a shared table of eigenvalue powers
    /// (`pows[slot][exponent]`).
    pub(crate) fn evaluate_all(&self, m: usize, pows: &[Vec<f64>]) -> Vec<f64> {
        let monos = self.monomial_values(m, pows);
        self.coeffs
            .iter()
            .map(|row| row.iter().zip(&monos).map(|(c, v)| c * v).sum())
            .collect()
    }

    /// Monomial symmetric functions m_lambda at the eigenvalues, one per
    /// partition of this degree.
    fn monomial_values(&self, m: usize, pows: &[Vec<f64>]) -> Vec<f64> {
        let mut exponents = vec![0u32; m];
        self.partitions
            .iter()
            .map(|lambda| {
                exponents.fill(0);
                for (slot, &p) in lambda.parts().iter().enumerate() {
                    exponents[slot] = p;
                }
                // ascending start so next_permutation walks every distinct
                // arrangement exactly once
                exponents.sort_unstable();
                let mut total = 0.0;
                loop {
                    let mut term = 1.0;
                    for (slot, &e) in exponents.iter().enumerate() {
                        term *= pows[slot][e as usize];
                    }
                    total += term;
                    if !next_permutation(&mut exponents) {
                        break;
                    }
                }
                total
            })
            .collect()
    }
}

/// Lazily built stack of degree tables for one matrix dimension.
///
/// Each degree is computed at most once; afterwards the table is read-only
/// and safe to share across threads.
pub struct ZonalTable {
    m: usize,
    degrees: RwLock<Vec<Arc<DegreeTable>>>,
}

impl ZonalTable {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "dimension must be positive");
        Self {
            m,
            degrees: RwLock::new(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// The table for weight-`k` partitions, building it on first use.
    pub fn degree(&self, k: usize) -> Arc<DegreeTable> {
        {
            let read = self.degrees.read().unwrap();
            if k < read.len() {
                return read[k].clone();
            }
        }
        let mut write = self.degrees.write().unwrap();
        while write.len() <= k {
            let next = write.len();
            write.push(Arc::new(build_degree(self.m, next)));
        }
        write[k].clone()
    }
}

/// Shared per-dimension zonal tables.
pub fn zonal_table(m: usize) -> Arc<ZonalTable> {
    static TABLES: OnceLock<Mutex<HashMap<usize, Arc<ZonalTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().unwrap();
    guard.entry(m).or_insert_with(|| Arc::new(ZonalTable::new(m))).clone()
}

/// Value of the zonal polynomial C_kappa at the given eigenvalues.
///
/// Returns zero when kappa has more parts than there are eigenvalues; the
/// result depends only on the multiset of eigenvalues.
pub fn zonal_c(kappa: &Partition, eigenvalues: &[f64]) -> f64 {
    let m = eigenvalues.len();
    assert!(m >= 1, "need at least one eigenvalue");
    if kappa.len() > m {
        return 0.0;
    }
    let k = kappa.weight() as usize;
    let table = zonal_table(m).degree(k);
    let idx = table
        .partition_index(kappa)
        .expect("partition of its own weight is always present");
    let pows = eigenvalue_powers(eigenvalues, k);
    let monos = table.monomial_values(m, &pows);
    table.coeffs[idx].iter().zip(&monos).map(|(c, v)| c * v).sum()
}

/// Powers table `pows[slot][e] = eigenvalues[slot]^e` for e up to `max_exp`.
pub(crate) fn eigenvalue_powers(eigenvalues: &[f64], max_exp: usize) -> Vec<Vec<f64>> {
    eigenvalues
        .iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(max_exp + 1);
            let mut v = 1.0;
            row.push(v);
            for _ in 0..max_exp {
                v *= x;
                row.push(v);
            }
            row
        })
        .collect()
}

fn build_degree(m: usize, k: usize) -> DegreeTable {
    let partitions = partitions_of_degree(k, m);
    let n = partitions.len();
    let index: HashMap<Vec<u32>, usize> = partitions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.parts().to_vec(), i))
        .collect();
    let rho: Vec<i64> = partitions.iter().map(|p| p.rho()).collect();

    let mut coeffs = vec![vec![0.0; n]; n];
    let mut padded = vec![0u32; m];
    let mut moved = vec![0u32; m];
    for a in 0..n {
        coeffs[a][a] = leading_coefficient(&partitions[a]);
        // Descending-lex iteration guarantees every dominance-larger mu has
        // its coefficient ready before lambda needs it.
        for b in (a + 1)..n {
            padded.fill(0);
            for (slot, &p) in partitions[b].parts().iter().enumerate() {
                padded[slot] = p;
            }
            let mut acc = 0.0;
            for p in 0..m {
                for q in (p + 1)..m {
                    let (c, d) = (padded[p], padded[q]);
                    for t in 1..=d {
                        moved.copy_from_slice(&padded);
                        moved[p] = c + t;
                        moved[q] = d - t;
                        moved.sort_unstable_by(|x, y| y.cmp(x));
                        let nz = moved.iter().position(|&v| v == 0).unwrap_or(m);
                        if let Some(&mu) = index.get(&moved[..nz]) {
                            let w = coeffs[a][mu];
                            if w != 0.0 {
                                acc += f64::from(c - d + 2 * t) * w;
                            }
                        }
                    }
                }
            }
            if acc != 0.0 {
                coeffs[a][b] = acc / (rho[a] - rho[b]) as f64;
            }
        }
    }

    let identity_values = coeffs
        .iter()
        .map(|row| {
            row.iter()
                .zip(&partitions)
                .map(|(c, lambda)| c * orbit_count(lambda, m))
                .sum()
        })
        .collect();

    DegreeTable {
        degree: k,
        partitions,
        index,
        coeffs,
        identity_values,
    }
}

/// Leading monomial coefficient of C_kappa: 2^k k! over the product of upper
/// hook lengths 2(arm+1) + leg. The diagram has exactly k cells, so pairing
/// one factor 2j with one hook keeps intermediates in range at high degree.
fn leading_coefficient(kappa: &Partition) -> f64 {
    let mut out = 1.0;
    let mut j = 0.0;
    for (row0, &part) in kappa.parts().iter().enumerate() {
        let row = row0 as u32 + 1;
        for col in 1..=part {
            let arm = part - col;
            let leg = kappa.conjugate_part(col) - row;
            j += 1.0;
            out *= 2.0 * j / f64::from(2 * (arm + 1) + leg);
        }
    }
    out
}

/// Number of distinct permutations of lambda's exponent vector padded with
/// zeros to m slots; equals m_lambda(1, ..., 1).
fn orbit_count(lambda: &Partition, m: usize) -> f64 {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &p in lambda.parts() {
        *counts.entry(p).or_insert(0) += 1;
    }
    *counts.entry(0).or_insert(0) += m - lambda.len();
    let mut denom = 1.0;
    for (_, c) in counts {
        denom *= factorial(c);
    }
    factorial(m) / denom
}

pub(crate) fn factorial(n: usize) -> f64 {
    let mut out = 1.0;
    for i in 2..=n {
        out *= i as f64;
    }
    out
}

/// Advance to the next lexicographic permutation; false once exhausted.
fn next_permutation(xs: &mut [u32]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}
