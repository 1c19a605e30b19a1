//! Integer partitions indexing the zonal-polynomial series.

use crate::error::{Error, Result};

/// A weakly decreasing list of positive integers.
///
/// Partitions index the terms of the matrix Bessel series; a partition with
/// more parts than the matrix dimension contributes nothing there.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Build a partition, validating that parts are weakly decreasing and positive.
    pub fn new(parts: Vec<u32>) -> Result<Self> {
        for w in parts.windows(2) {
            if w[0] < w[1] {
                return Err(Error::InvalidInput(format!(
                    "partition parts must be weakly decreasing, got {parts:?}"
                )));
            }
        }
        if parts.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "partition parts must be positive, got {parts:?}"
            )));
        }
        Ok(Self { parts })
    }

    /// The empty partition (the single partition of weight zero).
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Sum of the parts.
    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// Number of parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part of the conjugate partition at 1-based column `col`:
    /// the number of parts that are >= col.
    pub(crate) fn conjugate_part(&self, col: u32) -> u32 {
        self.parts.iter().filter(|&&p| p >= col).count() as u32
    }

    /// The eigenvalue index rho(kappa) = sum_i kappa_i (kappa_i - i), 1-based i.
    /// Strictly monotone along the dominance order, which keeps the
    /// coefficient recurrence free of zero divisors.
    pub(crate) fn rho(&self) -> i64 {
        self.parts
            .iter()
            .enumerate()
            .map(|(i, &p)| p as i64 * (p as i64 - (i as i64 + 1)))
            .sum()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of weight `k` with at most `max_parts` parts, in descending
/// lexicographic order. This order is a linear extension of the dominance
/// order, which the zonal coefficient recurrence relies on.
pub fn partitions_of_degree(k: usize, max_parts: usize) -> Vec<Partition> {
    fn rec(remaining: u32, max_part: u32, slots: usize, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition { parts: current.clone() });
            return;
        }
        if slots == 0 {
            return;
        }
        let hi = remaining.min(max_part);
        // Smallest feasible leading part: the remaining slots must absorb the rest.
        let lo = remaining.div_ceil(slots as u32);
        if lo > hi {
            return;
        }
        for p in (lo..=hi).rev() {
            current.push(p);
            rec(remaining - p, p, slots - 1, current, out);
            current.pop();
        }
    }

    let mut out = Vec::new();
    let mut current = Vec::new();
    rec(k as u32, k as u32, max_parts, &mut current, &mut out);
    out
}
