//! Non-increasing rearrangements and best k-term approximation errors.
//!
//! Indexing: `Rearrangement::value(i)` is zero-based, so the (K+1)-th largest
//! magnitude, written r(x)_{K+1} in one-based notation, is `value(K)`.

use crate::linalg::RealVector;

/// Absolute values of a vector sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Rearrangement {
    values: Vec<f64>,
}

impl Rearrangement {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Zero-based access; indices past the end read as 0.
    pub fn value(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorted absolute values, descending; ties keep original index order.
pub fn rearrangement(z: &[f64]) -> Rearrangement {
    let mut values: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    // sort_by is stable
    values.sort_by(|a, b| b.total_cmp(a));
    Rearrangement { values }
}

/// Indices of `z` ordered by decreasing magnitude, ties by index.
pub fn magnitude_order(z: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()));
    idx
}

/// Σ_{ν > k} r(z)_ν^τ: the ℓ_τ^τ error of the best k-term approximation.
pub fn sigma_k(z: &[f64], k: usize, tau: f64) -> f64 {
    let r = rearrangement(z);
    r.values.iter().skip(k).map(|v| pow_tau(*v, tau)).sum()
}

/// Smallest k with r(z)_{k+1} ≤ threshold.
pub fn sparsity_width(z: &[f64], threshold: f64) -> usize {
    z.iter().filter(|v| v.abs() > threshold).count()
}

/// Σ |z_i|^τ.
pub fn lp_tau_sum(z: &[f64], tau: f64) -> f64 {
    z.iter().map(|v| pow_tau(v.abs(), tau)).sum()
}

/// Σ |u_i - v_i|^τ.
pub fn lp_tau_distance(u: &RealVector, v: &RealVector, tau: f64) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| pow_tau((a - b).abs(), tau)).sum()
}

pub fn l1_distance(u: &RealVector, v: &RealVector) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| (a - b).abs()).sum()
}

/// `t^τ` for `t ≥ 0`, exact at τ = 1.
#[inline]
pub fn pow_tau(t: f64, tau: f64) -> f64 {
    if tau == 1.0 {
        t
    } else if t == 0.0 {
        0.0
    } else {
        t.powf(tau)
    }
}
