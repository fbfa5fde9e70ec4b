//! Ground-truth oracles and matrix-property checkers.
//!
//! Everything here is brute force: restricted isometry constants by support
//! enumeration, null space constants by vertex enumeration of small
//! polytopes, k-sparse solutions by exhaustive least squares, and ℓ_1
//! minimizers by a simplex solve of the split-variable program.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{null_space_basis, small_kernel, LinalgError, NullSpaceBasis, RealVector, SensingMatrix};
use crate::lp::{solve_standard_form, LpOutcome};
use crate::sparsity::pow_tau;

pub const RIP_BUDGET: u64 = 2_000_000;
pub const SPARSE_BUDGET: u64 = 1_000_000;
pub const MIN_NSP_SAMPLES: usize = 100_000;
/// Exact null space enumeration limits.
pub const EXACT_MAX_NULL_DIM: usize = 4;
pub const EXACT_MAX_N: usize = 16;

const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("enumeration of {count} subsets exceeds budget {budget}")]
    BudgetExceeded { count: u64, budget: u64 },
    #[error("exact enumeration needs N <= {max_n} and null-space dimension <= {max_dim}; got N = {n}, dim = {dim}")]
    DimensionTooLarge { n: usize, dim: usize, max_n: usize, max_dim: usize },
    #[error("exact null space constant is only available for tau = 1 (got {0})")]
    ExactUnavailable(f64),
    #[error("right-hand side is outside the range of the matrix")]
    Infeasible,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyKind {
    #[serde(rename = "RIP")]
    Rip,
    #[serde(rename = "NSP")]
    Nsp,
    TauNSP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ExactEnumeration,
    MonteCarloLowerBound,
}

/// A computed RIP or NSP constant with provenance. Monte Carlo constants are
/// lower bounds on the true value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub kind: PropertyKind,
    pub order: usize,
    /// `null` in JSON when the constant is infinite.
    pub constant: f64,
    pub tau: f64,
    pub method: Method,
    pub samples: usize,
    #[serde(rename = "elapsed_secs", with = "secs")]
    pub elapsed: Duration,
}

impl PropertyReport {
    pub fn summary(&self) -> String {
        let name = match self.kind {
            PropertyKind::Rip => "delta",
            _ => "gamma",
        };
        let method = match self.method {
            Method::ExactEnumeration => "ExactEnumeration".to_string(),
            Method::MonteCarloLowerBound => format!("MonteCarloLowerBound ({} samples)", self.samples),
        };
        format!(
            "{:?} order {} tau {}: {} = {} [{}]",
            self.kind, self.order, self.tau, name, self.constant, method
        )
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let mut c = start;
        loop {
            let count = binomial(n - c - 1, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            c += 1;
        }
        out.push(c);
        start = c + 1;
    }
    out
}

/// Advances to the next k-subset in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in (i + 1)..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Evaluates `f` on every k-subset of `0..n`, in parallel, returning
/// results in lexicographic order.
fn map_combinations<T, F>(n: usize, k: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
{
    let total = binomial(n, k);
    if total == 0 {
        return Vec::new();
    }
    let chunk = 4096u64;
    let chunks = total.div_ceil(chunk);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let start = c * chunk;
            let len = chunk.min(total - start);
            let mut comb = unrank_combination(n, k, start);
            let mut out = Vec::with_capacity(len as usize);
            for i in 0..len {
                out.push(f(&comb));
                if i + 1 < len {
                    next_combination(&mut comb, n);
                }
            }
            out
        })
        .collect()
}

fn check_budget(n: usize, k: usize, budget: u64) -> Result<(), VerifyError> {
    let count = binomial(n, k);
    if count > budget {
        return Err(VerifyError::BudgetExceeded { count, budget });
    }
    Ok(())
}

/// Restricted isometry constant of order `l` in the non-squared form: the
/// smallest δ with `(1-δ)‖z‖ ≤ ‖Φz‖ ≤ (1+δ)‖z‖` on all l-sparse z.
///
/// Equals the max over supports T of `max(σ_max(Φ_T) - 1, 1 - σ_min(Φ_T))`.
/// The squared convention δ' satisfies `1 + δ' = (1 + δ)²` on the upper side.
pub fn rip_constant(phi: &SensingMatrix, l: usize) -> Result<PropertyReport, VerifyError> {
    rip_constant_with_budget(phi, l, RIP_BUDGET)
}

pub fn rip_constant_with_budget(phi: &SensingMatrix, l: usize, budget: u64) -> Result<PropertyReport, VerifyError> {
    if l == 0 || l > phi.rows() {
        return Err(VerifyError::InvalidArgument(format!(
            "RIP order must lie in [1, m = {}], got {l}",
            phi.rows()
        )));
    }
    let n = phi.cols();
    check_budget(n, l, budget)?;
    let start = Instant::now();
    let deltas = map_combinations(n, l, |support| {
        let sv = phi.columns(support).singular_values();
        let smax = sv.iter().copied().fold(0.0_f64, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        (smax - 1.0).max(1.0 - smin)
    });
    let constant = deltas.into_iter().fold(0.0_f64, f64::max);
    Ok(PropertyReport {
        kind: PropertyKind::Rip,
        order: l,
        constant,
        tau: 1.0,
        method: Method::ExactEnumeration,
        samples: 0,
        elapsed: start.elapsed(),
    })
}

/// NSP constant implied by RIP of order `J + J'`: `(1+δ)/(1-δ) · √(J/J')`.
pub fn rip_to_nsp_gamma(delta: f64, j: usize, j_prime: usize) -> f64 {
    (1.0 + delta) / (1.0 - delta) * (j as f64 / j_prime as f64).sqrt()
}

/// How to compute a null space constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NspMethod {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// `Σ of the l largest |η_i|^τ / Σ of the rest`, which is the max over
/// supports |T| ≤ l of the null space ratio for a fixed η.
pub fn concentration_ratio(eta: &[f64], l: usize, tau: f64) -> f64 {
    let mut mags: Vec<f64> = eta.iter().map(|v| pow_tau(v.abs(), tau)).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let l = l.min(mags.len());
    let head: f64 = mags[..l].iter().sum();
    let tail: f64 = mags[l..].iter().sum();
    if head == 0.0 {
        return 0.0;
    }
    // Numerically zero tails mean an l-sparse kernel vector.
    if tail <= 1e-12 * head {
        return f64::INFINITY;
    }
    head / tail
}

/// Candidate extreme directions of `{c : Σ_i |(Bc)_i| ≤ 1}` in kernel
/// coordinates: for every (d-1)-subset S of rows with rank d-1, the unit
/// vector spanning the kernel of `B_S`.
fn kernel_vertex_directions(b: &DMatrix<f64>, rows: &[usize]) -> Vec<RealVector> {
    let d = b.ncols();
    if d == 1 {
        return vec![RealVector::from_element(1, 1.0)];
    }
    let sub = d - 1;
    if rows.len() < sub {
        return Vec::new();
    }
    map_combinations(rows.len(), sub, |pick| {
        let idx: Vec<usize> = pick.iter().map(|&p| rows[p]).collect();
        let k = small_kernel(&b.select_rows(&idx));
        (k.ncols() == 1).then(|| k.column(0).into_owned())
    })
    .into_iter()
    .flatten()
    .collect()
}

fn check_exact_limits(basis: &NullSpaceBasis) -> Result<(), VerifyError> {
    let (n, dim) = (basis.ambient_dim(), basis.dim());
    if dim > EXACT_MAX_NULL_DIM || n > EXACT_MAX_N {
        return Err(VerifyError::DimensionTooLarge {
            n,
            dim,
            max_n: EXACT_MAX_N,
            max_dim: EXACT_MAX_NULL_DIM,
        });
    }
    Ok(())
}

/// Null space constant γ of order `l`: the max over |T| ≤ l and nonzero η
/// in the kernel of `Σ_T |η_i|^τ / Σ_{T^c} |η_i|^τ`.
///
/// Exact mode (τ = 1, small kernels): for a fixed T the ratio is maximized
/// at a vertex of `{c : Σ_{T^c} |(Bc)_i| ≤ 1}`, and each vertex direction
/// annihilates d-1 linearly independent rows of the basis B. Taking the best
/// T for each such direction gives γ exactly. Monte Carlo mode evaluates
/// Gaussian kernel directions plus the projected coordinate axes and reports
/// the largest ratio seen, which is a lower bound.
pub fn nsp_gamma(phi: &SensingMatrix, l: usize, tau: f64, method: NspMethod) -> Result<PropertyReport, VerifyError> {
    let basis = null_space_basis(phi)?;
    nsp_gamma_for_basis(&basis, l, tau, method)
}

pub fn nsp_gamma_for_basis(
    basis: &NullSpaceBasis,
    l: usize,
    tau: f64,
    method: NspMethod,
) -> Result<PropertyReport, VerifyError> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(VerifyError::InvalidArgument(format!("tau must lie in (0, 1], got {tau}")));
    }
    if l == 0 || l >= basis.ambient_dim() {
        return Err(VerifyError::InvalidArgument(format!(
            "NSP order must lie in [1, N-1], got {l}"
        )));
    }
    let kind = if tau == 1.0 { PropertyKind::Nsp } else { PropertyKind::TauNSP };
    let start = Instant::now();
    let b = basis.matrix();
    let (constant, method_tag, samples) = match method {
        NspMethod::Exact => {
            if tau != 1.0 {
                return Err(VerifyError::ExactUnavailable(tau));
            }
            check_exact_limits(basis)?;
            let rows: Vec<usize> = (0..b.nrows()).collect();
            let gamma = kernel_vertex_directions(b, &rows)
                .par_iter()
                .map(|c| concentration_ratio((b * c).as_slice(), l, 1.0))
                .reduce(|| 0.0, f64::max);
            (gamma, Method::ExactEnumeration, 0)
        }
        NspMethod::MonteCarlo { samples, seed } => {
            let samples = samples.max(MIN_NSP_SAMPLES);
            let d = b.ncols();
            let axes = (0..b.nrows())
                .map(|i| concentration_ratio((b * b.row(i).transpose()).as_slice(), l, tau))
                .fold(0.0_f64, f64::max);
            let chunk = 1024;
            let sampled = (0..samples.div_ceil(chunk))
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let count = chunk.min(samples - c * chunk);
                    let mut best = 0.0_f64;
                    for _ in 0..count {
                        let coords = RealVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                        best = best.max(concentration_ratio((b * coords).as_slice(), l, tau));
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            (axes.max(sampled), Method::MonteCarloLowerBound, samples + b.nrows())
        }
    };
    Ok(PropertyReport {
        kind,
        order: l,
        constant,
        tau,
        method: method_tag,
        samples,
        elapsed: start.elapsed(),
    })
}

/// Best k-sparse least-squares fit found by enumerating all supports.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub support: Vec<usize>,
    pub x: RealVector,
    pub residual: f64,
}

/// Exhaustive search over supports |T| = k for the smallest residual
/// `‖Φ_T z - y‖_2`; ties within 1e-10 go to the lexicographically smallest
/// support.
pub fn sparse_oracle(phi: &SensingMatrix, y: &RealVector, k: usize) -> Result<SparseFit, VerifyError> {
    sparse_oracle_with_budget(phi, y, k, SPARSE_BUDGET)
}

pub fn sparse_oracle_with_budget(
    phi: &SensingMatrix,
    y: &RealVector,
    k: usize,
    budget: u64,
) -> Result<SparseFit, VerifyError> {
    let (m, n) = (phi.rows(), phi.cols());
    if y.len() != m {
        return Err(VerifyError::InvalidArgument(format!("rhs has length {}, expected {m}", y.len())));
    }
    if k > n {
        return Err(VerifyError::InvalidArgument(format!("k = {k} exceeds N = {n}")));
    }
    if k == 0 {
        return Ok(SparseFit {
            support: Vec::new(),
            x: RealVector::zeros(n),
            residual: y.norm(),
        });
    }
    check_budget(n, k, budget)?;
    let fit = |support: &[usize]| -> (f64, RealVector) {
        let sub = phi.columns(support);
        let svd = sub.clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
        let coef = svd
            .solve(y, 1e-12 * smax.max(f64::MIN_POSITIVE))
            .expect("U and V were computed");
        let residual = (&sub * &coef - y).norm();
        (residual, coef)
    };
    let residuals = map_combinations(n, k, |s| fit(s).0);
    let best = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let rank = residuals
        .iter()
        .position(|&r| r <= best + TIE_TOL)
        .expect("at least one support");
    let support = unrank_combination(n, k, rank as u64);
    let (residual, coef) = fit(&support);
    let mut x = RealVector::zeros(n);
    for (c, &j) in coef.iter().zip(&support) {
        x[j] = *c;
    }
    Ok(SparseFit { support, x, residual })
}

/// An ℓ_1 minimizer on {z : Φz = y}.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub x: RealVector,
    pub norm: f64,
    /// Best-effort flag: a nonbasic variable had zero reduced cost.
    pub possibly_nonunique: bool,
}

/// Solves `min Σ(u + v)` subject to `Φ(u - v) = y`, `u, v ≥ 0`, and returns
/// `x = u - v`, which is a vertex of the ℓ_1-minimizing face.
pub fn l1_oracle(phi: &SensingMatrix, y: &RealVector) -> Result<L1Solution, VerifyError> {
    let (m, n) = (phi.rows(), phi.cols());
    if y.len() != m {
        return Err(VerifyError::InvalidArgument(format!("rhs has length {}, expected {m}", y.len())));
    }
    let a = phi.as_matrix();
    let mut split = DMatrix::<f64>::zeros(m, 2 * n);
    split.view_mut((0, 0), (m, n)).copy_from(a);
    split.view_mut((0, n), (m, n)).copy_from(&(-a));
    let cost = vec![1.0; 2 * n];
    match solve_standard_form(&split, y.as_slice(), &cost) {
        LpOutcome::Optimal(sol) => {
            let x = RealVector::from_fn(n, |j, _| sol.x[j] - sol.x[n + j]);
            let norm = x.iter().map(|v| v.abs()).sum();
            Ok(L1Solution {
                x,
                norm,
                possibly_nonunique: sol.zero_reduced_cost,
            })
        }
        LpOutcome::Infeasible => Err(VerifyError::Infeasible),
        LpOutcome::Unbounded => unreachable!("ℓ_1 objective is bounded below by zero"),
    }
}

/// Outcome of the ℓ_1 minimality test.
#[derive(Debug, Clone, PartialEq)]
pub enum Minimality {
    Certified,
    /// A kernel direction η with `|Σ_{x_i≠0} sign(x_i) η_i| > Σ_{x_i=0} |η_i|`.
    Violated(RealVector),
    Inconclusive,
}

/// Tests whether `x` has minimal ℓ_1 norm on its affine solution set:
/// `|Σ_{i∈S} sign(x_i) η_i| ≤ Σ_{i∉S} |η_i|` for all kernel vectors η,
/// where S is the set of entries with `|x_i| > zero_tol`.
///
/// Kernels of dimension ≤ 4 are checked exactly on the extreme directions of
/// the polytope `{c : Σ_{i∉S} |(Bc)_i| ≤ 1}`; larger kernels are probed with
/// `samples` random directions and can only be refuted.
pub fn l1_minimality_check(x: &RealVector, basis: &NullSpaceBasis, samples: usize, zero_tol: f64) -> Minimality {
    let b = basis.matrix();
    let d = basis.dim();
    let signs: Vec<f64> = x
        .iter()
        .map(|v| if v.abs() > zero_tol { v.signum() } else { 0.0 })
        .collect();
    let zero_rows: Vec<usize> = (0..x.len()).filter(|&i| signs[i] == 0.0).collect();
    let violation = |coords: &RealVector| -> Option<RealVector> {
        let eta = b * coords;
        let lhs: f64 = eta.iter().zip(&signs).map(|(e, s)| e * s).sum::<f64>().abs();
        let rhs: f64 = zero_rows.iter().map(|&i| eta[i].abs()).sum();
        let scale: f64 = eta.iter().map(|v| v.abs()).sum();
        (lhs > rhs + 1e-9 * scale).then_some(eta)
    };

    if d == 0 {
        return Minimality::Certified;
    }
    if d <= EXACT_MAX_NULL_DIM {
        let b_zero = b.select_rows(&zero_rows);
        let free = small_kernel(&b_zero);
        // Directions invisible to the zero set: the functional must vanish there.
        for col in free.column_iter() {
            if let Some(eta) = violation(&col.into_owned()) {
                return Minimality::Violated(eta);
            }
        }
        let r = d - free.ncols();
        if r == 0 {
            return Minimality::Certified;
        }
        // Extreme directions of the slice orthogonal to `free`: r-1 active
        // zero rows plus orthogonality to `free`.
        let candidates = map_combinations(zero_rows.len(), r - 1, |pick| {
            let mut rows: Vec<RealVector> = pick.iter().map(|&p| b.row(zero_rows[p]).transpose()).collect();
            rows.extend(free.column_iter().map(|c| c.into_owned()));
            let stacked = if rows.is_empty() {
                DMatrix::zeros(0, d)
            } else {
                DMatrix::from_columns(&rows).transpose()
            };
            let k = small_kernel(&stacked);
            (k.ncols() == 1).then(|| k.column(0).into_owned())
        });
        for c in candidates.into_iter().flatten() {
            if let Some(eta) = violation(&c) {
                return Minimality::Violated(eta);
            }
        }
        return Minimality::Certified;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(basis.source_fingerprint());
    for i in 0..b.nrows() {
        if let Some(eta) = violation(&b.row(i).transpose()) {
            return Minimality::Violated(eta);
        }
    }
    for _ in 0..samples {
        let coords = RealVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        if let Some(eta) = violation(&coords) {
            return Minimality::Violated(eta);
        }
    }
    Minimality::Inconclusive
}
