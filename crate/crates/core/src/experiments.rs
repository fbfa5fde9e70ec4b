//! Seeded instance generation and the experiment drivers: single-instance
//! convergence traces, phase-transition tables and noisy-sparse studies.
//!
//! All randomness comes from ChaCha20 streams whose 64-bit seeds are derived
//! from the master seed with a SplitMix64 mixing chain, so every trial can be
//! regenerated from `(master_seed, k, method, trial_index)` alone.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::irls::{irls_run_observed, rate_diagnostics, IrlsConfig, IrlsError, IterateState, RateRow, RecoveryResult, Termination};
use crate::linalg::{LinalgError, RealVector, SensingMatrix};
use crate::sparsity::{l1_distance, rearrangement, sigma_k};

/// Identity of the random stream construction, echoed into outputs.
pub const RNG_ID: &str = "chacha20+splitmix64/v1";

const MATRIX_TAG: u64 = 0x6d61_7472_6978; // "matrix"
const VECTOR_TAG: u64 = 0x7665_6374_6f72; // "vector"

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Irls(#[from] IrlsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a key path into a stream seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// m x N matrix with i.i.d. N(0, 1/m) entries, filled row by row.
pub fn gen_gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<SensingMatrix, LinalgError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive std dev");
    let entries: Vec<f64> = (0..m * n).map(|_| dist.sample(&mut rng)).collect();
    SensingMatrix::from_row_major(m, n, &entries)
}

/// k-sparse vector with a uniformly random support and standard normal
/// nonzeros. With `gap_ratio = Some(c)` (and 0 < k < N) every off-support
/// entry receives Gaussian noise rescaled so that `r(z)_k = c · σ_k(z)_1`.
pub fn gen_sparse_vector(n: usize, k: usize, seed: u64, gap_ratio: Option<f64>) -> RealVector {
    assert!(k <= n, "k = {k} exceeds N = {n}");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut support = sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut z = RealVector::zeros(n);
    for &j in &support {
        z[j] = StandardNormal.sample(&mut rng);
    }
    if let Some(c) = gap_ratio {
        if k > 0 && k < n {
            let r_k = support.iter().map(|&j| z[j].abs()).fold(f64::INFINITY, f64::min);
            let mut on = vec![false; n];
            for &j in &support {
                on[j] = true;
            }
            let noise: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mass: f64 = (0..n).filter(|&j| !on[j]).map(|j| noise[j].abs()).sum();
            let scale = r_k / c / mass;
            for j in (0..n).filter(|&j| !on[j]) {
                z[j] = noise[j] * scale;
            }
        }
    }
    z
}

/// How the sparsity order K of the ε update is chosen per instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KPolicy {
    EqualsPlantedK,
    Heuristic,
    Explicit(usize),
}

impl KPolicy {
    pub fn resolve(self, m: usize, n: usize, planted_k: usize) -> usize {
        let k = match self {
            KPolicy::EqualsPlantedK => planted_k,
            KPolicy::Heuristic => IrlsConfig::heuristic_k(m, n),
            KPolicy::Explicit(k) => k,
        };
        k.clamp(1, n - 1)
    }
}

/// Whether phase-transition trials share one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MatrixPolicy {
    #[default]
    OncePerTable,
    PerTrial,
}

fn default_warmstart() -> usize {
    crate::irls::DEFAULT_WARMSTART
}

fn default_max_iters() -> usize {
    crate::irls::DEFAULT_MAX_ITERS
}

fn default_eps_floor() -> f64 {
    crate::irls::DEFAULT_EPS_FLOOR
}

/// Experiment description; field names match the JSON config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub tau_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub success_tol: f64,
    #[serde(rename = "K_policy")]
    pub k_policy: KPolicy,
    #[serde(default)]
    pub gap_ratio: Option<f64>,
    /// Sparsity levels for phase tables; defaults to `[k]`.
    #[serde(default)]
    pub k_list: Option<Vec<usize>>,
    #[serde(default = "default_warmstart")]
    pub warmstart_iters: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_eps_floor")]
    pub eps_floor: f64,
    #[serde(default)]
    pub matrix_policy: MatrixPolicy,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |s: String| Err(ExperimentError::InvalidConfig(s));
        if !(self.m < self.n) {
            return bad(format!("need m < N, got m = {}, N = {}", self.m, self.n));
        }
        for &k in self.k_list.as_deref().unwrap_or(&[self.k]) {
            if k > self.m {
                return bad(format!("need k <= m, got k = {k}, m = {}", self.m));
            }
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.tau_list.is_empty() || self.tau_list.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return bad("tau_list must be non-empty with entries in (0, 1]".into());
        }
        if !(self.success_tol > 0.0) {
            return bad("success_tol must be positive".into());
        }
        if let Some(c) = self.gap_ratio {
            if !(c > 0.0) {
                return bad("gap_ratio must be positive".into());
            }
        }
        Ok(())
    }

    /// Solver configuration for one method at planted sparsity `k`.
    pub fn irls_config(&self, tau: f64, warmstart: usize, k: usize) -> IrlsConfig {
        IrlsConfig {
            k: self.k_policy.resolve(self.m, self.n, k),
            tau,
            warmstart_iters: if tau < 1.0 { warmstart } else { 0 },
            max_iters: self.max_iters,
            eps_floor: self.eps_floor,
            ..IrlsConfig::l1(1)
        }
    }

    pub fn matrix_seed(&self) -> u64 {
        derive_seed(self.master_seed, &[MATRIX_TAG])
    }

    pub fn vector_seed(&self) -> u64 {
        derive_seed(self.master_seed, &[VECTOR_TAG, self.k as u64])
    }
}

/// Label for a method in phase tables.
pub fn method_tag(tau: f64) -> String {
    if tau == 1.0 {
        "tau=1".to_string()
    } else {
        format!("hybrid_tau={tau}")
    }
}

/// Result of one single-instance convergence run.
#[derive(Debug, Clone)]
pub struct TraceRun {
    pub phi: SensingMatrix,
    pub x_ref: RealVector,
    pub y: RealVector,
    pub result: RecoveryResult,
    pub rates: Vec<RateRow>,
    pub iterates: Vec<RealVector>,
}

/// Runs one instance from `cfg` (matrix and planted vector from the master
/// seed) at exponent `tau` with `warmstart` leading ℓ_1 iterations.
pub fn run_trace(cfg: &ExperimentConfig, tau: f64, warmstart: usize) -> Result<TraceRun, ExperimentError> {
    cfg.validate()?;
    let phi = gen_gaussian_matrix(cfg.m, cfg.n, cfg.matrix_seed())?;
    let x_ref = gen_sparse_vector(cfg.n, cfg.k, cfg.vector_seed(), cfg.gap_ratio);
    let irls_cfg = cfg.irls_config(tau, warmstart, cfg.k);
    run_trace_on(phi, x_ref, &irls_cfg)
}

/// Same as [`run_trace`] on a caller-supplied instance.
pub fn run_trace_on(phi: SensingMatrix, x_ref: RealVector, irls_cfg: &IrlsConfig) -> Result<TraceRun, ExperimentError> {
    let y = phi.apply(&x_ref);
    let mut iterates = Vec::new();
    let result = irls_run_observed(&phi, &y, irls_cfg, Some(&x_ref), |_: &IterateState, next: &IterateState| {
        iterates.push(next.x.clone())
    })?;
    let rates = rate_diagnostics(&result.trace, &x_ref, irls_cfg.tau)?;
    Ok(TraceRun {
        phi,
        x_ref,
        y,
        result,
        rates,
        iterates,
    })
}

/// Outcome of one recovery attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub seed: u64,
    pub success: bool,
    pub rel_error_l1: f64,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub k: usize,
    pub method: String,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionTable {
    pub rng: String,
    pub rows: Vec<PhaseRow>,
}

impl PhaseTransitionTable {
    pub fn row(&self, k: usize, method: &str) -> Option<&PhaseRow> {
        self.rows.iter().find(|r| r.k == k && r.method == method)
    }
}

fn method_key(tau: f64) -> u64 {
    tau.to_bits()
}

/// Seed of the planted vector for one trial.
pub fn trial_seed(master: u64, k: usize, tau: f64, trial: usize) -> u64 {
    derive_seed(master, &[VECTOR_TAG, k as u64, method_key(tau), trial as u64])
}

fn trial_matrix_seed(master: u64, k: usize, tau: f64, trial: usize) -> u64 {
    derive_seed(master, &[MATRIX_TAG, k as u64, method_key(tau), trial as u64])
}

/// Runs a single `(k, method, trial)` cell entry; reproducible in isolation.
pub fn run_trial(cfg: &ExperimentConfig, shared: Option<&SensingMatrix>, k: usize, tau: f64, trial: usize) -> Result<TrialRecord, ExperimentError> {
    let owned;
    let phi = match (cfg.matrix_policy, shared) {
        (MatrixPolicy::OncePerTable, Some(p)) => p,
        (MatrixPolicy::OncePerTable, None) => {
            owned = gen_gaussian_matrix(cfg.m, cfg.n, cfg.matrix_seed())?;
            &owned
        }
        (MatrixPolicy::PerTrial, _) => {
            owned = gen_gaussian_matrix(cfg.m, cfg.n, trial_matrix_seed(cfg.master_seed, k, tau, trial))?;
            &owned
        }
    };
    let seed = trial_seed(cfg.master_seed, k, tau, trial);
    let x = gen_sparse_vector(cfg.n, k, seed, None);
    let y = phi.apply(&x);
    let irls_cfg = cfg.irls_config(tau, cfg.warmstart_iters, k);
    let result = irls_run_observed(phi, &y, &irls_cfg, None, |_: &IterateState, _: &IterateState| {})?;
    let err = l1_distance(&result.x_final, &x);
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    let rel_error_l1 = if norm > 0.0 { err / norm } else { err };
    Ok(TrialRecord {
        trial_index: trial,
        seed,
        success: rel_error_l1 <= cfg.success_tol,
        rel_error_l1,
        iterations: result.iterations(),
        termination: result.termination,
    })
}

/// Success rates per (k, method) cell; trials run in parallel.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<PhaseTransitionTable, ExperimentError> {
    cfg.validate()?;
    let shared = match cfg.matrix_policy {
        MatrixPolicy::OncePerTable => Some(gen_gaussian_matrix(cfg.m, cfg.n, cfg.matrix_seed())?),
        MatrixPolicy::PerTrial => None,
    };
    let ks = cfg.k_list.clone().unwrap_or_else(|| vec![cfg.k]);
    let mut rows = Vec::new();
    for &k in &ks {
        for &tau in &cfg.tau_list {
            let records: Result<Vec<TrialRecord>, ExperimentError> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, shared.as_ref(), k, tau, t))
                .collect();
            let records = records?;
            let successes = records.iter().filter(|r| r.success).count();
            let total_iters: usize = records.iter().map(|r| r.iterations).sum();
            rows.push(PhaseRow {
                k,
                method: method_tag(tau),
                trials: cfg.trials,
                successes,
                success_rate: successes as f64 / cfg.trials as f64,
                mean_iters: total_iters as f64 / cfg.trials as f64,
            });
        }
    }
    Ok(PhaseTransitionTable {
        rng: RNG_ID.to_string(),
        rows,
    })
}

/// Error sequences of a run on an approximately sparse instance.
#[derive(Debug, Clone)]
pub struct NoisyStudy {
    pub run: TraceRun,
    /// `σ_k(z)_1` of the planted vector.
    pub sigma: f64,
    /// `‖xⁿ - x̄‖_1` with x̄ the final iterate.
    pub error_to_limit: Vec<f64>,
    /// `‖xⁿ - z‖_1`.
    pub error_to_target: Vec<f64>,
}

impl NoisyStudy {
    /// Final distance to the planted vector, in units of σ_k.
    pub fn plateau_ratio(&self) -> f64 {
        self.error_to_target.last().copied().unwrap_or(f64::NAN) / self.sigma
    }

    /// Longest run of consecutive iterations with `E_{n+1} ≤ factor · E_n`
    /// while the distance to the target still exceeds σ_k.
    pub fn longest_contraction(&self, factor: f64) -> usize {
        let (mut best, mut cur) = (0, 0);
        for n in 0..self.error_to_limit.len().saturating_sub(1) {
            let (e0, e1) = (self.error_to_limit[n], self.error_to_limit[n + 1]);
            if e0 > 0.0 && e1 <= factor * e0 && self.error_to_target[n] > self.sigma {
                cur += 1;
                best = best.max(cur);
            } else {
                cur = 0;
            }
        }
        best
    }
}

/// Runs the ℓ_1 iteration on a gap-ratio instance and measures convergence
/// to the limit and to the planted vector.
pub fn run_noisy_study(cfg: &ExperimentConfig) -> Result<NoisyStudy, ExperimentError> {
    if cfg.gap_ratio.is_none() {
        return Err(ExperimentError::InvalidConfig("noisy-sparse study needs gap_ratio".into()));
    }
    let run = run_trace(cfg, 1.0, 0)?;
    let sigma = sigma_k(run.x_ref.as_slice(), cfg.k, 1.0);
    let limit = run.result.x_final.clone();
    let error_to_limit = run.iterates.iter().map(|x| l1_distance(x, &limit)).collect();
    let error_to_target = run.iterates.iter().map(|x| l1_distance(x, &run.x_ref)).collect();
    Ok(NoisyStudy {
        run,
        sigma,
        error_to_limit,
        error_to_target,
    })
}

/// `r(z)_k / σ_k(z)_1`.
pub fn gap_ratio_of(z: &RealVector, k: usize) -> f64 {
    let r = rearrangement(z.as_slice());
    r.value(k - 1) / sigma_k(z.as_slice(), k, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::sparsity_width;

    #[test]
    fn matrices_are_deterministic() {
        let a = gen_gaussian_matrix(5, 9, 42).unwrap();
        let b = gen_gaussian_matrix(5, 9, 42).unwrap();
        let c = gen_gaussian_matrix(5, 9, 43).unwrap();
        assert_eq!(a.row_major(), b.row_major());
        assert_ne!(a.row_major(), c.row_major());
    }

    #[test]
    fn sparse_vector_cases() {
        assert_eq!(gen_sparse_vector(10, 0, 1, None), RealVector::zeros(10));
        let full = gen_sparse_vector(10, 10, 1, None);
        assert_eq!(sparsity_width(full.as_slice(), 0.0), 10);
        let z = gen_sparse_vector(20, 4, 7, None);
        assert_eq!(sparsity_width(z.as_slice(), 0.0), 4);
    }

    #[test]
    fn gap_ratio_is_exact() {
        let z = gen_sparse_vector(12, 3, 5, Some(10.0));
        assert_eq!(sparsity_width(z.as_slice(), 0.0), 12);
        assert!((gap_ratio_of(&z, 3) - 10.0).abs() < 1e-12 * 10.0);
    }

    #[test]
    fn seeds_differ_by_key() {
        let a = trial_seed(1, 5, 1.0, 0);
        assert_ne!(a, trial_seed(1, 5, 0.5, 0));
        assert_ne!(a, trial_seed(1, 6, 1.0, 0));
        assert_ne!(a, trial_seed(1, 5, 1.0, 1));
        assert_ne!(a, trial_seed(2, 5, 1.0, 0));
        assert_eq!(a, trial_seed(1, 5, 1.0, 0));
    }

    #[test]
    fn k_policy_resolution() {
        assert_eq!(KPolicy::EqualsPlantedK.resolve(50, 250, 0), 1);
        assert_eq!(KPolicy::EqualsPlantedK.resolve(50, 250, 7), 7);
        assert_eq!(KPolicy::Heuristic.resolve(50, 250, 7), 15);
        assert_eq!(KPolicy::Explicit(300).resolve(50, 250, 7), 249);
    }
}
