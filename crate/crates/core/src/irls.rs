//! Iteratively re-weighted least squares for ℓ_1 and ℓ_τ (0 < τ ≤ 1)
//! minimization on the affine set {z : Φz = y}.
//!
//! Each step alternates three minimizations of the surrogate
//! `J_τ(z, w, ε)`: a weighted least-squares solve for `z`, the ε update
//! `ε ← min(ε, r(x)_{K+1} / N)`, and the closed-form optimal weights
//! `w_j = (x_j² + ε²)^{-(2-τ)/2}`. The surrogate is non-increasing along
//! the iteration, which the trace records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{weighted_ls_solve, LinalgError, RealVector, SensingMatrix};
use crate::sparsity::{l1_distance, lp_tau_distance, lp_tau_sum, rearrangement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrlsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trace has no reference errors")]
    MissingReference,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub const DEFAULT_EPS_FLOOR: f64 = 1e-10;
pub const DEFAULT_STEP_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 2000;
pub const DEFAULT_WARMSTART: usize = 10;
/// Version of the serialized [`RecoveryResult`] layout
/// (`schemas/recovery_result.schema.json`).
pub const RESULT_VERSION: u32 = 1;

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    /// Sparsity order used in the ε update.
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: f64,
    /// Leading iterations run with τ = 1 before switching to `tau`.
    pub warmstart_iters: usize,
    pub max_iters: usize,
    /// Floating-point stand-in for ε = 0.
    pub eps_floor: f64,
    /// Relative ℓ_1 step below which the run stops.
    pub step_tol: f64,
}

impl IrlsConfig {
    /// ℓ_1 configuration with default tolerances.
    pub fn l1(k: usize) -> Self {
        Self {
            k,
            tau: 1.0,
            warmstart_iters: 0,
            max_iters: DEFAULT_MAX_ITERS,
            eps_floor: DEFAULT_EPS_FLOOR,
            step_tol: DEFAULT_STEP_TOL,
        }
    }

    /// ℓ_τ configuration; τ < 1 gets the default 10-iteration ℓ_1 warm start.
    pub fn with_tau(k: usize, tau: f64) -> Self {
        Self {
            tau,
            warmstart_iters: if tau < 1.0 { DEFAULT_WARMSTART } else { 0 },
            ..Self::l1(k)
        }
    }

    /// `⌊m / (2 ln(N/m))⌋` clamped to `[1, m-1]`. A scaling heuristic for
    /// Gaussian matrices when no sparsity prior is available.
    pub fn heuristic_k(m: usize, n: usize) -> usize {
        let upper = m.saturating_sub(1).max(1);
        let ratio = (n as f64 / m as f64).ln();
        let raw = if ratio > 0.0 {
            (m as f64 / (2.0 * ratio)).floor()
        } else {
            upper as f64
        };
        (raw.max(1.0) as usize).min(upper)
    }

    /// Exponent used for the weights wⁿ. Weights w⁰ … w^{warmstart-1} are
    /// ℓ_1 weights, so the first `warmstart_iters` solves are ℓ_1 steps.
    pub fn tau_at(&self, n: usize) -> f64 {
        if n < self.warmstart_iters {
            1.0
        } else {
            self.tau
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), IrlsError> {
        let bad = |msg: String| Err(IrlsError::InvalidConfig(msg));
        if self.k == 0 || self.k >= n {
            return bad(format!("K must satisfy 1 <= K < N = {n}, got {}", self.k));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.eps_floor > 0.0) || !(self.step_tol > 0.0) {
            return bad("eps_floor and step_tol must be positive".into());
        }
        Ok(())
    }
}

/// Current iterate, weights and smoothing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: RealVector,
    pub w: RealVector,
    pub eps: f64,
    pub n: usize,
    pub tau_effective: f64,
}

impl IterateState {
    /// `x⁰ = 0`, `w⁰ = (1, …, 1)`, `ε₀ = 1`.
    pub fn initial(n: usize, cfg: &IrlsConfig) -> Self {
        Self {
            x: RealVector::zeros(n),
            w: RealVector::from_element(n, 1.0),
            eps: 1.0,
            n: 0,
            tau_effective: cfg.tau_at(0),
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    EpsHitFloor,
    StepBelowTol,
    MaxIters,
    ExactSparseStop,
    IllConditioned,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::EpsHitFloor => "EpsHitFloor",
            Termination::StepBelowTol => "StepBelowTol",
            Termination::MaxIters => "MaxIters",
            Termination::ExactSparseStop => "ExactSparseStop",
            Termination::IllConditioned => "IllConditioned",
        };
        f.write_str(s)
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `J_τ(xⁿ, wⁿ, εₙ)` at the exponent in effect for iterate n.
    #[serde(rename = "surrogate")]
    pub surrogate_value: f64,
    pub eps: f64,
    /// `‖xⁿ - xⁿ⁻¹‖_1`, with `x⁰ = 0`.
    pub step_l1: f64,
    pub ref_error_l1: Option<f64>,
    /// `Σ |xⁿ - x_ref|^τ` for the configured τ.
    #[serde(skip)]
    pub ref_error_tau: Option<f64>,
    #[serde(skip)]
    pub tau_effective: f64,
}

/// Output of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub version: u32,
    pub config: IrlsConfig,
    pub termination: Termination,
    /// `J(x¹, w⁰, ε₀)`, bounding ‖xⁿ‖_1 and 1/wⁿ_j for τ = 1.
    #[serde(rename = "A_bound")]
    pub a_bound: f64,
    #[serde(with = "vector_serde")]
    pub x_final: RealVector,
    pub trace: Vec<IterationRecord>,
}

impl RecoveryResult {
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.n)
    }
}

mod vector_serde {
    use super::RealVector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &RealVector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RealVector, D::Error> {
        Ok(RealVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// `(τ/2)[Σ z_j² w_j + Σ (ε² w_j + ((2-τ)/τ) w_j^{-τ/(2-τ)})]`.
pub fn surrogate_j(z: &RealVector, w: &RealVector, eps: f64, tau: f64) -> f64 {
    let e2 = eps * eps;
    let c = (2.0 - tau) / tau;
    let p = tau / (2.0 - tau);
    let sum: f64 = z
        .iter()
        .zip(w.iter())
        .map(|(zj, wj)| {
            let inv = if tau == 1.0 { 1.0 / wj } else { wj.powf(-p) };
            zj * zj * wj + e2 * wj + c * inv
        })
        .sum();
    0.5 * tau * sum
}

/// Minimizer over w > 0 of `J_τ(x, w, ε)`: `w_j = (x_j² + ε²)^{-(2-τ)/2}`.
pub fn optimal_weights(x: &RealVector, eps: f64, tau: f64) -> RealVector {
    let e2 = eps * eps;
    x.map(|v| {
        let base = v * v + e2;
        if tau == 1.0 {
            1.0 / base.sqrt()
        } else {
            base.powf(-(2.0 - tau) / 2.0)
        }
    })
}

/// `min(ε_prev, r(x)_{K+1} / N)`.
pub fn epsilon_update(eps_prev: f64, x_next: &RealVector, k: usize, n: usize) -> f64 {
    let r = rearrangement(x_next.as_slice());
    eps_prev.min(r.value(k) / n as f64)
}

/// `Σ_j (z_j² + ε²)^{τ/2}`.
pub fn surrogate_f(z: &RealVector, eps: f64, tau: f64) -> f64 {
    let e2 = eps * eps;
    z.iter()
        .map(|v| {
            let base = v * v + e2;
            if tau == 1.0 {
                base.sqrt()
            } else {
                base.powf(tau / 2.0)
            }
        })
        .sum()
}

/// Surrogate value at a state, using the exact infimum over weights when ε = 0.
fn state_surrogate(state: &IterateState) -> f64 {
    if state.eps > 0.0 {
        surrogate_j(&state.x, &state.w, state.eps, state.tau_effective)
    } else {
        lp_tau_sum(state.x.as_slice(), state.tau_effective)
    }
}

/// One full iteration: weighted solve, ε update, weight update.
///
/// When the new ε is exactly zero the weights are left unchanged; the caller
/// is expected to stop.
pub fn irls_step(
    phi: &SensingMatrix,
    y: &RealVector,
    state: &IterateState,
    cfg: &IrlsConfig,
) -> Result<IterateState, IrlsError> {
    let x = weighted_ls_solve(phi, y, &state.w)?;
    let n = phi.cols();
    let eps = epsilon_update(state.eps, &x, cfg.k, n);
    let next_n = state.n + 1;
    let tau_effective = cfg.tau_at(next_n);
    let w = if eps > 0.0 {
        optimal_weights(&x, eps, tau_effective)
    } else {
        state.w.clone()
    };
    Ok(IterateState {
        x,
        w,
        eps,
        n: next_n,
        tau_effective,
    })
}

/// Hook invoked after every successful step with the previous and new state.
pub trait StepObserver {
    fn observe(&mut self, prev: &IterateState, next: &IterateState);
}

impl<F: FnMut(&IterateState, &IterateState)> StepObserver for F {
    fn observe(&mut self, prev: &IterateState, next: &IterateState) {
        self(prev, next)
    }
}

/// Runs the iteration from `w⁰ = 1`, `ε₀ = 1` until a stopping rule fires.
pub fn irls_run(
    phi: &SensingMatrix,
    y: &RealVector,
    cfg: &IrlsConfig,
    x_ref: Option<&RealVector>,
) -> Result<RecoveryResult, IrlsError> {
    irls_run_observed(phi, y, cfg, x_ref, |_: &IterateState, _: &IterateState| {})
}

pub fn irls_run_observed<O: StepObserver>(
    phi: &SensingMatrix,
    y: &RealVector,
    cfg: &IrlsConfig,
    x_ref: Option<&RealVector>,
    mut observer: O,
) -> Result<RecoveryResult, IrlsError> {
    let n = phi.cols();
    cfg.validate(n)?;
    if y.len() != phi.rows() {
        return Err(IrlsError::DimensionMismatch {
            expected: phi.rows(),
            got: y.len(),
        });
    }
    if let Some(r) = x_ref {
        if r.len() != n {
            return Err(IrlsError::DimensionMismatch { expected: n, got: r.len() });
        }
    }

    let mut state = IterateState::initial(n, cfg);
    let mut trace = Vec::new();
    let mut a_bound = f64::NAN;
    let termination = loop {
        let next = match irls_step(phi, y, &state, cfg) {
            Ok(s) => s,
            Err(IrlsError::Linalg(LinalgError::IllConditioned { .. })) => {
                break Termination::IllConditioned
            }
            Err(e) => return Err(e),
        };
        if next.n == 1 {
            a_bound = surrogate_j(&next.x, &state.w, state.eps, state.tau_effective);
        }
        observer.observe(&state, &next);

        let step_l1 = l1_distance(&next.x, &state.x);
        trace.push(IterationRecord {
            n: next.n,
            surrogate_value: state_surrogate(&next),
            eps: next.eps,
            step_l1,
            ref_error_l1: x_ref.map(|r| l1_distance(&next.x, r)),
            ref_error_tau: x_ref.map(|r| lp_tau_distance(&next.x, r, cfg.tau)),
            tau_effective: next.tau_effective,
        });

        let x_norm: f64 = next.x.iter().map(|v| v.abs()).sum();
        let first = next.n == 1;
        state = next;
        if state.eps == 0.0 {
            break Termination::ExactSparseStop;
        }
        if state.eps <= cfg.eps_floor {
            break Termination::EpsHitFloor;
        }
        if !first && step_l1 <= cfg.step_tol * x_norm {
            break Termination::StepBelowTol;
        }
        if state.n >= cfg.max_iters {
            break Termination::MaxIters;
        }
    };

    if a_bound.is_nan() {
        a_bound = surrogate_j(&state.x, &state.w, state.eps, state.tau_effective);
    }
    Ok(RecoveryResult {
        version: RESULT_VERSION,
        config: cfg.clone(),
        termination,
        a_bound,
        x_final: state.x,
        trace,
    })
}

/// Contraction ratios of a reference-error sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// `E_{n+1} / E_n`
    pub linear_ratio: f64,
    /// `E_{n+1} / E_n^{2-τ}`
    pub superlinear_ratio: f64,
}

/// Ratios for an indexed error sequence `(n, E_n)`. Pairs in which either
/// error is below `floor` are skipped. `tau` may be 0 here to probe
/// quadratic behavior on constructed sequences.
pub fn rate_ratios(errors: &[(usize, f64)], tau: f64, floor: f64) -> Vec<RateRow> {
    errors
        .windows(2)
        .filter(|p| p[0].1 >= floor && p[1].1 >= floor)
        .map(|p| RateRow {
            n: p[0].0,
            linear_ratio: p[1].1 / p[0].1,
            superlinear_ratio: p[1].1 / p[0].1.powf(2.0 - tau),
        })
        .collect()
}

/// Rate diagnostics for a traced run with a known reference.
///
/// The error measure is `E_n = Σ |xⁿ_i - x_ref,i|^τ`; for τ < 1 it is read
/// from the per-iteration τ-errors, which the solver records for the run's
/// configured τ. Pairs with an error below `1e3 · ε_mach · Σ|x_ref,i|^τ`
/// are omitted.
pub fn rate_diagnostics(
    trace: &[IterationRecord],
    x_ref: &RealVector,
    tau: f64,
) -> Result<Vec<RateRow>, IrlsError> {
    let errors: Option<Vec<(usize, f64)>> = trace
        .iter()
        .map(|r| {
            let e = if tau == 1.0 { r.ref_error_l1 } else { r.ref_error_tau };
            e.map(|v| (r.n, v))
        })
        .collect();
    let errors = errors.ok_or(IrlsError::MissingReference)?;
    let floor = 1e3 * f64::EPSILON * lp_tau_sum(x_ref.as_slice(), tau);
    Ok(rate_ratios(&errors, tau, floor))
}

/// Linear (τ = 1) or superlinear (τ < 1) local rate constant μ.
///
/// τ = 1: `γ(1+γ)/(1-ρ) · (1 + 1/(K+1-k))`.
/// τ < 1: `2^{1-τ} γ(1+γ) A^τ (1 + (N^{1-τ}/(K+1-k))^{2-τ})` with
/// `A = (r_k^{1-τ} (1-ρ)^{2-τ})^{-1}`, where `r_k` is the smallest nonzero
/// magnitude of the sparse target. Diagnostic only; the estimate is
/// typically pessimistic.
pub fn theoretical_mu(gamma: f64, rho: f64, big_k: usize, k: usize, tau: f64, n: usize, r_k: f64) -> f64 {
    let gap = (big_k + 1 - k) as f64;
    if tau == 1.0 {
        gamma * (1.0 + gamma) / (1.0 - rho) * (1.0 + 1.0 / gap)
    } else {
        let a = 1.0 / (r_k.powf(1.0 - tau) * (1.0 - rho).powf(2.0 - tau));
        let tail = ((n as f64).powf(1.0 - tau) / gap).powf(2.0 - tau);
        2f64.powf(1.0 - tau) * gamma * (1.0 + gamma) * a.powf(tau) * (1.0 + tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> RealVector {
        RealVector::from_vec(xs.to_vec())
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_j(&v(&[0.0; 5]), &v(&[1.0; 5]), 1.0, 1.0), 5.0);
        let j = surrogate_j(&v(&[3.0, 0.0]), &v(&[0.2, 0.25]), 4.0, 1.0);
        assert!((j - 9.0).abs() < 1e-14);
        let j = surrogate_j(&v(&[0.0]), &v(&[1.0]), 0.0, 0.5);
        assert!((j - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        let w = optimal_weights(&v(&[3.0, 0.0]), 4.0, 1.0);
        assert!((w[0] - 0.2).abs() < 1e-16 && (w[1] - 0.25).abs() < 1e-16);
        for tau in [1.0, 0.7, 0.3] {
            assert_eq!(optimal_weights(&v(&[0.0]), 1.0, tau)[0], 1.0);
        }
    }

    #[test]
    fn epsilon_examples() {
        let e = epsilon_update(1.0, &v(&[5.0, 0.3, 0.03]), 1, 3);
        assert!((e - 0.1).abs() < 1e-16);
        assert_eq!(epsilon_update(1.0, &v(&[5.0, 0.0, 0.0]), 1, 3), 0.0);
        assert_eq!(epsilon_update(0.001, &v(&[5.0, 1.5, 0.0]), 1, 3), 0.001);
    }

    #[test]
    fn f_examples() {
        assert_eq!(surrogate_f(&v(&[3.0, 4.0]), 0.0, 1.0), 7.0);
        assert_eq!(surrogate_f(&v(&[3.0, 0.0]), 4.0, 1.0), 9.0);
        assert!((surrogate_f(&v(&[1.0, 1.0]), 0.0, 0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mu_examples() {
        let mu = theoretical_mu(0.1, 0.5, 10, 8, 1.0, 12, 1.0);
        assert!((mu - 0.1 * 1.1 / 0.5 * (4.0 / 3.0)).abs() < 1e-15);
        assert!((mu - 0.29333).abs() < 1e-5);
        assert!(theoretical_mu(1e-12, 0.5, 10, 8, 1.0, 12, 1.0) < 1e-11);
    }

    #[test]
    fn mu_sub_one_tau_matches_independent_evaluation() {
        // A = 1 / (1 * 0.5^1.5) = 2^1.5, A^0.5 = 2^0.75;
        // tail = (sqrt(12)/3)^1.5 = (4/3)^0.75.
        let want = 2f64.sqrt() * 0.05 * 1.05 * 2f64.powf(0.75) * (1.0 + (4.0f64 / 3.0).powf(0.75));
        let got = theoretical_mu(0.05, 0.5, 10, 8, 0.5, 12, 1.0);
        assert!((got - want).abs() < 1e-14 * want);
    }

    #[test]
    fn ratio_examples() {
        let geo: Vec<(usize, f64)> = (0..10).map(|n| (n, 0.5f64.powi(n as i32))).collect();
        for row in rate_ratios(&geo, 1.0, 0.0) {
            assert!((row.linear_ratio - 0.5).abs() < 1e-15);
        }
        let quad: Vec<(usize, f64)> = (0..5usize).map(|n| (n, 2f64.powf(-(2f64.powi(n as i32))))).collect();
        let rows = rate_ratios(&quad, 0.0, 0.0);
        assert_eq!(rows.len(), 4);
        for row in rows {
            assert!((row.superlinear_ratio - 1.0).abs() < 1e-12);
        }
        let floored = rate_ratios(&geo, 1.0, 0.01);
        assert_eq!(floored.len(), 6);
    }

    #[test]
    fn diagnostics_need_reference() {
        let rec = IterationRecord {
            n: 1,
            surrogate_value: 1.0,
            eps: 0.1,
            step_l1: 1.0,
            ref_error_l1: None,
            ref_error_tau: None,
            tau_effective: 1.0,
        };
        assert_eq!(
            rate_diagnostics(&[rec], &v(&[1.0]), 1.0),
            Err(IrlsError::MissingReference)
        );
    }

    #[test]
    fn heuristic_k_values() {
        assert_eq!(IrlsConfig::heuristic_k(250, 1500), 69);
        assert_eq!(IrlsConfig::heuristic_k(50, 250), 15);
        assert_eq!(IrlsConfig::heuristic_k(1, 2), 1);
        assert_eq!(IrlsConfig::heuristic_k(9, 10), 8);
    }

    #[test]
    fn config_validation() {
        assert!(IrlsConfig::l1(0).validate(5).is_err());
        assert!(IrlsConfig::l1(5).validate(5).is_err());
        assert!(IrlsConfig::with_tau(2, 0.0).validate(5).is_err());
        assert!(IrlsConfig::with_tau(2, 0.5).validate(5).is_ok());
        assert_eq!(IrlsConfig::with_tau(2, 0.5).warmstart_iters, 10);
    }

    #[test]
    fn tau_schedule_switches_once() {
        let cfg = IrlsConfig::with_tau(2, 0.5);
        assert_eq!(cfg.tau_at(0), 1.0);
        assert_eq!(cfg.tau_at(9), 1.0);
        assert_eq!(cfg.tau_at(10), 0.5);
        assert_eq!(IrlsConfig::with_tau(2, 0.5).tau_at(0), 1.0);
        assert_eq!(IrlsConfig { warmstart_iters: 0, ..cfg }.tau_at(0), 0.5);
    }
}
