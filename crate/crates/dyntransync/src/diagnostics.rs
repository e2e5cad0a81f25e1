//! Dense spectral diagnostics for desk-scale instances: per-step Fiedler
//! values, the smallest nonzero eigenvalue and spectral norm of the stacked
//! Laplacian, the rank law of the regularized Laplacian, and the spectral
//! cross-term margin behind the stronger penalized-estimator rate.
//!
//! Everything here materializes matrices and calls a dense symmetric
//! eigensolver; the stacked checks are capped at `n(T+1) <= 256`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dense;
use crate::error::{Error, Result};
use crate::graphseq::GraphSequence;

/// Size cap for the checks that materialize `n(T+1) x n(T+1)` matrices.
pub const STACKED_SIZE_CAP: usize = 256;

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut eigs: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Second-smallest Laplacian eigenvalue of the graph at step `k`, together
/// with its connectivity flag. Disconnected graphs report `(0.0, false)`.
pub fn fiedler_value(g: &GraphSequence, k: usize) -> Result<(f64, bool)> {
    if k >= g.step_count() {
        return Err(Error::Dimension(format!("step {k} out of range")));
    }
    if !g.is_connected(k) {
        return Ok((0.0, false));
    }
    let eigs = sorted_eigenvalues(dense::laplacian(g, k));
    Ok((eigs[1], true))
}

/// Smallest nonzero eigenvalue of the stacked Laplacian: the minimum of
/// the per-step Fiedler values when every step is connected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaMinReport {
    pub value: f64,
    pub all_steps_connected: bool,
}

pub fn lambda_min_l(g: &GraphSequence) -> Result<LambdaMinReport> {
    let mut value = f64::INFINITY;
    let mut all_connected = true;
    for k in 0..g.step_count() {
        let (fiedler, connected) = fiedler_value(g, k)?;
        all_connected &= connected;
        value = value.min(fiedler);
    }
    Ok(LambdaMinReport {
        value,
        all_steps_connected: all_connected,
    })
}

/// Spectral norm of the stacked Laplacian: the largest per-step Laplacian
/// eigenvalue (block-diagonal structure).
pub fn norm_l(g: &GraphSequence) -> Result<f64> {
    let mut norm = 0.0f64;
    for k in 0..g.step_count() {
        let eigs = sorted_eigenvalues(dense::laplacian(g, k));
        norm = norm.max(*eigs.last().unwrap());
    }
    Ok(norm)
}

/// Outcome of the regularized-Laplacian rank law check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankCheck {
    pub rank: usize,
    /// `n(T+1) - (T+1)`: the rank forced by a connected union graph.
    pub expected_rank: usize,
    /// Largest norm of `L(λ)` applied to a per-block constant vector.
    pub annihilation_error: f64,
    pub pass: bool,
}

fn check_stacked_cap(g: &GraphSequence) -> Result<usize> {
    let dim = g.item_count() * g.step_count();
    if dim > STACKED_SIZE_CAP {
        return Err(Error::UnsupportedSize(format!(
            "n(T+1) = {dim} exceeds the dense cap {STACKED_SIZE_CAP}"
        )));
    }
    Ok(dim)
}

/// Verifies the null-space law of `L(λ) = L + λ·EᵀE`: with a connected
/// union graph the null space is exactly the per-block constants, so the
/// rank is `n(T+1) - (T+1)` for every `λ > 0`.
pub fn nullspace_rank_check(g: &GraphSequence, lambda: f64) -> Result<RankCheck> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let dim = check_stacked_cap(g)?;
    let n = g.item_count();
    let steps = g.step_count();
    let reg = dense::regularized_laplacian(g, lambda);

    let eigs = sorted_eigenvalues(reg.clone());
    let scale = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rank = eigs.iter().filter(|&&v| v > 1e-9 * scale).count();
    let expected_rank = dim - steps;

    let mut annihilation_error = 0.0f64;
    for k in 0..steps {
        let mut v = DVector::zeros(dim);
        for i in 0..n {
            v[k * n + i] = 1.0;
        }
        annihilation_error = annihilation_error.max((&reg * v).norm());
    }
    let pass = rank == expected_rank && annihilation_error <= 1e-10 * scale.max(1.0);
    Ok(RankCheck {
        rank,
        expected_rank,
        annihilation_error,
        pass,
    })
}

/// Smallest eigenvalue of
/// `(1/κ)·(L² + λ²(EᵀE)²) + λ·(EᵀE·L + L·EᵀE)`.
///
/// A non-negative margin (up to tolerance) certifies the cross-term
/// condition at this `(λ, κ)`; it holds unconditionally for `κ <= 1` and,
/// with a time-constant graph sequence, for every `κ`.
pub fn assumption3_margin(g: &GraphSequence, lambda: f64, kappa: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    check_stacked_cap(g)?;
    let l = dense::stacked_laplacian(g);
    let w = dense::smoothness_gram(g.item_count(), g.horizon()) * lambda;
    let cross = &w * &l + &l * &w;
    let mut m = (&l * &l + &w * &w) / kappa + cross;
    // symmetrize away floating-point asymmetry before the eigensolve
    m = (&m + m.transpose()) * 0.5;
    Ok(sorted_eigenvalues(m)[0])
}

/// Per-step connectivity and Fiedler value.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub connected: bool,
    pub fiedler: f64,
}

/// Margin at one `κ` of the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MarginEntry {
    pub kappa: f64,
    pub margin: f64,
}

/// Everything the `diagnose` command reports.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub horizon: usize,
    pub union_connected: bool,
    pub steps: Vec<StepDiagnostics>,
    pub lambda_min: f64,
    pub all_steps_connected: bool,
    pub spectral_norm: f64,
    pub lambda: f64,
    pub rank_check: RankCheck,
    pub margins: Vec<MarginEntry>,
}

/// Runs the full diagnostic battery at one `λ` and a sweep of `κ` values.
pub fn diagnose(g: &GraphSequence, lambda: f64, kappas: &[f64]) -> Result<DiagnosticsReport> {
    let steps = (0..g.step_count())
        .map(|k| {
            let (fiedler, connected) = fiedler_value(g, k)?;
            Ok(StepDiagnostics {
                step: k,
                connected,
                fiedler,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda_min = lambda_min_l(g)?;
    let margins = kappas
        .iter()
        .map(|&kappa| {
            Ok(MarginEntry {
                kappa,
                margin: assumption3_margin(g, lambda, kappa)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport {
        n: g.item_count(),
        horizon: g.horizon(),
        union_connected: g.union_is_connected(),
        steps,
        lambda_min: lambda_min.value,
        all_steps_connected: lambda_min.all_steps_connected,
        spectral_norm: norm_l(g)?,
        lambda,
        rank_check: nullspace_rank_check(g, lambda)?,
        margins,
    })
}
