//! The three strength estimators and the parameter-choice rules.
//!
//! * [`naive_ls`] solves each step independently: the minimum-norm least
//!   squares solution of the per-step difference equations. It is the
//!   baseline that ignores time.
//! * [`dls`] solves the smoothness-penalized problem
//!   `min |Qᵀz - y|² + λ·|E z|²` over the whole trajectory at once, as the
//!   stacked system `[Qᵀ; sqrt(λ)·E] z ≈ [y; 0]`, matrix-free via LSQR.
//!   The union graph must be connected; the centered solution is then
//!   unique.
//! * [`dproj`] composes the per-step solution with the low-frequency
//!   projection at threshold `τ`.
//!
//! Returned trajectories are always block-centered: per-block constant
//! shifts span the null space of the stacked problem, so centering picks
//! the identifiable representative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{
    smoothness_adjoint_flat, smoothness_apply_flat, GraphSequence, ObservationSet,
    StrengthTrajectory,
};
use crate::solver::{lsqr, LinearOperator, LsqrOutcome};
use crate::spectral::SpectralBasis;

/// Iterative-solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative residual tolerance of the stacked system.
    pub rel_tolerance: f64,
    /// Iteration cap; defaults to `10 * n * (T+1)` when unset.
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn cap_for(&self, n: usize, steps: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n * steps)
    }
}

/// A fitted trajectory with solver bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// Block-centered estimate.
    pub trajectory: StrengthTrajectory,
    /// Total LSQR iterations (summed over per-step solves where relevant).
    pub iterations_used: usize,
    /// Relative residual of the (worst) solved system.
    pub final_residual: f64,
    /// The `λ` or `τ` used; `None` for the per-step baseline.
    pub parameter: Option<f64>,
}

// ---------------------------------------------------------------------------
// Matrix-free operators
// ---------------------------------------------------------------------------

/// `A = Q_kᵀ` for a single step.
struct StepOperator<'a> {
    graph: &'a GraphSequence,
    step: usize,
}

impl LinearOperator for StepOperator<'_> {
    fn rows(&self) -> usize {
        self.graph.edge_count(self.step)
    }

    fn cols(&self) -> usize {
        self.graph.item_count()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, &(i, j)) in out.iter_mut().zip(self.graph.edges(self.step)) {
            *o = x[i] - x[j];
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&v, &(i, j)) in y.iter().zip(self.graph.edges(self.step)) {
            out[i] += v;
            out[j] -= v;
        }
    }
}

/// The stacked operator `[Qᵀ; sqrt(λ)·E]`.
struct StackedOperator<'a> {
    graph: &'a GraphSequence,
    sqrt_lambda: f64,
}

impl StackedOperator<'_> {
    fn edge_rows(&self) -> usize {
        self.graph.total_edges()
    }
}

impl LinearOperator for StackedOperator<'_> {
    fn rows(&self) -> usize {
        self.edge_rows() + self.graph.item_count() * self.graph.horizon()
    }

    fn cols(&self) -> usize {
        self.graph.item_count() * self.graph.step_count()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.graph.item_count();
        let mut row = 0;
        for k in 0..self.graph.step_count() {
            let block = &x[k * n..(k + 1) * n];
            for &(i, j) in self.graph.edges(k) {
                out[row] = block[i] - block[j];
                row += 1;
            }
        }
        smoothness_apply_flat(
            n,
            self.graph.horizon(),
            x,
            &mut out[row..],
            self.sqrt_lambda,
        );
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        let n = self.graph.item_count();
        out.fill(0.0);
        let mut row = 0;
        for k in 0..self.graph.step_count() {
            let block = &mut out[k * n..(k + 1) * n];
            for &(i, j) in self.graph.edges(k) {
                block[i] += y[row];
                block[j] -= y[row];
                row += 1;
            }
        }
        smoothness_adjoint_flat(n, self.graph.horizon(), &y[row..], out, self.sqrt_lambda);
    }
}

fn require_converged(out: &LsqrOutcome) -> Result<()> {
    if out.converged {
        Ok(())
    } else {
        Err(Error::Convergence {
            residual: out.rel_residual,
            iterations: out.iterations,
        })
    }
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Per-step minimum-norm least squares; disconnected steps are allowed and
/// resolve to the per-component-centered solution. Blocks are re-centered
/// unconditionally afterwards.
pub fn naive_ls(obs: &ObservationSet, cfg: &SolverConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let g = obs.graph();
    let n = g.item_count();
    let cap = cfg.cap_for(n, g.step_count());

    let mut trajectory = StrengthTrajectory::zeros(n, g.horizon());
    let mut iterations = 0;
    let mut worst_residual = 0.0f64;
    for k in 0..g.step_count() {
        if g.edge_count(k) == 0 {
            continue;
        }
        let op = StepOperator { graph: g, step: k };
        let out = lsqr(&op, obs.values(k), cfg.rel_tolerance, cap);
        require_converged(&out)?;
        iterations += out.iterations;
        worst_residual = worst_residual.max(out.rel_residual);
        trajectory.block_mut(k).copy_from_slice(&out.solution);
    }
    trajectory.center_blocks();
    Ok(EstimateReport {
        trajectory,
        iterations_used: iterations,
        final_residual: worst_residual,
        parameter: None,
    })
}

/// Smoothness-penalized least squares at penalty `lambda`.
pub fn dls(obs: &ObservationSet, lambda: f64, cfg: &SolverConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let g = obs.graph();
    if !g.union_is_connected() {
        return Err(Error::Precondition(
            "the union graph must be connected for the penalized estimator".into(),
        ));
    }
    let n = g.item_count();
    let op = StackedOperator {
        graph: g,
        sqrt_lambda: lambda.sqrt(),
    };
    let mut rhs = obs.stacked();
    rhs.resize(op.rows(), 0.0);

    let out = lsqr(&op, &rhs, cfg.rel_tolerance, cfg.cap_for(n, g.step_count()));
    require_converged(&out)?;

    let mut trajectory = StrengthTrajectory::from_flat(n, out.solution)?;
    trajectory.center_blocks();
    Ok(EstimateReport {
        trajectory,
        iterations_used: out.iterations,
        final_residual: out.rel_residual,
        parameter: Some(lambda),
    })
}

/// Projection estimator: per-step least squares followed by the
/// low-frequency projection at threshold `tau`.
pub fn dproj(obs: &ObservationSet, tau: f64, cfg: &SolverConfig) -> Result<EstimateReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let base = naive_ls(obs, cfg)?;
    let g = obs.graph();
    let basis = SpectralBasis::new(g.item_count(), g.horizon())?;
    let mut trajectory = basis.project_low_frequency(&base.trajectory, tau)?;
    trajectory.center_blocks();
    Ok(EstimateReport {
        trajectory,
        iterations_used: base.iterations_used,
        final_residual: base.final_residual,
        parameter: Some(tau),
    })
}

/// Penalized-least-squares objective `|Qᵀz - y|² + λ·|E z|²`; exposed for
/// optimality checks.
pub fn dls_objective(obs: &ObservationSet, z: &StrengthTrajectory, lambda: f64) -> Result<f64> {
    let g = obs.graph();
    if z.item_count() != g.item_count() || z.horizon() != g.horizon() {
        return Err(Error::Dimension(
            "trajectory shape differs from graph shape".into(),
        ));
    }
    let mut fit = 0.0;
    for k in 0..g.step_count() {
        let pred = g.incidence_apply(k, z.block(k))?;
        fit += pred
            .iter()
            .zip(obs.values(k))
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>();
    }
    Ok(fit + lambda * z.smoothness_penalty())
}

// ---------------------------------------------------------------------------
// Parameter choice
// ---------------------------------------------------------------------------

/// Which error-rate regime the penalty choice should target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRegime {
    /// The same connected graph at every step: `λ = (T/S_T)^{2/3}`.
    FixedGraph,
    /// Arbitrary connected graphs, no extra condition: `λ = (T/S_T)^{2/5}`.
    /// This is the assumption-free default.
    #[default]
    Evolving,
    /// Evolving graphs under the spectral cross-term margin condition:
    /// `λ = (T/S_T)^{2/3}`.
    EvolvingWithMargin,
}

fn check_rule_inputs(horizon: usize, smoothness: f64) -> Result<()> {
    if horizon < 1 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 1, got {horizon}"
        )));
    }
    if !(smoothness > 0.0 && smoothness.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "smoothness budget must be positive, got {smoothness}"
        )));
    }
    Ok(())
}

/// Penalty rule `λ(T, S_T)` for [`dls`].
pub fn choose_lambda(horizon: usize, smoothness: f64, regime: LambdaRegime) -> Result<f64> {
    check_rule_inputs(horizon, smoothness)?;
    let ratio = horizon as f64 / smoothness;
    let exponent = match regime {
        LambdaRegime::FixedGraph | LambdaRegime::EvolvingWithMargin => 2.0 / 3.0,
        LambdaRegime::Evolving => 2.0 / 5.0,
    };
    Ok(ratio.powf(exponent))
}

/// Threshold rule `τ = (S_T/T)^{2/3}` for [`dproj`].
pub fn choose_tau(horizon: usize, smoothness: f64) -> Result<f64> {
    check_rule_inputs(horizon, smoothness)?;
    Ok((smoothness / horizon as f64).powf(2.0 / 3.0))
}
