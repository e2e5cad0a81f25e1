//! Error metrics, the seeded Monte-Carlo benchmark harness, and
//! hold-one-out-per-step cross-validation.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    choose_lambda, choose_tau, dls, dproj, naive_ls, EstimateReport, LambdaRegime, SolverConfig,
};
use crate::graphseq::{GraphSequence, ObservationSet, StrengthTrajectory};
use crate::rng::{derive_seed, substream, STREAM_CV, STREAM_TRIAL};
use crate::spectral::SpectralBasis;
use crate::synth::{
    exponentiate, generate_btl_observations, generate_er_sequence, generate_ground_truth,
    generate_observations, EdgeSchedule, SynthConfig,
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

fn sign3(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Mean squared trajectory error `(1/(T+1)) Σ_k |est_k - truth_k|²` after
/// block-centering both arguments; invariant under per-block shifts.
pub fn trajectory_mse(est: &StrengthTrajectory, truth: &StrengthTrajectory) -> Result<f64> {
    if est.item_count() != truth.item_count() || est.horizon() != truth.horizon() {
        return Err(Error::Dimension("trajectory shapes differ".into()));
    }
    let mut a = est.clone();
    let mut b = truth.clone();
    a.center_blocks();
    b.center_blocks();
    let sq: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sq / est.step_count() as f64)
}

/// Mean squared prediction error of the observed differences:
/// `(1/(T+1)) Σ_t Σ_edges (y_ij(t) - (z_i - z_j))²`.
pub fn pairwise_mse(obs: &ObservationSet, est: &StrengthTrajectory) -> Result<f64> {
    let g = obs.graph();
    if est.item_count() != g.item_count() || est.horizon() != g.horizon() {
        return Err(Error::Dimension(
            "estimate shape differs from observations".into(),
        ));
    }
    let mut total = 0.0;
    for (k, i, j, y) in obs.iter() {
        let d = est.block(k)[i] - est.block(k)[j];
        total += (y - d) * (y - d);
    }
    Ok(total / g.step_count() as f64)
}

/// Sign disagreements between observations and estimated differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpsetStats {
    pub count: usize,
    pub total: usize,
    pub rate: f64,
}

/// Counts edges whose observed sign differs from the estimated difference
/// sign. A zero estimated difference against a nonzero observation counts
/// as an upset; zero against zero does not.
pub fn upsets(obs: &ObservationSet, est: &StrengthTrajectory) -> Result<UpsetStats> {
    let g = obs.graph();
    if est.item_count() != g.item_count() || est.horizon() != g.horizon() {
        return Err(Error::Dimension(
            "estimate shape differs from observations".into(),
        ));
    }
    let mut count = 0;
    for (k, i, j, y) in obs.iter() {
        let d = est.block(k)[i] - est.block(k)[j];
        if sign3(y) != sign3(d) {
            count += 1;
        }
    }
    let total = obs.total_len();
    let rate = if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    };
    Ok(UpsetStats { count, total, rate })
}

/// Least-squares slope of `ln(values)` against `ln(horizons)`.
pub fn log_log_slope(horizons: &[f64], values: &[f64]) -> f64 {
    assert_eq!(horizons.len(), values.len());
    let m = horizons.len() as f64;
    let xs: Vec<f64> = horizons.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

// ---------------------------------------------------------------------------
// Estimator selection shared by the harness, cross-validation and the CLI
// ---------------------------------------------------------------------------

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ls,
    Dls,
    Dproj,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Dls => "dls",
            EstimatorKind::Dproj => "dproj",
        }
    }
}

/// How the tuning parameter of an estimator is picked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ParamRule {
    /// Use this value at every horizon.
    Fixed { value: f64 },
    /// Apply the closed-form rule `λ(T, S_T)` or `τ(T, S_T)`.
    Auto {
        #[serde(default)]
        regime: LambdaRegime,
    },
}

impl Default for ParamRule {
    fn default() -> Self {
        ParamRule::Auto {
            regime: LambdaRegime::default(),
        }
    }
}

/// An estimator entry of the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    #[serde(default)]
    pub param: ParamRule,
}

impl EstimatorSpec {
    /// Resolves the concrete parameter for a horizon/budget pair.
    pub fn resolve(&self, horizon: usize, smoothness: f64) -> Result<Option<f64>> {
        match (self.kind, self.param) {
            (EstimatorKind::Ls, _) => Ok(None),
            (_, ParamRule::Fixed { value }) => Ok(Some(value)),
            (EstimatorKind::Dls, ParamRule::Auto { regime }) => {
                choose_lambda(horizon, smoothness, regime).map(Some)
            }
            (EstimatorKind::Dproj, ParamRule::Auto { .. }) => {
                choose_tau(horizon, smoothness).map(Some)
            }
        }
    }
}

/// Runs the chosen estimator with an already-resolved parameter.
pub fn run_estimator(
    kind: EstimatorKind,
    obs: &ObservationSet,
    parameter: Option<f64>,
    solver: &SolverConfig,
) -> Result<EstimateReport> {
    match kind {
        EstimatorKind::Ls => naive_ls(obs, solver),
        EstimatorKind::Dls => {
            let lambda =
                parameter.ok_or_else(|| Error::InvalidArgument("dls needs a lambda".into()))?;
            dls(obs, lambda, solver)
        }
        EstimatorKind::Dproj => {
            let tau =
                parameter.ok_or_else(|| Error::InvalidArgument("dproj needs a tau".into()))?;
            dproj(obs, tau, solver)
        }
    }
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

/// The smoothness budget as a function of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SmoothnessRule {
    Constant {
        value: f64,
    },
    /// `S_T = coeff * T^exponent`.
    PowerOfHorizon {
        coeff: f64,
        exponent: f64,
    },
}

impl SmoothnessRule {
    pub fn value(&self, horizon: usize) -> f64 {
        match self {
            SmoothnessRule::Constant { value } => *value,
            SmoothnessRule::PowerOfHorizon { coeff, exponent } => {
                coeff * (horizon as f64).powf(*exponent)
            }
        }
    }
}

/// Which observation model the harness draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Btl { trials: u64 },
}

/// Benchmark harness configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    /// Horizon grid, e.g. `[16, 32, 64, 128, 256]`.
    pub horizons: Vec<usize>,
    /// Monte-Carlo trials per horizon.
    pub trials: usize,
    pub smoothness: SmoothnessRule,
    pub model: NoiseModel,
    pub edge_probability: EdgeSchedule,
    #[serde(default)]
    pub per_step_connected: bool,
    pub estimators: Vec<EstimatorSpec>,
    pub seed: u64,
    /// Monte-Carlo fan-out cap; 1 is the bit-reproducible reference mode
    /// (higher values reproduce it too, since trials use disjoint streams
    /// and are aggregated in trial order).
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_threads() -> usize {
    1
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::InvalidArgument("horizon grid is empty".into()));
        }
        if self.trials < 1 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators configured".into()));
        }
        if self.threads < 1 {
            return Err(Error::InvalidArgument("threads must be >= 1".into()));
        }
        self.solver.validate()?;
        for &horizon in &self.horizons {
            let smoothness = self.smoothness.value(horizon);
            self.synth_config(horizon, smoothness, 0).validate()?;
        }
        Ok(())
    }

    fn synth_config(&self, horizon: usize, smoothness: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n: self.n,
            horizon,
            smoothness,
            noise_sigma: match self.model {
                NoiseModel::Gaussian { sigma } => sigma,
                NoiseModel::Btl { .. } => 0.0,
            },
            edge_probability: self.edge_probability.clone(),
            seed,
            per_step_connected: self.per_step_connected,
            btl_trials: match self.model {
                NoiseModel::Btl { trials } => trials,
                NoiseModel::Gaussian { .. } => 1,
            },
        }
    }
}

/// One aggregated benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub horizon: usize,
    pub estimator: String,
    pub parameter: Option<f64>,
    pub mean_mse: f64,
    pub std_mse: f64,
    /// Trials that produced an estimate.
    pub trials: usize,
    pub failures: usize,
    /// Trials whose graph sequence had at least one disconnected step.
    pub disconnected_trials: usize,
}

/// Benchmark output: configuration echo plus one row per
/// `(horizon, estimator)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub config: BenchConfig,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Mean-MSE column of one estimator, ordered like the horizon grid.
    pub fn mean_series(&self, estimator: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator)
            .map(|r| r.mean_mse)
            .collect()
    }

    /// Writes the fixed-column CSV form:
    /// `T,estimator,parameter,mean_mse,std_mse,trials,failures,disconnected_trials`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "T",
            "estimator",
            "parameter",
            "mean_mse",
            "std_mse",
            "trials",
            "failures",
            "disconnected_trials",
        ])?;
        for r in &self.rows {
            w.write_record(&[
                r.horizon.to_string(),
                r.estimator.clone(),
                r.parameter.map_or(String::new(), |p| format!("{p:.17e}")),
                format!("{:.17e}", r.mean_mse),
                format!("{:.17e}", r.std_mse),
                r.trials.to_string(),
                r.failures.to_string(),
                r.disconnected_trials.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct TrialOutcome {
    disconnected: bool,
    /// Per configured estimator: the trajectory MSE, or `None` on failure.
    mse: Vec<Option<f64>>,
}

/// Runs the seeded Monte-Carlo benchmark: for every horizon in the grid and
/// every trial, draw graphs/truth/observations, run each estimator with its
/// resolved parameter, and aggregate trajectory MSE over trials.
///
/// Estimator failures mark the trial as failed for that estimator only; the
/// mean and standard deviation are taken over the successes.
pub fn rate_experiment(cfg: &BenchConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &horizon in &cfg.horizons {
        let smoothness = cfg.smoothness.value(horizon);
        let basis = SpectralBasis::new(cfg.n, horizon)?;
        let params: Vec<Option<f64>> = cfg
            .estimators
            .iter()
            .map(|spec| spec.resolve(horizon, smoothness))
            .collect::<Result<_>>()?;

        let run_trial = |trial: usize| -> Result<TrialOutcome> {
            let trial_seed = derive_seed(cfg.seed, &[STREAM_TRIAL, horizon as u64, trial as u64]);
            let synth_cfg = cfg.synth_config(horizon, smoothness, trial_seed);
            let graph = generate_er_sequence(&synth_cfg)?;
            let truth = generate_ground_truth(&synth_cfg, &basis)?;
            let obs = match cfg.model {
                NoiseModel::Gaussian { sigma } => {
                    generate_observations(&truth, &graph, sigma, trial_seed)?
                }
                NoiseModel::Btl { trials } => {
                    generate_btl_observations(&exponentiate(&truth), &graph, trials, trial_seed)?
                }
            };
            let disconnected = !graph.disconnected_steps().is_empty();
            let mse = cfg
                .estimators
                .iter()
                .zip(&params)
                .map(|(spec, &param)| {
                    run_estimator(spec.kind, &obs, param, &cfg.solver)
                        .and_then(|fit| trajectory_mse(&fit.trajectory, &truth))
                        .ok()
                })
                .collect();
            Ok(TrialOutcome { disconnected, mse })
        };

        let outcomes: Vec<TrialOutcome> = if cfg.threads <= 1 {
            (0..cfg.trials).map(run_trial).collect::<Result<_>>()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(run_trial)
                    .collect::<Result<_>>()
            })?
        };

        let disconnected_trials = outcomes.iter().filter(|o| o.disconnected).count();
        for (idx, spec) in cfg.estimators.iter().enumerate() {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o.mse[idx]).collect();
            let trials = values.len();
            let failures = cfg.trials - trials;
            let mean = values.iter().sum::<f64>() / trials.max(1) as f64;
            let std = if trials > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (trials - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            rows.push(ResultRow {
                horizon,
                estimator: spec.kind.name().to_string(),
                parameter: params[idx],
                mean_mse: if trials == 0 { f64::NAN } else { mean },
                std_mse: std,
                trials,
                failures,
                disconnected_trials,
            });
        }
    }
    Ok(ResultTable {
        config: cfg.clone(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Scoring criterion for held-out edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvCriterion {
    Mse,
    Upsets,
}

/// One grid entry of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub parameter: f64,
    pub mean_error: f64,
    pub repeats_used: usize,
}

/// Cross-validation outcome; `selected` attains the grid minimum, with ties
/// broken toward the smaller parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub estimator: EstimatorKind,
    pub criterion: CvCriterion,
    pub entries: Vec<CvEntry>,
    pub selected: f64,
    pub selected_index: usize,
    pub warnings: Vec<String>,
}

/// A held-out record `(step, i, j, y)`.
pub type HeldOutEdge = (usize, usize, usize, f64);

/// Hold-one-out-per-step cross-validation: each repeat removes one
/// uniformly random edge per time step, fits every grid value on the
/// remainder, and scores the held-out edges; errors are averaged over
/// repeats and the grid minimizer is returned.
///
/// For the penalized estimator, a draw whose removal disconnects the union
/// graph is redrawn (at most 20 times), then the repeat is skipped with a
/// warning.
pub fn cross_validate(
    obs: &ObservationSet,
    kind: EstimatorKind,
    grid: &[f64],
    criterion: CvCriterion,
    repeats: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<CvReport> {
    if kind == EstimatorKind::Ls {
        return Err(Error::InvalidArgument(
            "the per-step baseline has no tuning parameter to cross-validate".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("parameter grid is empty".into()));
    }
    if grid.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidArgument(
            "grid values must be positive".into(),
        ));
    }
    if repeats < 1 {
        return Err(Error::InvalidArgument("need at least one repeat".into()));
    }
    let g = obs.graph();
    let steps = g.step_count();
    if let Some(k) = (0..steps).find(|&k| g.edge_count(k) == 0) {
        return Err(Error::Precondition(format!(
            "cross-validation needs at least one edge per step; step {k} is empty"
        )));
    }

    let mut sums = vec![0.0f64; grid.len()];
    let mut used = vec![0usize; grid.len()];
    let mut warnings = Vec::new();

    for repeat in 0..repeats {
        let mut rng = substream(seed, &[STREAM_CV, repeat as u64]);
        let mut chosen: Option<(ObservationSet, Vec<HeldOutEdge>)> = None;
        for _redraw in 0..20 {
            let picks: Vec<usize> = (0..steps)
                .map(|k| rng.random_range(0..g.edge_count(k)))
                .collect();
            let (training, held_out) = split_holdout(obs, &picks)?;
            if kind == EstimatorKind::Dls && !training.graph().union_is_connected() {
                continue;
            }
            chosen = Some((training, held_out));
            break;
        }
        let Some((training, held_out)) = chosen else {
            warnings.push(format!(
                "repeat {repeat}: skipped after 20 redraws (hold-out always disconnected the union graph)"
            ));
            continue;
        };

        for (slot, &parameter) in grid.iter().enumerate() {
            let fit = match run_estimator(kind, &training, Some(parameter), solver) {
                Ok(fit) => fit,
                Err(err) => {
                    warnings.push(format!(
                        "repeat {repeat}, parameter {parameter}: estimator failed ({err})"
                    ));
                    continue;
                }
            };
            let z = &fit.trajectory;
            let score = match criterion {
                CvCriterion::Mse => held_out
                    .iter()
                    .map(|&(k, i, j, y)| {
                        let d = z.block(k)[i] - z.block(k)[j];
                        (y - d) * (y - d)
                    })
                    .sum::<f64>(),
                CvCriterion::Upsets => held_out
                    .iter()
                    .filter(|&&(k, i, j, y)| sign3(y) != sign3(z.block(k)[i] - z.block(k)[j]))
                    .count() as f64,
            } / steps as f64;
            sums[slot] += score;
            used[slot] += 1;
        }
    }

    let entries: Vec<CvEntry> = grid
        .iter()
        .zip(sums.iter().zip(&used))
        .map(|(&parameter, (&sum, &repeats_used))| CvEntry {
            parameter,
            mean_error: if repeats_used == 0 {
                f64::NAN
            } else {
                sum / repeats_used as f64
            },
            repeats_used,
        })
        .collect();
    if entries.iter().all(|e| e.repeats_used == 0) {
        return Err(Error::Precondition(
            "every cross-validation repeat failed; no scores to compare".into(),
        ));
    }

    let mut selected_index = 0;
    for (idx, entry) in entries.iter().enumerate() {
        if entry.repeats_used == 0 {
            continue;
        }
        let best = &entries[selected_index];
        let better = best.repeats_used == 0
            || entry.mean_error < best.mean_error
            || (entry.mean_error == best.mean_error && entry.parameter < best.parameter);
        if better {
            selected_index = idx;
        }
    }

    Ok(CvReport {
        estimator: kind,
        criterion,
        selected: entries[selected_index].parameter,
        selected_index,
        entries,
        warnings,
    })
}

/// Removes the `picks[k]`-th edge of every step; returns the training set
/// and the held-out records `(step, i, j, y)`.
fn split_holdout(
    obs: &ObservationSet,
    picks: &[usize],
) -> Result<(ObservationSet, Vec<HeldOutEdge>)> {
    let g = obs.graph();
    let mut edges = Vec::with_capacity(g.step_count());
    let mut values = Vec::with_capacity(g.step_count());
    let mut held_out = Vec::with_capacity(g.step_count());
    for (k, &pick) in picks.iter().enumerate() {
        let step_edges = g.edges(k);
        let step_values = obs.values(k);
        let (i, j) = step_edges[pick];
        held_out.push((k, i, j, step_values[pick]));
        let mut kept_edges = Vec::with_capacity(step_edges.len() - 1);
        let mut kept_values = Vec::with_capacity(step_edges.len() - 1);
        for (idx, (&e, &v)) in step_edges.iter().zip(step_values).enumerate() {
            if idx != pick {
                kept_edges.push(e);
                kept_values.push(v);
            }
        }
        edges.push(kept_edges);
        values.push(kept_values);
    }
    let training = ObservationSet::new(GraphSequence::new(g.item_count(), edges)?, values)?;
    // the held-out records must be disjoint from the training set
    for &(k, i, j, _) in &held_out {
        assert!(
            !training.graph().edges(k).contains(&(i, j)),
            "held-out edge leaked into the training set"
        );
    }
    Ok((training, held_out))
}
