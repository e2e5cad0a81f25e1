//! Synthetic data: smooth ground truths, random graph sequences, Gaussian
//! difference observations and the win/loss (BTL) variant.
//!
//! Ground truths are drawn isotropically, normalized, and projected onto a
//! low-frequency subspace chosen so the smoothness budget holds by
//! construction: a mode of frequency weight `w` survives only if `w` is
//! below the generation threshold, so the weighted coefficient mass of a
//! unit vector cannot exceed the budget. The realized budget is still
//! asserted at runtime.
//!
//! Everything is a pure function of `(config, seed)`; see [`crate::rng`]
//! for the stream-splitting contract.

use rand::Rng;
use rand_distr::{Binomial, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::{GraphSequence, ObservationSet, StrengthTrajectory, UnionFind};
use crate::rng::{substream, STREAM_BTL, STREAM_GRAPHS, STREAM_NOISE, STREAM_TRUTH};
use crate::spectral::SpectralBasis;

/// Per-step edge probability schedule for the random-graph generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdgeSchedule {
    /// The same probability at every step.
    Constant { value: f64 },
    /// Each step draws its probability uniformly from `[lo, hi]`.
    UniformRandom { lo: f64, hi: f64 },
    /// Explicit per-step probabilities (`T + 1` entries).
    PerStep { values: Vec<f64> },
}

impl EdgeSchedule {
    fn validate(&self, steps: usize) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            EdgeSchedule::Constant { value } => {
                if !ok(*value) {
                    return Err(Error::InvalidArgument(format!(
                        "edge probability must lie in [0, 1], got {value}"
                    )));
                }
            }
            EdgeSchedule::UniformRandom { lo, hi } => {
                if !ok(*lo) || !ok(*hi) || lo > hi {
                    return Err(Error::InvalidArgument(format!(
                        "edge probability range [{lo}, {hi}] is not inside [0, 1]"
                    )));
                }
            }
            EdgeSchedule::PerStep { values } => {
                if values.len() != steps {
                    return Err(Error::Dimension(format!(
                        "schedule has {} entries for {} steps",
                        values.len(),
                        steps
                    )));
                }
                if let Some(bad) = values.iter().find(|p| !ok(**p)) {
                    return Err(Error::InvalidArgument(format!(
                        "edge probability must lie in [0, 1], got {bad}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn probability(&self, k: usize, rng: &mut impl Rng) -> f64 {
        match self {
            EdgeSchedule::Constant { value } => *value,
            EdgeSchedule::UniformRandom { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            EdgeSchedule::PerStep { values } => values[k],
        }
    }
}

/// Inputs of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Item count `n >= 2`.
    pub n: usize,
    /// Horizon `T >= 1` (the grid has `T + 1` steps).
    pub horizon: usize,
    /// Smoothness budget `S_T > 0`.
    pub smoothness: f64,
    /// Gaussian noise level `σ >= 0`.
    pub noise_sigma: f64,
    /// Edge probability schedule of the random graphs.
    pub edge_probability: EdgeSchedule,
    /// Master seed.
    pub seed: u64,
    /// Repair every step to be connected (the union is always repaired).
    #[serde(default)]
    pub per_step_connected: bool,
    /// Comparisons per pair in the win/loss generator.
    #[serde(default = "default_btl_trials")]
    pub btl_trials: u64,
}

fn default_btl_trials() -> u64 {
    1
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidArgument(format!(
                "horizon must be >= 1, got {}",
                self.horizon
            )));
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothness must be positive, got {}",
                self.smoothness
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.btl_trials < 1 {
            return Err(Error::InvalidArgument("btl_trials must be >= 1".into()));
        }
        self.edge_probability.validate(self.horizon + 1)
    }
}

/// The generation threshold `ε = min(S_T, (π·S_T / ((T+1)·sqrt(n-1)))^{2/3})`.
pub fn generation_threshold(cfg: &SynthConfig) -> f64 {
    let steps = cfg.horizon as f64 + 1.0;
    let alt = (std::f64::consts::PI * cfg.smoothness / (steps * ((cfg.n - 1) as f64).sqrt()))
        .powf(2.0 / 3.0);
    cfg.smoothness.min(alt)
}

/// Draws the smooth, unit-bounded, block-centered ground truth.
///
/// A standard Gaussian vector is normalized to unit length and projected
/// onto the modes whose full-operator frequency weight `n·μ_k` lies below
/// the generation threshold; every kept unit of coefficient mass then
/// contributes less than `ε ≤ S_T` to the budget, which makes the runtime
/// assertion unconditional. The dimension of the kept subspace is bounded
/// by [`crate::spectral::low_frequency_count_bound`] at the threshold.
pub fn generate_ground_truth(
    cfg: &SynthConfig,
    basis: &SpectralBasis,
) -> Result<StrengthTrajectory> {
    cfg.validate()?;
    if basis.item_count() != cfg.n || basis.horizon() != cfg.horizon {
        return Err(Error::Dimension(format!(
            "basis is {}x{} but config wants {}x{}",
            basis.item_count(),
            basis.horizon() + 1,
            cfg.n,
            cfg.horizon + 1
        )));
    }
    let mut rng = substream(cfg.seed, &[STREAM_TRUTH]);
    let dim = cfg.n * (cfg.horizon + 1);
    let mut raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut raw {
        *v /= norm;
    }
    let eps = generation_threshold(cfg);
    // keep n·μ_k < ε, expressed in the basis' (n-1)·μ_k convention
    let tau_gen = eps * (cfg.n as f64 - 1.0) / cfg.n as f64;
    let z = StrengthTrajectory::from_flat(cfg.n, raw)?;
    let mut out = basis.project_low_frequency(&z, tau_gen)?;
    out.center_blocks();

    let budget = out.smoothness_penalty();
    if budget > cfg.smoothness * (1.0 + 1e-9) {
        return Err(Error::Internal(format!(
            "generated truth has smoothness {budget} above the budget {}",
            cfg.smoothness
        )));
    }
    Ok(out)
}

fn draw_step_edges(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn union_components(n: usize, steps: &[Vec<(usize, usize)>]) -> UnionFind {
    let mut uf = UnionFind::new(n);
    for step in steps {
        for &(i, j) in step {
            uf.union(i, j);
        }
    }
    uf
}

/// Random spanning tree across the components of `uf`: repeatedly draws
/// vertex pairs until they straddle two components, links them, and
/// returns the chosen repair edges.
fn spanning_repair_edges(n: usize, uf: &mut UnionFind, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut repairs = Vec::new();
    while uf.component_count() > 1 {
        loop {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if uf.find(a) != uf.find(b) {
                uf.union(a, b);
                repairs.push((a.min(b), a.max(b)));
                break;
            }
        }
    }
    repairs
}

const RESAMPLE_ATTEMPTS: usize = 100;

/// Draws the random comparison-graph sequence. The union graph is
/// guaranteed connected: the full sequence is resampled up to 100 times,
/// then a random spanning tree across the remaining components is inserted
/// at uniformly random steps. With `per_step_connected`, the same
/// resample-then-repair policy applies to every single step instead.
pub fn generate_er_sequence(cfg: &SynthConfig) -> Result<GraphSequence> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, &[STREAM_GRAPHS]);
    let steps = cfg.horizon + 1;

    if cfg.per_step_connected {
        let mut edges = Vec::with_capacity(steps);
        for k in 0..steps {
            let p = cfg.edge_probability.probability(k, &mut rng);
            let mut step = draw_step_edges(cfg.n, p, &mut rng);
            for _ in 1..RESAMPLE_ATTEMPTS {
                if union_components(cfg.n, std::slice::from_ref(&step)).component_count() == 1 {
                    break;
                }
                step = draw_step_edges(cfg.n, p, &mut rng);
            }
            let mut uf = union_components(cfg.n, std::slice::from_ref(&step));
            step.extend(spanning_repair_edges(cfg.n, &mut uf, &mut rng));
            edges.push(step);
        }
        return GraphSequence::new(cfg.n, edges);
    }

    let mut edges = Vec::new();
    for _ in 0..RESAMPLE_ATTEMPTS {
        edges = (0..steps)
            .map(|k| {
                let p = cfg.edge_probability.probability(k, &mut rng);
                draw_step_edges(cfg.n, p, &mut rng)
            })
            .collect();
        if union_components(cfg.n, &edges).component_count() == 1 {
            return GraphSequence::new(cfg.n, edges);
        }
    }
    let mut uf = union_components(cfg.n, &edges);
    for (i, j) in spanning_repair_edges(cfg.n, &mut uf, &mut rng) {
        let k = rng.random_range(0..steps);
        edges[k].push((i, j));
    }
    GraphSequence::new(cfg.n, edges)
}

/// Gaussian difference observations `y_ij(k) = z_i - z_j + σ·ξ`.
pub fn generate_observations(
    truth: &StrengthTrajectory,
    graph: &GraphSequence,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if truth.item_count() != graph.item_count() || truth.horizon() != graph.horizon() {
        return Err(Error::Dimension(
            "truth shape differs from graph shape".into(),
        ));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let mut rng = substream(seed, &[STREAM_NOISE]);
    let values = (0..graph.step_count())
        .map(|k| {
            let block = truth.block(k);
            graph
                .edges(k)
                .iter()
                .map(|&(i, j)| {
                    let noise: f64 = rng.sample(StandardNormal);
                    block[i] - block[j] + sigma * noise
                })
                .collect()
        })
        .collect();
    ObservationSet::new(graph.clone(), values)
}

/// Win/loss observations: each edge plays `trials` rounds with win
/// probability `w_i / (w_i + w_j)` and reports the half-smoothed log-odds
/// `ln((wins + ½) / (trials - wins + ½))`.
pub fn generate_btl_observations(
    strengths: &StrengthTrajectory,
    graph: &GraphSequence,
    trials: u64,
    seed: u64,
) -> Result<ObservationSet> {
    if strengths.item_count() != graph.item_count() || strengths.horizon() != graph.horizon() {
        return Err(Error::Dimension(
            "strength shape differs from graph shape".into(),
        ));
    }
    if trials < 1 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if strengths
        .as_slice()
        .iter()
        .any(|&w| !(w > 0.0 && w.is_finite()))
    {
        return Err(Error::InvalidArgument(
            "BTL strengths must be positive".into(),
        ));
    }
    let mut rng = substream(seed, &[STREAM_BTL]);
    let values = (0..graph.step_count())
        .map(|k| {
            let block = strengths.block(k);
            graph
                .edges(k)
                .iter()
                .map(|&(i, j)| {
                    let p = block[i] / (block[i] + block[j]);
                    let dist = Binomial::new(trials, p).expect("valid win probability");
                    let wins = rng.sample(dist) as f64;
                    smoothed_log_odds(wins, trials)
                })
                .collect()
        })
        .collect();
    ObservationSet::new(graph.clone(), values)
}

/// `ln((wins + ½) / (trials - wins + ½))`.
pub fn smoothed_log_odds(wins: f64, trials: u64) -> f64 {
    ((wins + 0.5) / (trials as f64 - wins + 0.5)).ln()
}

/// Entrywise exponential, mapping log-strengths to BTL strengths.
pub fn exponentiate(z: &StrengthTrajectory) -> StrengthTrajectory {
    let data = z.as_slice().iter().map(|v| v.exp()).collect();
    StrengthTrajectory::from_flat(z.item_count(), data).expect("shape preserved")
}
