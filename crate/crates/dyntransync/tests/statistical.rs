//! Seeded statistical behavior: the bias-variance sweet spot of the
//! penalty rule and cross-validation landing near it.
//!
//! The parameter rules are calibrated against the smoothness budget, so
//! these checks use truths that saturate it: a centered Gaussian draw is
//! low-pass filtered to a handful of slow modes and rescaled until its
//! smoothness norm equals the budget exactly. (The benchmark generator
//! deliberately undershoots its budget, which would push the optimal
//! penalty far above the rule value and make this comparison vacuous.)

use dyntransync::estimators::{choose_lambda, dls, LambdaRegime, SolverConfig};
use dyntransync::evalmetrics::{cross_validate, trajectory_mse, CvCriterion, EstimatorKind};
use dyntransync::graphseq::StrengthTrajectory;
use dyntransync::rng::{derive_seed, substream};
use dyntransync::spectral::SpectralBasis;
use dyntransync::synth::{generate_er_sequence, generate_observations, EdgeSchedule, SynthConfig};
use rand::Rng;

fn sparse_cfg(n: usize, horizon: usize, sigma: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n,
        horizon,
        smoothness: 1.0,
        noise_sigma: sigma,
        edge_probability: EdgeSchedule::UniformRandom {
            lo: 1.0 / n as f64,
            hi: (n as f64).ln() / n as f64,
        },
        seed,
        per_step_connected: false,
        btl_trials: 1,
    }
}

/// A block-centered truth with exactly `budget` smoothness, supported on
/// the `kept` slowest nonzero temporal frequencies.
fn saturated_truth(
    n: usize,
    horizon: usize,
    budget: f64,
    kept: usize,
    seed: u64,
) -> StrengthTrajectory {
    assert!(kept >= 1 && kept <= horizon);
    let basis = SpectralBasis::new(n, horizon).unwrap();
    let mut rng = substream(seed, &[91]);
    let raw: Vec<f64> = (0..n * (horizon + 1))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut z = StrengthTrajectory::from_flat(n, raw).unwrap();
    z.center_blocks();
    // keep descending indices horizon-kept..=horizon (the `kept` slowest
    // nonzero frequencies plus the constant mode)
    let tau = 0.5
        * (basis.frequency_weight(horizon - kept)
            + if horizon - kept > 0 {
                basis.frequency_weight(horizon - kept - 1)
            } else {
                basis.full_pass_threshold()
            });
    let mut truth = basis.project_low_frequency(&z, tau).unwrap();
    let realized = truth.smoothness_penalty();
    assert!(realized > 0.0);
    let scale = (budget / realized).sqrt();
    for v in truth.as_mut_slice() {
        *v *= scale;
    }
    truth
}

#[test]
fn rule_lambda_beats_extreme_penalties() {
    // The budget must be macroscopic against the noise for the comparison
    // to bite: with a tiny budget every estimator degenerates toward the
    // static fit and more smoothing only ever helps.
    let n = 10;
    let horizon = 32;
    let budget = 8.0;
    let rule = choose_lambda(horizon, budget, LambdaRegime::FixedGraph).unwrap();
    let lambdas = [rule / 100.0, rule, rule * 100.0];
    let mut totals = [0.0f64; 3];
    let seeds = 30;
    for trial in 0..seeds {
        let seed = derive_seed(424242, &[trial]);
        let cfg = sparse_cfg(n, horizon, 1.0, seed);
        let truth = saturated_truth(n, horizon, budget, 2, seed);
        let graph = generate_er_sequence(&cfg).unwrap();
        let obs = generate_observations(&truth, &graph, cfg.noise_sigma, seed).unwrap();
        for (slot, &lambda) in lambdas.iter().enumerate() {
            let fit = dls(&obs, lambda, &SolverConfig::default()).unwrap();
            totals[slot] += trajectory_mse(&fit.trajectory, &truth).unwrap();
        }
    }
    let means: Vec<f64> = totals.iter().map(|t| t / seeds as f64).collect();
    assert!(
        means[1] <= means[0] && means[1] <= means[2],
        "rule lambda is not the interior minimum: {means:?}"
    );
}

#[test]
fn cross_validation_lands_near_rule_lambda() {
    let n = 20;
    let horizon = 30;
    let budget = 1.0;
    let rule = choose_lambda(horizon, budget, LambdaRegime::FixedGraph).unwrap();
    // log-spaced 7-point grid centered on the rule value
    let grid: Vec<f64> = (-3..=3)
        .map(|e| rule * 10f64.powf(e as f64 / 2.0))
        .collect();
    let seeds = 20;
    let mut interior_hits = 0;
    for trial in 0..seeds {
        let seed = derive_seed(77, &[trial]);
        let mut cfg = sparse_cfg(n, horizon, 0.5, seed);
        cfg.edge_probability = EdgeSchedule::Constant { value: 0.5 };
        let truth = saturated_truth(n, horizon, budget, 2, seed);
        let graph = generate_er_sequence(&cfg).unwrap();
        let obs = generate_observations(&truth, &graph, cfg.noise_sigma, seed).unwrap();
        let report = cross_validate(
            &obs,
            EstimatorKind::Dls,
            &grid,
            CvCriterion::Mse,
            4,
            seed,
            &SolverConfig::default(),
        )
        .unwrap();
        if report.selected_index > 0 && report.selected_index < grid.len() - 1 {
            interior_hits += 1;
        }
    }
    assert!(
        interior_hits * 100 >= seeds * 60,
        "only {interior_hits}/{seeds} runs selected an interior grid point"
    );
}
