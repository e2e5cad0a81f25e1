//! Property tests for the operator algebra and the metric gauges.

use dyntransync::estimators::{naive_ls, SolverConfig};
use dyntransync::evalmetrics::{trajectory_mse, upsets};
use dyntransync::graphseq::{GraphSequence, ObservationSet, StrengthTrajectory};
use dyntransync::spectral::SpectralBasis;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Dimensions, a trajectory and a per-step random graph.
fn instance() -> impl Strategy<Value = (GraphSequence, StrengthTrajectory)> {
    (2usize..=6, 1usize..=5).prop_flat_map(|(n, horizon)| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let steps = horizon + 1;
        let edges =
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), pairs.len()), steps)
                .prop_map(move |masks| {
                    masks
                        .into_iter()
                        .map(|mask| {
                            pairs
                                .iter()
                                .zip(mask)
                                .filter_map(|(&e, keep)| keep.then_some(e))
                                .collect::<Vec<_>>()
                        })
                        .collect::<Vec<_>>()
                });
        let data = proptest::collection::vec(-1.0f64..1.0, n * steps);
        (edges, data).prop_map(move |(edges, data)| {
            (
                GraphSequence::new(n, edges).unwrap(),
                StrengthTrajectory::from_flat(n, data).unwrap(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incidence_adjoint_identity((g, z) in instance(), w_seed in any::<u64>()) {
        let n = g.item_count();
        for k in 0..g.step_count() {
            let we: Vec<f64> = (0..g.edge_count(k))
                .map(|e| ((w_seed.wrapping_add(e as u64 * 37 + k as u64) % 1000) as f64) / 500.0 - 1.0)
                .collect();
            let qz = g.incidence_apply(k, z.block(k)).unwrap();
            let qw = g.incidence_adjoint(k, &we).unwrap();
            let lhs: f64 = qz.iter().zip(&we).map(|(a, b)| a * b).sum();
            let rhs: f64 = z.block(k).iter().zip(&qw).map(|(a, b)| a * b).sum();
            prop_assert!(close(lhs, rhs, 1e-12));
            let _ = n;
        }
    }

    #[test]
    fn laplacian_psd_and_null_space((g, z) in instance()) {
        let n = g.item_count();
        for k in 0..g.step_count() {
            let lz = g.laplacian_apply(k, z.block(k)).unwrap();
            let quad: f64 = z.block(k).iter().zip(&lz).map(|(a, b)| a * b).sum();
            prop_assert!(quad >= -1e-12);
            let ones = vec![1.0; n];
            let lones = g.laplacian_apply(k, &ones).unwrap();
            prop_assert!(lones.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn smoothness_norm_identity((_g, z) in instance()) {
        let n = z.item_count() as f64;
        let fast: f64 = z.smoothness_apply().iter().map(|v| v * v).sum();
        let mut direct = 0.0;
        for k in 0..z.horizon() {
            let (a, b) = (z.block(k), z.block(k + 1));
            let mut sq = 0.0;
            let mut sum = 0.0;
            for (x, y) in a.iter().zip(b) {
                let d = x - y;
                sq += d * d;
                sum += d;
            }
            direct += n * sq - sum * sum;
        }
        prop_assert!(close(fast, direct, 1e-10));

        // literal row-per-pair materialization of the full operator
        let mut full = 0.0;
        let n_us = z.item_count();
        for k in 0..z.horizon() {
            for i in 0..n_us {
                for j in (i + 1)..n_us {
                    let d = (z.block(k)[i] - z.block(k + 1)[i])
                        - (z.block(k)[j] - z.block(k + 1)[j]);
                    full += d * d;
                }
            }
        }
        prop_assert!(close(fast, full, 1e-10));
    }

    #[test]
    fn smoothness_shift_invariance((_g, z) in instance(), shifts in proptest::collection::vec(-3.0f64..3.0, 16)) {
        let mut shifted = z.clone();
        for k in 0..shifted.step_count() {
            let c = shifts[k % shifts.len()];
            for v in shifted.block_mut(k) {
                *v += c;
            }
        }
        prop_assert!(close(z.smoothness_penalty(), shifted.smoothness_penalty(), 1e-10));
    }

    #[test]
    fn projection_contract((_g, z) in instance(), tau_frac in 0.02f64..1.5) {
        let basis = SpectralBasis::new(z.item_count(), z.horizon()).unwrap();
        let tau = tau_frac * basis.full_pass_threshold();
        let p = basis.project_low_frequency(&z, tau).unwrap();
        let pp = basis.project_low_frequency(&p, tau).unwrap();
        for (a, b) in p.as_slice().iter().zip(pp.as_slice()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let nz = z.norm();
        let np = p.norm();
        let removed: f64 = z
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        prop_assert!(close(nz * nz, np * np + removed, 1e-10));

        // smoothness-budget bias bound on the centered part
        let mut centered = z.clone();
        centered.center_blocks();
        let pc = basis.project_low_frequency(&centered, tau).unwrap();
        let removed_c: f64 = centered
            .as_slice()
            .iter()
            .zip(pc.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        prop_assert!(removed_c <= centered.smoothness_penalty() / tau + 1e-9);
    }

    #[test]
    fn metric_gauge_invariance((g, z) in instance(), shifts in proptest::collection::vec(-2.0f64..2.0, 16)) {
        let values: Vec<Vec<f64>> = (0..g.step_count())
            .map(|k| g.incidence_apply(k, z.block(k)).unwrap())
            .collect();
        let obs = ObservationSet::new(g, values).unwrap();

        let mut shifted = z.clone();
        for k in 0..shifted.step_count() {
            let c = shifts[k % shifts.len()];
            for v in shifted.block_mut(k) {
                *v += c;
            }
        }
        prop_assert!(trajectory_mse(&shifted, &z).unwrap() < 1e-20);
        prop_assert_eq!(upsets(&obs, &shifted).unwrap(), upsets(&obs, &z).unwrap());
    }

    #[test]
    fn min_norm_solution_is_component_centered((g, z) in instance()) {
        let values: Vec<Vec<f64>> = (0..g.step_count())
            .map(|k| g.incidence_apply(k, z.block(k)).unwrap())
            .collect();
        let obs = ObservationSet::new(g, values).unwrap();
        let fit = naive_ls(&obs, &SolverConfig::default()).unwrap();
        prop_assert!(fit.trajectory.is_block_centered());
    }
}
