//! Closed-form eigenstructure of the temporal smoothness operator and the
//! low-frequency projection used by the projection estimator.
//!
//! The Gram matrix of the smoothness operator factors as a Kronecker
//! product: path-graph Laplacian in time ⊗ complete-graph Laplacian across
//! items. Both factors diagonalize in closed form, so the projection onto
//! the low-frequency eigenspace never touches a general eigensolver:
//!
//! * time part: the path Laplacian on `T + 1` vertices has eigenvalues
//!   `μ = 4·sin²(f·π / (2(T+1)))` for `f = 0, ..., T`, with DCT-II
//!   eigenvectors `u[i] ∝ cos((i + ½)·f·π / (T+1))`. Eigenvalues are indexed
//!   here in descending order, `μ_0 ≥ ... ≥ μ_{T-1} > μ_T = 0`, with the
//!   constant vector last.
//! * item part: any orthonormal basis of the centered subspace works; the
//!   deterministic Helmert construction is used.
//!
//! The eigenvector `u_k ⊗ a_j` of the smoothness Gram carries frequency
//! weight `(n-1)·μ_k` in the thresholding convention used throughout (the
//! same convention the parameter-choice rules are calibrated against), and
//! block-mean directions carry weight zero, so they always pass through.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphseq::StrengthTrajectory;

/// Eigenvalues and eigenvectors of the path-graph Laplacian on
/// `horizon + 1` vertices, ordered descending; the last eigenpair is
/// `(0, 1/sqrt(T+1))`.
pub fn path_eigenpairs(horizon: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if horizon < 1 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 1, got {horizon}"
        )));
    }
    let steps = horizon + 1;
    let mut values = Vec::with_capacity(steps);
    let mut vectors = Vec::with_capacity(steps);
    for k in 0..steps {
        let freq = (horizon - k) as f64;
        let half_angle = freq * std::f64::consts::PI / (2.0 * steps as f64);
        values.push(4.0 * half_angle.sin().powi(2));
        let norm = if horizon == k {
            (1.0 / steps as f64).sqrt()
        } else {
            (2.0 / steps as f64).sqrt()
        };
        let vector = (0..steps)
            .map(|i| norm * ((i as f64 + 0.5) * freq * std::f64::consts::PI / steps as f64).cos())
            .collect();
        vectors.push(vector);
    }
    Ok((values, vectors))
}

/// Helmert orthonormal basis `a_1, ..., a_{n-1}` of the centered subspace:
/// `a_j` has `j` leading entries `1/sqrt(j(j+1))`, then `-j/sqrt(j(j+1))`,
/// then zeros.
pub fn centered_basis(n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    Ok((1..n)
        .map(|j| {
            let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
            let mut a = vec![0.0; n];
            for entry in a.iter_mut().take(j) {
                *entry = scale;
            }
            a[j] = -(j as f64) * scale;
            a
        })
        .collect())
}

/// Upper bound on the number of eigenpairs with frequency weight below
/// `eps`: `ceil(T + n + sqrt((n-1)·eps)·(T+1)/π)`.
pub fn low_frequency_count_bound(horizon: usize, n: usize, eps: f64) -> Result<usize> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if n < 2 || horizon < 1 {
        return Err(Error::InvalidArgument(
            "need n >= 2 and horizon >= 1".into(),
        ));
    }
    let bound = (horizon + n) as f64
        + (((n - 1) as f64) * eps).sqrt() * (horizon as f64 + 1.0) / std::f64::consts::PI;
    Ok(bound.ceil() as usize)
}

/// The time indices kept by a low-frequency threshold `tau`.
///
/// Index `k` is kept iff `(n-1)·μ_k < tau`; the constant direction `k = T`
/// (with `μ_T = 0`) is always kept. All centered item-coordinates share this
/// set, and block-mean directions are kept at every `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyIndexSet {
    pub tau: f64,
    pub kept_time_indices: Vec<usize>,
}

impl FrequencyIndexSet {
    /// Whether every time index is kept (the projection is the identity).
    pub fn is_full_pass(&self, horizon: usize) -> bool {
        self.kept_time_indices.len() == horizon + 1
    }

    /// Dimension of the projection subspace for `n` items: kept centered
    /// directions plus the `T + 1` block-mean directions.
    pub fn subspace_dim(&self, n: usize, horizon: usize) -> usize {
        self.kept_time_indices.len() * (n - 1) + horizon + 1
    }
}

/// Precomputed spectral data for trajectories on `n` items over horizon `T`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    n: usize,
    horizon: usize,
    path_eigenvalues: Vec<f64>,
    path_eigenvectors: Vec<Vec<f64>>,
    helmert: Vec<Vec<f64>>,
}

impl SpectralBasis {
    pub fn new(n: usize, horizon: usize) -> Result<Self> {
        let (path_eigenvalues, path_eigenvectors) = path_eigenpairs(horizon)?;
        let helmert = centered_basis(n)?;
        Ok(Self {
            n,
            horizon,
            path_eigenvalues,
            path_eigenvectors,
            helmert,
        })
    }

    pub fn item_count(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Path-Laplacian eigenvalues `μ_0 ≥ ... ≥ μ_T = 0`.
    pub fn path_eigenvalues(&self) -> &[f64] {
        &self.path_eigenvalues
    }

    /// Path-Laplacian eigenvector for descending index `k`.
    pub fn path_eigenvector(&self, k: usize) -> &[f64] {
        &self.path_eigenvectors[k]
    }

    /// The Helmert basis `a_1, ..., a_{n-1}`.
    pub fn centered_basis(&self) -> &[Vec<f64>] {
        &self.helmert
    }

    /// Frequency weight `(n-1)·μ_k` of the centered eigenvectors at time
    /// index `k`.
    pub fn frequency_weight(&self, k: usize) -> f64 {
        (self.n as f64 - 1.0) * self.path_eigenvalues[k]
    }

    /// Kept time indices for threshold `tau`.
    pub fn frequency_index_set(&self, tau: f64) -> Result<FrequencyIndexSet> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive, got {tau}"
            )));
        }
        let kept = (0..=self.horizon)
            .filter(|&k| self.frequency_weight(k) < tau)
            .collect();
        Ok(FrequencyIndexSet {
            tau,
            kept_time_indices: kept,
        })
    }

    /// Smallest threshold that keeps every frequency, i.e. anything strictly
    /// above `(n-1)·μ_0`.
    pub fn full_pass_threshold(&self) -> f64 {
        self.frequency_weight(0) + 1.0
    }

    /// Projects a trajectory onto the low-frequency subspace `V_tau`.
    ///
    /// Block means pass through unchanged (their frequency weight is zero);
    /// each centered Helmert coordinate series is transformed to the path
    /// eigenbasis, coefficients with `(n-1)·μ_k ≥ tau` are zeroed, and the
    /// series is transformed back. The output is block-centered whenever the
    /// input is.
    pub fn project_low_frequency(
        &self,
        z: &StrengthTrajectory,
        tau: f64,
    ) -> Result<StrengthTrajectory> {
        let kept = self.frequency_index_set(tau)?;
        self.project_with(z, &kept)
    }

    /// Projection with a precomputed kept-index set.
    pub fn project_with(
        &self,
        z: &StrengthTrajectory,
        kept: &FrequencyIndexSet,
    ) -> Result<StrengthTrajectory> {
        if z.item_count() != self.n || z.horizon() != self.horizon {
            return Err(Error::Dimension(format!(
                "trajectory is {}x{} but basis is {}x{}",
                z.item_count(),
                z.horizon() + 1,
                self.n,
                self.horizon + 1
            )));
        }
        if kept.is_full_pass(self.horizon) {
            return Ok(z.clone());
        }
        let steps = self.horizon + 1;

        let mut means = vec![0.0; steps];
        for (k, mean) in means.iter_mut().enumerate() {
            *mean = z.block(k).iter().sum::<f64>() / self.n as f64;
        }

        // Helmert coordinates: coords[j][k] = <z_k - mean_k, a_j>.
        // (a_j ⊥ 1 makes subtracting the mean a no-op analytically; it is
        // kept for numerical hygiene on badly uncentered inputs.)
        let mut coords = vec![vec![0.0; steps]; self.n - 1];
        for k in 0..steps {
            let block = z.block(k);
            for (j, a) in self.helmert.iter().enumerate() {
                coords[j][k] = block
                    .iter()
                    .zip(a)
                    .map(|(&v, &w)| (v - means[k]) * w)
                    .sum::<f64>();
            }
        }

        // Low-pass each coordinate series in the path eigenbasis.
        let mut filtered = vec![vec![0.0; steps]; self.n - 1];
        for j in 0..self.n - 1 {
            for &k in &kept.kept_time_indices {
                let u = &self.path_eigenvectors[k];
                let coeff: f64 = coords[j].iter().zip(u).map(|(&c, &v)| c * v).sum();
                for (f, &v) in filtered[j].iter_mut().zip(u) {
                    *f += coeff * v;
                }
            }
        }

        let mut out = StrengthTrajectory::zeros(self.n, self.horizon);
        for k in 0..steps {
            let block = out.block_mut(k);
            for v in block.iter_mut() {
                *v = means[k];
            }
            for (j, a) in self.helmert.iter().enumerate() {
                let c = filtered[j][k];
                for (v, &w) in block.iter_mut().zip(a) {
                    *v += c * w;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    /// Dense path Laplacian on `steps` vertices.
    fn path_laplacian(steps: usize) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(steps, steps);
        for i in 0..steps - 1 {
            l[(i, i)] += 1.0;
            l[(i + 1, i + 1)] += 1.0;
            l[(i, i + 1)] -= 1.0;
            l[(i + 1, i)] -= 1.0;
        }
        l
    }

    #[test]
    fn eigenvalues_three_vertex_path() {
        let (vals, _) = path_eigenpairs(2).unwrap();
        assert!(close(vals[0], 3.0, 1e-12));
        assert!(close(vals[1], 1.0, 1e-12));
        assert!(vals[2].abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_single_edge() {
        let (vals, _) = path_eigenpairs(1).unwrap();
        assert!(close(vals[0], 2.0, 1e-12));
        assert!(vals[1].abs() < 1e-15);
    }

    #[test]
    fn eigenpairs_match_dense_oracle() {
        for horizon in 1..=16 {
            let steps = horizon + 1;
            let l = path_laplacian(steps);
            let (vals, vecs) = path_eigenpairs(horizon).unwrap();
            // descending order with zero last
            for w in vals.windows(2) {
                assert!(w[0] >= w[1]);
            }
            assert!(vals[horizon].abs() < 1e-14);
            // eigen-residuals against the materialized matrix
            for (k, u) in vecs.iter().enumerate() {
                let uv = nalgebra::DVector::from_column_slice(u);
                let resid = (&l * &uv - vals[k] * &uv).norm();
                let scale = vals[k].max(1.0);
                assert!(resid < 1e-8 * scale, "T={horizon} k={k} resid={resid}");
            }
            // orthonormality
            for a in 0..steps {
                for b in a..steps {
                    let dot: f64 = vecs[a].iter().zip(&vecs[b]).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
            // eigenvalues agree with the dense spectrum as multisets
            let mut dense: Vec<f64> = l.symmetric_eigenvalues().iter().copied().collect();
            dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (have, want) in vals.iter().zip(&dense) {
                assert!(close(*have, *want, 1e-10));
            }
        }
    }

    #[test]
    fn helmert_two_items() {
        let basis = centered_basis(2).unwrap();
        let r = 0.5f64.sqrt();
        assert!(close(basis[0][0], r, 1e-15));
        assert!(close(basis[0][1], -r, 1e-15));
    }

    #[test]
    fn helmert_orthonormal_and_centered() {
        let basis = centered_basis(3).unwrap();
        for (j, a) in basis.iter().enumerate() {
            assert!(a.iter().sum::<f64>().abs() < 1e-14);
            for (l, b) in basis.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if j == l { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn helmert_eigenvectors_of_complete_graph_laplacian() {
        // C Cᵀ = n·I - 1·1ᵀ, so every centered vector has eigenvalue n.
        let n = 10;
        let gram = DMatrix::from_fn(n, n, |i, j| if i == j { n as f64 - 1.0 } else { -1.0 });
        for a in centered_basis(n).unwrap() {
            let v = nalgebra::DVector::from_column_slice(&a);
            let resid = (&gram * &v - n as f64 * &v).norm();
            assert!(resid < 1e-12, "residual {resid}");
        }
    }

    #[test]
    fn full_pass_projection_is_identity() {
        let basis = SpectralBasis::new(3, 4).unwrap();
        let mut z = StrengthTrajectory::from_blocks(&[
            vec![1.0, -0.5, -0.5],
            vec![0.2, 0.1, -0.3],
            vec![0.0, 0.0, 0.0],
            vec![0.5, -1.0, 0.5],
            vec![-0.1, 0.2, -0.1],
        ])
        .unwrap();
        z.center_blocks();
        let tau = basis.full_pass_threshold();
        let p = basis.project_low_frequency(&z, tau).unwrap();
        for (a, b) in p.as_slice().iter().zip(z.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_centered_trajectory_unchanged() {
        let basis = SpectralBasis::new(4, 3).unwrap();
        let block = vec![0.6, -0.2, -0.3, -0.1];
        let z =
            StrengthTrajectory::from_blocks(&[block.clone(), block.clone(), block.clone(), block])
                .unwrap();
        let p = basis.project_low_frequency(&z, 1e-6).unwrap();
        for (a, b) in p.as_slice().iter().zip(z.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Dense projection assembled from the eigendecomposition of the
    /// literal smoothness Gram `(M Mᵀ) ⊗ (C Cᵀ)`, with the threshold mapped
    /// through the convention bridge: the implementation thresholds
    /// `(n-1)·μ` while the literal Kronecker factor carries `n·μ`.
    fn dense_projection(n: usize, horizon: usize, tau: f64) -> DMatrix<f64> {
        let steps = horizon + 1;
        let mm = path_laplacian(steps);
        let mut cc = DMatrix::from_element(n, n, -1.0);
        for i in 0..n {
            cc[(i, i)] = n as f64 - 1.0;
        }
        let gram = mm.kronecker(&cc);
        let eig = nalgebra::SymmetricEigen::new(gram);
        let cutoff = tau * n as f64 / (n as f64 - 1.0);
        let mut proj = DMatrix::zeros(n * steps, n * steps);
        for (idx, &val) in eig.eigenvalues.iter().enumerate() {
            if val < cutoff {
                let v = eig.eigenvectors.column(idx);
                proj += v * v.transpose();
            }
        }
        proj
    }

    #[test]
    fn projection_matches_dense_oracle_dim7_case() {
        let n = 3;
        let horizon = 2;
        let tau = 2.5;
        let basis = SpectralBasis::new(n, horizon).unwrap();
        let kept = basis.frequency_index_set(tau).unwrap();
        // weights (n-1)·μ = {6, 2, 0}: indices 1 and 2 kept
        assert_eq!(kept.kept_time_indices, vec![1, 2]);
        assert_eq!(kept.subspace_dim(n, horizon), 7);

        let proj = dense_projection(n, horizon, tau);
        let mut rng = crate::rng::substream(5, &[1]);
        for _ in 0..5 {
            let data: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let z = StrengthTrajectory::from_flat(n, data.clone()).unwrap();
            let fast = basis.project_low_frequency(&z, tau).unwrap();
            let dense = &proj * nalgebra::DVector::from_column_slice(&data);
            for (a, b) in fast.as_slice().iter().zip(dense.iter()) {
                assert!((a - b).abs() < 1e-9, "fast {a} dense {b}");
            }
        }
    }

    #[test]
    fn projection_idempotent_parseval_monotone() {
        let mut rng = crate::rng::substream(5, &[2]);
        for _ in 0..10 {
            let n = rng.random_range(2..=5usize);
            let horizon = rng.random_range(1..=6usize);
            let basis = SpectralBasis::new(n, horizon).unwrap();
            let data: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let z = StrengthTrajectory::from_flat(n, data).unwrap();
            let tau1 = rng.random_range(0.05..1.0) * basis.full_pass_threshold();
            let tau2 = tau1 * rng.random_range(1.0..3.0);

            let p1 = basis.project_low_frequency(&z, tau1).unwrap();
            let p1p1 = basis.project_low_frequency(&p1, tau1).unwrap();
            for (a, b) in p1.as_slice().iter().zip(p1p1.as_slice()) {
                assert!((a - b).abs() < 1e-10);
            }

            let nz = z.norm();
            let np = p1.norm();
            let res: f64 = z
                .as_slice()
                .iter()
                .zip(p1.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(close(nz * nz, np * np + res, 1e-10));

            let p2 = basis.project_low_frequency(&z, tau2).unwrap();
            assert!(p1.norm() <= p2.norm() + 1e-12);
        }
    }

    #[test]
    fn bias_bound_from_smoothness_budget() {
        let mut rng = crate::rng::substream(5, &[3]);
        for _ in 0..50 {
            let n = rng.random_range(2..=5usize);
            let horizon = rng.random_range(1..=8usize);
            let basis = SpectralBasis::new(n, horizon).unwrap();
            let data: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let mut z = StrengthTrajectory::from_flat(n, data).unwrap();
            z.center_blocks();
            let budget = z.smoothness_penalty();
            let tau = rng.random_range(0.01..2.0);
            let p = basis.project_low_frequency(&z, tau).unwrap();
            let removed: f64 = z
                .as_slice()
                .iter()
                .zip(p.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(
                removed <= budget / tau + 1e-9,
                "removed {removed} budget {budget} tau {tau}"
            );
        }
    }

    #[test]
    fn count_bound_limits() {
        // Vanishing threshold leaves only the null space.
        assert_eq!(low_frequency_count_bound(10, 5, 1e-40).unwrap(), 15);
        // Direct evaluation: ceil(10 + 5 + 2*11/pi) = ceil(22.0028) = 23.
        assert_eq!(low_frequency_count_bound(10, 5, 1.0).unwrap(), 23);
    }

    #[test]
    fn count_bound_dominates_dense_count() {
        let mut rng = crate::rng::substream(5, &[4]);
        for _ in 0..50 {
            let n = rng.random_range(2..=6usize);
            let horizon = rng.random_range(1..=12usize);
            let eps = rng.random_range(0.001..0.8) * (n as f64 - 1.0);
            let basis = SpectralBasis::new(n, horizon).unwrap();
            let kept = basis.frequency_index_set(eps).unwrap();
            let actual = kept.subspace_dim(n, horizon);
            let bound = low_frequency_count_bound(horizon, n, eps).unwrap();
            assert!(
                actual <= bound,
                "n={n} T={horizon} eps={eps}: {actual} > {bound}"
            );
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(path_eigenpairs(0).is_err());
        assert!(centered_basis(1).is_err());
        let basis = SpectralBasis::new(3, 2).unwrap();
        let z = StrengthTrajectory::zeros(3, 2);
        assert!(basis.project_low_frequency(&z, 0.0).is_err());
        assert!(basis.project_low_frequency(&z, -1.0).is_err());
    }
}
