//! Dense materializations of the stacked operators, used by the
//! size-capped diagnostics. Production estimation paths never call these.

use nalgebra::DMatrix;

use crate::graphseq::GraphSequence;

/// Dense Laplacian of the graph at step `k`.
pub(crate) fn laplacian(g: &GraphSequence, k: usize) -> DMatrix<f64> {
    let n = g.item_count();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j) in g.edges(k) {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

/// Block-diagonal stacked Laplacian on `n(T+1)` coordinates.
pub(crate) fn stacked_laplacian(g: &GraphSequence) -> DMatrix<f64> {
    let n = g.item_count();
    let steps = g.step_count();
    let mut l = DMatrix::zeros(n * steps, n * steps);
    for k in 0..steps {
        let block = laplacian(g, k);
        l.view_mut((k * n, k * n), (n, n)).copy_from(&block);
    }
    l
}

/// Gram matrix of the smoothness operator: path Laplacian ⊗ `(n·I - 1·1ᵀ)`.
pub(crate) fn smoothness_gram(n: usize, horizon: usize) -> DMatrix<f64> {
    let steps = horizon + 1;
    let mut path = DMatrix::zeros(steps, steps);
    for i in 0..horizon {
        path[(i, i)] += 1.0;
        path[(i + 1, i + 1)] += 1.0;
        path[(i, i + 1)] -= 1.0;
        path[(i + 1, i)] -= 1.0;
    }
    let complete = DMatrix::from_fn(n, n, |i, j| if i == j { n as f64 - 1.0 } else { -1.0 });
    path.kronecker(&complete)
}

/// `L + λ·EᵀE` on `n(T+1)` coordinates.
pub(crate) fn regularized_laplacian(g: &GraphSequence, lambda: f64) -> DMatrix<f64> {
    stacked_laplacian(g) + smoothness_gram(g.item_count(), g.horizon()) * lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphseq::StrengthTrajectory;
    use rand::Rng;

    #[test]
    fn smoothness_gram_matches_operator() {
        let mut rng = crate::rng::substream(3, &[71]);
        for _ in 0..10 {
            let n = rng.random_range(2..=4usize);
            let horizon = rng.random_range(1..=4usize);
            let gram = smoothness_gram(n, horizon);
            let data: Vec<f64> = (0..n * (horizon + 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let z = StrengthTrajectory::from_flat(n, data.clone()).unwrap();
            let ez = z.smoothness_apply();
            let quad_fast: f64 = ez.iter().map(|v| v * v).sum();
            let v = nalgebra::DVector::from_column_slice(&data);
            let quad_dense = (v.transpose() * &gram * &v)[(0, 0)];
            assert!((quad_fast - quad_dense).abs() < 1e-10 * (1.0 + quad_dense.abs()));
        }
    }

    #[test]
    fn stacked_laplacian_matches_apply() {
        let g = GraphSequence::new(3, vec![vec![(0, 1), (1, 2)], vec![(0, 2)]]).unwrap();
        let l = stacked_laplacian(&g);
        let z = [0.3, -0.7, 0.4, 1.0, 0.0, -1.0];
        for k in 0..2 {
            let fast = g.laplacian_apply(k, &z[k * 3..(k + 1) * 3]).unwrap();
            for i in 0..3 {
                let dense: f64 = (0..6).map(|c| l[(k * 3 + i, c)] * z[c]).sum();
                assert!((fast[i] - dense).abs() < 1e-12);
            }
        }
    }
}
