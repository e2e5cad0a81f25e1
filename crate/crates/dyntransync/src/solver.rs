//! Matrix-free LSQR for `min |A x - b|` with minimum-norm limit.
//!
//! Golub–Kahan bidiagonalization with the two standard stopping tests:
//! the system is declared solved when either the relative residual
//! `|r| / |b|` drops below the tolerance (consistent systems) or the
//! normal-equation residual `|Aᵀr| / (|A|·|r|)` does (genuine least-squares
//! problems). Starting from the zero vector keeps all iterates in the row
//! space of `A`, so the limit is the minimum-norm solution.

/// A linear operator given by its apply/adjoint pair.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`; `out` is zeroed by the caller contract.
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`.
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

/// Outcome of an LSQR run.
#[derive(Debug, Clone)]
pub struct LsqrOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Estimated residual norm `|b - A x|`.
    pub residual_norm: f64,
    /// Residual norm relative to `|b|`.
    pub rel_residual: f64,
    /// Whether a stopping test fired before the iteration cap.
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scale(v: &mut [f64], s: f64) {
    for x in v {
        *x *= s;
    }
}

/// Runs LSQR on `min |A x - b|` from the zero start.
pub fn lsqr(
    op: &dyn LinearOperator,
    b: &[f64],
    rel_tolerance: f64,
    max_iterations: usize,
) -> LsqrOutcome {
    assert_eq!(b.len(), op.rows(), "rhs length must match operator rows");
    let m = op.rows();
    let nvars = op.cols();
    let atol = rel_tolerance;
    let btol = rel_tolerance;

    let mut x = vec![0.0; nvars];
    let mut u = b.to_vec();
    let beta0 = norm(&u);
    if beta0 == 0.0 {
        return LsqrOutcome {
            solution: x,
            iterations: 0,
            residual_norm: 0.0,
            rel_residual: 0.0,
            converged: true,
        };
    }
    scale(&mut u, 1.0 / beta0);

    let mut v = vec![0.0; nvars];
    op.apply_transpose(&u, &mut v);
    let mut alpha = norm(&v);
    if alpha > 0.0 {
        scale(&mut v, 1.0 / alpha);
    }

    let mut w = v.clone();
    let mut phi_bar = beta0;
    let mut rho_bar = alpha;
    let mut norm_a_sq = alpha * alpha;
    let mut norm_ar = alpha * beta0;

    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; nvars];

    if norm_ar == 0.0 {
        // b is orthogonal to the range of A; x = 0 is the LS solution.
        return LsqrOutcome {
            solution: x,
            iterations: 0,
            residual_norm: beta0,
            rel_residual: 1.0,
            converged: true,
        };
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;

        // Continue the bidiagonalization.
        op.apply(&v, &mut tmp_m);
        for (ui, ti) in u.iter_mut().zip(&tmp_m) {
            *ui = ti - alpha * *ui;
        }
        let beta = norm(&u);
        if beta > 0.0 {
            scale(&mut u, 1.0 / beta);
        }

        op.apply_transpose(&u, &mut tmp_n);
        for (vi, ti) in v.iter_mut().zip(&tmp_n) {
            *vi = ti - beta * *vi;
        }
        alpha = norm(&v);
        if alpha > 0.0 {
            scale(&mut v, 1.0 / alpha);
        }
        norm_a_sq += alpha * alpha + beta * beta;

        // Apply the next plane rotation of the QR factorization.
        let rho = (rho_bar * rho_bar + beta * beta).sqrt();
        let c = rho_bar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rho_bar = -c * alpha;
        let phi = c * phi_bar;
        phi_bar *= s;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for ((xi, wi), vi) in x.iter_mut().zip(&mut w).zip(&v) {
            *xi += t1 * *wi;
            *wi = vi + t2 * *wi;
        }

        let norm_a = norm_a_sq.sqrt();
        norm_ar = phi_bar * alpha * c.abs();
        let norm_x = norm(&x);

        let residual_ok = phi_bar <= btol * beta0 + atol * norm_a * norm_x;
        let normal_eq_ok = norm_ar <= atol * norm_a * phi_bar.max(f64::MIN_POSITIVE);
        if residual_ok || normal_eq_ok {
            converged = true;
            break;
        }
    }

    LsqrOutcome {
        solution: x,
        iterations,
        residual_norm: phi_bar,
        rel_residual: phi_bar / beta0,
        converged,
    }
}

/// Dense row-major operator, used in tests and tiny problems.
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.data[r * self.cols..(r + 1) * self.cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            for (o, a) in out
                .iter_mut()
                .zip(&self.data[r * self.cols..(r + 1) * self.cols])
            {
                *o += a * yr;
            }
        }
    }
}
