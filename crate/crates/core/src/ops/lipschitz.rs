use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multiplier applied to the power-iteration estimate.
pub const LIPSCHITZ_SAFETY: f64 = 1.05;

/// Power-iteration estimate of `λ_max(adjoint ∘ apply)` on `R^dim`, scaled
/// by [`LIPSCHITZ_SAFETY`]. Returns 0 for the zero operator.
pub fn estimate_lipschitz<F, G>(apply: F, adjoint: G, dim: usize, iters: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let n = norm(&v);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= n);
        let w = adjoint(&apply(&v));
        // Rayleigh quotient of the PSD operator at the unit vector v
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        v = w;
    }
    LIPSCHITZ_SAFETY * lambda.max(0.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn identity_operator() {
        let id = |v: &[f64]| v.to_vec();
        assert!((estimate_lipschitz(id, id, 10, 5, 1) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn scalar_diagonal() {
        let three = |v: &[f64]| v.iter().map(|x| 3.0 * x).collect::<Vec<_>>();
        assert!((estimate_lipschitz(three, three, 1, 3, 0) - 9.0 * 1.05).abs() < 1e-12);
    }

    #[test]
    fn zero_operator() {
        let zero = |v: &[f64]| vec![0.0; v.len()];
        assert_eq!(estimate_lipschitz(zero, zero, 4, 10, 2), 0.0);
    }

    #[test]
    fn random_matrix_matches_dense_eigen() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = DMatrix::from_fn(8, 8, |_, _| rng.gen::<f64>() - 0.5);
        let apply = |v: &[f64]| (&a * DVector::from_column_slice(v)).as_slice().to_vec();
        let adjoint = |v: &[f64]| (a.tr_mul(&DVector::from_column_slice(v))).as_slice().to_vec();
        let est = estimate_lipschitz(apply, adjoint, 8, 100, 5) / LIPSCHITZ_SAFETY;
        let eig = (a.transpose() * &a).symmetric_eigen();
        let top = eig.eigenvalues.max();
        assert!((est - top).abs() <= 0.01 * top, "{est} vs {top}");
    }
}
