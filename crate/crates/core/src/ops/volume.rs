use nalgebra::DMatrix;

use super::BlurOperator;
use crate::error::{Error, Result};

/// Convex simplex-volume surrogate `½ Σ_{i<j} ‖a_i − a_j‖²`, evaluated as
/// `½ (N‖A‖²_F − ‖A𝟙‖²)`.
pub fn volume_surrogate(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols() as f64;
    let col_sum = a.column_sum();
    (0.5 * (n * a.norm_squared() - col_sum.norm_squared())).max(0.0)
}

/// Gradient of [`volume_surrogate`]: `A(N·I − 𝟙𝟙ᵀ) = N·A − (A𝟙)𝟙ᵀ`.
pub fn volume_gradient(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols() as f64;
    let col_sum = a.column_sum();
    let mut g = a * n;
    for mut col in g.column_iter_mut() {
        col -= &col_sum;
    }
    g
}

/// `‖X − Y_de‖²_Q` with `Q = BBᵀ ⊗ I_M`, computed as `‖(X − Y_de)·B‖²_F`.
pub fn q_norm_sq(x: &DMatrix<f64>, y_de: &DMatrix<f64>, op: &BlurOperator) -> Result<f64> {
    if x.shape() != y_de.shape() {
        return Err(Error::Shape(format!(
            "Q-norm operands {:?} and {:?}",
            x.shape(),
            y_de.shape()
        )));
    }
    Ok(op.apply(&(x - y_de))?.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise(a: &DMatrix<f64>) -> f64 {
        let n = a.ncols();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += (a.column(i) - a.column(j)).norm_squared();
            }
        }
        0.5 * s
    }

    fn sample(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut state = seed;
        DMatrix::from_fn(m, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn identical_columns_have_zero_volume() {
        let a = DMatrix::from_fn(5, 4, |i, _| i as f64);
        assert_eq!(volume_surrogate(&a), 0.0);
        assert!(volume_gradient(&a).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_unit_vectors() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!((volume_surrogate(&a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_column_gradient_is_zero() {
        let a = sample(5, 1, 3);
        assert!(volume_gradient(&a).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trace_form_matches_pairwise() {
        for seed in 0..20 {
            let a = sample(6, 4, seed);
            let p = pairwise(&a);
            assert!((volume_surrogate(&a) - p).abs() <= 1e-10 * p);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let a = sample(5, 3, 11);
        let g = volume_gradient(&a);
        let h = 1e-5;
        for idx in 0..a.len() {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap[idx] += h;
            am[idx] -= h;
            let fd = (pairwise(&ap) - pairwise(&am)) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-6, "entry {idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn q_norm_examples() {
        let op = BlurOperator::new(2, 2, 2).unwrap();
        let x = DMatrix::from_element(1, 4, 1.0);
        let z = DMatrix::zeros(1, 4);
        assert_eq!(q_norm_sq(&x, &x, &op).unwrap(), 0.0);
        assert_eq!(q_norm_sq(&x, &z, &op).unwrap(), 1.0);
        assert!(q_norm_sq(&x, &DMatrix::zeros(2, 4), &op).is_err());
    }
}
