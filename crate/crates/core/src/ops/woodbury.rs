use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Applies `(2DᵀD + ρI)⁻¹` through the Woodbury identity
/// `(1/ρ)(I − (2/ρ)Dᵀ Φ D)` with `Φ = (I + (2/ρ)DDᵀ)⁻¹`, which only inverts
/// an `m×m` matrix for a fat `m×M` response `D`.
#[derive(Debug, Clone)]
pub struct WoodburySolver {
    d: DMatrix<f64>,
    phi: DMatrix<f64>,
    rho: f64,
}

impl WoodburySolver {
    pub fn new(d: &DMatrix<f64>, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!("rho must be > 0, got {rho}")));
        }
        let m = d.nrows();
        let inner = DMatrix::identity(m, m) + (d * d.transpose()) * (2.0 / rho);
        let phi = inner
            .cholesky()
            .ok_or_else(|| Error::Numerical("I + (2/rho)DDᵀ is not positive definite".into()))?
            .inverse();
        // symmetrise away rounding so Φ stays exactly symmetric
        let phi = (&phi + phi.transpose()) * 0.5;
        Ok(Self {
            d: d.clone(),
            phi,
            rho,
        })
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rhs.nrows() != self.d.ncols() {
            return Err(Error::Shape(format!(
                "right-hand side has {} rows, response has {} columns",
                rhs.nrows(),
                self.d.ncols()
            )));
        }
        let down = &self.d * rhs;
        let mixed = &self.phi * down;
        let up = self.d.tr_mul(&mixed);
        Ok((rhs - up * (2.0 / self.rho)) / self.rho)
    }
}

/// `(2DᵀD + ρI)⁻¹ · rhs`.
pub fn woodbury_solve(d: &DMatrix<f64>, rho: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    WoodburySolver::new(d, rho)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_response_divides_by_rho() {
        let rhs = DMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        let out = woodbury_solve(&DMatrix::zeros(2, 5), 4.0, &rhs).unwrap();
        assert!((out - &rhs / 4.0).abs().max() < 1e-15);
    }

    #[test]
    fn large_rho_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DMatrix::from_fn(3, 9, |_, _| rng.gen::<f64>());
        let rhs = DMatrix::from_fn(9, 4, |_, _| rng.gen::<f64>());
        for rho in [1e3, 1e4, 1e5] {
            let out = woodbury_solve(&d, rho, &rhs).unwrap();
            let err = (out - &rhs / rho).abs().max();
            // leading correction is 2DᵀD·rhs/ρ², bounded by 2·‖D‖²·max|rhs|·9/ρ²
            assert!(err < 2.0 * 9.0 * 9.0 / (rho * rho), "rho {rho}: {err}");
        }
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = DMatrix::from_fn(4, 12, |_, _| rng.gen::<f64>());
        let rhs = DMatrix::from_fn(12, 7, |_, _| rng.gen::<f64>() - 0.5);
        let direct = (d.transpose() * &d * 2.0 + DMatrix::identity(12, 12))
            .lu()
            .solve(&rhs)
            .unwrap();
        let fast = woodbury_solve(&d, 1.0, &rhs).unwrap();
        assert!((&fast - &direct).norm() <= 1e-9 * direct.norm());
    }

    #[test]
    fn rejects_bad_rho() {
        let d = DMatrix::zeros(1, 2);
        assert!(WoodburySolver::new(&d, 0.0).is_err());
        assert!(WoodburySolver::new(&d, -1.0).is_err());
        assert!(WoodburySolver::new(&d, f64::NAN).is_err());
    }
}
