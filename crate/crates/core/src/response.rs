//! Scene-adaptive estimate of the 10-m band response `D̃` by nonnegative
//! ridge regression against the rough solution:
//!
//! `min_{D ≥ 0} ‖D·Y_DE − Ỹ_S‖²_F + η‖D‖²_F`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::ops::{estimate_lipschitz, minimize, project_nonneg, ApgOptions, ApgStop, Composite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub eta: f64,
    pub max_iters: usize,
    /// Projected-gradient residual, relative to `max(1, ‖D‖_F)`, at which
    /// the solver stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            eta: 1e-4,
            max_iters: 2000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResponseEstimate {
    pub d: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖D − Π₊(D − ∇F(D)/Lip)‖_F / max(1, ‖D‖_F)` at the returned point.
    pub optimality_residual: f64,
    pub lipschitz: f64,
    pub stop: ApgStop,
}

/// The ridge objective, evaluated through `G = Y·Yᵀ` and `C = Ỹ·Yᵀ` so that
/// a step costs `O(m·M²)` rather than `O(m·M·L)`.
struct Ridge {
    target_sq: f64,
    gram: DMatrix<f64>,
    cross: DMatrix<f64>,
    eta: f64,
}

impl Ridge {
    fn gradient_at(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        (d * &self.gram - &self.cross + d * self.eta) * 2.0
    }

    fn residual(&self, d: &DMatrix<f64>, lip: f64) -> f64 {
        let step = project_nonneg(&(d - self.gradient_at(d) / lip));
        (d - step).norm() / d.norm().max(1.0)
    }
}

impl Composite for Ridge {
    fn value(&self, d: &DMatrix<f64>) -> f64 {
        (d * &self.gram).dot(d) - 2.0 * d.dot(&self.cross)
            + self.target_sq
            + self.eta * d.norm_squared()
    }

    fn gradient(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        self.gradient_at(d)
    }

    fn prox(&self, v: DMatrix<f64>, _step: f64) -> DMatrix<f64> {
        project_nonneg(&v)
    }
}

/// Estimates `D̃` starting from `D = 0`.
pub fn estimate_response(
    y_de: &DMatrix<f64>,
    y_s_hi: &DMatrix<f64>,
    cfg: &RidgeConfig,
) -> Result<ResponseEstimate> {
    let start = DMatrix::zeros(y_s_hi.nrows(), y_de.nrows());
    estimate_response_from(y_de, y_s_hi, cfg, start)
}

/// As [`estimate_response`], from a caller-supplied start (projected onto `D ≥ 0`).
pub fn estimate_response_from(
    y_de: &DMatrix<f64>,
    y_s_hi: &DMatrix<f64>,
    cfg: &RidgeConfig,
    start: DMatrix<f64>,
) -> Result<ResponseEstimate> {
    if !(cfg.eta >= 0.0) || !(cfg.tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "eta and tol must be >= 0, got {} and {}",
            cfg.eta, cfg.tol
        )));
    }
    if y_de.ncols() != y_s_hi.ncols() {
        return Err(Error::Shape(format!(
            "rough solution has {} pixels, product has {}",
            y_de.ncols(),
            y_s_hi.ncols()
        )));
    }
    if start.shape() != (y_s_hi.nrows(), y_de.nrows()) {
        return Err(Error::Shape(format!("start point shape {:?}", start.shape())));
    }
    ensure_finite(y_de.as_slice(), "rough solution")?;
    ensure_finite(y_s_hi.as_slice(), "high-resolution bands")?;

    let gram_top = estimate_lipschitz(
        |v| y_de.tr_mul(&DVector::from_column_slice(v)).as_slice().to_vec(),
        |w| (y_de * DVector::from_column_slice(w)).as_slice().to_vec(),
        y_de.nrows(),
        100,
        cfg.seed,
    );
    if gram_top == 0.0 {
        return Err(Error::Numerical(
            "rough solution is zero; response is unidentifiable".into(),
        ));
    }
    let lip = 2.0 * (gram_top + cfg.eta);

    let problem = Ridge {
        target_sq: y_s_hi.norm_squared(),
        gram: y_de * y_de.transpose(),
        cross: y_s_hi * y_de.transpose(),
        eta: cfg.eta,
    };
    let opts = ApgOptions {
        max_iters: cfg.max_iters,
        tol: 0.0,
        lipschitz: lip,
    };
    let out = minimize(&problem, project_nonneg(&start), &opts, |d, _| {
        problem.residual(d, lip) <= cfg.tol
    });
    let objective = (&out.x * y_de - y_s_hi).norm_squared() + cfg.eta * out.x.norm_squared();
    Ok(ResponseEstimate {
        optimality_residual: problem.residual(&out.x, lip),
        d: out.x,
        objective,
        iterations: out.iters,
        lipschitz: lip,
        stop: out.stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(r, c, |_, _| rng.gen::<f64>())
    }

    #[test]
    fn zero_target_gives_zero_response() {
        let y = rand_mat(8, 200, 1);
        let est = estimate_response(&y, &DMatrix::zeros(3, 200), &RidgeConfig::default()).unwrap();
        assert_eq!(est.d, DMatrix::zeros(3, 8));
    }

    #[test]
    fn planted_response_small() {
        let y = rand_mat(10, 400, 2);
        let mut d_true = rand_mat(3, 10, 3);
        d_true[(0, 4)] = 0.0;
        d_true[(2, 7)] = 0.0;
        let target = &d_true * &y;
        let cfg = RidgeConfig {
            eta: 1e-10,
            ..RidgeConfig::default()
        };
        let est = estimate_response(&y, &target, &cfg).unwrap();
        assert!((est.d - d_true).abs().max() < 1e-3);
    }

    #[test]
    fn output_nonnegative_when_unconstrained_solution_is_not() {
        let y = rand_mat(6, 100, 4);
        let d_signed = DMatrix::from_fn(2, 6, |r, c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
        let target = &d_signed * &y;
        let est = estimate_response(&y, &target, &RidgeConfig::default()).unwrap();
        assert!(est.d.iter().all(|&v| v >= 0.0));
        assert!(est.optimality_residual <= 1e-6);
        let zero_obj = target.norm_squared();
        assert!(est.objective <= zero_obj);
    }

    #[test]
    fn zero_rough_solution_is_error() {
        let err = estimate_response(&DMatrix::zeros(4, 10), &DMatrix::zeros(2, 10), &RidgeConfig::default());
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn non_finite_input_is_error() {
        let mut y = rand_mat(3, 5, 5);
        y[(1, 1)] = f64::NAN;
        assert!(estimate_response(&y, &DMatrix::zeros(2, 5), &RidgeConfig::default()).is_err());
    }
}
