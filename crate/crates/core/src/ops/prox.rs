use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Proximal map of `t‖·‖₁ + ι{· ≥ 0}`: elementwise `max(x − t, 0)`.
pub fn prox_l1_nonneg(x: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "l1 threshold must be >= 0, got {threshold}"
        )));
    }
    Ok(x.map(|v| (v - threshold).max(0.0)))
}

pub fn project_nonneg(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.map(|v| v.max(0.0))
}
