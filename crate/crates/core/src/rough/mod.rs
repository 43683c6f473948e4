//! Rough hyperspectral estimate `Y_DE` from the full multi-resolution product.
//!
//! Solves `min_Y ‖Y_S − D·Y‖²_F + prior(Y)` by `K` unfolded ADMM stages on
//! the split `Y = Z`, with scaled dual `U`:
//!
//! ```text
//! Z⁺ = prox_{prior/ρ}(Y − U)                        (denoiser)
//! Y⁺ = (2DᵀD + ρI)⁻¹ (2DᵀY_S + ρ(Z⁺ + U))          (Woodbury)
//! U⁺ = U − Y⁺ + Z⁺
//! ```
//!
//! and returns the last `Z`.

pub mod conv;
mod denoise;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use conv::{ConvArch, ConvNet};
pub use denoise::{box_filter, Denoiser, DenoiserSpec, QuadraticAnchor};

use crate::error::{Error, Result};
use crate::ops::WoodburySolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `Dᵀ(DDᵀ + εI)⁻¹ Y_S`.
    #[default]
    MinNorm,
    /// `DᵀY_S` with each hyperspectral band divided by its column sum in `D`.
    Adjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnfoldConfig {
    pub stages: usize,
    pub rho: f64,
    pub denoiser: DenoiserSpec,
    pub init: InitMode,
    /// Clamp the returned `Y_DE` to be nonnegative.
    pub clamp_output: bool,
}

impl Default for UnfoldConfig {
    fn default() -> Self {
        Self {
            stages: 4,
            rho: 1.0,
            denoiser: DenoiserSpec::default(),
            init: InitMode::MinNorm,
            clamp_output: true,
        }
    }
}

impl UnfoldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::InvalidInput("unfolded ADMM needs at least one stage".into()));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidInput(format!("rho must be > 0, got {}", self.rho)));
        }
        self.denoiser.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageDiagnostics {
    /// `‖Y^{k+1} − Z^{k+1}‖_F`.
    pub primal_residual: f64,
    /// Relative residual of the `Y` subproblem's normal equations.
    pub subproblem_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RoughSolution {
    pub y_de: DMatrix<f64>,
    pub stages: Vec<StageDiagnostics>,
}

pub fn spectral_upsample_init(
    y_s: &DMatrix<f64>,
    d: &DMatrix<f64>,
    mode: InitMode,
) -> Result<DMatrix<f64>> {
    if y_s.nrows() != d.nrows() {
        return Err(Error::Shape(format!(
            "product has {} bands, response has {} rows",
            y_s.nrows(),
            d.nrows()
        )));
    }
    match mode {
        InitMode::MinNorm => {
            let gram = d * d.transpose();
            let eps = 1e-8 * gram.trace() / d.nrows() as f64;
            if !(eps > 0.0) {
                return Err(Error::InvalidInput("response matrix is zero".into()));
            }
            let reg = gram + DMatrix::identity(d.nrows(), d.nrows()) * eps;
            let coeffs = reg
                .cholesky()
                .ok_or_else(|| Error::Numerical("DDᵀ + εI is not positive definite".into()))?
                .solve(y_s);
            Ok(d.tr_mul(&coeffs))
        }
        InitMode::Adjoint => {
            let mut up = d.tr_mul(y_s);
            for (i, mut row) in up.row_iter_mut().enumerate() {
                let s = d.column(i).sum();
                if s != 0.0 {
                    row /= s;
                }
            }
            Ok(up)
        }
    }
}

/// Runs `cfg.stages` unfolded ADMM stages and returns `Z^K` (clamped when
/// `cfg.clamp_output`).
pub fn run_unfolded_admm(
    y_s: &DMatrix<f64>,
    d: &DMatrix<f64>,
    grid: (usize, usize),
    cfg: &UnfoldConfig,
    denoiser: &Denoiser,
) -> Result<RoughSolution> {
    cfg.validate()?;
    let (h, w) = grid;
    if y_s.ncols() != h * w {
        return Err(Error::Shape(format!(
            "product has {} pixels for a {h}x{w} grid",
            y_s.ncols()
        )));
    }
    let solver = WoodburySolver::new(d, cfg.rho)?;
    let rho = cfg.rho;
    let data_term = d.tr_mul(y_s) * 2.0;
    let dtd2 = d.tr_mul(d) * 2.0;

    let mut y = spectral_upsample_init(y_s, d, cfg.init)?;
    let mut u = DMatrix::zeros(y.nrows(), y.ncols());
    let mut z = y.clone();
    let mut stages = Vec::with_capacity(cfg.stages);
    for k in 0..cfg.stages {
        z = denoiser.denoise(&(&y - &u), rho, h, w)?;
        let rhs = &data_term + (&z + &u) * rho;
        y = solver.solve(&rhs)?;
        u += &z - &y;

        let normal = &dtd2 * &y + &y * rho - &rhs;
        let diag = StageDiagnostics {
            primal_residual: (&y - &z).norm(),
            subproblem_residual: normal.norm() / rhs.norm().max(f64::MIN_POSITIVE),
        };
        if !diag.primal_residual.is_finite() || !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("unfolded ADMM stage {}", k + 1)));
        }
        stages.push(diag);
    }
    if cfg.clamp_output {
        z.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(RoughSolution { y_de: z, stages })
}
