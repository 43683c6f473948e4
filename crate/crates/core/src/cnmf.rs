//! Convex phase: the Q-regularised spectral problem
//!
//! ```text
//! min_{A,S ≥ 0} ‖Ỹ_S − D̃AS‖² + (λ/2)‖AS − Y_DE‖²_Q + α·vol(A) + β‖S‖₁
//! ```
//!
//! is, because `‖AS − Y_DE‖²_Q = ‖Y_DE·B − A·S·B‖²_F`, exactly twice the
//! coupled NMF objective
//!
//! ```text
//! ½·w‖Y_h − A·S·B‖² + ½‖Y_m − D·A·S‖² + λ₁·vol(A) + λ₂‖S‖₁
//! ```
//!
//! with `Y_h = Y_DE·B`, `Y_m = Ỹ_S`, `D = D̃`, `w = λ/2`, `λ₁ = α/2`,
//! `λ₂ = β/2`. The latter is solved here by alternating accelerated
//! projected/proximal gradient on the two convex blocks `A` and `S`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::HyperCube;
use crate::error::{ensure_finite, Error, Result};
use crate::ops::{
    estimate_lipschitz, minimize, project_nonneg, prox_l1_nonneg, q_norm_sq, spa_select,
    volume_gradient, volume_surrogate, ApgOptions, BlurOperator, Composite,
};

/// Relative slack allowed on the half-step descent contract.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Relative size, against the data energy, of the rounding error of the
/// Gram-expanded objectives used inside the half-steps.
const ROUNDING_FLOOR: f64 = 1e-12;

const POWER_ITERS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnmfConfig {
    pub n_endmembers: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Weight `w` on the hyperspectral data term; `λ/2` of the spectral problem.
    pub hyper_weight: f64,
    pub r: usize,
    pub outer_max: usize,
    pub outer_tol: f64,
    pub inner_max: usize,
    pub inner_tol: f64,
    pub seed: u64,
}

impl Default for CnmfConfig {
    fn default() -> Self {
        Self {
            n_endmembers: 10,
            lambda1: 0.001,
            lambda2: 0.001,
            hyper_weight: 1.0,
            r: 2,
            outer_max: 200,
            outer_tol: 1e-5,
            inner_max: 100,
            inner_tol: 1e-7,
            seed: 0,
        }
    }
}

impl CnmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_endmembers == 0 || self.r == 0 {
            return Err(Error::InvalidInput("n_endmembers and r must be >= 1".into()));
        }
        let penalties = [self.lambda1, self.lambda2, self.hyper_weight];
        if penalties.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(
                "lambda1, lambda2 and hyper_weight must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Endmembers `A` (M×N) and abundances `S` (N×L), both nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub a: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl Factorization {
    pub fn new(a: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != s.nrows() {
            return Err(Error::Shape(format!(
                "A has {} columns, S has {} rows",
                a.ncols(),
                s.nrows()
            )));
        }
        ensure_finite(a.as_slice(), "endmember entry")?;
        ensure_finite(s.as_slice(), "abundance entry")?;
        if a.iter().chain(s.iter()).any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("factorization has negative entries".into()));
        }
        Ok(Self { a, s })
    }

    pub fn product(&self) -> DMatrix<f64> {
        &self.a * &self.s
    }
}

/// Inputs of the coupled NMF problem.
#[derive(Debug, Clone)]
pub struct CnmfProblem {
    /// Low-resolution hyperspectral image `Y_h` (M × L/r²).
    pub y_h: DMatrix<f64>,
    /// High-resolution multispectral image `Y_m` (m × L).
    pub y_m: DMatrix<f64>,
    /// Spectral response `D` (m × M).
    pub d: DMatrix<f64>,
    pub blur: BlurOperator,
}

impl CnmfProblem {
    pub fn new(
        y_h: DMatrix<f64>,
        y_m: DMatrix<f64>,
        d: DMatrix<f64>,
        blur: BlurOperator,
    ) -> Result<Self> {
        if y_h.ncols() != blur.coarse_pixels() || y_m.ncols() != blur.fine_pixels() {
            return Err(Error::Shape(format!(
                "Y_h has {} pixels and Y_m {}, blur maps {} -> {}",
                y_h.ncols(),
                y_m.ncols(),
                blur.fine_pixels(),
                blur.coarse_pixels()
            )));
        }
        if d.shape() != (y_m.nrows(), y_h.nrows()) {
            return Err(Error::Shape(format!(
                "response is {:?}, expected {}x{}",
                d.shape(),
                y_m.nrows(),
                y_h.nrows()
            )));
        }
        ensure_finite(y_h.as_slice(), "hyperspectral input")?;
        ensure_finite(y_m.as_slice(), "multispectral input")?;
        ensure_finite(d.as_slice(), "response")?;
        Ok(Self { y_h, y_m, d, blur })
    }

    pub fn bands(&self) -> usize {
        self.y_h.nrows()
    }
}

/// Maps the spectral problem onto coupled NMF inputs:
/// `Y_h = Y_DE·B`, `Y_m = Ỹ_S`, `D = D̃`.
pub fn duality_transform(
    y_de: &DMatrix<f64>,
    y_s_hi: &DMatrix<f64>,
    d_tilde: &DMatrix<f64>,
    grid: (usize, usize),
    r: usize,
) -> Result<CnmfProblem> {
    let blur = BlurOperator::new(grid.0, grid.1, r)?;
    let y_h = blur.apply(y_de)?;
    CnmfProblem::new(y_h, y_s_hi.clone(), d_tilde.clone(), blur)
}

/// `½w‖Y_h − A·S·B‖² + ½‖Y_m − D·A·S‖² + λ₁·vol(A) + λ₂‖S‖₁`.
pub fn cnmf_objective(
    problem: &CnmfProblem,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    cfg: &CnmfConfig,
) -> Result<f64> {
    let s_lo = problem.blur.apply(s)?;
    Ok(objective_parts(problem, a, s, &s_lo, cfg))
}

fn objective_parts(
    p: &CnmfProblem,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    s_lo: &DMatrix<f64>,
    cfg: &CnmfConfig,
) -> f64 {
    let hyper = (&p.y_h - a * s_lo).norm_squared();
    let multi = (&p.y_m - (&p.d * a) * s).norm_squared();
    0.5 * cfg.hyper_weight * hyper
        + 0.5 * multi
        + cfg.lambda1 * volume_surrogate(a)
        + cfg.lambda2 * s.sum()
}

/// The spectral-domain objective
/// `‖Ỹ_S − D̃AS‖² + (λ/2)‖AS − Y_DE‖²_Q + α·vol(A) + β‖S‖₁`, with the
/// Q-norm evaluated through the blur operator.
#[allow(clippy::too_many_arguments)]
pub fn spectral_objective(
    y_s_hi: &DMatrix<f64>,
    d_tilde: &DMatrix<f64>,
    y_de: &DMatrix<f64>,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    blur: &BlurOperator,
    lambda: f64,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let y = a * s;
    let fit = (y_s_hi - d_tilde * &y).norm_squared();
    let reg = q_norm_sq(&y, y_de, blur)?;
    Ok(fit + 0.5 * lambda * reg + alpha * volume_surrogate(a) + beta * s.sum())
}

/// A-block subproblem with `S` fixed. Data terms are evaluated through
/// their Gram expansions, so an evaluation costs `O(M·N²)` instead of
/// `O(M·N·L)`.
struct EndmemberStep<'a> {
    p: &'a CnmfProblem,
    cfg: &'a CnmfConfig,
    gram_lo: DMatrix<f64>,
    gram: DMatrix<f64>,
    yh_slo: DMatrix<f64>,
    ym_s: DMatrix<f64>,
    constant: f64,
}

impl<'a> EndmemberStep<'a> {
    fn new(p: &'a CnmfProblem, cfg: &'a CnmfConfig, s: &DMatrix<f64>) -> Result<Self> {
        let s_lo = p.blur.apply(s)?;
        Ok(Self {
            gram_lo: &s_lo * s_lo.transpose(),
            gram: s * s.transpose(),
            yh_slo: &p.y_h * s_lo.transpose(),
            ym_s: &p.y_m * s.transpose(),
            constant: 0.5 * cfg.hyper_weight * p.y_h.norm_squared()
                + 0.5 * p.y_m.norm_squared()
                + cfg.lambda2 * s.sum(),
            p,
            cfg,
        })
    }

    fn hessian(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let dv = &self.p.d * v;
        let mut h = v * &self.gram_lo * self.cfg.hyper_weight + self.p.d.tr_mul(&(dv * &self.gram));
        if self.cfg.lambda1 > 0.0 {
            h += volume_gradient(v) * self.cfg.lambda1;
        }
        h
    }

    fn lipschitz(&self) -> f64 {
        let (m, n) = (self.p.bands(), self.gram.nrows());
        estimate_lipschitz(
            |v| {
                let v = DMatrix::from_column_slice(m, n, v);
                self.hessian(&v).as_slice().to_vec()
            },
            |w| w.to_vec(),
            m * n,
            POWER_ITERS,
            self.cfg.seed,
        )
    }
}

impl Composite for EndmemberStep<'_> {
    fn value(&self, a: &DMatrix<f64>) -> f64 {
        let da = &self.p.d * a;
        let hyper = (a * &self.gram_lo).dot(a) - 2.0 * a.dot(&self.yh_slo);
        let multi = (&da * &self.gram).dot(&da) - 2.0 * da.dot(&self.ym_s);
        self.constant
            + 0.5 * self.cfg.hyper_weight * hyper
            + 0.5 * multi
            + self.cfg.lambda1 * volume_surrogate(a)
    }

    fn gradient(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let da = &self.p.d * a;
        let mut g = (a * &self.gram_lo - &self.yh_slo) * self.cfg.hyper_weight
            + self.p.d.tr_mul(&(da * &self.gram - &self.ym_s));
        if self.cfg.lambda1 > 0.0 {
            g += volume_gradient(a) * self.cfg.lambda1;
        }
        g
    }

    fn prox(&self, v: DMatrix<f64>, _step: f64) -> DMatrix<f64> {
        project_nonneg(&v)
    }
}

/// S-block subproblem with `A` fixed, Gram-expanded like [`EndmemberStep`].
/// `hyper_weight = 0` with `λ₁ = λ₂ = 0` reduces it to the plain
/// multispectral NNLS used for initialisation.
struct AbundanceStep<'a> {
    p: &'a CnmfProblem,
    cfg: &'a CnmfConfig,
    ata: DMatrix<f64>,
    at_yh: DMatrix<f64>,
    da_gram: DMatrix<f64>,
    da_ym: DMatrix<f64>,
    constant: f64,
}

impl<'a> AbundanceStep<'a> {
    fn new(p: &'a CnmfProblem, cfg: &'a CnmfConfig, a: &DMatrix<f64>) -> Self {
        let da = &p.d * a;
        let hyper = if cfg.hyper_weight > 0.0 {
            p.y_h.norm_squared()
        } else {
            0.0
        };
        Self {
            ata: a.tr_mul(a),
            at_yh: a.tr_mul(&p.y_h),
            da_gram: da.tr_mul(&da),
            da_ym: da.tr_mul(&p.y_m),
            constant: 0.5 * cfg.hyper_weight * hyper
                + 0.5 * p.y_m.norm_squared()
                + cfg.lambda1 * volume_surrogate(a),
            p,
            cfg,
        }
    }

    /// `λ_max(w·AᵀA/r² + (DA)ᵀDA)`, the exact curvature bound of the smooth part.
    fn lipschitz(&self) -> f64 {
        let r2 = (self.p.blur.factor() * self.p.blur.factor()) as f64;
        let curv = &self.ata * (self.cfg.hyper_weight / r2) + &self.da_gram;
        let n = curv.nrows();
        estimate_lipschitz(
            |v| (&curv * DVector::from_column_slice(v)).as_slice().to_vec(),
            |w| w.to_vec(),
            n,
            POWER_ITERS,
            self.cfg.seed,
        )
    }

    fn blur(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        self.p.blur.apply(s).expect("abundance grid matches blur")
    }
}

impl Composite for AbundanceStep<'_> {
    fn value(&self, s: &DMatrix<f64>) -> f64 {
        let mut value = self.constant
            + 0.5 * ((&self.da_gram * s).dot(s) - 2.0 * s.dot(&self.da_ym))
            + self.cfg.lambda2 * s.sum();
        if self.cfg.hyper_weight > 0.0 {
            let s_lo = self.blur(s);
            let hyper = (&self.ata * &s_lo).dot(&s_lo) - 2.0 * s_lo.dot(&self.at_yh);
            value += 0.5 * self.cfg.hyper_weight * hyper;
        }
        value
    }

    fn gradient(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = &self.da_gram * s - &self.da_ym;
        if self.cfg.hyper_weight > 0.0 {
            let lo = (&self.ata * self.blur(s) - &self.at_yh) * self.cfg.hyper_weight;
            g += self.p.blur.apply_adjoint(&lo).expect("coarse grid matches blur");
        }
        g
    }

    fn prox(&self, v: DMatrix<f64>, step: f64) -> DMatrix<f64> {
        prox_l1_nonneg(&v, step * self.cfg.lambda2).expect("nonnegative threshold")
    }
}

/// One A-step from `a` with `s` fixed; returns the new endmembers and the
/// objective there. Runs `cfg.inner_max` APG iterations at most.
pub fn update_endmembers(
    problem: &CnmfProblem,
    cfg: &CnmfConfig,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let step = EndmemberStep::new(problem, cfg, s)?;
    let opts = ApgOptions {
        max_iters: cfg.inner_max,
        tol: cfg.inner_tol,
        lipschitz: step.lipschitz(),
    };
    let a = minimize(&step, project_nonneg(a), &opts, |_, _| false).x;
    let value = cnmf_objective(problem, &a, s, cfg)?;
    Ok((a, value))
}

/// One S-step from `s` with `a` fixed; see [`update_endmembers`].
pub fn update_abundances(
    problem: &CnmfProblem,
    cfg: &CnmfConfig,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let step = AbundanceStep::new(problem, cfg, a);
    let opts = ApgOptions {
        max_iters: cfg.inner_max,
        tol: cfg.inner_tol,
        lipschitz: step.lipschitz(),
    };
    let s = minimize(&step, project_nonneg(s), &opts, |_, _| false).x;
    let value = cnmf_objective(problem, a, &s, cfg)?;
    Ok((s, value))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InitReport {
    pub spa_indices: Vec<usize>,
    /// Endmember columns filled with seeded random spectra because SPA ran
    /// out of rank.
    pub random_columns: usize,
}

/// `A⁰` from SPA on `Y_h`'s columns; `S⁰` from nonnegative least squares
/// against `Y_m ≈ D·A⁰·S` on the full grid.
pub fn init_factorization(
    problem: &CnmfProblem,
    cfg: &CnmfConfig,
) -> Result<(Factorization, InitReport)> {
    cfg.validate()?;
    let n = cfg.n_endmembers;
    let (m, l_lo) = problem.y_h.shape();
    if n > m.min(l_lo) {
        return Err(Error::InvalidInput(format!(
            "{n} endmembers exceed min(bands {m}, low-res pixels {l_lo})"
        )));
    }
    let mut report = InitReport::default();
    let mut a = DMatrix::zeros(m, n);
    let peak = problem.y_h.max().max(f64::MIN_POSITIVE);
    let picked = if problem.y_h.iter().any(|&v| v != 0.0) {
        let sel = spa_select(&problem.y_h, n)?;
        report.random_columns = n - sel.indices.len();
        sel.indices
    } else {
        report.random_columns = n;
        Vec::new()
    };
    for (k, &j) in picked.iter().enumerate() {
        a.set_column(k, &problem.y_h.column(j).map(|v| v.max(0.0)));
    }
    if report.random_columns > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for k in picked.len()..n {
            for b in 0..m {
                a[(b, k)] = rng.gen::<f64>() * peak;
            }
        }
    }
    report.spa_indices = picked;

    let nnls_cfg = CnmfConfig {
        hyper_weight: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
        ..cfg.clone()
    };
    let step = AbundanceStep::new(problem, &nnls_cfg, &a);
    let opts = ApgOptions {
        max_iters: cfg.inner_max,
        tol: cfg.inner_tol,
        lipschitz: step.lipschitz(),
    };
    let s0 = DMatrix::zeros(n, problem.blur.fine_pixels());
    let s = minimize(&step, s0, &opts, |_, _| false).x;
    Ok((Factorization::new(a, s)?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfStep {
    Init,
    A,
    S,
    /// A dead endmember was replaced; the objective may rise here.
    Reseed,
}

impl fmt::Display for HalfStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HalfStep::Init => "init",
            HalfStep::A => "A",
            HalfStep::S => "S",
            HalfStep::Reseed => "reseed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub half_step: HalfStep,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct CnmfResult {
    pub factorization: Factorization,
    pub trace: Vec<TracePoint>,
    pub sweeps: usize,
    pub converged: bool,
    pub init: InitReport,
    pub reseeds: usize,
}

impl CnmfResult {
    pub fn objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.objective)
    }
}

/// Objective trace as CSV with header `iteration,half_step,objective`.
pub fn trace_to_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("iteration,half_step,objective\n");
    for t in trace {
        out.push_str(&format!("{},{},{}\n", t.iteration, t.half_step, t.objective));
    }
    out
}

/// Initialises with [`init_factorization`] and runs [`solve_cnmf_from`].
pub fn solve_cnmf(problem: &CnmfProblem, cfg: &CnmfConfig) -> Result<CnmfResult> {
    let (fac, report) = init_factorization(problem, cfg)?;
    let mut result = solve_cnmf_from(problem, cfg, fac)?;
    result.init = report;
    Ok(result)
}

/// Alternating minimisation from a given factorization until the relative
/// objective change over one sweep drops below `outer_tol`, or `outer_max`
/// sweeps.
pub fn solve_cnmf_from(
    problem: &CnmfProblem,
    cfg: &CnmfConfig,
    start: Factorization,
) -> Result<CnmfResult> {
    cfg.validate()?;
    if start.a.nrows() != problem.bands() || start.s.ncols() != problem.blur.fine_pixels() {
        return Err(Error::Shape("starting factorization does not match the problem".into()));
    }
    let Factorization { mut a, mut s } = start;
    let mut obj = cnmf_objective(problem, &a, &s, cfg)?;
    check_finite(obj, 0, HalfStep::Init)?;
    let floor = ROUNDING_FLOOR
        * (cfg.hyper_weight * problem.y_h.norm_squared() + problem.y_m.norm_squared());
    let mut trace = vec![TracePoint {
        iteration: 0,
        half_step: HalfStep::Init,
        objective: obj,
    }];
    let mut reseeds = 0;
    let mut converged = false;
    let mut sweeps = 0;

    for it in 1..=cfg.outer_max {
        sweeps = it;
        let sweep_start = obj;

        if reseed_dead_columns(problem, &mut a, &mut s)? > 0 {
            reseeds += 1;
            obj = cnmf_objective(problem, &a, &s, cfg)?;
            check_finite(obj, it, HalfStep::Reseed)?;
            trace.push(TracePoint {
                iteration: it,
                half_step: HalfStep::Reseed,
                objective: obj,
            });
        }

        let (next_a, next) = update_endmembers(problem, cfg, &a, &s)?;
        if accept(obj, next, floor, it, HalfStep::A)? {
            a = next_a;
            obj = next;
        }
        trace.push(TracePoint {
            iteration: it,
            half_step: HalfStep::A,
            objective: obj,
        });

        let (next_s, next) = update_abundances(problem, cfg, &a, &s)?;
        if accept(obj, next, floor, it, HalfStep::S)? {
            s = next_s;
            obj = next;
        }
        trace.push(TracePoint {
            iteration: it,
            half_step: HalfStep::S,
            objective: obj,
        });

        if sweep_start - obj <= cfg.outer_tol * sweep_start.abs() {
            converged = true;
            break;
        }
    }

    Ok(CnmfResult {
        factorization: Factorization::new(a, s)?,
        trace,
        sweeps,
        converged,
        init: InitReport::default(),
        reseeds,
    })
}

fn check_finite(obj: f64, iteration: usize, half: HalfStep) -> Result<()> {
    if obj.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "CNMF objective at sweep {iteration}, half-step {half}"
        )))
    }
}

/// Whether a half-step result is kept. A rise within the rounding floor of
/// the inner solver's Gram-expanded objective is a stall and the previous
/// iterate is kept; anything larger breaks the descent contract.
fn accept(prev: f64, next: f64, floor: f64, iteration: usize, half: HalfStep) -> Result<bool> {
    check_finite(next, iteration, half)?;
    if next <= prev + DESCENT_SLACK * prev.abs() {
        Ok(next <= prev)
    } else if next <= prev + floor {
        Ok(false)
    } else {
        Err(Error::Contract(format!(
            "CNMF objective rose from {prev} to {next} at sweep {iteration}, half-step {half}"
        )))
    }
}

/// Replaces all-zero endmember columns by the (clamped) pixel of largest
/// hyperspectral residual and zeroes the matching abundance row, so `A·S`
/// is unchanged. Returns how many columns were replaced.
fn reseed_dead_columns(
    problem: &CnmfProblem,
    a: &mut DMatrix<f64>,
    s: &mut DMatrix<f64>,
) -> Result<usize> {
    if a.ncols() < 2 {
        return Ok(0);
    }
    let dead: Vec<usize> = (0..a.ncols())
        .filter(|&k| a.column(k).iter().all(|&v| v == 0.0))
        .collect();
    if dead.is_empty() {
        return Ok(0);
    }
    let residual = &problem.y_h - &*a * problem.blur.apply(s)?;
    let mut norms: Vec<f64> = residual
        .column_iter()
        .map(|c| c.map(|v| v.max(0.0)).norm_squared())
        .collect();
    let mut replaced = 0;
    for k in dead {
        let mut best = 0;
        for (j, &n) in norms.iter().enumerate() {
            if n > norms[best] {
                best = j;
            }
        }
        let col = if norms[best] > 0.0 {
            residual.column(best).map(|v| v.max(0.0))
        } else {
            problem.y_h.column(best).map(|v| v.max(0.0))
        };
        if col.iter().all(|&v| v == 0.0) {
            continue;
        }
        a.set_column(k, &col);
        s.row_mut(k).fill(0.0);
        norms[best] = 0.0;
        replaced += 1;
    }
    Ok(replaced)
}

/// `Y_H* = A·S` on the `height×width` grid.
pub fn reconstruct(
    fac: &Factorization,
    height: usize,
    width: usize,
    wavelengths_nm: Vec<f64>,
) -> Result<HyperCube> {
    HyperCube::from_matrix(height, width, wavelengths_nm, &fac.product())
}
