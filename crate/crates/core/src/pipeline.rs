//! End-to-end super-resolution: rough solve, response estimation, coupled
//! NMF, reconstruction, plus artifact writing and the naive baseline.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnmf::{
    duality_transform, reconstruct, solve_cnmf, trace_to_csv, CnmfConfig, CnmfResult, InitReport,
};
use crate::cube::{write_cube, write_matrix_csv, write_json, HyperCube, MultiResProduct};
use crate::error::{Error, Result};
use crate::ops::BlurOperator;
use crate::response::{estimate_response, ResponseEstimate, RidgeConfig};
use crate::rough::{
    run_unfolded_admm, spectral_upsample_init, Denoiser, InitMode, RoughSolution,
    StageDiagnostics, UnfoldConfig,
};
use crate::sensor::{
    build_response, calibrate_gain, high_res_submatrix, nearest_band_subvector,
    uniform_wavelengths, SensorProfile,
};

pub const CUBE_FILE: &str = "superres.cube";
pub const RESPONSE_FILE: &str = "response.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Weight of the Q-norm regulariser; the CNMF hyperspectral weight is `λ/2`.
    pub lambda: f64,
    /// Volume penalty; `λ₁ = α/2`.
    pub alpha: f64,
    /// Sparsity penalty; `λ₂ = β/2`.
    pub beta: f64,
    pub eta: f64,
    pub r: usize,
    pub unfold: UnfoldConfig,
    pub ridge: RidgeConfig,
    pub cnmf: CnmfConfig,
    /// Profile used for the rough solve's response; the product's own
    /// profile when absent.
    pub sensor_profile: Option<PathBuf>,
    pub seed: u64,
    /// Output spectral grid.
    pub bands: usize,
    pub min_wavelength_nm: f64,
    pub max_wavelength_nm: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            alpha: 0.002,
            beta: 0.002,
            eta: 1e-4,
            r: 2,
            unfold: UnfoldConfig::default(),
            ridge: RidgeConfig::default(),
            cnmf: CnmfConfig::default(),
            sensor_profile: None,
            seed: 0,
            bands: 172,
            min_wavelength_nm: 400.0,
            max_wavelength_nm: 2500.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("pipeline config: {e}")))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.lambda, self.alpha, self.beta, self.eta];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(
                "lambda, alpha, beta and eta must be finite and >= 0".into(),
            ));
        }
        if self.r == 0 || self.bands == 0 {
            return Err(Error::InvalidInput("r and bands must be >= 1".into()));
        }
        if !(self.max_wavelength_nm >= self.min_wavelength_nm) {
            return Err(Error::InvalidInput("wavelength range is empty".into()));
        }
        self.unfold.validate()?;
        self.resolved().cnmf.validate()
    }

    /// Copy with the top-level parameters pushed into the stage configs:
    /// `ridge.eta = η`, `cnmf.{lambda1, lambda2} = (α, β)/2`,
    /// `cnmf.hyper_weight = λ/2`, `cnmf.r = r` and every stage seed.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.ridge.eta = self.eta;
        out.ridge.seed = self.seed;
        out.cnmf.lambda1 = self.alpha / 2.0;
        out.cnmf.lambda2 = self.beta / 2.0;
        out.cnmf.hyper_weight = self.lambda / 2.0;
        out.cnmf.r = self.r;
        out.cnmf.seed = self.seed;
        out
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        uniform_wavelengths(self.bands, self.min_wavelength_nm, self.max_wavelength_nm)
    }

    /// SHA-256 of the resolved config's JSON, in hex.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("config serialises");
        hex(&Sha256::digest(bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn profile_for(product: &MultiResProduct, cfg: &PipelineConfig) -> Result<SensorProfile> {
    let Some(path) = &cfg.sensor_profile else {
        return Ok(product.profile().clone());
    };
    let profile = SensorProfile::read_json(path)?;
    let names = |p: &SensorProfile| p.bands.iter().map(|b| b.name.clone()).collect::<Vec<_>>();
    if names(&profile) != names(product.profile()) {
        return Err(Error::InvalidInput(format!(
            "sensor profile bands {:?} do not match the product's {:?}",
            names(&profile),
            names(product.profile())
        )));
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SuperresRun {
    pub cube: HyperCube,
    pub d_tilde: DMatrix<f64>,
    pub rough: RoughSolution,
    pub response: ResponseEstimate,
    pub cnmf: CnmfResult,
    pub timings: Vec<StageTiming>,
    /// The resolved configuration that produced the run.
    pub config: PipelineConfig,
}

fn timed<T>(
    timings: &mut Vec<StageTiming>,
    stage: &'static str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    timings.push(StageTiming {
        stage,
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(out)
}

/// Rough hyperspectral estimate from the full product with the profile
/// response.
pub fn rough_solution(product: &MultiResProduct, cfg: &PipelineConfig) -> Result<RoughSolution> {
    let profile = profile_for(product, cfg)?;
    let d = build_response(&profile, &cfg.wavelengths())?;
    let y_s = product.to_matrix();
    let init = spectral_upsample_init(&y_s, &d, cfg.unfold.init)?;
    let denoiser = Denoiser::from_spec(&cfg.unfold.denoiser, &init)?;
    run_unfolded_admm(
        &y_s,
        &d,
        (product.height(), product.width()),
        &cfg.unfold,
        &denoiser,
    )
}

pub fn run_superres(product: &MultiResProduct, cfg: &PipelineConfig) -> Result<SuperresRun> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let (h, w) = (product.height(), product.width());
    let mut timings = Vec::new();

    // the grid constraint belongs to the duality stage but is checked first
    BlurOperator::new(h, w, cfg.r).map_err(|e| e.in_stage("duality_transform"))?;

    let rough = timed(&mut timings, "rough", || rough_solution(product, &cfg))?;
    let y_s_hi = product.high_res_matrix()?;
    let response = timed(&mut timings, "response", || {
        estimate_response(&rough.y_de, &y_s_hi, &cfg.ridge)
    })?;
    let problem = timed(&mut timings, "duality_transform", || {
        duality_transform(&rough.y_de, &y_s_hi, &response.d, (h, w), cfg.r)
    })?;
    let cnmf = timed(&mut timings, "cnmf", || solve_cnmf(&problem, &cfg.cnmf))?;
    let cube = timed(&mut timings, "reconstruct", || {
        reconstruct(&cnmf.factorization, h, w, cfg.wavelengths())
    })?;
    if cube.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Contract("reconstruction is not nonnegative and finite".into())
            .in_stage("reconstruct"));
    }
    Ok(SuperresRun {
        cube,
        d_tilde: response.d.clone(),
        rough,
        response,
        cnmf,
        timings,
        config: cfg,
    })
}

/// Min-norm spectral upsampling of the full product with the profile
/// response, without any prior or fusion.
pub fn naive_baseline(product: &MultiResProduct, cfg: &PipelineConfig) -> Result<HyperCube> {
    let profile = profile_for(product, cfg)?;
    let d = build_response(&profile, &cfg.wavelengths())?;
    let y = spectral_upsample_init(&product.to_matrix(), &d, InitMode::MinNorm)?;
    HyperCube::from_matrix(product.height(), product.width(), cfg.wavelengths(), &y)
}

/// The 10-m rows of the profile response, i.e. the `D̃` a perfect estimator
/// would return on a band-averaged simulation.
pub fn profile_high_res_response(
    product: &MultiResProduct,
    cfg: &PipelineConfig,
) -> Result<DMatrix<f64>> {
    let profile = profile_for(product, cfg)?;
    high_res_submatrix(&build_response(&profile, &cfg.wavelengths())?, &profile)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    config: &'a PipelineConfig,
    input: InputSummary,
    artifacts: [&'static str; 3],
    diagnostics: Diagnostics<'a>,
    timings_s: &'a [StageTiming],
}

#[derive(Serialize)]
struct InputSummary {
    height: usize,
    width: usize,
    bands: Vec<String>,
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    rough_stages: &'a [StageDiagnostics],
    response_objective: f64,
    response_iterations: usize,
    response_optimality_residual: f64,
    cnmf_sweeps: usize,
    cnmf_converged: bool,
    cnmf_objective: f64,
    cnmf_reseeds: usize,
    cnmf_init: &'a InitReport,
}

#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub cube: PathBuf,
    pub response: PathBuf,
    pub trace: PathBuf,
    pub manifest: PathBuf,
}

/// Writes the cube, `D̃` CSV, objective trace CSV and manifest into `dir`.
pub fn write_artifacts(
    run: &SuperresRun,
    product: &MultiResProduct,
    dir: &Path,
) -> Result<ArtifactPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ArtifactPaths {
        cube: dir.join(CUBE_FILE),
        response: dir.join(RESPONSE_FILE),
        trace: dir.join(TRACE_FILE),
        manifest: dir.join(MANIFEST_FILE),
    };
    write_cube(&run.cube, &paths.cube)?;
    write_matrix_csv(&run.d_tilde, &paths.response)?;
    fs::write(&paths.trace, trace_to_csv(&run.cnmf.trace))
        .map_err(|e| Error::io(&paths.trace, e))?;
    let manifest = Manifest {
        tool: "cos2a",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: run.config.sha256(),
        config: &run.config,
        input: InputSummary {
            height: product.height(),
            width: product.width(),
            bands: product.band_specs().iter().map(|b| b.name.clone()).collect(),
        },
        artifacts: [CUBE_FILE, RESPONSE_FILE, TRACE_FILE],
        diagnostics: Diagnostics {
            rough_stages: &run.rough.stages,
            response_objective: run.response.objective,
            response_iterations: run.response.iterations,
            response_optimality_residual: run.response.optimality_residual,
            cnmf_sweeps: run.cnmf.sweeps,
            cnmf_converged: run.cnmf.converged,
            cnmf_objective: run.cnmf.objective(),
            cnmf_reseeds: run.cnmf.reseeds,
            cnmf_init: &run.cnmf.init,
        },
        timings_s: &run.timings,
    };
    write_json(&manifest, &paths.manifest)?;
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub cube: HyperCube,
    pub gains: Vec<f64>,
    /// Pixels whose reference subvector is zero; their gain is left at 1.
    pub undetermined: usize,
}

/// Scales each reference pixel by `γ* = argmin_{γ≥0} ½‖γ·ã − s‖²`, where `ã`
/// samples the reference at the wavelengths nearest the product's band
/// centres and `s` is the product pixel.
pub fn calibrate_reference(
    reference: &HyperCube,
    product: &MultiResProduct,
) -> Result<Calibration> {
    if (reference.height(), reference.width()) != (product.height(), product.width()) {
        return Err(Error::Shape(format!(
            "reference grid {}x{} vs product grid {}x{}",
            reference.height(),
            reference.width(),
            product.height(),
            product.width()
        )));
    }
    let y = product.to_matrix();
    let wl = reference.wavelengths_nm();
    let (m, l) = (reference.bands(), reference.pixels());
    let mut gains = Vec::with_capacity(l);
    let mut undetermined = 0;
    for j in 0..l {
        let pixel = reference.pixel(j);
        let sub = nearest_band_subvector(&pixel, wl, product.profile())?;
        let s: Vec<f64> = y.column(j).iter().copied().collect();
        gains.push(if sub.iter().all(|&v| v == 0.0) {
            undetermined += 1;
            1.0
        } else {
            calibrate_gain(&sub, &s)?
        });
    }
    let mut values = reference.values().to_vec();
    for b in 0..m {
        for (v, g) in values[b * l..(b + 1) * l].iter_mut().zip(&gains) {
            *v *= g;
        }
    }
    Ok(Calibration {
        cube: HyperCube::new(reference.height(), reference.width(), wl.to_vec(), values)?,
        gains,
        undetermined,
    })
}
