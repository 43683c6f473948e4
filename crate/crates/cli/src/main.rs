use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use cos2a::cube::{read_cube, read_product, write_cube, write_matrix_csv, write_product};
use cos2a::metrics::{evaluate, MetricsConfig};
use cos2a::pipeline::{
    calibrate_reference, rough_solution, run_superres, write_artifacts, PipelineConfig,
};
use cos2a::response::{estimate_response, RidgeConfig};
use cos2a::sensor::simulate_product;
use cos2a::synth::{generate_scene, SceneSpec};
use cos2a::{Error, HyperCube, Result, SensorProfile};

/// Spectral super-resolution of Sentinel-2 style products into hyperspectral cubes.
#[derive(Parser)]
#[command(name = "cos2a", version)]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "COS2A_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hyperspectral scene.
    Synth(SynthArgs),
    /// Simulate a 12-band multi-resolution product from a hyperspectral cube.
    Simulate(SimulateArgs),
    /// Rough hyperspectral estimate of a product by unfolded ADMM.
    Rough(RoughArgs),
    /// Estimate the 10-m band response from a product and its rough estimate.
    EstimateResponse(ResponseArgs),
    /// Full super-resolution; writes cube, response, trace and manifest.
    Superres(SuperresArgs),
    /// Compare a test cube against a reference.
    Metrics(MetricsArgs),
    /// Rescale a reference cube pixel-wise to match a product.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output cube.
    #[arg(long)]
    out: PathBuf,
    /// Scene spec JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    n_endmembers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    smoothness: Option<f64>,
    #[arg(long)]
    pure_pixel: Option<bool>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    min_wavelength_nm: Option<f64>,
    #[arg(long)]
    max_wavelength_nm: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Hyperspectral cube.
    #[arg(long)]
    input: PathBuf,
    /// Output product; band metadata goes to `<out>.bands.json`.
    #[arg(long)]
    out: PathBuf,
    /// Sensor profile JSON; the bundled Sentinel-2A profile by default.
    #[arg(long)]
    sensor_profile: Option<PathBuf>,
}

/// Pipeline parameters shared by `rough`, `superres`.
#[derive(Args)]
struct PipelineFlags {
    /// Pipeline config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    min_wavelength_nm: Option<f64>,
    #[arg(long)]
    max_wavelength_nm: Option<f64>,
    #[arg(long)]
    sensor_profile: Option<PathBuf>,
    #[arg(long)]
    unfold_stages: Option<usize>,
    #[arg(long)]
    unfold_rho: Option<f64>,
    #[arg(long)]
    ridge_max_iters: Option<usize>,
    #[arg(long)]
    ridge_tol: Option<f64>,
    #[arg(long)]
    cnmf_n_endmembers: Option<usize>,
    #[arg(long)]
    cnmf_outer_max: Option<usize>,
    #[arg(long)]
    cnmf_outer_tol: Option<f64>,
    #[arg(long)]
    cnmf_inner_max: Option<usize>,
    #[arg(long)]
    cnmf_inner_tol: Option<f64>,
}

#[derive(Args)]
struct RoughArgs {
    /// Multi-resolution product.
    #[arg(long)]
    input: PathBuf,
    /// Output cube.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct ResponseArgs {
    /// Multi-resolution product.
    #[arg(long)]
    input: PathBuf,
    /// Rough estimate cube from `cos2a rough`.
    #[arg(long)]
    rough: PathBuf,
    /// Output CSV, one row per 10-m band.
    #[arg(long)]
    out: PathBuf,
    /// Ridge config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SuperresArgs {
    /// Multi-resolution product.
    #[arg(long)]
    input: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Report JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    psnr_cap_db: Option<f64>,
    #[arg(long)]
    peak: Option<f64>,
    #[arg(long)]
    ssim_window: Option<usize>,
    #[arg(long)]
    ssim_sigma: Option<f64>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Hyperspectral reference cube.
    #[arg(long)]
    reference: PathBuf,
    /// Multi-resolution product on the same grid.
    #[arg(long)]
    product: PathBuf,
    /// Calibrated cube.
    #[arg(long)]
    out: PathBuf,
    /// Per-pixel gains as a one-row CSV.
    #[arg(long)]
    gains: Option<PathBuf>,
}

/// Loads `T` from `file` (or its defaults), then sets each dotted field
/// named in `overrides` that carries a value.
fn layered<T: Serialize + DeserializeOwned + Default>(
    file: Option<&Path>,
    overrides: Vec<(&str, Option<Value>)>,
) -> Result<T> {
    let mut value = match file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
        None => serde_json::to_value(T::default()).expect("defaults serialise"),
    };
    for (key, v) in overrides {
        let Some(v) = v else { continue };
        let mut slot = &mut value;
        for part in key.split('.') {
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| Error::Format(format!("config is not an object at `{part}`")))?;
            slot = obj.entry(part).or_insert(Value::Object(Default::default()));
        }
        *slot = v;
    }
    serde_json::from_value(value).map_err(|e| Error::Format(format!("config: {e}")))
}

fn opt<T: Serialize>(v: &Option<T>) -> Option<Value> {
    v.as_ref().map(|v| json!(v))
}

impl PipelineFlags {
    fn load(&self) -> Result<PipelineConfig> {
        layered(
            self.config.as_deref(),
            vec![
                ("lambda", opt(&self.lambda)),
                ("alpha", opt(&self.alpha)),
                ("beta", opt(&self.beta)),
                ("eta", opt(&self.eta)),
                ("r", opt(&self.r)),
                ("seed", opt(&self.seed)),
                ("bands", opt(&self.bands)),
                ("min_wavelength_nm", opt(&self.min_wavelength_nm)),
                ("max_wavelength_nm", opt(&self.max_wavelength_nm)),
                ("sensor_profile", opt(&self.sensor_profile)),
                ("unfold.stages", opt(&self.unfold_stages)),
                ("unfold.rho", opt(&self.unfold_rho)),
                ("ridge.max_iters", opt(&self.ridge_max_iters)),
                ("ridge.tol", opt(&self.ridge_tol)),
                ("cnmf.n_endmembers", opt(&self.cnmf_n_endmembers)),
                ("cnmf.outer_max", opt(&self.cnmf_outer_max)),
                ("cnmf.outer_tol", opt(&self.cnmf_outer_tol)),
                ("cnmf.inner_max", opt(&self.cnmf_inner_max)),
                ("cnmf.inner_tol", opt(&self.cnmf_inner_tol)),
            ],
        )
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec: SceneSpec = layered(
        a.config.as_deref(),
        vec![
            ("height", opt(&a.height)),
            ("width", opt(&a.width)),
            ("bands", opt(&a.bands)),
            ("n_endmembers", opt(&a.n_endmembers)),
            ("seed", opt(&a.seed)),
            ("smoothness", opt(&a.smoothness)),
            ("pure_pixel", opt(&a.pure_pixel)),
            ("noise_std", opt(&a.noise_std)),
            ("min_wavelength_nm", opt(&a.min_wavelength_nm)),
            ("max_wavelength_nm", opt(&a.max_wavelength_nm)),
        ],
    )?;
    let scene = generate_scene(&spec)?;
    write_cube(&scene.cube, &a.out)?;
    println!(
        "wrote {} ({}x{}, {} bands, {} endmembers)",
        a.out.display(),
        spec.height,
        spec.width,
        spec.bands,
        spec.n_endmembers
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let profile = match &a.sensor_profile {
        Some(p) => SensorProfile::read_json(p)?,
        None => SensorProfile::sentinel2a(),
    };
    let product = simulate_product(&read_cube(&a.input)?, &profile)?;
    write_product(&product, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn rough(a: RoughArgs) -> Result<()> {
    let cfg = a.pipeline.load()?;
    cfg.validate()?;
    let product = read_product(&a.input)?;
    let sol = rough_solution(&product, &cfg).map_err(|e| e.in_stage("rough"))?;
    let cube = HyperCube::from_matrix(product.height(), product.width(), cfg.wavelengths(), &sol.y_de)?;
    write_cube(&cube, &a.out)?;
    println!("wrote {} after {} stages", a.out.display(), sol.stages.len());
    Ok(())
}

fn estimate(a: ResponseArgs) -> Result<()> {
    let cfg: RidgeConfig = layered(
        a.config.as_deref(),
        vec![
            ("eta", opt(&a.eta)),
            ("max_iters", opt(&a.max_iters)),
            ("tol", opt(&a.tol)),
            ("seed", opt(&a.seed)),
        ],
    )?;
    let product = read_product(&a.input)?;
    let rough = read_cube(&a.rough)?;
    if (rough.height(), rough.width()) != (product.height(), product.width()) {
        return Err(Error::Shape(format!(
            "rough cube is {}x{}, product is {}x{}",
            rough.height(),
            rough.width(),
            product.height(),
            product.width()
        )));
    }
    let est = estimate_response(&rough.to_matrix(), &product.high_res_matrix()?, &cfg)
        .map_err(|e| e.in_stage("response"))?;
    write_matrix_csv(&est.d, &a.out)?;
    println!(
        "wrote {} (objective {:.6e}, {} iterations, residual {:.2e})",
        a.out.display(),
        est.objective,
        est.iterations,
        est.optimality_residual
    );
    Ok(())
}

fn superres(a: SuperresArgs) -> Result<()> {
    let cfg = a.pipeline.load()?;
    let product = read_product(&a.input)?;
    let run = run_superres(&product, &cfg)?;
    let paths = write_artifacts(&run, &product, &a.out)?;
    for t in &run.timings {
        println!("{:<18} {:>9.3} s", t.stage, t.seconds);
    }
    println!(
        "cnmf: {} sweeps, converged {}, objective {:.6e}",
        run.cnmf.sweeps,
        run.cnmf.converged,
        run.cnmf.objective()
    );
    for p in [&paths.cube, &paths.response, &paths.trace, &paths.manifest] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let cfg: MetricsConfig = layered(
        a.config.as_deref(),
        vec![
            ("psnr_cap_db", opt(&a.psnr_cap_db)),
            ("peak", opt(&a.peak)),
            ("ssim_window", opt(&a.ssim_window)),
            ("ssim_sigma", opt(&a.ssim_sigma)),
        ],
    )?;
    let report = evaluate(&read_cube(&a.reference)?, &read_cube(&a.test)?, &cfg)?;
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    match &a.out {
        Some(path) => fs::write(path, text + "\n").map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => println!("{text}"),
    }
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let cal = calibrate_reference(&read_cube(&a.reference)?, &read_product(&a.product)?)?;
    write_cube(&cal.cube, &a.out)?;
    if let Some(path) = &a.gains {
        let row = cos2a::DMatrix::from_row_slice(1, cal.gains.len(), &cal.gains);
        write_matrix_csv(&row, path)?;
    }
    println!(
        "wrote {} ({} pixels without a determined gain)",
        a.out.display(),
        cal.undetermined
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Simulate(a) => simulate(a),
        Command::Rough(a) => rough(a),
        Command::EstimateResponse(a) => estimate(a),
        Command::Superres(a) => superres(a),
        Command::Metrics(a) => metrics(a),
        Command::Calibrate(a) => calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
