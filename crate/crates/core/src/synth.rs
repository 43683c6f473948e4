//! Synthetic hyperspectral scenes with known low-rank structure `Y = A·S`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cnmf::Factorization;
use crate::cube::HyperCube;
use crate::error::{Error, Result};
use crate::sensor::uniform_wavelengths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub n_endmembers: usize,
    pub seed: u64,
    /// Typical width, in bands, of the Gaussian bumps that make up an
    /// endmember spectrum.
    pub smoothness: f64,
    /// Force one pure pixel per endmember.
    pub pure_pixel: bool,
    /// Standard deviation of additive Gaussian noise; 0 keeps `Y = A·S` exact.
    pub noise_std: f64,
    pub min_wavelength_nm: f64,
    pub max_wavelength_nm: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            bands: 172,
            n_endmembers: 5,
            seed: 0,
            smoothness: 12.0,
            pure_pixel: true,
            noise_std: 0.0,
            min_wavelength_nm: 400.0,
            max_wavelength_nm: 2500.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_endmembers;
        if n == 0 {
            return Err(Error::InvalidInput("scene needs at least one endmember".into()));
        }
        if self.bands < n {
            return Err(Error::InvalidInput(format!(
                "{} bands cannot hold {n} independent endmembers",
                self.bands
            )));
        }
        if self.height * self.width < n {
            return Err(Error::InvalidInput(format!(
                "{}x{} grid is smaller than {n} endmembers",
                self.height, self.width
            )));
        }
        if !(self.smoothness > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::InvalidInput(
                "smoothness must be > 0 and noise_std >= 0".into(),
            ));
        }
        if !(self.max_wavelength_nm > self.min_wavelength_nm) {
            return Err(Error::InvalidInput("empty wavelength range".into()));
        }
        Ok(())
    }
}

/// Ground truth of a synthetic scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cube: HyperCube,
    pub truth: Factorization,
    /// Raster index of the pure pixel of each endmember (empty unless requested).
    pub pure_pixels: Vec<usize>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = endmembers(spec, &mut rng);
    let (s, pure_pixels) = abundances(spec, &mut rng);
    let mut y = &a * &s;
    if spec.noise_std > 0.0 {
        let noise = Normal::new(0.0, spec.noise_std).expect("positive std");
        y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    let wl = uniform_wavelengths(spec.bands, spec.min_wavelength_nm, spec.max_wavelength_nm);
    let cube = HyperCube::from_matrix(spec.height, spec.width, wl, &y)?;
    Ok(Scene {
        cube,
        truth: Factorization::new(a, s)?,
        pure_pixels,
    })
}

/// Columns are sums of 3–6 Gaussian bumps plus an offset, min-max rescaled
/// into `[0.05, 0.95]`.
fn endmembers(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = spec.bands;
    let mut a = DMatrix::zeros(m, spec.n_endmembers);
    for mut col in a.column_iter_mut() {
        let bumps = rng.gen_range(3..=6);
        let offset = rng.gen_range(0.02..0.2);
        let mut spectrum = vec![offset; m];
        for _ in 0..bumps {
            let center = rng.gen_range(0.0..m as f64);
            let width = spec.smoothness * rng.gen_range(0.5..2.5);
            let height = rng.gen_range(0.2..1.0);
            for (i, v) in spectrum.iter_mut().enumerate() {
                let d = (i as f64 - center) / width;
                *v += height * (-0.5 * d * d).exp();
            }
        }
        let lo = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = spectrum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        for (dst, v) in col.iter_mut().zip(spectrum) {
            *dst = 0.05 + 0.9 * (v - lo) / span;
        }
    }
    a
}

/// Smooth Gaussian random fields per endmember, softmaxed across endmembers,
/// with optional pure-pixel injection.
fn abundances(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<usize>) {
    let (h, w, n) = (spec.height, spec.width, spec.n_endmembers);
    let l = h * w;
    let sigma = (h.max(w) as f64 / 10.0).max(1.0);
    let temperature = 3.0;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut logits = DMatrix::zeros(n, l);
    for i in 0..n {
        let noise: Vec<f64> = (0..l).map(|_| normal.sample(rng)).collect();
        let field = gaussian_smooth(&noise, h, w, sigma);
        let mean = field.iter().sum::<f64>() / l as f64;
        let var = field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / l as f64;
        let sd = var.sqrt().max(1e-12);
        for j in 0..l {
            logits[(i, j)] = temperature * (field[j] - mean) / sd;
        }
    }

    let mut s = DMatrix::zeros(n, l);
    for j in 0..l {
        let col = logits.column(j);
        let max = col.max();
        let total: f64 = col.iter().map(|v| (v - max).exp()).sum();
        for i in 0..n {
            s[(i, j)] = (col[i] - max).exp() / total;
        }
    }

    let mut pure = Vec::new();
    if spec.pure_pixel {
        pure = sample(rng, l, n).into_vec();
        for (i, &j) in pure.iter().enumerate() {
            s.column_mut(j).fill(0.0);
            s[(i, j)] = 1.0;
        }
    }
    (s, pure)
}

/// Separable Gaussian filter with clamped borders.
fn gaussian_smooth(data: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-0.5 * (d as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * data[y * w + clamp(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + k as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc / norm;
        }
    }
    out
}
