//! Image quality metrics between a reference and a test cube.
//!
//! Conventions: PSNR is the band mean of per-band PSNR with the reference
//! maximum as peak; SAM skips pixels where either spectrum is zero; SSIM is
//! the band mean of single-scale SSIM over valid (fully inside) Gaussian
//! windows with the reference maximum as dynamic range.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::HyperCube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// PSNR reported for a band with zero error.
    pub psnr_cap_db: f64,
    /// Peak for PSNR; `None` uses the reference maximum.
    pub peak: Option<f64>,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    /// Dynamic range for SSIM; `None` uses the reference maximum.
    pub ssim_range: Option<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            psnr_cap_db: 100.0,
            peak: None,
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_k1: 0.01,
            ssim_k2: 0.03,
            ssim_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub rmse: f64,
    pub ssim: f64,
    pub per_band_psnr: Vec<f64>,
    pub skipped_pixels: usize,
    pub runtime_s: f64,
}

fn check_shapes(reference: &HyperCube, test: &HyperCube) -> Result<()> {
    let dims = |c: &HyperCube| (c.bands(), c.height(), c.width());
    if dims(reference) != dims(test) {
        return Err(Error::Shape(format!(
            "reference is {:?} (bands, height, width), test is {:?}",
            dims(reference),
            dims(test)
        )));
    }
    Ok(())
}

fn reference_max(reference: &HyperCube) -> Result<f64> {
    let peak = reference.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak > 0.0 {
        Ok(peak)
    } else {
        Err(Error::InvalidInput("reference cube has no positive value".into()))
    }
}

pub fn per_band_psnr(
    reference: &HyperCube,
    test: &HyperCube,
    cfg: &MetricsConfig,
) -> Result<Vec<f64>> {
    check_shapes(reference, test)?;
    let peak = match cfg.peak {
        Some(p) => p,
        None => reference_max(reference)?,
    };
    Ok((0..reference.bands())
        .into_par_iter()
        .map(|b| {
            let mse = reference
                .band(b)
                .iter()
                .zip(test.band(b))
                .map(|(r, t)| (r - t) * (r - t))
                .sum::<f64>()
                / reference.pixels() as f64;
            if mse == 0.0 {
                cfg.psnr_cap_db
            } else {
                (10.0 * (peak * peak / mse).log10()).min(cfg.psnr_cap_db)
            }
        })
        .collect())
}

pub fn psnr(reference: &HyperCube, test: &HyperCube, cfg: &MetricsConfig) -> Result<f64> {
    let bands = per_band_psnr(reference, test, cfg)?;
    Ok(bands.iter().sum::<f64>() / bands.len() as f64)
}

/// Mean spectral angle in degrees and the number of skipped zero-spectrum
/// pixels. Returns 0 when every pixel is skipped.
///
/// The angle `arccos(⟨x,y⟩/‖x‖‖y‖)` is evaluated as
/// `2·atan2(‖x̂ − ŷ‖, ‖x̂ + ŷ‖)` on the unit spectra, which is exact to
/// rounding near 0° where `arccos` loses half the digits.
pub fn sam_degrees(reference: &HyperCube, test: &HyperCube) -> Result<(f64, usize)> {
    check_shapes(reference, test)?;
    let (m, l) = (reference.bands(), reference.pixels());
    let (rv, tv) = (reference.values(), test.values());
    let mut rn = vec![0.0; l];
    let mut tn = vec![0.0; l];
    for b in 0..m {
        let (rb, tb) = (&rv[b * l..(b + 1) * l], &tv[b * l..(b + 1) * l]);
        for j in 0..l {
            rn[j] += rb[j] * rb[j];
            tn[j] += tb[j] * tb[j];
        }
    }
    rn.iter_mut().chain(tn.iter_mut()).for_each(|v| *v = v.sqrt());
    let mut diff = vec![0.0; l];
    let mut sum = vec![0.0; l];
    for b in 0..m {
        let (rb, tb) = (&rv[b * l..(b + 1) * l], &tv[b * l..(b + 1) * l]);
        for j in 0..l {
            if rn[j] == 0.0 || tn[j] == 0.0 {
                continue;
            }
            let (x, y) = (rb[j] / rn[j], tb[j] / tn[j]);
            diff[j] += (x - y) * (x - y);
            sum[j] += (x + y) * (x + y);
        }
    }
    let mut total = 0.0;
    let mut skipped = 0;
    for j in 0..l {
        if rn[j] == 0.0 || tn[j] == 0.0 {
            skipped += 1;
            continue;
        }
        total += (2.0 * diff[j].sqrt().atan2(sum[j].sqrt())).to_degrees();
    }
    let counted = l - skipped;
    Ok((if counted == 0 { 0.0 } else { total / counted as f64 }, skipped))
}

pub fn rmse(reference: &HyperCube, test: &HyperCube) -> Result<f64> {
    check_shapes(reference, test)?;
    let sq: f64 = reference
        .values()
        .iter()
        .zip(test.values())
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    Ok((sq / reference.values().len() as f64).sqrt())
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let k: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h×w` raster plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(r: &[f64], t: &[f64], h: usize, w: usize, k: &[f64], c1: f64, c2: f64) -> f64 {
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>();
    let mu_r = filter_valid(r, h, w, k);
    let mu_t = filter_valid(t, h, w, k);
    let rr = filter_valid(&prod(r, r), h, w, k);
    let tt = filter_valid(&prod(t, t), h, w, k);
    let rt = filter_valid(&prod(r, t), h, w, k);
    let mut sum = 0.0;
    for i in 0..mu_r.len() {
        let (mr, mt) = (mu_r[i], mu_t[i]);
        let var_r = rr[i] - mr * mr;
        let var_t = tt[i] - mt * mt;
        let cov = rt[i] - mr * mt;
        sum += ((2.0 * mr * mt + c1) * (2.0 * cov + c2))
            / ((mr * mr + mt * mt + c1) * (var_r + var_t + c2));
    }
    sum / mu_r.len() as f64
}

pub fn ssim(reference: &HyperCube, test: &HyperCube, cfg: &MetricsConfig) -> Result<f64> {
    check_shapes(reference, test)?;
    let (h, w, n) = (reference.height(), reference.width(), cfg.ssim_window);
    if n == 0 || h < n || w < n {
        return Err(Error::InvalidInput(format!(
            "SSIM window {n} does not fit a {h}x{w} image"
        )));
    }
    let range = match cfg.ssim_range {
        Some(v) => v,
        None => reference_max(reference)?,
    };
    let c1 = (cfg.ssim_k1 * range).powi(2);
    let c2 = (cfg.ssim_k2 * range).powi(2);
    let k = gaussian_kernel(n, cfg.ssim_sigma);
    let total: f64 = (0..reference.bands())
        .into_par_iter()
        .map(|b| ssim_plane(reference.band(b), test.band(b), h, w, &k, c1, c2))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / reference.bands() as f64)
}

pub fn evaluate(
    reference: &HyperCube,
    test: &HyperCube,
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    let start = Instant::now();
    let per_band_psnr = per_band_psnr(reference, test, cfg)?;
    let psnr_db = per_band_psnr.iter().sum::<f64>() / per_band_psnr.len() as f64;
    let (sam_deg, skipped_pixels) = sam_degrees(reference, test)?;
    Ok(MetricsReport {
        psnr_db,
        sam_deg,
        rmse: rmse(reference, test)?,
        ssim: ssim(reference, test, cfg)?,
        per_band_psnr,
        skipped_pixels,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
