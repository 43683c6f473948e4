use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conv::ConvNet;
use crate::error::{Error, Result};

/// Where the quadratic prior is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticAnchor {
    Zero,
    /// The spectral-upsampling initialisation.
    Init,
}

/// Configuration of the proximal step of the implicit prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    Identity,
    Box { window: usize },
    Quadratic { mu: f64, anchor: QuadraticAnchor },
    Conv { weights: PathBuf },
}

/// Identity: on band-averaged products the box prior blurs the 10-m detail
/// that the fusion stage is anchored to.
impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::Identity
    }
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DenoiserSpec::Box { window } if window == 0 || window % 2 == 0 => Err(
                Error::InvalidInput(format!("box window must be odd and >= 1, got {window}")),
            ),
            DenoiserSpec::Quadratic { mu, .. } if !(mu >= 0.0) => {
                Err(Error::InvalidInput(format!("quadratic mu must be >= 0, got {mu}")))
            }
            _ => Ok(()),
        }
    }
}

/// A ready-to-run denoiser.
#[derive(Debug, Clone)]
pub enum Denoiser {
    Identity,
    Box { window: usize },
    /// Exact prox of `(μ/2)‖· − anchor‖²`.
    Quadratic { mu: f64, anchor: DMatrix<f64> },
    Conv(ConvNet),
}

impl Denoiser {
    /// Resolves a spec; `init` supplies the anchor for [`QuadraticAnchor::Init`].
    pub fn from_spec(spec: &DenoiserSpec, init: &DMatrix<f64>) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            DenoiserSpec::Identity => Denoiser::Identity,
            DenoiserSpec::Box { window } => Denoiser::Box { window: *window },
            DenoiserSpec::Quadratic { mu, anchor } => Denoiser::Quadratic {
                mu: *mu,
                anchor: match anchor {
                    QuadraticAnchor::Zero => DMatrix::zeros(init.nrows(), init.ncols()),
                    QuadraticAnchor::Init => init.clone(),
                },
            },
            DenoiserSpec::Conv { weights } => Denoiser::Conv(ConvNet::read(weights)?),
        })
    }

    /// `prox_{(1/ρ)·prior}(x)` on an `M×L` image over an `h×w` grid.
    pub fn denoise(&self, x: &DMatrix<f64>, rho: f64, h: usize, w: usize) -> Result<DMatrix<f64>> {
        if x.ncols() != h * w {
            return Err(Error::Shape(format!(
                "denoiser input has {} pixels for a {h}x{w} grid",
                x.ncols()
            )));
        }
        match self {
            Denoiser::Identity => Ok(x.clone()),
            Denoiser::Box { window } => Ok(box_filter(x, h, w, *window)),
            Denoiser::Quadratic { mu, anchor } => {
                if anchor.shape() != x.shape() {
                    return Err(Error::Shape("quadratic anchor shape".into()));
                }
                Ok((x * rho + anchor * *mu) / (rho + mu))
            }
            Denoiser::Conv(net) => {
                let planes: Vec<Vec<f64>> =
                    x.row_iter().map(|r| r.iter().copied().collect()).collect();
                let out = net.forward(&planes, h, w)?;
                Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |b, j| out[b][j]))
            }
        }
    }
}

/// Per-band `window×window` mean filter; border windows are truncated and
/// averaged over the cells they contain.
pub fn box_filter(x: &DMatrix<f64>, h: usize, w: usize, window: usize) -> DMatrix<f64> {
    if window <= 1 {
        return x.clone();
    }
    let half = window / 2;
    // transpose so each band is a contiguous column
    let xt = x.transpose();
    let l = h * w;
    let mut out_t = DMatrix::zeros(l, x.nrows());
    out_t
        .as_mut_slice()
        .par_chunks_mut(l)
        .zip(xt.as_slice().par_chunks(l))
        .for_each(|(dst, src)| {
            // summed-area table with a zero border row/column
            let mut sat = vec![0.0; (h + 1) * (w + 1)];
            for y in 0..h {
                let mut row = 0.0;
                for xx in 0..w {
                    row += src[y * w + xx];
                    sat[(y + 1) * (w + 1) + xx + 1] = sat[y * (w + 1) + xx + 1] + row;
                }
            }
            for y in 0..h {
                let (y0, y1) = (y.saturating_sub(half), (y + half + 1).min(h));
                for xx in 0..w {
                    let (x0, x1) = (xx.saturating_sub(half), (xx + half + 1).min(w));
                    let sum = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1]
                        - sat[y1 * (w + 1) + x0]
                        + sat[y0 * (w + 1) + x0];
                    dst[y * w + xx] = sum / ((y1 - y0) * (x1 - x0)) as f64;
                }
            }
        });
    out_t.transpose()
}
