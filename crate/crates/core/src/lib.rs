//! Spectral super-resolution of 12-band, multi-resolution Sentinel-2 style
//! products into 172-band AVIRIS-level hyperspectral cubes.
//!
//! The pipeline has three numerical stages:
//!
//! 1. [`rough`]: an unfolded ADMM solve of `min ‖Y_S − D·Y‖² + prior(Y)` that
//!    yields a rough hyperspectral estimate `Y_DE` using a pluggable denoiser
//!    as the proximal step of the prior.
//! 2. [`response`]: scene-adaptive nonnegative ridge regression of the 4×M
//!    response `D̃` of the 10-m bands against `Y_DE`.
//! 3. [`cnmf`]: the spectral problem regularised by `‖A·S − Y_DE‖²_Q`
//!    (with `Q = BBᵀ ⊗ I`) is solved as the equivalent coupled NMF spatial
//!    super-resolution problem with hyperspectral input `Y_DE·B` and
//!    multispectral input `Ỹ_S`.
//!
//! [`synth`] and [`sensor`] provide synthetic scenes and the sensor
//! simulation used to validate the pipeline end to end; [`metrics`] scores the
//! result. [`pipeline`] wires everything together and is what the `cos2a`
//! binary drives.
//!
//! All matrices are `nalgebra::DMatrix<f64>` with bands along rows and pixels
//! along columns. Pixel `j` of an `H×W` grid is the raster index `y·W + x`.

pub mod cnmf;
pub mod cube;
pub mod error;
pub mod metrics;
pub mod ops;
pub mod pipeline;
pub mod response;
pub mod rough;
pub mod sensor;
pub mod synth;

pub use cnmf::{CnmfConfig, Factorization};
pub use cube::{HyperCube, MultiResProduct};
pub use error::{Error, Result};
pub use sensor::{BandSpec, GsdClass, SensorProfile};

pub use nalgebra::DMatrix;
