//! Hyperspectral cubes, multi-resolution products and their on-disk formats.
//!
//! Cube file layout: one UTF-8 JSON header line terminated by `\n`, followed
//! by exactly `4·bands·height·width` bytes of little-endian `f32` samples in
//! band-sequential order. Sample `(b, y, x)` lives at flat index
//! `b·H·W + y·W + x`.
//!
//! A [`MultiResProduct`] is stored as a cube (wavelengths = band centres) plus
//! a sidecar `<file>.bands.json` holding the band table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::sensor::{BandSpec, GsdClass, SensorProfile};

const CUBE_MAGIC: &str = "cos2a-cube";
const CUBE_VERSION: u32 = 1;

/// Bands × height × width reflectance tensor, band-sequential in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
}

impl HyperCube {
    pub fn new(
        height: usize,
        width: usize,
        wavelengths_nm: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bands = wavelengths_nm.len();
        if bands == 0 || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "empty cube ({bands} bands, {height}x{width})"
            )));
        }
        if values.len() != bands * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {bands}x{height}x{width} cube",
                values.len()
            )));
        }
        check_wavelengths(&wavelengths_nm)?;
        ensure_finite(&values, "cube sample")?;
        Ok(Self {
            height,
            width,
            wavelengths_nm,
            values,
        })
    }

    /// Builds a cube from an `M×L` matrix (bands × raster pixels).
    pub fn from_matrix(
        height: usize,
        width: usize,
        wavelengths_nm: Vec<f64>,
        matrix: &DMatrix<f64>,
    ) -> Result<Self> {
        if matrix.nrows() != wavelengths_nm.len() || matrix.ncols() != height * width {
            return Err(Error::Shape(format!(
                "matrix {}x{} does not match {} bands over {height}x{width}",
                matrix.nrows(),
                matrix.ncols(),
                wavelengths_nm.len()
            )));
        }
        // DMatrix is column-major, so its transpose's storage is band-sequential.
        let values = matrix.transpose().as_slice().to_vec();
        Self::new(height, width, wavelengths_nm, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.values[b * n..(b + 1) * n]
    }

    pub fn get(&self, b: usize, y: usize, x: usize) -> f64 {
        self.values[b * self.pixels() + y * self.width + x]
    }

    /// Spectrum of raster pixel `j`.
    pub fn pixel(&self, j: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands()).map(|b| self.values[b * n + j]).collect()
    }

    /// `M×L` matrix view (bands × raster pixels).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.bands(), self.pixels(), &self.values)
    }
}

fn check_wavelengths(wl: &[f64]) -> Result<()> {
    ensure_finite(wl, "wavelength")?;
    if let Some(i) = wl.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!(
            "wavelengths must be strictly increasing (index {})",
            i + 1
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CubeHeader {
    magic: String,
    version: u32,
    height: usize,
    width: usize,
    bands: usize,
    dtype: String,
    interleave: String,
    wavelengths_nm: Vec<f64>,
}

pub fn write_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(cube)?).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn encode_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    let header = CubeHeader {
        magic: CUBE_MAGIC.into(),
        version: CUBE_VERSION,
        height: cube.height,
        width: cube.width,
        bands: cube.bands(),
        dtype: "f32le".into(),
        interleave: "bsq".into(),
        wavelengths_nm: cube.wavelengths_nm.clone(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    out.push(b'\n');
    out.reserve(4 * cube.values.len());
    for (i, &v) in cube.values.iter().enumerate() {
        let s = v as f32;
        if !s.is_finite() {
            return Err(Error::NonFinite(format!(
                "sample {i} ({v}) is not representable as f32"
            )));
        }
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: CubeHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::Format(format!("cube header: {e}")))?;
    if header.magic != CUBE_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", header.magic)));
    }
    if header.version != CUBE_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.dtype != "f32le" || header.interleave != "bsq" {
        return Err(Error::Format(format!(
            "unsupported dtype/interleave {}/{}",
            header.dtype, header.interleave
        )));
    }
    if header.wavelengths_nm.len() != header.bands {
        return Err(Error::Format(format!(
            "header declares {} bands but lists {} wavelengths",
            header.bands,
            header.wavelengths_nm.len()
        )));
    }
    let count = header
        .bands
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.width))
        .ok_or_else(|| Error::Format("cube dimensions overflow".into()))?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 4 * count {
        return Err(Error::Shape(format!(
            "payload holds {} bytes, header requires {}",
            payload.len(),
            4 * count
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    HyperCube::new(header.height, header.width, header.wavelengths_nm, values)
}

/// A 12-band (by default) multi-resolution product on the finest grid, with
/// coarse bands block-replicated.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiResProduct {
    height: usize,
    width: usize,
    profile: SensorProfile,
    values: Vec<f64>,
}

impl MultiResProduct {
    /// Validates shape, finiteness and block constancy of the coarse bands.
    pub fn new(
        height: usize,
        width: usize,
        profile: SensorProfile,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bands = profile.bands.len();
        if values.len() != bands * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {bands}x{height}x{width} product",
                values.len()
            )));
        }
        ensure_finite(&values, "product sample")?;
        let product = Self {
            height,
            width,
            profile,
            values,
        };
        product.check_block_constancy()?;
        Ok(product)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn profile(&self) -> &SensorProfile {
        &self.profile
    }

    pub fn band_specs(&self) -> &[BandSpec] {
        &self.profile.bands
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.values[b * n..(b + 1) * n]
    }

    /// `Y_S`: all bands × pixels.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.profile.bands.len(), self.pixels(), &self.values)
    }

    /// `Ỹ_S`: the 10-m bands, in profile order.
    pub fn high_res_matrix(&self) -> Result<DMatrix<f64>> {
        let rows = self.profile.high_res_indices();
        if rows.is_empty() {
            return Err(Error::InvalidInput("product has no 10-m band".into()));
        }
        let n = self.pixels();
        let mut out = DMatrix::zeros(rows.len(), n);
        for (i, &b) in rows.iter().enumerate() {
            for (j, &v) in self.band(b).iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Every 20-m (60-m) band must be constant on each aligned 2×2 (6×6)
    /// block, edge blocks truncated.
    pub fn check_block_constancy(&self) -> Result<()> {
        for (b, spec) in self.profile.bands.iter().enumerate() {
            let r = spec.gsd_class.factor();
            if r == 1 {
                continue;
            }
            let band = self.band(b);
            for y in 0..self.height {
                for x in 0..self.width {
                    let anchor = band[(y / r * r) * self.width + x / r * r];
                    if band[y * self.width + x] != anchor {
                        return Err(Error::InvalidInput(format!(
                            "band {} ({:?}) is not constant on its {r}x{r} block at ({y}, {x})",
                            spec.name, spec.gsd_class
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The product as a cube whose wavelengths are the band centres.
    pub fn to_cube(&self) -> Result<HyperCube> {
        let centers = self.profile.bands.iter().map(|b| b.center_nm).collect();
        HyperCube::new(self.height, self.width, centers, self.values.clone())
    }

    pub fn count_by_gsd(&self, gsd: GsdClass) -> usize {
        self.profile
            .bands
            .iter()
            .filter(|b| b.gsd_class == gsd)
            .count()
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".bands.json");
    PathBuf::from(name)
}

pub fn write_product(product: &MultiResProduct, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_cube(&product.to_cube()?, path)?;
    product.profile.write_json(sidecar_path(path))
}

pub fn read_product(path: impl AsRef<Path>) -> Result<MultiResProduct> {
    let path = path.as_ref();
    let cube = read_cube(path)?;
    let profile = SensorProfile::read_json(sidecar_path(path))?;
    if profile.bands.len() != cube.bands() {
        return Err(Error::Shape(format!(
            "band table lists {} bands, cube has {}",
            profile.bands.len(),
            cube.bands()
        )));
    }
    MultiResProduct::new(cube.height, cube.width, profile, cube.values)
}

/// Writes a matrix as comma-separated rows using shortest round-trip decimals.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(m)?).map_err(|e| Error::io(path, e))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> Result<String> {
    ensure_finite(m.as_slice(), "matrix entry")?;
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text)
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: non-numeric cell {cell:?}", ln + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: ragged row ({} cells, expected {})",
                    ln + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty matrix".into()));
    }
    let flat: Vec<f64> = rows.concat();
    ensure_finite(&flat, "matrix entry")?;
    Ok(DMatrix::from_row_slice(rows.len(), rows[0].len(), &flat))
}

/// Writes a pretty-printed JSON value followed by a newline.
pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push(b'\n');
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&text).map_err(|e| Error::io(path, e))
}
