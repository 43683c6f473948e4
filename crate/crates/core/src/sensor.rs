//! Sensor profiles, band-averaging spectral responses and the simulation of
//! multi-resolution products from hyperspectral cubes.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cube::{write_json, HyperCube, MultiResProduct};
use crate::error::{Error, Result};

const SENTINEL2A_JSON: &str = include_str!("../../../data/sentinel2a.json");

/// Ground-sample-distance class of a band, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum GsdClass {
    M10,
    M20,
    M60,
}

impl GsdClass {
    /// Blur/replication factor relative to the 10-m grid.
    pub fn factor(self) -> usize {
        match self {
            GsdClass::M10 => 1,
            GsdClass::M20 => 2,
            GsdClass::M60 => 6,
        }
    }
}

impl TryFrom<u32> for GsdClass {
    type Error = String;

    fn try_from(v: u32) -> std::result::Result<Self, String> {
        match v {
            10 => Ok(GsdClass::M10),
            20 => Ok(GsdClass::M20),
            60 => Ok(GsdClass::M60),
            _ => Err(format!("gsd_class must be 10, 20 or 60, got {v}")),
        }
    }
}

impl From<GsdClass> for u32 {
    fn from(g: GsdClass) -> u32 {
        match g {
            GsdClass::M10 => 10,
            GsdClass::M20 => 20,
            GsdClass::M60 => 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub center_nm: f64,
    pub bandwidth_nm: f64,
    pub gsd_class: GsdClass,
}

impl BandSpec {
    /// Inclusive wavelength coverage `[center − bw/2, center + bw/2]`.
    pub fn coverage(&self) -> (f64, f64) {
        let half = 0.5 * self.bandwidth_nm;
        (self.center_nm - half, self.center_nm + half)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub bands: Vec<BandSpec>,
}

impl SensorProfile {
    /// The bundled Sentinel-2A profile (B10 excluded): 10 m {B2,B3,B4,B8},
    /// 20 m {B5,B6,B7,B8A,B11,B12}, 60 m {B1,B9}.
    pub fn sentinel2a() -> Self {
        Self::from_json(SENTINEL2A_JSON).expect("bundled sentinel2a.json is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: Self =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("sensor profile: {e}")))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidInput("sensor profile has no bands".into()));
        }
        for b in &self.bands {
            if !(b.bandwidth_nm > 0.0) || !b.center_nm.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "band {}: bandwidth must be positive and centre finite",
                    b.name
                )));
            }
        }
        Ok(())
    }

    /// Indices of the 10-m bands, in profile order.
    pub fn high_res_indices(&self) -> Vec<usize> {
        self.bands
            .iter()
            .enumerate()
            .filter(|(_, b)| b.gsd_class == GsdClass::M10)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Band-averaging response: row `b` is `1/k_b` on the `k_b` hyperspectral
/// bands inside band `b`'s coverage and zero elsewhere.
pub fn build_response(profile: &SensorProfile, wavelengths_nm: &[f64]) -> Result<DMatrix<f64>> {
    profile.validate()?;
    let mut d = DMatrix::zeros(profile.bands.len(), wavelengths_nm.len());
    for (row, band) in profile.bands.iter().enumerate() {
        let (lo, hi) = band.coverage();
        let inside: Vec<usize> = wavelengths_nm
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= lo && w <= hi)
            .map(|(i, _)| i)
            .collect();
        if inside.is_empty() {
            return Err(Error::InvalidInput(format!(
                "band {} covers [{lo}, {hi}] nm, which contains no hyperspectral wavelength",
                band.name
            )));
        }
        let w = 1.0 / inside.len() as f64;
        for i in inside {
            d[(row, i)] = w;
        }
    }
    Ok(d)
}

/// Rows of `d` belonging to the 10-m bands of `profile` (`D̃`).
pub fn high_res_submatrix(d: &DMatrix<f64>, profile: &SensorProfile) -> Result<DMatrix<f64>> {
    if d.nrows() != profile.bands.len() {
        return Err(Error::Shape(format!(
            "response has {} rows, profile has {} bands",
            d.nrows(),
            profile.bands.len()
        )));
    }
    let rows = profile.high_res_indices();
    if rows.is_empty() {
        return Err(Error::InvalidInput("profile has no 10-m band".into()));
    }
    Ok(d.select_rows(rows.iter()))
}

/// Mean over each `r×r` block; edge blocks are truncated and averaged over
/// the cells they actually contain.
pub fn block_average(image: &DMatrix<f64>, factor: usize) -> DMatrix<f64> {
    let r = factor.max(1);
    let (h, w) = image.shape();
    let (oh, ow) = (h.div_ceil(r), w.div_ceil(r));
    DMatrix::from_fn(oh, ow, |by, bx| {
        let (y1, x1) = (((by + 1) * r).min(h), ((bx + 1) * r).min(w));
        let mut sum = 0.0;
        for y in by * r..y1 {
            for x in bx * r..x1 {
                sum += image[(y, x)];
            }
        }
        sum / ((y1 - by * r) * (x1 - bx * r)) as f64
    })
}

/// Nearest-block upsampling of `image` onto an `out_h × out_w` grid.
pub fn block_replicate(
    image: &DMatrix<f64>,
    factor: usize,
    out_h: usize,
    out_w: usize,
) -> Result<DMatrix<f64>> {
    let r = factor.max(1);
    let (h, w) = image.shape();
    if out_h.div_ceil(r) != h || out_w.div_ceil(r) != w {
        return Err(Error::Shape(format!(
            "cannot replicate a {h}x{w} grid by {r} onto {out_h}x{out_w}"
        )));
    }
    Ok(DMatrix::from_fn(out_h, out_w, |y, x| image[(y / r, x / r)]))
}

/// Degrades a hyperspectral cube into a multi-resolution product: spectral
/// averaging through the profile response, then per-band block blur and
/// replication at the band's GSD factor.
pub fn simulate_product(hsi: &HyperCube, profile: &SensorProfile) -> Result<MultiResProduct> {
    let d = build_response(profile, hsi.wavelengths_nm())?;
    let (h, w) = (hsi.height(), hsi.width());
    let spectral = &d * hsi.to_matrix();
    let mut values = Vec::with_capacity(spectral.len());
    for (b, band) in profile.bands.iter().enumerate() {
        let row: Vec<f64> = spectral.row(b).iter().copied().collect();
        let r = band.gsd_class.factor();
        if r == 1 {
            values.extend_from_slice(&row);
            continue;
        }
        let plane = DMatrix::from_row_slice(h, w, &row);
        let coarse = block_replicate(&block_average(&plane, r), r, h, w)?;
        values.extend(coarse.transpose().iter());
    }
    MultiResProduct::new(h, w, profile.clone(), values)
}

/// `γ* = argmin_{γ≥0} ½‖γ·a − s‖²`.
pub fn calibrate_gain(a_sub: &[f64], s: &[f64]) -> Result<f64> {
    if a_sub.len() != s.len() {
        return Err(Error::Shape(format!(
            "subvector has {} entries, pixel has {}",
            a_sub.len(),
            s.len()
        )));
    }
    let aa: f64 = a_sub.iter().map(|v| v * v).sum();
    if aa == 0.0 {
        return Err(Error::InvalidInput("calibration subvector is all zero".into()));
    }
    let as_: f64 = a_sub.iter().zip(s).map(|(a, b)| a * b).sum();
    Ok((as_ / aa).max(0.0))
}

/// Index of the hyperspectral band nearest to each profile band centre;
/// ties go to the lower index.
pub fn nearest_band_indices(wavelengths_nm: &[f64], profile: &SensorProfile) -> Vec<usize> {
    profile
        .bands
        .iter()
        .map(|band| {
            let mut best = 0;
            for (i, w) in wavelengths_nm.iter().enumerate() {
                if (w - band.center_nm).abs() < (wavelengths_nm[best] - band.center_nm).abs() {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// The entries of `a` at [`nearest_band_indices`].
pub fn nearest_band_subvector(
    a: &[f64],
    wavelengths_nm: &[f64],
    profile: &SensorProfile,
) -> Result<Vec<f64>> {
    if wavelengths_nm.is_empty() || a.len() != wavelengths_nm.len() {
        return Err(Error::Shape(format!(
            "spectrum has {} entries for {} wavelengths",
            a.len(),
            wavelengths_nm.len()
        )));
    }
    Ok(nearest_band_indices(wavelengths_nm, profile)
        .into_iter()
        .map(|i| a[i])
        .collect())
}

/// `count` wavelengths evenly spaced over `[lo, hi]` nm, end points included.
pub fn uniform_wavelengths(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(name: &str, c: f64, bw: f64, g: GsdClass) -> BandSpec {
        BandSpec {
            name: name.into(),
            center_nm: c,
            bandwidth_nm: bw,
            gsd_class: g,
        }
    }

    fn profile(bands: Vec<BandSpec>) -> SensorProfile {
        SensorProfile {
            name: "test".into(),
            source: None,
            bands,
        }
    }

    #[test]
    fn default_profile_grouping() {
        let p = SensorProfile::sentinel2a();
        assert_eq!(p.bands.len(), 12);
        let count = |g| p.bands.iter().filter(|b| b.gsd_class == g).count();
        assert_eq!(
            (count(GsdClass::M10), count(GsdClass::M20), count(GsdClass::M60)),
            (4, 6, 2)
        );
        let hi: Vec<&str> = p
            .high_res_indices()
            .iter()
            .map(|&i| p.bands[i].name.as_str())
            .collect();
        assert_eq!(hi, ["B2", "B3", "B4", "B8"]);
    }

    #[test]
    fn bad_gsd_class_rejected() {
        let text = r#"{"name":"x","bands":[{"name":"a","center_nm":500,"bandwidth_nm":10,"gsd_class":30}]}"#;
        assert!(SensorProfile::from_json(text).is_err());
    }

    #[test]
    fn two_band_average() {
        let wl: Vec<f64> = (0..8).map(|i| 400.0 + 10.0 * i as f64).collect();
        // covers 430 and 440 only
        let p = profile(vec![band("x", 435.0, 10.0, GsdClass::M10)]);
        let d = build_response(&p, &wl).unwrap();
        assert_eq!(
            d.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn empty_coverage_is_error() {
        let wl = vec![400.0, 410.0];
        let p = profile(vec![band("x", 405.0, 4.0, GsdClass::M10)]);
        assert!(matches!(build_response(&p, &wl), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn default_response_on_uniform_grid() {
        let wl = uniform_wavelengths(172, 400.0, 2500.0);
        let d = build_response(&SensorProfile::sentinel2a(), &wl).unwrap();
        for r in 0..12 {
            assert!((d.row(r).sum() - 1.0).abs() < 1e-12);
            assert!(d.row(r).iter().all(|&v| v >= 0.0));
            for s in r + 1..12 {
                assert_ne!(d.row(r), d.row(s), "rows {r} and {s} identical");
            }
        }
    }

    #[test]
    fn all_high_res_submatrix_is_whole_response() {
        let wl = uniform_wavelengths(20, 400.0, 600.0);
        let p = profile(vec![
            band("a", 450.0, 40.0, GsdClass::M10),
            band("b", 550.0, 40.0, GsdClass::M10),
        ]);
        let d = build_response(&p, &wl).unwrap();
        assert_eq!(high_res_submatrix(&d, &p).unwrap(), d);
    }

    #[test]
    fn submatrix_follows_permuted_profile_order() {
        let wl = uniform_wavelengths(172, 400.0, 2500.0);
        let base = SensorProfile::sentinel2a();
        let perm = [11usize, 3, 7, 0, 2, 9, 1, 10, 5, 8, 4, 6];
        let permuted = profile(perm.iter().map(|&i| base.bands[i].clone()).collect());
        let d = build_response(&permuted, &wl).unwrap();
        let sub = high_res_submatrix(&d, &permuted).unwrap();
        let expected: Vec<usize> = perm
            .iter()
            .enumerate()
            .filter(|(_, &i)| base.bands[i].gsd_class == GsdClass::M10)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(sub.nrows(), 4);
        for (r, &k) in expected.iter().enumerate() {
            assert_eq!(sub.row(r), d.row(k));
        }
        let names: Vec<&str> = permuted
            .high_res_indices()
            .iter()
            .map(|&i| permuted.bands[i].name.as_str())
            .collect();
        assert_eq!(names, ["B4", "B8", "B3", "B2"]);
    }

    #[test]
    fn no_high_res_band_is_error() {
        let wl = uniform_wavelengths(10, 400.0, 500.0);
        let p = profile(vec![band("a", 450.0, 40.0, GsdClass::M20)]);
        let d = build_response(&p, &wl).unwrap();
        assert!(high_res_submatrix(&d, &p).is_err());
    }

    #[test]
    fn block_average_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(block_average(&m, 2), DMatrix::from_element(1, 1, 2.5));
        let c = DMatrix::from_element(7, 5, 0.3);
        for r in 1..8 {
            assert!(block_average(&c, r).iter().all(|&v| (v - 0.3).abs() < 1e-15));
        }
    }

    #[test]
    fn block_average_truncated_edges_match_brute_force() {
        let ramp = DMatrix::from_fn(5, 5, |y, x| (5 * y + x) as f64);
        let avg = block_average(&ramp, 2);
        assert_eq!(avg.shape(), (3, 3));
        for by in 0..3 {
            for bx in 0..3 {
                let cells: Vec<f64> = (0..5)
                    .flat_map(|y| (0..5).map(move |x| (y, x)))
                    .filter(|&(y, x)| y / 2 == by && x / 2 == bx)
                    .map(|(y, x)| ramp[(y, x)])
                    .collect();
                let expect = cells.iter().sum::<f64>() / cells.len() as f64;
                assert_eq!(avg[(by, bx)], expect);
            }
        }
        // corner block holds a single cell, edges two
        assert_eq!(avg[(2, 2)], 24.0);
        assert_eq!(avg[(2, 0)], 20.5);
    }

    #[test]
    fn replicate_examples() {
        let one = DMatrix::from_element(1, 1, 2.5);
        assert_eq!(
            block_replicate(&one, 2, 2, 2).unwrap(),
            DMatrix::from_element(2, 2, 2.5)
        );
        let m = DMatrix::from_fn(3, 4, |y, x| (y * 7 + x) as f64);
        assert_eq!(block_replicate(&m, 1, 3, 4).unwrap(), m);
        assert!(block_replicate(&one, 2, 3, 3).is_err());
    }

    #[test]
    fn replicate_then_average_is_identity() {
        let m = DMatrix::from_fn(8, 8, |y, x| ((y * 31 + x * 17) % 11) as f64 / 7.0);
        let up = block_replicate(&m, 2, 16, 16).unwrap();
        assert_eq!(block_average(&up, 2), m);
    }

    #[test]
    fn calibration_gain() {
        let s = [0.1, 0.4, 0.3];
        assert_eq!(calibrate_gain(&s, &s).unwrap(), 1.0);
        let a2: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        assert!((calibrate_gain(&a2, &s).unwrap() - 0.5).abs() < 1e-15);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        assert_eq!(calibrate_gain(&neg, &s).unwrap(), 0.0);
        assert!(calibrate_gain(&[0.0; 3], &s).is_err());
    }

    #[test]
    fn nearest_band_ties_go_low() {
        let wl = vec![400.0, 410.0, 420.0];
        let p = profile(vec![
            band("a", 410.0, 5.0, GsdClass::M10),
            band("b", 405.0, 5.0, GsdClass::M10),
            band("c", 999.0, 5.0, GsdClass::M10),
        ]);
        assert_eq!(nearest_band_indices(&wl, &p), vec![1, 0, 2]);
        let a = [7.0, 8.0, 9.0];
        assert_eq!(nearest_band_subvector(&a, &wl, &p).unwrap(), vec![8.0, 7.0, 9.0]);
    }
}
