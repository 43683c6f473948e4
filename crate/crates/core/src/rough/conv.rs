//! Residual-in-residual group-convolution denoiser.
//!
//! Forward pass: `h = conv_in(x)`; for each block `h += conv_b(relu(conv_a(h)))`;
//! `out = x + conv_out(h)`. All convolutions are 3×3, zero padded, grouped
//! with the same group count.
//!
//! Weights file: a JSON header line
//! `{"magic":"cos2a-conv","version":1,"arch":{"channels":C,"groups":G,"blocks":d,"bands":M}}`
//! then little-endian `f32` values in layer order `conv_in`, then per block
//! `conv_a`, `conv_b`, then `conv_out`. Each layer stores its weights as
//! `[out][in_per_group][ky][kx]` followed by `[out]` biases.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &str = "cos2a-conv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvArch {
    pub channels: usize,
    pub groups: usize,
    pub blocks: usize,
    pub bands: usize,
}

impl Default for ConvArch {
    fn default() -> Self {
        Self {
            channels: 48,
            groups: 4,
            blocks: 3,
            bands: 172,
        }
    }
}

impl ConvArch {
    pub fn validate(&self) -> Result<()> {
        let ok = self.channels > 0
            && self.groups > 0
            && self.bands > 0
            && self.channels % self.groups == 0
            && self.bands % self.groups == 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "conv architecture {self:?}: channels and bands must be positive multiples of groups"
            )))
        }
    }

    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.bands, self.channels)];
        for _ in 0..self.blocks {
            shapes.push((self.channels, self.channels));
            shapes.push((self.channels, self.channels));
        }
        shapes.push((self.channels, self.bands));
        shapes
    }

    /// Number of scalars in the weights payload.
    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .iter()
            .map(|&(cin, cout)| cout * (cin / self.groups) * 9 + cout)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    cin: usize,
    cout: usize,
    groups: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    fn zeros(cin: usize, cout: usize, groups: usize) -> Self {
        Self {
            cin,
            cout,
            groups,
            weights: vec![0.0; cout * (cin / groups) * 9],
            bias: vec![0.0; cout],
        }
    }

    /// `input[c]` is a raster `h×w` plane.
    fn forward(&self, input: &[Vec<f64>], h: usize, w: usize) -> Vec<Vec<f64>> {
        let in_per = self.cin / self.groups;
        let out_per = self.cout / self.groups;
        (0..self.cout)
            .into_par_iter()
            .map(|o| {
                let g = o / out_per;
                let mut plane = vec![self.bias[o]; h * w];
                for k in 0..in_per {
                    let src = &input[g * in_per + k];
                    let kernel = &self.weights[(o * in_per + k) * 9..(o * in_per + k + 1) * 9];
                    for (t, &kv) in kernel.iter().enumerate() {
                        if kv == 0.0 {
                            continue;
                        }
                        let (dy, dx) = (t as isize / 3 - 1, t as isize % 3 - 1);
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * w..(sy as usize + 1) * w];
                            let dst = &mut plane[y * w..(y + 1) * w];
                            let (x0, x1) = (dx.max(0) as usize, (w as isize + dx.min(0)) as usize);
                            for x in x0..x1 {
                                dst[(x as isize - dx) as usize] += kv * row[x];
                            }
                        }
                    }
                }
                plane
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    arch: ConvArch,
    layers: Vec<ConvLayer>,
}

#[derive(Serialize, Deserialize)]
struct WeightsHeader {
    magic: String,
    version: u32,
    arch: ConvArch,
}

impl ConvNet {
    /// All weights and biases zero: the network reduces to its outer skip.
    pub fn zeros(arch: ConvArch) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(cin, cout)| ConvLayer::zeros(cin, cout, arch.groups))
            .collect();
        Ok(Self { arch, layers })
    }

    /// Builds a network from a flat parameter list in file order.
    pub fn from_parameters(arch: ConvArch, params: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(arch)?;
        if params.len() != arch.parameter_count() {
            return Err(Error::Format(format!(
                "architecture {arch:?} needs {} parameters, got {}",
                arch.parameter_count(),
                params.len()
            )));
        }
        let mut rest = params;
        for layer in &mut net.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.weights.copy_from_slice(w);
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(net)
    }

    pub fn arch(&self) -> ConvArch {
        self.arch
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("weights file has no header line".into()))?;
        let header: WeightsHeader = serde_json::from_slice(&bytes[..nl])
            .map_err(|e| Error::Format(format!("weights header: {e}")))?;
        if header.magic != MAGIC || header.version != 1 {
            return Err(Error::Format(format!(
                "not a cos2a conv weights file (magic {:?}, version {})",
                header.magic, header.version
            )));
        }
        let payload = &bytes[nl + 1..];
        if payload.len() % 4 != 0 {
            return Err(Error::Format("weights payload is not a whole number of f32".into()));
        }
        let params: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights payload".into()));
        }
        Self::from_parameters(header.arch, &params)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let header = WeightsHeader {
            magic: MAGIC.into(),
            version: 1,
            arch: self.arch,
        };
        let mut out = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
        for v in self.parameters() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Runs the network on `bands` raster planes of size `h×w`.
    pub fn forward(&self, planes: &[Vec<f64>], h: usize, w: usize) -> Result<Vec<Vec<f64>>> {
        if planes.len() != self.arch.bands {
            return Err(Error::Shape(format!(
                "conv denoiser built for {} bands, got {}",
                self.arch.bands,
                planes.len()
            )));
        }
        let (first, rest) = self.layers.split_first().expect("input layer");
        let (last, blocks) = rest.split_last().expect("output layer");
        let mut hidden = first.forward(planes, h, w);
        for pair in blocks.chunks_exact(2) {
            let mut inner = pair[0].forward(&hidden, h, w);
            inner.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
            let inner = pair[1].forward(&inner, h, w);
            for (hc, ic) in hidden.iter_mut().zip(inner) {
                hc.iter_mut().zip(ic).for_each(|(a, b)| *a += b);
            }
        }
        let mut out = last.forward(&hidden, h, w);
        for (oc, xc) in out.iter_mut().zip(planes) {
            oc.iter_mut().zip(xc).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch() -> ConvArch {
        ConvArch {
            channels: 4,
            groups: 2,
            blocks: 2,
            bands: 6,
        }
    }

    fn planes(bands: usize, h: usize, w: usize) -> Vec<Vec<f64>> {
        (0..bands)
            .map(|b| (0..h * w).map(|j| ((b * 7 + j * 3) % 11) as f64 * 0.1).collect())
            .collect()
    }

    #[test]
    fn zero_weights_pass_input_through() {
        let net = ConvNet::zeros(small_arch()).unwrap();
        let x = planes(6, 5, 4);
        assert_eq!(net.forward(&x, 5, 4).unwrap(), x);
    }

    #[test]
    fn single_tap_layer_shifts() {
        // one input/output channel, kernel with only the (dy=0, dx=+1) tap
        let mut layer = ConvLayer::zeros(1, 1, 1);
        layer.weights[5] = 2.0;
        let src = vec![(0..6).map(|v| v as f64).collect::<Vec<_>>()];
        let out = layer.forward(&src, 2, 3);
        // out[y][x] = 2 * in[y][x+1], zero padded at the right edge
        assert_eq!(out[0], vec![2.0, 4.0, 0.0, 8.0, 10.0, 0.0]);
    }

    #[test]
    fn weights_file_round_trip_and_mismatch() {
        let arch = small_arch();
        let params: Vec<f64> = (0..arch.parameter_count())
            .map(|i| ((i % 13) as f32 * 0.125 - 0.5) as f64)
            .collect();
        let net = ConvNet::from_parameters(arch, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.bin");
        net.write(&p).unwrap();
        assert_eq!(ConvNet::read(&p).unwrap(), net);

        assert!(ConvNet::from_parameters(arch, &params[1..]).is_err());
        assert!(net.forward(&planes(5, 3, 3), 3, 3).is_err());
        assert!(ConvNet::zeros(ConvArch { bands: 5, ..arch }).is_err());
    }

    #[test]
    fn default_arch_size() {
        let arch = ConvArch::default();
        assert!(arch.validate().is_ok());
        // 172->48, 6 x 48->48, 48->172, all 3x3 with 4 groups, plus biases
        let expect = 48 * 43 * 9 + 48 + 6 * (48 * 12 * 9 + 48) + 172 * 12 * 9 + 172;
        assert_eq!(arch.parameter_count(), expect);
    }
}
