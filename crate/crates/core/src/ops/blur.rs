use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Uniform `r×r` blur-and-decimate on an `H×W` raster grid.
///
/// Under block-major pixel ordering (the `r²` pixels of block 0, then block
/// 1, ...) this is right-multiplication by `B = I_{L/r²} ⊗ (𝟙_{r²}/r²)`.
/// Inputs here are raster ordered, so the operator is applied spatially;
/// output columns are blocks in row-major block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlurOperator {
    height: usize,
    width: usize,
    factor: usize,
}

impl BlurOperator {
    pub fn new(height: usize, width: usize, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidInput("blur factor must be >= 1".into()));
        }
        if height % factor != 0 || width % factor != 0 {
            return Err(Error::Shape(format!(
                "{height}x{width} grid is not divisible by blur factor {factor}"
            )));
        }
        Ok(Self {
            height,
            width,
            factor,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn fine_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn coarse_pixels(&self) -> usize {
        self.fine_pixels() / (self.factor * self.factor)
    }

    pub fn coarse_dims(&self) -> (usize, usize) {
        (self.height / self.factor, self.width / self.factor)
    }

    /// Coarse block that raster pixel `j` belongs to.
    pub fn block_of(&self, j: usize) -> usize {
        let (y, x) = (j / self.width, j % self.width);
        (y / self.factor) * (self.width / self.factor) + x / self.factor
    }

    /// `X·B`: per-row block means.
    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.fine_pixels() {
            return Err(Error::Shape(format!(
                "blur expects {} columns, got {}",
                self.fine_pixels(),
                x.ncols()
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), self.coarse_pixels());
        for j in 0..x.ncols() {
            let mut col = out.column_mut(self.block_of(j));
            col += x.column(j);
        }
        out /= (self.factor * self.factor) as f64;
        Ok(out)
    }

    /// `Y·Bᵀ`: every fine pixel receives its block's value divided by `r²`.
    pub fn apply_adjoint(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.ncols() != self.coarse_pixels() {
            return Err(Error::Shape(format!(
                "blur adjoint expects {} columns, got {}",
                self.coarse_pixels(),
                y.ncols()
            )));
        }
        let scale = 1.0 / (self.factor * self.factor) as f64;
        Ok(DMatrix::from_fn(y.nrows(), self.fine_pixels(), |b, j| {
            y[(b, self.block_of(j))] * scale
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Raster index of the `k`-th pixel in block-major order.
    fn block_major_to_raster(h: usize, w: usize, r: usize) -> Vec<usize> {
        let mut order = Vec::with_capacity(h * w);
        for by in 0..h / r {
            for bx in 0..w / r {
                for dy in 0..r {
                    for dx in 0..r {
                        order.push((by * r + dy) * w + bx * r + dx);
                    }
                }
            }
        }
        order
    }

    /// Dense `B = I ⊗ 𝟙/r²` acting on block-major columns.
    fn dense_b(l: usize, r: usize) -> DMatrix<f64> {
        let r2 = r * r;
        DMatrix::from_fn(l, l / r2, |i, k| if i / r2 == k { 1.0 / r2 as f64 } else { 0.0 })
    }

    #[test]
    fn constant_and_tiny() {
        let op = BlurOperator::new(4, 6, 2).unwrap();
        let c = DMatrix::from_element(3, 24, 0.7);
        assert!(op.apply(&c).unwrap().iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let op = BlurOperator::new(2, 2, 2).unwrap();
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(op.apply(&x).unwrap()[(0, 0)], 2.5);
    }

    #[test]
    fn matches_dense_kronecker_b() {
        let (h, w, r) = (4, 4, 2);
        let op = BlurOperator::new(h, w, r).unwrap();
        let x = DMatrix::from_fn(3, 16, |b, j| ((b * 13 + j * 7) % 10) as f64 * 0.37 - 1.1);
        let order = block_major_to_raster(h, w, r);
        let x_bm = DMatrix::from_fn(3, 16, |b, k| x[(b, order[k])]);
        let dense = &x_bm * dense_b(16, r);
        let fast = op.apply(&x).unwrap();
        assert!((dense - fast).abs().max() < 1e-12);
    }

    #[test]
    fn adjoint_identity() {
        let op = BlurOperator::new(6, 4, 2).unwrap();
        let x = DMatrix::from_fn(2, 24, |b, j| (b + j) as f64 * 0.1);
        let y = DMatrix::from_fn(2, 6, |b, k| (b * 5 + k * 3) as f64 * 0.2 - 0.5);
        let lhs = op.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&op.apply_adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn non_divisible_grid_rejected() {
        assert!(matches!(BlurOperator::new(63, 64, 2), Err(Error::Shape(_))));
        let op = BlurOperator::new(4, 4, 2).unwrap();
        assert!(op.apply(&DMatrix::zeros(1, 15)).is_err());
    }
}
