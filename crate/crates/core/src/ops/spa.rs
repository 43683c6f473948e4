use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaSelection {
    pub indices: Vec<usize>,
    /// Set when fewer than the requested number of columns could be picked
    /// because the residual vanished.
    pub rank_deficient: bool,
}

/// Successive projection: repeatedly take the column with the largest
/// residual norm (lowest index on ties), then project every column onto the
/// orthogonal complement of that residual.
pub fn spa_select(pixels: &DMatrix<f64>, k: usize) -> Result<SpaSelection> {
    let l = pixels.ncols();
    if k == 0 || k > l {
        return Err(Error::InvalidInput(format!(
            "SPA needs 1 <= k <= {l}, got k = {k}"
        )));
    }
    let mut residual = pixels.clone();
    let mut norms: Vec<f64> = residual.column_iter().map(|c| c.norm_squared()).collect();
    let first_max = norms.iter().cloned().fold(0.0, f64::max);
    if first_max == 0.0 {
        return Err(Error::InvalidInput("SPA on an all-zero matrix".into()));
    }
    let floor = first_max * 1e-24;
    let mut indices = Vec::with_capacity(k);
    while indices.len() < k {
        let mut best = 0;
        for (j, &n) in norms.iter().enumerate() {
            if n > norms[best] {
                best = j;
            }
        }
        if norms[best] <= floor {
            return Ok(SpaSelection {
                indices,
                rank_deficient: true,
            });
        }
        indices.push(best);
        let u: DVector<f64> = residual.column(best) / norms[best].sqrt();
        let coeffs = residual.tr_mul(&u);
        residual.ger(-1.0, &u, &coeffs, 1.0);
        for (j, n) in norms.iter_mut().enumerate() {
            *n = residual.column(j).norm_squared();
        }
        for &i in &indices {
            norms[i] = 0.0;
        }
    }
    Ok(SpaSelection {
        indices,
        rank_deficient: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_picks_max_norm() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 3.0, 0.5, 0.0, 2.0, 0.0, 0.5]);
        assert_eq!(spa_select(&m, 1).unwrap().indices, vec![2]);
    }

    #[test]
    fn orthogonal_columns_all_found() {
        let mut m = DMatrix::zeros(4, 7);
        for (i, &(col, scale)) in [(5usize, 1.0), (1, 2.0), (6, 0.5), (3, 1.5)].iter().enumerate() {
            m[(i, col)] = scale;
        }
        m[(0, 0)] = 0.25;
        let mut got = spa_select(&m, 4).unwrap().indices;
        got.sort();
        assert_eq!(got, vec![1, 3, 5, 6]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let sel = spa_select(&m, 2).unwrap();
        assert_eq!(sel.indices, vec![0, 1]);
    }

    #[test]
    fn rank_deficiency_flagged() {
        let m = DMatrix::from_fn(3, 5, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let sel = spa_select(&m, 3).unwrap();
        assert!(sel.rank_deficient);
        assert_eq!(sel.indices, vec![4]);
    }

    #[test]
    fn bad_k_and_zero_matrix() {
        let m = DMatrix::from_element(2, 2, 1.0);
        assert!(spa_select(&m, 0).is_err());
        assert!(spa_select(&m, 3).is_err());
        assert!(spa_select(&DMatrix::zeros(2, 2), 1).is_err());
    }
}
