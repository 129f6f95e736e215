use num_traits::Float;

use crate::error::{Error, Result};

/// Row-sorted sparse matrix of `(row, col, weight)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    // entries[row_start[r]..row_start[r + 1]] belong to row r
    row_start: Vec<usize>,
}

impl SparseMatrix {
    /// Sorts the triplets by (row, col) and rejects duplicates or
    /// out-of-range indices.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) == (w[1].0, w[1].1) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sparse entry ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        if let Some(&(r, c, _)) = entries.iter().find(|e| e.0 >= rows || e.1 >= cols) {
            return Err(Error::InvalidArgument(format!(
                "sparse entry ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        let mut row_start = vec![0usize; rows + 1];
        for e in &entries {
            row_start[e.0 + 1] += 1;
        }
        for r in 0..rows {
            row_start[r + 1] += row_start[r];
        }
        Ok(SparseMatrix {
            rows,
            cols,
            entries,
            row_start,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect()).expect("identity")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[(usize, usize, f64)] {
        &self.entries[self.row_start[r]..self.row_start[r + 1]]
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `out = Q * x` applied to `batch` stacked blocks of `cols` rows each,
    /// every row `width` wide.
    pub fn apply<T: Float>(&self, x: &[T], width: usize, batch: usize, out: &mut [T]) {
        debug_assert_eq!(x.len(), batch * self.cols * width);
        debug_assert_eq!(out.len(), batch * self.rows * width);
        for b in 0..batch {
            let xb = &x[b * self.cols * width..(b + 1) * self.cols * width];
            let ob = &mut out[b * self.rows * width..(b + 1) * self.rows * width];
            for r in 0..self.rows {
                let orow = &mut ob[r * width..(r + 1) * width];
                orow.iter_mut().for_each(|o| *o = T::zero());
                for &(_, c, w) in self.row(r) {
                    let w = T::from(w).unwrap();
                    let xr = &xb[c * width..(c + 1) * width];
                    for (o, &xv) in orow.iter_mut().zip(xr) {
                        *o = *o + w * xv;
                    }
                }
            }
        }
    }

    /// `out += Q^T * g` for `batch` stacked blocks.
    pub fn apply_transpose_add<T: Float>(&self, g: &[T], width: usize, batch: usize, out: &mut [T]) {
        for b in 0..batch {
            let gb = &g[b * self.rows * width..(b + 1) * self.rows * width];
            let ob = &mut out[b * self.cols * width..(b + 1) * self.cols * width];
            for &(r, c, w) in &self.entries {
                let w = T::from(w).unwrap();
                let gr = &gb[r * width..(r + 1) * width];
                let orow = &mut ob[c * width..(c + 1) * width];
                for (o, &gv) in orow.iter_mut().zip(gr) {
                    *o = *o + w * gv;
                }
            }
        }
    }

    /// Sum of weights per column.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, c, w) in &self.entries {
            s[c] += w;
        }
        s
    }
}

/// Lifts an `n_coarse x d` feature matrix (row-major) to `n_fine x d`.
pub fn upsample(features: &[f64], d: usize, q: &SparseMatrix) -> Result<Vec<f64>> {
    if d == 0 || features.len() != q.cols() * d {
        return Err(Error::Shape(format!(
            "upsample expects {}x{d} features, got {} values",
            q.cols(),
            features.len()
        )));
    }
    let mut out = vec![0.0; q.rows() * d];
    q.apply(features, d, 1, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            2,
            vec![(2, 0, 0.25), (0, 0, 1.0), (2, 1, 0.75), (1, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn rows_are_sorted() {
        let q = sample();
        assert_eq!(q.row(2), &[(2, 0, 0.25), (2, 1, 0.75)]);
        assert_eq!(q.row(0), &[(0, 0, 1.0)]);
    }

    #[test]
    fn rejects_duplicates_and_range() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn constant_field_preserved() {
        let out = upsample(&[3.0, -1.0, 3.0, -1.0], 2, &sample()).unwrap();
        assert_eq!(out, vec![3.0, -1.0, 3.0, -1.0, 3.0, -1.0]);
    }

    #[test]
    fn one_hot_gives_column() {
        let out = upsample(&[0.0, 1.0], 1, &sample()).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 0.75]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(upsample(&[1.0; 5], 2, &sample()), Err(Error::Shape(_))));
    }

    #[test]
    fn transpose_is_adjoint() {
        let q = sample();
        let x = [0.5, -2.0, 1.5, 4.0];
        let g = [1.0, 2.0, -1.0, 0.5, 3.0, 1.0];
        let mut qx = vec![0.0; 6];
        q.apply(&x, 2, 1, &mut qx);
        let mut qtg = vec![0.0; 4];
        q.apply_transpose_add(&g, 2, 1, &mut qtg);
        let lhs: f64 = qx.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&qtg).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
