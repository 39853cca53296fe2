use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-column sparse matrix with sorted, duplicate-free row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        trips: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in trips {
            if r >= nrows || c >= ncols {
                return Err(Error::Dimension(format!(
                    "entry ({r},{c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; trips.len()];
        let mut vals = vec![0.0; trips.len()];
        for &(r, c, v) in trips {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowidx = Vec::with_capacity(trips.len());
        let mut values = Vec::with_capacity(trips.len());
        colptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let r = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == r {
                    v += scratch[k].1;
                    k += 1;
                }
                rowidx.push(r);
                values.push(v);
            }
            colptr.push(rowidx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        })
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Self {
        let mut trips = Vec::new();
        for j in 0..d.ncols() {
            for i in 0..d.nrows() {
                if d[(i, j)] != 0.0 {
                    trips.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &trips).expect("indices in range")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let trips: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &trips).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }
    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.colptr[c]..self.colptr[c + 1]).map(move |k| (self.rowidx[k], c, self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.colptr[c]..self.colptr[c + 1];
        match self.rowidx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let trips: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trips).expect("indices in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// `self * x` for a dense block of columns.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols, x.nrows(), "sparse product dimension mismatch");
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            for c in 0..self.ncols {
                let xv = x[(c, j)];
                if xv == 0.0 {
                    continue;
                }
                for k in self.colptr[c]..self.colptr[c + 1] {
                    y[(self.rowidx[k], j)] += self.values[k] * xv;
                }
            }
        }
        y
    }

    /// `self^T * x` without forming the transpose.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.nrows, x.nrows(), "sparse product dimension mismatch");
        let mut y = DMatrix::zeros(self.ncols, x.ncols());
        for j in 0..x.ncols() {
            for c in 0..self.ncols {
                let mut acc = 0.0;
                for k in self.colptr[c]..self.colptr[c + 1] {
                    acc += self.values[k] * x[(self.rowidx[k], j)];
                }
                y[(c, j)] = acc;
            }
        }
        y
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.ncols)
            .map(|c| {
                self.values[self.colptr[c]..self.colptr[c + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum()
            })
            .fold(0.0, f64::max)
    }

    pub fn amax(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear combination `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let trips: Vec<_> = self
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trips).expect("indices in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m =
            CscMatrix::from_triplets(3, 2, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 3.0), (1, 1, -1.0)])
                .unwrap();
        assert_eq!(m.rowidx(), &[0, 2, 1]);
        assert_eq!(m.values(), &[2.0, 4.0, -1.0]);
        assert_eq!(m.get(2, 0), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let d = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, -3.0, 0.0, 4.0, 0.0, 5.0]);
        let s = CscMatrix::from_dense(&d);
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.mul_dense(&x), &d * &x);
        assert_eq!(s.tr_mul_dense(&x), d.transpose() * &x);
        assert_eq!(s.transpose().to_dense(), d.transpose());
        assert_eq!(s.norm1(), 7.0);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(CscMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
