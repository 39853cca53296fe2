use nalgebra::{DMatrix, Dyn, LU};
use rsparse::data::{Nmrc, Sprs, Symb};

use super::csc::CscMatrix;
use crate::error::{Error, Result};
use crate::model::Operator;

/// Shift applied to an operator `A` (or `A^T`).
///
/// `Real(s)` encodes `x -> A x + s x`; `Block(t)` encodes the coupled map
/// `[x1 x2] -> A [x1 x2] + [x1 x2] t` for a 2x2 block `t` carrying a complex pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Real(f64),
    Block([[f64; 2]; 2]),
}

impl Shift {
    pub fn width(&self) -> usize {
        match self {
            Shift::Real(_) => 1,
            Shift::Block(_) => 2,
        }
    }

    pub(crate) fn key(&self) -> [u64; 4] {
        match self {
            Shift::Real(s) => [s.to_bits(), u64::MAX, u64::MAX, u64::MAX],
            Shift::Block(t) => [
                t[0][0].to_bits(),
                t[0][1].to_bits(),
                t[1][0].to_bits(),
                t[1][1].to_bits(),
            ],
        }
    }

    fn magnitude(&self) -> f64 {
        match self {
            Shift::Real(s) => s.abs(),
            Shift::Block(t) => t.iter().flatten().fold(0.0, |m, v| m + v.abs()),
        }
    }
}

impl std::fmt::Display for Shift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shift::Real(s) => write!(f, "{s:e}"),
            Shift::Block(t) => write!(
                f,
                "[[{:e}, {:e}], [{:e}, {:e}]]",
                t[0][0], t[0][1], t[1][0], t[1][1]
            ),
        }
    }
}

enum Kind {
    Dense(LU<f64, Dyn, Dyn>),
    Sparse { symb: Symb, num: Nmrc<f64> },
}

/// Reusable LU factorization of a shifted operator.
pub struct SparseFactorization {
    n: usize,
    shift: Shift,
    transpose: bool,
    kind: Kind,
    factor_nnz: usize,
}

impl std::fmt::Debug for SparseFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseFactorization")
            .field("n", &self.n)
            .field("shift", &self.shift)
            .field("transpose", &self.transpose)
            .field("factor_nnz", &self.factor_nnz)
            .finish()
    }
}

// Interleaved index of component `c` of row `r` in the bordered system.
#[inline]
fn bidx(r: usize, c: usize, width: usize) -> usize {
    r * width + c
}

fn shifted_triplets(a: &CscMatrix, shift: Shift) -> (usize, Vec<(usize, usize, f64)>) {
    let n = a.nrows();
    let w = shift.width();
    let mut trips = Vec::with_capacity(w * a.nnz() + w * w * n);
    for (r, c, v) in a.triplets() {
        for k in 0..w {
            trips.push((bidx(r, k, w), bidx(c, k, w), v));
        }
    }
    match shift {
        Shift::Real(s) => trips.extend((0..n).map(|i| (i, i, s))),
        Shift::Block(t) => {
            // Column k of the output gets sum_l x_l t[l][k].
            for i in 0..n {
                for k in 0..2 {
                    for l in 0..2 {
                        if t[l][k] != 0.0 {
                            trips.push((bidx(i, k, 2), bidx(i, l, 2), t[l][k]));
                        }
                    }
                }
            }
        }
    }
    (w * n, trips)
}

fn dense_shifted(a: &DMatrix<f64>, shift: Shift) -> DMatrix<f64> {
    let n = a.nrows();
    let w = shift.width();
    let mut m = DMatrix::zeros(w * n, w * n);
    for c in 0..n {
        for r in 0..n {
            let v = a[(r, c)];
            if v != 0.0 {
                for k in 0..w {
                    m[(bidx(r, k, w), bidx(c, k, w))] = v;
                }
            }
        }
    }
    match shift {
        Shift::Real(s) => {
            for i in 0..n {
                m[(i, i)] += s;
            }
        }
        Shift::Block(t) => {
            for i in 0..n {
                for k in 0..2 {
                    for l in 0..2 {
                        m[(bidx(i, k, 2), bidx(i, l, 2))] += t[l][k];
                    }
                }
            }
        }
    }
    m
}

fn to_sprs(n: usize, trips: &[(usize, usize, f64)]) -> Sprs<f64> {
    let csc = CscMatrix::from_triplets(n, n, trips).expect("indices in range");
    let mut s = Sprs::zeros(n, n, csc.nnz());
    s.p = csc.colptr().iter().map(|&p| p as isize).collect();
    s.i = csc.rowidx().to_vec();
    s.x = csc.values().to_vec();
    s.nzmax = csc.nnz();
    s
}

const PIVOT_REL_TOL: f64 = 1e-14;
const LU_THRESHOLD: f64 = 0.1;

/// Factor `A + shift` (or `A^T + shift` when `transpose`), dense LU for dense storage.
pub fn factor_shifted(a: &Operator, shift: Shift, transpose: bool) -> Result<SparseFactorization> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(
            "factor_shifted needs a square operator".into(),
        ));
    }
    let scale = a.norm1() + shift.magnitude();
    let pivot_tol = PIVOT_REL_TOL * scale.max(f64::MIN_POSITIVE);
    let singular = || Error::SingularShift(shift.to_string());
    match a {
        Operator::Dense(d) => {
            let base = if transpose { d.transpose() } else { d.clone() };
            let m = dense_shifted(&base, shift);
            let lu = m.lu();
            let u = lu.u();
            if (0..u.nrows()).any(|i| !(u[(i, i)].abs() > pivot_tol)) {
                return Err(singular());
            }
            let factor_nnz = u.nrows() * u.nrows();
            Ok(SparseFactorization {
                n,
                shift,
                transpose,
                kind: Kind::Dense(lu),
                factor_nnz,
            })
        }
        Operator::Sparse(s) => {
            let base = if transpose { s.transpose() } else { s.clone() };
            let (size, trips) = shifted_triplets(&base, shift);
            let sp = to_sprs(size, &trips);
            let mut symb = rsparse::sqr(&sp, 1, false);
            let num = rsparse::lu(&sp, &mut symb, LU_THRESHOLD).map_err(|_| singular())?;
            // U stores its diagonal as the last entry of each column.
            let u = &num.u;
            for k in 0..size {
                let last = u.p[k + 1] as usize - 1;
                if !(u.x[last].abs() > pivot_tol) {
                    return Err(singular());
                }
            }
            let factor_nnz = num.l.p[size] as usize + num.u.p[size] as usize;
            Ok(SparseFactorization {
                n,
                shift,
                transpose,
                kind: Kind::Sparse { symb, num },
                factor_nnz,
            })
        }
    }
}

impl SparseFactorization {
    pub fn shift(&self) -> Shift {
        self.shift
    }
    pub fn transposed(&self) -> bool {
        self.transpose
    }
    pub fn order(&self) -> usize {
        self.n
    }
    pub fn factor_nnz(&self) -> usize {
        self.factor_nnz
    }
    /// Fill-reducing column permutation (sparse factors only).
    pub fn permutation(&self) -> Option<Vec<usize>> {
        match &self.kind {
            Kind::Sparse { symb, .. } => symb
                .q
                .as_ref()
                .map(|q| q.iter().map(|&v| v as usize).collect()),
            Kind::Dense(_) => None,
        }
    }

    /// Solve the shifted system for `rhs` of shape n x width (width = 1 or 2).
    pub fn solve(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.shift.width();
        if rhs.nrows() != self.n || rhs.ncols() != w {
            return Err(Error::Dimension(format!(
                "rhs is {}x{}, expected {}x{}",
                rhs.nrows(),
                rhs.ncols(),
                self.n,
                w
            )));
        }
        let size = w * self.n;
        let mut b = vec![0.0; size];
        for r in 0..self.n {
            for k in 0..w {
                b[bidx(r, k, w)] = rhs[(r, k)];
            }
        }
        let x = match &self.kind {
            Kind::Dense(lu) => {
                let v = nalgebra::DVector::from_vec(b);
                lu.solve(&v)
                    .ok_or_else(|| Error::SingularShift(self.shift.to_string()))?
                    .as_slice()
                    .to_vec()
            }
            Kind::Sparse { symb, num } => {
                let mut x = vec![0.0; size];
                let pinv = num.pinv.as_ref().expect("LU has a row permutation");
                for k in 0..size {
                    x[pinv[k] as usize] = b[k];
                }
                rsparse::lsolve(&num.l, &mut x);
                rsparse::usolve(&num.u, &mut x);
                match &symb.q {
                    Some(q) => {
                        for k in 0..size {
                            b[q[k] as usize] = x[k];
                        }
                        b
                    }
                    None => x,
                }
            }
        };
        let mut out = DMatrix::zeros(self.n, w);
        for r in 0..self.n {
            for k in 0..w {
                out[(r, k)] = x[bidx(r, k, w)];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: usize) -> CscMatrix {
        let h = 1.0 / (n as f64 + 1.0);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0 / (h * h)));
            if i > 0 {
                t.push((i, i - 1, 1.0 / (h * h)));
                t.push((i - 1, i, 1.0 / (h * h)));
            }
        }
        CscMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn nonsym(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -4.0 - (i as f64) * 0.1
            } else if j == i + 1 {
                1.5
            } else if i == j + 2 {
                -0.7
            } else {
                0.0
            }
        })
    }

    #[test]
    fn laplacian_probe_residual() {
        let a = lap(60);
        let op = Operator::Sparse(a.clone());
        let f = factor_shifted(&op, Shift::Real(0.0), false).unwrap();
        let b = DMatrix::from_fn(60, 1, |i, _| (i as f64).cos());
        let x = f.solve(&b).unwrap();
        let res = (a.mul_dense(&x) - &b).norm();
        assert!(res <= 1e-9 * a.norm1() * x.norm());
        assert!(f.permutation().is_some());
    }

    #[test]
    fn eigenvalue_shift_is_singular() {
        let a = CscMatrix::from_diagonal(&[-1.0, -2.0, -3.0]);
        let err =
            factor_shifted(&Operator::Sparse(a.clone()), Shift::Real(2.0), false).unwrap_err();
        assert!(matches!(err, Error::SingularShift(_)));
        let err =
            factor_shifted(&Operator::Dense(a.to_dense()), Shift::Real(2.0), false).unwrap_err();
        assert!(matches!(err, Error::SingularShift(_)));
    }

    #[test]
    fn transpose_matches_dense() {
        let d = nonsym(40);
        let op = Operator::Sparse(CscMatrix::from_dense(&d));
        let f = factor_shifted(&op, Shift::Real(0.3), true).unwrap();
        let b = DMatrix::from_fn(40, 1, |i, _| 1.0 + i as f64);
        let x = f.solve(&b).unwrap();
        let want = (d.transpose() + DMatrix::<f64>::identity(40, 40) * 0.3)
            .lu()
            .solve(&b)
            .unwrap();
        assert!((x - want).norm() < 1e-12);
    }

    #[test]
    fn bordered_block_solve() {
        let d = nonsym(25);
        let t = [[-0.5, 2.0], [-3.0, -0.5]];
        let b = DMatrix::from_fn(25, 2, |i, j| ((i + 3 * j) as f64).sin());
        for op in [
            Operator::Dense(d.clone()),
            Operator::Sparse(CscMatrix::from_dense(&d)),
        ] {
            let f = factor_shifted(&op, Shift::Block(t), false).unwrap();
            let x = f.solve(&b).unwrap();
            let tm = DMatrix::from_row_slice(2, 2, &[t[0][0], t[0][1], t[1][0], t[1][1]]);
            let res = (&d * &x + &x * &tm - &b).norm();
            assert!(res < 1e-12, "residual {res}");
        }
    }
}
