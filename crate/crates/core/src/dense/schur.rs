use nalgebra::{Complex, DMatrix};

use super::hqr::schur_hqr;

use crate::error::{Error, Result};

/// Real Schur form `X = Q S Q^T` with `S` quasi-upper-triangular.
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// Diagonal block of a quasi-triangular matrix: starting index and size (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub start: usize,
    pub size: usize,
}

pub fn real_schur(x: &DMatrix<f64>) -> Result<RealSchur> {
    let n = x.nrows();
    if x.ncols() != n {
        return Err(Error::Dimension(format!(
            "real_schur needs a square matrix, got {}x{}",
            n,
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite entry in Schur input".into(),
        ));
    }
    if n == 0 {
        return Ok(RealSchur {
            q: DMatrix::zeros(0, 0),
            s: DMatrix::zeros(0, 0),
        });
    }
    let rows: Vec<f64> = x.transpose().as_slice().to_vec();
    let (h, v) = schur_hqr(&rows, n, 1000).ok_or(Error::SchurNoConvergence(n))?;
    let mut s = DMatrix::from_row_slice(n, n, &h);
    let mut q = DMatrix::from_row_slice(n, n, &v);
    clean_quasi_triangular(&mut s, &mut q)?;
    Ok(RealSchur { q, s })
}

// Zero the strictly-lower part below the first subdiagonal, drop negligible subdiagonal
// entries, and split 2x2 blocks that carry real eigenvalues.
fn clean_quasi_triangular(s: &mut DMatrix<f64>, q: &mut DMatrix<f64>) -> Result<()> {
    let n = s.nrows();
    for j in 0..n {
        for i in (j + 2)..n {
            s[(i, j)] = 0.0;
        }
    }
    for i in 0..n.saturating_sub(1) {
        let scale = s[(i, i)].abs() + s[(i + 1, i + 1)].abs();
        if s[(i + 1, i)].abs() <= f64::EPSILON * scale {
            s[(i + 1, i)] = 0.0;
        }
    }
    let mut i = 0;
    while i + 1 < n {
        if s[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        if i + 2 < n && s[(i + 2, i + 1)] != 0.0 {
            return Err(Error::SchurNoConvergence(n));
        }
        let (a, b, c, d) = (s[(i, i)], s[(i, i + 1)], s[(i + 1, i)], s[(i + 1, i + 1)]);
        let half = 0.5 * (a - d);
        let disc = half * half + b * c;
        if disc >= 0.0 {
            // Real pair: rotate the block to upper-triangular form.
            let root = disc.sqrt();
            let lambda = 0.5 * (a + d) + if half >= 0.0 { root } else { -root };
            let (vx, vy) = if (lambda - d).abs() + c.abs() >= b.abs() + (lambda - a).abs() {
                (lambda - d, c)
            } else {
                (b, lambda - a)
            };
            let r = vx.hypot(vy);
            let (cs, sn) = (vx / r, vy / r);
            rotate(s, q, i, cs, sn);
            s[(i + 1, i)] = 0.0;
            i += 1;
        } else {
            i += 2;
        }
    }
    Ok(())
}

// Apply G = [[c, -s], [s, c]] as S <- G^T S G and Q <- Q G on rows/cols (i, i+1).
fn rotate(s: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, c: f64, sn: f64) {
    let n = s.nrows();
    for j in 0..n {
        let (x, y) = (s[(i, j)], s[(i + 1, j)]);
        s[(i, j)] = c * x + sn * y;
        s[(i + 1, j)] = -sn * x + c * y;
    }
    for r in 0..n {
        let (x, y) = (s[(r, i)], s[(r, i + 1)]);
        s[(r, i)] = c * x + sn * y;
        s[(r, i + 1)] = -sn * x + c * y;
    }
    for r in 0..q.nrows() {
        let (x, y) = (q[(r, i)], q[(r, i + 1)]);
        q[(r, i)] = c * x + sn * y;
        q[(r, i + 1)] = -sn * x + c * y;
    }
}

/// Diagonal blocks of a quasi-upper-triangular matrix.
pub fn quasi_blocks(s: &DMatrix<f64>) -> Vec<Block> {
    let n = s.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && s[(i + 1, i)] != 0.0 {
            out.push(Block { start: i, size: 2 });
            i += 2;
        } else {
            out.push(Block { start: i, size: 1 });
            i += 1;
        }
    }
    out
}

/// Eigenvalues of a 2x2 real block with complex spectrum, positive imaginary part first.
fn block_eigs(s: &DMatrix<f64>, b: Block, out: &mut Vec<Complex<f64>>) {
    let i = b.start;
    if b.size == 1 {
        out.push(Complex::new(s[(i, i)], 0.0));
        return;
    }
    let (a, bb, c, d) = (s[(i, i)], s[(i, i + 1)], s[(i + 1, i)], s[(i + 1, i + 1)]);
    let re = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let im = (-(half * half + bb * c)).max(0.0).sqrt();
    out.push(Complex::new(re, im));
    out.push(Complex::new(re, -im));
}

impl RealSchur {
    pub fn blocks(&self) -> Vec<Block> {
        quasi_blocks(&self.s)
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.s.nrows());
        for b in self.blocks() {
            block_eigs(&self.s, b, &mut out);
        }
        out
    }
}

/// Eigenvalues of a dense square matrix via its real Schur form.
pub fn eigenvalues(x: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    Ok(real_schur(x)?.eigenvalues())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(x: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(x)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input_stays_diagonal() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let rs = real_schur(&x).unwrap();
        let mut d: Vec<f64> = (0..3).map(|i| rs.s[(i, i)]).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(d, vec![-1.0, 2.0, 3.0]);
        assert!((&rs.q * &rs.s * rs.q.transpose() - &x).norm() < 1e-13);
    }

    #[test]
    fn rotation_gives_one_complex_block() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let rs = real_schur(&x).unwrap();
        assert_eq!(rs.blocks(), vec![Block { start: 0, size: 2 }]);
        let e = rs.eigenvalues();
        assert!((e[0].re).abs() < 1e-14 && (e[0].im - 1.0).abs() < 1e-14);
    }

    #[test]
    fn real_pair_block_is_split() {
        let mut s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mut q = DMatrix::identity(2, 2);
        let orig = s.clone();
        clean_quasi_triangular(&mut s, &mut q).unwrap();
        assert_eq!(s[(1, 0)], 0.0);
        assert!((&q * &s * q.transpose() - orig).norm() < 1e-13);
    }

    #[test]
    fn random_reconstruction() {
        let x = DMatrix::from_fn(8, 8, |i, j| {
            ((i * 7 + j * 3) as f64).sin() + (i == j) as u8 as f64
        });
        let rs = real_schur(&x).unwrap();
        let err = (&rs.q * &rs.s * rs.q.transpose() - &x).norm();
        assert!(err <= 1e-10 * x.norm());
        let orth = (rs.q.transpose() * &rs.q - DMatrix::<f64>::identity(8, 8)).amax();
        assert!(orth <= 1e-12 * 8.0);
    }

    #[test]
    fn cyclic_permutation_converges() {
        let mut p = DMatrix::<f64>::zeros(6, 6);
        for i in 0..5 {
            p[(i + 1, i)] = 1.0;
        }
        p[(0, 5)] = 1.0;
        let rs = real_schur(&p).unwrap();
        assert!((&rs.q * &rs.s * rs.q.transpose() - &p).norm() < 1e-12);
        for l in rs.eigenvalues() {
            assert!((l.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let x = DMatrix::from_element(2, 2, f64::NAN);
        assert!(real_schur(&x).is_err());
    }
}
