use nalgebra::DMatrix;

use super::schur::{quasi_blocks, real_schur, Block};
use super::small::small_sylvester;
use crate::error::{Error, Result};
use crate::model::FrequencyBand;

const PADE_DEGREE: usize = 8;
const THETA: f64 = 0.25;
const MAX_ROOTS: usize = 64;

/// Gauss–Legendre nodes and weights on [0, 1].
fn gauss_legendre_01(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

fn principal_sqrt_block(t: &DMatrix<f64>, b: Block) -> Result<[[f64; 2]; 2]> {
    let i = b.start;
    if b.size == 1 {
        let v = t[(i, i)];
        if v <= 0.0 {
            return Err(Error::LogBranch(v));
        }
        return Ok([[v.sqrt(), 0.0], [0.0, 0.0]]);
    }
    let (a, bb, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    // Complex pair: sqrt(M) = (M + delta I) / tau with delta = |lambda|, tau = sqrt(tr + 2 delta).
    let det = a * d - bb * c;
    let delta = det.sqrt();
    let tau = (a + d + 2.0 * delta).sqrt();
    if !(tau > 0.0) {
        return Err(Error::LogBranch(0.5 * (a + d)));
    }
    Ok([[(a + delta) / tau, bb / tau], [c / tau, (d + delta) / tau]])
}

// Principal square root of a quasi-upper-triangular matrix, block recurrence.
fn sqrt_quasi(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let blocks = quasi_blocks(t);
    let mut u = DMatrix::zeros(n, n);
    let mut roots = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let r = principal_sqrt_block(t, *b)?;
        for i in 0..b.size {
            for j in 0..b.size {
                u[(b.start + i, b.start + j)] = r[i][j];
            }
        }
        roots.push(r);
    }
    let tol = 1e-300;
    for jb in 0..blocks.len() {
        let bj = blocks[jb];
        for ib in (0..jb).rev() {
            let bi = blocks[ib];
            let mut rhs = [0.0; 4];
            for jc in 0..bj.size {
                for ir in 0..bi.size {
                    let (row, col) = (bi.start + ir, bj.start + jc);
                    let mut v = t[(row, col)];
                    for l in (bi.start + bi.size)..bj.start {
                        v -= u[(row, l)] * u[(l, col)];
                    }
                    rhs[ir + bi.size * jc] = v;
                }
            }
            if !small_sylvester(&roots[ib], bi.size, &roots[jb], bj.size, &mut rhs, tol) {
                return Err(Error::Numerical(
                    "singular block in matrix square root".into(),
                ));
            }
            for jc in 0..bj.size {
                for ir in 0..bi.size {
                    u[(bi.start + ir, bj.start + jc)] = rhs[ir + bi.size * jc];
                }
            }
        }
    }
    Ok(u)
}

/// Principal logarithm of a real matrix with no eigenvalue on the closed negative real axis.
pub fn logm_real(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rs = real_schur(x)?;
    for l in rs.eigenvalues() {
        if l.im == 0.0 && l.re <= 0.0 {
            return Err(Error::LogBranch(l.re));
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut t = rs.s.clone();
    let mut s = 0;
    while norm1(&(&t - &id)) > THETA {
        if s == MAX_ROOTS {
            return Err(Error::Numerical(
                "matrix logarithm: too many square roots".into(),
            ));
        }
        t = sqrt_quasi(&t)?;
        s += 1;
    }
    let e = &t - &id;
    let mut r = DMatrix::zeros(n, n);
    for (node, w) in gauss_legendre_01(PADE_DEGREE) {
        let m = &id + &e * node;
        let z = m
            .lu()
            .solve(&e)
            .ok_or_else(|| Error::Numerical("singular Pade denominator".into()))?;
        r += z * w;
    }
    r *= 2f64.powi(s as i32);
    Ok(&rs.q * r * rs.q.transpose())
}

pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frechet derivative of the principal logarithm at `x` in direction `v`.
pub fn frechet_log(x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = x.nrows();
    if x.ncols() != q || v.nrows() != q || v.ncols() != q {
        return Err(Error::Dimension(
            "frechet_log needs equal square matrices".into(),
        ));
    }
    let mut big = DMatrix::zeros(2 * q, 2 * q);
    big.view_mut((0, 0), (q, q)).copy_from(x);
    big.view_mut((q, q), (q, q)).copy_from(x);
    big.view_mut((0, q), (q, q)).copy_from(v);
    let l = logm_real(&big)?;
    Ok(l.view((0, q), (q, q)).into_owned())
}

/// Real embedding `[[Re, -Im], [Im, Re]]` of `A + j*w*I`.
fn embed_shifted(a: &DMatrix<f64>, w: f64) -> DMatrix<f64> {
    let q = a.nrows();
    let mut m = DMatrix::zeros(2 * q, 2 * q);
    m.view_mut((0, 0), (q, q)).copy_from(a);
    m.view_mut((q, q), (q, q)).copy_from(a);
    for i in 0..q {
        m[(i, q + i)] = -w;
        m[(q + i, i)] = w;
    }
    m
}

/// `Re((j/pi) log((j w1 I + A)^-1 (j w2 I + A)))`, the two-sided band resolvent integral.
pub fn matrix_log_band(a: &DMatrix<f64>, band: &FrequencyBand) -> Result<DMatrix<f64>> {
    let q = a.nrows();
    if a.ncols() != q {
        return Err(Error::Dimension(
            "matrix_log_band needs a square matrix".into(),
        ));
    }
    let lhs = embed_shifted(a, band.omega1());
    let rhs = embed_shifted(a, band.omega2());
    let x = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("j*omega1*I + A is singular".into()))?;
    let l = logm_real(&x)?;
    Ok(l.view((q, 0), (q, q)) * (-1.0 / std::f64::consts::PI))
}
