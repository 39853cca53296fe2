use nalgebra::DMatrix;

use super::schur::{quasi_blocks, real_schur, Block, RealSchur};
use super::small::small_sylvester;
use crate::error::{Error, Result};

fn block2(m: &DMatrix<f64>, b: Block) -> [[f64; 2]; 2] {
    let i = b.start;
    let mut out = [[0.0; 2]; 2];
    for r in 0..b.size {
        for c in 0..b.size {
            out[r][c] = m[(i + r, i + c)];
        }
    }
    out
}

/// Solve `S Y + Y T = E` for quasi-upper-triangular `S` (a x a) and `T` (b x b).
pub(crate) fn solve_quasi_sylvester(
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    e: &DMatrix<f64>,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let a = s.nrows();
    let sb = quasi_blocks(s);
    let tb = quasi_blocks(t);
    let mut y = e.clone();
    for jb in &tb {
        let (j0, c) = (jb.start, jb.size);
        // Subtract contributions of already-solved column blocks: Y[:, <j0] T[<j0, J].
        if j0 > 0 {
            for jj in j0..j0 + c {
                for m in 0..j0 {
                    let tm = t[(m, jj)];
                    if tm != 0.0 {
                        for i in 0..a {
                            y[(i, jj)] -= y[(i, m)] * tm;
                        }
                    }
                }
            }
        }
        let tjj = block2(t, *jb);
        for ib in sb.iter().rev() {
            let (i0, r) = (ib.start, ib.size);
            let mut rhs = [0.0; 4];
            for jc in 0..c {
                for ir in 0..r {
                    let row = i0 + ir;
                    let col = j0 + jc;
                    let mut v = y[(row, col)];
                    for l in (i0 + r)..a {
                        v -= s[(row, l)] * y[(l, col)];
                    }
                    rhs[ir + r * jc] = v;
                }
            }
            let sii = block2(s, *ib);
            if !small_sylvester(&sii, r, &tjj, c, &mut rhs, tol) {
                return Err(Error::SpectralOverlap {
                    a_re: s[(i0, i0)],
                    a_im: 0.0,
                    b_re: t[(j0, j0)],
                    b_im: 0.0,
                });
            }
            for jc in 0..c {
                for ir in 0..r {
                    y[(i0 + ir, j0 + jc)] = rhs[ir + r * jc];
                }
            }
        }
    }
    Ok(y)
}

fn check_separation(s1: &RealSchur, s2: &RealSchur, scale: f64) -> Result<()> {
    let e1 = s1.eigenvalues();
    let e2 = s2.eigenvalues();
    let tol = 1e-12 * scale;
    for l in &e1 {
        for m in &e2 {
            if (l + m).norm() <= tol {
                return Err(Error::SpectralOverlap {
                    a_re: l.re,
                    a_im: l.im,
                    b_re: m.re,
                    b_im: m.im,
                });
            }
        }
    }
    Ok(())
}

/// Solve `A1 X + X A2 + D = 0` given real Schur forms of `A1` and `A2`.
pub fn solve_sylvester_with_schur(
    s1: &RealSchur,
    s2: &RealSchur,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (a, b) = (s1.s.nrows(), s2.s.nrows());
    if d.nrows() != a || d.ncols() != b {
        return Err(Error::Dimension(format!(
            "Sylvester right-hand side is {}x{}, expected {}x{}",
            d.nrows(),
            d.ncols(),
            a,
            b
        )));
    }
    let scale = s1.s.norm() + s2.s.norm();
    check_separation(s1, s2, scale)?;
    let e = -(s1.q.transpose() * d * &s2.q);
    let y = solve_quasi_sylvester(&s1.s, &s2.s, &e, 1e-14 * scale.max(f64::MIN_POSITIVE))?;
    Ok(&s1.q * y * s2.q.transpose())
}

/// Bartels–Stewart solve of `A1 X + X A2 + D = 0`.
pub fn solve_dense_sylvester(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s1 = real_schur(a1)?;
    let s2 = real_schur(a2)?;
    let x = solve_sylvester_with_schur(&s1, &s2, d)?;
    debug_check_residual(a1, a2, d, &x);
    Ok(x)
}

/// Solve `A1 X + X A1^T + D = 0`; the output is exactly symmetric.
pub fn solve_dense_lyapunov(a1: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s1 = real_schur(a1)?;
    let s2 = real_schur(&a1.transpose())?;
    lyapunov_with_schur(&s1, &s2, d)
}

/// Lyapunov solve reusing the Schur forms of `A1` and `A1^T`.
pub fn lyapunov_with_schur(
    s1: &RealSchur,
    s1t: &RealSchur,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let x = solve_sylvester_with_schur(s1, s1t, d)?;
    Ok(symmetrize(&x))
}

pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

#[allow(unused_variables)]
pub(crate) fn debug_check_residual(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    d: &DMatrix<f64>,
    x: &DMatrix<f64>,
) {
    #[cfg(debug_assertions)]
    {
        let res = (a1 * x + x * a2 + d).norm();
        let bound = 1e-10 * (a1.norm() + a2.norm()) * x.norm() + 1e-12 * d.norm();
        debug_assert!(
            res <= bound.max(1e-300),
            "Sylvester residual {res:e} exceeds bound {bound:e}"
        );
    }
}
