//! Tiny dense kernels on stack arrays used inside the block recurrences.

/// Solve `K z = r` in place for n <= 4 by Gaussian elimination with partial pivoting.
/// Returns false when a pivot falls below `tol`.
pub(crate) fn solve_small(k: &mut [[f64; 4]; 4], r: &mut [f64; 4], n: usize, tol: f64) -> bool {
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if k[row][col].abs() > k[piv][col].abs() {
                piv = row;
            }
        }
        if k[piv][col].abs() <= tol {
            return false;
        }
        k.swap(col, piv);
        r.swap(col, piv);
        for row in (col + 1)..n {
            let f = k[row][col] / k[col][col];
            if f != 0.0 {
                for c in col..n {
                    k[row][c] -= f * k[col][c];
                }
                r[row] -= f * r[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = r[col];
        for c in (col + 1)..n {
            acc -= k[col][c] * r[c];
        }
        r[col] = acc / k[col][col];
    }
    true
}

/// Solve `S Z + Z T = R` for blocks of size r x r and c x c (each 1 or 2), column-major `z`.
/// `s`, `t` are row-major 2x2 arrays; `rhs` holds R column-major and is overwritten by Z.
pub(crate) fn small_sylvester(
    s: &[[f64; 2]; 2],
    r: usize,
    t: &[[f64; 2]; 2],
    c: usize,
    rhs: &mut [f64; 4],
    tol: f64,
) -> bool {
    if r == 1 && c == 1 {
        let d = s[0][0] + t[0][0];
        if d.abs() <= tol {
            return false;
        }
        rhs[0] /= d;
        return true;
    }
    let n = r * c;
    let mut k = [[0.0; 4]; 4];
    for j in 0..c {
        for i in 0..r {
            let row = i + r * j;
            for kk in 0..r {
                k[row][kk + r * j] += s[i][kk];
            }
            for l in 0..c {
                k[row][i + r * l] += t[l][j];
            }
        }
    }
    solve_small(&mut k, rhs, n, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_pair() {
        let s = [[-1.0, 2.0], [-3.0, -1.0]];
        let t = [[-2.0, 1.0], [-1.0, -2.0]];
        let z = [1.0, 2.0, -1.0, 0.5];
        // R = S Z + Z T with Z column-major
        let zz = |i: usize, j: usize| z[i + 2 * j];
        let mut rhs = [0.0; 4];
        for j in 0..2 {
            for i in 0..2 {
                let mut v = 0.0;
                for k in 0..2 {
                    v += s[i][k] * zz(k, j) + zz(i, k) * t[k][j];
                }
                rhs[i + 2 * j] = v;
            }
        }
        assert!(small_sylvester(&s, 2, &t, 2, &mut rhs, 1e-300));
        for i in 0..4 {
            assert!((rhs[i] - z[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_detected() {
        let s = [[1.0, 0.0], [0.0, 0.0]];
        let t = [[-1.0, 0.0], [0.0, 0.0]];
        let mut rhs = [1.0, 0.0, 0.0, 0.0];
        assert!(!small_sylvester(&s, 1, &t, 1, &mut rhs, 1e-14));
    }
}
