//! Hessenberg reduction and Francis double-shift QR with exceptional shifts.
//!
//! Row-major port of the classic EISPACK `orthes`/`hqr2` pair, stopped before the
//! eigenvector back-substitution so that `V H V^T = A` with `H` quasi-upper-triangular.

/// Returns `(H, V)` row-major, or `None` if some eigenvalue needed more than `max_iter` sweeps.
pub(crate) fn schur_hqr(a: &[f64], nn: usize, max_iter: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut h = a.to_vec();
    let mut v = vec![0.0; nn * nn];
    if nn == 0 {
        return Some((h, v));
    }
    orthes(&mut h, &mut v, nn);
    if hqr2(&mut h, &mut v, nn, max_iter) {
        Some((h, v))
    } else {
        None
    }
}

fn orthes(h: &mut [f64], v: &mut [f64], n: usize) {
    let idx = |i: usize, j: usize| i * n + j;
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[idx(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[idx(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[idx(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[idx(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[idx(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[idx(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[idx(m, m - 1)] = scale * g;
    }
    for i in 0..n {
        for j in 0..n {
            v[idx(i, j)] = if i == j { 1.0 } else { 0.0 };
        }
    }
    for m in (1..high).rev() {
        if h[idx(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[idx(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[idx(i, j)];
                }
                g = (g / ort[m]) / h[idx(m, m - 1)];
                for i in m..=high {
                    v[idx(i, j)] += g * ort[i];
                }
            }
        }
    }
}

fn hqr2(h: &mut [f64], v: &mut [f64], nn: usize, max_iter: usize) -> bool {
    let idx = |i: usize, j: usize| i * nn + j;
    let eps = f64::EPSILON;
    let high = nn - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let (mut w, mut x, mut y): (f64, f64, f64);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[idx(i, j)].abs();
        }
    }

    let mut n = high as isize;
    let mut iter = 0usize;
    while n >= 0 {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > 0 {
            s = h[idx(l - 1, l - 1)].abs() + h[idx(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[idx(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l > 0 {
            h[idx(l, l - 1)] = 0.0;
        }

        if l == nu {
            h[idx(nu, nu)] += exshift;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            w = h[idx(nu, nu - 1)] * h[idx(nu - 1, nu)];
            p = (h[idx(nu - 1, nu - 1)] - h[idx(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[idx(nu, nu)] += exshift;
            h[idx(nu - 1, nu - 1)] += exshift;
            if q >= 0.0 {
                // Real pair: rotate to upper-triangular.
                z = if p >= 0.0 { p + z } else { p - z };
                x = h[idx(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (nu - 1)..nn {
                    z = h[idx(nu - 1, j)];
                    h[idx(nu - 1, j)] = q * z + p * h[idx(nu, j)];
                    h[idx(nu, j)] = q * h[idx(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[idx(i, nu - 1)];
                    h[idx(i, nu - 1)] = q * z + p * h[idx(i, nu)];
                    h[idx(i, nu)] = q * h[idx(i, nu)] - p * z;
                }
                for i in 0..=high {
                    z = v[idx(i, nu - 1)];
                    v[idx(i, nu - 1)] = q * z + p * v[idx(i, nu)];
                    v[idx(i, nu)] = q * v[idx(i, nu)] - p * z;
                }
                h[idx(nu, nu - 1)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[idx(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[idx(nu - 1, nu - 1)];
                w = h[idx(nu, nu - 1)] * h[idx(nu - 1, nu)];
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[idx(i, i)] -= x;
                }
                s = h[idx(nu, nu - 1)].abs() + h[idx(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[idx(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > max_iter {
                return false;
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[idx(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[idx(m + 1, m)] + h[idx(m, m + 1)];
                q = h[idx(m + 1, m + 1)] - z - r - s;
                r = h[idx(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[idx(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[idx(m - 1, m - 1)].abs() + z.abs() + h[idx(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                h[idx(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[idx(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[idx(k, k - 1)];
                    q = h[idx(k + 1, k - 1)];
                    r = if notlast { h[idx(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[idx(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[idx(k, k - 1)] = -h[idx(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[idx(k, j)] + q * h[idx(k + 1, j)];
                        if notlast {
                            p += r * h[idx(k + 2, j)];
                            h[idx(k + 2, j)] -= p * z;
                        }
                        h[idx(k, j)] -= p * x;
                        h[idx(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[idx(i, k)] + y * h[idx(i, k + 1)];
                        if notlast {
                            p += z * h[idx(i, k + 2)];
                            h[idx(i, k + 2)] -= p * r;
                        }
                        h[idx(i, k)] -= p;
                        h[idx(i, k + 1)] -= p * q;
                    }
                    for i in 0..=high {
                        p = x * v[idx(i, k)] + y * v[idx(i, k + 1)];
                        if notlast {
                            p += z * v[idx(i, k + 2)];
                            v[idx(i, k + 2)] -= p * r;
                        }
                        v[idx(i, k)] -= p;
                        v[idx(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    true
}
