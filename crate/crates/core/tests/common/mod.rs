//! Independent oracles shared by the integration tests: adaptive quadrature of the
//! frequency-domain norm integrands, random systems and central-difference gradients.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lqo_core::{FrequencyBand, LqoSystem, Operator, RomSystem};

type C64 = Complex<f64>;

// Gauss–Kronrod 7/15 nodes on [-1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature with an `abs + rel * |I|` target.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let mut parts = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        for (l, r) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(&mut f, l, r);
            parts.push((l, r, v, e));
        }
    }
    parts.iter().map(|p| p.2).sum()
}

/// Integral over the whole real line through `nu = tan(theta)`.
pub fn integrate_real_line(mut f: impl FnMut(f64) -> f64, rel_tol: f64) -> f64 {
    let half = 0.5 * PI;
    integrate(
        |t| {
            let c = t.cos();
            f(t.tan()) / (c * c)
        },
        -half,
        half,
        1e-300,
        rel_tol,
    )
}

/// `(j nu I - A)^{-1} B` by complex LU.
pub fn resolvent(a: &DMatrix<f64>, b: &DMatrix<f64>, nu: f64) -> DMatrix<C64> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        C64::new(-a[(i, j)], if i == j { nu } else { 0.0 })
    });
    m.lu()
        .solve(&b.map(|v| C64::new(v, 0.0)))
        .expect("nu is not an eigenvalue")
}

struct DenseParts {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    m: Vec<DMatrix<f64>>,
}

fn parts(sys: &LqoSystem) -> DenseParts {
    DenseParts {
        a: sys.a().to_dense(),
        b: sys.b().clone(),
        c: sys.c().clone(),
        m: sys.m().iter().map(Operator::to_dense).collect(),
    }
}

fn linear_density(s: &DenseParts, nu: f64) -> f64 {
    let x = resolvent(&s.a, &s.b, nu);
    (s.c.map(|v| C64::new(v, 0.0)) * x).norm_squared()
}

fn quadratic_density(s: &DenseParts, x1: &DMatrix<C64>, x2: &DMatrix<C64>) -> f64 {
    s.m.iter()
        .map(|mi| (x1.transpose() * mi.map(|v| C64::new(v, 0.0)) * x2).norm_squared())
        .sum()
}

/// Squared band-limited norm by direct quadrature of the frequency-domain definition over
/// `[-w2, -w1] U [w1, w2]`: a single integral of `|G_1|^2` plus a double integral of
/// `|G_2|^2`, folded onto the positive band by conjugate symmetry.
pub fn band_norm_sq_quadrature(sys: &LqoSystem, band: &FrequencyBand, rel_tol: f64) -> f64 {
    let s = parts(sys);
    let (w1, w2) = (band.omega1(), band.omega2());
    let lin = 2.0 / (2.0 * PI) * integrate(|nu| linear_density(&s, nu), w1, w2, 1e-300, rel_tol);
    let inner = |x1: &DMatrix<C64>, sign: f64| {
        integrate(
            |nu2| quadratic_density(&s, x1, &resolvent(&s.a, &s.b, sign * nu2)),
            w1,
            w2,
            1e-300,
            rel_tol,
        )
    };
    let quad = integrate(
        |nu1| {
            let x1 = resolvent(&s.a, &s.b, nu1);
            inner(&x1, 1.0) + inner(&x1, -1.0)
        },
        w1,
        w2,
        1e-300,
        rel_tol,
    );
    lin + 2.0 * quad / (4.0 * PI * PI)
}

/// Squared norm over the whole frequency axis by quadrature.
pub fn norm_sq_quadrature(sys: &LqoSystem, rel_tol: f64) -> f64 {
    let s = parts(sys);
    let lin = integrate_real_line(|nu| linear_density(&s, nu), rel_tol) / (2.0 * PI);
    let quad = integrate_real_line(
        |nu1| {
            let x1 = resolvent(&s.a, &s.b, nu1);
            integrate_real_line(
                |nu2| quadratic_density(&s, &x1, &resolvent(&s.a, &s.b, nu2)),
                rel_tol,
            )
        },
        rel_tol,
    );
    lin + quad / (4.0 * PI * PI)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = normal(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Random Hurwitz matrix: a Gaussian matrix shifted left of its spectral abscissa by a margin
/// in `[0.2, 1.2]`.
pub fn stable_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = normal(rng, n, n) * (1.0 / (n as f64).sqrt());
    let abscissa = g
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = 0.2 + rng.random::<f64>();
    &g - DMatrix::identity(n, n) * (abscissa + margin)
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LqoSystem {
    let a = stable_matrix(rng, n);
    let b = normal(rng, n, m);
    let c = normal(rng, p, n);
    let ms = (0..p)
        .map(|_| Operator::Dense(symmetric(rng, n) * 0.5))
        .collect();
    LqoSystem::new(Operator::Dense(a), b, c, ms).unwrap()
}

pub fn random_rom(rng: &mut ChaCha8Rng, k: usize, m: usize, p: usize) -> RomSystem {
    let a = stable_matrix(rng, k);
    let b = normal(rng, k, m);
    let c = normal(rng, p, k);
    let ms = (0..p).map(|_| symmetric(rng, k) * 0.5).collect();
    RomSystem::new(a, b, c, ms).unwrap()
}

/// Central-difference gradient of `f` at `x`, Richardson-extrapolated (error O(h^4)).
pub fn fd_gradient(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let d = |i: usize, j: usize, step: f64| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[(i, j)] += step;
        xm[(i, j)] -= step;
        (f(&xp) - f(&xm)) / (2.0 * step)
    };
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let (coarse, fine) = (d(i, j, h), d(i, j, 0.5 * h));
        (4.0 * fine - coarse) / 3.0
    })
}

pub fn rel_diff(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).norm() / y.norm().max(f64::MIN_POSITIVE)
}

/// Spectral norm.
pub fn norm2(x: &DMatrix<f64>) -> f64 {
    x.clone().svd(false, false).singular_values.max()
}
