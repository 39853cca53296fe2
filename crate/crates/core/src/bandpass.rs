//! Analog Butterworth bandpass filters and the filter-based approximation of `F_w B`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use crate::dense::solve_dense_lyapunov;
use crate::error::{Error, Result};
use crate::model::{FrequencyBand, Operator};
use crate::sparse::{Retain, SylvesterEngine};

/// State-space bandpass filter `v(s) = c_v (sI - a_v)^-1 b_v` of even order `n_v`.
#[derive(Debug, Clone)]
pub struct FilterRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub band: FrequencyBand,
}

impl FilterRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Frequency response at `j*omega`.
    pub fn response(&self, omega: f64) -> Complex<f64> {
        let n = self.order();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j {
                Complex::new(0.0, omega)
            } else {
                Complex::new(0.0, 0.0)
            };
            d - Complex::new(self.a[(i, j)], 0.0)
        });
        let b = self.b.map(|v| Complex::new(v, 0.0));
        let x = m
            .lu()
            .solve(&b)
            .expect("filter poles lie off the imaginary axis");
        (0..n).map(|i| x[(i, 0)] * self.c[(0, i)]).sum()
    }
}

// Real biquads s^2 + a1 s + a0 of the bandpass denominator.
fn bandpass_biquads(band: &FrequencyBand, order: usize) -> Vec<(f64, f64)> {
    let w0sq = band.omega1() * band.omega2();
    let bw = band.width();
    let mut upper = Vec::new();
    let mut real = Vec::new();
    for k in 1..=order {
        let th = PI * (2 * k + order - 1) as f64 / (2 * order) as f64;
        let p = Complex::new(th.cos(), th.sin());
        // Roots of s^2 - p*bw*s + w0^2.
        let pb = p * bw;
        let disc = (pb * pb - Complex::new(4.0 * w0sq, 0.0)).sqrt();
        for r in [(pb + disc) * 0.5, (pb - disc) * 0.5] {
            let scale = r.norm().max(1.0);
            if r.im > 1e-12 * scale {
                upper.push(r);
            } else if r.im.abs() <= 1e-12 * scale {
                real.push(r.re);
            }
        }
    }
    let mut out: Vec<(f64, f64)> = upper.iter().map(|r| (-2.0 * r.re, r.norm_sqr())).collect();
    real.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for pair in real.chunks(2) {
        if let [r1, r2] = pair {
            out.push((-(r1 + r2), r1 * r2));
        }
    }
    out.sort_by(|x, y| {
        x.1.partial_cmp(&y.1)
            .unwrap()
            .then(x.0.partial_cmp(&y.0).unwrap())
    });
    out
}

/// Butterworth bandpass of state dimension `nv` (prototype order `nv / 2`), unit gain at
/// the geometric band center, realized as a cascade of second-order sections.
pub fn butterworth_bandpass(band: &FrequencyBand, nv: usize) -> Result<FilterRealization> {
    if !nv.is_multiple_of(2) || !(2..=64).contains(&nv) {
        return Err(Error::InvalidInput(format!(
            "filter order must be even in [2, 64], got {nv}"
        )));
    }
    if band.omega1() <= 0.0 {
        return Err(Error::InvalidInput(
            "bandpass filter needs omega1 > 0".into(),
        ));
    }
    let order = nv / 2;
    let quads = bandpass_biquads(band, order);
    debug_assert_eq!(quads.len(), order);
    let bw = band.width();
    let w0 = (band.omega1() * band.omega2()).sqrt();
    // Gain of the unnormalized cascade prod bw*s/(s^2+a1 s+a0) at j*w0.
    let s0 = Complex::new(0.0, w0);
    let raw: Complex<f64> = quads
        .iter()
        .map(|&(a1, a0)| s0 * bw / (s0 * s0 + s0 * a1 + a0))
        .product();
    let g = (1.0 / raw.norm()).powf(1.0 / order as f64) * bw;
    let beta = g.sqrt();

    let mut a = DMatrix::zeros(nv, nv);
    let mut b = DMatrix::zeros(nv, 1);
    let mut c = DMatrix::zeros(1, nv);
    for (i, &(a1, a0)) in quads.iter().enumerate() {
        let o = 2 * i;
        let w = a0.sqrt();
        a[(o, o + 1)] = w;
        a[(o + 1, o)] = -w;
        a[(o + 1, o + 1)] = -a1;
        if i > 0 {
            // Input of section i is the output of section i-1: b_i c_{i-1}.
            a[(o + 1, o - 1)] = beta * beta;
        }
    }
    b[(1, 0)] = beta;
    c[(0, nv - 1)] = beta;
    Ok(FilterRealization {
        a,
        b,
        c,
        band: *band,
    })
}

/// Precomputed filter data reused across many `b_omega` products.
#[derive(Debug, Clone)]
pub struct BandFilter {
    pub filter: FilterRealization,
    a_t: DMatrix<f64>,
    cp: DMatrix<f64>,
}

impl BandFilter {
    pub fn new(band: &FrequencyBand, nv: usize) -> Result<Self> {
        let filter = butterworth_bandpass(band, nv)?;
        let p = solve_dense_lyapunov(&filter.a, &(&filter.b * filter.b.transpose()))?;
        let cp = &filter.c * p;
        let a_t = filter.a.transpose();
        Ok(Self { filter, a_t, cp })
    }

    pub fn order(&self) -> usize {
        self.filter.order()
    }

    /// Gramian `p_v` of the filter, recomputed on demand.
    pub fn gramian(&self) -> Result<DMatrix<f64>> {
        solve_dense_lyapunov(
            &self.filter.a,
            &(&self.filter.b * self.filter.b.transpose()),
        )
    }

    /// Approximate `F_w * bin`, with `engine` encapsulating `A` (or `A^T`).
    pub fn apply(
        &self,
        engine: &mut SylvesterEngine<'_>,
        bin: &DMatrix<f64>,
        retain: Retain,
    ) -> Result<DMatrix<f64>> {
        let n = engine.order();
        if bin.nrows() != n {
            return Err(Error::Dimension(format!(
                "filter input has {} rows, operator order is {n}",
                bin.nrows()
            )));
        }
        let forcings: Vec<DMatrix<f64>> = bin.column_iter().map(|col| col * &self.cp).collect();
        let sols = engine.solve_many(&self.a_t, &forcings, retain)?;
        let ct = self.filter.c.transpose();
        let mut out = DMatrix::zeros(n, bin.ncols());
        for (l, ph) in sols.iter().enumerate() {
            out.set_column(l, &(ph * &ct).column(0));
        }
        Ok(out)
    }
}

/// Filter-based approximation of `F_w * bin` for operator `a`.
pub fn b_omega(
    a: &Operator,
    bin: &DMatrix<f64>,
    band: &FrequencyBand,
    nv: usize,
) -> Result<DMatrix<f64>> {
    let bf = BandFilter::new(band, nv)?;
    let mut eng = SylvesterEngine::new(a, false);
    bf.apply(&mut eng, bin, Retain::Drop)
}

/// Filter-based approximation of `F_{k,w}` for a small dense `A_k`.
pub fn fk_omega_approx(ak: &DMatrix<f64>, band: &FrequencyBand, nv: usize) -> Result<DMatrix<f64>> {
    let k = ak.nrows();
    b_omega(
        &Operator::Dense(ak.clone()),
        &DMatrix::identity(k, k),
        band,
        nv,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{eigenvalues, matrix_log_band};

    #[test]
    fn passband_and_edges() {
        let band = FrequencyBand::new(5.0, 6.0).unwrap();
        let f = butterworth_bandpass(&band, 16).unwrap();
        let center = f.response(30f64.sqrt()).norm();
        assert!((0.999..=1.0 + 1e-12).contains(&center), "{center}");
        for w in [5.0, 6.0] {
            assert!((f.response(w).norm() - 0.5f64.sqrt()).abs() < 1e-3);
        }
    }

    #[test]
    fn edge_gain_exact_for_all_orders() {
        let band = FrequencyBand::new(2.0, 7.0).unwrap();
        for nv in [2, 4, 8, 12, 32] {
            let f = butterworth_bandpass(&band, nv).unwrap();
            let e = f.response(7.0).norm();
            assert!(
                e <= 0.5f64.sqrt() + 1e-6 && e >= 0.5f64.sqrt() - 1e-6,
                "nv={nv} {e}"
            );
        }
    }

    #[test]
    fn deep_stopband() {
        let band = FrequencyBand::new(10.0, 12.0).unwrap();
        let f = butterworth_bandpass(&band, 16).unwrap();
        assert!(f.response(1.0).norm() <= 1e-8);
    }

    #[test]
    fn second_order_is_stable_resonator() {
        let band = FrequencyBand::new(1.0, 3.0).unwrap();
        let f = butterworth_bandpass(&band, 2).unwrap();
        assert_eq!(f.order(), 2);
        assert!(eigenvalues(&f.a).unwrap().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn wide_band_with_real_poles() {
        let band = FrequencyBand::new(0.1, 100.0).unwrap();
        let f = butterworth_bandpass(&band, 6).unwrap();
        assert!((f.response(10f64.sqrt()).norm() - 1.0).abs() < 1e-12);
        assert!(eigenvalues(&f.a).unwrap().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn bad_orders_rejected() {
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        assert!(butterworth_bandpass(&band, 3).is_err());
        assert!(butterworth_bandpass(&band, 0).is_err());
        assert!(butterworth_bandpass(&FrequencyBand::new(0.0, 2.0).unwrap(), 4).is_err());
    }

    #[test]
    fn filter_gramian_psd() {
        let bf = BandFilter::new(&FrequencyBand::new(1.0, 2.0).unwrap(), 4).unwrap();
        let p = bf.gramian().unwrap();
        assert!(p.symmetric_eigen().eigenvalues.min() >= -1e-12);
    }

    #[test]
    fn zero_input_gives_zero() {
        let a = Operator::Dense(-DMatrix::<f64>::identity(3, 3));
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let y = b_omega(&a, &DMatrix::zeros(3, 2), &band, 8).unwrap();
        assert_eq!(y, DMatrix::zeros(3, 2));
    }

    #[test]
    fn scalar_matches_arctan() {
        let band = FrequencyBand::new(1.0, 2.0).unwrap();
        let f = fk_omega_approx(&DMatrix::from_element(1, 1, -1.0), &band, 16).unwrap();
        let want = (2f64.atan() - 1f64.atan()) / PI;
        assert!((f[(0, 0)] - want).abs() < 1e-3, "{} vs {want}", f[(0, 0)]);
    }

    #[test]
    fn order_two_worse_than_sixteen() {
        let ak = DMatrix::from_row_slice(2, 2, &[-1.0, 3.0, -3.0, -1.0]);
        let band = FrequencyBand::new(2.0, 4.0).unwrap();
        let exact = matrix_log_band(&ak, &band).unwrap();
        let e2 = (fk_omega_approx(&ak, &band, 2).unwrap() - &exact).norm();
        let e16 = (fk_omega_approx(&ak, &band, 16).unwrap() - &exact).norm();
        assert!(e16 < e2);
    }
}
