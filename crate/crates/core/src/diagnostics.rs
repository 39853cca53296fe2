//! Norms, frequency sweeps, optimality residuals and finite-difference gradient oracles.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramians::{CrossGramians, DenseContext, GramianBundle};
use crate::model::{FrequencyBand, LqoSystem, Operator, RomSystem};
use crate::sparse::{factor_shifted, Shift};

/// Radicands above `-CLAMP * ||G||^2` are treated as rounding noise.
const CLAMP: f64 = 1e-10;

/// Largest `k * max(k, m, p)` for which finite-difference gradients are evaluated.
pub const FD_BUDGET: usize = 400;

/// Cached Gramians of one full-order system over one band (or the whole axis).
pub struct ErrorEvaluator {
    ctx: DenseContext,
    band: Option<FrequencyBand>,
    f: Option<DMatrix<f64>>,
    gramians: GramianBundle,
    norm_sq: f64,
}

/// The three terms of `||G - G_k||^2 = full - 2 cross + rom`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorTerms {
    pub full: f64,
    pub cross: f64,
    pub rom: f64,
}

impl ErrorTerms {
    pub fn radicand(&self) -> f64 {
        self.full - 2.0 * self.cross + self.rom
    }
}

impl ErrorEvaluator {
    pub fn unlimited(sys: &LqoSystem) -> Result<Self> {
        let ctx = DenseContext::new(sys)?;
        let gramians = ctx.gramians_unlimited()?;
        Ok(Self::finish(ctx, None, None, gramians))
    }

    pub fn limited(sys: &LqoSystem, band: &FrequencyBand) -> Result<Self> {
        let ctx = DenseContext::new(sys)?;
        let f = ctx.band_log(band)?;
        let gramians = ctx.gramians_limited_with(band, f.clone())?;
        Ok(Self::finish(ctx, Some(*band), Some(f), gramians))
    }

    fn finish(
        ctx: DenseContext,
        band: Option<FrequencyBand>,
        f: Option<DMatrix<f64>>,
        gramians: GramianBundle,
    ) -> Self {
        let b = &ctx.system().b;
        let norm_sq = (b.transpose() * &gramians.q * b).trace();
        Self {
            ctx,
            band,
            f,
            gramians,
            norm_sq,
        }
    }

    pub fn band(&self) -> Option<&FrequencyBand> {
        self.band.as_ref()
    }

    pub fn gramians(&self) -> &GramianBundle {
        &self.gramians
    }

    pub fn context(&self) -> &DenseContext {
        &self.ctx
    }

    /// `trace(B^T Q B)`, the squared norm before clamping.
    pub fn norm_squared(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> Result<f64> {
        clamp_sqrt(self.norm_sq, self.norm_sq.abs())
    }

    pub fn cross(&self, rom: &RomSystem) -> Result<CrossGramians> {
        match (&self.band, &self.f) {
            (Some(band), Some(f)) => self.ctx.cross_limited_exact(rom, band, f),
            _ => self.ctx.cross_unlimited(rom),
        }
    }

    pub fn terms_from(&self, rom: &RomSystem, x: &CrossGramians) -> ErrorTerms {
        let b = &self.ctx.system().b;
        ErrorTerms {
            full: self.norm_sq,
            cross: (b.transpose() * &x.q12 * rom.b()).trace(),
            rom: (rom.b().transpose() * &x.qk * rom.b()).trace(),
        }
    }

    pub fn terms(&self, rom: &RomSystem) -> Result<ErrorTerms> {
        Ok(self.terms_from(rom, &self.cross(rom)?))
    }

    /// The part of the squared error that depends on the reduced model.
    pub fn cost(&self, rom: &RomSystem) -> Result<f64> {
        let t = self.terms(rom)?;
        Ok(-2.0 * t.cross + t.rom)
    }

    pub fn error(&self, rom: &RomSystem) -> Result<f64> {
        clamp_sqrt(self.terms(rom)?.radicand(), self.norm_sq.abs())
    }

    /// Error divided by the norm of the full system.
    pub fn relative_error(&self, rom: &RomSystem) -> Result<f64> {
        let nrm = self.norm()?;
        if nrm == 0.0 {
            return Err(Error::Numerical("relative error of a zero system".into()));
        }
        Ok(self.error(rom)? / nrm)
    }
}

fn clamp_sqrt(r: f64, scale: f64) -> Result<f64> {
    if r >= 0.0 {
        Ok(r.sqrt())
    } else if r >= -CLAMP * scale.max(f64::MIN_POSITIVE) {
        Ok(0.0)
    } else {
        Err(Error::Indefinite(format!(
            "squared norm {r:e} is negative beyond rounding (scale {scale:e}); Gramians are inconsistent"
        )))
    }
}

pub fn h2_norm(sys: &LqoSystem) -> Result<f64> {
    ErrorEvaluator::unlimited(sys)?.norm()
}

pub fn h2w_norm(sys: &LqoSystem, band: &FrequencyBand) -> Result<f64> {
    ErrorEvaluator::limited(sys, band)?.norm()
}

pub fn h2_error(sys: &LqoSystem, rom: &RomSystem) -> Result<f64> {
    ErrorEvaluator::unlimited(sys)?.error(rom)
}

pub fn h2w_error(sys: &LqoSystem, rom: &RomSystem, band: &FrequencyBand) -> Result<f64> {
    ErrorEvaluator::limited(sys, band)?.error(rom)
}

/// One transfer-function channel at one frequency.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChannelValue {
    pub full: f64,
    pub rom: f64,
    pub relerr: f64,
}

/// Linear and diagonal-slice quadratic responses at one frequency.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub nu: f64,
    /// `G_1` entries, output-major.
    pub linear: Vec<ChannelValue>,
    /// `G_{2,i}(j nu, j nu)` entries, ordered by (output, input, input).
    pub quadratic: Vec<ChannelValue>,
    /// Frobenius-norm relative error of `G_1`.
    pub linear_relerr: f64,
    /// Frobenius-norm relative error of the stacked `G_{2,i}`.
    pub quadratic_relerr: f64,
    pub failure: Option<String>,
}

/// `(j nu I - A)^{-1} B` as a complex matrix, solved in real block form.
pub fn resolvent_apply(a: &Operator, b: &DMatrix<f64>, nu: f64) -> Result<DMatrix<Complex<f64>>> {
    let fact = factor_shifted(a, Shift::Block([[0.0, -nu], [nu, 0.0]]), false)?;
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, b.ncols());
    let mut rhs = DMatrix::zeros(n, 2);
    for (l, col) in b.column_iter().enumerate() {
        rhs.set_column(0, &(-col));
        let x = fact.solve(&rhs)?;
        for r in 0..n {
            out[(r, l)] = Complex::new(x[(r, 0)], x[(r, 1)]);
        }
    }
    Ok(out)
}

struct Response {
    g1: DMatrix<Complex<f64>>,
    g2: Vec<DMatrix<Complex<f64>>>,
}

fn response(
    a: &Operator,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    m: &[Operator],
    nu: f64,
) -> Result<Response> {
    let x = resolvent_apply(a, b, nu)?;
    let (xr, xi) = (x.map(|z| z.re), x.map(|z| z.im));
    let cx = |y: &DMatrix<f64>, z: &DMatrix<f64>| {
        DMatrix::from_fn(y.nrows(), y.ncols(), |i, j| {
            Complex::new(y[(i, j)], z[(i, j)])
        })
    };
    let g1 = cx(&(c * &xr), &(c * &xi));
    let g2 = m
        .iter()
        .map(|mi| {
            let (mr, mim) = (mi.mul(&xr), mi.mul(&xi));
            // X^T M X without conjugation.
            let re = xr.tr_mul(&mr) - xi.tr_mul(&mim);
            let im = xr.tr_mul(&mim) + xi.tr_mul(&mr);
            cx(&re, &im)
        })
        .collect();
    Ok(Response { g1, g2 })
}

fn channel(full: Complex<f64>, rom: Complex<f64>) -> ChannelValue {
    let d = (full - rom).norm();
    let f = full.norm();
    ChannelValue {
        full: f,
        rom: rom.norm(),
        relerr: if f > 0.0 { d / f } else { d },
    }
}

fn rel_frob<'a>(
    full: impl Iterator<Item = &'a Complex<f64>>,
    rom: impl Iterator<Item = &'a Complex<f64>>,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (f, r) in full.zip(rom) {
        num += (f - r).norm_sqr();
        den += f.norm_sqr();
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Evaluate full and reduced responses on `grid`; a failed point is recorded and skipped.
pub fn sweep(sys: &LqoSystem, rom: &RomSystem, grid: &[f64]) -> Result<Vec<SweepRecord>> {
    if rom.b().ncols() != sys.inputs() || rom.c().nrows() != sys.outputs() {
        return Err(Error::Dimension(
            "reduced model channels differ from the system".into(),
        ));
    }
    if let Some(bad) = grid.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(Error::InvalidInput(format!(
            "grid point {bad} is not a positive finite frequency"
        )));
    }
    let ak = Operator::Dense(rom.a().clone());
    let mk: Vec<Operator> = rom.m().iter().cloned().map(Operator::Dense).collect();
    let (m, p) = (sys.inputs(), sys.outputs());
    let mut out = Vec::with_capacity(grid.len());
    for &nu in grid {
        let full = response(sys.a(), sys.b(), sys.c(), sys.m(), nu);
        let red = response(&ak, rom.b(), rom.c(), &mk, nu);
        let rec = match (full, red) {
            (Ok(f), Ok(r)) => {
                let mut linear = Vec::with_capacity(m * p);
                for i in 0..p {
                    for j in 0..m {
                        linear.push(channel(f.g1[(i, j)], r.g1[(i, j)]));
                    }
                }
                let mut quadratic = Vec::with_capacity(p * m * m);
                for (fi, ri) in f.g2.iter().zip(&r.g2) {
                    for a in 0..m {
                        for b in 0..m {
                            quadratic.push(channel(fi[(a, b)], ri[(a, b)]));
                        }
                    }
                }
                SweepRecord {
                    nu,
                    linear,
                    quadratic,
                    linear_relerr: rel_frob(f.g1.iter(), r.g1.iter()),
                    quadratic_relerr: rel_frob(
                        f.g2.iter().flat_map(|x| x.iter()),
                        r.g2.iter().flat_map(|x| x.iter()),
                    ),
                    failure: None,
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                let nan = ChannelValue {
                    full: f64::NAN,
                    rom: f64::NAN,
                    relerr: f64::NAN,
                };
                SweepRecord {
                    nu,
                    linear: vec![nan; m * p],
                    quadratic: vec![nan; p * m * m],
                    linear_relerr: f64::NAN,
                    quadratic_relerr: f64::NAN,
                    failure: Some(e.to_string()),
                }
            }
        };
        out.push(rec);
    }
    Ok(out)
}

/// Which reduced-model block a gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradTarget {
    Ak,
    Bk,
    Ck,
    Mk(usize),
}

/// Central-difference gradient; entries whose perturbation left the Hurwitz region are NaN.
#[derive(Debug, Clone)]
pub struct FdGradient {
    pub grad: DMatrix<f64>,
    pub invalid: Vec<(usize, usize)>,
}

/// Closed-form gradients of the cost, and the `A_k` terms that do not involve `L_w`.
#[derive(Debug, Clone)]
pub struct ClosedForms {
    /// `-(Y12 + 2 Z12)^T P12 + (Yk + 2 Zk) Pk`.
    pub ak_half: DMatrix<f64>,
    pub bk: DMatrix<f64>,
    pub ck: DMatrix<f64>,
    pub mk: Vec<DMatrix<f64>>,
}

pub fn closed_forms(ev: &ErrorEvaluator, rom: &RomSystem, x: &CrossGramians) -> ClosedForms {
    let s = ev.ctx.system();
    let x12 = &x.y12 + &x.z12 * 2.0;
    let xk = &x.yk + &x.zk * 2.0;
    ClosedForms {
        ak_half: -x12.tr_mul(&x.p12) + &xk * &x.pk,
        bk: (-x12.tr_mul(&s.b) + &xk * rom.b()) * 2.0,
        ck: (-&s.c * &x.p12 + rom.c() * &x.pk) * 2.0,
        mk: s
            .m
            .iter()
            .zip(rom.m())
            .map(|(mi, mki)| (-x.p12.tr_mul(&(mi * &x.p12)) + &x.pk * mki * &x.pk) * 2.0)
            .collect(),
    }
}

fn fd_budget_ok(rom: &RomSystem) -> Result<()> {
    let k = rom.order();
    let w = k.max(rom.b().ncols()).max(rom.c().nrows());
    if k * w > FD_BUDGET {
        return Err(Error::InvalidInput(format!(
            "finite-difference gradient needs k*max(k,m,p) <= {FD_BUDGET}, got {}",
            k * w
        )));
    }
    Ok(())
}

/// Central-difference gradient of the cost with step `1e-5 (1 + ||X||_max)`.
pub fn finite_diff_gradient_with(
    ev: &ErrorEvaluator,
    rom: &RomSystem,
    which: GradTarget,
) -> Result<FdGradient> {
    fd_budget_ok(rom)?;
    let base = match which {
        GradTarget::Ak => rom.a().clone(),
        GradTarget::Bk => rom.b().clone(),
        GradTarget::Ck => rom.c().clone(),
        GradTarget::Mk(i) => rom
            .m()
            .get(i)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no quadratic output {i}")))?,
    };
    let h = 1e-5 * (1.0 + base.amax());
    let rebuild = |x: DMatrix<f64>| -> Result<RomSystem> {
        match which {
            GradTarget::Ak => rom.with_parts(Some(x), None, None, None),
            GradTarget::Bk => rom.with_parts(None, Some(x), None, None),
            GradTarget::Ck => rom.with_parts(None, None, Some(x), None),
            GradTarget::Mk(i) => {
                let mut m = rom.m().to_vec();
                m[i] = x;
                rom.with_parts(None, None, None, Some(m))
            }
        }
    };
    let eval = |x: DMatrix<f64>| -> Result<Option<f64>> {
        let r = rebuild(x)?;
        if which == GradTarget::Ak && !r.is_hurwitz() {
            return Ok(None);
        }
        Ok(Some(ev.cost(&r)?))
    };
    let mut grad = DMatrix::zeros(base.nrows(), base.ncols());
    let mut invalid = Vec::new();
    for j in 0..base.ncols() {
        for i in 0..base.nrows() {
            let mut plus = base.clone();
            plus[(i, j)] += h;
            let mut minus = base.clone();
            minus[(i, j)] -= h;
            match (eval(plus)?, eval(minus)?) {
                (Some(fp), Some(fm)) => grad[(i, j)] = (fp - fm) / (2.0 * h),
                _ => {
                    grad[(i, j)] = f64::NAN;
                    invalid.push((i, j));
                }
            }
        }
    }
    Ok(FdGradient { grad, invalid })
}

/// Finite-difference gradient of the band-limited (or, with `band == None`, unlimited) cost.
pub fn finite_diff_gradient(
    sys: &LqoSystem,
    rom: &RomSystem,
    band: Option<&FrequencyBand>,
    which: GradTarget,
) -> Result<FdGradient> {
    fd_budget_ok(rom)?;
    let ev = match band {
        Some(b) => ErrorEvaluator::limited(sys, b)?,
        None => ErrorEvaluator::unlimited(sys)?,
    };
    finite_diff_gradient_with(&ev, rom, which)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Limited,
    Unlimited,
}

/// Residual 2-norms of the first-order optimality conditions.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub kind: ResidualKind,
    /// `A_k` condition; only closed-form in the unlimited case.
    pub op1: Option<f64>,
    /// Largest `M_k` residual over the quadratic outputs.
    pub op2: f64,
    pub op2_per_output: Vec<f64>,
    pub op3: f64,
    pub op4: f64,
    /// `||grad_A J / 2 - ak_half||_2`; present when the finite-difference budget allows.
    pub l_omega: Option<f64>,
    /// `1 + ||G||^2` over the relevant band.
    pub scale: f64,
}

fn norm2(x: &DMatrix<f64>) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.clone().svd(false, false).singular_values.max()
    }
}

fn residual_report(ev: &ErrorEvaluator, rom: &RomSystem, with_l: bool) -> Result<OptimalityReport> {
    let x = ev.cross(rom)?;
    let s = ev.ctx.system();
    let x12 = &x.y12 + &x.z12 * 2.0;
    let xk = &x.yk + &x.zk * 2.0;
    let op2_per_output: Vec<f64> =
        s.m.iter()
            .zip(rom.m())
            .map(|(mi, mki)| norm2(&(-x.p12.tr_mul(&(mi * &x.p12)) + &x.pk * mki * &x.pk)))
            .collect();
    let op2 = op2_per_output.iter().cloned().fold(0.0, f64::max);
    let op3 = norm2(&(-x12.tr_mul(&s.b) + &xk * rom.b()));
    let op4 = norm2(&(-&s.c * &x.p12 + rom.c() * &x.pk));
    let ak_half = -x12.tr_mul(&x.p12) + &xk * &x.pk;
    let limited = ev.band.is_some();
    let l_omega = if with_l && fd_budget_ok(rom).is_ok() {
        let g = finite_diff_gradient_with(ev, rom, GradTarget::Ak)?;
        if g.invalid.is_empty() {
            Some(norm2(&(g.grad * 0.5 - &ak_half)))
        } else {
            None
        }
    } else {
        None
    };
    Ok(OptimalityReport {
        kind: if limited {
            ResidualKind::Limited
        } else {
            ResidualKind::Unlimited
        },
        op1: if limited { None } else { Some(norm2(&ak_half)) },
        op2,
        op2_per_output,
        op3,
        op4,
        l_omega,
        scale: 1.0 + ev.norm_sq.abs(),
    })
}

/// Limited-band conditions with exact band logarithms; `L_w` from finite differences.
pub fn optimality_residuals_limited(
    sys: &LqoSystem,
    rom: &RomSystem,
    band: &FrequencyBand,
) -> Result<OptimalityReport> {
    residual_report(&ErrorEvaluator::limited(sys, band)?, rom, true)
}

pub fn optimality_residuals_unlimited(
    sys: &LqoSystem,
    rom: &RomSystem,
) -> Result<OptimalityReport> {
    residual_report(&ErrorEvaluator::unlimited(sys)?, rom, false)
}

/// Residuals from an already-built evaluator (avoids recomputing full-order Gramians).
pub fn optimality_residuals_with(
    ev: &ErrorEvaluator,
    rom: &RomSystem,
    with_l: bool,
) -> Result<OptimalityReport> {
    residual_report(ev, rom, with_l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::make_illustrative;

    fn scalar(a: f64, b: f64, c: f64, m: f64) -> LqoSystem {
        LqoSystem::new(
            Operator::Dense(DMatrix::from_element(1, 1, a)),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            vec![Operator::Dense(DMatrix::from_element(1, 1, m))],
        )
        .unwrap()
    }

    fn leading(sys: &LqoSystem, k: usize) -> RomSystem {
        let d = sys.densified();
        RomSystem::new(
            d.a.view((0, 0), (k, k)).into_owned(),
            d.b.rows(0, k).into_owned(),
            d.c.columns(0, k).into_owned(),
            d.m.iter()
                .map(|x| x.view((0, 0), (k, k)).into_owned())
                .collect(),
        )
        .unwrap()
    }

    fn self_rom(sys: &LqoSystem) -> RomSystem {
        let d = sys.densified();
        RomSystem::new(d.a, d.b, d.c, d.m).unwrap()
    }

    #[test]
    fn scalar_norms() {
        assert!((h2_norm(&scalar(-1.0, 1.0, 1.0, 0.0)).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(h2_norm(&scalar(-1.0, 1.0, 0.0, 0.0)).unwrap(), 0.0);
        let band = FrequencyBand::new(0.0, 2.0).unwrap();
        let want = (2f64.atan() / std::f64::consts::PI).sqrt();
        assert!((h2w_norm(&scalar(-1.0, 1.0, 1.0, 0.0), &band).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn narrow_band_vanishes() {
        let band = FrequencyBand::new(5.0, 5.0 + 1e-9).unwrap();
        assert!(h2w_norm(&make_illustrative(), &band).unwrap() < 1e-4);
    }

    #[test]
    fn self_error_is_zero() {
        let sys = make_illustrative();
        let band = FrequencyBand::new(5.0, 6.0).unwrap();
        assert!(h2w_error(&sys, &self_rom(&sys), &band).unwrap() <= 1e-7);
        assert!(h2_error(&sys, &self_rom(&sys)).unwrap() <= 1e-7);
    }

    #[test]
    fn sweep_self_and_scalar() {
        let sys = make_illustrative();
        let recs = sweep(&sys, &self_rom(&sys), &[0.5, 5.0, 5.5, 80.0]).unwrap();
        for r in &recs {
            assert!(r.failure.is_none());
            assert!(r.linear_relerr <= 1e-10 && r.quadratic_relerr <= 1e-10);
        }
        let s = scalar(-1.0, 1.0, 1.0, 1.0);
        let rec = &sweep(&s, &self_rom(&s), &[1.0]).unwrap()[0];
        assert!((rec.linear[0].full - 0.5f64.sqrt()).abs() < 1e-15);
        // |1/(j+1)^2| = 1/2
        assert!((rec.quadratic[0].full - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sweep_reports_undamped_point() {
        let sys = LqoSystem::new(
            Operator::Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -4.0, 0.0])),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            vec![Operator::Dense(DMatrix::zeros(2, 2))],
        )
        .unwrap();
        let rom = leading(&scalar(-1.0, 1.0, 1.0, 0.0).clone(), 1);
        let recs = sweep(&sys, &rom, &[1.0, 2.0, 3.0]).unwrap();
        assert!(recs[0].failure.is_none() && recs[2].failure.is_none());
        assert!(recs[1].failure.is_some());
    }

    #[test]
    fn residuals_vanish_at_full_order() {
        let sys = make_illustrative();
        let r = optimality_residuals_unlimited(&sys, &self_rom(&sys)).unwrap();
        assert!(r.op1.unwrap() <= 1e-8 && r.op2 <= 1e-8 && r.op3 <= 1e-8 && r.op4 <= 1e-8);
    }

    #[test]
    fn random_rom_residuals_large() {
        let sys = make_illustrative();
        // Resonance inside the band with unit-size input/output maps.
        let rom = RomSystem::new(
            DMatrix::from_row_slice(2, 2, &[-0.5, 5.5, -5.5, -0.5]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            vec![DMatrix::identity(2, 2)],
        )
        .unwrap();
        let band = FrequencyBand::new(5.0, 6.0).unwrap();
        let r = optimality_residuals_limited(&sys, &rom, &band).unwrap();
        assert!(r.op3.max(r.op4) > 1e-2, "{r:?}");
    }

    #[test]
    fn unlimited_ak_gradient_matches_closed_form() {
        let sys = make_illustrative();
        let rom = leading(&sys, 2).with_parts(
            Some(DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -3.0, -0.5])),
            None,
            Some(DMatrix::from_row_slice(1, 2, &[0.4, -0.7])),
            None,
        );
        let rom = rom.unwrap();
        let ev = ErrorEvaluator::unlimited(&sys).unwrap();
        let x = ev.cross(&rom).unwrap();
        let cf = closed_forms(&ev, &rom, &x);
        let g = finite_diff_gradient_with(&ev, &rom, GradTarget::Ak).unwrap();
        let want = &cf.ak_half * 2.0;
        assert!(
            (&g.grad - &want).norm() <= 1e-6 * want.norm(),
            "{} vs {}",
            g.grad,
            want
        );
    }

    #[test]
    fn fd_budget_enforced() {
        let sys = make_illustrative();
        let big = RomSystem::new(
            -DMatrix::identity(21, 21),
            DMatrix::zeros(21, 1),
            DMatrix::zeros(1, 21),
            vec![DMatrix::zeros(21, 21)],
        )
        .unwrap();
        let band = FrequencyBand::new(5.0, 6.0).unwrap();
        assert!(finite_diff_gradient(&sys, &big, Some(&band), GradTarget::Bk).is_err());
    }
}
