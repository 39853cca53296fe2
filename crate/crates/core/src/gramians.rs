//! Unlimited and frequency-limited Gramians and cross-Gramians.

use nalgebra::DMatrix;

use crate::bandpass::{fk_omega_approx, BandFilter};
use crate::dense::{
    lyapunov_with_schur, matrix_log_band, real_schur, solve_dense_lyapunov,
    solve_sylvester_with_schur, RealSchur,
};
use crate::error::{Error, Result};
use crate::model::{DenseLqo, FrequencyBand, LqoSystem, Operator, RomSystem};
use crate::sparse::{Retain, SylvesterEngine};

/// Largest order accepted by the dense Gramian paths.
pub const DENSE_MAX_N: usize = 2000;

/// Gramians of a full-order system. `band == None` marks the unlimited variant.
#[derive(Debug, Clone)]
pub struct GramianBundle {
    pub p: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub f: Option<DMatrix<f64>>,
    pub band: Option<FrequencyBand>,
}

impl GramianBundle {
    /// Smallest eigenvalue of `P` and `Y` relative to their 2-norms.
    pub fn psd_defect(&self) -> (f64, f64) {
        (rel_min_eig(&self.p), rel_min_eig(&self.y))
    }
}

pub(crate) fn rel_min_eig(x: &DMatrix<f64>) -> f64 {
    let ev = x.clone().symmetric_eigen().eigenvalues;
    let scale = ev.amax();
    if scale == 0.0 {
        0.0
    } else {
        ev.min() / scale
    }
}

/// Cross-Gramians between a full system and a reduced model.
#[derive(Debug, Clone)]
pub struct CrossGramians {
    pub p12: DMatrix<f64>,
    pub pk: DMatrix<f64>,
    pub y12: DMatrix<f64>,
    pub yk: DMatrix<f64>,
    pub z12: DMatrix<f64>,
    pub zk: DMatrix<f64>,
    pub q12: DMatrix<f64>,
    pub qk: DMatrix<f64>,
    pub fk: Option<DMatrix<f64>>,
    /// Solutions driven by `sum M_i P12 M_ki` without the band factor.
    pub z12_bar: DMatrix<f64>,
    pub zk_bar: DMatrix<f64>,
    pub band: Option<FrequencyBand>,
}

/// How the band factor `F_w` enters the limited cross-Gramians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FMode {
    /// Matrix logarithms (dense systems only).
    Exact,
    /// Bandpass-filter approximation of the given state dimension.
    Approx { nv: usize },
}

/// Dense system with cached Schur forms of `A` and `A^T`.
pub struct DenseContext {
    sys: DenseLqo,
    schur_a: RealSchur,
    schur_at: RealSchur,
}

impl DenseContext {
    pub fn new(sys: &LqoSystem) -> Result<Self> {
        if sys.n() > DENSE_MAX_N {
            return Err(Error::InvalidInput(format!(
                "dense Gramian path limited to n <= {DENSE_MAX_N}, got {}",
                sys.n()
            )));
        }
        Self::from_dense(sys.densified())
    }

    pub fn from_dense(sys: DenseLqo) -> Result<Self> {
        let schur_a = real_schur(&sys.a)?;
        let schur_at = real_schur(&sys.a.transpose())?;
        Ok(Self {
            sys,
            schur_a,
            schur_at,
        })
    }

    pub fn system(&self) -> &DenseLqo {
        &self.sys
    }

    /// `A X + X S + D = 0`.
    pub fn solve_a(&self, s: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        solve_sylvester_with_schur(&self.schur_a, &real_schur(s)?, d)
    }

    /// `A^T X + X S + D = 0`.
    pub fn solve_at(&self, s: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        solve_sylvester_with_schur(&self.schur_at, &real_schur(s)?, d)
    }

    pub fn band_log(&self, band: &FrequencyBand) -> Result<DMatrix<f64>> {
        matrix_log_band(&self.sys.a, band)
    }

    pub fn gramians_unlimited(&self) -> Result<GramianBundle> {
        let s = &self.sys;
        let p = lyapunov_with_schur(&self.schur_a, &self.schur_at, &(&s.b * s.b.transpose()))?;
        let y = lyapunov_with_schur(&self.schur_at, &self.schur_a, &(s.c.transpose() * &s.c))?;
        let mut dz = DMatrix::zeros(s.n(), s.n());
        for mi in &s.m {
            dz += mi * &p * mi;
        }
        let z = lyapunov_with_schur(&self.schur_at, &self.schur_a, &dz)?;
        let q = &y + &z;
        Ok(GramianBundle {
            p,
            y,
            z,
            q,
            f: None,
            band: None,
        })
    }

    pub fn gramians_limited(&self, band: &FrequencyBand) -> Result<GramianBundle> {
        let f = self.band_log(band)?;
        self.gramians_limited_with(band, f)
    }

    pub fn gramians_limited_with(
        &self,
        band: &FrequencyBand,
        f: DMatrix<f64>,
    ) -> Result<GramianBundle> {
        let s = &self.sys;
        let fbb = &f * &s.b * s.b.transpose();
        let p = lyapunov_with_schur(&self.schur_a, &self.schur_at, &(&fbb + fbb.transpose()))?;
        let ctcf = s.c.transpose() * &s.c * &f;
        let y = lyapunov_with_schur(&self.schur_at, &self.schur_a, &(&ctcf + ctcf.transpose()))?;
        let mut dz = DMatrix::zeros(s.n(), s.n());
        for mi in &s.m {
            let t = mi * &p * mi * &f;
            dz += &t + t.transpose();
        }
        let z = lyapunov_with_schur(&self.schur_at, &self.schur_a, &dz)?;
        let q = &y + &z;
        Ok(GramianBundle {
            p,
            y,
            z,
            q,
            f: Some(f),
            band: Some(*band),
        })
    }

    pub fn cross_unlimited(&self, rom: &RomSystem) -> Result<CrossGramians> {
        let s = &self.sys;
        check_rom(s.n(), s.b.ncols(), s.c.nrows(), rom)?;
        let (ak, bk, ck) = (rom.a(), rom.b(), rom.c());
        let akt = ak.transpose();
        let p12 = self.solve_a(&akt, &(&s.b * bk.transpose()))?;
        let pk = solve_dense_lyapunov(ak, &(bk * bk.transpose()))?;
        let y12 = self.solve_at(ak, &(s.c.transpose() * ck))?;
        let yk = solve_dense_lyapunov(&akt, &(ck.transpose() * ck))?;
        let ct = quad_coupling(&s.m, &p12, rom.m());
        let z12 = self.solve_at(ak, &ct)?;
        let zk = solve_dense_lyapunov(&akt, &quad_coupling(rom.m(), &pk, rom.m()))?;
        Ok(assemble(
            p12,
            pk,
            y12,
            yk,
            z12.clone(),
            zk.clone(),
            None,
            z12,
            zk,
            None,
        ))
    }

    /// Limited cross-Gramians with exact band logarithms; `f` is `F_w` of the full system.
    pub fn cross_limited_exact(
        &self,
        rom: &RomSystem,
        band: &FrequencyBand,
        f: &DMatrix<f64>,
    ) -> Result<CrossGramians> {
        let s = &self.sys;
        check_rom(s.n(), s.b.ncols(), s.c.nrows(), rom)?;
        let fk = matrix_log_band(rom.a(), band)?;
        let fb = f * &s.b;
        let fct = f.tr_mul(&s.c.transpose());
        let mut solve_a = |sm: &DMatrix<f64>, d: &DMatrix<f64>| self.solve_a(sm, d);
        let mut solve_at = |sm: &DMatrix<f64>, d: &DMatrix<f64>| self.solve_at(sm, d);
        let mut ft = |x: &DMatrix<f64>| Ok(f.tr_mul(x));
        let dense_m: Vec<Operator> = s.m.iter().cloned().map(Operator::Dense).collect();
        cross_limited_core(
            &mut solve_a,
            &mut solve_at,
            &mut ft,
            &s.b,
            &s.c,
            &dense_m,
            rom,
            fb,
            fct,
            fk,
            band,
        )
    }
}

fn check_rom(n: usize, m: usize, p: usize, rom: &RomSystem) -> Result<()> {
    if rom.b().ncols() != m || rom.c().nrows() != p {
        return Err(Error::Dimension(format!(
            "reduced model has {} inputs / {} outputs, system has {m} / {p}",
            rom.b().ncols(),
            rom.c().nrows()
        )));
    }
    if rom.order() > n {
        return Err(Error::Dimension(
            "reduced order exceeds system order".into(),
        ));
    }
    Ok(())
}

/// `sum_i M_i X Mk_i` with `M_i` as dense matrices.
fn quad_coupling(m: &[DMatrix<f64>], x: &DMatrix<f64>, mk: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m[0].nrows(), mk[0].ncols());
    for (mi, mki) in m.iter().zip(mk) {
        out += mi * x * mki;
    }
    out
}

/// `sum_i M_i X Mk_i` with operator-valued `M_i`.
pub(crate) fn quad_coupling_op(
    m: &[Operator],
    x: &DMatrix<f64>,
    mk: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), mk[0].ncols());
    for (mi, mki) in m.iter().zip(mk) {
        out += mi.mul(&(x * mki));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    p12: DMatrix<f64>,
    pk: DMatrix<f64>,
    y12: DMatrix<f64>,
    yk: DMatrix<f64>,
    z12: DMatrix<f64>,
    zk: DMatrix<f64>,
    fk: Option<DMatrix<f64>>,
    z12_bar: DMatrix<f64>,
    zk_bar: DMatrix<f64>,
    band: Option<FrequencyBand>,
) -> CrossGramians {
    let q12 = &y12 + &z12;
    let qk = &yk + &zk;
    CrossGramians {
        p12,
        pk,
        y12,
        yk,
        z12,
        zk,
        q12,
        qk,
        fk,
        z12_bar,
        zk_bar,
        band,
    }
}

type SolveFn<'a> = dyn FnMut(&DMatrix<f64>, &DMatrix<f64>) -> Result<DMatrix<f64>> + 'a;
type ApplyFn<'a> = dyn FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>> + 'a;

#[allow(clippy::too_many_arguments)]
fn cross_limited_core(
    solve_a: &mut SolveFn<'_>,
    solve_at: &mut SolveFn<'_>,
    f_transpose: &mut ApplyFn<'_>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    m: &[Operator],
    rom: &RomSystem,
    fb: DMatrix<f64>,
    fct: DMatrix<f64>,
    fk: DMatrix<f64>,
    band: &FrequencyBand,
) -> Result<CrossGramians> {
    let (ak, bk, ck) = (rom.a(), rom.b(), rom.c());
    let akt = ak.transpose();
    let fkt = fk.transpose();

    let p12 = solve_a(&akt, &(&fb * bk.transpose() + b * bk.transpose() * &fkt))?;
    let t = &fk * bk * bk.transpose();
    let pk = solve_dense_lyapunov(ak, &(&t + t.transpose()))?;

    let y12 = solve_at(ak, &(&fct * ck + c.transpose() * ck * &fk))?;
    let t = ck.transpose() * ck * &fk;
    let yk = solve_dense_lyapunov(&akt, &(&t + t.transpose()))?;

    let ct = quad_coupling_op(m, &p12, rom.m());
    let z12 = solve_at(ak, &(f_transpose(&ct)? + &ct * &fk))?;
    let ctk = quad_coupling(rom.m(), &pk, rom.m());
    let zk = solve_dense_lyapunov(&akt, &(&fkt * &ctk + &ctk * &fk))?;

    let z12_bar = solve_at(ak, &ct)?;
    let zk_bar = solve_dense_lyapunov(&akt, &ctk)?;
    Ok(assemble(
        p12,
        pk,
        y12,
        yk,
        z12,
        zk,
        Some(fk),
        z12_bar,
        zk_bar,
        Some(*band),
    ))
}

pub fn gramians_unlimited(sys: &LqoSystem) -> Result<GramianBundle> {
    DenseContext::new(sys)?.gramians_unlimited()
}

pub fn gramians_limited(sys: &LqoSystem, band: &FrequencyBand) -> Result<GramianBundle> {
    DenseContext::new(sys)?.gramians_limited(band)
}

pub fn cross_gramians_unlimited(sys: &LqoSystem, rom: &RomSystem) -> Result<CrossGramians> {
    DenseContext::new(sys)?.cross_unlimited(rom)
}

/// Limited cross-Gramians. In `FMode::Exact` the system is densified and `F_w` computed by
/// matrix logarithms. In `FMode::Approx` the products `F_w B` and `F_w^T C^T` are taken from
/// `fb`/`fc` when supplied (otherwise filtered here) and all other band factors use the
/// bandpass approximation, so the path works for sparse systems.
pub fn cross_gramians_limited(
    sys: &LqoSystem,
    rom: &RomSystem,
    band: &FrequencyBand,
    fb: Option<&DMatrix<f64>>,
    fc: Option<&DMatrix<f64>>,
    mode: FMode,
) -> Result<CrossGramians> {
    match mode {
        FMode::Exact => {
            let ctx = DenseContext::new(sys)?;
            let f = ctx.band_log(band)?;
            ctx.cross_limited_exact(rom, band, &f)
        }
        FMode::Approx { nv } => {
            check_rom(sys.n(), sys.inputs(), sys.outputs(), rom)?;
            let bf = BandFilter::new(band, nv)?;
            let mut eng = SylvesterEngine::new(sys.a(), false);
            let mut eng_t = SylvesterEngine::new(sys.a(), true);
            let fbv = match fb {
                Some(x) => x.clone(),
                None => bf.apply(&mut eng, sys.b(), Retain::Keep)?,
            };
            let fcv = match fc {
                Some(x) => x.clone(),
                None => bf.apply(&mut eng_t, &sys.c().transpose(), Retain::Keep)?,
            };
            if fbv.shape() != sys.b().shape() || fcv.shape() != (sys.n(), sys.outputs()) {
                return Err(Error::Dimension(
                    "precomputed band products have wrong shape".into(),
                ));
            }
            let fk = fk_omega_approx(rom.a(), band, nv)?;
            // Separate engines for the Sylvester solves and the filter products on A^T.
            let mut eng_f = SylvesterEngine::new(sys.a(), true);
            let mut solve_a = |sm: &DMatrix<f64>, d: &DMatrix<f64>| eng.solve(sm, d, Retain::Drop);
            let mut solve_at =
                |sm: &DMatrix<f64>, d: &DMatrix<f64>| eng_t.solve(sm, d, Retain::Drop);
            let mut ft = |x: &DMatrix<f64>| bf.apply(&mut eng_f, x, Retain::Keep);
            cross_limited_core(
                &mut solve_a,
                &mut solve_at,
                &mut ft,
                sys.b(),
                sys.c(),
                sys.m(),
                rom,
                fbv,
                fcv,
                fk,
                band,
            )
        }
    }
}
