//! Balanced truncation (unlimited and band-limited) and the two fixed-point H2-type iterations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bandpass::{fk_omega_approx, BandFilter};
use crate::dense::{
    eigenvalues, matrix_log_band, orth_basis, orthonormalize, quasi_blocks, real_schur,
};
use crate::diagnostics::{
    optimality_residuals_limited, optimality_residuals_unlimited, OptimalityReport,
};
use crate::error::{Error, Result};
use crate::gramians::{quad_coupling_op, DenseContext, GramianBundle, DENSE_MAX_N};
use crate::model::{project, FrequencyBand, LqoSystem, ProjectionPair, RomSystem};
use crate::sparse::{Retain, SolveStats, SylvesterEngine};

/// Number of seeds tried when a randomly initialized run breaks down.
pub const RANDOM_INIT_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bt,
    Flbt,
    Homora,
    Flhnoia,
}

impl Method {
    pub fn needs_band(&self) -> bool {
        matches!(self, Method::Flbt | Method::Flhnoia)
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt" => Ok(Method::Bt),
            "flbt" => Ok(Method::Flbt),
            "homora" => Ok(Method::Homora),
            "flhnoia" => Ok(Method::Flhnoia),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bt => "bt",
            Method::Flbt => "flbt",
            Method::Homora => "homora",
            Method::Flhnoia => "flhnoia",
        })
    }
}

/// What the fixed-point iterations do when `P12` or `X` is numerically rank deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPolicy {
    /// Fail with `RankDeficient`.
    Strict,
    /// Keep all `k` left singular vectors and record the deficient rank.
    Complete,
}

#[derive(Debug, Clone)]
pub struct ReductionConfig {
    pub method: Method,
    pub order: usize,
    pub band: Option<FrequencyBand>,
    pub nv: usize,
    pub max_iters: usize,
    pub eig_tol: f64,
    pub initial_rom: Option<RomSystem>,
    pub seed: u64,
    pub exact_logm: bool,
    /// Compute optimality residuals after the run (dense systems only).
    pub diagnostics: bool,
    pub basis: BasisPolicy,
}

impl ReductionConfig {
    pub fn new(method: Method, order: usize) -> Self {
        Self {
            method,
            order,
            band: None,
            nv: 16,
            max_iters: 30,
            eig_tol: 1e-6,
            initial_rom: None,
            seed: 0,
            exact_logm: false,
            diagnostics: false,
            basis: BasisPolicy::Complete,
        }
    }

    pub fn with_band(mut self, band: FrequencyBand) -> Self {
        self.band = Some(band);
        self
    }

    pub fn with_initial(mut self, rom: RomSystem) -> Self {
        self.initial_rom = Some(rom);
        self
    }

    pub fn check(&self, sys: &LqoSystem) -> Result<()> {
        if self.order == 0 || self.order > sys.n() {
            return Err(Error::InvalidInput(format!(
                "order must satisfy 1 <= k <= n = {}, got {}",
                sys.n(),
                self.order
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if self.method.needs_band() && self.band.is_none() {
            return Err(Error::InvalidInput(format!(
                "method {} requires a band",
                self.method
            )));
        }
        if let Some(r) = &self.initial_rom {
            if r.order() != self.order
                || r.b().ncols() != sys.inputs()
                || r.c().nrows() != sys.outputs()
            {
                return Err(Error::Dimension(
                    "initial reduced model does not match order or channels".into(),
                ));
            }
        }
        Ok(())
    }

    fn band(&self) -> Result<FrequencyBand> {
        self.band
            .ok_or_else(|| Error::InvalidInput(format!("method {} requires a band", self.method)))
    }
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub method: Method,
    pub rom: RomSystem,
    pub projections: ProjectionPair,
    pub iterations: usize,
    pub converged: bool,
    /// Eigenvalues of `A_k`, starting with the initial model for iterative methods.
    pub eig_history: Vec<Vec<Complex<f64>>>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub solve_stats: Option<SolveStats>,
    pub hankel_values: Option<Vec<f64>>,
    pub reflections: usize,
    /// Smallest numerical rank of `P12`/`X` seen, when it fell below the order.
    pub min_basis_rank: Option<usize>,
    pub seed_used: Option<u64>,
    pub residuals: Option<OptimalityReport>,
}

/// Serializable summary of a run.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub method: Method,
    pub order: usize,
    pub iterations: usize,
    pub converged: bool,
    pub eig_history: Vec<Vec<[f64; 2]>>,
    pub timings: BTreeMap<String, f64>,
    pub solve_stats: Option<SolveStats>,
    pub hankel_values: Option<Vec<f64>>,
    pub reflections: usize,
    pub min_basis_rank: Option<usize>,
    pub seed_used: Option<u64>,
    pub residuals: Option<OptimalityReport>,
}

impl ReductionResult {
    pub fn report(&self) -> ReductionReport {
        ReductionReport {
            method: self.method,
            order: self.rom.order(),
            iterations: self.iterations,
            converged: self.converged,
            eig_history: self
                .eig_history
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            timings: self.timings.clone(),
            solve_stats: self.solve_stats,
            hankel_values: self.hankel_values.clone(),
            reflections: self.reflections,
            min_basis_rank: self.min_basis_rank,
            seed_used: self.seed_used,
            residuals: self.residuals.clone(),
        }
    }
}

#[derive(Default)]
struct Phases(BTreeMap<String, f64>);

impl Phases {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.0.entry(name.to_string()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }
}

/// Run the configured method.
pub fn reduce(sys: &LqoSystem, cfg: &ReductionConfig) -> Result<ReductionResult> {
    cfg.check(sys)?;
    let mut res = match cfg.method {
        Method::Bt => reduce_bt(sys, cfg.order)?,
        Method::Flbt => reduce_flbt(sys, cfg.order, &cfg.band()?)?,
        Method::Homora => reduce_homora(sys, cfg)?,
        Method::Flhnoia => reduce_flhnoia(sys, cfg)?,
    };
    if cfg.diagnostics && res.residuals.is_none() && sys.n() <= DENSE_MAX_N {
        let t = Instant::now();
        let r = match cfg.band {
            Some(b) if cfg.method.needs_band() => optimality_residuals_limited(sys, &res.rom, &b)?,
            _ => optimality_residuals_unlimited(sys, &res.rom)?,
        };
        res.residuals = Some(r);
        res.timings
            .insert("diagnostics".into(), t.elapsed().as_secs_f64());
    }
    Ok(res)
}

/// Symmetric square-root factor `L L^T = X`, clipping negative eigenvalues at zero.
fn psd_factor(x: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = x.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let low = eig.eigenvalues.min();
    if low < -1e-8 * top {
        return Err(Error::Indefinite(format!(
            "{what} has eigenvalue {low:e} against norm {top:e}; clipping would distort it"
        )));
    }
    let mut l = eig.eigenvectors;
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    Ok(l)
}

fn balance(sys: &LqoSystem, g: &GramianBundle, k: usize) -> Result<(ProjectionPair, Vec<f64>)> {
    let lp = psd_factor(&g.p, "controllability Gramian")?;
    let lq = psd_factor(&g.q, "observability Gramian")?;
    let svd = lq.tr_mul(&lp).svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    if k == 0 || k > sigma.len() || !(sigma[k - 1] > 1e-12 * sigma[0]) {
        let rank = sigma.iter().filter(|s| **s > 1e-12 * sigma[0]).count();
        return Err(Error::RankDeficient { rank, wanted: k });
    }
    let n = sys.n();
    let mut v = DMatrix::zeros(n, k);
    let mut w = DMatrix::zeros(n, k);
    for (j, &i) in idx.iter().take(k).enumerate() {
        let s = sigma[j].powf(-0.5);
        v.set_column(j, &((&lp * vt.row(i).transpose()) * s));
        w.set_column(j, &((&lq * u.column(i)) * s));
    }
    Ok((ProjectionPair::new(v, w)?, sigma))
}

fn finish_direct(
    method: Method,
    sys: &LqoSystem,
    proj: ProjectionPair,
    sigma: Vec<f64>,
    mut ph: Phases,
) -> Result<ReductionResult> {
    let rom = ph.time("projection", || project(sys, &proj))?;
    let eigs = sorted_eigs(rom.a())?;
    Ok(ReductionResult {
        method,
        rom,
        projections: proj,
        iterations: 0,
        converged: true,
        eig_history: vec![eigs],
        timings: ph.0,
        solve_stats: None,
        hankel_values: Some(sigma),
        reflections: 0,
        min_basis_rank: None,
        seed_used: None,
        residuals: None,
    })
}

/// Square-root balanced truncation with unlimited Gramians.
pub fn reduce_bt(sys: &LqoSystem, k: usize) -> Result<ReductionResult> {
    let mut ph = Phases::default();
    let g = ph.time("gramians", || DenseContext::new(sys)?.gramians_unlimited())?;
    let (proj, sigma) = ph.time("balancing", || balance(sys, &g, k))?;
    finish_direct(Method::Bt, sys, proj, sigma, ph)
}

/// Square-root balanced truncation with band-limited Gramians; reports limited Hankel values.
pub fn reduce_flbt(sys: &LqoSystem, k: usize, band: &FrequencyBand) -> Result<ReductionResult> {
    let mut ph = Phases::default();
    let g = ph.time("gramians", || {
        DenseContext::new(sys)?.gramians_limited(band)
    })?;
    let (proj, sigma) = ph.time("balancing", || balance(sys, &g, k))?;
    finish_direct(Method::Flbt, sys, proj, sigma, ph)
}

/// Eigenvalues sorted by (real, imaginary).
pub fn sorted_eigs(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let mut e = eigenvalues(a)?;
    e.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(e)
}

/// Largest relative change between positionally paired sorted spectra.
pub fn eig_change(prev: &[Complex<f64>], next: &[Complex<f64>]) -> f64 {
    prev.iter()
        .zip(next)
        .map(|(p, q)| (p - q).norm() / p.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Flip unstable eigenvalues to the left half-plane through the real Schur form.
/// Returns the corrected matrix and the number of eigenvalues moved.
pub fn reflect_unstable(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let sch = real_schur(a)?;
    let mut s = sch.s.clone();
    let floor = 1e-8 * a.norm().max(f64::MIN_POSITIVE);
    let mut moved = 0;
    for b in quasi_blocks(&s) {
        let i = b.start;
        if b.size == 1 {
            if s[(i, i)] >= 0.0 {
                s[(i, i)] = if s[(i, i)] > 0.0 { -s[(i, i)] } else { -floor };
                moved += 1;
            }
        } else {
            let re = 0.5 * (s[(i, i)] + s[(i + 1, i + 1)]);
            if re >= 0.0 {
                let shift = if re > 0.0 { 2.0 * re } else { floor };
                s[(i, i)] -= shift;
                s[(i + 1, i + 1)] -= shift;
                moved += 2;
            }
        }
    }
    Ok((&sch.q * s * sch.q.transpose(), moved))
}

/// Random stable initial model: orthogonal similarity of negative reals log-spaced over the
/// decade below `top`. Band methods use the band center; unlimited ones the operator scale.
pub fn random_rom(k: usize, m: usize, p: usize, top: f64, seed: u64) -> Result<RomSystem> {
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "initial pole scale must be positive, got {top}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal =
        |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let g = normal(k, k);
    let q = g.qr().q();
    let d = DMatrix::from_fn(k, k, |i, j| {
        if i != j {
            0.0
        } else if k == 1 {
            -top
        } else {
            -top * 10f64.powf(-(i as f64) / (k - 1) as f64)
        }
    });
    let a = &q * d * q.transpose();
    let b = normal(k, m);
    let c = normal(p, k);
    let ms = (0..p).map(|_| normal(k, k)).collect();
    RomSystem::new(a, b, c, ms)
}

/// `V = orth(P)`, `R = orth(X)`, `W = R (V^T R)^{-1}`; also returns the smaller numerical rank.
fn projection_from(
    p: &DMatrix<f64>,
    x: &DMatrix<f64>,
    policy: BasisPolicy,
) -> Result<(ProjectionPair, usize)> {
    let (v, r, rank) = match policy {
        BasisPolicy::Strict => (orthonormalize(p)?, orthonormalize(x)?, p.ncols()),
        BasisPolicy::Complete => {
            let (v, rp) = orth_basis(p)?;
            let (r, rx) = orth_basis(x)?;
            if rp == 0 || rx == 0 {
                return Err(Error::RankDeficient {
                    rank: 0,
                    wanted: p.ncols(),
                });
            }
            (v, r, rp.min(rx))
        }
    };
    let vtr = v.tr_mul(&r);
    let sv = vtr.clone().svd(false, false).singular_values;
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::ProjectionBreakdown);
    }
    let inv = vtr.try_inverse().ok_or(Error::ProjectionBreakdown)?;
    let pair = ProjectionPair::new(v, &r * inv).map_err(|_| Error::ProjectionBreakdown)?;
    Ok((pair, rank))
}

struct IterOutcome {
    rom: RomSystem,
    proj: ProjectionPair,
    iterations: usize,
    converged: bool,
    eig_history: Vec<Vec<Complex<f64>>>,
    reflections: usize,
    min_rank: Option<usize>,
}

type StepFn<'s> = dyn FnMut(&RomSystem, &mut Phases) -> Result<(DMatrix<f64>, DMatrix<f64>)> + 's;

fn fixed_point(
    sys: &LqoSystem,
    cfg: &ReductionConfig,
    init: RomSystem,
    ph: &mut Phases,
    step: &mut StepFn<'_>,
) -> Result<IterOutcome> {
    let mut rom = init;
    let mut eigs = sorted_eigs(rom.a())?;
    let mut history = vec![eigs.clone()];
    let mut reflections = 0;
    let mut proj = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut min_rank: Option<usize> = None;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (p, x) = step(&rom, ph)?;
        let (pp, rank) = ph.time("projection", || projection_from(&p, &x, cfg.basis))?;
        if rank < cfg.order {
            min_rank = Some(min_rank.map_or(rank, |r| r.min(rank)));
        }
        let mut next = ph.time("projection", || project(sys, &pp))?;
        if !next.is_hurwitz() {
            let (a, moved) = reflect_unstable(next.a())?;
            reflections += moved;
            next = next.with_parts(Some(a), None, None, None)?;
        }
        let new_eigs = sorted_eigs(next.a())?;
        let change = eig_change(&eigs, &new_eigs);
        history.push(new_eigs.clone());
        eigs = new_eigs;
        rom = next;
        proj = Some(pp);
        if change <= cfg.eig_tol {
            converged = true;
            break;
        }
    }
    Ok(IterOutcome {
        rom,
        proj: proj.expect("at least one iteration"),
        iterations,
        converged,
        eig_history: history,
        reflections,
        min_rank,
    })
}

/// Upper end of the initial pole decade. Clustering the initial poles far below the spectrum
/// of `A` makes the first `P12` numerically rank deficient, so unlimited runs start near the
/// top of the spectrum (bounded by `||A||_1`).
fn init_scale(sys: &LqoSystem, cfg: &ReductionConfig) -> f64 {
    match cfg.band {
        Some(b) if cfg.method.needs_band() && b.omega1() > 0.0 => (b.omega1() * b.omega2()).sqrt(),
        Some(b) if cfg.method.needs_band() => b.omega2(),
        _ => sys.a().norm1().max(f64::MIN_POSITIVE),
    }
}

/// Run `body` from the supplied initial model, or from random models with seed retries.
fn with_init(
    sys: &LqoSystem,
    cfg: &ReductionConfig,
    mut body: impl FnMut(RomSystem) -> Result<ReductionResult>,
) -> Result<ReductionResult> {
    if let Some(r) = &cfg.initial_rom {
        let abscissa = r.spectral_abscissa()?;
        if !(abscissa < 0.0) {
            return Err(Error::NotHurwitz(abscissa));
        }
        return body(r.clone());
    }
    let mut last = None;
    for attempt in 0..RANDOM_INIT_ATTEMPTS {
        let seed = cfg.seed.wrapping_add(attempt);
        let init = random_rom(
            cfg.order,
            sys.inputs(),
            sys.outputs(),
            init_scale(sys, cfg),
            seed,
        )?;
        match body(init) {
            Ok(mut res) => {
                res.seed_used = Some(seed);
                return Ok(res);
            }
            Err(e) if e.is_numerical() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn assemble(method: Method, out: IterOutcome, ph: Phases, stats: SolveStats) -> ReductionResult {
    ReductionResult {
        method,
        rom: out.rom,
        projections: out.proj,
        iterations: out.iterations,
        converged: out.converged,
        eig_history: out.eig_history,
        timings: ph.0,
        solve_stats: Some(stats),
        hankel_values: None,
        reflections: out.reflections,
        min_basis_rank: out.min_rank,
        seed_used: None,
        residuals: None,
    }
}

/// Fixed-point iteration on the unlimited cross-Gramians.
pub fn reduce_homora(sys: &LqoSystem, cfg: &ReductionConfig) -> Result<ReductionResult> {
    cfg.check(sys)?;
    let ct_t = sys.c().transpose();
    with_init(sys, cfg, |init| {
        let mut ph = Phases::default();
        let mut eng = SylvesterEngine::new(sys.a(), false);
        let mut eng_t = SylvesterEngine::new(sys.a(), true);
        let out = {
            let mut step = |rom: &RomSystem, ph: &mut Phases| {
                let akt = rom.a().transpose();
                let p12 = ph.time("sylvester", || {
                    eng.solve(&akt, &(sys.b() * rom.b().transpose()), Retain::Drop)
                })?;
                let coupling = quad_coupling_op(sys.m(), &p12, rom.m());
                let rhs = &ct_t * rom.c() + coupling * 2.0;
                let x = ph.time("sylvester", || eng_t.solve(rom.a(), &rhs, Retain::Drop))?;
                Ok((p12, x))
            };
            fixed_point(sys, cfg, init, &mut ph, &mut step)?
        };
        let stats = eng.stats() + eng_t.stats();
        Ok(assemble(Method::Homora, out, ph, stats))
    })
}

/// Band-limited fixed-point iteration with filter-based (or exact) band factors.
pub fn reduce_flhnoia(sys: &LqoSystem, cfg: &ReductionConfig) -> Result<ReductionResult> {
    cfg.check(sys)?;
    let band = cfg.band()?;
    let ct_t = sys.c().transpose();
    with_init(sys, cfg, |init| {
        let mut ph = Phases::default();
        let mut eng = SylvesterEngine::new(sys.a(), false);
        let mut eng_t = SylvesterEngine::new(sys.a(), true);
        // Band factor: exact F_w, or a filter applied through the A^T engine.
        let (f_exact, filter) = if cfg.exact_logm {
            let f = ph.time("logm", || DenseContext::new(sys)?.band_log(&band))?;
            (Some(f), None)
        } else {
            (None, Some(BandFilter::new(&band, cfg.nv)?))
        };
        let (bw, cwt) = match (&f_exact, &filter) {
            (Some(f), _) => (f * sys.b(), f.tr_mul(&ct_t)),
            (None, Some(bf)) => ph.time("setup", || -> Result<_> {
                Ok((
                    bf.apply(&mut eng, sys.b(), Retain::Keep)?,
                    bf.apply(&mut eng_t, &ct_t, Retain::Keep)?,
                ))
            })?,
            (None, None) => unreachable!("either exact or filtered band factor"),
        };
        let out = {
            let mut step = |rom: &RomSystem, ph: &mut Phases| {
                let (ak, bk, ck) = (rom.a(), rom.b(), rom.c());
                let fk = ph.time("band_factor", || match &f_exact {
                    Some(_) => matrix_log_band(ak, &band),
                    None => fk_omega_approx(ak, &band, cfg.nv),
                })?;
                let rhs_p = &bw * bk.transpose() + sys.b() * bk.transpose() * fk.transpose();
                let p = ph.time("sylvester", || {
                    eng.solve(&ak.transpose(), &rhs_p, Retain::Drop)
                })?;
                let coupling = quad_coupling_op(sys.m(), &p, rom.m());
                let coupling_w = ph.time("filter", || match (&f_exact, &filter) {
                    (Some(f), _) => Ok(f.tr_mul(&coupling)),
                    (None, Some(bf)) => bf.apply(&mut eng_t, &coupling, Retain::Keep),
                    (None, None) => unreachable!("either exact or filtered band factor"),
                })?;
                let rhs_x = &cwt * ck + &ct_t * ck * &fk + coupling_w * 2.0 + &coupling * &fk * 2.0;
                let x = ph.time("sylvester", || eng_t.solve(ak, &rhs_x, Retain::Drop))?;
                Ok((p, x))
            };
            fixed_point(sys, cfg, init, &mut ph, &mut step)?
        };
        let stats = eng.stats() + eng_t.stats();
        Ok(assemble(Method::Flhnoia, out, ph, stats))
    })
}

/// Reference starting point for reducing the six-state example to order three.
pub fn illustrative_initial_rom() -> RomSystem {
    RomSystem::new(
        DMatrix::from_row_slice(
            3,
            3,
            &[
                -0.3918, 0.1083, 0.0967, 0.1083, -0.4423, -0.1392, 0.0967, -0.1392, -0.2515,
            ],
        ),
        DMatrix::from_row_slice(3, 1, &[0.5022, 0.3632, -0.0412]),
        DMatrix::from_row_slice(1, 3, &[0.6646, 1.2748, 0.3435]),
        vec![DMatrix::identity(3, 3)],
    )
    .expect("static dimensions are consistent")
}
