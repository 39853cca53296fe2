//! System, reduced model, band and projection types.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense::{spectral_abscissa, symmetrize};
use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

/// Largest dense order for which the Hurwitz check is carried out.
pub const HURWITZ_CHECK_MAX_N: usize = 2000;

/// Target interval `[omega1, omega2]` in rad/s, mirrored to negative frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    omega1: f64,
    omega2: f64,
}

impl FrequencyBand {
    pub fn new(omega1: f64, omega2: f64) -> Result<Self> {
        if !(omega1.is_finite() && omega2.is_finite() && omega1 >= 0.0 && omega2 > omega1) {
            return Err(Error::InvalidInput(format!(
                "band needs 0 <= omega1 < omega2 < inf, got [{omega1}, {omega2}]"
            )));
        }
        Ok(Self { omega1, omega2 })
    }
    pub fn omega1(&self) -> f64 {
        self.omega1
    }
    pub fn omega2(&self) -> f64 {
        self.omega2
    }
    pub fn width(&self) -> f64 {
        self.omega2 - self.omega1
    }
}

/// Square operator stored densely or in compressed columns.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Dense(DMatrix<f64>),
    Sparse(CscMatrix),
}

impl Operator {
    pub fn nrows(&self) -> usize {
        match self {
            Operator::Dense(d) => d.nrows(),
            Operator::Sparse(s) => s.nrows(),
        }
    }
    pub fn ncols(&self) -> usize {
        match self {
            Operator::Dense(d) => d.ncols(),
            Operator::Sparse(s) => s.ncols(),
        }
    }
    pub fn is_sparse(&self) -> bool {
        matches!(self, Operator::Sparse(_))
    }
    pub fn nnz(&self) -> usize {
        match self {
            Operator::Dense(d) => d.iter().filter(|v| **v != 0.0).count(),
            Operator::Sparse(s) => s.nnz(),
        }
    }
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Operator::Dense(d) => d.clone(),
            Operator::Sparse(s) => s.to_dense(),
        }
    }
    pub fn transpose(&self) -> Operator {
        match self {
            Operator::Dense(d) => Operator::Dense(d.transpose()),
            Operator::Sparse(s) => Operator::Sparse(s.transpose()),
        }
    }
    /// `self * x`.
    pub fn mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(d) => d * x,
            Operator::Sparse(s) => s.mul_dense(x),
        }
    }
    /// `self^T * x`.
    pub fn tr_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Operator::Dense(d) => d.tr_mul(x),
            Operator::Sparse(s) => s.tr_mul_dense(x),
        }
    }
    /// `w^T * self * v`.
    pub fn sandwich(&self, w: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        w.tr_mul(&self.mul(v))
    }
    pub fn norm1(&self) -> f64 {
        match self {
            Operator::Dense(d) => crate::dense::norm1(d),
            Operator::Sparse(s) => s.norm1(),
        }
    }
    pub fn amax(&self) -> f64 {
        match self {
            Operator::Dense(d) => d.amax(),
            Operator::Sparse(s) => s.amax(),
        }
    }
    /// `max |X - X^T|` (zero for non-square input is not meaningful; callers check shape).
    pub fn asymmetry(&self) -> f64 {
        match self {
            Operator::Dense(d) => (d - d.transpose()).amax(),
            Operator::Sparse(s) => s.axpby(1.0, &s.transpose(), -1.0).amax(),
        }
    }
    pub fn symmetrized(&self) -> Operator {
        match self {
            Operator::Dense(d) => Operator::Dense(symmetrize(d)),
            Operator::Sparse(s) => Operator::Sparse(s.axpby(0.5, &s.transpose(), 0.5)),
        }
    }
}

/// Full-order system `x' = Ax + Bu`, `y_i = C_i x + x^T M_i x`.
#[derive(Debug, Clone)]
pub struct LqoSystem {
    a: Operator,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    m: Vec<Operator>,
    symmetry_defects: Vec<f64>,
}

fn dimension_mismatches(
    a: (usize, usize),
    b: (usize, usize),
    c: (usize, usize),
    m: &[(usize, usize)],
) -> Vec<String> {
    let mut out = Vec::new();
    let n = a.0;
    if a.1 != n {
        out.push(format!("A is {}x{}, not square", a.0, a.1));
    }
    if b.0 != n {
        out.push(format!("B has {} rows, expected {n}", b.0));
    }
    if c.1 != n {
        out.push(format!("C has {} columns, expected {n}", c.1));
    }
    if m.len() != c.0 {
        out.push(format!("{} quadratic terms for {} outputs", m.len(), c.0));
    }
    for (i, s) in m.iter().enumerate() {
        if *s != (n, n) {
            out.push(format!("M_{} is {}x{}, expected {n}x{n}", i + 1, s.0, s.1));
        }
    }
    if n == 0 || b.1 == 0 || c.0 == 0 {
        out.push("dimensions n, m, p must be positive".into());
    }
    out
}

impl LqoSystem {
    /// Build a system; each `M_i` is symmetrized and its prior defect recorded.
    pub fn new(a: Operator, b: DMatrix<f64>, c: DMatrix<f64>, m: Vec<Operator>) -> Result<Self> {
        let shapes: Vec<_> = m.iter().map(|x| (x.nrows(), x.ncols())).collect();
        let bad = dimension_mismatches((a.nrows(), a.ncols()), b.shape(), c.shape(), &shapes);
        if !bad.is_empty() {
            return Err(Error::Dimension(bad.join("; ")));
        }
        let symmetry_defects = m.iter().map(Operator::asymmetry).collect();
        let m = m.iter().map(Operator::symmetrized).collect();
        Ok(Self {
            a,
            b,
            c,
            m,
            symmetry_defects,
        })
    }

    pub fn a(&self) -> &Operator {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn m(&self) -> &[Operator] {
        &self.m
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
    pub fn symmetry_defects(&self) -> &[f64] {
        &self.symmetry_defects
    }
    pub fn is_sparse(&self) -> bool {
        self.a.is_sparse()
    }

    /// Dense copy of the realization, for the dense diagnostic paths.
    pub fn densified(&self) -> DenseLqo {
        DenseLqo {
            a: self.a.to_dense(),
            b: self.b.clone(),
            c: self.c.clone(),
            m: self.m.iter().map(Operator::to_dense).collect(),
        }
    }
}

/// Plain dense realization used internally by the Gramian and diagnostic code.
#[derive(Debug, Clone)]
pub struct DenseLqo {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub m: Vec<DMatrix<f64>>,
}

impl DenseLqo {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

/// Reduced model `(A_k, B_k, C_k, M_k)`, always dense.
#[derive(Debug, Clone, PartialEq)]
pub struct RomSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    m: Vec<DMatrix<f64>>,
}

impl RomSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        m: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let shapes: Vec<_> = m.iter().map(|x| x.shape()).collect();
        let bad = dimension_mismatches(a.shape(), b.shape(), c.shape(), &shapes);
        if !bad.is_empty() {
            return Err(Error::Dimension(bad.join("; ")));
        }
        let m = m.iter().map(symmetrize).collect();
        Ok(Self { a, b, c, m })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn m(&self) -> &[DMatrix<f64>] {
        &self.m
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        spectral_abscissa(&self.a)
    }

    pub fn is_hurwitz(&self) -> bool {
        matches!(self.spectral_abscissa(), Ok(s) if s < 0.0)
    }

    pub fn to_dense_lqo(&self) -> DenseLqo {
        DenseLqo {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            m: self.m.clone(),
        }
    }

    pub fn to_lqo(&self) -> LqoSystem {
        LqoSystem::new(
            Operator::Dense(self.a.clone()),
            self.b.clone(),
            self.c.clone(),
            self.m.iter().cloned().map(Operator::Dense).collect(),
        )
        .expect("reduced model dimensions are consistent")
    }

    /// Copy with one block replaced; used by perturbation-based diagnostics.
    pub fn with_parts(
        &self,
        a: Option<DMatrix<f64>>,
        b: Option<DMatrix<f64>>,
        c: Option<DMatrix<f64>>,
        m: Option<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        Self::new(
            a.unwrap_or_else(|| self.a.clone()),
            b.unwrap_or_else(|| self.b.clone()),
            c.unwrap_or_else(|| self.c.clone()),
            m.unwrap_or_else(|| self.m.clone()),
        )
    }
}

/// Petrov–Galerkin bases with `W^T V = I`.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    v: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl ProjectionPair {
    pub fn new(v: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        if v.shape() != w.shape() {
            return Err(Error::Dimension(format!(
                "V is {}x{} but W is {}x{}",
                v.nrows(),
                v.ncols(),
                w.nrows(),
                w.ncols()
            )));
        }
        let k = v.ncols();
        let defect = (w.tr_mul(&v) - DMatrix::<f64>::identity(k, k)).amax();
        if !(defect <= 1e-8) {
            return Err(Error::InvalidInput(format!(
                "W^T V deviates from identity by {defect:e}"
            )));
        }
        Ok(Self { v, w })
    }
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn order(&self) -> usize {
        self.v.ncols()
    }
}

/// Outcome of the Hurwitz test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HurwitzStatus {
    Stable,
    Unstable,
    /// Not computed (large sparse operator); stability is assumed.
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dimension_mismatches: Vec<String>,
    /// `max |M_i - M_i^T|` before symmetrization, one per quadratic term.
    pub asymmetry: Vec<f64>,
    /// Indices of `M_i` whose defect exceeded `1e-12 (1 + max|M_i|)`.
    pub asymmetric_terms: Vec<usize>,
    pub spectral_abscissa: Option<f64>,
    pub hurwitz: HurwitzStatus,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.dimension_mismatches.is_empty() && self.hurwitz != HurwitzStatus::Unstable
    }
}

/// Validate raw parts without constructing a system.
pub fn validate_parts(
    a: &Operator,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    m: &[Operator],
) -> ValidationReport {
    let shapes: Vec<_> = m.iter().map(|x| (x.nrows(), x.ncols())).collect();
    let dimension_mismatches =
        dimension_mismatches((a.nrows(), a.ncols()), b.shape(), c.shape(), &shapes);
    let asymmetry: Vec<f64> = m
        .iter()
        .map(|x| {
            if x.nrows() == x.ncols() {
                x.asymmetry()
            } else {
                f64::NAN
            }
        })
        .collect();
    report(
        a,
        dimension_mismatches,
        asymmetry,
        m.iter().map(Operator::amax).collect(),
    )
}

fn report(
    a: &Operator,
    dimension_mismatches: Vec<String>,
    asymmetry: Vec<f64>,
    scales: Vec<f64>,
) -> ValidationReport {
    let asymmetric_terms = asymmetry
        .iter()
        .zip(&scales)
        .enumerate()
        .filter(|(_, (d, s))| !(**d <= 1e-12 * (1.0 + **s)))
        .map(|(i, _)| i)
        .collect();
    let square = a.nrows() == a.ncols();
    let spectral_abscissa = if square && a.nrows() <= HURWITZ_CHECK_MAX_N {
        spectral_abscissa(&a.to_dense()).ok()
    } else {
        None
    };
    let hurwitz = match spectral_abscissa {
        Some(s) if s < 0.0 => HurwitzStatus::Stable,
        Some(_) => HurwitzStatus::Unstable,
        None => HurwitzStatus::Assumed,
    };
    ValidationReport {
        dimension_mismatches,
        asymmetry,
        asymmetric_terms,
        spectral_abscissa,
        hurwitz,
    }
}

pub fn validate(sys: &LqoSystem) -> ValidationReport {
    // Scales are taken from the symmetrized terms; the defect itself was recorded on ingestion.
    let scales = sys.m.iter().map(Operator::amax).collect();
    report(&sys.a, Vec::new(), sys.symmetry_defects.clone(), scales)
}

/// Petrov–Galerkin reduction `(W^T A V, W^T B, C V, V^T M_i V)`.
pub fn project(sys: &LqoSystem, proj: &ProjectionPair) -> Result<RomSystem> {
    let n = sys.n();
    if proj.v.nrows() != n {
        return Err(Error::Dimension(format!(
            "projection has {} rows for a system of order {n}",
            proj.v.nrows()
        )));
    }
    let (v, w) = (&proj.v, &proj.w);
    let a = sys.a.sandwich(w, v);
    let b = w.tr_mul(&sys.b);
    let c = &sys.c * v;
    let m = sys.m.iter().map(|mi| mi.sandwich(v, v)).collect();
    RomSystem::new(a, b, c, m)
}
