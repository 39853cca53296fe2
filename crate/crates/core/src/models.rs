//! Built-in benchmark systems.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{LqoSystem, Operator};
use crate::sparse::CscMatrix;

/// Generator parameters for the built-in systems.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Illustrative,
    Advdiff {
        nodes: usize,
        alpha: f64,
        beta: f64,
    },
    Fss {
        modes: usize,
        inputs: usize,
        outputs: usize,
        quad_counts: Vec<usize>,
        seed: u64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<LqoSystem> {
        match self {
            ModelSpec::Illustrative => Ok(make_illustrative()),
            ModelSpec::Advdiff { nodes, alpha, beta } => make_advdiff(*nodes, *alpha, *beta),
            ModelSpec::Fss {
                modes,
                inputs,
                outputs,
                quad_counts,
                seed,
            } => make_fss(*modes, *inputs, *outputs, quad_counts, *seed),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ModelSpec::Illustrative => "illustrative".into(),
            ModelSpec::Advdiff { nodes, .. } => format!("advdiff-{nodes}"),
            ModelSpec::Fss { modes, seed, .. } => format!("fss-{modes}-{seed}"),
        }
    }
}

/// Sixth-order companion-form system with one quadratic output.
pub fn make_illustrative() -> LqoSystem {
    let mut a = DMatrix::zeros(6, 6);
    for (j, v) in [-9.0, -29.0, -100.0, -82.0, -19.0, -2.0].iter().enumerate() {
        a[(0, j)] = *v;
    }
    for i in 1..6 {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DMatrix::zeros(6, 1);
    b[(0, 0)] = 1.0;
    let c = DMatrix::from_row_slice(1, 6, &[0.0, 0.0, 0.0, 0.0, -1.0, 1.0]);
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        0.7, 0.4, 0.1, 0.1, 0.1, 0.1,
    ]));
    LqoSystem::new(Operator::Dense(a), b, c, vec![Operator::Dense(m)])
        .expect("consistent dimensions")
}

/// Upwind/central finite differences of `v_t = alpha v_xx - beta v_x` on (0, 1) with a
/// Dirichlet input at the left end and a flux input at the right end; the output is the
/// quadratic tracking cost `1/2 int |v - 1|^2` with its constant term dropped.
pub fn make_advdiff(nodes: usize, alpha: f64, beta: f64) -> Result<LqoSystem> {
    if nodes < 3 || !(alpha > 0.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "advdiff needs nodes >= 3, alpha > 0, beta >= 0 (got {nodes}, {alpha}, {beta})"
        )));
    }
    let n = nodes;
    let h = 1.0 / (n as f64 + 1.0);
    let dif = alpha / (h * h);
    let adv = beta / h;
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        let diag = if i + 1 == n {
            -dif - adv
        } else {
            -2.0 * dif - adv
        };
        t.push((i, i, diag));
        if i > 0 {
            t.push((i, i - 1, dif + adv));
        }
        if i + 1 < n {
            t.push((i, i + 1, dif));
        }
    }
    let a = CscMatrix::from_triplets(n, n, &t)?;
    let mut b = DMatrix::zeros(n, 2);
    b[(0, 0)] = dif + adv;
    b[(n - 1, 1)] = 1.0 / h;
    let c = DMatrix::from_element(1, n, -h);
    let m = CscMatrix::from_diagonal(&vec![0.5 * h; n]);
    LqoSystem::new(Operator::Sparse(a), b, c, vec![Operator::Sparse(m)])
}

/// Modal flexible-structure model: `modes` damped oscillators with random damping in
/// [0.001, 0.05] and log-uniform frequencies in [0.1, 1000] rad/s.
pub fn make_fss(
    modes: usize,
    inputs: usize,
    outputs: usize,
    quad_counts: &[usize],
    seed: u64,
) -> Result<LqoSystem> {
    if modes == 0 || inputs == 0 || outputs == 0 {
        return Err(Error::InvalidInput(
            "fss needs modes, inputs, outputs >= 1".into(),
        ));
    }
    if quad_counts.len() != outputs {
        return Err(Error::InvalidInput(format!(
            "{} quadratic state counts given for {outputs} outputs",
            quad_counts.len()
        )));
    }
    let n = 2 * modes;
    if let Some(q) = quad_counts.iter().find(|&&q| q > n) {
        return Err(Error::InvalidInput(format!(
            "cannot select {q} of {n} states"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::with_capacity(3 * modes);
    for i in 0..modes {
        let zeta: f64 = rng.random_range(0.001..0.05);
        let omega = 10f64.powf(rng.random_range(-1.0..3.0));
        let (p, v) = (2 * i, 2 * i + 1);
        t.push((p, v, 1.0));
        t.push((v, p, -omega * omega));
        t.push((v, v, -2.0 * zeta * omega));
    }
    let a = CscMatrix::from_triplets(n, n, &t)?;
    let mut b = DMatrix::zeros(n, inputs);
    for i in 0..modes {
        for j in 0..inputs {
            b[(2 * i + 1, j)] = rng.sample(StandardNormal);
        }
    }
    let mut c = DMatrix::zeros(outputs, n);
    for i in 0..modes {
        for r in 0..outputs {
            c[(r, 2 * i)] = rng.sample(StandardNormal);
            c[(r, 2 * i + 1)] = rng.sample(StandardNormal);
        }
    }
    let mut m = Vec::with_capacity(outputs);
    for &q in quad_counts {
        let mut idx: Vec<usize> = sample(&mut rng, n, q).into_vec();
        idx.sort_unstable();
        let trips: Vec<_> = idx.into_iter().map(|i| (i, i, 0.5)).collect();
        m.push(Operator::Sparse(CscMatrix::from_triplets(n, n, &trips)?));
    }
    LqoSystem::new(Operator::Sparse(a), b, c, m)
}
