use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use super::csc::CscMatrix;
use super::factor::{factor_shifted, Shift, SparseFactorization};
use crate::dense::{real_schur, Block};
use crate::error::{Error, Result};
use crate::model::Operator;

/// Linear-solve instrumentation. A 2x2 coupled solve counts as two solves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub solves: usize,
    pub factorizations: usize,
}

impl std::ops::Add for SolveStats {
    type Output = SolveStats;
    fn add(self, o: SolveStats) -> SolveStats {
        SolveStats {
            solves: self.solves + o.solves,
            factorizations: self.factorizations + o.factorizations,
        }
    }
}

/// Column-sweep solver for `A X + X S + D = 0` (or `A^T X + X S + D = 0`) with large `A`
/// and small dense `S`, caching shifted factorizations of `A`.
pub struct SylvesterEngine<'a> {
    op: &'a Operator,
    transpose: bool,
    cache: HashMap<[u64; 4], SparseFactorization>,
    stats: SolveStats,
}

/// Whether factorizations created by a call stay cached afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retain {
    Keep,
    Drop,
}

impl<'a> SylvesterEngine<'a> {
    pub fn new(op: &'a Operator, transpose: bool) -> Self {
        Self {
            op,
            transpose,
            cache: HashMap::new(),
            stats: SolveStats::default(),
        }
    }

    pub fn order(&self) -> usize {
        self.op.nrows()
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }

    fn ensure(&mut self, shift: Shift, created: &mut Vec<[u64; 4]>) -> Result<()> {
        let key = shift.key();
        if !self.cache.contains_key(&key) {
            let f = factor_shifted(self.op, shift, self.transpose)?;
            self.stats.factorizations += 1;
            self.cache.insert(key, f);
            created.push(key);
        }
        Ok(())
    }

    /// Solve `op X + X small + D = 0`.
    pub fn solve(
        &mut self,
        small: &DMatrix<f64>,
        d: &DMatrix<f64>,
        retain: Retain,
    ) -> Result<DMatrix<f64>> {
        let mut out = self.solve_many(small, std::slice::from_ref(d), retain)?;
        Ok(out.pop().expect("one solution per right-hand side"))
    }

    /// Solve several equations sharing the same small matrix; shifts are factored once.
    pub fn solve_many(
        &mut self,
        small: &DMatrix<f64>,
        ds: &[DMatrix<f64>],
        retain: Retain,
    ) -> Result<Vec<DMatrix<f64>>> {
        let n = self.order();
        let b = small.nrows();
        if small.ncols() != b {
            return Err(Error::Dimension(
                "small Sylvester coefficient must be square".into(),
            ));
        }
        for d in ds {
            if d.nrows() != n || d.ncols() != b {
                return Err(Error::Dimension(format!(
                    "Sylvester forcing is {}x{}, expected {n}x{b}",
                    d.nrows(),
                    d.ncols()
                )));
            }
        }
        let before = self.stats.solves;
        let rs = real_schur(small)?;
        let s = &rs.s;
        let blocks = rs.blocks();
        let mut tildes: Vec<DMatrix<f64>> = ds.iter().map(|d| d * &rs.q).collect();
        let mut created = Vec::new();
        let result = self.sweep(s, &blocks, &mut tildes, &mut created);
        if retain == Retain::Drop {
            for k in &created {
                self.cache.remove(k);
            }
        }
        result?;
        debug_assert_eq!(self.stats.solves - before, b * ds.len());
        Ok(tildes.into_iter().map(|x| x * rs.q.transpose()).collect())
    }

    // On entry `xs` hold D Q; on exit they hold the transformed solutions X Q.
    fn sweep(
        &mut self,
        s: &DMatrix<f64>,
        blocks: &[Block],
        xs: &mut [DMatrix<f64>],
        created: &mut Vec<[u64; 4]>,
    ) -> Result<()> {
        let n = self.order();
        for blk in blocks {
            let j = blk.start;
            let w = blk.size;
            let shift = if w == 1 {
                Shift::Real(s[(j, j)])
            } else {
                Shift::Block([
                    [s[(j, j)], s[(j, j + 1)]],
                    [s[(j + 1, j)], s[(j + 1, j + 1)]],
                ])
            };
            self.ensure(shift, created)?;
            let f = &self.cache[&shift.key()];
            for x in xs.iter_mut() {
                let mut rhs = DMatrix::zeros(n, w);
                for c in 0..w {
                    let col = j + c;
                    for r in 0..n {
                        let mut v = x[(r, col)];
                        for i in 0..j {
                            v += x[(r, i)] * s[(i, col)];
                        }
                        rhs[(r, c)] = -v;
                    }
                }
                let sol = f.solve(&rhs)?;
                self.stats.solves += w;
                x.columns_mut(j, w).copy_from(&sol);
            }
        }
        Ok(())
    }
}

/// One-shot sparse–dense Sylvester solve `A X + X S + D = 0`.
pub fn solve_sparse_dense_sylvester(
    a: &CscMatrix,
    small: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let op = Operator::Sparse(a.clone());
    SylvesterEngine::new(&op, false).solve(small, d, Retain::Drop)
}
