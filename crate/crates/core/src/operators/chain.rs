use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{centered_diff, TorusGrid};
use crate::interp::{interpolate, Interp1};
use crate::linop::{Compose, DiscreteOperator, OpRef};

use super::CorrectorCoeffs;

/// One factor of a product of centered differences and multiplications.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    Diff(usize),
    Mult(Vec<f64>),
}

/// Σ_t s_t F_{t,1} F_{t,2} … F_{t,last}, applied right to left. Because Cᵀ = −C on the
/// torus, the transpose of a term is the reversed product times (−1)^{#differences}.
#[derive(Clone, Debug)]
pub struct DiffChain {
    pub grid: TorusGrid,
    pub terms: Vec<(f64, Vec<Factor>)>,
}

impl DiffChain {
    pub fn new(grid: TorusGrid) -> Self {
        DiffChain { grid, terms: Vec::new() }
    }

    pub fn push(&mut self, sign: f64, factors: Vec<Factor>) {
        self.terms.push((sign, factors));
    }

    fn run<'a>(&self, factors: impl Iterator<Item = &'a Factor>, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut tmp = vec![0.0; x.len()];
        for f in factors {
            match f {
                Factor::Diff(dir) => {
                    centered_diff(&self.grid, *dir, &cur, &mut tmp);
                    std::mem::swap(&mut cur, &mut tmp);
                }
                Factor::Mult(c) => cur.iter_mut().zip(c).for_each(|(v, w)| *v *= w),
            }
        }
        cur
    }

    fn check(&self, x: usize, y: usize) -> Result<()> {
        let n = self.grid.len();
        if x != n || y != n {
            return Err(Error::Mismatch(format!("chain on {n} nodes applied to {x} -> {y}")));
        }
        Ok(())
    }

    /// The transposed chain as a chain.
    pub fn transposed(&self) -> DiffChain {
        let terms = self
            .terms
            .iter()
            .map(|(s, fs)| {
                let diffs = fs.iter().filter(|f| matches!(f, Factor::Diff(_))).count();
                let sign = if diffs % 2 == 0 { *s } else { -*s };
                (sign, fs.iter().rev().cloned().collect())
            })
            .collect();
        DiffChain { grid: self.grid, terms }
    }

    pub fn append(&mut self, other: DiffChain) {
        self.terms.extend(other.terms);
    }
}

impl DiscreteOperator for DiffChain {
    fn rows(&self) -> usize {
        self.grid.len()
    }
    fn cols(&self) -> usize {
        self.grid.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check(x.len(), y.len())?;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (s, fs) in &self.terms {
            let r = self.run(fs.iter().rev(), x);
            y.iter_mut().zip(&r).for_each(|(a, b)| *a += s * b);
        }
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check(x.len(), y.len())?;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (s, fs) in &self.terms {
            let diffs = fs.iter().filter(|f| matches!(f, Factor::Diff(_))).count();
            let sign = if diffs % 2 == 0 { *s } else { -*s };
            let r = self.run(fs.iter(), x);
            y.iter_mut().zip(&r).for_each(|(a, b)| *a += sign * b);
        }
        Ok(())
    }
}

/// Interpolates slow samples `f(s)` (taken at stride `stride`, offset `at`) to fine nodes.
fn to_fine(slow: &TorusGrid, grid: &TorusGrid, ax: &Interp1, src: &[f64], stride: usize, at: usize) -> Vec<f64> {
    let f: Vec<f64> = (0..slow.len()).map(|s| src[s * stride + at]).collect();
    let mut out = vec![0.0; grid.len()];
    interpolate(grid.dim, &f, [ax, ax], &mut out);
    out
}

/// L₃ − L₂ + L̃₃ᵀ − L̃₂ᵀ with
/// L₃ = Σ C_k C_m c^{jk}_m C_j, L₂ = Σ C_k c^{jk} C_j,
/// L̃₃ = Σ C_j C_m c̃^{kj}_m C_k, L̃₂ = Σ C_j c̃^{kj} C_k.
pub fn l_chain(coeffs: &CorrectorCoeffs, grid: TorusGrid) -> Result<DiffChain> {
    let d = coeffs.dim();
    if grid.dim != d {
        return Err(Error::Mismatch("coefficient tensors and grid differ in dimension".into()));
    }
    let slow = coeffs.slow;
    let ax = Interp1::lattice(slow.n, grid.n, 0, 0, 1, grid.n);
    let mut main = DiffChain::new(grid);
    let mut adj = DiffChain::new(grid);
    for j in 0..d {
        for k in 0..d {
            for m in 0..d {
                let c3 = to_fine(&slow, &grid, &ax, &coeffs.c3, d * d * d, (j * d + k) * d + m);
                main.push(1.0, vec![Factor::Diff(k), Factor::Diff(m), Factor::Mult(c3), Factor::Diff(j)]);
                let ct3 = to_fine(&slow, &grid, &ax, &coeffs.ct3, d * d * d, (k * d + j) * d + m);
                adj.push(1.0, vec![Factor::Diff(j), Factor::Diff(m), Factor::Mult(ct3), Factor::Diff(k)]);
            }
            let c2 = to_fine(&slow, &grid, &ax, &coeffs.c2, d * d, j * d + k);
            main.push(-1.0, vec![Factor::Diff(k), Factor::Mult(c2), Factor::Diff(j)]);
            let ct2 = to_fine(&slow, &grid, &ax, &coeffs.ct2, d * d, k * d + j);
            adj.push(-1.0, vec![Factor::Diff(j), Factor::Mult(ct2), Factor::Diff(k)]);
        }
    }
    main.append(adj.transposed());
    Ok(main)
}

/// 𝓛 = R₀ (L₃ − L₂ + (L̃₃ − L̃₂)ᵀ) R₀.
pub fn assemble_l(coeffs: &CorrectorCoeffs, grid: TorusGrid, resolvent: OpRef) -> Result<OpRef> {
    if grid.len() != resolvent.rows() {
        return Err(Error::Mismatch("resolvent and grid differ in size".into()));
    }
    let chain: OpRef = Arc::new(l_chain(coeffs, grid)?);
    Ok(Arc::new(Compose(vec![resolvent.clone(), chain, resolvent])))
}
