use std::sync::Arc;

use rayon::prelude::*;

use crate::cell::CellSolutions;
use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::interp::{interpolate, Interp1};
use crate::linop::{Compose, OpRef};
use crate::mat2::{self, Mat};
use crate::smoothing::SmoothingSpec;

use super::chain::{DiffChain, Factor};

/// ĉ^{jk}_ε at slow samples and fast residues,
/// `data[(s R + r) d² + j d + k]` with R = n_f^d.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleAveraged {
    pub slow: TorusGrid,
    pub n_f: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl DoubleAveraged {
    pub fn dim(&self) -> usize {
        self.slow.dim
    }

    fn residues(&self) -> usize {
        self.n_f.pow(self.dim() as u32)
    }

    pub fn at(&self, s: usize, r: usize, j: usize, k: usize) -> f64 {
        let d = self.dim();
        self.data[(s * self.residues() + r) * d * d + j * d + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ĉ^{jk}(x_i, x_i/ε) at every fine node, one vector per (j, k).
    pub fn to_fine(&self, grid: TorusGrid) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        if grid.dim != d || grid.n != self.n_f * self.k {
            return Err(Error::Mismatch("fine grid does not match the double-averaged matrix".into()));
        }
        let (n, nf, k) = (grid.n, self.n_f, self.k);
        let rc = self.residues();
        let ns = self.slow.len();
        let axes: Vec<Interp1> = (0..nf).map(|r| Interp1::lattice(self.slow.n, n, 0, r, nf, k)).collect();
        let mut out = vec![vec![0.0; grid.len()]; d * d];
        let mut f = vec![0.0; ns];
        let mut vals = vec![0.0; k.pow(d as u32)];
        for r in 0..rc {
            let (r0, r1) = if d == 1 { (r, 0) } else { (r / nf, r % nf) };
            for jk in 0..d * d {
                for (s, v) in f.iter_mut().enumerate() {
                    *v = self.data[(s * rc + r) * d * d + jk];
                }
                interpolate(d, &f, [&axes[r0], &axes[r1]], &mut vals);
                if d == 1 {
                    for a in 0..k {
                        out[jk][r0 + nf * a] = vals[a];
                    }
                } else {
                    for a in 0..k {
                        for b in 0..k {
                            out[jk][grid.index([r0 + nf * a, r1 + nf * b])] = vals[a * k + b];
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// ĉ^{jk}_ε(x, r) = Σ_ω μ_ω (e^k + ∇_y Ñ^k)ᵀ B (e^j + ∇_y N^j) at y = r/n_f + ω, with
/// B = Σ_t w_t Σ_m ω_m ∂_{x_m} a(x + tεω, y).
pub fn double_averaged_matrix(
    field: &CoefficientField,
    cells: &CellSolutions,
    spec: &SmoothingSpec,
) -> Result<DoubleAveraged> {
    let d = cells.dim();
    if field.dim() != d || spec.dim() != d {
        return Err(Error::Mismatch("field, cells and smoothing spec differ in dimension".into()));
    }
    let (ny, nf, nw) = (cells.cell.n, spec.n_f, spec.omega.intervals);
    if ny % nf != 0 || ny % nw != 0 {
        return Err(Error::Mismatch(format!(
            "cell grid n_y = {ny} must be a multiple of n_f = {nf} and of the omega intervals {nw}"
        )));
    }
    let rc = nf.pow(d as u32);
    let eps = spec.eps();
    let (ry, wy) = ((ny / nf) as i64, (ny / nw) as i64);
    let cell_node = |r: usize, p: [i64; 2]| -> usize {
        let rr = if d == 1 { [r, 0] } else { [r / nf, r % nf] };
        let mut m = [0usize; 2];
        for i in 0..d {
            m[i] = (rr[i] as i64 * ry + p[i] * wy).rem_euclid(ny as i64) as usize;
        }
        cells.cell.index(m)
    };
    let blocks: Vec<Vec<f64>> = (0..cells.n_samples())
        .into_par_iter()
        .map(|s| {
            let x = cells.slow_point(s);
            let mut out = vec![0.0; rc * d * d];
            for r in 0..rc {
                for pt in &spec.omega.points {
                    let q = cell_node(r, pt.p);
                    let y = cells.cell.coords(q);
                    let mut b: Mat = mat2::ZERO;
                    for &(t, w) in &spec.t_rule {
                        let xt = [x[0] + t * eps * pt.omega[0], x[1] + t * eps * pt.omega[1]];
                        for m in 0..d {
                            let da = field.grad_x(xt, y, m);
                            for (bi, di) in b.iter_mut().zip(da.iter()) {
                                for (bij, dij) in bi.iter_mut().zip(di.iter()) {
                                    *bij += w * pt.omega[m] * dij;
                                }
                            }
                        }
                    }
                    let vec_of = |adjoint: bool, j: usize| -> [f64; 2] {
                        let mut v = [0.0; 2];
                        v[j] = 1.0;
                        for c in 0..d {
                            v[c] += cells.grad_y(adjoint, s, j, c)[q];
                        }
                        v
                    };
                    for j in 0..d {
                        let bv = mat2::mul_vec(b, vec_of(false, j));
                        for k in 0..d {
                            let vt = vec_of(true, k);
                            let val: f64 = (0..d).map(|c| vt[c] * bv[c]).sum();
                            out[r * d * d + j * d + k] += pt.weight * val;
                        }
                    }
                }
            }
            out
        })
        .collect();
    Ok(DoubleAveraged {
        slow: cells.slow,
        n_f: nf,
        k: spec.k,
        data: blocks.concat(),
    })
}

/// M_ε = Σ_{jk} C_kᵀ diag(ĉ^{jk}) C_j, the conservative form of −div ĉ_ε∇.
pub fn m_chain(dbl: &DoubleAveraged, grid: TorusGrid) -> Result<DiffChain> {
    let d = dbl.dim();
    let fine = dbl.to_fine(grid)?;
    let mut ch = DiffChain::new(grid);
    for (jk, c) in fine.into_iter().enumerate() {
        let (j, k) = (jk / d, jk % d);
        ch.push(-1.0, vec![Factor::Diff(k), Factor::Mult(c), Factor::Diff(j)]);
    }
    Ok(ch)
}

/// 𝓜_ε = R₀ M_ε R₀.
pub fn assemble_m(
    field: &CoefficientField,
    cells: &CellSolutions,
    spec: &SmoothingSpec,
    resolvent: OpRef,
) -> Result<OpRef> {
    let grid = spec.fine_grid()?;
    if grid.len() != resolvent.rows() {
        return Err(Error::Mismatch("resolvent and fine grid differ in size".into()));
    }
    let m: OpRef = Arc::new(m_chain(&double_averaged_matrix(field, cells, spec)?, grid)?);
    Ok(Arc::new(Compose(vec![resolvent.clone(), m, resolvent])))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::linop::{materialize, transpose_defect};
    use crate::operators::test_support::pipeline;

    #[test]
    fn separable_matches_closed_form_reference() {
        // (1 + N')² = (a⁰/a)² and ∫₀¹ ∂ₓa(x + tεω, y) ω dt = (a(x + εω, y) − a(x, y)) / ε
        let p = pipeline("separable_1d", &[], 8, 64);
        let spec = SmoothingSpec::new(1, 8, 16, 16, 3).unwrap();
        let c = double_averaged_matrix(&p.field, &p.cells, &spec).unwrap();
        let eps = 1.0 / 8.0;
        let a = |x: f64, y: f64| (2.0 + (2.0 * PI * y).sin()) * (1.0 + 0.5 * (2.0 * PI * x).sin());
        for s in 0..8 {
            let x = s as f64 / 8.0;
            let a0 = 3f64.sqrt() * (1.0 + 0.5 * (2.0 * PI * x).sin());
            for r in 0..16 {
                let mut reference = 0.0;
                for pidx in -8i32..=8 {
                    let w = if pidx.abs() == 8 { 1.0 / 32.0 } else { 1.0 / 16.0 };
                    let om = pidx as f64 / 16.0;
                    let y = r as f64 / 16.0 + om;
                    reference += w * (a0 / a(x, y)).powi(2) * (a(x + eps * om, y) - a(x, y)) / eps;
                }
                assert!((c.at(s, r, 0, 0) - reference).abs() < 1e-6, "{s} {r}");
            }
        }
    }

    #[test]
    fn x_independent_fields_vanish() {
        let p = pipeline("periodic_only", &[("dim", 2.0), ("t0", 0.2)], 4, 16);
        let spec = SmoothingSpec::new(2, 2, 8, 8, 3).unwrap();
        assert_eq!(double_averaged_matrix(&p.field, &p.cells, &spec).unwrap().max_abs(), 0.0);
        let p = pipeline("constant", &[], 4, 16);
        assert_eq!(double_averaged_matrix(&p.field, &p.cells, &spec).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fine_values_pick_the_node_residue() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let spec = SmoothingSpec::new(2, 2, 8, 8, 3).unwrap();
        let c = double_averaged_matrix(&p.field, &p.cells, &spec).unwrap();
        let g = spec.fine_grid().unwrap();
        let fine = c.to_fine(g).unwrap();
        // node (12, 4) sits on slow sample (3, 1) with residue (4, 4)
        let i = g.index([12, 4]);
        let s = p.cells.slow.index([3, 1]);
        for j in 0..2 {
            for k in 0..2 {
                assert!((fine[j * 2 + k][i] - c.at(s, 4 * 8 + 4, j, k)).abs() < 1e-14);
            }
        }
        let m = m_chain(&c, g).unwrap();
        assert!(transpose_defect(&m, 3).unwrap() < 1e-13);
        assert!(materialize(&m).unwrap().max_abs() > 0.0);
    }
}
