use rayon::prelude::*;

use crate::cell::CellSolutions;
use crate::error::{Error, Result};
use crate::grid::{centered_diff, centered_diff_transpose_add, GridFunction, TorusGrid};
use crate::interp::{interpolate, Interp1};
use crate::linop::DiscreteOperator;
use crate::smoothing::SmoothingSpec;

/// Flattened fast residue (i mod n_f per axis) of fine node `i`.
pub fn residue(g: &TorusGrid, n_f: usize, i: usize) -> usize {
    let m = g.multi(i);
    if g.dim == 1 {
        m[0] % n_f
    } else {
        (m[0] % n_f) * n_f + m[1] % n_f
    }
}

fn residue_count(dim: usize, n_f: usize) -> usize {
    if dim == 1 {
        n_f
    } else {
        n_f * n_f
    }
}

/// N^j(x_m, r/n_f) for every fine node m and every fast residue r, laid out as
/// `data[(m R + r) d + j]` with R = n_f^d.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoScaleTable {
    pub grid: TorusGrid,
    pub n_f: usize,
    pub data: Vec<f64>,
}

impl TwoScaleTable {
    pub fn build(cells: &CellSolutions, adjoint: bool, grid: TorusGrid, n_f: usize) -> Result<Self> {
        let d = cells.dim();
        if grid.dim != d || !grid.n.is_multiple_of(n_f) {
            return Err(Error::Mismatch(format!(
                "fine grid n = {} is not a multiple of n_f = {n_f}",
                grid.n
            )));
        }
        if !cells.cell.n.is_multiple_of(n_f) {
            return Err(Error::Mismatch(format!(
                "cell grid n_y = {} is not a multiple of n_f = {n_f}",
                cells.cell.n
            )));
        }
        let stride = cells.cell.n / n_f;
        let rc = residue_count(d, n_f);
        let ns = cells.n_samples();
        let ax = Interp1::lattice(cells.slow.n, grid.n, 0, 0, 1, grid.n);
        let nm = grid.len();
        let planes: Vec<Vec<f64>> = (0..rc * d)
            .into_par_iter()
            .map(|b| {
                let (r, j) = (b / d, b % d);
                let q = if d == 1 {
                    r * stride
                } else {
                    cells.cell.index([(r / n_f) * stride, (r % n_f) * stride])
                };
                let f: Vec<f64> = (0..ns).map(|s| cells.values(adjoint, s, j)[q]).collect();
                let mut out = vec![0.0; nm];
                interpolate(d, &f, [&ax, &ax], &mut out);
                out
            })
            .collect();
        let mut data = vec![0.0; nm * rc * d];
        for (b, plane) in planes.iter().enumerate() {
            for (m, v) in plane.iter().enumerate() {
                data[m * rc * d + b] = *v;
            }
        }
        Ok(TwoScaleTable { grid, n_f, data })
    }

    #[inline]
    fn at(&self, m: usize, r: usize, j: usize) -> f64 {
        let d = self.grid.dim;
        self.data[(m * residue_count(d, self.n_f) + r) * d + j]
    }
}

/// The raw smoothed corrector
/// (K u)(x_i) = Σ_ω μ_ω Σ_j N^j(x_i − εω, x_i/ε) (C_j u)(x_i − εω)
/// with centered differences C_j. Composed with a resolvent it gives 𝒦_ε or 𝒦̃_ε.
#[derive(Clone, Debug)]
pub struct SmoothedCorrector {
    pub table: TwoScaleTable,
    pub spec: SmoothingSpec,
    residues: Vec<u32>,
}

impl SmoothedCorrector {
    pub fn new(table: TwoScaleTable, spec: SmoothingSpec) -> Result<Self> {
        let g = spec.fine_grid()?;
        if g != table.grid || table.n_f != spec.n_f {
            return Err(Error::Mismatch("two-scale table built for a different fine grid".into()));
        }
        let residues = (0..g.len()).map(|i| residue(&g, spec.n_f, i) as u32).collect();
        Ok(SmoothedCorrector { table, spec, residues })
    }

    pub fn grid(&self) -> TorusGrid {
        self.table.grid
    }

    fn gradients(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let g = self.grid();
        (0..g.dim)
            .map(|j| {
                let mut du = vec![0.0; u.len()];
                centered_diff(&g, j, u, &mut du);
                du
            })
            .collect()
    }

    pub fn apply_raw(&self, u: &[f64], out: &mut [f64]) {
        let g = self.grid();
        let d = g.dim;
        let du = self.gradients(u);
        let pts = &self.spec.omega.points;
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let r = self.residues[i] as usize;
            let mut acc = 0.0;
            for pt in pts {
                let m = g.offset(i, [-pt.offset[0], -pt.offset[1]]);
                let mut s = 0.0;
                for (j, dj) in du.iter().enumerate().take(d) {
                    s += self.table.at(m, r, j) * dj[m];
                }
                acc += pt.weight * s;
            }
            *o = acc;
        });
    }

    /// Kᵀ h = Σ_j C_jᵀ w_j with w_j(x_m) = Σ_ω μ_ω N^j(x_m, x_{m+εω}/ε) h(x_m + εω).
    pub fn apply_raw_transpose(&self, h: &[f64], out: &mut [f64]) {
        let g = self.grid();
        let d = g.dim;
        let pts = &self.spec.omega.points;
        let mut w = vec![vec![0.0; h.len()]; d];
        let rows: Vec<[f64; 2]> = (0..g.len())
            .into_par_iter()
            .map(|m| {
                let mut acc = [0.0; 2];
                for pt in pts {
                    let i = g.offset(m, pt.offset);
                    let r = self.residues[i] as usize;
                    for (j, a) in acc.iter_mut().enumerate().take(d) {
                        *a += pt.weight * self.table.at(m, r, j) * h[i];
                    }
                }
                acc
            })
            .collect();
        for (m, row) in rows.iter().enumerate() {
            for j in 0..d {
                w[j][m] = row[j];
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, wj) in w.iter().enumerate() {
            centered_diff_transpose_add(&g, j, wj, 1.0, out);
        }
    }
}

impl DiscreteOperator for SmoothedCorrector {
    fn rows(&self) -> usize {
        self.grid().len()
    }
    fn cols(&self) -> usize {
        self.grid().len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols() || y.len() != self.rows() {
            return Err(Error::Mismatch("smoothed corrector applied to a foreign grid".into()));
        }
        self.apply_raw(x, y);
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.rows() || y.len() != self.cols() {
            return Err(Error::Mismatch("smoothed corrector applied to a foreign grid".into()));
        }
        self.apply_raw_transpose(x, y);
        Ok(())
    }
}

fn corrector_on(cells: &CellSolutions, adjoint: bool, u: &GridFunction, spec: &SmoothingSpec) -> Result<GridFunction> {
    let table = TwoScaleTable::build(cells, adjoint, u.grid, spec.n_f)?;
    let k = SmoothedCorrector::new(table, spec.clone())?;
    let mut out = GridFunction::zeros(u.grid);
    k.apply(&u.values, &mut out.values)?;
    Ok(out)
}

/// K_ε(x) = Σ_ω μ_ω N(x − εω, x/ε)·∇u(x − εω) for a homogenized solution u.
pub fn corrector_k(u_hom: &GridFunction, cells: &CellSolutions, spec: &SmoothingSpec) -> Result<GridFunction> {
    corrector_on(cells, false, u_hom, spec)
}

/// As [`corrector_k`] with the adjoint cell solutions Ñ.
pub fn corrector_ktilde(v_hom: &GridFunction, cells: &CellSolutions, spec: &SmoothingSpec) -> Result<GridFunction> {
    corrector_on(cells, true, v_hom, spec)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::linop::{materialize, transpose_defect};
    use crate::operators::test_support::pipeline;

    #[test]
    fn table_hits_cell_values_on_slow_nodes() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let g = TorusGrid::new(2, 16).unwrap();
        let t = TwoScaleTable::build(&p.cells, false, g, 8).unwrap();
        // fine node (4, 8) is slow sample (1, 2); residue (3, 5) is cell node (6, 10)
        let m = g.index([4, 8]);
        let s = p.cells.slow.index([1, 2]);
        let q = p.cells.cell.index([6, 10]);
        for j in 0..2 {
            let v = t.at(m, 3 * 8 + 5, j);
            assert!((v - p.cells.values(false, s, j)[q]).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_is_exact() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let spec = SmoothingSpec::new(2, 2, 8, 4, 3).unwrap();
        let g = spec.fine_grid().unwrap();
        let k = SmoothedCorrector::new(TwoScaleTable::build(&p.cells, true, g, 8).unwrap(), spec).unwrap();
        assert!(transpose_defect(&k, 9).unwrap() < 1e-14);
        let a = materialize(&k).unwrap();
        let at = materialize(&crate::linop::Transpose(std::sync::Arc::new(k))).unwrap();
        assert!(a.transposed().data.iter().zip(&at.data).all(|(x, y)| (x - y).abs() < 1e-13));
    }

    #[test]
    fn degenerate_inputs_give_zero() {
        let spec = SmoothingSpec::new(1, 4, 16, 16, 3).unwrap();
        let g = spec.fine_grid().unwrap();
        let sep = pipeline("separable_1d", &[], 8, 32);
        let constant_u = GridFunction::new(g, vec![3.0; g.len()]).unwrap();
        let k = corrector_k(&constant_u, &sep.cells, &spec).unwrap();
        assert!(k.values.iter().all(|v| v.abs() < 1e-13));
        let c = pipeline("constant", &[("dim", 1.0), ("a11", 2.0)], 8, 32);
        let u = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let k = corrector_k(&u, &c.cells, &spec).unwrap();
        assert!(k.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn symmetric_field_has_identical_adjoint_corrector() {
        let p = pipeline("laminate_2d", &[("slow", 0.3)], 4, 16);
        let spec = SmoothingSpec::new(2, 2, 8, 8, 3).unwrap();
        let g = spec.fine_grid().unwrap();
        let u = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let a = corrector_k(&u, &p.cells, &spec).unwrap();
        let b = corrector_ktilde(&u, &p.cells, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.l2_norm() > 1e-3);
    }

    #[test]
    fn nonsymmetric_adjoint_corrector_differs() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let spec = SmoothingSpec::new(2, 2, 8, 8, 3).unwrap();
        let g = spec.fine_grid().unwrap();
        let u = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos());
        let a = corrector_k(&u, &p.cells, &spec).unwrap();
        let b = corrector_ktilde(&u, &p.cells, &spec).unwrap();
        let diff = GridFunction::new(g, a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect()).unwrap();
        assert!(diff.l2_norm() > 1e-3 * a.l2_norm());
    }
}
