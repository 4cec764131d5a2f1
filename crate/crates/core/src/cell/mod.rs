//! Periodic cell problems div_y[a(x,·)(e^j + ∇_y N^j)] = 0 and their adjoints, tabulated over
//! a slow-variable sample grid.

mod io;
mod solver;

use rayon::prelude::*;

pub use io::{read_cell_table, write_cell_table};
pub use solver::{CellCoefficients, CellSolution, CellSolver};

use crate::coeff::{CellScheme, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::krylov::SolverOptions;
use crate::mat2::Point;

fn locate(e: Error, x: Point, j: usize) -> Error {
    match e {
        Error::NoConvergence {
            what,
            iterations,
            residual,
        } => Error::NoConvergence {
            what: format!("{what} at x = ({:.6}, {:.6}), j = {}", x[0], x[1], j + 1),
            iterations,
            residual,
        },
        other => other,
    }
}

fn check_field(field: &CoefficientField, grid: &TorusGrid) -> Result<()> {
    if field.dim() != grid.dim {
        return Err(Error::Mismatch(format!(
            "field of dimension {} on a {}-dimensional cell grid",
            field.dim(),
            grid.dim
        )));
    }
    Ok(())
}

/// N^j(x, ·) with its y-gradient.
pub fn solve_cell(
    field: &CoefficientField,
    x: Point,
    j: usize,
    grid: TorusGrid,
    scheme: CellScheme,
    opts: SolverOptions,
) -> Result<CellSolution> {
    check_field(field, &grid)?;
    if j >= grid.dim {
        return Err(Error::InvalidParameter(format!("direction index {} out of range", j + 1)));
    }
    let solver = CellSolver::new(grid, scheme, opts)?;
    let coeffs = CellCoefficients::sample(field, x, &grid, scheme);
    solver.solve(&coeffs, j, field.symmetric).map_err(|e| locate(e, x, j))
}

/// Ñ^j(x, ·): the cell problem for aᵀ.
pub fn solve_adjoint_cell(
    field: &CoefficientField,
    x: Point,
    j: usize,
    grid: TorusGrid,
    scheme: CellScheme,
    opts: SolverOptions,
) -> Result<CellSolution> {
    solve_cell(&field.transposed(), x, j, grid, scheme, opts)
}

/// N^j (or Ñ^j), ∇_y and ∇_x of it, for every slow sample.
///
/// Layout, with `nq` cell nodes: `values[(s d + j) nq + q]`,
/// `grad_y[((s d + j) d + c) nq + q]`, `grad_x[((s d + j) d + m) nq + q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    pub values: Vec<f64>,
    pub grad_y: Vec<f64>,
    pub grad_x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSolutions {
    pub slow: TorusGrid,
    pub cell: TorusGrid,
    pub scheme: CellScheme,
    pub primal: CellSet,
    pub adjoint: CellSet,
    /// Largest relative weak residual over all solves.
    pub max_residual: f64,
    /// Largest |⟨N⟩| over all solves.
    pub max_mean: f64,
    /// max over adjacent samples of ‖N(x_i) − N(x_i')‖_{H¹} / |x_i − x_i'| (primal, adjoint).
    pub lipschitz: [f64; 2],
}

impl CellSolutions {
    pub fn dim(&self) -> usize {
        self.cell.dim
    }

    pub fn n_samples(&self) -> usize {
        self.slow.len()
    }

    pub fn slow_point(&self, s: usize) -> Point {
        self.slow.coords(s)
    }

    pub fn set(&self, adjoint: bool) -> &CellSet {
        if adjoint {
            &self.adjoint
        } else {
            &self.primal
        }
    }

    fn block(&self, s: usize, j: usize) -> usize {
        s * self.dim() + j
    }

    pub fn values(&self, adjoint: bool, s: usize, j: usize) -> &[f64] {
        let nq = self.cell.len();
        let b = self.block(s, j);
        &self.set(adjoint).values[b * nq..(b + 1) * nq]
    }

    pub fn grad_y(&self, adjoint: bool, s: usize, j: usize, c: usize) -> &[f64] {
        let nq = self.cell.len();
        let b = self.block(s, j) * self.dim() + c;
        &self.set(adjoint).grad_y[b * nq..(b + 1) * nq]
    }

    pub fn grad_x(&self, adjoint: bool, s: usize, j: usize, m: usize) -> &[f64] {
        let nq = self.cell.len();
        let b = self.block(s, j) * self.dim() + m;
        &self.set(adjoint).grad_x[b * nq..(b + 1) * nq]
    }

    /// Cell coefficients of the field at slow sample `s`.
    pub fn coefficients(&self, field: &CoefficientField, s: usize) -> CellCoefficients {
        CellCoefficients::sample(field, self.slow_point(s), &self.cell, self.scheme)
    }
}

struct Sample {
    sols: [Vec<CellSolution>; 2],
    residual: f64,
    mean: f64,
}

fn solve_sample(
    solver: &CellSolver,
    field: &CoefficientField,
    transposed: &CoefficientField,
    x: Point,
) -> Result<Sample> {
    let d = solver.grid.dim;
    let mut out = Sample {
        sols: [Vec::new(), Vec::new()],
        residual: 0.0,
        mean: 0.0,
    };
    let variants: &[&CoefficientField] = if field.symmetric {
        &[field]
    } else {
        &[field, transposed]
    };
    for (v, f) in variants.iter().enumerate() {
        let coeffs = CellCoefficients::sample(f, x, &solver.grid, solver.scheme);
        for j in 0..d {
            let sol = solver.solve(&coeffs, j, field.symmetric).map_err(|e| locate(e, x, j))?;
            out.residual = out.residual.max(solver.residual(&coeffs, j, &sol.values));
            out.mean = out.mean.max(solver.grid.mean(&sol.values).abs());
            out.sols[v].push(sol);
        }
    }
    if field.symmetric {
        out.sols[1] = out.sols[0].clone();
    }
    Ok(out)
}

/// Solves all primal and adjoint cell problems on the slow grid (in parallel over samples)
/// and differentiates them in x by periodic central differences.
pub fn build_cell_table(
    field: &CoefficientField,
    slow: TorusGrid,
    cell: TorusGrid,
    scheme: CellScheme,
    opts: SolverOptions,
) -> Result<CellSolutions> {
    check_field(field, &cell)?;
    if slow.dim != cell.dim {
        return Err(Error::Mismatch("slow and cell grids differ in dimension".into()));
    }
    let solver = CellSolver::new(cell, scheme, opts)?;
    let transposed = field.transposed();
    let samples: Vec<Sample> = (0..slow.len())
        .into_par_iter()
        .map(|s| solve_sample(&solver, field, &transposed, slow.coords(s)))
        .collect::<Result<_>>()?;

    let d = cell.dim;
    let nq = cell.len();
    let ns = slow.len();
    let mut sets = Vec::with_capacity(2);
    for v in 0..2 {
        let mut values = Vec::with_capacity(ns * d * nq);
        let mut grad_y = Vec::with_capacity(ns * d * d * nq);
        for smp in &samples {
            for sol in &smp.sols[v] {
                values.extend_from_slice(&sol.values);
                for g in &sol.grad {
                    grad_y.extend_from_slice(g);
                }
            }
        }
        let mut grad_x = vec![0.0; ns * d * d * nq];
        let half_inv = 0.5 * slow.n as f64;
        for s in 0..ns {
            for m in 0..d {
                let sp = slow.offset(s, slow.unit(m));
                let sm = slow.offset(s, [-slow.unit(m)[0], -slow.unit(m)[1]]);
                for j in 0..d {
                    let dst = ((s * d + j) * d + m) * nq;
                    let (p, q) = ((sp * d + j) * nq, (sm * d + j) * nq);
                    for k in 0..nq {
                        grad_x[dst + k] = (values[p + k] - values[q + k]) * half_inv;
                    }
                }
            }
        }
        sets.push(CellSet {
            values,
            grad_y,
            grad_x,
        });
    }
    let adjoint = sets.pop().unwrap();
    let primal = sets.pop().unwrap();
    let mut table = CellSolutions {
        slow,
        cell,
        scheme,
        primal,
        adjoint,
        max_residual: samples.iter().fold(0.0, |m, s| m.max(s.residual)),
        max_mean: samples.iter().fold(0.0, |m, s| m.max(s.mean)),
        lipschitz: [0.0; 2],
    };
    table.lipschitz = [lipschitz_quotient(&table, false), lipschitz_quotient(&table, true)];
    Ok(table)
}

fn lipschitz_quotient(t: &CellSolutions, adjoint: bool) -> f64 {
    let d = t.dim();
    let nq = t.cell.len() as f64;
    let mut best: f64 = 0.0;
    for s in 0..t.n_samples() {
        for m in 0..d {
            let sp = t.slow.offset(s, t.slow.unit(m));
            for j in 0..d {
                let mut acc = 0.0;
                let (a, b) = (t.values(adjoint, s, j), t.values(adjoint, sp, j));
                acc += a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                for c in 0..d {
                    let (a, b) = (t.grad_y(adjoint, s, j, c), t.grad_y(adjoint, sp, j, c));
                    acc += a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
                }
                best = best.max((acc / nq).sqrt() * t.slow.n as f64);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    use super::*;
    use crate::coeff::builtin_family;

    fn fam(id: &str, kv: &[(&str, f64)]) -> CoefficientField {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin_family(id, &p).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn identity_has_zero_corrector() {
        let f = fam("constant", &[]);
        let g = TorusGrid::new(2, 16).unwrap();
        for scheme in [CellScheme::Spectral, CellScheme::FiniteVolume] {
            for j in 0..2 {
                let s = solve_cell(&f, [0.3, 0.1], j, g, scheme, opts()).unwrap();
                assert!(s.values.iter().all(|v| *v == 0.0));
                let a = solve_adjoint_cell(&f, [0.3, 0.1], j, g, scheme, opts()).unwrap();
                assert!(a.values.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // N'(y) = √3 / (2 + sin 2πy) − 1
        let f = fam("periodic_only", &[]);
        let g = TorusGrid::new(1, 256).unwrap();
        let s = solve_cell(&f, [0.0; 2], 0, g, CellScheme::Spectral, opts()).unwrap();
        for q in 0..g.len() {
            let y = q as f64 / 256.0;
            let exact = 3f64.sqrt() / (2.0 + (2.0 * PI * y).sin()) - 1.0;
            assert!((s.grad[0][q] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn laminate_reduces_to_one_direction() {
        let f = fam("laminate_2d", &[]);
        let g = TorusGrid::new(2, 32).unwrap();
        let n1 = solve_cell(&f, [0.0; 2], 0, g, CellScheme::FiniteVolume, opts()).unwrap();
        for r in 0..32 {
            let row = &n1.values[r * 32..(r + 1) * 32];
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-10));
        }
        let n2 = solve_cell(&f, [0.0; 2], 1, g, CellScheme::FiniteVolume, opts()).unwrap();
        assert!(n2.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn adjoint_matches_primal_on_transposed_field() {
        let skew = fam("constant", &[("a12", 0.4), ("a21", -0.4)]);
        let g = TorusGrid::new(2, 16).unwrap();
        let x = [0.2, 0.7];
        let n = solve_adjoint_cell(&skew, x, 0, g, CellScheme::Spectral, opts()).unwrap();
        assert!(n.values.iter().all(|v| *v == 0.0));

        let f = fam("smooth_2d_nonsymmetric", &[]);
        let mut diff: f64 = 0.0;
        for j in 0..2 {
            let adj = solve_adjoint_cell(&f, x, j, g, CellScheme::Spectral, opts()).unwrap();
            let direct = solve_cell(&f.transposed(), x, j, g, CellScheme::Spectral, opts()).unwrap();
            assert_eq!(adj, direct);
            let primal = solve_cell(&f, x, j, g, CellScheme::Spectral, opts()).unwrap();
            for (a, b) in adj.values.iter().zip(&primal.values) {
                diff = diff.max((a - b).abs());
            }
        }
        assert!(diff > 1e-3, "adjoint should differ from primal, got {diff}");
    }

    #[test]
    fn table_for_periodic_family_has_no_slow_gradient() {
        let f = fam("periodic_only", &[("dim", 2.0), ("t0", 0.2)]);
        let t = build_cell_table(
            &f,
            TorusGrid::new(2, 4).unwrap(),
            TorusGrid::new(2, 16).unwrap(),
            CellScheme::Spectral,
            opts(),
        )
        .unwrap();
        assert!(t.primal.grad_x.iter().chain(&t.adjoint.grad_x).all(|v| *v == 0.0));
        assert_eq!(t.lipschitz, [0.0, 0.0]);
        assert!(t.max_residual < 1e-9);
        assert!(t.max_mean < 1e-12);
    }

    #[test]
    fn energy_bound_holds() {
        for id in ["smooth_2d_nonsymmetric", "laminate_2d"] {
            let f = fam(id, &[]);
            let g = TorusGrid::new(2, 32).unwrap();
            for j in 0..2 {
                let s = solve_cell(&f, [0.4, 0.9], j, g, f.preferred_scheme(), opts()).unwrap();
                let e: f64 = s.grad.iter().flatten().map(|v| v * v).sum::<f64>() / g.len() as f64;
                assert!(e.sqrt() <= 2f64.sqrt() / f.lambda.powi(2), "{id}");
            }
        }
    }
}
