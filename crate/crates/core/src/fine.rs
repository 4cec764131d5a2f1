//! Fine-grid operators A_ε + 1, A₀ + 1 and their resolvents.

use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::fft::TorusFft;
use crate::grid::{dot, forward_diff, TorusGrid};
use crate::homogenize::HomogenizedField;
use crate::interp::Interp1;
use crate::krylov::{bicgstab, cg, SolverOptions, SpectralPreconditioner};
use crate::linop::{DiscreteOperator, StencilOp};
use crate::stencil::{FvCoefficients, Stencil};

/// Fine torus grid with `n_f` points per ε-cell, ε = 1/k.
pub fn fine_grid(dim: usize, k: usize, n_f: usize) -> Result<TorusGrid> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("eps = 1/{k} requires k >= 2")));
    }
    if n_f < 8 || !n_f.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "n_f = {n_f} must be even and at least 8 points per eps-cell"
        )));
    }
    TorusGrid::new(dim, n_f * k)
}

/// An assembled finite-volume operator −div b∇ + 1.
#[derive(Clone, Debug)]
pub struct FvOperator {
    pub stencil: Stencil,
    pub mean_diagonal: [f64; 2],
    pub symmetric: bool,
}

impl FvOperator {
    fn from_coefficients(grid: TorusGrid, c: &FvCoefficients) -> Self {
        let stencil = Stencil::assemble(grid, c, 1.0);
        let symmetric = grid.dim == 1 || c.center.iter().all(|v| v[0] == v[1]);
        FvOperator {
            stencil,
            mean_diagonal: c.mean_diagonal(),
            symmetric,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.stencil.grid
    }
}

/// A_ε + 1 for a(x, x/ε) with coefficients at face midpoints and cell centres. The fast
/// coordinate is computed in integers, so a(x, x/ε) is exactly ε-periodic in its second slot.
pub fn assemble_fine(field: &CoefficientField, k: usize, n_f: usize) -> Result<FvOperator> {
    let grid = fine_grid(field.dim(), k, n_f)?;
    let two_n = (2 * grid.n) as f64;
    let period = 2 * n_f;
    let c = FvCoefficients::sample(&grid, |hx| {
        let x = [hx[0] as f64 / two_n, hx[1] as f64 / two_n];
        let y = [
            (hx[0] % period) as f64 / period as f64,
            (hx[1] % period) as f64 / period as f64,
        ];
        field.eval(x, y)
    });
    Ok(FvOperator::from_coefficients(grid, &c))
}

/// A₀ + 1 with a⁰ interpolated trigonometrically to faces and centres.
pub fn assemble_homogenized(hom: &HomogenizedField, grid: TorusGrid) -> Result<FvOperator> {
    let d = hom.dim();
    if grid.dim != d {
        return Err(Error::Mismatch("homogenized field and grid differ in dimension".into()));
    }
    let (n, nx) = (grid.n, hom.slow.n);
    let node = Interp1::lattice(nx, n, 0, 0, 1, n);
    let half = Interp1::lattice(nx, n, 1, 0, 1, n);
    let mut c = FvCoefficients {
        face: vec![vec![0.0; grid.len()]; d],
        center: Vec::new(),
    };
    if d == 1 {
        hom.interpolate_entry(0, 0, [&half, &half], &mut c.face[0]);
    } else {
        hom.interpolate_entry(0, 0, [&half, &node], &mut c.face[0]);
        hom.interpolate_entry(1, 1, [&node, &half], &mut c.face[1]);
        let mut a01 = vec![0.0; grid.len()];
        let mut a10 = vec![0.0; grid.len()];
        hom.interpolate_entry(0, 1, [&half, &half], &mut a01);
        hom.interpolate_entry(1, 0, [&half, &half], &mut a10);
        c.center = a01.into_iter().zip(a10).map(|(p, q)| [p, q]).collect();
    }
    Ok(FvOperator::from_coefficients(grid, &c))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResolventStats {
    pub solves: usize,
    pub iterations: usize,
    pub max_residual: f64,
    /// max ‖u‖_{H¹} / ‖f‖_{L²} over all solves
    pub max_energy_ratio: f64,
}

enum Backend {
    /// Row-major inverse.
    Dense(Vec<f64>),
    Krylov {
        backward: Stencil,
        precond: SpectralPreconditioner,
    },
}

/// (A + 1)⁻¹ as a dense inverse up to `dense_limit` unknowns, by Krylov solves above.
pub struct Resolvent {
    op: FvOperator,
    backend: Backend,
    opts: SolverOptions,
    stats: Mutex<ResolventStats>,
}

impl Resolvent {
    pub fn new(op: FvOperator, dense_limit: usize, opts: SolverOptions) -> Result<Self> {
        let g = op.grid();
        let n = g.len();
        let backend = if n <= dense_limit {
            let m = DMatrix::from_row_slice(n, n, &op.stencil.to_dense());
            let inv = m.try_inverse().ok_or_else(|| Error::NoConvergence {
                what: "dense resolvent inverse".into(),
                iterations: 0,
                residual: f64::NAN,
            })?;
            // nalgebra is column-major, so its storage is the row-major transpose
            Backend::Dense(inv.transpose().as_slice().to_vec())
        } else {
            let fft = TorusFft::new(g);
            let nn = g.n;
            let ad = op.mean_diagonal;
            let precond = SpectralPreconditioner::new(fft, move |b| {
                let mut s = 1.0;
                for i in 0..g.dim {
                    let w = 2.0 * nn as f64 * (std::f64::consts::PI * b[i] as f64 / nn as f64).sin();
                    s += ad[i] * w * w;
                }
                s
            });
            Backend::Krylov {
                backward: op.stencil.transpose(),
                precond,
            }
        };
        Ok(Resolvent {
            op,
            backend,
            opts,
            stats: Mutex::new(ResolventStats::default()),
        })
    }

    pub fn operator(&self) -> &FvOperator {
        &self.op
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    pub fn stats(&self) -> ResolventStats {
        *self.stats.lock().unwrap()
    }

    fn record(&self, f: &[f64], u: &[f64], iterations: usize, residual: f64) {
        let g = self.op.grid();
        let fn2 = dot(f, f);
        let mut e = dot(u, u);
        let mut du = vec![0.0; u.len()];
        for i in 0..g.dim {
            forward_diff(&g, i, u, &mut du);
            e += dot(&du, &du);
        }
        let ratio = if fn2 > 0.0 { (e / fn2).sqrt() } else { 0.0 };
        let mut s = self.stats.lock().unwrap();
        s.solves += 1;
        s.iterations += iterations;
        s.max_residual = s.max_residual.max(residual);
        s.max_energy_ratio = s.max_energy_ratio.max(ratio);
    }

    fn run(&self, b: &[f64], x: &mut [f64], transpose: bool) -> Result<()> {
        let n = self.op.grid().len();
        if b.len() != n || x.len() != n {
            return Err(Error::Mismatch(format!("resolvent on {n} nodes applied to {} -> {}", b.len(), x.len())));
        }
        match &self.backend {
            Backend::Dense(inv) => {
                if transpose {
                    x.iter_mut().for_each(|v| *v = 0.0);
                    for (i, &bi) in b.iter().enumerate() {
                        for (xj, a) in x.iter_mut().zip(&inv[i * n..(i + 1) * n]) {
                            *xj += a * bi;
                        }
                    }
                } else {
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = dot(&inv[i * n..(i + 1) * n], b);
                    }
                }
                self.record(b, x, 0, 0.0);
            }
            Backend::Krylov { backward, precond } => {
                let st = if transpose { backward } else { &self.op.stencil };
                let a = |u: &[f64], y: &mut [f64]| st.apply(u, y);
                let m = |r: &[f64], z: &mut [f64]| precond.apply(r, z);
                x.iter_mut().for_each(|v| *v = 0.0);
                let what = if transpose { "transposed fine solve" } else { "fine solve" };
                let stats = if self.op.symmetric {
                    cg(&a, &m, b, x, self.opts, what)?
                } else {
                    bicgstab(&a, &m, b, x, self.opts, what)?
                };
                self.record(b, x, stats.iterations, stats.residual);
            }
        }
        Ok(())
    }
}

impl DiscreteOperator for Resolvent {
    fn rows(&self) -> usize {
        self.op.grid().len()
    }
    fn cols(&self) -> usize {
        self.op.grid().len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.run(x, y, false)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.run(x, y, true)
    }
}

impl FvOperator {
    pub fn as_operator(&self) -> StencilOp {
        StencilOp::new(self.stencil.clone())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    use super::*;
    use crate::cell::build_cell_table;
    use crate::coeff::builtin_family;
    use crate::grid::GridFunction;
    use crate::homogenize::effective_matrix;
    use crate::linop::transpose_defect;
    use crate::norm::{operator_norm, PowerOptions};

    fn family(id: &str) -> CoefficientField {
        builtin_family(id, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn identity_gives_shifted_laplacian() {
        let p: BTreeMap<String, f64> = BTreeMap::new();
        let f = builtin_family("constant", &p).unwrap();
        let op = assemble_fine(&f, 2, 8).unwrap();
        let n = op.grid().len();
        let mut y = vec![0.0; n];
        op.stencil.apply(&vec![1.0; n], &mut y);
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(op.symmetric && op.stencil.is_symmetric(0.0));
    }

    #[test]
    fn sine_eigenpair_in_both_backends() {
        let f = family("constant");
        for limit in [0, 100_000] {
            let op = assemble_fine(&f, 2, 8).unwrap();
            let g = op.grid();
            let r = Resolvent::new(op, limit, SolverOptions::default()).unwrap();
            assert_eq!(r.is_dense(), limit > 0);
            let rhs = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).sin());
            let mut u = vec![0.0; g.len()];
            r.apply(&rhs.values, &mut u).unwrap();
            let lam = (2.0 * g.n as f64 * (PI / g.n as f64).sin()).powi(2) + 1.0;
            for (a, b) in u.iter().zip(&rhs.values) {
                assert!((a - b / lam).abs() < 1e-9);
            }
            // the discrete symbol is 4π² + 1 up to O(h²)
            let h2 = (PI / g.n as f64).powi(2);
            assert!((lam - 1.0 - 4.0 * PI * PI).abs() <= 4.0 * PI * PI * h2 / 3.0);
            let mut z = vec![1.0; g.len()];
            r.apply(&vec![0.0; g.len()], &mut z).unwrap();
            assert!(z.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn transposed_field_gives_transposed_operator() {
        let f = family("smooth_2d_nonsymmetric");
        let a = assemble_fine(&f, 2, 8).unwrap();
        let at = assemble_fine(&f.transposed(), 2, 8).unwrap();
        assert!(!a.symmetric);
        let d1 = a.stencil.transpose().to_dense();
        let d2 = at.stencil.to_dense();
        let scale = d1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d1.iter().zip(&d2).all(|(p, q)| (p - q).abs() <= 1e-14 * scale));
    }

    #[test]
    fn nonsymmetric_krylov_matches_dense() {
        let f = family("smooth_2d_nonsymmetric");
        let op = assemble_fine(&f, 2, 8).unwrap();
        let dense = Resolvent::new(op.clone(), 10_000, SolverOptions::default()).unwrap();
        let kry = Resolvent::new(op, 0, SolverOptions::default()).unwrap();
        let n = dense.rows();
        let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for t in [false, true] {
            let (mut x, mut y) = (vec![0.0; n], vec![0.0; n]);
            dense.run(&b, &mut x, t).unwrap();
            kry.run(&b, &mut y, t).unwrap();
            let err = x.iter().zip(&y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(err < 1e-8, "{err}");
        }
        assert!(transpose_defect(&kry, 2).unwrap() < 1e-9);
        assert!(transpose_defect(&dense, 2).unwrap() < 1e-13);
        assert!(kry.stats().iterations > 0);
    }

    #[test]
    fn resolvent_is_a_contraction_and_coercive() {
        let f = family("separable_1d");
        let op = assemble_fine(&f, 4, 16).unwrap();
        let g = op.grid();
        let mut au = vec![0.0; g.len()];
        let u: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        op.stencil.apply(&u, &mut au);
        let mut du = vec![0.0; g.len()];
        forward_diff(&g, 0, &u, &mut du);
        assert!(dot(&au, &u) >= dot(&u, &u) + f.lambda * dot(&du, &du));
        let r = Resolvent::new(op, 4096, SolverOptions::default()).unwrap();
        let nrm = operator_norm(&r, PowerOptions::default()).unwrap().value;
        assert!(nrm <= 1.0 + 1e-12 && nrm > 0.99);
    }

    #[test]
    fn homogenized_operator_from_constant_a0() {
        let p: BTreeMap<String, f64> = [("a12".to_string(), 0.2), ("a21".to_string(), -0.3)].into();
        let f = builtin_family("constant", &p).unwrap();
        let t = build_cell_table(
            &f,
            TorusGrid::new(2, 4).unwrap(),
            TorusGrid::new(2, 8).unwrap(),
            f.preferred_scheme(),
            SolverOptions::default(),
        )
        .unwrap();
        let h = effective_matrix(&t, &f).unwrap();
        let g = TorusGrid::new(2, 16).unwrap();
        let a0 = assemble_homogenized(&h, g).unwrap();
        let direct = assemble_fine(&f, 2, 8).unwrap();
        let (p1, p2) = (a0.stencil.to_dense(), direct.stencil.to_dense());
        assert!(p1.iter().zip(&p2).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn homogenized_transpose_equals_assembly_from_transpose() {
        let f = family("smooth_2d_nonsymmetric");
        let t = build_cell_table(
            &f,
            TorusGrid::new(2, 4).unwrap(),
            TorusGrid::new(2, 16).unwrap(),
            f.preferred_scheme(),
            SolverOptions::default(),
        )
        .unwrap();
        let h = effective_matrix(&t, &f).unwrap();
        let mut ht = h.clone();
        ht.a0 = h.a0.iter().map(|a| crate::mat2::transpose(*a)).collect();
        let g = TorusGrid::new(2, 16).unwrap();
        let a = assemble_homogenized(&h, g).unwrap().stencil.transpose().to_dense();
        let b = assemble_homogenized(&ht, g).unwrap().stencil.to_dense();
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn fine_solve_self_converges() {
        // 1D separable family with f = cos 2πx: the error against the doubled grid drops ~4x
        let f = family("separable_1d");
        let solve = |n_f: usize| {
            let op = assemble_fine(&f, 4, n_f).unwrap();
            let g = op.grid();
            let r = Resolvent::new(op, 4096, SolverOptions::default()).unwrap();
            let rhs = GridFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos());
            let mut u = vec![0.0; g.len()];
            r.apply(&rhs.values, &mut u).unwrap();
            u
        };
        let (u1, u2, u3) = (solve(8), solve(16), solve(32));
        let e1 = (0..u1.len()).fold(0.0f64, |m, i| m.max((u1[i] - u2[2 * i]).abs()));
        let e2 = (0..u2.len()).fold(0.0f64, |m, i| m.max((u2[i] - u3[2 * i]).abs()));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }
}
