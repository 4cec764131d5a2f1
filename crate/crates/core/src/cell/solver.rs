use rustfft::num_complex::Complex64;

use crate::coeff::{CellScheme, CoefficientField};
use crate::error::{Error, Result};
use crate::fft::{derivative_symbol, TorusFft};
use crate::grid::{centered_diff, norm, TorusGrid};
use crate::krylov::{bicgstab, cg, SolveStats, SolverOptions, SpectralPreconditioner};
use crate::mat2::{self, Mat, Point};
use crate::stencil::{FvCoefficients, Stencil};

/// Coefficients of one cell problem, a(x, ·) at a fixed slow point.
#[derive(Clone, Debug)]
pub enum CellCoefficients {
    /// Values at the cell nodes (spectral collocation).
    Nodal(Vec<Mat>),
    /// Face and centre samples (finite volumes).
    Fv(FvCoefficients),
}

impl CellCoefficients {
    pub fn sample(field: &CoefficientField, x: Point, grid: &TorusGrid, scheme: CellScheme) -> Self {
        match scheme {
            CellScheme::Spectral => {
                CellCoefficients::Nodal((0..grid.len()).map(|q| field.eval(x, grid.coords(q))).collect())
            }
            CellScheme::FiniteVolume => {
                let two_n = (2 * grid.n) as f64;
                CellCoefficients::Fv(FvCoefficients::sample(grid, |hx| {
                    field.eval(x, [hx[0] as f64 / two_n, hx[1] as f64 / two_n])
                }))
            }
        }
    }
}

/// A cell solution with its nodal y-gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSolution {
    pub values: Vec<f64>,
    pub grad: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

/// Solver for div_y[a(e^j + ∇N)] = 0 with zero mean, on a fixed cell grid.
#[derive(Clone, Debug)]
pub struct CellSolver {
    pub grid: TorusGrid,
    pub scheme: CellScheme,
    pub opts: SolverOptions,
    fft: TorusFft,
}

impl CellSolver {
    pub fn new(grid: TorusGrid, scheme: CellScheme, opts: SolverOptions) -> Result<Self> {
        if grid.n < 8 {
            return Err(Error::InvalidParameter(format!("cell grid n_y = {} < 8", grid.n)));
        }
        Ok(CellSolver {
            grid,
            scheme,
            opts,
            fft: TorusFft::new(grid),
        })
    }

    fn spectral_apply(&self, a: &[Mat], u: &[f64], out: &mut [f64]) {
        let d = self.grid.dim;
        let uh = self.fft.forward_real(u);
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(d);
        for k in 0..d {
            let mut c = uh.clone();
            self.fft.apply_derivative(&mut c, k);
            self.fft.inverse(&mut c);
            grads.push(c.iter().map(|v| v.re).collect());
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); u.len()];
        for i in 0..d {
            let mut flux: Vec<Complex64> = (0..u.len())
                .map(|q| {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += a[q][i][k] * grads[k][q];
                    }
                    Complex64::new(s, 0.0)
                })
                .collect();
            self.fft.forward(&mut flux);
            // D_iᵀ = −D_i
            self.fft.apply_derivative(&mut flux, i);
            for (s, f) in acc.iter_mut().zip(&flux) {
                *s -= f;
            }
        }
        self.fft.inverse(&mut acc);
        for (o, v) in out.iter_mut().zip(&acc) {
            *o = v.re;
        }
    }

    fn spectral_rhs(&self, a: &[Mat], j: usize) -> Vec<f64> {
        let d = self.grid.dim;
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for i in 0..d {
            let mut f: Vec<Complex64> = a.iter().map(|m| Complex64::new(m[i][j], 0.0)).collect();
            self.fft.forward(&mut f);
            self.fft.apply_derivative(&mut f, i);
            // −D_iᵀ(a_ij) = D_i(a_ij)
            for (s, v) in acc.iter_mut().zip(&f) {
                *s += v;
            }
        }
        self.fft.inverse(&mut acc);
        acc.iter().map(|v| v.re).collect()
    }

    /// Removes the components the operator cannot see: the mean and, for the spectral
    /// scheme, the pure Nyquist modes.
    fn project(&self, u: &mut [f64]) {
        match self.scheme {
            CellScheme::FiniteVolume => {
                let m = self.grid.mean(u);
                u.iter_mut().for_each(|v| *v -= m);
            }
            CellScheme::Spectral => {
                let mut c = self.fft.forward_real(u);
                for (idx, v) in c.iter_mut().enumerate() {
                    if self.fft.is_pure_nyquist(idx) {
                        *v = Complex64::new(0.0, 0.0);
                    }
                }
                self.fft.inverse(&mut c);
                for (o, v) in u.iter_mut().zip(&c) {
                    *o = v.re;
                }
            }
        }
    }

    fn preconditioner(&self, coeffs: &CellCoefficients) -> SpectralPreconditioner {
        let d = self.grid.dim;
        let n = self.grid.n;
        match coeffs {
            CellCoefficients::Nodal(a) => {
                let mut mean = [0.0; 2];
                for m in a {
                    for i in 0..d {
                        mean[i] += m[i][i] / a.len() as f64;
                    }
                }
                SpectralPreconditioner::new(self.fft.clone(), move |b| {
                    (0..d).map(|i| mean[i] * derivative_symbol(b[i], n).powi(2)).sum()
                })
            }
            CellCoefficients::Fv(c) => {
                let mean = c.mean_diagonal();
                SpectralPreconditioner::new(self.fft.clone(), move |b| {
                    (0..d)
                        .map(|i| {
                            let s = 2.0 * n as f64 * (std::f64::consts::PI * b[i] as f64 / n as f64).sin();
                            mean[i] * s * s
                        })
                        .sum()
                })
            }
        }
    }

    /// Operator and right-hand side of the j-th problem as closures over owned data.
    fn system(&self, coeffs: &CellCoefficients, j: usize) -> (Box<dyn Fn(&[f64], &mut [f64]) + '_>, Vec<f64>) {
        match coeffs {
            CellCoefficients::Nodal(a) => {
                let rhs = self.spectral_rhs(a, j);
                let a = a.clone();
                (Box::new(move |u: &[f64], o: &mut [f64]| self.spectral_apply(&a, u, o)), rhs)
            }
            CellCoefficients::Fv(c) => {
                let st = Stencil::assemble(self.grid, c, 0.0);
                let rhs = fv_rhs(&self.grid, c, j);
                (Box::new(move |u: &[f64], o: &mut [f64]| st.apply(u, o)), rhs)
            }
        }
    }

    /// Residual ‖A N + B(y_j)‖ / ‖B(y_j)‖ of the discrete weak form.
    pub fn residual(&self, coeffs: &CellCoefficients, j: usize, sol: &[f64]) -> f64 {
        let (op, rhs) = self.system(coeffs, j);
        let mut au = vec![0.0; sol.len()];
        op(sol, &mut au);
        let rn = norm(&rhs);
        if rn == 0.0 {
            return norm(&au);
        }
        let diff: Vec<f64> = au.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        norm(&diff) / rn
    }

    pub fn solve(&self, coeffs: &CellCoefficients, j: usize, symmetric: bool) -> Result<CellSolution> {
        let (op, rhs) = self.system(coeffs, j);
        let pre = self.preconditioner(coeffs);
        let m = |r: &[f64], z: &mut [f64]| pre.apply(r, z);
        let mut u = vec![0.0; self.grid.len()];
        let what = format!("{} cell problem j = {}", self.scheme.name(), j + 1);
        let stats = if symmetric {
            cg(&*op, &m, &rhs, &mut u, self.opts, &what)?
        } else {
            bicgstab(&*op, &m, &rhs, &mut u, self.opts, &what)?
        };
        self.project(&mut u);
        let grad = self.gradient(&u);
        Ok(CellSolution {
            values: u,
            grad,
            stats,
        })
    }

    /// Nodal gradient: spectral derivative, or centered differences for finite volumes.
    pub fn gradient(&self, u: &[f64]) -> Vec<Vec<f64>> {
        (0..self.grid.dim)
            .map(|i| match self.scheme {
                CellScheme::Spectral => self.fft.derivative(u, i),
                CellScheme::FiniteVolume => {
                    let mut g = vec![0.0; u.len()];
                    centered_diff(&self.grid, i, u, &mut g);
                    g
                }
            })
            .collect()
    }

    /// Effective matrix from the d solutions, using the quadrature that matches the scheme.
    pub fn effective(&self, coeffs: &CellCoefficients, sols: &[CellSolution]) -> Mat {
        let d = self.grid.dim;
        let mut a0 = mat2::ZERO;
        match coeffs {
            CellCoefficients::Nodal(a) => {
                let len = a.len() as f64;
                for (j, s) in sols.iter().enumerate() {
                    for i in 0..d {
                        let mut acc = 0.0;
                        for q in 0..a.len() {
                            let mut f = a[q][i][j];
                            for k in 0..d {
                                f += a[q][i][k] * s.grad[k][q];
                            }
                            acc += f;
                        }
                        a0[i][j] = acc / len;
                    }
                }
            }
            CellCoefficients::Fv(c) => {
                let g = &self.grid;
                let len = g.len() as f64;
                for (j, s) in sols.iter().enumerate() {
                    for i in 0..d {
                        let mut du = vec![0.0; g.len()];
                        crate::grid::forward_diff(g, i, &s.values, &mut du);
                        let mut acc: f64 = 0.0;
                        for q in 0..g.len() {
                            acc += c.face[i][q] * (if i == j { 1.0 } else { 0.0 } + du[q]);
                        }
                        if d == 2 {
                            let k = 1 - i;
                            let gk = cross_gradient(g, k, &s.values);
                            for q in 0..g.len() {
                                let aik = c.center[q][i];
                                acc += aik * (if k == j { 1.0 } else { 0.0 } + gk[q]);
                            }
                        }
                        a0[i][j] = acc / len;
                    }
                }
            }
        }
        a0
    }
}

/// Averaged cross gradient Ĝ_k at cell centres.
pub(crate) fn cross_gradient(g: &TorusGrid, k: usize, u: &[f64]) -> Vec<f64> {
    let n = g.n;
    let h = 0.5 * n as f64;
    let mut out = vec![0.0; g.len()];
    for r in 0..n {
        let rn = (r + 1) % n;
        for c in 0..n {
            let cn = (c + 1) % n;
            let (u00, u10, u01, u11) = (u[r * n + c], u[rn * n + c], u[r * n + cn], u[rn * n + cn]);
            out[r * n + c] = if k == 0 {
                h * ((u10 - u00) + (u11 - u01))
            } else {
                h * ((u01 - u00) + (u11 - u10))
            };
        }
    }
    out
}

/// −[D_jᵀ a_jj + Σ_{i≠j} Ĝ_iᵀ a_ij], the load of the j-th finite-volume cell problem.
fn fv_rhs(g: &TorusGrid, c: &FvCoefficients, j: usize) -> Vec<f64> {
    let mut rhs = vec![0.0; g.len()];
    crate::grid::forward_diff_transpose_add(g, j, &c.face[j], -1.0, &mut rhs);
    if g.dim == 2 {
        let i = 1 - j;
        let n = g.n;
        let h = 0.5 * n as f64;
        // Ĝ_iᵀ w: scatter the centre value back to the four corners
        for r in 0..n {
            let rn = (r + 1) % n;
            for col in 0..n {
                let cn = (col + 1) % n;
                let w = -c.center[r * n + col][i] * h;
                let (k00, k10, k01, k11) = (r * n + col, rn * n + col, r * n + cn, rn * n + cn);
                if i == 0 {
                    rhs[k10] += w;
                    rhs[k00] -= w;
                    rhs[k11] += w;
                    rhs[k01] -= w;
                } else {
                    rhs[k01] += w;
                    rhs[k00] -= w;
                    rhs[k11] += w;
                    rhs[k10] -= w;
                }
            }
        }
    }
    rhs
}
