//! Effective matrix a⁰(x), flux corrector g^j and its skew potential G^j.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::cell::{CellSolution, CellSolutions, CellSolver};
use crate::coeff::{CellScheme, CoefficientField};
use crate::error::{Error, Result};
use crate::fft::{derivative_symbol, wavenumber, TorusFft};
use crate::grid::TorusGrid;
use crate::interp::{cardinal, Interp1};
use crate::krylov::{SolveStats, SolverOptions};
use crate::mat2::{self, Mat, Point};

/// a⁰ at the slow samples, interpolated trigonometrically in between.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedField {
    pub slow: TorusGrid,
    pub a0: Vec<Mat>,
    /// Effective matrix of the transposed field, for the identity (aᵀ)⁰ = (a⁰)ᵀ.
    pub a0_adjoint: Vec<Mat>,
    /// max over adjacent samples of |a⁰(x_i) − a⁰(x_i')| / |x_i − x_i'|
    pub lipschitz: f64,
}

impl HomogenizedField {
    pub fn dim(&self) -> usize {
        self.slow.dim
    }

    /// Largest entrywise |(aᵀ)⁰ − (a⁰)ᵀ| over the samples.
    pub fn adjoint_defect(&self) -> f64 {
        self.a0
            .iter()
            .zip(&self.a0_adjoint)
            .map(|(a, b)| mat2::max_abs(mat2::sub(mat2::transpose(*a), *b)))
            .fold(0.0, f64::max)
    }

    pub fn at(&self, x: Point) -> Mat {
        let n = self.slow.n;
        let d = self.dim();
        let w0: Vec<f64> = (0..n).map(|s| cardinal(n, x[0] - s as f64 / n as f64)).collect();
        let w1: Vec<f64> = if d == 2 {
            (0..n).map(|s| cardinal(n, x[1] - s as f64 / n as f64)).collect()
        } else {
            vec![1.0]
        };
        let mut out = mat2::ZERO;
        for s in 0..self.slow.len() {
            let m = self.slow.multi(s);
            let w = w0[m[0]] * if d == 2 { w1[m[1]] } else { 1.0 };
            for i in 0..d {
                for j in 0..d {
                    out[i][j] += w * self.a0[s][i][j];
                }
            }
        }
        out
    }

    /// Entry (i, j) of a⁰ on a tensor lattice of targets.
    pub fn interpolate_entry(&self, i: usize, j: usize, ax: [&Interp1; 2], out: &mut [f64]) {
        let f: Vec<f64> = self.a0.iter().map(|m| m[i][j]).collect();
        crate::interp::interpolate(self.dim(), &f, ax, out);
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        s.push_str(if d == 1 { "x1" } else { "x1,x2" });
        for i in 0..d {
            for j in 0..d {
                let _ = write!(s, ",a0_{}{}", i + 1, j + 1);
            }
        }
        s.push('\n');
        for (k, a) in self.a0.iter().enumerate() {
            let x = self.slow.coords(k);
            let _ = write!(s, "{:.6}", x[0]);
            if d == 2 {
                let _ = write!(s, ",{:.6}", x[1]);
            }
            for row in a.iter().take(d) {
                for v in row.iter().take(d) {
                    let _ = write!(s, ",{:.15e}", v);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn solutions_at(cells: &CellSolutions, adjoint: bool, s: usize) -> Vec<CellSolution> {
    let d = cells.dim();
    (0..d)
        .map(|j| CellSolution {
            values: cells.values(adjoint, s, j).to_vec(),
            grad: (0..d).map(|c| cells.grad_y(adjoint, s, j, c).to_vec()).collect(),
            stats: SolveStats::default(),
        })
        .collect()
}

/// a⁰(x_i) e^j = ⟨a(x_i,·)(e^j + ∇_y N^j)⟩ with the quadrature of the cell scheme.
pub fn effective_matrix(cells: &CellSolutions, field: &CoefficientField) -> Result<HomogenizedField> {
    if field.dim() != cells.dim() {
        return Err(Error::Mismatch("field and cell table differ in dimension".into()));
    }
    let solver = CellSolver::new(cells.cell, cells.scheme, SolverOptions::default())?;
    let transposed = field.transposed();
    let pairs: Vec<(Mat, Mat)> = (0..cells.n_samples())
        .into_par_iter()
        .map(|s| {
            let p = solver.effective(&cells.coefficients(field, s), &solutions_at(cells, false, s));
            let a = solver.effective(&cells.coefficients(&transposed, s), &solutions_at(cells, true, s));
            (p, a)
        })
        .collect();
    let d = cells.dim();
    for (s, (a0, _)) in pairs.iter().enumerate() {
        let lam = mat2::sym_min_eig(*a0, d);
        if lam < field.lambda * (1.0 - 1e-6) {
            let x = cells.slow_point(s);
            return Err(Error::Validation(format!(
                "effective matrix at x = ({:.4}, {:.4}) has ellipticity {lam:.6e} below lambda = {:.6e}",
                x[0], x[1], field.lambda
            )));
        }
    }
    let a0: Vec<Mat> = pairs.iter().map(|p| p.0).collect();
    let a0_adjoint = pairs.iter().map(|p| p.1).collect();
    let slow = cells.slow;
    let mut lip: f64 = 0.0;
    for s in 0..slow.len() {
        for m in 0..d {
            let sp = slow.offset(s, slow.unit(m));
            lip = lip.max(mat2::norm2(mat2::sub(a0[sp], a0[s]), d) * slow.n as f64);
        }
    }
    Ok(HomogenizedField {
        slow,
        a0,
        a0_adjoint,
        lipschitz: lip,
    })
}

/// g^j = a(e^j + ∇_y N^j) − a⁰ e^j for the primal and the adjoint problem.
///
/// Layout `g[((s d + j) d + c) nq + q]`. For the finite-volume scheme the collocated flux is
/// used and its mean removed; the solenoidality checks below are meaningful for the spectral
/// scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxCorrector {
    pub slow: TorusGrid,
    pub cell: TorusGrid,
    pub g: Vec<f64>,
    pub g_adjoint: Vec<f64>,
    /// max |⟨g^j_c⟩|
    pub max_mean: f64,
    /// max ‖div_y g^j‖_{L²} (spectral divergence)
    pub max_divergence: f64,
    pub potential: Option<VectorPotential>,
}

impl FluxCorrector {
    pub fn dim(&self) -> usize {
        self.cell.dim
    }

    pub fn component(&self, adjoint: bool, s: usize, j: usize, c: usize) -> &[f64] {
        let d = self.dim();
        let nq = self.cell.len();
        let b = (s * d + j) * d + c;
        let src = if adjoint { &self.g_adjoint } else { &self.g };
        &src[b * nq..(b + 1) * nq]
    }
}

fn flux_block(cells: &CellSolutions, field: &CoefficientField, a0: Mat, adjoint: bool, s: usize) -> Vec<f64> {
    let d = cells.dim();
    let cell = cells.cell;
    let nq = cell.len();
    let x = cells.slow_point(s);
    let a: Vec<Mat> = (0..nq).map(|q| field.eval(x, cell.coords(q))).collect();
    let mut out = vec![0.0; d * d * nq];
    for j in 0..d {
        let grads: Vec<&[f64]> = (0..d).map(|k| cells.grad_y(adjoint, s, j, k)).collect();
        for c in 0..d {
            let dst = &mut out[(j * d + c) * nq..(j * d + c + 1) * nq];
            for q in 0..nq {
                let mut f = a[q][c][j];
                for k in 0..d {
                    f += a[q][c][k] * grads[k][q];
                }
                dst[q] = f;
            }
            let shift = match cells.scheme {
                CellScheme::Spectral => a0[c][j],
                CellScheme::FiniteVolume => dst.iter().sum::<f64>() / nq as f64,
            };
            dst.iter_mut().for_each(|v| *v -= shift);
        }
    }
    out
}

pub fn flux_corrector(
    cells: &CellSolutions,
    field: &CoefficientField,
    hom: &HomogenizedField,
) -> Result<FluxCorrector> {
    if hom.slow != cells.slow {
        return Err(Error::Mismatch("homogenized field built on a different slow grid".into()));
    }
    let transposed = field.transposed();
    let ns = cells.n_samples();
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..ns)
        .into_par_iter()
        .map(|s| {
            (
                flux_block(cells, field, hom.a0[s], false, s),
                flux_block(cells, &transposed, hom.a0_adjoint[s], true, s),
            )
        })
        .collect();
    let mut fc = FluxCorrector {
        slow: cells.slow,
        cell: cells.cell,
        g: blocks.iter().flat_map(|b| b.0.iter().copied()).collect(),
        g_adjoint: blocks.iter().flat_map(|b| b.1.iter().copied()).collect(),
        max_mean: 0.0,
        max_divergence: 0.0,
        potential: None,
    };
    let fft = TorusFft::new(cells.cell);
    let d = cells.dim();
    let (mut max_mean, mut max_div) = (0.0f64, 0.0f64);
    for adjoint in [false, true] {
        for s in 0..ns {
            for j in 0..d {
                let mut div = vec![0.0; cells.cell.len()];
                for c in 0..d {
                    let g = fc.component(adjoint, s, j, c);
                    max_mean = max_mean.max(cells.cell.mean(g).abs());
                    for (acc, v) in div.iter_mut().zip(fft.derivative(g, c)) {
                        *acc += v;
                    }
                }
                let l2 = (div.iter().map(|v| v * v).sum::<f64>() / div.len() as f64).sqrt();
                max_div = max_div.max(l2);
            }
        }
    }
    fc.max_mean = max_mean;
    fc.max_divergence = max_div;
    Ok(fc)
}

/// Skew potential with div_y G^j = g^j, (div G)_i = Σ_k ∂_k G_ik. In 2D only G_12 is stored,
/// G_21 = −G_12 and the diagonal vanishes; in 1D G is the zero 1×1 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorPotential {
    /// `g12[(s d + j) nq + q]`, primal then adjoint.
    pub g12: [Vec<f64>; 2],
    /// ∂_{x_m} G_12, `[((s d + j) d + m) nq + q]`.
    pub grad_x: [Vec<f64>; 2],
    /// max ‖div_y G^j − g^j‖_{L²}
    pub max_defect: f64,
    /// max ‖G^j‖_{H¹} / ‖g^j‖_{L²}
    pub h1_ratio: f64,
}

impl VectorPotential {
    /// Entry G^j_{ik} at slow sample s.
    pub fn entry(&self, adjoint: bool, cell: &TorusGrid, s: usize, j: usize, i: usize, k: usize) -> Vec<f64> {
        let nq = cell.len();
        if cell.dim == 1 || i == k {
            return vec![0.0; nq];
        }
        let b = s * cell.dim + j;
        let g = &self.g12[adjoint as usize][b * nq..(b + 1) * nq];
        if i == 0 {
            g.to_vec()
        } else {
            g.iter().map(|v| -v).collect()
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Solves Δ_y Φ_k = −g_k spectrally and sets G_ik = ∂_i Φ_k − ∂_k Φ_i.
pub fn vector_potential(mut fc: FluxCorrector) -> Result<FluxCorrector> {
    let cell = fc.cell;
    let d = cell.dim;
    let nq = cell.len();
    let ns = fc.slow.len();
    if d == 1 {
        // G = 0, so the defect is ‖g‖
        let mut worst: f64 = 0.0;
        for adjoint in [false, true] {
            for s in 0..ns {
                worst = worst.max(l2(fc.component(adjoint, s, 0, 0)));
            }
        }
        fc.potential = Some(VectorPotential {
            g12: [Vec::new(), Vec::new()],
            grad_x: [Vec::new(), Vec::new()],
            max_defect: worst,
            h1_ratio: 0.0,
        });
        return Ok(fc);
    }
    let fft = TorusFft::new(cell);
    let n = cell.n;
    let inv_lap: Vec<f64> = (0..nq)
        .map(|idx| {
            let b = fft.bins(idx);
            let k2: f64 = (0..d)
                .map(|i| (2.0 * std::f64::consts::PI * wavenumber(b[i], n) as f64).powi(2))
                .sum();
            if k2 == 0.0 {
                0.0
            } else {
                1.0 / k2
            }
        })
        .collect();
    let mut g12 = [vec![0.0; ns * d * nq], vec![0.0; ns * d * nq]];
    let mut max_defect: f64 = 0.0;
    let mut h1_ratio: f64 = 0.0;
    for adjoint in [false, true] {
        let blocks: Vec<(Vec<f64>, f64, f64)> = (0..ns * d)
            .into_par_iter()
            .map(|b| {
                let (s, j) = (b / d, b % d);
                // Φ̂_k = ĝ_k / |2πk|²
                let phi: Vec<Vec<Complex64>> = (0..d)
                    .map(|c| {
                        let mut v = fft.forward_real(fc.component(adjoint, s, j, c));
                        v.iter_mut().zip(&inv_lap).for_each(|(z, w)| *z *= w);
                        v
                    })
                    .collect();
                let mut gh: Vec<Complex64> = (0..nq)
                    .map(|idx| {
                        let bins = fft.bins(idx);
                        let i0 = Complex64::new(0.0, derivative_symbol(bins[0], n));
                        let i1 = Complex64::new(0.0, derivative_symbol(bins[1], n));
                        i0 * phi[1][idx] - i1 * phi[0][idx]
                    })
                    .collect();
                fft.inverse(&mut gh);
                let g: Vec<f64> = gh.iter().map(|z| z.re).collect();
                let div0 = fft.derivative(&g, 1);
                let div1: Vec<f64> = fft.derivative(&g, 0).iter().map(|v| -v).collect();
                let e0: Vec<f64> = div0.iter().zip(fc.component(adjoint, s, j, 0)).map(|(a, b)| a - b).collect();
                let e1: Vec<f64> = div1.iter().zip(fc.component(adjoint, s, j, 1)).map(|(a, b)| a - b).collect();
                let defect = (l2(&e0).powi(2) + l2(&e1).powi(2)).sqrt();
                // G has two nonzero entries, each equal to ±G_12
                let h1 = (2.0 * (l2(&g).powi(2) + l2(&div0).powi(2) + l2(&fft.derivative(&g, 0)).powi(2))).sqrt();
                let gn = (l2(fc.component(adjoint, s, j, 0)).powi(2) + l2(fc.component(adjoint, s, j, 1)).powi(2)).sqrt();
                let ratio = if gn > 1e-14 { h1 / gn } else { 0.0 };
                (g, defect, ratio)
            })
            .collect();
        for (b, (g, defect, ratio)) in blocks.into_iter().enumerate() {
            g12[adjoint as usize][b * nq..(b + 1) * nq].copy_from_slice(&g);
            max_defect = max_defect.max(defect);
            h1_ratio = h1_ratio.max(ratio);
        }
    }
    let slow = fc.slow;
    let half = 0.5 * slow.n as f64;
    let grad_x = [0, 1].map(|v| {
        let src = &g12[v];
        let mut out = vec![0.0; ns * d * d * nq];
        for s in 0..ns {
            for m in 0..d {
                let sp = slow.offset(s, slow.unit(m));
                let sm = slow.offset(s, [-slow.unit(m)[0], -slow.unit(m)[1]]);
                for j in 0..d {
                    let dst = ((s * d + j) * d + m) * nq;
                    for q in 0..nq {
                        out[dst + q] = (src[(sp * d + j) * nq + q] - src[(sm * d + j) * nq + q]) * half;
                    }
                }
            }
        }
        out
    });
    fc.potential = Some(VectorPotential {
        g12,
        grad_x,
        max_defect,
        h1_ratio,
    });
    Ok(fc)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::cell::build_cell_table;
    use crate::coeff::builtin_family;

    fn table(id: &str, kv: &[(&str, f64)], n_x: usize, n_y: usize) -> (CoefficientField, CellSolutions) {
        let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let f = builtin_family(id, &p).unwrap();
        let d = f.dim();
        let t = build_cell_table(
            &f,
            TorusGrid::new(d, n_x).unwrap(),
            TorusGrid::new(d, n_y).unwrap(),
            f.preferred_scheme(),
            SolverOptions::default(),
        )
        .unwrap();
        (f, t)
    }

    #[test]
    fn constant_matrix_is_its_own_effective_matrix() {
        let (f, t) = table("constant", &[("a11", 2.0), ("a12", 0.3), ("a21", -0.1), ("a22", 1.5)], 4, 8);
        let h = effective_matrix(&t, &f).unwrap();
        for a in &h.a0 {
            assert!(mat2::max_abs(mat2::sub(*a, [[2.0, 0.3], [-0.1, 1.5]])) < 1e-14);
        }
        let fc = vector_potential(flux_corrector(&t, &f, &h).unwrap()).unwrap();
        assert!(fc.g.iter().chain(&fc.g_adjoint).all(|v| v.abs() < 1e-14));
        let p = fc.potential.unwrap();
        assert!(p.g12[0].iter().chain(&p.g12[1]).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn separable_effective_coefficient() {
        // a⁰(x) = √3 (1 + sin(2πx) / 2)
        let (f, t) = table("separable_1d", &[], 8, 64);
        let h = effective_matrix(&t, &f).unwrap();
        for x in [0.0, 0.1, 0.37, 0.8] {
            let exact = 3f64.sqrt() * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin());
            assert!((h.at([x, 0.0])[0][0] - exact).abs() < 1e-10);
        }
        let fc = vector_potential(flux_corrector(&t, &f, &h).unwrap()).unwrap();
        // the one-dimensional flux is constant
        assert!(fc.g.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn nonsymmetric_identities() {
        let (f, t) = table("smooth_2d_nonsymmetric", &[], 4, 32);
        let h = effective_matrix(&t, &f).unwrap();
        assert!(h.adjoint_defect() < 1e-9, "{}", h.adjoint_defect());
        assert!(h.lipschitz > 0.0);
        let fc = vector_potential(flux_corrector(&t, &f, &h).unwrap()).unwrap();
        assert!(fc.max_mean < 1e-12);
        assert!(fc.max_divergence < 1e-8);
        let p = fc.potential.as_ref().unwrap();
        assert!(p.max_defect < 1e-8, "{}", p.max_defect);
        let g12 = p.entry(false, &t.cell, 1, 0, 0, 1);
        let g21 = p.entry(false, &t.cell, 1, 0, 1, 0);
        assert!(g12.iter().zip(&g21).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let (f, t) = table("laminate_2d", &[], 4, 16);
        let h = effective_matrix(&t, &f).unwrap();
        let csv = h.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x1,x2,a0_11,a0_12,a0_21,a0_22"));
        assert_eq!(lines.count(), 16);
    }
}
