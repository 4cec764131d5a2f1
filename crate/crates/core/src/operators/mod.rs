//! Smoothed correctors, corrector coefficient tensors, the operators L and M, and the full
//! corrector 𝒞_ε = 𝒦_ε + 𝒦̃_ε* − 𝓛 − 𝓜_ε.

mod chain;
mod chat;
mod errors;
mod two_scale;

pub use chain::{assemble_l, DiffChain, Factor};
pub use chat::{assemble_m, double_averaged_matrix, DoubleAveraged};
pub use errors::{full_corrector, CorrectorOperators, ErrorKind, ErrorOperators};
pub use chain::l_chain;
pub use chat::m_chain;
pub use two_scale::{corrector_k, corrector_ktilde, residue, SmoothedCorrector, TwoScaleTable};

use rayon::prelude::*;

use crate::cell::CellSolutions;
use crate::coeff::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::homogenize::{FluxCorrector, HomogenizedField};

/// Per slow sample s:
/// `c3[((s d + j) d + k) d + m] = c^{jk}_m = ⟨g^j_m Ñ^k⟩`,
/// `c2[(s d + j) d + k] = c^{jk} = ⟨g^j · ∇_x Ñ^k⟩`,
/// `ct3[((s d + k) d + j) d + m] = c̃^{kj}_m = ⟨g̃^k_m N^j⟩`,
/// `ct2[(s d + k) d + j] = c̃^{kj} = ⟨g̃^k · ∇_x N^j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorCoeffs {
    pub slow: TorusGrid,
    pub c3: Vec<f64>,
    pub c2: Vec<f64>,
    pub ct3: Vec<f64>,
    pub ct2: Vec<f64>,
    /// c^{jk}_m by the closed form ⟨Ñ^k a(∇_y N^j + e^j)⟩·e^m.
    pub c3_closed_form: Vec<f64>,
    /// max over (s, j, k, m) of ⟨|Ñ^k| |a(e^j + ∇_y N^j)·e^m|⟩
    pub c3_scale: f64,
}

impl CorrectorCoeffs {
    pub fn dim(&self) -> usize {
        self.slow.dim
    }

    /// max |definition − closed form| / c3_scale.
    pub fn closed_form_defect(&self) -> f64 {
        let diff = self
            .c3
            .iter()
            .zip(&self.c3_closed_form)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if self.c3_scale == 0.0 {
            diff
        } else {
            diff / self.c3_scale
        }
    }

    pub fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

pub fn corrector_coeffs(
    cells: &CellSolutions,
    fc: &FluxCorrector,
    field: &CoefficientField,
    hom: &HomogenizedField,
) -> Result<CorrectorCoeffs> {
    if fc.slow != cells.slow || hom.slow != cells.slow || fc.cell != cells.cell {
        return Err(Error::Mismatch("corrector inputs built on different grids".into()));
    }
    let d = cells.dim();
    let nq = cells.cell.len();
    let ns = cells.n_samples();
    struct Block {
        c3: Vec<f64>,
        c2: Vec<f64>,
        ct3: Vec<f64>,
        ct2: Vec<f64>,
        closed: Vec<f64>,
        scale: f64,
    }
    let blocks: Vec<Block> = (0..ns)
        .into_par_iter()
        .map(|s| {
            let mut b = Block {
                c3: vec![0.0; d * d * d],
                c2: vec![0.0; d * d],
                ct3: vec![0.0; d * d * d],
                ct2: vec![0.0; d * d],
                closed: vec![0.0; d * d * d],
                scale: 0.0,
            };
            let x = cells.slow_point(s);
            let a: Vec<_> = (0..nq).map(|q| field.eval(x, cells.cell.coords(q))).collect();
            for j in 0..d {
                for k in 0..d {
                    let nt = cells.values(true, s, k);
                    let n = cells.values(false, s, j);
                    for m in 0..d {
                        b.c3[(j * d + k) * d + m] = mean_product(fc.component(false, s, j, m), nt);
                        b.ct3[(k * d + j) * d + m] = mean_product(fc.component(true, s, k, m), n);
                        b.c2[j * d + k] += mean_product(fc.component(false, s, j, m), cells.grad_x(true, s, k, m));
                        b.ct2[k * d + j] += mean_product(fc.component(true, s, k, m), cells.grad_x(false, s, j, m));
                        let mut acc = 0.0;
                        let mut mag = 0.0;
                        for q in 0..nq {
                            let mut flux = a[q][m][j];
                            for c in 0..d {
                                flux += a[q][m][c] * cells.grad_y(false, s, j, c)[q];
                            }
                            acc += nt[q] * flux;
                            mag += (nt[q] * flux).abs();
                        }
                        b.closed[(j * d + k) * d + m] = acc / nq as f64;
                        b.scale = b.scale.max(mag / nq as f64);
                    }
                }
            }
            b
        })
        .collect();
    let mut out = CorrectorCoeffs {
        slow: cells.slow,
        c3: Vec::with_capacity(ns * d * d * d),
        c2: Vec::with_capacity(ns * d * d),
        ct3: Vec::with_capacity(ns * d * d * d),
        ct2: Vec::with_capacity(ns * d * d),
        c3_closed_form: Vec::with_capacity(ns * d * d * d),
        c3_scale: 0.0,
    };
    for b in blocks {
        out.c3.extend(b.c3);
        out.c2.extend(b.c2);
        out.ct3.extend(b.ct3);
        out.ct2.extend(b.ct2);
        out.c3_closed_form.extend(b.closed);
        out.c3_scale = out.c3_scale.max(b.scale);
    }
    Ok(out)
}
