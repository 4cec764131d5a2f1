use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fine::Resolvent;
use crate::grid::{forward_diff, forward_diff_transpose_add, TorusGrid};
use crate::linop::{Compose, DiscreteOperator, OpRef, Sum, Transpose};

use super::chain::DiffChain;
use super::two_scale::SmoothedCorrector;

/// 𝒞_ε = 𝒦_ε + 𝒦̃_ε* − 𝓛 − 𝓜_ε as a composed operator.
pub fn full_corrector(k: OpRef, kt_adjoint: OpRef, l: OpRef, m: OpRef) -> Result<OpRef> {
    let n = k.rows();
    for op in [&k, &kt_adjoint, &l, &m] {
        if op.rows() != n || op.cols() != n {
            return Err(Error::Mismatch("corrector parts live on different grids".into()));
        }
    }
    Ok(Arc::new(Sum(vec![(1.0, k), (1.0, kt_adjoint), (-1.0, l), (-1.0, m)])))
}

/// The assembled pieces for one ε: resolvents, raw smoothed correctors (without the
/// resolvent) and the raw differential operators L = L₃ − L₂ + (L̃₃ − L̃₂)ᵀ and M_ε.
pub struct CorrectorOperators {
    pub grid: TorusGrid,
    pub eps: f64,
    pub r_eps: Arc<Resolvent>,
    pub r0: Arc<Resolvent>,
    pub k: Arc<SmoothedCorrector>,
    pub kt: Arc<SmoothedCorrector>,
    pub l: Arc<DiffChain>,
    pub m: Arc<DiffChain>,
}

impl CorrectorOperators {
    fn r0_ref(&self) -> OpRef {
        self.r0.clone()
    }

    fn r0_transpose(&self) -> OpRef {
        Arc::new(Transpose(self.r0.clone()))
    }

    /// 𝒦_ε = K R₀.
    pub fn k_op(&self) -> OpRef {
        Arc::new(Compose(vec![self.k.clone(), self.r0_ref()]))
    }

    /// 𝒦̃_ε = K̃ R₀ᵀ.
    pub fn kt_op(&self) -> OpRef {
        Arc::new(Compose(vec![self.kt.clone(), self.r0_transpose()]))
    }

    /// 𝓛 = R₀ L R₀.
    pub fn l_op(&self) -> OpRef {
        Arc::new(Compose(vec![self.r0_ref(), self.l.clone(), self.r0_ref()]))
    }

    /// 𝓜_ε = R₀ M_ε R₀.
    pub fn m_op(&self) -> OpRef {
        Arc::new(Compose(vec![self.r0_ref(), self.m.clone(), self.r0_ref()]))
    }

    pub fn corrector(&self) -> Result<OpRef> {
        full_corrector(self.k_op(), Arc::new(Transpose(self.kt_op())), self.l_op(), self.m_op())
    }

    fn n(&self) -> usize {
        self.grid.len()
    }

    fn solve(r: &Resolvent, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let mut x = vec![0.0; b.len()];
        if transpose {
            r.apply_transpose(b, &mut x)?;
        } else {
            r.apply(b, &mut x)?;
        }
        Ok(x)
    }

    fn lm(&self, u: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let mut a = vec![0.0; u.len()];
        let mut b = vec![0.0; u.len()];
        if transpose {
            self.l.apply_transpose(u, &mut a)?;
            self.m.apply_transpose(u, &mut b)?;
        } else {
            self.l.apply(u, &mut a)?;
            self.m.apply(u, &mut b)?;
        }
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        Ok(a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// R_ε − R₀ in L² → L².
    Zero,
    /// R_ε − R₀ − ε𝒦_ε in L² → H¹, realized as [I; D₁; …](·).
    First,
    /// R_ε − R₀ − ε𝒞_ε in L² → L².
    Second,
}

/// Resolvent differences with grouped solves: each forward apply of the second-order
/// error costs three solves, the same as its transpose.
pub struct ErrorOperators {
    pub ops: Arc<CorrectorOperators>,
    pub kind: ErrorKind,
}

impl ErrorOperators {
    pub fn new(ops: Arc<CorrectorOperators>, kind: ErrorKind) -> Self {
        ErrorOperators { ops, kind }
    }

    fn zero(&self, f: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let o = &self.ops;
        let mut a = CorrectorOperators::solve(&o.r_eps, f, transpose)?;
        let b = CorrectorOperators::solve(&o.r0, f, transpose)?;
        a.iter_mut().zip(&b).for_each(|(x, y)| *x -= y);
        Ok(a)
    }

    /// R_ε f − R₀ f − ε K R₀ f.
    fn first_core(&self, f: &[f64]) -> Result<Vec<f64>> {
        let o = &self.ops;
        let mut a = CorrectorOperators::solve(&o.r_eps, f, false)?;
        let u = CorrectorOperators::solve(&o.r0, f, false)?;
        let mut ku = vec![0.0; f.len()];
        o.k.apply(&u, &mut ku)?;
        for i in 0..a.len() {
            a[i] -= u[i] + o.eps * ku[i];
        }
        Ok(a)
    }

    /// Transpose of `first_core`: R_εᵀ h − R₀ᵀ h − ε R₀ᵀ Kᵀ h.
    fn first_core_t(&self, h: &[f64]) -> Result<Vec<f64>> {
        let o = &self.ops;
        let mut kth = vec![0.0; h.len()];
        o.k.apply_transpose(h, &mut kth)?;
        let mut rhs = h.to_vec();
        rhs.iter_mut().zip(&kth).for_each(|(x, y)| *x += o.eps * y);
        let mut a = CorrectorOperators::solve(&o.r_eps, h, true)?;
        let b = CorrectorOperators::solve(&o.r0, &rhs, true)?;
        a.iter_mut().zip(&b).for_each(|(x, y)| *x -= y);
        Ok(a)
    }

    /// With u = R₀ f:
    /// R_ε f − u − ε [K u + R₀ (K̃ᵀ f − (L + M) u)].
    fn second(&self, f: &[f64]) -> Result<Vec<f64>> {
        let o = &self.ops;
        let re = CorrectorOperators::solve(&o.r_eps, f, false)?;
        let u = CorrectorOperators::solve(&o.r0, f, false)?;
        let mut ku = vec![0.0; f.len()];
        o.k.apply(&u, &mut ku)?;
        let mut inner = vec![0.0; f.len()];
        o.kt.apply_transpose(f, &mut inner)?;
        let lm = o.lm(&u, false)?;
        inner.iter_mut().zip(&lm).for_each(|(x, y)| *x -= y);
        let w = CorrectorOperators::solve(&o.r0, &inner, false)?;
        Ok((0..f.len()).map(|i| re[i] - u[i] - o.eps * (ku[i] + w[i])).collect())
    }

    /// With v = R₀ᵀ h:
    /// R_εᵀ h − v − ε [R₀ᵀ (Kᵀ h − (L + M)ᵀ v) + K̃ v].
    fn second_t(&self, h: &[f64]) -> Result<Vec<f64>> {
        let o = &self.ops;
        let re = CorrectorOperators::solve(&o.r_eps, h, true)?;
        let v = CorrectorOperators::solve(&o.r0, h, true)?;
        let mut inner = vec![0.0; h.len()];
        o.k.apply_transpose(h, &mut inner)?;
        let lm = o.lm(&v, true)?;
        inner.iter_mut().zip(&lm).for_each(|(x, y)| *x -= y);
        let w = CorrectorOperators::solve(&o.r0, &inner, true)?;
        let mut ktv = vec![0.0; h.len()];
        o.kt.apply(&v, &mut ktv)?;
        Ok((0..h.len()).map(|i| re[i] - v[i] - o.eps * (w[i] + ktv[i])).collect())
    }
}

impl DiscreteOperator for ErrorOperators {
    fn rows(&self) -> usize {
        match self.kind {
            ErrorKind::First => self.ops.n() * (1 + self.ops.grid.dim),
            _ => self.ops.n(),
        }
    }
    fn cols(&self) -> usize {
        self.ops.n()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.cols() || y.len() != self.rows() {
            return Err(Error::Mismatch("error operator applied to a foreign grid".into()));
        }
        match self.kind {
            ErrorKind::Zero => y.copy_from_slice(&self.zero(x, false)?),
            ErrorKind::Second => y.copy_from_slice(&self.second(x)?),
            ErrorKind::First => {
                let n = self.ops.n();
                let r = self.first_core(x)?;
                y[..n].copy_from_slice(&r);
                for i in 0..self.ops.grid.dim {
                    forward_diff(&self.ops.grid, i, &r, &mut y[(i + 1) * n..(i + 2) * n]);
                }
            }
        }
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.rows() || y.len() != self.cols() {
            return Err(Error::Mismatch("error operator applied to a foreign grid".into()));
        }
        match self.kind {
            ErrorKind::Zero => y.copy_from_slice(&self.zero(x, true)?),
            ErrorKind::Second => y.copy_from_slice(&self.second_t(x)?),
            ErrorKind::First => {
                let n = self.ops.n();
                let mut h = x[..n].to_vec();
                for i in 0..self.ops.grid.dim {
                    forward_diff_transpose_add(&self.ops.grid, i, &x[(i + 1) * n..(i + 2) * n], 1.0, &mut h);
                }
                y.copy_from_slice(&self.first_core_t(&h)?);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fine::{assemble_fine, assemble_homogenized};
    use crate::krylov::SolverOptions;
    use crate::linop::{materialize, transpose_defect, Identity};
    use crate::operators::chain::l_chain;
    use crate::operators::chat::{double_averaged_matrix, m_chain};
    use crate::operators::test_support::{pipeline, Pipeline};
    use crate::operators::two_scale::TwoScaleTable;
    use crate::operators::corrector_coeffs;
    use crate::smoothing::SmoothingSpec;

    fn build(p: &Pipeline, k: usize, n_f: usize, dense_limit: usize) -> CorrectorOperators {
        let d = p.field.dim();
        let spec = SmoothingSpec::new(d, k, n_f, n_f, 3).unwrap();
        let grid = spec.fine_grid().unwrap();
        let opts = SolverOptions::default();
        let coeffs = corrector_coeffs(&p.cells, &p.fc, &p.field, &p.hom).unwrap();
        CorrectorOperators {
            grid,
            eps: spec.eps(),
            r_eps: Arc::new(Resolvent::new(assemble_fine(&p.field, k, n_f).unwrap(), dense_limit, opts).unwrap()),
            r0: Arc::new(Resolvent::new(assemble_homogenized(&p.hom, grid).unwrap(), dense_limit, opts).unwrap()),
            k: Arc::new(
                SmoothedCorrector::new(TwoScaleTable::build(&p.cells, false, grid, n_f).unwrap(), spec.clone()).unwrap(),
            ),
            kt: Arc::new(
                SmoothedCorrector::new(TwoScaleTable::build(&p.cells, true, grid, n_f).unwrap(), spec.clone()).unwrap(),
            ),
            l: Arc::new(l_chain(&coeffs, grid).unwrap()),
            m: Arc::new(m_chain(&double_averaged_matrix(&p.field, &p.cells, &spec).unwrap(), grid).unwrap()),
        }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grouped_second_error_equals_composition() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let ops = Arc::new(build(&p, 2, 8, 4096));
        let n = ops.grid.len();
        let e2 = ErrorOperators::new(ops.clone(), ErrorKind::Second);
        let composed = Sum(vec![
            (1.0, ops.r_eps.clone() as OpRef),
            (-1.0, ops.r0.clone() as OpRef),
            (-ops.eps, ops.corrector().unwrap()),
        ]);
        let a = materialize(&e2).unwrap();
        let b = materialize(&composed).unwrap();
        assert!(max_diff(&a.data, &b.data) < 1e-13 * b.max_abs().max(1.0));
        assert!(transpose_defect(&e2, 4).unwrap() < 1e-12);
        let at = materialize(&Transpose(Arc::new(ErrorOperators::new(ops.clone(), ErrorKind::Second)))).unwrap();
        assert!(max_diff(&at.data, &a.transposed().data) < 1e-13);
        assert_eq!(e2.rows(), n);
    }

    #[test]
    fn first_error_and_transposes() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let ops = Arc::new(build(&p, 2, 8, 4096));
        let e1 = ErrorOperators::new(ops.clone(), ErrorKind::First);
        assert_eq!(e1.rows(), 3 * ops.grid.len());
        assert!(transpose_defect(&e1, 5).unwrap() < 1e-12);
        let e0 = ErrorOperators::new(ops.clone(), ErrorKind::Zero);
        assert!(transpose_defect(&e0, 6).unwrap() < 1e-12);
        for op in [ops.k_op(), ops.kt_op(), ops.l_op(), ops.m_op(), ops.corrector().unwrap()] {
            assert!(transpose_defect(op.as_ref(), 7).unwrap() < 1e-12);
        }
        let top = materialize(&e1).unwrap();
        let core = materialize(&Compose(vec![
            Arc::new(Sum(vec![
                (1.0, ops.r_eps.clone() as OpRef),
                (-1.0, ops.r0.clone() as OpRef),
                (-ops.eps, ops.k_op()),
            ])),
            Arc::new(Identity(ops.grid.len())),
        ]))
        .unwrap();
        let n = ops.grid.len();
        assert!(max_diff(&top.data[..n * n], &core.data) < 1e-13);
    }

    #[test]
    fn krylov_and_dense_backends_agree() {
        let p = pipeline("smooth_2d_nonsymmetric", &[], 4, 16);
        let dense = Arc::new(build(&p, 2, 8, 4096));
        let kry = Arc::new(build(&p, 2, 8, 0));
        let f: Vec<f64> = (0..dense.grid.len()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        for kind in [ErrorKind::Zero, ErrorKind::First, ErrorKind::Second] {
            let a = ErrorOperators::new(dense.clone(), kind);
            let b = ErrorOperators::new(kry.clone(), kind);
            let (mut ya, mut yb) = (vec![0.0; a.rows()], vec![0.0; b.rows()]);
            a.apply(&f, &mut ya).unwrap();
            b.apply(&f, &mut yb).unwrap();
            assert!(max_diff(&ya, &yb) < 1e-8, "{kind:?}");
        }
    }

    #[test]
    fn constant_family_corrector_vanishes() {
        let p = pipeline("constant", &[("a12", 0.3), ("a21", -0.2)], 4, 16);
        let ops = build(&p, 2, 8, 4096);
        let c = materialize(ops.corrector().unwrap().as_ref()).unwrap();
        assert!(c.max_abs() < 1e-13);
    }

    #[test]
    fn symmetric_periodic_corrector_is_k_plus_k_transpose() {
        let p = pipeline("periodic_only", &[("dim", 2.0)], 4, 16);
        let ops = build(&p, 2, 8, 4096);
        let c = materialize(ops.corrector().unwrap().as_ref()).unwrap();
        let k = materialize(ops.k_op().as_ref()).unwrap();
        let sym = Sum(vec![(1.0, Arc::new(k.clone()) as OpRef), (1.0, Arc::new(k.transposed()) as OpRef)]);
        let s = materialize(&sym).unwrap();
        assert!(max_diff(&c.data, &s.data) < 1e-13);
        assert!(materialize(ops.m_op().as_ref()).unwrap().max_abs() == 0.0);
        assert!(materialize(ops.l_op().as_ref()).unwrap().max_abs() < 1e-13);
    }
}
