//! Linear maps on grid-function space with apply and transpose-apply.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::dot;
use crate::stencil::Stencil;

pub trait DiscreteOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

pub type OpRef = Arc<dyn DiscreteOperator>;

fn check(op: &dyn DiscreteOperator, x: usize, y: usize, transpose: bool) -> Result<()> {
    let (c, r) = if transpose {
        (op.rows(), op.cols())
    } else {
        (op.cols(), op.rows())
    };
    if x != c || y != r {
        return Err(Error::Mismatch(format!(
            "operator {}x{} applied to {} -> {}",
            op.rows(),
            op.cols(),
            x,
            y
        )));
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Mismatch(format!("{} entries for {rows}x{cols}", data.len())));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        DenseMatrix { rows: n, cols: n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transposed(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl DiscreteOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(&self.data[i * self.cols..(i + 1) * self.cols], x);
        }
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (yj, a) in y.iter_mut().zip(&self.data[i * self.cols..(i + 1) * self.cols]) {
                *yj += a * xi;
            }
        }
        Ok(())
    }
}

/// A stencil together with its transpose.
#[derive(Clone, Debug)]
pub struct StencilOp {
    pub forward: Stencil,
    pub backward: Stencil,
}

impl StencilOp {
    pub fn new(s: Stencil) -> Self {
        let backward = s.transpose();
        StencilOp { forward: s, backward }
    }
}

impl DiscreteOperator for StencilOp {
    fn rows(&self) -> usize {
        self.forward.grid.len()
    }
    fn cols(&self) -> usize {
        self.forward.grid.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        self.forward.apply(x, y);
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        self.backward.apply(x, y);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Identity(pub usize);

impl DiscreteOperator for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        y.copy_from_slice(x);
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.apply(x, y)
    }
}

/// Zero map of the given shape.
#[derive(Clone, Copy, Debug)]
pub struct Zero(pub usize, pub usize);

impl DiscreteOperator for Zero {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.1
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        Ok(())
    }
}

/// Product `ops[0] ops[1] … ops[last]`, applied right to left.
pub struct Compose(pub Vec<OpRef>);

impl DiscreteOperator for Compose {
    fn rows(&self) -> usize {
        self.0.first().map_or(0, |o| o.rows())
    }
    fn cols(&self) -> usize {
        self.0.last().map_or(0, |o| o.cols())
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        let mut cur = x.to_vec();
        for op in self.0.iter().rev() {
            let mut next = vec![0.0; op.rows()];
            op.apply(&cur, &mut next)?;
            cur = next;
        }
        y.copy_from_slice(&cur);
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        let mut cur = x.to_vec();
        for op in self.0.iter() {
            let mut next = vec![0.0; op.cols()];
            op.apply_transpose(&cur, &mut next)?;
            cur = next;
        }
        y.copy_from_slice(&cur);
        Ok(())
    }
}

/// Linear combination Σ c_i op_i.
pub struct Sum(pub Vec<(f64, OpRef)>);

impl DiscreteOperator for Sum {
    fn rows(&self) -> usize {
        self.0.first().map_or(0, |o| o.1.rows())
    }
    fn cols(&self) -> usize {
        self.0.first().map_or(0, |o| o.1.cols())
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; y.len()];
        for (c, op) in &self.0 {
            op.apply(x, &mut tmp)?;
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += c * b);
        }
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; y.len()];
        for (c, op) in &self.0 {
            op.apply_transpose(x, &mut tmp)?;
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += c * b);
        }
        Ok(())
    }
}

pub struct Transpose(pub OpRef);

impl DiscreteOperator for Transpose {
    fn rows(&self) -> usize {
        self.0.cols()
    }
    fn cols(&self) -> usize {
        self.0.rows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.0.apply_transpose(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.0.apply(x, y)
    }
}

/// Vertical stack `[ops[0]; ops[1]; …]`.
pub struct Stack(pub Vec<OpRef>);

impl DiscreteOperator for Stack {
    fn rows(&self) -> usize {
        self.0.iter().map(|o| o.rows()).sum()
    }
    fn cols(&self) -> usize {
        self.0.first().map_or(0, |o| o.cols())
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        let mut at = 0;
        for op in &self.0 {
            op.apply(x, &mut y[at..at + op.rows()])?;
            at += op.rows();
        }
        Ok(())
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut tmp = vec![0.0; y.len()];
        let mut at = 0;
        for op in &self.0 {
            op.apply_transpose(&x[at..at + op.rows()], &mut tmp)?;
            y.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
            at += op.rows();
        }
        Ok(())
    }
}

/// Operator given by a pair of closures.
pub struct FnOp<F, G> {
    pub rows: usize,
    pub cols: usize,
    pub forward: F,
    pub backward: G,
}

impl<F, G> DiscreteOperator for FnOp<F, G>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync,
    G: Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync,
{
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), false)?;
        (self.forward)(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check(self, x.len(), y.len(), true)?;
        (self.backward)(x, y)
    }
}

/// Dense copy obtained by applying the operator to unit vectors.
pub fn materialize(op: &dyn DiscreteOperator) -> Result<DenseMatrix> {
    let (r, c) = (op.rows(), op.cols());
    let mut data = vec![0.0; r * c];
    let mut e = vec![0.0; c];
    let mut col = vec![0.0; r];
    for j in 0..c {
        e[j] = 1.0;
        op.apply(&e, &mut col)?;
        e[j] = 0.0;
        for i in 0..r {
            data[i * c + j] = col[i];
        }
    }
    Ok(DenseMatrix { rows: r, cols: c, data })
}

/// |⟨Mf, h⟩ − ⟨f, Mᵀh⟩| / (‖Mf‖‖h‖ + ‖f‖‖Mᵀh‖) for seeded random f, h.
pub fn transpose_defect(op: &dyn DiscreteOperator, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<f64> = (0..op.cols()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let h: Vec<f64> = (0..op.rows()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut mf = vec![0.0; op.rows()];
    let mut mth = vec![0.0; op.cols()];
    op.apply(&f, &mut mf)?;
    op.apply_transpose(&h, &mut mth)?;
    let n = |v: &[f64]| dot(v, v).sqrt();
    let scale = n(&mf) * n(&h) + n(&f) * n(&mth);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(&mf, &h) - dot(&f, &mth)).abs() / scale)
}
