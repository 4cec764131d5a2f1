//! Uniform periodic grids on the unit torus and functions on them.

use crate::error::{Error, Result};
use crate::mat2::Point;

/// `n` points per period in each of `dim` directions, node `k` at `k/n`.
/// Flat index is row-major: `i0 * n + i1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    pub dim: usize,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not supported")));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("grid size {n} must be even and >= 2")));
        }
        Ok(TorusGrid { dim, n })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Weight of one node in the trapezoidal quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn multi(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn index(&self, m: [usize; 2]) -> usize {
        if self.dim == 1 {
            m[0]
        } else {
            m[0] * self.n + m[1]
        }
    }

    pub fn coords(&self, idx: usize) -> Point {
        let m = self.multi(idx);
        let h = self.h();
        if self.dim == 1 {
            [m[0] as f64 * h, 0.0]
        } else {
            [m[0] as f64 * h, m[1] as f64 * h]
        }
    }

    /// Index of `idx + offset` with periodic wrap.
    pub fn offset(&self, idx: usize, off: [isize; 2]) -> usize {
        let n = self.n as isize;
        let m = self.multi(idx);
        let a = (m[0] as isize + off[0]).rem_euclid(n) as usize;
        if self.dim == 1 {
            a
        } else {
            let b = (m[1] as isize + off[1]).rem_euclid(n) as usize;
            a * self.n + b
        }
    }

    /// Unit offset in direction `i`.
    pub fn unit(&self, i: usize) -> [isize; 2] {
        let mut o = [0isize; 2];
        o[i] = 1;
        o
    }

    /// Stride of direction `i` in the flat index.
    pub fn stride(&self, i: usize) -> usize {
        if self.dim == 1 || i == 1 {
            1
        } else {
            self.n
        }
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() / u.len() as f64
    }

    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, v) * self.cell_volume()
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Calls `f(idx, idx + e_i)` for every node, wrapping periodically.
#[inline]
fn for_neighbors(g: &TorusGrid, dir: usize, mut f: impl FnMut(usize, usize)) {
    let n = g.n;
    if g.dim == 1 {
        for k in 0..n {
            f(k, if k + 1 == n { 0 } else { k + 1 });
        }
    } else if dir == 0 {
        for r in 0..n {
            let rn = if r + 1 == n { 0 } else { r + 1 };
            for c in 0..n {
                f(r * n + c, rn * n + c);
            }
        }
    } else {
        for r in 0..n {
            for c in 0..n {
                let cn = if c + 1 == n { 0 } else { c + 1 };
                f(r * n + c, r * n + cn);
            }
        }
    }
}

/// out = (u(· + e_i h) − u) / h
pub fn forward_diff(g: &TorusGrid, dir: usize, u: &[f64], out: &mut [f64]) {
    let inv = g.n as f64;
    for_neighbors(g, dir, |k, kp| out[k] = (u[kp] - u[k]) * inv);
}

/// out = (u(· + e_i h) − u(· − e_i h)) / 2h
pub fn centered_diff(g: &TorusGrid, dir: usize, u: &[f64], out: &mut [f64]) {
    let half = 0.5 * g.n as f64;
    out.iter_mut().for_each(|v| *v = 0.0);
    for_neighbors(g, dir, |k, kp| {
        out[k] += u[kp] * half;
        out[kp] -= u[k] * half;
    });
}

/// out += s · C_iᵀ u, where C_i is the centered difference (C_iᵀ = −C_i).
pub fn centered_diff_transpose_add(g: &TorusGrid, dir: usize, u: &[f64], s: f64, out: &mut [f64]) {
    let half = 0.5 * g.n as f64 * s;
    for_neighbors(g, dir, |k, kp| {
        out[kp] += u[k] * half;
        out[k] -= u[kp] * half;
    });
}

/// out += s · D_iᵀ u, where D_i is the forward difference.
pub fn forward_diff_transpose_add(g: &TorusGrid, dir: usize, u: &[f64], s: f64, out: &mut [f64]) {
    let inv = g.n as f64 * s;
    for_neighbors(g, dir, |k, kp| {
        out[kp] += u[k] * inv;
        out[k] -= u[k] * inv;
    });
}

/// Scalar field on a torus grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: TorusGrid) -> Self {
        GridFunction {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coords(k))).collect();
        GridFunction { grid, values }
    }

    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    /// Trapezoidal L² norm, exact for trigonometric polynomials resolved by the grid.
    pub fn l2_norm(&self) -> f64 {
        (dot(&self.values, &self.values) * self.grid.cell_volume()).sqrt()
    }

    /// sqrt(‖u‖² + Σ_i ‖D_i u‖²) with forward differences D_i.
    pub fn h1_norm(&self) -> f64 {
        let mut total = dot(&self.values, &self.values);
        let mut du = vec![0.0; self.values.len()];
        for i in 0..self.grid.dim {
            forward_diff(&self.grid, i, &self.values, &mut du);
            total += dot(&du, &du);
        }
        (total * self.grid.cell_volume()).sqrt()
    }

    pub fn norms(&self) -> (f64, f64) {
        (self.l2_norm(), self.h1_norm())
    }
}
