//! Conservative finite-volume stencils for −div a∇ + shift on a torus grid.
//!
//! Diagonal entries a_ii live on i-faces and multiply forward differences. Off-diagonal
//! entries a_ij live at cell centres and multiply the averaged cross gradients, so that the
//! operator assembled from aᵀ is exactly the transpose of the one assembled from a.

use rayon::prelude::*;

use crate::grid::TorusGrid;
use crate::mat2::Mat;

/// Coefficients sampled where the scheme needs them.
#[derive(Clone, Debug, PartialEq)]
pub struct FvCoefficients {
    /// `face[i][k]`: a_ii on the face between node k and k + e_i.
    pub face: Vec<Vec<f64>>,
    /// `center[k] = (a_01, a_10)` at the centre of the cell with lower corner k (d = 2).
    pub center: Vec<[f64; 2]>,
}

impl FvCoefficients {
    /// Samples `a` at half-integer positions. `eval(hx)` receives doubled grid coordinates,
    /// i.e. the physical point is `hx / (2 n)`.
    pub fn sample(grid: &TorusGrid, eval: impl Fn([usize; 2]) -> Mat + Sync) -> Self {
        let d = grid.dim;
        let face = (0..d)
            .map(|i| {
                (0..grid.len())
                    .into_par_iter()
                    .map(|k| {
                        let m = grid.multi(k);
                        let mut hx = [2 * m[0], 2 * m[1]];
                        hx[i] += 1;
                        eval(hx)[i][i]
                    })
                    .collect()
            })
            .collect();
        let center = if d == 2 {
            (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let m = grid.multi(k);
                    let a = eval([2 * m[0] + 1, 2 * m[1] + 1]);
                    [a[0][1], a[1][0]]
                })
                .collect()
        } else {
            Vec::new()
        };
        FvCoefficients { face, center }
    }

    /// Mean of the diagonal entries per direction.
    pub fn mean_diagonal(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (i, f) in self.face.iter().enumerate() {
            m[i] = f.iter().sum::<f64>() / f.len() as f64;
        }
        m
    }
}

/// Periodic stencil with offsets in {−1, 0, 1}^d. Row k has entries `coef[k * w + o]`
/// against node `nb[k * w + o]`.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub grid: TorusGrid,
    width: usize,
    offsets: Vec<[isize; 2]>,
    nb: Vec<u32>,
    coef: Vec<f64>,
}

impl Stencil {
    pub fn zeros(grid: TorusGrid) -> Self {
        let offsets: Vec<[isize; 2]> = if grid.dim == 1 {
            vec![[-1, 0], [0, 0], [1, 0]]
        } else {
            let mut v = Vec::new();
            for a in -1..=1 {
                for b in -1..=1 {
                    v.push([a, b]);
                }
            }
            v
        };
        let width = offsets.len();
        let mut nb = vec![0u32; grid.len() * width];
        for k in 0..grid.len() {
            for (o, off) in offsets.iter().enumerate() {
                nb[k * width + o] = grid.offset(k, *off) as u32;
            }
        }
        Stencil {
            grid,
            width,
            coef: vec![0.0; grid.len() * width],
            offsets,
            nb,
        }
    }

    fn slot(&self, off: [isize; 2]) -> usize {
        if self.grid.dim == 1 {
            (off[0] + 1) as usize
        } else {
            ((off[0] + 1) * 3 + off[1] + 1) as usize
        }
    }

    /// Adds `w · (Σ_α c_α u(b+α)) · (Σ_β c_β v(b+β))` to the bilinear form.
    fn add_product(&mut self, base: usize, w: f64, left: &[([isize; 2], f64)], right: &[([isize; 2], f64)]) {
        for &(a, ca) in left {
            let row = self.grid.offset(base, a);
            for &(b, cb) in right {
                let off = [b[0] - a[0], b[1] - a[1]];
                let s = self.slot(off);
                self.coef[row * self.width + s] += w * ca * cb;
            }
        }
    }

    /// Assembles Σ_i D_iᵀ a_ii D_i + Σ_{i≠j} Ĝ_iᵀ a_ij Ĝ_j + shift·I.
    pub fn assemble(grid: TorusGrid, c: &FvCoefficients, shift: f64) -> Self {
        let mut st = Stencil::zeros(grid);
        let inv = grid.n as f64;
        let d = grid.dim;
        let diff = |i: usize| -> Vec<([isize; 2], f64)> {
            let mut e = [0isize; 2];
            e[i] = 1;
            vec![([0, 0], -inv), (e, inv)]
        };
        let cross = |i: usize| -> Vec<([isize; 2], f64)> {
            let h = 0.5 * inv;
            if i == 0 {
                vec![([0, 0], -h), ([1, 0], h), ([0, 1], -h), ([1, 1], h)]
            } else {
                vec![([0, 0], -h), ([0, 1], h), ([1, 0], -h), ([1, 1], h)]
            }
        };
        let dstencils: Vec<_> = (0..d).map(diff).collect();
        let cstencils: Vec<_> = (0..d).map(cross).collect();
        for k in 0..grid.len() {
            for i in 0..d {
                let w = c.face[i][k];
                st.add_product(k, w, &dstencils[i], &dstencils[i]);
            }
            if d == 2 {
                let [a01, a10] = c.center[k];
                st.add_product(k, a01, &cstencils[0], &cstencils[1]);
                st.add_product(k, a10, &cstencils[1], &cstencils[0]);
            }
            let s = st.slot([0, 0]);
            st.coef[k * st.width + s] += shift;
        }
        st
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width;
        y.par_chunks_mut(4096).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * 4096;
            for (r, yk) in ys.iter_mut().enumerate() {
                let k = base + r;
                let c = &self.coef[k * w..(k + 1) * w];
                let nb = &self.nb[k * w..(k + 1) * w];
                let mut acc = 0.0;
                for o in 0..w {
                    acc += c[o] * x[nb[o] as usize];
                }
                *yk = acc;
            }
        });
    }

    pub fn transpose(&self) -> Self {
        let w = self.width;
        let mut t = self.clone();
        for k in 0..self.grid.len() {
            for (o, off) in self.offsets.iter().enumerate() {
                let src = self.nb[k * w + o] as usize;
                let back = self.slot([-off[0], -off[1]]);
                t.coef[k * w + o] = self.coef[src * w + back];
            }
        }
        t
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            for o in 0..self.width {
                m[k * n + self.nb[k * self.width + o] as usize] += self.coef[k * self.width + o];
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let t = self.transpose();
        let scale = self.coef.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.coef
            .iter()
            .zip(&t.coef)
            .all(|(a, b)| (a - b).abs() <= tol * scale)
    }
}
