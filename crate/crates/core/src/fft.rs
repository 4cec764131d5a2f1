//! Complex FFTs on 1D and 2D torus grids.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::TorusGrid;

#[derive(Clone)]
pub struct TorusFft {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TorusFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusFft").field("grid", &self.grid).finish()
    }
}

/// Signed wavenumber of FFT bin `k` on `n` points, in `(-n/2, n/2]`.
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Symbol of the spectral derivative, with the Nyquist bin zeroed.
pub fn derivative_symbol(k: usize, n: usize) -> f64 {
    if 2 * k == n {
        0.0
    } else {
        2.0 * PI * wavenumber(k, n) as f64
    }
}

impl TorusFft {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        TorusFft {
            grid,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.grid.n;
        plan.process(data);
        if self.grid.dim == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.fwd, data);
    }

    /// Inverse transform in place, scaled so that `inverse(forward(u)) = u`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inv, data);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn forward_real(&self, u: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    /// Bin indices (k0, k1) of flat position `idx`.
    pub fn bins(&self, idx: usize) -> [usize; 2] {
        self.grid.multi(idx)
    }

    /// True for bins whose every nonzero index is a Nyquist index (the mean included).
    pub fn is_pure_nyquist(&self, idx: usize) -> bool {
        let n = self.grid.n;
        let b = self.bins(idx);
        (0..self.grid.dim).all(|i| b[i] == 0 || 2 * b[i] == n)
    }

    /// Spectral derivative of `u` in direction `dir`.
    pub fn derivative(&self, u: &[f64], dir: usize) -> Vec<f64> {
        let mut c = self.forward_real(u);
        self.apply_derivative(&mut c, dir);
        self.inverse(&mut c);
        c.iter().map(|v| v.re).collect()
    }

    /// Multiplies spectral coefficients by the symbol of ∂_dir.
    pub fn apply_derivative(&self, c: &mut [Complex64], dir: usize) {
        let n = self.grid.n;
        for (idx, v) in c.iter_mut().enumerate() {
            let k = self.bins(idx)[dir];
            *v *= Complex64::new(0.0, derivative_symbol(k, n));
        }
    }
}
