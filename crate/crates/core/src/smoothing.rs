//! Shift and Steklov smoothing on fine torus grids, and the ω- and t-quadratures.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::mat2::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaPoint {
    /// ω in units of 1/n_ω per axis.
    pub p: [i64; 2],
    pub omega: Point,
    pub weight: f64,
    /// Fine-grid index offset of εω.
    pub offset: [isize; 2],
}

/// Closed trapezoid lattice ω = p/n_ω, p = −n_ω/2..n_ω/2, with halved end weights per axis.
/// Weights sum to 1 and the first moment vanishes.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaGrid {
    pub dim: usize,
    pub intervals: usize,
    pub points: Vec<OmegaPoint>,
}

impl OmegaGrid {
    /// `n_f` fine points per ε-cell; requires `intervals` even and dividing `n_f`.
    pub fn new(dim: usize, intervals: usize, n_f: usize) -> Result<Self> {
        if intervals < 2 || !intervals.is_multiple_of(2) || !n_f.is_multiple_of(intervals) {
            return Err(Error::InvalidParameter(format!(
                "omega intervals {intervals} must be even and divide n_f = {n_f}"
            )));
        }
        let half = intervals as i64 / 2;
        let stride = (n_f / intervals) as isize;
        let w1 = |p: i64| {
            let w = 1.0 / intervals as f64;
            if p.abs() == half {
                0.5 * w
            } else {
                w
            }
        };
        let mut points = Vec::new();
        let range: Vec<i64> = (-half..=half).collect();
        let second: &[i64] = if dim == 2 { &range } else { &[0] };
        for &p0 in &range {
            for &p1 in second {
                let weight = w1(p0) * if dim == 2 { w1(p1) } else { 1.0 };
                points.push(OmegaPoint {
                    p: [p0, p1],
                    omega: [p0 as f64 / intervals as f64, p1 as f64 / intervals as f64],
                    weight,
                    offset: [p0 as isize * stride, p1 as isize * stride],
                });
            }
        }
        Ok(OmegaGrid {
            dim,
            intervals,
            points,
        })
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(order: usize) -> Result<Vec<(f64, f64)>> {
    if order == 0 || order > 32 {
        return Err(Error::InvalidParameter(format!("Gauss order {order} outside 1..=32")));
    }
    let n = order;
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// ε = 1/k together with the ω- and t-quadratures on the fine grid with n_f points per ε-cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingSpec {
    pub k: usize,
    pub n_f: usize,
    pub omega: OmegaGrid,
    pub t_rule: Vec<(f64, f64)>,
}

impl SmoothingSpec {
    pub fn new(dim: usize, k: usize, n_f: usize, omega_intervals: usize, t_gauss: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("eps = 1/{k} requires k >= 2")));
        }
        Ok(SmoothingSpec {
            k,
            n_f,
            omega: OmegaGrid::new(dim, omega_intervals, n_f)?,
            t_rule: gauss_legendre(t_gauss)?,
        })
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn dim(&self) -> usize {
        self.omega.dim
    }

    pub fn fine_grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim(), self.n_f * self.k)
    }

    fn check(&self, g: &TorusGrid) -> Result<()> {
        if g.dim != self.dim() || g.n != self.n_f * self.k {
            return Err(Error::Mismatch(format!(
                "grid (d = {}, n = {}) does not match eps = 1/{} with n_f = {}",
                g.dim, g.n, self.k, self.n_f
            )));
        }
        Ok(())
    }
}

/// Rotation by whole grid steps: out(x_i) = u(x_{i + off}).
pub fn shift_by_index(g: &TorusGrid, u: &[f64], off: [isize; 2], out: &mut [f64]) {
    let n = g.n as isize;
    if g.dim == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = u[(i as isize + off[0]).rem_euclid(n) as usize];
        }
    } else {
        for i0 in 0..g.n {
            let s0 = (i0 as isize + off[0]).rem_euclid(n) as usize;
            for i1 in 0..g.n {
                let s1 = (i1 as isize + off[1]).rem_euclid(n) as usize;
                out[i0 * g.n + i1] = u[s0 * g.n + s1];
            }
        }
    }
}

/// (S u)(x) = u(x + offset); the offset must be a multiple of the grid spacing.
pub fn shift(u: &GridFunction, offset: Point) -> Result<GridFunction> {
    let g = u.grid;
    let mut idx = [0isize; 2];
    for i in 0..g.dim {
        let s = offset[i] * g.n as f64;
        let r = s.round();
        if (s - r).abs() > 1e-9 * (1.0 + s.abs()) {
            return Err(Error::InvalidParameter(format!(
                "shift {} is not a multiple of h = 1/{}",
                offset[i], g.n
            )));
        }
        idx[i] = r as isize;
    }
    let mut out = GridFunction::zeros(g);
    shift_by_index(&g, &u.values, idx, &mut out.values);
    Ok(out)
}

/// (S^ε u)(x) = Σ_ω μ_ω u(x − εω).
pub fn steklov(u: &GridFunction, spec: &SmoothingSpec) -> Result<GridFunction> {
    spec.check(&u.grid)?;
    let mut out = GridFunction::zeros(u.grid);
    let mut tmp = vec![0.0; u.values.len()];
    for pt in &spec.omega.points {
        shift_by_index(&u.grid, &u.values, [-pt.offset[0], -pt.offset[1]], &mut tmp);
        for (o, t) in out.values.iter_mut().zip(&tmp) {
            *o += pt.weight * t;
        }
    }
    Ok(out)
}
