//! Periodic trigonometric interpolation from a uniform slow grid.

use std::f64::consts::PI;

/// Cardinal function of the even-`n` trigonometric interpolant, `θ` in units of the period.
pub fn cardinal(n: usize, theta: f64) -> f64 {
    let t = theta - theta.round();
    if t == 0.0 {
        return 1.0;
    }
    let nf = n as f64;
    (nf * PI * t).sin() * (PI * t).cos() / (nf * (PI * t).sin())
}

/// Dense `rows × n` weight matrix mapping `n` samples at `s/n` to target points.
#[derive(Clone, Debug)]
pub struct Interp1 {
    pub n: usize,
    pub rows: usize,
    pub w: Vec<f64>,
}

impl Interp1 {
    /// Targets `(2 i + half) / (2 m)` for `i = start, start + step, ...` (`rows` of them),
    /// `half ∈ {0, 1}`. Offsets are computed in integers so coincident nodes get exact weights.
    pub fn lattice(n: usize, m: usize, half: usize, start: usize, step: usize, rows: usize) -> Self {
        let period = 2 * m * n;
        let mut w = vec![0.0; rows * n];
        for r in 0..rows {
            let i = start + r * step;
            for s in 0..n {
                let num = ((2 * i + half) * n + period - (2 * s * m) % period) % period;
                w[r * n + s] = if num == 0 {
                    1.0
                } else if (num * n).is_multiple_of(period) {
                    0.0
                } else {
                    cardinal(n, num as f64 / period as f64)
                };
            }
        }
        Interp1 { n, rows, w }
    }

    /// Targets at arbitrary points.
    pub fn points(n: usize, xs: &[f64]) -> Self {
        let mut w = vec![0.0; xs.len() * n];
        for (r, &x) in xs.iter().enumerate() {
            for s in 0..n {
                w[r * n + s] = cardinal(n, x - s as f64 / n as f64);
            }
        }
        Interp1 {
            n,
            rows: xs.len(),
            w,
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.w[r * self.n..(r + 1) * self.n]
    }
}

/// Separable interpolation of slow samples `f` (row-major, `n^d`) to the tensor targets of
/// `ax[0]` (and `ax[1]` when d = 2). Output is row-major over the targets.
pub fn interpolate(dim: usize, f: &[f64], ax: [&Interp1; 2], out: &mut [f64]) {
    let a = ax[0];
    let n = a.n;
    if dim == 1 {
        for r in 0..a.rows {
            out[r] = crate::grid::dot(a.row(r), f);
        }
        return;
    }
    let b = ax[1];
    // tmp = f · Bᵀ (n × b.rows)
    let mut tmp = vec![0.0; n * b.rows];
    for s0 in 0..n {
        let frow = &f[s0 * n..(s0 + 1) * n];
        for c in 0..b.rows {
            tmp[s0 * b.rows + c] = crate::grid::dot(frow, b.row(c));
        }
    }
    for r in 0..a.rows {
        let orow = &mut out[r * b.rows..(r + 1) * b.rows];
        orow.iter_mut().for_each(|v| *v = 0.0);
        for (s0, &wa) in a.row(r).iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let trow = &tmp[s0 * b.rows..(s0 + 1) * b.rows];
            for (o, t) in orow.iter_mut().zip(trow) {
                *o += wa * t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_resolved_trig_polynomials() {
        let n = 8;
        let f = |x: f64| 1.0 + (2.0 * PI * x).sin() - 0.5 * (6.0 * PI * x).cos();
        let samples: Vec<f64> = (0..n).map(|s| f(s as f64 / n as f64)).collect();
        let xs = [0.0, 0.013, 0.5, 0.77, 0.999];
        let it = Interp1::points(n, &xs);
        for (r, &x) in xs.iter().enumerate() {
            let v = crate::grid::dot(it.row(r), &samples);
            assert!((v - f(x)).abs() < 1e-13, "{x}: {v}");
        }
    }

    #[test]
    fn lattice_hits_nodes_exactly() {
        let it = Interp1::lattice(6, 12, 0, 0, 1, 12);
        for r in (0..12).step_by(2) {
            for s in 0..6 {
                assert_eq!(it.row(r)[s], if s == r / 2 { 1.0 } else { 0.0 });
            }
        }
        let half = Interp1::lattice(6, 12, 1, 0, 1, 12);
        let pts = Interp1::points(6, &(0..12).map(|i| (i as f64 + 0.5) / 12.0).collect::<Vec<_>>());
        for (a, b) in half.w.iter().zip(&pts.w) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn separable_two_dimensional() {
        let n = 6;
        let f = |x: f64, y: f64| (2.0 * PI * x).cos() * (1.0 + (2.0 * PI * y).sin());
        let samples: Vec<f64> = (0..n * n)
            .map(|k| f((k / n) as f64 / n as f64, (k % n) as f64 / n as f64))
            .collect();
        let a = Interp1::lattice(n, 10, 1, 0, 1, 10);
        let b = Interp1::lattice(n, 7, 0, 0, 1, 7);
        let mut out = vec![0.0; 70];
        interpolate(2, &samples, [&a, &b], &mut out);
        for r in 0..10 {
            for c in 0..7 {
                let exact = f((r as f64 + 0.5) / 10.0, c as f64 / 7.0);
                assert!((out[r * 7 + c] - exact).abs() < 1e-13);
            }
        }
    }
}
