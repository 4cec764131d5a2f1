//! Preconditioned CG and BiCGStab.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::TorusFft;
use crate::grid::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Fourier-diagonal approximate inverse. Bins with a zero symbol are mapped to zero.
#[derive(Clone, Debug)]
pub struct SpectralPreconditioner {
    fft: TorusFft,
    inv_symbol: Vec<f64>,
}

impl SpectralPreconditioner {
    pub fn new(fft: TorusFft, symbol: impl Fn([usize; 2]) -> f64) -> Self {
        let g = fft.grid();
        let inv_symbol = (0..g.len())
            .map(|idx| {
                let s = symbol(fft.bins(idx));
                if s.abs() > 1e-300 {
                    1.0 / s
                } else {
                    0.0
                }
            })
            .collect();
        SpectralPreconditioner { fft, inv_symbol }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut c: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut c);
        for (v, s) in c.iter_mut().zip(&self.inv_symbol) {
            *v *= s;
        }
        self.fft.inverse(&mut c);
        for (zi, ci) in z.iter_mut().zip(&c) {
            *zi = ci.re;
        }
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradients for symmetric positive (semi)definite systems.
/// `x` holds the initial guess on entry.
pub fn cg(
    a: &dyn Fn(&[f64], &mut [f64]),
    m: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
    what: &str,
) -> Result<SolveStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut r = vec![0.0; n];
    a(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    m(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bn;
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        a(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        res = norm(&r) / bn;
        m(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if res <= opts.tol {
        return Ok(SolveStats {
            iterations: opts.max_iter,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        what: what.to_string(),
        iterations: opts.max_iter,
        residual: res,
    })
}

/// Right-preconditioned BiCGStab for general nonsingular (or consistent singular) systems.
pub fn bicgstab(
    a: &dyn Fn(&[f64], &mut [f64]),
    m: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: SolverOptions,
    what: &str,
) -> Result<SolveStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let mut r = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iters = 0;
    let mut res = f64::INFINITY;

    'restart: while iters < opts.max_iter {
        a(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        res = norm(&r) / bn;
        if res <= opts.tol {
            return Ok(SolveStats {
                iterations: iters,
                residual: res,
            });
        }
        let rhat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        while iters < opts.max_iter {
            iters += 1;
            let rho_new = dot(&rhat, &r);
            if rho_new.abs() < 1e-300 {
                continue 'restart;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
                *pi = ri + beta * (*pi - omega * vi);
            }
            m(&p, &mut y);
            a(&y, &mut v);
            let rv = dot(&rhat, &v);
            if rv.abs() < 1e-300 {
                continue 'restart;
            }
            alpha = rho / rv;
            for ((si, ri), vi) in s.iter_mut().zip(&r).zip(&v) {
                *si = ri - alpha * vi;
            }
            if norm(&s) / bn <= opts.tol {
                axpy(alpha, &y, x);
                continue 'restart;
            }
            m(&s, &mut zz);
            a(&zz, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                axpy(alpha, &y, x);
                continue 'restart;
            }
            omega = dot(&t, &s) / tt;
            axpy(alpha, &y, x);
            axpy(omega, &zz, x);
            for ((ri, si), ti) in r.iter_mut().zip(&s).zip(&t) {
                *ri = si - omega * ti;
            }
            if norm(&r) / bn <= opts.tol || omega == 0.0 {
                continue 'restart;
            }
        }
    }
    if res <= opts.tol {
        return Ok(SolveStats {
            iterations: iters,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        what: what.to_string(),
        iterations: iters,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, skew: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = x[(i + n - 1) % n];
                let r = x[(i + 1) % n];
                y[i] = 3.0 * x[i] - (1.0 + skew) * l - (1.0 - skew) * r;
            }
        }
    }

    #[test]
    fn cg_and_bicgstab_solve_periodic_systems() {
        let n = 50;
        let id = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: 500,
        };
        for (skew, use_cg) in [(0.0, true), (0.0, false), (0.4, false)] {
            let a = tridiag(n, skew);
            let mut x = vec![0.0; n];
            if use_cg {
                cg(&a, &id, &b, &mut x, opts, "t").unwrap();
            } else {
                bicgstab(&a, &id, &b, &mut x, opts, "t").unwrap();
            }
            let mut ax = vec![0.0; n];
            a(&x, &mut ax);
            let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "skew {skew}: {err}");
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = tridiag(8, 0.0);
        let id = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let mut x = vec![1.0; 8];
        let st = bicgstab(&a, &id, &[0.0; 8], &mut x, SolverOptions::default(), "t").unwrap();
        assert_eq!(x, vec![0.0; 8]);
        assert_eq!(st.iterations, 0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let a = tridiag(64, 0.0);
        let id = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        let b: Vec<f64> = (0..64).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; 64];
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: 2,
        };
        let err = cg(&a, &id, &b, &mut x, opts, "tiny").unwrap_err();
        assert!(err.is_solver_failure());
    }
}
