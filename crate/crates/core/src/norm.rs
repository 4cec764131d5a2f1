//! Largest singular value: Golub–Kahan–Lanczos bidiagonalization (the Krylov space of power
//! iteration on MᵀM) and plain power iteration.

use rand::{Rng, SeedableRng};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{dot, norm};
use crate::linop::DiscreteOperator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    /// Relative change of the estimate between iterations (of σ for Lanczos, σ² for power iteration).
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Norms below this are roundoff; the iteration stops once σ stays under it.
    pub abs_floor: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-8,
            max_iter: 500,
            seed: 0,
            abs_floor: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Removes the components along `basis` (two Gram–Schmidt passes) and returns the norm left.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    norm(w)
}

fn bidiagonal_norm(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut b = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alpha[i];
        if i + 1 < k {
            b[(i, i + 1)] = beta[i];
        }
    }
    b.singular_values().max()
}

/// ‖M‖₂ in the Euclidean inner products of domain and range, by Lanczos bidiagonalization
/// with full reorthogonalization. `iterations` counts applications of M (and of Mᵀ).
pub fn operator_norm(op: &dyn DiscreteOperator, opts: PowerOptions) -> Result<NormEstimate> {
    let (n, m) = (op.cols(), op.rows());
    if n == 0 || m == 0 {
        return Ok(NormEstimate { value: 0.0, iterations: 0 });
    }
    let mut vs = vec![start_vector(n, opts.seed)];
    let mut us: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut prev = 0.0;
    let tiny = 1e-14;
    for it in 1..=opts.max_iter {
        let mut p = vec![0.0; m];
        op.apply(vs.last().unwrap(), &mut p)?;
        if let (Some(u), Some(b)) = (us.last(), beta.last()) {
            p.iter_mut().zip(u).for_each(|(x, y): (&mut f64, &f64)| *x -= b * y);
        }
        let a = orthogonalize(&mut p, &us);
        let sigma_guess = if alpha.is_empty() { a } else { prev };
        if a <= tiny * sigma_guess.max(f64::MIN_POSITIVE) || a == 0.0 {
            if alpha.is_empty() {
                return Ok(NormEstimate { value: 0.0, iterations: it });
            }
            return Ok(NormEstimate { value: bidiagonal_norm(&alpha, &beta[..alpha.len() - 1]), iterations: it });
        }
        p.iter_mut().for_each(|x| *x /= a);
        alpha.push(a);
        us.push(p);
        let sigma = bidiagonal_norm(&alpha, &beta);
        if sigma < opts.abs_floor || (it > 1 && (sigma - prev).abs() <= opts.tol * sigma) {
            return Ok(NormEstimate { value: sigma, iterations: it });
        }
        prev = sigma;
        let mut w = vec![0.0; n];
        op.apply_transpose(us.last().unwrap(), &mut w)?;
        w.iter_mut().zip(vs.last().unwrap()).for_each(|(x, y)| *x -= a * y);
        let b = orthogonalize(&mut w, &vs);
        if b <= tiny * sigma {
            return Ok(NormEstimate { value: sigma, iterations: it });
        }
        w.iter_mut().for_each(|x| *x /= b);
        beta.push(b);
        vs.push(w);
    }
    Err(Error::NoConvergence {
        what: "Lanczos bidiagonalization".into(),
        iterations: opts.max_iter,
        residual: prev,
    })
}

/// ‖M‖₂ by plain power iteration on MᵀM.
pub fn power_iteration(op: &dyn DiscreteOperator, opts: PowerOptions) -> Result<NormEstimate> {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return Ok(NormEstimate { value: 0.0, iterations: 0 });
    }
    let mut v = start_vector(n, opts.seed);
    let mut w = vec![0.0; op.rows()];
    let mut z = vec![0.0; n];
    let mut prev = 0.0;
    for it in 1..=opts.max_iter {
        op.apply(&v, &mut w)?;
        let sigma2 = dot(&w, &w);
        op.apply_transpose(&w, &mut z)?;
        let zn = norm(&z);
        if zn == 0.0 || sigma2 == 0.0 {
            return Ok(NormEstimate { value: 0.0, iterations: it });
        }
        if it > 1 && (sigma2 - prev).abs() <= opts.tol * sigma2 + opts.abs_floor * opts.abs_floor {
            return Ok(NormEstimate {
                value: sigma2.sqrt(),
                iterations: it,
            });
        }
        prev = sigma2;
        for (vi, zi) in v.iter_mut().zip(&z) {
            *vi = zi / zn;
        }
    }
    Err(Error::NoConvergence {
        what: "power iteration".into(),
        iterations: opts.max_iter,
        residual: prev.sqrt(),
    })
}
