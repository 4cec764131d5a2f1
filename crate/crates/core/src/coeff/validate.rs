use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CoefficientField;
use crate::error::{Error, Result};
use crate::mat2::{self, Point};

const SLACK: f64 = 0.01;
const SAMPLE_SEED: u64 = 0x10ca_1e5e;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Ellipticity,
    Lipschitz,
    Periodicity,
    Symmetry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: Point,
    pub y: Point,
    pub measured: f64,
    pub claimed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub n_samples: usize,
    pub claimed_lambda: f64,
    pub claimed_lipschitz: f64,
    /// min over samples of min(λ_min(sym a), 1/|a|)
    pub measured_lambda: f64,
    /// max over sampled pairs of |a(x,y) − a(x',y)| / |x − x'|
    pub measured_lipschitz: f64,
    pub periodicity_defect: f64,
    pub asymmetry: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn diagnostic(&self) -> String {
        match self.violations.first() {
            None => "all checks passed".to_string(),
            Some(v) => format!(
                "{:?} violated at x = {:?}, y = {:?}: measured {:.6e}, claimed {:.6e} ({} violations)",
                v.kind,
                v.x,
                v.y,
                v.measured,
                v.claimed,
                self.violations.len()
            ),
        }
    }
}

fn sample_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
    let mut p = [0.0; 2];
    for v in p.iter_mut().take(d) {
        *v = rng.gen::<f64>();
    }
    p
}

/// Samples the structural assumptions without failing.
pub fn measure_coefficient(field: &CoefficientField, n_samples: usize) -> Result<ValidationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let d = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let mut rep = ValidationReport {
        n_samples,
        claimed_lambda: field.lambda,
        claimed_lipschitz: field.lipschitz_x,
        measured_lambda: f64::INFINITY,
        measured_lipschitz: 0.0,
        periodicity_defect: 0.0,
        asymmetry: 0.0,
        violations: Vec::new(),
    };
    for _ in 0..n_samples {
        let x = sample_point(&mut rng, d);
        let y = sample_point(&mut rng, d);
        let a = field.eval(x, y);

        let lam = mat2::sym_min_eig(a, d).min(1.0 / mat2::norm2(a, d));
        rep.measured_lambda = rep.measured_lambda.min(lam);
        if lam < field.lambda * (1.0 - SLACK) {
            rep.violations.push(Violation {
                kind: ViolationKind::Ellipticity,
                x,
                y,
                measured: lam,
                claimed: field.lambda,
            });
        }

        let mut dir = [0.0; 2];
        for v in dir.iter_mut().take(d) {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-3);
        let mag = 10f64.powf(rng.gen_range(-4.0..-1.0));
        let xp = [x[0] + dir[0] * mag / len, x[1] + dir[1] * mag / len];
        let dist = ((xp[0] - x[0]).powi(2) + (xp[1] - x[1]).powi(2)).sqrt();
        let q = mat2::norm2(mat2::sub(field.eval(xp, y), a), d) / dist;
        rep.measured_lipschitz = rep.measured_lipschitz.max(q);
        if q > field.lipschitz_x * (1.0 + SLACK) + 1e-12 {
            rep.violations.push(Violation {
                kind: ViolationKind::Lipschitz,
                x,
                y,
                measured: q,
                claimed: field.lipschitz_x,
            });
        }

        let mut defect: f64 = 0.0;
        for i in 0..d {
            let mut xs = x;
            xs[i] += 1.0;
            let mut ys = y;
            ys[i] += 1.0;
            defect = defect
                .max(mat2::max_abs(mat2::sub(field.eval(xs, y), a)))
                .max(mat2::max_abs(mat2::sub(field.eval(x, ys), a)));
        }
        rep.periodicity_defect = rep.periodicity_defect.max(defect);
        if defect > 1e-12 * (1.0 + mat2::max_abs(a)) {
            rep.violations.push(Violation {
                kind: ViolationKind::Periodicity,
                x,
                y,
                measured: defect,
                claimed: 0.0,
            });
        }

        let asym = (a[0][1] - a[1][0]).abs();
        rep.asymmetry = rep.asymmetry.max(asym);
        if field.symmetric && asym != 0.0 {
            rep.violations.push(Violation {
                kind: ViolationKind::Symmetry,
                x,
                y,
                measured: asym,
                claimed: 0.0,
            });
        }
    }
    Ok(rep)
}

/// Checks the claimed λ, c_L, periodicity and symmetry flag on `n_samples` random points.
/// Fails with the first violating location.
pub fn validate_coefficient(field: &CoefficientField, n_samples: usize) -> Result<ValidationReport> {
    let rep = measure_coefficient(field, n_samples)?;
    if rep.passed() {
        Ok(rep)
    } else {
        Err(Error::Validation(rep.diagnostic()))
    }
}
