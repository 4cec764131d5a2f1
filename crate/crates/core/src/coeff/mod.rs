//! Coefficient fields a(x, y), 1-periodic in the slow variable x and the fast variable y.

mod families;
mod validate;

use std::collections::BTreeMap;
use std::f64::consts::PI;

pub use families::{builtin_family, FAMILY_IDS};
pub use validate::{validate_coefficient, ValidationReport, Violation, ViolationKind};

use crate::mat2::{self, Mat, Point};

/// Cell discretization suited to a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellScheme {
    Spectral,
    FiniteVolume,
}

impl CellScheme {
    pub fn name(self) -> &'static str {
        match self {
            CellScheme::Spectral => "spectral",
            CellScheme::FiniteVolume => "finite_volume",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Family {
    Constant {
        a: Mat,
    },
    Separable1d {
        c0: f64,
        c1: f64,
        s: f64,
    },
    Laminate2d {
        alpha: [f64; 2],
        beta: [f64; 2],
        theta: f64,
        slow: f64,
    },
    Smooth2dNonsymmetric {
        s0: f64,
        s1: f64,
        s2: f64,
        s3: f64,
        t0: f64,
        t1: f64,
    },
    PeriodicOnly1d {
        c0: f64,
        c1: f64,
    },
    PeriodicOnly2d {
        s0: f64,
        s1: f64,
        s3: f64,
        t0: f64,
        t2: f64,
    },
}

/// Closed-form coefficient matrix with its claimed structural constants.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub(crate) id: String,
    pub(crate) params: BTreeMap<String, f64>,
    pub(crate) family: Family,
    pub(crate) dim: usize,
    pub(crate) transposed: bool,
    pub symmetric: bool,
    /// Claimed ellipticity constant.
    pub lambda: f64,
    /// Claimed Lipschitz constant in x.
    pub lipschitz_x: f64,
}

fn tau(v: f64) -> f64 {
    (2.0 * PI * v).sin()
}

fn tauc(v: f64) -> f64 {
    (2.0 * PI * v).cos()
}

fn skew(sigma: f64, t: f64) -> Mat {
    [[sigma, t], [-t, sigma]]
}

impl CoefficientField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Parameters with defaults filled in.
    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    /// The field a(x, y)ᵀ with the same metadata.
    pub fn transposed(&self) -> Self {
        let mut t = self.clone();
        t.transposed = !t.transposed;
        t
    }

    /// Replaces the claimed constants, e.g. to exercise validation failures.
    pub fn with_claims(mut self, lambda: f64, lipschitz_x: f64) -> Self {
        self.lambda = lambda;
        self.lipschitz_x = lipschitz_x;
        self
    }

    /// True when a does not depend on x.
    pub fn is_x_independent(&self) -> bool {
        match &self.family {
            Family::Constant { .. } | Family::PeriodicOnly1d { .. } | Family::PeriodicOnly2d { .. } => {
                true
            }
            Family::Separable1d { s, .. } => *s == 0.0,
            Family::Laminate2d { slow, .. } => *slow == 0.0,
            Family::Smooth2dNonsymmetric { s2, s3, t1, .. } => *s2 == 0.0 && *s3 == 0.0 && *t1 == 0.0,
        }
    }

    pub fn is_y_independent(&self) -> bool {
        matches!(self.family, Family::Constant { .. })
    }

    pub fn preferred_scheme(&self) -> CellScheme {
        match self.family {
            Family::Laminate2d { .. } => CellScheme::FiniteVolume,
            _ => CellScheme::Spectral,
        }
    }

    pub fn eval(&self, x: Point, y: Point) -> Mat {
        let a = self.eval_untransposed(x, y);
        if self.transposed {
            mat2::transpose(a)
        } else {
            a
        }
    }

    fn eval_untransposed(&self, x: Point, y: Point) -> Mat {
        match self.family {
            Family::Constant { a } => a,
            Family::Separable1d { c0, c1, s } => {
                let v = (c0 + c1 * tau(y[0])) * (1.0 + s * tau(x[0]));
                [[v, 0.0], [0.0, 0.0]]
            }
            Family::Laminate2d {
                alpha,
                beta,
                theta,
                slow,
            } => {
                let phase = if y[0].rem_euclid(1.0) < theta { 0 } else { 1 };
                let m = 1.0 + slow * tau(x[0]);
                [[alpha[phase] * m, 0.0], [0.0, beta[phase] * m]]
            }
            Family::Smooth2dNonsymmetric {
                s0,
                s1,
                s2,
                s3,
                t0,
                t1,
            } => {
                let sigma = s0 + (s1 + s2 * tau(x[0])) * tau(y[0]) + s3 * tauc(x[1]) * tau(y[1]);
                let t = (t0 + t1 * tau(x[1])) * tauc(y[0]);
                skew(sigma, t)
            }
            Family::PeriodicOnly1d { c0, c1 } => [[c0 + c1 * tau(y[0]), 0.0], [0.0, 0.0]],
            Family::PeriodicOnly2d { s0, s1, s3, t0, t2 } => {
                let sigma = s0 + s1 * tau(y[0]) + s3 * tau(y[1]);
                let t = t0 * tauc(y[0]) + t2 * tau(y[1]);
                skew(sigma, t)
            }
        }
    }

    /// Analytic ∂a/∂x_m.
    pub fn grad_x(&self, x: Point, y: Point, m: usize) -> Mat {
        let w = 2.0 * PI;
        let g = match self.family {
            Family::Constant { .. } | Family::PeriodicOnly1d { .. } | Family::PeriodicOnly2d { .. } => {
                mat2::ZERO
            }
            Family::Separable1d { c0, c1, s } => {
                if m != 0 {
                    mat2::ZERO
                } else {
                    let v = (c0 + c1 * tau(y[0])) * s * w * tauc(x[0]);
                    [[v, 0.0], [0.0, 0.0]]
                }
            }
            Family::Laminate2d {
                alpha,
                beta,
                theta,
                slow,
            } => {
                if m != 0 {
                    mat2::ZERO
                } else {
                    let phase = if y[0].rem_euclid(1.0) < theta { 0 } else { 1 };
                    let dm = slow * w * tauc(x[0]);
                    [[alpha[phase] * dm, 0.0], [0.0, beta[phase] * dm]]
                }
            }
            Family::Smooth2dNonsymmetric { s2, s3, t1, .. } => {
                if m == 0 {
                    skew(s2 * w * tauc(x[0]) * tau(y[0]), 0.0)
                } else {
                    let ds = -s3 * w * tau(x[1]) * tau(y[1]);
                    let dt = t1 * w * tauc(x[1]) * tauc(y[0]);
                    skew(ds, dt)
                }
            }
        };
        if self.transposed {
            mat2::transpose(g)
        } else {
            g
        }
    }
}
