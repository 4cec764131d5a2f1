use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{CoefficientField, Family};
use crate::error::{Error, Result};
use crate::mat2;

pub const FAMILY_IDS: [&str; 5] = [
    "constant",
    "separable_1d",
    "laminate_2d",
    "smooth_2d_nonsymmetric",
    "periodic_only",
];

struct Params<'a> {
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(given: &'a BTreeMap<String, f64>) -> Self {
        Params {
            given,
            used: BTreeMap::new(),
        }
    }

    fn get(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.given.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{key} = {v} is not finite")));
        }
        self.used.insert(key.to_string(), v);
        Ok(v)
    }

    fn dim(&mut self, default: usize) -> Result<usize> {
        match self.get("dim", default as f64)? {
            v if v == 1.0 => Ok(1),
            v if v == 2.0 => Ok(2),
            v => Err(Error::InvalidParameter(format!("dim = {v}, expected 1 or 2"))),
        }
    }

    fn finish(self, id: &str) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(Error::InvalidParameter(format!(
                "family `{id}` has no parameter `{k}`"
            )));
        }
        Ok(self.used)
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

/// Instantiates a closed-form family. Missing parameters take their documented defaults.
///
/// | id | parameters (defaults) |
/// |----|----|
/// | `constant` | `dim` (2), `a11` (1), `a12` (0), `a21` (0), `a22` (1) |
/// | `separable_1d` | `c0` (2), `c1` (1), `s` (0.5): a = (c0 + c1 sin 2πy)(1 + s sin 2πx) |
/// | `laminate_2d` | `alpha1` (1), `alpha2` (4), `beta1` (2), `beta2` (0.5), `theta` (0.5), `slow` (0) |
/// | `smooth_2d_nonsymmetric` | `s0` (2), `s1` (0.5), `s2` (0.25), `s3` (0.25), `t0` (0.25), `t1` (0.125) |
/// | `periodic_only` | `dim` (1); d = 1: `c0` (2), `c1` (1); d = 2: `s0` (2), `s1` (0.5), `s3` (0.25), `t0` (0), `t2` (0) |
pub fn builtin_family(id: &str, params: &BTreeMap<String, f64>) -> Result<CoefficientField> {
    let mut p = Params::new(params);
    let (family, dim, symmetric, lambda, lipschitz_x) = match id {
        "constant" => {
            let dim = p.dim(2)?;
            let a = if dim == 1 {
                [[p.get("a11", 1.0)?, 0.0], [0.0, 0.0]]
            } else {
                [
                    [p.get("a11", 1.0)?, p.get("a12", 0.0)?],
                    [p.get("a21", 0.0)?, p.get("a22", 1.0)?],
                ]
            };
            let lam = mat2::sym_min_eig(a, dim).min(1.0 / mat2::norm2(a, dim));
            (Family::Constant { a }, dim, a[0][1] == a[1][0], lam, 0.0)
        }
        "separable_1d" => {
            let c0 = p.get("c0", 2.0)?;
            let c1 = p.get("c1", 1.0)?;
            let s = p.get("s", 0.5)?;
            require(c0 > c1.abs(), || format!("need c0 > |c1|, got c0 = {c0}, c1 = {c1}"))?;
            require(s.abs() < 1.0, || format!("need |s| < 1, got {s}"))?;
            let lo = (c0 - c1.abs()) * (1.0 - s.abs());
            let hi = (c0 + c1.abs()) * (1.0 + s.abs());
            let lip = (c0 + c1.abs()) * 2.0 * PI * s.abs();
            (Family::Separable1d { c0, c1, s }, 1, true, lo.min(1.0 / hi), lip)
        }
        "laminate_2d" => {
            let alpha = [p.get("alpha1", 1.0)?, p.get("alpha2", 4.0)?];
            let beta = [p.get("beta1", 2.0)?, p.get("beta2", 0.5)?];
            let theta = p.get("theta", 0.5)?;
            let slow = p.get("slow", 0.0)?;
            let entries = [alpha[0], alpha[1], beta[0], beta[1]];
            require(entries.iter().all(|&v| v > 0.0), || {
                "laminate entries must be positive".to_string()
            })?;
            require(theta > 0.0 && theta < 1.0, || format!("need 0 < theta < 1, got {theta}"))?;
            require(slow.abs() < 1.0, || format!("need |slow| < 1, got {slow}"))?;
            let lo = entries.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = entries.iter().cloned().fold(0.0, f64::max);
            let lam = (lo * (1.0 - slow.abs())).min(1.0 / (hi * (1.0 + slow.abs())));
            let lip = 2.0 * PI * slow.abs() * hi;
            let fam = Family::Laminate2d {
                alpha,
                beta,
                theta,
                slow,
            };
            (fam, 2, true, lam, lip)
        }
        "smooth_2d_nonsymmetric" => {
            let s0 = p.get("s0", 2.0)?;
            let s1 = p.get("s1", 0.5)?;
            let s2 = p.get("s2", 0.25)?;
            let s3 = p.get("s3", 0.25)?;
            let t0 = p.get("t0", 0.25)?;
            let t1 = p.get("t1", 0.125)?;
            let amp = s1.abs() + s2.abs() + s3.abs();
            require(s0 > amp, || format!("need s0 > |s1| + |s2| + |s3|, got {s0} <= {amp}"))?;
            let tmax = t0.abs() + t1.abs();
            let lam = (s0 - amp).min(1.0 / ((s0 + amp).powi(2) + tmax * tmax).sqrt());
            // largest eigenvalue of [[s2², |s2 s3|], [|s2 s3|, s3² + t1²]]
            let (q11, q12, q22) = (s2 * s2, (s2 * s3).abs(), s3 * s3 + t1 * t1);
            let qmax = 0.5 * (q11 + q22) + (0.25 * (q11 - q22).powi(2) + q12 * q12).sqrt();
            let fam = Family::Smooth2dNonsymmetric {
                s0,
                s1,
                s2,
                s3,
                t0,
                t1,
            };
            (fam, 2, t0 == 0.0 && t1 == 0.0, lam, 2.0 * PI * qmax.sqrt())
        }
        "periodic_only" => {
            if p.dim(1)? == 1 {
                let c0 = p.get("c0", 2.0)?;
                let c1 = p.get("c1", 1.0)?;
                require(c0 > c1.abs(), || format!("need c0 > |c1|, got c0 = {c0}, c1 = {c1}"))?;
                let lam = (c0 - c1.abs()).min(1.0 / (c0 + c1.abs()));
                (Family::PeriodicOnly1d { c0, c1 }, 1, true, lam, 0.0)
            } else {
                let s0 = p.get("s0", 2.0)?;
                let s1 = p.get("s1", 0.5)?;
                let s3 = p.get("s3", 0.25)?;
                let t0 = p.get("t0", 0.0)?;
                let t2 = p.get("t2", 0.0)?;
                let amp = s1.abs() + s3.abs();
                require(s0 > amp, || format!("need s0 > |s1| + |s3|, got {s0} <= {amp}"))?;
                let tmax = t0.abs() + t2.abs();
                let lam = (s0 - amp).min(1.0 / ((s0 + amp).powi(2) + tmax * tmax).sqrt());
                let fam = Family::PeriodicOnly2d { s0, s1, s3, t0, t2 };
                (fam, 2, t0 == 0.0 && t2 == 0.0, lam, 0.0)
            }
        }
        other => return Err(Error::UnknownFamily(other.to_string())),
    };
    require(lambda > 0.0 && lambda.is_finite(), || {
        format!("family `{id}` with these parameters is not elliptic (lambda = {lambda})")
    })?;
    Ok(CoefficientField {
        id: id.to_string(),
        params: p.finish(id)?,
        family,
        dim,
        transposed: false,
        symmetric,
        lambda,
        lipschitz_x,
    })
}
