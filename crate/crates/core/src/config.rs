//! Experiment configuration: a flat sectioned key/value file.
//!
//! ```text
//! [coefficient]
//! family = smooth_2d_nonsymmetric
//! s1 = 0.5
//!
//! [grids]
//! n_x = 48
//! n_y = 32
//! n_f = 8
//! cell_scheme = auto
//!
//! [sweep]
//! eps_denominators = 8, 16, 32
//!
//! [solver]
//! tol = 1e-10
//! power_tol = 1e-6
//!
//! [output]
//! dir = out
//! ```
//!
//! Any key in `[coefficient]` other than `family` is a numeric family parameter.
//! `[sweep]` also accepts `eps = 0.125, 0.0625`; every value must be 1/k with k ≥ 2.
//! Lines starting with `#` or `;` are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coeff::{builtin_family, CellScheme, CoefficientField};
use crate::error::{Error, Result};
use crate::krylov::SolverOptions;
use crate::norm::PowerOptions;

const SECTIONS: [&str; 5] = ["coefficient", "grids", "sweep", "solver", "output"];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub n_x: usize,
    pub n_y: usize,
    pub n_f: usize,
    /// `None` picks the family's preferred scheme.
    pub cell_scheme: Option<CellScheme>,
    /// ε = 1/k for each k, kept ascending so ε is descending.
    pub eps_denominators: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
    pub omega_intervals: usize,
    pub t_gauss: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    pub dense_limit: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for a family: n_x = 32, n_y = 64, n_f = 16, ε = 1/8 … 1/64.
    pub fn for_family(family: &str) -> Self {
        ExperimentConfig {
            family: family.to_string(),
            params: BTreeMap::new(),
            n_x: 32,
            n_y: 64,
            n_f: 16,
            cell_scheme: None,
            eps_denominators: vec![8, 16, 32, 64],
            tol: 1e-10,
            max_iter: 2000,
            omega_intervals: 16,
            t_gauss: 3,
            power_tol: 1e-6,
            power_max_iter: 500,
            dense_limit: 1024,
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut section: Option<&str> = None;
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut family: Option<String> = None;
        let mut cfg = ExperimentConfig::for_family("");
        let mut omega_set = false;
        let mut eps_line = 0;
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let perr = |msg: String| Error::ConfigParse { line: line_no, msg };
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| perr(format!("unterminated section header `{line}`")))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|s| **s == name)
                        .copied()
                        .ok_or_else(|| perr(format!("unknown section `[{name}]`")))?,
                );
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(perr("empty key".into()));
            }
            let sec = section.ok_or_else(|| perr(format!("key `{key}` outside of any section")))?;
            if let Some(first) = seen.insert((sec.to_string(), key.to_string()), line_no) {
                return Err(perr(format!("duplicate key `{key}` (first set on line {first})")));
            }
            let usize_of = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| perr(format!("`{key}` expects a nonnegative integer, got `{v}`")))
            };
            let f64_of = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| perr(format!("`{key}` expects a number, got `{v}`")))
            };
            match (sec, key) {
                ("coefficient", "family") => family = Some(value.to_string()),
                ("coefficient", _) => {
                    cfg.params.insert(key.to_string(), f64_of(value)?);
                }
                ("grids", "n_x") => cfg.n_x = usize_of(value)?,
                ("grids", "n_y") => cfg.n_y = usize_of(value)?,
                ("grids", "n_f") => cfg.n_f = usize_of(value)?,
                ("grids", "cell_scheme") => {
                    cfg.cell_scheme = match value {
                        "auto" => None,
                        "spectral" => Some(CellScheme::Spectral),
                        "finite_volume" => Some(CellScheme::FiniteVolume),
                        _ => return Err(perr(format!("unknown cell_scheme `{value}`"))),
                    }
                }
                ("sweep", "eps_denominators") | ("sweep", "eps") => {
                    if eps_line != 0 {
                        return Err(perr(format!("ε list already given on line {eps_line}")));
                    }
                    eps_line = line_no;
                    cfg.eps_denominators = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            if key == "eps" {
                                denominator_of(f64_of(s)?).map_err(&perr)
                            } else {
                                usize_of(s)
                            }
                        })
                        .collect::<Result<_>>()?;
                }
                ("solver", "tol") => cfg.tol = f64_of(value)?,
                ("solver", "max_iter") => cfg.max_iter = usize_of(value)?,
                ("solver", "omega_intervals") => {
                    cfg.omega_intervals = usize_of(value)?;
                    omega_set = true;
                }
                ("solver", "t_gauss") => cfg.t_gauss = usize_of(value)?,
                ("solver", "power_tol") => cfg.power_tol = f64_of(value)?,
                ("solver", "power_max_iter") => cfg.power_max_iter = usize_of(value)?,
                ("solver", "dense_limit") => cfg.dense_limit = usize_of(value)?,
                ("solver", "seed") => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| perr(format!("`seed` expects a nonnegative integer, got `{value}`")))?
                }
                ("output", "dir") => cfg.output_dir = PathBuf::from(value),
                _ => return Err(perr(format!("unknown key `{key}` in [{sec}]"))),
            }
        }
        cfg.family = family.ok_or_else(|| Error::InvalidConfig("[coefficient] family is required".into()))?;
        if !omega_set {
            cfg.omega_intervals = cfg.n_f;
        }
        cfg.eps_denominators.sort_unstable();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.eps_denominators.is_empty() {
            return bad("the ε list is empty".into());
        }
        if let Some(k) = self.eps_denominators.iter().find(|&&k| k < 2) {
            return bad(format!("ε = 1/{k} is not of the form 1/k with k ≥ 2"));
        }
        if self.eps_denominators.windows(2).any(|w| w[0] >= w[1]) {
            return bad("ε values must be distinct and sorted".into());
        }
        if self.n_f < 8 || !self.n_f.is_multiple_of(2) {
            return bad(format!("n_f = {} must be even and at least 8", self.n_f));
        }
        if self.n_y < 8 || !self.n_y.is_multiple_of(2) {
            return bad(format!("n_y = {} must be even and at least 8", self.n_y));
        }
        if !self.n_y.is_multiple_of(self.n_f) {
            return bad(format!("n_f = {} must divide n_y = {}", self.n_f, self.n_y));
        }
        if self.n_x < 4 || !self.n_x.is_multiple_of(2) {
            return bad(format!("n_x = {} must be even and at least 4", self.n_x));
        }
        if self.omega_intervals < 2 || !self.omega_intervals.is_multiple_of(2) || !self.n_f.is_multiple_of(self.omega_intervals) {
            return bad(format!(
                "omega_intervals = {} must be even and divide n_f = {}",
                self.omega_intervals, self.n_f
            ));
        }
        if self.t_gauss == 0 {
            return bad("t_gauss must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.power_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iter == 0 || self.power_max_iter == 0 {
            return bad("iteration budgets must be positive".into());
        }
        Ok(())
    }

    pub fn eps(&self) -> Vec<f64> {
        self.eps_denominators.iter().map(|&k| 1.0 / k as f64).collect()
    }

    pub fn field(&self) -> Result<CoefficientField> {
        builtin_family(&self.family, &self.params)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn power_options(&self) -> PowerOptions {
        PowerOptions {
            tol: self.power_tol,
            max_iter: self.power_max_iter,
            seed: self.seed,
            ..PowerOptions::default()
        }
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_normalized_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[coefficient]\nfamily = {}", self.family);
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        let scheme = self.cell_scheme.map_or("auto", CellScheme::name);
        let _ = writeln!(
            s,
            "\n[grids]\nn_x = {}\nn_y = {}\nn_f = {}\ncell_scheme = {scheme}",
            self.n_x, self.n_y, self.n_f
        );
        let eps: Vec<String> = self.eps_denominators.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "\n[sweep]\neps_denominators = {}", eps.join(", "));
        let _ = writeln!(
            s,
            "\n[solver]\ntol = {:?}\nmax_iter = {}\nomega_intervals = {}\nt_gauss = {}\npower_tol = {:?}\npower_max_iter = {}\ndense_limit = {}\nseed = {}",
            self.tol,
            self.max_iter,
            self.omega_intervals,
            self.t_gauss,
            self.power_tol,
            self.power_max_iter,
            self.dense_limit,
            self.seed
        );
        let _ = writeln!(s, "\n[output]\ndir = {}", self.output_dir.display());
        s
    }
}

fn denominator_of(eps: f64) -> std::result::Result<usize, String> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(format!("ε = {eps} is not of the form 1/k with k ≥ 2"));
    }
    let k = (1.0 / eps).round();
    if ((1.0 / eps) - k).abs() > 1e-9 * k {
        return Err(format!("ε = {eps} is not of the form 1/k"));
    }
    Ok(k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse("[coefficient]\nfamily = separable_1d\n").unwrap();
        let mut d = ExperimentConfig::for_family("separable_1d");
        d.omega_intervals = d.n_f;
        assert_eq!(c, d);
        assert_eq!(c.eps(), vec![0.125, 0.0625, 0.03125, 0.015625]);
    }

    #[test]
    fn eps_not_reciprocal_integer_is_rejected() {
        let e = ExperimentConfig::parse("[coefficient]\nfamily = constant\n[sweep]\neps = 0.3\n").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 4, .. }), "{e}");
        let e = ExperimentConfig::parse("[coefficient]\nfamily = constant\n[sweep]\neps_denominators = 1, 8\n")
            .unwrap_err();
        assert!(matches!(e, Error::InvalidConfig(_)));
        let c = ExperimentConfig::parse("[coefficient]\nfamily = constant\n[sweep]\neps = 0.0625, 0.125, 0.25\n")
            .unwrap();
        assert_eq!(c.eps_denominators, vec![4, 8, 16]);
    }

    #[test]
    fn full_config_round_trips() {
        let text = "\
# sweep for the nonsymmetric family
[coefficient]
family = smooth_2d_nonsymmetric
t1 = 0.1
s1 = 0.4

[grids]
n_x = 48
n_y = 32
n_f = 8
cell_scheme = spectral

[sweep]
eps_denominators = 32, 8, 16

[solver]
tol = 1e-11
max_iter = 900
omega_intervals = 4
t_gauss = 2
power_tol = 1e-7
power_max_iter = 300
dense_limit = 2048
seed = 7

[output]
dir = results/run1
";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.eps_denominators, vec![8, 16, 32]);
        assert_eq!(c.cell_scheme, Some(CellScheme::Spectral));
        assert_eq!(c.params.len(), 2);
        let norm = c.to_normalized_string();
        let again = ExperimentConfig::parse(&norm).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_normalized_string(), norm);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("[coefficient]\nfamily = constant\n[grid]\n", 3),
            ("[coefficient]\nfamily = constant\nfamily = laminate_2d\n", 3),
            ("family = constant\n", 1),
            ("[coefficient]\nfamily = constant\n\n[grids]\nn_x = many\n", 5),
            ("[coefficient]\nfamily = constant\n[solver]\nbogus = 1\n", 4),
            ("[coefficient]\nfamily constant\n", 2),
            ("[coefficient\n", 1),
        ];
        for (text, line) in cases {
            match ExperimentConfig::parse(text) {
                Err(Error::ConfigParse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn resolution_constraints() {
        for extra in [
            "[grids]\nn_f = 6\n",
            "[grids]\nn_y = 7\n",
            "[grids]\nn_y = 48\nn_f = 32\n",
            "[grids]\nn_x = 3\n",
            "[solver]\nomega_intervals = 3\n",
            "[solver]\nomega_intervals = 32\n",
        ] {
            let text = format!("[coefficient]\nfamily = constant\n{extra}");
            assert!(
                matches!(ExperimentConfig::parse(&text), Err(Error::InvalidConfig(_))),
                "{extra}"
            );
        }
        assert!(matches!(
            ExperimentConfig::parse("[grids]\nn_x = 8\n"),
            Err(Error::InvalidConfig(_))
        ));
    }
}
