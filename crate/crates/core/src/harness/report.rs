use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{ConvergenceReport, ErrorCurve};

pub const CSV_HEADER: &str = "eps_denominator,eps,E0,E1,E2,iterations_E0,iterations_E1,iterations_E2";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub timings: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: &Path) -> Self {
        ReportPaths {
            csv: dir.join("convergence.csv"),
            timings: dir.join("timings.csv"),
            summary: dir.join("summary.txt"),
            plot: dir.join("loglog.dat"),
        }
    }
}

impl ConvergenceReport {
    /// Deterministic columns only; identical configs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
                p.denominator, p.eps, p.e0.value, p.e1.value, p.e2.value, p.e0.iterations, p.e1.iterations, p.e2.iterations
            );
        }
        s
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("scope,stage,wall_ms\n");
        for (stage, ms) in &self.setup_timings {
            let _ = writeln!(s, "setup,{stage},{ms:.3}");
        }
        for p in &self.points {
            for (stage, ms) in &p.timings {
                let _ = writeln!(s, "1/{},{stage},{ms:.3}", p.denominator);
            }
        }
        s
    }

    /// log10 ε against log10 E for each curve; nonpositive errors are written as nan.
    pub fn plot_data(&self) -> String {
        let mut s = String::from("# log10_eps log10_E0 log10_E1 log10_E2\n");
        let lg = |v: f64| if v > 0.0 { format!("{:.8}", v.log10()) } else { "nan".into() };
        for p in &self.points {
            let _ = writeln!(
                s,
                "{:.8} {} {} {}",
                p.eps.log10(),
                lg(p.e0.value),
                lg(p.e1.value),
                lg(p.e2.value)
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "family: {}", c.family);
        let _ = writeln!(
            s,
            "grids: n_x = {}, n_y = {}, n_f = {}, omega intervals = {}, t-points = {}",
            c.n_x, c.n_y, c.n_f, c.omega_intervals, c.t_gauss
        );
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "PARTIAL: sweep aborted: {f}");
        }
        if self.points.is_empty() {
            let _ = writeln!(s, "no data");
        } else {
            let _ = writeln!(s, "\n{:>8} {:>14} {:>14} {:>14}", "eps", "E0", "E1", "E2");
            for p in &self.points {
                let _ = writeln!(
                    s,
                    "{:>8} {:>14.6e} {:>14.6e} {:>14.6e}",
                    format!("1/{}", p.denominator),
                    p.e0.value,
                    p.e1.value,
                    p.e2.value
                );
            }
            let _ = writeln!(s);
            if self.floor {
                let _ = writeln!(
                    s,
                    "floor: the errors measure only the discretization (R_eps = R_0 in the continuum); slopes are not meaningful"
                );
            } else {
                for curve in ErrorCurve::ALL {
                    match self.fit(curve) {
                        Ok(f) => {
                            let _ = writeln!(
                                s,
                                "{}: slope {:.4}, prefactor {:.4e}, log residual {:.2e}",
                                curve.name(),
                                f.slope,
                                f.prefactor(),
                                f.residual
                            );
                        }
                        Err(e) => {
                            let _ = writeln!(s, "{}: no fit ({e})", curve.name());
                        }
                    }
                }
            }
        }
        let _ = writeln!(s, "\nconfig:\n{}", c.to_normalized_string());
        s
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_report(report: &ConvergenceReport, paths: &ReportPaths) -> Result<()> {
    write(&paths.csv, &report.to_csv())?;
    write(&paths.timings, &report.timings_csv())?;
    write(&paths.summary, &report.summary())?;
    write(&paths.plot, &report.plot_data())
}
