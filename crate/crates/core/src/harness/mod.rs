//! ε-sweeps: error norms of the zero, first and second approximations, rate fits and reports.

mod fit;
mod report;

pub use fit::{fit_rate, RateFit};
pub use report::{emit_report, ReportPaths};

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::cell::{build_cell_table, CellSolutions};
use crate::coeff::CoefficientField;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fine::{assemble_fine, assemble_homogenized, Resolvent, ResolventStats};
use crate::grid::TorusGrid;
use crate::homogenize::{effective_matrix, flux_corrector, vector_potential, FluxCorrector, HomogenizedField};
use crate::norm::{operator_norm, NormEstimate};
use crate::operators::{
    corrector_coeffs, double_averaged_matrix, l_chain, m_chain, CorrectorCoeffs, CorrectorOperators, ErrorKind,
    ErrorOperators, SmoothedCorrector, TwoScaleTable,
};
use crate::smoothing::SmoothingSpec;

/// Wall-clock milliseconds per named stage.
pub type Timings = Vec<(String, f64)>;

fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    timings.push((stage.to_string(), t.elapsed().as_secs_f64() * 1e3));
    out
}

/// The ε-independent part of a sweep.
pub struct SweepSetup {
    pub field: CoefficientField,
    pub cells: CellSolutions,
    pub hom: HomogenizedField,
    pub fc: FluxCorrector,
    pub coeffs: CorrectorCoeffs,
    pub timings: Timings,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<SweepSetup> {
    cfg.validate()?;
    let mut timings = Timings::new();
    let setup = |stage: &'static str| move |e: Error| Error::Setup { stage: stage.into(), source: Box::new(e) };
    let field = cfg.field()?;
    let d = field.dim();
    let scheme = cfg.cell_scheme.unwrap_or_else(|| field.preferred_scheme());
    let cells = timed(&mut timings, "cells", || {
        build_cell_table(
            &field,
            TorusGrid::new(d, cfg.n_x)?,
            TorusGrid::new(d, cfg.n_y)?,
            scheme,
            cfg.solver_options(),
        )
    })
    .map_err(setup("cells"))?;
    let hom = timed(&mut timings, "effective", || effective_matrix(&cells, &field)).map_err(setup("effective"))?;
    let fc = timed(&mut timings, "flux", || vector_potential(flux_corrector(&cells, &field, &hom)?))
        .map_err(setup("flux"))?;
    let coeffs =
        timed(&mut timings, "coefficients", || corrector_coeffs(&cells, &fc, &field, &hom)).map_err(setup("coefficients"))?;
    Ok(SweepSetup {
        field,
        cells,
        hom,
        fc,
        coeffs,
        timings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub denominator: usize,
    pub eps: f64,
    pub fine_n: usize,
    /// ‖R_ε − R₀‖ in L² → L²
    pub e0: NormEstimate,
    /// ‖R_ε − R₀ − ε𝒦_ε‖ in L² → H¹
    pub e1: NormEstimate,
    /// ‖R_ε − R₀ − ε𝒞_ε‖ in L² → L²
    pub e2: NormEstimate,
    pub fine_stats: ResolventStats,
    pub hom_stats: ResolventStats,
    pub timings: Timings,
}

/// Builds every operator for ε = 1/k.
pub fn build_operators(
    setup: &SweepSetup,
    cfg: &ExperimentConfig,
    k: usize,
    timings: &mut Timings,
) -> Result<CorrectorOperators> {
    let stage = |s: &'static str| move |e: Error| Error::Stage { stage: s.into(), denominator: k, source: Box::new(e) };
    let d = setup.field.dim();
    let opts = cfg.solver_options();
    let spec = SmoothingSpec::new(d, k, cfg.n_f, cfg.omega_intervals, cfg.t_gauss).map_err(stage("grid"))?;
    let grid = spec.fine_grid().map_err(stage("grid"))?;
    let (r_eps, r0) = timed(timings, "resolvents", || {
        let r_eps = Resolvent::new(assemble_fine(&setup.field, k, cfg.n_f)?, cfg.dense_limit, opts)?;
        let r0 = Resolvent::new(assemble_homogenized(&setup.hom, grid)?, cfg.dense_limit, opts)?;
        Ok((r_eps, r0))
    })
    .map_err(stage("resolvents"))?;
    let (kk, kt) = timed(timings, "correctors", || {
        let kk = SmoothedCorrector::new(TwoScaleTable::build(&setup.cells, false, grid, cfg.n_f)?, spec.clone())?;
        let kt = SmoothedCorrector::new(TwoScaleTable::build(&setup.cells, true, grid, cfg.n_f)?, spec.clone())?;
        Ok((kk, kt))
    })
    .map_err(stage("correctors"))?;
    let l = timed(timings, "l_operator", || l_chain(&setup.coeffs, grid)).map_err(stage("l_operator"))?;
    let m = timed(timings, "m_operator", || {
        m_chain(&double_averaged_matrix(&setup.field, &setup.cells, &spec)?, grid)
    })
    .map_err(stage("m_operator"))?;
    Ok(CorrectorOperators {
        grid,
        eps: spec.eps(),
        r_eps: Arc::new(r_eps),
        r0: Arc::new(r0),
        k: Arc::new(kk),
        kt: Arc::new(kt),
        l: Arc::new(l),
        m: Arc::new(m),
    })
}

pub fn run_point(setup: &SweepSetup, cfg: &ExperimentConfig, k: usize) -> Result<SweepPoint> {
    let mut timings = Timings::new();
    let ops = Arc::new(build_operators(setup, cfg, k, &mut timings)?);
    let power = cfg.power_options();
    let mut norm = |name: &'static str, kind: ErrorKind| {
        let op = ErrorOperators::new(ops.clone(), kind);
        timed(&mut timings, name, || operator_norm(&op, power)).map_err(|e| Error::Stage {
            stage: name.into(),
            denominator: k,
            source: Box::new(e),
        })
    };
    let e0 = norm("norm_e0", ErrorKind::Zero)?;
    let e1 = norm("norm_e1", ErrorKind::First)?;
    let e2 = norm("norm_e2", ErrorKind::Second)?;
    Ok(SweepPoint {
        denominator: k,
        eps: ops.eps,
        fine_n: ops.grid.n,
        e0,
        e1,
        e2,
        fine_stats: ops.r_eps.stats(),
        hom_stats: ops.r0.stats(),
        timings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    /// ordered by decreasing ε
    pub points: Vec<SweepPoint>,
    pub setup_timings: Timings,
    /// R_ε = R₀ in the continuum, so the errors only measure the discretization
    pub floor: bool,
    /// set when the sweep aborted; `points` then holds what finished
    pub failure: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCurve {
    E0,
    E1,
    E2,
}

impl ErrorCurve {
    pub const ALL: [ErrorCurve; 3] = [ErrorCurve::E0, ErrorCurve::E1, ErrorCurve::E2];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCurve::E0 => "E0",
            ErrorCurve::E1 => "E1",
            ErrorCurve::E2 => "E2",
        }
    }

    pub fn of(self, p: &SweepPoint) -> f64 {
        match self {
            ErrorCurve::E0 => p.e0.value,
            ErrorCurve::E1 => p.e1.value,
            ErrorCurve::E2 => p.e2.value,
        }
    }
}

impl ConvergenceReport {
    pub fn empty(config: ExperimentConfig) -> Self {
        ConvergenceReport {
            config,
            points: Vec::new(),
            setup_timings: Timings::new(),
            floor: false,
            failure: None,
        }
    }

    pub fn eps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eps).collect()
    }

    pub fn errors(&self, c: ErrorCurve) -> Vec<f64> {
        self.points.iter().map(|p| c.of(p)).collect()
    }

    pub fn fit(&self, c: ErrorCurve) -> Result<RateFit> {
        if self.floor {
            return Err(Error::Fit("errors sit at the discretization floor".into()));
        }
        fit_rate(&self.eps(), &self.errors(c))
    }

    pub fn is_partial(&self) -> bool {
        self.failure.is_some()
    }
}

/// A sweep that stopped early, with the points that did finish.
#[derive(Debug)]
pub struct SweepFailure {
    pub partial: Box<ConvergenceReport>,
    pub error: Error,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} of {} points finished)", self.error, self.partial.points.len(), self.partial.config.eps_denominators.len())
    }
}

impl std::error::Error for SweepFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn is_floor(field: &CoefficientField, points: &[SweepPoint]) -> bool {
    field.is_y_independent() || points.iter().any(|p| ErrorCurve::ALL.iter().any(|c| !(c.of(p) > 0.0)))
}

/// Runs every ε of the config. The ε points run concurrently on the current rayon pool and
/// are merged in order of decreasing ε.
pub fn run_sweep(cfg: &ExperimentConfig) -> std::result::Result<ConvergenceReport, SweepFailure> {
    let mut report = ConvergenceReport::empty(cfg.clone());
    let fail = |report: ConvergenceReport, error: Error| {
        let mut partial = report;
        partial.failure = Some(error.to_string());
        SweepFailure {
            partial: Box::new(partial),
            error,
        }
    };
    let setup = match prepare(cfg) {
        Ok(s) => s,
        Err(e) => return Err(fail(report, e)),
    };
    report.setup_timings = setup.timings.clone();
    let results: Vec<Result<SweepPoint>> =
        cfg.eps_denominators.par_iter().map(|&k| run_point(&setup, cfg, k)).collect();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(p) => report.points.push(p),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    report.floor = is_floor(&setup.field, &report.points);
    match first_error {
        Some(e) => Err(fail(report, e)),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_family(family);
        c.n_x = 8;
        c.n_y = 32;
        c.n_f = 16;
        c.omega_intervals = 16;
        c.eps_denominators = vec![4, 8, 16];
        c
    }

    #[test]
    fn one_dimensional_sweep_orders_the_errors() {
        let r = run_sweep(&small("separable_1d")).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!(!r.floor);
        assert!(r.points.windows(2).all(|w| w[0].eps > w[1].eps));
        let f0 = r.fit(ErrorCurve::E0).unwrap();
        let f2 = r.fit(ErrorCurve::E2).unwrap();
        assert!(f2.slope - f0.slope >= 0.5, "{f0:?} {f2:?}");
        let last = r.points.last().unwrap();
        assert!(last.e2.value <= last.e0.value);
        for p in &r.points {
            assert!(p.e0.value >= 0.0 && p.e1.value >= 0.0 && p.e2.value >= 0.0);
        }
    }

    #[test]
    fn constant_family_is_flagged_floor() {
        let mut c = small("constant");
        c.params.insert("dim".into(), 1.0);
        c.params.insert("a11".into(), 1.5);
        let r = run_sweep(&c).unwrap();
        assert!(r.floor);
        assert!(r.fit(ErrorCurve::E2).is_err());
        assert!(r.points.iter().all(|p| p.e0.value < 1e-10 && p.e2.value < 1e-10), "{:?}", r.points.iter().map(|p| (p.e0.value, p.e1.value, p.e2.value)).collect::<Vec<_>>());
    }

    #[test]
    fn stage_failure_names_eps_and_keeps_finished_points() {
        let mut c = small("separable_1d");
        c.eps_denominators = vec![4, 8];
        c.power_max_iter = 1;
        let f = run_sweep(&c).unwrap_err();
        match &f.error {
            Error::Stage { stage, denominator, .. } => {
                assert_eq!(stage, "norm_e0");
                assert_eq!(*denominator, 4);
            }
            other => panic!("{other:?}"),
        }
        assert!(f.error.is_solver_failure());
        assert!(f.partial.is_partial());

        let mut c = small("smooth_2d_nonsymmetric");
        c.max_iter = 1;
        let f = run_sweep(&c).unwrap_err();
        assert!(matches!(&f.error, Error::Setup { stage, .. } if stage == "cells"), "{}", f.error);
        assert!(f.partial.points.is_empty());
    }

    #[test]
    fn sweeps_are_deterministic() {
        let c = small("separable_1d");
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&c).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!((p.e0, p.e1, p.e2), (q.e0, q.e1, q.e2));
        }
    }
}
