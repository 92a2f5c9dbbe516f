//! Strong-convergence studies: every scheme and step size is run on the
//! same Brownian path as the reference, per realization, and the RMS `L2`
//! error is fitted against `dt` on log-log axes.

pub mod config;
pub mod metrics;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    DarcySection, GridSection, KrylovSection, NoiseKindName, NoiseSection, ProblemKind, ProblemSection,
    StudyConfig, StudySection, MULTIPLICATIVE_FINEST_DT,
};
pub use metrics::{fit_order, rms_l2_error, squared_l2_distance};

use crate::error::{Error, Result};
use crate::integrators::{
    advection_heterogeneous, advection_homogeneous, linear_additive, run, run_with, steps_for, ProblemDef,
    SchemeConfig, SchemeKind, Setdm1Variant, Trajectory,
};
use crate::krylov::KrylovConfig;
use crate::noise::{make_path, NoisePath};
use crate::reference::{exact_linear_solution, finest_reference};

/// Build the discrete problem described by `cfg`.
pub fn build_problem(cfg: &StudyConfig) -> Result<ProblemDef> {
    let grid = cfg.grid()?;
    let noise = cfg.noise.build(&grid)?;
    match cfg.study.problem {
        ProblemKind::LinearAdditive => linear_additive(&grid, cfg.problem.diffusion, noise),
        ProblemKind::AdvectionHomogeneous => advection_homogeneous(&grid, noise),
        ProblemKind::AdvectionHeterogeneous => {
            let perm = cfg.darcy.permeability(&grid)?;
            advection_heterogeneous(&grid, &perm, noise)
        }
    }
}

/// Brownian path of realization `r`, covering `t_end` at `finest_dt`.
pub fn study_path(cfg: &StudyConfig, problem: &ProblemDef, realization: u64) -> Result<NoisePath> {
    let f = cfg.finest_dt();
    let steps = steps_for(cfg.study.t_end, f)?;
    make_path(&problem.noise, cfg.study.seed, realization, f, steps)
}

/// A single trajectory of `scheme` at step `dt` for realization `r`.
pub fn solve_single(
    cfg: &StudyConfig,
    problem: &ProblemDef,
    scheme: SchemeKind,
    dt: f64,
    realization: u64,
) -> Result<Trajectory> {
    let path = study_path(cfg, problem, realization)?;
    let p = coarsening_of(dt, path.finest_dt())?;
    let sc = scheme_config(cfg, scheme, dt)?;
    run(problem, &sc, &path, p)
}

fn coarsening_of(dt: f64, finest: f64) -> Result<usize> {
    let r = dt / finest;
    let p = r.round();
    if p < 1.0 || (r - p).abs() > 1e-9 * r {
        return Err(Error::Config(format!("dt {dt} is not a multiple of finest_dt {finest}")));
    }
    Ok(p as usize)
}

fn scheme_config(cfg: &StudyConfig, scheme: SchemeKind, dt: f64) -> Result<SchemeConfig> {
    Ok(SchemeConfig::for_horizon(scheme, dt, cfg.study.t_end)?
        .with_krylov(cfg.krylov())
        .with_variant(cfg.study.setdm1_variant))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Exact spectral solution of the linear problem.
    ExactSpectral,
    /// SETDM1 at the finest step of the shared path.
    FinestSetdm1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: SchemeKind,
    pub dt: f64,
    /// NaN when every realization of the cell was flagged.
    pub rms_error: f64,
    /// Realizations that contributed to `rms_error`.
    pub realizations: usize,
    pub flagged_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedOrder {
    pub scheme: SchemeKind,
    pub order: Option<f64>,
    pub intercept: Option<f64>,
    /// Number of `(dt, error)` points used.
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub problem: ProblemKind,
    pub reference: ReferenceKind,
    pub seed: u64,
    pub realizations: usize,
    pub t_end: f64,
    pub finest_dt: f64,
    pub dt_list: Vec<f64>,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub noise_modes: (usize, usize),
    pub krylov: KrylovSection,
    pub setdm1_variant: Setdm1Variant,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub darcy: Option<DarcySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    pub fitted_orders: Vec<FittedOrder>,
    pub expected_order: f64,
}

impl ConvergenceReport {
    pub fn rows_for(&self, scheme: SchemeKind) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn order(&self, scheme: SchemeKind) -> Option<f64> {
        self.fitted_orders.iter().find(|f| f.scheme == scheme).and_then(|f| f.order)
    }

    pub fn total_flagged(&self) -> usize {
        self.rows.iter().map(|r| r.flagged_count).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "scheme,dt,rms_error,realizations,flagged_count")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e},{},{}", r.scheme.label(), r.dt, r.rms_error, r.realizations, r.flagged_count)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn to_json_string(&self) -> Result<String> {
        // NaN has no JSON encoding; serde_json writes it as null.
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Write `report.csv` and `report.json` into `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv_string())?;
        std::fs::write(dir.join("report.json"), self.to_json_string()?)?;
        Ok(())
    }
}

/// Squared `L2` errors of one realization, indexed `[scheme][level]`;
/// `None` marks a flagged cell.
type RealizationErrors = Vec<Vec<Option<f64>>>;

fn is_flaggable(e: &Error) -> bool {
    matches!(e, Error::Divergence { .. } | Error::Convergence { .. })
}

fn flag<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_flaggable(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

struct StudyContext<'a> {
    cfg: &'a StudyConfig,
    problem: ProblemDef,
    weights: Vec<f64>,
    coarsenings: Vec<usize>,
    krylov: KrylovConfig,
}

impl StudyContext<'_> {
    fn reference(&self, path: &NoisePath) -> Result<Vec<f64>> {
        let t_end = self.cfg.study.t_end;
        match self.cfg.study.problem {
            ProblemKind::LinearAdditive => {
                let steps = steps_for(t_end, path.finest_dt())?;
                exact_linear_solution(
                    &self.problem.noise,
                    self.cfg.problem.diffusion,
                    self.problem.synth(),
                    path,
                    path.finest_dt(),
                    steps,
                )
            }
            _ => Ok(finest_reference(&self.problem, path, t_end, self.krylov)?.final_state),
        }
    }

    fn realization(&self, r: u64) -> Result<RealizationErrors> {
        let schemes = &self.cfg.study.schemes;
        let levels = self.cfg.study.dt_list.len();
        let path = study_path(self.cfg, &self.problem, r)?;
        let Some(reference) = flag(self.reference(&path))? else {
            return Ok(vec![vec![None; levels]; schemes.len()]);
        };
        let mut out = vec![vec![None; levels]; schemes.len()];
        for (l, (&dt, &p)) in self.cfg.study.dt_list.iter().zip(&self.coarsenings).enumerate() {
            let steps = steps_for(self.cfg.study.t_end, dt)?;
            let increments = (0..steps).map(|k| self.problem.increment(&path, k, p)).collect::<Result<Vec<_>>>()?;
            for (s, &scheme) in schemes.iter().enumerate() {
                let sc = scheme_config(self.cfg, scheme, dt)?;
                let traj = flag(run_with(&self.problem, &sc, |k| Ok(increments[k].clone()), false))?;
                out[s][l] = match traj {
                    Some(t) => Some(squared_l2_distance(&t.final_state, &reference, &self.weights)?),
                    None => None,
                };
            }
        }
        Ok(out)
    }
}

/// Fold per-realization squared errors into report rows, in realization order.
fn reduce(schemes: &[SchemeKind], dt_list: &[f64], per_realization: &[RealizationErrors]) -> (Vec<ReportRow>, Vec<FittedOrder>) {
    let mut rows = Vec::new();
    let mut fitted_orders = Vec::new();
    for (s, &scheme) in schemes.iter().enumerate() {
        let mut fit_dts = Vec::new();
        let mut fit_errs = Vec::new();
        for (l, &dt) in dt_list.iter().enumerate() {
            let mut sum = 0.0;
            let mut used = 0;
            let mut flagged = 0;
            for errs in per_realization {
                match errs[s][l] {
                    Some(e) => {
                        sum += e;
                        used += 1;
                    }
                    None => flagged += 1,
                }
            }
            let rms = if used > 0 { (sum / used as f64).sqrt() } else { f64::NAN };
            if rms.is_finite() && rms > 0.0 {
                fit_dts.push(dt);
                fit_errs.push(rms);
            }
            rows.push(ReportRow { scheme, dt, rms_error: rms, realizations: used, flagged_count: flagged });
        }
        let points = fit_dts.len();
        fitted_orders.push(match fit_order(&fit_dts, &fit_errs) {
            Ok((order, intercept)) => {
                FittedOrder { scheme, order: Some(order), intercept: Some(intercept), points, note: None }
            }
            Err(e) => FittedOrder { scheme, order: None, intercept: None, points, note: Some(e.to_string()) },
        });
    }

    (rows, fitted_orders)
}

/// Run the study described by `cfg`.
///
/// Realizations run in parallel; the reduction over realizations is done in
/// realization order so the report does not depend on the thread count.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    match cfg.study.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| run_study_in_pool(cfg))
        }
        None => run_study_in_pool(cfg),
    }
}

fn run_study_in_pool(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let problem = build_problem(cfg)?;
    let weights = problem.grid().quadrature_weights(problem.layout());
    let ctx = StudyContext { cfg, problem, weights, coarsenings: cfg.coarsenings()?, krylov: cfg.krylov() };

    let per_realization: Vec<RealizationErrors> = (0..cfg.study.realizations as u64)
        .into_par_iter()
        .map(|r| ctx.realization(r))
        .collect::<Result<Vec<_>>>()?;

    let (rows, fitted_orders) = reduce(&cfg.study.schemes, &cfg.study.dt_list, &per_realization);

    let noise = &ctx.problem.noise;
    let metadata = ReportMetadata {
        problem: cfg.study.problem,
        reference: match cfg.study.problem {
            ProblemKind::LinearAdditive => ReferenceKind::ExactSpectral,
            _ => ReferenceKind::FinestSetdm1,
        },
        seed: cfg.study.seed,
        realizations: cfg.study.realizations,
        t_end: cfg.study.t_end,
        finest_dt: cfg.finest_dt(),
        dt_list: cfg.study.dt_list.clone(),
        grid: cfg.grid.clone(),
        noise: cfg.noise.clone(),
        noise_modes: (noise.n1, noise.n2),
        krylov: cfg.krylov,
        setdm1_variant: cfg.study.setdm1_variant,
        darcy: (cfg.study.problem == ProblemKind::AdvectionHeterogeneous).then_some(cfg.darcy),
    };
    Ok(ConvergenceReport { metadata, rows, fitted_orders, expected_order: cfg.study.expected_order })
}
