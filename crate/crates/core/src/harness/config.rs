//! Study configuration, read from TOML. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::darcy::PermeabilityField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrators::{steps_for, SchemeKind, Setdm1Variant};
use crate::krylov::KrylovConfig;
use crate::noise::{NoiseSpec, Spectrum, DEFAULT_EXPONENTIAL_MODES, DEFAULT_POWERLAW_MODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    LinearAdditive,
    AdvectionHomogeneous,
    AdvectionHeterogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub problem: ProblemKind,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeKind>,
    /// Decreasing step sizes; each must be a multiple of `finest_dt` and divide `t_end`.
    #[serde(default = "default_dt_list")]
    pub dt_list: Vec<f64>,
    /// Step of the shared Brownian path. Defaults to the smallest entry of
    /// `dt_list` for the linear problem and 1/1600 otherwise.
    #[serde(default)]
    pub finest_dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub setdm1_variant: Setdm1Variant,
    /// Theoretical strong order recorded in the report.
    #[serde(default = "default_expected_order")]
    pub expected_order: f64,
    /// Worker threads; `None` uses the rayon default.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_schemes() -> Vec<SchemeKind> {
    SchemeKind::ALL.to_vec()
}
fn default_dt_list() -> Vec<f64> {
    vec![1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0]
}
fn default_t_end() -> f64 {
    1.0
}
fn default_realizations() -> usize {
    10
}
fn default_expected_order() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub l1: f64,
    #[serde(default = "one")]
    pub l2: f64,
}

fn one() -> f64 {
    1.0
}

impl GridSection {
    pub fn square(n: usize) -> Self {
        Self { nx: n, ny: n, l1: 1.0, l2: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    Exponential,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKindName,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_b")]
    pub b1: f64,
    #[serde(default = "default_b")]
    pub b2: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
}

fn default_b() -> f64 {
    0.2
}
fn default_r() -> f64 {
    2.01
}

impl NoiseSection {
    pub fn exponential() -> Self {
        Self { kind: NoiseKindName::Exponential, gamma: 1.0, b1: 0.2, b2: 0.2, r: 2.01, n1: None, n2: None }
    }

    pub fn power_law(r: f64) -> Self {
        Self { kind: NoiseKindName::PowerLaw, gamma: 1.0, b1: 0.2, b2: 0.2, r, n1: None, n2: None }
    }

    pub fn build(&self, grid: &Grid) -> Result<NoiseSpec> {
        let (spectrum, default_n) = match self.kind {
            NoiseKindName::Exponential => {
                (Spectrum::Exponential { gamma: self.gamma, b1: self.b1, b2: self.b2 }, DEFAULT_EXPONENTIAL_MODES)
            }
            NoiseKindName::PowerLaw => (Spectrum::PowerLaw { r: self.r }, DEFAULT_POWERLAW_MODES),
        };
        NoiseSpec::new(
            spectrum,
            self.n1.unwrap_or(default_n),
            self.n2.unwrap_or(default_n),
            grid.l1(),
            grid.l2(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrylovSection {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
}

fn default_m() -> usize {
    KrylovConfig::default().m
}
fn default_tol() -> f64 {
    KrylovConfig::default().tol
}
fn default_restarts() -> usize {
    KrylovConfig::default().max_restarts
}

impl Default for KrylovSection {
    fn default() -> Self {
        let k = KrylovConfig::default();
        Self { m: k.m, tol: k.tol, max_restarts: k.max_restarts }
    }
}

impl From<KrylovSection> for KrylovConfig {
    fn from(k: KrylovSection) -> Self {
        KrylovConfig { m: k.m, tol: k.tol, max_restarts: k.max_restarts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarcySection {
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Defaults to `ceil(ny / 20)`.
    #[serde(default)]
    pub width_cells: Option<usize>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub p_left: f64,
    #[serde(default)]
    pub p_right: f64,
}

fn default_contrast() -> f64 {
    100.0
}
fn default_count() -> usize {
    3
}

impl Default for DarcySection {
    fn default() -> Self {
        Self { contrast: 100.0, count: 3, width_cells: None, mu: 1.0, p_left: 1.0, p_right: 0.0 }
    }
}

impl DarcySection {
    pub fn permeability(&self, grid: &Grid) -> Result<PermeabilityField> {
        let width = self.width_cells.unwrap_or_else(|| grid.ny().div_ceil(20));
        PermeabilityField::streaks(grid, self.contrast, self.count, width, self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Diffusion coefficient of the linear problem.
    #[serde(default = "one")]
    pub diffusion: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self { diffusion: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub krylov: KrylovSection,
    #[serde(default)]
    pub darcy: DarcySection,
    #[serde(default)]
    pub problem: ProblemSection,
}

pub const MULTIPLICATIVE_FINEST_DT: f64 = 1.0 / 1600.0;

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Linear additive study on a `1/n` grid.
    pub fn linear_additive(n: usize, realizations: usize) -> Self {
        Self {
            study: StudySection {
                problem: ProblemKind::LinearAdditive,
                schemes: default_schemes(),
                dt_list: default_dt_list(),
                finest_dt: None,
                t_end: 1.0,
                realizations,
                seed: 0,
                setdm1_variant: Setdm1Variant::AsDefined,
                expected_order: default_expected_order(),
                threads: None,
            },
            grid: GridSection::square(n),
            noise: NoiseSection::exponential(),
            krylov: KrylovSection::default(),
            darcy: DarcySection::default(),
            problem: ProblemSection::default(),
        }
    }

    /// Multiplicative advection study on a `1/n` grid with power-law noise `r = 2.01`.
    pub fn advection(n: usize, realizations: usize, heterogeneous: bool) -> Self {
        let mut cfg = Self::linear_additive(n, realizations);
        cfg.study.problem =
            if heterogeneous { ProblemKind::AdvectionHeterogeneous } else { ProblemKind::AdvectionHomogeneous };
        cfg.study.schemes = vec![SchemeKind::Setdm0, SchemeKind::Setdm1];
        cfg.study.finest_dt = Some(MULTIPLICATIVE_FINEST_DT);
        cfg.noise = NoiseSection::power_law(2.01);
        cfg
    }

    /// Full-resolution settings: grid 1/150, 10 (additive) or 200 (multiplicative) realizations.
    pub fn full_scale(problem: ProblemKind) -> Self {
        match problem {
            ProblemKind::LinearAdditive => Self::linear_additive(150, 10),
            ProblemKind::AdvectionHomogeneous => Self::advection(150, 200, false),
            ProblemKind::AdvectionHeterogeneous => Self::advection(150, 200, true),
        }
    }

    pub fn finest_dt(&self) -> f64 {
        self.study.finest_dt.unwrap_or_else(|| match self.study.problem {
            ProblemKind::LinearAdditive => self.study.dt_list.iter().copied().fold(f64::INFINITY, f64::min),
            _ => MULTIPLICATIVE_FINEST_DT,
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nx, self.grid.ny, self.grid.l1, self.grid.l2)
    }

    pub fn krylov(&self) -> KrylovConfig {
        self.krylov.into()
    }

    /// Fine steps per coarse step for every entry of `dt_list`.
    pub fn coarsenings(&self) -> Result<Vec<usize>> {
        let f = self.finest_dt();
        self.study
            .dt_list
            .iter()
            .map(|&dt| {
                let r = dt / f;
                let p = r.round();
                if p < 1.0 || (r - p).abs() > 1e-9 * r {
                    Err(Error::Config(format!("dt {dt} is not a multiple of finest_dt {f}")))
                } else {
                    Ok(p as usize)
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.study;
        if s.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if s.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if s.dt_list.is_empty() {
            return Err(Error::Config("dt_list is empty".into()));
        }
        if s.dt_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("dt_list must be strictly decreasing".into()));
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::Config("t_end must be positive".into()));
        }
        let f = self.finest_dt();
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Config("finest_dt must be positive".into()));
        }
        for &dt in &s.dt_list {
            steps_for(s.t_end, dt).map_err(|_| Error::Config(format!("dt {dt} does not divide t_end {}", s.t_end)))?;
        }
        steps_for(s.t_end, f).map_err(|_| Error::Config("finest_dt does not divide t_end".into()))?;
        self.coarsenings()?;
        if s.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        self.krylov().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
