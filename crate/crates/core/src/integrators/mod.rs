//! Time stepping for `dX = (A_h X + F(X)) dt + B(X) dW`.
//!
//! With `d = P_h F(X) + c0 X` and `g = P_h B(X) dW` (both zero at Dirichlet
//! DOFs) one step of each scheme is
//!
//! - SETDM0: `phi_0(dt A)(X + dt d + g)`
//! - SETDM1: `exp(dt A)(X + g) + dt phi_1(dt A) d`, or in the rewritten form
//!   `X + dt phi_1(dt A)(A (X + g) + d)`
//! - semi-implicit Euler-Maruyama: `(I - dt A) X' = X + dt d + g`

mod problems;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use problems::{
    advection_heterogeneous, advection_homogeneous, advection_with_velocity, linear_additive,
    linear_folded, ADVECTION_DIFFUSION, LINEAR_REACTION,
};

use crate::error::{invalid, Error, Result};
use crate::grid::{DofLayout, Grid};
use crate::krylov::{affine_flow, phi0_action, KrylovConfig};
use crate::linsolve::bicgstab;
use crate::noise::{NoisePath, NoiseSpec, NoiseSynth};
use crate::operators::DiscreteProblem;
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Setdm0,
    Setdm1,
    SemiImplicit,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [Self::Setdm0, Self::Setdm1, Self::SemiImplicit];

    pub fn label(self) -> &'static str {
        match self {
            Self::Setdm0 => "SETDM0",
            Self::Setdm1 => "SETDM1",
            Self::SemiImplicit => "Implicit",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "setdm0" => Ok(Self::Setdm0),
            "setdm1" => Ok(Self::Setdm1),
            "semiimplicit" | "implicit" => Ok(Self::SemiImplicit),
            _ => Err(Error::Config(format!("unknown scheme `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setdm1Variant {
    /// `exp(dt A)(X + g) + dt phi_1(dt A) d`.
    #[default]
    AsDefined,
    /// `X + dt phi_1(dt A)(A (X + g) + d)`.
    AsRewritten,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub steps: usize,
    pub krylov: KrylovConfig,
    pub setdm1_variant: Setdm1Variant,
    /// Relative residual target of the semi-implicit linear solve.
    pub solver_tol: f64,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, dt: f64, steps: usize) -> Result<Self> {
        let cfg = Self {
            scheme,
            dt,
            steps,
            krylov: KrylovConfig::default(),
            setdm1_variant: Setdm1Variant::default(),
            solver_tol: 1e-10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Steps of size `dt` covering `[0, t_end]`; `t_end` must be a multiple of `dt`.
    pub fn for_horizon(scheme: SchemeKind, dt: f64, t_end: f64) -> Result<Self> {
        Self::new(scheme, dt, steps_for(t_end, dt)?)
    }

    pub fn with_krylov(mut self, krylov: KrylovConfig) -> Self {
        self.krylov = krylov;
        self
    }

    pub fn with_variant(mut self, variant: Setdm1Variant) -> Self {
        self.setdm1_variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(invalid("at least one step is required"));
        }
        self.krylov.validate()
    }
}

/// `round(t / dt)` if `t` is an integer multiple of `dt` up to rounding.
pub fn steps_for(t: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && t > 0.0) {
        return Err(invalid("time horizon and step must be positive"));
    }
    let r = t / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) || n < 1.0 {
        return Err(invalid(format!("{t} is not a multiple of {dt}")));
    }
    Ok(n as usize)
}

/// Pointwise map `(x, y, u) -> value` lifted to DOF vectors.
#[derive(Clone)]
pub enum Nonlinearity {
    Zero,
    Constant(f64),
    /// `a * u`
    Linear(f64),
    /// `-u / (|u| + 1)`
    Saturating,
    /// `u`
    Identity,
    Custom(Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Linear(a) => write!(f, "Linear({a})"),
            Self::Saturating => f.write_str("Saturating"),
            Self::Identity => f.write_str("Identity"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Nonlinearity {
    pub fn eval(&self, x: f64, y: f64, u: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Linear(a) => a * u,
            Self::Saturating => -u / (u.abs() + 1.0),
            Self::Identity => u,
            Self::Custom(f) => f(x, y, u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero) || matches!(self, Self::Constant(c) if *c == 0.0)
    }
}

/// A fully specified SPDE on a discrete space.
#[derive(Debug, Clone)]
pub struct ProblemDef {
    pub discrete: DiscreteProblem,
    pub f: Nonlinearity,
    pub b: Nonlinearity,
    pub noise: NoiseSpec,
    pub x0: Vec<f64>,
    coords: Vec<(f64, f64)>,
    synth: NoiseSynth,
}

impl ProblemDef {
    pub fn new(discrete: DiscreteProblem, f: Nonlinearity, b: Nonlinearity, noise: NoiseSpec, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != discrete.dof_count() {
            return Err(invalid(format!("initial state has {} entries, expected {}", x0.len(), discrete.dof_count())));
        }
        let x0 = discrete.apply_dirichlet(&discrete.project_nodal(&x0)?)?;
        let synth = NoiseSynth::new(&noise, &discrete.grid, discrete.layout)?;
        let coords = discrete.grid.dof_coords(discrete.layout);
        Ok(Self { discrete, f, b, noise, x0, coords, synth })
    }

    pub fn dof_count(&self) -> usize {
        self.discrete.dof_count()
    }

    pub fn grid(&self) -> &Grid {
        &self.discrete.grid
    }

    pub fn layout(&self) -> DofLayout {
        self.discrete.layout
    }

    pub fn a_h(&self) -> &SparseOperator {
        &self.discrete.a_h
    }

    pub fn synth(&self) -> &NoiseSynth {
        &self.synth
    }

    /// `P_h F(X) + c0 X`, zero at Dirichlet DOFs.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let c0 = self.discrete.c0;
        let mut d: Vec<f64> =
            self.coords.iter().zip(x).map(|(&(px, py), &u)| self.f.eval(px, py, u) + c0 * u).collect();
        self.discrete.mask_dirichlet(&mut d);
        d
    }

    /// `P_h B(X) dW` with `B` acting pointwise, zero at Dirichlet DOFs.
    pub fn noise_term(&self, x: &[f64], dw: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .coords
            .iter()
            .zip(x)
            .zip(dw)
            .map(|((&(px, py), &u), &w)| if w == 0.0 { 0.0 } else { self.b.eval(px, py, u) * w })
            .collect();
        self.discrete.mask_dirichlet(&mut g);
        g
    }

    /// `Delta W` on the DOFs for coarse step `step` of the path.
    pub fn increment(&self, path: &NoisePath, step: usize, coarsening: usize) -> Result<Vec<f64>> {
        self.synth.increment(path, step, coarsening)
    }
}

/// Step map with per-configuration precomputation (the implicit matrix).
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    problem: &'a ProblemDef,
    cfg: SchemeConfig,
    implicit: Option<SparseOperator>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a ProblemDef, cfg: SchemeConfig) -> Result<Self> {
        cfg.krylov.validate()?;
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", cfg.dt)));
        }
        let implicit = match cfg.scheme {
            SchemeKind::SemiImplicit => {
                let n = problem.dof_count();
                Some(SparseOperator::identity(n).add_scaled(1.0, problem.a_h(), -cfg.dt)?)
            }
            _ => None,
        };
        Ok(Self { problem, cfg, implicit })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn step(&self, state: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
        let p = self.problem;
        let n = p.dof_count();
        if state.len() != n || dw.len() != n {
            return Err(invalid(format!("state/increment length must be {n}")));
        }
        let dt = self.cfg.dt;
        let a = p.a_h();
        let k = &self.cfg.krylov;
        let d = p.drift(state);
        let g = p.noise_term(state, dw);
        match self.cfg.scheme {
            SchemeKind::Setdm0 => {
                let v: Vec<f64> = (0..n).map(|i| state[i] + dt * d[i] + g[i]).collect();
                Ok(phi0_action(a, &v, dt, k)?.vector)
            }
            SchemeKind::Setdm1 => match self.cfg.setdm1_variant {
                Setdm1Variant::AsDefined => {
                    let w0: Vec<f64> = state.iter().zip(&g).map(|(x, g)| x + g).collect();
                    Ok(affine_flow(a, &w0, &d, dt, k)?.vector)
                }
                Setdm1Variant::AsRewritten => {
                    let xg: Vec<f64> = state.iter().zip(&g).map(|(x, g)| x + g).collect();
                    let mut v = a.mul_vec(&xg);
                    for (vi, di) in v.iter_mut().zip(&d) {
                        *vi += di;
                    }
                    // dt phi_1(dt A) v is the flow of w' = A w + v from 0
                    let zero = vec![0.0; n];
                    let inc = affine_flow(a, &zero, &v, dt, k)?.vector;
                    Ok(state.iter().zip(&inc).map(|(x, w)| x + w).collect())
                }
            },
            SchemeKind::SemiImplicit => {
                let rhs: Vec<f64> = (0..n).map(|i| state[i] + dt * d[i] + g[i]).collect();
                let m = self.implicit.as_ref().expect("implicit matrix built for this scheme");
                bicgstab(m, &rhs, state, self.cfg.solver_tol, 10_000)
            }
        }
    }
}

pub fn setdm0_step(problem: &ProblemDef, cfg: &SchemeConfig, state: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
    Stepper::new(problem, SchemeConfig { scheme: SchemeKind::Setdm0, ..*cfg })?.step(state, dw)
}

pub fn setdm1_step(problem: &ProblemDef, cfg: &SchemeConfig, state: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
    Stepper::new(problem, SchemeConfig { scheme: SchemeKind::Setdm1, ..*cfg })?.step(state, dw)
}

pub fn semi_implicit_step(problem: &ProblemDef, cfg: &SchemeConfig, state: &[f64], dw: &[f64]) -> Result<Vec<f64>> {
    Stepper::new(problem, SchemeConfig { scheme: SchemeKind::SemiImplicit, ..*cfg })?.step(state, dw)
}

pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub final_state: Vec<f64>,
    /// `(time, state)` pairs when snapshots were requested (including `t = 0`).
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub seed: Option<u64>,
    pub realization: Option<u64>,
    pub steps: usize,
    pub dt: f64,
}

impl Trajectory {
    /// Table `index,x,y,value` of the final state.
    pub fn write_csv<W: Write>(&self, out: W, grid: &Grid, layout: DofLayout) -> Result<()> {
        write_state_csv(out, grid, layout, &self.final_state)
    }
}

pub fn write_state_csv<W: Write>(mut out: W, grid: &Grid, layout: DofLayout, state: &[f64]) -> Result<()> {
    writeln!(out, "index,x,y,value")?;
    for (k, ((x, y), v)) in grid.dof_coords(layout).into_iter().zip(state).enumerate() {
        writeln!(out, "{k},{x},{y},{v}")?;
    }
    Ok(())
}

/// Iterate the scheme with increments supplied by `increment(step)`.
pub fn run_with(
    problem: &ProblemDef,
    cfg: &SchemeConfig,
    mut increment: impl FnMut(usize) -> Result<Vec<f64>>,
    snapshots: bool,
) -> Result<Trajectory> {
    let mut state = problem.x0.clone();
    let mut snaps = Vec::new();
    if snapshots {
        snaps.push((0.0, state.clone()));
    }
    if cfg.steps > 0 {
        let stepper = Stepper::new(problem, *cfg)?;
        for k in 0..cfg.steps {
            let dw = increment(k)?;
            state = stepper.step(&state, &dw).map_err(|e| match e {
                Error::Convergence { estimate, .. } if !estimate.is_finite() => Error::Divergence { step: k },
                other => other,
            })?;
            problem.discrete.apply_dirichlet_in_place(&mut state)?;
            if state.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD) {
                return Err(Error::Divergence { step: k });
            }
            if snapshots {
                snaps.push(((k + 1) as f64 * cfg.dt, state.clone()));
            }
        }
    }
    Ok(Trajectory { final_state: state, snapshots: snaps, seed: None, realization: None, steps: cfg.steps, dt: cfg.dt })
}

/// Iterate the scheme on a Brownian path; coarse step `k` uses fine steps
/// `[k * coarsening, (k + 1) * coarsening)`.
pub fn run(problem: &ProblemDef, cfg: &SchemeConfig, path: &NoisePath, coarsening: usize) -> Result<Trajectory> {
    if coarsening == 0 {
        return Err(invalid("coarsening must be positive"));
    }
    if cfg.steps * coarsening > path.steps() {
        return Err(invalid(format!(
            "{} steps x {coarsening} exceed the path horizon of {} fine steps",
            cfg.steps,
            path.steps()
        )));
    }
    let expected = path.finest_dt() * coarsening as f64;
    if ((cfg.dt - expected) / expected).abs() > 1e-9 {
        return Err(invalid(format!("dt {} does not match path step x coarsening = {expected}", cfg.dt)));
    }
    let noiseless = problem.b.is_zero();
    let n = problem.dof_count();
    let mut t = run_with(
        problem,
        cfg,
        |k| if noiseless { Ok(vec![0.0; n]) } else { problem.increment(path, k, coarsening) },
        false,
    )?;
    t.seed = Some(path.seed());
    t.realization = Some(path.realization());
    Ok(t)
}
