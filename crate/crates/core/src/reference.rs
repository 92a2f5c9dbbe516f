//! Reference solutions for strong-error measurement.
//!
//! For the linear additive problem every cosine mode is an independent
//! Ornstein-Uhlenbeck process `dc = -mu c dt + sqrt(q) d beta`, which is
//! propagated exactly and sampled conditionally on the Brownian increments
//! the schemes consume. For other problems the reference is a SETDM1 run at
//! the finest step on the same path.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{DofLayout, Grid};
use crate::integrators::{run, ProblemDef, SchemeConfig, SchemeKind, Trajectory};
use crate::krylov::KrylovConfig;
use crate::noise::{NoisePath, NoiseSpec, NoiseSynth};

/// Reaction rate of the linear problem, added to every mode's decay rate.
pub const REACTION_RATE: f64 = 0.5;

/// One-step OU coefficients for `x = mu dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuCoefficients {
    /// `exp(-mu dt)`
    pub decay: f64,
    /// `E[I | d beta] = rho d beta`, `rho = (1 - exp(-mu dt)) / (mu dt)`
    pub rho: f64,
    /// `Var[I | d beta]`
    pub cond_var: f64,
}

impl OuCoefficients {
    pub fn new(mu: f64, dt: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("decay rate must be positive, got {mu}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let x = mu * dt;
        let rho = if x < 1e-8 { 1.0 - 0.5 * x } else { -(-x).exp_m1() / x };
        // (1 - e^{-2x}) / (2x) - rho^2 cancels badly for small x
        let g = if x < 1e-2 {
            let x2 = x * x;
            x2 * (1.0 / 12.0 - x / 12.0 + 17.0 * x2 / 360.0 - 7.0 * x2 * x / 360.0 + 43.0 * x2 * x2 / 6720.0)
        } else {
            (-(-2.0 * x).exp_m1() / (2.0 * x) - rho * rho).max(0.0)
        };
        Ok(Self { decay: (-x).exp(), rho, cond_var: dt * g })
    }

    /// A sample of `int_0^dt exp(-mu (dt - s)) d beta(s)` given the increment
    /// `d beta` and an independent standard normal `z`.
    pub fn conditional_integral(&self, dbeta: f64, z: f64) -> f64 {
        self.rho * dbeta + self.cond_var.sqrt() * z
    }
}

/// Coefficients of the solution in the cosine basis of the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub spec: NoiseSpec,
    pub coeffs: Vec<f64>,
    pub mu: Vec<f64>,
    sqrt_q: Vec<f64>,
}

impl SpectralState {
    /// Zero state with rates `mu_{i,j} = D lambda_{i,j} + 0.5`.
    pub fn zero(spec: &NoiseSpec, diffusion: f64) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(invalid("diffusion must be non-negative"));
        }
        let mu = (0..spec.mode_count())
            .map(|m| {
                let (i, j) = spec.mode(m);
                let li = i as f64 * std::f64::consts::PI / spec.l1;
                let lj = j as f64 * std::f64::consts::PI / spec.l2;
                diffusion * (li * li + lj * lj) + REACTION_RATE
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            coeffs: vec![0.0; spec.mode_count()],
            mu,
            sqrt_q: spec.eigenvalues().iter().map(|q| q.sqrt()).collect(),
        })
    }

    pub fn with_coeffs(mut self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.mu.len() {
            return Err(invalid("coefficient count does not match the number of modes"));
        }
        self.coeffs = coeffs;
        Ok(self)
    }

    pub fn to_nodal(&self, synth: &NoiseSynth) -> Vec<f64> {
        synth.field(&self.coeffs)
    }
}

/// Advance every mode exactly over coarse step `step` of length `dt`
/// (a multiple of the path's finest step), conditioned on the path's
/// increment over that step.
pub fn exact_linear_step(state: &mut SpectralState, path: &NoisePath, step: usize, dt: f64) -> Result<()> {
    if path.modes() != state.coeffs.len() {
        return Err(invalid("path and state disagree on the number of modes"));
    }
    let ratio = dt / path.finest_dt();
    let p = ratio.round();
    if p < 1.0 || (ratio - p).abs() > 1e-9 * ratio {
        return Err(invalid(format!("dt {dt} is not a multiple of the path step {}", path.finest_dt())));
    }
    let p = p as usize;
    let dbeta = path.increments(step, p)?;
    let z = path.aux_draws(step * p)?;
    for m in 0..state.coeffs.len() {
        let ou = OuCoefficients::new(state.mu[m], dt)?;
        let noise = if state.sqrt_q[m] == 0.0 { 0.0 } else { state.sqrt_q[m] * ou.conditional_integral(dbeta[m], z[m]) };
        state.coeffs[m] = ou.decay * state.coeffs[m] + noise;
    }
    Ok(())
}

/// `sum_m c_m e_m` at the DOFs of `layout`.
pub fn spectral_to_nodal(state: &SpectralState, grid: &Grid, layout: DofLayout) -> Result<Vec<f64>> {
    Ok(state.to_nodal(&NoiseSynth::new(&state.spec, grid, layout)?))
}

/// Discrete `L2` inner products of a DOF field with each retained mode.
pub fn project_onto_modes(spec: &NoiseSpec, grid: &Grid, layout: DofLayout, field: &[f64]) -> Result<Vec<f64>> {
    if field.len() != grid.dof_count(layout) {
        return Err(invalid("field length does not match the grid"));
    }
    let w = grid.quadrature_weights(layout);
    Ok((0..spec.mode_count())
        .map(|m| {
            let (i, j) = spec.mode(m);
            crate::noise::eigenfunction_nodal(grid, layout, i, j)
                .iter()
                .zip(field)
                .zip(&w)
                .map(|((e, f), w)| e * f * w)
                .sum()
        })
        .collect())
}

/// Exact solution of the linear additive problem from `X0 = 0` after
/// `steps` steps of size `dt`, evaluated with `synth`.
pub fn exact_linear_solution(
    spec: &NoiseSpec,
    diffusion: f64,
    synth: &NoiseSynth,
    path: &NoisePath,
    dt: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut state = SpectralState::zero(spec, diffusion)?;
    for k in 0..steps {
        exact_linear_step(&mut state, path, k, dt)?;
    }
    Ok(state.to_nodal(synth))
}

/// SETDM1 at the path's finest step up to `t_end`.
pub fn finest_reference(problem: &ProblemDef, path: &NoisePath, t_end: f64, krylov: KrylovConfig) -> Result<Trajectory> {
    let cfg = SchemeConfig::for_horizon(SchemeKind::Setdm1, path.finest_dt(), t_end)?.with_krylov(krylov);
    run(problem, &cfg, path, 1)
}
