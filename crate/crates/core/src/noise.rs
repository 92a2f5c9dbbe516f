//! Spectral Q-Wiener noise.
//!
//! The covariance operator is diagonal in the Neumann cosine basis
//! `e_{i,j}(x, y) = e_i(x) e_j(y)` with `e_0 = sqrt(1/L)` and
//! `e_i = sqrt(2/L) cos(i pi x / L)`. A Brownian path is a table of standard
//! normal draws keyed by `(seed, realization, step, mode)` and produced by a
//! counter-based generator, so any entry can be regenerated independently
//! and coarse increments are exact sums of fine ones.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{DofLayout, Grid};

/// Eigenvalue law of the covariance operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    /// `q_{i,j} = Gamma exp(-((lambda_i b1)^2 + (lambda_j b2)^2) / (2 pi))`.
    Exponential { gamma: f64, b1: f64, b2: f64 },
    /// `q_{i,j} = (i + j)^{-r}` for `i + j > 0`; needs `r > 2` to be trace class.
    PowerLaw { r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub spectrum: Spectrum,
    /// Highest mode index kept along x (modes `0..=n1`).
    pub n1: usize,
    /// Highest mode index kept along y.
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
}

pub const DEFAULT_EXPONENTIAL_MODES: usize = 64;
pub const DEFAULT_POWERLAW_MODES: usize = 100;

impl NoiseSpec {
    pub fn new(spectrum: Spectrum, n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        match spectrum {
            Spectrum::Exponential { gamma, b1, b2 } => {
                if !(gamma >= 0.0 && b1 > 0.0 && b2 > 0.0) {
                    return Err(invalid("exponential spectrum needs gamma >= 0 and b1, b2 > 0"));
                }
            }
            Spectrum::PowerLaw { r } => {
                if !(r > 2.0) {
                    return Err(invalid(format!("power-law exponent must exceed 2 for trace class, got {r}")));
                }
            }
        }
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(invalid("domain lengths must be positive"));
        }
        Ok(Self { spectrum, n1, n2, l1, l2 })
    }

    pub fn exponential(gamma: f64, b1: f64, b2: f64, grid: &Grid) -> Result<Self> {
        let n = DEFAULT_EXPONENTIAL_MODES;
        Self::new(Spectrum::Exponential { gamma, b1, b2 }, n, n, grid.l1(), grid.l2())
    }

    pub fn power_law(r: f64, grid: &Grid) -> Result<Self> {
        let n = DEFAULT_POWERLAW_MODES;
        Self::new(Spectrum::PowerLaw { r }, n, n, grid.l1(), grid.l2())
    }

    pub fn mode_count(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    /// Mode-major linear index, `i` fastest.
    pub fn mode_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.n1 + 1)
    }

    pub fn mode(&self, index: usize) -> (usize, usize) {
        (index % (self.n1 + 1), index / (self.n1 + 1))
    }

    /// `q_{i,j}`. The power law is undefined at `i = j = 0`.
    pub fn spectrum(&self, i: usize, j: usize) -> Result<f64> {
        match self.spectrum {
            Spectrum::Exponential { gamma, b1, b2 } => {
                let li = i as f64 * PI / self.l1;
                let lj = j as f64 * PI / self.l2;
                Ok(gamma * (-((li * b1).powi(2) + (lj * b2).powi(2)) / (2.0 * PI)).exp())
            }
            Spectrum::PowerLaw { r } => {
                if i + j == 0 {
                    return Err(Error::UndefinedMode { i, j });
                }
                Ok(((i + j) as f64).powf(-r))
            }
        }
    }

    /// `q` for every retained mode; the power-law constant mode carries no noise.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.mode_count())
            .map(|m| {
                let (i, j) = self.mode(m);
                self.spectrum(i, j).unwrap_or(0.0)
            })
            .collect()
    }

    pub fn truncated_trace(&self) -> f64 {
        self.eigenvalues().iter().sum()
    }
}

/// Free-function form of [`NoiseSpec::spectrum`].
pub fn spectrum(spec: &NoiseSpec, i: usize, j: usize) -> Result<f64> {
    spec.spectrum(i, j)
}

/// One-dimensional Neumann eigenfunction `e_i` on `[0, l]`.
pub fn eigenfunction_1d(i: usize, x: f64, l: f64) -> f64 {
    if i == 0 {
        (1.0 / l).sqrt()
    } else {
        (2.0 / l).sqrt() * (i as f64 * PI * x / l).cos()
    }
}

/// Samples of `e_i(x) e_j(y)` at the DOFs of `layout`.
pub fn eigenfunction_nodal(grid: &Grid, layout: DofLayout, i: usize, j: usize) -> Vec<f64> {
    let (xs, ys) = grid.axis_coords(layout);
    let ex: Vec<f64> = xs.iter().map(|&x| eigenfunction_1d(i, x, grid.l1())).collect();
    ys.iter()
        .flat_map(|&y| {
            let ey = eigenfunction_1d(j, y, grid.l2());
            ex.iter().map(move |&e| e * ey)
        })
        .collect()
}

const MAIN_STREAM: u64 = 0;
const AUX_STREAM: u64 = 1;

/// Seeded Brownian path for every retained mode on a uniform fine time grid.
///
/// Draws are regenerated on demand; the path itself stores only its key.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    realization: u64,
    finest_dt: f64,
    steps: usize,
    modes: usize,
}

impl NoisePath {
    pub fn new(spec: &NoiseSpec, seed: u64, realization: u64, finest_dt: f64, steps: usize) -> Result<Self> {
        if !(finest_dt > 0.0 && finest_dt.is_finite()) {
            return Err(invalid(format!("finest_dt must be positive, got {finest_dt}")));
        }
        if steps == 0 {
            return Err(invalid("a path needs at least one step"));
        }
        Ok(Self { seed, realization, finest_dt, steps, modes: spec.mode_count() })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn realization(&self) -> u64 {
        self.realization
    }
    pub fn finest_dt(&self) -> f64 {
        self.finest_dt
    }
    /// Number of fine steps covered.
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn modes(&self) -> usize {
        self.modes
    }

    fn rng(&self, stream: u64, step: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.realization.to_le_bytes());
        key[16..24].copy_from_slice(&stream.to_le_bytes());
        key[24..32].copy_from_slice(b"setdm-qw");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(step as u64);
        rng
    }

    fn fill(&self, stream: u64, step: usize) -> Result<Vec<f64>> {
        if step >= self.steps {
            return Err(invalid(format!("step {step} beyond path horizon {}", self.steps)));
        }
        let mut rng = self.rng(stream, step);
        Ok((0..self.modes).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    /// Standard normal draws `R_{mode, step}` of one fine step, mode-major.
    pub fn draws(&self, step: usize) -> Result<Vec<f64>> {
        self.fill(MAIN_STREAM, step)
    }

    /// Independent auxiliary draws keyed by `(mode, step)`, used for
    /// conditional sampling in the exact reference.
    pub fn aux_draws(&self, step: usize) -> Result<Vec<f64>> {
        self.fill(AUX_STREAM, step)
    }

    /// Sum of the fine draws over the block `[step * p, (step + 1) * p)`.
    ///
    /// The block is summed by recursive midpoint splitting, so the sum over a
    /// block of `2p` is bit-for-bit the sum of its two halves of size `p`.
    pub fn draw_sums(&self, step: usize, coarsening: usize) -> Result<Vec<f64>> {
        if coarsening == 0 {
            return Err(invalid("coarsening factor must be positive"));
        }
        let end = (step + 1)
            .checked_mul(coarsening)
            .ok_or_else(|| invalid("coarse step index overflow"))?;
        if end > self.steps {
            return Err(invalid(format!(
                "coarse step {step} x {coarsening} exceeds path horizon of {} fine steps",
                self.steps
            )));
        }
        self.block_sum(step * coarsening, coarsening)
    }

    fn block_sum(&self, start: usize, len: usize) -> Result<Vec<f64>> {
        if len == 1 {
            return self.draws(start);
        }
        let half = len / 2;
        let mut left = self.block_sum(start, half)?;
        let right = self.block_sum(start + half, len - half)?;
        for (l, r) in left.iter_mut().zip(&right) {
            *l += r;
        }
        Ok(left)
    }

    /// Per-mode Brownian increments `beta(t_{k+1}) - beta(t_k)` for a coarse step.
    pub fn increments(&self, step: usize, coarsening: usize) -> Result<Vec<f64>> {
        let scale = self.finest_dt.sqrt();
        Ok(self.draw_sums(step, coarsening)?.into_iter().map(|s| s * scale).collect())
    }
}

/// Free-function form of [`NoisePath::new`].
pub fn make_path(spec: &NoiseSpec, seed: u64, realization: u64, finest_dt: f64, steps: usize) -> Result<NoisePath> {
    NoisePath::new(spec, seed, realization, finest_dt, steps)
}

/// Precomputed separable synthesis of fields `sum_m c_m e_m` on a grid.
#[derive(Debug, Clone)]
pub struct NoiseSynth {
    spec: NoiseSpec,
    sqrt_q: Vec<f64>,
    // ex[i * nxd + a] = e_i(x_a), ey[j * nyd + b] = e_j(y_b)
    ex: Vec<f64>,
    ey: Vec<f64>,
    nxd: usize,
    nyd: usize,
}

impl NoiseSynth {
    pub fn new(spec: &NoiseSpec, grid: &Grid, layout: DofLayout) -> Result<Self> {
        let tol = 1e-12 * grid.l1().max(grid.l2());
        if (spec.l1 - grid.l1()).abs() > tol || (spec.l2 - grid.l2()).abs() > tol {
            return Err(invalid("noise spectrum and grid describe different domains"));
        }
        let (xs, ys) = grid.axis_coords(layout);
        let ex = (0..=spec.n1)
            .flat_map(|i| xs.iter().map(move |&x| eigenfunction_1d(i, x, spec.l1)))
            .collect();
        let ey = (0..=spec.n2)
            .flat_map(|j| ys.iter().map(move |&y| eigenfunction_1d(j, y, spec.l2)))
            .collect();
        Ok(Self {
            spec: spec.clone(),
            sqrt_q: spec.eigenvalues().iter().map(|q| q.sqrt()).collect(),
            ex,
            ey,
            nxd: xs.len(),
            nyd: ys.len(),
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn dof_count(&self) -> usize {
        self.nxd * self.nyd
    }

    pub fn sqrt_eigenvalues(&self) -> &[f64] {
        &self.sqrt_q
    }

    /// `sum_m coeffs[m] e_m` at the DOFs, summed over x-modes then y-modes
    /// in ascending order.
    pub fn field(&self, coeffs: &[f64]) -> Vec<f64> {
        let (n1, n2) = (self.spec.n1 + 1, self.spec.n2 + 1);
        debug_assert_eq!(coeffs.len(), n1 * n2);
        let mut rows = vec![0.0; n2 * self.nxd];
        for j in 0..n2 {
            let row = &mut rows[j * self.nxd..(j + 1) * self.nxd];
            for i in 0..n1 {
                let c = coeffs[i + j * n1];
                if c == 0.0 {
                    continue;
                }
                let e = &self.ex[i * self.nxd..(i + 1) * self.nxd];
                for (r, ei) in row.iter_mut().zip(e) {
                    *r += c * ei;
                }
            }
        }
        let mut out = vec![0.0; self.nxd * self.nyd];
        for j in 0..n2 {
            let row = &rows[j * self.nxd..(j + 1) * self.nxd];
            for b in 0..self.nyd {
                let w = self.ey[j * self.nyd + b];
                let dst = &mut out[b * self.nxd..(b + 1) * self.nxd];
                for (d, r) in dst.iter_mut().zip(row) {
                    *d += w * r;
                }
            }
        }
        out
    }

    /// Nodal field of the increment `Delta W` from per-mode Brownian increments.
    pub fn field_from_increments(&self, dbeta: &[f64]) -> Vec<f64> {
        let coeffs: Vec<f64> = self.sqrt_q.iter().zip(dbeta).map(|(s, b)| s * b).collect();
        self.field(&coeffs)
    }

    /// `Delta W` over coarse step `step` of size `coarsening * finest_dt`.
    pub fn increment(&self, path: &NoisePath, step: usize, coarsening: usize) -> Result<Vec<f64>> {
        if path.modes() != self.sqrt_q.len() {
            return Err(invalid("path and spectrum disagree on the number of modes"));
        }
        Ok(self.field_from_increments(&path.increments(step, coarsening)?))
    }

    /// `Delta t sum_m q_m e_m(a) e_m(b)`: covariance of `Delta W` between two DOFs.
    pub fn covariance(&self, dt: f64, a: usize, b: usize) -> f64 {
        let n1 = self.spec.n1 + 1;
        let (ax, ay) = (a % self.nxd, a / self.nxd);
        let (bx, by) = (b % self.nxd, b / self.nxd);
        let mut s = 0.0;
        for (m, sq) in self.sqrt_q.iter().enumerate() {
            let (i, j) = (m % n1, m / n1);
            let ea = self.ex[i * self.nxd + ax] * self.ey[j * self.nyd + ay];
            let eb = self.ex[i * self.nxd + bx] * self.ey[j * self.nyd + by];
            s += sq * sq * ea * eb;
        }
        dt * s
    }
}

/// `Delta W_m` on the grid for one coarse step (builds the synthesis tables).
pub fn sample_increment(
    path: &NoisePath,
    spec: &NoiseSpec,
    grid: &Grid,
    layout: DofLayout,
    step_index: usize,
    coarsening: usize,
) -> Result<Vec<f64>> {
    NoiseSynth::new(spec, grid, layout)?.increment(path, step_index, coarsening)
}
