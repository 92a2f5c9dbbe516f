//! Steady incompressible Darcy flow, `div q = 0`, `q = -(k / mu) grad p`,
//! on the cell grid with two-point fluxes and harmonic face permeabilities.
//! Pressure is prescribed on the left and right sides; top and bottom are
//! no-flow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::linsolve::BandedCholesky;
use crate::sparse::TripletBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PermeabilityKind {
    Homogeneous,
    Streaks { contrast: f64, count: usize, width_cells: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityField {
    pub k: Vec<f64>,
    pub mu: f64,
    pub kind: PermeabilityKind,
}

impl PermeabilityField {
    pub fn homogeneous(grid: &Grid, k: f64, mu: f64) -> Result<Self> {
        Self::new(vec![k; grid.cell_count()], mu, PermeabilityKind::Homogeneous)
    }

    /// Horizontal streaks of permeability `contrast` in a unit background,
    /// centred at `y = L2 * s / (count + 1)` for `s = 1..=count`.
    pub fn streaks(grid: &Grid, contrast: f64, count: usize, width_cells: usize, mu: f64) -> Result<Self> {
        if !(contrast >= 1.0) {
            return Err(invalid(format!("streak contrast must be >= 1, got {contrast}")));
        }
        if width_cells == 0 || width_cells > grid.ny() {
            return Err(invalid("streak width must be between 1 and ny cells"));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut k = vec![1.0; grid.cell_count()];
        for s in 1..=count {
            let centre = ny as f64 * s as f64 / (count + 1) as f64;
            let start = (centre - width_cells as f64 / 2.0).round().max(0.0) as usize;
            let start = start.min(ny - width_cells);
            for j in start..start + width_cells {
                for i in 0..nx {
                    k[grid.cell_index(i, j)] = contrast;
                }
            }
        }
        Self::new(k, mu, PermeabilityKind::Streaks { contrast, count, width_cells })
    }

    /// The default heterogeneous medium: three streaks of width `ceil(ny / 20)`, contrast 100.
    pub fn default_streaks(grid: &Grid) -> Result<Self> {
        Self::streaks(grid, 100.0, 3, grid.ny().div_ceil(20), 1.0)
    }

    pub fn new(k: Vec<f64>, mu: f64, kind: PermeabilityKind) -> Result<Self> {
        if let Some(c) = k.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("permeability must be positive, cell {c} has {}", k[c])));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid("viscosity must be positive"));
        }
        Ok(Self { k, mu, kind })
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.k.len() != grid.cell_count() {
            return Err(invalid(format!(
                "permeability has {} cells, grid has {}",
                self.k.len(),
                grid.cell_count()
            )));
        }
        Ok(())
    }

    fn mobility(&self, c: usize) -> f64 {
        self.k[c] / self.mu
    }

    fn face_mobility(&self, a: usize, b: usize) -> f64 {
        let (ka, kb) = (self.k[a], self.k[b]);
        2.0 * ka * kb / (ka + kb) / self.mu
    }
}

/// Normal velocities on every face, x-faces then y-faces in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub nx: usize,
    pub ny: usize,
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
}

impl VelocityField {
    /// Concatenated face velocities, as expected by [`crate::operators::assemble_fv`].
    pub fn faces(&self) -> Vec<f64> {
        let mut v = self.x_faces.clone();
        v.extend_from_slice(&self.y_faces);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.x_faces.iter().chain(&self.y_faces).fold(0.0, |m, v| m.max(v.abs()))
    }

    fn xf(&self, i: usize, j: usize) -> f64 {
        self.x_faces[i + j * (self.nx + 1)]
    }

    fn yf(&self, i: usize, j: usize) -> f64 {
        self.y_faces[i + j * self.nx]
    }

    /// Discrete divergence per cell.
    pub fn divergence(&self, grid: &Grid) -> Vec<f64> {
        let (dx, dy) = (grid.dx(), grid.dy());
        (0..self.ny)
            .flat_map(|j| {
                (0..self.nx).map(move |i| {
                    (self.xf(i + 1, j) - self.xf(i, j)) / dx + (self.yf(i, j + 1) - self.yf(i, j)) / dy
                })
            })
            .collect()
    }

    /// Volumetric flux entering through `x = 0`.
    pub fn inflow(&self, grid: &Grid) -> f64 {
        (0..self.ny).map(|j| self.xf(0, j) * grid.dy()).sum()
    }

    /// Volumetric flux leaving through `x = L1`.
    pub fn outflow(&self, grid: &Grid) -> f64 {
        (0..self.ny).map(|j| self.xf(self.nx, j) * grid.dy()).sum()
    }

    /// Velocity averaged to cell centres.
    pub fn cell_average(&self, i: usize, j: usize) -> [f64; 2] {
        [0.5 * (self.xf(i, j) + self.xf(i + 1, j)), 0.5 * (self.yf(i, j) + self.yf(i, j + 1))]
    }
}

/// Cell pressures with `p = p_left` on `x = 0` and `p = p_right` on `x = L1`.
pub fn solve_pressure(grid: &Grid, perm: &PermeabilityField, p_left: f64, p_right: f64) -> Result<Vec<f64>> {
    perm.check(grid)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let n = grid.cell_count();
    let mut a = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.cell_index(i, j);
            if i + 1 < nx {
                let e = grid.cell_index(i + 1, j);
                let t = perm.face_mobility(c, e) * dy / dx;
                a.push(c, c, t);
                a.push(c, e, -t);
                a.push(e, e, t);
                a.push(e, c, -t);
            }
            if j + 1 < ny {
                let nb = grid.cell_index(i, j + 1);
                let t = perm.face_mobility(c, nb) * dx / dy;
                a.push(c, c, t);
                a.push(c, nb, -t);
                a.push(nb, nb, t);
                a.push(nb, c, -t);
            }
            // half-cell transmissibility to the pressure boundaries
            if i == 0 {
                let t = perm.mobility(c) * dy / (0.5 * dx);
                a.push(c, c, t);
                rhs[c] += t * p_left;
            }
            if i + 1 == nx {
                let t = perm.mobility(c) * dy / (0.5 * dx);
                a.push(c, c, t);
                rhs[c] += t * p_right;
            }
        }
    }
    BandedCholesky::factor(&a.build())?.solve(&rhs)
}

pub fn velocity_from_pressure(
    grid: &Grid,
    perm: &PermeabilityField,
    p: &[f64],
    p_left: f64,
    p_right: f64,
) -> Result<VelocityField> {
    perm.check(grid)?;
    if p.len() != grid.cell_count() {
        return Err(invalid(format!("pressure has {} cells, grid has {}", p.len(), grid.cell_count())));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut x_faces = vec![0.0; grid.x_face_count()];
    for j in 0..ny {
        for i in 0..=nx {
            x_faces[i + j * (nx + 1)] = if i == 0 {
                let c = grid.cell_index(0, j);
                -perm.mobility(c) * (p[c] - p_left) / (0.5 * dx)
            } else if i == nx {
                let c = grid.cell_index(nx - 1, j);
                -perm.mobility(c) * (p_right - p[c]) / (0.5 * dx)
            } else {
                let (a, b) = (grid.cell_index(i - 1, j), grid.cell_index(i, j));
                -perm.face_mobility(a, b) * (p[b] - p[a]) / dx
            };
        }
    }
    let mut y_faces = vec![0.0; grid.y_face_count()];
    for j in 1..ny {
        for i in 0..nx {
            let (a, b) = (grid.cell_index(i, j - 1), grid.cell_index(i, j));
            y_faces[i + j * nx] = -perm.face_mobility(a, b) * (p[b] - p[a]) / dy;
        }
    }
    Ok(VelocityField { nx, ny, x_faces, y_faces })
}

/// Pressure solve followed by velocity reconstruction.
pub fn darcy_velocity(grid: &Grid, perm: &PermeabilityField, p_left: f64, p_right: f64) -> Result<(Vec<f64>, VelocityField)> {
    let p = solve_pressure(grid, perm, p_left, p_right)?;
    let q = velocity_from_pressure(grid, perm, &p, p_left, p_right)?;
    Ok((p, q))
}

/// Cell table `i,j,x,y,k,p,qx,qy` with velocities averaged to centres.
pub fn write_csv<W: Write>(
    mut out: W,
    grid: &Grid,
    perm: &PermeabilityField,
    p: &[f64],
    q: &VelocityField,
) -> Result<()> {
    writeln!(out, "i,j,x,y,k,p,qx,qy")?;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let c = grid.cell_index(i, j);
            let [qx, qy] = q.cell_average(i, j);
            writeln!(
                out,
                "{i},{j},{},{},{},{},{},{}",
                grid.cell_x(i),
                grid.cell_y(j),
                perm.k[c],
                p[c],
                qx,
                qy
            )?;
        }
    }
    Ok(())
}
