//! Assembly of the discrete generator `A_h`.
//!
//! Two discretisations are provided: P1 finite elements on the triangulation
//! that splits every grid rectangle along its `(0,0)-(1,1)` diagonal, and a
//! cell-centred finite-volume scheme with two-point diffusive fluxes and
//! first-order upwind advection. In both cases `A_h` acts on one DOF vector
//! (the FEM mass matrix is lumped), Dirichlet DOFs are held fixed (their rows
//! of `A_h` are zero so the semigroup is the identity on them) and `P_h` is
//! collocation at the DOFs.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{BoundaryTag, DofLayout, FaceAxis, Grid};
use crate::sparse::{SparseOperator, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    NeumannZero,
    Dirichlet(f64),
}

/// One condition per side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub left: BcKind,
    pub right: BcKind,
    pub bottom: BcKind,
    pub top: BcKind,
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::all_neumann()
    }
}

impl BoundaryConditions {
    pub fn all_neumann() -> Self {
        Self {
            left: BcKind::NeumannZero,
            right: BcKind::NeumannZero,
            bottom: BcKind::NeumannZero,
            top: BcKind::NeumannZero,
        }
    }

    pub fn get(&self, tag: BoundaryTag) -> BcKind {
        match tag {
            BoundaryTag::Left => self.left,
            BoundaryTag::Right => self.right,
            BoundaryTag::Bottom => self.bottom,
            BoundaryTag::Top => self.top,
        }
    }

    pub fn with(mut self, tag: BoundaryTag, kind: BcKind) -> Self {
        match tag {
            BoundaryTag::Left => self.left = kind,
            BoundaryTag::Right => self.right = kind,
            BoundaryTag::Bottom => self.bottom = kind,
            BoundaryTag::Top => self.top = kind,
        }
        self
    }

    /// Homogeneous Neumann everywhere except the named sides.
    /// Unknown side names are configuration errors.
    pub fn from_named<'a>(entries: impl IntoIterator<Item = (&'a str, BcKind)>) -> Result<Self> {
        let mut bc = Self::all_neumann();
        for (name, kind) in entries {
            bc = bc.with(BoundaryTag::parse(name)?, kind);
        }
        Ok(bc)
    }

    pub fn has_dirichlet(&self) -> bool {
        BoundaryTag::ALL.iter().any(|&t| matches!(self.get(t), BcKind::Dirichlet(_)))
    }
}

/// Advection velocity for the FEM path.
#[derive(Clone)]
pub enum FemVelocity {
    Constant([f64; 2]),
    /// Evaluated at element centroids.
    Field(Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>),
}

impl fmt::Debug for FemVelocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(q) => f.debug_tuple("Constant").field(q).finish(),
            Self::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl FemVelocity {
    pub fn zero() -> Self {
        Self::Constant([0.0, 0.0])
    }

    fn at(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            Self::Constant(q) => *q,
            Self::Field(f) => f(x, y),
        }
    }
}

pub type Tensor2 = [[f64; 2]; 2];

#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    /// Generator of the semigroup; zero rows at Dirichlet DOFs.
    pub a_h: SparseOperator,
    /// `K = a(phi_j, phi_i) + c0 (phi_j, phi_i)_lumped` (FEM) or the FV flux balance
    /// scaled by cell volumes, before boundary rows are removed.
    pub stiffness: SparseOperator,
    /// Diagonal mass used to form `A_h` (lumped for FEM, cell volumes for FV).
    pub mass: SparseOperator,
    /// Consistent P1 mass matrix; `None` for finite volumes.
    pub consistent_mass: Option<SparseOperator>,
    pub grid: Grid,
    pub layout: DofLayout,
    pub bc: BoundaryConditions,
    pub c0: f64,
    dirichlet: Vec<(usize, f64)>,
    dirichlet_mask: Vec<bool>,
}

fn dirichlet_dofs(grid: &Grid, layout: DofLayout, bc: &BoundaryConditions) -> (Vec<(usize, f64)>, Vec<bool>) {
    let n = grid.dof_count(layout);
    let mut mask = vec![false; n];
    let mut list = Vec::new();
    for tag in BoundaryTag::ALL {
        if let BcKind::Dirichlet(value) = bc.get(tag) {
            for dof in grid.boundary_dofs(layout, tag) {
                if !mask[dof] {
                    mask[dof] = true;
                    list.push((dof, value));
                }
            }
        }
    }
    list.sort_by_key(|&(d, _)| d);
    (list, mask)
}

impl DiscreteProblem {
    pub fn dof_count(&self) -> usize {
        self.a_h.n_rows()
    }

    /// `(dof, value)` pairs held by Dirichlet conditions, sorted by DOF.
    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet_mask[dof]
    }

    /// Zero the entries at Dirichlet DOFs (forcing and noise do not act there).
    pub fn mask_dirichlet(&self, v: &mut [f64]) {
        for &(d, _) in &self.dirichlet {
            v[d] = 0.0;
        }
    }

    /// Overwrite Dirichlet DOFs with their prescribed values.
    pub fn apply_dirichlet(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = state.to_vec();
        self.apply_dirichlet_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_dirichlet_in_place(&self, state: &mut [f64]) -> Result<()> {
        if state.len() != self.dof_count() {
            return Err(invalid(format!("state length {} != {} DOFs", state.len(), self.dof_count())));
        }
        for &(d, v) in &self.dirichlet {
            state[d] = v;
        }
        Ok(())
    }

    /// `P_h f` for DOF samples of `f` (collocation: the samples themselves).
    pub fn project_nodal(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dof_count() {
            return Err(invalid(format!("field length {} != {} DOFs", f.len(), self.dof_count())));
        }
        if let Some(k) = f.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at DOF {k}")));
        }
        Ok(f.to_vec())
    }

    /// `P_h f` for a function of position.
    pub fn project_fn(&self, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let samples: Vec<f64> = self.grid.dof_coords(self.layout).into_iter().map(|(x, y)| f(x, y)).collect();
        self.project_nodal(&samples)
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.a_h.write_matrix_market(file)?;
        Ok(())
    }

    fn finish(
        grid: &Grid,
        layout: DofLayout,
        bc: BoundaryConditions,
        c0: f64,
        stiffness: SparseOperator,
        mass_diag: Vec<f64>,
        consistent_mass: Option<SparseOperator>,
    ) -> Self {
        let (dirichlet, dirichlet_mask) = dirichlet_dofs(grid, layout, &bc);
        let inv: Vec<f64> = mass_diag.iter().map(|m| -1.0 / m).collect();
        let rows: Vec<usize> = dirichlet.iter().map(|&(d, _)| d).collect();
        let a_h = stiffness.scale_rows(&inv).zero_rows(&rows);
        Self {
            a_h,
            stiffness,
            mass: SparseOperator::from_diagonal(&mass_diag),
            consistent_mass,
            grid: grid.clone(),
            layout,
            bc,
            c0,
            dirichlet,
            dirichlet_mask,
        }
    }
}

fn check_spd(d: &Tensor2) -> Result<()> {
    let scale = d[0][0].abs().max(d[1][1].abs()).max(f64::MIN_POSITIVE);
    if (d[0][1] - d[1][0]).abs() > 1e-14 * scale {
        return Err(invalid("diffusion tensor is not symmetric"));
    }
    let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
    if !(d[0][0] > 0.0 && det > 0.0) {
        return Err(invalid("diffusion tensor is not positive definite"));
    }
    Ok(())
}

/// P1 element assembly.
pub fn assemble_fem(
    grid: &Grid,
    d: Tensor2,
    q: &FemVelocity,
    bc: BoundaryConditions,
    c0: f64,
) -> Result<DiscreteProblem> {
    check_spd(&d)?;
    if !c0.is_finite() {
        return Err(invalid("Garding shift must be finite"));
    }
    let n = grid.node_count();
    let mut k = TripletBuilder::new(n, n);
    let mut m = TripletBuilder::new(n, n);
    let mut lumped = vec![0.0; n];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let n00 = grid.node_index(i, j);
            let n10 = grid.node_index(i + 1, j);
            let n01 = grid.node_index(i, j + 1);
            let n11 = grid.node_index(i + 1, j + 1);
            for tri in [[n00, n10, n11], [n00, n11, n01]] {
                let p: Vec<(f64, f64)> = tri.iter().map(|&v| grid.node_coords(v).unwrap()).collect();
                let det = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
                let area = 0.5 * det.abs();
                // grad phi_a = (y_b - y_c, x_c - x_b) / det for (a, b, c) cyclic
                let grads: Vec<[f64; 2]> = (0..3)
                    .map(|a| {
                        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                        [(p[b].1 - p[c].1) / det, (p[c].0 - p[b].0) / det]
                    })
                    .collect();
                let cx = (p[0].0 + p[1].0 + p[2].0) / 3.0;
                let cy = (p[0].1 + p[1].1 + p[2].1) / 3.0;
                let vel = q.at(cx, cy);
                for a in 0..3 {
                    for b in 0..3 {
                        let gb = grads[b];
                        let dgb = [d[0][0] * gb[0] + d[0][1] * gb[1], d[1][0] * gb[0] + d[1][1] * gb[1]];
                        let diff = area * (grads[a][0] * dgb[0] + grads[a][1] * dgb[1]);
                        let adv = (vel[0] * gb[0] + vel[1] * gb[1]) * area / 3.0;
                        let mass = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                        k.push(tri[a], tri[b], diff + adv);
                        m.push(tri[a], tri[b], mass);
                    }
                    lumped[tri[a]] += area / 3.0;
                }
            }
        }
    }
    // the shift uses the lumped mass so that A_h moves by exactly -c0 I
    for (v, &ml) in lumped.iter().enumerate() {
        k.push(v, v, c0 * ml);
    }
    Ok(DiscreteProblem::finish(grid, DofLayout::Nodes, bc, c0, k.build(), lumped, Some(m.build())))
}

/// Face velocities for a constant vector field, in grid face order.
pub fn constant_face_velocity(grid: &Grid, q: [f64; 2]) -> Vec<f64> {
    let mut v = vec![q[0]; grid.x_face_count()];
    v.extend(std::iter::repeat_n(q[1], grid.y_face_count()));
    v
}

/// Cell-centred finite volumes.
///
/// `q_faces[f]` is the normal velocity on face `f` (positive in +x for
/// x-faces, +y for y-faces). Inflow through a Neumann boundary face carries
/// no flux; outflow leaves with the upwind (interior) value.
pub fn assemble_fv(
    grid: &Grid,
    d: Tensor2,
    q_faces: &[f64],
    bc: BoundaryConditions,
    c0: f64,
) -> Result<DiscreteProblem> {
    if d[0][1] != 0.0 || d[1][0] != 0.0 {
        return Err(invalid("finite volumes need a diagonal diffusion tensor"));
    }
    if !(d[0][0] >= 0.0 && d[1][1] >= 0.0) {
        return Err(invalid("diffusion coefficients must be non-negative"));
    }
    if q_faces.len() != grid.face_count() {
        return Err(invalid(format!(
            "expected {} face velocities, got {}",
            grid.face_count(),
            q_faces.len()
        )));
    }
    if let Some(f) = q_faces.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("face velocity {f} is not finite")));
    }
    if !c0.is_finite() {
        return Err(invalid("Garding shift must be finite"));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let vol = dx * dy;
    let n = grid.cell_count();
    // rows hold the volume-integrated balance, so K = -M A_h
    let mut k = TripletBuilder::new(n, n);
    for face in 0..grid.face_count() {
        let (axis, i, j) = grid.face_location(face)?;
        let (area, h, diff) = match axis {
            FaceAxis::X => (dy, dx, d[0][0]),
            FaceAxis::Y => (dx, dy, d[1][1]),
        };
        // lower / upper cell across the face, if inside the grid
        let (lo, hi) = match axis {
            FaceAxis::X => (
                (i > 0).then(|| grid.cell_index(i - 1, j)),
                (i < nx).then(|| grid.cell_index(i, j)),
            ),
            FaceAxis::Y => (
                (j > 0).then(|| grid.cell_index(i, j - 1)),
                (j < ny).then(|| grid.cell_index(i, j)),
            ),
        };
        let u = q_faces[face];
        match (lo, hi) {
            (Some(a), Some(b)) => {
                let t = diff * area / h;
                if t != 0.0 {
                    k.push(a, a, t);
                    k.push(a, b, -t);
                    k.push(b, b, t);
                    k.push(b, a, -t);
                }
                // flux from a to b is u * area * upwind value
                let (src, dst) = if u >= 0.0 { (a, b) } else { (b, a) };
                let f = u.abs() * area;
                if f != 0.0 {
                    k.push(src, src, f);
                    k.push(dst, src, -f);
                }
            }
            (Some(a), None) if u > 0.0 => k.push(a, a, u * area),
            (None, Some(b)) if u < 0.0 => k.push(b, b, -u * area),
            _ => {}
        }
    }
    for c in 0..n {
        k.push(c, c, c0 * vol);
    }
    let mass = vec![vol; n];
    Ok(DiscreteProblem::finish(grid, DofLayout::Cells, bc, c0, k.build(), mass, None))
}

/// Free-function form of [`DiscreteProblem::project_nodal`].
pub fn project_nodal(problem: &DiscreteProblem, f: &[f64]) -> Result<Vec<f64>> {
    problem.project_nodal(f)
}

/// Free-function form of [`DiscreteProblem::apply_dirichlet`].
pub fn apply_dirichlet(problem: &DiscreteProblem, state: &[f64]) -> Result<Vec<f64>> {
    problem.apply_dirichlet(state)
}

/// Parse a side name and condition, e.g. `("left", "dirichlet", Some(1.0))`.
pub fn parse_bc(kind: &str, value: Option<f64>) -> Result<BcKind> {
    match (kind.to_ascii_lowercase().as_str(), value) {
        ("neumann" | "neumann_zero", _) => Ok(BcKind::NeumannZero),
        ("dirichlet", Some(v)) if v.is_finite() => Ok(BcKind::Dirichlet(v)),
        ("dirichlet", _) => Err(Error::Config("dirichlet condition needs a finite value".into())),
        (other, _) => Err(Error::Config(format!("unknown boundary condition `{other}`"))),
    }
}
