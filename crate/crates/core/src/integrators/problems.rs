//! The two model problems: linear reaction-diffusion with additive noise
//! (P1 elements, homogeneous Neumann) and advection-diffusion-reaction with
//! multiplicative noise (finite volumes, `X = 1` on `x = 0`).

use crate::darcy::{darcy_velocity, PermeabilityField};
use crate::error::{invalid, Result};
use crate::grid::{BoundaryTag, Grid};
use crate::noise::NoiseSpec;
use crate::operators::{
    assemble_fem, assemble_fv, constant_face_velocity, BcKind, BoundaryConditions, FemVelocity, Tensor2,
};
use crate::sparse::SparseOperator;

use super::{Nonlinearity, ProblemDef};

/// Reaction coefficient of the linear problem, `f(u) = -0.5 u`.
pub const LINEAR_REACTION: f64 = -0.5;

/// Diffusion tensor of the advection problem.
pub const ADVECTION_DIFFUSION: Tensor2 = [[1e-2, 0.0], [0.0, 1e-3]];

/// `dX = (D Laplace X - 0.5 X) dt + dW`, Neumann, `X0 = 0`.
pub fn linear_additive(grid: &Grid, diffusion: f64, noise: NoiseSpec) -> Result<ProblemDef> {
    let d = [[diffusion, 0.0], [0.0, diffusion]];
    let discrete = assemble_fem(grid, d, &FemVelocity::zero(), BoundaryConditions::all_neumann(), 0.0)?;
    let n = discrete.dof_count();
    ProblemDef::new(discrete, Nonlinearity::Linear(LINEAR_REACTION), Nonlinearity::Constant(1.0), noise, vec![0.0; n])
}

/// The linear problem with the reaction moved into the operator
/// (`A_h - 0.5 I`, `F = 0`) and initial state `x0`.
pub fn linear_folded(grid: &Grid, diffusion: f64, noise: NoiseSpec, additive: bool, x0: Vec<f64>) -> Result<ProblemDef> {
    let d = [[diffusion, 0.0], [0.0, diffusion]];
    let mut discrete = assemble_fem(grid, d, &FemVelocity::zero(), BoundaryConditions::all_neumann(), 0.0)?;
    let n = discrete.dof_count();
    discrete.a_h = discrete.a_h.add_scaled(1.0, &SparseOperator::identity(n), LINEAR_REACTION)?;
    let b = if additive { Nonlinearity::Constant(1.0) } else { Nonlinearity::Zero };
    ProblemDef::new(discrete, Nonlinearity::Zero, b, noise, x0)
}

/// Advection problem for given face velocities:
/// `f(u) = -u / (|u| + 1)`, `b(u) = u`, `X0 = 0`, `X = 1` on `x = 0`.
pub fn advection_with_velocity(grid: &Grid, q_faces: &[f64], noise: NoiseSpec) -> Result<ProblemDef> {
    let bc = BoundaryConditions::all_neumann().with(BoundaryTag::Left, BcKind::Dirichlet(1.0));
    let discrete = assemble_fv(grid, ADVECTION_DIFFUSION, q_faces, bc, 0.0)?;
    let n = discrete.dof_count();
    ProblemDef::new(discrete, Nonlinearity::Saturating, Nonlinearity::Identity, noise, vec![0.0; n])
}

/// Homogeneous medium, `q = (1, 0)`.
pub fn advection_homogeneous(grid: &Grid, noise: NoiseSpec) -> Result<ProblemDef> {
    advection_with_velocity(grid, &constant_face_velocity(grid, [1.0, 0.0]), noise)
}

/// Heterogeneous medium: velocity from the Darcy solve with `p = 1` at
/// `x = 0` and `p = 0` at `x = L1`.
pub fn advection_heterogeneous(grid: &Grid, perm: &PermeabilityField, noise: NoiseSpec) -> Result<ProblemDef> {
    let (_, q) = darcy_velocity(grid, perm, 1.0, 0.0)?;
    if q.max_abs() == 0.0 {
        return Err(invalid("Darcy solve produced a zero velocity field"));
    }
    advection_with_velocity(grid, &q.faces(), noise)
}
