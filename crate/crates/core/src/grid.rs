//! Uniform tensor-product grid over `[0, L1] x [0, L2]`.
//!
//! Nodes are numbered lexicographically with x running fastest:
//! `node = i + j * (nx + 1)`. Cells use `cell = i + j * nx`. Faces come in
//! two families: x-normal faces `f = i + j * (nx + 1)` for `i <= nx, j < ny`,
//! followed by y-normal faces `x_face_count + i + j * nx` for `i < nx, j <= ny`.

use crate::error::{invalid, Error, Result};

/// Side of the rectangle a boundary face lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [Self::Left, Self::Right, Self::Bottom, Self::Top];

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "bottom" => Ok(Self::Bottom),
            "top" => Ok(Self::Top),
            other => Err(Error::Config(format!("unknown boundary tag `{other}`"))),
        }
    }
}

/// Where degrees of freedom live: grid nodes (P1 finite elements) or cell
/// centres (finite volumes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofLayout {
    Nodes,
    Cells,
}

/// Orientation of a face normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceAxis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    l1: f64,
    l2: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, l1: f64, l2: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(l1 > 0.0 && l1.is_finite() && l2 > 0.0 && l2.is_finite()) {
            return Err(invalid(format!("domain lengths must be positive, got {l1}x{l2}")));
        }
        Ok(Self { nx, ny, l1, l2, dx: l1 / nx as f64, dy: l2 / ny as f64 })
    }

    /// Square `n x n` grid on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }
    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }
    pub fn x_face_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn y_face_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }
    pub fn face_count(&self) -> usize {
        self.x_face_count() + self.y_face_count()
    }

    pub fn dof_count(&self, layout: DofLayout) -> usize {
        match layout {
            DofLayout::Nodes => self.node_count(),
            DofLayout::Cells => self.cell_count(),
        }
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        i + j * (self.nx + 1)
    }

    pub fn node_ij(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.node_count() {
            return Err(Error::Index { index, len: self.node_count() });
        }
        Ok((index % (self.nx + 1), index / (self.nx + 1)))
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i + j * self.nx
    }

    /// x coordinate of node column `i`; the last column sits exactly on `L1`.
    pub fn node_x(&self, i: usize) -> f64 {
        (i as f64 / self.nx as f64) * self.l1
    }

    pub fn node_y(&self, j: usize) -> f64 {
        (j as f64 / self.ny as f64) * self.l2
    }

    pub fn cell_x(&self, i: usize) -> f64 {
        ((i as f64 + 0.5) / self.nx as f64) * self.l1
    }

    pub fn cell_y(&self, j: usize) -> f64 {
        ((j as f64 + 0.5) / self.ny as f64) * self.l2
    }

    pub fn node_coords(&self, index: usize) -> Result<(f64, f64)> {
        let (i, j) = self.node_ij(index)?;
        Ok((self.node_x(i), self.node_y(j)))
    }

    /// Coordinates of the distinct DOF positions along each axis.
    pub fn axis_coords(&self, layout: DofLayout) -> (Vec<f64>, Vec<f64>) {
        match layout {
            DofLayout::Nodes => (
                (0..=self.nx).map(|i| self.node_x(i)).collect(),
                (0..=self.ny).map(|j| self.node_y(j)).collect(),
            ),
            DofLayout::Cells => (
                (0..self.nx).map(|i| self.cell_x(i)).collect(),
                (0..self.ny).map(|j| self.cell_y(j)).collect(),
            ),
        }
    }

    /// All DOF coordinates in DOF order.
    pub fn dof_coords(&self, layout: DofLayout) -> Vec<(f64, f64)> {
        let (xs, ys) = self.axis_coords(layout);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
    }

    /// Quadrature weights attached to each DOF: trapezoidal node weights or
    /// cell areas. Both sum to the domain area.
    pub fn quadrature_weights(&self, layout: DofLayout) -> Vec<f64> {
        match layout {
            DofLayout::Cells => vec![self.dx * self.dy; self.cell_count()],
            DofLayout::Nodes => {
                let wx = |i: usize| if i == 0 || i == self.nx { 0.5 * self.dx } else { self.dx };
                let wy = |j: usize| if j == 0 || j == self.ny { 0.5 * self.dy } else { self.dy };
                (0..=self.ny)
                    .flat_map(|j| (0..=self.nx).map(move |i| wx(i) * wy(j)))
                    .collect()
            }
        }
    }

    /// Axis and `(i, j)` position of a face.
    pub fn face_location(&self, face: usize) -> Result<(FaceAxis, usize, usize)> {
        let nxf = self.x_face_count();
        if face < nxf {
            Ok((FaceAxis::X, face % (self.nx + 1), face / (self.nx + 1)))
        } else if face < self.face_count() {
            let f = face - nxf;
            Ok((FaceAxis::Y, f % self.nx, f / self.nx))
        } else {
            Err(Error::Index { index: face, len: self.face_count() })
        }
    }

    pub fn x_face(&self, i: usize, j: usize) -> usize {
        i + j * (self.nx + 1)
    }

    pub fn y_face(&self, i: usize, j: usize) -> usize {
        self.x_face_count() + i + j * self.nx
    }

    /// Tag of a face, or `None` for interior faces.
    pub fn boundary_tag(&self, face: usize) -> Result<Option<BoundaryTag>> {
        let (axis, i, j) = self.face_location(face)?;
        Ok(match axis {
            FaceAxis::X if i == 0 => Some(BoundaryTag::Left),
            FaceAxis::X if i == self.nx => Some(BoundaryTag::Right),
            FaceAxis::Y if j == 0 => Some(BoundaryTag::Bottom),
            FaceAxis::Y if j == self.ny => Some(BoundaryTag::Top),
            _ => None,
        })
    }

    /// Every boundary face with its tag, in face order.
    pub fn boundary_faces(&self) -> Vec<(usize, BoundaryTag)> {
        (0..self.face_count())
            .filter_map(|f| self.boundary_tag(f).ok().flatten().map(|t| (f, t)))
            .collect()
    }

    /// Nodes lying on the side `tag` (corners belong to both adjacent sides).
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        match tag {
            BoundaryTag::Left => (0..=self.ny).map(|j| self.node_index(0, j)).collect(),
            BoundaryTag::Right => (0..=self.ny).map(|j| self.node_index(self.nx, j)).collect(),
            BoundaryTag::Bottom => (0..=self.nx).map(|i| self.node_index(i, 0)).collect(),
            BoundaryTag::Top => (0..=self.nx).map(|i| self.node_index(i, self.ny)).collect(),
        }
    }

    /// Cells adjacent to the side `tag`.
    pub fn boundary_cells(&self, tag: BoundaryTag) -> Vec<usize> {
        match tag {
            BoundaryTag::Left => (0..self.ny).map(|j| self.cell_index(0, j)).collect(),
            BoundaryTag::Right => (0..self.ny).map(|j| self.cell_index(self.nx - 1, j)).collect(),
            BoundaryTag::Bottom => (0..self.nx).map(|i| self.cell_index(i, 0)).collect(),
            BoundaryTag::Top => (0..self.nx).map(|i| self.cell_index(i, self.ny - 1)).collect(),
        }
    }

    pub fn boundary_dofs(&self, layout: DofLayout, tag: BoundaryTag) -> Vec<usize> {
        match layout {
            DofLayout::Nodes => self.boundary_nodes(tag),
            DofLayout::Cells => self.boundary_cells(tag),
        }
    }
}
