//! Rectangular grids, fields on them, and the 5-point Crank–Nicolson stepper.

use serde::{Deserialize, Serialize};

use super::cn::{CrankNicolson, SparseOperator};
use crate::kernels::PlantParams;
use crate::{Error, Result};

/// Uniform grid over `[0, L]²` with `nx × ny` interior nodes.
///
/// Node `(i, j)` sits at `(i·hx, j·hy)`; indices `0` and `n + 1` are boundary
/// nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectGrid {
    pub nx: usize,
    pub ny: usize,
    pub extent: f64,
}

impl RectGrid {
    pub fn new(nx: usize, ny: usize, extent: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::config(format!(
                "grid needs nx, ny >= 8, got {nx} x {ny}"
            )));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::config(format!(
                "grid extent must be > 0, got {extent}"
            )));
        }
        Ok(RectGrid { nx, ny, extent })
    }

    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.extent / (self.nx + 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.extent / (self.ny + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx + 1 {
            self.extent
        } else {
            i as f64 * self.hx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny + 1 {
            self.extent
        } else {
            j as f64 * self.hy()
        }
    }

    pub fn n_interior(&self) -> usize {
        self.nx * self.ny
    }

    /// Unknown index of interior node `(i, j)`, `1 ≤ i ≤ nx`, `1 ≤ j ≤ ny`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.nx + (i - 1)
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        (1..=self.nx).contains(&i) && (1..=self.ny).contains(&j)
    }

    /// All grid x-coordinates including both boundaries.
    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nx + 1).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..=self.ny + 1).map(|j| self.y(j)).collect()
    }
}

/// Which edge of the square carries the control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlledEdge {
    /// `x = L`; the control profile is indexed by `y_j`, `j = 1..=ny`.
    East,
    /// `y = L`; the control profile is indexed by `x_i`, `i = 1..=nx`.
    North,
}

impl ControlledEdge {
    pub fn len(&self, grid: &RectGrid) -> usize {
        match self {
            ControlledEdge::East => grid.ny,
            ControlledEdge::North => grid.nx,
        }
    }

    /// Coordinates of the controlled-edge nodes along the edge.
    pub fn coordinates(&self, grid: &RectGrid) -> Vec<f64> {
        match self {
            ControlledEdge::East => (1..=grid.ny).map(|j| grid.y(j)).collect(),
            ControlledEdge::North => (1..=grid.nx).map(|i| grid.x(i)).collect(),
        }
    }

    /// Edge-profile index of boundary node `(i, j)`, if it lies on this edge
    /// (corners excluded).
    fn edge_slot(&self, grid: &RectGrid, i: usize, j: usize) -> Option<usize> {
        match self {
            ControlledEdge::East if i == grid.nx + 1 && (1..=grid.ny).contains(&j) => Some(j - 1),
            ControlledEdge::North if j == grid.ny + 1 && (1..=grid.nx).contains(&i) => Some(i - 1),
            _ => None,
        }
    }
}

/// State on a [`RectGrid`]: interior values plus the Dirichlet data currently
/// held on the controlled edge. All other boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: RectGrid,
    pub edge: ControlledEdge,
    pub values: Vec<f64>,
    pub boundary: Vec<f64>,
    pub t: f64,
}

impl Field2D {
    pub fn zeros(grid: RectGrid, edge: ControlledEdge) -> Self {
        Field2D {
            grid,
            edge,
            values: vec![0.0; grid.n_interior()],
            boundary: vec![0.0; edge.len(&grid)],
            t: 0.0,
        }
    }

    /// Interior values from `f(x, y)`; boundary data zero.
    pub fn from_fn(grid: RectGrid, edge: ControlledEdge, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Field2D::zeros(grid, edge);
        for j in 1..=grid.ny {
            for i in 1..=grid.nx {
                field.values[grid.index(i, j)] = f(grid.x(i), grid.y(j));
            }
        }
        field
    }

    /// Value at any grid node, boundary included.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        if self.grid.is_interior(i, j) {
            self.values[self.grid.index(i, j)]
        } else {
            self.edge
                .edge_slot(&self.grid, i, j)
                .map_or(0.0, |s| self.boundary[s])
        }
    }

    /// Samples along the kernel direction that ends at edge node `slot`:
    /// the row `y = y_{slot+1}` for an east edge, the column for a north edge.
    pub fn kernel_line(&self, slot: usize) -> Vec<f64> {
        match self.edge {
            ControlledEdge::East => (0..=self.grid.nx + 1)
                .map(|i| self.value(i, slot + 1))
                .collect(),
            ControlledEdge::North => (0..=self.grid.ny + 1)
                .map(|j| self.value(slot + 1, j))
                .collect(),
        }
    }

    /// Abscissae of [`kernel_line`](Self::kernel_line).
    pub fn kernel_abscissae(&self) -> Vec<f64> {
        match self.edge {
            ControlledEdge::East => self.grid.xs(),
            ControlledEdge::North => self.grid.ys(),
        }
    }

    /// Samples across the edge direction at kernel-line position `p`
    /// (`0..=n+1`), endpoints included: the column `x = x_p` for an east edge.
    pub fn transverse_line(&self, p: usize) -> Vec<f64> {
        match self.edge {
            ControlledEdge::East => (0..=self.grid.ny + 1).map(|j| self.value(p, j)).collect(),
            ControlledEdge::North => (0..=self.grid.nx + 1).map(|i| self.value(i, p)).collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
        self.boundary.iter_mut().for_each(|v| *v *= a);
    }
}

/// Builds `A = εΔ_h + λ` on the interior with zero Dirichlet data except on
/// the controlled edge, whose nodes are the operator inputs.
pub(crate) fn rect_operator(
    grid: &RectGrid,
    edge: ControlledEdge,
    p: &PlantParams,
) -> SparseOperator {
    let eps = p.epsilon();
    let cx = eps / (grid.hx() * grid.hx());
    let cy = eps / (grid.hy() * grid.hy());
    let mut op = SparseOperator::new(grid.n_interior(), edge.len(grid));
    for j in 1..=grid.ny {
        for i in 1..=grid.nx {
            let row = grid.index(i, j);
            op.add(row, row, -2.0 * cx - 2.0 * cy + p.lambda());
            let neighbours = [
                (i - 1, j, cx),
                (i + 1, j, cx),
                (i, j - 1, cy),
                (i, j + 1, cy),
            ];
            for (a, b, coef) in neighbours {
                if grid.is_interior(a, b) {
                    op.add(row, grid.index(a, b), coef);
                } else if let Some(slot) = edge.edge_slot(grid, a, b) {
                    op.add_input(row, slot, coef);
                }
            }
        }
    }
    op
}

/// Preassembled Crank–Nicolson stepper for `u_t = εΔu + λu` on a square.
#[derive(Debug, Clone)]
pub struct RectStepper {
    grid: RectGrid,
    edge: ControlledEdge,
    cn: CrankNicolson,
}

impl RectStepper {
    pub fn new(grid: RectGrid, edge: ControlledEdge, p: &PlantParams, dt: f64) -> Result<Self> {
        let cn = CrankNicolson::new(rect_operator(&grid, edge, p), dt)?;
        Ok(RectStepper { grid, edge, cn })
    }

    pub fn grid(&self) -> &RectGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.cn.dt()
    }

    /// Advances one step. The held boundary data at step start is
    /// `state.boundary`; `profile` is the data at step end, and becomes the
    /// new held data.
    pub fn step(&self, state: &mut Field2D, profile: &[f64]) -> Result<()> {
        self.advance(state, profile, false)
    }

    /// As [`step`](Self::step) with two backward Euler half steps.
    pub fn damped_step(&self, state: &mut Field2D, profile: &[f64]) -> Result<()> {
        self.advance(state, profile, true)
    }

    fn advance(&self, state: &mut Field2D, profile: &[f64], damped: bool) -> Result<()> {
        if state.grid != self.grid || state.edge != self.edge {
            return Err(Error::config("field grid does not match the stepper grid"));
        }
        if profile.len() != self.edge.len(&self.grid) {
            return Err(Error::config(format!(
                "boundary profile has {} values, edge has {}",
                profile.len(),
                self.edge.len(&self.grid)
            )));
        }
        if damped {
            self.cn
                .damped_step(&mut state.values, &state.boundary, profile)?;
        } else {
            self.cn.step(&mut state.values, &state.boundary, profile)?;
        }
        state.boundary.copy_from_slice(profile);
        state.t += self.cn.dt();
        Ok(())
    }
}

/// One Crank–Nicolson step of `u_t = εΔu + λu` with `profile` on the
/// controlled edge. Assembles and factors the operator on every call; use
/// [`RectStepper`] in loops.
pub fn step_rect(state: &Field2D, p: &PlantParams, profile: &[f64], dt: f64) -> Result<Field2D> {
    let stepper = RectStepper::new(state.grid, state.edge, p, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next, profile)?;
    Ok(next)
}

fn trapezoid_1d(n_interior: usize, h: f64) -> impl Fn(usize) -> f64 {
    move |i| {
        if i == 0 || i == n_interior + 1 {
            0.5 * h
        } else {
            h
        }
    }
}

/// Squared trapezoid-rule `L²` norm, boundary nodes included; `keep` selects
/// which grid nodes participate.
pub(crate) fn l2_squared_masked(field: &Field2D, keep: impl Fn(usize, usize) -> bool) -> f64 {
    let g = &field.grid;
    let wx = trapezoid_1d(g.nx, g.hx());
    let wy = trapezoid_1d(g.ny, g.hy());
    let mut sum = 0.0;
    for j in 0..=g.ny + 1 {
        for i in 0..=g.nx + 1 {
            if keep(i, j) {
                let u = field.value(i, j);
                sum += wx(i) * wy(j) * u * u;
            }
        }
    }
    sum
}

pub fn l2_norm(field: &Field2D) -> f64 {
    l2_squared_masked(field, |_, _| true).sqrt()
}

/// Gradient energy `∫|∇u|²` from differences across every grid link.
pub fn h1_seminorm_squared(field: &Field2D) -> f64 {
    let g = &field.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let wx = trapezoid_1d(g.nx, hx);
    let wy = trapezoid_1d(g.ny, hy);
    let mut sum = 0.0;
    for j in 0..=g.ny + 1 {
        for i in 0..=g.nx {
            let d = (field.value(i + 1, j) - field.value(i, j)) / hx;
            sum += hx * wy(j) * d * d;
        }
    }
    for j in 0..=g.ny {
        for i in 0..=g.nx + 1 {
            let d = (field.value(i, j + 1) - field.value(i, j)) / hy;
            sum += wx(i) * hy * d * d;
        }
    }
    sum
}

pub fn h1_norm(field: &Field2D) -> f64 {
    (l2_squared_masked(field, |_, _| true) + h1_seminorm_squared(field)).sqrt()
}
