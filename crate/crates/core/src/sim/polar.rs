//! Sector `{0 ≤ r ≤ R, θ₁ ≤ θ ≤ θ₂}` on a staggered polar grid.

use serde::{Deserialize, Serialize};

use super::cn::{CrankNicolson, SparseOperator};
use super::radial::RadialGrid;
use crate::kernels::PlantParams;
use crate::{Error, Result};

/// Cell-centred radii `r_j = (j + ½)Δr` and uniform angles
/// `θ_i = θ₁ + iΔθ`, `Δθ = (θ₂ − θ₁)/(ntheta + 1)`; angular indices `0` and
/// `ntheta + 1` are the straight (Dirichlet) edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    pub radial: RadialGrid,
    pub ntheta: usize,
    pub theta1: f64,
    pub theta2: f64,
}

impl PolarGrid {
    pub fn new(nr: usize, ntheta: usize, radius: f64, theta1: f64, theta2: f64) -> Result<Self> {
        let radial = RadialGrid::new(nr, radius)?;
        if ntheta < 8 {
            return Err(Error::config(format!(
                "polar grid needs ntheta >= 8, got {ntheta}"
            )));
        }
        let span = theta2 - theta1;
        if !(span > 0.0) || span > 2.0 * std::f64::consts::PI + 1e-12 {
            return Err(Error::config(format!(
                "sector needs 0 < theta2 - theta1 <= 2π, got ({theta1}, {theta2})"
            )));
        }
        Ok(PolarGrid {
            radial,
            ntheta,
            theta1,
            theta2,
        })
    }

    pub fn nr(&self) -> usize {
        self.radial.nr
    }

    pub fn radius(&self) -> f64 {
        self.radial.radius
    }

    pub fn dtheta(&self) -> f64 {
        (self.theta2 - self.theta1) / (self.ntheta + 1) as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        if i == self.ntheta + 1 {
            self.theta2
        } else {
            self.theta1 + i as f64 * self.dtheta()
        }
    }

    pub fn r(&self, j: usize) -> f64 {
        self.radial.r(j)
    }

    /// Unknown index of cell `j` (`0..nr`) at interior angle `i` (`1..=ntheta`).
    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.ntheta + (i - 1)
    }

    pub fn n_interior(&self) -> usize {
        self.nr() * self.ntheta
    }

    pub fn interior_thetas(&self) -> Vec<f64> {
        (1..=self.ntheta).map(|i| self.theta(i)).collect()
    }
}

/// Cell values plus the Dirichlet data held on the arc `r = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
    pub boundary: Vec<f64>,
    pub t: f64,
}

impl PolarField {
    pub fn zeros(grid: PolarGrid) -> Self {
        PolarField {
            grid,
            values: vec![0.0; grid.n_interior()],
            boundary: vec![0.0; grid.ntheta],
            t: 0.0,
        }
    }

    pub fn from_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = PolarField::zeros(grid);
        for j in 0..grid.nr() {
            for i in 1..=grid.ntheta {
                field.values[grid.index(j, i)] = f(grid.r(j), grid.theta(i));
            }
        }
        field
    }

    /// Angular samples at radial cell `j`, straight-edge zeros included.
    pub fn angular_line(&self, j: usize) -> Vec<f64> {
        let n = self.grid.ntheta;
        let mut line = Vec::with_capacity(n + 2);
        line.push(0.0);
        line.extend_from_slice(&self.values[j * n..(j + 1) * n]);
        line.push(0.0);
        line
    }

    /// Angular samples on the arc `r = R`.
    pub fn boundary_line(&self) -> Vec<f64> {
        let mut line = Vec::with_capacity(self.grid.ntheta + 2);
        line.push(0.0);
        line.extend_from_slice(&self.boundary);
        line.push(0.0);
        line
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
        self.boundary.iter_mut().for_each(|v| *v *= a);
    }
}

fn polar_operator(grid: &PolarGrid, p: &PlantParams) -> SparseOperator {
    let eps = p.epsilon();
    let dth2 = grid.dtheta() * grid.dtheta();
    let mut op = SparseOperator::new(grid.n_interior(), grid.ntheta);
    for j in 0..grid.nr() {
        let s = grid.radial.stencil(j);
        let r = grid.r(j);
        let ang = eps / (r * r * dth2);
        for i in 1..=grid.ntheta {
            let row = grid.index(j, i);
            op.add(row, row, eps * s.centre - 2.0 * ang + p.lambda());
            if j > 0 {
                op.add(row, grid.index(j - 1, i), eps * s.inner);
            }
            if j + 1 < grid.nr() {
                op.add(row, grid.index(j + 1, i), eps * s.outer);
            } else {
                op.add_input(row, i - 1, eps * s.outer);
            }
            if i > 1 {
                op.add(row, grid.index(j, i - 1), ang);
            }
            if i < grid.ntheta {
                op.add(row, grid.index(j, i + 1), ang);
            }
        }
    }
    op
}

/// Crank–Nicolson for `u_t = εΔu + λu` in polar form: zero flux through the
/// inner face at `r = 0`, `u = 0` on the straight edges, `u = U(θ)` at `r = R`.
#[derive(Debug, Clone)]
pub struct PolarStepper {
    grid: PolarGrid,
    cn: CrankNicolson,
}

impl PolarStepper {
    pub fn new(grid: PolarGrid, p: &PlantParams, dt: f64) -> Result<Self> {
        Ok(PolarStepper {
            grid,
            cn: CrankNicolson::new(polar_operator(&grid, p), dt)?,
        })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn step(&self, state: &mut PolarField, profile: &[f64]) -> Result<()> {
        self.advance(state, profile, false)
    }

    /// As [`step`](Self::step) with two backward Euler half steps.
    pub fn damped_step(&self, state: &mut PolarField, profile: &[f64]) -> Result<()> {
        self.advance(state, profile, true)
    }

    fn advance(&self, state: &mut PolarField, profile: &[f64], damped: bool) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::config("polar field grid does not match the stepper"));
        }
        if profile.len() != self.grid.ntheta {
            return Err(Error::config(format!(
                "arc profile has {} values, grid has {} angles",
                profile.len(),
                self.grid.ntheta
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

/// `(∫∫ u² r dr dθ)^{1/2}`: midpoint rule in `r`, trapezoid in `θ`.
pub fn polar_l2_norm(field: &PolarField) -> f64 {
    let g = &field.grid;
    let w = g.radial.dr() * g.dtheta();
    let mut sum = 0.0;
    for j in 0..g.nr() {
        let r = g.r(j);
        for i in 1..=g.ntheta {
            let u = field.values[g.index(j, i)];
            sum += w * r * u * u;
        }
    }
    sum.sqrt()
}
