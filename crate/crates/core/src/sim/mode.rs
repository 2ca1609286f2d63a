//! Per-mode 1-D states: strip wavenumbers and sector angular modes.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::cn::{CrankNicolson, SparseOperator};
use super::radial::RadialGrid;
use crate::kernels::{trapezoid_weights, PlantParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeLabel {
    /// Strip wavenumber `k`.
    Wavenumber(f64),
    /// Sector angular mode `n` with eigenvalue `α_n`.
    Angular { n: usize, alpha: f64 },
}

/// Complex state of one mode on a 1-D grid.
///
/// `values[0]` is the inner endpoint (`y = 0` or `ρ = 0`), the last entry is
/// the Dirichlet value currently held at the controlled end.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub label: ModeLabel,
    pub abscissae: Vec<f64>,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl ModeState {
    /// Strip mode on `n` interior nodes of `[0, 1]`.
    pub fn strip(k: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let h = 1.0 / (n + 1) as f64;
        let abscissae: Vec<f64> = (0..=n + 1)
            .map(|i| if i == n + 1 { 1.0 } else { i as f64 * h })
            .collect();
        let values = abscissae
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if i == 0 || i == n + 1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(y)
                }
            })
            .collect();
        ModeState {
            label: ModeLabel::Wavenumber(k),
            abscissae,
            values,
            t: 0.0,
        }
    }

    /// Radial profile of angular mode `n` on a staggered grid.
    pub fn radial(n: usize, alpha: f64, grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let abscissae = grid.abscissae();
        let last = abscissae.len() - 1;
        let values = abscissae
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if i == 0 || i == last {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(f(r), 0.0)
                }
            })
            .collect();
        ModeState {
            label: ModeLabel::Angular { n, alpha },
            abscissae,
            values,
            t: 0.0,
        }
    }

    fn interior_len(&self) -> usize {
        self.values.len() - 2
    }

    pub fn boundary_value(&self) -> Complex64 {
        self.values[self.values.len() - 1]
    }

    /// `(∫ |u|² w dy)^{1/2}` by trapezoid, with radial weight for sector modes.
    pub fn l2_norm(&self) -> f64 {
        let w = trapezoid_weights(&self.abscissae);
        let radial = matches!(self.label, ModeLabel::Angular { .. });
        w.iter()
            .zip(&self.abscissae)
            .zip(&self.values)
            .map(|((w, r), u)| {
                if radial {
                    w * r * u.norm_sqr()
                } else {
                    w * u.norm_sqr()
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.interior_len();
        let re = self.values[1..=n].iter().map(|c| c.re).collect();
        let im = self.values[1..=n].iter().map(|c| c.im).collect();
        (re, im)
    }

    fn advance(&mut self, cn: &CrankNicolson, control: Complex64, damped: bool) -> Result<()> {
        let (mut re, mut im) = self.split();
        let old = self.boundary_value();
        if damped {
            cn.damped_step(&mut re, &[old.re], &[control.re])?;
            cn.damped_step(&mut im, &[old.im], &[control.im])?;
        } else {
            cn.step(&mut re, &[old.re], &[control.re])?;
            cn.step(&mut im, &[old.im], &[control.im])?;
        }
        let n = self.interior_len();
        for (slot, (a, b)) in self.values[1..=n].iter_mut().zip(re.into_iter().zip(im)) {
            *slot = Complex64::new(a, b);
        }
        self.values[n + 1] = control;
        self.t += cn.dt();
        Ok(())
    }
}

/// Crank–Nicolson for `u_t = ε(u_yy − 4π²k²u) + λu`, `u(0) = 0`, `u(1) = U`.
#[derive(Debug, Clone)]
pub struct StripModeStepper {
    k: f64,
    n: usize,
    cn: CrankNicolson,
}

impl StripModeStepper {
    pub fn new(k: f64, n: usize, p: &PlantParams, dt: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::config(format!(
                "strip mode grid needs >= 8 interior nodes, got {n}"
            )));
        }
        let h = 1.0 / (n + 1) as f64;
        let eps = p.epsilon();
        let c = eps / (h * h);
        let mut op = SparseOperator::new(n, 1);
        for i in 0..n {
            op.add(i, i, -2.0 * c - 4.0 * PI * PI * k * k * eps + p.lambda());
            if i > 0 {
                op.add(i, i - 1, c);
            }
            if i + 1 < n {
                op.add(i, i + 1, c);
            } else {
                op.add_input(i, 0, c);
            }
        }
        Ok(StripModeStepper {
            k,
            n,
            cn: CrankNicolson::new(op, dt)?,
        })
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn step(&self, state: &mut ModeState, control: Complex64) -> Result<()> {
        self.advance(state, control, false)
    }

    /// As [`step`](Self::step) with two backward Euler half steps.
    pub fn damped_step(&self, state: &mut ModeState, control: Complex64) -> Result<()> {
        self.advance(state, control, true)
    }

    fn advance(&self, state: &mut ModeState, control: Complex64, damped: bool) -> Result<()> {
        match state.label {
            ModeLabel::Wavenumber(k) if k == self.k && state.interior_len() == self.n => {
                state.advance(&self.cn, control, damped)
            }
            _ => Err(Error::config("mode state does not match the strip stepper")),
        }
    }
}

/// One step of a strip mode; see [`StripModeStepper`] for repeated use.
pub fn step_mode_strip(
    state: &ModeState,
    p: &PlantParams,
    k: f64,
    control: Complex64,
    dt: f64,
) -> Result<ModeState> {
    let stepper = StripModeStepper::new(k, state.values.len() - 2, p, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next, control)?;
    Ok(next)
}

/// Radial operator of one angular mode in conservative form,
/// `ε((1/r)(r u_r)_r − α²u/r²) + λu`, zero flux at `r = 0`, Dirichlet at `R`.
pub(crate) fn radial_mode_operator(
    grid: &RadialGrid,
    alpha: f64,
    p: &PlantParams,
) -> SparseOperator {
    let eps = p.epsilon();
    let mut op = SparseOperator::new(grid.nr, 1);
    for j in 0..grid.nr {
        let s = grid.stencil(j);
        let r = grid.r(j);
        op.add(
            j,
            j,
            eps * s.centre - eps * alpha * alpha / (r * r) + p.lambda(),
        );
        if j > 0 {
            op.add(j, j - 1, eps * s.inner);
        }
        if j + 1 < grid.nr {
            op.add(j, j + 1, eps * s.outer);
        } else {
            op.add_input(j, 0, eps * s.outer);
        }
    }
    op
}

#[derive(Debug, Clone)]
pub struct SectorModeStepper {
    alpha: f64,
    grid: RadialGrid,
    cn: CrankNicolson,
}

impl SectorModeStepper {
    pub fn new(grid: RadialGrid, alpha: f64, p: &PlantParams, dt: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(SectorModeStepper {
            alpha,
            grid,
            cn: CrankNicolson::new(radial_mode_operator(&grid, alpha, p), dt)?,
        })
    }

    pub fn step(&self, state: &mut ModeState, control: f64) -> Result<()> {
        self.advance(state, control, false)
    }

    /// As [`step`](Self::step) with two backward Euler half steps.
    pub fn damped_step(&self, state: &mut ModeState, control: f64) -> Result<()> {
        self.advance(state, control, true)
    }

    fn advance(&self, state: &mut ModeState, control: f64, damped: bool) -> Result<()> {
        match state.label {
            ModeLabel::Angular { alpha, .. }
                if alpha == self.alpha && state.interior_len() == self.grid.nr =>
            {
                state.advance(&self.cn, Complex64::new(control, 0.0), damped)
            }
            _ => Err(Error::config(
                "mode state does not match the sector stepper",
            )),
        }
    }
}

pub fn step_mode_sector(
    state: &ModeState,
    grid: &RadialGrid,
    p: &PlantParams,
    alpha: f64,
    control: f64,
    dt: f64,
) -> Result<ModeState> {
    let stepper = SectorModeStepper::new(*grid, alpha, p, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next, control)?;
    Ok(next)
}
