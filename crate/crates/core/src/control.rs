//! Boundary feedback laws evaluated from the current discrete state.
//!
//! Every law has the form `U = ∫ K u`, with the sign carried by the kernel.
//! Quadrature is composite trapezoid on the simulation grid itself, so each
//! [`KernelTable`] must be sampled on exactly the abscissae of the state line
//! it is integrated against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::actuation::{ActuatorBank, DecayBudget};
use crate::kernels::{KernelGeometry, KernelTable, PlantParams};
use crate::modal::{angular_coeffs, sine_coeffs, AngularBasis};
use crate::sim::{
    interface_trace, Field2D, InterfaceTrace, MaskedGrid, ModeLabel, ModeState, PolarField,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    StripTruncated,
    SquareFull,
    SquareFindim,
    SectorModal,
    PianoExtended,
}

/// Everything a law needs besides the state.
#[derive(Debug, Clone)]
pub struct ControlLawConfig {
    pub kind: LawKind,
    pub params: PlantParams,
    pub budget: DecayBudget,
    /// Required by [`LawKind::SquareFindim`].
    pub bank: Option<ActuatorBank>,
    /// One table for rectangular and strip laws, one per angular mode
    /// (`n = 1..=N`) for the sector law.
    pub tables: Vec<KernelTable>,
}

impl ControlLawConfig {
    pub fn validate(&self) -> Result<()> {
        let need_tables = match self.kind {
            LawKind::SectorModal => self.budget.n,
            _ => 1,
        };
        if self.tables.len() != need_tables {
            return Err(Error::config(format!(
                "{:?} law needs {need_tables} kernel table(s), got {}",
                self.kind,
                self.tables.len()
            )));
        }
        let geometry_ok = |g: KernelGeometry| match self.kind {
            LawKind::StripTruncated => g == KernelGeometry::Strip,
            LawKind::SquareFull | LawKind::SquareFindim | LawKind::PianoExtended => {
                matches!(g, KernelGeometry::Square { .. })
            }
            LawKind::SectorModal => matches!(g, KernelGeometry::Sector { .. }),
        };
        if let Some(t) = self.tables.iter().find(|t| !geometry_ok(t.geometry())) {
            return Err(Error::config(format!(
                "{:?} law cannot use a {:?} kernel table",
                self.kind,
                t.geometry()
            )));
        }
        if self.kind == LawKind::SquareFindim {
            let bank = self
                .bank
                .as_ref()
                .ok_or_else(|| Error::config("square_findim law needs an actuator bank"))?;
            if bank.n_modes() != self.budget.n {
                return Err(Error::config(format!(
                    "actuator bank covers {} modes but the budget asks for {}",
                    bank.n_modes(),
                    self.budget.n
                )));
            }
            if !bank.phi().is_full_row_rank() {
                return Err(Error::Stabilizability(format!(
                    "Φ has rank {} < N = {}",
                    bank.phi().rank(),
                    self.budget.n
                )));
            }
        }
        Ok(())
    }
}

/// `U(k) = ∫₀¹ K(1, η) u(k, η) dη` for one strip wavenumber.
pub fn control_strip_mode(mode: &ModeState, table: &KernelTable) -> Result<Complex64> {
    table.check_grid(&mode.abscissae)?;
    table.integrate_complex(&mode.values)
}

/// Spectrally truncated strip law: wavenumbers with `|k| < N` get
/// [`control_strip_mode`], all others are left uncontrolled.
pub fn control_strip_truncated(
    mode: &ModeState,
    budget: &DecayBudget,
    table: &KernelTable,
) -> Result<Complex64> {
    let ModeLabel::Wavenumber(k) = mode.label else {
        return Err(Error::config("strip law needs a wavenumber mode"));
    };
    if k.abs() < budget.n as f64 {
        control_strip_mode(mode, table)
    } else {
        Ok(Complex64::new(0.0, 0.0))
    }
}

/// `U(y_j) = ∫₀ᴸ K(L, ξ) u(ξ, y_j) dξ` at every controlled-edge node.
pub fn control_square_full(state: &Field2D, table: &KernelTable) -> Result<Vec<f64>> {
    table.check_grid(&state.kernel_abscissae())?;
    let n = state.edge.len(&state.grid);
    Ok((0..n)
        .map(|slot| table.integrate_unchecked(state.kernel_line(slot).into_iter()))
        .collect())
}

/// Output of [`control_square_findim`].
#[derive(Debug, Clone, PartialEq)]
pub struct FindimControl {
    /// Modal targets `g_n`, `n = 1..=N`.
    pub targets: Vec<f64>,
    /// Actuator inputs `U_1..U_m`.
    pub inputs: Vec<f64>,
    /// `Σ_k U_k φ_k` at the controlled-edge nodes.
    pub profile: Vec<f64>,
}

/// Finite-dimensional law: project onto the first `N` sine modes across the
/// edge, apply the 1-D law per mode, then allocate with `Φ†`.
pub fn control_square_findim(
    state: &Field2D,
    bank: &ActuatorBank,
    budget: &DecayBudget,
    table: &KernelTable,
) -> Result<FindimControl> {
    if bank.n_modes() != budget.n {
        return Err(Error::config(format!(
            "actuator bank covers {} modes but the budget asks for {}",
            bank.n_modes(),
            budget.n
        )));
    }
    let xs = state.kernel_abscissae();
    table.check_grid(&xs)?;
    let n = budget.n;
    // modal[p][n-1]: coefficient of mode n on the transverse line at x_p
    let modal = (0..xs.len())
        .map(|p| sine_coeffs(&state.transverse_line(p), n))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = (0..n)
        .map(|m| table.integrate_unchecked(modal.iter().map(|c| c[m])))
        .collect();
    let inputs = bank.allocate(&targets)?;
    let coords = state.edge.coordinates(&state.grid);
    let extent = state.grid.extent;
    let profile = coords
        .iter()
        .map(|&y| bank.profile(&inputs, y / extent))
        .collect();
    Ok(FindimControl {
        targets,
        inputs,
        profile,
    })
}

/// Output of [`control_sector`].
#[derive(Debug, Clone, PartialEq)]
pub struct SectorControl {
    /// Per-mode gains `U_n`, `n = 1..=N`.
    pub modal: Vec<f64>,
    /// `Σ_n U_n Φ_n(θ_i)` at the interior arc nodes.
    pub profile: Vec<f64>,
}

/// Sector law: `U_n = ∫₀ᴿ k_n(R, ρ) u_n(ρ) dρ`, recombined on the arc.
pub fn control_sector(
    state: &PolarField,
    basis: &AngularBasis,
    budget: &DecayBudget,
    tables: &[KernelTable],
) -> Result<SectorControl> {
    let n = budget.n;
    if basis.n_max() < n {
        return Err(Error::config(format!(
            "angular basis holds {} modes, the budget asks for {n}",
            basis.n_max()
        )));
    }
    if tables.len() != n {
        return Err(Error::config(format!(
            "sector law needs {n} kernel tables, got {}",
            tables.len()
        )));
    }
    let grid = &state.grid;
    let radial = grid.radial.abscissae();
    for (m, t) in tables.iter().enumerate() {
        t.check_grid(&radial)?;
        if let KernelGeometry::Sector { alpha, .. } = t.geometry() {
            if (alpha - basis.alpha(m + 1)).abs() > 1e-12 * alpha.max(1.0) {
                return Err(Error::config(format!(
                    "kernel table {} has α = {alpha}, mode needs {}",
                    m + 1,
                    basis.alpha(m + 1)
                )));
            }
        }
    }
    let basis_n = AngularBasis::new(basis.theta1(), basis.theta2(), n)?;
    // radial profile of each mode: ρ = 0, the cells, then the arc
    let mut lines = vec![vec![0.0; radial.len()]; n];
    for j in 0..grid.nr() {
        let c = angular_coeffs(&state.angular_line(j), &basis_n)?;
        for m in 0..n {
            lines[m][j + 1] = c[m];
        }
    }
    let arc = angular_coeffs(&state.boundary_line(), &basis_n)?;
    for m in 0..n {
        *lines[m].last_mut().expect("radial line is never empty") = arc[m];
    }
    let modal: Vec<f64> = tables
        .iter()
        .zip(&lines)
        .map(|(t, line)| t.integrate_unchecked(line.iter().copied()))
        .collect();
    let profile = grid
        .interior_thetas()
        .iter()
        .map(|&th| {
            modal
                .iter()
                .enumerate()
                .map(|(m, u)| u * basis_n.phi(m + 1, th))
                .sum()
        })
        .collect();
    Ok(SectorControl { modal, profile })
}

/// Piano law: the square law on the extended square, plus the extended
/// solution's trace on the cut, which is the physical actuation of `Ω`.
pub fn control_piano(
    state: &Field2D,
    grid: &MaskedGrid,
    table: &KernelTable,
) -> Result<(Vec<f64>, InterfaceTrace)> {
    if state.grid != grid.parent {
        return Err(Error::config(
            "state grid differs from the masked grid's parent",
        ));
    }
    let profile = control_square_full(state, table)?;
    Ok((profile, interface_trace(grid, state)))
}
