//! Time stepping for the plant `u_t = εΔu + λu` on each geometry.
//!
//! Every stepper is Crank–Nicolson over a sparse spatial operator; boundary
//! inputs are taken trapezoidally between the held value at the start of the
//! step and the new profile at its end.

mod banded;
mod cn;
pub mod masked;
pub mod mode;
pub mod norms;
pub mod polar;
pub mod radial;
pub mod rect;

pub use cn::{CrankNicolson, SparseOperator};
pub use masked::{
    interface_trace, masked_l2_norm, step_masked, Crossing, Cut, InterfaceTrace, MaskedGrid,
    OmegaReplay, PianoGeometry,
};
pub use mode::{
    step_mode_sector, step_mode_strip, ModeLabel, ModeState, SectorModeStepper, StripModeStepper,
};
pub use norms::{ensemble_l2_norm, write_polar_snapshot, write_rect_snapshot, NormSeries};
pub use polar::{polar_l2_norm, PolarField, PolarGrid, PolarStepper};
pub use radial::RadialGrid;
pub use rect::{
    h1_norm, h1_seminorm_squared, l2_norm, step_rect, ControlledEdge, Field2D, RectGrid,
    RectStepper,
};

use crate::{Error, Result};

/// Largest admissible step for a given reaction coefficient.
pub fn check_dt(dt: f64, lambda: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    if dt > 1e-3 || dt * lambda.abs().max(1.0) > 0.1 {
        return Err(Error::config(format!(
            "dt = {dt} too large: need dt <= 1e-3 and dt*max(1,|lambda|) <= 0.1"
        )));
    }
    Ok(())
}
