//! Staggered radial grid shared by the sector steppers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cell-centred radial nodes `r_j = (j + ½)Δr`, `Δr = R/nr`. The inner face
/// sits at `r = 0` and the outer face at `r = R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nr: usize,
    pub radius: f64,
}

/// Radial part of `(1/r)(r u_r)_r` at cell `j`: coefficients of
/// `(u_{j−1}, u_j, u_{j+1})`, with the `u_{j+1}` slot of the last cell being
/// the Dirichlet value at `r = R`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadialStencil {
    pub inner: f64,
    pub centre: f64,
    pub outer: f64,
}

impl RadialGrid {
    pub fn new(nr: usize, radius: f64) -> Result<Self> {
        if nr < 8 {
            return Err(Error::config(format!(
                "radial grid needs nr >= 8, got {nr}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::config(format!("radius must be > 0, got {radius}")));
        }
        Ok(RadialGrid { nr, radius })
    }

    pub fn dr(&self) -> f64 {
        self.radius / self.nr as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr()
    }

    /// `[0, r_0, …, r_{nr−1}, R]`: the quadrature abscissae for radial kernels.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut a = Vec::with_capacity(self.nr + 2);
        a.push(0.0);
        a.extend((0..self.nr).map(|j| self.r(j)));
        a.push(self.radius);
        a
    }

    pub(crate) fn stencil(&self, j: usize) -> RadialStencil {
        let dr = self.dr();
        let rj = self.r(j);
        // face radii; the inner face of cell 0 is r = 0, so its flux vanishes
        let r_in = j as f64 * dr;
        let r_out = (j + 1) as f64 * dr;
        let scale = 1.0 / (rj * dr);
        let inner = scale * r_in / dr;
        // last cell: the boundary value sits half a cell away
        let outer = if j + 1 == self.nr {
            scale * r_out / (0.5 * dr)
        } else {
            scale * r_out / dr
        };
        RadialStencil {
            inner,
            centre: -(inner + outer),
            outer,
        }
    }
}
