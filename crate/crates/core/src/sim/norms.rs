//! Recorded norm histories and CSV export of states.

use std::io::Write;

use super::mode::ModeState;
use super::polar::PolarField;
use super::rect::Field2D;
use crate::kernels::trapezoid_weights;
use crate::{Error, Result};

/// Norms sampled along a run; `h1` is either recorded at every sample or not
/// at all.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1: Option<Vec<f64>>,
}

impl NormSeries {
    pub fn new(with_h1: bool) -> Self {
        NormSeries {
            times: Vec::new(),
            l2: Vec::new(),
            h1: with_h1.then(Vec::new),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, l2: f64, h1: Option<f64>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::numerical(format!(
                    "norm series times must increase: {t} after {last}"
                )));
            }
        }
        if !(l2 >= 0.0) {
            return Err(Error::numerical(format!("L2 norm at t = {t} is {l2}")));
        }
        match (&mut self.h1, h1) {
            (Some(v), Some(h)) if h >= 0.0 => v.push(h),
            (None, None) => {}
            (Some(_), Some(h)) => {
                return Err(Error::numerical(format!("H1 norm at t = {t} is {h}")))
            }
            _ => {
                return Err(Error::numerical(
                    "H1 samples must be given for every entry or none",
                ))
            }
        }
        self.times.push(t);
        self.l2.push(l2);
        Ok(())
    }

    /// Writes `t,l2,h1`; the `h1` column is empty when not recorded.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,l2,h1")?;
        for (k, (t, l2)) in self.times.iter().zip(&self.l2).enumerate() {
            match &self.h1 {
                Some(h) => writeln!(out, "{t},{l2},{}", h[k])?,
                None => writeln!(out, "{t},{l2},")?,
            }
        }
        Ok(())
    }
}

/// Ensemble `L²` norm over sampled wavenumbers: `(Σ_k w_k ‖u_k‖²)^{1/2}` with
/// trapezoid weights in `k`. A single mode gets unit weight.
pub fn ensemble_l2_norm(modes: &[ModeState], wavenumbers: &[f64]) -> f64 {
    let weights = if wavenumbers.len() > 1 {
        trapezoid_weights(wavenumbers)
    } else {
        vec![1.0; wavenumbers.len()]
    };
    modes
        .iter()
        .zip(&weights)
        .map(|(m, w)| w * m.l2_norm().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Row-major `x,y,u` over the full grid, boundary nodes included.
pub fn write_rect_snapshot<W: Write>(field: &Field2D, mut out: W) -> Result<()> {
    writeln!(out, "x,y,u")?;
    let g = field.grid;
    for j in 0..=g.ny + 1 {
        for i in 0..=g.nx + 1 {
            writeln!(out, "{},{},{}", g.x(i), g.y(j), field.value(i, j))?;
        }
    }
    Ok(())
}

/// Row-major `r,theta,u` over the cells and the arc.
pub fn write_polar_snapshot<W: Write>(field: &PolarField, mut out: W) -> Result<()> {
    writeln!(out, "r,theta,u")?;
    let g = field.grid;
    for j in 0..g.nr() {
        for i in 1..=g.ntheta {
            writeln!(
                out,
                "{},{},{}",
                g.r(j),
                g.theta(i),
                field.values[g.index(j, i)]
            )?;
        }
    }
    for (i, u) in field.boundary.iter().enumerate() {
        writeln!(out, "{},{},{}", g.radius(), g.theta(i + 1), u)?;
    }
    Ok(())
}
