//! Sine-series (square) and angular-eigenfunction (sector) transforms.
//!
//! Analysis uses the composite trapezoid rule on the simulation grid, so the
//! transforms are consistent with the finite-difference stencil.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Which direction a modal series decomposes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModalDomain {
    SquareY,
    SectorTheta { theta1: f64, theta2: f64 },
}

/// Mode coefficients for a family of 1-D lines (x-columns or radial nodes).
///
/// `coeffs[n - 1][line]` is the coefficient of mode `n` on `line`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSeries {
    pub n_max: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub domain: ModalDomain,
}

impl ModalSeries {
    /// Decomposes each line and transposes into mode-major storage.
    pub fn from_lines<'a, I, F>(
        n_max: usize,
        domain: ModalDomain,
        lines: I,
        transform: F,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        if n_max == 0 {
            return Err(Error::config("a modal series needs n_max >= 1"));
        }
        let mut coeffs = vec![Vec::new(); n_max];
        for line in lines {
            let c = transform(line)?;
            for (mode, value) in coeffs.iter_mut().zip(c) {
                mode.push(value);
            }
        }
        Ok(ModalSeries {
            n_max,
            coeffs,
            domain,
        })
    }

    pub fn mode(&self, n: usize) -> &[f64] {
        &self.coeffs[n - 1]
    }
}

fn aliasing_guard(points: usize, n_max: usize) -> Result<()> {
    if n_max == 0 {
        return Err(Error::config("n_max must be at least 1"));
    }
    if points < 3 || 2 * n_max >= points {
        return Err(Error::config(format!(
            "n_max = {n_max} aliases on a grid of {points} points (need n_max < points/2)"
        )));
    }
    Ok(())
}

/// `u_n = 2 ∫₀¹ u(η) sin(nπη) dη` for `n = 1..=n_max`, from samples on a
/// uniform grid that includes both endpoints.
///
/// Endpoint samples are multiplied by `sin(0) = sin(nπ) = 0`, so they never
/// contribute.
pub fn sine_coeffs(samples: &[f64], n_max: usize) -> Result<Vec<f64>> {
    aliasing_guard(samples.len(), n_max)?;
    let intervals = samples.len() - 1;
    let h = 1.0 / intervals as f64;
    let coeffs = (1..=n_max)
        .map(|n| {
            let k = n as f64 * PI * h;
            let s: f64 = samples[1..intervals]
                .iter()
                .enumerate()
                .map(|(j, u)| u * (k * (j + 1) as f64).sin())
                .sum();
            2.0 * h * s
        })
        .collect();
    Ok(coeffs)
}

/// `Σ_n coeffs[n−1] sin(nπy)`.
pub fn sine_reconstruct(coeffs: &[f64], y: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * ((i + 1) as f64 * PI * y).sin())
        .sum()
}

/// Dirichlet eigenfunctions `Φ_n(θ) = sin(nπ(θ − θ₁)/(θ₂ − θ₁))` on a sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularBasis {
    theta1: f64,
    theta2: f64,
    n_max: usize,
}

impl AngularBasis {
    pub fn new(theta1: f64, theta2: f64, n_max: usize) -> Result<Self> {
        let span = theta2 - theta1;
        if !theta1.is_finite() || !theta2.is_finite() || !(span > 0.0) || span > 2.0 * PI + 1e-12 {
            return Err(Error::config(format!(
                "sector limits need 0 < theta2 - theta1 <= 2π, got ({theta1}, {theta2})"
            )));
        }
        if n_max == 0 {
            return Err(Error::config("angular basis needs n_max >= 1"));
        }
        Ok(AngularBasis {
            theta1,
            theta2,
            n_max,
        })
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn span(&self) -> f64 {
        self.theta2 - self.theta1
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Angular eigenvalue `α_n = nπ/(θ₂ − θ₁)`.
    pub fn alpha(&self, n: usize) -> f64 {
        n as f64 * PI / self.span()
    }

    pub fn phi(&self, n: usize, theta: f64) -> f64 {
        (self.alpha(n) * (theta - self.theta1)).sin()
    }
}

/// `u_n = (2/(θ₂−θ₁)) ∫ u(θ) Φ_n(θ) dθ` from samples on a uniform grid over
/// `[θ₁, θ₂]` including both endpoints.
///
/// The `2/(θ₂−θ₁)` factor makes [`angular_reconstruct`] the exact inverse
/// with unnormalized `Φ_n`.
pub fn angular_coeffs(samples: &[f64], basis: &AngularBasis) -> Result<Vec<f64>> {
    // Φ_n(θ₁ + s·span) = sin(nπs): the sine transform on the unit interval.
    sine_coeffs(samples, basis.n_max)
}

pub fn angular_reconstruct(coeffs: &[f64], basis: &AngularBasis, theta: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * basis.phi(i + 1, theta))
        .sum()
}
