//! Quick invariant suite behind `pdebs selfcheck`.

use std::f64::consts::PI;

use pdebs_core::actuation::ActuatorBank;
use pdebs_core::kernels::{kernel_1d, kernel_residual_1d, PlantParams};
use pdebs_core::modal::{sine_coeffs, sine_reconstruct};
use pdebs_core::specfun::{bessel_i1, i1_ratio};
use pdebs_core::Result;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelfcheckReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match run() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// `I₁(z) = (1/π) ∫₀^π e^{z cos θ} cos θ dθ`; the trapezoid rule is spectrally
/// accurate for this periodic integrand.
fn i1_by_quadrature(z: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let f = |k: usize| {
        let t = k as f64 * h;
        (z * t.cos()).exp() * t.cos()
    };
    let inner: f64 = (1..n).map(f).sum();
    (inner + 0.5 * (f(0) + f(n))) * h / PI
}

fn bessel_identities() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for z in [0.25, 1.0, 3.0, 8.0, 15.0] {
        let exact = i1_by_quadrature(z);
        worst = worst.max((bessel_i1(z)? - exact).abs() / exact);
        worst = worst.max((z * i1_ratio(z)? - bessel_i1(z)?).abs() / exact);
    }
    let origin = bessel_i1(0.0)? == 0.0 && i1_ratio(0.0)? == 0.5;
    Ok((
        origin && worst <= 1e-12,
        format!("max relative error {worst:.2e} (<= 1e-12); values at 0 exact: {origin}"),
    ))
}

fn kernel_residuals() -> Result<(bool, String)> {
    let p = PlantParams::new(1.0, 7.0, 1.0)?;
    let coarse = kernel_residual_1d(&p, 2f64.powi(-6))?;
    let fine = kernel_residual_1d(&p, 2f64.powi(-7))?;
    let ratio = fine / coarse;
    let mut diag: f64 = 0.0;
    for i in 0..=50 {
        let x = i as f64 / 50.0;
        diag = diag.max((kernel_1d(&p, x, x)? + 0.5 * p.lambda0() * x).abs());
    }
    Ok((
        (0.2..=0.3).contains(&ratio) && diag <= 1e-12,
        format!("residual ratio {ratio:.4} (second order); diagonal error {diag:.1e}"),
    ))
}

fn right_inverse() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        for m in n..=n + 3 {
            for bank in [
                ActuatorBank::piecewise(m, n)?,
                ActuatorBank::sinusoidal(m, n)?,
            ] {
                let prod = bank.phi().entries() * bank.pinv();
                for i in 0..n {
                    for j in 0..n {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((prod[(i, j)] - target).abs());
                    }
                }
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max |ΦΦ† − I| = {worst:.1e} (<= 1e-10)"),
    ))
}

fn parseval() -> Result<(bool, String)> {
    let points = 129;
    let h = 1.0 / (points - 1) as f64;
    let amplitudes = [1.0, -0.5, 0.25, 0.0, 0.125];
    let f = |y: f64| sine_reconstruct(&amplitudes, y);
    let samples: Vec<f64> = (0..points).map(|j| f(j as f64 * h)).collect();
    let coeffs = sine_coeffs(&samples, 8)?;
    let round_trip = (0..points)
        .map(|j| (sine_reconstruct(&coeffs, j as f64 * h) - samples[j]).abs())
        .fold(0.0, f64::max);
    let energy: f64 = samples.iter().map(|u| u * u).sum::<f64>() * h;
    let modal: f64 = 0.5 * coeffs.iter().map(|c| c * c).sum::<f64>();
    let gap = (energy - modal).abs();
    Ok((
        round_trip <= 1e-10 && gap <= h * h,
        format!(
            "round trip {round_trip:.1e} (<= 1e-10); Parseval gap {gap:.1e} (<= h² = {:.1e})",
            h * h
        ),
    ))
}

pub fn run() -> SelfcheckReport {
    let checks = vec![
        check("bessel_identities", bessel_identities),
        check("kernel_residual", kernel_residuals),
        check("actuator_right_inverse", right_inverse),
        check("sine_parseval", parseval),
    ];
    SelfcheckReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}
