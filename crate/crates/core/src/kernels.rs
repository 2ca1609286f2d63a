//! Closed-form backstepping kernels.
//!
//! Sign convention: the minus sign is part of every kernel, so that the
//! diagonal condition `K(x,x) = −λ₀x/2` holds literally and every control law
//! reads `U = ∫ K(1,ξ) u(ξ) dξ` with no extra sign.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::specfun::{i1_ratio, sinc};
use crate::{Error, Result};

/// Physical plant `u_t = ε Δu + λ u` together with the requested decay rate `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    epsilon: f64,
    lambda: f64,
    c: f64,
}

impl PlantParams {
    pub fn new(epsilon: f64, lambda: f64, c: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::config(format!(
                "plant.epsilon must be > 0, got {epsilon}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::config(format!(
                "plant.lambda must be finite, got {lambda}"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::config(format!("plant.c must be > 0, got {c}")));
        }
        Ok(PlantParams { epsilon, lambda, c })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `(λ + c)/ε`, the only plant combination the kernels depend on.
    pub fn lambda0(&self) -> f64 {
        (self.lambda + self.c) / self.epsilon
    }

    /// Same plant, different reaction coefficient.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        PlantParams::new(self.epsilon, lambda, self.c)
    }

    fn checked_lambda0(&self) -> Result<f64> {
        let l0 = self.lambda0();
        if l0 < 0.0 {
            return Err(Error::domain(format!(
                "kernel formulas need lambda + c >= 0, got lambda0 = {l0}"
            )));
        }
        Ok(l0)
    }
}

fn check_point(x: f64, xi: f64) -> Result<f64> {
    if !x.is_finite() || !xi.is_finite() || xi < 0.0 || x < 0.0 {
        return Err(Error::domain(format!(
            "kernel needs 0 <= xi <= x, got x={x}, xi={xi}"
        )));
    }
    let slack = 1e-12 * x.max(1.0);
    if xi > x + slack {
        return Err(Error::domain(format!(
            "kernel needs xi <= x, got x={x}, xi={xi}"
        )));
    }
    Ok(xi.min(x))
}

/// `I₁(z)/z` at `z = √(λ₀(x² − ξ²))`.
fn bessel_factor(lambda0: f64, x: f64, xi: f64) -> f64 {
    let arg = (lambda0 * (x * x - xi * xi)).max(0.0);
    // arg >= 0 and finite, so the ratio cannot fail
    i1_ratio(arg.sqrt()).expect("non-negative argument")
}

/// Kernel of the 1-D transformation on `[0, x]`:
/// `K(x,ξ) = −λ₀ ξ I₁(z)/z`, `z = √(λ₀(x² − ξ²))`.
pub fn kernel_1d(p: &PlantParams, x: f64, xi: f64) -> Result<f64> {
    let l0 = p.checked_lambda0()?;
    let xi = check_point(x, xi)?;
    // `+ 0.0` normalizes the signed zero at ξ = 0
    Ok(-l0 * xi * bessel_factor(l0, x, xi) + 0.0)
}

/// Backstepping gain profile `h(η) = λ₀ η I₁(z)/z`, `z = √(λ₀(1 − η²))`.
///
/// This is `−K(1, η)`.
pub fn strip_gain(p: &PlantParams, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    let l0 = p.checked_lambda0()?;
    Ok(l0 * eta * bessel_factor(l0, 1.0, eta))
}

/// Physical-space kernel of the spectrally truncated strip law,
/// `2N h(η) sinc(2πN(x − ξ))`. The law applies it with a leading minus.
pub fn kernel_strip_truncated(p: &PlantParams, n: usize, x: f64, xi: f64, eta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("mode cutoff N must be at least 1"));
    }
    let nf = n as f64;
    let s = sinc(2.0 * std::f64::consts::PI * nf * (x - xi))?;
    Ok(2.0 * nf * strip_gain(p, eta)? * s)
}

/// Radial kernel of angular mode `n` on a sector:
/// `k_n(r,ρ) = −λ₀ ρ (ρ/r)^α I₁(z)/z`, with `α = nπ/(θ₂ − θ₁)`.
pub fn kernel_sector(p: &PlantParams, alpha: f64, r: f64, rho: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("sector kernel needs r > 0, got {r}")));
    }
    let l0 = p.checked_lambda0()?;
    let rho = check_point(r, rho)?;
    let geometric = if alpha == 0.0 {
        1.0
    } else {
        (rho / r).powf(alpha)
    };
    Ok(-l0 * rho * geometric * bessel_factor(l0, r, rho) + 0.0)
}

/// Max-norm residual of `K_xx − K_ξξ − λ₀K` over interior nodes of the
/// triangle `0 ≤ ξ ≤ x ≤ 1`, using second-order central differences.
///
/// Points within `2h` of the diagonal or either edge are excluded.
pub fn kernel_residual_1d(p: &PlantParams, h: f64) -> Result<f64> {
    if !(h > 0.0) || h > 1.0 / 32.0 {
        return Err(Error::config(format!(
            "grid spacing must satisfy 0 < h <= 1/32, got {h}"
        )));
    }
    let n = (1.0 / h).round() as usize;
    if ((n as f64) * h - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!("h = {h} does not divide 1")));
    }
    let l0 = p.checked_lambda0()?;
    let k = |i: usize, j: usize| -> f64 {
        let x = i as f64 * h;
        let xi = j as f64 * h;
        -l0 * xi * bessel_factor(l0, x, xi)
    };
    let inv_h2 = 1.0 / (h * h);
    let mut worst = 0.0f64;
    for i in 4..=n - 2 {
        for j in 2..=i - 2 {
            let centre = k(i, j);
            let kxx = (k(i + 1, j) - 2.0 * centre + k(i - 1, j)) * inv_h2;
            let kxixi = (k(i, j + 1) - 2.0 * centre + k(i, j - 1)) * inv_h2;
            worst = worst.max((kxx - kxixi - l0 * centre).abs());
        }
    }
    Ok(worst)
}

/// Which outer-boundary kernel row a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelGeometry {
    /// `K(1, η) = −h(η)` on `[0, 1]`.
    Strip,
    /// `K(L, ξ)` on `[0, L]`.
    Square { extent: f64 },
    /// `k_n(R, ρ)` on `[0, R]`.
    Sector { alpha: f64, radius: f64 },
}

impl KernelGeometry {
    pub fn extent(&self) -> f64 {
        match *self {
            KernelGeometry::Strip => 1.0,
            KernelGeometry::Square { extent } => extent,
            KernelGeometry::Sector { radius, .. } => radius,
        }
    }

    fn eval(&self, p: &PlantParams, xi: f64) -> Result<f64> {
        match *self {
            KernelGeometry::Strip => kernel_1d(p, 1.0, xi),
            KernelGeometry::Square { extent } => kernel_1d(p, extent, xi),
            KernelGeometry::Sector { alpha, radius } => kernel_sector(p, alpha, radius, xi),
        }
    }
}

/// Precomputed gain row, with composite-trapezoid weights on its abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    geometry: KernelGeometry,
    abscissae: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

const GRID_MATCH_TOL: f64 = 1e-12;

impl KernelTable {
    /// Samples the kernel row on arbitrary sorted abscissae covering
    /// `[0, extent]` (both endpoints included).
    pub fn on_abscissae(
        p: &PlantParams,
        geometry: KernelGeometry,
        abscissae: Vec<f64>,
    ) -> Result<Self> {
        if abscissae.len() < 2 {
            return Err(Error::config("kernel table needs at least two abscissae"));
        }
        if abscissae.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config(
                "kernel table abscissae must be strictly increasing",
            ));
        }
        let extent = geometry.extent();
        let (first, last) = (abscissae[0], abscissae[abscissae.len() - 1]);
        if first.abs() > GRID_MATCH_TOL || (last - extent).abs() > GRID_MATCH_TOL * extent.max(1.0)
        {
            return Err(Error::config(format!(
                "kernel table abscissae must span [0, {extent}], got [{first}, {last}]"
            )));
        }
        let values = abscissae
            .iter()
            .map(|&xi| geometry.eval(p, xi.clamp(0.0, extent)))
            .collect::<Result<Vec<_>>>()?;
        let weights = trapezoid_weights(&abscissae);
        Ok(KernelTable {
            geometry,
            abscissae,
            values,
            weights,
        })
    }

    pub fn geometry(&self) -> KernelGeometry {
        self.geometry
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    /// Fails unless `abscissae` coincides with this table's sample points.
    pub fn check_grid(&self, abscissae: &[f64]) -> Result<()> {
        if abscissae.len() != self.abscissae.len() {
            return Err(Error::config(format!(
                "kernel table has {} samples but the simulation grid has {}",
                self.abscissae.len(),
                abscissae.len()
            )));
        }
        let scale = self.geometry.extent().max(1.0);
        if let Some((a, b)) = self
            .abscissae
            .iter()
            .zip(abscissae)
            .find(|(a, b)| (*a - *b).abs() > GRID_MATCH_TOL * scale)
        {
            return Err(Error::config(format!(
                "kernel table abscissa {a} does not match grid point {b}"
            )));
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::config(format!(
                "state line has {n} samples, kernel table has {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Trapezoid quadrature of `K · u` over the table's abscissae.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        self.check_len(samples.len())?;
        Ok(self.integrate_unchecked(samples.iter().copied()))
    }

    pub(crate) fn integrate_unchecked(&self, samples: impl Iterator<Item = f64>) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .zip(samples)
            .map(|((k, w), u)| k * w * u)
            .sum()
    }

    pub fn integrate_complex(
        &self,
        samples: &[num_complex::Complex64],
    ) -> Result<num_complex::Complex64> {
        self.check_len(samples.len())?;
        Ok(self
            .values
            .iter()
            .zip(&self.weights)
            .zip(samples)
            .map(|((k, w), u)| u * (k * w))
            .sum())
    }

    /// Writes the table as CSV with header `xi,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "xi,value")?;
        for (xi, v) in self.abscissae.iter().zip(&self.values) {
            writeln!(out, "{xi},{v}")?;
        }
        Ok(())
    }
}

/// Samples the outer-boundary kernel row on `n_samples` uniform points.
pub fn build_kernel_table(
    p: &PlantParams,
    geometry: KernelGeometry,
    n_samples: usize,
) -> Result<KernelTable> {
    if n_samples < 16 {
        return Err(Error::config(format!(
            "kernel table needs at least 16 samples, got {n_samples}"
        )));
    }
    let extent = geometry.extent();
    let step = extent / (n_samples - 1) as f64;
    let abscissae = (0..n_samples)
        .map(|i| {
            if i == n_samples - 1 {
                extent
            } else {
                i as f64 * step
            }
        })
        .collect();
    KernelTable::on_abscissae(p, geometry, abscissae)
}

pub(crate) fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let half = 0.5 * (points[i + 1] - points[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_i1;

    fn plant_with_lambda0(l0: f64) -> PlantParams {
        // epsilon = 1, c = 1
        PlantParams::new(1.0, l0 - 1.0, 1.0).unwrap()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn plant_validation() {
        assert!(PlantParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, f64::NAN, 1.0).is_err());
        assert!(PlantParams::new(1.0, 1.0, 0.0).is_err());
        let p = PlantParams::new(2.0, 5.0, 1.0).unwrap();
        assert_eq!(p.lambda0(), 3.0);
    }

    #[test]
    fn kernel_1d_diagonal_and_edge() {
        let p = plant_with_lambda0(2.0);
        assert!(rel_close(kernel_1d(&p, 0.5, 0.5).unwrap(), -0.5, 1e-15));
        assert_eq!(kernel_1d(&p, 0.7, 0.0).unwrap(), 0.0);
        let p8 = plant_with_lambda0(8.0);
        for i in 1..=10 {
            let x = i as f64 / 10.0;
            assert!(rel_close(
                kernel_1d(&p8, x, x).unwrap(),
                -8.0 * x / 2.0,
                1e-12
            ));
            assert_eq!(kernel_1d(&p8, x, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn kernel_1d_interior_value() {
        // -8 * 0.5 * I1(sqrt 6)/sqrt 6, 30-digit reference
        let reference = -3.925_572_855_872_356_2;
        let p = plant_with_lambda0(8.0);
        let got = kernel_1d(&p, 1.0, 0.5).unwrap();
        assert!(rel_close(got, reference, 1e-14), "{got}");
        let z = 6f64.sqrt();
        assert!(rel_close(got, -4.0 * bessel_i1(z).unwrap() / z, 1e-14));
    }

    #[test]
    fn kernel_domain_errors() {
        let p = plant_with_lambda0(2.0);
        assert!(matches!(kernel_1d(&p, 0.5, 0.6), Err(Error::Domain(_))));
        assert!(matches!(kernel_1d(&p, 0.5, -0.1), Err(Error::Domain(_))));
        let negative = PlantParams::new(1.0, -3.0, 1.0).unwrap();
        assert!(matches!(
            kernel_1d(&negative, 0.5, 0.2),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            kernel_sector(&p, -1.0, 1.0, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            kernel_sector(&p, 1.0, 0.0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            kernel_sector(&p, 1.0, 0.5, 0.7),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            kernel_strip_truncated(&p, 1, 0.0, 0.0, 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn strip_truncated_kernel() {
        let p = plant_with_lambda0(8.0);
        for eta in [0.0, 0.3, 0.9, 1.0] {
            let h = strip_gain(&p, eta).unwrap();
            assert!(rel_close(
                kernel_strip_truncated(&p, 3, 0.4, 0.4, eta).unwrap(),
                6.0 * h,
                1e-15
            ));
            assert!(
                kernel_strip_truncated(&p, 1, 0.75, 0.25, eta)
                    .unwrap()
                    .abs()
                    < 1e-14
            );
        }
        assert_eq!(kernel_strip_truncated(&p, 2, 0.1, 0.3, 0.0).unwrap(), 0.0);
        assert!(rel_close(
            strip_gain(&p, 0.6).unwrap(),
            -kernel_1d(&p, 1.0, 0.6).unwrap(),
            1e-15
        ));
    }

    #[test]
    fn sector_kernel_values() {
        let p2 = plant_with_lambda0(2.0);
        assert_eq!(kernel_sector(&p2, 3.0, 0.8, 0.0).unwrap(), 0.0);
        assert!(rel_close(
            kernel_sector(&p2, 0.0, 0.5, 0.5).unwrap(),
            -0.5,
            1e-15
        ));
        // -4 * 0.5 * 0.25 * I1(sqrt 3)/sqrt 3, 30-digit reference
        let p4 = plant_with_lambda0(4.0);
        let got = kernel_sector(&p4, 2.0, 1.0, 0.5).unwrap();
        assert!(rel_close(got, -0.356_229_336_768_289_06, 1e-14), "{got}");
        // diagonal limit
        for alpha in [0.0, 1.5, 4.0] {
            assert!(rel_close(
                kernel_sector(&p4, alpha, 0.7, 0.7).unwrap(),
                -4.0 * 0.7 / 2.0,
                1e-12
            ));
        }
    }

    #[test]
    fn sector_reduces_to_1d_and_g_is_mode_independent() {
        let p = plant_with_lambda0(6.5);
        for &(r, rho) in &[(1.0, 0.3), (0.8, 0.8), (0.5, 0.1), (2.0, 1.7)] {
            let a = kernel_sector(&p, 0.0, r, rho).unwrap();
            let b = kernel_1d(&p, r, rho).unwrap();
            assert!(rel_close(a, b, 1e-12));
            let g = |alpha: f64| {
                kernel_sector(&p, alpha, r, rho).unwrap() * (r / rho).powf(alpha) / rho
            };
            let g0 = g(0.0);
            for alpha in [0.5, 2.0, 4.0, 7.5] {
                assert!(rel_close(g(alpha), g0, 1e-12));
            }
        }
    }

    #[test]
    fn residual_zero_kernel() {
        let p = plant_with_lambda0(0.0);
        assert_eq!(kernel_residual_1d(&p, 1.0 / 64.0).unwrap(), 0.0);
    }

    #[test]
    fn residual_small_and_quadratic() {
        let p1 = plant_with_lambda0(1.0);
        assert!(kernel_residual_1d(&p1, 1.0 / 256.0).unwrap() <= 1e-3);
        let p8 = plant_with_lambda0(8.0);
        let r8 = kernel_residual_1d(&p8, 1.0 / 256.0).unwrap();
        let r9 = kernel_residual_1d(&p8, 1.0 / 512.0).unwrap();
        let ratio = r9 / r8;
        assert!((0.2..=0.35).contains(&ratio), "ratio {ratio} ({r8}, {r9})");
    }

    #[test]
    fn residual_rejects_coarse_or_misaligned_grids() {
        let p = plant_with_lambda0(8.0);
        assert!(matches!(
            kernel_residual_1d(&p, 1.0 / 16.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            kernel_residual_1d(&p, 0.03),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn tables() {
        let zero = build_kernel_table(
            &plant_with_lambda0(0.0),
            KernelGeometry::Square { extent: 1.0 },
            64,
        )
        .unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let p = plant_with_lambda0(8.0);
        let sq = build_kernel_table(&p, KernelGeometry::Square { extent: 1.0 }, 64).unwrap();
        assert_eq!(sq.values()[0], 0.0);
        assert!(rel_close(*sq.values().last().unwrap(), -4.0, 1e-13));

        let alpha = std::f64::consts::PI / (std::f64::consts::PI / 2.0);
        let geo = KernelGeometry::Sector { alpha, radius: 1.0 };
        let sec = build_kernel_table(&p, geo, 64).unwrap();
        for (xi, v) in sec.abscissae().iter().zip(sec.values()) {
            assert_eq!(*v, kernel_sector(&p, alpha, 1.0, *xi).unwrap());
        }
        assert!(build_kernel_table(&p, KernelGeometry::Strip, 8).is_err());
    }

    #[test]
    fn table_grid_checks_and_quadrature() {
        let p = plant_with_lambda0(8.0);
        let t = build_kernel_table(&p, KernelGeometry::Strip, 33).unwrap();
        assert!(t.check_grid(t.abscissae()).is_ok());
        let shifted: Vec<f64> = t.abscissae().iter().map(|x| x * 0.99).collect();
        assert!(matches!(t.check_grid(&shifted), Err(Error::Config(_))));
        assert!(matches!(t.integrate(&[1.0; 10]), Err(Error::Config(_))));
        // ∫ K(1,η) dη with u ≡ 1 matches manual trapezoid
        let h = 1.0 / 32.0;
        let manual: f64 = (0..33)
            .map(|i| {
                let w = if i == 0 || i == 32 { 0.5 * h } else { h };
                w * kernel_1d(&p, 1.0, i as f64 * h).unwrap()
            })
            .sum();
        assert!(rel_close(
            t.integrate(&vec![1.0; 33]).unwrap(),
            manual,
            1e-14
        ));
        let bad = KernelTable::on_abscissae(&p, KernelGeometry::Strip, vec![0.0, 0.5, 0.4, 1.0]);
        assert!(bad.is_err());
    }

    #[test]
    fn table_csv_header() {
        let p = plant_with_lambda0(8.0);
        let t = build_kernel_table(&p, KernelGeometry::Strip, 16).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("xi,value\n0,0\n"));
        assert_eq!(text.lines().count(), 17);
    }
}
