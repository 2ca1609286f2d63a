//! Special functions needed by the kernel formulas.
//!
//! Kernel arguments stay below roughly 30 for every supported plant, so the
//! modified Bessel function is evaluated by its power series alone.

use crate::{Error, Result};

/// Convergence control for the `I₁` power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        SeriesTolerance {
            rel_tol: 1e-14,
            max_terms: 200,
        }
    }
}

impl SeriesTolerance {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !rel_tol.is_finite() {
            return Err(Error::domain(format!(
                "rel_tol must be positive, got {rel_tol}"
            )));
        }
        if max_terms == 0 {
            return Err(Error::domain("max_terms must be at least 1"));
        }
        Ok(SeriesTolerance { rel_tol, max_terms })
    }
}

fn check_nonnegative(z: f64, what: &str) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return Err(Error::domain(format!(
            "{what} requires a finite z >= 0, got {z}"
        )));
    }
    Ok(())
}

/// Sums `Σ_j (z²/4)^j / (j!(j+1)!)`, the series of `2·I₁(z)/z`.
fn reduced_series(z: f64, tol: SeriesTolerance) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..tol.max_terms {
        let jf = j as f64;
        term *= q / (jf * (jf + 1.0));
        sum += term;
        if term < tol.rel_tol * sum {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind, order one, for `z ≥ 0`.
pub fn bessel_i1(z: f64) -> Result<f64> {
    bessel_i1_with(z, SeriesTolerance::default())
}

pub fn bessel_i1_with(z: f64, tol: SeriesTolerance) -> Result<f64> {
    check_nonnegative(z, "bessel_i1")?;
    Ok(0.5 * z * reduced_series(z, tol))
}

/// `I₁(z)/z`, continuous through the removable singularity (`1/2` at zero).
pub fn i1_ratio(z: f64) -> Result<f64> {
    i1_ratio_with(z, SeriesTolerance::default())
}

pub fn i1_ratio_with(z: f64, tol: SeriesTolerance) -> Result<f64> {
    check_nonnegative(z, "i1_ratio")?;
    Ok(0.5 * reduced_series(z, tol))
}

/// Unnormalized cardinal sine `sin(z)/z`.
pub fn sinc(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!(
            "sinc requires a finite argument, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    Ok(z.sin() / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: 200 terms, each computed from scratch via
    /// factorial logarithms, accumulated with Neumaier compensation.
    fn i1_oracle(z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let half = 0.5 * z;
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut ln_fact = vec![0.0f64; 202];
        for n in 1..202 {
            ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
        }
        for j in 0..200usize {
            let ln_term = (2 * j + 1) as f64 * half.ln() - ln_fact[j] - ln_fact[j + 1];
            let term = ln_term.exp();
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    // Reference values from a 30-digit evaluation.
    const I1_AT_1: f64 = 0.565_159_103_992_485;
    const I1_AT_2: f64 = 1.590_636_854_637_329;

    #[test]
    fn i1_at_zero_is_zero() {
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
    }

    #[test]
    fn i1_matches_series_oracle() {
        for (z, reference) in [(1.0, I1_AT_1), (2.0, I1_AT_2)] {
            let oracle = i1_oracle(z);
            assert!((oracle - reference).abs() < 1e-15 * reference);
            let got = bessel_i1(z).unwrap();
            assert!(
                (got - oracle).abs() < 1e-14 * oracle,
                "z={z}: {got} vs {oracle}"
            );
        }
        for z in [0.1, 5.0, 17.3, 30.0, 49.5] {
            let oracle = i1_oracle(z);
            let got = bessel_i1(z).unwrap();
            assert!(
                (got - oracle).abs() < 1e-13 * oracle,
                "z={z}: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn ratio_limits_and_consistency() {
        assert_eq!(i1_ratio(0.0).unwrap(), 0.5);
        assert!((i1_ratio(1.0).unwrap() - I1_AT_1).abs() < 1e-15);
        assert!((i1_ratio(2.0).unwrap() - I1_AT_2 / 2.0).abs() < 1e-15);
        // continuity at the origin
        assert!((i1_ratio(1e-8).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(bessel_i1(-1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_i1(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(i1_ratio(-0.5), Err(Error::Domain(_))));
        assert!(matches!(sinc(f64::INFINITY), Err(Error::Domain(_))));
        assert!(SeriesTolerance::new(0.0, 10).is_err());
        assert!(SeriesTolerance::new(1e-12, 0).is_err());
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0).unwrap(), 1.0);
        assert!(sinc(std::f64::consts::PI).unwrap().abs() < 1e-16);
        let half = std::f64::consts::FRAC_PI_2;
        assert!((sinc(half).unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-16);
    }

    #[test]
    fn i1_increasing_on_grid() {
        let mut prev = bessel_i1(0.0).unwrap();
        for i in 1..=5000 {
            let cur = bessel_i1(i as f64 * 1e-2).unwrap();
            assert!(cur > prev, "not increasing at z={}", i as f64 * 1e-2);
            prev = cur;
        }
    }

    #[test]
    fn truncated_series_is_coarser() {
        let loose = bessel_i1_with(10.0, SeriesTolerance::new(1e-14, 3).unwrap()).unwrap();
        let full = bessel_i1(10.0).unwrap();
        assert!(loose < full);
    }

    proptest! {
        #[test]
        fn ratio_times_z_is_i1(z in 0.0f64..50.0) {
            let lhs = z * i1_ratio(z).unwrap();
            let rhs = bessel_i1(z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn sinc_is_even(z in -1e3f64..1e3) {
            prop_assert_eq!(sinc(z).unwrap(), sinc(-z).unwrap());
        }
    }
}
