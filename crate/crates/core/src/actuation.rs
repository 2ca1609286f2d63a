//! Finite-dimensional actuation: shape functions, the mode/actuator matrix
//! `Φ`, its pseudoinverse, and the minimal number of controlled modes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::kernels::PlantParams;
use crate::modal::sine_coeffs;
use crate::{Error, Result};

/// Rank tolerance relative to the largest singular value.
pub const RANK_TOL: f64 = 1e-10;

/// A fixed boundary actuation profile on `y ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeFunction {
    /// Indicator of `[(k−1)/m, k/m]`, `1 ≤ k ≤ m`.
    PiecewiseConstant { m: usize, k: usize },
    /// `sin(kπy)`.
    Sinusoidal { k: usize },
    /// Values on a uniform grid over `[0, 1]`, endpoints included.
    Sampled { values: Vec<f64> },
}

impl ShapeFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            ShapeFunction::PiecewiseConstant { m, k } => {
                if *k == 0 || k > m {
                    return Err(Error::domain(format!(
                        "piecewise actuator index k={k} outside 1..={m}"
                    )));
                }
            }
            ShapeFunction::Sinusoidal { k } => {
                if *k == 0 {
                    return Err(Error::domain("sinusoidal actuator index must be >= 1"));
                }
            }
            ShapeFunction::Sampled { values } => {
                if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("sampled shape needs >= 2 finite values"));
                }
            }
        }
        Ok(())
    }

    /// Profile value at `y`.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            ShapeFunction::PiecewiseConstant { m, k } => {
                let (m, k) = (*m as f64, *k as f64);
                let lo = (k - 1.0) / m;
                let hi = k / m;
                let inside = y >= lo && (y < hi || (k == m && y <= 1.0));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            ShapeFunction::Sinusoidal { k } => (*k as f64 * PI * y).sin(),
            ShapeFunction::Sampled { values } => {
                let intervals = values.len() - 1;
                let s = (y.clamp(0.0, 1.0) * intervals as f64).min(intervals as f64);
                let i = (s.floor() as usize).min(intervals - 1);
                let frac = s - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Sine coefficient `φ_{k,n}` of this shape for mode `n`.
    pub fn coeff(&self, n: usize) -> Result<f64> {
        match self {
            ShapeFunction::PiecewiseConstant { m, k } => shape_coeff_piecewise(*m, *k, n),
            ShapeFunction::Sinusoidal { k } => Ok(if *k == n { 1.0 } else { 0.0 }),
            ShapeFunction::Sampled { values } => {
                let c = sine_coeffs(values, n)?;
                Ok(c[n - 1])
            }
        }
    }
}

/// `φ_{k,n} = (2/(nπ)) [cos(nπ(k−1)/m) − cos(nπk/m)]`.
pub fn shape_coeff_piecewise(m: usize, k: usize, n: usize) -> Result<f64> {
    if m == 0 || k == 0 || k > m {
        return Err(Error::domain(format!(
            "piecewise actuator index k={k} outside 1..={m}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("mode index n must be >= 1"));
    }
    let (mf, kf, nf) = (m as f64, k as f64, n as f64);
    Ok(2.0 / (nf * PI) * ((nf * PI * (kf - 1.0) / mf).cos() - (nf * PI * kf / mf).cos()))
}

/// `N × m` matrix with entry `(n, k) = φ_{k,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix {
    entries: DMatrix<f64>,
}

impl PhiMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::config("Φ needs at least one mode and one actuator"));
        }
        Ok(PhiMatrix { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_actuators(&self) -> usize {
        self.entries.ncols()
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self
            .entries
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Numerical rank at [`RANK_TOL`] relative to `σ_max`.
    pub fn rank(&self) -> usize {
        let s = self.singular_values();
        let cutoff = RANK_TOL * s.first().copied().unwrap_or(0.0);
        s.iter().filter(|&&v| v > cutoff && v > 0.0).count()
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank() == self.n_modes()
    }
}

/// Assembles `Φ` for the first `n_modes` modes.
pub fn build_phi(shapes: &[ShapeFunction], n_modes: usize) -> Result<PhiMatrix> {
    if shapes.is_empty() {
        return Err(Error::config("actuator bank is empty"));
    }
    if n_modes == 0 {
        return Err(Error::config("Φ needs N >= 1"));
    }
    for s in shapes {
        s.validate()?;
    }
    let mut entries = DMatrix::zeros(n_modes, shapes.len());
    for (k, shape) in shapes.iter().enumerate() {
        if let ShapeFunction::Sampled { values } = shape {
            let c = sine_coeffs(values, n_modes)?;
            for (n, v) in c.into_iter().enumerate() {
                entries[(n, k)] = v;
            }
        } else {
            for n in 1..=n_modes {
                entries[(n - 1, k)] = shape.coeff(n)?;
            }
        }
    }
    PhiMatrix::from_matrix(entries)
}

/// Moore–Penrose pseudoinverse `Φᵀ(ΦΦᵀ)⁻¹` of a full-row-rank `Φ`.
pub fn pseudoinverse(phi: &PhiMatrix) -> Result<DMatrix<f64>> {
    let a = phi.entries();
    let svd = a.clone().svd(true, false);
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_TOL * smax;
    let deficient: Vec<usize> = (0..s.len())
        .filter(|&i| !(s[i] > cutoff && s[i] > 0.0))
        .collect();
    let rank = s.len() - deficient.len();
    if rank < phi.n_modes() {
        // Left-singular directions with no actuation authority, plus the
        // modes missing entirely when m < N.
        let u = svd.u.as_ref().expect("requested U");
        let mut described: Vec<String> = deficient
            .iter()
            .map(|&i| {
                let dir: Vec<String> = u.column(i).iter().map(|v| format!("{v:.3}")).collect();
                format!("[{}]", dir.join(", "))
            })
            .collect();
        if phi.n_actuators() < phi.n_modes() {
            described.push(format!(
                "{} actuator(s) cannot span {} modes",
                phi.n_actuators(),
                phi.n_modes()
            ));
        }
        return Err(Error::Stabilizability(format!(
            "Φ has rank {rank} < N = {}; unactuated mode directions: {}",
            phi.n_modes(),
            described.join("; ")
        )));
    }
    let gram = a * a.transpose();
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::numerical("ΦΦᵀ is not positive definite"))?;
    // Φ† = Φᵀ G⁻¹  ⇔  (Φ†)ᵀ = G⁻¹ Φ
    Ok(chol.solve(a).transpose())
}

/// `σ_max/σ_min` from the eigenvalues of `ΦΦᵀ`; `+∞` when `σ_min` falls below
/// [`RANK_TOL`]` · σ_max`.
pub fn condition_number(phi: &PhiMatrix) -> f64 {
    let a = phi.entries();
    let eig = SymmetricEigen::new(a * a.transpose()).eigenvalues;
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    if !(max > 0.0) || min <= (RANK_TOL * RANK_TOL) * max {
        return f64::INFINITY;
    }
    (max / min).sqrt()
}

/// Mode budget for a requested decay rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBudget {
    pub params: PlantParams,
    /// Threshold above which modes decay at rate `≥ c` without control.
    pub n0: f64,
    /// Number of controlled modes, `⌊N0⌋ + 1`.
    pub n: usize,
}

fn budget_from_threshold(params: PlantParams, n0: f64) -> DecayBudget {
    let n0 = if n0.is_finite() && n0 > 0.0 { n0 } else { 0.0 };
    DecayBudget {
        params,
        n0,
        n: n0.floor() as usize + 1,
    }
}

fn reaction_budget(p: &PlantParams) -> f64 {
    (p.c() + p.lambda()) / p.epsilon()
}

/// `N0 = √((c+λ)/(π²ε))` on the unit square.
pub fn min_modes_square(p: &PlantParams) -> DecayBudget {
    let b = reaction_budget(p);
    let n0 = if b > 0.0 { (b / (PI * PI)).sqrt() } else { 0.0 };
    budget_from_threshold(*p, n0)
}

/// `N0 = √((c+λ)/(4π²ε))` for the strip wavenumber cutoff.
pub fn min_modes_strip(p: &PlantParams) -> DecayBudget {
    let b = reaction_budget(p);
    let n0 = if b > 0.0 {
        (b / (4.0 * PI * PI)).sqrt()
    } else {
        0.0
    };
    budget_from_threshold(*p, n0)
}

/// Threshold `√((c+λ)/ε)·(θ₂−θ₁)·R/π` on a sector.
pub fn min_modes_sector(
    p: &PlantParams,
    theta1: f64,
    theta2: f64,
    radius: f64,
) -> Result<DecayBudget> {
    if !(theta2 > theta1) {
        return Err(Error::config(format!(
            "sector needs theta1 < theta2, got ({theta1}, {theta2})"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::config(format!(
            "sector radius must be > 0, got {radius}"
        )));
    }
    let b = reaction_budget(p);
    let n0 = if b > 0.0 {
        b.sqrt() * (theta2 - theta1) * radius / PI
    } else {
        0.0
    };
    Ok(budget_from_threshold(*p, n0))
}

/// Shape functions together with `Φ` and `Φ†` for a fixed mode budget.
#[derive(Debug, Clone)]
pub struct ActuatorBank {
    shapes: Vec<ShapeFunction>,
    phi: PhiMatrix,
    pinv: DMatrix<f64>,
}

impl ActuatorBank {
    /// Fails with a stabilizability error unless `Φ` has full row rank.
    pub fn new(shapes: Vec<ShapeFunction>, n_modes: usize) -> Result<Self> {
        let phi = build_phi(&shapes, n_modes)?;
        let pinv = pseudoinverse(&phi)?;
        Ok(ActuatorBank { shapes, phi, pinv })
    }

    /// `m` equal-width piecewise-constant actuators.
    pub fn piecewise(m: usize, n_modes: usize) -> Result<Self> {
        Self::new(
            (1..=m)
                .map(|k| ShapeFunction::PiecewiseConstant { m, k })
                .collect(),
            n_modes,
        )
    }

    /// `m` sinusoidal actuators `sin(kπy)`.
    pub fn sinusoidal(m: usize, n_modes: usize) -> Result<Self> {
        Self::new(
            (1..=m).map(|k| ShapeFunction::Sinusoidal { k }).collect(),
            n_modes,
        )
    }

    pub fn shapes(&self) -> &[ShapeFunction] {
        &self.shapes
    }

    pub fn phi(&self) -> &PhiMatrix {
        &self.phi
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn n_modes(&self) -> usize {
        self.phi.n_modes()
    }

    /// Actuator inputs `Φ† g` for modal targets `g`.
    pub fn allocate(&self, targets: &[f64]) -> Result<Vec<f64>> {
        if targets.len() != self.n_modes() {
            return Err(Error::config(format!(
                "expected {} modal targets, got {}",
                self.n_modes(),
                targets.len()
            )));
        }
        let g = nalgebra::DVector::from_column_slice(targets);
        Ok((&self.pinv * g).iter().copied().collect())
    }

    /// `Σ_k U_k φ_k(y)`.
    pub fn profile(&self, inputs: &[f64], y: f64) -> f64 {
        self.shapes
            .iter()
            .zip(inputs)
            .map(|(s, u)| u * s.eval(y))
            .sum()
    }
}
