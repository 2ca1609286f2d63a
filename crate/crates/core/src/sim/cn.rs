//! Crank–Nicolson time stepping for `u_t = A u + B b(t)` with sparse `A`.

use super::banded::BandedLu;
use crate::{Error, Result};

/// Sparse linear operator `A` plus the boundary-input coupling `B`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    rows: Vec<Vec<(usize, f64)>>,
    inputs: Vec<Vec<(usize, f64)>>,
    n_inputs: usize,
}

impl SparseOperator {
    pub fn new(n: usize, n_inputs: usize) -> Self {
        SparseOperator {
            rows: vec![Vec::new(); n],
            inputs: vec![Vec::new(); n],
            n_inputs,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if let Some(e) = self.rows[row].iter_mut().find(|e| e.0 == col) {
            e.1 += value;
        } else {
            self.rows[row].push((col, value));
        }
    }

    pub fn add_input(&mut self, row: usize, input: usize, value: f64) {
        debug_assert!(input < self.n_inputs);
        if let Some(e) = self.inputs[row].iter_mut().find(|e| e.0 == input) {
            e.1 += value;
        } else {
            self.inputs[row].push((input, value));
        }
    }

    /// `out = A u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| v * u[j]).sum();
        }
    }

    /// `out += B b`.
    pub fn apply_inputs(&self, b: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.inputs) {
            for &(k, v) in row {
                *o += v * b[k];
            }
        }
    }
}

/// One preassembled Crank–Nicolson stepper; the factorization is reused for
/// every step.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    op: SparseOperator,
    lu: BandedLu,
    dt: f64,
}

impl CrankNicolson {
    pub fn new(op: SparseOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("time step must be > 0, got {dt}")));
        }
        let half = 0.5 * dt;
        let lhs: Vec<Vec<(usize, f64)>> = op
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row.iter().map(|&(j, v)| (j, -half * v)).collect();
                r.push((i, 1.0));
                r
            })
            .collect();
        let lu = BandedLu::factor(&lhs)?;
        Ok(CrankNicolson { op, lu, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    fn check_shapes(&self, u: &[f64], inputs_old: &[f64], inputs_new: &[f64]) -> Result<()> {
        let n = self.op.dim();
        if u.len() != n {
            return Err(Error::config(format!(
                "state has {} unknowns, operator has {n}",
                u.len()
            )));
        }
        let ni = self.op.n_inputs();
        if inputs_old.len() != ni || inputs_new.len() != ni {
            return Err(Error::config(format!(
                "boundary data has {}/{} values, operator expects {ni}",
                inputs_old.len(),
                inputs_new.len()
            )));
        }
        Ok(())
    }

    fn solve_into(&self, u: &mut [f64], mut rhs: Vec<f64>, what: &str) -> Result<()> {
        self.lu.solve(&mut rhs);
        if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite value at unknown {i} after {what}"
            )));
        }
        u.copy_from_slice(&rhs);
        Ok(())
    }

    /// Advances `u` by one step; `inputs_old`/`inputs_new` are the boundary
    /// data at the start and end of the step.
    pub fn step(&self, u: &mut [f64], inputs_old: &[f64], inputs_new: &[f64]) -> Result<()> {
        self.check_shapes(u, inputs_old, inputs_new)?;
        let n = self.op.dim();
        let half = 0.5 * self.dt;
        let mut rhs = vec![0.0; n];
        self.op.apply(u, &mut rhs);
        self.op.apply_inputs(inputs_old, &mut rhs);
        self.op.apply_inputs(inputs_new, &mut rhs);
        for (r, v) in rhs.iter_mut().zip(u.iter()) {
            *r = v + half * *r;
        }
        self.solve_into(u, rhs, "CN step")
    }

    /// Same interval as [`step`](Self::step), covered by two backward Euler
    /// half steps that reuse the factorization of `I − (dt/2)A`.
    ///
    /// Crank–Nicolson leaves stiff components of rough data nearly undamped;
    /// a few of these steps at start-up remove them.
    pub fn damped_step(&self, u: &mut [f64], inputs_old: &[f64], inputs_new: &[f64]) -> Result<()> {
        self.check_shapes(u, inputs_old, inputs_new)?;
        let half = 0.5 * self.dt;
        let mid: Vec<f64> = inputs_old
            .iter()
            .zip(inputs_new)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        for inputs in [&mid[..], inputs_new] {
            let mut forcing = vec![0.0; u.len()];
            self.op.apply_inputs(inputs, &mut forcing);
            let rhs = u.iter().zip(&forcing).map(|(v, f)| v + half * f).collect();
            self.solve_into(u, rhs, "damped step")?;
        }
        Ok(())
    }
}
