//! Banded LU factorization without pivoting.
//!
//! The Crank–Nicolson matrices `I − (dt/2)A` assembled here are row-wise
//! diagonally dominant M-matrices, for which elimination without pivoting is
//! stable.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
}

impl BandedLu {
    /// Factors the matrix given as sparse rows `(column, value)`.
    pub fn factor(rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = rows.len();
        let mut kl = 0;
        let mut ku = 0;
        for (i, row) in rows.iter().enumerate() {
            for &(j, _) in row {
                if j >= n {
                    return Err(Error::numerical(format!(
                        "column {j} out of range in row {i}"
                    )));
                }
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                band[i * width + j + kl - i] += v;
            }
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            band,
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn eliminate(&mut self) -> Result<()> {
        for k in 0..self.n {
            let pivot = self.band[self.at(k, k)];
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::numerical(format!(
                    "zero pivot at row {k} in banded LU"
                )));
            }
            let i_end = (k + self.kl).min(self.n - 1);
            let j_end = (k + self.ku).min(self.n - 1);
            for i in k + 1..=i_end {
                let ik = self.at(i, k);
                let l = self.band[ik] / pivot;
                self.band[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=j_end {
                    let ij = self.at(i, j);
                    let kj = self.at(k, j);
                    self.band[ij] -= l * self.band[kj];
                }
            }
        }
        Ok(())
    }

    /// Solves in place.
    pub fn solve(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        // band offsets and the solution share the index j, so a range loop
        // reads more plainly than zipped iterators
        #[allow(clippy::needless_range_loop)]
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let base = i * self.width + self.kl - i;
            let mut acc = x[i];
            for j in j0..i {
                acc -= self.band[base + j] * x[j];
            }
            x[i] = acc;
        }
        #[allow(clippy::needless_range_loop)]
        for i in (0..self.n).rev() {
            let j1 = (i + self.ku).min(self.n - 1);
            let base = i * self.width + self.kl - i;
            let mut acc = x[i];
            for j in i + 1..=j1 {
                acc -= self.band[base + j] * x[j];
            }
            x[i] = acc / self.band[base + i];
        }
    }
}
