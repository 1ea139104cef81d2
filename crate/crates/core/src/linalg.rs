//! Dense LU factorisation with partial pivoting.
//!
//! Used for direct policy evaluation and for macro model construction, where
//! every system has the form `(I - beta * P) x = b` with `P` sub-stochastic.
//! Such systems are strictly diagonally dominant for `beta < 1`, so a pivot
//! smaller than [`PIVOT_FLOOR`] means the input was not of that form.
//!
//! Work is tallied in row operations: one unit per eliminated row with a
//! nonzero multiplier during factorisation, and one unit per row visited in
//! each forward or backward substitution.

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] += value;
    }
}

/// `P A = L U`, stored packed in a single matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    factor_ops: u64,
}

impl LuFactors {
    pub fn factor(matrix: DenseMatrix) -> Result<Self> {
        let n = matrix.n;
        let mut lu = matrix.data;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut factor_ops = 0u64;

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_abs = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let candidate = lu[r * n + k].abs();
                if candidate > pivot_abs {
                    pivot_abs = candidate;
                    pivot_row = r;
                }
            }
            if !(pivot_abs > PIVOT_FLOOR) {
                return Err(Error::Numerical(format!(
                    "singular matrix: no usable pivot in column {k}"
                )));
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let factor = lu[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                lu[r * n + k] = factor;
                for c in (k + 1)..n {
                    lu[r * n + c] -= factor * lu[k * n + c];
                }
                factor_ops += 1;
            }
        }

        Ok(Self {
            n,
            lu,
            perm,
            factor_ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row operations spent in the factorisation.
    pub fn factor_ops(&self) -> u64 {
        self.factor_ops
    }

    /// Row operations spent by one call to [`LuFactors::solve`].
    pub fn solve_ops(&self) -> u64 {
        2 * self.n as u64
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "rhs length mismatch");
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc / self.lu[r * n + r];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_with_pivoting() {
        // [[0, 2], [3, 1]] x = [4, 5] -> x = [1, 2]
        let mut m = DenseMatrix::zeros(2);
        m.add(0, 1, 2.0);
        m.add(1, 0, 3.0);
        m.add(1, 1, 1.0);
        let lu = LuFactors::factor(m).unwrap();
        let x = lu.solve(&[4.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_is_rejected() {
        let mut m = DenseMatrix::zeros(2);
        m.add(0, 0, 1.0);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        assert!(matches!(LuFactors::factor(m), Err(Error::Numerical(_))));
    }

    #[test]
    fn identity_costs_no_elimination() {
        let lu = LuFactors::factor(DenseMatrix::identity(4)).unwrap();
        assert_eq!(lu.factor_ops(), 0);
        assert_eq!(lu.solve_ops(), 8);
        assert_eq!(lu.solve(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_system() {
        let lu = LuFactors::factor(DenseMatrix::zeros(0)).unwrap();
        assert!(lu.solve(&[]).is_empty());
    }
}
