//! Dense complex matrices and LU factorization.
//!
//! The boundary-integral systems are dense, complex, and moderately sized
//! (a few thousand unknowns), and each factorization is reused for every
//! source position on the measurement line.  A compact row-major matrix with
//! partial-pivoting LU keeps the elimination and the many back-substitutions
//! cache-friendly and gives direct access to a pivot-growth condition
//! estimate; column right-hand sides are solved independently so they can be
//! dispatched in parallel by the caller.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    /// Builds the matrix by evaluating `f(row, col)` once per entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Matrix-vector product `self * x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// LU factorization with partial pivoting of a square [`CMatrix`].
///
/// The factors overwrite the input matrix; `perm[i]` records which original
/// row ended up in position `i`.  The factorization is immutable afterwards
/// and any number of right-hand sides can be solved against it.
pub struct LuFactors {
    n: usize,
    lu: CMatrix,
    perm: Vec<usize>,
    cond_estimate: f64,
}

/// Factorizes `a` in place.  Fails with [`Error::SingularMatrix`] when a
/// pivot falls below `n * epsilon` times the largest matrix entry.
pub fn lu_factor(mut a: CMatrix) -> Result<LuFactors> {
    assert_eq!(a.rows(), a.cols(), "LU requires a square matrix");
    let n = a.rows();
    let scale = a.max_abs();
    let tiny = scale * n as f64 * f64::EPSILON;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;

    for k in 0..n {
        let mut best = k;
        let mut best_abs = a.get(k, k).norm_sqr();
        for i in k + 1..n {
            let v = a.get(i, k).norm_sqr();
            if v > best_abs {
                best_abs = v;
                best = i;
            }
        }
        if best != k {
            perm.swap(k, best);
            let (lo, hi) = (k.min(best), k.max(best));
            let (top, bottom) = a.data.split_at_mut(hi * a.cols);
            top[lo * a.cols..(lo + 1) * a.cols].swap_with_slice(&mut bottom[..a.cols]);
        }
        let pivot = a.get(k, k);
        let pivot_abs = pivot.norm();
        if !(pivot_abs > tiny) || !pivot_abs.is_finite() {
            let cond = if min_pivot > 0.0 { max_pivot / tiny.max(pivot_abs) } else { f64::INFINITY };
            return Err(Error::SingularMatrix { cond });
        }
        max_pivot = max_pivot.max(pivot_abs);
        min_pivot = min_pivot.min(pivot_abs);
        let inv_pivot = pivot.finv();

        // Eliminate below the pivot; the trailing update walks contiguous
        // row slices.
        let cols = a.cols;
        let (pivot_rows, trailing) = a.data.split_at_mut((k + 1) * cols);
        let pivot_row = &pivot_rows[k * cols..(k + 1) * cols];
        for row in trailing.chunks_exact_mut(cols) {
            let factor = row[k] * inv_pivot;
            row[k] = factor;
            if factor != Complex64::ZERO {
                for (r, p) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *r -= factor * p;
                }
            }
        }
    }

    Ok(LuFactors { n, lu: a, perm, cond_estimate: max_pivot / min_pivot })
}

impl LuFactors {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Pivot-growth ratio `max |U_kk| / min |U_kk|`; a cheap lower bound on
    /// the condition number, logged with every assembled system.
    pub fn condition_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// Solves `A x = b` for a single right-hand side, in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let permuted: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        // Forward substitution with unit lower factor.
        for i in 1..self.n {
            let row = self.lu.row(i);
            let mut acc = Complex64::ZERO;
            for (l, x) in row[..i].iter().zip(b.iter()) {
                acc += l * x;
            }
            b[i] -= acc;
        }
        // Back substitution with the upper factor.
        for i in (0..self.n).rev() {
            let row = self.lu.row(i);
            let mut acc = Complex64::ZERO;
            for (u, x) in row[i + 1..].iter().zip(b[i + 1..].iter()) {
                acc += u * x;
            }
            b[i] = (b[i] - acc) * row[i].finv();
        }
    }

    /// Solves one column per entry of `columns`; columns are independent and
    /// run on the rayon pool.
    pub fn solve_columns(&self, columns: &mut [Vec<Complex64>]) {
        columns.par_iter_mut().for_each(|col| self.solve_in_place(col));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(a: &CMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn solves_known_2x2_system() {
        // (1+i) x + 2 y = 3,  4i x + (1-i) y = 2 - i
        let mut a = CMatrix::zeros(2, 2);
        a.set(0, 0, c(1.0, 1.0));
        a.set(0, 1, c(2.0, 0.0));
        a.set(1, 0, c(0.0, 4.0));
        a.set(1, 1, c(1.0, -1.0));
        let b = vec![c(3.0, 0.0), c(2.0, -1.0)];
        let lu = lu_factor(a.clone()).unwrap();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        assert!(residual(&a, &x, &b) < 1e-13, "residual {}", residual(&a, &x, &b));
    }

    #[test]
    fn random_system_small_residual() {
        let mut state = 0x243f6a88u64;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 40;
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let diag = if i == j { 4.0 } else { 0.0 };
                a.set(i, j, c(rnd() + diag, rnd()));
            }
        }
        let b: Vec<Complex64> = (0..n).map(|_| c(rnd(), rnd())).collect();
        let lu = lu_factor(a.clone()).unwrap();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        assert!(residual(&a, &x, &b) < 1e-12);
        assert!(lu.condition_estimate() >= 1.0);
    }

    #[test]
    fn block_solve_matches_single_columns() {
        let n = 12;
        let a = CMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 5.0 } else { 0.0 };
            c(d + ((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.2 - 0.2)
        });
        let lu = lu_factor(a.clone()).unwrap();
        let mut cols: Vec<Vec<Complex64>> =
            (0..4).map(|k| (0..n).map(|i| c((i + k) as f64, k as f64 * 0.5)).collect()).collect();
        let singles: Vec<Vec<Complex64>> = cols
            .iter()
            .map(|b| {
                let mut x = b.clone();
                lu.solve_in_place(&mut x);
                x
            })
            .collect();
        lu.solve_columns(&mut cols);
        for (got, want) in cols.iter().zip(&singles) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let mut a = CMatrix::zeros(3, 3);
        for j in 0..3 {
            a.set(0, j, c(1.0, 0.0));
            a.set(1, j, c(2.0, 0.0)); // row 1 = 2 * row 0
            a.set(2, j, c(j as f64, 1.0));
        }
        match lu_factor(a) {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected singular-matrix error, got {:?}", other.map(|_| ())),
        }
    }

    proptest! {
        #[test]
        fn diagonally_dominant_systems_solve(seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut rnd = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let n = 15;
            let mut a = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let d = if i == j { 8.0 } else { 0.0 };
                    a.set(i, j, Complex64::new(rnd() + d, rnd()));
                }
            }
            let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(rnd(), rnd())).collect();
            let lu = lu_factor(a.clone()).unwrap();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            prop_assert!(residual(&a, &x, &b) < 1e-11);
        }
    }
}
