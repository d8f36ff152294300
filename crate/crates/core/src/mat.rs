//! Small dense matrices generic over the scalar type.
//!
//! Row-major storage; elimination picks the pivot with the largest magnitude
//! (by `approx`) which keeps floats stable and is harmless for rationals.

use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    let add = a.clone() * b.clone();
                    out[(i, j)] += add;
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for j in 0..self.cols {
                let a = &self[(i, j)];
                if a.is_zero() {
                    continue;
                }
                out[j] += vi.clone() * a.clone();
            }
        }
        out
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Gauss-Jordan inverse; `None` when singular (pivot below `pivot_tol`
    /// in float mode, exactly zero in rational mode).
    pub fn inverse(&self, pivot_tol: f64) -> Option<Mat<T>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv: Mat<T> = Mat::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .filter(|&r| !a[(r, col)].is_zero_tol(pivot_tol))
                .max_by(|&x, &y| {
                    a[(x, col)]
                        .abs_val()
                        .approx()
                        .partial_cmp(&a[(y, col)].abs_val().approx())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })?;
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    let upd = a[(col, j)].clone() * f.clone();
                    a[(r, j)] -= upd;
                    let upd = inv[(col, j)].clone() * f.clone();
                    inv[(r, j)] -= upd;
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Outcome of solving a (possibly overdetermined) linear system `A x = b`.
#[derive(Debug, Clone)]
pub enum SolveOutcome<T> {
    /// Exactly one solution.
    Unique(Vec<T>),
    /// Solutions form an affine space `particular + span(nullspace)`.
    Underdetermined {
        particular: Vec<T>,
        nullspace: Vec<Vec<T>>,
    },
    /// No solution.
    Inconsistent,
}

/// Row-reduces the augmented system and classifies the solution set.
///
/// `pivot_tol` is the float-mode threshold below which an entry counts as
/// zero; exact scalars ignore it and dispatch to the fraction-free solver.
pub fn solve_system<T: Scalar>(a: &Mat<T>, b: &[T], pivot_tol: f64) -> SolveOutcome<T> {
    if let Some(out) = T::try_exact_solve(a, b) {
        return out;
    }
    solve_system_dense(a, b, pivot_tol)
}

fn solve_system_dense<T: Scalar>(a: &Mat<T>, b: &[T], pivot_tol: f64) -> SolveOutcome<T> {
    assert_eq!(a.nrows(), b.len());
    let (m, n) = (a.nrows(), a.ncols());
    let mut aug = Mat::zeros(m, n + 1);
    for i in 0..m {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)].clone();
        }
        aug[(i, n)] = b[i].clone();
    }
    let mut pivot_cols = Vec::new();
    let mut rank = 0usize;
    for col in 0..n {
        let pivot = (rank..m)
            .filter(|&r| !aug[(r, col)].is_zero_tol(pivot_tol))
            .max_by(|&x, &y| {
                aug[(x, col)]
                    .abs_val()
                    .approx()
                    .partial_cmp(&aug[(y, col)].abs_val().approx())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(pivot) = pivot else { continue };
        aug.swap_rows(rank, pivot);
        let p = aug[(rank, col)].clone();
        for j in col..=n {
            aug[(rank, j)] = aug[(rank, j)].clone() / p.clone();
        }
        for r in 0..m {
            if r == rank || aug[(r, col)].is_zero() {
                continue;
            }
            let f = aug[(r, col)].clone();
            for j in col..=n {
                let upd = aug[(rank, j)].clone() * f.clone();
                aug[(r, j)] -= upd;
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == m {
            break;
        }
    }
    for r in rank..m {
        if !aug[(r, n)].is_zero_tol(pivot_tol) {
            return SolveOutcome::Inconsistent;
        }
    }
    let mut particular = vec![T::zero(); n];
    for (r, &col) in pivot_cols.iter().enumerate() {
        particular[col] = aug[(r, n)].clone();
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    if free.is_empty() {
        return SolveOutcome::Unique(particular);
    }
    let mut nullspace = Vec::with_capacity(free.len());
    for &fc in &free {
        let mut v = vec![T::zero(); n];
        v[fc] = T::one();
        for (r, &col) in pivot_cols.iter().enumerate() {
            v[col] = -aug[(r, fc)].clone();
        }
        nullspace.push(v);
    }
    SolveOutcome::Underdetermined {
        particular,
        nullspace,
    }
}

/// Fraction-free elimination for exact rational systems.
///
/// Each row is scaled by the lcm of its denominators (a row operation, so
/// the solution set is untouched) and the forward elimination runs
/// Bareiss-style over integers: every intermediate entry is a minor of the
/// scaled system and all divisions are exact, which avoids the rational
/// gcd blowup of naive elimination.
pub fn solve_system_fraction_free(
    a: &Mat<num_rational::BigRational>,
    b: &[num_rational::BigRational],
) -> SolveOutcome<num_rational::BigRational> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(b.len(), m);
    let width = n + 1;
    let mut rows: Vec<Vec<BigInt>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut denom_lcm = BigInt::one();
        for j in 0..n {
            denom_lcm = denom_lcm.lcm(a[(i, j)].denom());
        }
        denom_lcm = denom_lcm.lcm(b[i].denom());
        let scale = |r: &BigRational| -> BigInt { r.numer() * (&denom_lcm / r.denom()) };
        let mut row: Vec<BigInt> = (0..n).map(|j| scale(&a[(i, j)])).collect();
        row.push(scale(&b[i]));
        rows.push(row);
    }
    // Forward Bareiss echelon with column skipping.
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    let mut prev = BigInt::one();
    for col in 0..n {
        let pivot = (rank..m)
            .filter(|&r| !rows[r][col].is_zero())
            .min_by_key(|&r| rows[r][col].magnitude().bits());
        let Some(pivot) = pivot else { continue };
        rows.swap(rank, pivot);
        let (upper, lower) = rows.split_at_mut(rank + 1);
        let pivot_row = &upper[rank];
        let lead_val = pivot_row[col].clone();
        for row in lower.iter_mut() {
            let lead = std::mem::replace(&mut row[col], BigInt::zero());
            if lead.is_zero() {
                // Rows with a zero lead are still rescaled so that every
                // entry stays one minor level deep (exact division later).
                for j in (col + 1)..width {
                    if row[j].is_zero() {
                        continue;
                    }
                    row[j] = (&lead_val * &row[j]) / &prev;
                }
            } else {
                for j in (col + 1)..width {
                    let v = &lead_val * &row[j] - &lead * &pivot_row[j];
                    row[j] = v / &prev;
                }
            }
        }
        prev = lead_val;
        pivot_cols.push(col);
        rank += 1;
        if rank == m {
            break;
        }
    }
    for row in rows.iter().take(m).skip(rank) {
        if !row[n].is_zero() {
            return SolveOutcome::Inconsistent;
        }
    }
    // Back-substitution in rationals on the echelon rows; `target` supplies
    // the right-hand side of echelon row k.
    let back_substitute = |target: &dyn Fn(usize) -> BigRational| -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); n];
        for k in (0..rank).rev() {
            let col = pivot_cols[k];
            let mut acc = target(k);
            for j in (col + 1)..n {
                if rows[k][j].is_zero() || x[j].is_zero() {
                    continue;
                }
                acc -= BigRational::from_integer(rows[k][j].clone()) * x[j].clone();
            }
            x[col] = acc / BigRational::from_integer(rows[k][col].clone());
        }
        x
    };
    let particular = back_substitute(&|k| BigRational::from_integer(rows[k][n].clone()));
    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    if free.is_empty() {
        return SolveOutcome::Unique(particular);
    }
    let mut nullspace = Vec::with_capacity(free.len());
    for &fc in &free {
        let mut v = back_substitute(&|k| -BigRational::from_integer(rows[k][fc].clone()));
        v[fc] = BigRational::one();
        nullspace.push(v);
    }
    SolveOutcome::Underdetermined {
        particular,
        nullspace,
    }
}
