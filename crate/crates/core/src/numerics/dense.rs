use std::ops::{Index, IndexMut};

use crate::{Error, Real, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Largest entry of `|A - A^T|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {}x{} matrix",
                x.len(),
                self.n,
                self.n
            )));
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch("matmul of unequal sizes".into()));
        }
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[T]) -> Result<T> {
        let ax = self.matvec(x)?;
        Ok(ax.iter().zip(x).map(|(&a, &b)| a * b).sum())
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<DenseLu<T>> {
        DenseLu::factor(self.clone())
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Packed `PA = LU` factors.
///
/// A pivot at or below `1e-14` times the largest original magnitude in its
/// column is reported as singular.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor(mut a: DenseMatrix<T>) -> Result<Self> {
        let n = a.n;
        let tiny = T::lit(1e-14);
        let mut col_max = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                col_max[j] = col_max[j].max(a[(i, j)].abs());
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold(
                        (k, T::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot <= tiny * col_max[k] || pivot == T::zero() {
                return Err(Error::Singular {
                    row: k,
                    pivot: pivot.to_f64_lossy(),
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
            }
            let akk = a[(k, k)];
            for i in k + 1..n {
                let m = a[(i, k)] / akk;
                a[(i, k)] = m;
                if m != T::zero() {
                    for j in k + 1..n {
                        let akj = a[(k, j)];
                        a[(i, j)] -= m * akj;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} against {n}x{n} factorization",
                b.len()
            )));
        }
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: T = row[..i].iter().zip(&y[..i]).map(|(&l, &v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: T = row[i + 1..]
                .iter()
                .zip(&y[i + 1..])
                .map(|(&u, &v)| u * v)
                .sum();
            y[i] = (y[i] - s) / row[i];
        }
        Ok(y)
    }

    /// Solves in place, for hot loops that reuse a buffer.
    pub fn solve_in_place(&self, b: &mut [T], scratch: &mut Vec<T>) {
        let n = self.lu.n;
        scratch.clear();
        scratch.extend(self.perm.iter().map(|&p| b[p]));
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = T::zero();
            for j in 0..i {
                s += row[j] * scratch[j];
            }
            scratch[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = T::zero();
            for j in i + 1..n {
                s += row[j] * scratch[j];
            }
            scratch[i] = (scratch[i] - s) / row[i];
        }
        b.copy_from_slice(scratch);
    }

    /// Diagonal of `U`.
    pub fn pivots(&self) -> Vec<T> {
        (0..self.lu.n).map(|i| self.lu[(i, i)]).collect()
    }
}
