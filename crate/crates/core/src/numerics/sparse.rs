use std::io::{BufRead, Write};

use super::DenseMatrix;
use crate::{Error, Real, Result};

pub type Triplet<T> = (usize, usize, T);

/// Compressed-row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Sums duplicate entries. Explicit zeros are kept as structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<Triplet<T>>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Triplet<T>> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Row `i` of `A x`.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        let (cols, vals) = self.row(i);
        let mut s = T::zero();
        for (&j, &v) in cols.iter().zip(vals) {
            s += v * x[j];
        }
        s
    }

    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {}x{} matrix",
                x.len(),
                self.nrows,
                self.ncols
            )));
        }
        Ok((0..self.nrows).map(|i| self.row_dot(i, x)).collect())
    }

    /// `y = A x` into an existing buffer.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    /// `y = A^T x`
    pub fn spmv_transpose(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against transpose of {}x{} matrix",
                x.len(),
                self.nrows,
                self.ncols
            )));
        }
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse product `self * other` (Gustavson row-by-row accumulation).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut acc = vec![T::zero(); other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (acols, avals) = self.row(i);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &b) in bcols.iter().zip(bvals) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = T::zero();
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Galerkin triple product `P^T A P`.
    pub fn triple_product(p: &Self, a: &Self) -> Result<Self> {
        if a.nrows != a.ncols || a.ncols != p.nrows {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, A is {}x{}",
                p.nrows, p.ncols, a.nrows, a.ncols
            )));
        }
        let ap = a.matmul(p)?;
        p.transpose().matmul(&ap)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        assert_eq!(
            self.nrows, self.ncols,
            "dense conversion needs a square matrix"
        );
        let mut d = DenseMatrix::zeros(self.nrows);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    /// Extracts the dense block `A[idx, idx]`.
    pub fn submatrix(&self, idx: &[usize]) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                d[(a, b)] = self.get(i, j);
            }
        }
        d
    }

    /// Largest entry of `|A - A^T|`.
    pub fn asymmetry(&self) -> T {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(T::zero(), T::max)
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.iter().fold((0, 0), |(lo, up), (i, j, _)| {
            if i > j {
                (lo.max(i - j), up)
            } else {
                (lo, up.max(j - i))
            }
        })
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Coordinate text format: a `nrows ncols nnz` header, then one
    /// `row col value` line per stored entry with 17 significant digits.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{i} {j} {:.16e}", v.to_f64_lossy())?;
        }
        Ok(())
    }

    pub fn read_coordinate<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad header `{header}`")))
            })
            .collect::<Result<_>>()?;
        let [nrows, ncols, nnz] = dims[..] else {
            return Err(Error::Parse(format!("bad header `{header}`")));
        };
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut field = |what: &str| {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("missing {what} in `{line}`")))
            };
            let i: usize = field("row")?
                .parse()
                .map_err(|_| Error::Parse(line.clone()))?;
            let j: usize = field("col")?
                .parse()
                .map_err(|_| Error::Parse(line.clone()))?;
            let v: f64 = field("value")?
                .parse()
                .map_err(|_| Error::Parse(line.clone()))?;
            if i >= nrows || j >= ncols {
                return Err(Error::Parse(format!("entry ({i}, {j}) out of bounds")));
            }
            triplets.push((i, j, T::lit(v)));
        }
        Ok(Self::from_triplets(nrows, ncols, triplets))
    }
}

/// Writes a vector as `index value` lines.
pub fn write_vector<T: Real, W: Write>(v: &[T], mut w: W) -> Result<()> {
    writeln!(w, "{}", v.len())?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{i} {:.16e}", x.to_f64_lossy())?;
    }
    Ok(())
}
