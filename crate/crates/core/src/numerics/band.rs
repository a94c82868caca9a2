use super::CsrMatrix;
use crate::{Error, Real, Result};

/// Banded LU factorization with partial pivoting of a sparse matrix.
///
/// Row `i` of the working array covers columns `i - kl ..= i + kl + ku`,
/// which leaves room for the fill created by row interchanges. Multipliers
/// are kept per elimination column and applied with the pivots interleaved
/// during the forward solve. Singularity is judged per column as in
/// [`DenseLu`](super::DenseLu).
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<T>,
    lower: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut upper = vec![T::zero(); n * width];
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let mut col_max = vec![T::zero(); n];
        for (i, j, v) in a.iter() {
            upper[idx(i, j)] = v;
            col_max[j] = col_max[j].max(v.abs());
        }
        let tiny = T::lit(1e-14);
        let mut lower = vec![T::zero(); n * kl.max(1)];
        let mut pivots = vec![0; n];

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = upper[idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = upper[idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny * col_max[k] || best == T::zero() {
                return Err(Error::Singular {
                    row: k,
                    pivot: best.to_f64_lossy(),
                });
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    upper.swap(idx(k, j), idx(p, j));
                }
            }
            let akk = upper[idx(k, k)];
            for i in k + 1..=last_row {
                let m = upper[idx(i, k)] / akk;
                lower[k * kl + (i - k - 1)] = m;
                upper[idx(i, k)] = T::zero();
                if m != T::zero() {
                    for j in k + 1..=last_col {
                        let ukj = upper[idx(k, j)];
                        upper[idx(i, j)] -= m * ukj;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            width,
            upper,
            lower,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} against dimension {}",
                b.len(),
                self.n
            )));
        }
        let mut y = b.to_vec();
        self.solve_in_place(&mut y);
        Ok(y)
    }

    pub fn solve_in_place(&self, y: &mut [T]) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            y.swap(k, p);
            let yk = y[k];
            if yk != T::zero() {
                for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    y[i] -= self.lower[k * kl + (i - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * width..(k + 1) * width];
            let mut s = y[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= row[j + kl - k] * y[j];
            }
            y[k] = s / row[kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tridiagonal_system() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let b = a.spmv(&x_true).unwrap();
        let x = BandLu::factor(&a).unwrap().solve(&b).unwrap();
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn random_banded_nonsymmetric_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n: usize = 40;
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 5).min(n) {
                // weak diagonal forces row interchanges
                let v = if i == j {
                    0.01
                } else {
                    rng.gen_range(-1.0..1.0)
                };
                t.push((i, j, v));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = BandLu::factor(&a).unwrap().solve(&b).unwrap();
        let dense = a.to_dense().lu().unwrap().solve(&b).unwrap();
        for (p, q) in x.iter().zip(&dense) {
            assert!((p - q).abs() < 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn singular_band_matrix() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        );
        assert!(matches!(BandLu::factor(&a), Err(Error::Singular { .. })));
    }

    #[test]
    fn diagonal_only() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 4.0)]);
        assert_eq!(
            BandLu::factor(&a).unwrap().solve(&[2.0, 4.0]).unwrap(),
            vec![1.0, 1.0]
        );
    }
}
