//! Symmetric eigensolvers.
//!
//! Small matrices (the 4x4 element pencils) go through cyclic Jacobi
//! rotations. Larger ones, such as the global stabilization pencil, are
//! reduced to tridiagonal form by Householder reflections and diagonalized
//! with the implicit QL algorithm.

use super::DenseMatrix;
use crate::{Error, Real, Result};

/// Matrices up to this size use Jacobi rotations.
const JACOBI_MAX_DIM: usize = 32;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A V = V diag(values)`, eigenvalues ascending, each
/// eigenvector column normalized with its first nonzero component positive.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

fn check_symmetric<T: Real>(a: &DenseMatrix<T>) -> Result<()> {
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) * a.max_abs();
    let asym = a.asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric(asym.to_f64_lossy()));
    }
    Ok(())
}

pub fn sym_eig<T: Real>(a: &DenseMatrix<T>) -> Result<SymEig<T>> {
    check_symmetric(a)?;
    let (values, vectors) = if a.dim() <= JACOBI_MAX_DIM {
        jacobi(a)?
    } else {
        let (d, v) = tridiagonal_ql(a, true)?;
        (d, v.expect("vectors requested"))
    };
    Ok(sort_and_normalize(values, vectors))
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    check_symmetric(a)?;
    let mut values = if a.dim() <= JACOBI_MAX_DIM {
        jacobi(a)?.0
    } else {
        tridiagonal_ql(a, false)?.0
    };
    values.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(values)
}

fn sort_and_normalize<T: Real>(values: Vec<T>, vectors: DenseMatrix<T>) -> SymEig<T> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let mut sorted = DenseMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        let tiny = T::epsilon();
        let flip = (0..n)
            .map(|i| vectors[(i, k)])
            .find(|v| v.abs() > tiny)
            .is_some_and(|v| v < T::zero());
        for i in 0..n {
            let v = vectors[(i, k)];
            sorted[(i, col)] = if flip { -v } else { v };
        }
    }
    SymEig {
        values: sorted_values,
        vectors: sorted,
    }
}

fn jacobi<T: Real>(a: &DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>)> {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let frob = a.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) * frob;

    let off = |m: &DenseMatrix<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)] * m[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| m[(i, i)]).collect(), v))
}

/// Householder tridiagonalization followed by implicit QL iterations
/// (the classic `tred2`/`tql2` pair).
fn tridiagonal_ql<T: Real>(
    a: &DenseMatrix<T>,
    want_vectors: bool,
) -> Result<(Vec<T>, Option<DenseMatrix<T>>)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| DenseMatrix::zeros(0))));
    }
    let zero = T::zero();
    let one = T::one();
    let mut v = a.clone();
    let mut d = vec![zero; n];
    let mut e = vec![zero; n];

    // tred2
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
                v[(j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = one;
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = zero;
    }
    v[(n - 1, n - 1)] = one;
    e[0] = zero;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let max_iter = 30 * n.max(10);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence(iter));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok((d, want_vectors.then_some(v)))
}
