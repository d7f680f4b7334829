//! Small dense linear algebra on row-major `Vec<T>` matrices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive-definite `n×n` matrix.
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return Err(Error::Numeric("matrix not positive definite".into()));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// LU factorization with partial pivoting, returned as (packed LU, permutation).
pub fn lu<T: Scalar>(a: &[T], n: usize) -> Result<(Vec<T>, Vec<usize>)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > T::zero()) {
            return Err(Error::Numeric("singular matrix in LU".into()));
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            m[r * n + col] = f;
            if f != T::zero() {
                for j in col + 1..n {
                    m[r * n + j] = m[r * n + j] - f * m[col * n + j];
                }
            }
        }
    }
    Ok((m, perm))
}

pub fn lu_solve<T: Scalar>(lu: &(Vec<T>, Vec<usize>), n: usize, b: &[T]) -> Vec<T> {
    let (m, perm) = lu;
    let mut y: Vec<T> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s = s - m[i * n + k] * y[k];
        }
        y[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - m[i * n + k] * y[k];
        }
        y[i] = s / m[i * n + i];
    }
    y
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix by
/// cyclic Jacobi rotations.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    let two = T::one() + T::one();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag = diag + m[i * n + i] * m[i * n + i];
            for j in 0..n {
                if i != j {
                    off = off + m[i * n + j] * m[i * n + j];
                }
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| m[a * n + a].partial_cmp(&m[b * n + b]).unwrap());
            let vals = idx.iter().map(|&i| m[i * n + i]).collect();
            let mut vecs = vec![T::zero(); n * n];
            for (c, &i) in idx.iter().enumerate() {
                for r in 0..n {
                    vecs[r * n + c] = v[r * n + i];
                }
            }
            return Ok((vals, vecs));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric("Jacobi eigen-solver did not converge".into()))
}

/// Eigenvalues of `A v = λ G v` for symmetric `A` and SPD `G`, ascending.
pub fn generalized_eigenvalues<T: Scalar>(a: &[T], g: &[T], n: usize) -> Result<Vec<T>> {
    let l = cholesky(g, n)?;
    // C = L⁻¹ A L⁻ᵀ
    let mut x = vec![T::zero(); n * n];
    for col in 0..n {
        let b: Vec<T> = (0..n).map(|r| a[r * n + col]).collect();
        let y = forward(&l, n, &b);
        for r in 0..n {
            x[r * n + col] = y[r];
        }
    }
    let mut c = vec![T::zero(); n * n];
    for row in 0..n {
        let b: Vec<T> = (0..n).map(|k| x[row * n + k]).collect();
        let y = forward(&l, n, &b);
        for k in 0..n {
            c[row * n + k] = y[k];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = (c[i * n + j] + c[j * n + i]) / (T::one() + T::one());
            c[i * n + j] = s;
            c[j * n + i] = s;
        }
    }
    Ok(symmetric_eigen(&c, n)?.0)
}

fn forward<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Elementary symmetric functions `σ_1..σ_n` of the given values.
pub fn elementary_symmetric<T: Scalar>(vals: &[T]) -> Vec<T> {
    let n = vals.len();
    let mut e = vec![T::zero(); n + 1];
    e[0] = T::one();
    for &v in vals {
        for k in (1..=n).rev() {
            e[k] = e[k] + v * e[k - 1];
        }
    }
    e[1..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a: [f64; 9] = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0];
        let (vals, _) = symmetric_eigen(&a, 3).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14 && (vals[2] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn generalized_with_scaled_identity() {
        let a: [f64; 4] = [1.0, 0.0, 0.0, 3.0];
        let g = [2.0, 0.0, 0.0, 2.0];
        let v = generalized_eigenvalues(&a, &g, 2).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn lu_solves_nonsymmetric_system() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let f = lu(&a, 3).unwrap();
        let x = lu_solve(&f, 3, &[3.0, 2.0, 4.0]);
        for r in 0..3 {
            let s: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((s - [3.0, 2.0, 4.0][r]).abs() < 1e-14);
        }
    }

    #[test]
    fn elementary_symmetric_of_three() {
        let e = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![6.0, 11.0, 6.0]);
    }
}
