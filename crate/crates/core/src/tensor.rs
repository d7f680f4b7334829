//! Dense covariant tensors of arbitrary rank in `n` dimensions.
//!
//! Storage is row-major with all indices lowered. For derivatives the new
//! (differentiation) index is placed first: `(∇T)[a, i1, .., ir]`.

use crate::jet::Jet;
use crate::ring::Ring;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Tensor<E> {
    pub n: usize,
    pub rank: usize,
    pub data: Vec<E>,
}

/// Iterates all multi-indices of a given rank in row-major order.
pub fn multi_indices(n: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = flat % n;
            flat /= n;
        }
        idx
    })
}

impl<E: Clone> Tensor<E> {
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> E) -> Self {
        let data = multi_indices(n, rank).map(|idx| f(&idx)).collect();
        Tensor { n, rank, data }
    }

    pub fn scalar(e: E) -> Self {
        Tensor { n: 0, rank: 0, data: vec![e] }
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> &E {
        &self.data[self.flat(idx)]
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> &E {
        &self.data[i * self.n + j]
    }

    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> &E {
        &self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> &E {
        &self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn map<F: Clone>(&self, f: impl FnMut(&E) -> F) -> Tensor<F> {
        Tensor { n: self.n, rank: self.rank, data: self.data.iter().map(f).collect() }
    }

    /// Swaps the two indices of a rank-2 tensor.
    pub fn transpose2(&self) -> Self {
        Tensor::from_fn(self.n, 2, |ix| self.at2(ix[1], ix[0]).clone())
    }
}

impl<T: Scalar, E: Ring<S = T>> Tensor<E> {
    pub fn add(&self, o: &Self) -> Self {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|a| a.scale(s))
    }

    /// Multiplies every component by a ring element.
    pub fn times(&self, e: &E) -> Self {
        self.map(|a| a.mul(e))
    }

    /// `(A + Aᵀ)/2` for rank 2.
    pub fn symmetrize2(&self) -> Self {
        let half = T::one() / (T::one() + T::one());
        Tensor::from_fn(self.n, 2, |ix| self.at2(ix[0], ix[1]).add(self.at2(ix[1], ix[0])).scale(half))
    }

    /// Plain values at the expansion point.
    pub fn values(&self) -> Tensor<T> {
        self.map(|a| a.value())
    }

    /// Inverse of a rank-2 tensor by Gauss–Jordan elimination without pivoting
    /// (intended for positive-definite input).
    pub fn inverse2(&self) -> Self {
        let n = self.n;
        let mut a: Vec<E> = self.data.clone();
        let proto = &self.data[0];
        let mut inv: Vec<E> = (0..n * n)
            .map(|k| proto.constant_like(if k / n == k % n { T::one() } else { T::zero() }))
            .collect();
        for col in 0..n {
            let piv = a[col * n + col].recip();
            for j in 0..n {
                a[col * n + j] = a[col * n + j].mul(&piv);
                inv[col * n + j] = inv[col * n + j].mul(&piv);
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = a[row * n + col].clone();
                for j in 0..n {
                    let t = a[col * n + j].mul(&factor);
                    a[row * n + j] = a[row * n + j].sub(&t);
                    let t = inv[col * n + j].mul(&factor);
                    inv[row * n + j] = inv[row * n + j].sub(&t);
                }
            }
        }
        Tensor { n, rank: 2, data: inv }
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn identity(n: usize) -> Self {
        Tensor::from_fn(n, 2, |ix| if ix[0] == ix[1] { T::one() } else { T::zero() })
    }
}

impl<T: Scalar> Tensor<Jet<T>> {
    pub fn order(&self) -> usize {
        self.data.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.map(|j| j.truncate(order))
    }

    /// Coordinate partial derivative, new index first.
    pub fn partial(&self, nvars: usize) -> Self {
        let n = nvars;
        let mut data = Vec::with_capacity(n * self.data.len());
        for a in 0..n {
            for e in &self.data {
                data.push(e.derivative(a));
            }
        }
        Tensor { n, rank: self.rank + 1, data }
    }

    /// Levi-Civita covariant derivative of a fully covariant tensor.
    /// `gamma[m, i, j] = Γ^m_{ij}`.
    pub fn covariant(&self, gamma: &Tensor<Jet<T>>) -> Self {
        let n = gamma.n;
        let d = self.partial(n);
        if self.rank == 0 {
            return d;
        }
        let order = d.order().min(gamma.order());
        let mut out = d.truncate(order);
        let gam = gamma.truncate(order);
        let inner = self.truncate(order);
        let block = self.data.len();
        for a in 0..n {
            for (flat, idx) in multi_indices(n, self.rank).enumerate() {
                let mut acc = out.data[a * block + flat].clone();
                for slot in 0..self.rank {
                    let mut jdx = idx.clone();
                    for m in 0..n {
                        jdx[slot] = m;
                        let t = gam.at3(m, a, idx[slot]).mul_ref(inner.get(&jdx));
                        acc = acc.sub_ref(&t);
                    }
                }
                out.data[a * block + flat] = acc;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_order_is_row_major() {
        let v: Vec<Vec<usize>> = multi_indices(2, 2).collect();
        assert_eq!(v, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn inverse_of_spd_matrix() {
        let a = Tensor { n: 3, rank: 2, data: vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0] };
        let inv = a.inverse2();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a.at2(i, k) * inv.at2(k, j)).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
