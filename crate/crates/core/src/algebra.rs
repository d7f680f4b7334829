//! Pointwise tensor algebra with explicit index raising.
//!
//! Everything here is generic over [`Ring`], so the same routines evaluate
//! plain values or jets (when a further derivative of the result is needed).

use crate::ring::Ring;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::marker::PhantomData;

/// Metric and curvature data at a point.
#[derive(Clone, Debug)]
pub struct Frame<T, E> {
    pub n: usize,
    pub g: Tensor<E>,
    pub gi: Tensor<E>,
    pub riem: Tensor<E>,
    pub ric: Tensor<E>,
    pub scal: E,
    _t: PhantomData<T>,
}

/// A symmetric 2-tensor with its first two covariant derivatives:
/// `d[a,i,j] = ∇_a h_ij`, `dd[a,b,i,j] = ∇_a ∇_b h_ij`.
#[derive(Clone, Debug)]
pub struct Local2<E> {
    pub v: Tensor<E>,
    pub d: Tensor<E>,
    pub dd: Tensor<E>,
}

/// A scalar with gradient and Hessian.
#[derive(Clone, Debug)]
pub struct Local0<E> {
    pub v: E,
    pub d: Tensor<E>,
    pub dd: Tensor<E>,
}

fn sum<T: Scalar, E: Ring<S = T>>(proto: &E, it: impl Iterator<Item = E>) -> E {
    it.fold(proto.zero_like(), |a, b| a.add(&b))
}

impl<T: Scalar, E: Ring<S = T>> Frame<T, E> {
    pub fn new(g: Tensor<E>, gi: Tensor<E>, riem: Tensor<E>, ric: Tensor<E>, scal: E) -> Self {
        Frame { n: g.n, g, gi, riem, ric, scal, _t: PhantomData }
    }

    fn zero(&self) -> E {
        self.scal.zero_like()
    }

    fn c(&self, x: f64) -> E {
        self.scal.constant_like(crate::scalar::lit(x))
    }

    pub fn lit(&self, x: f64) -> T {
        crate::scalar::lit(x)
    }

    pub fn dim(&self) -> T {
        crate::scalar::from_usize(self.n)
    }

    /// `g^{ia} g^{jb} A_ij B_ab`.
    pub fn inner2(&self, a: &Tensor<E>, b: &Tensor<E>) -> E {
        let n = self.n;
        let mut acc = self.zero();
        for i in 0..n {
            for j in 0..n {
                // (g^{-1} B g^{-1})^{ij}
                let mut raised = self.zero();
                for p in 0..n {
                    for q in 0..n {
                        raised = raised.add(&self.gi.at2(i, p).mul(self.gi.at2(j, q)).mul(b.at2(p, q)));
                    }
                }
                acc = acc.add(&a.at2(i, j).mul(&raised));
            }
        }
        acc
    }

    /// Raises both indices of a 2-tensor: `A^{ij}`.
    pub fn raise2(&self, a: &Tensor<E>) -> Tensor<E> {
        let n = self.n;
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = self.zero();
            for p in 0..n {
                for q in 0..n {
                    acc = acc.add(&self.gi.at2(ix[0], p).mul(self.gi.at2(ix[1], q)).mul(a.at2(p, q)));
                }
            }
            acc
        })
    }

    /// Full contraction of two rank-3 tensors.
    pub fn inner3(&self, a: &Tensor<E>, b: &Tensor<E>) -> E {
        let n = self.n;
        let braised = Tensor::from_fn(n, 3, |ix| {
            let mut acc = self.zero();
            for p in 0..n {
                for q in 0..n {
                    for r in 0..n {
                        acc = acc.add(
                            &self.gi.at2(ix[0], p).mul(self.gi.at2(ix[1], q)).mul(self.gi.at2(ix[2], r)).mul(b.at3(p, q, r)),
                        );
                    }
                }
            }
            acc
        });
        sum(&self.scal, a.data.iter().zip(&braised.data).map(|(x, y)| x.mul(y)))
    }

    /// Full contraction of two rank-4 tensors.
    pub fn inner4(&self, a: &Tensor<E>, b: &Tensor<E>) -> E {
        let n = self.n;
        // raise one index at a time
        let mut r = b.clone();
        for slot in 0..4 {
            r = Tensor::from_fn(n, 4, |ix| {
                let mut jx = [ix[0], ix[1], ix[2], ix[3]];
                let mut acc = self.zero();
                for p in 0..n {
                    jx[slot] = p;
                    acc = acc.add(&self.gi.at2(ix[slot], p).mul(r.get(&jx)));
                }
                acc
            });
        }
        sum(&self.scal, a.data.iter().zip(&r.data).map(|(x, y)| x.mul(y)))
    }

    /// `g^{ij} a_i b_j`.
    pub fn inner1(&self, a: &Tensor<E>, b: &Tensor<E>) -> E {
        let n = self.n;
        let mut acc = self.zero();
        for i in 0..n {
            for j in 0..n {
                acc = acc.add(&self.gi.at2(i, j).mul(&a.data[i]).mul(&b.data[j]));
            }
        }
        acc
    }

    pub fn trace(&self, a: &Tensor<E>) -> E {
        let n = self.n;
        let mut acc = self.zero();
        for i in 0..n {
            for j in 0..n {
                acc = acc.add(&self.gi.at2(i, j).mul(a.at2(i, j)));
            }
        }
        acc
    }

    /// `(A∘B)_ij = A_ik g^{kl} B_lj`.
    pub fn compose(&self, a: &Tensor<E>, b: &Tensor<E>) -> Tensor<E> {
        let n = self.n;
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = self.zero();
            for k in 0..n {
                for l in 0..n {
                    acc = acc.add(&a.at2(ix[0], k).mul(self.gi.at2(k, l)).mul(b.at2(l, ix[1])));
                }
            }
            acc
        })
    }

    /// `A(v)_j = A_jk g^{kl} v_l` for a 1-form `v`.
    pub fn apply(&self, a: &Tensor<E>, v: &Tensor<E>) -> Tensor<E> {
        let n = self.n;
        Tensor::from_fn(n, 1, |ix| {
            let mut acc = self.zero();
            for k in 0..n {
                for l in 0..n {
                    acc = acc.add(&a.at2(ix[0], k).mul(self.gi.at2(k, l)).mul(&v.data[l]));
                }
            }
            acc
        })
    }

    /// `A(u, v) = A_ij u^i v^j` for 1-forms.
    pub fn bilinear(&self, a: &Tensor<E>, u: &Tensor<E>, v: &Tensor<E>) -> E {
        self.inner1(u, &self.apply(a, v))
    }

    /// `R̊(h)_ij = g^{kl} g^{st} R_{kijs} h_{lt}`.
    pub fn ring(&self, h: &Tensor<E>) -> Tensor<E> {
        let n = self.n;
        let hr = self.raise2(h);
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = self.zero();
            for k in 0..n {
                for s in 0..n {
                    acc = acc.add(&self.riem.at4(k, ix[0], ix[1], s).mul(hr.at2(k, s)));
                }
            }
            acc
        })
    }

    /// Trace-free part `A − (tr A / n) g`.
    pub fn trace_free(&self, a: &Tensor<E>) -> Tensor<E> {
        let t = self.trace(a).scale(T::one() / self.dim());
        a.sub(&self.g.times(&t))
    }

    pub fn sym(&self, a: &Tensor<E>) -> Tensor<E> {
        a.symmetrize2()
    }

    /// `a ⊗ b` for 1-forms.
    pub fn outer1(&self, a: &Tensor<E>, b: &Tensor<E>) -> Tensor<E> {
        Tensor::from_fn(self.n, 2, |ix| a.data[ix[0]].mul(&b.data[ix[1]]))
    }

    pub fn c_n(&self) -> T {
        let n = self.dim();
        let two = T::one() + T::one();
        two * (n - two) * (n - two)
    }

    /// Schouten tensor `(1/(n−2))(Ric − R g/(2(n−1)))`.
    pub fn schouten(&self) -> Tensor<E> {
        let n = self.dim();
        let one = T::one();
        let two = one + one;
        let rg = self.g.times(&self.scal.scale(one / (two * (n - one))));
        self.ric.sub(&rg).scale(one / (n - two))
    }

    /// `T₁ = (1/(n−2))(½ R g − Ric)`.
    pub fn newton_t1(&self) -> Tensor<E> {
        let n = self.dim();
        let one = T::one();
        let two = one + one;
        self.g.times(&self.scal.scale(one / two)).sub(&self.ric).scale(one / (n - two))
    }

    pub fn sigma1(&self) -> E {
        let n = self.dim();
        let one = T::one();
        self.scal.scale(one / ((one + one) * (n - one)))
    }

    /// Closed form `(1/(2(n−2)²))(n R²/(4(n−1)) − |Ric|²)`.
    pub fn sigma2(&self) -> E {
        let n = self.dim();
        let one = T::one();
        let four = self.lit(4.0);
        let rr = self.scal.mul(&self.scal).scale(n / (four * (n - one)));
        rr.sub(&self.inner2(&self.ric, &self.ric)).scale(one / self.c_n())
    }

    pub fn trace_free_ricci(&self) -> Tensor<E> {
        self.trace_free(&self.ric)
    }

    pub fn constant(&self, x: f64) -> E {
        self.c(x)
    }
}

impl<E: Clone> Local2<E> {
    pub fn n(&self) -> usize {
        self.v.n
    }
}

impl<T: Scalar, E: Ring<S = T>> Local2<E> {
    /// Rough Laplacian `Δh = g^{ab} ∇_a ∇_b h` (geometer's sign).
    pub fn lap(&self, f: &Frame<T, E>) -> Tensor<E> {
        let n = f.n;
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = f.scal.zero_like();
            for a in 0..n {
                for b in 0..n {
                    acc = acc.add(&f.gi.at2(a, b).mul(self.dd.at4(a, b, ix[0], ix[1])));
                }
            }
            acc
        })
    }

    /// `(δh)_j = −g^{ik} ∇_i h_kj`.
    pub fn delta(&self, f: &Frame<T, E>) -> Tensor<E> {
        let n = f.n;
        Tensor::from_fn(n, 1, |ix| {
            let mut acc = f.scal.zero_like();
            for i in 0..n {
                for k in 0..n {
                    acc = acc.add(&f.gi.at2(i, k).mul(self.d.at3(i, k, ix[0])));
                }
            }
            acc.neg()
        })
    }

    /// `∇_a (δh)_j`.
    pub fn grad_delta(&self, f: &Frame<T, E>) -> Tensor<E> {
        let n = f.n;
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = f.scal.zero_like();
            for i in 0..n {
                for k in 0..n {
                    acc = acc.add(&f.gi.at2(i, k).mul(self.dd.at4(ix[0], i, k, ix[1])));
                }
            }
            acc.neg()
        })
    }

    /// `δ*δh`.
    pub fn delta_star_delta(&self, f: &Frame<T, E>) -> Tensor<E> {
        self.grad_delta(f).symmetrize2()
    }

    /// `δ²h = δ(δh)`.
    pub fn delta2(&self, f: &Frame<T, E>) -> E {
        f.trace(&self.grad_delta(f)).neg()
    }

    pub fn tr(&self, f: &Frame<T, E>) -> E {
        f.trace(&self.v)
    }

    /// `∇ tr h`.
    pub fn grad_tr(&self, f: &Frame<T, E>) -> Tensor<E> {
        let n = f.n;
        Tensor::from_fn(n, 1, |ix| {
            let mut acc = f.scal.zero_like();
            for i in 0..n {
                for j in 0..n {
                    acc = acc.add(&f.gi.at2(i, j).mul(self.d.at3(ix[0], i, j)));
                }
            }
            acc
        })
    }

    /// `∇² tr h`.
    pub fn hess_tr(&self, f: &Frame<T, E>) -> Tensor<E> {
        let n = f.n;
        Tensor::from_fn(n, 2, |ix| {
            let mut acc = f.scal.zero_like();
            for i in 0..n {
                for j in 0..n {
                    acc = acc.add(&f.gi.at2(i, j).mul(self.dd.at4(ix[0], ix[1], i, j)));
                }
            }
            acc
        })
    }

    pub fn lap_tr(&self, f: &Frame<T, E>) -> E {
        f.trace(&self.hess_tr(f))
    }

    /// `Δ_E h = ∇*∇h − 2R̊(h) = −Δh − 2R̊(h)`.
    pub fn einstein(&self, f: &Frame<T, E>) -> Tensor<E> {
        let two = T::one() + T::one();
        self.lap(f).add(&f.ring(&self.v).scale(two)).neg_tensor()
    }

    /// `|∇h|²`.
    pub fn grad_norm2(&self, f: &Frame<T, E>) -> E {
        f.inner3(&self.d, &self.d)
    }

    /// Slice `∇_a h` as a 2-tensor.
    pub fn d_slice(&self, a: usize) -> Tensor<E> {
        let n = self.v.n;
        Tensor { n, rank: 2, data: self.d.data[a * n * n..(a + 1) * n * n].to_vec() }
    }

    /// Slice `∇_a ∇_b h` as a 2-tensor.
    pub fn dd_slice(&self, a: usize, b: usize) -> Tensor<E> {
        let n = self.v.n;
        let o = (a * n + b) * n * n;
        Tensor { n, rank: 2, data: self.dd.data[o..o + n * n].to_vec() }
    }

    pub fn scale(&self, s: T) -> Self {
        Local2 { v: self.v.scale(s), d: self.d.scale(s), dd: self.dd.scale(s) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Local2 { v: self.v.add(&o.v), d: self.d.add(&o.d), dd: self.dd.add(&o.dd) }
    }

    /// Product rule for `φ·h` with a scalar `φ` (uses symmetry of `∇²φ`).
    pub fn times_scalar(&self, phi: &Local0<E>) -> Self {
        let n = self.v.n;
        let v = self.v.times(&phi.v);
        let d = Tensor::from_fn(n, 3, |ix| {
            phi.d.data[ix[0]].mul(self.v.at2(ix[1], ix[2])).add(&phi.v.mul(self.d.at3(ix[0], ix[1], ix[2])))
        });
        let dd = Tensor::from_fn(n, 4, |ix| {
            let (a, b, i, j) = (ix[0], ix[1], ix[2], ix[3]);
            phi.dd.at2(a, b)
                .mul(self.v.at2(i, j))
                .add(&phi.d.data[b].mul(self.d.at3(a, i, j)))
                .add(&phi.d.data[a].mul(self.d.at3(b, i, j)))
                .add(&phi.v.mul(self.dd.at4(a, b, i, j)))
        });
        Local2 { v, d, dd }
    }
}

impl<T: Scalar, E: Ring<S = T>> Local0<E> {
    pub fn lap(&self, f: &Frame<T, E>) -> E {
        f.trace(&self.dd)
    }

    pub fn grad_norm2(&self, f: &Frame<T, E>) -> E {
        f.inner1(&self.d, &self.d)
    }

    pub fn constant(proto: &E, n: usize, c: T) -> Self {
        let z = proto.zero_like();
        Local0 {
            v: proto.constant_like(c),
            d: Tensor::from_fn(n, 1, |_| z.clone()),
            dd: Tensor::from_fn(n, 2, |_| z.clone()),
        }
    }

    pub fn times(&self, o: &Self) -> Self {
        let n = self.d.n;
        Local0 {
            v: self.v.mul(&o.v),
            d: Tensor::from_fn(n, 1, |ix| self.d.data[ix[0]].mul(&o.v).add(&self.v.mul(&o.d.data[ix[0]]))),
            dd: Tensor::from_fn(n, 2, |ix| {
                let (a, b) = (ix[0], ix[1]);
                self.dd.at2(a, b)
                    .mul(&o.v)
                    .add(&self.d.data[a].mul(&o.d.data[b]))
                    .add(&self.d.data[b].mul(&o.d.data[a]))
                    .add(&self.v.mul(o.dd.at2(a, b)))
            }),
        }
    }
}

/// Convenience negation on tensors.
pub trait NegTensor {
    fn neg_tensor(&self) -> Self;
}

impl<T: Scalar, E: Ring<S = T>> NegTensor for Tensor<E> {
    fn neg_tensor(&self) -> Self {
        self.map(|a| a.neg())
    }
}

/// Ring element `1` shaped like `proto`.
pub fn one_like<T: Scalar, E: Ring<S = T>>(proto: &E) -> E {
    proto.constant_like(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_frame(n: usize) -> Frame<f64, f64> {
        let g = Tensor::<f64>::identity(n);
        Frame::new(g.clone(), g, Tensor::from_fn(n, 4, |_| 0.0), Tensor::from_fn(n, 2, |_| 0.0), 0.0)
    }

    #[test]
    fn inner_products_on_identity_metric() {
        let f = flat_frame(3);
        let a = Tensor { n: 3, rank: 2, data: (0..9).map(|k| k as f64).collect() };
        let b = a.transpose2();
        let direct: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a.at2(i, j) * b.at2(i, j)).sum();
        assert!((f.inner2(&a, &b) - direct).abs() < 1e-12);
        assert!((f.trace(&a) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_schouten_is_half_metric() {
        let n = 4;
        let g = Tensor::<f64>::identity(n);
        let riem = Tensor::from_fn(n, 4, |ix| {
            let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            d(ix[0], ix[3]) * d(ix[1], ix[2]) - d(ix[0], ix[2]) * d(ix[1], ix[3])
        });
        let ric = g.scale(3.0);
        let f = Frame::new(g.clone(), g.clone(), riem, ric, 12.0);
        let a = f.schouten();
        assert!((a.at2(0, 0) - 0.5).abs() < 1e-14 && a.at2(0, 1).abs() < 1e-14);
        assert!((f.sigma2() - 1.5).abs() < 1e-14);
        // R̊(g) = Ric
        let rg = f.ring(&g);
        assert!((rg.at2(2, 2) - 3.0).abs() < 1e-14);
    }
}
