//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] of order `k` in `n` variables stores the Taylor coefficients
//! `∂^α f(p) / α!` for every multi-index `|α| ≤ k`, graded by total degree.
//! Symmetric mixed partials are stored once. Arithmetic is exact up to
//! rounding, so derivatives of closed-form fields come out exact as well.

use crate::scalar::{lit, Scalar};
use std::collections::HashMap;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 8;

/// Multiplication and differentiation tables for jets in a fixed number of
/// variables, shared by every jet with that variable count.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    exps: Vec<Vec<u8>>,
    len_by_order: Vec<usize>,
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    diff: Vec<Vec<(u32, u32, u32)>>,
    diff_end: Vec<Vec<usize>>,
    index: HashMap<Vec<u8>, usize>,
}

impl JetSpace {
    fn build(nvars: usize) -> JetSpace {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut len_by_order = vec![1];
        let mut frontier: Vec<Vec<u8>> = vec![vec![0; nvars]];
        for _deg in 1..=MAX_ORDER {
            let mut next: Vec<Vec<u8>> = Vec::new();
            for e in &frontier {
                // extend only at or after the last nonzero slot to avoid duplicates
                let last = e.iter().rposition(|&a| a > 0).unwrap_or(0);
                for v in last..nvars {
                    let mut f = e.clone();
                    f[v] += 1;
                    next.push(f);
                }
            }
            exps.extend(next.iter().cloned());
            len_by_order.push(exps.len());
            frontier = next;
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree = |e: &Vec<u8>| e.iter().map(|&a| a as usize).sum::<usize>();

        let mut mul = Vec::new();
        let mut mul_end = Vec::new();
        for target_deg in 0..=MAX_ORDER {
            let lo = if target_deg == 0 { 0 } else { len_by_order[target_deg - 1] };
            for k in lo..len_by_order[target_deg] {
                let ek = &exps[k];
                for i in 0..=k {
                    let ei = &exps[i];
                    if ei.iter().zip(ek).all(|(a, b)| a <= b) {
                        let ej: Vec<u8> = ek.iter().zip(ei).map(|(b, a)| b - a).collect();
                        let j = index[&ej];
                        if i <= j {
                            mul.push((i as u32, j as u32, k as u32));
                        }
                    }
                }
            }
            mul_end.push(mul.len());
        }

        let mut diff = Vec::new();
        let mut diff_end = Vec::new();
        for v in 0..nvars {
            let mut table = Vec::new();
            let mut ends = Vec::new();
            for target_deg in 0..MAX_ORDER {
                let lo = if target_deg == 0 { 0 } else { len_by_order[target_deg - 1] };
                for dst in lo..len_by_order[target_deg] {
                    let mut e = exps[dst].clone();
                    e[v] += 1;
                    debug_assert_eq!(degree(&e), target_deg + 1);
                    let src = index[&e];
                    table.push((dst as u32, src as u32, e[v] as u32));
                }
                ends.push(table.len());
            }
            diff.push(table);
            diff_end.push(ends);
        }

        JetSpace { nvars, exps, len_by_order, mul, mul_end, diff, diff_end, index }
    }

    /// Shared space for `nvars` variables.
    pub fn get(nvars: usize) -> &'static JetSpace {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static JetSpace>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry(nvars)
            .or_insert_with(|| Box::leak(Box::new(JetSpace::build(nvars))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Number of stored coefficients for a jet of the given order.
    pub fn len(&self, order: usize) -> usize {
        self.len_by_order[order]
    }

    /// Storage position of the multi-index `alpha`.
    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    /// Multi-index stored at position `k`.
    pub fn exponent(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }
}

/// Truncated Taylor expansion of a scalar quantity at a point.
#[derive(Clone, Debug)]
pub struct Jet<T> {
    space: &'static JetSpace,
    order: usize,
    c: Vec<T>,
}

impl<T: Scalar> Jet<T> {
    /// Constant jet.
    pub fn constant(nvars: usize, order: usize, value: T) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let space = JetSpace::get(nvars);
        let mut c = vec![T::zero(); space.len(order)];
        c[0] = value;
        Jet { space, order, c }
    }

    /// The coordinate function `x_i` expanded at `x_i = value`.
    pub fn variable(nvars: usize, order: usize, i: usize, value: T) -> Self {
        let mut j = Self::constant(nvars, order, value);
        if order > 0 {
            j.c[1 + i] = T::one();
        }
        j
    }

    /// Seeded coordinate jets for the point `p`.
    pub fn seed(p: &[T], order: usize) -> Vec<Self> {
        let n = p.len();
        (0..n).map(|i| Self::variable(n, order, i, p[i])).collect()
    }

    /// Jet with raw graded coefficients.
    pub fn from_coefficients(nvars: usize, order: usize, c: Vec<T>) -> Self {
        let space = JetSpace::get(nvars);
        assert_eq!(c.len(), space.len(order));
        Jet { space, order, c }
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[T] {
        &self.c
    }

    /// A constant with the same variable count and order.
    pub fn constant_like(&self, value: T) -> Self {
        Self::constant(self.space.nvars, self.order, value)
    }

    pub fn zero_like(&self) -> Self {
        self.constant_like(T::zero())
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Jet { space: self.space, order, c: self.c[..self.space.len(order)].to_vec() }
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, alpha: &[u8]) -> Option<T> {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > self.order {
            return None;
        }
        let k = self.space.position(alpha)?;
        let mut fact = T::one();
        for &a in alpha {
            for m in 2..=a {
                fact = fact * T::from_u8(m).unwrap();
            }
        }
        Some(self.c[k] * fact)
    }

    /// First partial `∂_i f` at the expansion point.
    pub fn d1(&self, i: usize) -> T {
        self.c[1 + i]
    }

    /// Jet of the partial derivative `∂_v f`, one order lower.
    pub fn derivative(&self, v: usize) -> Self {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut c = vec![T::zero(); self.space.len(order)];
        let end = self.space.diff_end[v][order];
        for &(dst, src, factor) in &self.space.diff[v][..end] {
            c[dst as usize] = self.c[src as usize] * T::from_u32(factor).unwrap();
        }
        Jet { space: self.space, order, c }
    }

    fn binary_order(&self, other: &Self) -> usize {
        debug_assert_eq!(self.space.nvars, other.space.nvars, "jet variable count mismatch");
        self.order.min(other.order)
    }

    pub fn mul_ref(&self, other: &Self) -> Self {
        let order = self.binary_order(other);
        let mut c = vec![T::zero(); self.space.len(order)];
        let (a, b) = (&self.c, &other.c);
        for &(i, j, k) in &self.space.mul[..self.space.mul_end[order]] {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            if i == j {
                c[k] = c[k] + a[i] * b[j];
            } else {
                c[k] = c[k] + a[i] * b[j] + a[j] * b[i];
            }
        }
        Jet { space: self.space, order, c }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        let order = self.binary_order(other);
        let len = self.space.len(order);
        let c = (0..len).map(|k| f(self.c[k], other.c[k])).collect();
        Jet { space: self.space, order, c }
    }

    pub fn add_ref(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub_ref(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        Jet { space: self.space, order: self.order, c: self.c.iter().map(|&a| a * s).collect() }
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.c[0] = out.c[0] + s;
        out
    }

    /// `Σ_k taylor[k] (self − self(p))^k`; `taylor[k]` must be `f^{(k)}(a)/k!`.
    pub fn compose(&self, taylor: &[T]) -> Self {
        assert!(taylor.len() > self.order);
        let mut delta = self.clone();
        delta.c[0] = T::zero();
        let mut r = self.constant_like(taylor[self.order]);
        for k in (0..self.order).rev() {
            r = r.mul_ref(&delta).add_scalar(taylor[k]);
        }
        r
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let inv = T::one() / a;
        let mut t = Vec::with_capacity(self.order + 1);
        let mut p = inv;
        for _ in 0..=self.order {
            t.push(p);
            p = -p * inv;
        }
        self.compose(&t)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut t = Vec::with_capacity(self.order + 1);
        let mut fact = T::one();
        for k in 0..=self.order {
            if k > 0 {
                fact = fact * T::from_usize(k).unwrap();
            }
            t.push(e / fact);
        }
        self.compose(&t)
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut t = vec![a.ln()];
        let mut p = T::one();
        for k in 1..=self.order {
            p = p / a;
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            t.push(sign * p / T::from_usize(k).unwrap());
        }
        self.compose(&t)
    }

    /// Real power `self^e`.
    pub fn powf(&self, e: T) -> Self {
        let a = self.value();
        let mut t = Vec::with_capacity(self.order + 1);
        let mut binom = T::one();
        for k in 0..=self.order {
            let kk = T::from_usize(k).unwrap();
            if k > 0 {
                binom = binom * (e - kk + T::one()) / kk;
            }
            t.push(binom * a.powf(e - kk));
        }
        self.compose(&t)
    }

    pub fn powi(&self, e: i32) -> Self {
        if e == 0 {
            return self.constant_like(T::one());
        }
        let mut base = if e < 0 { self.recip() } else { self.clone() };
        let mut m = e.unsigned_abs();
        let mut acc: Option<Self> = None;
        while m > 0 {
            if m & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul_ref(&base),
                });
            }
            m >>= 1;
            if m > 0 {
                base = base.mul_ref(&base);
            }
        }
        acc.unwrap()
    }

    pub fn sqrt(&self) -> Self {
        self.powf(lit(0.5))
    }

    fn trig_like(&self, d: [T; 4]) -> Self {
        let mut t = Vec::with_capacity(self.order + 1);
        let mut fact = T::one();
        for k in 0..=self.order {
            if k > 0 {
                fact = fact * T::from_usize(k).unwrap();
            }
            t.push(d[k % 4] / fact);
        }
        self.compose(&t)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        self.trig_like([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        self.trig_like([c, -s, -c, s])
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.trig_like([s, c, s, c])
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        self.trig_like([c, s, c, s])
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Self {
        self.add_ref(&rhs)
    }
}
impl<T: Scalar> Add<&Jet<T>> for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        self.add_ref(rhs)
    }
}
impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Self {
        self.sub_ref(&rhs)
    }
}
impl<T: Scalar> Sub<&Jet<T>> for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self.sub_ref(rhs)
    }
}
impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Self {
        self.mul_ref(&rhs)
    }
}
impl<T: Scalar> Mul<&Jet<T>> for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        self.mul_ref(rhs)
    }
}
impl<T: Scalar> Div for Jet<T> {
    type Output = Jet<T>;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self.mul_ref(&rhs.recip())
    }
}
impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}
impl<T: Scalar> AddAssign<&Jet<T>> for Jet<T> {
    fn add_assign(&mut self, rhs: &Jet<T>) {
        *self = self.add_ref(rhs);
    }
}
impl<T: Scalar> Add<T> for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: T) -> Self {
        self.add_scalar(rhs)
    }
}
impl<T: Scalar> Mul<T> for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(order: usize) -> Vec<Jet<f64>> {
        Jet::seed(&[0.3, -0.2, 0.5], order)
    }

    #[test]
    fn table_sizes() {
        let sp = JetSpace::get(3);
        assert_eq!(sp.len(0), 1);
        assert_eq!(sp.len(1), 4);
        assert_eq!(sp.len(2), 10);
        assert_eq!(sp.len(4), 35);
    }

    #[test]
    fn polynomial_partials_are_exact() {
        let v = x(4);
        // f = x^2 y z^3
        let f = &(&v[0] * &v[0]) * &(&v[1] * &v[2].powi(3));
        let (a, b, c) = (0.3f64, -0.2f64, 0.5f64);
        assert!((f.value() - a * a * b * c.powi(3)).abs() < 1e-15);
        assert!((f.partial(&[1, 0, 0]).unwrap() - 2.0 * a * b * c.powi(3)).abs() < 1e-15);
        assert!((f.partial(&[1, 1, 1]).unwrap() - 6.0 * a * c * c).abs() < 1e-14);
        assert!((f.partial(&[0, 0, 3]).unwrap() - 6.0 * a * a * b).abs() < 1e-14);
        assert!((f.partial(&[2, 1, 1]).unwrap() - 6.0 * c * c).abs() < 1e-13);
    }

    #[test]
    fn derivative_commutes() {
        let v = x(4);
        let f = (&v[0] * &v[1]).sin() + v[2].exp() * v[0].clone();
        let a = f.derivative(0).derivative(1);
        let b = f.derivative(1).derivative(0);
        for (p, q) in a.coefficients().iter().zip(b.coefficients()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let t = Jet::<f64>::variable(1, 5, 0, 0.7);
        let s = t.sin();
        assert!((s.partial(&[3]).unwrap() + 0.7f64.cos()).abs() < 1e-14);
        let e = t.exp();
        assert!((e.partial(&[5]).unwrap() - 0.7f64.exp()).abs() < 1e-12);
        let l = t.ln();
        assert!((l.partial(&[2]).unwrap() + 1.0 / 0.49).abs() < 1e-13);
        let r = t.recip();
        assert!((r.partial(&[2]).unwrap() - 2.0 / 0.7f64.powi(3)).abs() < 1e-12);
        let q = t.sqrt();
        assert!((q.partial(&[1]).unwrap() - 0.5 / 0.7f64.sqrt()).abs() < 1e-14);
        let ch = t.cosh();
        assert!((ch.partial(&[4]).unwrap() - 0.7f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn mixed_order_product_truncates() {
        let a = Jet::<f64>::variable(2, 3, 0, 1.0);
        let b = Jet::<f64>::variable(2, 1, 1, 2.0);
        let c = &a * &b;
        assert_eq!(c.order(), 1);
    }

    #[test]
    fn f32_jets_work() {
        let t = Jet::<f32>::variable(1, 3, 0, 0.5);
        let y = t.powi(3);
        assert!((y.partial(&[2]).unwrap() - 3.0).abs() < 1e-6);
    }
}
