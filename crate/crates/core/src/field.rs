//! Charts and closed-form fields that can be expanded as jets at any point.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::sync::Arc;

/// Coordinate chart: open box, optionally intersected with an open ball.
#[derive(Clone, Debug)]
pub struct Chart<T> {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(T, T)>,
    pub ball_radius: Option<T>,
    /// Points closer than this to a finite box bound are rejected.
    pub exclusion: T,
}

impl<T: Scalar> Chart<T> {
    /// Whole `ℝⁿ`.
    pub fn euclidean(name: &str, dim: usize) -> Self {
        Chart {
            name: name.to_string(),
            dim,
            bounds: vec![(T::neg_infinity(), T::infinity()); dim],
            ball_radius: None,
            exclusion: T::zero(),
        }
    }

    /// Open ball `|x| < radius`.
    pub fn ball(name: &str, dim: usize, radius: T) -> Self {
        Chart { ball_radius: Some(radius), ..Self::euclidean(name, dim) }
    }

    /// Box chart with singular faces kept at distance `exclusion`.
    pub fn boxed(name: &str, bounds: Vec<(T, T)>, exclusion: T) -> Self {
        Chart { name: name.to_string(), dim: bounds.len(), bounds, ball_radius: None, exclusion }
    }

    pub fn check(&self, p: &[T]) -> Result<()> {
        let bad = || Error::Domain {
            chart: self.name.clone(),
            point: p.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect(),
        };
        if p.len() != self.dim || p.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        for (x, &(lo, hi)) in p.iter().zip(&self.bounds) {
            if *x <= lo + self.exclusion || *x >= hi - self.exclusion {
                return Err(bad());
            }
        }
        if let Some(r) = self.ball_radius {
            let s = p.iter().fold(T::zero(), |s, &x| s + x * x);
            if s >= r * r {
                return Err(bad());
            }
        }
        Ok(())
    }
}

/// Ball in chart coordinates outside of which a field vanishes identically.
#[derive(Clone, Debug)]
pub struct Support<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> Support<T> {
    pub fn contains(&self, p: &[T]) -> bool {
        let s = p.iter().zip(&self.center).fold(T::zero(), |s, (&a, &b)| s + (a - b) * (a - b));
        s < self.radius * self.radius
    }
}

type ScalarFn<T> = dyn Fn(&[Jet<T>]) -> Jet<T> + Send + Sync;
type MatrixFn<T> = dyn Fn(&[Jet<T>]) -> Tensor<Jet<T>> + Send + Sync;

/// Smooth function on a chart.
#[derive(Clone)]
pub struct ScalarField<T> {
    pub chart: Chart<T>,
    pub support: Option<Support<T>>,
    f: Arc<ScalarFn<T>>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(chart: Chart<T>, f: impl Fn(&[Jet<T>]) -> Jet<T> + Send + Sync + 'static) -> Self {
        ScalarField { chart, support: None, f: Arc::new(f) }
    }

    pub fn with_support(mut self, s: Support<T>) -> Self {
        self.support = Some(s);
        self
    }

    pub fn constant(chart: Chart<T>, c: T) -> Self {
        Self::new(chart, move |x| x[0].constant_like(c))
    }

    pub fn jet(&self, x: &[Jet<T>]) -> Jet<T> {
        (self.f)(x)
    }

    pub fn jet_at(&self, p: &[T], order: usize) -> Result<Jet<T>> {
        self.chart.check(p)?;
        Ok(self.jet(&Jet::seed(p, order)))
    }

    pub fn value(&self, p: &[T]) -> T {
        self.jet(&Jet::seed(p, 0)).value()
    }

    pub fn scaled(&self, s: T) -> Self {
        let f = self.f.clone();
        ScalarField { chart: self.chart.clone(), support: self.support.clone(), f: Arc::new(move |x| f(x).scale(s)) }
    }

    pub fn plus(&self, o: &ScalarField<T>) -> Self {
        let (f, g) = (self.f.clone(), o.f.clone());
        ScalarField { chart: self.chart.clone(), support: None, f: Arc::new(move |x| f(x).add_ref(&g(x))) }
    }
}

/// Smooth symmetric 2-tensor field on a chart, stored fully covariant.
#[derive(Clone)]
pub struct SymTensorField<T> {
    pub chart: Chart<T>,
    pub support: Option<Support<T>>,
    f: Arc<MatrixFn<T>>,
}

impl<T: Scalar> SymTensorField<T> {
    pub fn new(chart: Chart<T>, f: impl Fn(&[Jet<T>]) -> Tensor<Jet<T>> + Send + Sync + 'static) -> Self {
        SymTensorField { chart, support: None, f: Arc::new(f) }
    }

    /// Builds the field from its upper-triangular component functions.
    pub fn from_components(chart: Chart<T>, f: impl Fn(&[Jet<T>], usize, usize) -> Jet<T> + Send + Sync + 'static) -> Self {
        let n = chart.dim;
        Self::new(chart, move |x| {
            let mut upper: Vec<Option<Jet<T>>> = vec![None; n * n];
            for i in 0..n {
                for j in i..n {
                    upper[i * n + j] = Some(f(x, i, j));
                }
            }
            Tensor::from_fn(n, 2, |ix| {
                let (i, j) = (ix[0].min(ix[1]), ix[0].max(ix[1]));
                upper[i * n + j].clone().unwrap()
            })
        })
    }

    pub fn with_support(mut self, s: Support<T>) -> Self {
        self.support = Some(s);
        self
    }

    pub fn zero(chart: Chart<T>) -> Self {
        let n = chart.dim;
        Self::new(chart, move |x| Tensor::from_fn(n, 2, |_| x[0].zero_like()))
    }

    pub fn jet(&self, x: &[Jet<T>]) -> Tensor<Jet<T>> {
        (self.f)(x)
    }

    pub fn jet_at(&self, p: &[T], order: usize) -> Result<Tensor<Jet<T>>> {
        self.chart.check(p)?;
        Ok(self.jet(&Jet::seed(p, order)))
    }

    pub fn value(&self, p: &[T]) -> Tensor<T> {
        self.jet(&Jet::seed(p, 0)).values()
    }

    pub fn scaled(&self, s: T) -> Self {
        let f = self.f.clone();
        SymTensorField { chart: self.chart.clone(), support: self.support.clone(), f: Arc::new(move |x| f(x).scale(s)) }
    }

    pub fn plus(&self, o: &SymTensorField<T>) -> Self {
        let (f, g) = (self.f.clone(), o.f.clone());
        let support = match (&self.support, &o.support) {
            (Some(a), Some(b)) if a.center.iter().zip(&b.center).all(|(x, y)| x == y) && a.radius == b.radius => {
                Some(a.clone())
            }
            _ => None,
        };
        SymTensorField { chart: self.chart.clone(), support, f: Arc::new(move |x| f(x).add(&g(x))) }
    }

    /// The field `u·g`.
    pub fn conformal(u: &ScalarField<T>, g: &MetricField<T>) -> Self {
        let (u, g2) = (u.clone(), g.clone());
        SymTensorField {
            chart: g.chart.clone(),
            support: u.support.clone(),
            f: Arc::new(move |x| g2.jet(x).times(&u.jet(x))),
        }
    }
}

/// Riemannian metric on a chart.
#[derive(Clone)]
pub struct MetricField<T> {
    pub chart: Chart<T>,
    f: Arc<MatrixFn<T>>,
}

impl<T: Scalar> MetricField<T> {
    pub fn new(chart: Chart<T>, f: impl Fn(&[Jet<T>]) -> Tensor<Jet<T>> + Send + Sync + 'static) -> Self {
        MetricField { chart, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn from_components(chart: Chart<T>, f: impl Fn(&[Jet<T>], usize, usize) -> Jet<T> + Send + Sync + 'static) -> Self {
        let s = SymTensorField::from_components(chart.clone(), f);
        MetricField { chart, f: s.f }
    }

    /// Euclidean metric `δ_ij`.
    pub fn euclidean(chart: Chart<T>) -> Self {
        let n = chart.dim;
        Self::new(chart, move |x| {
            Tensor::from_fn(n, 2, |ix| x[0].constant_like(if ix[0] == ix[1] { T::one() } else { T::zero() }))
        })
    }

    /// Conformally flat metric `φ(x) δ_ij`.
    pub fn conformally_flat(chart: Chart<T>, phi: impl Fn(&[Jet<T>]) -> Jet<T> + Send + Sync + 'static) -> Self {
        let n = chart.dim;
        Self::new(chart, move |x| {
            let p = phi(x);
            let z = p.zero_like();
            Tensor::from_fn(n, 2, |ix| if ix[0] == ix[1] { p.clone() } else { z.clone() })
        })
    }

    pub fn jet(&self, x: &[Jet<T>]) -> Tensor<Jet<T>> {
        (self.f)(x)
    }

    pub fn value(&self, p: &[T]) -> Tensor<T> {
        self.jet(&Jet::seed(p, 0)).values()
    }

    /// View of the metric as a symmetric tensor field.
    pub fn as_tensor(&self) -> SymTensorField<T> {
        SymTensorField { chart: self.chart.clone(), support: None, f: self.f.clone() }
    }

    /// `λ g` for a constant `λ`.
    pub fn scaled(&self, lambda: T) -> Self {
        let f = self.f.clone();
        MetricField { chart: self.chart.clone(), f: Arc::new(move |x| f(x).scale(lambda)) }
    }

    /// `g + t h`.
    pub fn perturbed(&self, h: &SymTensorField<T>, t: T) -> Self {
        let (f, h) = (self.f.clone(), h.f.clone());
        MetricField { chart: self.chart.clone(), f: Arc::new(move |x| f(x).add(&h(x).scale(t))) }
    }

    /// `e^{2u} g`.
    pub fn conformal(&self, u: &ScalarField<T>) -> Self {
        let (f, u) = (self.f.clone(), u.clone());
        let two = T::one() + T::one();
        MetricField {
            chart: self.chart.clone(),
            f: Arc::new(move |x| f(x).times(&u.jet(x).scale(two).exp())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_rejects_boundary_and_outside() {
        let c = Chart::<f64>::ball("poincare", 3, 1.0);
        assert!(c.check(&[0.1, 0.2, 0.3]).is_ok());
        assert!(c.check(&[1.0, 0.0, 0.0]).is_err());
        let b = Chart::<f64>::boxed("polar", vec![(0.0, 3.0), (0.0, 3.0), (0.0, 6.0)], 1e-3);
        assert!(b.check(&[0.0005, 1.0, 1.0]).is_err());
        assert!(b.check(&[0.5, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn conformal_metric_values() {
        let chart = Chart::<f64>::euclidean("r3", 3);
        let g = MetricField::euclidean(chart.clone());
        let u = ScalarField::new(chart, |x| x[0].clone());
        let gc = g.conformal(&u);
        let v = gc.value(&[0.5, 0.0, 0.0]);
        assert!((v.at2(1, 1) - 1.0f64.exp()).abs() < 1e-14);
        assert_eq!(*v.at2(0, 1), 0.0);
    }
}
