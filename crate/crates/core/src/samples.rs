//! Seeded random fields for property checks.
//!
//! Every generator is a pure function of its seed. Fields are quadratic
//! polynomials in the chart coordinates plus one trigonometric mode, so all
//! jets are nontrivial to any order.

use crate::field::{Chart, MetricField, ScalarField, Support, SymTensorField};
use crate::jet::Jet;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Quadratic {
    c: f64,
    b: Vec<f64>,
    a: Vec<f64>,
    wave: f64,
    freq: Vec<f64>,
}

impl Quadratic {
    fn draw(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut u = || rng.gen_range(-1.0..1.0);
        Quadratic {
            c: u(),
            b: (0..n).map(|_| u()).collect(),
            a: (0..n * n).map(|_| u()).collect(),
            wave: u(),
            freq: (0..n).map(|_| u()).collect(),
        }
    }

    fn eval<T: Scalar>(&self, x: &[Jet<T>]) -> Jet<T> {
        let n = x.len();
        let mut acc = x[0].constant_like(lit(self.c));
        let mut phase = x[0].zero_like();
        for i in 0..n {
            acc = acc + x[i].scale(lit(self.b[i]));
            phase = phase + x[i].scale(lit(self.freq[i]));
            for j in i..n {
                acc = acc + x[i].mul_ref(&x[j]).scale(lit(self.a[i * n + j]));
            }
        }
        acc + phase.sin().scale(lit(self.wave))
    }
}

/// Random scalar field with values of size about `amplitude` near the origin.
pub fn random_scalar<T: Scalar>(chart: &Chart<T>, seed: u64, amplitude: f64) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = Quadratic::draw(chart.dim, &mut rng);
    ScalarField::new(chart.clone(), move |x| q.eval(x).scale(lit(amplitude)))
}

/// Random symmetric 2-tensor field with entries of size about `amplitude`.
pub fn random_tensor<T: Scalar>(chart: &Chart<T>, seed: u64, amplitude: f64) -> SymTensorField<T> {
    let n = chart.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<Quadratic> = (0..n * (n + 1) / 2).map(|_| Quadratic::draw(n, &mut rng)).collect();
    SymTensorField::from_components(chart.clone(), move |x, i, j| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let k = i * n - i * (i + 1) / 2 + j;
        comps[k].eval(x).scale(lit(amplitude))
    })
}

/// `g + amplitude·k` for a random `k`; positive definite on the unit ball for
/// `amplitude` below about `0.1·λ_min(g)`.
pub fn random_metric<T: Scalar>(background: &MetricField<T>, seed: u64, amplitude: f64) -> MetricField<T> {
    let k = random_tensor(&background.chart, seed, 1.0);
    background.perturbed(&k, lit(amplitude))
}

/// Random symmetric 2-tensor whose restriction to the tangent spaces of the
/// sphere `|x| = radius` vanishes: `(r² − |x|²)k + φ x⊗x + x⊗a + a⊗x`.
pub fn dirichlet_tensor<T: Scalar>(chart: &Chart<T>, radius: f64, seed: u64, amplitude: f64) -> SymTensorField<T> {
    let n = chart.dim;
    let k = random_tensor(chart, seed, amplitude);
    let phi = random_scalar(chart, seed ^ 0x9e37, amplitude);
    let a: Vec<ScalarField<T>> = (0..n).map(|i| random_scalar(chart, seed.wrapping_add(0x51 + i as u64), amplitude)).collect();
    SymTensorField::new(chart.clone(), move |x| {
        let r2 = x.iter().fold(x[0].zero_like(), |acc, xi| acc + xi.mul_ref(xi));
        let damp = r2.scale(-T::one()).add_scalar(lit(radius * radius));
        let kv = k.jet(x);
        let av: Vec<Jet<T>> = a.iter().map(|ai| ai.jet(x)).collect();
        let p = phi.jet(x);
        Tensor::from_fn(n, 2, |ix| {
            let (i, j) = (ix[0], ix[1]);
            kv.at2(i, j).mul_ref(&damp) + x[i].mul_ref(&x[j]).mul_ref(&p) + x[i].mul_ref(&av[j]) + x[j].mul_ref(&av[i])
        })
    })
}

/// `(1 − |x|²/ρ²)^k` inside the coordinate ball of radius `ρ` at the origin.
fn bump<T: Scalar>(x: &[Jet<T>], rho: f64, k: i32) -> Jet<T> {
    let r2 = x.iter().fold(x[0].zero_like(), |a, xi| a + xi.mul_ref(xi));
    r2.scale(lit(-1.0 / (rho * rho))).add_scalar(T::one()).powi(k)
}

fn origin_support<T: Scalar>(n: usize, rho: f64) -> Support<T> {
    Support { center: vec![T::zero(); n], radius: lit(rho) }
}

/// Random scalar field times a `C⁵` bump supported in `|x| < rho`.
pub fn compact_scalar<T: Scalar>(chart: &Chart<T>, rho: f64, seed: u64, amplitude: f64) -> ScalarField<T> {
    let u = random_scalar(chart, seed, amplitude);
    ScalarField::new(chart.clone(), move |x| u.jet(x).mul_ref(&bump(x, rho, 6))).with_support(origin_support(chart.dim, rho))
}

/// Random symmetric 2-tensor times a `C⁵` bump supported in `|x| < rho`.
pub fn compact_tensor<T: Scalar>(chart: &Chart<T>, rho: f64, seed: u64, amplitude: f64) -> SymTensorField<T> {
    let h = random_tensor(chart, seed, amplitude);
    SymTensorField::new(chart.clone(), move |x| h.jet(x).times(&bump(x, rho, 6))).with_support(origin_support(chart.dim, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartcalc::Geometry;

    #[test]
    fn same_seed_same_field() {
        let chart = Chart::<f64>::euclidean("x", 3);
        let a = random_tensor(&chart, 5, 0.3).value(&[0.1, 0.2, 0.3]);
        let b = random_tensor(&chart, 5, 0.3).value(&[0.1, 0.2, 0.3]);
        let c = random_tensor(&chart, 6, 0.3).value(&[0.1, 0.2, 0.3]);
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
        assert_eq!(a.at2(0, 2), a.at2(2, 0));
    }

    #[test]
    fn perturbed_metric_is_riemannian() {
        let chart = Chart::<f64>::euclidean("x", 4);
        let g = random_metric(&MetricField::euclidean(chart), 11, 0.05);
        assert!(Geometry::at(&g, &[0.3, -0.2, 0.1, 0.4], 2).is_ok());
    }

    #[test]
    fn compact_fields_vanish_on_support_boundary() {
        let chart = Chart::<f64>::euclidean("x", 3);
        let u = compact_scalar(&chart, 0.5, 2, 1.0);
        let h = compact_tensor(&chart, 0.5, 3, 1.0);
        let q = [0.3, 0.4, 0.0];
        let j = u.jet_at(&q, 4).unwrap();
        assert!(j.coefficients().iter().all(|c| c.abs() < 1e-12));
        assert!(h.value(&q).max_abs() < 1e-12);
        assert!(u.value(&[0.1, 0.0, 0.0]).abs() > 0.0);
    }
}
