use sigma2_core::chartcalc::{DiffOps, Geometry};
use sigma2_core::domain::{BallRule, Domain};
use sigma2_core::field::{MetricField, ScalarField, SymTensorField};
use sigma2_core::jet::Jet;
use sigma2_core::models::{make_model, ModelKind};
use sigma2_core::samples::{random_metric, random_scalar, random_tensor};
use sigma2_core::sigma_ops::{lambda_adjoint, lambda_lin, t_operator};

const RHO: f64 = 0.5;

fn bump(x: &[Jet<f64>]) -> Jet<f64> {
    let r2 = x.iter().fold(x[0].zero_like(), |a, xi| a + xi.mul_ref(xi));
    r2.scale(-1.0 / (RHO * RHO)).add_scalar(1.0).powi(5)
}

fn compact_scalar(g: &MetricField<f64>, seed: u64) -> ScalarField<f64> {
    let u = random_scalar(&g.chart, seed, 1.0);
    ScalarField::new(g.chart.clone(), move |x| u.jet(x).mul_ref(&bump(x)))
}

fn compact_tensor(g: &MetricField<f64>, seed: u64) -> SymTensorField<f64> {
    let h = random_tensor(&g.chart, seed, 1.0);
    SymTensorField::new(g.chart.clone(), move |x| h.jet(x).times(&bump(x)))
}

fn backgrounds() -> Vec<MetricField<f64>> {
    let s3 = make_model::<f64>(ModelKind::Sphere, 1.0, 3).unwrap().metric;
    let h3 = make_model::<f64>(ModelKind::Hyperbolic, -1.0, 3).unwrap().metric;
    vec![random_metric(&s3, 21, 0.05), random_metric(&h3, 22, 0.05)]
}

fn domain() -> Domain<f64> {
    Domain::ball(vec![0.0; 3], RHO, BallRule::new(14, 12, 24))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

#[test]
fn delta_star_is_adjoint_of_delta() {
    let dom = domain();
    for (k, g) in backgrounds().iter().enumerate() {
        let alpha: Vec<ScalarField<f64>> = (0..3).map(|i| compact_scalar(g, 100 + 10 * k as u64 + i)).collect();
        let h = random_tensor(&g.chart, 7 + k as u64, 1.0);
        let v = dom
            .integrate_many(g, 2, |p| {
                let ops = DiffOps::new(g, p)?;
                let ds = ops.delta_star(&alpha)?;
                let a = sigma2_core::tensor::Tensor::from_fn(3, 1, |ix| alpha[ix[0]].value(p));
                Ok(vec![ops.frame.inner2(&ds, &h.value(p)), ops.frame.inner1(&a, &ops.divergence_neg(&h)?)])
            })
            .unwrap();
        assert!(rel(v[0], v[1]) < 1e-9, "{} vs {}", v[0], v[1]);
    }
}

#[test]
fn einstein_operator_is_symmetric() {
    let dom = domain();
    for (k, g) in backgrounds().iter().enumerate() {
        let h = compact_tensor(g, 30 + k as u64);
        let q = compact_tensor(g, 40 + k as u64);
        let v = dom
            .integrate_many(g, 2, |p| {
                let ops = DiffOps::new(g, p)?;
                let a = ops.frame.inner2(&ops.einstein_operator(&h)?, &q.value(p));
                let b = ops.frame.inner2(&h.value(p), &ops.einstein_operator(&q)?);
                Ok(vec![a, b])
            })
            .unwrap();
        assert!(rel(v[0], v[1]) < 1e-9, "{} vs {}", v[0], v[1]);
    }
}

#[test]
fn lambda_adjoint_is_formal_adjoint() {
    let dom = domain();
    for (k, g) in backgrounds().iter().enumerate() {
        let h = compact_tensor(g, 50 + k as u64);
        let f = random_scalar(&g.chart, 60 + k as u64, 1.0);
        let v = dom
            .integrate_many(g, 2, |p| {
                let fr = Geometry::at(g, p, 2)?.frame();
                let a = f.value(p) * lambda_lin(g, &h, p)?;
                let b = fr.inner2(&lambda_adjoint(g, &f, p)?, &h.value(p));
                Ok(vec![a, b])
            })
            .unwrap();
        assert!(rel(v[0], v[1]) < 1e-9, "{} vs {}", v[0], v[1]);
    }
}

#[test]
fn t_operator_is_self_adjoint() {
    let dom = domain();
    for (k, g) in backgrounds().iter().enumerate() {
        let u = compact_scalar(g, 70 + k as u64);
        let w = compact_scalar(g, 80 + k as u64);
        let v = dom
            .integrate_many(g, 2, |p| Ok(vec![w.value(p) * t_operator(g, &u, p)?, u.value(p) * t_operator(g, &w, p)?]))
            .unwrap();
        assert!(rel(v[0], v[1]) < 1e-9, "{} vs {}", v[0], v[1]);
    }
}
