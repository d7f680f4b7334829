use proptest::prelude::*;
use sigma2_core::chartcalc::{bianchi_residual, curvature_pack, Geometry};
use sigma2_core::field::{MetricField, ScalarField, SymTensorField};
use sigma2_core::models::{make_model, sample_ball_points, ModelKind};
use sigma2_core::samples::{random_metric, random_scalar, random_tensor};
use sigma2_core::sigma_ops::{
    adjoint_divergence_residual, conformal_sigma2, divergence_t1, lambda_adjoint, lambda_lin, lambda_star_one,
    schouten_pack, sigma2, t_operator, t_operator_divergence_form,
};

fn background(which: u8, n: usize) -> MetricField<f64> {
    let kind = match which % 3 {
        0 => ModelKind::Flat,
        1 => ModelKind::Sphere,
        _ => ModelKind::Hyperbolic,
    };
    let kappa = match kind {
        ModelKind::Sphere => 1.0,
        ModelKind::Hyperbolic => -1.0,
        _ => 0.0,
    };
    make_model(kind, kappa, n).unwrap().metric
}

fn setup(which: u8, n: usize, seed: u64) -> (MetricField<f64>, Vec<f64>) {
    let g = random_metric(&background(which, n), seed, 0.05);
    let p = sample_ball_points(n, 0.4, 1, seed ^ 0x5eed).remove(0);
    (g, p)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn riemann_symmetries_and_bianchi(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let pack = curvature_pack(&g, &p, 0).unwrap();
        let scale = 1f64.max(pack.riemann.max_abs());
        prop_assert!(pack.symmetry_defect() / scale < 1e-12);
        prop_assert!(bianchi_residual(&g, &p).unwrap() / scale < 1e-10);
    }

    #[test]
    fn trace_of_adjoint_is_minus_t(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let f = random_scalar(&g.chart, seed.wrapping_add(1), 1.0);
        let ls = lambda_adjoint(&g, &f, &p).unwrap();
        let fr = Geometry::at(&g, &p, 2).unwrap().frame();
        let tr = fr.trace(&ls);
        let t = t_operator(&g, &f, &p).unwrap();
        prop_assert!(rel(tr, -t) < 1e-9, "{} vs {}", tr, -t);
    }

    #[test]
    fn newton_tensor_is_divergence_free(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let scale = 1f64.max(curvature_pack(&g, &p, 0).unwrap().riemann.max_abs());
        prop_assert!(divergence_t1(&g, &p).unwrap().max_abs() / scale < 1e-10);
    }

    #[test]
    fn divergence_and_nondivergence_forms_of_t_agree(which in 0u8..3, seed in any::<u64>()) {
        let (g, p) = setup(which, 3, seed);
        let u = random_scalar(&g.chart, seed.wrapping_add(2), 1.0);
        let a = t_operator(&g, &u, &p).unwrap();
        let b = t_operator_divergence_form(&g, &u, &p).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn conformal_directions_linearize_to_minus_t(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let u = random_scalar(&g.chart, seed.wrapping_add(3), 1.0);
        let h = SymTensorField::conformal(&u, &g);
        let a = lambda_lin(&g, &h, &p).unwrap();
        let b = -t_operator(&g, &u, &p).unwrap();
        prop_assert!(rel(a, b) < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn adjoint_divergence_identity(which in 0u8..3, seed in any::<u64>()) {
        let (g, p) = setup(which, 3, seed);
        let f = random_scalar(&g.chart, seed.wrapping_add(4), 1.0);
        prop_assert!(adjoint_divergence_residual(&g, &f, &p).unwrap() < 1e-8);
    }

    #[test]
    fn expansion_of_adjoint_at_one(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let one = ScalarField::constant(g.chart.clone(), 1.0);
        let direct = lambda_adjoint(&g, &one, &p).unwrap();
        let expanded = lambda_star_one(&g, &p).unwrap().value;
        let scale = 1f64.max(direct.max_abs());
        prop_assert!(direct.sub(&expanded).max_abs() / scale < 1e-9);
        let fr = Geometry::at(&g, &p, 2).unwrap().frame();
        prop_assert!(rel(fr.trace(&direct), -2.0 * fr.sigma2()) < 1e-9);
    }

    #[test]
    fn sigma2_is_conformally_covariant_under_scaling(which in 0u8..3, n in 3usize..6, seed in any::<u64>(), c in 0.3f64..3.0) {
        let (g, p) = setup(which, n, seed);
        let a = sigma2(&g.scaled(c * c), &p).unwrap();
        let b = sigma2(&g, &p).unwrap() / c.powi(4);
        prop_assert!(rel(a, b) < 1e-11);
    }

    #[test]
    fn eigenvalue_and_curvature_forms_of_sigma2_agree(which in 0u8..3, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let s = schouten_pack(&g, &p).unwrap();
        prop_assert!(rel(s.sigma[1], s.sigma2_closed) < 1e-10);
        let fr = Geometry::at(&g, &p, 2).unwrap().frame();
        prop_assert!(rel(s.sigma[0], fr.sigma1()) < 1e-10);
    }

    #[test]
    fn conformal_law_matches_direct_curvature(which in 0u8..2, n in 3usize..6, seed in any::<u64>()) {
        let (g, p) = setup(which, n, seed);
        let u = random_scalar(&g.chart, seed.wrapping_add(5), 0.5);
        let law = conformal_sigma2(&g, &u, &p).unwrap().value;
        let direct = sigma2(&g.conformal(&u), &p).unwrap();
        prop_assert!(rel(law, direct) < 1e-8, "{} vs {}", law, direct);
    }

    #[test]
    fn linearization_is_linear(which in 0u8..3, seed in any::<u64>(), s in -2.0f64..2.0) {
        let (g, p) = setup(which, 3, seed);
        let h = random_tensor(&g.chart, seed.wrapping_add(6), 1.0);
        let k = random_tensor(&g.chart, seed.wrapping_add(7), 1.0);
        let a = lambda_lin(&g, &h.plus(&k.scaled(s)), &p).unwrap();
        let b = lambda_lin(&g, &h, &p).unwrap() + s * lambda_lin(&g, &k, &p).unwrap();
        prop_assert!(rel(a, b) < 1e-11);
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn einstein_displays_on_space_forms(which in 1u8..3, n in 3usize..6, seed in any::<u64>()) {
        let g = background(which, n);
        let p = sample_ball_points(n, 0.4, 1, seed).remove(0);
        let fr = Geometry::at(&g, &p, 2).unwrap().frame();
        let (r, nf) = (fr.scal, n as f64);
        prop_assert!(rel(fr.sigma2(), r * r / (8.0 * nf * (nf - 1.0))) < 1e-12);
        let u = random_scalar(&g.chart, seed, 1.0);
        let geo = Geometry::at(&g, &p, 2).unwrap();
        let ul = geo.local0(&u).unwrap();
        let expected = r / (4.0 * nf) * ul.lap(&fr) + r * r / (4.0 * nf * (nf - 1.0)) * ul.v;
        prop_assert!(rel(t_operator(&g, &u, &p).unwrap(), expected) < 1e-10);
    }
}

#[test]
fn space_form_sigma2_constants() {
    for n in 3..=5 {
        let nf = n as f64;
        for (kind, kappa) in [(ModelKind::Sphere, 1.0), (ModelKind::Hyperbolic, -1.0)] {
            let m = make_model::<f64>(kind, kappa, n).unwrap();
            for p in sample_ball_points(n, 0.5, 20, n as u64) {
                let s = sigma2(&m.metric, &p).unwrap();
                assert!(rel(s, nf * (nf - 1.0) / 8.0) < 1e-12, "{kind} n={n}: {s}");
            }
        }
    }
}
