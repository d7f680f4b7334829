//! Linearization and second variation of σ₂ against finite-difference
//! oracles, conformal invariance in dimension four, the sign of the 𝓕₂
//! second variation, and integration-by-parts boundary terms.

use super::{background, backgrounds, rel, sample_seed, Background, Check, Family, Worst};
use crate::config::{ConfigError, SuiteConfig};
use crate::report::Record;
use sigma2_core::domain::{BallRule, Domain};
use sigma2_core::field::{Support, SymTensorField};
use sigma2_core::models::{potential, sample_ball_points, tt_bump, GeodesicBall, ModelKind};
use sigma2_core::samples::{compact_scalar, dirichlet_tensor, random_metric, random_tensor};
use sigma2_core::sigma_ops::{lambda_lin, sigma2};
use sigma2_core::variations::{
    adjoint_boundary_terms, default_step, f2_second_variation_unitvol, path_derivative_oracle, relative_residual,
    sigma2_integral_conformal_drift, sigma2_second_variation, sigma2_second_variation_cc, ClosedModel, OracleOptions,
    VariationPath,
};
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

const DEFAULTS: [(ModelKind, usize); 3] = [(ModelKind::Flat, 3), (ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
const METRIC_AMPLITUDE: f64 = 0.05;
const POINT_RADIUS: f64 = 0.4;
/// Support radius of the transverse-traceless bumps in chart coordinates.
const TT_SUPPORT: f64 = 0.4;
/// Support radius and amplitude of the conformal factor on `S⁴`.
const CONFORMAL_SUPPORT: f64 = 0.6;
const CONFORMAL_AMPLITUDE: f64 = 0.4;

pub(super) fn checks(cfg: &Arc<SuiteConfig>, family: Family) -> Result<Vec<Check>, ConfigError> {
    let mut out = Vec::new();
    match family {
        Family::Linearization | Family::SecondVariation => {
            let bgs = backgrounds(cfg, &DEFAULTS)?;
            let total = if family == Family::Linearization { cfg.samples.linearization } else { cfg.samples.second_variation };
            let per = total.div_ceil(bgs.len().max(1));
            for bg in bgs {
                out.push(oracle_check(cfg, bg, family, per));
            }
        }
        Family::ConstantCurvature => {
            let defaults = [(ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
            for bg in backgrounds(cfg, &defaults)?.into_iter().filter(Background::curved) {
                out.push(constant_curvature_check(cfg, bg));
            }
        }
        Family::ConformalInvariance => out.push(conformal_invariance_check(cfg)?),
        Family::F2Negativity => {
            for bg in backgrounds(cfg, &[(ModelKind::Sphere, 3)])?.into_iter().filter(|b| b.kind() == ModelKind::Sphere) {
                for i in 0..cfg.samples.tt_bumps {
                    out.push(f2_check(cfg, bg.clone(), i));
                }
            }
        }
        Family::BoundaryTerms => {
            let defaults = [(ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
            for bg in backgrounds(cfg, &defaults)?.into_iter().filter(Background::curved) {
                out.push(boundary_check(cfg, bg));
            }
        }
        _ => unreachable!("not a variations family"),
    }
    Ok(out)
}

/// Seeded random metric, direction and point.
fn triple(bg: &Background, seed: u64) -> (sigma2_core::field::MetricField<f64>, SymTensorField<f64>, Vec<f64>) {
    let g = random_metric(&bg.model.metric, seed, METRIC_AMPLITUDE);
    let h = random_tensor(&g.chart, seed.wrapping_add(1), 1.0);
    let p = sample_ball_points(bg.model.dim(), POINT_RADIUS, 1, seed ^ 0x5eed).remove(0);
    (g, h, p)
}

fn oracle_check(cfg: &Arc<SuiteConfig>, bg: Background, family: Family, count: usize) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", family.prefix(), bg.label);
    Check::new(family, bg.label.clone(), move || {
        let mut worst = Worst::new();
        for i in 0..count {
            let (g, h, p) = triple(&bg, sample_seed(&cfg, &name, i));
            let opts = OracleOptions { step: default_step(&g, &p), ..OracleOptions::default() };
            let path = VariationPath::linear(&g, &h, None);
            let (analytic, order) = if family == Family::Linearization {
                (lambda_lin(&g, &h, &p)?, 1)
            } else {
                (sigma2_second_variation(&g, &h, &SymTensorField::zero(g.chart.clone()), &p)?, 2)
            };
            let oracle = path_derivative_oracle(|gt| sigma2(gt, &p), &path, order, opts)?;
            worst.update(analytic, oracle.value, relative_residual(analytic, oracle.value));
        }
        let (formula, tol) = if family == Family::Linearization {
            ("σ₂′ = Λ(h) against the first-order oracle", cfg.tolerances.linearization)
        } else {
            ("σ₂″ (h′ = 0) against the second-order oracle", cfg.tolerances.second_variation)
        };
        Ok(vec![worst.record(&name, formula, tol)].into())
    })
}

fn constant_curvature_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::ConstantCurvature.prefix(), bg.label);
    Check::new(Family::ConstantCurvature, bg.label.clone(), move || {
        let g = &bg.model.metric;
        let mut worst = Worst::new();
        for i in 0..cfg.samples.second_variation {
            let seed = sample_seed(&cfg, &name, i);
            let h = random_tensor(&g.chart, seed, 1.0);
            let h2 = random_tensor(&g.chart, seed.wrapping_add(1), 1.0);
            let p = sample_ball_points(bg.model.dim(), POINT_RADIUS, 1, seed ^ 0x5eed).remove(0);
            let cc = sigma2_second_variation_cc(g, bg.model.kappa, &h, &h2, &p)?;
            let general = sigma2_second_variation(g, &h, &h2, &p)?;
            worst.update(cc, general, rel(cc, general));
        }
        Ok(vec![worst.record(&name, "constant-curvature σ₂″ against the general formula", cfg.tolerances.constant_curvature)].into())
    })
}

fn conformal_invariance_check(cfg: &Arc<SuiteConfig>) -> Result<Check, ConfigError> {
    let cfg = cfg.clone();
    let bg = background(ModelKind::Sphere, 4)?;
    let name = format!("{}/{}", Family::ConformalInvariance.prefix(), bg.label);
    Ok(Check::new(Family::ConformalInvariance, bg.label.clone(), move || {
        let g = &bg.model.metric;
        let u = compact_scalar(&g.chart, CONFORMAL_SUPPORT, cfg.seed_for(&name), CONFORMAL_AMPLITUDE);
        let dom = Domain::ball(vec![0.0; 4], CONFORMAL_SUPPORT, BallRule::new(16, 10, 12));
        let drift = sigma2_integral_conformal_drift(g, &u, &dom)?;
        Ok(vec![Record::new(&name, "∫σ₂ dv is conformally invariant in dimension four", drift, 0.0, drift.abs(), cfg.tolerances.conformal_invariance)]
            .into())
    }))
}

fn rule(q: [usize; 3]) -> BallRule {
    BallRule::new(q[0], q[1], q[2])
}

fn f2_check(cfg: &Arc<SuiteConfig>, bg: Background, i: usize) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}/bump{i}", Family::F2Negativity.prefix(), bg.label);
    Check::new(Family::F2Negativity, format!("{}/bump{i}", bg.label), move || {
        let n = bg.model.dim();
        let support = Support { center: vec![0.0; n], radius: TT_SUPPORT };
        let h = tt_bump(&bg.model, &support, cfg.seed_for(&name))?;
        let dom = Domain::support_ball(&support, rule(cfg.grid.quadrature));
        let closed = ClosedModel::sphere(&bg.model)?;
        let v = f2_second_variation_unitvol(&closed, &bg.model.metric, &h, &dom)?.value;
        Ok(vec![Record::negative(&name, "unit-volume 𝓕₂″ on a transverse-traceless direction", v, cfg.tolerances.sign_margin)].into())
    })
}

fn boundary_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::BoundaryTerms.prefix(), bg.label);
    Check::new(Family::BoundaryTerms, bg.label.clone(), move || {
        let radius = bg.radius.unwrap_or(if bg.kind() == ModelKind::Sphere { FRAC_PI_4 } else { 1.0 });
        let seed = cfg.seed_for(&name);
        let ball = GeodesicBall::new(&bg.model, radius, BallRule::new(4, 4, 8))?;
        let f = potential(&ball)?;
        let g = random_metric(&bg.model.metric, seed, METRIC_AMPLITUDE);
        let h = dirichlet_tensor(&g.chart, ball.chart_radius, seed.wrapping_add(1), 1.0);
        let q = cfg.grid.quadrature;
        let terms = adjoint_boundary_terms(&g, &f, &h, &ball.domain, BallRule::new(1, q[1], 2 * q[2]))?;
        Ok(vec![Record::new(
            &name,
            "boundary terms of ∫fΛ(h) − ⟨Λ*f, h⟩ for f|∂ = 0 and h|T∂ = 0",
            terms.max_integrand,
            0.0,
            terms.max_integrand,
            cfg.tolerances.boundary_terms,
        )]
        .into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Suite;

    #[test]
    fn cheap_variation_checks_pass() {
        let mut cfg = SuiteConfig::new(Suite::Variations);
        cfg.samples.linearization = 3;
        cfg.samples.second_variation = 3;
        cfg.samples.tt_bumps = 1;
        let keep = |f: Family| f.suite() == Suite::Variations && f != Family::ConformalInvariance;
        let checks = crate::checks::registry_for(&cfg, keep).unwrap();
        let (report, _) = crate::checks::run(&cfg, &checks).unwrap();
        assert!(report.all_pass(), "{}", report.to_table());
        assert_eq!(report.records.iter().filter(|r| r.name.starts_with("linearization/")).count(), 3);
    }
}
