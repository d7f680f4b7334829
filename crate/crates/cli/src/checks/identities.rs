//! Pointwise identities on seeded random metrics, σ₂ of space forms, and the
//! conformal transformation law.

use super::{background, backgrounds, rel, sample_seed, Background, Check, Family, Worst};
use crate::config::{ConfigError, SuiteConfig};
use sigma2_core::chartcalc::{bianchi_residual, curvature_pack, Geometry};
use sigma2_core::field::{MetricField, ScalarField, SymTensorField};
use sigma2_core::models::{sample_ball_points, ModelKind};
use sigma2_core::samples::{random_metric, random_scalar};
use sigma2_core::sigma_ops::{
    adjoint_divergence_residual, conformal_sigma2, divergence_t1, lambda_adjoint, lambda_lin, lambda_star_one, schouten_pack,
    sigma2, t_operator,
};
use sigma2_core::Result;
use std::sync::Arc;

const DEFAULTS: [(ModelKind, usize); 3] = [(ModelKind::Flat, 3), (ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
const METRIC_AMPLITUDE: f64 = 0.05;
const POINT_RADIUS: f64 = 0.4;

/// `(computed, expected, residual)` of one identity at one sample.
type Identity = fn(&MetricField<f64>, &[f64], u64) -> Result<(f64, f64, f64)>;

fn trace_adjoint(g: &MetricField<f64>, p: &[f64], seed: u64) -> Result<(f64, f64, f64)> {
    let f = random_scalar(&g.chart, seed, 1.0);
    let tr = Geometry::at(g, p, 2)?.frame().trace(&lambda_adjoint(g, &f, p)?);
    let t = -t_operator(g, &f, p)?;
    Ok((tr, t, rel(tr, t)))
}

fn newton_divergence(g: &MetricField<f64>, p: &[f64], _: u64) -> Result<(f64, f64, f64)> {
    let scale = 1f64.max(curvature_pack(g, p, 0)?.riemann.max_abs());
    let d = divergence_t1(g, p)?.max_abs();
    Ok((d, 0.0, d / scale))
}

fn conformal_direction(g: &MetricField<f64>, p: &[f64], seed: u64) -> Result<(f64, f64, f64)> {
    let u = random_scalar(&g.chart, seed, 1.0);
    let a = lambda_lin(g, &SymTensorField::conformal(&u, g), p)?;
    let b = -t_operator(g, &u, p)?;
    Ok((a, b, rel(a, b)))
}

fn adjoint_at_one(g: &MetricField<f64>, p: &[f64], _: u64) -> Result<(f64, f64, f64)> {
    let one = ScalarField::constant(g.chart.clone(), 1.0);
    let direct = lambda_adjoint(g, &one, p)?;
    let expanded = lambda_star_one(g, p)?.value;
    let d = direct.sub(&expanded).max_abs();
    Ok((expanded.max_abs(), direct.max_abs(), d / 1f64.max(direct.max_abs())))
}

fn adjoint_divergence(g: &MetricField<f64>, p: &[f64], seed: u64) -> Result<(f64, f64, f64)> {
    let f = random_scalar(&g.chart, seed, 1.0);
    let r = adjoint_divergence_residual(g, &f, p)?;
    Ok((r, 0.0, r))
}

fn sigma2_forms(g: &MetricField<f64>, p: &[f64], _: u64) -> Result<(f64, f64, f64)> {
    let s = schouten_pack(g, p)?;
    Ok((s.sigma[1], s.sigma2_closed, rel(s.sigma[1], s.sigma2_closed)))
}

fn bianchi(g: &MetricField<f64>, p: &[f64], _: u64) -> Result<(f64, f64, f64)> {
    let scale = 1f64.max(curvature_pack(g, p, 0)?.riemann.max_abs());
    let b = bianchi_residual(g, p)?;
    Ok((b, 0.0, b / scale))
}

const IDENTITIES: [(&str, &str, Identity); 7] = [
    ("trace_adjoint", "tr Λ*(f) = −𝒯(f)", trace_adjoint),
    ("newton_divergence", "div T₁ = 0", newton_divergence),
    ("conformal_direction", "Λ(ug) = −𝒯(u)", conformal_direction),
    ("adjoint_at_one", "expansion of Λ*(1)", adjoint_at_one),
    ("adjoint_divergence", "δΛ*(f) = ½ f dσ₂", adjoint_divergence),
    ("sigma2_forms", "σ₂ from eigenvalues = σ₂ from curvature", sigma2_forms),
    ("bianchi", "second Bianchi identity", bianchi),
];

/// Einstein displays on an unperturbed space form: `σ₂ = R²/(8n(n−1))` and
/// `𝒯u = (R/4n)Δu + R²/(4n(n−1)) u`.
fn einstein(g: &MetricField<f64>, p: &[f64], seed: u64) -> Result<[(f64, f64, f64); 2]> {
    let geo = Geometry::at(g, p, 2)?;
    let fr = geo.frame();
    let (r, n) = (fr.scal, p.len() as f64);
    let s = fr.sigma2();
    let s_expected = r * r / (8.0 * n * (n - 1.0));
    let u = random_scalar(&g.chart, seed, 1.0);
    let ul = geo.local0(&u)?;
    let t = t_operator(g, &u, p)?;
    let t_expected = r / (4.0 * n) * ul.lap(&fr) + r * r / (4.0 * n * (n - 1.0)) * ul.v;
    Ok([(s, s_expected, rel(s, s_expected)), (t, t_expected, rel(t, t_expected))])
}

pub(super) fn checks(cfg: &Arc<SuiteConfig>, family: Family) -> std::result::Result<Vec<Check>, ConfigError> {
    let mut out = Vec::new();
    match family {
        Family::Identity => {
            for bg in backgrounds(cfg, &DEFAULTS)? {
                for (id, formula, f) in IDENTITIES {
                    out.push(identity_check(cfg, &bg, id, formula, f));
                }
                if bg.curved() {
                    out.push(einstein_check(cfg, &bg));
                }
            }
        }
        Family::ModelConstant => {
            let models = if cfg.models.is_empty() {
                let mut v = Vec::new();
                for n in 3..=5 {
                    v.push(background(ModelKind::Sphere, n)?);
                    v.push(background(ModelKind::Hyperbolic, n)?);
                }
                v
            } else {
                backgrounds(cfg, &[])?.into_iter().filter(Background::curved).collect()
            };
            for bg in models {
                out.push(model_constant_check(cfg, bg));
            }
        }
        Family::ConformalLaw => {
            let defaults = [(ModelKind::Flat, 3), (ModelKind::Sphere, 3), (ModelKind::Sphere, 4)];
            for bg in backgrounds(cfg, &defaults)? {
                if matches!(bg.kind(), ModelKind::Flat | ModelKind::Sphere) {
                    out.push(conformal_law_check(cfg, bg));
                }
            }
        }
        _ => unreachable!("not an identities family"),
    }
    Ok(out)
}

fn identity_check(cfg: &Arc<SuiteConfig>, bg: &Background, id: &'static str, formula: &'static str, f: Identity) -> Check {
    let name = format!("{id}/{}", bg.label);
    let (cfg, bg) = (cfg.clone(), bg.clone());
    let full = format!("{}/{name}", Family::Identity.prefix());
    Check::new(Family::Identity, &name, move || {
        let n = bg.model.dim();
        let mut worst = Worst::new();
        for i in 0..cfg.samples.identities {
            let seed = sample_seed(&cfg, &full, i);
            let g = random_metric(&bg.model.metric, seed, METRIC_AMPLITUDE);
            let p = sample_ball_points(n, POINT_RADIUS, 1, seed ^ 0x5eed).remove(0);
            let (c, e, r) = f(&g, &p, seed.wrapping_add(1))?;
            worst.update(c, e, r);
        }
        Ok(vec![worst.record(&full, formula, cfg.tolerances.identity)].into())
    })
}

fn einstein_check(cfg: &Arc<SuiteConfig>, bg: &Background) -> Check {
    let (cfg, bg) = (cfg.clone(), bg.clone());
    let prefix = format!("{}/einstein", Family::Identity.prefix());
    Check::new(Family::Identity, format!("einstein/{}", bg.label), move || {
        let n = bg.model.dim();
        let mut worst = [Worst::new(), Worst::new()];
        for i in 0..cfg.samples.identities {
            let seed = sample_seed(&cfg, &format!("{prefix}/{}", bg.label), i);
            let p = sample_ball_points(n, POINT_RADIUS, 1, seed).remove(0);
            for (w, (c, e, r)) in worst.iter_mut().zip(einstein(&bg.model.metric, &p, seed)?) {
                w.update(c, e, r);
            }
        }
        let tol = cfg.tolerances.identity;
        Ok(vec![
            worst[0].record(&format!("{prefix}_sigma2/{}", bg.label), "σ₂ = R²/(8n(n−1)) on Einstein metrics", tol),
            worst[1].record(&format!("{prefix}_t/{}", bg.label), "𝒯u = (R/4n)Δu + R²u/(4n(n−1)) on Einstein metrics", tol),
        ]
        .into())
    })
}

fn model_constant_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::ModelConstant.prefix(), bg.label);
    Check::new(Family::ModelConstant, bg.label.clone(), move || {
        let n = bg.model.dim() as f64;
        let k = bg.model.kappa;
        let expected = n * (n - 1.0) * k * k / 8.0;
        let mut worst = Worst::new();
        for p in sample_ball_points(bg.model.dim(), 0.5, 20, cfg.seed_for(&name)) {
            let s = sigma2(&bg.model.metric, &p)?;
            worst.update(s, expected, (s - expected).abs() / expected.abs());
        }
        Ok(vec![worst.record(&name, "σ₂ = n(n−1)κ²/8 on space forms", cfg.tolerances.model_constant)].into())
    })
}

fn conformal_law_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::ConformalLaw.prefix(), bg.label);
    Check::new(Family::ConformalLaw, bg.label.clone(), move || {
        let n = bg.model.dim();
        let mut worst = Worst::new();
        for i in 0..cfg.samples.identities {
            let seed = sample_seed(&cfg, &name, i);
            let u = random_scalar(&bg.model.metric.chart, seed, 0.5);
            let p = sample_ball_points(n, POINT_RADIUS, 1, seed ^ 0x5eed).remove(0);
            let law = conformal_sigma2(&bg.model.metric, &u, &p)?.value;
            let direct = sigma2(&bg.model.metric.conformal(&u), &p)?;
            worst.update(law, direct, rel(law, direct));
        }
        Ok(vec![worst.record(&name, "σ₂(e^{2u}g) by the conformal law", cfg.tolerances.conformal_law)].into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Suite;

    #[test]
    fn identities_hold_on_a_few_samples() {
        let mut cfg = SuiteConfig::new(Suite::Identities);
        cfg.samples.identities = 3;
        let checks = crate::checks::registry(&cfg).unwrap();
        let (report, _) = crate::checks::run(&cfg, &checks).unwrap();
        assert!(report.all_pass(), "{}", report.to_table());
        assert!(report.records.iter().any(|r| r.name == "identity/einstein_t/hyperbolic3"));
    }

    #[test]
    fn broken_identity_is_caught() {
        let g = background(ModelKind::Sphere, 3).unwrap().model.metric;
        let p = [0.1, 0.2, 0.0];
        let (c, e, _) = trace_adjoint(&g, &p, 1).unwrap();
        assert!(rel(c, -e) > 1e-3);
    }
}
