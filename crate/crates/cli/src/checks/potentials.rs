//! Critical potentials of geodesic balls: `Λ*_g(f) = g` inside, `f = 0` on
//! the boundary.

use super::{background, from_spec, Background, Check, Family};
use crate::config::{ConfigError, SuiteConfig};
use crate::report::Record;
use sigma2_core::domain::BallRule;
use sigma2_core::models::{potential, GeodesicBall, ModelKind};
use sigma2_core::variations::potential_residual;
use std::f64::consts::PI;
use std::sync::Arc;

const SPHERE_RADII: [f64; 3] = [PI / 6.0, PI / 4.0, PI / 3.0];
const HYPERBOLIC_RADII: [f64; 3] = [0.5, 1.0, 2.0];

fn default_radii(kind: ModelKind) -> &'static [f64] {
    match kind {
        ModelKind::Sphere => &SPHERE_RADII,
        _ => &HYPERBOLIC_RADII,
    }
}

pub(super) fn checks(cfg: &Arc<SuiteConfig>) -> Result<Vec<Check>, ConfigError> {
    let mut out = Vec::new();
    if cfg.models.is_empty() {
        for kind in [ModelKind::Sphere, ModelKind::Hyperbolic] {
            for n in 3..=5 {
                let bg = background(kind, n)?;
                for &r in default_radii(kind) {
                    out.push(check(cfg, bg.clone(), r));
                }
            }
        }
    } else {
        for spec in &cfg.models {
            let bg = from_spec(spec)?;
            if !bg.curved() {
                return Err(ConfigError(format!("model `{}` has no ball potential", bg.label)));
            }
            match bg.radius {
                Some(r) => out.push(check(cfg, bg, r)),
                None => out.extend(default_radii(bg.kind()).iter().map(|&r| check(cfg, bg.clone(), r))),
            }
        }
    }
    Ok(out)
}

fn check(cfg: &Arc<SuiteConfig>, bg: Background, radius: f64) -> Check {
    let cfg = cfg.clone();
    let label = format!("{}/r{radius:.6}", bg.label);
    let name = format!("{}/{label}", Family::Potential.prefix());
    Check::new(Family::Potential, &label, move || {
        let q = cfg.grid.quadrature;
        let ball = GeodesicBall::new(&bg.model, radius, BallRule::new(q[0], q[1], q[2]))?;
        let f = potential(&ball)?;
        let interior = potential_residual(&bg.model.metric, &f, &ball.domain, cfg.samples.potential_points)?;
        let (nodes, _) = ball.domain.boundary_nodes(BallRule::new(1, q[1], q[2]))?;
        let edge = nodes.iter().fold(0.0f64, |a, p| a.max(f.value(p).abs()));
        Ok(vec![
            Record::new(format!("{name}/interior"), "Λ*(f) = g for the ball potential", interior, 0.0, interior, cfg.tolerances.potential),
            Record::new(format!("{name}/boundary"), "f = 0 on the ball boundary", edge, 0.0, edge, cfg.tolerances.potential_boundary),
        ]
        .into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModelSpec, Suite};

    #[test]
    fn quarter_sphere_potential_passes() {
        let mut cfg = SuiteConfig::new(Suite::Potentials);
        cfg.models.push(ModelSpec { kind: "sphere".into(), n: 3, kappa: None, radius: Some(PI / 4.0) });
        let checks = crate::checks::registry(&cfg).unwrap();
        assert_eq!(checks.len(), 1);
        let (report, _) = crate::checks::run(&cfg, &checks).unwrap();
        assert_eq!(report.records.len(), 2);
        assert!(report.all_pass(), "{}", report.to_table());
    }

    #[test]
    fn flat_model_is_a_config_error() {
        let mut cfg = SuiteConfig::new(Suite::Potentials);
        cfg.models.push(ModelSpec { kind: "flat".into(), n: 3, kappa: None, radius: Some(0.5) });
        assert!(crate::checks::registry(&cfg).is_err());
    }
}
