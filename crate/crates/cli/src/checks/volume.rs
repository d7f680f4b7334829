//! Sign of the volume second variation at σ₂-critical balls along
//! transverse-traceless directions, and its constrained-path oracle.

use super::{backgrounds, spectral::certified_radius, Background, Check, Family};
use crate::config::{ConfigError, SuiteConfig};
use crate::report::Record;
use sigma2_core::domain::{BallRule, Domain};
use sigma2_core::field::{Support, SymTensorField};
use sigma2_core::models::{potential, sample_ball_points, tt_bump, GeodesicBall, ModelKind};
use sigma2_core::spectral::{constrained_volume_oracle, ConstraintOptions, ConstraintProjector};
use sigma2_core::variations::{volume_second_variation_tt, OracleOptions};
use sigma2_core::{Error, Result};
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

/// Largest support radius of the bumps in chart coordinates.
const SUPPORT: f64 = 0.3;
/// Sample points fixing the normalization `max|h| = 1`, independent of the quadrature.
const NORMALIZATION_POINTS: usize = 512;
const ORACLE: OracleOptions<f64> = OracleOptions { step: 4e-3, floor: 5e-4, max_relative_error: 1e-3 };

pub(super) fn checks(cfg: &Arc<SuiteConfig>, family: Family) -> std::result::Result<Vec<Check>, ConfigError> {
    let defaults = [(ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
    let mut out = Vec::new();
    for bg in backgrounds(cfg, &defaults)? {
        if !bg.curved() {
            return Err(ConfigError(format!("model `{}` has no critical balls", bg.label)));
        }
        match family {
            Family::Volume => out.extend((0..cfg.samples.tt_bumps).map(|i| sign_check(cfg, bg.clone(), i))),
            Family::VolumeOracle => out.push(oracle_check(cfg, bg)),
            _ => unreachable!("not a volume family"),
        }
    }
    Ok(out)
}

fn rule(q: [usize; 3]) -> BallRule {
    BallRule::new(q[0], q[1], q[2])
}

/// The critical ball: a cap of radius π/4 in spheres, the largest certified
/// ball in hyperbolic space, unless a radius is configured.
fn ball(bg: &Background, cfg: &SuiteConfig, q: [usize; 3]) -> Result<GeodesicBall<f64>> {
    let radius = match (bg.radius, bg.kind()) {
        (Some(r), _) => r,
        (None, ModelKind::Sphere) => FRAC_PI_4 / bg.model.kappa.sqrt(),
        (None, _) => certified_radius(&bg.model, cfg.grid.cells)?
            .ok_or_else(|| Error::Certification(format!("no ball in {} carries the positivity certificate", bg.label)))?,
    };
    GeodesicBall::new(&bg.model, radius, rule(q))
}

/// A transverse-traceless bump with `max|h| = 1` and the layered domain
/// resolving its support.
fn bump(ball: &GeodesicBall<f64>, seed: u64, q: [usize; 3]) -> Result<(SymTensorField<f64>, Domain<f64>)> {
    let n = ball.dim();
    let s = SUPPORT.min(0.7 * ball.chart_radius);
    let h = tt_bump(&ball.model, &Support { center: vec![0.0; n], radius: s }, seed)?;
    let size = sample_ball_points(n, s, NORMALIZATION_POINTS, 0x5ca1e).iter().fold(0.0f64, |a, p| a.max(h.value(p).max_abs()));
    let dom = Domain::ball_layers(vec![0.0; n], &[s, ball.chart_radius], rule(q));
    Ok((h.scaled(1.0 / size), dom))
}

fn refined(q: [usize; 3]) -> [usize; 3] {
    [q[0] + 4, q[1] + 4, q[2] + 8]
}

fn sign_check(cfg: &Arc<SuiteConfig>, bg: Background, i: usize) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}/bump{i}", Family::Volume.prefix(), bg.label);
    Check::new(Family::Volume, format!("{}/bump{i}", bg.label), move || {
        let q = cfg.grid.quadrature;
        let b = ball(&bg, &cfg, q)?;
        let f = potential(&b)?;
        let seed = cfg.seed_for(&name);
        let (h, dom) = bump(&b, seed, q)?;
        let (_, fine) = bump(&b, seed, refined(q))?;
        let coarse = volume_second_variation_tt(&b, &f, &h, &dom)?;
        let v = volume_second_variation_tt(&b, &f, &h, &fine)?;
        let margin = (v - coarse).abs();
        let formula = if bg.kind() == ModelKind::Sphere {
            "V″(0) > 0 on TT directions at a spherical cap"
        } else {
            "V″(0) > 0 on TT directions at a certified hyperbolic ball"
        };
        Ok(vec![Record::positive(&name, formula, v, margin + cfg.tolerances.sign_margin)].into())
    })
}

fn oracle_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::VolumeOracle.prefix(), bg.label);
    Check::new(Family::VolumeOracle, bg.label.clone(), move || {
        let q = cfg.grid.quadrature;
        let b = ball(&bg, &cfg, q)?;
        let f = potential(&b)?;
        let (h, dom) = bump(&b, cfg.seed_for(&name), q)?;
        let analytic = volume_second_variation_tt(&b, &f, &h, &dom)?;
        let n = b.dim() as f64;
        let k = bg.model.kappa;
        let target = n * (n - 1.0) * k * k / 8.0;
        let proj = ConstraintProjector::new(&b, &h, dom, target, ConstraintOptions::default())?;
        let oracle = constrained_volume_oracle(&proj, ORACLE)?;
        Ok(vec![Record::relative(&name, "V″(0) against the σ₂-constrained path oracle", analytic, oracle.value, cfg.tolerances.volume_oracle)].into())
    })
}
