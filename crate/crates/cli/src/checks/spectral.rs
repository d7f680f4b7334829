//! Dirichlet spectra of `−𝒯_g` and of the Laplacian on geodesic balls,
//! the hyperbolic positivity certificate, and plot data.

use super::{backgrounds, Background, Check, Family, Outcome, Plot};
use crate::config::{ConfigError, SuiteConfig};
use crate::report::Record;
use sigma2_core::models::{GeodesicBall, ModelKind, ModelSpace};
use sigma2_core::spectral::{
    angular_spectrum, dirichlet_eigen_tg_with, lambda_sweep, largest_certified_radius, positivity_quadratic, positivity_root,
    rough_laplacian_lambda1_with, t_operator_coefficients, DiscreteOperator, EigenEstimate, SweepOperator,
};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

/// Radii per sweep.
pub const SWEEP_POINTS: usize = 16;
/// Cap radii as fractions of the hemisphere radius.
const CAP_FRACTIONS: [f64; 4] = [1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9];
const GRID_LEVELS: [usize; 6] = [16, 32, 64, 128, 256, 512];
const ANGULAR_CELLS: usize = 64;

pub(super) fn checks(cfg: &Arc<SuiteConfig>) -> Result<Vec<Check>, ConfigError> {
    let defaults = [(ModelKind::Sphere, 3), (ModelKind::Hyperbolic, 3)];
    let mut out = Vec::new();
    for bg in backgrounds(cfg, &defaults)? {
        match bg.kind() {
            ModelKind::Sphere => {
                out.push(hemisphere_check(cfg, bg.clone()));
                let half = FRAC_PI_2 / bg.model.kappa.sqrt();
                let radii: Vec<f64> = match bg.radius {
                    Some(r) => vec![r],
                    None => CAP_FRACTIONS.iter().map(|c| c * half).collect(),
                };
                for r in radii {
                    out.push(cap_check(cfg, bg.clone(), r));
                }
                out.push(operator_check(cfg, bg));
            }
            ModelKind::Hyperbolic => {
                out.push(hyperbolic_check(cfg, bg.clone()));
                out.push(certificate_check(cfg, bg));
            }
            _ => return Err(ConfigError(format!("model `{}` has no radial spectral problem", bg.label))),
        }
    }
    Ok(out)
}

fn order_record(name: String, est: &EigenEstimate<f64>, tol: f64) -> Record {
    Record::new(name, "second-order convergence of the radial discretization", est.order, 2.0, 2.0 - est.order, tol)
}

fn hemisphere_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}/hemisphere", Family::Spectral.prefix(), bg.label);
    Check::new(Family::Spectral, format!("{}/hemisphere", bg.label), move || {
        let half = FRAC_PI_2 / bg.model.kappa.sqrt();
        let ball = GeodesicBall::new(&bg.model, half, Default::default())?;
        let est = dirichlet_eigen_tg_with(&ball, cfg.grid.cells)?;
        let t = &cfg.tolerances;
        let mut rows = Vec::new();
        for &m in &GRID_LEVELS {
            let (a, c, _, _) = t_operator_coefficients(&bg.model)?;
            let lam = DiscreteOperator::radial(&bg.model, half, m, a, c, 0)?.smallest_eigenpair()?.0;
            rows.push(vec![m as f64, half / m as f64, lam.abs()]);
        }
        let plot = Plot {
            file: format!("residual_vs_grid_{}.csv", bg.label),
            columns: vec!["cells [count]".into(), "mesh [geodesic length]".into(), "abs_lambda1_error [kappa]".into()],
            rows,
        };
        Ok(Outcome {
            records: vec![
                Record::new(format!("{name}/lambda1"), "λ₁(−𝒯) = 0 on the hemisphere (eigenfunction cos r)", est.value, 0.0, est.value.abs(), t.hemisphere),
                order_record(format!("{name}/order"), &est, t.convergence_order),
            ],
            plots: vec![plot],
        })
    })
}

fn cap_check(cfg: &Arc<SuiteConfig>, bg: Background, radius: f64) -> Check {
    let cfg = cfg.clone();
    let label = format!("{}/cap_r{radius:.6}", bg.label);
    let name = format!("{}/{label}", Family::Spectral.prefix());
    Check::new(Family::Spectral, &label, move || {
        let ball = GeodesicBall::new(&bg.model, radius, Default::default())?;
        let est = dirichlet_eigen_tg_with(&ball, cfg.grid.cells)?;
        let t = &cfg.tolerances;
        Ok(vec![
            Record::positive(format!("{name}/lambda1"), "certified λ₁(−𝒯) > 0 on caps smaller than a hemisphere", est.value, 3.0 * est.error_bar + t.sign_margin),
            order_record(format!("{name}/order"), &est, t.convergence_order),
        ]
        .into())
    })
}

/// Symmetry of the assembled operator, radial lowest mode, and the λ₁ sweep.
fn operator_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::Spectral.prefix(), bg.label);
    Check::new(Family::Spectral, format!("{}/operator", bg.label), move || {
        let half = FRAC_PI_2 / bg.model.kappa.sqrt();
        let r = 0.5 * half;
        let (a, c, _, _) = t_operator_coefficients(&bg.model)?;
        let defect = DiscreteOperator::radial(&bg.model, r, cfg.grid.cells, a, c, 0)?.self_adjointness_defect();
        let ball = GeodesicBall::new(&bg.model, r, Default::default())?;
        let modes = angular_spectrum(&ball, ANGULAR_CELLS, 3)?;
        let t = &cfg.tolerances;
        let radii: Vec<f64> = (1..=SWEEP_POINTS).map(|k| half * k as f64 / SWEEP_POINTS as f64).collect();
        Ok(Outcome {
            records: vec![
                Record::new(format!("{name}/self_adjoint"), "weighted symmetry of the discrete −𝒯", defect, 0.0, defect, t.self_adjointness),
                Record::positive(format!("{name}/radial_mode_01"), "λ(ℓ=1) > λ(ℓ=0)", modes[1] - modes[0], t.sign_margin),
                Record::positive(format!("{name}/radial_mode_12"), "λ(ℓ=2) > λ(ℓ=1)", modes[2] - modes[1], t.sign_margin),
            ],
            plots: vec![sweep_plot(&bg.model, &bg.label, &radii, cfg.grid.cells)?],
        })
    })
}

fn hyperbolic_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}", Family::Spectral.prefix(), bg.label);
    Check::new(Family::Spectral, format!("{}/balls", bg.label), move || {
        let k = -bg.model.kappa;
        let r = bg.radius.unwrap_or(1.0 / k.sqrt());
        let ball = GeodesicBall::new(&bg.model, r, Default::default())?;
        let t = &cfg.tolerances;
        let lap = rough_laplacian_lambda1_with(&ball, cfg.grid.cells)?;
        let tg = dirichlet_eigen_tg_with(&ball, cfg.grid.cells)?;
        let mut records = vec![
            Record::positive(format!("{name}/t_lambda1"), "certified λ₁(𝒯) > 0 on hyperbolic balls", tg.value, 3.0 * tg.error_bar + t.sign_margin),
            order_record(format!("{name}/t_order"), &tg, t.convergence_order),
        ];
        if bg.model.dim() == 3 {
            let exact = k + (PI / r).powi(2);
            records.push(Record::relative(format!("{name}/laplacian_lambda1"), "λ₁(−Δ) = |κ| + (π/R)² on balls in H³", lap.value, exact, t.eigenvalue));
        }
        let radii: Vec<f64> = (1..=SWEEP_POINTS).map(|j| 2.0 * r * j as f64 / SWEEP_POINTS as f64).collect();
        Ok(Outcome { records, plots: vec![sweep_plot(&bg.model, &bg.label, &radii, cfg.grid.cells)?] })
    })
}

fn certificate_check(cfg: &Arc<SuiteConfig>, bg: Background) -> Check {
    let cfg = cfg.clone();
    let name = format!("{}/{}/certified_radius", Family::Spectral.prefix(), bg.label);
    Check::new(Family::Spectral, format!("{}/certified_radius", bg.label), move || {
        let k = -bg.model.kappa;
        let r = certified_radius(&bg.model, cfg.grid.cells)?.unwrap_or(0.0);
        let n = bg.model.dim();
        let record = if n == 3 {
            // λ₁/|κ| = 1 + π²/(|κ|R²) meets the larger root 5 at R = π/(2√|κ|)
            let root: f64 = positivity_root(n);
            let exact = PI / ((root - 1.0) * k).sqrt();
            Record::relative(&name, "largest ball with q(λ₁) > 0 above the larger root", r, exact, cfg.tolerances.eigenvalue)
        } else {
            Record::positive(&name, "some ball carries the q(λ₁) certificate", r, cfg.tolerances.sign_margin)
        };
        Ok(vec![record].into())
    })
}

/// Largest hyperbolic ball radius carrying the positivity certificate.
pub(super) fn certified_radius(model: &ModelSpace<f64>, cells: usize) -> sigma2_core::Result<Option<f64>> {
    let k = (-model.kappa).sqrt();
    largest_certified_radius(model, 0.05 / k, 6.0 / k, cells)
}

/// λ₁ against the geodesic radius: `−𝒯` on spheres, the Laplacian and the
/// certificate polynomial on hyperbolic space.
pub fn sweep_plot(model: &ModelSpace<f64>, label: &str, radii: &[f64], cells: usize) -> sigma2_core::Result<Plot> {
    let k = model.kappa.abs();
    let n = model.dim();
    let (op, columns) = match model.kind {
        ModelKind::Sphere => (
            SweepOperator::T,
            vec!["radius [1/sqrt(kappa)]", "lambda1_minus_t [kappa^2]", "error_bar [kappa^2]", "order [1]"],
        ),
        _ => (
            SweepOperator::Laplacian,
            vec!["radius [1/sqrt(|kappa|)]", "lambda1_laplacian [|kappa|]", "error_bar [|kappa|]", "q_certificate [1]"],
        ),
    };
    let sweep = lambda_sweep(model, radii, cells, op)?;
    let rows = sweep
        .iter()
        .map(|(r, e)| {
            let last = if op == SweepOperator::T { e.order } else { positivity_quadratic(n, e.value / k) };
            vec![*r, e.value, e.error_bar, last]
        })
        .collect();
    Ok(Plot { file: format!("lambda_sweep_{label}.csv"), columns: columns.into_iter().map(String::from).collect(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Suite;

    #[test]
    fn spectral_suite_on_a_coarse_grid() {
        let mut cfg = SuiteConfig::new(Suite::Spectral);
        cfg.grid.cells = 64;
        let checks = crate::checks::registry(&cfg).unwrap();
        let (report, plots) = crate::checks::run(&cfg, &checks).unwrap();
        let get = |n: &str| report.records.iter().find(|r| r.name == n).unwrap_or_else(|| panic!("{n}"));
        assert!(get("spectral/sphere3/hemisphere/order").pass);
        assert!(get("spectral/sphere3/cap_r0.785398/lambda1").pass);
        assert!(get("spectral/hyperbolic3/t_lambda1").pass);
        assert!(get("spectral/sphere3/self_adjoint").pass);
        assert_eq!(plots.len(), 3);
        assert!(plots.iter().all(|p| p.rows.iter().all(|r| r.len() == p.columns.len())));
    }
}
