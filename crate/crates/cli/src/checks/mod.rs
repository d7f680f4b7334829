//! The check registry. Each check is an independent closure; suites run
//! their checks concurrently and the report is ordered by record name.

mod identities;
mod potentials;
mod spectral;
mod variations;
mod volume;

use crate::config::{ConfigError, ModelSpec, Suite, SuiteConfig};
use crate::report::{Environment, Record, Report};
use rayon::prelude::*;
use sigma2_core::models::{make_model, ModelKind, ModelSpace};
use std::collections::BTreeMap;
use std::sync::Arc;

pub use spectral::{sweep_plot, SWEEP_POINTS};

/// Which property a check exercises; every family belongs to one suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Identity,
    ModelConstant,
    ConformalLaw,
    Linearization,
    SecondVariation,
    ConstantCurvature,
    ConformalInvariance,
    F2Negativity,
    BoundaryTerms,
    Potential,
    Spectral,
    Volume,
    VolumeOracle,
}

impl Family {
    pub const ALL: [Family; 13] = [
        Family::Identity,
        Family::ModelConstant,
        Family::ConformalLaw,
        Family::Linearization,
        Family::SecondVariation,
        Family::ConstantCurvature,
        Family::ConformalInvariance,
        Family::F2Negativity,
        Family::BoundaryTerms,
        Family::Potential,
        Family::Spectral,
        Family::Volume,
        Family::VolumeOracle,
    ];

    pub fn suite(self) -> Suite {
        match self {
            Family::Identity | Family::ModelConstant | Family::ConformalLaw => Suite::Identities,
            Family::Linearization
            | Family::SecondVariation
            | Family::ConstantCurvature
            | Family::ConformalInvariance
            | Family::F2Negativity
            | Family::BoundaryTerms => Suite::Variations,
            Family::Potential => Suite::Potentials,
            Family::Spectral => Suite::Spectral,
            Family::Volume | Family::VolumeOracle => Suite::Volume,
        }
    }

    /// Record-name prefix.
    pub fn prefix(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::ModelConstant => "model_constant",
            Family::ConformalLaw => "conformal_law",
            Family::Linearization => "linearization",
            Family::SecondVariation => "second_variation",
            Family::ConstantCurvature => "constant_curvature",
            Family::ConformalInvariance => "conformal_invariance",
            Family::F2Negativity => "f2_negativity",
            Family::BoundaryTerms => "boundary_terms",
            Family::Potential => "potential",
            Family::Spectral => "spectral",
            Family::Volume => "volume",
            Family::VolumeOracle => "volume_oracle",
        }
    }
}

/// Tabular plot data written as CSV; column names carry units.
#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Plot {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}"))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub plots: Vec<Plot>,
}

impl From<Vec<Record>> for Outcome {
    fn from(records: Vec<Record>) -> Self {
        Outcome { records, plots: vec![] }
    }
}

type Job = Box<dyn Fn() -> sigma2_core::Result<Outcome> + Send + Sync>;

pub struct Check {
    pub name: String,
    pub family: Family,
    job: Job,
}

impl Check {
    pub fn new(family: Family, name: impl AsRef<str>, job: impl Fn() -> sigma2_core::Result<Outcome> + Send + Sync + 'static) -> Self {
        Check { name: format!("{}/{}", family.prefix(), name.as_ref()), family, job: Box::new(job) }
    }

    pub fn run(&self) -> sigma2_core::Result<Outcome> {
        (self.job)()
    }
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check").field("name", &self.name).field("family", &self.family).finish()
    }
}

/// A check that raised a numerical error instead of producing records.
#[derive(Debug, thiserror::Error)]
#[error("numerical failure in check `{check}`: {error}")]
pub struct RunFailure {
    pub check: String,
    pub error: sigma2_core::Error,
}

/// All checks of the configured suite.
pub fn registry(cfg: &SuiteConfig) -> Result<Vec<Check>, ConfigError> {
    let suites = cfg.suite.members();
    registry_for(cfg, |f| suites.contains(&f.suite()))
}

/// Checks of the families accepted by `keep`.
pub fn registry_for(cfg: &SuiteConfig, keep: impl Fn(Family) -> bool) -> Result<Vec<Check>, ConfigError> {
    cfg.validate()?;
    let cfg = Arc::new(cfg.clone());
    let mut out = Vec::new();
    for family in Family::ALL.into_iter().filter(|&f| keep(f)) {
        out.extend(match family.suite() {
            Suite::Identities => identities::checks(&cfg, family)?,
            Suite::Variations => variations::checks(&cfg, family)?,
            Suite::Potentials => potentials::checks(&cfg)?,
            Suite::Spectral => spectral::checks(&cfg)?,
            Suite::Volume => volume::checks(&cfg, family)?,
            Suite::All => unreachable!("families belong to concrete suites"),
        });
    }
    Ok(out)
}

/// Runs the checks concurrently and assembles the report.
pub fn run(cfg: &SuiteConfig, checks: &[Check]) -> Result<(Report, Vec<Plot>), RunFailure> {
    let outcomes: Vec<Result<Outcome, RunFailure>> = checks
        .par_iter()
        .map(|c| c.run().map_err(|error| RunFailure { check: c.name.clone(), error }))
        .collect();
    let mut records = Vec::new();
    let mut plots = Vec::new();
    for o in outcomes {
        let o = o?;
        records.extend(o.records);
        plots.extend(o.plots);
    }
    plots.sort_by(|a, b| a.file.cmp(&b.file));
    Ok((Report::new(environment(cfg), records), plots))
}

pub fn environment(cfg: &SuiteConfig) -> Environment {
    let mut grids = BTreeMap::new();
    grids.insert("cells".to_string(), serde_json::json!(cfg.grid.cells));
    grids.insert("quadrature".to_string(), serde_json::json!(cfg.grid.quadrature));
    grids.insert("samples".to_string(), serde_json::to_value(&cfg.samples).expect("samples serialize"));
    let timestamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Environment { version: env!("CARGO_PKG_VERSION").to_string(), suite: cfg.suite.name().to_string(), seed: cfg.seed, grids, timestamp }
}

/// A model geometry together with its label and an optional ball radius.
#[derive(Clone, Debug)]
pub struct Background {
    pub label: String,
    pub model: ModelSpace<f64>,
    pub radius: Option<f64>,
}

impl Background {
    pub fn kind(&self) -> ModelKind {
        self.model.kind
    }

    pub fn curved(&self) -> bool {
        matches!(self.model.kind, ModelKind::Sphere | ModelKind::Hyperbolic)
    }
}

pub(crate) fn background(kind: ModelKind, n: usize) -> Result<Background, ConfigError> {
    let kappa = match kind {
        ModelKind::Hyperbolic => -1.0,
        ModelKind::Flat => 0.0,
        _ => 1.0,
    };
    let spec = ModelSpec { kind: kind.to_string(), n, kappa: Some(kappa), radius: None };
    from_spec(&spec)
}

pub fn from_spec(spec: &ModelSpec) -> Result<Background, ConfigError> {
    let model = make_model(spec.kind()?, spec.kappa()?, spec.n).map_err(|e| ConfigError(format!("model `{}`: {e}", spec.label())))?;
    Ok(Background { label: spec.label(), model, radius: spec.radius })
}

/// The configured models, or `defaults` when none are given.
pub(crate) fn backgrounds(cfg: &SuiteConfig, defaults: &[(ModelKind, usize)]) -> Result<Vec<Background>, ConfigError> {
    if cfg.models.is_empty() {
        defaults.iter().map(|&(k, n)| background(k, n)).collect()
    } else {
        cfg.models.iter().map(from_spec).collect()
    }
}

/// Worst residual over a sample set, keeping the values that produced it;
/// a NaN residual is sticky.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Worst {
    pub computed: f64,
    pub expected: f64,
    pub residual: f64,
}

impl Worst {
    pub fn new() -> Self {
        Worst { computed: 0.0, expected: 0.0, residual: 0.0 }
    }

    pub fn update(&mut self, computed: f64, expected: f64, residual: f64) {
        if self.residual.is_nan() {
            return;
        }
        if residual.is_nan() || residual > self.residual {
            *self = Worst { computed, expected, residual };
        }
    }

    pub fn record(&self, name: &str, formula: &str, tolerance: f64) -> Record {
        Record::new(name, formula, self.computed, self.expected, self.residual, tolerance)
    }
}

/// `|a − b| / max(1, |a|, |b|)`.
pub(crate) fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Per-sample seeds for a named check.
pub(crate) fn sample_seed(cfg: &SuiteConfig, name: &str, i: usize) -> u64 {
    cfg.seed_for(name).wrapping_add(i as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_keeps_largest_and_nan() {
        let mut w = Worst::new();
        w.update(1.0, 1.0, 1e-3);
        w.update(2.0, 2.0, 1e-4);
        assert_eq!(w.computed, 1.0);
        w.update(f64::NAN, 0.0, f64::NAN);
        w.update(3.0, 3.0, 1.0);
        assert!(w.residual.is_nan());
        assert!(!w.record("x", "f", 1.0).pass);
    }

    #[test]
    fn every_family_has_a_concrete_suite_and_unique_prefix() {
        let mut prefixes: Vec<_> = Family::ALL.iter().map(|f| f.prefix()).collect();
        prefixes.sort();
        prefixes.dedup();
        assert_eq!(prefixes.len(), Family::ALL.len());
        assert!(Family::ALL.iter().all(|f| f.suite() != Suite::All));
    }

    #[test]
    fn registry_names_are_unique() {
        let cfg = SuiteConfig::new(Suite::All);
        let checks = registry(&cfg).unwrap();
        let mut names: Vec<_> = checks.iter().map(|c| c.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), checks.len());
        assert!(checks.iter().any(|c| c.family == Family::VolumeOracle));
    }

    #[test]
    fn plot_csv_has_header() {
        let p = Plot { file: "a.csv".into(), columns: vec!["x [1]".into(), "y [1]".into()], rows: vec![vec![1.0, 2.0]] };
        let text = p.to_csv();
        assert!(text.starts_with("x [1],y [1]\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
