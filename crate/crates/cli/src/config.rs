//! Run configuration: a TOML file, overridden by command-line flags.

use serde::{Deserialize, Serialize};
use sigma2_core::models::ModelKind;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Variations,
    Potentials,
    Spectral,
    Volume,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Variations => "variations",
            Suite::Potentials => "potentials",
            Suite::Spectral => "spectral",
            Suite::Volume => "volume",
            Suite::All => "all",
        }
    }

    pub fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Identities, Suite::Variations, Suite::Potentials, Suite::Spectral, Suite::Volume],
            s => vec![s],
        }
    }
}

/// One model geometry, optionally with a ball radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    pub n: usize,
    /// Sectional curvature; defaults to `±1` by kind.
    pub kappa: Option<f64>,
    /// Geodesic ball radius.
    pub radius: Option<f64>,
}

impl ModelSpec {
    pub fn kind(&self) -> Result<ModelKind, ConfigError> {
        self.kind.parse().map_err(|e: sigma2_core::Error| ConfigError(e.to_string()))
    }

    pub fn kappa(&self) -> Result<f64, ConfigError> {
        Ok(self.kappa.unwrap_or(match self.kind()? {
            ModelKind::Sphere | ModelKind::Product => 1.0,
            ModelKind::Hyperbolic => -1.0,
            ModelKind::Flat => 0.0,
        }))
    }

    /// Short label such as `sphere3`.
    pub fn label(&self) -> String {
        format!("{}{}", self.kind.to_ascii_lowercase(), self.n)
    }
}

macro_rules! tolerances {
    ($($field:ident = $default:expr, $doc:literal;)*) => {
        /// Pass thresholds, one per check family; all overridable by name.
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Tolerances {
            $(#[doc = $doc] pub $field: f64,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Tolerances { $($field: $default,)* }
            }
        }

        impl Tolerances {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field),)*];

            pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
                match key {
                    $(stringify!($field) => self.$field = value,)*
                    other => return Err(ConfigError(format!("unknown tolerance `{other}`; known: {}", Self::KEYS.join(", ")))),
                }
                Ok(())
            }
        }
    };
}

tolerances! {
    identity = 1e-9, "Pointwise tensor identities (relative).";
    linearization = 1e-6, "Linearization against the first-order oracle.";
    second_variation = 1e-5, "σ₂″ against the second-order oracle.";
    constant_curvature = 1e-8, "Constant-curvature σ₂″ against the general formula.";
    conformal_law = 1e-8, "Conformal transformation law against direct evaluation.";
    conformal_invariance = 1e-6, "Drift of ∫σ₂ under conformal change in dimension four.";
    model_constant = 1e-12, "σ₂ of space forms (relative).";
    potential = 1e-9, "‖Λ*(f) − g‖∞ for ball potentials.";
    potential_boundary = 1e-12, "|f| on the ball boundary.";
    boundary_terms = 1e-12, "Integration-by-parts boundary terms.";
    hemisphere = 1e-6, "Extrapolated λ₁ on the hemisphere.";
    eigenvalue = 1e-6, "Extrapolated eigenvalues against closed forms (relative).";
    convergence_order = 0.1, "Shortfall of the measured grid order below 2.";
    self_adjointness = 1e-13, "Weighted asymmetry of assembled operators.";
    volume_oracle = 1e-3, "V″ against the constrained-path oracle.";
    sign_margin = 0.0, "Extra clearance required of sign checks beyond their certified margin.";
}

/// Sample counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub identities: usize,
    pub linearization: usize,
    pub second_variation: usize,
    pub tt_bumps: usize,
    pub potential_points: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples { identities: 1000, linearization: 200, second_variation: 100, tt_bumps: 5, potential_points: 64 }
    }
}

/// Discretization sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    /// Base cell count of radial eigenvalue solves (`N`, then `2N`, `4N`).
    pub cells: usize,
    /// Radial, polar and azimuthal quadrature nodes for volume integrals.
    pub quadrature: [usize; 3],
}

impl Default for Grid {
    fn default() -> Self {
        Grid { cells: sigma2_core::spectral::DEFAULT_CELLS, quadrature: [12, 10, 20] }
    }
}

/// Everything a run depends on; the seed fixes every random sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: Suite,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub grid: Grid,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl SuiteConfig {
    pub fn new(suite: Suite) -> Self {
        SuiteConfig {
            suite,
            seed: default_seed(),
            output: None,
            models: vec![],
            tolerances: Tolerances::default(),
            samples: Samples::default(),
            grid: Grid::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies a `key=value` tolerance override.
    pub fn override_tolerance(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("tolerance override `{spec}` is not key=value")))?;
        let v: f64 = value.trim().parse().map_err(|_| ConfigError(format!("tolerance `{key}` has non-numeric value `{value}`")))?;
        if !v.is_finite() {
            return Err(ConfigError(format!("tolerance `{key}` must be finite")));
        }
        self.tolerances.set(key.trim(), v)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for m in &self.models {
            m.kind()?;
            if m.n < 3 {
                return Err(ConfigError(format!("model `{}` needs n ≥ 3", m.label())));
            }
            if let Some(r) = m.radius {
                if !(r.is_finite() && r > 0.0) {
                    return Err(ConfigError(format!("model `{}` has invalid radius {r}", m.label())));
                }
            }
        }
        if self.grid.cells < 8 {
            return Err(ConfigError("grid.cells must be at least 8".into()));
        }
        if self.grid.quadrature.iter().any(|&q| q < 2) {
            return Err(ConfigError("grid.quadrature entries must be at least 2".into()));
        }
        Ok(())
    }

    /// Seed for one named check, so checks do not share random streams.
    pub fn seed_for(&self, name: &str) -> u64 {
        // FNV-1a, stable across platforms and releases
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_rejected() {
        assert!(SuiteConfig::from_toml("").is_err());
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = SuiteConfig::from_toml("suite = \"identities\"\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.samples.identities, 1000);
        assert_eq!(c.tolerances.linearization, 1e-6);
    }

    #[test]
    fn roundtrip() {
        let mut c = SuiteConfig::new(Suite::Spectral);
        c.models.push(ModelSpec { kind: "sphere".into(), n: 3, kappa: None, radius: Some(0.5) });
        c.override_tolerance("hemisphere=1e-5").unwrap();
        assert_eq!(SuiteConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn bad_overrides() {
        let mut c = SuiteConfig::new(Suite::All);
        assert!(c.override_tolerance("nonsense=1").is_err());
        assert!(c.override_tolerance("potential").is_err());
        assert!(c.override_tolerance("potential=abc").is_err());
        assert!(c.override_tolerance("potential=inf").is_err());
    }

    #[test]
    fn unknown_kind_and_keys() {
        assert!(SuiteConfig::from_toml("suite = \"all\"\n[[models]]\nkind = \"torus\"\nn = 3\n").is_err());
        assert!(SuiteConfig::from_toml("suite = \"all\"\nextra = 1\n").is_err());
        assert!(SuiteConfig::from_toml("suite = \"everything\"\n").is_err());
    }

    #[test]
    fn check_seeds_differ_and_are_stable() {
        let c = SuiteConfig::new(Suite::All);
        assert_ne!(c.seed_for("a"), c.seed_for("b"));
        assert_eq!(c.seed_for("a"), SuiteConfig::new(Suite::Identities).seed_for("a"));
    }
}
