//! Scenario configuration: TOML (or JSON) file, validated before any suite runs.

use std::fmt;
use std::path::Path;

use jetfield_core::algebra::{build_algebra, AlgebraKind, LieAlgebraData, MetricSpec};
use jetfield_core::dynamics::BaseMetric;
use jetfield_core::lattice::{Grid, Scheme};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Roundtrip,
    Residuals,
    GaugeCheck,
    Convergence,
    TriadMap,
    Multimomentum,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Identities,
        Suite::Roundtrip,
        Suite::Residuals,
        Suite::GaugeCheck,
        Suite::Convergence,
        Suite::TriadMap,
        Suite::Multimomentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Roundtrip => "roundtrip",
            Suite::Residuals => "residuals",
            Suite::GaugeCheck => "gauge-check",
            Suite::Convergence => "convergence",
            Suite::TriadMap => "triad-map",
            Suite::Multimomentum => "multimomentum",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Suite::Identities => "algebra antisymmetry, Jacobi and Ad-invariance; the quadratic spin identity",
            Suite::Roundtrip => "Legendre map, A-coordinates and the triad/spin dictionary are invertible",
            Suite::Residuals => "Hamilton-De Donder vs Euler-Lagrange residuals; action gradients",
            Suite::GaugeCheck => "gauge invariance of H, L and the pairing; curvature covariance slope",
            Suite::Convergence => "plane-wave residual decay at the scheme order",
            Suite::TriadMap => "Einstein-Cartan residuals as a linear image; spin connection of a triad",
            Suite::Multimomentum => "holonomic lift reproduces the field equations; closure conditions",
        }
    }

    /// Whether the suite needs `m = r = 3`.
    pub fn needs_3d(self) -> bool {
        matches!(self, Suite::TriadMap)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Order2,
    Order4,
}

impl SchemeName {
    pub fn scheme(self) -> Scheme {
        match self {
            SchemeName::Order2 => Scheme::Order2,
            SchemeName::Order4 => Scheme::Order4,
        }
    }
}

impl std::str::FromStr for SchemeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "order2" => Ok(SchemeName::Order2),
            "order4" => Ok(SchemeName::Order4),
            other => Err(format!("unknown scheme {other:?}, expected order2 or order4")),
        }
    }
}

/// Periodic lattice `n^m`. Spacing defaults to `2π/n`, the period of every
/// generated field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

fn default_m() -> usize {
    3
}

fn default_n() -> usize {
    8
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            m: default_m(),
            n: default_n(),
            h: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum AlgebraName {
    #[default]
    So3,
    So21,
    Abelian,
    Custom,
}

/// Lie algebra. `k` is the diagonal of the metric; `c` the structure
/// constants `C^μ_{ρν}` at `(μ r + ρ) r + ν` (custom only); `dim` the
/// dimension of an abelian algebra when `k` is omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    #[serde(default)]
    pub kind: AlgebraName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[default]
    Flat,
    Perturbed,
}

/// Base metric: `diag` everywhere, or `diag` plus a seeded smooth symmetric
/// perturbation of size `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
    #[serde(default = "default_metric_amplitude")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_metric_amplitude() -> f64 {
    0.1
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            kind: MetricKind::default(),
            diag: None,
            amplitude: default_metric_amplitude(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    #[default]
    Random,
    PlaneWave,
    PureGauge,
}

/// Potential used by the field-based suites. `plane-wave` replaces the grid
/// by `n × n × 2n` and the metric by `diag(1, 1, −1)`; `pure-gauge` is the
/// Maurer–Cartan form of the gauge generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default)]
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_kmax")]
    pub kmax: u32,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_kmax() -> u32 {
    1
}

fn default_amplitude() -> f64 {
    0.5
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            kind: FieldKind::default(),
            seed: None,
            kmax: default_kmax(),
            amplitude: default_amplitude(),
        }
    }
}

/// Band-limited gauge generator `ξ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_kmax")]
    pub kmax: u32,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: None,
            kmax: default_kmax(),
            amplitude: default_amplitude(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
}

fn default_grids() -> Vec<usize> {
    vec![8, 16, 32]
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { grids: default_grids() }
    }
}

/// How many random instances each suite draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Random lattice fields per check.
    #[serde(default = "default_sections")]
    pub sections: usize,
    /// Random point samples for pointwise identities.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Random directions for the action-gradient check.
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_sections() -> usize {
    4
}

fn default_points() -> usize {
    200
}

fn default_directions() -> usize {
    4
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sections: default_sections(),
            points: default_points(),
            directions: default_directions(),
        }
    }
}

/// Per-check tolerance overrides; unset entries use the built-in defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop55: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roundtrip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ec_map: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_family: Option<f64>,
}

/// Resolved tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub algebra: f64,
    pub prop55: f64,
    pub roundtrip: f64,
    pub dictionary: f64,
    pub residuals: f64,
    pub gradient: f64,
    pub invariance: f64,
    pub slope: f64,
    pub ec_map: f64,
    pub spin: f64,
    pub lift: f64,
    pub closure: f64,
    pub split_family: f64,
}

impl Tolerances {
    pub fn resolve(&self, scheme: SchemeName) -> Tol {
        let slope = match scheme {
            SchemeName::Order2 => 0.2,
            SchemeName::Order4 => 0.4,
        };
        Tol {
            algebra: self.algebra.unwrap_or(1e-15),
            prop55: self.prop55.unwrap_or(1e-12),
            roundtrip: self.roundtrip.unwrap_or(1e-13),
            dictionary: self.dictionary.unwrap_or(1e-14),
            residuals: self.residuals.unwrap_or(1e-13),
            gradient: self.gradient.unwrap_or(1e-6),
            invariance: self.invariance.unwrap_or(1e-12),
            slope: self.slope.unwrap_or(slope),
            ec_map: self.ec_map.unwrap_or(1e-10),
            spin: self.spin.unwrap_or(1e-11),
            lift: self.lift.unwrap_or(1e-13),
            closure: self.closure.unwrap_or(1e-9),
            split_family: self.split_family.unwrap_or(1e-8),
        }
    }

    fn entries(&self) -> [(&'static str, Option<f64>); 13] {
        [
            ("algebra", self.algebra),
            ("prop55", self.prop55),
            ("roundtrip", self.roundtrip),
            ("dictionary", self.dictionary),
            ("residuals", self.residuals),
            ("gradient", self.gradient),
            ("invariance", self.invariance),
            ("slope", self.slope),
            ("ec_map", self.ec_map),
            ("spin", self.spin),
            ("lift", self.lift),
            ("closure", self.closure),
            ("split_family", self.split_family),
        ]
    }
}

/// Complete scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub suites: Vec<Suite>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub algebra: AlgebraConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub gauge: GeneratorConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_seed() -> u64 {
    42
}

impl ScenarioConfig {
    /// Defaults with the given suites.
    pub fn with_suites(suites: Vec<Suite>) -> ScenarioConfig {
        ScenarioConfig {
            suites,
            seed: default_seed(),
            scheme: SchemeName::default(),
            grid: GridConfig::default(),
            algebra: AlgebraConfig::default(),
            metric: MetricConfig::default(),
            field: FieldConfig::default(),
            gauge: GeneratorConfig::default(),
            convergence: ConvergenceConfig::default(),
            samples: SampleConfig::default(),
            tolerances: Tolerances::default(),
        }
    }

    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
        let parsed = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: origin.to_string(),
            message,
        })
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ScenarioConfig::parse(&text, &path.display().to_string())
    }

    /// JSON Schema of the configuration file.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.suites.is_empty() {
            return invalid("at least one suite must be selected");
        }
        let mut seen = self.suites.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.suites.len() {
            return invalid("suites must not repeat");
        }
        let g = &self.grid;
        if !(1..=4).contains(&g.m) {
            return invalid(format!("grid.m = {} must be between 1 and 4", g.m));
        }
        if g.n < 4 {
            return invalid(format!("grid.n = {} must be at least 4", g.n));
        }
        if let Some(h) = g.h {
            if !(h.is_finite() && h > 0.0) {
                return invalid(format!("grid.h = {h} must be positive"));
            }
        }
        for (what, kmax) in [("field", self.field.kmax), ("gauge", self.gauge.kmax)] {
            if kmax == 0 || 4 * kmax as usize > g.n {
                return invalid(format!("{what}.kmax = {kmax} must satisfy 1 <= 4 kmax <= grid.n"));
            }
        }
        for (what, amp) in [
            ("field.amplitude", self.field.amplitude),
            ("gauge.amplitude", self.gauge.amplitude),
            ("metric.amplitude", self.metric.amplitude),
        ] {
            if !(amp.is_finite() && amp >= 0.0) {
                return invalid(format!("{what} = {amp} must be finite and non-negative"));
            }
        }
        if self.convergence.grids.len() < 2 {
            return invalid("convergence.grids needs at least two sizes");
        }
        if self.convergence.grids.windows(2).any(|w| w[1] <= w[0]) || self.convergence.grids[0] < 4 {
            return invalid("convergence.grids must be increasing and at least 4");
        }
        let kmax = self.field.kmax.max(self.gauge.kmax) as usize;
        if 4 * kmax > self.convergence.grids[0] {
            return invalid(format!("convergence.grids[0] must be at least 4 kmax = {}", 4 * kmax));
        }
        let s = &self.samples;
        if s.sections == 0 || s.points == 0 || s.directions == 0 {
            return invalid("sample counts must be positive");
        }
        for (name, value) in self.tolerances.entries() {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return invalid(format!("tolerances.{name} = {v} must be finite and non-negative"));
                }
            }
        }
        let algebra = self.algebra().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let r = algebra.dim();
        if let Some(diag) = &self.metric.diag {
            if diag.len() != g.m {
                return invalid(format!("metric.diag has {} entries, grid.m = {}", diag.len(), g.m));
            }
        }
        self.metric(&self.grid()?).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for suite in &self.suites {
            if suite.needs_3d() && (g.m != 3 || r != 3) {
                return invalid(format!("suite {suite} needs m = 3 and a 3-dimensional algebra (m = {}, r = {r})", g.m));
            }
            if *suite == Suite::Convergence && g.m != 3 {
                return invalid("suite convergence runs the plane wave and needs grid.m = 3");
            }
        }
        if self.field.kind == FieldKind::PlaneWave && g.m != 3 {
            return invalid("field.kind = plane-wave needs grid.m = 3");
        }
        Ok(())
    }

    pub fn algebra(&self) -> jetfield_core::Result<LieAlgebraData> {
        let a = &self.algebra;
        match a.kind {
            AlgebraName::So3 | AlgebraName::So21 => {
                if a.c.is_some() || a.dim.is_some() {
                    return Err(jetfield_core::Error::InvalidAlgebra(
                        "c and dim apply only to custom and abelian algebras".into(),
                    ));
                }
                let (kind, default) = if a.kind == AlgebraName::So3 {
                    (AlgebraKind::So3, vec![1.0, 1.0, 1.0])
                } else {
                    (AlgebraKind::So21, vec![1.0, 1.0, -1.0])
                };
                build_algebra(kind, &MetricSpec::Diagonal(a.k.clone().unwrap_or(default)), None)
            }
            AlgebraName::Abelian => {
                if a.c.is_some() {
                    return Err(jetfield_core::Error::InvalidAlgebra("abelian algebras take no c".into()));
                }
                let k = match (&a.k, a.dim) {
                    (Some(k), None) => k.clone(),
                    (Some(k), Some(d)) if d == k.len() => k.clone(),
                    (None, Some(d)) if d > 0 => vec![1.0; d],
                    (None, None) => vec![1.0],
                    _ => {
                        return Err(jetfield_core::Error::InvalidAlgebra(
                            "abelian: dim must be positive and match k".into(),
                        ))
                    }
                };
                let zeros = vec![0.0; k.len().pow(3)];
                build_algebra(AlgebraKind::Custom, &MetricSpec::Diagonal(k), Some(&zeros))
            }
            AlgebraName::Custom => {
                let (Some(k), Some(c)) = (&a.k, &a.c) else {
                    return Err(jetfield_core::Error::InvalidAlgebra("custom algebras need k and c".into()));
                };
                build_algebra(AlgebraKind::Custom, &MetricSpec::Diagonal(k.clone()), Some(c))
            }
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        let h = g.h.unwrap_or(2.0 * std::f64::consts::PI / g.n as f64);
        Grid::with_spacing(vec![g.n; g.m], vec![h; g.m]).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn metric_diag(&self) -> Vec<f64> {
        self.metric.diag.clone().unwrap_or_else(|| vec![1.0; self.grid.m])
    }

    /// Base metric on `grid` as configured.
    pub fn metric(&self, grid: &Grid) -> jetfield_core::Result<BaseMetric> {
        let diag = self.metric_diag();
        match self.metric.kind {
            MetricKind::Flat => BaseMetric::flat(grid, &diag),
            MetricKind::Perturbed => BaseMetric::random(
                grid,
                &diag,
                self.metric.seed.unwrap_or_else(|| derive_seed(self.seed, Stream::Metric)),
                self.metric.amplitude,
            ),
        }
    }

    pub fn field_seed(&self) -> u64 {
        self.field.seed.unwrap_or_else(|| derive_seed(self.seed, Stream::Field))
    }

    pub fn gauge_seed(&self) -> u64 {
        self.gauge.seed.unwrap_or_else(|| derive_seed(self.seed, Stream::Gauge))
    }
}

/// Independent random streams derived from the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Metric,
    Field,
    Gauge,
    Samples,
}

/// Mix the scenario seed with a stream label (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
