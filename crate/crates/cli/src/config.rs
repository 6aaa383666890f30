//! Scenario configuration files and fixture references.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use geomlab_core::metric::dsl::{builtin, parse_document, MetricDocument};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    BishopGromov,
    LorentzVolume,
    Myers,
    SingularityBound,
    MollifyCheck,
    CutLocus,
    Table1Audit,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::BishopGromov,
        Scenario::LorentzVolume,
        Scenario::Myers,
        Scenario::SingularityBound,
        Scenario::MollifyCheck,
        Scenario::CutLocus,
        Scenario::Table1Audit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::BishopGromov => "bishop-gromov",
            Scenario::LorentzVolume => "lorentz-volume",
            Scenario::Myers => "myers",
            Scenario::SingularityBound => "singularity-bound",
            Scenario::MollifyCheck => "mollify-check",
            Scenario::CutLocus => "cut-locus",
            Scenario::Table1Audit => "table1-audit",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        write!(f, "unknown scenario `{}` (valid: {})", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownScenario {}

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

/// Where a fixture document comes from: a path (relative to the config
/// file) or an inline document object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocumentSource {
    Path(PathBuf),
    Inline(Value),
}

/// A fixture together with its comparison data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub document: DocumentSource,
    /// Curvature bound `κ` (defaults to the fixture's own model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Mean-curvature bound `β` (defaults to the fixture's own model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// The fixture is the comparison model itself, so equality is expected.
    #[serde(default)]
    pub equality: bool,
    /// Largest `t` or `r` of the grids built for this fixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

impl FixtureRef {
    pub fn builtin(name: &str, params: &[(&str, f64)]) -> Self {
        let params: BTreeMap<&str, f64> = params.iter().copied().collect();
        FixtureRef {
            label: None,
            document: DocumentSource::Inline(serde_json::json!({
                "kind": "builtin",
                "name": name,
                "params": params,
            })),
            kappa: None,
            beta: None,
            equality: false,
            horizon: None,
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn with_bounds(mut self, kappa: f64, beta: f64) -> Self {
        self.kappa = Some(kappa);
        self.beta = Some(beta);
        self
    }

    pub fn with_equality(mut self) -> Self {
        self.equality = true;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn load(&self, base_dir: &Path) -> Result<LoadedFixture> {
        let (text, origin) = match &self.document {
            DocumentSource::Path(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading fixture document {}", path.display()))?;
                (text, path.display().to_string())
            }
            DocumentSource::Inline(v) => (v.to_string(), "inline".to_string()),
        };
        let doc = parse_document(&text).with_context(|| format!("loading fixture ({origin})"))?;
        let label = self.label.clone().unwrap_or_else(|| doc.metric.label.clone());
        let kappa = self.kappa.or(doc.model.as_ref().map(|m| m.kappa));
        let beta = self.beta.or(doc.model.as_ref().map(|m| m.beta));
        Ok(LoadedFixture {
            label,
            doc,
            kappa,
            beta,
            equality: self.equality,
            horizon: self.horizon,
        })
    }
}

pub struct LoadedFixture {
    pub label: String,
    pub doc: MetricDocument,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub equality: bool,
    pub horizon: Option<f64>,
}

impl LoadedFixture {
    pub fn kappa(&self) -> Result<f64> {
        self.kappa
            .with_context(|| format!("fixture `{}` needs a curvature bound `kappa`", self.label))
    }

    pub fn beta(&self) -> Result<f64> {
        self.beta
            .with_context(|| format!("fixture `{}` needs a mean-curvature bound `beta`", self.label))
    }

    pub fn sigma(&self) -> Result<&geomlab_core::Hypersurface> {
        self.doc
            .sigma
            .as_ref()
            .with_context(|| format!("fixture `{}` has no hypersurface", self.label))
    }

    pub fn pole(&self) -> Result<Vec<f64>> {
        self.doc
            .pole
            .clone()
            .with_context(|| format!("fixture `{}` has no pole", self.label))
    }
}

/// A scenario run as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    /// Fixtures; an empty list selects the scenario defaults.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixtures: Vec<FixtureRef>,
    /// Scenario parameters; omitted fields take their documented defaults.
    #[serde(default = "empty_object")]
    pub params: Value,
    /// Directory against which relative fixture paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioConfig {
            scenario,
            seed: 0,
            fixtures: Vec::new(),
            params: empty_object(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = serde_json::from_str(text).context("parsing scenario config")?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::from_json(&text, &base)
    }

    /// Typed scenario parameters; unknown fields are rejected.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let value = if self.params.is_null() {
            empty_object()
        } else {
            self.params.clone()
        };
        serde_json::from_value(value).with_context(|| format!("invalid parameters for scenario `{}`", self.scenario))
    }

    pub fn set_param(&mut self, key: &str, value: Value) {
        if !self.params.is_object() {
            self.params = empty_object();
        }
        self.params.as_object_mut().unwrap().insert(key.to_string(), value);
    }

    pub fn load_fixtures(&self, defaults: impl FnOnce() -> Vec<FixtureRef>) -> Result<Vec<LoadedFixture>> {
        let refs = if self.fixtures.is_empty() {
            defaults()
        } else {
            self.fixtures.clone()
        };
        if refs.is_empty() {
            bail!("scenario `{}` needs at least one fixture", self.scenario);
        }
        refs.iter().map(|f| f.load(&self.base_dir)).collect()
    }
}

/// Resolve a builtin fixture directly.
pub fn builtin_fixture(name: &str, params: &[(&str, f64)]) -> Result<MetricDocument> {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Ok(builtin(name, &p)?)
}
