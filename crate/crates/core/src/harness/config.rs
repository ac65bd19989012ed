//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decomposition::Variant;
use crate::error::{Error, Result};
use crate::field::FieldModel;
use crate::innovations::{InnovationModel, MarginalLaw};
use crate::lattice::LatticeIndex;
use crate::rng::CounterRng;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MaximalEstimate,
    VerifyDecomposition,
    CheckDeviation,
    CheckOrliczLemmas,
    Series,
    DyadicRatio,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MaximalEstimate => "maximal-estimate",
            ExperimentKind::VerifyDecomposition => "verify-decomposition",
            ExperimentKind::CheckDeviation => "check-deviation",
            ExperimentKind::CheckOrliczLemmas => "check-orlicz-lemmas",
            ExperimentKind::Series => "series",
            ExperimentKind::DyadicRatio => "dyadic-ratio",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub lag: Vec<i64>,
    pub value: f64,
}

fn rademacher() -> MarginalLaw {
    MarginalLaw::Rademacher
}

/// The field under study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `f = ξ_0` with iid atoms.
    Atom {
        #[serde(default = "rademacher")]
        law: MarginalLaw,
    },
    /// `f = ξ_0` with product atoms; one law per axis, or `law` for all axes.
    Product {
        #[serde(default)]
        laws: Vec<MarginalLaw>,
        #[serde(default)]
        law: Option<MarginalLaw>,
    },
    CausalLinear {
        innovation: InnovationModel,
        coefficients: Vec<Coefficient>,
    },
    /// Fresh causal linear coefficients per replication: `support` lags in
    /// `[0, max_lag]^d` with values uniform in `[-1, 1]`.
    RandomLinear {
        innovation: InnovationModel,
        support: usize,
        max_lag: i64,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Atom { law: rademacher() }
    }
}

impl ModelSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, ModelSpec::RandomLinear { .. })
    }

    /// The model, drawing coefficients from `seed` when they are random.
    pub fn build(&self, d: usize, seed: u64) -> Result<Arc<FieldModel>> {
        let model = match self {
            ModelSpec::Atom { law } => FieldModel::iid_orthomartingale(d, law.clone())?,
            ModelSpec::Product { laws, law } => {
                let axes = match (laws.is_empty(), law) {
                    (true, Some(l)) => vec![l.clone(); d],
                    (false, None) => laws.clone(),
                    (true, None) => vec![rademacher(); d],
                    (false, Some(_)) => {
                        return Err(Error::InvalidModel("give either `laws` or `law`, not both".into()))
                    }
                };
                FieldModel::product_orthomartingale(axes)?
            }
            ModelSpec::CausalLinear { innovation, coefficients } => FieldModel::causal_linear(
                d,
                innovation.clone(),
                coefficients.iter().map(|c| (LatticeIndex::new(c.lag.clone()), c.value)),
            )?,
            ModelSpec::RandomLinear { innovation, support, max_lag } => {
                FieldModel::causal_linear(d, innovation.clone(), random_coefficients(d, *support, *max_lag, seed)?)?
            }
        };
        if model.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: model.dim() });
        }
        Ok(Arc::new(model))
    }
}

/// `support` coefficients at lags uniform in `[0, max_lag]^d`, values
/// uniform in `[-1, 1]`. Repeated lags merge.
pub fn random_coefficients(d: usize, support: usize, max_lag: i64, seed: u64) -> Result<Vec<(LatticeIndex, f64)>> {
    use rand::Rng;
    if support == 0 || max_lag < 0 {
        return Err(Error::InvalidModel(format!(
            "random coefficients need support ≥ 1 and max_lag ≥ 0, got {support} and {max_lag}"
        )));
    }
    let mut rng = CounterRng::new(seed);
    Ok((0..support)
        .map(|_| {
            let lag = LatticeIndex::new((0..d).map(|_| rng.gen_range(0..=max_lag)).collect());
            (lag, rng.gen_range(-1.0..=1.0))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalSpec {
    /// Dyadic exponent vectors, smallest first.
    pub schedule: Vec<Vec<u32>>,
    /// Also estimate `‖M‖_{2,r}` for the configured `r`.
    #[serde(default)]
    pub orlicz: bool,
    /// Verdict threshold on the last growth ratio.
    #[serde(default)]
    pub growth_cap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Telescoping]
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        Self { variants: default_variants() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationSpec {
    pub n: usize,
    #[serde(default = "rademacher")]
    pub law: MarginalLaw,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSpec {
    #[serde(default = "default_law_count")]
    pub laws: usize,
    #[serde(default = "default_weak_p")]
    pub weak_p: Vec<f64>,
    #[serde(default = "default_series_pq")]
    pub series_pq: Vec<(f64, f64)>,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_power_r")]
    pub power_r: Vec<f64>,
    /// Relative atom split used for the refinement stability check.
    #[serde(default = "default_refine")]
    pub refine: f64,
    /// Allowed relative change of the recorded maxima under refinement.
    #[serde(default = "default_stability")]
    pub stability: f64,
    #[serde(default = "default_pairs")]
    pub weak_type_pairs: usize,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
}

fn default_law_count() -> usize {
    20
}
fn default_weak_p() -> Vec<f64> {
    vec![1.25, 1.5, 2.0]
}
fn default_series_pq() -> Vec<(f64, f64)> {
    vec![(2.0, 0.0), (2.0, 2.0), (1.0, 1.0)]
}
fn default_k_max() -> u32 {
    40
}
fn default_power_r() -> Vec<f64> {
    vec![0.0, 2.0]
}
fn default_refine() -> f64 {
    0.01
}
fn default_stability() -> f64 {
    0.05
}
fn default_pairs() -> usize {
    10
}
fn default_t_grid() -> Vec<f64> {
    (1..=20).map(|k| 0.25 * k as f64).collect()
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            laws: default_law_count(),
            weak_p: default_weak_p(),
            series_pq: default_series_pq(),
            k_max: default_k_max(),
            power_r: default_power_r(),
            refine: default_refine(),
            stability: default_stability(),
            weak_type_pairs: default_pairs(),
            t_grid: default_t_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub n_max: Vec<i64>,
    /// Monte Carlo draws when the exact law is too large; 0 disables.
    #[serde(default)]
    pub monte_carlo: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyadicSpec {
    pub schedule: Vec<Vec<u32>>,
    #[serde(default)]
    pub ratio_cap: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub d: usize,
    /// Dyadic exponents of the main window.
    #[serde(default)]
    pub window: Vec<u32>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Include one record per replication.
    #[serde(default = "default_true")]
    pub per_replication: bool,
    #[serde(default)]
    pub maximal: Option<MaximalSpec>,
    #[serde(default)]
    pub decomposition: Option<DecompositionSpec>,
    #[serde(default)]
    pub deviation: Option<DeviationSpec>,
    #[serde(default)]
    pub lemmas: Option<LemmaSpec>,
    #[serde(default)]
    pub series: Option<SeriesSpec>,
    #[serde(default)]
    pub dyadic: Option<DyadicSpec>,
}

fn default_p() -> f64 {
    1.5
}
fn default_replications() -> usize {
    100
}
fn default_true() -> bool {
    true
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().message().trim().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(".", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.d == 0 || self.d > 8 {
            return Err(config_error("d", format!("dimension {} must lie in 1..=8", self.d)));
        }
        if self.replications == 0 {
            return Err(config_error("replications", "must be at least 1"));
        }
        if !self.window.is_empty() && self.window.len() != self.d {
            return Err(config_error(
                "window",
                format!("{} exponents given for dimension {}", self.window.len(), self.d),
            ));
        }
        if self.window.iter().any(|&e| e > 24) {
            return Err(config_error("window", "exponents must be at most 24"));
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(config_error("r", "must be ≥ 0"));
        }
        if self.threads == Some(0) {
            return Err(config_error("threads", "must be at least 1"));
        }
        let schedule_ok = |s: &[Vec<u32>]| s.iter().all(|w| w.len() == self.d && w.iter().all(|&e| e <= 24));
        match self.experiment {
            ExperimentKind::MaximalEstimate => {
                if !(self.p > 1.0 && self.p <= 2.0) {
                    return Err(config_error("p", format!("p = {} must lie in (1, 2]", self.p)));
                }
                if let Some(m) = &self.maximal {
                    if m.schedule.is_empty() || !schedule_ok(&m.schedule) {
                        return Err(config_error("maximal.schedule", "needs exponent vectors of length d"));
                    }
                } else if self.window.is_empty() {
                    return Err(config_error("window", "needed when no [maximal] schedule is given"));
                }
            }
            ExperimentKind::VerifyDecomposition => {
                if self.window.is_empty() {
                    return Err(config_error("window", "missing field `window`"));
                }
                if self.window.iter().any(|&e| e > 12) {
                    return Err(config_error("window", "decomposition exponents must be at most 12"));
                }
            }
            ExperimentKind::CheckDeviation => {
                let dev = self.deviation.as_ref().ok_or_else(|| config_error("deviation", "missing section"))?;
                if dev.n == 0 {
                    return Err(config_error("deviation.n", "must be at least 1"));
                }
                if dev.x.is_empty() || dev.y.is_empty() {
                    return Err(config_error("deviation", "x and y grids must be nonempty"));
                }
                dev.law.validate().map_err(|e| config_error("deviation.law", e.to_string()))?;
            }
            ExperimentKind::CheckOrliczLemmas => {
                let l = self.lemmas.clone().unwrap_or_default();
                if l.weak_p.iter().any(|&p| !(p > 1.0 && p <= 2.0)) {
                    return Err(config_error("lemmas.weak_p", "every p must lie in (1, 2]"));
                }
                if l.k_max == 0 {
                    return Err(config_error("lemmas.k_max", "must be at least 1"));
                }
            }
            ExperimentKind::Series => {
                let s = self.series.as_ref().ok_or_else(|| config_error("series", "missing section"))?;
                if s.n_max.len() != self.d || s.n_max.iter().any(|&n| n < 1) {
                    return Err(config_error("series.n_max", "needs d entries, each ≥ 1"));
                }
                if self.model.is_random() {
                    return Err(config_error("model", "series needs fixed coefficients"));
                }
            }
            ExperimentKind::DyadicRatio => {
                let s = self.dyadic.as_ref().ok_or_else(|| config_error("dyadic", "missing section"))?;
                if s.schedule.is_empty() || !schedule_ok(&s.schedule) {
                    return Err(config_error("dyadic.schedule", "needs exponent vectors of length d"));
                }
            }
        }
        Ok(())
    }

    /// A ready-to-run configuration for `kind` in dimension `d`.
    pub fn default_for(kind: ExperimentKind, d: usize) -> Self {
        let rad = || InnovationModel::Iid { law: rademacher() };
        let mut c = Self {
            schema_version: SCHEMA_VERSION,
            experiment: kind,
            d,
            window: Vec::new(),
            model: ModelSpec::default(),
            p: default_p(),
            r: 0.0,
            replications: default_replications(),
            seed: 0,
            output: None,
            format: Format::Csv,
            threads: None,
            per_replication: true,
            maximal: None,
            decomposition: None,
            deviation: None,
            lemmas: None,
            series: None,
            dyadic: None,
        };
        let cube = |lo: u32, hi: u32| (lo..=hi).map(|e| vec![e; d]).collect::<Vec<_>>();
        match kind {
            ExperimentKind::MaximalEstimate => {
                if d >= 2 {
                    c.model = ModelSpec::Product { laws: Vec::new(), law: None };
                }
                c.replications = 200;
                c.maximal = Some(MaximalSpec {
                    schedule: if d == 1 { cube(5, 10) } else { cube(3, 6) },
                    orlicz: false,
                    growth_cap: (d <= 2).then(|| crate::calibration::growth_threshold(d)),
                });
            }
            ExperimentKind::VerifyDecomposition => {
                c.window = vec![4; d];
                c.replications = 50;
                c.model =
                    ModelSpec::RandomLinear { innovation: rad(), support: 4, max_lag: if d == 1 { 3 } else { 1 } };
                c.decomposition = Some(DecompositionSpec::default());
            }
            ExperimentKind::CheckDeviation => {
                c.replications = 10_000;
                c.deviation = Some(DeviationSpec {
                    n: 32,
                    law: rademacher(),
                    x: (1..=6).map(f64::from).collect(),
                    y: vec![8.0, 16.0, 32.0, 64.0],
                });
            }
            ExperimentKind::CheckOrliczLemmas => {
                c.replications = 1;
                c.lemmas = Some(LemmaSpec::default());
            }
            ExperimentKind::Series => {
                c.replications = 1;
                let mut coefficients = vec![Coefficient { lag: vec![0; d], value: 1.0 }];
                let mut lag = vec![0; d];
                lag[0] = 1;
                coefficients.push(Coefficient { lag, value: 1.0 });
                c.model = ModelSpec::CausalLinear { innovation: rad(), coefficients };
                c.series = Some(SeriesSpec { n_max: vec![if d == 1 { 16 } else { 6 }; d], monte_carlo: 0 });
            }
            ExperimentKind::DyadicRatio => {
                c.replications = 200;
                c.dyadic = Some(DyadicSpec {
                    schedule: if d == 1 { cube(3, 7) } else { cube(3, 5) },
                    ratio_cap: (d <= 2).then(|| crate::calibration::dyadic_ratio_cap(d)),
                });
            }
        }
        c
    }

    /// Human-readable echo of the main settings.
    pub fn summary(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("experiment", self.experiment.name().to_string());
        m.insert("d", self.d.to_string());
        m.insert("replications", self.replications.to_string());
        m.insert("seed", self.seed.to_string());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
schema_version = 1
experiment = "verify-decomposition"
d = 1
window = [4]
replications = 50
seed = 7

[model]
kind = "random-linear"
support = 4
max_lag = 3
innovation = { kind = "iid", law = { law = "rademacher" } }
"#;

    #[test]
    fn parses_smoke_config() {
        let c = ExperimentConfig::from_toml_str(SMOKE).unwrap();
        assert_eq!(c.experiment, ExperimentKind::VerifyDecomposition);
        assert_eq!(c.window, vec![4]);
        assert!(c.model.is_random());
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_d_names_the_field() {
        let text = SMOKE.replace("d = 1\n", "");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { message, .. }) => assert!(message.contains("`d`"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_path() {
        let text = SMOKE.replace("max_lag = 3", "max_lag = 3\nmax_lags = 4");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { path, message }) => {
                assert!(path.starts_with("model"), "{path}");
                assert!(message.contains("max_lags"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = SMOKE.replace("seed = 7", "seed = 7\nreplicatons = 3");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn schema_version_is_checked() {
        let text = SMOKE.replace("schema_version = 1", "schema_version = 2");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "schema_version"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::MaximalEstimate,
            ExperimentKind::VerifyDecomposition,
            ExperimentKind::CheckDeviation,
            ExperimentKind::CheckOrliczLemmas,
            ExperimentKind::Series,
            ExperimentKind::DyadicRatio,
        ] {
            for d in 1..=2 {
                let c = ExperimentConfig::default_for(kind, d);
                c.validate().unwrap();
                assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
            }
        }
    }

    #[test]
    fn random_models_depend_only_on_seed() {
        let c = ExperimentConfig::from_toml_str(SMOKE).unwrap();
        let a = c.model.build(1, 3).unwrap();
        let b = c.model.build(1, 3).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
        assert!(a.coefficients().len() <= 4);
        assert!(a.lag_extent()[0] <= 3);
    }
}
