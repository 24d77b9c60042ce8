use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use solgap_core::criterion::SearchBudget;
use solgap_core::dual::{Character, MarkovParams, MeasureMode};
use solgap_core::matgroup::{GroupSpec, GroupSpecDoc};
use solgap_core::sadic::{format_rational, parse_rational, Rational};

use crate::CliError;

pub const CONFIG_SCHEMA: &str = include_str!("../schema/analysis-config.schema.json");

/// A rational written as `"num/den"`; parsing happens during
/// deserialization so errors carry the field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalStr(pub Rational);

impl<'de> Deserialize<'de> for RationalStr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map(RationalStr).map_err(de::Error::custom)
    }
}

impl Serialize for RationalStr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    #[serde(rename = "S")]
    pub primes: Vec<u64>,
    pub d: usize,
    pub generators: Vec<Vec<Vec<RationalStr>>>,
    /// Uniform when absent.
    #[serde(default)]
    pub nu: Option<Vec<RationalStr>>,
}

impl GroupDoc {
    pub fn to_spec(&self) -> Result<GroupSpec, CliError> {
        let strings = |rows: &Vec<Vec<RationalStr>>| -> Vec<Vec<String>> {
            rows.iter().map(|r| r.iter().map(|q| format_rational(&q.0)).collect()).collect()
        };
        let k = self.generators.len().max(1);
        let nu = match &self.nu {
            Some(w) => w.iter().map(|q| format_rational(&q.0)).collect(),
            None => vec![format!("1/{k}"); self.generators.len()],
        };
        let doc = GroupSpecDoc { primes: self.primes.clone(), d: self.d, generators: self.generators.iter().map(strings).collect(), nu };
        doc.to_spec().map_err(|e| CliError::Input(format!("group: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSampling {
    pub count: usize,
    pub bound: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub radius: usize,
    pub iterations: usize,
    pub orbit_cap: usize,
    pub max_steps: usize,
    pub group_cap: usize,
    pub measure: MeasureMode,
    pub search: SearchBudget,
}

impl Default for Budgets {
    fn default() -> Self {
        let m = MarkovParams::default();
        Budgets {
            radius: m.radius,
            iterations: m.iters,
            orbit_cap: m.cap,
            max_steps: 16,
            group_cap: 2_000_000,
            measure: MeasureMode::Symmetrized,
            search: SearchBudget::default(),
        }
    }
}

impl Budgets {
    pub fn markov(&self) -> MarkovParams {
        MarkovParams { radius: self.radius, iters: self.iterations, cap: self.orbit_cap, mode: self.measure }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub group: GroupDoc,
    #[serde(default)]
    pub seeds: Vec<Vec<RationalStr>>,
    #[serde(default)]
    pub sample_seeds: Option<SeedSampling>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub run_estimates: bool,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub random_seed: u64,
}

/// A validated config with the group and seeds built.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: AnalysisConfig,
    pub raw: Value,
    pub spec: GroupSpec,
    pub seeds: Vec<Character>,
}

/// Validates `value` against the published schema, or against one of its
/// `$defs` when `def` is given.
pub fn check_schema(value: &Value, def: Option<&str>) -> Result<(), CliError> {
    let mut schema: Value = serde_json::from_str(CONFIG_SCHEMA).expect("bundled schema parses");
    if let Some(d) = def {
        schema = serde_json::json!({ "$defs": schema["$defs"].clone(), "$ref": format!("#/$defs/{d}") });
    }
    let validator = jsonschema::validator_for(&schema).expect("bundled schema compiles");
    if let Some(err) = validator.iter_errors(value).next() {
        let path = err.instance_path().to_string();
        let path = if path.is_empty() { "/".to_string() } else { path };
        return Err(CliError::Input(format!("{path}: {err}")));
    }
    Ok(())
}

struct Located<'a>(&'a str, usize, usize);

impl fmt::Display for Located<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (line {}, column {})", self.0, self.1, self.2)
    }
}

/// Typed deserialization with the failing field path in the error.
pub fn from_value<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        CliError::Input(format!("{}: {}", path, Located(&msg, inner.line(), inner.column())))
    })
}

fn parse_json(text: &str) -> Result<Value, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed JSON: {e}")))
}

/// `seed` overrides the config's `random_seed`.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_config(&text, seed).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str, seed: Option<u64>) -> Result<Loaded, CliError> {
    let raw = parse_json(text)?;
    check_schema(&raw, None)?;
    let mut config: AnalysisConfig = from_value(text)?;
    if let Some(s) = seed {
        config.random_seed = s;
    }
    let spec = config.group.to_spec()?;
    let mut seeds = Vec::new();
    for (i, s) in config.seeds.iter().enumerate() {
        let coords = s.iter().map(|q| q.0.clone()).collect();
        let chi = Character::new(coords, spec.prime_set().clone()).map_err(|e| CliError::Input(format!("seeds[{i}]: {e}")))?;
        if chi.dim() != spec.dim() {
            return Err(CliError::Input(format!("seeds[{i}]: dimension {} does not match d = {}", chi.dim(), spec.dim())));
        }
        seeds.push(chi);
    }
    if let Some(sampling) = config.sample_seeds {
        seeds.extend(sample_seeds(&spec, sampling, config.random_seed));
    }
    Ok(Loaded { config, raw, spec, seeds })
}

/// Nonzero integer characters with coordinates in `[-bound, bound]`.
pub fn sample_seeds(spec: &GroupSpec, sampling: SeedSampling, seed: u64) -> Vec<Character> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = i64::from(sampling.bound);
    let mut out = Vec::with_capacity(sampling.count);
    while out.len() < sampling.count {
        let coords: Vec<Rational> = (0..spec.dim()).map(|_| Rational::from_integer(rng.gen_range(-b..=b).into())).collect();
        if let Ok(chi) = Character::new(coords, spec.prime_set().clone()) {
            out.push(chi);
        }
    }
    out
}

pub fn load_group_file(path: &Path) -> Result<GroupSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let wrap = |e: CliError| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    };
    let raw = parse_json(&text).map_err(wrap)?;
    check_schema(&raw, Some("group")).map_err(wrap)?;
    let doc: GroupDoc = from_value(&text).map_err(wrap)?;
    doc.to_spec().map_err(wrap)
}
