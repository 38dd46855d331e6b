//! Experiment documents: one JSON object with a kind, a root seed, named
//! field expressions and kind-specific parameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fwlab_core::dsl::{FieldDef, FieldSource};
use fwlab_core::Field;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Exit,
    Quasipotential,
    Hierarchy,
    Markov,
    Reeb,
    GraphSolve,
    Front,
    Phantom,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Exit => "exit",
            Kind::Quasipotential => "quasipotential",
            Kind::Hierarchy => "hierarchy",
            Kind::Markov => "markov",
            Kind::Reeb => "reeb",
            Kind::GraphSolve => "graph-solve",
            Kind::Front => "front",
            Kind::Phantom => "phantom",
            Kind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cmp {
    /// `|measured - expected| <= tolerance`.
    #[default]
    Within,
    /// `measured <= expected`.
    AtMost,
    /// `measured >= expected`.
    AtLeast,
}

/// A check on a named metric of the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: String,
    pub value: f64,
    #[serde(default)]
    pub tol: f64,
    #[serde(default)]
    pub cmp: Cmp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldSource>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

/// Deserializes `value`, reporting the failing key path under `prefix`.
pub fn from_value<T: DeserializeOwned>(value: &serde_json::Value, prefix: &str) -> Result<T> {
    let value = if value.is_null() { serde_json::json!({}) } else { value.clone() };
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        anyhow!("{at}: {}", e.inner())
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                anyhow!("config: {}", e.inner())
            } else {
                anyhow!("config.{path}: {}", e.inner())
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Compiles every field; errors name the offending entry.
    pub fn compile_fields(&self) -> Result<Fields> {
        let mut out = BTreeMap::new();
        for (name, src) in &self.fields {
            let def = FieldDef::from_source(name, src).map_err(|e| anyhow!("fields.{name}: {e}"))?;
            let field = Field::from_def(&def).map_err(|e| anyhow!("fields.{name}: {e}"))?;
            out.insert(name.clone(), field);
        }
        Ok(Fields(out))
    }

    /// Hex SHA-256 of the canonical document with `seed` replaced.
    pub fn hash(&self, seed: u64) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["seed"] = seed.into();
        // serde_json maps are ordered, so this text is canonical
        Ok(crate::report::sha256_hex(serde_json::to_string(&v)?.as_bytes()))
    }
}

pub struct Fields(BTreeMap<String, Field>);

impl Fields {
    /// Field `name` checked to map `R^arity -> R^dim`. `key` names the
    /// referring parameter in diagnostics.
    pub fn get(&self, key: &str, name: &str, arity: usize, dim: usize) -> Result<Field> {
        let f = self.0.get(name).ok_or_else(|| anyhow!("{key}: unknown field `{name}`"))?;
        if f.dim_in() != arity || f.dim_out() != dim {
            bail!(
                "{key}: field `{name}` maps R^{} -> R^{}, expected R^{arity} -> R^{dim}",
                f.dim_in(),
                f.dim_out()
            );
        }
        Ok(f.clone())
    }

    /// Like `get`, with a fallback when the parameter is absent.
    pub fn get_or(
        &self,
        key: &str,
        name: &Option<String>,
        arity: usize,
        dim: usize,
        fallback: impl FnOnce() -> Field,
    ) -> Result<Field> {
        match name {
            Some(n) => self.get(key, n, arity, dim),
            None => Ok(fallback()),
        }
    }
}
