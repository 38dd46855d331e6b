use serde::{Deserialize, Serialize};

use super::{parse, CompiledExpr, DslError, Expr};

/// A named field `R^arity -> R^dim` given by one expression per component.
#[derive(Debug, Clone)]
pub struct FieldDef {
    pub name: String,
    pub vars: Vec<String>,
    pub components: Vec<Expr>,
}

/// Serialized form used in experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSource {
    pub vars: Vec<String>,
    pub components: Vec<String>,
}

impl FieldDef {
    pub fn new(name: &str, vars: &[&str], components: Vec<Expr>) -> Result<Self, DslError> {
        if components.is_empty() {
            return Err(DslError::Field(format!("field `{name}` has no components")));
        }
        for (k, c) in components.iter().enumerate() {
            for v in c.variables() {
                if !vars.contains(&v.as_str()) {
                    return Err(DslError::Field(format!(
                        "component {k} of `{name}` references undeclared variable `{v}`"
                    )));
                }
            }
        }
        Ok(FieldDef {
            name: name.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            components,
        })
    }

    pub fn parse(name: &str, vars: &[&str], sources: &[&str]) -> Result<Self, DslError> {
        let comps = sources.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        Self::new(name, vars, comps)
    }

    pub fn from_source(name: &str, src: &FieldSource) -> Result<Self, DslError> {
        let vars: Vec<&str> = src.vars.iter().map(|s| s.as_str()).collect();
        let comps: Vec<&str> = src.components.iter().map(|s| s.as_str()).collect();
        Self::parse(name, &vars, &comps)
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    fn var_refs(&self) -> Vec<&str> {
        self.vars.iter().map(|s| s.as_str()).collect()
    }

    pub fn compile(&self) -> Result<Vec<CompiledExpr>, DslError> {
        let vars = self.var_refs();
        self.components
            .iter()
            .map(|c| CompiledExpr::new(c, &vars))
            .collect()
    }

    /// Row-major Jacobian expressions (`dim x arity`).
    pub fn jacobian(&self) -> Result<Vec<Expr>, DslError> {
        let vars = self.var_refs();
        let mut out = Vec::with_capacity(self.dim() * self.arity());
        for c in &self.components {
            for v in &vars {
                out.push(c.derivative(v)?);
            }
        }
        Ok(out)
    }

    pub fn is_constant(&self) -> bool {
        self.components.iter().all(Expr::is_constant)
    }
}
