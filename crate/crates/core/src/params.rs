//! Parameter spaces and configurations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fingerprint::{push_real, Fingerprint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    pub fn cat(s: &str) -> Self {
        Value::Cat(s.to_string())
    }

    fn push_canonical(&self, out: &mut String) {
        match self {
            Value::Int(i) => {
                let _ = write!(out, "i{i}");
            }
            Value::Real(x) => {
                out.push('r');
                push_real(out, *x);
            }
            Value::Cat(s) => {
                let _ = write!(out, "c{s:?}");
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Real,
    Integer,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical(Vec<String>),
}

impl Domain {
    pub fn kind(&self) -> ParamKind {
        match self {
            Domain::Real { .. } => ParamKind::Real,
            Domain::Integer { .. } => ParamKind::Integer,
            Domain::Categorical(_) => ParamKind::Categorical,
        }
    }

    pub fn boolean() -> Self {
        Domain::Categorical(alloc::vec!["false".to_string(), "true".to_string()])
    }

    pub fn choices(items: &[&str]) -> Self {
        Domain::Categorical(items.iter().map(|s| s.to_string()).collect())
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Real { lo, hi }, Value::Real(x)) => x.is_finite() && lo <= x && x <= hi,
            (Domain::Integer { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Categorical(items), Value::Cat(s)) => items.iter().any(|c| c == s),
            _ => false,
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Domain::Real { lo, hi } => {
                ensure!(
                    lo.is_finite() && hi.is_finite(),
                    "real bounds must be finite"
                );
                ensure!(lo <= hi, "real interval [{lo}, {hi}] is empty");
            }
            Domain::Integer { lo, hi } => ensure!(lo <= hi, "integer range [{lo}, {hi}] is empty"),
            Domain::Categorical(items) => {
                ensure!(!items.is_empty(), "categorical domain is empty");
                for (i, a) in items.iter().enumerate() {
                    ensure!(!items[..i].contains(a), "duplicate categorical value {a:?}");
                }
            }
        }
        Ok(())
    }

    /// Uniform draw from the domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Domain::Real { lo, hi } => Value::Real(rng.random_range(*lo..=*hi)),
            Domain::Integer { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
            Domain::Categorical(items) => {
                Value::Cat(items[rng.random_range(0..items.len())].clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub domain: Domain,
    pub default: Value,
}

impl Parameter {
    pub fn new(name: &str, domain: Domain, default: Value) -> Self {
        Parameter {
            name: name.to_string(),
            domain,
            default,
        }
    }

    pub fn kind(&self) -> ParamKind {
        self.domain.kind()
    }
}

/// A named, validated list of parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterSpace {
    id: String,
    parameters: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(id: &str, parameters: Vec<Parameter>) -> Result<Self> {
        for (i, p) in parameters.iter().enumerate() {
            p.domain.check()?;
            ensure!(
                p.domain.contains(&p.default),
                "default of {} lies outside its domain",
                p.name
            );
            ensure!(
                !parameters[..i].iter().any(|q| q.name == p.name),
                "duplicate parameter name {}",
                p.name
            );
        }
        ensure!(
            !parameters.is_empty(),
            "parameter space {id} has no parameters"
        );
        Ok(ParameterSpace {
            id: id.to_string(),
            parameters,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn default_configuration(&self) -> Configuration {
        let values = self
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.default.clone()))
            .collect();
        Configuration::new_unchecked(&self.id, values)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let values = self
            .parameters
            .iter()
            .map(|p| (p.name.clone(), p.domain.sample(rng)))
            .collect();
        Configuration::new_unchecked(&self.id, values)
    }

    /// Builds a configuration, checking that it assigns exactly this
    /// space's parameters with in-domain values.
    pub fn configure(&self, values: BTreeMap<String, Value>) -> Result<Configuration> {
        let cfg = Configuration::new_unchecked(&self.id, values);
        self.validate(&cfg)?;
        Ok(cfg)
    }

    pub fn validate(&self, cfg: &Configuration) -> Result<()> {
        ensure!(
            cfg.space_id == self.id,
            "configuration belongs to space {:?}, expected {:?}",
            cfg.space_id,
            self.id
        );
        ensure!(
            cfg.values.len() == self.parameters.len(),
            "configuration assigns {} parameters, space {} has {}",
            cfg.values.len(),
            self.id,
            self.parameters.len()
        );
        for p in &self.parameters {
            match cfg.values.get(&p.name) {
                None => return Err(Error::invalid(format!("missing parameter {}", p.name))),
                Some(v) => ensure!(
                    p.domain.contains(v),
                    "value {v:?} outside domain of {}",
                    p.name
                ),
            }
        }
        Ok(())
    }

    /// The `k`-fold product space used to tune a whole portfolio as one
    /// configuration; member `m`'s parameters are prefixed `m{m}.`.
    pub fn product(&self, k: usize) -> Result<ParameterSpace> {
        ensure!(k >= 1, "product needs at least one member");
        let mut parameters = Vec::with_capacity(k * self.parameters.len());
        for m in 0..k {
            for p in &self.parameters {
                parameters.push(Parameter {
                    name: format!("m{m}.{}", p.name),
                    domain: p.domain.clone(),
                    default: p.default.clone(),
                });
            }
        }
        ParameterSpace::new(&format!("{}^{k}", self.id), parameters)
    }

    /// Inverse of [`product`](Self::product): splits a product-space
    /// configuration into its `k` member configurations.
    pub fn split_product(&self, k: usize, joint: &Configuration) -> Result<Vec<Configuration>> {
        let mut members = Vec::with_capacity(k);
        for m in 0..k {
            let mut values = BTreeMap::new();
            for p in &self.parameters {
                let key = format!("m{m}.{}", p.name);
                let v = joint
                    .values
                    .get(&key)
                    .ok_or_else(|| Error::invalid(format!("joint configuration lacks {key}")))?;
                values.insert(p.name.clone(), v.clone());
            }
            members.push(self.configure(values)?);
        }
        Ok(members)
    }
}

impl<'de> Deserialize<'de> for ParameterSpace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            id: String,
            parameters: Vec<Parameter>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ParameterSpace::new(&raw.id, raw.parameters).map_err(serde::de::Error::custom)
    }
}

/// A full assignment of a space's parameters. Immutable; the fingerprint is
/// computed once at construction.
#[derive(Clone, Debug, Serialize)]
pub struct Configuration {
    space_id: String,
    values: BTreeMap<String, Value>,
    #[serde(skip)]
    fingerprint: Fingerprint,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint
    }
}

impl Eq for Configuration {}

impl Configuration {
    pub(crate) fn new_unchecked(space_id: &str, values: BTreeMap<String, Value>) -> Self {
        let fingerprint = Self::digest(space_id, &values);
        Configuration {
            space_id: space_id.to_string(),
            values,
            fingerprint,
        }
    }

    fn digest(space_id: &str, values: &BTreeMap<String, Value>) -> Fingerprint {
        let mut s = String::new();
        let _ = write!(s, "space={space_id:?}");
        for (k, v) in values {
            let _ = write!(s, ";{k:?}=");
            v.push_canonical(&mut s);
        }
        Fingerprint::of(&s)
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn real(&self, name: &str) -> Result<f64> {
        match self.values.get(name) {
            Some(Value::Real(x)) => Ok(*x),
            _ => Err(Error::invalid(format!("parameter {name} is not a real"))),
        }
    }

    pub fn int(&self, name: &str) -> Result<i64> {
        match self.values.get(name) {
            Some(Value::Int(i)) => Ok(*i),
            _ => Err(Error::invalid(format!(
                "parameter {name} is not an integer"
            ))),
        }
    }

    pub fn cat(&self, name: &str) -> Result<&str> {
        match self.values.get(name) {
            Some(Value::Cat(s)) => Ok(s),
            _ => Err(Error::invalid(format!(
                "parameter {name} is not categorical"
            ))),
        }
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.cat(name)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::invalid(format!(
                "parameter {name} is not boolean: {other}"
            ))),
        }
    }

    /// Returns a copy with one value replaced. The result is not validated.
    pub fn with(&self, name: &str, value: Value) -> Configuration {
        let mut values = self.values.clone();
        values.insert(name.to_string(), value);
        Configuration::new_unchecked(&self.space_id, values)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            space_id: String,
            values: BTreeMap<String, Value>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Ok(Configuration::new_unchecked(&raw.space_id, raw.values))
    }
}
