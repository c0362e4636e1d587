use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::Hyperparams;

const DEFAULT_TABLE: &str = include_str!("default_genes.toml");

/// One option of a gene. `"none"` in config files stands for an absent value.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl GeneValue {
    pub fn to_json(&self) -> Value {
        match self {
            Self::None => Value::Null,
            Self::Bool(b) => Value::Bool(*b),
            Self::Int(i) => Value::from(*i),
            Self::Float(f) => serde_json::Number::from_f64(*f).map_or(Value::Null, Value::Number),
            Self::Text(s) => Value::String(s.clone()),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(match v {
            Value::Null => Self::None,
            Value::Bool(b) => Self::Bool(*b),
            Value::Number(n) => match n.as_i64() {
                Some(i) => Self::Int(i),
                None => Self::Float(n.as_f64().expect("finite number")),
            },
            Value::String(s) if s.eq_ignore_ascii_case("none") => Self::None,
            Value::String(s) => Self::Text(s.clone()),
            other => return Err(Error::GeneTable(format!("unsupported option {other}"))),
        })
    }

    /// Equality that treats `16` and `16.0` as the same option.
    pub fn matches(&self, other: &Self) -> bool {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a == b,
            _ => self == other,
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Int(i) => Some(*i as f64),
            Self::Float(f) => Some(*f),
            _ => None,
        }
    }
}

impl fmt::Display for GeneValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Bool(b) => write!(f, "{b}"),
            Self::Int(i) => write!(f, "{i}"),
            Self::Float(x) => write!(f, "{x}"),
            Self::Text(s) => f.write_str(s),
        }
    }
}

impl Serialize for GeneValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::None => s.serialize_str("none"),
            other => other.to_json().serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for GeneValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Self::from_json(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSpec {
    pub name: String,
    pub group: u8,
    pub options: Vec<GeneValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableFile {
    gene: Vec<GeneSpec>,
}

/// Ordered genes with their option lists and crossover groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneTable {
    genes: Vec<GeneSpec>,
    groups: Vec<u8>,
}

impl GeneTable {
    pub fn new(genes: Vec<GeneSpec>) -> Result<Self> {
        if genes.is_empty() {
            return Err(Error::GeneTable("no genes".into()));
        }
        let mut names = BTreeSet::new();
        for g in &genes {
            if g.options.is_empty() {
                return Err(Error::GeneTable(format!(
                    "gene `{}` has no options",
                    g.name
                )));
            }
            if !names.insert(g.name.as_str()) {
                return Err(Error::GeneTable(format!("gene `{}` listed twice", g.name)));
            }
            if g.group == 0 {
                return Err(Error::GeneTable(format!("gene `{}` has group 0", g.name)));
            }
        }
        let groups: BTreeSet<u8> = genes.iter().map(|g| g.group).collect();
        Ok(Self {
            genes,
            groups: groups.into_iter().collect(),
        })
    }

    /// The nineteen-gene table shipped with the crate.
    pub fn default_table() -> Self {
        Self::from_toml(DEFAULT_TABLE).expect("bundled gene table is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: TableFile = toml::from_str(text).map_err(|e| Error::GeneTable(e.to_string()))?;
        Self::new(file.gene)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::GeneTable(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&TableFile {
            gene: self.genes.clone(),
        })
        .expect("gene table serializes")
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn genes(&self) -> &[GeneSpec] {
        &self.genes
    }

    pub fn gene(&self, i: usize) -> &GeneSpec {
        &self.genes[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.genes.iter().position(|g| g.name == name)
    }

    /// Distinct group ids in ascending order.
    pub fn groups(&self) -> &[u8] {
        &self.groups
    }

    /// Indices of the genes in `group`.
    pub fn members(&self, group: u8) -> Vec<usize> {
        (0..self.genes.len())
            .filter(|&i| self.genes[i].group == group)
            .collect()
    }

    /// Number of distinct genomes.
    pub fn search_space_size(&self) -> u128 {
        self.genes.iter().map(|g| g.options.len() as u128).product()
    }

    pub fn check(&self, genome: &super::Genome) -> Result<()> {
        let idx = genome.indices();
        if idx.len() != self.genes.len() {
            return Err(Error::GeneTable(format!(
                "genome of {} genes for a table of {}",
                idx.len(),
                self.genes.len()
            )));
        }
        for (g, &i) in self.genes.iter().zip(idx) {
            if i >= g.options.len() {
                return Err(Error::GeneTable(format!(
                    "gene `{}` index {i} outside {} options",
                    g.name,
                    g.options.len()
                )));
            }
        }
        Ok(())
    }

    /// Gene name to chosen option.
    pub fn values(&self, genome: &super::Genome) -> Result<BTreeMap<String, GeneValue>> {
        self.check(genome)?;
        Ok(self
            .genes
            .iter()
            .zip(genome.indices())
            .map(|(g, &i)| (g.name.clone(), g.options[i].clone()))
            .collect())
    }

    /// Inverse of [`GeneTable::values`].
    pub fn genome_from_values(
        &self,
        values: &BTreeMap<String, GeneValue>,
    ) -> Result<super::Genome> {
        if let Some(extra) = values.keys().find(|k| self.index_of(k).is_none()) {
            return Err(Error::GeneTable(format!("unknown gene `{extra}`")));
        }
        let idx = self
            .genes
            .iter()
            .map(|g| {
                let v = values
                    .get(&g.name)
                    .ok_or_else(|| Error::GeneTable(format!("gene `{}` missing", g.name)))?;
                g.options.iter().position(|o| o.matches(v)).ok_or_else(|| {
                    Error::GeneTable(format!("gene `{}`: {v} is not an option", g.name))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(super::Genome::new(idx))
    }

    /// Resolves a genome into model hyperparameters.
    pub fn resolve(&self, genome: &super::Genome) -> Result<Hyperparams> {
        let map: serde_json::Map<String, Value> = self
            .values(genome)?
            .into_iter()
            .map(|(k, v)| (k, v.to_json()))
            .collect();
        let h: Hyperparams = serde_json::from_value(Value::Object(map))
            .map_err(|e| Error::GeneTable(format!("cannot resolve genome: {e}")))?;
        h.validate()?;
        Ok(h)
    }

    /// Genome whose resolution equals `h`.
    pub fn encode(&self, h: &Hyperparams) -> Result<super::Genome> {
        let Value::Object(map) = serde_json::to_value(h)? else {
            unreachable!("hyperparameters serialize to an object")
        };
        let values = map
            .iter()
            .map(|(k, v)| Ok((k.clone(), GeneValue::from_json(v)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        self.genome_from_values(&values)
    }
}
