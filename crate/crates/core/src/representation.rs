//! State-index to feature-vector mappings.
//!
//! States are indexed `0..k`. Tables are materialised at construction and
//! never change afterwards.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::FeatureVector;

/// Feature dimension of the normal representation unless overridden.
pub const NORMAL_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Tabular,
    Binary,
    Normal,
    AliasedConstant,
}

impl RepresentationKind {
    pub fn name(self) -> &'static str {
        match self {
            RepresentationKind::Tabular => "tabular",
            RepresentationKind::Binary => "binary",
            RepresentationKind::Normal => "normal",
            RepresentationKind::AliasedConstant => "aliased_constant",
        }
    }
}

impl std::str::FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabular" => Ok(Self::Tabular),
            "binary" => Ok(Self::Binary),
            "normal" => Ok(Self::Normal),
            "aliased_constant" | "aliased" => Ok(Self::AliasedConstant),
            other => Err(Error::InvalidConfig(format!("unknown representation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepresentationDoc", into = "RepresentationDoc")]
pub struct Representation {
    kind: RepresentationKind,
    n: usize,
    table: Vec<Vec<f64>>,
    features: Vec<FeatureVector>,
    binary: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepresentationDoc {
    pub kind: RepresentationKind,
    pub k: usize,
    pub n: usize,
    pub table: Vec<Vec<f64>>,
    pub binary: bool,
}

impl TryFrom<RepresentationDoc> for Representation {
    type Error = Error;

    fn try_from(d: RepresentationDoc) -> Result<Self> {
        if d.table.len() != d.k {
            return Err(Error::InvalidConfig(format!(
                "representation table has {} rows, expected {}",
                d.table.len(),
                d.k
            )));
        }
        let rep = Representation::from_table(d.kind, d.n, d.table)?;
        if rep.binary != d.binary {
            return Err(Error::InvalidConfig("binary flag disagrees with table".into()));
        }
        Ok(rep)
    }
}

impl From<Representation> for RepresentationDoc {
    fn from(r: Representation) -> Self {
        RepresentationDoc {
            kind: r.kind,
            k: r.table.len(),
            n: r.n,
            table: r.table,
            binary: r.binary,
        }
    }
}

impl Representation {
    fn from_table(kind: RepresentationKind, n: usize, table: Vec<Vec<f64>>) -> Result<Self> {
        if table.is_empty() || n == 0 {
            return Err(Error::InvalidConfig("empty representation".into()));
        }
        if let Some(row) = table.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        let features = table
            .iter()
            .map(|row| match kind {
                RepresentationKind::Normal => Ok(FeatureVector::dense(row.clone())),
                _ => FeatureVector::sparse(
                    n,
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(i, &v)| (i, v))
                        .collect(),
                ),
            })
            .collect::<Result<Vec<_>>>()?;
        let binary = features.iter().all(FeatureVector::is_binary);
        Ok(Self {
            kind,
            n,
            table,
            features,
            binary,
        })
    }

    /// One-hot rows: state s maps to e_s.
    pub fn tabular(k: usize) -> Result<Self> {
        check_k(k)?;
        let table = (0..k)
            .map(|s| (0..k).map(|i| if i == s { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_table(RepresentationKind::Tabular, k, table)
    }

    /// Big-endian binary encoding of s + 1 in ceil(log2(k + 1)) bits.
    pub fn binary(k: usize) -> Result<Self> {
        check_k(k)?;
        let n = binary_width(k);
        let table = (0..k)
            .map(|s| {
                let code = s + 1;
                (0..n).map(|bit| ((code >> (n - 1 - bit)) & 1) as f64).collect()
            })
            .collect();
        Self::from_table(RepresentationKind::Binary, n, table)
    }

    /// Random unit-length rows of dimension [`NORMAL_DIM`].
    pub fn normal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Self> {
        Self::normal_with_dim(k, NORMAL_DIM, rng)
    }

    pub fn normal_with_dim<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Self> {
        check_k(k)?;
        if n == 0 {
            return Err(Error::InvalidConfig("normal representation needs n >= 1".into()));
        }
        let mut table = Vec::with_capacity(k);
        while table.len() < k {
            let row: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            table.push(row.into_iter().map(|x| x / norm).collect());
        }
        Self::from_table(RepresentationKind::Normal, n, table)
    }

    /// A single feature that is 1 in every state.
    pub fn aliased_constant(k: usize) -> Result<Self> {
        check_k(k)?;
        Self::from_table(RepresentationKind::AliasedConstant, 1, vec![vec![1.0]; k])
    }

    pub fn kind(&self) -> RepresentationKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.table.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn features_of(&self, s: usize) -> Result<&FeatureVector> {
        self.features.get(s).ok_or(Error::StateOutOfRange { state: s, k: self.k() })
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.table[s]
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("representation needs k >= 1".into()));
    }
    Ok(())
}

/// ceil(log2(k + 1)): bits needed to write k.
pub fn binary_width(k: usize) -> usize {
    (usize::BITS - k.leading_zeros()) as usize
}
