//! JSON documents for instances and allocations.
//!
//! Instance: `{"n": 2, "densities": [[[{"lo":"0","hi":"1","a":"1/2","b":"0"}], ...], ...]}`
//! where `densities[i][j]` lists the segments of `v_{i,j}` and `b` defaults to `"0"`.
//!
//! Allocation: `{"pieces": [[{"lo":"0","hi":"1/2"}], [{"lo":"1/2","hi":"1"}]]}`.
//! Any JSON object carrying such a document under an `"allocation"` key is
//! accepted too, so command outputs can be fed straight back in.

use crate::error::ModelError;
use crate::model::{Allocation, DensitySegment, Instance, Interval, Normalization, PiecewiseDensity};
use crate::rational::{format_rational, parse_rational, Rational};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDoc {
    pub lo: String,
    pub hi: String,
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub n: usize,
    pub densities: Vec<Vec<Vec<SegmentDoc>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalDoc {
    pub lo: String,
    pub hi: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDoc {
    pub pieces: Vec<Vec<IntervalDoc>>,
}

const MAX_AGENTS: usize = 256;

impl InstanceDoc {
    pub fn densities(&self) -> Result<Vec<Vec<PiecewiseDensity>>, ModelError> {
        if self.n == 0 || self.n > MAX_AGENTS {
            return Err(ModelError::Schema(format!(
                "n must be in 1..={MAX_AGENTS}, got {}",
                self.n
            )));
        }
        if self.densities.len() != self.n {
            return Err(ModelError::Dimension {
                expected: self.n,
                found: self.densities.len(),
            });
        }
        self.densities
            .iter()
            .map(|row| {
                if row.len() != self.n {
                    return Err(ModelError::Dimension {
                        expected: self.n,
                        found: row.len(),
                    });
                }
                row.iter().map(|segs| density_from_doc(segs)).collect()
            })
            .collect()
    }

    pub fn to_instance(&self, mode: Normalization) -> Result<Instance, ModelError> {
        Instance::build(self.densities()?, mode)
    }

    pub fn from_densities(densities: &[Vec<PiecewiseDensity>]) -> Self {
        Self {
            n: densities.len(),
            densities: densities
                .iter()
                .map(|row| row.iter().map(density_to_doc).collect())
                .collect(),
        }
    }

    pub fn from_instance(instance: &Instance) -> Self {
        Self::from_densities(instance.densities())
    }
}

fn density_from_doc(segs: &[SegmentDoc]) -> Result<PiecewiseDensity, ModelError> {
    let segments = segs
        .iter()
        .map(|s| {
            Ok(DensitySegment {
                interval: Interval::new(parse_rational(&s.lo)?, parse_rational(&s.hi)?)?,
                a: parse_rational(&s.a)?,
                b: match &s.b {
                    Some(b) => parse_rational(b)?,
                    None => Rational::zero(),
                },
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    PiecewiseDensity::new(segments)
}

fn density_to_doc(d: &PiecewiseDensity) -> Vec<SegmentDoc> {
    d.segments()
        .iter()
        .map(|s| SegmentDoc {
            lo: format_rational(&s.interval.lo),
            hi: format_rational(&s.interval.hi),
            a: format_rational(&s.a),
            b: (!s.b.is_zero()).then(|| format_rational(&s.b)),
        })
        .collect()
}

impl AllocationDoc {
    pub fn to_allocation(&self) -> Result<Allocation, ModelError> {
        let pieces = self
            .pieces
            .iter()
            .map(|ivs| {
                let intervals = ivs
                    .iter()
                    .map(|iv| Interval::new(parse_rational(&iv.lo)?, parse_rational(&iv.hi)?))
                    .collect::<Result<Vec<_>, ModelError>>()?;
                Ok(crate::model::Piece::from_intervals(intervals))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Allocation::new(pieces))
    }

    pub fn from_allocation(alloc: &Allocation) -> Self {
        Self {
            pieces: alloc
                .pieces
                .iter()
                .map(|p| {
                    p.intervals()
                        .iter()
                        .map(|iv| IntervalDoc {
                            lo: format_rational(&iv.lo),
                            hi: format_rational(&iv.hi),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

fn schema_err(e: serde_json::Error) -> ModelError {
    ModelError::Schema(e.to_string())
}

/// Parses an instance document and checks normalization.
pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    parse_instance_with(text, Normalization::Require)
}

pub fn parse_instance_with(text: &str, mode: Normalization) -> Result<Instance, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(schema_err)?;
    doc.to_instance(mode)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AllocationEnvelope {
    Bare(AllocationDoc),
    Wrapped { allocation: AllocationDoc },
}

pub fn parse_allocation(text: &str) -> Result<Allocation, ModelError> {
    let env: AllocationEnvelope = serde_json::from_str(text).map_err(schema_err)?;
    match env {
        AllocationEnvelope::Bare(doc) | AllocationEnvelope::Wrapped { allocation: doc } => {
            doc.to_allocation()
        }
    }
}

/// True when `text` looks like an allocation document rather than an instance.
pub fn looks_like_allocation(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| {
            v.as_object()
                .map(|o| o.contains_key("pieces") || o.contains_key("allocation"))
        })
        .unwrap_or(false)
}

pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceDoc::from_instance(instance)).expect("serializable")
}

pub fn allocation_to_json(alloc: &Allocation) -> String {
    serde_json::to_string_pretty(&AllocationDoc::from_allocation(alloc)).expect("serializable")
}
