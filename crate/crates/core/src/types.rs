//! Domain types shared by every phase of a round.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ArenaError;
use crate::genpipe::GenerationTrace;

/// Opaque participant identifier. Non-empty; uniqueness is enforced by the manifest.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelId(String);

impl ModelId {
    pub fn new(name: impl Into<String>) -> Result<Self, ArenaError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(ArenaError::Config("model name must be non-empty".into()));
        }
        Ok(ModelId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ModelId {
    type Error = ArenaError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        ModelId::new(value)
    }
}

impl From<ModelId> for String {
    fn from(id: ModelId) -> String {
        id.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProblemId(String);

impl ProblemId {
    pub fn new(id: impl Into<String>) -> Self {
        ProblemId(id.into())
    }

    /// Identifier for slot `slot` of `author`'s budget.
    pub fn for_slot(author: &ModelId, slot: usize) -> Self {
        ProblemId(format!("{author}-p{slot:03}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Author,
    Solver,
    Verifier,
}

/// The six broad areas of the problem taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadArea {
    Analysis,
    Algebra,
    GeometryTopology,
    DiscreteMathematics,
    ProbabilityStatistics,
    AppliedComputational,
}

impl BroadArea {
    pub const ALL: [BroadArea; 6] = [
        BroadArea::Analysis,
        BroadArea::Algebra,
        BroadArea::GeometryTopology,
        BroadArea::DiscreteMathematics,
        BroadArea::ProbabilityStatistics,
        BroadArea::AppliedComputational,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BroadArea::Analysis => "Analysis",
            BroadArea::Algebra => "Algebra",
            BroadArea::GeometryTopology => "Geometry & Topology",
            BroadArea::DiscreteMathematics => "Discrete Mathematics",
            BroadArea::ProbabilityStatistics => "Probability & Statistics",
            BroadArea::AppliedComputational => "Applied & Computational Mathematics",
        }
    }

    pub fn subfields(self) -> &'static [&'static str] {
        match self {
            BroadArea::Analysis => &[
                "real analysis",
                "measure and integration",
                "functional analysis",
                "PDEs",
                "complex analysis",
            ],
            BroadArea::Algebra => &[
                "linear algebra",
                "abstract algebra (groups/rings/fields)",
                "representation theory",
                "algebraic geometry",
                "category theory",
            ],
            BroadArea::GeometryTopology => &[
                "differential geometry",
                "smooth manifolds",
                "point-set topology",
                "algebraic topology",
                "homotopy theory",
            ],
            BroadArea::DiscreteMathematics => &[
                "combinatorics",
                "graph theory",
                "logic and foundations",
                "algorithms",
                "complexity",
            ],
            BroadArea::ProbabilityStatistics => &[
                "probability theory",
                "mathematical statistics",
                "stochastic processes",
                "stochastic calculus",
                "Markov chains",
            ],
            BroadArea::AppliedComputational => &[
                "differential equations",
                "optimization",
                "numerical analysis",
                "dynamical systems",
                "control theory",
            ],
        }
    }
}

impl fmt::Display for BroadArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A broad area plus one of its subfields.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawDomainTag")]
pub struct DomainTag {
    pub broad_area: BroadArea,
    pub subfield: String,
}

#[derive(Deserialize)]
struct RawDomainTag {
    broad_area: BroadArea,
    subfield: String,
}

impl TryFrom<RawDomainTag> for DomainTag {
    type Error = ArenaError;
    fn try_from(raw: RawDomainTag) -> Result<Self, Self::Error> {
        DomainTag::new(raw.broad_area, raw.subfield)
    }
}

impl DomainTag {
    pub fn new(broad_area: BroadArea, subfield: impl Into<String>) -> Result<Self, ArenaError> {
        let subfield = subfield.into();
        if !broad_area.subfields().contains(&subfield.as_str()) {
            return Err(ArenaError::Config(format!(
                "subfield {subfield:?} is not listed under {broad_area}"
            )));
        }
        Ok(DomainTag {
            broad_area,
            subfield,
        })
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.broad_area, self.subfield)
    }
}

/// Every (area, subfield) pair of the taxonomy, area-major.
pub fn taxonomy() -> Vec<DomainTag> {
    BroadArea::ALL
        .iter()
        .flat_map(|&area| {
            area.subfields().iter().map(move |s| DomainTag {
                broad_area: area,
                subfield: (*s).to_string(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    #[default]
    Unchecked,
    Valid,
    Invalid,
}

/// An authored item.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: ProblemId,
    pub author: ModelId,
    pub domain: DomainTag,
    pub statement: String,
    pub gold: String,
    #[serde(default)]
    pub gold_overridden: bool,
    #[serde(default)]
    pub validity: Validity,
    pub stages_used: u8,
    pub provenance: GenerationTrace,
    /// Ground-truth difficulty (logits), known only for synthetic authors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_difficulty: Option<f64>,
}

impl Problem {
    pub fn is_valid(&self) -> bool {
        self.validity != Validity::Invalid
    }
}

/// Why a record scored 0 without a regular judgment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    MissingAnswer,
    ParseFailure,
    EvalFailure,
    GoldError,
}

/// One solver's attempt at one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub solver: ModelId,
    pub problem: ProblemId,
    pub answer: String,
    pub trace: String,
    #[serde(with = "binary")]
    pub outcome: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<RecordFlag>,
}

/// Serializes a bool as the integer 0 or 1.
pub(crate) mod binary {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(de::Error::custom(format!("expected 0 or 1, found {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_has_six_areas_of_five() {
        let tags = taxonomy();
        assert_eq!(tags.len(), 30);
        for area in BroadArea::ALL {
            assert_eq!(tags.iter().filter(|t| t.broad_area == area).count(), 5);
        }
    }

    #[test]
    fn domain_tag_rejects_foreign_subfield() {
        assert!(DomainTag::new(BroadArea::Algebra, "combinatorics").is_err());
        let json = r#"{"broad_area":"algebra","subfield":"graph theory"}"#;
        assert!(serde_json::from_str::<DomainTag>(json).is_err());
        let json = r#"{"broad_area":"discrete_mathematics","subfield":"graph theory"}"#;
        assert!(serde_json::from_str::<DomainTag>(json).is_ok());
    }

    #[test]
    fn model_id_must_be_non_empty() {
        assert!(ModelId::new("").is_err());
        assert!(serde_json::from_str::<ModelId>("\"  \"").is_err());
        assert_eq!(ModelId::new("m1").unwrap().as_str(), "m1");
    }

    #[test]
    fn outcome_serializes_as_integer() {
        let rec = SolveRecord {
            solver: ModelId::new("a").unwrap(),
            problem: ProblemId::new("b-p000"),
            answer: "1".into(),
            trace: String::new(),
            outcome: true,
            flag: None,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert!(line.contains("\"outcome\":1"));
        assert!(serde_json::from_str::<SolveRecord>(&line.replace(":1", ":2")).is_err());
    }
}
