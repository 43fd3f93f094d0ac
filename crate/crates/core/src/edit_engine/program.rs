use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EngineError;

/// The five conversational use cases, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UseCase {
    Intent,
    Entity,
    Repair,
    Disfluency,
    Steering,
}

impl UseCase {
    pub const ALL: [UseCase; 5] = [
        UseCase::Intent,
        UseCase::Entity,
        UseCase::Repair,
        UseCase::Disfluency,
        UseCase::Steering,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UseCase::Intent => "intent",
            UseCase::Entity => "entity",
            UseCase::Repair => "repair",
            UseCase::Disfluency => "disfluency",
            UseCase::Steering => "steering",
        }
    }
}

impl fmt::Display for UseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UseCase {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UseCase::ALL
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| EngineError::InvalidInput(format!("unknown use case {s:?}")))
    }
}

impl Serialize for UseCase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for UseCase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Half-open token range `[start, end)` over the original concatenated
/// index space. Spans are plain data; `validate_program` checks them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// How two spans relate as index sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanRelation {
    Disjoint,
    Equal,
    /// The first span strictly contains the second.
    Contains,
    /// The first span is strictly contained in the second.
    Within,
    PartialOverlap,
}

impl Span {
    pub const fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    /// `self ⊇ other` (equality included).
    pub fn covers(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn is_disjoint(&self, other: &Span) -> bool {
        self.end <= other.start || other.end <= self.start
    }

    pub fn relation(&self, other: &Span) -> SpanRelation {
        if self.is_disjoint(other) {
            SpanRelation::Disjoint
        } else if self == other {
            SpanRelation::Equal
        } else if self.covers(other) {
            SpanRelation::Contains
        } else if other.covers(self) {
            SpanRelation::Within
        } else {
            SpanRelation::PartialOverlap
        }
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(Span { start, end })
    }
}

/// Move the `replacement` span into the place of the `replaced` span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Substitution {
    pub use_case: UseCase,
    pub replacement: Span,
    pub replaced: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UseCaseEdits {
    pub use_case: UseCase,
    pub substitution: Option<Substitution>,
    pub deletions: BTreeSet<usize>,
}

impl UseCaseEdits {
    pub fn empty(use_case: UseCase) -> Self {
        UseCaseEdits {
            use_case,
            substitution: None,
            deletions: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.substitution.is_none() && self.deletions.is_empty()
    }
}

/// Edits for all five use cases, stored in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EditProgram {
    edits: [UseCaseEdits; 5],
}

impl Default for EditProgram {
    fn default() -> Self {
        EditProgram {
            edits: UseCase::ALL.map(UseCaseEdits::empty),
        }
    }
}

impl EditProgram {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn edits(&self) -> &[UseCaseEdits; 5] {
        &self.edits
    }

    pub fn get(&self, use_case: UseCase) -> &UseCaseEdits {
        &self.edits[use_case.index()]
    }

    pub fn get_mut(&mut self, use_case: UseCase) -> &mut UseCaseEdits {
        &mut self.edits[use_case.index()]
    }

    pub fn with_substitution(mut self, use_case: UseCase, replacement: Span, replaced: Span) -> Self {
        self.set_substitution(use_case, replacement, replaced);
        self
    }

    pub fn with_deletions(mut self, use_case: UseCase, indices: impl IntoIterator<Item = usize>) -> Self {
        self.get_mut(use_case).deletions.extend(indices);
        self
    }

    pub fn set_substitution(&mut self, use_case: UseCase, replacement: Span, replaced: Span) {
        self.get_mut(use_case).substitution = Some(Substitution {
            use_case,
            replacement,
            replaced,
        });
    }

    pub fn clear(&mut self, use_case: UseCase) {
        self.edits[use_case.index()] = UseCaseEdits::empty(use_case);
    }

    pub fn substitutions(&self) -> impl Iterator<Item = &Substitution> + '_ {
        self.edits.iter().filter_map(|e| e.substitution.as_ref())
    }

    /// Union of every use case's deletion set.
    pub fn all_deletions(&self) -> BTreeSet<usize> {
        self.edits.iter().flat_map(|e| e.deletions.iter().copied()).collect()
    }

    pub fn active_use_cases(&self) -> Vec<UseCase> {
        self.edits.iter().filter(|e| !e.is_empty()).map(|e| e.use_case).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.iter().all(UseCaseEdits::is_empty)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubstitutionRecord {
    replacement: Span,
    replaced: Span,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UseCaseRecord {
    substitution: Option<SubstitutionRecord>,
    #[serde(default)]
    deletions: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramRecord {
    intent: UseCaseRecord,
    entity: UseCaseRecord,
    repair: UseCaseRecord,
    disfluency: UseCaseRecord,
    steering: UseCaseRecord,
}

impl From<&UseCaseEdits> for UseCaseRecord {
    fn from(e: &UseCaseEdits) -> Self {
        UseCaseRecord {
            substitution: e.substitution.map(|s| SubstitutionRecord {
                replacement: s.replacement,
                replaced: s.replaced,
            }),
            deletions: e.deletions.iter().copied().collect(),
        }
    }
}

impl UseCaseRecord {
    fn into_edits(self, use_case: UseCase) -> UseCaseEdits {
        UseCaseEdits {
            use_case,
            substitution: self.substitution.map(|s| Substitution {
                use_case,
                replacement: s.replacement,
                replaced: s.replaced,
            }),
            deletions: self.deletions.into_iter().collect(),
        }
    }
}

impl Serialize for EditProgram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let [i, e, r, d, st] = &self.edits;
        ProgramRecord {
            intent: i.into(),
            entity: e.into(),
            repair: r.into(),
            disfluency: d.into(),
            steering: st.into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EditProgram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = ProgramRecord::deserialize(d)?;
        Ok(EditProgram {
            edits: [
                rec.intent.into_edits(UseCase::Intent),
                rec.entity.into_edits(UseCase::Entity),
                rec.repair.into_edits(UseCase::Repair),
                rec.disfluency.into_edits(UseCase::Disfluency),
                rec.steering.into_edits(UseCase::Steering),
            ],
        })
    }
}
