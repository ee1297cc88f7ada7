//! Type vocabulary shared by every stage of the toolchain.
//!
//! A [`Vocabulary`] bundles the abstract object types, the common property
//! types, the comparison predicates, the negation lexicon, the modal
//! prefixes and the predicate verbalization lexicon. The default carries
//! the 32 abstract objects and 18 properties the rule base is built over.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// The 32 abstract object types shipped by default.
pub const DEFAULT_ABSTRACT_OBJECTS: [&str; 32] = [
    "Person",
    "Animal",
    "Plant",
    "Food",
    "Alcohol",
    "Disease",
    "Drug",
    "Natural Phenomenon",
    "Condition",
    "Material",
    "Substance",
    "Furniture",
    "Publication",
    "Organization",
    "Authorization",
    "Facility",
    "Natural Place",
    "Event",
    "Show",
    "Artwork",
    "Job",
    "Game",
    "Vehicle",
    "Tool",
    "Technology",
    "Electronic Device",
    "Platform",
    "Financial Product",
    "Skill",
    "Legislation",
    "Region",
    "Time Period",
];

/// The 18 common property types shipped by default.
pub const DEFAULT_COMMON_PROPERTIES: [&str; 18] = [
    "Age",
    "Price",
    "Money",
    "Height",
    "Length",
    "Weight",
    "Strength",
    "Size",
    "Density",
    "Volume",
    "Temperature",
    "Hardness",
    "Speed",
    "BoilingPoint",
    "MeltingPoint",
    "Frequency",
    "Decibel",
    "Space",
];

const DEFAULT_COMPARISON_PREDICATES: [&str; 3] = ["BiggerThan", "SmallerThan", "EqualTo"];
const DEFAULT_NEGATION_SEGMENTS: [&str; 4] = ["Not", "No", "Never", "Un"];
const DEFAULT_MODAL_PREFIXES: [&str; 4] = ["Can", "Need", "Must", "Should"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("abstract objects and common properties must be disjoint; `{0}` is in both")]
    Overlap(String),
    #[error("vocabulary set `{0}` must not be empty")]
    EmptySet(&'static str),
}

/// Immutable word lists configuring parsing, validation and verbalization.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    abstract_objects: BTreeSet<String>,
    common_properties: BTreeSet<String>,
    comparison_predicates: BTreeSet<String>,
    negation_segments: Vec<String>,
    modal_prefixes: Vec<String>,
    verbalization_lexicon: BTreeMap<String, String>,
}

impl Vocabulary {
    pub fn new(
        abstract_objects: impl IntoIterator<Item = String>,
        common_properties: impl IntoIterator<Item = String>,
        comparison_predicates: impl IntoIterator<Item = String>,
        negation_segments: Vec<String>,
        modal_prefixes: Vec<String>,
        verbalization_lexicon: BTreeMap<String, String>,
    ) -> Result<Self, VocabError> {
        let abstract_objects: BTreeSet<String> = abstract_objects.into_iter().collect();
        let common_properties: BTreeSet<String> = common_properties.into_iter().collect();
        if abstract_objects.is_empty() {
            return Err(VocabError::EmptySet("abstract_objects"));
        }
        if common_properties.is_empty() {
            return Err(VocabError::EmptySet("common_properties"));
        }
        if negation_segments.is_empty() {
            return Err(VocabError::EmptySet("negation_segments"));
        }
        if let Some(shared) = abstract_objects.intersection(&common_properties).next() {
            return Err(VocabError::Overlap(shared.clone()));
        }
        Ok(Self {
            abstract_objects,
            common_properties,
            comparison_predicates: comparison_predicates.into_iter().collect(),
            negation_segments,
            modal_prefixes,
            verbalization_lexicon,
        })
    }

    /// Replaces the verbalization lexicon, keeping everything else.
    pub fn with_lexicon(mut self, lexicon: BTreeMap<String, String>) -> Self {
        self.verbalization_lexicon = lexicon;
        self
    }

    /// Replaces the comparison predicate set, keeping everything else.
    pub fn with_comparison_predicates(
        mut self,
        predicates: impl IntoIterator<Item = String>,
    ) -> Self {
        self.comparison_predicates = predicates.into_iter().collect();
        self
    }

    pub fn abstract_objects(&self) -> &BTreeSet<String> {
        &self.abstract_objects
    }

    pub fn common_properties(&self) -> &BTreeSet<String> {
        &self.common_properties
    }

    pub fn is_abstract_object(&self, phrase: &str) -> bool {
        self.abstract_objects.contains(phrase)
    }

    pub fn is_common_property(&self, phrase: &str) -> bool {
        self.common_properties.contains(phrase)
    }

    /// True when the phrase is usable in a primitive rule.
    pub fn is_primitive_type(&self, phrase: &str) -> bool {
        self.is_abstract_object(phrase) || self.is_common_property(phrase)
    }

    pub fn is_comparison_predicate(&self, predicate: &str) -> bool {
        self.comparison_predicates.contains(predicate)
    }

    pub fn negation_segments(&self) -> &[String] {
        &self.negation_segments
    }

    pub fn modal_prefixes(&self) -> &[String] {
        &self.modal_prefixes
    }

    /// Lexicon phrase for a predicate, when one is shipped.
    pub fn phrase_for(&self, predicate: &str) -> Option<&str> {
        self.verbalization_lexicon
            .get(predicate)
            .map(String::as_str)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(
            DEFAULT_ABSTRACT_OBJECTS.iter().map(|s| s.to_string()),
            DEFAULT_COMMON_PROPERTIES.iter().map(|s| s.to_string()),
            DEFAULT_COMPARISON_PREDICATES.iter().map(|s| s.to_string()),
            DEFAULT_NEGATION_SEGMENTS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            DEFAULT_MODAL_PREFIXES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            default_lexicon(),
        )
        .expect("default vocabulary is well-formed")
    }
}

/// Phrase lexicon for the predicates that appear in the shipped rule
/// fixtures. Anything absent falls back to camel-case splitting.
fn default_lexicon() -> BTreeMap<String, String> {
    [
        ("CanNotEat", "cannot eat"),
        ("CanEat", "can eat"),
        ("AllergicTo", "is allergic to"),
        ("Contains", "contains"),
        ("CanDrive", "can drive"),
        ("CanNotDrive", "cannot drive"),
        ("CanCreate", "can create"),
        ("CanAttend", "can attend"),
        ("CanAccess", "can access"),
        ("CanNotAccess", "cannot access"),
        ("LocatedIn", "is located in"),
        ("BroadcastIn", "is broadcast in"),
        ("MadeOf", "is made of"),
        ("MadeFrom", "is made from"),
        ("CanSubmergeIn", "can submerge in"),
        ("CanAdaptedFrom", "can be adapted from"),
        ("CanBeAdaptedFrom", "can be adapted from"),
        ("CanFitIn", "can fit in"),
        ("DensityOf", "has density"),
        ("OriginatedFrom", "originated from"),
        ("BannedIn", "is banned in"),
        ("BornIn", "was born in"),
        ("ProcessedIn", "is processed in"),
        ("NeedToConsume", "needs to consume"),
        ("NeedToWater", "needs to water"),
        ("Has", "has"),
        ("CanTreat", "can treat"),
        ("CanCook", "can cook"),
        ("CanUse", "can use"),
        ("UsedForCook", "is used for cooking"),
        ("Master", "has mastered"),
        ("RequiredForCooking", "is required for cooking"),
        ("Obtain", "has obtained"),
        ("RequiredForDriving", "is required for driving"),
        ("CanNotHold", "cannot hold"),
        ("CanSubmerge", "can submerge in"),
        ("DiagnosedWith", "is diagnosed with"),
        ("TriggeredBy", "is triggered by"),
        ("MustAvoid", "must avoid"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ships_exact_type_lists() {
        let vocab = Vocabulary::default();
        assert_eq!(vocab.abstract_objects().len(), 32);
        assert_eq!(vocab.common_properties().len(), 18);
        let objects: Vec<&str> = vocab.abstract_objects().iter().map(String::as_str).collect();
        let mut expected_objects = DEFAULT_ABSTRACT_OBJECTS.to_vec();
        expected_objects.sort_unstable();
        assert_eq!(objects, expected_objects);
        let properties: Vec<&str> = vocab.common_properties().iter().map(String::as_str).collect();
        let mut expected_properties = DEFAULT_COMMON_PROPERTIES.to_vec();
        expected_properties.sort_unstable();
        assert_eq!(properties, expected_properties);
        assert!(vocab.is_abstract_object("Natural Phenomenon"));
        assert!(vocab.is_common_property("BoilingPoint"));
        assert!(!vocab.is_primitive_type("Laptop"));
    }

    #[test]
    fn object_and_property_sets_are_disjoint() {
        let vocab = Vocabulary::default();
        assert!(vocab
            .abstract_objects()
            .intersection(vocab.common_properties())
            .next()
            .is_none());
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let err = Vocabulary::new(
            ["Person".to_string(), "Age".to_string()],
            ["Age".to_string()],
            [],
            vec!["Not".to_string()],
            vec![],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, VocabError::Overlap("Age".to_string()));
    }

    #[test]
    fn default_negation_lexicon_is_ordered() {
        let vocab = Vocabulary::default();
        assert_eq!(vocab.negation_segments(), ["Not", "No", "Never", "Un"]);
        assert_eq!(vocab.modal_prefixes(), ["Can", "Need", "Must", "Should"]);
    }
}
