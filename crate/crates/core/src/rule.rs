//! Rule AST: typed variables, binary facts and `Conclusion:- Premise` rules.
//!
//! A rule is a logical implication from a premise (an ordered conjunction of
//! facts) to a conclusion fact. Every fact is a predicate over exactly two
//! typed variables, and the conclusion is always over the variables `X` and
//! `Y` in that order. The canonical textual form is
//!
//! ```text
//! CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z).
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::classify_structure;
use crate::vocab::Vocabulary;

/// Hard bound on premise length.
pub const MAX_RULE_LENGTH: usize = 6;
/// Hard bound on compositional depth.
pub const MAX_RULE_DEPTH: u8 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("variable name `{0}` must be one uppercase letter optionally followed by one digit")]
    BadVariableName(String),
    #[error("variable type `{0}` must be one or two capitalized words")]
    BadVariableType(String),
    #[error("predicate `{0}` must be non-empty camel case without whitespace")]
    BadPredicate(String),
    #[error("conclusion arguments must be X and Y in order, found ({0}, {1})")]
    ConclusionVariables(String, String),
    #[error("variable `{variable}` used with type `{earlier}` and type `{later}`")]
    InconsistentType {
        variable: String,
        earlier: String,
        later: String,
    },
    #[error("premise must contain between 1 and {MAX_RULE_LENGTH} facts, found {0}")]
    LengthOutOfRange(usize),
    #[error("depth must be at most {MAX_RULE_DEPTH}, found {0}")]
    DepthOutOfRange(u8),
}

/// A variable occurrence such as `Person X` or `Age Z1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedVariable {
    name: String,
    var_type: String,
}

impl TypedVariable {
    pub fn new(var_type: impl Into<String>, name: impl Into<String>) -> Result<Self, RuleError> {
        let name = name.into();
        let var_type = var_type.into();
        if !is_valid_var_name(&name) {
            return Err(RuleError::BadVariableName(name));
        }
        if !is_valid_var_type(&var_type) {
            return Err(RuleError::BadVariableType(var_type));
        }
        Ok(Self { name, var_type })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn var_type(&self) -> &str {
        &self.var_type
    }
}

impl fmt::Display for TypedVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.var_type, self.name)
    }
}

/// One uppercase letter optionally followed by one digit: X, Y, Z, Z1, A, B2.
pub fn is_valid_var_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_uppercase() => {}
        _ => return false,
    }
    match chars.next() {
        None => true,
        Some(d) if d.is_ascii_digit() => chars.next().is_none(),
        Some(_) => false,
    }
}

/// One or two words, each starting with an uppercase ASCII letter.
pub fn is_valid_var_type(phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split(' ').collect();
    if words.is_empty() || words.len() > 2 {
        return false;
    }
    words.iter().all(|w| {
        let mut chars = w.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
            && chars.all(|c| c.is_ascii_alphabetic())
    })
}

/// Non-empty camel case, no whitespace: starts uppercase, alphanumeric.
pub fn is_valid_predicate(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// A predicate over exactly two typed variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    predicate: String,
    arg1: TypedVariable,
    arg2: TypedVariable,
}

impl Fact {
    pub fn new(
        predicate: impl Into<String>,
        arg1: TypedVariable,
        arg2: TypedVariable,
    ) -> Result<Self, RuleError> {
        let predicate = predicate.into();
        if !is_valid_predicate(&predicate) {
            return Err(RuleError::BadPredicate(predicate));
        }
        Ok(Self {
            predicate,
            arg1,
            arg2,
        })
    }

    pub fn predicate(&self) -> &str {
        &self.predicate
    }

    pub fn arg1(&self) -> &TypedVariable {
        &self.arg1
    }

    pub fn arg2(&self) -> &TypedVariable {
        &self.arg2
    }

    pub fn args(&self) -> [&TypedVariable; 2] {
        [&self.arg1, &self.arg2]
    }

    /// True when either argument is named `name`.
    pub fn mentions(&self, name: &str) -> bool {
        self.arg1.name() == name || self.arg2.name() == name
    }

    /// Same predicate and positionally identical argument types.
    pub fn matches_signature(&self, other: &Fact) -> bool {
        self.predicate == other.predicate
            && self.arg1.var_type() == other.arg1.var_type()
            && self.arg2.var_type() == other.arg2.var_type()
    }

    /// Copy of the fact with a different predicate name.
    pub fn with_predicate(&self, predicate: impl Into<String>) -> Result<Fact, RuleError> {
        Fact::new(predicate, self.arg1.clone(), self.arg2.clone())
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.predicate, self.arg1, self.arg2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Affordance,
    Accessibility,
    Interaction,
    Location,
    Need,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Affordance,
        Domain::Accessibility,
        Domain::Interaction,
        Domain::Location,
        Domain::Need,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Affordance => "affordance",
            Domain::Accessibility => "accessibility",
            Domain::Interaction => "interaction",
            Domain::Location => "location",
            Domain::Need => "need",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        let norm = s.trim().to_ascii_lowercase();
        for d in Domain::ALL {
            if norm == d.as_str() || norm.contains(d.as_str()) {
                return Some(d);
            }
        }
        // Table-style abbreviations.
        match norm.as_str() {
            "aff" | "aff." => Some(Domain::Affordance),
            "acc" | "acc." => Some(Domain::Accessibility),
            "int" | "int." => Some(Domain::Interaction),
            "loc" | "loc." => Some(Domain::Location),
            "person's need" | "persons need" => Some(Domain::Need),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Single,
    Transitive,
    Disjunctive,
    DisjunctiveTransitive,
}

impl Structure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Structure::Single => "single",
            Structure::Transitive => "transitive",
            Structure::Disjunctive => "disjunctive",
            Structure::DisjunctiveTransitive => "disjunctive_transitive",
        }
    }
}

/// How a rule entered the base. `Intermediate` marks primitives that were
/// generated as sub-rules for chaining; the distinction is not recoverable
/// from the rule shape, so it travels with the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    DiversifiedForward,
    DiversifiedBackward,
    Composed,
    Imported,
    Intermediate,
}

/// Tri-state human verification verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verification {
    Accepted,
    Rejected,
    Uncertain,
}

/// An inferential rule plus its bookkeeping metadata.
///
/// Construction validates every structural invariant: the conclusion is over
/// `X` then `Y`, the premise holds 1 to 6 facts, no variable name carries two
/// different types, and the depth stays within 0 to 3. Polarity and structure
/// are computed, never stored externally.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    conclusion: Fact,
    premise: Vec<Fact>,
    domain: Domain,
    depth: u8,
    polarity: Polarity,
    structure: Structure,
    provenance: Provenance,
    verified: Option<Verification>,
}

impl Rule {
    /// Builds a rule against the default vocabulary.
    pub fn new(
        conclusion: Fact,
        premise: Vec<Fact>,
        domain: Domain,
        provenance: Provenance,
    ) -> Result<Self, RuleError> {
        Self::new_with(
            conclusion,
            premise,
            domain,
            provenance,
            crate::default_vocab(),
        )
    }

    /// Builds a rule, computing polarity and structure from `vocab`.
    pub fn new_with(
        conclusion: Fact,
        premise: Vec<Fact>,
        domain: Domain,
        provenance: Provenance,
        vocab: &Vocabulary,
    ) -> Result<Self, RuleError> {
        if conclusion.arg1.name() != "X" || conclusion.arg2.name() != "Y" {
            return Err(RuleError::ConclusionVariables(
                conclusion.arg1.name().to_string(),
                conclusion.arg2.name().to_string(),
            ));
        }
        if premise.is_empty() || premise.len() > MAX_RULE_LENGTH {
            return Err(RuleError::LengthOutOfRange(premise.len()));
        }
        check_type_consistency(&conclusion, &premise)?;
        let polarity = predicate_polarity(conclusion.predicate(), vocab);
        let structure = classify_structure(&premise, vocab);
        Ok(Self {
            conclusion,
            premise,
            domain,
            depth: 0,
            polarity,
            structure,
            provenance,
            verified: None,
        })
    }

    pub fn conclusion(&self) -> &Fact {
        &self.conclusion
    }

    pub fn premise(&self) -> &[Fact] {
        &self.premise
    }

    /// Number of premise facts.
    pub fn length(&self) -> usize {
        self.premise.len()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn verified(&self) -> Option<Verification> {
        self.verified
    }

    pub fn set_depth(&mut self, depth: u8) -> Result<(), RuleError> {
        if depth > MAX_RULE_DEPTH {
            return Err(RuleError::DepthOutOfRange(depth));
        }
        self.depth = depth;
        Ok(())
    }

    pub fn set_domain(&mut self, domain: Domain) {
        self.domain = domain;
    }

    pub fn set_provenance(&mut self, provenance: Provenance) {
        self.provenance = provenance;
    }

    pub fn set_verified(&mut self, verdict: Option<Verification>) {
        self.verified = verdict;
    }

    /// Canonical textual form; the inverse of parsing.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// Structural comparison of the symbolic content, ignoring metadata.
    pub fn same_symbolic(&self, other: &Rule) -> bool {
        self.conclusion == other.conclusion && self.premise == other.premise
    }

    /// Every distinct variable in order of first appearance, conclusion first.
    pub fn variables(&self) -> Vec<&TypedVariable> {
        let mut seen: Vec<&TypedVariable> = Vec::new();
        for fact in std::iter::once(&self.conclusion).chain(self.premise.iter()) {
            for arg in fact.args() {
                if !seen.iter().any(|v| v.name() == arg.name()) {
                    seen.push(arg);
                }
            }
        }
        seen
    }

    /// Copy with the conclusion predicate's negation toggled and polarity
    /// flipped; the premise is untouched. Applying it twice restores the
    /// original predicate for the shipped negation lexicon.
    pub fn negate_conclusion(&self) -> Rule {
        self.negate_conclusion_with(crate::default_vocab())
    }

    pub fn negate_conclusion_with(&self, vocab: &Vocabulary) -> Rule {
        let negated = toggle_negation(self.conclusion.predicate(), vocab);
        let conclusion = self
            .conclusion
            .with_predicate(negated)
            .expect("toggling negation keeps the predicate well-formed");
        let polarity = predicate_polarity(conclusion.predicate(), vocab);
        Rule {
            conclusion,
            polarity,
            ..self.clone()
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:- ", self.conclusion)?;
        for (i, fact) in self.premise.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fact}")?;
        }
        f.write_str(".")
    }
}

fn check_type_consistency(conclusion: &Fact, premise: &[Fact]) -> Result<(), RuleError> {
    let mut types: BTreeMap<&str, &str> = BTreeMap::new();
    for fact in std::iter::once(conclusion).chain(premise.iter()) {
        for arg in fact.args() {
            match types.get(arg.name()) {
                None => {
                    types.insert(arg.name(), arg.var_type());
                }
                Some(&earlier) if earlier != arg.var_type() => {
                    return Err(RuleError::InconsistentType {
                        variable: arg.name().to_string(),
                        earlier: earlier.to_string(),
                        later: arg.var_type().to_string(),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Splits a camel-case identifier into segments. A boundary sits before an
/// uppercase letter that follows a lowercase letter or digit, and before the
/// last uppercase letter of an uppercase run followed by a lowercase letter,
/// so `CanNotEat` gives `[Can, Not, Eat]` and `IsABook` gives `[Is, A, Book]`.
pub fn camel_segments(identifier: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = identifier.char_indices().collect();
    let mut cuts = vec![0];
    for i in 1..chars.len() {
        let (pos, cur) = chars[i];
        if !cur.is_ascii_uppercase() {
            continue;
        }
        let prev = chars[i - 1].1;
        let next_lower = chars
            .get(i + 1)
            .map(|&(_, c)| c.is_ascii_lowercase())
            .unwrap_or(false);
        if prev.is_ascii_lowercase()
            || prev.is_ascii_digit()
            || (prev.is_ascii_uppercase() && next_lower)
        {
            cuts.push(pos);
        }
    }
    cuts.push(identifier.len());
    cuts.windows(2)
        .map(|w| &identifier[w[0]..w[1]])
        .filter(|s| !s.is_empty())
        .collect()
}

/// True when a negation segment occurs in the predicate. Matching is
/// segment-exact (`Noteworthy` is not negative), and the `Un` entry only
/// matches as the leading segment.
pub fn contains_negation_segment(predicate: &str, vocab: &Vocabulary) -> bool {
    find_negation_segment(predicate, vocab).is_some()
}

fn find_negation_segment(predicate: &str, vocab: &Vocabulary) -> Option<usize> {
    let segments = camel_segments(predicate);
    for (i, segment) in segments.iter().enumerate() {
        for neg in vocab.negation_segments() {
            if segment == neg && (neg != "Un" || i == 0) {
                return Some(i);
            }
        }
    }
    None
}

pub fn predicate_polarity(predicate: &str, vocab: &Vocabulary) -> Polarity {
    if contains_negation_segment(predicate, vocab) {
        Polarity::Negative
    } else {
        Polarity::Positive
    }
}

/// Toggles negation on a predicate: the first negation segment is removed
/// when present; otherwise `Not` is inserted after a leading modal prefix,
/// or prepended when there is none.
pub fn toggle_negation(predicate: &str, vocab: &Vocabulary) -> String {
    let segments = camel_segments(predicate);
    if let Some(i) = find_negation_segment(predicate, vocab) {
        let mut out = String::with_capacity(predicate.len());
        for (j, segment) in segments.iter().enumerate() {
            if j != i {
                out.push_str(segment);
            }
        }
        return out;
    }
    let modal_leading = segments
        .first()
        .map(|first| vocab.modal_prefixes().iter().any(|m| m == first))
        .unwrap_or(false);
    if modal_leading {
        let mut out = String::with_capacity(predicate.len() + 3);
        out.push_str(segments[0]);
        out.push_str("Not");
        for segment in &segments[1..] {
            out.push_str(segment);
        }
        out
    } else {
        format!("Not{predicate}")
    }
}
