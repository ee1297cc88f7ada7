//! Heuristic rule filters: grammatical validity over the premise variable
//! graph, primitiveness of types and length, and triviality of doubly
//! negated rules.
//!
//! Checks run independently so a reject carries every applicable reason
//! code, which keeps pipeline debugging honest about why a rule fell out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rule::{contains_negation_segment, Polarity, Rule};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Grammar,
    Primitive,
    Trivial,
}

/// Machine-readable rejection reasons. `label()` is the stable code used in
/// reports; `Display` adds the argument where one exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReasonCode {
    MissingX,
    MissingY,
    DisconnectedComponent,
    NonprimitiveType(String),
    TooManyFacts(usize),
    NegationBothSides,
}

impl ReasonCode {
    pub fn label(&self) -> &'static str {
        match self {
            ReasonCode::MissingX => "missing_X",
            ReasonCode::MissingY => "missing_Y",
            ReasonCode::DisconnectedComponent => "disconnected_component",
            ReasonCode::NonprimitiveType(_) => "nonprimitive_type",
            ReasonCode::TooManyFacts(_) => "too_many_facts",
            ReasonCode::NegationBothSides => "negation_both_sides",
        }
    }

    /// Human-readable explanation of the failure.
    pub fn message(&self) -> String {
        match self {
            ReasonCode::MissingX => "variable X does not occur in the premise".to_string(),
            ReasonCode::MissingY => "variable Y does not occur in the premise".to_string(),
            ReasonCode::DisconnectedComponent => {
                "the premise variable graph is not a single connected component".to_string()
            }
            ReasonCode::NonprimitiveType(t) => {
                format!("variable type `{t}` is not an abstract object or common property")
            }
            ReasonCode::TooManyFacts(n) => {
                format!("premise has {n} facts, more than the 3 allowed for primitive rules")
            }
            ReasonCode::NegationBothSides => {
                "both the conclusion and a premise fact carry a negation".to_string()
            }
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReasonCode::NonprimitiveType(t) => write!(f, "nonprimitive_type({t})"),
            ReasonCode::TooManyFacts(n) => write!(f, "too_many_facts({n})"),
            other => f.write_str(other.label()),
        }
    }
}

impl Serialize for ReasonCode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// Outcome of one check; passes exactly when `reasons` is empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub check: CheckKind,
    pub reasons: Vec<ReasonCode>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.reasons.is_empty()
    }
}

/// Builds the undirected premise variable graph (one node per variable name,
/// one edge per fact) and requires X and Y to occur and the graph to be a
/// single connected component. Conclusion variables do not add nodes.
pub fn check_grammatical_validity(rule: &Rule) -> ValidityReport {
    let mut reasons = Vec::new();
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for fact in rule.premise() {
        let a = fact.arg1().name();
        let b = fact.arg2().name();
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    if !adjacency.contains_key("X") {
        reasons.push(ReasonCode::MissingX);
    }
    if !adjacency.contains_key("Y") {
        reasons.push(ReasonCode::MissingY);
    }
    if !is_connected(&adjacency) {
        reasons.push(ReasonCode::DisconnectedComponent);
    }
    ValidityReport {
        check: CheckKind::Grammar,
        reasons,
    }
}

fn is_connected(adjacency: &BTreeMap<&str, Vec<&str>>) -> bool {
    let Some(start) = adjacency.keys().next() else {
        return true;
    };
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![*start];
    while let Some(node) = stack.pop() {
        if !visited.insert(node) {
            continue;
        }
        for next in &adjacency[node] {
            if !visited.contains(next) {
                stack.push(next);
            }
        }
    }
    visited.len() == adjacency.len()
}

/// A primitive rule uses only vocabulary types and at most 3 premise facts.
pub fn check_primitiveness(rule: &Rule, vocab: &Vocabulary) -> ValidityReport {
    let mut reasons = Vec::new();
    let mut flagged: BTreeSet<&str> = BTreeSet::new();
    for var in rule.variables() {
        if !vocab.is_primitive_type(var.var_type()) && flagged.insert(var.var_type()) {
            reasons.push(ReasonCode::NonprimitiveType(var.var_type().to_string()));
        }
    }
    if rule.length() > 3 {
        reasons.push(ReasonCode::TooManyFacts(rule.length()));
    }
    ValidityReport {
        check: CheckKind::Primitive,
        reasons,
    }
}

/// Trivial rules negate on both sides, such as deriving `CanNotEat` from
/// `CanNotAccess`. A negative conclusion alone is fine.
pub fn check_triviality(rule: &Rule, vocab: &Vocabulary) -> ValidityReport {
    let negative_premise = rule
        .premise()
        .iter()
        .any(|fact| contains_negation_segment(fact.predicate(), vocab));
    let reasons = if rule.polarity() == Polarity::Negative && negative_premise {
        vec![ReasonCode::NegationBothSides]
    } else {
        Vec::new()
    };
    ValidityReport {
        check: CheckKind::Trivial,
        reasons,
    }
}

/// Runs every check on the rule, in a fixed order.
pub fn run_all_checks(rule: &Rule, vocab: &Vocabulary) -> Vec<ValidityReport> {
    vec![
        check_grammatical_validity(rule),
        check_primitiveness(rule, vocab),
        check_triviality(rule, vocab),
    ]
}

/// Partitions rules into those passing all three checks and the rejects with
/// their full reports. Order is preserved and the outcome is deterministic.
pub fn filter_rules(
    rules: &[Rule],
    vocab: &Vocabulary,
) -> (Vec<Rule>, Vec<(Rule, Vec<ValidityReport>)>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for rule in rules {
        let reports = run_all_checks(rule, vocab);
        if reports.iter().all(ValidityReport::passed) {
            kept.push(rule.clone());
        } else {
            rejected.push((rule.clone(), reports));
        }
    }
    (kept, rejected)
}
