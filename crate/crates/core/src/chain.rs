//! Forward and backward chaining over rules.
//!
//! Backward chaining replaces a premise fact with the premise of a sub-rule
//! whose conclusion matches that fact, splicing in place and renaming the
//! sub-rule's auxiliary variables to fresh names. Forward chaining swaps the
//! conclusion for the conclusion of a single-fact sub-rule triggered by it.
//! Composition iterates backward steps to the depth bound; diversification
//! applies one forward and one backward step with single-fact paraphrases.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rule::{
    Fact, Provenance, Rule, RuleError, Structure, TypedVariable, MAX_RULE_DEPTH, MAX_RULE_LENGTH,
};
use crate::vocab::Vocabulary;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("fact index {index} out of range for a premise of {length} facts")]
    FactIndexOutOfRange { index: usize, length: usize },
    #[error("predicate mismatch: expected `{expected}`, found `{found}`")]
    PredicateMismatch { expected: String, found: String },
    #[error("type mismatch at argument {position}: expected `{expected}`, found `{found}`")]
    TypeMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("resulting premise would have {0} facts, above the bound of {MAX_RULE_LENGTH}")]
    LengthOverflow(usize),
    #[error("resulting depth {0} exceeds the bound of {MAX_RULE_DEPTH}")]
    DepthOverflow(u8),
    #[error("sub-rule must have exactly one premise fact, found {0}")]
    NotSingleFact(usize),
    #[error("sub-rule premise must be over X and Y in order to stand in for a conclusion")]
    PremiseNotOverXY,
    #[error("binding failure: {0}")]
    Binding(String),
    #[error(transparent)]
    Invalid(#[from] RuleError),
}

/// Injective substitution from sub-rule variable names to host names, with
/// the variable type carried along. Bound pairs must agree on type.
#[derive(Debug, Default, Clone)]
pub struct Binding {
    map: BTreeMap<String, TypedVariable>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(
        &mut self,
        sub_name: &str,
        sub_type: &str,
        host: TypedVariable,
    ) -> Result<(), ChainError> {
        if sub_type != host.var_type() {
            return Err(ChainError::Binding(format!(
                "cannot bind `{sub_name}`: type `{sub_type}` does not match `{}`",
                host.var_type()
            )));
        }
        if self.map.values().any(|v| v.name() == host.name()) {
            return Err(ChainError::Binding(format!(
                "target variable `{}` already bound",
                host.name()
            )));
        }
        if self.map.insert(sub_name.to_string(), host).is_some() {
            return Err(ChainError::Binding(format!(
                "source variable `{sub_name}` already bound"
            )));
        }
        Ok(())
    }

    pub fn get(&self, sub_name: &str) -> Option<&TypedVariable> {
        self.map.get(sub_name)
    }

    fn apply(&self, fact: &Fact) -> Fact {
        let map_arg = |arg: &TypedVariable| {
            self.map
                .get(arg.name())
                .cloned()
                .unwrap_or_else(|| arg.clone())
        };
        Fact::new(fact.predicate(), map_arg(fact.arg1()), map_arg(fact.arg2()))
            .expect("mapped fact keeps a valid predicate")
    }
}

/// Fresh-name policy: Z, Z1..Z9, then A..W, then A1..W9. X and Y never
/// appear since they are reserved for conclusions.
fn fresh_name(used: &BTreeSet<String>) -> Result<String, ChainError> {
    let letters: Vec<String> = ('A'..='W').map(|c| c.to_string()).collect();
    let mut candidates = Vec::new();
    candidates.push("Z".to_string());
    for d in 1..=9 {
        candidates.push(format!("Z{d}"));
    }
    candidates.extend(letters.iter().cloned());
    for d in 1..=9 {
        for l in &letters {
            candidates.push(format!("{l}{d}"));
        }
    }
    candidates
        .into_iter()
        .find(|c| !used.contains(c))
        .ok_or_else(|| ChainError::Binding("fresh variable names exhausted".to_string()))
}

fn check_signature(expected: &Fact, found: &Fact) -> Result<(), ChainError> {
    if expected.predicate() != found.predicate() {
        return Err(ChainError::PredicateMismatch {
            expected: expected.predicate().to_string(),
            found: found.predicate().to_string(),
        });
    }
    for (position, (e, f)) in expected.args().iter().zip(found.args()).enumerate() {
        if e.var_type() != f.var_type() {
            return Err(ChainError::TypeMismatch {
                position: position + 1,
                expected: e.var_type().to_string(),
                found: f.var_type().to_string(),
            });
        }
    }
    Ok(())
}

/// Splices `sub`'s premise in place of `host.premise[fact_index]` without
/// touching depth or provenance. Shared core of composition and backward
/// diversification.
fn splice_backward(host: &Rule, fact_index: usize, sub: &Rule) -> Result<Vec<Fact>, ChainError> {
    let target = host
        .premise()
        .get(fact_index)
        .ok_or(ChainError::FactIndexOutOfRange {
            index: fact_index,
            length: host.length(),
        })?;
    check_signature(target, sub.conclusion())?;

    let mut binding = Binding::new();
    binding.bind(
        sub.conclusion().arg1().name(),
        sub.conclusion().arg1().var_type(),
        target.arg1().clone(),
    )?;
    if sub.conclusion().arg2().name() != sub.conclusion().arg1().name() {
        binding.bind(
            sub.conclusion().arg2().name(),
            sub.conclusion().arg2().var_type(),
            target.arg2().clone(),
        )?;
    }

    let mut used: BTreeSet<String> = host
        .variables()
        .iter()
        .map(|v| v.name().to_string())
        .collect();
    for fact in sub.premise() {
        for arg in fact.args() {
            if binding.get(arg.name()).is_none() {
                let name = fresh_name(&used)?;
                used.insert(name.clone());
                let fresh = TypedVariable::new(arg.var_type(), name)
                    .expect("fresh names satisfy the variable pattern");
                binding.bind(arg.name(), arg.var_type(), fresh)?;
            }
        }
    }

    let mut premise = Vec::with_capacity(host.length() - 1 + sub.length());
    premise.extend_from_slice(&host.premise()[..fact_index]);
    premise.extend(sub.premise().iter().map(|f| binding.apply(f)));
    premise.extend_from_slice(&host.premise()[fact_index + 1..]);
    Ok(premise)
}

/// One backward-chaining step: the selected premise fact is replaced by the
/// premise of `sub`, the depth grows by one and the length becomes
/// `host.length + sub.length - 1`.
pub fn backward_chain(host: &Rule, fact_index: usize, sub: &Rule) -> Result<Rule, ChainError> {
    backward_chain_with(host, fact_index, sub, crate::default_vocab())
}

pub fn backward_chain_with(
    host: &Rule,
    fact_index: usize,
    sub: &Rule,
    vocab: &Vocabulary,
) -> Result<Rule, ChainError> {
    if fact_index >= host.length() {
        return Err(ChainError::FactIndexOutOfRange {
            index: fact_index,
            length: host.length(),
        });
    }
    check_signature(&host.premise()[fact_index], sub.conclusion())?;
    let result_length = host.length() - 1 + sub.length();
    if result_length > MAX_RULE_LENGTH {
        return Err(ChainError::LengthOverflow(result_length));
    }
    let result_depth = host.depth() + 1;
    if result_depth > MAX_RULE_DEPTH {
        return Err(ChainError::DepthOverflow(result_depth));
    }
    let premise = splice_backward(host, fact_index, sub)?;
    let mut rule = Rule::new_with(
        host.conclusion().clone(),
        premise,
        host.domain(),
        Provenance::Composed,
        vocab,
    )?;
    rule.set_depth(result_depth)?;
    Ok(rule)
}

/// One forward-chaining step: `sub` must be a single-fact rule whose premise
/// matches the host conclusion; the host keeps its premise and adopts
/// `sub`'s conclusion. Depth and length are unchanged.
pub fn forward_chain(host: &Rule, sub: &Rule) -> Result<Rule, ChainError> {
    forward_chain_with(host, sub, crate::default_vocab())
}

pub fn forward_chain_with(host: &Rule, sub: &Rule, vocab: &Vocabulary) -> Result<Rule, ChainError> {
    if sub.length() != 1 {
        return Err(ChainError::NotSingleFact(sub.length()));
    }
    let trigger = &sub.premise()[0];
    check_signature(trigger, host.conclusion())?;
    if trigger.arg1().name() != "X" || trigger.arg2().name() != "Y" {
        return Err(ChainError::PremiseNotOverXY);
    }
    let mut rule = Rule::new_with(
        sub.conclusion().clone(),
        host.premise().to_vec(),
        host.domain(),
        Provenance::DiversifiedForward,
        vocab,
    )?;
    rule.set_depth(host.depth())?;
    Ok(rule)
}

/// Derives up to two predicate paraphrases of `rule`: one forward-chained
/// (from the first pool rule triggered by the conclusion) and one
/// backward-chained on the first premise fact. Depth is unchanged for both;
/// pool entries must be single-fact rules.
pub fn diversify(rule: &Rule, pool: &[Rule]) -> Vec<Rule> {
    diversify_with(rule, pool, crate::default_vocab())
}

pub fn diversify_with(rule: &Rule, pool: &[Rule], vocab: &Vocabulary) -> Vec<Rule> {
    let mut out = Vec::new();
    let forward_match = pool.iter().filter(|p| p.length() == 1).find(|p| {
        let trigger = &p.premise()[0];
        trigger.matches_signature(rule.conclusion())
            && trigger.arg1().name() == "X"
            && trigger.arg2().name() == "Y"
    });
    if let Some(sub) = forward_match {
        if let Ok(derived) = forward_chain_with(rule, sub, vocab) {
            out.push(derived);
        }
    }
    let backward_match = pool
        .iter()
        .filter(|p| p.length() == 1)
        .find(|p| p.conclusion().matches_signature(&rule.premise()[0]));
    if let Some(sub) = backward_match {
        if let Ok(premise) = splice_backward(rule, 0, sub) {
            if let Ok(mut derived) = Rule::new_with(
                rule.conclusion().clone(),
                premise,
                rule.domain(),
                Provenance::DiversifiedBackward,
                vocab,
            ) {
                if derived.set_depth(rule.depth()).is_ok() {
                    out.push(derived);
                }
            }
        }
    }
    out
}

/// Expands a primitive base by iterated backward chaining.
///
/// For each depth step, every rule of the previous level picks one premise
/// fact uniformly at random (seeded) among the facts that have at least one
/// matching multi-fact primitive, then chains with every match. Expansions
/// beyond `max_length` are skipped and duplicates (by canonical text) are
/// dropped. The output contains only composed rules, tagged with depth.
pub fn compose_rulebase(
    primitives: &[Rule],
    max_depth: u8,
    max_length: usize,
    seed: u64,
) -> Vec<Rule> {
    compose_rulebase_with(
        primitives,
        max_depth,
        max_length,
        seed,
        crate::default_vocab(),
    )
}

pub fn compose_rulebase_with(
    primitives: &[Rule],
    max_depth: u8,
    max_length: usize,
    seed: u64,
    vocab: &Vocabulary,
) -> Vec<Rule> {
    let pool: Vec<&Rule> = primitives.iter().filter(|r| r.length() >= 2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out: Vec<Rule> = Vec::new();
    let mut frontier: Vec<Rule> = primitives.to_vec();
    for _ in 1..=max_depth {
        let mut next = Vec::new();
        for host in &frontier {
            let candidates: Vec<usize> = (0..host.length())
                .filter(|&i| {
                    pool.iter()
                        .any(|p| p.conclusion().matches_signature(&host.premise()[i]))
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let index = candidates[rng.gen_range(0..candidates.len())];
            for sub in pool
                .iter()
                .filter(|p| p.conclusion().matches_signature(&host.premise()[index]))
            {
                match backward_chain_with(host, index, sub, vocab) {
                    Ok(composed)
                        if composed.length() <= max_length && seen.insert(composed.canonical()) =>
                    {
                        next.push(composed.clone());
                        out.push(composed);
                    }
                    _ => {}
                }
            }
        }
        frontier = next;
    }
    out
}

/// Classifies a premise shape.
///
/// Single-fact premises are `single`. Otherwise, comparison facts are those
/// with a comparison predicate over two common-property types: none present
/// means `transitive`; present with every other fact touching X or Y means
/// `disjunctive`; anything else is `disjunctive_transitive`. The result is
/// independent of premise order.
pub fn classify_structure(premise: &[Fact], vocab: &Vocabulary) -> Structure {
    if premise.len() <= 1 {
        return Structure::Single;
    }
    let is_comparison = |fact: &Fact| {
        vocab.is_comparison_predicate(fact.predicate())
            && fact
                .args()
                .iter()
                .all(|arg| vocab.is_common_property(arg.var_type()))
    };
    if !premise.iter().any(&is_comparison) {
        return Structure::Transitive;
    }
    let anchored = premise
        .iter()
        .filter(|f| !is_comparison(f))
        .all(|f| f.mentions("X") || f.mentions("Y"));
    if anchored {
        Structure::Disjunctive
    } else {
        Structure::DisjunctiveTransitive
    }
}
