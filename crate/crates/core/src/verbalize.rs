//! Deterministic rule verbalization.
//!
//! A rule renders as `If <fact> and <fact> ..., then <conclusion>.` Each
//! fact uses the vocabulary lexicon when the predicate has an entry;
//! otherwise the predicate is camel-split and lowercased, so `CanDrive`
//! becomes `can drive`. Comparison predicates read as
//! `<arg> is bigger than <arg>`.

use crate::rule::{camel_segments, Fact, Rule};
use crate::vocab::Vocabulary;

/// Renders the full `If ..., then ... .` sentence.
pub fn verbalize_rule(rule: &Rule, vocab: &Vocabulary) -> String {
    format!(
        "{}, then {}",
        premise_clause(rule.premise(), vocab),
        conclusion_sentence(rule, vocab)
    )
}

/// The `If ... and ...` clause without the `then` part or punctuation.
pub fn premise_clause(premise: &[Fact], vocab: &Vocabulary) -> String {
    let rendered: Vec<String> = premise.iter().map(|f| render_fact(f, vocab)).collect();
    format!("If {}", rendered.join(" and "))
}

/// The conclusion as a standalone sentence ending in a period.
pub fn conclusion_sentence(rule: &Rule, vocab: &Vocabulary) -> String {
    format!("{}.", render_fact(rule.conclusion(), vocab))
}

/// Renders one fact as `<Type Var> <verb phrase> <Type Var>`.
pub fn render_fact(fact: &Fact, vocab: &Vocabulary) -> String {
    let phrase = match vocab.phrase_for(fact.predicate()) {
        Some(entry) => entry.to_string(),
        None if vocab.is_comparison_predicate(fact.predicate()) => {
            format!("is {}", fallback_phrase(fact.predicate()))
        }
        None => fallback_phrase(fact.predicate()),
    };
    format!("{} {} {}", fact.arg1(), phrase, fact.arg2())
}

fn fallback_phrase(predicate: &str) -> String {
    camel_segments(predicate)
        .iter()
        .map(|s| s.to_ascii_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}
