//! Toolchain for symbolic commonsense inference rules.
//!
//! The crate covers the full life of a rule base:
//!
//! - [`rule`] / [`parse`] / [`verbalize`]: the `Conclusion:- Premise` AST,
//!   its grammar, canonical serialization and deterministic verbalization.
//! - [`validate`]: heuristic filters (variable-graph grammaticality,
//!   primitiveness, triviality).
//! - [`chain`]: forward/backward chaining, diversification and seeded
//!   compositional expansion.
//! - [`probe`]: five-template dual-sided entailment probing with
//!   chain-of-thought wording, answer parsing and accuracy aggregation.
//! - [`client`] / [`prompts`] / [`pipeline`]: the generation pipeline behind
//!   a pluggable chat-completion client, fully runnable offline against
//!   mock fixtures.
//! - [`distill`] / [`metrics`]: instruction-dataset construction and the
//!   BLEU / Self-BLEU / fact-count evaluation metrics.
//! - [`store`]: JSONL persistence, statistics and external imports.

pub mod chain;
pub mod client;
pub mod distill;
pub mod metrics;
pub mod parse;
pub mod pipeline;
pub mod probe;
pub mod prompts;
pub mod rule;
pub mod store;
pub mod validate;
pub mod verbalize;
pub mod vocab;

use std::sync::OnceLock;

use vocab::Vocabulary;

/// Shared default vocabulary instance.
pub fn default_vocab() -> &'static Vocabulary {
    static DEFAULT: OnceLock<Vocabulary> = OnceLock::new();
    DEFAULT.get_or_init(Vocabulary::default)
}

#[cfg(test)]
pub(crate) mod test_util {
    use crate::rule::{Fact, Rule, TypedVariable};

    /// Parses a rule, panicking with the offending text on failure.
    pub fn rule(text: &str) -> Rule {
        crate::parse::parse_rule(text).unwrap_or_else(|e| panic!("fixture `{text}`: {e}"))
    }

    /// Builds a fact from (type, name) argument pairs.
    pub fn fact(predicate: &str, arg1: (&str, &str), arg2: (&str, &str)) -> Fact {
        Fact::new(
            predicate,
            TypedVariable::new(arg1.0, arg1.1).unwrap(),
            TypedVariable::new(arg2.0, arg2.1).unwrap(),
        )
        .unwrap()
    }
}
