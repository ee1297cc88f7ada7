//! Parser for the `Fact ":-" Fact ("," Fact)* "."?` grammar with
//! `Fact := Name "(" Type Var "," Type Var ")"`.
//!
//! Whitespace is arbitrary around tokens; the trailing period is optional on
//! input and always emitted by the serializer. Errors carry the byte offset
//! where parsing stopped.

use thiserror::Error;

use crate::rule::{
    is_valid_predicate, is_valid_var_name, Domain, Fact, Provenance, Rule, RuleError, TypedVariable,
};
use crate::vocab::Vocabulary;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: &'static str,
        found: String,
    },
    #[error("conclusion arguments must be X and Y in order, found ({0}, {1})")]
    ConclusionVariables(String, String),
    #[error("variable `{variable}` used with type `{earlier}` and type `{later}`")]
    InconsistentType {
        variable: String,
        earlier: String,
        later: String,
    },
    #[error("premise must contain between 1 and 6 facts, found {0}")]
    TooManyFacts(usize),
    #[error("{0}")]
    Invalid(RuleError),
}

impl From<RuleError> for ParseError {
    fn from(err: RuleError) -> Self {
        match err {
            RuleError::ConclusionVariables(a, b) => ParseError::ConclusionVariables(a, b),
            RuleError::InconsistentType {
                variable,
                earlier,
                later,
            } => ParseError::InconsistentType {
                variable,
                earlier,
                later,
            },
            RuleError::LengthOutOfRange(n) => ParseError::TooManyFacts(n),
            other => ParseError::Invalid(other),
        }
    }
}

/// Parses one rule against the default vocabulary.
///
/// The result has depth 0, provenance `imported`, and computed length,
/// polarity and structure. The domain defaults to `affordance` until the
/// caller tags it.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    parse_rule_with(text, crate::default_vocab())
}

pub fn parse_rule_with(text: &str, vocab: &Vocabulary) -> Result<Rule, ParseError> {
    let mut cursor = Cursor::new(text);
    let conclusion = cursor.fact()?;
    cursor.expect_implication()?;
    let mut premise = vec![cursor.fact()?];
    loop {
        cursor.skip_ws();
        match cursor.peek() {
            Some(',') => {
                cursor.bump();
                premise.push(cursor.fact()?);
            }
            Some('.') => {
                cursor.bump();
                cursor.expect_end()?;
                break;
            }
            None => break,
            Some(_) => {
                return Err(cursor.unexpected("`,`, `.` or end of rule"));
            }
        }
    }
    Ok(Rule::new_with(
        conclusion,
        premise,
        Domain::Affordance,
        Provenance::Imported,
        vocab,
    )?)
}

/// Parses a single standalone fact such as `CanEat(Person X, Food Y)`.
pub fn parse_fact(text: &str) -> Result<Fact, ParseError> {
    let mut cursor = Cursor::new(text);
    let fact = cursor.fact()?;
    cursor.skip_ws();
    if let Some('.') | Some(';') = cursor.peek() {
        cursor.bump();
    }
    cursor.expect_end()?;
    Ok(fact)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let found = match self.peek() {
            Some(c) => format!("`{c}`"),
            None => "end of input".to_string(),
        };
        ParseError::Syntax {
            position: self.pos,
            expected,
            found,
        }
    }

    fn word(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric()) {
            self.bump();
        }
        (self.pos > start).then(|| &self.src[start..self.pos])
    }

    fn expect_char(&mut self, c: char, expected: &'static str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn expect_implication(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.rest().starts_with(":-") {
            self.pos += 2;
            Ok(())
        } else {
            Err(self.unexpected("`:-`"))
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        if self.peek().is_none() {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn fact(&mut self) -> Result<Fact, ParseError> {
        self.skip_ws();
        let pred_pos = self.pos;
        let predicate = self
            .word()
            .ok_or_else(|| self.unexpected("predicate name"))?;
        if !is_valid_predicate(predicate) {
            return Err(ParseError::Syntax {
                position: pred_pos,
                expected: "camel-case predicate name",
                found: format!("`{predicate}`"),
            });
        }
        self.expect_char('(', "`(`")?;
        let arg1 = self.argument()?;
        self.expect_char(',', "`,`")?;
        let arg2 = self.argument()?;
        self.expect_char(')', "`)`")?;
        Ok(Fact::new(predicate, arg1, arg2).expect("predicate already validated"))
    }

    /// One argument: a one- or two-word capitalized type followed by a
    /// variable name, e.g. `Person X` or `Natural Phenomenon Z1`.
    fn argument(&mut self) -> Result<TypedVariable, ParseError> {
        let mut words: Vec<(usize, &str)> = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            match self.word() {
                Some(w) => words.push((start, w)),
                None => break,
            }
            if words.len() == 3 {
                break;
            }
        }
        if words.len() < 2 {
            return Err(self.unexpected("type phrase followed by a variable name"));
        }
        let (var_pos, var_name) = *words.last().expect("at least two words");
        if !is_valid_var_name(var_name) {
            return Err(ParseError::Syntax {
                position: var_pos,
                expected: "variable name (one uppercase letter, optional digit)",
                found: format!("`{var_name}`"),
            });
        }
        let type_words: Vec<&str> = words[..words.len() - 1].iter().map(|&(_, w)| w).collect();
        let var_type = type_words.join(" ");
        TypedVariable::new(var_type, var_name).map_err(|_| ParseError::Syntax {
            position: words[0].0,
            expected: "capitalized type phrase",
            found: format!("`{}`", type_words.join(" ")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::{Polarity, Structure};

    const EQ1: &str = "CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z).";

    #[test]
    fn parses_the_allergy_rule() {
        let rule = parse_rule(EQ1).unwrap();
        assert_eq!(rule.conclusion().predicate(), "CanNotEat");
        assert_eq!(rule.length(), 2);
        assert_eq!(rule.depth(), 0);
        assert_eq!(rule.polarity(), Polarity::Negative);
        assert_eq!(rule.provenance(), Provenance::Imported);
        assert_eq!(rule.premise()[0].predicate(), "AllergicTo");
        assert_eq!(rule.premise()[1].arg2().var_type(), "Substance");
    }

    #[test]
    fn parses_the_identity_rule() {
        let rule = parse_rule("P(Person X, Food Y):- P(Person X, Food Y).").unwrap();
        assert_eq!(rule.length(), 1);
        assert_eq!(rule.conclusion(), &rule.premise()[0]);
    }

    #[test]
    fn parses_the_driving_age_rule() {
        let rule = parse_rule(
            "CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2).",
        )
        .unwrap();
        assert_eq!(rule.length(), 3);
        assert_eq!(rule.polarity(), Polarity::Positive);
        assert_eq!(rule.structure(), Structure::Disjunctive);
    }

    #[test]
    fn accepts_arbitrary_whitespace_and_optional_period() {
        let spaced = " CanNotEat ( Person X ,Food Y )\n:-  AllergicTo(Person X, Substance Z) ,\tContains(Food Y, Substance Z) ";
        let rule = parse_rule(spaced).unwrap();
        assert_eq!(rule.canonical(), EQ1);
    }

    #[test]
    fn parses_two_word_types() {
        let rule =
            parse_rule("ObservedDuring(Natural Phenomenon X, Time Period Y):- OccursIn(Natural Phenomenon X, Time Period Y).")
                .unwrap();
        assert_eq!(rule.conclusion().arg1().var_type(), "Natural Phenomenon");
        assert_eq!(rule.conclusion().arg2().var_type(), "Time Period");
    }

    #[test]
    fn syntax_error_reports_position_and_expectation() {
        let err =
            parse_rule("CanEat(Person X, Food Y) AllergicTo(Person X, Substance Z).").unwrap_err();
        match err {
            ParseError::Syntax {
                position, expected, ..
            } => {
                assert_eq!(expected, "`:-`");
                assert_eq!(position, 25);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn conclusion_variable_errors() {
        let err = parse_rule("CanEat(Person A, Food B):- Likes(Person A, Food B).").unwrap_err();
        assert_eq!(err, ParseError::ConclusionVariables("A".into(), "B".into()));
    }

    #[test]
    fn inconsistent_types_are_rejected() {
        let err = parse_rule(
            "CanEat(Person X, Food Y):- Likes(Person X, Substance Z), Contains(Food Y, Material Z).",
        )
        .unwrap_err();
        assert_eq!(
            err,
            ParseError::InconsistentType {
                variable: "Z".into(),
                earlier: "Substance".into(),
                later: "Material".into(),
            }
        );
    }

    #[test]
    fn premise_longer_than_six_facts_is_rejected() {
        let facts: Vec<String> = (0..7).map(|i| format!("P{i}(Person X, Food Y)")).collect();
        let text = format!("CanEat(Person X, Food Y):- {}.", facts.join(", "));
        assert_eq!(parse_rule(&text).unwrap_err(), ParseError::TooManyFacts(7));
    }

    #[test]
    fn missing_premise_is_a_syntax_error() {
        let err = parse_rule("CanEat(Person X, Food Y):- .").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn parse_fact_accepts_terminators() {
        let fact = parse_fact("CanBeAdaptedFrom(Show X, Artwork Y)").unwrap();
        assert_eq!(fact.predicate(), "CanBeAdaptedFrom");
        assert!(parse_fact("CanEat(Person X, Food Y);").is_ok());
        assert!(parse_fact("CanEat(Person X, Food Y) trailing").is_err());
    }

    #[test]
    fn serialize_then_parse_is_identity_on_canonical_text() {
        let rule = parse_rule(EQ1).unwrap();
        let reparsed = parse_rule(&rule.canonical()).unwrap();
        assert_eq!(rule, reparsed);
        assert_eq!(reparsed.canonical(), EQ1);
    }
}
