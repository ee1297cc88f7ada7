//! Dual-sided entailment probing.
//!
//! Every rule renders into five instruction templates, each probing both the
//! original rule and a flipped copy whose conclusion is negated. Following
//! the Law of Non-Contradiction, a responder is scored correct on a rule
//! only when it affirms the original (True/Right/Yes) and denies the flip
//! (False/Wrong/No), which zeroes out constant-answer strategies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rule::Rule;
use crate::verbalize::{conclusion_sentence, premise_clause, verbalize_rule};
use crate::vocab::Vocabulary;

pub const TEMPLATE_IDS: [u8; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbeError {
    #[error("template id must be 1..=5, got {0}")]
    BadTemplateId(u8),
    #[error("no results for template {0}; every template needs at least one")]
    MissingTemplate(u8),
    #[error("no results to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeForm {
    Verbalized,
    Symbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotStrategy {
    AnswerExplain,
    ThinkAnswer,
    SelfConsistency,
}

impl CotStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            CotStrategy::AnswerExplain => "answer_explain",
            CotStrategy::ThinkAnswer => "think_answer",
            CotStrategy::SelfConsistency => "self_consistency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "answer_explain" => Some(CotStrategy::AnswerExplain),
            "think_answer" => Some(CotStrategy::ThinkAnswer),
            "self_consistency" => Some(CotStrategy::SelfConsistency),
            _ => None,
        }
    }
}

/// Label pair for one template: `(True, False)`, `(Right, Wrong)` or
/// `(Yes, No)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateLabels {
    pub positive: &'static str,
    pub negative: &'static str,
}

pub fn template_labels(template_id: u8) -> Result<TemplateLabels, ProbeError> {
    match template_id {
        1 => Ok(TemplateLabels {
            positive: "True",
            negative: "False",
        }),
        2 => Ok(TemplateLabels {
            positive: "Right",
            negative: "Wrong",
        }),
        3..=5 => Ok(TemplateLabels {
            positive: "Yes",
            negative: "No",
        }),
        other => Err(ProbeError::BadTemplateId(other)),
    }
}

/// A rendered probe: the original statement and its conclusion-flipped twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInstance {
    pub rule_id: String,
    pub template_id: u8,
    pub form: ProbeForm,
    pub cot: CotStrategy,
    pub original_text: String,
    pub flipped_text: String,
    pub positive_token: String,
    pub negative_token: String,
}

fn instruction_sentence(template_id: u8) -> &'static str {
    match template_id {
        1 => "True or False? Please predict whether the input rule is very likely to be true",
        2 => "Right or Wrong? Please predict whether the input rule is valid and correct",
        3 => "Yes or No? Please predict whether the premise entails the conclusion",
        _ => unreachable!("slot templates handled separately"),
    }
}

/// Appends the chain-of-thought wording to an instruction stem that has no
/// trailing period yet.
fn apply_cot(stem: &str, cot: CotStrategy) -> String {
    match cot {
        CotStrategy::AnswerExplain => format!("{stem}, and also explain why."),
        CotStrategy::ThinkAnswer => format!(
            "{stem}. Please first briefly explain your thought process in one sentence, and then give your answer."
        ),
        CotStrategy::SelfConsistency => format!(
            "{stem}. Please first generate three different sentences to respectively explain your three thought processes briefly, and then based on the corresponding thought to give your answer. Finally, output the final answer according to majority voting."
        ),
    }
}

fn rule_text(rule: &Rule, form: ProbeForm, vocab: &Vocabulary) -> String {
    match form {
        ProbeForm::Verbalized => verbalize_rule(rule, vocab),
        ProbeForm::Symbolic => rule.canonical(),
    }
}

fn premise_text(rule: &Rule, form: ProbeForm, vocab: &Vocabulary) -> String {
    match form {
        ProbeForm::Verbalized => premise_clause(rule.premise(), vocab),
        ProbeForm::Symbolic => rule
            .premise()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn conclusion_text(rule: &Rule, form: ProbeForm, vocab: &Vocabulary) -> String {
    match form {
        ProbeForm::Verbalized => conclusion_sentence(rule, vocab),
        ProbeForm::Symbolic => rule.conclusion().to_string(),
    }
}

fn render_side(
    rule: &Rule,
    template_id: u8,
    form: ProbeForm,
    cot: CotStrategy,
    vocab: &Vocabulary,
) -> String {
    match template_id {
        1..=3 => {
            let instruction = apply_cot(instruction_sentence(template_id), cot);
            format!("{instruction}\nRule: {}", rule_text(rule, form, vocab))
        }
        4 => {
            let premise = premise_text(rule, form, vocab);
            let conclusion = conclusion_text(rule, form, vocab);
            let question = apply_cot(
                "Does premise entail conclusion? Please answer Yes or No",
                cot,
            );
            format!("Premise: {premise}, Conclusion: {conclusion} {question}")
        }
        5 => {
            let premise = premise_text(rule, form, vocab);
            let conclusion = conclusion_text(rule, form, vocab);
            let conclusion = conclusion.trim_end_matches('.');
            let question = apply_cot("Please answer Yes or No", cot);
            format!("Given the observations {premise}, can we draw the conclusion {conclusion}? {question}")
        }
        _ => unreachable!("validated before rendering"),
    }
}

/// Renders the original/flipped probe pair for one rule and template.
pub fn render_probe(
    rule: &Rule,
    rule_id: &str,
    template_id: u8,
    form: ProbeForm,
    cot: CotStrategy,
    vocab: &Vocabulary,
) -> Result<ProbeInstance, ProbeError> {
    let labels = template_labels(template_id)?;
    let flipped = rule.negate_conclusion_with(vocab);
    Ok(ProbeInstance {
        rule_id: rule_id.to_string(),
        template_id,
        form,
        cot,
        original_text: render_side(rule, template_id, form, cot, vocab),
        flipped_text: render_side(&flipped, template_id, form, cot, vocab),
        positive_token: labels.positive.to_string(),
        negative_token: labels.negative.to_string(),
    })
}

/// Two-shot demonstration block: the correct rule labeled with the positive
/// token first, then the incorrect rule labeled negative. `degenerate` is
/// set when both rules are the same.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationBlock {
    pub text: String,
    pub degenerate: bool,
}

pub fn build_demonstrations(
    correct_rule: &Rule,
    incorrect_rule: &Rule,
    template_id: u8,
    _cot: CotStrategy,
    vocab: &Vocabulary,
) -> Result<DemonstrationBlock, ProbeError> {
    let labels = template_labels(template_id)?;
    let text = format!(
        "Examples:\nInput: {}\nOutput: {}. Because the premise provides sufficient grounds for the conclusion.\nInput: {}\nOutput: {}. Because the premise does not support the conclusion.",
        verbalize_rule(correct_rule, vocab),
        labels.positive,
        verbalize_rule(incorrect_rule, vocab),
        labels.negative,
    );
    Ok(DemonstrationBlock {
        text,
        degenerate: correct_rule.canonical() == incorrect_rule.canonical(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Positive,
    Negative,
    Unparseable,
}

/// Extracts the first standalone label token, case-insensitively. When a
/// `final answer` marker is present (self-consistency outputs), only the
/// text after its last occurrence is scanned. Never fails: outputs without
/// either token are `Unparseable`.
pub fn parse_answer(model_output: &str, template_id: u8) -> Answer {
    let Ok(labels) = template_labels(template_id) else {
        return Answer::Unparseable;
    };
    let lowered = model_output.to_ascii_lowercase();
    let scan_from = lowered
        .rfind("final answer")
        .map(|i| i + "final answer".len())
        .unwrap_or(0);
    let window = &lowered[scan_from..];
    let positive = find_standalone(window, &labels.positive.to_ascii_lowercase());
    let negative = find_standalone(window, &labels.negative.to_ascii_lowercase());
    match (positive, negative) {
        (Some(p), Some(n)) if p < n => Answer::Positive,
        (Some(_), Some(_)) => Answer::Negative,
        (Some(_), None) => Answer::Positive,
        (None, Some(_)) => Answer::Negative,
        (None, None) => Answer::Unparseable,
    }
}

/// Byte offset of the first occurrence of `token` bounded by non-alphanumeric
/// characters on both sides.
fn find_standalone(haystack: &str, token: &str) -> Option<usize> {
    let bytes = haystack.as_bytes();
    let mut start = 0;
    while let Some(found) = haystack[start..].find(token) {
        let at = start + found;
        let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphanumeric();
        let end = at + token.len();
        let after_ok = end >= bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if before_ok && after_ok {
            return Some(at);
        }
        start = at + 1;
    }
    None
}

/// A rule counts as captured only when the original side is affirmed and the
/// flipped side denied. Unparseable answers on either side score false.
pub fn score_dual_side(original: Answer, flipped: Answer) -> bool {
    original == Answer::Positive && flipped == Answer::Negative
}

/// One scored probe, joined by (rule_id, template_id, form, cot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub rule_id: String,
    pub template_id: u8,
    pub form: ProbeForm,
    pub cot: CotStrategy,
    pub original_answer: Answer,
    pub flipped_answer: Answer,
    pub correct: bool,
    pub raw_original: String,
    pub raw_flipped: String,
}

impl ProbeResult {
    pub fn new(instance: &ProbeInstance, raw_original: String, raw_flipped: String) -> ProbeResult {
        let original_answer = parse_answer(&raw_original, instance.template_id);
        let flipped_answer = parse_answer(&raw_flipped, instance.template_id);
        ProbeResult {
            rule_id: instance.rule_id.clone(),
            template_id: instance.template_id,
            form: instance.form,
            cot: instance.cot,
            original_answer,
            flipped_answer,
            correct: score_dual_side(original_answer, flipped_answer),
            raw_original,
            raw_flipped,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Population,
    Sample,
}

/// Accuracy summary across the five templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAggregate {
    pub per_template_accuracy: [f64; 5],
    pub mean_accuracy: f64,
    pub variance: f64,
}

/// Mean and population variance of the per-template accuracies.
pub fn aggregate(results: &[ProbeResult]) -> Result<ProbeAggregate, ProbeError> {
    aggregate_with(results, VarianceMode::Population)
}

pub fn aggregate_with(
    results: &[ProbeResult],
    mode: VarianceMode,
) -> Result<ProbeAggregate, ProbeError> {
    if results.is_empty() {
        return Err(ProbeError::Empty);
    }
    let mut per_template_accuracy = [0.0f64; 5];
    for (slot, template_id) in TEMPLATE_IDS.iter().enumerate() {
        let of_template: Vec<&ProbeResult> = results
            .iter()
            .filter(|r| r.template_id == *template_id)
            .collect();
        if of_template.is_empty() {
            return Err(ProbeError::MissingTemplate(*template_id));
        }
        let correct = of_template.iter().filter(|r| r.correct).count();
        per_template_accuracy[slot] = correct as f64 / of_template.len() as f64;
    }
    let mean_accuracy = per_template_accuracy.iter().sum::<f64>() / 5.0;
    let sum_sq: f64 = per_template_accuracy
        .iter()
        .map(|a| (a - mean_accuracy).powi(2))
        .sum();
    let variance = match mode {
        VarianceMode::Population => sum_sq / 5.0,
        VarianceMode::Sample => sum_sq / 4.0,
    };
    Ok(ProbeAggregate {
        per_template_accuracy,
        mean_accuracy,
        variance,
    })
}
