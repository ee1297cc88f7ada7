//! Instruction-tuning dataset construction for the three rule tasks:
//! conclusion generation, premise completion and premise generation.
//!
//! Instances serialize to JSONL as
//! `{task, instruction, input, output: {prolog, natural_language}, meta}`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::Task;
use crate::rule::{Fact, Rule};
use crate::store::rule_id;
use crate::verbalize::{conclusion_sentence, premise_clause, render_fact};
use crate::vocab::Vocabulary;

/// How premise-completion cuts are chosen for a rule of length n: every
/// prefix cut (n-1 instances) or a single seeded one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    AllPrefixSplits,
    OneRandomSplit,
}

impl SplitPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "all_prefix_splits" => Some(SplitPolicy::AllPrefixSplits),
            "random" | "one_random_split" => Some(SplitPolicy::OneRandomSplit),
            _ => None,
        }
    }
}

/// Premise size bucket used by the premise-generation task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FactBucket {
    One,
    Two,
    MoreThanTwo,
}

impl FactBucket {
    pub fn from_length(length: usize) -> FactBucket {
        match length {
            0 | 1 => FactBucket::One,
            2 => FactBucket::Two,
            _ => FactBucket::MoreThanTwo,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FactBucket::One => "1 fact",
            FactBucket::Two => "2 facts",
            FactBucket::MoreThanTwo => "more than 2 facts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionOutput {
    pub prolog: String,
    pub natural_language: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub source_rule_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact_count_spec: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionInstance {
    pub task: Task,
    pub instruction: String,
    pub input: String,
    pub output: InstructionOutput,
    pub meta: InstanceMeta,
}

const CONCLUSION_INSTRUCTION: &str = "Given the premise, please generate its conclusion between X and Y in both Prolog and natural language.\nThe conclusion in Prolog should have the same meaning with the conclusion in natural language.\nEach conclusion should contain only two variables X and Y without mentioning other variables, like A, B, C, Z.";

const COMPLETION_INSTRUCTION: &str = "Given the conclusion and a part of its premise, please complete the remaining portion of the premise in both Prolog and natural language.\nThe remaining premise in Prolog should have the same meaning with the remaining premise in natural language.\nEach fact in the remaining premise should contain two variables, like X, Y, Z, Z1, Z2, A, B.";

const GENERATION_INSTRUCTION: &str = "Given the conclusion, please generate three different premises in both Prolog and natural language, ensuring that each Prolog premise conveys the same meaning as its natural language counterpart.\nEach premise should contain a specified number of facts, with each fact comprising only two variables, such as X, Y, Z, Z1, Z2, A, B.";

fn facts_prolog(facts: &[Fact]) -> String {
    facts
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn facts_sentence(facts: &[Fact], vocab: &Vocabulary) -> String {
    let rendered: Vec<String> = facts.iter().map(|f| render_fact(f, vocab)).collect();
    format!("{}.", rendered.join(" and "))
}

fn conclusion_generation_instance(rule: &Rule, vocab: &Vocabulary) -> InstructionInstance {
    InstructionInstance {
        task: Task::ConclusionGeneration,
        instruction: CONCLUSION_INSTRUCTION.to_string(),
        input: format!("Premise: {}.", premise_clause(rule.premise(), vocab)),
        output: InstructionOutput {
            prolog: rule.conclusion().to_string(),
            natural_language: conclusion_sentence(rule, vocab),
        },
        meta: InstanceMeta {
            source_rule_ids: vec![rule_id(rule)],
            fact_count_spec: None,
        },
    }
}

fn premise_completion_instance(rule: &Rule, cut: usize, vocab: &Vocabulary) -> InstructionInstance {
    let given = &rule.premise()[..cut];
    let hidden = &rule.premise()[cut..];
    InstructionInstance {
        task: Task::PremiseCompletion,
        instruction: COMPLETION_INSTRUCTION.to_string(),
        input: format!(
            "Conclusion: {}\nPartial Premise: {},",
            conclusion_sentence(rule, vocab),
            premise_clause(given, vocab),
        ),
        output: InstructionOutput {
            prolog: facts_prolog(hidden),
            natural_language: facts_sentence(hidden, vocab),
        },
        meta: InstanceMeta {
            source_rule_ids: vec![rule_id(rule)],
            fact_count_spec: None,
        },
    }
}

/// Builds the full three-task dataset.
///
/// Conclusion generation emits one instance per rule. Premise completion
/// emits, for every rule with at least two facts, one instance per prefix
/// cut (or one seeded cut under [`SplitPolicy::OneRandomSplit`]). Premise
/// generation emits one instance per distinct conclusion, grouping up to
/// three premises drawn from the conclusion's best-populated fact bucket.
/// Output is deterministic for a fixed seed and policy.
pub fn build_instruction_dataset(
    rules: &[Rule],
    policy: SplitPolicy,
    seed: u64,
    vocab: &Vocabulary,
) -> Vec<InstructionInstance> {
    let mut instances = Vec::new();
    for rule in rules {
        instances.push(conclusion_generation_instance(rule, vocab));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for rule in rules {
        let n = rule.length();
        if n < 2 {
            continue;
        }
        match policy {
            SplitPolicy::AllPrefixSplits => {
                for cut in 1..n {
                    instances.push(premise_completion_instance(rule, cut, vocab));
                }
            }
            SplitPolicy::OneRandomSplit => {
                let cut = rng.gen_range(1..n);
                instances.push(premise_completion_instance(rule, cut, vocab));
            }
        }
    }

    // Group premises by distinct conclusion, in first-occurrence order.
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<&Rule>> =
        std::collections::HashMap::new();
    for rule in rules {
        let key = rule.conclusion().to_string();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(rule);
    }
    for key in order {
        let members = &groups[&key];
        let bucket = pick_bucket(members);
        let chosen: Vec<&&Rule> = members
            .iter()
            .filter(|r| FactBucket::from_length(r.length()) == bucket)
            .take(3)
            .collect();
        let conclusion = conclusion_sentence(chosen[0], vocab);
        let prolog: Vec<String> = chosen
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{}. {}", i + 1, facts_prolog(r.premise())))
            .collect();
        let natural: Vec<String> = chosen
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{}. {}.", i + 1, premise_clause(r.premise(), vocab)))
            .collect();
        instances.push(InstructionInstance {
            task: Task::PremiseGeneration,
            instruction: GENERATION_INSTRUCTION.to_string(),
            input: format!(
                "Fact number: {}\nConclusion: {}",
                bucket.label(),
                conclusion
            ),
            output: InstructionOutput {
                prolog: prolog.join("\n"),
                natural_language: natural.join("\n"),
            },
            meta: InstanceMeta {
                source_rule_ids: chosen.iter().map(|r| rule_id(r)).collect(),
                fact_count_spec: Some(bucket.label().to_string()),
            },
        });
    }
    instances
}

/// The bucket holding the most premises for a conclusion; ties go to the
/// smaller bucket.
fn pick_bucket(members: &[&Rule]) -> FactBucket {
    let buckets = [FactBucket::One, FactBucket::Two, FactBucket::MoreThanTwo];
    let counts: Vec<usize> = buckets
        .iter()
        .map(|b| {
            members
                .iter()
                .filter(|r| FactBucket::from_length(r.length()) == *b)
                .count()
        })
        .collect();
    let best = counts.iter().copied().max().unwrap_or(0);
    buckets[counts.iter().position(|&c| c == best).unwrap_or(0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::rule;

    const EQ1: &str = "CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z).";

    #[test]
    fn one_rule_of_length_three_yields_the_expected_instances() {
        let rules = vec![rule(
            "CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2).",
        )];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let count = |t: Task| instances.iter().filter(|i| i.task == t).count();
        assert_eq!(count(Task::ConclusionGeneration), 1);
        assert_eq!(count(Task::PremiseCompletion), 2);
        assert_eq!(count(Task::PremiseGeneration), 1);
        assert_eq!(instances.len(), 4);
    }

    #[test]
    fn conclusion_generation_formats_premise_and_outputs() {
        let rules = vec![rule(EQ1)];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let conc = &instances[0];
        assert_eq!(conc.task, Task::ConclusionGeneration);
        assert_eq!(
            conc.input,
            "Premise: If Person X is allergic to Substance Z and Food Y contains Substance Z."
        );
        assert_eq!(conc.output.prolog, "CanNotEat(Person X, Food Y)");
        assert_eq!(conc.output.natural_language, "Person X cannot eat Food Y.");
        assert!(conc.instruction.contains("only two variables X and Y"));
    }

    #[test]
    fn premise_completion_hides_each_suffix() {
        let rules = vec![rule(EQ1)];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let completion: Vec<&InstructionInstance> = instances
            .iter()
            .filter(|i| i.task == Task::PremiseCompletion)
            .collect();
        assert_eq!(completion.len(), 1);
        assert_eq!(
            completion[0].input,
            "Conclusion: Person X cannot eat Food Y.\nPartial Premise: If Person X is allergic to Substance Z,"
        );
        assert_eq!(completion[0].output.prolog, "Contains(Food Y, Substance Z)");
        assert_eq!(
            completion[0].output.natural_language,
            "Food Y contains Substance Z."
        );
    }

    #[test]
    fn counts_match_the_prefix_split_formula() {
        let rules = vec![
            rule(EQ1),
            rule("P(Person X, Food Y):- Q(Person X, Food Y)."),
            rule("CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2)."),
            rule("C(Person X, Event Y):- WorksFor(Person X, Organization Z), Pays(Organization Z, Money Z1), RequiresFee(Event Y, Money Z2), BiggerThan(Money Z1, Money Z2)."),
        ];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let lens = [2usize, 1, 3, 4];
        let expected_completion: usize = lens.iter().map(|n| n.saturating_sub(1)).sum();
        let count = |t: Task| instances.iter().filter(|i| i.task == t).count();
        assert_eq!(count(Task::ConclusionGeneration), rules.len());
        assert_eq!(count(Task::PremiseCompletion), expected_completion);
    }

    #[test]
    fn one_random_split_is_seed_deterministic() {
        let rules = vec![
            rule("C(Person X, Event Y):- WorksFor(Person X, Organization Z), Pays(Organization Z, Money Z1), RequiresFee(Event Y, Money Z2), BiggerThan(Money Z1, Money Z2)."),
            rule(EQ1),
        ];
        let a = build_instruction_dataset(
            &rules,
            SplitPolicy::OneRandomSplit,
            7,
            crate::default_vocab(),
        );
        let b = build_instruction_dataset(
            &rules,
            SplitPolicy::OneRandomSplit,
            7,
            crate::default_vocab(),
        );
        assert_eq!(a, b);
        let count = |is: &[InstructionInstance], t: Task| is.iter().filter(|i| i.task == t).count();
        assert_eq!(count(&a, Task::PremiseCompletion), 2);
    }

    #[test]
    fn premise_generation_groups_by_conclusion_and_bucket() {
        let rules = vec![
            rule("Has(Person X, Skill Y):- Learned(Person X, Skill Y)."),
            rule("Has(Person X, Skill Y):- Inherit(Person X, Skill Y)."),
            rule("Has(Person X, Skill Y):- Acquire(Person X, Skill Y)."),
            rule("Has(Person X, Skill Y):- WorksAt(Person X, Job Z), Teaches(Job Z, Skill Y)."),
        ];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let gen: Vec<&InstructionInstance> = instances
            .iter()
            .filter(|i| i.task == Task::PremiseGeneration)
            .collect();
        assert_eq!(gen.len(), 1);
        let instance = gen[0];
        assert_eq!(
            instance.input,
            "Fact number: 1 fact\nConclusion: Person X has Skill Y."
        );
        assert_eq!(
            instance.output.prolog,
            "1. Learned(Person X, Skill Y)\n2. Inherit(Person X, Skill Y)\n3. Acquire(Person X, Skill Y)"
        );
        assert_eq!(instance.meta.source_rule_ids.len(), 3);
        assert_eq!(instance.meta.fact_count_spec.as_deref(), Some("1 fact"));
    }

    #[test]
    fn distinct_conclusions_each_get_an_instance() {
        let rules = vec![
            rule(EQ1),
            rule("P(Person X, Food Y):- Q(Person X, Food Y)."),
        ];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let gen = instances
            .iter()
            .filter(|i| i.task == Task::PremiseGeneration)
            .count();
        assert_eq!(gen, 2);
    }

    #[test]
    fn empty_input_builds_an_empty_dataset() {
        assert!(build_instruction_dataset(
            &[],
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab()
        )
        .is_empty());
    }

    #[test]
    fn jsonl_shape_is_stable() {
        let rules = vec![rule(EQ1)];
        let instances = build_instruction_dataset(
            &rules,
            SplitPolicy::AllPrefixSplits,
            0,
            crate::default_vocab(),
        );
        let line = serde_json::to_value(&instances[0]).unwrap();
        assert_eq!(line["task"], "conclusion_generation");
        assert!(line["output"]["prolog"].is_string());
        assert!(line["output"]["natural_language"].is_string());
        assert!(line["meta"]["source_rule_ids"].is_array());
    }
}
