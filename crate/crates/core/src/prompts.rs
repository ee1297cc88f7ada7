//! Versioned prompt assets and request builders.
//!
//! Prompt text is fixed verbatim (including its original typos) so request
//! fingerprints stay stable across releases; substitution slots are filled
//! by the builder functions. Tests rebuild the same requests to key their
//! mock fixtures.

use std::collections::BTreeMap;

use crate::client::{CompletionRequest, Message};
use crate::rule::{Domain, Fact};
use crate::vocab::Vocabulary;

/// Model/sampling knobs shared by the builders.
#[derive(Debug, Clone)]
pub struct PromptParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

/// Domain wording used in the conclusion-preparation slot.
pub fn domain_description(domain: Domain) -> &'static str {
    match domain {
        Domain::Affordance => "object affordance",
        Domain::Accessibility => "object accessibility",
        Domain::Interaction => "object interaction",
        Domain::Location => "object location",
        Domain::Need => "person's need",
    }
}

/// Domain-specific rule description line for premise generation.
pub fn premise_rule_description(domain: Domain) -> &'static str {
    match domain {
        Domain::Affordance => "The rules should describe object affordance based on its property (such as height, age, price) and requirement (such as required skill, source, tool).",
        Domain::Accessibility => "The rules should describe object accessibility based on its physical condition, spatial and temporal restriction.",
        Domain::Interaction => "The rules should describe object interaction based on its physical, spatial or temporal properties (such as speed, hardness, density, height, time period).",
        Domain::Location => "The rules should describe the location information of an object.",
        Domain::Need => "The rules should describe person's need to take an action over the object.",
    }
}

/// Builds the Step-1 conclusion-preparation prompt for an object pair.
pub fn step1_request(
    object1: &str,
    object2: &str,
    domain: Domain,
    params: &PromptParams,
) -> CompletionRequest {
    let prompt = format!(
        "According to commonsense knowledge in reality, please list 5 predicates between the given two objects to describe the {}.\nExamples:\nObject: Show, Artwork\nPredicate: CanBeAdaptedFrom(Show X, Artwork Y)\n\nObject: {}, {}\nPredicate:",
        domain_description(domain),
        object1,
        object2,
    );
    CompletionRequest::new(
        &params.model,
        vec![Message::user(prompt)],
        params.temperature,
        params.max_tokens,
    )
    .expect("single user message is well-formed")
}

/// Whether Step-2 asks for single-fact or multi-fact premises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PremiseArity {
    SingleFact,
    MultiFact,
}

fn arity_line(arity: PremiseArity) -> &'static str {
    match arity {
        PremiseArity::MultiFact => "Each rule should contain multiple premises and each premise should contain two variables in (X, Y, Z, Z1, Z2).",
        PremiseArity::SingleFact => "Each rule should contain a single premise and the premise should contain two variables in (X, Y).",
    }
}

fn premise_demonstrations(domain: Domain) -> &'static str {
    match domain {
        Domain::Affordance => "Conclusion: CanCook(Person X, Food Y)\nRules:\n1. CanCook(Person X, Food Y):- CanUse(Person X, Tool Z), UsedForCook(Tool Z, Food Y);\nIf Person X can use Tool Z which is used for cooking Food Y, then Person X can cook Food Y.\n2. CanCook(Person X, Food Y):- Master(Person X, Skill Z), RequiredForCooking(Skill Z, Food Y);\nIf Person X has mastered Skill Z which is required for cooking Food Y, then Person X can cook Food Y.\n\nConclusion: CanDrive(Person X, Vehicle Y)\nRules:\n1. CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2);\nIf Person X has Age Z1 and the minimum age requirement for driving Vehicle Y is Age Z2, Age Z1 is bigger than Age Z2, then Person X can drive Vehicle Y.\n2. CanDrive(Person X, Vehicle Y):- Obtain(Person X, Authorization Z), RequiredForDriving(Authorization Z, Vehicle Y);\nIf Person X have obtained a specific Authorization Z and Authorization Z is required for driving Vehicle Y, then Person X can drive Vehicle Y.",
        Domain::Accessibility => "Conclusion: CanAccess(Person X, Show Y)\nRules:\n1. CanAccess(Person X, Show Y):- LocatedIn(Person X, Region Z), BroadcastIn(Show Y, Region Z);\nIf Person X is located in Region Z and Show Y is broadcast in Region Z, then Person X can access Show Y.\n2. CanAccess(Person X, Show Y):- Obtain(Person X, Authorization Z), RequiredForEntry(Authorization Z, Show Y);\nIf Person X has obtained Authorization Z and Authorization Z is required for entry to Show Y, then Person X can access Show Y.\n\nConclusion: CanNotAccess(Person X, Tool Y)\nRules:\n1. CanNotAccess(Person X, Tool Y):- AllergicTo(Person X, Material Z), MadeOf(Tool Y, Material Z);\nIf Person X is allergic to Material Z and Tool Y is made of Material Z, then Person X cannot access Tool Y.\n2. CanNotAccess(Person X, Tool Y):- LocatedIn(Person X, Region Z), BannedIn(Tool Y, Region Z);\nIf Person X is located in Region Z and Tool Y is banned in Region Z, then Person X cannot access Tool Y.",
        Domain::Interaction => "Conclusion: CanSubmergeIn(Substance X, Substance Y)\nRules:\n1. CanSubmergeIn(Substance X, Substance Y):- DensityOf(Substance X, Density Z1), DensityOf(Substance Y, Density Z2), BiggerThan(Density Z1, Density Z2);\nIf Substance X has density Density Z1 and Substance Y has density Density Z2 and Density Z1 is bigger than Density Z2, then Substance X can submerge in Substance Y.\n\nConclusion: CanFitIn(Tool X, Tool Y)\nRules:\n1. CanFitIn(Tool X, Tool Y):- SizeOf(Tool X, Size Z1), SizeOf(Tool Y, Size Z2), SmallerThan(Size Z1, Size Z2);\nIf Tool X has size Size Z1 and Tool Y has size Size Z2 and Size Z1 is smaller than Size Z2, then Tool X can fit in Tool Y.",
        Domain::Location => "Conclusion: OriginatedFrom(Food X, Region Y)\nRules:\n1. OriginatedFrom(Food X, Region Y):- ProcessedIn(Food X, Facility Z), LocatedIn(Facility Z, Region Y);\nIf Food X is processed in Facility Z and Facility Z is located in Region Y, then Food X originated from Region Y.\n\nConclusion: BannedIn(Drug X, Region Y)\nRules:\n1. BannedIn(Drug X, Region Y):- ProhibitedBy(Drug X, Legislation Z), EnforcedIn(Legislation Z, Region Y);\nIf Drug X is prohibited by Legislation Z and Legislation Z is enforced in Region Y, then Drug X is banned in Region Y.",
        Domain::Need => "Conclusion: NeedToConsume(Person X, Drug Y)\nRules:\n1. NeedToConsume(Person X, Drug Y):- Has(Person X, Disease Z), CanTreat(Drug Y, Disease Z);\nIf Person X has Disease Z and Drug Y can treat Disease Z, then Person X needs to consume Drug Y.\n\nConclusion: NeedToWater(Person X, Plant Y)\nRules:\n1. NeedToWater(Person X, Plant Y):- Grows(Person X, Plant Y), RequiresWater(Plant Y, Condition Z);\nIf Person X grows Plant Y and Plant Y requires water under Condition Z, then Person X needs to water Plant Y.",
    }
}

/// Builds the Step-2 premise-generation prompt for one conclusion.
pub fn step2_request(
    conclusion: &Fact,
    domain: Domain,
    arity: PremiseArity,
    logit_bias: Option<f64>,
    params: &PromptParams,
    vocab: &Vocabulary,
) -> CompletionRequest {
    let prompt = format!(
        "According to commonsense knowledge in realistic scenarios, please generate 2 logical rules in both Prolog and natural langauge to describe the premises of the given conclusion. The rules in Prolog should have the same meaning with the rules in natural language.\n{}\n{}\nThe premises should not contain negative words such as 'not', 'no', 'never' and 'un-'\n\n{}\n\nConclusion: {}\nRules:",
        arity_line(arity),
        premise_rule_description(domain),
        premise_demonstrations(domain),
        conclusion,
    );
    let request = CompletionRequest::new(
        &params.model,
        vec![Message::user(prompt)],
        params.temperature,
        params.max_tokens,
    )
    .expect("single user message is well-formed");
    match logit_bias {
        Some(bias) => request.with_logit_bias(vocab_bias_map(vocab, bias)),
        None => request,
    }
}

/// Positive bias for every abstract object and common property token.
pub fn vocab_bias_map(vocab: &Vocabulary, bias: f64) -> BTreeMap<String, f64> {
    vocab
        .abstract_objects()
        .iter()
        .chain(vocab.common_properties().iter())
        .map(|token| (token.clone(), bias))
        .collect()
}

fn critic_demonstrations(domain: Domain) -> (String, String) {
    let birth_season = "Input: If Person X was born in Season Z and Plant Y blooms in the same Season Z, then Person X can access Plant Y.\nOutput: False. Because a person's birth season and a plant's blooming season has no logical connection.".to_string();
    let positive = match domain {
        Domain::Affordance => "Input: If Person X has an Age Z1 and Vehicle Y requires an Age above Z2 for driving, with ...\nOutput: True. Because Person X has achieved the ...".to_string(),
        Domain::Accessibility => "Input: If Person X is located in Region Z and Show Y is broadcast in Region Z, then Person X can access Show Y.\nOutput: True. Because a show reaches everyone located where it is broadcast.".to_string(),
        Domain::Interaction => "Input: If Substance X has density Density Z1 and Substance Y has density Density Z2 and Density Z1 is bigger than Density Z2, then Substance X can submerge in Substance Y.\nOutput: True. Because a denser substance sinks into a less dense one.".to_string(),
        Domain::Location => "Input: If Food X is processed in Facility Z and Facility Z is located in Region Y, then Food X originated from Region Y.\nOutput: True. Because food originates where its processing facility is located.".to_string(),
        Domain::Need => "Input: If Person X has Disease Z and Drug Y can treat Disease Z, then Person X needs to consume Drug Y.\nOutput: True. Because a person needs the drug that treats their disease.".to_string(),
    };
    (positive, birth_season)
}

/// Builds the Step-3 self-critic prompt for one verbalized rule.
pub fn critic_request(
    verbalized_rule: &str,
    domain: Domain,
    params: &PromptParams,
) -> CompletionRequest {
    let (demo_true, demo_false) = critic_demonstrations(domain);
    let prompt = format!(
        "True or False? Please predict whether the input rule is accurate or not according to commonsense knowledge in realistic scenarios, and also explain why.\nExamples:\n{demo_true}\n{demo_false}\n\nInput: {verbalized_rule}\nOutput:",
    );
    CompletionRequest::new(
        &params.model,
        vec![Message::user(prompt)],
        params.temperature,
        params.max_tokens,
    )
    .expect("single user message is well-formed")
}

/// Builds a probing request, optionally preceded by a demonstration block.
pub fn probe_request(
    instance_text: &str,
    demonstrations: Option<&str>,
    params: &PromptParams,
) -> CompletionRequest {
    let content = match demonstrations {
        Some(block) => format!("{block}\n\n{instance_text}"),
        None => instance_text.to_string(),
    };
    CompletionRequest::new(
        &params.model,
        vec![Message::user(content)],
        params.temperature,
        params.max_tokens,
    )
    .expect("single user message is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_fact;
    use crate::parse::parse_rule;

    fn params() -> PromptParams {
        PromptParams {
            model: "test-model".into(),
            temperature: 0.7,
            max_tokens: 256,
        }
    }

    #[test]
    fn step1_prompt_carries_domain_and_objects() {
        let req = step1_request("Show", "Artwork", Domain::Affordance, &params());
        let text = &req.messages[0].content;
        assert!(text.starts_with(
            "According to commonsense knowledge in reality, please list 5 predicates"
        ));
        assert!(text.contains("to describe the object affordance."));
        assert!(text.contains("Predicate: CanBeAdaptedFrom(Show X, Artwork Y)"));
        assert!(text.ends_with("Object: Show, Artwork\nPredicate:"));
    }

    #[test]
    fn step2_prompt_varies_by_arity_and_attaches_bias() {
        let conclusion = parse_fact("CanDrive(Person X, Vehicle Y)").unwrap();
        let vocab = crate::default_vocab();
        let multi = step2_request(
            &conclusion,
            Domain::Affordance,
            PremiseArity::MultiFact,
            Some(5.0),
            &params(),
            vocab,
        );
        let text = &multi.messages[0].content;
        assert!(text.contains("generate 2 logical rules in both Prolog and natural langauge"));
        assert!(text.contains("Each rule should contain multiple premises"));
        assert!(text.contains("The premises should not contain negative words"));
        assert!(text.contains("Obtain(Person X, Authorization Z)"));
        assert!(text.ends_with("Conclusion: CanDrive(Person X, Vehicle Y)\nRules:"));
        let bias = multi.logit_bias.as_ref().unwrap();
        assert_eq!(bias.len(), 50);
        assert_eq!(bias["Person"], 5.0);

        let single = step2_request(
            &conclusion,
            Domain::Affordance,
            PremiseArity::SingleFact,
            None,
            &params(),
            vocab,
        );
        assert!(single.messages[0]
            .content
            .contains("Each rule should contain a single premise"));
        assert!(single.logit_bias.is_none());
        assert_ne!(single.fingerprint(), multi.fingerprint());
    }

    #[test]
    fn every_domain_demo_rule_parses() {
        for domain in Domain::ALL {
            for line in premise_demonstrations(domain).lines() {
                if let Some(rest) = line.strip_prefix(|c: char| c.is_ascii_digit()) {
                    let prolog = rest.trim_start_matches(". ").trim_end_matches(';');
                    parse_rule(prolog).unwrap_or_else(|e| panic!("{domain}: {prolog}: {e}"));
                }
            }
        }
    }

    #[test]
    fn critic_prompt_embeds_paired_demonstrations() {
        let req = critic_request(
            "If it rains, then the ground is wet.",
            Domain::Affordance,
            &params(),
        );
        let text = &req.messages[0].content;
        assert!(text.starts_with(
            "True or False? Please predict whether the input rule is accurate or not"
        ));
        assert!(text.contains("Output: True. Because Person X has achieved the ..."));
        assert!(text.contains("Output: False. Because a person's birth season"));
        assert!(text.ends_with("Input: If it rains, then the ground is wet.\nOutput:"));
    }

    #[test]
    fn probe_request_prepends_demonstrations() {
        let plain = probe_request("Rule text", None, &params());
        assert_eq!(plain.messages[0].content, "Rule text");
        let with = probe_request("Rule text", Some("Examples: ..."), &params());
        assert_eq!(with.messages[0].content, "Examples: ...\n\nRule text");
    }
}
