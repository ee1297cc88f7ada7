//! Shared fixtures for the integration and acceptance suites.
#![allow(dead_code)] // each test binary uses its own subset

use std::path::Path;

use ruleforge::client::{CompletionRequest, MockClient};
use ruleforge::parse::{parse_fact, parse_rule};
use ruleforge::prompts::{
    critic_request, step1_request, step2_request, PremiseArity, PromptParams,
};
use ruleforge::rule::{Domain, Rule};

pub const FIXTURE_RULES: &str = include_str!("../fixtures/rules.txt");

pub fn fixture_rules() -> Vec<Rule> {
    FIXTURE_RULES
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| parse_rule(line).unwrap_or_else(|e| panic!("fixture `{line}`: {e}")))
        .collect()
}

pub fn fixture_lines() -> Vec<&'static str> {
    FIXTURE_RULES
        .lines()
        .filter(|line| !line.trim().is_empty())
        .collect()
}

fn generation_params() -> PromptParams {
    PromptParams {
        model: "gpt-4".to_string(),
        temperature: 0.7,
        max_tokens: 512,
    }
}

fn critic_params() -> PromptParams {
    PromptParams {
        model: "gpt-4".to_string(),
        temperature: 0.0,
        max_tokens: 512,
    }
}

fn write(dir: &Path, request: &CompletionRequest, reply: &str) {
    MockClient::write_fixture(dir, request, reply).expect("fixture file writes");
}

const SINGLE_CANEAT: &str = "1. CanEat(Person X, Food Y):- Likes(Person X, Food Y);\nIf Person X likes Food Y, then Person X can eat Food Y.";
const MULTI_CANEAT: &str = "1. CanEat(Person X, Food Y):- Have(Person X, Money Z1), PricedAt(Food Y, Money Z2), BiggerThan(Money Z1, Money Z2);\nIf Person X has Money Z1 and Food Y is priced at Money Z2 and Money Z1 is bigger than Money Z2, then Person X can eat Food Y.";
const SINGLE_CANNOTEAT: &str = "1. CanNotEat(Person X, Food Y):- Dislikes(Person X, Food Y);\nIf Person X dislikes Food Y, then Person X cannot eat Food Y.";
const MULTI_CANNOTEAT: &str = "1. CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z);\nIf Person X is allergic to Substance Z and Food Y contains Substance Z, then Person X cannot eat Food Y.\n2. CanNotEat(Person X, Food Y):- CanNotAccess(Person X, Food Z);\nIf Person X cannot access Food Z, then Person X cannot eat Food Y.";

const SINGLE_CANDRIVE: &str = "1. CanDrive(Person X, Vehicle Y):- LicensedFor(Person X, Vehicle Y);\nIf Person X is licensed for Vehicle Y, then Person X can drive Vehicle Y.";
const MULTI_CANDRIVE: &str = "1. CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2);\nIf Person X has Age Z1 and the minimum age requirement for driving Vehicle Y is Age Z2, Age Z1 is bigger than Age Z2, then Person X can drive Vehicle Y.\n2. CanDrive(Person X, Vehicle Y):- Obtain(Person X, Authorization Z), RequiredForDriving(Authorization Z, Vehicle Y);\nIf Person X have obtained a specific Authorization Z and Authorization Z is required for driving Vehicle Y, then Person X can drive Vehicle Y.";
const SINGLE_CANNOTDRIVE: &str = "1. CanNotDrive(Person X, Vehicle Y):- Fears(Person X, Vehicle Y);\nIf Person X fears Vehicle Y, then Person X cannot drive Vehicle Y.";
const SINGLE_MUSTINSURE: &str = "1. MustInsure(Person X, Vehicle Y):- CanDrive(Person X, Vehicle Y);\nIf Person X can drive Vehicle Y, then Person X must insure Vehicle Y.";

/// Verbalizations attached to the step-2 fixtures, used to key the critic
/// fixtures to the exact requests the pipeline will send.
const CRITIC_TABLE: &[(&str, &str)] = &[
    ("If Person X likes Food Y, then Person X can eat Food Y.", "True. Because taste preference enables eating."),
    ("If Person X has Money Z1 and Food Y is priced at Money Z2 and Money Z1 is bigger than Money Z2, then Person X can eat Food Y.", "True. Because affordability enables eating."),
    ("If Person X dislikes Food Y, then Person X cannot eat Food Y.", "False. Because dislike does not imply inability."),
    ("If Person X is allergic to Substance Z and Food Y contains Substance Z, then Person X cannot eat Food Y.", "True. Because allergy to a contained substance prevents eating."),
    ("If Person X is licensed for Vehicle Y, then Person X can drive Vehicle Y.", "True. Because a license authorizes driving."),
    ("If Person X has Age Z1 and the minimum age requirement for driving Vehicle Y is Age Z2, Age Z1 is bigger than Age Z2, then Person X can drive Vehicle Y.", "True. Because the age requirement is met."),
    ("If Person X have obtained a specific Authorization Z and Authorization Z is required for driving Vehicle Y, then Person X can drive Vehicle Y.", "True. Because the required authorization is held."),
    ("If Person X fears Vehicle Y, then Person X cannot drive Vehicle Y.", "False. Because fear alone does not prevent driving."),
    ("If Person X can drive Vehicle Y, then Person X must insure Vehicle Y.", "True. Because drivers must insure their vehicles."),
];

/// Config matching the fixture scenario below: one domain, two pairs.
pub fn generate_config_toml(checkpoint: Option<&Path>) -> String {
    generate_config_toml_with(checkpoint, 1)
}

pub fn generate_config_toml_with(checkpoint: Option<&Path>, concurrency: usize) -> String {
    let mut text = String::from(
        "domains = [\"affordance\"]\npairs = [[\"Person\", \"Food\"], [\"Person\", \"Vehicle\"]]\nseed = 7\n",
    );
    text.push_str(&format!("concurrency = {concurrency}\n"));
    if let Some(path) = checkpoint {
        text.push_str(&format!("checkpoint = \"{}\"\n", path.display()));
    }
    text
}

/// Number of rules the scenario keeps in the store.
pub const EXPECTED_KEPT: u64 = 10;

/// Writes every mock fixture for the two-cell generate scenario. With
/// `include_second_pair` false the (Person, Vehicle) cell has no fixtures,
/// which makes that cell fail for interruption tests.
pub fn write_generate_fixtures(dir: &Path, include_second_pair: bool) {
    let vocab = ruleforge::default_vocab();
    let gen = generation_params();
    let bias = Some(5.0);

    // (Person, Food) cell.
    write(
        dir,
        &step1_request("Person", "Food", Domain::Affordance, &gen),
        "Predicate: CanEat(Person X, Food Y)",
    );
    let caneat = parse_fact("CanEat(Person X, Food Y)").unwrap();
    let cannoteat = parse_fact("CanNotEat(Person X, Food Y)").unwrap();
    write(
        dir,
        &step2_request(
            &caneat,
            Domain::Affordance,
            PremiseArity::SingleFact,
            bias,
            &gen,
            vocab,
        ),
        SINGLE_CANEAT,
    );
    write(
        dir,
        &step2_request(
            &caneat,
            Domain::Affordance,
            PremiseArity::MultiFact,
            bias,
            &gen,
            vocab,
        ),
        MULTI_CANEAT,
    );
    write(
        dir,
        &step2_request(
            &cannoteat,
            Domain::Affordance,
            PremiseArity::SingleFact,
            bias,
            &gen,
            vocab,
        ),
        SINGLE_CANNOTEAT,
    );
    write(
        dir,
        &step2_request(
            &cannoteat,
            Domain::Affordance,
            PremiseArity::MultiFact,
            bias,
            &gen,
            vocab,
        ),
        MULTI_CANNOTEAT,
    );

    if include_second_pair {
        write(
            dir,
            &step1_request("Person", "Vehicle", Domain::Affordance, &gen),
            "Predicate: CanDrive(Person X, Vehicle Y)\nPredicate: MustInsure(Person X, Vehicle Y)",
        );
        let candrive = parse_fact("CanDrive(Person X, Vehicle Y)").unwrap();
        let cannotdrive = parse_fact("CanNotDrive(Person X, Vehicle Y)").unwrap();
        let mustinsure = parse_fact("MustInsure(Person X, Vehicle Y)").unwrap();
        let mustnotinsure = parse_fact("MustNotInsure(Person X, Vehicle Y)").unwrap();
        for (fact, arity, reply) in [
            (&candrive, PremiseArity::SingleFact, SINGLE_CANDRIVE),
            (&candrive, PremiseArity::MultiFact, MULTI_CANDRIVE),
            (&cannotdrive, PremiseArity::SingleFact, SINGLE_CANNOTDRIVE),
            (&cannotdrive, PremiseArity::MultiFact, "None."),
            (&mustinsure, PremiseArity::SingleFact, SINGLE_MUSTINSURE),
            (&mustinsure, PremiseArity::MultiFact, "None."),
            (&mustnotinsure, PremiseArity::SingleFact, "None."),
            (&mustnotinsure, PremiseArity::MultiFact, "None."),
        ] {
            write(
                dir,
                &step2_request(fact, Domain::Affordance, arity, bias, &gen, vocab),
                reply,
            );
        }
    }

    let critic = critic_params();
    for (verbal, reply) in CRITIC_TABLE {
        write(
            dir,
            &critic_request(verbal, Domain::Affordance, &critic),
            reply,
        );
    }
}
