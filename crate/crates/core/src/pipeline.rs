//! Generation pipeline: conclusion preparation, premise generation,
//! heuristic filtering, self-critic judging, diversification, repetition
//! filtering and persistence.
//!
//! Work is organized in (object pair, domain) cells. A client failure
//! aborts only its cell; completed cells are checkpointed so an interrupted
//! run resumes without reprocessing, and the final store bytes match an
//! uninterrupted run. With a mock client and fixed seed the whole pipeline
//! is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{complete_with_retry, ClientError, ModelClient, RetryPolicy};
use crate::parse::{parse_fact, parse_rule_with};
use crate::prompts::{
    critic_request, probe_request, step1_request, step2_request, PremiseArity, PromptParams,
};
use crate::rule::{toggle_negation, Domain, Fact, Provenance, Rule};
use crate::store::{rule_id, RuleRecord, RuleStore, StoreError};
use crate::validate::{run_all_checks, CheckKind, ValidityReport};
use crate::verbalize::verbalize_rule;
use crate::vocab::Vocabulary;
use crate::{chain, probe};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Model and sampling settings for the three prompt kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_temp_generation")]
    pub temperature_generation: f64,
    #[serde(default)]
    pub temperature_critic: f64,
    #[serde(default = "default_logit_bias")]
    pub logit_bias: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_retry_attempts")]
    pub retry_attempts: u32,
}

fn default_model() -> String {
    "gpt-4".to_string()
}
fn default_temp_generation() -> f64 {
    0.7
}
fn default_logit_bias() -> f64 {
    5.0
}
fn default_max_tokens() -> u32 {
    512
}
fn default_retry_attempts() -> u32 {
    5
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            model: default_model(),
            temperature_generation: default_temp_generation(),
            temperature_critic: 0.0,
            logit_bias: default_logit_bias(),
            max_tokens: default_max_tokens(),
            retry_attempts: default_retry_attempts(),
        }
    }
}

impl GenerationParams {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.retry_attempts,
            ..RetryPolicy::default()
        }
    }

    fn generation_prompt_params(&self) -> PromptParams {
        PromptParams {
            model: self.model.clone(),
            temperature: self.temperature_generation,
            max_tokens: self.max_tokens,
        }
    }

    fn critic_prompt_params(&self) -> PromptParams {
        PromptParams {
            model: self.model.clone(),
            temperature: self.temperature_critic,
            max_tokens: self.max_tokens,
        }
    }
}

/// Full run configuration, loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "all_domains")]
    pub domains: Vec<Domain>,
    /// Object pairs to cover. Absent means every unordered pair (with
    /// repetition) over the abstract objects; an explicit empty list is a
    /// vacuous run.
    #[serde(default)]
    pub pairs: Option<Vec<(String, String)>>,
    #[serde(default)]
    pub seed: u64,
    /// Cap on conclusions taken per cell; 0 means no cap.
    #[serde(default)]
    pub max_conclusions_per_cell: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub api_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(flatten)]
    pub params: GenerationParams,
}

fn all_domains() -> Vec<Domain> {
    Domain::ALL.to_vec()
}
fn default_concurrency() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            domains: all_domains(),
            pairs: None,
            seed: 0,
            max_conclusions_per_cell: 0,
            concurrency: 1,
            checkpoint: None,
            api_url: None,
            api_key_env: None,
            params: GenerationParams::default(),
        }
    }
}

/// Every unordered pair of abstract objects, identical pairs included.
pub fn default_pairs(vocab: &Vocabulary) -> Vec<(String, String)> {
    let objects: Vec<&String> = vocab.abstract_objects().iter().collect();
    let mut pairs = Vec::new();
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i..] {
            pairs.push(((*a).clone(), (*b).clone()));
        }
    }
    pairs
}

/// Per-stage accounting; every generated rule lands in exactly one bucket.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub generated: u64,
    pub grammar_rejected: u64,
    pub primitive_rejected: u64,
    pub trivial_rejected: u64,
    pub critic_rejected: u64,
    pub dedup_rejected: u64,
    pub kept: u64,
}

impl StageCounts {
    pub fn is_balanced(&self) -> bool {
        self.generated
            == self.grammar_rejected
                + self.primitive_rejected
                + self.trivial_rejected
                + self.critic_rejected
                + self.dedup_rejected
                + self.kept
    }

    fn absorb(&mut self, other: &StageCounts) {
        self.generated += other.generated;
        self.grammar_rejected += other.grammar_rejected;
        self.primitive_rejected += other.primitive_rejected;
        self.trivial_rejected += other.trivial_rejected;
        self.critic_rejected += other.critic_rejected;
        self.dedup_rejected += other.dedup_rejected;
        self.kept += other.kept;
    }
}

/// Yield accounting for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub totals: StageCounts,
    pub per_domain: BTreeMap<Domain, StageCounts>,
    pub incomplete_cells: Vec<String>,
    pub cells_processed: usize,
    pub cells_skipped: usize,
    pub elapsed_secs: f64,
}

impl PipelineReport {
    pub fn is_balanced(&self) -> bool {
        self.totals.is_balanced() && self.per_domain.values().all(StageCounts::is_balanced)
    }
}

/// A candidate rule mid-pipeline, with its generated verbalization.
#[derive(Debug, Clone)]
pub struct GeneratedRule {
    pub rule: Rule,
    pub verbalization: Option<String>,
    pub fact_count_mismatch: bool,
    pub parent_ids: Vec<String>,
}

impl GeneratedRule {
    pub fn verbalized(&self, vocab: &Vocabulary) -> String {
        self.verbalization
            .clone()
            .unwrap_or_else(|| verbalize_rule(&self.rule, vocab))
    }
}

/// Sorted premise-predicate multiset plus the conclusion predicate; the
/// repetition filter drops any rule whose signature was already kept.
pub fn predicate_signature(rule: &Rule) -> String {
    let mut predicates: Vec<&str> = rule.premise().iter().map(Fact::predicate).collect();
    predicates.sort_unstable();
    format!(
        "{}=>{}",
        predicates.join(","),
        rule.conclusion().predicate()
    )
}

/// Extracts the first `Name(Type Var, Type Var)` span from a response line.
fn extract_fact(line: &str) -> Option<Fact> {
    let open = line.find('(')?;
    let close = line[open..].find(')')? + open;
    let head = &line[..open];
    let pred_start = head
        .rfind(|c: char| !c.is_ascii_alphanumeric())
        .map(|i| i + 1)
        .unwrap_or(0);
    parse_fact(&line[pred_start..=close]).ok()
}

/// Step-1: prompts for predicates connecting an object pair and parses each
/// response line into a conclusion fact. For the affordance, accessibility
/// and interaction domains each conclusion also yields its negated twin.
pub fn prepare_conclusions(
    pair: (&str, &str),
    domain: Domain,
    client: &dyn ModelClient,
    config: &GenerationParams,
    vocab: &Vocabulary,
) -> Result<Vec<Fact>, PipelineError> {
    let request = step1_request(pair.0, pair.1, domain, &config.generation_prompt_params());
    let response = complete_with_retry(client, &request, &config.retry_policy())?;
    let mut conclusions: Vec<Fact> = Vec::new();
    for line in response.lines() {
        let Some(fact) = extract_fact(line) else {
            continue;
        };
        if fact.arg1().name() != "X" || fact.arg2().name() != "Y" {
            log::debug!("skipping conclusion without (X, Y) arguments: {fact}");
            continue;
        }
        if conclusions.contains(&fact) {
            continue;
        }
        let negated = matches!(
            domain,
            Domain::Affordance | Domain::Accessibility | Domain::Interaction
        )
        .then(|| {
            fact.with_predicate(toggle_negation(fact.predicate(), vocab))
                .expect("negated predicate stays well-formed")
        });
        conclusions.push(fact);
        if let Some(neg) = negated {
            if !conclusions.contains(&neg) {
                conclusions.push(neg);
            }
        }
    }
    if conclusions.is_empty() {
        log::warn!(
            "no parseable conclusions for ({}, {}) in {domain}",
            pair.0,
            pair.1
        );
    }
    Ok(conclusions)
}

/// Splits a numbered response into items and parses each `Prolog; verbal`
/// pair into a rule with its attached verbalization.
fn parse_generated_rules(
    response: &str,
    conclusion: &Fact,
    domain: Domain,
    vocab: &Vocabulary,
) -> Vec<GeneratedRule> {
    let mut items: Vec<Vec<&str>> = Vec::new();
    for line in response.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let numbered = trimmed
            .split('.')
            .next()
            .is_some_and(|head| !head.is_empty() && head.chars().all(|c| c.is_ascii_digit()));
        if numbered {
            items.push(vec![trimmed]);
        } else if let Some(current) = items.last_mut() {
            current.push(trimmed);
        }
    }

    let mut rules = Vec::new();
    for item in items {
        let text = item.join("\n");
        let body = match text.split_once('.') {
            Some((_, rest)) => rest.trim(),
            None => continue,
        };
        let (prolog, verbal) = match body.split_once(';') {
            Some((p, v)) => (p.trim(), Some(v.trim().to_string())),
            None => match body.split_once('\n') {
                Some((p, v)) => (p.trim(), Some(v.trim().to_string())),
                None => (body.trim(), None),
            },
        };
        let cleaned = prolog.trim_end_matches([';', ' ']);
        let mut rule = match parse_rule_with(cleaned, vocab) {
            Ok(rule) => rule,
            Err(err) => {
                log::debug!("skipping unparseable generated rule `{cleaned}`: {err}");
                continue;
            }
        };
        if !rule.conclusion().matches_signature(conclusion) {
            log::debug!(
                "skipping generated rule whose conclusion {} is not the requested {conclusion}",
                rule.conclusion()
            );
            continue;
        }
        rule.set_domain(domain);
        rule.set_provenance(Provenance::Generated);
        let verbalization = verbal.filter(|v| !v.is_empty());
        let fact_count_mismatch = verbalization
            .as_deref()
            .map(|v| verbal_fact_count(v) != rule.length())
            .unwrap_or(false);
        rules.push(GeneratedRule {
            rule,
            verbalization,
            fact_count_mismatch,
            parent_ids: Vec::new(),
        });
    }
    rules
}

/// Crude fact counter over a verbalized rule: clauses of the `If` part
/// split on ` and ` and `, `.
fn verbal_fact_count(verbalized: &str) -> usize {
    let premise_part = verbalized
        .split_once(", then")
        .map(|(p, _)| p)
        .unwrap_or(verbalized);
    let premise_part = premise_part.trim_start_matches("If ");
    premise_part
        .split(" and ")
        .flat_map(|clause| clause.split(", "))
        .count()
}

/// Step-2: prompts for premises of one conclusion at the requested arity.
/// Logit bias toward vocabulary types is attached when the client supports
/// it and skipped (with a log line) otherwise.
pub fn generate_premises(
    conclusion: &Fact,
    domain: Domain,
    arity: PremiseArity,
    client: &dyn ModelClient,
    config: &GenerationParams,
    vocab: &Vocabulary,
) -> Result<Vec<GeneratedRule>, PipelineError> {
    let bias = if client.supports_logit_bias() {
        Some(config.logit_bias)
    } else {
        log::info!("client lacks logit-bias support; sending unbiased request");
        None
    };
    let request = step2_request(
        conclusion,
        domain,
        arity,
        bias,
        &config.generation_prompt_params(),
        vocab,
    );
    let response = complete_with_retry(client, &request, &config.retry_policy())?;
    Ok(parse_generated_rules(&response, conclusion, domain, vocab))
}

/// Self-critic verdict; unparseable outputs conservatively reject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticOutcome {
    pub verdict: bool,
    pub explanation: String,
    pub unparseable: bool,
}

/// Step-3b: asks the model to judge one verbalized rule True/False.
pub fn self_critic_filter(
    verbalized_rule: &str,
    domain: Domain,
    client: &dyn ModelClient,
    config: &GenerationParams,
) -> Result<CriticOutcome, PipelineError> {
    let request = critic_request(verbalized_rule, domain, &config.critic_prompt_params());
    let response = complete_with_retry(client, &request, &config.retry_policy())?;
    Ok(parse_critic_reply(&response))
}

fn parse_critic_reply(response: &str) -> CriticOutcome {
    match probe::parse_answer(response, 1) {
        probe::Answer::Positive => CriticOutcome {
            verdict: true,
            explanation: strip_verdict(response, "true"),
            unparseable: false,
        },
        probe::Answer::Negative => CriticOutcome {
            verdict: false,
            explanation: strip_verdict(response, "false"),
            unparseable: false,
        },
        probe::Answer::Unparseable => CriticOutcome {
            verdict: false,
            explanation: "critic_unparseable".to_string(),
            unparseable: true,
        },
    }
}

fn strip_verdict(response: &str, token: &str) -> String {
    let lowered = response.to_ascii_lowercase();
    match lowered.find(token) {
        Some(at) => response[at + token.len()..]
            .trim_start_matches(['.', ',', ':', ';', ' '])
            .trim()
            .to_string(),
        None => response.trim().to_string(),
    }
}

struct CellOutcome {
    survivors: Vec<GeneratedRule>,
    counts: StageCounts,
}

fn first_failed_check(reports: &[ValidityReport]) -> Option<CheckKind> {
    reports.iter().find(|r| !r.passed()).map(|r| r.check)
}

fn bucket_rejection(counts: &mut StageCounts, check: CheckKind) {
    match check {
        CheckKind::Grammar => counts.grammar_rejected += 1,
        CheckKind::Primitive => counts.primitive_rejected += 1,
        CheckKind::Trivial => counts.trivial_rejected += 1,
    }
}

fn process_cell(
    pair: (&str, &str),
    domain: Domain,
    client: &dyn ModelClient,
    config: &PipelineConfig,
    vocab: &Vocabulary,
) -> Result<CellOutcome, PipelineError> {
    let params = &config.params;
    let mut counts = StageCounts::default();

    let mut conclusions = prepare_conclusions(pair, domain, client, params, vocab)?;
    if config.max_conclusions_per_cell > 0 {
        conclusions.truncate(config.max_conclusions_per_cell);
    }

    let mut candidates: Vec<GeneratedRule> = Vec::new();
    for conclusion in &conclusions {
        for arity in [PremiseArity::SingleFact, PremiseArity::MultiFact] {
            candidates.extend(generate_premises(
                conclusion, domain, arity, client, params, vocab,
            )?);
        }
    }
    counts.generated += candidates.len() as u64;

    // Heuristic filters; each reject lands in the bucket of its first
    // failing check even when several apply.
    let mut filtered: Vec<GeneratedRule> = Vec::new();
    for candidate in candidates {
        let reports = run_all_checks(&candidate.rule, vocab);
        match first_failed_check(&reports) {
            None => filtered.push(candidate),
            Some(check) => bucket_rejection(&mut counts, check),
        }
    }

    // Self-critic pass.
    let mut kept: Vec<GeneratedRule> = Vec::new();
    for candidate in filtered {
        let outcome = self_critic_filter(&candidate.verbalized(vocab), domain, client, params)?;
        if outcome.verdict {
            kept.push(candidate);
        } else {
            counts.critic_rejected += 1;
        }
    }

    // Diversify each kept rule with the cell's single-fact pool.
    let pool: Vec<Rule> = kept
        .iter()
        .filter(|g| g.rule.length() == 1)
        .map(|g| g.rule.clone())
        .collect();
    let mut diversified: Vec<GeneratedRule> = Vec::new();
    for source in &kept {
        for derived in chain::diversify_with(&source.rule, &pool, vocab) {
            counts.generated += 1;
            let reports = run_all_checks(&derived, vocab);
            match first_failed_check(&reports) {
                None => diversified.push(GeneratedRule {
                    rule: derived,
                    verbalization: None,
                    fact_count_mismatch: false,
                    parent_ids: vec![rule_id(&source.rule)],
                }),
                Some(check) => bucket_rejection(&mut counts, check),
            }
        }
    }
    kept.extend(diversified);

    Ok(CellOutcome {
        survivors: kept,
        counts,
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Checkpoint {
    completed: BTreeSet<String>,
}

fn load_checkpoint(path: &PathBuf) -> Result<Checkpoint, PipelineError> {
    if !path.exists() {
        return Ok(Checkpoint::default());
    }
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Checkpoint(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Checkpoint(format!("parse {}: {e}", path.display())))
}

fn save_checkpoint(path: &PathBuf, checkpoint: &Checkpoint) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string_pretty(checkpoint).expect("checkpoint serializes");
    fs::write(&tmp, text)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| PipelineError::Checkpoint(format!("write {}: {e}", path.display())))
}

fn cell_key(pair: &(String, String), domain: Domain) -> String {
    format!("{domain}|{}|{}", pair.0, pair.1)
}

/// Runs the full pipeline and appends every kept rule to the store.
pub fn run_pipeline(
    config: &PipelineConfig,
    client: &dyn ModelClient,
    store: &mut RuleStore,
) -> Result<PipelineReport, PipelineError> {
    run_pipeline_with(config, client, store, crate::default_vocab())
}

pub fn run_pipeline_with(
    config: &PipelineConfig,
    client: &dyn ModelClient,
    store: &mut RuleStore,
    vocab: &Vocabulary,
) -> Result<PipelineReport, PipelineError> {
    let started = Instant::now();
    let pairs = match &config.pairs {
        Some(pairs) => pairs.clone(),
        None => default_pairs(vocab),
    };
    let cells: Vec<((String, String), Domain)> = config
        .domains
        .iter()
        .flat_map(|&domain| pairs.iter().map(move |p| (p.clone(), domain)))
        .collect();

    let mut checkpoint = match &config.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => Checkpoint::default(),
    };

    // Rebuild the repetition-filter state from whatever the store already
    // holds, so resumed runs dedup against earlier appends.
    let mut signatures: BTreeSet<String> = BTreeSet::new();
    for record in store.existing_records() {
        if let Ok(rule) = record.to_rule() {
            signatures.insert(predicate_signature(&rule));
        }
    }

    let pending: Vec<&((String, String), Domain)> = cells
        .iter()
        .filter(|(pair, domain)| !checkpoint.completed.contains(&cell_key(pair, *domain)))
        .collect();
    let cells_skipped = cells.len() - pending.len();

    let worker = |(pair, domain): &&((String, String), Domain)| {
        process_cell((&pair.0, &pair.1), *domain, client, config, vocab)
    };
    let outcomes: Vec<Result<CellOutcome, PipelineError>> = if config.concurrency > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.concurrency)
            .build()
            .map_err(|e| PipelineError::Checkpoint(format!("thread pool: {e}")))?;
        pool.install(|| pending.par_iter().map(worker).collect())
    } else {
        pending.iter().map(worker).collect()
    };

    let mut totals = StageCounts::default();
    let mut per_domain: BTreeMap<Domain, StageCounts> = BTreeMap::new();
    let mut incomplete = Vec::new();
    let mut processed = 0usize;

    for ((pair, domain), outcome) in pending.iter().map(|c| (*c).clone()).zip(outcomes) {
        let key = cell_key(&pair, domain);
        match outcome {
            Ok(mut cell) => {
                for generated in cell.survivors.drain(..) {
                    let signature = predicate_signature(&generated.rule);
                    if !signatures.insert(signature) {
                        cell.counts.dedup_rejected += 1;
                        continue;
                    }
                    cell.counts.kept += 1;
                    let record = RuleRecord::from_rule(
                        &generated.rule,
                        generated.verbalization.clone(),
                        generated.parent_ids.clone(),
                    );
                    store.append(&record)?;
                }
                totals.absorb(&cell.counts);
                per_domain.entry(domain).or_default().absorb(&cell.counts);
                checkpoint.completed.insert(key);
                if let Some(path) = &config.checkpoint {
                    save_checkpoint(path, &checkpoint)?;
                }
                processed += 1;
            }
            Err(err) => {
                log::error!("cell {key} failed: {err}");
                incomplete.push(key);
            }
        }
    }

    Ok(PipelineReport {
        totals,
        per_domain,
        incomplete_cells: incomplete,
        cells_processed: processed,
        cells_skipped,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Probe dispatch: sends both sides of an instance through the client and
/// scores the answers.
pub fn dispatch_probe(
    instance: &probe::ProbeInstance,
    demonstrations: Option<&str>,
    client: &dyn ModelClient,
    config: &GenerationParams,
) -> Result<probe::ProbeResult, PipelineError> {
    let params = config.critic_prompt_params();
    let policy = config.retry_policy();
    let original = complete_with_retry(
        client,
        &probe_request(&instance.original_text, demonstrations, &params),
        &policy,
    )?;
    let flipped = complete_with_retry(
        client,
        &probe_request(&instance.flipped_text, demonstrations, &params),
        &policy,
    )?;
    Ok(probe::ProbeResult::new(instance, original, flipped))
}
