//! Command-line surface over the rule toolchain.
//!
//! Exit codes: 0 on success, 1 on validation failures, 2 on I/O or client
//! errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ruleforge::chain;
use ruleforge::client::{HttpClient, MockClient, ModelClient};
use ruleforge::distill::{build_instruction_dataset, SplitPolicy};
use ruleforge::metrics::{evaluate_generation, EvalOutput, EvalReference, Task};
use ruleforge::pipeline::{self, GenerationParams, PipelineConfig};
use ruleforge::probe::{self, CotStrategy, ProbeForm, ProbeResult};
use ruleforge::rule::Rule;
use ruleforge::store::{
    import_records, load_rulebase, rule_id, save_rulebase, stats, RuleRecord, RuleStore,
};

#[derive(Parser)]
#[command(
    name = "ruleforge",
    about = "Parse, validate, compose, verbalize and probe symbolic inference rules",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every record of a rule base and report problems.
    Validate(ValidateArgs),
    /// Expand a primitive base by iterated backward chaining.
    Compose(ComposeArgs),
    /// Derive predicate paraphrases with a single-fact pool.
    Diversify(DiversifyArgs),
    /// Run dual-sided entailment probes against a client.
    Probe(ProbeArgs),
    /// Run the full generation pipeline from a config file.
    Generate(GenerateArgs),
    /// Build the three-task instruction dataset.
    BuildInstructions(BuildInstructionsArgs),
    /// Score model outputs against references.
    EvalGen(EvalGenArgs),
    /// Print a category-by-domain statistics table.
    Stats(StatsArgs),
    /// Import rules from an external JSON/JSONL release.
    Import(ImportArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "max-depth", default_value_t = 3)]
    max_depth: u8,
    #[arg(long = "max-length", default_value_t = 6)]
    max_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiversifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Template ids: a range like `1..5` or a list like `1,3,5`.
    #[arg(long, default_value = "1..5")]
    templates: String,
    #[arg(long, default_value = "verbalized")]
    form: String,
    #[arg(long, default_value = "answer_explain")]
    cot: String,
    #[arg(long, default_value = "mock")]
    client: String,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "gpt-4")]
    model: String,
    #[arg(long = "api-url")]
    api_url: Option<String>,
    #[arg(long = "api-key-env", default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    /// Skip the built-in two-shot demonstrations.
    #[arg(long)]
    no_demos: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "mock")]
    client: String,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BuildInstructionsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `all` for every prefix split, `random` for one seeded split.
    #[arg(long, default_value = "all")]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalGenArgs {
    #[arg(long)]
    task: String,
    #[arg(long)]
    outputs: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(err: E) -> Self {
        Failure::io(err.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Compose(args) => cmd_compose(args),
        Command::Diversify(args) => cmd_diversify(args),
        Command::Probe(args) => cmd_probe(args),
        Command::Generate(args) => cmd_generate(args),
        Command::BuildInstructions(args) => cmd_build_instructions(args),
        Command::EvalGen(args) => cmd_eval_gen(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Import(args) => cmd_import(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Loads records leniently, warning about skipped lines.
fn load_records(path: &Path) -> Result<Vec<RuleRecord>, Failure> {
    let (records, issues) = load_rulebase(path, false)?;
    for issue in &issues {
        log::warn!("{}:{}: {}", path.display(), issue.line, issue.message);
    }
    Ok(records)
}

fn records_to_rules(records: &[RuleRecord]) -> Vec<Rule> {
    records
        .iter()
        .filter_map(|record| match record.to_rule() {
            Ok(rule) => Some(rule),
            Err(message) => {
                log::warn!("skipping record {}: {message}", record.id);
                None
            }
        })
        .collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), Failure> {
    let mut file =
        fs::File::create(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    for item in items {
        let line = serde_json::to_string(item).expect("item serializes");
        writeln!(file, "{line}").map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    if args.strict {
        match load_rulebase(&args.input, true) {
            Ok((records, _)) => {
                println!("{} records valid", records.len());
                Ok(())
            }
            Err(ruleforge::store::StoreError::InvalidRecord { line, message }) => {
                Err(Failure::validation(format!("line {line}: {message}")))
            }
            Err(err) => Err(Failure::io(err.to_string())),
        }
    } else {
        let (records, issues) = load_rulebase(&args.input, false)?;
        println!("{} records valid, {} invalid", records.len(), issues.len());
        for issue in &issues {
            println!("  line {}: {}", issue.line, issue.message);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Failure::validation(format!(
                "{} invalid records",
                issues.len()
            )))
        }
    }
}

fn cmd_compose(args: ComposeArgs) -> Result<(), Failure> {
    let records = load_records(&args.input)?;
    let rules = records_to_rules(&records);
    let composed = chain::compose_rulebase(&rules, args.max_depth, args.max_length, args.seed);
    let out_records: Vec<RuleRecord> = composed
        .iter()
        .map(|r| RuleRecord::from_rule(r, None, Vec::new()))
        .collect();
    save_rulebase(&out_records, &args.out)?;
    println!(
        "composed {} rules from {} primitives",
        out_records.len(),
        rules.len()
    );
    Ok(())
}

fn cmd_diversify(args: DiversifyArgs) -> Result<(), Failure> {
    let records = load_records(&args.input)?;
    let rules = records_to_rules(&records);
    let pool_records = load_records(&args.pool)?;
    let pool: Vec<Rule> = records_to_rules(&pool_records)
        .into_iter()
        .filter(|r| r.length() == 1)
        .collect();
    let mut out_records = Vec::new();
    for rule in &rules {
        for derived in chain::diversify(rule, &pool) {
            out_records.push(RuleRecord::from_rule(&derived, None, vec![rule_id(rule)]));
        }
    }
    save_rulebase(&out_records, &args.out)?;
    println!(
        "diversified {} rules into {} paraphrases",
        rules.len(),
        out_records.len()
    );
    Ok(())
}

fn parse_templates(raw: &str) -> Result<Vec<u8>, Failure> {
    let raw = raw.trim();
    let ids: Vec<u8> = if let Some((lo, hi)) = raw.split_once("..") {
        let lo: u8 = lo
            .trim()
            .parse()
            .map_err(|_| Failure::io(format!("bad template range `{raw}`")))?;
        let hi: u8 = hi
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| Failure::io(format!("bad template range `{raw}`")))?;
        (lo..=hi).collect()
    } else {
        raw.split(',')
            .map(|part| part.trim().parse::<u8>())
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|_| Failure::io(format!("bad template list `{raw}`")))?
    };
    if ids.is_empty() || ids.iter().any(|t| !(1..=5).contains(t)) {
        return Err(Failure::io(format!(
            "template ids must lie in 1..5, got `{raw}`"
        )));
    }
    Ok(ids)
}

fn build_client(
    kind: &str,
    fixtures: Option<&Path>,
    api_url: Option<&str>,
    api_key_env: &str,
) -> Result<Box<dyn ModelClient>, Failure> {
    match kind {
        "mock" => {
            let dir =
                fixtures.ok_or_else(|| Failure::io("--fixtures is required with --client mock"))?;
            Ok(Box::new(MockClient::from_dir(dir)?))
        }
        "live" => {
            let url = api_url.ok_or_else(|| {
                Failure::io("--api-url (or config api_url) is required with --client live")
            })?;
            Ok(Box::new(HttpClient::from_env(url, api_key_env)))
        }
        other => Err(Failure::io(format!(
            "unknown client `{other}`; use live or mock"
        ))),
    }
}

/// Built-in two-shot probing demonstrations: one sound rule, one spurious.
fn default_demo_rules() -> (Rule, Rule) {
    let correct = ruleforge::parse::parse_rule(
        "CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2).",
    )
    .expect("built-in demo parses");
    let incorrect = ruleforge::parse::parse_rule(
        "CanAccess(Person X, Plant Y):- BornIn(Person X, Time Period Z), BloomsIn(Plant Y, Time Period Z).",
    )
    .expect("built-in demo parses");
    (correct, incorrect)
}

#[derive(serde::Serialize)]
struct ProbeReport {
    aggregate: Option<probe::ProbeAggregate>,
    per_template: BTreeMap<u8, f64>,
    by_length: BTreeMap<usize, f64>,
    by_depth: BTreeMap<u8, f64>,
    by_structure: BTreeMap<String, f64>,
    by_polarity: BTreeMap<String, f64>,
    results: usize,
}

fn accuracy<K: Ord>(pairs: impl Iterator<Item = (K, bool)>) -> BTreeMap<K, f64> {
    let mut tally: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    for (key, correct) in pairs {
        let entry = tally.entry(key).or_insert((0, 0));
        entry.1 += 1;
        if correct {
            entry.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|(k, (hits, total))| (k, hits as f64 / total as f64))
        .collect()
}

fn cmd_probe(args: ProbeArgs) -> Result<(), Failure> {
    let records = load_records(&args.input)?;
    if records.is_empty() {
        return Err(Failure::validation("no valid rules to probe"));
    }
    let templates = parse_templates(&args.templates)?;
    let form = match args.form.as_str() {
        "verbalized" => ProbeForm::Verbalized,
        "symbolic" => ProbeForm::Symbolic,
        other => return Err(Failure::io(format!("unknown form `{other}`"))),
    };
    let cot = CotStrategy::parse(&args.cot)
        .ok_or_else(|| Failure::io(format!("unknown cot strategy `{}`", args.cot)))?;
    let client = build_client(
        &args.client,
        args.fixtures.as_deref(),
        args.api_url.as_deref(),
        &args.api_key_env,
    )?;
    let params = GenerationParams {
        model: args.model.clone(),
        ..GenerationParams::default()
    };
    let vocab = ruleforge::default_vocab();

    let mut results: Vec<ProbeResult> = Vec::new();
    for record in &records {
        let rule = match record.to_rule() {
            Ok(rule) => rule,
            Err(message) => {
                log::warn!("skipping record {}: {message}", record.id);
                continue;
            }
        };
        for &template_id in &templates {
            let demo_block = if args.no_demos {
                None
            } else {
                let (correct, incorrect) = default_demo_rules();
                Some(
                    probe::build_demonstrations(&correct, &incorrect, template_id, cot, vocab)
                        .map_err(|e| Failure::io(e.to_string()))?,
                )
            };
            let instance = probe::render_probe(&rule, &record.id, template_id, form, cot, vocab)
                .map_err(|e| Failure::io(e.to_string()))?;
            let result = pipeline::dispatch_probe(
                &instance,
                demo_block.as_ref().map(|d| d.text.as_str()),
                client.as_ref(),
                &params,
            )
            .map_err(|e| Failure::io(e.to_string()))?;
            results.push(result);
        }
    }

    write_jsonl(&args.out, &results)?;

    let by_id: BTreeMap<&str, &RuleRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let locate = |result: &ProbeResult| by_id.get(result.rule_id.as_str()).copied();
    let report =
        ProbeReport {
            aggregate: probe::aggregate(&results).ok(),
            per_template: accuracy(results.iter().map(|r| (r.template_id, r.correct))),
            by_length: accuracy(
                results
                    .iter()
                    .filter_map(|r| locate(r).map(|rec| (rec.length, r.correct))),
            ),
            by_depth: accuracy(
                results
                    .iter()
                    .filter_map(|r| locate(r).map(|rec| (rec.depth, r.correct))),
            ),
            by_structure: accuracy(results.iter().filter_map(|r| {
                locate(r).map(|rec| (rec.structure.as_str().to_string(), r.correct))
            })),
            by_polarity: accuracy(results.iter().filter_map(|r| {
                locate(r).map(|rec| {
                    (
                        match rec.polarity {
                            ruleforge::rule::Polarity::Positive => "positive".to_string(),
                            ruleforge::rule::Polarity::Negative => "negative".to_string(),
                        },
                        r.correct,
                    )
                })
            })),
            results: results.len(),
        };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    match &report.aggregate {
        Some(agg) => println!(
            "probed {} rules x {} templates: mean accuracy {:.3}, variance {:.4}",
            records.len(),
            templates.len(),
            agg.mean_accuracy,
            agg.variance
        ),
        None => println!(
            "probed {} rules x {} templates ({} results)",
            records.len(),
            templates.len(),
            report.results
        ),
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::io(format!("{}: {e}", args.config.display())))?;
    let config: PipelineConfig =
        toml::from_str(&text).map_err(|e| Failure::io(format!("config: {e}")))?;
    let client = build_client(
        &args.client,
        args.fixtures.as_deref(),
        config.api_url.as_deref(),
        config.api_key_env.as_deref().unwrap_or("OPENAI_API_KEY"),
    )?;
    let mut store = RuleStore::open(&args.out)?;
    let report = pipeline::run_pipeline(&config, client.as_ref(), &mut store)?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    println!(
        "generated {} candidates, kept {} ({} cells processed, {} skipped, {:.1}s)",
        report.totals.generated,
        report.totals.kept,
        report.cells_processed,
        report.cells_skipped,
        report.elapsed_secs
    );
    if !report.is_balanced() {
        return Err(Failure::io("pipeline accounting is unbalanced"));
    }
    if !report.incomplete_cells.is_empty() {
        return Err(Failure::io(format!(
            "{} cells incomplete: {}",
            report.incomplete_cells.len(),
            report.incomplete_cells.join(", ")
        )));
    }
    Ok(())
}

fn cmd_build_instructions(args: BuildInstructionsArgs) -> Result<(), Failure> {
    let records = load_records(&args.input)?;
    let rules = records_to_rules(&records);
    let policy = SplitPolicy::parse(&args.policy).ok_or_else(|| {
        Failure::io(format!(
            "unknown policy `{}`; use all or random",
            args.policy
        ))
    })?;
    let instances =
        build_instruction_dataset(&rules, policy, args.seed, ruleforge::default_vocab());
    write_jsonl(&args.out, &instances)?;
    println!(
        "built {} instances from {} rules",
        instances.len(),
        rules.len()
    );
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .map_err(|e| Failure::io(format!("{}:{}: {e}", path.display(), i + 1)))?;
        items.push(item);
    }
    Ok(items)
}

fn cmd_eval_gen(args: EvalGenArgs) -> Result<(), Failure> {
    let task = Task::parse(&args.task)
        .ok_or_else(|| Failure::io(format!("unknown task `{}`", args.task)))?;
    let outputs: Vec<EvalOutput> = read_jsonl(&args.outputs)?;
    let references: Vec<EvalReference> = read_jsonl(&args.refs)?;
    let report = evaluate_generation(&outputs, &references, task);
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    print!(
        "{}: bleu {:.4} over {} instances ({} skipped)",
        task.as_str(),
        report.bleu,
        report.evaluated,
        report.skipped
    );
    if let Some(sb) = report.self_bleu {
        print!(", self-bleu {sb:.4}");
    }
    if let Some(fc) = report.avg_fact_count {
        print!(", avg facts {fc:.2}");
    }
    println!();
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), Failure> {
    let records = load_records(&args.input)?;
    let table = stats(&records);
    println!("{table}");
    Ok(())
}

fn cmd_import(args: ImportArgs) -> Result<(), Failure> {
    let (records, issues) = import_records(&args.input)?;
    for issue in &issues {
        log::warn!("line {}: {}", issue.line, issue.message);
    }
    save_rulebase(&records, &args.out)?;
    println!(
        "imported {} records ({} lines skipped)",
        records.len(),
        issues.len()
    );
    Ok(())
}
