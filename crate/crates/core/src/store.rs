//! JSONL rule-base persistence, statistics and external-schema import.
//!
//! One record per line keeps the store append-friendly during pipeline runs
//! and diff-able in review. Loading re-parses every symbolic form and
//! cross-checks the stored metadata against it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parse::parse_rule;
use crate::rule::{Domain, Polarity, Provenance, Rule, Structure, Verification};
use crate::verbalize::verbalize_rule;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("unrecognized import schema: {0}")]
    UnknownSchema(String),
}

/// Stable 128-bit id of a rule's canonical serialization.
pub fn rule_id(rule: &Rule) -> String {
    let digest = Sha256::digest(rule.canonical().as_bytes());
    let mut out = String::with_capacity(32);
    for byte in digest.iter().take(16) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// One persisted rule with its metadata snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub id: String,
    pub symbolic: String,
    pub verbalized: String,
    pub domain: Domain,
    pub depth: u8,
    pub length: usize,
    pub structure: Structure,
    pub polarity: Polarity,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parent_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verified: Option<Verification>,
}

impl RuleRecord {
    /// Snapshot of a rule; the verbalization defaults to the deterministic
    /// renderer when none was attached upstream.
    pub fn from_rule(rule: &Rule, verbalized: Option<String>, parent_ids: Vec<String>) -> Self {
        RuleRecord {
            id: rule_id(rule),
            symbolic: rule.canonical(),
            verbalized: verbalized.unwrap_or_else(|| verbalize_rule(rule, crate::default_vocab())),
            domain: rule.domain(),
            depth: rule.depth(),
            length: rule.length(),
            structure: rule.structure(),
            polarity: rule.polarity(),
            provenance: rule.provenance(),
            parent_ids,
            verified: rule.verified(),
        }
    }

    /// Rebuilds the rule, restoring the record's extrinsic metadata.
    pub fn to_rule(&self) -> Result<Rule, String> {
        let mut rule = parse_rule(&self.symbolic).map_err(|e| e.to_string())?;
        rule.set_domain(self.domain);
        rule.set_depth(self.depth).map_err(|e| e.to_string())?;
        rule.set_provenance(self.provenance);
        rule.set_verified(self.verified);
        Ok(rule)
    }

    /// Re-derives everything derivable and compares with the stored copy.
    fn validate(&self) -> Result<(), String> {
        let rule = self.to_rule()?;
        if self.length != rule.length() {
            return Err(format!(
                "length field {} does not match premise count {}",
                self.length,
                rule.length()
            ));
        }
        if self.polarity != rule.polarity() {
            return Err("polarity field does not match the conclusion predicate".to_string());
        }
        if self.structure != rule.structure() {
            return Err(format!(
                "structure field {} does not match the computed {}",
                self.structure.as_str(),
                rule.structure().as_str()
            ));
        }
        let expected = rule_id(&rule);
        if self.id != expected {
            return Err(format!(
                "id {} does not match canonical hash {expected}",
                self.id
            ));
        }
        Ok(())
    }
}

/// A non-fatal problem found while loading.
#[derive(Debug, Clone, Serialize)]
pub struct LoadIssue {
    pub line: usize,
    pub message: String,
}

/// Loads a JSONL rule base, validating every record. With `strict` the
/// first problem aborts; otherwise problems are collected alongside the
/// records that did load.
pub fn load_rulebase(
    path: impl AsRef<Path>,
    strict: bool,
) -> Result<(Vec<RuleRecord>, Vec<LoadIssue>), StoreError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<RuleRecord>(&line)
            .map_err(|e| e.to_string())
            .and_then(|record| record.validate().map(|()| record));
        match outcome {
            Ok(record) => records.push(record),
            Err(message) => {
                if strict {
                    return Err(StoreError::InvalidRecord {
                        line: line_no,
                        message,
                    });
                }
                issues.push(LoadIssue {
                    line: line_no,
                    message,
                });
            }
        }
    }
    Ok((records, issues))
}

/// Writes records as JSONL with canonical field order, newline-terminated.
pub fn save_rulebase(records: &[RuleRecord], path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for record in records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}").map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Append-only store handle used by the generation pipeline.
pub struct RuleStore {
    path: PathBuf,
    file: File,
    existing: Vec<RuleRecord>,
}

impl RuleStore {
    /// Opens (or creates) a JSONL store for appending, loading any existing
    /// records so a resumed run can rebuild its dedup state.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let existing = if path.exists() {
            load_rulebase(&path, false)?.0
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            path,
            file,
            existing,
        })
    }

    pub fn existing_records(&self) -> &[RuleRecord] {
        &self.existing
    }

    pub fn append(&mut self, record: &RuleRecord) -> Result<(), StoreError> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.file, "{line}").map_err(|source| StoreError::Io {
            path: self.path.clone(),
            source,
        })?;
        self.file.flush().map_err(|source| StoreError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Table-1-style category: primitives split by shape and origin, composed
/// rules split by depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatCategory {
    SingleFact,
    MultiFact,
    Intermediate,
    Depth1,
    Depth2,
    Depth3,
}

impl StatCategory {
    pub const ALL: [StatCategory; 6] = [
        StatCategory::SingleFact,
        StatCategory::MultiFact,
        StatCategory::Intermediate,
        StatCategory::Depth1,
        StatCategory::Depth2,
        StatCategory::Depth3,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            StatCategory::SingleFact => "single-fact",
            StatCategory::MultiFact => "multi-fact",
            StatCategory::Intermediate => "intermediate",
            StatCategory::Depth1 => "depth-1",
            StatCategory::Depth2 => "depth-2",
            StatCategory::Depth3 => "depth-3",
        }
    }

    pub fn is_primitive(&self) -> bool {
        matches!(
            self,
            StatCategory::SingleFact | StatCategory::MultiFact | StatCategory::Intermediate
        )
    }
}

fn categorize(record: &RuleRecord) -> StatCategory {
    match record.depth {
        0 if record.provenance == Provenance::Intermediate => StatCategory::Intermediate,
        0 if record.length == 1 => StatCategory::SingleFact,
        0 => StatCategory::MultiFact,
        1 => StatCategory::Depth1,
        2 => StatCategory::Depth2,
        _ => StatCategory::Depth3,
    }
}

/// Counts per (category, domain) with derived totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub counts: BTreeMap<StatCategory, BTreeMap<Domain, usize>>,
    pub primitive_total: usize,
    pub compositional_total: usize,
    pub grand_total: usize,
}

impl StatsTable {
    pub fn category_total(&self, category: StatCategory) -> usize {
        self.counts
            .get(&category)
            .map(|row| row.values().sum())
            .unwrap_or(0)
    }

    pub fn cell(&self, category: StatCategory, domain: Domain) -> usize {
        self.counts
            .get(&category)
            .and_then(|row| row.get(&domain))
            .copied()
            .unwrap_or(0)
    }
}

impl fmt::Display for StatsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "category", "afford.", "access.", "interact", "location", "need", "total"
        )?;
        for category in StatCategory::ALL {
            write!(f, "{:<14}", category.label())?;
            for domain in Domain::ALL {
                write!(f, " {:>8}", self.cell(category, domain))?;
            }
            writeln!(f, " {:>8}", self.category_total(category))?;
        }
        writeln!(f, "primitive rules:     {:>8}", self.primitive_total)?;
        writeln!(f, "compositional rules: {:>8}", self.compositional_total)?;
        write!(f, "total rules:         {:>8}", self.grand_total)
    }
}

/// Tabulates records by category and domain.
pub fn stats(records: &[RuleRecord]) -> StatsTable {
    let mut counts: BTreeMap<StatCategory, BTreeMap<Domain, usize>> = BTreeMap::new();
    for category in StatCategory::ALL {
        counts.insert(category, BTreeMap::new());
    }
    let mut primitive_total = 0;
    let mut compositional_total = 0;
    for record in records {
        let category = categorize(record);
        if category.is_primitive() {
            primitive_total += 1;
        } else {
            compositional_total += 1;
        }
        *counts
            .get_mut(&category)
            .expect("all categories preseeded")
            .entry(record.domain)
            .or_insert(0) += 1;
    }
    StatsTable {
        counts,
        primitive_total,
        compositional_total,
        grand_total: records.len(),
    }
}

/// Imports rules from an external JSON/JSONL release with flexible field
/// names, mapping them onto [`RuleRecord`]s. Recognized aliases:
/// symbolic (`symbolic`/`rule`/`prolog`), verbalization
/// (`verbalized`/`natural_language`/`nl`/`verbalization`), `domain`,
/// depth (`depth`/`comp`/`compositionality`), and category
/// (`type`/`category`, where an intermediate marker maps to the
/// `intermediate` provenance).
pub fn import_records(
    path: impl AsRef<Path>,
) -> Result<(Vec<RuleRecord>, Vec<LoadIssue>), StoreError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let values: Vec<(usize, serde_json::Value)> = if text.trim_start().starts_with('[') {
        let array: Vec<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| StoreError::UnknownSchema(e.to_string()))?;
        array
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1, v))
            .collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(value) => out.push((i + 1, value)),
                Err(e) => issues.push(LoadIssue {
                    line: i + 1,
                    message: e.to_string(),
                }),
            }
        }
        out
    };

    for (line, value) in values {
        match import_one(&value) {
            Ok(record) => records.push(record),
            Err(message) => issues.push(LoadIssue { line, message }),
        }
    }
    Ok((records, issues))
}

fn string_field<'a>(value: &'a serde_json::Value, names: &[&str]) -> Option<&'a str> {
    names
        .iter()
        .find_map(|n| value.get(*n).and_then(|v| v.as_str()))
}

fn import_one(value: &serde_json::Value) -> Result<RuleRecord, String> {
    let symbolic = string_field(value, &["symbolic", "rule", "prolog", "symbolic_rule"])
        .ok_or("no symbolic rule field")?;
    let mut rule = parse_rule(symbolic.trim().trim_end_matches(';')).map_err(|e| e.to_string())?;

    if let Some(domain) = string_field(value, &["domain", "Domain"]).and_then(Domain::parse) {
        rule.set_domain(domain);
    }

    let depth = value
        .get("depth")
        .or_else(|| value.get("comp"))
        .or_else(|| value.get("compositionality"))
        .or_else(|| value.get("composition"))
        .and_then(|v| {
            v.as_u64()
                .or_else(|| v.as_str().and_then(|s| s.trim().parse::<u64>().ok()))
        });
    let category =
        string_field(value, &["type", "category", "rule_type"]).map(|s| s.to_ascii_lowercase());
    let depth = depth.unwrap_or_else(|| {
        // Derive depth from category labels like "comp2" / "composition=2".
        category
            .as_deref()
            .and_then(|c| c.chars().find(|ch| ch.is_ascii_digit()))
            .and_then(|d| d.to_digit(10).map(u64::from))
            .filter(|_| category.as_deref().is_some_and(|c| c.contains("comp")))
            .unwrap_or(0)
    });
    rule.set_depth(depth.min(u8::MAX as u64) as u8)
        .map_err(|e| e.to_string())?;

    let provenance = match category.as_deref() {
        Some(c) if c.contains("intermediate") => Provenance::Intermediate,
        Some(c) if c.contains("comp") || depth > 0 => Provenance::Composed,
        _ if depth > 0 => Provenance::Composed,
        _ => Provenance::Imported,
    };
    rule.set_provenance(provenance);

    let verbalized = string_field(
        value,
        &[
            "verbalized",
            "natural_language",
            "nl",
            "verbalization",
            "verbal",
        ],
    )
    .map(str::to_string);
    Ok(RuleRecord::from_rule(&rule, verbalized, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::rule;

    const EQ1: &str = "CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z).";

    fn record(text: &str) -> RuleRecord {
        RuleRecord::from_rule(&rule(text), None, Vec::new())
    }

    #[test]
    fn ids_are_stable_and_spacing_insensitive() {
        let a = record(EQ1);
        let loose = parse_rule(
            "CanNotEat( Person X , Food Y ) :-  AllergicTo(Person X, Substance Z),Contains(Food Y, Substance Z)",
        )
        .map(|r| RuleRecord::from_rule(&r, None, Vec::new()))
        .unwrap();
        assert_eq!(a.id, loose.id);
        assert_eq!(a.id.len(), 32);
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("base.jsonl");
        let records = vec![
            record(EQ1),
            record("CanDrive(Person X, Vehicle Y):- Have(Person X, Age Z1), RequireMinimumAge(Vehicle Y, Age Z2), BiggerThan(Age Z1, Age Z2)."),
        ];
        save_rulebase(&records, &path).unwrap();
        let (loaded, issues) = load_rulebase(&path, false).unwrap();
        assert!(issues.is_empty());
        assert_eq!(loaded, records);
    }

    #[test]
    fn empty_file_loads_to_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        File::create(&path).unwrap();
        let (records, issues) = load_rulebase(&path, false).unwrap();
        assert!(records.is_empty());
        assert!(issues.is_empty());
    }

    #[test]
    fn planted_length_inconsistency_is_reported_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = record(EQ1);
        let mut bad = record(EQ1);
        bad.length = 5;
        let mut file = File::create(&path).unwrap();
        writeln!(file, "{}", serde_json::to_string(&good).unwrap()).unwrap();
        writeln!(file, "{}", serde_json::to_string(&bad).unwrap()).unwrap();
        drop(file);

        let (records, issues) = load_rulebase(&path, false).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, 2);
        assert!(issues[0].message.contains("length"));

        let err = load_rulebase(&path, true).unwrap_err();
        assert!(matches!(err, StoreError::InvalidRecord { line: 2, .. }));
    }

    #[test]
    fn malformed_json_is_collected_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.jsonl");
        let mut file = File::create(&path).unwrap();
        writeln!(file, "{}", serde_json::to_string(&record(EQ1)).unwrap()).unwrap();
        writeln!(file, "not json at all").unwrap();
        drop(file);
        let (records, issues) = load_rulebase(&path, false).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(issues[0].line, 2);
    }

    #[test]
    fn stats_classifies_by_depth_and_provenance() {
        let mut primitive = record(EQ1);
        primitive.domain = Domain::Affordance;
        let mut depth1 =
            record("A(Person X, Food Y):- B(Person X, Substance Z), C(Substance Z, Food Y).");
        depth1.depth = 1;
        depth1.domain = Domain::Need;
        let mut depth3 = record("D(Person X, Food Y):- E(Person X, Food Y).");
        depth3.depth = 3;
        depth3.domain = Domain::Location;

        let table = stats(&[primitive, depth1, depth3]);
        assert_eq!(table.cell(StatCategory::MultiFact, Domain::Affordance), 1);
        assert_eq!(table.cell(StatCategory::Depth1, Domain::Need), 1);
        assert_eq!(table.cell(StatCategory::Depth3, Domain::Location), 1);
        assert_eq!(table.primitive_total, 1);
        assert_eq!(table.compositional_total, 2);
        assert_eq!(table.grand_total, 3);
    }

    #[test]
    fn stats_of_an_empty_store_is_all_zeros() {
        let table = stats(&[]);
        assert_eq!(table.grand_total, 0);
        assert_eq!(table.primitive_total, 0);
        assert_eq!(table.compositional_total, 0);
        for category in StatCategory::ALL {
            assert_eq!(table.category_total(category), 0);
        }
    }

    #[test]
    fn intermediate_primitives_are_their_own_category() {
        let mut r = rule(EQ1);
        r.set_provenance(Provenance::Intermediate);
        let rec = RuleRecord::from_rule(&r, None, Vec::new());
        let table = stats(std::slice::from_ref(&rec));
        assert_eq!(table.category_total(StatCategory::Intermediate), 1);
        assert_eq!(table.primitive_total, 1);
    }

    #[test]
    fn store_appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        {
            let mut store = RuleStore::open(&path).unwrap();
            assert!(store.existing_records().is_empty());
            store.append(&record(EQ1)).unwrap();
        }
        let store = RuleStore::open(&path).unwrap();
        assert_eq!(store.existing_records().len(), 1);
    }

    #[test]
    fn import_maps_flexible_field_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("release.jsonl");
        let mut file = File::create(&path).unwrap();
        writeln!(
            file,
            r#"{{"rule": "CanNotEat(Person X, Food Y):- AllergicTo(Person X, Substance Z), Contains(Food Y, Substance Z);", "nl": "custom text", "domain": "Object Affordance", "type": "multi"}}"#
        )
        .unwrap();
        writeln!(
            file,
            r#"{{"prolog": "P(Person X, Food Y):- Q(Person X, Food Y).", "domain": "need", "type": "intermediate"}}"#
        )
        .unwrap();
        writeln!(
            file,
            r#"{{"symbolic": "R(Person X, Food Y):- S(Person X, Substance Z), T(Substance Z, Food Y).", "domain": "location", "comp": 2}}"#
        )
        .unwrap();
        drop(file);

        let (records, issues) = import_records(&path).unwrap();
        assert!(issues.is_empty(), "{issues:?}");
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].domain, Domain::Affordance);
        assert_eq!(records[0].verbalized, "custom text");
        assert_eq!(records[0].depth, 0);
        assert_eq!(records[1].provenance, Provenance::Intermediate);
        assert_eq!(records[2].depth, 2);
        assert_eq!(records[2].provenance, Provenance::Composed);

        let table = stats(&records);
        assert_eq!(table.primitive_total, 2);
        assert_eq!(table.compositional_total, 1);
    }
}
