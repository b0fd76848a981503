//! Corpus loading, benchmark runs and frontend scoring.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::frontend::Interpreter;
use crate::infra::{condense, InfraSnapshot, StateScope};
use crate::intent::{Complexity, Domain, StructuredIntent};
use crate::orchestrator::{Orchestrator, OrchestratorConfig, RunOutcome, World};
use crate::validator::IntentReport;

pub const REPORT_SCHEMA: u32 = 1;

/// The 30-sentence corpus shipped with the crate.
pub const BUNDLED_CORPUS: &str = include_str!("../data/corpus.jsonl");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("record {0} has no gold intent")]
    MissingGold(String),
    #[error("report is not self-consistent: {0}")]
    Inconsistent(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub domain: Domain,
    pub complexity: Complexity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_intent: Option<StructuredIntent>,
    /// Operator notes on how to recover if the intent fails. Never executed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<String>,
}

impl CorpusRecord {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |reason: String| {
            Err(HarnessError::Invalid {
                id: self.id.clone(),
                reason,
            })
        };
        if self.id.trim().is_empty() {
            return bad("empty id".into());
        }
        if self.text.trim().is_empty() {
            return bad("empty text".into());
        }
        if let Some(g) = &self.gold_intent {
            if let Err(e) = g.validate() {
                return bad(format!("gold intent: {e}"));
            }
            if g.domain != self.domain {
                return bad(format!("domain {:?} but gold intent is {:?}", self.domain, g.domain));
            }
            if g.complexity != self.complexity {
                return bad(format!("complexity {:?} but gold intent is {:?}", self.complexity, g.complexity));
            }
        }
        Ok(())
    }
}

/// Parses JSON Lines. Blank lines and lines starting with `#` are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, HarnessError> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| HarnessError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.validate()?;
        if !seen.insert(rec.id.clone()) {
            return Err(HarnessError::Invalid {
                id: rec.id,
                reason: "duplicate id".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn bundled_corpus() -> Vec<CorpusRecord> {
    parse_corpus(BUNDLED_CORPUS).expect("bundled corpus is valid")
}

pub fn to_jsonl(records: &[CorpusRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// One corpus record's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResult {
    pub id: String,
    pub domain: Domain,
    pub complexity: Complexity,
    pub success: bool,
    pub checks: usize,
    pub time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub stages: Vec<String>,
    pub report: IntentReport,
}

impl IntentResult {
    pub fn from_outcome(record: &CorpusRecord, out: &RunOutcome) -> Self {
        Self {
            id: record.id.clone(),
            domain: record.domain,
            complexity: record.complexity,
            success: out.success(),
            checks: out.report.checks_executed,
            time_s: out.total_s,
            tokens: out.tokens.map(|t| t.total()),
            failure: out.failure_reason(),
            stages: out
                .stages
                .iter()
                .map(|s| format!("{}:{}", s.stage, stage_status_word(&s.status)))
                .collect(),
            report: out.report.clone(),
        }
    }
}

fn stage_status_word(s: &crate::orchestrator::StageStatus) -> &'static str {
    use crate::orchestrator::StageStatus::*;
    match s {
        Ok => "ok",
        Failed(_) => "failed",
        Rejected(_) => "rejected",
        Skipped(_) => "skipped",
    }
}

/// Aggregates over a subset of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub total: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_checks: f64,
    pub avg_time_s: f64,
    pub avg_tokens: Option<f64>,
}

impl GroupStats {
    pub fn from_results<'a>(results: impl IntoIterator<Item = &'a IntentResult>) -> Self {
        let results: Vec<&IntentResult> = results.into_iter().collect();
        let total = results.len();
        let successes = results.iter().filter(|r| r.success).count();
        let mean = |sum: f64| if total == 0 { 0.0 } else { sum / total as f64 };
        let tokens: Vec<u64> = results.iter().filter_map(|r| r.tokens).collect();
        Self {
            total,
            successes,
            success_rate: success_rate(successes, total),
            avg_checks: round_to(mean(results.iter().map(|r| r.checks as f64).sum()), 3),
            avg_time_s: mean(results.iter().map(|r| r.time_s).sum()),
            avg_tokens: (!tokens.is_empty())
                .then(|| round_to(tokens.iter().sum::<u64>() as f64 / tokens.len() as f64, 1)),
        }
    }
}

/// `successes / total * 100`, rounded half-up to one decimal.
pub fn success_rate(successes: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (s, t) = (successes as u64, total as u64);
    // tenths of a percent, rounded half-up in integer arithmetic
    let tenths = (s * 2000 + t) / (2 * t);
    tenths as f64 / 10.0
}

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    (x * f).round() / f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: u32,
    pub backend: String,
    pub topology: String,
    pub total: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_checks: f64,
    pub avg_time_s: f64,
    pub avg_tokens: Option<f64>,
    pub total_time_s: f64,
    pub by_domain: BTreeMap<String, GroupStats>,
    pub by_complexity: BTreeMap<String, GroupStats>,
    pub per_intent: Vec<IntentResult>,
}

/// Keys holding wall-clock measurements.
const TIMING_KEYS: [&str; 6] = ["avg_time_s", "time_s", "total_time_s", "timings", "seconds", "started_s"];

impl BenchReport {
    pub fn assemble(backend: &str, topology: &str, per_intent: Vec<IntentResult>, total_time_s: f64) -> Self {
        let all = GroupStats::from_results(&per_intent);
        let mut by_domain = BTreeMap::new();
        for d in [Domain::Computing, Domain::Networking, Domain::Hybrid] {
            let group: Vec<&IntentResult> = per_intent.iter().filter(|r| r.domain == d).collect();
            if !group.is_empty() {
                by_domain.insert(d.as_str().to_string(), GroupStats::from_results(group));
            }
        }
        let mut by_complexity = BTreeMap::new();
        for c in [Complexity::Simple, Complexity::Complex] {
            let group: Vec<&IntentResult> = per_intent.iter().filter(|r| r.complexity == c).collect();
            if !group.is_empty() {
                let key = serde_json::to_value(c).expect("complexity serializes");
                by_complexity.insert(key.as_str().unwrap_or_default().to_string(), GroupStats::from_results(group));
            }
        }
        Self {
            schema: REPORT_SCHEMA,
            backend: backend.to_string(),
            topology: topology.to_string(),
            total: all.total,
            successes: all.successes,
            success_rate: all.success_rate,
            avg_checks: all.avg_checks,
            avg_time_s: all.avg_time_s,
            avg_tokens: all.avg_tokens,
            total_time_s,
            by_domain,
            by_complexity,
            per_intent,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.successes == self.total
    }

    /// Recomputes every aggregate from `per_intent` and compares.
    pub fn verify(&self) -> Result<(), HarnessError> {
        let fresh = Self::assemble(&self.backend, &self.topology, self.per_intent.clone(), self.total_time_s);
        let bad = |what: &str| Err(HarnessError::Inconsistent(what.to_string()));
        if fresh.total != self.total || fresh.successes != self.successes {
            return bad("totals");
        }
        if fresh.success_rate != self.success_rate {
            return bad("success_rate");
        }
        if fresh.avg_checks != self.avg_checks || fresh.avg_tokens != self.avg_tokens {
            return bad("averages");
        }
        if (fresh.avg_time_s - self.avg_time_s).abs() > 1e-9 {
            return bad("avg_time_s");
        }
        if fresh.by_domain != self.by_domain || fresh.by_complexity != self.by_complexity {
            return bad("breakdowns");
        }
        let partition: usize = self.by_domain.values().map(|g| g.total).sum();
        let partition_c: usize = self.by_complexity.values().map(|g| g.total).sum();
        if partition != self.total || partition_c != self.total {
            return bad("breakdowns do not partition the corpus");
        }
        for r in &self.per_intent {
            if r.checks != r.report.checks_executed || r.checks != r.report.checks.len() {
                return bad("per-intent check counts");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with every wall-clock field removed, for comparing runs.
    pub fn to_json_without_timings(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip_keys(&mut v, &TIMING_KEYS);
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>6} {:>8} {:>9} {:>11} {:>10}\n",
            "group", "total", "success", "rate(%)", "avg checks", "avg time(s)"
        ));
        let row = |name: &str, g: &GroupStats| {
            format!(
                "{:<12} {:>6} {:>8} {:>9.1} {:>11.2} {:>10.4}\n",
                name, g.total, g.successes, g.success_rate, g.avg_checks, g.avg_time_s
            )
        };
        for (k, g) in self.by_domain.iter().chain(&self.by_complexity) {
            out.push_str(&row(k, g));
        }
        let all = GroupStats {
            total: self.total,
            successes: self.successes,
            success_rate: self.success_rate,
            avg_checks: self.avg_checks,
            avg_time_s: self.avg_time_s,
            avg_tokens: self.avg_tokens,
        };
        out.push_str(&row("all", &all));
        if let Some(t) = self.avg_tokens {
            out.push_str(&format!("avg tokens per intent: {t:.1}\n"));
        }
        out
    }
}

fn strip_keys(v: &mut Value, keys: &[&str]) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !keys.contains(&k.as_str()));
            for child in map.values_mut() {
                strip_keys(child, keys);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|c| strip_keys(c, keys)),
        _ => {}
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub parallelism: usize,
    pub orchestrator: OrchestratorConfig,
    pub topology_name: String,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            parallelism: 1,
            orchestrator: OrchestratorConfig::default(),
            topology_name: "five-worker".into(),
        }
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))
}

/// Runs every record on its own clone of `fixture`. Results keep record order
/// whatever the parallelism.
pub fn run_corpus(
    records: &[CorpusRecord],
    fixture: &InfraSnapshot,
    interpreter: &dyn Interpreter,
    options: &BenchOptions,
) -> Result<BenchReport, HarnessError> {
    let start = std::time::Instant::now();
    let orchestrator = Orchestrator::with_config(interpreter, options.orchestrator.clone());
    let world = World::new(fixture.clone());
    let results: Vec<IntentResult> = pool(options.parallelism)?.install(|| {
        records
            .par_iter()
            .map(|rec| {
                let out = orchestrator.execute_with_id(&rec.text, Some(&rec.id), &world.clone());
                IntentResult::from_outcome(rec, &out)
            })
            .collect()
    });
    let report = BenchReport::assemble(
        interpreter.name(),
        &options.topology_name,
        results,
        start.elapsed().as_secs_f64(),
    );
    report.verify()?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub id: String,
    pub diffs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendScore {
    pub schema: u32,
    pub backend: String,
    pub total: usize,
    pub matched: usize,
    pub match_rate: f64,
    pub mismatches: Vec<Mismatch>,
}

/// Exact-match accuracy of an interpreter against the corpus gold intents.
pub fn score_frontend(
    records: &[CorpusRecord],
    fixture: &InfraSnapshot,
    interpreter: &dyn Interpreter,
    parallelism: usize,
) -> Result<FrontendScore, HarnessError> {
    if let Some(r) = records.iter().find(|r| r.gold_intent.is_none()) {
        return Err(HarnessError::MissingGold(r.id.clone()));
    }
    let summary = condense(fixture, StateScope::Both);
    let mismatches: Vec<Option<Mismatch>> = pool(parallelism)?.install(|| {
        records
            .par_iter()
            .map(|rec| {
                let gold = rec.gold_intent.as_ref().expect("checked above");
                let diffs = match interpreter.interpret(&rec.text, &summary) {
                    Ok(i) => intent_diff(gold, &i.intent),
                    Err(e) => vec![format!("no intent: {e}")],
                };
                (!diffs.is_empty()).then(|| Mismatch {
                    id: rec.id.clone(),
                    diffs,
                })
            })
            .collect()
    });
    let mismatches: Vec<Mismatch> = mismatches.into_iter().flatten().collect();
    let total = records.len();
    let matched = total - mismatches.len();
    Ok(FrontendScore {
        schema: REPORT_SCHEMA,
        backend: interpreter.name().to_string(),
        total,
        matched,
        match_rate: success_rate(matched, total),
        mismatches,
    })
}

/// Clause-level differences between a gold intent and a produced one. Ids and
/// source text are ignored. Empty means the canonical forms are identical.
pub fn intent_diff(gold: &StructuredIntent, produced: &StructuredIntent) -> Vec<String> {
    let normalize = |i: &StructuredIntent| {
        let mut i = i.clone();
        i.id = String::new();
        i.source_text = None;
        i
    };
    let (g, p) = (normalize(gold), normalize(produced));
    if g.canonical_json() == p.canonical_json() {
        return Vec::new();
    }
    let mut diffs = Vec::new();
    if g.domain != p.domain {
        diffs.push(format!("domain: expected {}, got {}", g.domain.as_str(), p.domain.as_str()));
    }
    if g.complexity != p.complexity {
        diffs.push(format!("complexity: expected {:?}, got {:?}", g.complexity, p.complexity));
    }
    clause_diff("placement", &g.placement_clauses, &p.placement_clauses, &mut diffs);
    clause_diff("routing", &g.routing_clauses, &p.routing_clauses, &mut diffs);
    if diffs.is_empty() {
        diffs.push("clause order differs".into());
    }
    diffs
}

fn clause_diff<T: Serialize>(label: &str, gold: &[T], produced: &[T], diffs: &mut Vec<String>) {
    let enc = |c: &T| serde_json::to_string(c).expect("clause serializes");
    let g: Vec<String> = gold.iter().map(enc).collect();
    let p: Vec<String> = produced.iter().map(enc).collect();
    for (i, c) in g.iter().enumerate() {
        if !p.contains(c) {
            diffs.push(format!("missing {label}[{i}]: {c}"));
        }
    }
    for (i, c) in p.iter().enumerate() {
        if !g.contains(c) {
            diffs.push(format!("unexpected {label}[{i}]: {c}"));
        }
    }
}
