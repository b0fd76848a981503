//! `intentctl`: run privacy intents against a simulated world.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use privacy_intent::flow::realized_path;
use privacy_intent::frontend::{Interpreter, LlmConfig, LlmInterpreter, RuleBasedInterpreter};
use privacy_intent::harness::{self, BenchOptions, CorpusRecord};
use privacy_intent::infra::{load_topology_file, InfraSnapshot, VertexKind};
use privacy_intent::orchestrator::{Orchestrator, OrchestratorConfig, RunOutcome, StageStatus, World};
use privacy_intent::path::WeightMode;
use privacy_intent::{fixtures, frontend::llm::API_KEY_ENV};

#[derive(Parser)]
#[command(name = "intentctl", version, about = "Interpret, enforce and validate privacy intents")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Topology JSON file, or a built-in name (five-worker, thirteen-worker).
    #[arg(long, global = true, default_value = "five-worker")]
    topology: String,
    /// Intent frontend.
    #[arg(long, global = true, value_enum, default_value_t = Frontend::Rule)]
    frontend: Frontend,
    /// Base URL of an OpenAI-compatible endpoint. The API key is read from
    /// the PRIVACY_INTENT_API_KEY environment variable.
    #[arg(long, global = true, env = "PRIVACY_INTENT_ENDPOINT")]
    llm_endpoint: Option<String>,
    #[arg(long, global = true, default_value = "gpt-4o")]
    llm_model: String,
    /// Per-request timeout for the LLM backend, in seconds.
    #[arg(long, global = true, default_value_t = 60)]
    timeout_s: u64,
    /// Directory of prompt templates overriding the built-in ones.
    #[arg(long, global = true)]
    prompt_dir: Option<PathBuf>,
    /// Count hops instead of link weights when planning paths.
    #[arg(long, global = true)]
    hops: bool,
    /// Artificial settle time after compute apply, in milliseconds.
    #[arg(long, global = true, default_value_t = 0)]
    settle_ms: u64,
    /// Write the JSON result here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Frontend {
    Rule,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run one intent and print the stage log and report.
    Apply { text: String },
    /// Run a corpus and print aggregate metrics.
    Bench {
        /// JSON Lines corpus; defaults to the bundled one.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Compare frontend output with corpus gold intents.
    Score {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Print a summary of the topology.
    Topo,
    /// Run one intent and dump controller rules and realized paths.
    Trace { text: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type BoxError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<bool, BoxError> {
    let c = &cli.common;
    let (topology_name, world) = load_world(&c.topology)?;
    match &cli.command {
        Command::Topo => {
            print!("{}", topo_summary(&world));
            write_out(c, &world.to_json())?;
            Ok(true)
        }
        Command::Apply { text } => {
            let interp = interpreter(c)?;
            let out = orchestrator(c, interp.as_ref()).execute(text, &World::new(world));
            print!("{}", stage_table(&out));
            print!("{}", report_text(&out));
            write_out(c, &serde_json::to_string_pretty(&out)?)?;
            Ok(out.success())
        }
        Command::Trace { text } => {
            let interp = interpreter(c)?;
            let out = orchestrator(c, interp.as_ref()).execute(text, &World::new(world));
            print!("{}", trace_text(&out));
            if let Some(reason) = out.failure_reason() {
                println!("FAIL {reason}");
            }
            let rules: Vec<_> = out.world.controller.rules().collect();
            write_out(c, &serde_json::to_string_pretty(&rules)?)?;
            Ok(out.success())
        }
        Command::Bench { corpus, parallel } => {
            let records = corpus_records(corpus.as_ref())?;
            let interp = interpreter(c)?;
            let options = BenchOptions {
                parallelism: *parallel,
                orchestrator: orchestrator_config(c),
                topology_name,
            };
            let report = harness::run_corpus(&records, &world, interp.as_ref(), &options)?;
            for r in report.per_intent.iter().filter(|r| !r.success) {
                println!("FAIL {}: {}", r.id, r.failure.as_deref().unwrap_or("unknown"));
            }
            print!("{}", report.table());
            write_out(c, &report.to_json())?;
            Ok(report.all_passed())
        }
        Command::Score { corpus, parallel } => {
            let records = corpus_records(corpus.as_ref())?;
            let interp = interpreter(c)?;
            let score = harness::score_frontend(&records, &world, interp.as_ref(), *parallel)?;
            for m in &score.mismatches {
                println!("MISMATCH {}", m.id);
                for d in &m.diffs {
                    println!("  {d}");
                }
            }
            println!("matched {}/{} ({:.1}%)", score.matched, score.total, score.match_rate);
            write_out(c, &serde_json::to_string_pretty(&score)?)?;
            Ok(score.matched == score.total)
        }
    }
}

fn load_world(spec: &str) -> Result<(String, InfraSnapshot), BoxError> {
    if let Some(w) = fixtures::by_name(spec) {
        return Ok((spec.to_string(), w));
    }
    Ok((spec.to_string(), load_topology_file(spec)?))
}

fn corpus_records(path: Option<&PathBuf>) -> Result<Vec<CorpusRecord>, BoxError> {
    Ok(match path {
        Some(p) => harness::load_corpus(p)?,
        None => harness::bundled_corpus(),
    })
}

fn interpreter(c: &Common) -> Result<Box<dyn Interpreter>, BoxError> {
    match c.frontend {
        Frontend::Rule => Ok(Box::new(RuleBasedInterpreter)),
        Frontend::Llm => {
            let endpoint = c
                .llm_endpoint
                .clone()
                .ok_or("--frontend llm needs --llm-endpoint or PRIVACY_INTENT_ENDPOINT")?;
            let mut config = LlmConfig::new(endpoint, &c.llm_model).with_timeout(Duration::from_secs(c.timeout_s));
            if let Some(dir) = &c.prompt_dir {
                config = config.with_prompt_dir(dir);
            }
            if !config.has_credential() {
                eprintln!("warning: {API_KEY_ENV} is not set; sending requests without a credential");
            }
            Ok(Box::new(LlmInterpreter::new(config)?))
        }
    }
}

fn orchestrator_config(c: &Common) -> OrchestratorConfig {
    OrchestratorConfig {
        weight_mode: if c.hops { WeightMode::Hops } else { WeightMode::Weights },
        stabilization_delay: Duration::from_millis(c.settle_ms),
        ..OrchestratorConfig::default()
    }
}

fn orchestrator<'a>(c: &Common, interp: &'a dyn Interpreter) -> Orchestrator<'a> {
    Orchestrator::with_config(interp, orchestrator_config(c))
}

fn write_out(c: &Common, json: &str) -> Result<(), BoxError> {
    if let Some(path) = &c.out {
        std::fs::write(path, json).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn topo_summary(w: &InfraSnapshot) -> String {
    let mut s = String::new();
    if let Some(d) = w.description() {
        s.push_str(&format!("{d}\n"));
    }
    let switches = w.devices().count();
    let switch_links = w
        .links()
        .iter()
        .filter(|l| w.vertex_kind(&l.a) == Some(VertexKind::Device) && w.vertex_kind(&l.b) == Some(VertexKind::Device))
        .count();
    s.push_str(&format!(
        "{} nodes, {} switches, {} hosts, {} links ({} switch-to-switch)\n\nnodes:\n",
        w.nodes().count(),
        switches,
        w.hosts().count(),
        w.links().len(),
        switch_links
    ));
    for n in w.nodes() {
        let labels: Vec<String> = n.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("  {:<10} {}\n", n.id, labels.join(" ")));
    }
    s.push_str("switches:\n");
    for d in w.devices() {
        let labels: Vec<String> = d.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("  {:<10} {}\n", d.id, labels.join(" ")));
    }
    s.push_str("placements:\n");
    for (r, n) in w.placements() {
        s.push_str(&format!("  {r:<24} {n}\n"));
    }
    s
}

fn stage_table(out: &RunOutcome) -> String {
    let mut s = format!("intent {}\n{:<3} {:<14} {:<9} {:>10}  detail\n", out.intent_id, "#", "stage", "status", "ms");
    for st in &out.stages {
        let (word, detail) = match &st.status {
            StageStatus::Ok => ("ok", ""),
            StageStatus::Failed(d) => ("failed", d.as_str()),
            StageStatus::Rejected(d) => ("rejected", d.as_str()),
            StageStatus::Skipped(d) => ("skipped", d.as_str()),
        };
        s.push_str(&format!(
            "{:<3} {:<14} {:<9} {:>10.3}  {}\n",
            st.seq,
            st.stage.as_str(),
            word,
            st.elapsed_s * 1e3,
            detail
        ));
    }
    s
}

fn report_text(out: &RunOutcome) -> String {
    let mut s = String::new();
    if let Some(e) = &out.interpret_error {
        s.push_str(&format!("interpretation failed: {e}\n"));
    }
    for c in &out.report.checks {
        let mark = if c.passed() { "PASS" } else { "FAIL" };
        s.push_str(&format!("{mark} {:<22} {}\n", c.kind.as_str(), c.subject));
        for v in &c.evidence.violations {
            s.push_str(&format!("       {}\n", v.reason));
        }
        for n in &c.evidence.notes {
            if !c.passed() {
                s.push_str(&format!("       {n}\n"));
            }
        }
    }
    let verdict = if out.success() { "PASS" } else { "FAIL" };
    s.push_str(&format!("verdict: {verdict} ({} checks)\n", out.report.checks_executed));
    if let Some(r) = out.failure_reason() {
        s.push_str(&format!("reason: {r}\n"));
    }
    if let Some(t) = out.tokens {
        s.push_str(&format!("tokens: {} prompt + {} completion\n", t.prompt, t.completion));
    }
    s
}

fn trace_text(out: &RunOutcome) -> String {
    let mut s = String::from("rules:\n");
    for r in out.world.controller.rules() {
        s.push_str(&format!(
            "  {:<5} {}->{} out_port={} priority={}\n",
            r.switch_id, r.flow_match.src, r.flow_match.dest, r.out_port, r.priority
        ));
    }
    s.push_str("paths:\n");
    for p in &out.flow_plans {
        let planned = p.path.as_ref().map_or("-".to_string(), ToString::to_string);
        let realized = realized_path(&out.world.controller, &p.flow, &out.world.snapshot)
            .map_or_else(|e| format!("error: {e}"), |p| p.to_string());
        s.push_str(&format!("  {}\n    planned:  {planned}\n    realized: {realized}\n", p.flow));
    }
    s
}
