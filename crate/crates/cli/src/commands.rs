//! Command bodies. Each returns the text to print on success.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use promptopt_core::ast::{full_tune_baseline, tune_suffix, AstOutcome, SuffixCandidate};
use promptopt_core::engine::{
    default_metrics, evaluate as run_evaluation, BestPrompt, Engine, EvalContext, IclSource, RunRecord, Transcript,
    TRANSCRIPTS_FILE,
};
use promptopt_core::gateway::ReplayEntry;
use promptopt_core::metrics::MetricSpec;
use promptopt_core::selection::HashedNgramEmbedder;
use promptopt_core::store::{diversity_report, read_jsonl, write_atomic, DiversityStats};
use promptopt_core::templates::{validate, TaskKind};
use serde::Serialize;

use crate::failure::Failure;
use crate::setup;
use crate::{AstArgs, EvaluateArgs, OptimizeArgs, ReplayRecordArgs, ReportArgs};

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn score(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |s| format!("{s:.6}"))
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    run_dir: &'a Path,
    iterations_completed: u32,
    candidates: usize,
    best: &'a BestPrompt,
}

pub fn optimize(args: &OptimizeArgs, json: bool) -> Result<String, Failure> {
    let gw = setup::gateway(&args.providers, !args.resume)?;
    let outcome = if args.resume {
        let header = RunRecord::read_header(&args.out)?;
        let data = setup::dataset(&args.data, header.config.task_kind, header.config.seed)?;
        Engine::new(&gw, &data).resume(&args.out)?
    } else {
        let mut config = setup::config(args.config.as_deref())?;
        setup::apply_flags(&mut config.flags, args.opro, &args.ablate);
        let seed = setup::read_text(args.seed_prompt.as_deref().expect("required by clap"), "seed prompt")?;
        let data = setup::dataset(&args.data, config.task_kind, config.seed)?;
        Engine::new(&gw, &data).optimize(config, &seed, &args.out)?
    };
    let best = &outcome.best;
    let report = OptimizeReport {
        run_dir: &args.out,
        iterations_completed: outcome.record.last_iteration().unwrap_or(0),
        candidates: outcome.record.candidates.len(),
        best,
    };
    if json {
        return Ok(to_json(&report));
    }
    let mut out = String::new();
    writeln!(out, "run: {}", args.out.display()).unwrap();
    writeln!(out, "iterations: {}", report.iterations_completed).unwrap();
    writeln!(out, "candidates: {}", report.candidates).unwrap();
    writeln!(out, "best candidate: {}", best.candidate_id).unwrap();
    writeln!(out, "train score: {}", score(Some(best.train_score))).unwrap();
    writeln!(out, "dev score: {}", score(best.dev_score)).unwrap();
    writeln!(out, "--- best prompt ---\n{}", best.template).unwrap();
    Ok(out)
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    score: f64,
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    split: &'a str,
    examples: usize,
    flagged: usize,
    untagged: usize,
    metrics: Vec<MetricRow<'a>>,
}

pub fn evaluate(args: &EvaluateArgs, json: bool) -> Result<String, Failure> {
    let kind: TaskKind = args.task.into();
    let text = setup::read_text(&args.prompt_file, "prompt file")?;
    let template = validate(&text, kind).map_err(|v| {
        let why: Vec<String> = v.iter().map(ToString::to_string).collect();
        Failure::config(format!("{}: {}", args.prompt_file.display(), why.join("; ")))
    })?;
    let gw = setup::gateway(&args.providers, true)?;
    let data = setup::dataset(&args.data, kind, args.seed)?;
    let split = args.split.name();
    let examples = data.split(split).unwrap_or_default();
    if examples.is_empty() {
        return Err(Failure::data(format!("{split} split is empty or missing")));
    }
    let metrics = match (args.metrics.is_empty(), kind) {
        (false, _) => args.metrics.clone(),
        (true, TaskKind::Summarization) => vec![MetricSpec::rouge_n(1), MetricSpec::rouge_n(2), MetricSpec::rouge_l()],
        (true, TaskKind::Qa) => default_metrics(kind),
    };
    let icl = if args.icl_shots > 0 {
        Some(IclSource::build(&data.train, args.icl_shots, Arc::new(HashedNgramEmbedder::default()))?)
    } else {
        None
    };
    let ctx = EvalContext {
        gateway: &gw,
        metrics: &metrics,
        icl: icl.as_ref(),
        max_flagged_fraction: args.max_flagged_fraction,
    };
    let (eval, _) = run_evaluation(&ctx, &template, split, examples)?;
    let report = EvaluateReport {
        split,
        examples: eval.outcomes.len(),
        flagged: eval.flagged,
        untagged: eval.outcomes.iter().filter(|o| o.error.is_none() && !o.tagged).count(),
        metrics: eval
            .metric_ids
            .iter()
            .zip(&eval.aggregates)
            .map(|(m, &s)| MetricRow { metric: m, score: s })
            .collect(),
    };
    if json {
        return Ok(to_json(&report));
    }
    let mut out = format!(
        "split: {split} ({} examples, {} flagged, {} untagged)\n",
        report.examples, report.flagged, report.untagged
    );
    let width = report.metrics.iter().map(|r| r.metric.len()).max().unwrap_or(0).max(6);
    writeln!(out, "{:<width$}  score", "metric").unwrap();
    for r in &report.metrics {
        writeln!(out, "{:<width$}  {:.6}", r.metric, r.score).unwrap();
    }
    Ok(out)
}

#[derive(Serialize)]
struct AstReport<'a> {
    run_dir: &'a Path,
    mode: &'a str,
    best: &'a SuffixCandidate,
    pool: &'a [SuffixCandidate],
}

pub fn ast(args: &AstArgs, json: bool) -> Result<String, Failure> {
    let mut config = setup::config(args.config.as_deref())?;
    config.metrics = args.metrics.clone();
    let main_prompt = setup::read_text(&args.main_prompt, "main prompt")?;
    // A trailing newline would otherwise leave a blank line before the suffix.
    let main_prompt = main_prompt.strip_suffix('\n').unwrap_or(&main_prompt);
    let gw = setup::gateway(&args.providers, true)?;
    let data = setup::dataset(&args.data, config.task_kind, config.seed)?;
    let engine = Engine::new(&gw, &data);
    let run = if args.full_tune { full_tune_baseline } else { tune_suffix };
    let AstOutcome { best, pool, .. } = run(&engine, config, main_prompt, &args.seed_suffix, &args.out)?;
    let report = AstReport {
        run_dir: &args.out,
        mode: if args.full_tune { "full-tune" } else { "suffix-tune" },
        best: &best,
        pool: &pool,
    };
    if json {
        return Ok(to_json(&report));
    }
    let mut out = String::new();
    writeln!(out, "run: {} ({})", args.out.display(), report.mode).unwrap();
    writeln!(out, "{:>9}  {:>8}  {}", "candidate", "avg_rank", best.metric_ids.join("  ")).unwrap();
    for c in &pool {
        let scores: Vec<String> = c.aggregates.iter().map(|s| format!("{s:.6}")).collect();
        let mark = if c.candidate_id == best.candidate_id { "*" } else { " " };
        writeln!(out, "{mark}{:>8}  {:>8.3}  {}", c.candidate_id, c.avg_rank, scores.join("  ")).unwrap();
    }
    writeln!(out, "best suffix: {}", best.suffix).unwrap();
    writeln!(out, "--- composed prompt ---\n{}", best.composed).unwrap();
    Ok(out)
}

#[derive(Debug, Serialize, PartialEq)]
struct TrajectoryRow {
    iteration: u32,
    proposed: usize,
    invalid: usize,
    duplicates: usize,
    empty_draws: usize,
    /// Best primary train score among candidates so far.
    best_train: Option<f64>,
    dev_evaluated: Option<u64>,
    incumbent: Option<u64>,
    incumbent_score: Option<f64>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    run_dir: &'a Path,
    mode: promptopt_core::engine::RunMode,
    finished: bool,
    trajectory: Vec<TrajectoryRow>,
    diversity: Option<DiversityStats>,
}

fn trajectory(record: &RunRecord) -> Vec<TrajectoryRow> {
    let primary = record.header.config.primary_index();
    let mut best: Option<f64> = None;
    record
        .steps
        .iter()
        .map(|s| {
            for c in record.candidates.iter().filter(|c| c.iteration == s.iteration) {
                let v = c.train.aggregates.get(primary).copied().unwrap_or(0.0);
                best = Some(best.map_or(v, |b| b.max(v)));
            }
            TrajectoryRow {
                iteration: s.iteration,
                proposed: s.proposed.len(),
                invalid: s.invalid,
                duplicates: s.duplicates,
                empty_draws: s.empty_draws,
                best_train: best,
                dev_evaluated: s.dev_evaluated,
                incumbent: s.incumbent.as_ref().map(|i| i.candidate_id),
                incumbent_score: s.incumbent.as_ref().map(|i| i.score),
            }
        })
        .collect()
}

pub fn report(args: &ReportArgs, json: bool) -> Result<String, Failure> {
    let record = RunRecord::load(&args.run_dir, false)?;
    let templates: Vec<&str> = record.candidates.iter().map(|c| c.template.as_str()).collect();
    let diversity = if templates.len() >= 2 {
        Some(diversity_report(&templates, &HashedNgramEmbedder::default())?)
    } else {
        None
    };
    let report = RunReport {
        run_dir: &args.run_dir,
        mode: record.header.mode,
        finished: record.is_finished(),
        trajectory: trajectory(&record),
        diversity,
    };
    if json {
        return Ok(to_json(&report));
    }
    let mut out = String::new();
    let state = if report.finished { "finished" } else { "unfinished" };
    writeln!(out, "run: {} ({:?}, {state})", args.run_dir.display(), report.mode).unwrap();
    writeln!(out, "iteration  proposed  invalid  duplicates  empty  best_train  dev_eval  incumbent  incumbent_score").unwrap();
    for r in &report.trajectory {
        let id = |v: Option<u64>| v.map_or_else(|| "-".to_owned(), |i| i.to_string());
        writeln!(
            out,
            "{:>9}  {:>8}  {:>7}  {:>10}  {:>5}  {:>10}  {:>8}  {:>9}  {:>15}",
            r.iteration,
            r.proposed,
            r.invalid,
            r.duplicates,
            r.empty_draws,
            score(r.best_train),
            id(r.dev_evaluated),
            id(r.incumbent),
            score(r.incumbent_score)
        )
        .unwrap();
    }
    match &report.diversity {
        Some(d) => {
            writeln!(out, "diversity:").unwrap();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(d).map_err(|e| Failure::data(e.to_string()))?;
            let bytes = w.into_inner().map_err(|e| Failure::data(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
        }
        None => writeln!(out, "diversity: needs at least 2 prompts").unwrap(),
    }
    Ok(out)
}

#[derive(Serialize)]
struct ReplayRecordReport<'a> {
    out: &'a Path,
    entries: usize,
    skipped_failed_calls: usize,
}

pub fn replay_record(args: &ReplayRecordArgs, json: bool) -> Result<String, Failure> {
    // Loading first drops any torn iteration so only committed calls remain.
    let record = RunRecord::load(&args.run_dir, false)?;
    let last = record.last_iteration();
    let read = read_jsonl::<Transcript>(&args.run_dir.join(TRANSCRIPTS_FILE))?;
    let mut lines = String::new();
    let (mut entries, mut skipped) = (0, 0);
    for t in read.records.iter().filter(|t| last.is_some_and(|l| t.iteration <= l)) {
        let Some(completion) = &t.completion else {
            skipped += 1;
            continue;
        };
        let entry = ReplayEntry {
            usage: Some(t.usage),
            ..ReplayEntry::keyed(t.role, &t.prompt, completion.clone())
        };
        lines.push_str(&serde_json::to_string(&entry)?);
        lines.push('\n');
        entries += 1;
    }
    write_atomic(&args.out, lines.as_bytes())?;
    let report = ReplayRecordReport {
        out: &args.out,
        entries,
        skipped_failed_calls: skipped,
    };
    if json {
        return Ok(to_json(&report));
    }
    Ok(format!(
        "wrote {entries} replay entries to {} ({skipped} failed calls skipped)\n",
        args.out.display()
    ))
}
