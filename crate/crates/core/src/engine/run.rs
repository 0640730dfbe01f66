//! The iteration driver and its persistence.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use super::eval::{evaluate, CallLog, EvalContext, IclSource};
use super::record::*;
use super::{EngineError, Evaluation, OptimizationConfig};
use crate::critique::{build_critique_prompt, parse_critique, sample_critique_examples, CritiqueExample, CritiqueOptions};
use crate::gateway::{prompt_sha256, truncate_words, GatewayError, LlmGateway, Role, TokenUsage};
use crate::metrics::{best_by_rank, rank_aggregate, MetricSpec, ScoreMatrix};
use crate::optimizer::{
    build_optimizer_prompt, cot_suggestions, dedupe_key, parse_new_candidates, select_top_k, IoExample,
    OptimizerError, OptimizerOptions, TrajectoryEntry,
};
use crate::rng;
use crate::selection::{EmbeddingProvider, HashedNgramEmbedder};
use crate::store::{append_jsonl, diversity_report, write_atomic, write_diversity_csv, DatasetSplits, Example};
use crate::templates::{validate_with, PromptTemplate, TemplatePolicy, Violation};

/// Runs optimizations against one dataset through one gateway.
pub struct Engine<'a> {
    gateway: &'a LlmGateway,
    data: &'a DatasetSplits,
    embedder: Arc<dyn EmbeddingProvider>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub best: BestPrompt,
    pub record: RunRecord,
}

impl<'a> Engine<'a> {
    pub fn new(gateway: &'a LlmGateway, data: &'a DatasetSplits) -> Self {
        Self {
            gateway,
            data,
            embedder: Arc::new(HashedNgramEmbedder::default()),
        }
    }

    /// Embedder for few-shot retrieval and diversity diagnostics.
    pub fn with_embedder(mut self, embedder: Arc<dyn EmbeddingProvider>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn data(&self) -> &'a DatasetSplits {
        self.data
    }

    pub fn gateway(&self) -> &'a LlmGateway {
        self.gateway
    }

    pub fn embedder(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.embedder
    }

    /// Optimizes from seed prompt `p0` into a fresh run directory.
    pub fn optimize(&self, config: OptimizationConfig, p0: &str, dir: &Path) -> Result<RunOutcome, EngineError> {
        self.start(RunHeader::new(RunMode::Optimize, config, p0, None, self.data), dir)
    }

    /// Starts the run described by `header` in an empty directory.
    pub fn start(&self, header: RunHeader, dir: &Path) -> Result<RunOutcome, EngineError> {
        if dir.join(CONFIG_FILE).exists() {
            return Err(EngineError::RunExists(dir.to_owned()));
        }
        let mut run = Run::new(self, header, dir)?;
        std::fs::create_dir_all(dir).map_err(|source| crate::store::StoreError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let body = serde_json::to_string_pretty(&run.header).map_err(crate::store::StoreError::from)?;
        write_atomic(&dir.join(CONFIG_FILE), body.as_bytes())?;
        if let Some(main) = &run.header.main_prompt {
            write_atomic(&dir.join(MAIN_PROMPT_FILE), main.as_bytes())?;
        }
        run.drive()
    }

    /// Continues the run stored in `dir` with its recorded configuration.
    pub fn resume(&self, dir: &Path) -> Result<RunOutcome, EngineError> {
        if !dir.join(CONFIG_FILE).exists() {
            return Err(EngineError::NoRun(dir.to_owned()));
        }
        let header = RunRecord::read_header(dir)?;
        let digest = dataset_digest(self.data);
        if header.dataset_sha256 != digest {
            return Err(EngineError::ConfigMismatch {
                stored: header.config_hash,
                current: format!("dataset {digest}"),
            });
        }
        let mut run = Run::new(self, header, dir)?;
        run.drive()
    }

    /// Resumes `dir` if it holds a run started with exactly `header`,
    /// otherwise starts one there.
    pub fn resume_or_start(&self, header: RunHeader, dir: &Path) -> Result<RunOutcome, EngineError> {
        if !dir.join(CONFIG_FILE).exists() {
            return self.start(header, dir);
        }
        let stored = RunRecord::read_header(dir)?;
        if stored.config_hash != header.config_hash {
            return Err(EngineError::ConfigMismatch {
                stored: stored.config_hash,
                current: header.config_hash,
            });
        }
        self.resume(dir)
    }
}

struct NewCandidate {
    instruction: String,
    template: PromptTemplate,
}

struct Run<'e, 'a> {
    engine: &'e Engine<'a>,
    header: RunHeader,
    metrics: Vec<MetricSpec>,
    primary: usize,
    policy: TemplatePolicy,
    icl: Option<IclSource>,
    io_examples: Vec<IoExample>,
    record: RunRecord,
    seen: HashSet<String>,
}

impl<'e, 'a> Run<'e, 'a> {
    fn new(engine: &'e Engine<'a>, header: RunHeader, dir: &Path) -> Result<Self, EngineError> {
        let cfg = &header.config;
        cfg.check()?;
        let data = engine.data;
        if cfg.task_kind != data.kind {
            return Err(EngineError::Config(format!(
                "config task kind {:?} does not match dataset kind {:?}",
                cfg.task_kind, data.kind
            )));
        }
        if data.train.is_empty() || data.dev.is_empty() {
            return Err(EngineError::Config("optimization needs nonempty train and dev splits".into()));
        }
        let n_train = data.train.len();
        if cfg.critique_examples > n_train {
            return Err(EngineError::Config(format!(
                "critique_examples ({}) exceeds the train split ({n_train})",
                cfg.critique_examples
            )));
        }
        if cfg.io_examples > n_train {
            return Err(EngineError::Config(format!(
                "io_examples ({}) exceeds the train split ({n_train})",
                cfg.io_examples
            )));
        }
        if cfg.icl_shots >= n_train && cfg.icl_shots > 0 {
            return Err(EngineError::Config(format!(
                "icl_shots ({}) needs a train split larger than that ({n_train})",
                cfg.icl_shots
            )));
        }
        let metrics = cfg.effective_metrics();
        let primary = cfg.primary_index();
        if header.mode.ranked() {
            if metrics.len() < 2 {
                return Err(EngineError::Config(
                    "rank-aggregated tuning needs at least two metrics; use plain optimization".into(),
                ));
            }
        } else if !metrics[primary].higher_is_better {
            return Err(EngineError::Config(format!(
                "primary metric `{}` must be higher-is-better",
                metrics[primary].id
            )));
        }
        let policy = TemplatePolicy {
            kind: cfg.task_kind,
            allow_examples: cfg.icl_shots > 0,
            allow_context: data.has_contexts(),
        };
        let icl = if cfg.icl_shots > 0 {
            Some(IclSource::build(&data.train, cfg.icl_shots, engine.embedder.clone())?)
        } else {
            None
        };
        let mut r = rng::derived(cfg.seed, "io-examples", 0);
        let io_examples = rng::sample_indices(&mut r, n_train, cfg.io_examples)
            .into_iter()
            .map(|i| {
                let e = &data.train[i];
                IoExample {
                    input: e.input.clone(),
                    contexts: e.contexts.clone(),
                    output: e.primary_reference().to_owned(),
                }
            })
            .collect();
        let record = if dir.join(STEPS_FILE).exists() || dir.join(CANDIDATES_FILE).exists() {
            RunRecord::load(dir, true)?
        } else {
            RunRecord {
                dir: dir.to_owned(),
                header: header.clone(),
                candidates: Vec::new(),
                dev_evals: Vec::new(),
                steps: Vec::new(),
                transcripts: 0,
                usage: TokenUsage::default(),
            }
        };
        let seen = record.candidates.iter().map(|c| dedupe_key(&c.instruction)).collect();
        let run = Self {
            engine,
            header,
            metrics,
            primary,
            policy,
            icl,
            io_examples,
            record,
            seen,
        };
        if let Some(main) = &run.header.main_prompt {
            validate_with(main, &run.policy).map_err(EngineError::SeedPrompt)?;
        }
        Ok(run)
    }

    fn cfg(&self) -> &OptimizationConfig {
        &self.header.config
    }

    fn dir(&self) -> &Path {
        &self.record.dir
    }

    fn ctx(&self) -> EvalContext<'_> {
        EvalContext {
            gateway: self.engine.gateway,
            metrics: &self.metrics,
            icl: self.icl.as_ref(),
            max_flagged_fraction: self.cfg().max_flagged_fraction,
        }
    }

    fn drive(&mut self) -> Result<RunOutcome, EngineError> {
        if self.record.steps.is_empty() {
            self.seed_iteration()?;
        }
        while let Some(last) = self.record.last_iteration() {
            if last >= self.cfg().iterations {
                break;
            }
            self.step(last + 1)?;
        }
        self.finish()
    }

    // Candidate construction -------------------------------------------------

    fn suffix_mode(&self) -> bool {
        self.header.mode == RunMode::SuffixTune
    }

    fn fixed_layout(&self) -> bool {
        !self.cfg().flags.use_flexible_template && !self.suffix_mode()
    }

    /// Turns optimizer output into an evaluable candidate.
    fn candidate_from(&self, text: &str) -> Result<NewCandidate, Vec<Violation>> {
        if self.suffix_mode() {
            let main = self.header.main_prompt.as_deref().unwrap_or_default();
            let template = validate_with(&compose(main, text), &self.policy)?;
            return Ok(NewCandidate {
                instruction: text.to_owned(),
                template,
            });
        }
        let template = if self.fixed_layout() && is_bare(text) {
            PromptTemplate::fixed_layout(text, &self.policy)?
        } else {
            validate_with(text, &self.policy)?
        };
        Ok(NewCandidate {
            instruction: text.to_owned(),
            template,
        })
    }

    fn seed_candidate(&self) -> Result<NewCandidate, EngineError> {
        let seed = self.header.seed_prompt.as_str();
        let text = match (self.header.mode, &self.header.main_prompt) {
            (RunMode::SuffixTune, _) => return self.candidate_from(seed).map_err(EngineError::SeedPrompt),
            (RunMode::FullTune, Some(main)) => compose(main, seed),
            _ => seed.to_owned(),
        };
        let template = if self.fixed_layout() && is_bare(&text) {
            PromptTemplate::fixed_layout(&text, &self.policy)
        } else {
            PromptTemplate::from_seed(&text, &self.policy)
        }
        .map_err(EngineError::SeedPrompt)?;
        Ok(NewCandidate { instruction: text, template })
    }

    // Logging ----------------------------------------------------------------

    fn log_calls(
        &mut self,
        iteration: u32,
        purpose: &str,
        candidate_id: Option<u64>,
        calls: &[CallLog],
    ) -> Result<(), EngineError> {
        for c in calls {
            let t = Transcript {
                seq: self.record.transcripts,
                iteration,
                role: c.role,
                purpose: purpose.to_owned(),
                candidate_id,
                example_id: c.example_id.clone(),
                prompt_sha256: prompt_sha256(&c.prompt),
                prompt: c.prompt.clone(),
                completion: c.completion.clone(),
                error: c.error.clone(),
                usage: c.usage,
                attempts: c.attempts,
            };
            append_jsonl(&self.dir().join(TRANSCRIPTS_FILE), &t)?;
            self.record.transcripts += 1;
            self.record.usage += c.usage;
        }
        Ok(())
    }

    fn log_timing(&self, iteration: u32, phase: &str, started: Instant, calls: &[CallLog]) -> Result<(), EngineError> {
        let rec = TimingRecord {
            iteration,
            phase: phase.to_owned(),
            wall_ms: started.elapsed().as_millis() as u64,
            calls: calls.len(),
            call_latency_ms: calls.iter().map(|c| c.latency_ms).sum(),
        };
        append_jsonl(&self.dir().join(TIMING_FILE), &rec)?;
        Ok(())
    }

    fn call(&self, role: Role, prompt: String) -> Result<CallLog, EngineError> {
        let req = self.engine.gateway.request(role, prompt)?;
        let c = self.engine.gateway.complete(&req)?;
        Ok(CallLog {
            role,
            example_id: None,
            prompt: req.prompt,
            completion: Some(c.text),
            error: None,
            usage: c.usage,
            attempts: c.attempts,
            latency_ms: c.latency_ms,
        })
    }

    // Phases -----------------------------------------------------------------

    fn evaluate_split(
        &mut self,
        iteration: u32,
        candidate_id: u64,
        template: &PromptTemplate,
        split: &str,
    ) -> Result<Evaluation, EngineError> {
        let started = Instant::now();
        let examples: &[Example] = match split {
            "train" => &self.engine.data.train,
            _ => &self.engine.data.dev,
        };
        let outcome = evaluate(&self.ctx(), template, split, examples);
        let (eval, calls) = outcome?;
        self.log_calls(iteration, &format!("{split}-eval"), Some(candidate_id), &calls)?;
        self.log_timing(iteration, &format!("{split}-eval"), started, &calls)?;
        Ok(eval)
    }

    /// Evaluates new candidates on train and critiques each, then appends
    /// their records.
    fn admit(&mut self, iteration: u32, fresh: Vec<NewCandidate>) -> Result<Vec<u64>, EngineError> {
        let first_id = self.record.candidates.len() as u64;
        let mut pending = Vec::with_capacity(fresh.len());
        for (offset, c) in fresh.into_iter().enumerate() {
            let id = first_id + offset as u64;
            let train = self.evaluate_split(iteration, id, &c.template, "train")?;
            pending.push(CandidateRecord {
                id,
                iteration,
                instruction: c.instruction,
                template: c.template.text().to_owned(),
                train,
                critique: None,
            });
        }
        if self.cfg().flags.use_critique && !pending.is_empty() {
            self.critique_all(iteration, &mut pending)?;
        }
        let mut ids = Vec::with_capacity(pending.len());
        for c in pending {
            append_jsonl(&self.dir().join(CANDIDATES_FILE), &c)?;
            self.seen.insert(dedupe_key(&c.instruction));
            ids.push(c.id);
            self.record.candidates.push(c);
        }
        Ok(ids)
    }

    fn critique_all(&mut self, iteration: u32, pending: &mut [CandidateRecord]) -> Result<(), EngineError> {
        let started = Instant::now();
        let cfg = self.cfg().clone();
        let gateway = self.engine.gateway;
        let budget = gateway.role_config(Role::Critique).and_then(|c| c.word_budget);
        let train = &self.engine.data.train;
        let indices: Vec<usize> = (0..train.len()).collect();
        let mut reqs = Vec::with_capacity(pending.len());
        let mut batches = Vec::with_capacity(pending.len());
        for c in pending.iter() {
            let picked = sample_critique_examples(&indices, cfg.critique_examples, cfg.seed, c.id)?;
            let batch: Vec<CritiqueExample> = picked
                .iter()
                .map(|&i| {
                    let ex = &train[i];
                    CritiqueExample {
                        input: match budget {
                            Some(b) => truncate_words(&ex.input, b).to_owned(),
                            None => ex.input.clone(),
                        },
                        contexts: ex.contexts.clone(),
                        prediction: c.train.outcomes[i].prediction.clone(),
                        reference: ex.primary_reference().to_owned(),
                    }
                })
                .collect();
            let opts = CritiqueOptions {
                kind: cfg.task_kind,
                family: cfg.family,
                variant: &cfg.critique_variant,
                main_prompt: self.header.main_prompt.as_deref().filter(|_| self.suffix_mode()),
            };
            let prompt = build_critique_prompt(&c.instruction, &batch, opts)?;
            reqs.push(gateway.request(Role::Critique, prompt)?);
            batches.push(picked.iter().map(|&i| train[i].id.clone()).collect::<Vec<_>>());
        }
        let results = gateway.complete_many(&reqs, gateway.parallelism());
        let mut all_calls = Vec::new();
        let mut failure: Option<GatewayError> = None;
        for ((c, req), (res, ids)) in pending.iter_mut().zip(reqs).zip(results.into_iter().zip(batches)) {
            match res {
                Ok(done) => {
                    let calls = [CallLog {
                        role: Role::Critique,
                        example_id: None,
                        prompt: req.prompt,
                        completion: Some(done.text.clone()),
                        error: None,
                        usage: done.usage,
                        attempts: done.attempts,
                        latency_ms: done.latency_ms,
                    }];
                    self.log_calls(iteration, "critique", Some(c.id), &calls)?;
                    all_calls.extend(calls);
                    c.critique = Some(CritiqueRecord {
                        example_ids: ids,
                        report: parse_critique(&done.text),
                    });
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        self.log_timing(iteration, "critique", started, &all_calls)?;
        match failure {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    /// Train-side scores of every candidate: the primary aggregate, or in
    /// ranked modes a [0, 1] score from the average rank over the pool.
    fn train_scores(&self) -> Result<Vec<f64>, EngineError> {
        let cands = &self.record.candidates;
        if !self.header.mode.ranked() {
            return Ok(cands.iter().map(|c| c.train.aggregates[self.primary]).collect());
        }
        let ranks = self.ranks(cands.iter().map(|c| (c.id, &c.train)))?;
        let n = cands.len() as f64;
        Ok(ranks
            .into_iter()
            .map(|r| if n > 1.0 { (n - r) / (n - 1.0) } else { 1.0 })
            .collect())
    }

    fn ranks<'r>(&self, evals: impl Iterator<Item = (u64, &'r Evaluation)>) -> Result<Vec<f64>, EngineError> {
        let (names, cells): (Vec<String>, Vec<Vec<f64>>) =
            evals.map(|(id, e)| (id.to_string(), e.aggregates.clone())).unzip();
        let m = ScoreMatrix::new(names, self.metrics.clone(), cells)?;
        Ok(rank_aggregate(&m))
    }

    fn trajectory(&self) -> Result<Vec<TrajectoryEntry>, EngineError> {
        let scores = self.train_scores()?;
        Ok(self
            .record
            .candidates
            .iter()
            .zip(scores)
            .map(|(c, score)| TrajectoryEntry {
                candidate_id: c.id,
                instruction: c.instruction.clone(),
                score,
                critique: c
                    .critique
                    .as_ref()
                    .map(|r| r.report.trajectory_text().to_owned())
                    .unwrap_or_default(),
                iteration: c.iteration,
            })
            .collect())
    }

    fn seed_iteration(&mut self) -> Result<(), EngineError> {
        let seed = self.seed_candidate()?;
        let template = seed.template.clone();
        let ids = self.admit(0, vec![seed])?;
        let mut dev_evaluated = None;
        if self.header.mode.ranked() {
            let dev = self.evaluate_split(0, ids[0], &template, "dev")?;
            self.push_dev(0, ids[0], dev)?;
            dev_evaluated = Some(ids[0]);
        }
        let step = StepRecord {
            iteration: 0,
            elite: Vec::new(),
            proposed: ids,
            optimizer_calls: 0,
            invalid: 0,
            duplicates: 0,
            empty_draws: 0,
            cot_suggestions: Vec::new(),
            dev_evaluated,
            incumbent: self.incumbent()?,
        };
        self.commit(step)
    }

    fn push_dev(&mut self, iteration: u32, candidate_id: u64, evaluation: Evaluation) -> Result<(), EngineError> {
        let rec = DevEvalRecord {
            iteration,
            candidate_id,
            evaluation,
        };
        append_jsonl(&self.dir().join(DEV_EVALS_FILE), &rec)?;
        self.record.dev_evals.push(rec);
        Ok(())
    }

    fn commit(&mut self, step: StepRecord) -> Result<(), EngineError> {
        append_jsonl(&self.dir().join(STEPS_FILE), &step)?;
        self.record.steps.push(step);
        Ok(())
    }

    fn step(&mut self, t: u32) -> Result<(), EngineError> {
        let cfg = self.cfg().clone();
        let started = Instant::now();
        let elite = select_top_k(&self.trajectory()?, cfg.top_k).map_err(|e| EngineError::Integrity(e.to_string()))?;
        let main = self.header.main_prompt.clone();
        let opts = OptimizerOptions {
            kind: cfg.task_kind,
            family: cfg.family,
            flags: cfg.flags,
            main_prompt: main.as_deref().filter(|_| self.suffix_mode()),
        };
        let meta = build_optimizer_prompt(&elite, &self.io_examples, opts);

        let mut fresh: Vec<NewCandidate> = Vec::new();
        let mut batch_seen = self.seen.clone();
        let (mut calls, mut invalid, mut duplicates, mut empty_draws) = (0u32, 0, 0, 0);
        let mut suggestions = Vec::new();
        let mut opt_logs = Vec::new();
        for _ in 0..cfg.candidates_per_step {
            let mut got = None;
            for _attempt in 0..2 {
                let log = self.call(Role::Optimizer, meta.clone())?;
                calls += 1;
                let text = log.completion.clone().unwrap_or_default();
                self.log_calls(t, "optimizer", None, std::slice::from_ref(&log))?;
                opt_logs.push(log);
                match parse_new_candidates(&text, 1, &batch_seen, |s| self.candidate_from(s)) {
                    Ok(parsed) => {
                        invalid += parsed.invalid.len();
                        duplicates += parsed.duplicates;
                        suggestions.extend(cot_suggestions(&text));
                        got = parsed.accepted.into_iter().next();
                        break;
                    }
                    Err(OptimizerError::Resample {
                        invalid: i,
                        duplicate: d,
                    }) => {
                        invalid += i;
                        duplicates += d;
                    }
                    Err(e) => return Err(EngineError::Integrity(e.to_string())),
                }
            }
            match got {
                Some((text, cand)) => {
                    batch_seen.insert(dedupe_key(&text));
                    fresh.push(cand);
                }
                None => empty_draws += 1,
            }
        }
        self.log_timing(t, "optimizer", started, &opt_logs)?;

        let proposed = self.admit(t, fresh)?;
        let dev_evaluated = if t.is_multiple_of(cfg.dev_eval_every) || t == cfg.iterations {
            self.dev_gate(t)?
        } else {
            None
        };
        let step = StepRecord {
            iteration: t,
            elite: elite.iter().map(|e| e.candidate_id).collect(),
            proposed,
            optimizer_calls: calls,
            invalid,
            duplicates,
            empty_draws,
            cot_suggestions: suggestions,
            dev_evaluated,
            incumbent: self.incumbent()?,
        };
        self.commit(step)
    }

    /// Dev-evaluates the train-best candidate created since the previous gate.
    fn dev_gate(&mut self, t: u32) -> Result<Option<u64>, EngineError> {
        let every = self.cfg().dev_eval_every;
        let since = ((t - 1) / every) * every;
        let scores = self.train_scores()?;
        let pick = self
            .record
            .candidates
            .iter()
            .zip(&scores)
            .filter(|(c, _)| c.iteration > since && c.iteration <= t)
            .filter(|(c, _)| !self.record.dev_evals.iter().any(|d| d.candidate_id == c.id))
            .fold(None::<(&CandidateRecord, f64)>, |best, (c, &s)| match best {
                Some((_, bs)) if bs > s => best,
                _ => Some((c, s)),
            })
            .map(|(c, _)| (c.id, c.template.clone()));
        let Some((id, text)) = pick else {
            return Ok(None);
        };
        let template = validate_with(&text, &self.policy).map_err(EngineError::SeedPrompt)?;
        let dev = self.evaluate_split(t, id, &template, "dev")?;
        self.push_dev(t, id, dev)?;
        Ok(Some(id))
    }

    /// Current selection: best dev score (ties to higher train score, then
    /// recency), or best average dev rank in ranked modes.
    fn select(&self) -> Result<Option<BestPrompt>, EngineError> {
        let cands = &self.record.candidates;
        if cands.is_empty() {
            return Ok(None);
        }
        let train = self.train_scores()?;
        let mut devs: Vec<&DevEvalRecord> = self.record.dev_evals.iter().collect();
        devs.sort_by_key(|d| d.candidate_id);
        let best = |id: u64, dev: Option<f64>, rank: Option<f64>| {
            let c = &cands[id as usize];
            BestPrompt {
                candidate_id: id,
                instruction: c.instruction.clone(),
                template: c.template.clone(),
                train_score: train[id as usize],
                dev_score: dev,
                avg_rank: rank,
            }
        };
        if devs.is_empty() {
            let i = (0..cands.len())
                .max_by(|&a, &b| train[a].total_cmp(&train[b]).then(a.cmp(&b)))
                .expect("nonempty");
            return Ok(Some(best(i as u64, None, None)));
        }
        if self.header.mode.ranked() {
            let ranks = self.ranks(devs.iter().map(|d| (d.candidate_id, &d.evaluation)))?;
            let i = best_by_rank(&ranks).expect("nonempty");
            let d = devs[i];
            return Ok(Some(best(d.candidate_id, None, Some(ranks[i]))));
        }
        let p = self.primary;
        let d = devs
            .iter()
            .max_by(|a, b| {
                a.evaluation.aggregates[p]
                    .total_cmp(&b.evaluation.aggregates[p])
                    .then(train[a.candidate_id as usize].total_cmp(&train[b.candidate_id as usize]))
                    .then(a.candidate_id.cmp(&b.candidate_id))
            })
            .expect("nonempty");
        Ok(Some(best(d.candidate_id, Some(d.evaluation.aggregates[p]), None)))
    }

    fn incumbent(&self) -> Result<Option<Incumbent>, EngineError> {
        if self.record.dev_evals.is_empty() {
            return Ok(None);
        }
        Ok(self.select()?.map(|b| Incumbent {
            candidate_id: b.candidate_id,
            score: b.dev_score.or(b.avg_rank).unwrap_or_default(),
        }))
    }

    fn finish(&mut self) -> Result<RunOutcome, EngineError> {
        let best = self.select()?.expect("seed candidate always exists");
        let summary = Summary {
            mode: self.header.mode,
            iterations_completed: self.record.last_iteration().unwrap_or_default(),
            candidates: self.record.candidates.len(),
            dev_evaluations: self.record.dev_evals.len(),
            transcripts: self.record.transcripts,
            usage: self.record.usage,
            best: best.clone(),
        };
        let dir = self.dir().to_owned();
        let body = serde_json::to_string_pretty(&summary).map_err(crate::store::StoreError::from)?;
        write_atomic(&dir.join(SUMMARY_FILE), format!("{body}\n").as_bytes())?;
        write_atomic(&dir.join(BEST_PROMPT_FILE), best.template.as_bytes())?;
        let texts: Vec<&str> = self.record.candidates.iter().map(|c| c.template.as_str()).collect();
        if texts.len() >= 2 {
            let stats = diversity_report(&texts, self.engine.embedder.as_ref())?;
            write_diversity_csv(&dir.join(DIVERSITY_FILE), &stats)?;
        }
        let mut record = self.record.clone();
        record.header = self.header.clone();
        Ok(RunOutcome { best, record })
    }
}

/// No placeholder at all, so the fixed layout must supply them.
fn is_bare(text: &str) -> bool {
    !text.contains("INSERT_")
}

/// Frozen main prompt followed by a suffix on its own line.
pub(crate) fn compose(main: &str, suffix: &str) -> String {
    format!("{main}\n{suffix}")
}
