//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::oracle;
use common::*;
use promptopt_core::ast::{full_tune_baseline, tune_suffix, DEFAULT_SEED_SUFFIX};
use promptopt_core::critique::{build_critique_prompt, CritiqueExample, CritiqueOptions, CritiqueVariant};
use promptopt_core::engine::*;
use promptopt_core::metaprompt::ProviderFamily;
use promptopt_core::metrics::{
    best_by_rank, rank_aggregate, rouge_l, rouge_n, score_builtin, token_f1, MetricKind, MetricSpec,
    ScoreMatrix,
};
use promptopt_core::optimizer::{build_optimizer_prompt, display_score, AblationFlags, IoExample, OptimizerOptions, TrajectoryEntry};
use promptopt_core::selection::{EmbeddingProvider, HashedNgramEmbedder};
use promptopt_core::store::diversity_report;
use promptopt_core::templates::{extract_tagged, validate, TaskKind, Violation};

const METRIC_TOL: f64 = 1e-12;
const DIVERSITY_TOL: f64 = 1e-9;
const ORACLE_BUDGET: Duration = Duration::from_secs(5);
const SCRIPTED_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    check((a - b).abs() <= tol, format!("{what}: {a} vs {b} (tol {tol:e})"))
}

fn c1_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let alphabet = rng.random_range(1..=8u8);
        let seq = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.random_range(0..=20);
            (0..n).map(|_| rng.random_range(0..alphabet)).collect()
        };
        let (p, r) = (seq(&mut rng), seq(&mut rng));
        let (pw, rw) = (oracle::words(&p), oracle::words(&r));
        for (got, want) in [
            (rouge_n::<f64, _>(&pw, &rw, 1).unwrap().f, oracle::rouge_n_f(&p, &r, 1)),
            (rouge_n::<f64, _>(&pw, &rw, 2).unwrap().f, oracle::rouge_n_f(&p, &r, 2)),
            (rouge_l::<f64, _>(&pw, &rw).f, oracle::rouge_l_f(&p, &r)),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let took = start.elapsed();
    check(worst <= METRIC_TOL, format!("max deviation {worst:e}"))?;
    check(took < ORACLE_BUDGET, format!("took {took:?}"))?;
    Ok(format!("500 pairs, max |Δ| = {worst:e} ≤ {METRIC_TOL:e}, {took:?} < {ORACLE_BUDGET:?}"))
}

fn c2_hand_values() -> Outcome {
    let t = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    let r1 = rouge_n::<f64, _>(&t("the cat sat"), &t("the cat"), 1).unwrap();
    close(r1.precision, 2.0 / 3.0, METRIC_TOL, "rouge-1 P")?;
    close(r1.recall, 1.0, METRIC_TOL, "rouge-1 R")?;
    close(r1.f, 0.8, METRIC_TOL, "rouge-1 F")?;
    let r2 = rouge_n::<f64, _>(&t("a b c"), &t("a b d"), 2).unwrap();
    close(r2.f, 0.5, METRIC_TOL, "rouge-2 F")?;
    let rl = rouge_l::<f64, _>(&t("a b c d"), &t("a c b d"));
    close(rl.f, 0.75, METRIC_TOL, "rouge-L F")?;
    let f1 = token_f1::<f64>("black cat", "cat");
    close(f1.f, 2.0 / 3.0, METRIC_TOL, "token F1")?;
    close(token_f1::<f64>("the cat", "cat").f, 1.0, METRIC_TOL, "token F1 with article")?;
    let em = MetricSpec::new("em", MetricKind::ExactMatch);
    close(score_builtin::<f64>(&em, "the Paris", &["paris".into()]).unwrap(), 1.0, 0.0, "exact match")?;
    let m = ScoreMatrix::new(
        vec!["c1".into(), "c2".into(), "c3".into()],
        vec![MetricSpec::rouge_n(1), MetricSpec::rouge_l()],
        vec![vec![0.5, 0.8], vec![0.7, 0.6], vec![0.6, 0.2]],
    )
    .unwrap();
    let ranks = rank_aggregate(&m);
    check(ranks == vec![2.0, 1.5, 2.5], format!("ranks {ranks:?}"))?;
    check(best_by_rank(&ranks) == Some(1), "best is not c2")?;
    Ok("rouge-1 F=0.8, rouge-L F=0.75, token F1=2/3, best=c2 (tol 1e-12)".into())
}

fn c3_rank_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let n = rng.random_range(2..10);
        let k = rng.random_range(1..5);
        let dirs: Vec<bool> = (0..k).map(|_| rng.random_bool(0.7)).collect();
        let cells: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(0..6) as f64 / 5.0).collect())
            .collect();
        let specs: Vec<MetricSpec> = dirs
            .iter()
            .enumerate()
            .map(|(j, &hib)| MetricSpec {
                higher_is_better: hib,
                ..MetricSpec::new(format!("m{j}"), MetricKind::RougeL)
            })
            .collect();
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let before = rank_aggregate(&ScoreMatrix::new(names.clone(), specs.clone(), cells.clone()).unwrap());
        let col = rng.random_range(0..k);
        let (a, b, which) = (rng.random_range(0.1..10.0), rng.random_range(-3.0..3.0), rng.random_range(0..3));
        let f = |x: f64| -> f64 {
            match which {
                0 => a * x + b,
                1 => (x * a).exp() + b,
                _ => x * x * x + x + b,
            }
        };
        let mut moved = cells.clone();
        for row in &mut moved {
            row[col] = f(row[col]);
        }
        let after = rank_aggregate(&ScoreMatrix::new(names, specs, moved).unwrap());
        let order = |r: &[f64]| {
            let mut idx: Vec<usize> = (0..r.len()).collect();
            idx.sort_by(|&x, &y| r[x].total_cmp(&r[y]).then(x.cmp(&y)));
            idx
        };
        check(order(&before) == order(&after), format!("trial {trial}: order changed"))?;
        check(best_by_rank(&before) == best_by_rank(&after), format!("trial {trial}: best changed"))?;
        let want = oracle::mean_ranks(&cells, &dirs);
        for (x, y) in before.iter().zip(&want) {
            close(*x, *y, METRIC_TOL, "rank vs counting oracle")?;
        }
    }
    Ok("200 matrices, ordering unchanged under increasing transforms".into())
}

fn convergence_pool() -> Vec<(usize, usize)> {
    vec![(2, 3), (6, 4), (4, 9), (8, 7), (3, 2)]
}

fn c4_scripted_convergence() -> Outcome {
    let start = Instant::now();
    let data = dataset(6, 4);
    let pool: Vec<String> = convergence_pool()
        .iter()
        .enumerate()
        .map(|(i, &(q, d))| template(&format!("pool member {i}"), q, d))
        .collect();
    let cfg = OptimizationConfig {
        iterations: 5,
        candidates_per_step: 1,
        dev_eval_every: 1,
        critique_examples: 3,
        seed: 11,
        ..OptimizationConfig::for_task(TaskKind::Summarization)
    };
    let seed = template("seed", 1, 1);
    let mut files = Vec::new();
    let mut best = None;
    let mut k_effective = 0;
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(&pool);
        let out = Engine::new(&gw, &data).optimize(cfg.clone(), &seed, dir.path()).unwrap();
        k_effective = out.record.steps.iter().skip(1).map(|s| s.proposed.len()).max().unwrap_or(0);
        check(
            out.record.candidates.len() == 1 + cfg.iterations as usize * k_effective,
            format!("{} candidates", out.record.candidates.len()),
        )?;
        files.push(
            [CONFIG_FILE, CANDIDATES_FILE, TRANSCRIPTS_FILE, DEV_EVALS_FILE, STEPS_FILE, SUMMARY_FILE, BEST_PROMPT_FILE]
                .iter()
                .map(|f| read(dir.path(), f))
                .collect::<Vec<_>>(),
        );
        best = Some(out.best.template);
    }
    // Exhaustive maximum over the pool with the closed-form dev score.
    let (arg, _) = convergence_pool()
        .iter()
        .enumerate()
        .map(|(i, &(_, d))| (i, oracle_f(d)))
        .fold((usize::MAX, f64::MIN), |a, x| if x.1 > a.1 { x } else { a });
    check(best.as_deref() == Some(pool[arg].as_str()), "p* is not the exhaustive max")?;
    check(files[0] == files[1], "run records differ between identical runs")?;
    let took = start.elapsed();
    check(took < SCRIPTED_BUDGET, format!("took {took:?}"))?;
    Ok(format!(
        "p* = pool[{arg}], 1 + 5·{k_effective} candidates, byte-identical reruns, {took:?} < {SCRIPTED_BUDGET:?}"
    ))
}

fn c5_cadence() -> Outcome {
    let data = dataset(4, 3);
    let proposals: Vec<String> = (0..20).map(|i| template(&format!("c{i}"), i % 9 + 1, (i * 3) % 9 + 1)).collect();
    let gw = gateway(&proposals);
    let dir = tempfile::tempdir().unwrap();
    let cfg = OptimizationConfig {
        iterations: 20,
        candidates_per_step: 1,
        critique_examples: 2,
        ..OptimizationConfig::for_task(TaskKind::Summarization)
    };
    let out = Engine::new(&gw, &data)
        .optimize(cfg, &template("seed", 1, 1), dir.path())
        .unwrap();
    let at: Vec<u32> = out.record.dev_evals.iter().map(|d| d.iteration).collect();
    check(at == vec![5, 10, 15, 20], format!("dev evaluations at {at:?}"))?;
    Ok(format!("dev evaluations at {at:?}"))
}

fn sample_trajectory() -> (Vec<TrajectoryEntry>, Vec<IoExample>) {
    let entries = (0..3)
        .map(|i| TrajectoryEntry {
            candidate_id: i,
            instruction: format!("Summarize version {i}.\nINSERT_INPUT_HERE"),
            score: 0.2 + i as f64 / 10.0,
            critique: format!("Predictions of version {i} are too long."),
            iteration: i as u32,
        })
        .collect();
    let io = vec![IoExample {
        input: "A long article.".into(),
        contexts: Vec::new(),
        output: "Short.".into(),
    }];
    (entries, io)
}

fn c6_opro_fidelity() -> Outcome {
    let (entries, io) = sample_trajectory();
    let render = |flags| {
        build_optimizer_prompt(
            &entries,
            &io,
            OptimizerOptions {
                kind: TaskKind::Summarization,
                family: ProviderFamily::Claude,
                flags,
                main_prompt: None,
            },
        )
    };
    let opro = render(AblationFlags::opro());
    let full = render(AblationFlags::default());
    let numbered = |s: &str| s.lines().any(|l| l.len() > 2 && l.as_bytes()[0].is_ascii_digit() && &l[1..3] == ". ");
    let lower = opro.to_lowercase();
    check(!lower.contains("critique"), "OPRO prompt mentions critique")?;
    check(!lower.contains("suggestion"), "OPRO prompt mentions suggestion")?;
    check(!numbered(&opro), "OPRO prompt has a numbered step list")?;
    check(!opro.contains("Predictions of version"), "OPRO prompt carries critique text")?;
    check(full.contains("<critique>\nPredictions of version 0"), "default prompt lacks critique stanzas")?;
    check(numbered(&full), "default prompt lacks the step list")?;
    check(
        full.contains("Compare high-score instructions to low-score ones"),
        "default prompt lacks the comparison directive",
    )?;
    Ok("OPRO: no critique/suggestion/steps; defaults: critiques + verbatim step list".into())
}

fn c7_ast_freeze() -> Outcome {
    let data = dataset(4, 3);
    let metrics = vec![
        MetricSpec::rouge_n(1),
        MetricSpec::new(
            "brevity",
            MetricKind::External {
                endpoint: BREVITY.into(),
                against_input: false,
            },
        ),
    ];
    let cfg = OptimizationConfig {
        iterations: 3,
        candidates_per_step: 2,
        dev_eval_every: 1,
        critique_examples: 2,
        metrics,
        ..OptimizationConfig::for_task(TaskKind::Summarization)
    };
    let p_star = template("main", 5, 5);
    let suffixes: Vec<String> = [(9, 9), (2, 2), (6, 7), (4, 3), (8, 1), (5, 6)]
        .iter()
        .map(|&(q, d)| format!("Keep it tight (quality={q}, devq={d})."))
        .collect();
    let gw = gateway(&suffixes);
    let dir = tempfile::tempdir().unwrap();
    let out = tune_suffix(&Engine::new(&gw, &data), cfg.clone(), &p_star, DEFAULT_SEED_SUFFIX, dir.path()).unwrap();
    let prefix = format!("{p_star}\n");
    let frozen = out.run.record.candidates.iter().all(|c| c.template.starts_with(&prefix));
    check(frozen, "a suffix candidate altered p*")?;
    let seed_rank = out
        .pool
        .iter()
        .find(|c| c.candidate_id == 0)
        .map(|c| c.avg_rank)
        .ok_or("seed suffix missing from the pool")?;
    check(out.best.avg_rank <= seed_rank, format!("σ* rank {} > σ0 rank {seed_rank}", out.best.avg_rank))?;

    let rewrites: Vec<String> = [(7, 2), (3, 8)]
        .iter()
        .enumerate()
        .map(|(i, &(q, d))| template(&format!("rewrite {i}"), q, d))
        .collect();
    let gw = gateway(&rewrites);
    let dir = tempfile::tempdir().unwrap();
    let full = full_tune_baseline(&Engine::new(&gw, &data), cfg, &p_star, DEFAULT_SEED_SUFFIX, dir.path()).unwrap();
    let broken = full.run.record.candidates.iter().filter(|c| !c.template.starts_with(&p_star)).count();
    check(broken >= 1, "full tuning never changed the main prompt")?;
    Ok(format!(
        "{} suffix candidates frozen, σ* rank {} ≤ σ0 rank {seed_rank}; full tuning broke freeze on {broken}",
        out.run.record.candidates.len(),
        out.best.avg_rank
    ))
}

fn c8_template_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pieces = ["Summarize", " the", " text", ".", "\n", " briefly", ":", " <b>", "INSERT_", "_HERE"];
    let holders = [
        "INSERT_INPUT_HERE",
        "INSERT_EXAMPLES_HERE",
        "INSERT_CONTEXT_HERE",
        "INSERT_OTHER_HERE",
    ];
    let (mut valid, mut violations) = (0, 0);
    for _ in 0..1000 {
        let mut text = String::new();
        let mut count = [0usize; 4];
        for _ in 0..rng.random_range(0..12) {
            if rng.random_bool(0.25) {
                let h = rng.random_range(0..4);
                count[h] += 1;
                // Padded: adjacent tokens would scan as one longer token.
                text.push(' ');
                text.push_str(holders[h]);
                text.push(' ');
            } else {
                text.push_str(pieces[rng.random_range(0..pieces.len())]);
            }
        }
        let expect_ok = count[0] == 1 && count[1] <= 1 && count[2] <= 1 && count[3] == 0;
        match validate(&text, TaskKind::Summarization) {
            Ok(t) => {
                valid += 1;
                if !expect_ok {
                    violations += 1;
                    continue;
                }
                let input: String = (0..rng.random_range(1..20)).map(|_| rng.random_range('0'..='9')).collect();
                let input = format!("#{input}#");
                let ex = t.declares(promptopt_core::templates::Placeholder::Examples).then_some("EX");
                let cx = t.declares(promptopt_core::templates::Placeholder::Context).then_some("CX");
                let out = t.render(&input, ex, cx).unwrap();
                if out.matches(&input).count() != 1 {
                    violations += 1;
                }
                let answer = format!("answer {input}");
                let e = extract_tagged(&format!("x<summary>{answer}</summary>y"), "summary");
                if !e.tagged || e.text != answer {
                    violations += 1;
                }
                if validate(t.text(), TaskKind::Summarization).as_ref() != Ok(&t) {
                    violations += 1;
                }
            }
            Err(v) => {
                if expect_ok || v.is_empty() {
                    violations += 1;
                }
                if count[3] > 0 && !v.iter().any(|x| matches!(x, Violation::Unknown { .. })) {
                    violations += 1;
                }
            }
        }
    }
    check(violations == 0, format!("{violations} violations"))?;
    Ok(format!("1000 templates ({valid} valid), 0 violations"))
}

/// Expands each `...` line into `n - 1` further copies of the stanza that
/// starts at the nearest preceding `opener` line, filling slots per copy.
fn expand(fixture: &str, opener: &str, stanzas: &[Vec<(&str, String)>]) -> String {
    let lines: Vec<&str> = fixture.lines().collect();
    let dots = lines.iter().position(|l| *l == "...").unwrap();
    let open = (0..dots).rev().find(|&i| lines[i] == opener).unwrap();
    let stanza = lines[open..dots].join("\n");
    let mut out: Vec<String> = lines[..open].iter().map(|s| s.to_string()).collect();
    for fills in stanzas {
        let mut s = stanza.clone();
        for (k, v) in fills {
            s = s.replace(&format!("{{{k}}}"), v);
        }
        out.push(s);
    }
    out.extend(lines[dots + 1..].iter().map(|s| s.to_string()));
    out.join("\n") + "\n"
}

fn c9_meta_prompt_fidelity() -> Outcome {
    let critique_fixture = include_str!("fixtures/critique_summarization_claude.txt");
    let optimizer_fixture = include_str!("fixtures/optimizer_summarization_claude.txt");

    let batch: Vec<CritiqueExample> = (0..3)
        .map(|i| CritiqueExample {
            input: format!("Document {i} text."),
            contexts: Vec::new(),
            prediction: format!("Prediction {i}."),
            reference: format!("Reference {i}."),
        })
        .collect();
    let instruction = "Summarize it.\nINSERT_INPUT_HERE";
    let variant = CritiqueVariant::default();
    let got = build_critique_prompt(
        instruction,
        &batch,
        CritiqueOptions {
            kind: TaskKind::Summarization,
            family: ProviderFamily::Claude,
            variant: &variant,
            main_prompt: None,
        },
    )
    .unwrap();
    let stanzas: Vec<Vec<(&str, String)>> = batch
        .iter()
        .map(|b| {
            vec![
                ("document", b.input.clone()),
                ("predicted_summary", b.prediction.clone()),
                ("reference_summary", b.reference.clone()),
            ]
        })
        .collect();
    let want = expand(critique_fixture, "<example>", &stanzas).replace("{instruction}", instruction);
    check(got == want, format!("critique prompt differs:\n{got}\n---\n{want}"))?;

    let (entries, io) = sample_trajectory();
    let got = build_optimizer_prompt(
        &entries,
        &io,
        OptimizerOptions {
            kind: TaskKind::Summarization,
            family: ProviderFamily::Claude,
            flags: AblationFlags::default(),
            main_prompt: None,
        },
    );
    let io_fills: Vec<Vec<(&str, String)>> = io
        .iter()
        .map(|e| vec![("article", e.input.clone()), ("summary", e.output.clone())])
        .collect();
    let rated: Vec<Vec<(&str, String)>> = entries
        .iter()
        .map(|e| {
            vec![
                ("instruction", e.instruction.clone()),
                ("score", format!("{:.1}", e.score * 100.0)),
                ("critique", e.critique.clone()),
            ]
        })
        .collect();
    let step = expand(optimizer_fixture, "<example>", &io_fills);
    let want = expand(&step, "<rated_instruction>", &rated);
    check(got == want, format!("optimizer prompt differs:\n{got}\n---\n{want}"))?;
    check(display_score(0.25) == "25.0", "score display")?;
    Ok("critique and optimizer prompts equal the fixtures outside slots".into())
}

fn c10_diversity() -> Outcome {
    let prompts: Vec<String> = serde_json::from_str(include_str!("fixtures/diversity_prompts.json")).unwrap();
    check(prompts.len() == 10, "fixture must hold 10 prompts")?;
    let embedder = HashedNgramEmbedder::default();
    let got = diversity_report(&prompts, &embedder).unwrap();

    // Independent computation.
    let tok = |s: &str| -> Vec<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect()
    };
    let toks: Vec<Vec<String>> = prompts.iter().map(|p| tok(p)).collect();
    let n = toks.len() as f64;
    let lens: Vec<f64> = toks.iter().map(|t| t.len() as f64).collect();
    let mean = lens.iter().sum::<f64>() / n;
    let std = (lens.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n).sqrt();
    let mut vocab: Vec<&String> = toks.iter().flatten().collect();
    vocab.sort();
    vocab.dedup();
    let ids = |t: &[String]| -> Vec<u8> { t.iter().map(|w| vocab.iter().position(|v| *v == w).unwrap() as u8).collect() };
    let vecs: Vec<Vec<f64>> = prompts.iter().map(|p| embedder.embed(p).unwrap()).collect();
    let cos = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let (mut rl, mut cs, mut pairs) = (0.0, 0.0, 0);
    for i in 0..toks.len() {
        for j in i + 1..toks.len() {
            rl += oracle::rouge_l_f(&ids(&toks[i]), &ids(&toks[j]));
            cs += cos(&vecs[i], &vecs[j]);
            pairs += 1;
        }
    }
    check(pairs == 45, "pair count")?;
    check(got.prompt_count == 10, "prompt count")?;
    check(got.vocab == vocab.len(), format!("vocab {} vs {}", got.vocab, vocab.len()))?;
    close(got.len_mean, mean, DIVERSITY_TOL, "length mean")?;
    close(got.len_std, std, DIVERSITY_TOL, "length std")?;
    close(got.rouge_l_mean, rl / pairs as f64, DIVERSITY_TOL, "rougeL mean")?;
    close(got.cosine_mean, cs / pairs as f64, DIVERSITY_TOL, "cosine mean")?;
    Ok(format!(
        "len {:.3}±{:.3}, vocab {}, rougeL {:.6}, cosine {:.6} (tol 1e-9)",
        got.len_mean, got.len_std, got.vocab, got.rouge_l_mean, got.cosine_mean
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracle equivalence", c1_metric_oracles),
        ("hand-checked metric values", c2_hand_values),
        ("rank invariance", c3_rank_invariance),
        ("scripted convergence", c4_scripted_convergence),
        ("dev cadence", c5_cadence),
        ("OPRO ablation fidelity", c6_opro_fidelity),
        ("AST freeze", c7_ast_freeze),
        ("template properties", c8_template_fuzz),
        ("meta-prompt fidelity", c9_meta_prompt_fidelity),
        ("diversity report", c10_diversity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
