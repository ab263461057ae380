//! The sub-commands. Every command writes into a directory named after a
//! key of its inputs, so re-running an identical configuration finds its
//! outputs in place and rewrites nothing.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use awarerl_core::curriculum;
use awarerl_core::grpo::{self, Checkpoint, GrpoError, IterationReport};
use awarerl_core::io::{read_jsonl, write_if_changed, write_jsonl};
use awarerl_core::pag::{
    build_sft, gold_trajectory, segment, split_coldstart, stage_augment, stage_generate, stage_verify, warmup,
    DocRecord, Instance, PagError, SftDataset, SftRecord,
};
use awarerl_core::policy::{Generator, PolicyParams, Role, ToyPolicy};
use awarerl_core::rollout::{evaluate, rollout_grid, RolloutConfig};
use awarerl_core::synth::{synth_dataset, SynthError};
use awarerl_core::task::write_bundle;

use crate::config::{content_key, file_key, Binding, RunConfig};
use crate::{CliError, Result};

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(CliError::run)?;
    bytes.push(b'\n');
    Ok(write_if_changed(path, &bytes)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn bindings_of<'a>(cfg: &'a RunConfig, roles: &[Role]) -> Vec<(Role, Option<&'a Binding>)> {
    roles.iter().map(|r| (*r, cfg.generators.get(r.as_str()))).collect()
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Serialize, Deserialize)]
struct SynthSummary {
    attempted: usize,
    retained: usize,
    exhausted: usize,
    dropped: usize,
    exhaustion_rate: f64,
}

pub fn synth_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let exemplar_key = match &cfg.synth.exemplars {
        Some(p) => file_key(p)?,
        None => "builtin".into(),
    };
    let key = content_key(&(
        cfg.seed,
        &cfg.synth,
        exemplar_key,
        bindings_of(cfg, &[Role::SynthGen, Role::Judge]),
    ));
    Ok(cfg.out_dir.join(format!("synth-{key}")))
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let bindings = cfg.bindings(&[Role::SynthGen, Role::Judge])?;
    let exemplars = cfg.exemplars()?;
    let dir = synth_dir(cfg)?;
    let report_path = dir.join("report.json");
    let summary = if report_path.is_file() {
        println!("up to date: {}", dir.display());
        read_json::<SynthSummary>(&report_path)?
    } else {
        let report = synth_dataset(
            &bindings,
            &exemplars,
            &cfg.synth.params,
            cfg.synth.n_tasks,
            cfg.seed,
            "synth-",
            cfg.execution,
        )
        .map_err(|e| match e {
            SynthError::Config(m) => CliError::Config(m),
            other => CliError::run(other),
        })?;
        write_bundle(&dir.join("tasks.jsonl"), &report.bundle())?;
        write_jsonl(&dir.join("provenance.jsonl"), &report.provenance)?;
        let summary = SynthSummary {
            attempted: report.attempted,
            retained: report.tasks.len(),
            exhausted: report.exhausted,
            dropped: report.dropped,
            exhaustion_rate: report.exhaustion_rate(),
        };
        write_json(&report_path, &summary)?;
        summary
    };
    println!(
        "synth: {} of {} tasks retained ({} exhausted, {} dropped) -> {}",
        summary.retained,
        summary.attempted,
        summary.exhausted,
        summary.dropped,
        dir.join("tasks.jsonl").display()
    );
    if summary.exhaustion_rate > cfg.synth.max_exhaustion_rate {
        return Err(CliError::Guard(format!(
            "exhaustion rate {:.3} exceeds the cap {:.3}",
            summary.exhaustion_rate, cfg.synth.max_exhaustion_rate
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------- pag

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PagStage {
    Segment,
    Generate,
    Verify,
    Augment,
    Assemble,
    Warmup,
}

impl PagStage {
    pub const ALL: [PagStage; 6] = [
        PagStage::Segment,
        PagStage::Generate,
        PagStage::Verify,
        PagStage::Augment,
        PagStage::Assemble,
        PagStage::Warmup,
    ];

    fn name(self) -> &'static str {
        match self {
            PagStage::Segment => "segment",
            PagStage::Generate => "generate",
            PagStage::Verify => "verify",
            PagStage::Augment => "augment",
            PagStage::Assemble => "assemble",
            PagStage::Warmup => "warmup",
        }
    }

    fn role(self) -> Option<Role> {
        match self {
            PagStage::Generate => Some(Role::AwarenessGen),
            PagStage::Verify => Some(Role::Verifier),
            PagStage::Augment => Some(Role::Augmenter),
            _ => None,
        }
    }
}

pub const STAGE_FILES: [&str; 5] = ["instances.jsonl", "raw.jsonl", "verified.jsonl", "augmented.jsonl", "sft.jsonl"];
pub const WARM_FILE: &str = "warm.json";

#[derive(Debug, Serialize)]
struct Note<'a> {
    stage: &'a str,
    instance: &'a str,
    reason: &'a str,
}

pub fn pag_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let (_, train_key) = cfg.train_tasks()?;
    let held_key = cfg.heldout_tasks().ok().map(|(_, k)| k);
    let key = content_key(&(
        train_key,
        held_key,
        &cfg.pag,
        &cfg.warmup,
        bindings_of(cfg, &[Role::AwarenessGen, Role::Verifier, Role::Augmenter]),
    ));
    Ok(cfg.out_dir.join(format!("pag-{key}")))
}

fn stage_input<T: for<'de> Deserialize<'de>>(dir: &Path, file: &str, producer: &str) -> Result<Vec<T>> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "{} missing; run `awarerl pag --stage {producer}` first",
            path.display()
        )));
    }
    read_jsonl(&path).map_err(|e| CliError::Config(e.to_string()))
}

fn pag_error(e: PagError) -> CliError {
    CliError::run(e)
}

fn write_notes(dir: &Path, stage: PagStage, notes: &[(String, String)]) -> Result<()> {
    let records: Vec<Note> = notes
        .iter()
        .map(|(i, r)| Note {
            stage: stage.name(),
            instance: i,
            reason: r,
        })
        .collect();
    Ok(write_jsonl(&dir.join(format!("{}.notes.jsonl", stage.name())), &records)?)
}

pub fn pag(cfg: &RunConfig, only: Option<PagStage>) -> Result<()> {
    let stages: Vec<PagStage> = match only {
        Some(s) => vec![s],
        None => PagStage::ALL.to_vec(),
    };
    let roles: Vec<Role> = stages.iter().filter_map(|s| s.role()).collect();
    let bindings = cfg.bindings(&roles)?;
    let dir = pag_dir(cfg)?;
    let exec = cfg.execution;
    for stage in stages {
        match stage {
            PagStage::Segment => {
                let (tasks, _) = cfg.train_tasks()?;
                if tasks.is_empty() {
                    return Err(CliError::Guard("the training task bundle is empty".into()));
                }
                let mut data = Vec::with_capacity(tasks.len());
                for t in &tasks {
                    data.push((t.meta.clone(), gold_trajectory(t).map_err(pag_error)?));
                }
                let instances = segment(&data).map_err(pag_error)?;
                if instances.is_empty() {
                    return Err(CliError::Guard("no function-call step to segment in the task bundle".into()));
                }
                write_jsonl(&dir.join(STAGE_FILES[0]), &instances)?;
                println!("segment: {} instances from {} tasks", instances.len(), tasks.len());
            }
            PagStage::Generate => {
                let instances: Vec<Instance> = stage_input(&dir, STAGE_FILES[0], "segment")?;
                let (aw, _) = split_coldstart(&instances, cfg.pag.coldstart_fraction, cfg.pag.seed);
                let (raw, notes) = stage_generate(bindings.get(Role::AwarenessGen).as_ref(), &aw, cfg.pag.seed, exec)
                    .map_err(pag_error)?;
                write_jsonl(&dir.join(STAGE_FILES[1]), &raw)?;
                write_notes(&dir, stage, &notes)?;
                println!("generate: {} notes, {} dropped", raw.len(), notes.len());
            }
            PagStage::Verify => {
                let raw: Vec<DocRecord> = stage_input(&dir, STAGE_FILES[1], "generate")?;
                let (kept, notes) = stage_verify(bindings.get(Role::Verifier).as_ref(), &raw, exec).map_err(pag_error)?;
                write_jsonl(&dir.join(STAGE_FILES[2]), &kept)?;
                write_notes(&dir, stage, &notes)?;
                println!("verify: {} of {} notes kept", kept.len(), raw.len());
                if kept.is_empty() {
                    return Err(CliError::Guard("no awareness note survived verification".into()));
                }
            }
            PagStage::Augment => {
                let verified: Vec<DocRecord> = stage_input(&dir, STAGE_FILES[2], "verify")?;
                let (aug, notes) = stage_augment(bindings.get(Role::Augmenter).as_ref(), &verified, &cfg.pag, exec)
                    .map_err(pag_error)?;
                write_jsonl(&dir.join(STAGE_FILES[3]), &aug)?;
                write_notes(&dir, stage, &notes)?;
                println!("augment: {} notes, {} skipped", aug.len(), notes.len());
            }
            PagStage::Assemble => {
                let instances: Vec<Instance> = stage_input(&dir, STAGE_FILES[0], "segment")?;
                let aug: Vec<DocRecord> = stage_input(&dir, STAGE_FILES[3], "augment")?;
                let (_, coldstart) = split_coldstart(&instances, cfg.pag.coldstart_fraction, cfg.pag.seed);
                let ds = build_sft(&aug, &coldstart);
                let records: Vec<&SftRecord> = ds.records().collect();
                write_jsonl(&dir.join(STAGE_FILES[4]), records)?;
                println!(
                    "assemble: {} awareness + {} cold-start records",
                    ds.awareness_records.len(),
                    ds.coldstart_records.len()
                );
            }
            PagStage::Warmup => {
                let records: Vec<SftRecord> = stage_input(&dir, STAGE_FILES[4], "assemble")?;
                let ds = SftDataset::from_records(records);
                let mut params = PolicyParams::zeros(curriculum::vocab(&cfg.all_tasks()?));
                let losses = warmup(&mut params, &ds, &cfg.warmup, exec).map_err(CliError::run)?;
                write_json(&dir.join(WARM_FILE), &params)?;
                println!(
                    "warmup: mean loss {:.3} -> {:.3} over {} steps -> {}",
                    losses[0],
                    losses[losses.len() - 1],
                    cfg.warmup.steps,
                    dir.join(WARM_FILE).display()
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainFlags {
    pub no_warm_start: bool,
    pub no_awareness: bool,
}

pub const METRICS_HEADER: [&str; 6] = ["iteration", "mean_return", "success_rate", "kl", "clip_frac", "mean_ratio"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub kl: f64,
    pub clip_frac: f64,
    pub mean_ratio: f64,
}

impl From<&IterationReport> for MetricsRow {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration,
            mean_return: r.mean_return,
            success_rate: r.success_rate,
            kl: r.kl,
            clip_frac: r.clip_frac,
            mean_ratio: r.mean_ratio,
        }
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(CliError::run)?;
    rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(CliError::run)
}

fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER).map_err(CliError::run)?;
    for r in rows {
        w.serialize(r).map_err(CliError::run)?;
    }
    let bytes = w.into_inner().map_err(CliError::run)?;
    Ok(write_if_changed(path, &bytes)?)
}

fn append_metrics(path: &Path, row: &MetricsRow) -> Result<()> {
    let file = OpenOptions::new().append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.serialize(row).map_err(CliError::run)?;
    w.flush()?;
    Ok(())
}

fn rollout_config(cfg: &RunConfig, flags: TrainFlags) -> RolloutConfig {
    RolloutConfig {
        awareness: cfg.rollout.awareness && !flags.no_awareness,
        ..cfg.rollout
    }
}

/// Warm-start parameters and a key identifying them.
fn initial_params(cfg: &RunConfig, flags: TrainFlags) -> Result<(PolicyParams, String)> {
    if flags.no_warm_start {
        return Ok((PolicyParams::zeros(curriculum::vocab(&cfg.all_tasks()?)), "cold".into()));
    }
    let path = pag_dir(cfg)?.join(WARM_FILE);
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "warm-start parameters {} missing; run `awarerl pag` first or pass --no-warm-start",
            path.display()
        )));
    }
    Ok((read_json(&path)?, file_key(&path)?))
}

pub fn train_dir(cfg: &RunConfig, flags: TrainFlags, warm_key: &str) -> Result<PathBuf> {
    let (_, tasks_key) = cfg.train_tasks()?;
    let mut hyper = cfg.grpo;
    hyper.iterations = 0;
    let key = content_key(&(tasks_key, warm_key, hyper, rollout_config(cfg, flags), cfg.seed));
    Ok(cfg.out_dir.join(format!("train-{key}")))
}

pub fn train(cfg: &RunConfig, flags: TrainFlags, resume: bool) -> Result<()> {
    cfg.require_toy_policy()?;
    let (tasks, _) = cfg.train_tasks()?;
    if tasks.is_empty() {
        return Err(CliError::Guard("the training task bundle is empty".into()));
    }
    let (warm, warm_key) = initial_params(cfg, flags)?;
    let dir = train_dir(cfg, flags, &warm_key)?;
    let ck_path = dir.join("checkpoint.json");
    let metrics_path = dir.join("metrics.csv");
    let rc = rollout_config(cfg, flags);

    let mut state = if ck_path.is_file() {
        let ck = Checkpoint::load(&ck_path)?;
        if ck.iteration >= cfg.grpo.iterations {
            println!("up to date: {} (iteration {})", dir.display(), ck.iteration);
            return Ok(());
        }
        if !resume {
            return Err(CliError::Config(format!(
                "{} holds a partial run at iteration {}; pass --resume to continue it",
                dir.display(),
                ck.iteration
            )));
        }
        let rows: Vec<MetricsRow> = if metrics_path.is_file() {
            read_metrics(&metrics_path)?
                .into_iter()
                .filter(|r| r.iteration <= ck.iteration)
                .collect()
        } else {
            Vec::new()
        };
        write_metrics(&metrics_path, &rows)?;
        println!("resuming {} from iteration {}", dir.display(), ck.iteration);
        ck
    } else {
        write_metrics(&metrics_path, &[])?;
        Checkpoint {
            iteration: 0,
            seed: cfg.seed,
            params: warm.clone(),
            reference: warm,
        }
    };
    write_json(
        &dir.join("run.json"),
        &serde_json::json!({"config": cfg, "no_warm_start": flags.no_warm_start, "no_awareness": flags.no_awareness}),
    )?;

    let report = grpo::train(&mut state, &tasks, &cfg.grpo, &rc, cfg.execution, |ck, rep| {
        append_metrics(&metrics_path, &MetricsRow::from(rep))?;
        ck.save(&ck_path)?;
        if rep.iteration % 10 == 0 || rep.iteration == cfg.grpo.iterations {
            println!(
                "iteration {:4}  return {:7.3}  success {:.3}  kl {:.5}  steps {:.2}",
                rep.iteration, rep.mean_return, rep.success_rate, rep.kl, rep.mean_steps
            );
        }
        Ok::<(), CliError>(())
    })?;

    let greedy = RolloutConfig { temperature: 0.0, ..rc };
    let policy = ToyPolicy::new(Arc::new(state.params.clone()));
    let grid = rollout_grid(&policy, &tasks, 1, &greedy, cfg.seed, cfg.execution).map_err(CliError::run)?;
    let records: Vec<_> = grid.iter().flat_map(|g| g[0].to_records(0)).collect();
    write_jsonl(&dir.join("trajectories.jsonl"), &records)?;
    println!(
        "train: {} iterations -> {} ({} metric rows)",
        report.iterations.len(),
        ck_path.display(),
        state.iteration
    );
    Ok(())
}

impl From<GrpoError> for CliError {
    fn from(e: GrpoError) -> Self {
        CliError::run(e)
    }
}

// ---------------------------------------------------------------- eval

/// A training checkpoint or bare parameters.
fn load_params(path: &Path) -> Result<PolicyParams> {
    if !path.is_file() {
        return Err(CliError::Config(format!("checkpoint {} missing", path.display())));
    }
    let value: Value = read_json(path)?;
    let inner = if value.get("params").is_some() { value["params"].clone() } else { value };
    serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn eval(cfg: &RunConfig, flags: TrainFlags, checkpoint: Option<&Path>, trials: Option<usize>) -> Result<()> {
    let (held, held_key) = cfg.heldout_tasks()?;
    let trials = trials.unwrap_or(cfg.eval.trials).max(1);
    let (policy, policy_key): (Arc<dyn Generator>, String) = match cfg.binding(Role::Policy)? {
        Binding::Toy => {
            let path = match checkpoint {
                Some(p) => p.to_path_buf(),
                None => {
                    let (_, warm_key) = initial_params(cfg, flags)?;
                    train_dir(cfg, flags, &warm_key)?.join("checkpoint.json")
                }
            };
            let params = load_params(&path)?;
            (Arc::new(ToyPolicy::new(Arc::new(params))), file_key(&path)?)
        }
        other => (cfg.generator(Role::Policy)?, content_key(other)),
    };
    let rc = RolloutConfig {
        temperature: 0.0,
        ..rollout_config(cfg, flags)
    };
    let report = evaluate(policy.as_ref(), &held, &rc, trials, cfg.seed, cfg.execution).map_err(CliError::run)?;
    let key = content_key(&(policy_key, held_key, trials, rc, cfg.seed));
    let path = cfg.out_dir.join(format!("eval-{key}")).join("report.json");
    write_json(&path, &report)?;
    for t in &report.trials {
        println!("trial {}  success {:.3}  mean steps {:.2}", t.trial, t.success, t.mean_steps);
    }
    println!(
        "eval: success {:.3}  mean steps {:.2}  max steps {}  over {} tasks x {} trials -> {}",
        report.success,
        report.mean_steps,
        report.max_steps,
        held.len(),
        trials,
        path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------- inspect

fn show(v: &Value, width: usize) -> String {
    let s = v.to_string();
    if s.chars().count() > width {
        format!("{}…", s.chars().take(width).collect::<String>())
    } else {
        s
    }
}

fn inspect_jsonl(path: &Path, limit: usize) -> Result<()> {
    let rows: Vec<Value> = read_jsonl(path).map_err(CliError::run)?;
    let first = rows.first().cloned().unwrap_or(Value::Null);
    let has = |k: &str| first.get(k).is_some();
    if has("record") {
        let trailers: Vec<&Value> = rows.iter().filter(|r| r["record"] == "trailer").collect();
        let mean = trailers.iter().filter_map(|t| t["total_return"].as_f64()).sum::<f64>() / trailers.len().max(1) as f64;
        println!("trajectory log: {} trajectories, {} steps, mean return {mean:.3}", trailers.len(), rows.len() - trailers.len());
        for r in rows.iter().filter(|r| r["record"] == "step").take(limit) {
            let s = &r["step"];
            println!(
                "  {} t{} s{}  awareness: {}\n      action: {}",
                r["task_id"].as_str().unwrap_or(""),
                s["turn_index"],
                s["step_index"],
                show(&s["awareness"]["raw"], 100),
                show(&s["action_text"], 100)
            );
        }
    } else if has("queries") && has("gold") {
        println!("task bundle: {} tasks", rows.len());
        for t in rows.iter().take(limit) {
            println!("  {}: {}", t["id"].as_str().unwrap_or(""), show(&t["queries"], 120));
        }
    } else if has("doc") {
        println!("awareness notes: {} records", rows.len());
        for r in rows.iter().take(limit) {
            println!("  {} [{}]: {}", r["instance"]["id"].as_str().unwrap_or(""), r["provenance"]["stage"], show(&r["doc"]["raw"], 120));
        }
    } else if has("target") {
        println!("warm-up records: {}", rows.len());
        for r in rows.iter().take(limit) {
            println!("  [{}] {}", r["kind"], show(&r["target"], 120));
        }
    } else if has("tally") {
        println!("synthesis provenance: {} turns", rows.len());
        for r in rows.iter().take(limit) {
            println!("  {} turn {}: {} -> {}", r["task_id"].as_str().unwrap_or(""), r["turn"], show(&r["query"], 60), r["verdict"]);
        }
    } else if has("gold") && has("query") {
        println!("instances: {}", rows.len());
        for r in rows.iter().take(limit) {
            println!("  {}: {} -> {}", r["id"].as_str().unwrap_or(""), show(&r["query"], 60), show(&r["gold"], 60));
        }
    } else {
        println!("{}: {} records", path.display(), rows.len());
        for r in rows.iter().take(limit) {
            println!("  {}", show(r, 120));
        }
    }
    Ok(())
}

fn inspect_json(path: &Path) -> Result<()> {
    let v: Value = read_json(path)?;
    let params_summary = |p: &Value| {
        format!(
            "vocab {} tokens, {} weights",
            p["vocab"]["tokens"].as_array().map_or(0, Vec::len),
            p["weights"].as_array().map_or(0, Vec::len)
        )
    };
    if v.get("params").is_some() && v.get("iteration").is_some() {
        println!("checkpoint: iteration {}, seed {}, {}", v["iteration"], v["seed"], params_summary(&v["params"]));
    } else if v.get("weights").is_some() {
        println!("policy parameters: {}", params_summary(&v));
    } else if v.get("success").is_some() && v.get("trials").is_some() {
        println!("evaluation: success {}, mean steps {}, max steps {}", v["success"], v["mean_steps"], v["max_steps"]);
        for t in v["trials"].as_array().into_iter().flatten() {
            println!("  trial {}: success {}, mean steps {}", t["trial"], t["success"], t["mean_steps"]);
        }
    } else {
        println!("{}", serde_json::to_string_pretty(&v).map_err(CliError::run)?);
    }
    Ok(())
}

fn inspect_csv(path: &Path, limit: usize) -> Result<()> {
    let rows = read_metrics(path)?;
    println!("metrics: {} rows ({})", rows.len(), METRICS_HEADER.join(","));
    for r in rows.iter().skip(rows.len().saturating_sub(limit)) {
        println!(
            "  {:4}  return {:7.3}  success {:.3}  kl {:.5}  clip {:.3}  ratio {:.4}",
            r.iteration, r.mean_return, r.success_rate, r.kl, r.clip_frac, r.mean_ratio
        );
    }
    Ok(())
}

pub fn inspect(path: &Path, limit: usize) -> Result<()> {
    if !path.is_file() {
        return Err(CliError::Config(format!("no such file {}", path.display())));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => inspect_jsonl(path, limit),
        Some("json") => inspect_json(path),
        Some("csv") => inspect_csv(path, limit),
        _ => Err(CliError::Config(format!("unknown artifact type {}", path.display()))),
    }
}
