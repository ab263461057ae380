mod common;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use awarerl_core::curriculum::{self, CurriculumConfig};
use awarerl_core::fc::{eq_lists, CallList, ParamSpec, ParamType, Range, ToolSchema, Value};
use awarerl_core::mocks::{template_doc, ExtractionVerifier, PhraseParaphraser, TemplateAwareness};
use awarerl_core::pag::*;
use awarerl_core::parallel::Execution;
use awarerl_core::policy::*;
use awarerl_core::rollout::{self, run_rollout, RolloutConfig, Trajectory};
use awarerl_core::task::TaskMeta;
use common::*;

/// Plays `script` in order: action prompts pop the next entry, awareness
/// prompts get a fixed note.
fn scripted_run(script: &'static [&'static str]) -> Trajectory {
    let next = Arc::new(AtomicUsize::new(0));
    let g = FnGenerator::text("script", move |r| match r.section("mode") {
        Some("@awareness") => "<sum> Summary: s Plan: p Rationale: r </sum>".into(),
        _ => script[next.fetch_add(1, Ordering::SeqCst).min(script.len() - 1)].into(),
    });
    run_rollout(&g, &two_turn_task(), &RolloutConfig::default(), 0).unwrap()
}

const FAIL: &str = r#"<think> t </think> <answer> [append(path="a.txt", content="beta")] </answer>"#;
const CREATE: &str = r#"<think> t </think> <answer> [create_file(path="a.txt", content="alpha")] </answer>"#;
const WRONG: &str = r#"<think> t </think> <answer> [delete_file(path="zz.txt")] </answer>"#;
const MSG: &str = "<think> t </think> <answer> Sorry , cannot . </answer>";

#[test]
fn segment_counts() {
    let t = scripted_run(&[FAIL, CREATE, WRONG, MSG]);
    assert_eq!(t.num_steps(), 4);
    let inst = segment(&[(meta(), t)]).unwrap();
    assert_eq!(inst.len(), 3);
    assert_eq!(inst[1].turn_history().len(), 2);
    assert_eq!(inst[2].query, two_turn_task().queries[1]);

    let single = filebox_task(
        "one",
        &[],
        &[("make a", r#"[create_file(path="a.txt", content="alpha")]"#, &[("a.txt", "alpha")])],
    );
    let inst = segment(&[(meta(), gold_trajectory(&single).unwrap())]).unwrap();
    assert_eq!(inst.len(), 1);
    assert!(inst[0].history.is_empty());
    assert!(inst[0].future.is_empty());

    let only_messages = scripted_run(&[MSG, MSG]);
    assert!(segment(&[(meta(), only_messages)]).unwrap().is_empty());
}

fn instance() -> Instance {
    let t = two_turn_task();
    segment(&[(meta(), gold_trajectory(&t).unwrap())]).unwrap().remove(0)
}

#[test]
fn awareness_generation_contract() {
    let inst = instance();
    let ok = FnGenerator::text("ok", |_| "Summary: s\nPlan: call f\nRationale: r".into());
    let d = gen_awareness(&ok, &inst, 0).unwrap();
    assert_eq!((d.summary.as_str(), d.plan.as_str(), d.rationale.as_str()), ("s", "call f", "r"));
    let missing = FnGenerator::text("missing", |_| "Summary: s\nRationale: r".into());
    assert_eq!(gen_awareness(&missing, &inst, 0), Err(PagError::SectionMissing("plan".into())));
}

#[test]
fn failed_history_is_summarized_and_verifies() {
    let t = scripted_run(&[FAIL, CREATE, CREATE, CREATE]);
    let inst = segment(&[(meta(), t)]).unwrap();
    let after_failure = &inst[1];
    let doc = gen_awareness(&TemplateAwareness, after_failure, 0).unwrap();
    assert!(doc.summary.contains("append failed"), "{}", doc.summary);
    assert!(verify(&ExtractionVerifier::strict(), &doc, &meta(), &after_failure.gold).unwrap());
}

#[test]
fn verification_examples() {
    let gold: CallList = r#"[create_file(path="a.txt", content="hi")]"#.parse().unwrap();
    let v = ExtractionVerifier::default();
    let explicit = AwarenessDoc::new("make it", "call create_file with path=a.txt, content=hi", "r");
    assert!(verify(&v, &explicit, &meta(), &gold).unwrap());
    let partial = AwarenessDoc::new("make it", "call create_file with path=a.txt", "r");
    assert!(!verify(&v, &partial, &meta(), &gold).unwrap());
    let literal = AwarenessDoc::degraded(&gold.render());
    assert!(verify(&v, &literal, &meta(), &gold).unwrap());
}

fn pooled_meta() -> TaskMeta {
    let s = |pool: Option<&[&str]>| {
        let mut p = ParamSpec::new(ParamType::String);
        if let Some(xs) = pool {
            p = p.range(Range::OneOf(xs.iter().map(|x| Value::Str(x.to_string())).collect()));
        }
        p
    };
    TaskMeta::new(
        "files",
        vec![ToolSchema::new("create_file", "")
            .param("path", s(Some(&["a.txt", "b.txt"])).required())
            .param("content", s(None))],
    )
}

#[test]
fn schema_perturb_rewrites_note_and_gold_together() {
    let mut inst = instance();
    inst.meta = pooled_meta();
    let doc = template_doc(&inst.query, "none", &inst.gold);
    let out = augment(&PhraseParaphraser, &doc, AugmentOp::SchemaPerturb, &inst, 0, &AugmentConfig::default()).unwrap();
    assert_eq!(out.instance.gold.render(), r#"[create_file(path="b.txt", content="alpha")]"#);
    assert!(out.doc.plan.contains("\"b.txt\"") && !out.doc.plan.contains("\"a.txt\""));
    assert!(out.instance.query.contains("b.txt"));
    assert!(verify(&ExtractionVerifier::strict(), &out.doc, &inst.meta, &out.instance.gold).unwrap());
    let mut none = inst.clone();
    none.meta = meta();
    none.meta.schemas.iter_mut().for_each(|s| s.params.values_mut().for_each(|p| p.range = None));
    assert!(matches!(
        augment(&PhraseParaphraser, &doc, AugmentOp::SchemaPerturb, &none, 0, &AugmentConfig::default()),
        Err(PagError::NoPerturbableField(_))
    ));
}

#[test]
fn word_mask_rates() {
    let inst = instance();
    let doc = template_doc(&inst.query, "none", &inst.gold);
    let zero = AugmentConfig {
        mask_rate: 0.0,
        ..Default::default()
    };
    assert_eq!(word_mask(&doc, &inst, &zero, 3).unwrap(), doc);

    let full = AugmentConfig {
        mask_rate: 1.0,
        ..Default::default()
    };
    let masked = word_mask(&doc, &inst, &full, 3).unwrap();
    let keep: HashSet<&str> = ["call", "with", "then", "Summary", "Plan", "Rationale", "create_file", "path", "content"]
        .into_iter()
        .collect();
    for tok in tokenize(&masked.raw) {
        let plain_word = tok.chars().all(|c| c.is_alphanumeric() || c == '_');
        assert!(!plain_word || keep.contains(tok) || tok == MASK || tok.parse::<f64>().is_ok(), "{tok} survived");
    }
    assert_eq!(masked.plan, doc.plan);
    assert!(verify(&ExtractionVerifier::strict(), &masked, &meta(), &inst.gold).unwrap());

    let critical = AugmentConfig {
        mask_rate: 1.0,
        mask_critical: true,
    };
    let broken = word_mask(&doc, &inst, &critical, 3).unwrap();
    assert!(!verify(&ExtractionVerifier::strict(), &broken, &meta(), &inst.gold).unwrap());
}

#[test]
fn paraphrase_keeps_the_plan() {
    let inst = instance();
    let doc = template_doc(&inst.query, "none", &inst.gold);
    let out = augment(&PhraseParaphraser, &doc, AugmentOp::Paraphrase, &inst, 0, &AugmentConfig::default()).unwrap();
    assert_eq!(out.doc.plan, doc.plan);
    assert_ne!(out.doc.rationale, doc.rationale);
}

fn doc_records(n: usize) -> (Vec<DocRecord>, Vec<Instance>) {
    let tasks = curriculum::generate(10, 1, "t", &CurriculumConfig::default(), &[]);
    let data: Vec<_> = tasks.iter().map(|t| (t.meta.clone(), gold_trajectory(t).unwrap())).collect();
    let mut seen = HashSet::new();
    let inst: Vec<Instance> = segment(&data)
        .unwrap()
        .into_iter()
        .filter(|i| seen.insert((i.query.clone(), i.turn_history().render(), i.gold.render())))
        .collect();
    let docs = inst
        .iter()
        .take(n)
        .map(|i| DocRecord {
            instance: i.clone(),
            doc: template_doc(&i.query, &i.turn_history().render(), &i.gold),
            provenance: Provenance {
                stage: "augmented".into(),
                seed: 0,
                role: None,
                op: None,
                instance: i.id.clone(),
            },
        })
        .collect();
    (docs, inst[n..].to_vec())
}

#[test]
fn dataset_assembly() {
    let (docs, rest) = doc_records(10);
    let cs = &rest[..5];
    let ds = build_sft(&docs, cs);
    assert_eq!((ds.awareness_records.len(), ds.coldstart_records.len()), (10, 5));
    assert!(ds.coldstart_records.iter().all(|r| !r.target.contains("<sum>")));
    assert_eq!(build_sft(&[], cs).len(), 5);
    let mut doubled = docs.clone();
    doubled.extend(docs.iter().cloned());
    assert_eq!(build_sft(&doubled, cs).len(), 15);
}

fn dataset_vocab(ds: &SftDataset) -> Vocab {
    let texts: Vec<String> = ds
        .records()
        .flat_map(|r| r.sections.iter().map(|(_, b)| b.clone()).chain([r.target.clone()]))
        .collect();
    Vocab::build(texts.iter().map(String::as_str))
}

#[test]
fn sft_loss_examples() {
    let (docs, rest) = doc_records(2);
    let ds = build_sft(&docs[..1], &[]);
    let vocab = dataset_vocab(&ds);
    let n = vocab.encode(&ds.awareness_records[0].target).unwrap().len() as f64;
    let v = vocab.len() as f64;
    let (loss, _) = sft_loss(&PolicyParams::zeros(vocab.clone()), &ds).unwrap();
    assert!((loss - n * v.ln()).abs() < 1e-9);

    let (loss, g) = sft_loss(&PolicyParams::zeros(vocab), &SftDataset::default()).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.data.iter().all(|x| *x == 0.0));

    let ds = build_sft(&docs, &rest[..1]);
    let vocab = dataset_vocab(&ds);
    let p = PolicyParams::random(vocab.clone(), vocab.len(), 0.1, 2);
    let (_, g) = sft_loss(&p, &ds).unwrap();
    let err = max_fd_error(&p, &g.data, &some_coords(g.data.len(), 2000, 1), 1e-5, |q| sft_loss(q, &ds).unwrap().0);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn warmup_descends() {
    let (docs, rest) = doc_records(4);
    let ds = build_sft(&docs, &rest[..2]);
    let vocab = dataset_vocab(&ds);
    let mut p = PolicyParams::zeros(vocab);
    let losses = warmup(&mut p, &ds, &WarmupConfig { learning_rate: 0.01, steps: 5 }, Execution::Parallel).unwrap();
    assert!(losses.iter().all(|l| *l >= 0.0));
    assert!(losses.windows(2).all(|w| w[1] < w[0]));
}

fn pipeline() -> (Vec<awarerl_core::task::Task>, PagOutput) {
    let tasks = curriculum::generate(20, 4, "t", &CurriculumConfig::default(), &[]);
    let out = run_pipeline(
        &tasks,
        &TemplateAwareness,
        &ExtractionVerifier::strict(),
        &PhraseParaphraser,
        &PagConfig::default(),
        Execution::Parallel,
    )
    .unwrap();
    (tasks, out)
}

#[test]
fn pipeline_filter_is_sound_and_monotone() {
    let (_, out) = pipeline();
    let ver = ExtractionVerifier::strict();
    assert!(!out.verified.is_empty());
    for r in &out.verified {
        assert!(verify(&ver, &r.doc, &r.instance.meta, &r.instance.gold).unwrap());
    }
    for r in out.augmented.iter().filter(|r| r.provenance.op == Some(AugmentOp::SchemaPerturb)) {
        assert!(verify(&ver, &r.doc, &r.instance.meta, &r.instance.gold).unwrap());
    }
    let sources: HashSet<&str> = out.augmented.iter().map(|r| r.provenance.instance.as_str()).collect();
    assert!(sources.len() <= out.verified.len());
    assert!(out.verified.len() <= out.raw.len());
    assert!(out.raw.len() + out.coldstart.len() <= out.instances.len());
    let cs: HashSet<&str> = out.coldstart.iter().map(|i| i.id.as_str()).collect();
    assert!(out.raw.iter().all(|r| !cs.contains(r.instance.id.as_str())));
}

#[test]
fn pipeline_is_schedule_independent() {
    let tasks = curriculum::generate(8, 4, "t", &CurriculumConfig::default(), &[]);
    let run = |exec| {
        run_pipeline(&tasks, &TemplateAwareness, &ExtractionVerifier::strict(), &PhraseParaphraser, &PagConfig::default(), exec)
            .unwrap()
    };
    assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
}

#[test]
fn warm_policy_copies_the_plan() {
    let (tasks, out) = pipeline();
    let mut p = PolicyParams::zeros(curriculum::vocab(&tasks));
    warmup(&mut p, &out.dataset, &WarmupConfig::default(), Execution::Parallel).unwrap();
    let policy = ToyPolicy::new(Arc::new(p));
    let task = &tasks[0];
    let gold = &task.gold[0];
    let doc = template_doc(&task.queries[0], "none", gold);
    let a = rollout::act(&policy, &task.meta, &task.queries[0], &doc, 48, 0.0, 0).unwrap();
    assert!(eq_lists(a.calls.as_ref().unwrap(), gold, &task.meta.schemas), "{}", a.text);
}
