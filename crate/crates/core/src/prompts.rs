//! Prompt layouts shared by rollout, PAG and synthesis.
//!
//! A prompt is an ordered list of `(section tag, text)` pairs. The first
//! section is always `mode`, whose text is one of the mode markers below, so
//! the toy policy can tell the prompt kinds apart.

use crate::pag::AwarenessDoc;
use crate::rollout::DialoguePrefix;
use crate::task::TaskMeta;

pub const MODE_AWARENESS: &str = "@awareness";
pub const MODE_ACTION: &str = "@action";
pub const MODE_VERIFY: &str = "@verify";

pub type Sections = Vec<(String, String)>;

fn sec(tag: &str, text: impl Into<String>) -> (String, String) {
    (tag.to_string(), text.into())
}

pub const AWARENESS_INSTRUCTION: &str = "Write a progress note for the current request \
under the headers Summary: Plan: Rationale: in that order. The summary restates the request \
and lists the calls made so far with their outcome. The plan names the next call with every \
argument value.";

pub const ACTION_INSTRUCTION: &str = "Reply with <think> reasoning </think> followed by \
<answer> ... </answer>. The answer is either a call list such as [f(x=1)] or a message \
for the user.";

pub const VERIFY_INSTRUCTION: &str = "Recover the function calls described by the note. \
Output only a call list such as [f(x=1)].";

pub const PAG_INSTRUCTION: &str = "You are given a tool-use dialogue split at one assistant \
call. Write a progress awareness document for that point.\n\
1. Summarize the earlier dialogue, naming every function call and whether it succeeded or failed.\n\
2. Restate the latest user request.\n\
3. Under Plan, give the next function call with all argument values written out.\n\
4. Keep the rationale to a single short sentence.\n\
5. Never mention the later dialogue or reveal that you have seen it.\n\
6. Output only the sections Summary:, Plan:, Rationale: in this order.";

/// Awareness emission: meta, the current query, and this turn's history.
pub fn awareness(meta: &TaskMeta, query: &str, turn_history: &DialoguePrefix) -> Sections {
    vec![
        sec("mode", MODE_AWARENESS),
        sec("instruction", AWARENESS_INSTRUCTION),
        sec("meta", meta.render()),
        sec("history", turn_history.render()),
        sec("query", query),
    ]
}

/// Awareness-guided action: no raw history.
pub fn action(meta: &TaskMeta, query: &str, doc: &AwarenessDoc) -> Sections {
    vec![
        sec("mode", MODE_ACTION),
        sec("instruction", ACTION_INSTRUCTION),
        sec("meta", meta.render()),
        sec("query", query),
        sec("awareness", doc.raw.clone()),
    ]
}

/// Action conditioned on the full raw dialogue prefix.
pub fn raw_action(meta: &TaskMeta, history: &DialoguePrefix, query: &str) -> Sections {
    vec![
        sec("mode", MODE_ACTION),
        sec("instruction", ACTION_INSTRUCTION),
        sec("meta", meta.render()),
        sec("history", history.render()),
        sec("query", query),
    ]
}

/// The verifier sees only the note and the tool metadata.
pub fn verify(meta: &TaskMeta, doc: &AwarenessDoc) -> Sections {
    vec![
        sec("mode", MODE_VERIFY),
        sec("instruction", VERIFY_INSTRUCTION),
        sec("meta", meta.render()),
        sec("awareness", doc.raw.clone()),
    ]
}

/// Awareness generation over a segmented instance.
pub fn pag_awareness(
    meta: &TaskMeta,
    history: &DialoguePrefix,
    turn_history: &DialoguePrefix,
    query: &str,
    gold: &str,
    future: &DialoguePrefix,
) -> Sections {
    vec![
        sec("mode", "@pag"),
        sec("instruction", PAG_INSTRUCTION),
        sec("meta", meta.render()),
        sec("history", history.render()),
        sec("turn_history", turn_history.render()),
        sec("query", query),
        sec("gold", gold),
        sec("future", future.render()),
    ]
}

pub const PARAPHRASE_INSTRUCTION: &str = "Paraphrase the note. Keep the headers Summary: \
Plan: Rationale: and keep every function name and argument value unchanged.";

pub fn paraphrase(doc: &AwarenessDoc) -> Sections {
    vec![
        sec("mode", "@paraphrase"),
        sec("instruction", PARAPHRASE_INSTRUCTION),
        sec("awareness", doc.raw.clone()),
    ]
}

pub const INITIAL_CONFIG_INSTRUCTION: &str = "Study the example initial configurations and \
write a new, distinct initial_config for the same domain. Output a single JSON object with \
the keys domain, initial_state and seed. You MUST NOT include any extra text.";

pub fn initial_config(domain: &str, exemplars: &[String]) -> Sections {
    vec![
        sec("mode", "@initial_config"),
        sec("instruction", INITIAL_CONFIG_INSTRUCTION),
        sec("domain", domain),
        sec("exemplars", exemplars.join("\n")),
    ]
}

pub const QUERY_INSTRUCTION: &str = "Write the next user request for this environment. It \
must be a logical continuation of the earlier requests, must involve a change to the \
environment state, and should cost 2-4 function calls at most.";

pub fn query(meta: &TaskMeta, state: &str, prior: &[String]) -> Sections {
    vec![
        sec("mode", "@query"),
        sec("instruction", QUERY_INSTRUCTION),
        sec("meta", meta.render()),
        sec("state", state),
        sec("prior", prior.join("\n")),
    ]
}

pub const SYNTH_ACTION_INSTRUCTION: &str = "Write the function calls that fulfil the request. \
Output only a call list such as [f(x=1)].";

pub fn synth_action(meta: &TaskMeta, state: &str, query: &str, sample: usize) -> Sections {
    vec![
        sec("mode", "@synth_action"),
        sec("instruction", SYNTH_ACTION_INSTRUCTION),
        sec("meta", meta.render()),
        sec("state", state),
        sec("query", query),
        sec("sample", sample.to_string()),
    ]
}

pub const JUDGE_INSTRUCTION: &str = "The calls below did not change the environment. Answer \
valid if they are a sensible way to serve the request, otherwise invalid.";

pub fn judge(meta: &TaskMeta, query: &str, calls: &str, observation: &str, voter: usize) -> Sections {
    vec![
        sec("mode", "@judge"),
        sec("instruction", JUDGE_INSTRUCTION),
        sec("meta", meta.render()),
        sec("query", query),
        sec("calls", calls),
        sec("observation", observation),
        sec("voter", voter.to_string()),
    ]
}
