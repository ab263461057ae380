//! The run configuration file and the generator bindings it declares.
//!
//! Relative paths resolve against the directory of the config file. Remote
//! endpoints and keys may come from the environment:
//! `AWARERL_ENDPOINT_<ROLE>` overrides `AWARERL_ENDPOINT`, and
//! `AWARERL_API_KEY` supplies the bearer token.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use awarerl_core::curriculum::{self, CurriculumConfig};
use awarerl_core::grpo::GrpoHyper;
use awarerl_core::mocks::{ConstantJudge, ExtractionVerifier, FileboxSynth, PhraseParaphraser, TemplateAwareness};
use awarerl_core::pag::{PagConfig, WarmupConfig};
use awarerl_core::parallel::Execution;
use awarerl_core::policy::{Bindings, Generator, Role, ScriptedMock};
use awarerl_core::rollout::RolloutConfig;
use awarerl_core::synth::SynthConfig;
use awarerl_core::task::{read_bundle, Task};
use awarerl_core::toolenv::InitialConfig;

use crate::remote::RemoteGenerator;
use crate::{CliError, Result};

pub const ENDPOINT_VAR: &str = "AWARERL_ENDPOINT";
pub const API_KEY_VAR: &str = "AWARERL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Binding {
    /// The trainable toy policy; only valid for the `policy` role.
    Toy,
    /// The built-in rule-based mock for the role. `variant = "strict"`
    /// selects the strict verifier and `variant = "reject"` a judge that
    /// votes invalid.
    Mock {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variant: Option<String>,
    },
    /// Completions looked up by prompt hash in a JSONL table.
    Scripted { table: PathBuf },
    /// A chat-completion endpoint.
    Remote {
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        endpoint: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSize {
    pub train: usize,
    pub heldout: usize,
    #[serde(default)]
    pub config: CurriculumConfig,
}

/// Where tasks come from: bundle files, or the built-in filebox curriculum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSource {
    pub train: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub curriculum: Option<CurriculumSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub n_tasks: usize,
    /// Largest tolerated share of attempts that exhaust the config retries.
    pub max_exhaustion_rate: f64,
    /// JSONL of initial configs shown as exemplars; built-in filebox
    /// exemplars when absent.
    pub exemplars: Option<PathBuf>,
    #[serde(flatten)]
    pub params: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_tasks: 50,
            max_exhaustion_rate: 1.0,
            exemplars: None,
            params: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { trials: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub tasks: TaskSource,
    /// Role name to binding.
    #[serde(default)]
    pub generators: BTreeMap<String, Binding>,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub grpo: GrpoHyper,
    #[serde(default)]
    pub pag: PagConfig,
    #[serde(default)]
    pub warmup: WarmupConfig,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn role_from_str(s: &str) -> Option<Role> {
    Role::ALL.into_iter().find(|r| r.as_str() == s)
}

/// Hex SHA-256 prefix of the JSON encoding of `value`.
pub fn content_key(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("config values serialize");
    hex::encode(&Sha256::digest(&bytes)[..6])
}

pub fn file_key(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..6]))
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        for p in [&mut self.tasks.train, &mut self.tasks.heldout, &mut self.synth.exemplars]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for b in self.generators.values_mut() {
            if let Binding::Scripted { table } = b {
                fix(table);
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        for name in self.generators.keys() {
            if role_from_str(name).is_none() {
                let known: Vec<&str> = Role::ALL.iter().map(|r| r.as_str()).collect();
                return bad(format!("unknown generator role `{name}` (expected one of {})", known.join(", ")));
            }
        }
        let mut paths: Vec<(&str, &Path)> = Vec::new();
        if let Some(p) = &self.tasks.train {
            paths.push(("tasks.train", p));
        }
        if let Some(p) = &self.tasks.heldout {
            paths.push(("tasks.heldout", p));
        }
        if let Some(p) = &self.synth.exemplars {
            paths.push(("synth.exemplars", p));
        }
        for (role, b) in &self.generators {
            if let Binding::Scripted { table } = b {
                paths.push((role, table));
            }
        }
        for (what, p) in paths {
            if !p.is_file() {
                return bad(format!("{what}: no such file {}", p.display()));
            }
        }
        if self.tasks.train.is_some() && self.tasks.curriculum.is_some() {
            return bad("tasks.train and tasks.curriculum are mutually exclusive".into());
        }
        self.grpo.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.rollout.weights.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.synth.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.eval.trials == 0 {
            return bad("eval.trials must be positive".into());
        }
        Ok(())
    }

    pub fn binding(&self, role: Role) -> Result<&Binding> {
        self.generators
            .get(role.as_str())
            .ok_or_else(|| CliError::Config(format!("no generator bound for role {role}")))
    }

    /// Instantiates the generators for `roles`, failing on the first role
    /// that is unbound or cannot be served.
    pub fn bindings(&self, roles: &[Role]) -> Result<Bindings> {
        let mut out = Bindings::new();
        for &role in roles {
            out.set(role, self.generator(role)?);
        }
        Ok(out)
    }

    pub fn generator(&self, role: Role) -> Result<Arc<dyn Generator>> {
        let unsupported = |what: &str| Err(CliError::Config(format!("role {role} cannot bind to {what}")));
        match self.binding(role)? {
            Binding::Toy => unsupported("the toy policy here; it is built from a checkpoint"),
            Binding::Mock { variant } => {
                let v = variant.as_deref();
                let g: Arc<dyn Generator> = match (role, v) {
                    (Role::AwarenessGen, None) => Arc::new(TemplateAwareness),
                    (Role::Verifier, None) => Arc::new(ExtractionVerifier::default()),
                    (Role::Verifier, Some("strict")) => Arc::new(ExtractionVerifier::strict()),
                    (Role::Augmenter, None) => Arc::new(PhraseParaphraser),
                    (Role::SynthGen, None) => Arc::new(FileboxSynth::default()),
                    (Role::Judge, None) => Arc::new(ConstantJudge { valid: true }),
                    (Role::Judge, Some("reject")) => Arc::new(ConstantJudge { valid: false }),
                    (_, Some(v)) => return unsupported(&format!("mock variant `{v}`")),
                    (_, None) => return unsupported("a mock"),
                };
                Ok(g)
            }
            Binding::Scripted { table } => Ok(Arc::new(ScriptedMock::from_jsonl(table)?)),
            Binding::Remote { model, endpoint } => {
                let role_var = format!("{ENDPOINT_VAR}_{}", role.as_str().to_uppercase());
                let endpoint = std::env::var(&role_var)
                    .ok()
                    .or_else(|| std::env::var(ENDPOINT_VAR).ok())
                    .or_else(|| endpoint.clone())
                    .filter(|e| !e.trim().is_empty())
                    .ok_or_else(|| {
                        CliError::Config(format!(
                            "generator endpoint unset for role {role}: set `endpoint`, {role_var} or {ENDPOINT_VAR}"
                        ))
                    })?;
                Ok(Arc::new(RemoteGenerator::new(role, endpoint, model.clone(), std::env::var(API_KEY_VAR).ok())))
            }
        }
    }

    /// The policy binding must be the toy policy for training.
    pub fn require_toy_policy(&self) -> Result<()> {
        match self.binding(Role::Policy)? {
            Binding::Toy => Ok(()),
            other => Err(CliError::Config(format!(
                "role policy must bind to the toy policy for training, found {}",
                serde_json::to_string(other).unwrap_or_default()
            ))),
        }
    }

    /// Training tasks and a key identifying them.
    pub fn train_tasks(&self) -> Result<(Vec<Task>, String)> {
        if let Some(p) = &self.tasks.train {
            let tasks = read_bundle(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            return Ok((tasks, file_key(p)?));
        }
        if let Some(c) = &self.tasks.curriculum {
            let (train, _) = curriculum::split(c.train, c.heldout, self.seed, &c.config);
            return Ok((train, content_key(&("curriculum-train", c, self.seed))));
        }
        Err(CliError::Config("no task path: set tasks.train or tasks.curriculum".into()))
    }

    pub fn heldout_tasks(&self) -> Result<(Vec<Task>, String)> {
        if let Some(p) = &self.tasks.heldout {
            let tasks = read_bundle(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            return Ok((tasks, file_key(p)?));
        }
        if let Some(c) = &self.tasks.curriculum {
            let (_, held) = curriculum::split(c.train, c.heldout, self.seed, &c.config);
            return Ok((held, content_key(&("curriculum-heldout", c, self.seed))));
        }
        Err(CliError::Config("no held-out task path: set tasks.heldout or tasks.curriculum".into()))
    }

    /// Training and held-out tasks together, for building the vocabulary.
    pub fn all_tasks(&self) -> Result<Vec<Task>> {
        let mut all = self.train_tasks()?.0;
        if self.tasks.heldout.is_some() || self.tasks.curriculum.is_some() {
            all.extend(self.heldout_tasks()?.0);
        }
        Ok(all)
    }

    pub fn exemplars(&self) -> Result<Vec<InitialConfig>> {
        match &self.synth.exemplars {
            Some(p) => awarerl_core::io::read_jsonl(p).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(default_exemplars()),
        }
    }
}

pub fn default_exemplars() -> Vec<InitialConfig> {
    use awarerl_core::toolenv::{filebox, Domain};
    [(&[][..], 0), (&[("a.txt", "alpha")][..], 1)]
        .into_iter()
        .map(|(files, seed)| InitialConfig {
            domain: Domain::Filebox,
            initial_state: filebox::store(files),
            seed,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
out_dir = "out"
[tasks.curriculum]
train = 4
heldout = 2
[generators]
policy = { kind = "toy" }
synth_gen = { kind = "remote", model = "m" }
"#;

    #[test]
    fn relative_paths_resolve_against_the_config() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.out_dir, Path::new("/base/out"));
        assert_eq!(cfg.grpo, GrpoHyper::default());
    }

    #[test]
    fn missing_paths_and_unknown_roles_are_config_errors() {
        let missing = format!("{MINIMAL}\n[synth]\nexemplars = \"nope.jsonl\"\n");
        assert!(matches!(RunConfig::parse(&missing, Path::new("/base")), Err(CliError::Config(m)) if m.contains("nope.jsonl")));
        let unknown = MINIMAL.replace("synth_gen", "painter");
        assert!(matches!(RunConfig::parse(&unknown, Path::new("/")), Err(CliError::Config(m)) if m.contains("painter")));
    }

    #[test]
    fn remote_role_without_endpoint_is_named() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/")).unwrap();
        std::env::remove_var(ENDPOINT_VAR);
        std::env::remove_var("AWARERL_ENDPOINT_SYNTH_GEN");
        let err = cfg.generator(Role::SynthGen).err().unwrap();
        assert!(err.to_string().contains("synth_gen"), "{err}");
        assert!(cfg.generator(Role::Judge).err().unwrap().to_string().contains("judge"));
    }

    #[test]
    fn keys_follow_content() {
        let a = RunConfig::parse(MINIMAL, Path::new("/")).unwrap();
        let mut b = a.clone();
        assert_eq!(content_key(&a), content_key(&b));
        b.seed = 1;
        assert_ne!(content_key(&a), content_key(&b));
    }
}
