//! Flat key-value experiment configs.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            ; comment
//! [section]            optional; one of experiment, loop, solver, eval
//! key = value          `:` may be used instead of `=`
//! ```
//!
//! Keys are unique across sections, so a key may also appear before any
//! section header. Lists are comma separated; seed lists also accept a
//! half-open range `a..b`.

use crate::drlhp::LoopConfig;
use crate::env::EnvName;
use crate::eval::EvalSettings;
use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("line {line}: bad value for {key}: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("line {line}: duplicate key {key}")]
    Duplicate { line: usize, key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SingleRun,
    EnsembleStudy,
    BudgetSweep,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SingleRun => "single_run",
            ExperimentKind::EnsembleStudy => "ensemble_study",
            ExperimentKind::BudgetSweep => "budget_sweep",
        }
    }

    pub fn default_env(self) -> EnvName {
        match self {
            ExperimentKind::EnsembleStudy => EnvName::StayInside,
            _ => EnvName::TinyRoom,
        }
    }

    pub fn default_seeds(self) -> Vec<u64> {
        match self {
            ExperimentKind::SingleRun => vec![0],
            ExperimentKind::EnsembleStudy => (0..10).collect(),
            ExperimentKind::BudgetSweep => (0..5).collect(),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single_run" => Ok(ExperimentKind::SingleRun),
            "ensemble_study" => Ok(ExperimentKind::EnsembleStudy),
            "budget_sweep" => Ok(ExperimentKind::BudgetSweep),
            _ => Err(format!("expected single_run, ensemble_study or budget_sweep, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub env: Option<EnvName>,
    pub seeds: Option<Vec<u64>>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub ensemble_sizes: Vec<usize>,
    pub budgets: Vec<usize>,
    pub loop_config: LoopConfig,
    pub eval: EvalSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::SingleRun,
            env: None,
            seeds: None,
            master_seed: 0,
            output_dir: PathBuf::from("results"),
            parallelism: 1,
            ensemble_sizes: vec![1, 5],
            budgets: vec![100_000, 200_000, 400_000, 800_000],
            loop_config: LoopConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn env_name(&self) -> EnvName {
        self.env.unwrap_or_else(|| self.experiment.default_env())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| self.experiment.default_seeds())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                return invalid("seeds must not be empty".into());
            }
            if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
                return invalid("seeds must be distinct".into());
            }
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if self.ensemble_sizes.is_empty() || self.ensemble_sizes.contains(&0) {
            return invalid("ensemble_sizes must be positive and non-empty".into());
        }
        if self.budgets.is_empty() {
            return invalid("budgets must not be empty".into());
        }
        if self.eval.expert_rollouts == 0 || self.eval.expert_horizon == 0 || self.eval.relearn.eval_episodes == 0 {
            return invalid("evaluation counts must be positive".into());
        }
        if self.loop_config.eval_episodes == 0 {
            return invalid("eval_episodes must be positive".into());
        }
        self.loop_config.validate().or_else(|e| invalid(e.to_string()))
    }
}

const SECTIONS: [&str; 4] = ["experiment", "loop", "solver", "eval"];

const KEYS: &[(&str, &str)] = &[
    ("experiment", "experiment"),
    ("experiment", "env"),
    ("experiment", "seeds"),
    ("experiment", "master_seed"),
    ("experiment", "output_dir"),
    ("experiment", "parallelism"),
    ("experiment", "ensemble_sizes"),
    ("experiment", "budgets"),
    ("loop", "total_comparisons"),
    ("loop", "num_iterations"),
    ("loop", "rl_budget"),
    ("loop", "fragment_length"),
    ("loop", "fragments_per_episode"),
    ("loop", "initial_random_fraction"),
    ("loop", "ensemble_size"),
    ("loop", "reward_epochs"),
    ("loop", "reward_batch_size"),
    ("loop", "reward_learning_rate"),
    ("loop", "hidden_sizes"),
    ("loop", "eval_episodes"),
    ("solver", "discount"),
    ("solver", "learning_rate"),
    ("solver", "temperature"),
    ("solver", "replay_capacity"),
    ("solver", "grad_steps_per_env_step"),
    ("solver", "initial_q"),
    ("eval", "relearn_temperature"),
    ("eval", "relearn_discount"),
    ("eval", "relearn_episodes"),
    ("eval", "expert_temperature"),
    ("eval", "expert_rollouts"),
    ("eval", "expert_horizon"),
];

fn num<T: FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{e} ({v:?})"))
}

fn real(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{v:?} is not a finite number"))
    }
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn seeds(v: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = v.split_once("..") {
        let (a, b): (u64, u64) = (num(a.trim())?, num(b.trim())?);
        if a >= b {
            return Err(format!("empty seed range {v:?}"));
        }
        return Ok((a..b).collect());
    }
    list(v)
}

fn apply(c: &mut ExperimentConfig, key: &str, v: &str) -> Result<(), String> {
    let l = &mut c.loop_config;
    match key {
        "experiment" => c.experiment = v.parse()?,
        "env" => c.env = Some(v.parse::<EnvName>().map_err(|e| e.to_string())?),
        "seeds" => c.seeds = Some(seeds(v)?),
        "master_seed" => c.master_seed = num(v)?,
        "output_dir" => {
            if v.is_empty() {
                return Err("output_dir must not be empty".into());
            }
            c.output_dir = PathBuf::from(v)
        }
        "parallelism" => c.parallelism = num(v)?,
        "ensemble_sizes" => c.ensemble_sizes = list(v)?,
        "budgets" => c.budgets = list(v)?,
        "total_comparisons" => l.total_comparisons = num(v)?,
        "num_iterations" => l.num_iterations = num(v)?,
        "rl_budget" => l.rl_budget = num(v)?,
        "fragment_length" => l.fragment_length = num(v)?,
        "fragments_per_episode" => l.fragments_per_episode = num(v)?,
        "initial_random_fraction" => l.initial_random_fraction = real(v)?,
        "ensemble_size" => l.ensemble_size = num(v)?,
        "reward_epochs" => l.reward_epochs = num(v)?,
        "reward_batch_size" => l.reward_batch_size = num(v)?,
        "reward_learning_rate" => l.reward_learning_rate = real(v)?,
        "hidden_sizes" => l.hidden_sizes = list(v)?,
        "eval_episodes" => l.eval_episodes = num(v)?,
        "discount" => l.solver.discount = real(v)?,
        "learning_rate" => l.solver.learning_rate = real(v)?,
        "temperature" => l.solver.temperature = real(v)?,
        "replay_capacity" => {
            l.solver.replay_capacity = if v == "none" { None } else { Some(num(v)?) };
        }
        "grad_steps_per_env_step" => l.solver.grad_steps_per_env_step = num(v)?,
        "initial_q" => l.solver.initial_q = real(v)?,
        "relearn_temperature" => c.eval.relearn.temperature = real(v)?,
        "relearn_discount" => c.eval.relearn.discount = real(v)?,
        "relearn_episodes" => c.eval.relearn.eval_episodes = num(v)?,
        "expert_temperature" => c.eval.expert_temperature = real(v)?,
        "expert_rollouts" => c.eval.expert_rollouts = num(v)?,
        "expert_horizon" => c.eval.expert_horizon = num(v)?,
        _ => unreachable!("key table and setter disagree on {key}"),
    }
    Ok(())
}

/// Strict parse of config text; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut config = ExperimentConfig::default();
    let mut section: Option<&str> = None;
    let mut seen = BTreeSet::new();
    let mut unknown = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(ConfigError::Syntax {
                line: line_no,
                msg: format!("unterminated section header {line:?}"),
            })?;
            let name = name.trim();
            section = Some(SECTIONS.iter().find(|s| **s == name).ok_or(ConfigError::Syntax {
                line: line_no,
                msg: format!("unknown section [{name}]"),
            })?);
            continue;
        }
        let split = line.find(['=', ':']).ok_or(ConfigError::Syntax {
            line: line_no,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = line[..split].trim();
        let value = line[split + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: line_no, msg: "missing key".into() });
        }
        let Some(&(home, _)) = KEYS.iter().find(|(_, k)| *k == key) else {
            unknown.push(key.to_string());
            continue;
        };
        if let Some(s) = section {
            if s != home {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("key {key} belongs in [{home}], not [{s}]"),
                });
            }
        }
        if !seen.insert(key) {
            return Err(ConfigError::Duplicate { line: line_no, key: key.into() });
        }
        apply(&mut config, key, value).map_err(|msg| ConfigError::Value {
            line: line_no,
            key: key.into(),
            msg,
        })?;
    }
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    config.validate()?;
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_config(&text)
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Render every setting explicitly; parsing the result yields `config` again.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    let l = &config.loop_config;
    let s = &l.solver;
    let e = &config.eval;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "[experiment]");
    let _ = writeln!(w, "experiment = {}", config.experiment);
    if let Some(env) = config.env {
        let _ = writeln!(w, "env = {env}");
    }
    if let Some(seeds) = &config.seeds {
        let _ = writeln!(w, "seeds = {}", join(seeds));
    }
    let _ = writeln!(w, "master_seed = {}", config.master_seed);
    let _ = writeln!(w, "output_dir = {}", config.output_dir.display());
    let _ = writeln!(w, "parallelism = {}", config.parallelism);
    let _ = writeln!(w, "ensemble_sizes = {}", join(&config.ensemble_sizes));
    let _ = writeln!(w, "budgets = {}", join(&config.budgets));
    let _ = writeln!(w, "\n[loop]");
    let _ = writeln!(w, "total_comparisons = {}", l.total_comparisons);
    let _ = writeln!(w, "num_iterations = {}", l.num_iterations);
    let _ = writeln!(w, "rl_budget = {}", l.rl_budget);
    let _ = writeln!(w, "fragment_length = {}", l.fragment_length);
    let _ = writeln!(w, "fragments_per_episode = {}", l.fragments_per_episode);
    let _ = writeln!(w, "initial_random_fraction = {}", l.initial_random_fraction);
    let _ = writeln!(w, "ensemble_size = {}", l.ensemble_size);
    let _ = writeln!(w, "reward_epochs = {}", l.reward_epochs);
    let _ = writeln!(w, "reward_batch_size = {}", l.reward_batch_size);
    let _ = writeln!(w, "reward_learning_rate = {}", l.reward_learning_rate);
    let _ = writeln!(w, "hidden_sizes = {}", join(&l.hidden_sizes));
    let _ = writeln!(w, "eval_episodes = {}", l.eval_episodes);
    let _ = writeln!(w, "\n[solver]");
    let _ = writeln!(w, "discount = {}", s.discount);
    let _ = writeln!(w, "learning_rate = {}", s.learning_rate);
    let _ = writeln!(w, "temperature = {}", s.temperature);
    match s.replay_capacity {
        Some(c) => {
            let _ = writeln!(w, "replay_capacity = {c}");
        }
        None => {
            let _ = writeln!(w, "replay_capacity = none");
        }
    }
    let _ = writeln!(w, "grad_steps_per_env_step = {}", s.grad_steps_per_env_step);
    let _ = writeln!(w, "initial_q = {}", s.initial_q);
    let _ = writeln!(w, "\n[eval]");
    let _ = writeln!(w, "relearn_temperature = {}", e.relearn.temperature);
    let _ = writeln!(w, "relearn_discount = {}", e.relearn.discount);
    let _ = writeln!(w, "relearn_episodes = {}", e.relearn.eval_episodes);
    let _ = writeln!(w, "expert_temperature = {}", e.expert_temperature);
    let _ = writeln!(w, "expert_rollouts = {}", e.expert_rollouts);
    let _ = writeln!(w, "expert_horizon = {}", e.expert_horizon);
    out
}
