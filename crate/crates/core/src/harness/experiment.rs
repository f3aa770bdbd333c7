//! Seeded experiment sweeps with incremental, ordered CSV output.

use super::config::{ExperimentConfig, ExperimentKind};
use crate::drlhp::{evaluate_run, stats_csv, LoopConfig, RunOutcome};
use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::eval::{epic_csv_row, expert_coverage, relearn_csv_row, uniform_coverage, CoverageDistribution, CoverageKind, RelearnReport, EPIC_CSV_HEADER, RELEARN_CSV_HEADER};
use crate::preference::to_jsonl;
use crate::reward::RewardCheckpoint;
use crate::rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::mpsc;

pub const RESULTS_VERSION_LINE: &str = "# drlhp-results v1";
pub const RESULTS_HEADER: &str =
    "experiment,env,seed,ensemble_size,rl_budget,sampler_return,relearner_return,epic_uniform,epic_expert,error";

/// Stream index reserved for the expert coverage rollouts.
pub const EXPERT_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub env: String,
    pub seed: u64,
    pub ensemble_size: usize,
    pub rl_budget: usize,
    pub sampler_return: Option<f64>,
    pub relearner_return: Option<f64>,
    pub epic_uniform: Option<f64>,
    pub epic_expert: Option<f64>,
    pub error: Option<String>,
}

fn field(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

impl ResultRow {
    pub fn run_id(&self) -> String {
        format!("{}-{}-k{}-b{}-s{}", self.experiment, self.env, self.ensemble_size, self.rl_budget, self.seed)
    }

    pub fn to_csv(&self) -> String {
        let error = self
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n', '\r'], ";");
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.env,
            self.seed,
            self.ensemble_size,
            self.rl_budget,
            field(self.sampler_return),
            field(self.relearner_return),
            field(self.epic_uniform),
            field(self.epic_expert),
            error
        )
    }
}

#[derive(Clone, Copy, Debug)]
struct Job {
    index: usize,
    ensemble_size: usize,
    budget: usize,
    seed: u64,
}

fn jobs(config: &ExperimentConfig) -> Vec<Job> {
    let l = &config.loop_config;
    let arms: Vec<(usize, usize)> = match config.experiment {
        ExperimentKind::SingleRun => vec![(l.ensemble_size, l.rl_budget)],
        ExperimentKind::EnsembleStudy => config.ensemble_sizes.iter().map(|&k| (k, l.rl_budget)).collect(),
        ExperimentKind::BudgetSweep => config.budgets.iter().map(|&b| (l.ensemble_size, b)).collect(),
    };
    let seeds = config.seed_list();
    arms.iter()
        .flat_map(|&(k, b)| seeds.iter().map(move |&s| (k, b, s)))
        .enumerate()
        .map(|(index, (ensemble_size, budget, seed))| Job { index, ensemble_size, budget, seed })
        .collect()
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    mdp: TabularMdp,
    uniform: CoverageDistribution,
    expert: CoverageDistribution,
}

fn execute(shared: &Shared, job: Job) -> (ResultRow, Option<RunOutcome>) {
    let config = shared.config;
    let loop_config = LoopConfig {
        ensemble_size: job.ensemble_size,
        rl_budget: job.budget,
        seed: rng::derive_seed(config.master_seed, job.seed),
        ..config.loop_config.clone()
    };
    let mut row = ResultRow {
        experiment: config.experiment.to_string(),
        env: config.env_name().to_string(),
        seed: job.seed,
        ensemble_size: job.ensemble_size,
        rl_budget: job.budget,
        sampler_return: None,
        relearner_return: None,
        epic_uniform: None,
        epic_expert: None,
        error: None,
    };
    let result = catch_unwind(AssertUnwindSafe(|| {
        evaluate_run(&shared.mdp, &loop_config, &config.eval, &shared.uniform, &shared.expert)
    }));
    match result {
        Ok(Ok(out)) => {
            row.sampler_return = Some(out.artifacts.sampler_return);
            row.relearner_return = Some(out.relearner_return);
            row.epic_uniform = out.epic_uniform;
            row.epic_expert = out.epic_expert;
            (row, Some(out))
        }
        Ok(Err(e)) => {
            row.error = Some(e.to_string());
            (row, None)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            row.error = Some(format!("panic: {msg}"));
            (row, None)
        }
    }
}

fn dump_artifacts(dir: &Path, row: &ResultRow, out: &RunOutcome, seed: u64) -> Result<()> {
    let run_dir = dir.join(row.run_id());
    std::fs::create_dir_all(&run_dir)?;
    let a = &out.artifacts;
    RewardCheckpoint::from_reward(&a.reward, &row.env, seed).save(&run_dir.join("reward.json"))?;
    std::fs::write(run_dir.join("sampler_policy.json"), a.sampler.to_json())?;
    std::fs::write(run_dir.join("relearner_policy.json"), out.relearner.to_json())?;
    std::fs::write(run_dir.join("preferences.jsonl"), to_jsonl(&a.dataset))?;
    std::fs::write(run_dir.join("stats.csv"), stats_csv(&a.stats))?;
    Ok(())
}

struct Writers {
    results: BufWriter<File>,
    relearn: BufWriter<File>,
    epic: BufWriter<File>,
}

impl Writers {
    fn create(dir: &Path) -> Result<Self> {
        let open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            writeln!(w, "{header}")?;
            w.flush()?;
            Ok(w)
        };
        Ok(Self {
            results: open("results.csv", &format!("{RESULTS_VERSION_LINE}\n{RESULTS_HEADER}"))?,
            relearn: open("relearn.csv", RELEARN_CSV_HEADER)?,
            epic: open("epic.csv", EPIC_CSV_HEADER)?,
        })
    }

    fn commit(&mut self, row: &ResultRow) -> Result<()> {
        writeln!(self.results, "{}", row.to_csv())?;
        let id = row.run_id();
        if let (Some(s), Some(r)) = (row.sampler_return, row.relearner_return) {
            let report = RelearnReport {
                env: row.env.clone(),
                run_id: id.clone(),
                sampler_return: s,
                relearner_return: r,
            };
            writeln!(self.relearn, "{}", relearn_csv_row(&report))?;
        }
        for (kind, d) in [(CoverageKind::Uniform, row.epic_uniform), (CoverageKind::Expert, row.epic_expert)] {
            if let Some(d) = d {
                writeln!(self.epic, "{}", epic_csv_row(&id, row.rl_budget, kind, d))?;
            }
        }
        self.results.flush()?;
        self.relearn.flush()?;
        self.epic.flush()?;
        Ok(())
    }
}

/// Run every `(arm, seed)` job of the experiment on a pool of
/// `config.parallelism` workers. Rows are committed to `results.csv` in job
/// order as soon as all earlier rows are done, so a partial file is always a
/// prefix of the full one. Failed runs become rows with an error message.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let mdp = config.env_name().build();
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let uniform = uniform_coverage(&mdp);
    let expert = expert_coverage(
        &mdp,
        config.eval.expert_temperature,
        config.eval.expert_rollouts,
        config.eval.expert_horizon,
        &mut rng::substream(config.master_seed, EXPERT_STREAM),
    )?;
    let shared = Shared { config, mdp, uniform, expert };
    let jobs = jobs(config);
    let mut writers = Writers::create(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let (tx, rx) = mpsc::channel::<(usize, ResultRow, Option<RunOutcome>)>();
    let dump = config.experiment == ExperimentKind::SingleRun;
    std::thread::scope(|scope| -> Result<Vec<ResultRow>> {
        let shared = &shared;
        let jobs = &jobs;
        let pool = &pool;
        scope.spawn(move || {
            pool.install(|| {
                jobs.par_iter().with_max_len(1).for_each_with(tx, |tx, &job| {
                    let (row, out) = execute(shared, job);
                    let _ = tx.send((job.index, row, out));
                });
            });
        });
        let mut pending = BTreeMap::new();
        let mut rows = Vec::with_capacity(jobs.len());
        for (index, mut row, out) in rx {
            if dump {
                if let Some(out) = &out {
                    let seed = rng::derive_seed(config.master_seed, row.seed);
                    if let Err(e) = dump_artifacts(dir, &row, out, seed) {
                        row.error = Some(format!("artifact dump failed: {e}"));
                    }
                }
            }
            pending.insert(index, row);
            while let Some(row) = pending.remove(&rows.len()) {
                writers.commit(&row)?;
                rows.push(row);
            }
        }
        Ok(rows)
    })
}
