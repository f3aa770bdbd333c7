//! Per-arm statistics over a results table.

use super::experiment::{ResultRow, RESULTS_HEADER, RESULTS_VERSION_LINE};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Format { what: "results table", msg: format!("line {line}: {}", msg.into()) }
}

fn opt_f64(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| bad(line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(bad(line, format!("non-finite value {s:?}")));
    }
    Ok(Some(v))
}

/// Parse a results CSV written by the experiment runner.
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == RESULTS_VERSION_LINE => {}
        _ => return Err(bad(1, format!("expected {RESULTS_VERSION_LINE:?}"))),
    }
    match lines.next() {
        Some((_, l)) if l.trim_end() == RESULTS_HEADER => {}
        _ => return Err(bad(2, "missing or unexpected column header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad(n, format!("expected 10 fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad(n, format!("not an integer: {s:?}")));
        rows.push(ResultRow {
            experiment: f[0].to_string(),
            env: f[1].to_string(),
            seed: int(f[2])?,
            ensemble_size: int(f[3])? as usize,
            rl_budget: int(f[4])? as usize,
            sampler_return: opt_f64(f[5], n)?,
            relearner_return: opt_f64(f[6], n)?,
            epic_uniform: opt_f64(f[7], n)?,
            epic_expert: opt_f64(f[8], n)?,
            error: (!f[9].is_empty()).then(|| f[9].to_string()),
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStderr {
    pub n: usize,
    pub mean: f64,
    /// `None` for fewer than two values.
    pub stderr: Option<f64>,
}

impl MeanStderr {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Some(Self { n, mean, stderr })
    }
}

impl std::fmt::Display for MeanStderr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stderr {
            Some(se) => write!(f, "{:.3} ± {:.3}", self.mean, se),
            None => write!(f, "{:.3} ± n/a", self.mean),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ArmKey {
    pub experiment: String,
    pub env: String,
    pub ensemble_size: usize,
    pub rl_budget: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmSummary {
    pub key: ArmKey,
    pub completed: usize,
    pub failed: usize,
    pub sampler: Option<MeanStderr>,
    pub relearner: Option<MeanStderr>,
    pub epic_uniform: Option<MeanStderr>,
    pub epic_expert: Option<MeanStderr>,
    /// Fraction of completed seeds whose relearner matched or beat its sampler.
    pub relearner_at_least_sampler: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub arms: Vec<ArmSummary>,
    pub text: String,
    /// One row per `(run, metric)`, for plotting.
    pub long_csv: String,
}

pub const LONG_CSV_HEADER: &str = "experiment,env,ensemble_size,rl_budget,seed,metric,value";

pub fn summarize(rows: &[ResultRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("results table has no rows".into()));
    }
    let mut groups: BTreeMap<ArmKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = ArmKey {
            experiment: r.experiment.clone(),
            env: r.env.clone(),
            ensemble_size: r.ensemble_size,
            rl_budget: r.rl_budget,
        };
        groups.entry(key).or_default().push(r);
    }
    let mut arms = Vec::new();
    let mut text = String::new();
    for (key, rs) in groups {
        let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&ResultRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
        let pairs: Vec<(f64, f64)> = ok
            .iter()
            .filter_map(|r| Some((r.sampler_return?, r.relearner_return?)))
            .collect();
        let arm = ArmSummary {
            completed: ok.len(),
            failed: rs.len() - ok.len(),
            sampler: MeanStderr::of(&col(|r| r.sampler_return)),
            relearner: MeanStderr::of(&col(|r| r.relearner_return)),
            epic_uniform: MeanStderr::of(&col(|r| r.epic_uniform)),
            epic_expert: MeanStderr::of(&col(|r| r.epic_expert)),
            relearner_at_least_sampler: (!pairs.is_empty())
                .then(|| pairs.iter().filter(|(s, r)| r >= s).count() as f64 / pairs.len() as f64),
            key,
        };
        let k = &arm.key;
        let _ = writeln!(
            text,
            "{} env={} K={} budget={}: {} completed, {} failed",
            k.experiment, k.env, k.ensemble_size, k.rl_budget, arm.completed, arm.failed
        );
        let show = |m: &Option<MeanStderr>| m.map_or("n/a".to_string(), |m| m.to_string());
        let _ = writeln!(text, "  sampler return    {}", show(&arm.sampler));
        let _ = writeln!(text, "  relearner return  {}", show(&arm.relearner));
        let _ = writeln!(text, "  epic uniform      {}", show(&arm.epic_uniform));
        let _ = writeln!(text, "  epic expert       {}", show(&arm.epic_expert));
        let frac = arm.relearner_at_least_sampler.map_or("n/a".to_string(), |f| format!("{f:.3}"));
        let _ = writeln!(text, "  relearner >= sampler: {frac}");
        arms.push(arm);
    }

    let mut long_csv = format!("{LONG_CSV_HEADER}\n");
    for r in rows.iter().filter(|r| r.error.is_none()) {
        for (metric, v) in [
            ("sampler_return", r.sampler_return),
            ("relearner_return", r.relearner_return),
            ("epic_uniform", r.epic_uniform),
            ("epic_expert", r.epic_expert),
        ] {
            if let Some(v) = v {
                let _ = writeln!(
                    long_csv,
                    "{},{},{},{},{},{metric},{v}",
                    r.experiment, r.env, r.ensemble_size, r.rl_budget, r.seed
                );
            }
        }
    }
    Ok(Summary { arms, text, long_csv })
}
