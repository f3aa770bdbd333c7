use clap::{Parser, Subcommand};
use drlhp::env::EnvName;
use drlhp::eval::{epic_distance, expert_coverage, uniform_coverage, CoverageKind, EpicConfig, RewardTable, EXPERT_ROLLOUTS, EXPERT_TEMPERATURE};
use drlhp::harness::{parse_results, read_config, run_experiment, summarize};
use drlhp::reward::RewardCheckpoint;
use drlhp::rng;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "drlhp", version, about = "Preference-based reward learning on tabular gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Summarize a results CSV and write long-format plot data next to it.
    Summarize {
        results: PathBuf,
        /// Where to write the long-format CSV (default: <results>.long.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print an environment's layout and reward map.
    DumpEnv { name: String },
    /// EPIC distance between two reward checkpoints.
    Epic {
        ckpt_a: PathBuf,
        ckpt_b: PathBuf,
        #[arg(long, default_value = "uniform")]
        coverage: String,
        /// Seed for the expert coverage rollouts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let run_err = |e: drlhp::Error| Failure::Run(e.to_string());
    match cli.command {
        Command::Run { config } => {
            let config = read_config(&config).map_err(|e| Failure::Config(e.to_string()))?;
            let rows = run_experiment(&config).map_err(run_err)?;
            let summary = summarize(&rows).map_err(run_err)?;
            print!("{}", summary.text);
            println!("results written to {}", config.output_dir.join("results.csv").display());
            let failed: Vec<String> = rows
                .iter()
                .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.run_id())))
                .collect();
            if !failed.is_empty() {
                return Err(Failure::Run(format!("{} run(s) failed:\n{}", failed.len(), failed.join("\n"))));
            }
        }
        Command::Summarize { results, out } => {
            let text = std::fs::read_to_string(&results).map_err(|e| Failure::Run(format!("{}: {e}", results.display())))?;
            let rows = parse_results(&text).map_err(run_err)?;
            let summary = summarize(&rows).map_err(run_err)?;
            let out = out.unwrap_or_else(|| results.with_extension("long.csv"));
            std::fs::write(&out, &summary.long_csv).map_err(|e| Failure::Run(format!("{}: {e}", out.display())))?;
            print!("{}", summary.text);
            println!("plot data written to {}", out.display());
        }
        Command::DumpEnv { name } => {
            let env: EnvName = name.parse().map_err(|e: drlhp::Error| Failure::Config(e.to_string()))?;
            let mdp = env.build();
            println!("name: {}", mdp.name());
            println!("states: {}", mdp.num_states());
            println!("actions: {}", mdp.num_actions());
            println!("discount: {}", mdp.discount());
            println!("horizon: {}", mdp.horizon());
            if let Some(csv) = mdp.reward_map_csv() {
                println!("reward map (row 0 at the top, walls empty):");
                print!("{csv}");
            }
        }
        Command::Epic { ckpt_a, ckpt_b, coverage, seed } => {
            let kind: CoverageKind = coverage.parse().map_err(|e: drlhp::Error| Failure::Config(e.to_string()))?;
            let a = RewardCheckpoint::load(&ckpt_a).map_err(run_err)?;
            let b = RewardCheckpoint::load(&ckpt_b).map_err(run_err)?;
            if a.env != b.env {
                return Err(Failure::Run(format!("checkpoints are for different environments ({} vs {})", a.env, b.env)));
            }
            let env: EnvName = a.env.parse().map_err(run_err)?;
            let mdp = env.build();
            let (ra, rb) = (a.to_reward().map_err(run_err)?, b.to_reward().map_err(run_err)?);
            if ra.num_states() != mdp.num_states() || rb.num_states() != mdp.num_states() {
                return Err(Failure::Run(format!("checkpoint state count does not match {}", mdp.name())));
            }
            let coverage = match kind {
                CoverageKind::Uniform => uniform_coverage(&mdp),
                CoverageKind::Expert => {
                    expert_coverage(&mdp, EXPERT_TEMPERATURE, EXPERT_ROLLOUTS, mdp.horizon(), &mut rng::seeded(seed))
                        .map_err(run_err)?
                }
            };
            let ta = RewardTable::from_state_reward(mdp.num_actions(), ra.state_table());
            let tb = RewardTable::from_state_reward(mdp.num_actions(), rb.state_table());
            let d = epic_distance(&ta, &tb, &EpicConfig { coverage, discount: mdp.discount() }).map_err(run_err)?;
            println!("{d}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
