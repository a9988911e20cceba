use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kdvb_cli::acceptance::{self, Context};
use kdvb_cli::config::RunConfig;
use kdvb_cli::pipeline::{self, PipelineError};
use kdvb_cli::presets;

/// Simulate and certify the KdV-Burgers equation with delayed feedback.
///
/// Exit codes: 0 success, 1 criterion/run failure, 2 usage or config error.
#[derive(Parser)]
#[command(name = "kdvb", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Path to a run-configuration TOML file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in preset (see `kdvb verify --list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR", default_value = "kdvb-out")]
    out: PathBuf,
    /// Seed for randomized property sweeps (overrides the config's seed).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for batched verification.
    #[arg(long, value_name = "N", default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write series.csv, certificate.json, report.json.
    Simulate(SourceArgs),
    /// Verify the coefficient hypotheses and write certificate.json.
    Certify(SourceArgs),
    /// Run acceptance criteria: `verify all`, `verify <preset>`, or
    /// `verify criterion-N`.
    Verify {
        /// `all`, a preset name, or `criterion-N`.
        #[arg(default_value = "all")]
        target: String,
        #[command(flatten)]
        source: SourceArgs,
        /// List available presets and criteria, then exit.
        #[arg(long)]
        list: bool,
    },
    /// Compare a run against the applicable oracle and write comparison.json.
    CompareOracle(SourceArgs),
}

fn load_config(source: &SourceArgs) -> Result<RunConfig, String> {
    let mut cfg = match (&source.config, &source.preset) {
        (Some(path), None) => RunConfig::from_path(path).map_err(|e| e.to_string())?,
        (None, Some(name)) => presets::load(name).map_err(|e| e.to_string())?,
        (None, None) => {
            return Err("one of --config PATH or --preset NAME is required".into());
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some(seed) = source.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn usage_error(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn run_failure(message: String) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(1)
}

fn pipeline_exit(e: PipelineError) -> ExitCode {
    match e {
        PipelineError::Usage(m) => usage_error(m),
        PipelineError::Run(m) => run_failure(m),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(source) => {
            let raw = match load_config(&source) {
                Ok(c) => c,
                Err(m) => return usage_error(m),
            };
            let loaded = match raw.load() {
                Ok(l) => l,
                Err(e) => return usage_error(e.to_string()),
            };
            match pipeline::simulate(&loaded, &source.out) {
                Ok(outcome) => {
                    for file in &outcome.files {
                        println!("wrote {}", file.display());
                    }
                    println!(
                        "final t = {}, E = {:e}, calE = {:e}, certificate passed = {}",
                        outcome.record.final_time(),
                        outcome.record.e_series.last().unwrap(),
                        outcome.record.cal_e_series.last().unwrap(),
                        outcome.certificate.passed
                    );
                    if let Some(note) = &outcome.decay_note {
                        println!("note: {note}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_exit(e),
            }
        }
        Command::Certify(source) => {
            let raw = match load_config(&source) {
                Ok(c) => c,
                Err(m) => return usage_error(m),
            };
            let loaded = match raw.load() {
                Ok(l) => l,
                Err(e) => return usage_error(e.to_string()),
            };
            match pipeline::certify_only(&loaded, &source.out) {
                Ok((cert, path)) => {
                    println!("wrote {}", path.display());
                    match cert.gamma {
                        Some(gamma) => println!("certificate passed: gamma = {gamma}"),
                        None => {
                            println!("certificate rejected:");
                            for reason in &cert.failure_reasons {
                                println!("  - {reason}");
                            }
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_exit(e),
            }
        }
        Command::Verify {
            target,
            source,
            list,
        } => {
            if list {
                println!("presets: {}", presets::PRESET_NAMES.join(", "));
                for (id, name, _) in acceptance::CRITERIA {
                    println!("criterion {id:>2}: {name}");
                }
                return ExitCode::SUCCESS;
            }
            let ids: Vec<u32> = if target.eq_ignore_ascii_case("all") {
                acceptance::CRITERIA.iter().map(|(id, _, _)| *id).collect()
            } else if let Some(ids) = acceptance::criteria_for_preset(&target) {
                ids
            } else if let Some(id) = target
                .strip_prefix("criterion-")
                .and_then(|s| s.parse::<u32>().ok())
                .or_else(|| target.parse::<u32>().ok())
            {
                if acceptance::CRITERIA.iter().any(|(cid, _, _)| *cid == id) {
                    vec![id]
                } else {
                    return usage_error(format!("no criterion {id}; valid ids are 1..=11"));
                }
            } else {
                return usage_error(format!(
                    "unknown verify target `{target}`; use `all`, a preset name \
                     ({}), or criterion-N",
                    presets::PRESET_NAMES.join(", ")
                ));
            };

            let ctx = Context {
                seed: source.seed.unwrap_or(42),
                work_dir: acceptance::default_work_dir(&source.out),
            };
            if let Err(e) = std::fs::create_dir_all(&ctx.work_dir) {
                return usage_error(format!("cannot create {}: {e}", ctx.work_dir.display()));
            }
            let started = std::time::Instant::now();
            let outcomes = acceptance::run_criteria(&ids, &ctx, source.threads.max(1));
            for outcome in &outcomes {
                println!("{}", acceptance::format_outcome(outcome));
            }
            let all_passed = outcomes.iter().all(|o| o.passed);
            println!(
                "{}/{} criteria passed in {:.1} s",
                outcomes.iter().filter(|o| o.passed).count(),
                outcomes.len(),
                started.elapsed().as_secs_f64()
            );
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::CompareOracle(source) => {
            let raw = match load_config(&source) {
                Ok(c) => c,
                Err(m) => return usage_error(m),
            };
            let loaded = match raw.load() {
                Ok(l) => l,
                Err(e) => return usage_error(e.to_string()),
            };
            match pipeline::compare_oracle(&loaded, &source.out) {
                Ok(cmp) => {
                    println!(
                        "oracle {} at t = {}: rel L2 error {:e}, max abs error {:e}",
                        cmp.oracle, cmp.compare_time, cmp.rel_l2_error, cmp.max_abs_error
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_exit(e),
            }
        }
    }
}
