//! Command-line front end shared by the `uchrl` binary and its tests.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 input error, 3 failed check.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::aggregation::aggregation_error;
use crate::analysis::{rank_audit, DEFAULT_RANK_TOLERANCE};
use crate::envs::HierarchicalEnv;
use crate::error::Error;
use crate::harness::{parse_seeds, run_experiment, write_outputs, EnvSpec, ExperimentConfig, DEFAULT_HORIZON};
use crate::io::{format_mdp, format_scheme, read_mdp, read_scheme};
use crate::mdp::EpisodicMdp;
use crate::plot::{read_aggregate, render_svg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "uchrl", version, about = "Hierarchical optimistic RL experiments and audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded experiment and write per-run and aggregate CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed list such as `0-9` or `1,3,5`, overriding the config.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Check rank(P_h) >= floor(S/U) and write the report.
    RankAudit {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = DEFAULT_RANK_TOLERANCE)]
        tol: f64,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reward and transition aggregation errors of a scheme.
    AggCheck {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        scheme: Option<PathBuf>,
    },
    /// Render aggregate CSVs as an SVG of mean returns with ±1 std bands.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in environment as MDP and scheme files.
    Export {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        mdp_out: PathBuf,
        #[arg(long)]
        scheme_out: Option<PathBuf>,
    },
}

/// A built-in environment or an MDP file.
#[derive(Debug, Args)]
pub struct Source {
    /// riverswim, block-riverswim or hallway
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long = "S")]
    pub states: Option<usize>,
    #[arg(long = "R")]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long = "H", default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    #[arg(long, conflicts_with = "env")]
    pub mdp: Option<PathBuf>,
}

/// Error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Parse(_) | Error::InvalidParameter(_) | Error::InvalidPartition(_) | Error::Io(_) => EXIT_INPUT,
            Error::SchemeViolation { .. } => EXIT_INPUT,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

impl Source {
    fn spec(&self) -> std::result::Result<Option<EnvSpec>, Failure> {
        let Some(name) = &self.env else { return Ok(None) };
        let need =
            |v: Option<usize>, flag: &str| v.ok_or_else(|| Failure::input(format!("--env {name} requires --{flag}")));
        Ok(Some(match name.as_str() {
            "riverswim" => EnvSpec::Riverswim {
                states: need(self.states, "S")?,
            },
            "block-riverswim" => EnvSpec::BlockRiverswim {
                blocks: need(self.blocks, "R")?,
            },
            "hallway" => EnvSpec::Hallway {
                length: need(self.length, "length")?,
            },
            other => return Err(Failure::input(format!("unknown env `{other}`"))),
        }))
    }

    fn environment(&self) -> std::result::Result<Option<HierarchicalEnv>, Failure> {
        match self.spec()? {
            Some(spec) => Ok(Some(spec.build(self.horizon)?)),
            None => Ok(None),
        }
    }

    fn load_mdp(&self) -> std::result::Result<EpisodicMdp, Failure> {
        if let Some(env) = self.environment()? {
            return Ok(env.mdp);
        }
        let path = self
            .mdp
            .as_ref()
            .ok_or_else(|| Failure::input("give either --env or --mdp"))?;
        let mdp = read_mdp(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let report = mdp.validate();
        if !report.is_valid() {
            return Err(Failure::input(format!(
                "{}: invalid MDP\n{}",
                path.display(),
                report.summary().join("\n")
            )));
        }
        Ok(mdp)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Run {
            config,
            out: dir,
            seeds,
        } => {
            let mut cfg =
                ExperimentConfig::load(&config).map_err(|e| Failure::input(format!("{}: {e}", config.display())))?;
            if let Some(dir) = dir {
                cfg.output_dir = dir;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = parse_seeds(&seeds)?;
            }
            let records = run_experiment(&cfg).map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?;
            let files = write_outputs(&cfg, &records, &cfg.output_dir).map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?;
            let _ = writeln!(out, "config_hash={}", cfg.hash());
            for record in &records {
                let _ = writeln!(
                    out,
                    "{} seed={} cum_regret={:.6} final_value={:.6} optimal={:.6}",
                    record.algorithm,
                    record.seed,
                    record.cumulative_regret(),
                    record.final_policy_value(100),
                    record.optimal_value
                );
            }
            let _ = writeln!(
                out,
                "wrote {} run files and {} aggregate files to {}",
                files.runs.len(),
                files.aggregates.len(),
                cfg.output_dir.display()
            );
            Ok(EXIT_OK)
        }
        Command::RankAudit { source, tol, out: path } => {
            let mdp = source.load_mdp()?;
            let report = rank_audit(&mdp, tol)?;
            let text = report.to_toml();
            match path {
                Some(p) => std::fs::write(&p, &text).map_err(|e| Failure {
                    code: EXIT_RUNTIME,
                    message: format!("{}: {e}", p.display()),
                })?,
                None => {
                    let _ = write!(out, "{text}");
                }
            }
            let _ = writeln!(
                out,
                "S={} U={} bound={} min_rank={} satisfied={}",
                report.states, report.directly_reachable, report.bound, report.min_rank, report.satisfied
            );
            Ok(if report.satisfied { EXIT_OK } else { EXIT_CHECK })
        }
        Command::AggCheck { source, scheme } => {
            let (mdp, scheme) = match (source.environment()?, scheme) {
                (Some(env), None) => (env.mdp, env.scheme),
                (Some(_), Some(_)) => return Err(Failure::input("--scheme goes with --mdp, not --env")),
                (None, Some(path)) => {
                    let mdp = source.load_mdp()?;
                    match read_scheme(&path, &mdp) {
                        Ok(s) => (mdp, s),
                        Err(e @ Error::SchemeViolation { .. }) => {
                            return Err(Failure {
                                code: EXIT_CHECK,
                                message: format!("{}: {e}", path.display()),
                            })
                        }
                        Err(e) => return Err(Failure::input(format!("{}: {e}", path.display()))),
                    }
                }
                (None, None) => return Err(Failure::input("give --env, or --mdp with --scheme")),
            };
            let e = aggregation_error(&mdp, &scheme);
            let _ = writeln!(out, "eps_r={:.12} eps_p={:.12}", e.eps_r, e.eps_p);
            Ok(EXIT_OK)
        }
        Command::Plot { inputs, out: path } => {
            let curves = inputs
                .iter()
                .map(|p| read_aggregate(p).map_err(|e| Failure::input(format!("{}: {e}", p.display()))))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let svg = render_svg(&curves)?;
            std::fs::write(&path, svg).map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: format!("{}: {e}", path.display()),
            })?;
            let _ = writeln!(out, "wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Export {
            source,
            mdp_out,
            scheme_out,
        } => {
            let env = source
                .environment()?
                .ok_or_else(|| Failure::input("export needs a built-in --env"))?;
            let write = |p: &PathBuf, text: String| {
                std::fs::write(p, text).map_err(|e| Failure {
                    code: EXIT_RUNTIME,
                    message: format!("{}: {e}", p.display()),
                })
            };
            write(&mdp_out, format_mdp(&env.mdp))?;
            if let Some(p) = &scheme_out {
                write(p, format_scheme(&env.scheme))?;
            }
            Ok(EXIT_OK)
        }
    }
}
