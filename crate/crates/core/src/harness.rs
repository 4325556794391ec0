//! Seeded multi-run experiments and their CSV output.
//!
//! An experiment is described by a TOML file:
//!
//! ```toml
//! env = "block-riverswim"
//! R = 4
//! H = 20
//! algorithms = ["uc-hrl", "uc-hrl-naive"]
//! K = 2000
//! seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//! lambda = 0.01
//! output_dir = "results/block-riverswim"
//!
//! [beta]
//! mode = "auto"
//! C = 0.0002
//! delta = 0.05
//! ```
//!
//! `env` is one of `riverswim` (size `S`), `block-riverswim` (block count
//! `R`) or `hallway` (column count `length`). `beta` is either
//! `{ mode = "auto", C, delta }`, which applies the regret-bound schedule
//! with `T = K·H` and `d` the agent's feature dimension, or
//! `{ mode = "fixed", value }`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::agents::{Agent, AgentParams, LsviUcbAgent, UcHrlAgent};
use crate::aggregation::AggregationScheme;
use crate::analysis::{regret_curve, RunRecord};
use crate::envs::{make_block_riverswim, make_hallway_gridworld, riverswim_hierarchy, HierarchicalEnv};
use crate::error::{Error, Result};
use crate::io::{line_of, toml_error};
use crate::linear_model::{beta_schedule, DEFAULT_LAMBDA};
use crate::rng::run_stream;

pub const DEFAULT_HORIZON: usize = 20;
pub const DEFAULT_EPISODES: usize = 2000;
pub const DEFAULT_SEEDS: usize = 10;
pub const DEFAULT_BETA_CONSTANT: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.05;

/// Header of every per-run CSV.
pub const RUN_HEADER: &str = "episode,return,regret,cum_regret";
/// Header of every aggregate CSV.
pub const AGGREGATE_HEADER: &str =
    "episode,mean_return,std_return,mean_regret,std_regret,mean_cum_regret,std_cum_regret";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    UcHrl,
    UcHrlNaive,
    LsviUcb,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UcHrl => "uc-hrl",
            Algorithm::UcHrlNaive => "uc-hrl-naive",
            Algorithm::LsviUcb => "lsvi-ucb",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uc-hrl" => Ok(Algorithm::UcHrl),
            "uc-hrl-naive" => Ok(Algorithm::UcHrlNaive),
            "lsvi-ucb" => Ok(Algorithm::LsviUcb),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvSpec {
    Riverswim { states: usize },
    BlockRiverswim { blocks: usize },
    Hallway { length: usize },
}

impl EnvSpec {
    pub fn build(self, horizon: usize) -> Result<HierarchicalEnv> {
        match self {
            EnvSpec::Riverswim { states } => riverswim_hierarchy(states, horizon),
            EnvSpec::BlockRiverswim { blocks } => make_block_riverswim(blocks, horizon),
            EnvSpec::Hallway { length } => make_hallway_gridworld(length, horizon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BetaMode {
    Auto {
        #[serde(rename = "C", default = "default_constant")]
        constant: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Fixed {
        value: f64,
    },
}

fn default_constant() -> f64 {
    DEFAULT_BETA_CONSTANT
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl Default for BetaMode {
    fn default() -> Self {
        BetaMode::Auto {
            constant: DEFAULT_BETA_CONSTANT,
            delta: DEFAULT_DELTA,
        }
    }
}

impl BetaMode {
    /// Bonus scale for an agent of feature dimension `dim`.
    pub fn resolve(self, dim: usize, horizon: usize, episodes: usize) -> Result<f64> {
        match self {
            BetaMode::Auto { constant, delta } => beta_schedule(constant, dim, horizon, episodes * horizon, delta),
            BetaMode::Fixed { value } => Ok(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub horizon: usize,
    pub algorithms: Vec<Algorithm>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub beta: BetaMode,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    env: Spanned<String>,
    #[serde(rename = "R")]
    blocks: Option<Spanned<usize>>,
    #[serde(rename = "S")]
    states: Option<Spanned<usize>>,
    length: Option<Spanned<usize>>,
    #[serde(rename = "H")]
    horizon: Option<Spanned<usize>>,
    algorithms: Spanned<Vec<Algorithm>>,
    #[serde(rename = "K")]
    episodes: Option<Spanned<usize>>,
    seeds: Option<Spanned<Vec<u64>>>,
    lambda: Option<Spanned<f64>>,
    beta: Option<Spanned<BetaMode>>,
    output_dir: Option<String>,
}

impl ExperimentConfig {
    /// Parses and validates a config document. Every diagnostic names the
    /// offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        let fail = |span: std::ops::Range<usize>, msg: String| {
            Error::Parse(format!("line {}: {msg}", line_of(text, span.start)))
        };
        let need = |field: &Option<Spanned<usize>>, key: &str, min: usize| -> Result<usize> {
            match field {
                None => Err(fail(
                    raw.env.span(),
                    format!("env `{}` requires `{key}`", raw.env.get_ref()),
                )),
                Some(v) if *v.get_ref() < min => Err(fail(v.span(), format!("`{key}` must be at least {min}"))),
                Some(v) => Ok(*v.get_ref()),
            }
        };
        let env = match raw.env.get_ref().as_str() {
            "riverswim" => EnvSpec::Riverswim {
                states: need(&raw.states, "S", 3)?,
            },
            "block-riverswim" => EnvSpec::BlockRiverswim {
                blocks: need(&raw.blocks, "R", 1)?,
            },
            "hallway" => EnvSpec::Hallway {
                length: need(&raw.length, "length", 2)?,
            },
            other => {
                return Err(fail(
                    raw.env.span(),
                    format!("unknown env `{other}`, expected riverswim, block-riverswim or hallway"),
                ))
            }
        };
        let horizon = raw.horizon.as_ref().map_or(DEFAULT_HORIZON, |h| *h.get_ref());
        if let Some(h) = raw.horizon.as_ref().filter(|h| *h.get_ref() == 0) {
            return Err(fail(h.span(), "`H` must be positive".into()));
        }
        let episodes = raw.episodes.as_ref().map_or(DEFAULT_EPISODES, |k| *k.get_ref());
        if let Some(k) = raw.episodes.as_ref().filter(|k| *k.get_ref() == 0) {
            return Err(fail(k.span(), "`K` must be at least 1".into()));
        }
        if raw.algorithms.get_ref().is_empty() {
            return Err(fail(raw.algorithms.span(), "`algorithms` is empty".into()));
        }
        let seeds = match &raw.seeds {
            Some(s) if s.get_ref().is_empty() => return Err(fail(s.span(), "`seeds` is empty".into())),
            Some(s) => s.get_ref().clone(),
            None => (0..DEFAULT_SEEDS as u64).collect(),
        };
        let lambda = raw.lambda.as_ref().map_or(DEFAULT_LAMBDA, |l| *l.get_ref());
        if let Some(l) = raw
            .lambda
            .as_ref()
            .filter(|l| l.get_ref().is_nan() || *l.get_ref() <= 0.0)
        {
            return Err(fail(
                l.span(),
                format!("`lambda` must be positive, got {}", l.get_ref()),
            ));
        }
        let beta = raw.beta.as_ref().map_or(BetaMode::default(), |b| *b.get_ref());
        if let Some(b) = &raw.beta {
            match *b.get_ref() {
                BetaMode::Auto { constant, delta } => {
                    if !(delta > 0.0 && delta < 1.0) {
                        return Err(fail(b.span(), format!("`delta` must lie in (0, 1), got {delta}")));
                    }
                    if constant.is_nan() || constant <= 0.0 {
                        return Err(fail(b.span(), format!("`C` must be positive, got {constant}")));
                    }
                }
                BetaMode::Fixed { value } if value.is_nan() || value < 0.0 => {
                    return Err(fail(b.span(), format!("fixed beta must be >= 0, got {value}")));
                }
                BetaMode::Fixed { .. } => {}
            }
        }
        Ok(Self {
            env,
            horizon,
            algorithms: raw.algorithms.into_inner(),
            episodes,
            seeds,
            lambda,
            beta,
            output_dir: PathBuf::from(raw.output_dir.unwrap_or_else(|| "results".into())),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 over the canonical JSON form of every field except the
    /// output directory.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

/// Parses a seed list such as `0-9` or `1,4,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("cannot read seeds from `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u64, u64) = (
                    lo.trim().parse().map_err(|_| bad())?,
                    hi.trim().parse().map_err(|_| bad())?,
                );
                if lo > hi {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Builds an agent for `algorithm` on `env`.
pub fn build_agent(
    algorithm: Algorithm,
    env: &HierarchicalEnv,
    lambda: f64,
    beta: BetaMode,
    episodes: usize,
) -> Result<Box<dyn Agent + Send>> {
    let horizon = env.mdp.horizon();
    let params = |dim: usize| -> Result<AgentParams> {
        Ok(AgentParams {
            lambda,
            beta: beta.resolve(dim, horizon, episodes)?,
        })
    };
    let actions = env.mdp.actions();
    Ok(match algorithm {
        Algorithm::UcHrl => {
            let dim = env.scheme.max_aggregate_size() * actions;
            Box::new(UcHrlAgent::new(&env.mdp, env.scheme.clone(), params(dim)?)?)
        }
        Algorithm::UcHrlNaive => {
            let identity = AggregationScheme::identity(&env.mdp, env.partition().clone())?;
            let dim = identity.max_aggregate_size() * actions;
            Box::new(UcHrlAgent::new(&env.mdp, identity, params(dim)?)?.into_naive())
        }
        Algorithm::LsviUcb => {
            let dim = env.mdp.states() * actions;
            Box::new(LsviUcbAgent::new(&env.mdp, params(dim)?)?)
        }
    })
}

/// Runs every `(algorithm, seed)` pair in parallel. Records come back in
/// config order: algorithms outer, seeds inner.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let env = config.env.build(config.horizon)?;
    let hash = config.hash();
    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(algorithm, seed)| {
            let mut agent = build_agent(algorithm, &env, config.lambda, config.beta, config.episodes)?;
            let mut rng = run_stream(&hash, algorithm.name(), seed);
            let mut record = regret_curve(&env.mdp, agent.as_mut(), config.episodes, &mut rng)?;
            record.seed = seed;
            record.config_hash = hash.clone();
            Ok(record)
        })
        .collect()
}

/// Per-run CSV text. Floats use the shortest form that parses back to the
/// same value.
pub fn run_csv(record: &RunRecord) -> String {
    let mut out = format!(
        "# config_hash={} algorithm={} seed={}\n{RUN_HEADER}\n",
        record.config_hash, record.algorithm, record.seed
    );
    for row in &record.rows {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?}",
            row.episode, row.episode_return, row.regret, row.cum_regret
        );
    }
    out
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-episode mean and population std across the given runs of one
/// algorithm.
pub fn aggregate_csv(records: &[&RunRecord]) -> Result<String> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidParameter("no runs to aggregate".into()))?;
    let episodes = first.rows.len();
    if records.iter().any(|r| r.rows.len() != episodes) {
        return Err(Error::InvalidParameter("runs differ in length".into()));
    }
    let seeds: Vec<String> = records.iter().map(|r| r.seed.to_string()).collect();
    let mut out = format!(
        "# config_hash={} algorithm={} seeds={}\n{AGGREGATE_HEADER}\n",
        first.config_hash,
        first.algorithm,
        seeds.join(";")
    );
    for k in 0..episodes {
        let column = |f: fn(&crate::analysis::EpisodeRow) -> f64| -> Vec<f64> {
            records.iter().map(|r| f(&r.rows[k])).collect()
        };
        let (mr, sr) = mean_std(&column(|r| r.episode_return));
        let (mg, sg) = mean_std(&column(|r| r.regret));
        let (mc, sc) = mean_std(&column(|r| r.cum_regret));
        let _ = writeln!(out, "{},{mr:?},{sr:?},{mg:?},{sg:?},{mc:?},{sc:?}", k + 1);
    }
    Ok(out)
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, Default)]
pub struct OutputFiles {
    pub runs: Vec<PathBuf>,
    pub aggregates: Vec<PathBuf>,
}

/// Writes `{alg}_{seed}.csv` for every run and `{alg}_aggregate.csv` for
/// every algorithm into `dir`.
pub fn write_outputs(config: &ExperimentConfig, records: &[RunRecord], dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let mut files = OutputFiles::default();
    for record in records {
        let path = dir.join(format!("{}_{}.csv", record.algorithm, record.seed));
        std::fs::write(&path, run_csv(record))?;
        files.runs.push(path);
    }
    for algorithm in &config.algorithms {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.algorithm == algorithm.name()).collect();
        let path = dir.join(format!("{}_aggregate.csv", algorithm.name()));
        std::fs::write(&path, aggregate_csv(&runs)?)?;
        files.aggregates.push(path);
    }
    Ok(files)
}
