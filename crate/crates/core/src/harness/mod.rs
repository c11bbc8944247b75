//! Experiment engine.
//!
//! An experiment builds one environment (from a rating file or a synthetic
//! perfect-linear model), then plays `runs` independent copies of a policy
//! against it for `n_steps` steps each, recording cumulative regret and
//! reward at up to ~1000 checkpoints.
//!
//! Run `r` uses the seed `splitmix64(master_seed ^ splitmix64(r))`; within
//! a run the environment draws from ChaCha stream 0 and the policy from
//! stream 1. Results are reduced in run order, so output does not depend
//! on the number of worker threads.

mod bound;
pub mod cli;
mod output;
mod synthetic;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bound::{theorem_bound, TheoremBound};
pub use output::{runs_to_csv, trace_to_csv, write_runs, write_trace};
pub use synthetic::{synthetic_env, SyntheticEnv, MAX_ATTRACTION, MIN_ATTRACTION};

use crate::environment::{Environment, FeedbackMatrix};
use crate::error::{Error, Result};
use crate::features::{build_features, split_rows, ItemFeatures};
use crate::ingestion::{binarize, load_ratings, read_matrix_csv, BinarizeRule, Delimiter};
use crate::policies::{CascadeLinTs, CascadeLinUcb, CascadeUcb1, FixedList, Policy, RankedLinTs};
use crate::rng::{run_seed, SimRng, ENV_STREAM, POLICY_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    CascadeUcb1,
    CascadeLinTs,
    CascadeLinUcb,
    RankedLinTs,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::CascadeUcb1 => "cascade_ucb1",
            Algo::CascadeLinTs => "cascade_lin_ts",
            Algo::CascadeLinUcb => "cascade_lin_ucb",
            Algo::RankedLinTs => "ranked_lin_ts",
        }
    }

    pub fn uses_features(self) -> bool {
        !matches!(self, Algo::CascadeUcb1)
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cascade_ucb1" => Ok(Algo::CascadeUcb1),
            "cascade_lin_ts" => Ok(Algo::CascadeLinTs),
            "cascade_lin_ucb" => Ok(Algo::CascadeLinUcb),
            "ranked_lin_ts" => Ok(Algo::RankedLinTs),
            other => Err(Error::invalid(format!(
                "unknown algo {other:?} (expected cascade_ucb1, cascade_lin_ts, cascade_lin_ucb or ranked_lin_ts)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Tsv,
    Csv,
    Movielens,
    /// 0/1 CSV with a header of item ids.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    GreaterThanThreshold,
    Presence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
    #[serde(default = "default_rule")]
    pub rule: RuleKind,
    #[serde(default)]
    pub threshold: Option<f64>,
}

fn default_rule() -> RuleKind {
    RuleKind::Presence
}

impl DatasetSpec {
    pub fn binarize_rule(&self) -> Result<BinarizeRule> {
        match (self.rule, self.threshold) {
            (RuleKind::Presence, _) => Ok(BinarizeRule::Presence),
            (RuleKind::GreaterThanThreshold, Some(t)) if t.is_finite() => Ok(BinarizeRule::GreaterThan(t)),
            (RuleKind::GreaterThanThreshold, _) => Err(Error::Config(
                "rule greater_than_threshold needs a finite threshold".into(),
            )),
        }
    }

    /// Loads and binarizes the dataset; relative paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<(FeedbackMatrix, Vec<String>)> {
        let path = match base {
            Some(b) if self.path.is_relative() => b.join(&self.path),
            _ => self.path.clone(),
        };
        let delimiter = match self.format {
            DatasetFormat::Matrix => return read_matrix_csv(&path),
            DatasetFormat::Tsv => Delimiter::Tab,
            DatasetFormat::Csv => Delimiter::Comma,
            DatasetFormat::Movielens => Delimiter::DoubleColon,
        };
        let triples = load_ratings(&path, delimiter)?;
        let labeled = binarize(&triples, self.binarize_rule()?)?;
        Ok((labeled.matrix, labeled.item_ids))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(rename = "L")]
    pub l: usize,
    /// Defaults to the experiment's `d`.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub theta_seed: u64,
}

/// Experiment configuration; the JSON field names are the struct's serde
/// names (`K`, `L_max` and `L` are upper case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub n_steps: u64,
    pub runs: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    /// CascadeLinUCB confidence constant; derived from the regret bound when
    /// absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(rename = "L_max", default)]
    pub l_max: Option<usize>,
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Assumed bound on `‖θ*‖` when deriving `c`.
    #[serde(default = "one")]
    pub theta_norm: f64,
    /// Worker threads for parallel runs; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Debug: every run plays `A*` instead of learning.
    #[serde(default)]
    pub oracle_replay: bool,
}

fn one() -> f64 {
    1.0
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Minimal synthetic configuration with defaults for everything else.
    pub fn synthetic(algo: Algo, l: usize, d: usize, k: usize, n_steps: u64, runs: usize) -> Self {
        Self {
            algo,
            n_steps,
            runs,
            k,
            d,
            sigma: 1.0,
            c: None,
            l_max: None,
            m_max: None,
            dataset: None,
            synthetic: Some(SyntheticSpec {
                l,
                d: None,
                theta_seed: 0,
            }),
            master_seed: 0,
            split_seed: 0,
            out_dir: default_out_dir(),
            theta_norm: 1.0,
            workers: None,
            oracle_replay: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        self.validate_run_params()?;
        let fail = |m: String| Err(Error::Config(m));
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) | (None, None) => fail("exactly one of dataset and synthetic must be given".into()),
            (Some(ds), None) => ds.binarize_rule().map(|_| ()),
            (None, Some(s)) => {
                if s.d.is_some_and(|d| d != self.d) {
                    return fail(format!("synthetic.d = {:?} differs from d = {}", s.d, self.d));
                }
                if self.k > s.l {
                    return fail(format!("K = {} exceeds L = {}", self.k, s.l));
                }
                Ok(())
            }
        }
    }

    /// Checks the run parameters, ignoring the data source.
    pub fn validate_run_params(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_steps == 0 {
            return fail("n_steps must be positive".into());
        }
        if self.runs == 0 {
            return fail("runs must be positive".into());
        }
        if self.k == 0 || self.d == 0 {
            return fail("K and d must be positive".into());
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("c must be positive, got {c}"));
            }
        }
        if !(self.theta_norm.is_finite() && self.theta_norm > 0.0) {
            return fail(format!("theta_norm must be positive, got {}", self.theta_norm));
        }
        if self.l_max == Some(0) || self.m_max == Some(0) {
            return fail("L_max and m_max must be positive".into());
        }
        if self.workers == Some(0) {
            return fail("workers must be positive".into());
        }
        Ok(())
    }

    /// `c` for CascadeLinUCB: the configured value or the regret-bound one.
    pub fn lin_ucb_c(&self) -> Result<f64> {
        match self.c {
            Some(c) => Ok(c),
            None => Ok(theorem_bound(self.n_steps, self.k, self.d, self.sigma, self.theta_norm)?.c),
        }
    }
}

/// Environment and features shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub environment: Environment,
    pub features: Option<Arc<ItemFeatures>>,
    /// Item ids of the environment's columns, when known.
    pub item_ids: Option<Vec<String>>,
}

impl Prepared {
    pub fn items(&self) -> usize {
        self.environment.items()
    }
}

/// Builds the environment (and features, if the algorithm needs them).
/// `base` resolves relative dataset paths.
pub fn prepare(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<Prepared> {
    cfg.validate()?;
    if let Some(spec) = &cfg.synthetic {
        let s = synthetic_env(spec.l, cfg.d, cfg.k, spec.theta_seed)?;
        return Ok(Prepared {
            environment: s.environment,
            features: Some(Arc::new(s.features)),
            item_ids: None,
        });
    }
    let ds = cfg.dataset.as_ref().expect("validated");
    let (mut w, mut ids) = ds.load(base)?;
    if cfg.l_max.is_some() || cfg.m_max.is_some() {
        let sel = crate::ingestion::select_top(&w, cfg.l_max.unwrap_or(usize::MAX), cfg.m_max.unwrap_or(usize::MAX))?;
        ids = sel.cols.iter().map(|&c| ids[c].clone()).collect();
        w = sel.matrix;
    }
    let mut prepared = prepare_matrix(cfg, &w)?;
    prepared.item_ids = Some(ids);
    Ok(prepared)
}

/// Split `w` into train/test rows, learn features on train and simulate on
/// test with the greedy `A*` as baseline.
pub fn prepare_matrix(cfg: &ExperimentConfig, w: &FeedbackMatrix) -> Result<Prepared> {
    cfg.validate_run_params()?;
    if cfg.k > w.items() {
        return Err(Error::Config(format!(
            "K = {} exceeds the {} items available",
            cfg.k,
            w.items()
        )));
    }
    let split = split_rows(w, cfg.split_seed)?;
    let features = if cfg.algo.uses_features() {
        Some(Arc::new(build_features(&split, cfg.d)?))
    } else {
        None
    };
    let environment = Environment::from_matrix(Arc::new(split.test), cfg.k)?;
    Ok(Prepared {
        environment,
        features,
        item_ids: None,
    })
}

/// Cumulative regret and reward of every run at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub steps: Vec<u64>,
    pub mean_regret: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_reward: Vec<f64>,
    pub reward_stderr: Vec<f64>,
    pub run_seeds: Vec<u64>,
    pub per_run_final: Vec<f64>,
    pub per_run_final_reward: Vec<f64>,
    /// `per_run_regret[r][i]` is run `r`'s cumulative regret at `steps[i]`.
    pub per_run_regret: Vec<Vec<f64>>,
}

impl RegretTrace {
    pub fn final_mean_regret(&self) -> f64 {
        self.mean_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_mean_reward(&self) -> f64 {
        self.mean_reward.last().copied().unwrap_or(0.0)
    }
}

/// Checkpoint steps: every `max(1, n/1000)` steps, always ending at `n`.
pub fn checkpoints(n: u64) -> Vec<u64> {
    let every = (n / 1000).max(1);
    let mut steps: Vec<u64> = (1..=n / every).map(|i| i * every).collect();
    if steps.last() != Some(&n) {
        steps.push(n);
    }
    steps
}

/// Seed of every run of `cfg`.
pub fn run_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.runs as u64).map(|r| run_seed(cfg.master_seed, r)).collect()
}

/// Fresh policy for one run.
pub fn make_policy(cfg: &ExperimentConfig, prepared: &Prepared, policy_rng: SimRng) -> Result<Box<dyn Policy>> {
    if cfg.oracle_replay {
        return Ok(Box::new(FixedList::new(prepared.environment.optimal().clone())));
    }
    let features = || {
        prepared
            .features
            .clone()
            .ok_or_else(|| Error::Config(format!("{} needs item features", cfg.algo.as_str())))
    };
    Ok(match cfg.algo {
        Algo::CascadeUcb1 => Box::new(CascadeUcb1::new(prepared.items())),
        Algo::CascadeLinTs => Box::new(CascadeLinTs::new(features()?, cfg.sigma, policy_rng)?),
        Algo::CascadeLinUcb => Box::new(CascadeLinUcb::new(features()?, cfg.sigma, cfg.lin_ucb_c()?)?),
        Algo::RankedLinTs => Box::new(RankedLinTs::new(features()?, cfg.k, cfg.sigma, policy_rng)?),
    })
}

struct RunResult {
    regret: Vec<f64>,
    reward: Vec<f64>,
}

/// Plays one policy for `n_steps` steps.
fn play(
    env: &Environment,
    policy: &mut dyn Policy,
    k: usize,
    steps: &[u64],
    env_rng: &mut SimRng,
) -> Result<RunResult> {
    let n = *steps.last().expect("at least one checkpoint");
    let mut out = RunResult {
        regret: Vec::with_capacity(steps.len()),
        reward: Vec::with_capacity(steps.len()),
    };
    let (mut regret, mut reward) = (0.0, 0.0);
    let mut next = 0;
    for t in 1..=n {
        let list = policy.select(k)?;
        let outcome = env.step(&list, env_rng)?;
        policy.update(&list, outcome.click)?;
        regret += outcome.regret;
        reward += outcome.reward;
        if steps[next] == t {
            out.regret.push(regret);
            out.reward.push(reward);
            next += 1;
        }
    }
    Ok(out)
}

/// Runs the experiment on a prepared environment with the given run seeds,
/// building each run's policy with `factory(policy_rng)`.
pub fn run_with<F>(cfg: &ExperimentConfig, prepared: &Prepared, seeds: &[u64], factory: F) -> Result<RegretTrace>
where
    F: Fn(SimRng) -> Result<Box<dyn Policy>> + Sync,
{
    cfg.validate_run_params()?;
    if cfg.k > prepared.items() {
        return Err(Error::Config(format!("K = {} exceeds L = {}", cfg.k, prepared.items())));
    }
    if seeds.is_empty() {
        return Err(Error::Config("no runs".into()));
    }
    let steps = checkpoints(cfg.n_steps);
    let one_run = |seed: &u64| -> Result<RunResult> {
        let mut policy = factory(SimRng::with_stream(*seed, POLICY_STREAM))?;
        let mut env_rng = SimRng::with_stream(*seed, ENV_STREAM);
        play(&prepared.environment, policy.as_mut(), cfg.k, &steps, &mut env_rng)
    };
    let results: Vec<RunResult> = match cfg.workers {
        Some(1) => seeds.iter().map(one_run).collect::<Result<_>>()?,
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| seeds.par_iter().map(one_run).collect::<Result<_>>())?,
        None => seeds.par_iter().map(one_run).collect::<Result<_>>()?,
    };

    let per_run_regret: Vec<Vec<f64>> = results.iter().map(|r| r.regret.clone()).collect();
    let per_run_reward: Vec<Vec<f64>> = results.iter().map(|r| r.reward.clone()).collect();
    let (mean_regret, stderr) = column_stats(&per_run_regret);
    let (mean_reward, reward_stderr) = column_stats(&per_run_reward);
    Ok(RegretTrace {
        per_run_final: per_run_regret.iter().map(|r| *r.last().unwrap()).collect(),
        per_run_final_reward: per_run_reward.iter().map(|r| *r.last().unwrap()).collect(),
        steps,
        mean_regret,
        stderr,
        mean_reward,
        reward_stderr,
        run_seeds: seeds.to_vec(),
        per_run_regret,
    })
}

/// Per-checkpoint mean and standard error across runs.
fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let runs = rows.len() as f64;
    let width = rows[0].len();
    let mut means = Vec::with_capacity(width);
    let mut errs = Vec::with_capacity(width);
    for i in 0..width {
        let mean = rows.iter().map(|r| r[i]).sum::<f64>() / runs;
        let err = if rows.len() > 1 {
            let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (runs - 1.0);
            (var / runs).sqrt()
        } else {
            0.0
        };
        means.push(mean);
        errs.push(err);
    }
    (means, errs)
}

pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<RegretTrace> {
    if cfg.algo == Algo::CascadeLinUcb && cfg.c.is_none() && !cfg.oracle_replay {
        log::info!("c not set; using c = {:.6} from the regret bound", cfg.lin_ucb_c()?);
    }
    run_with(cfg, prepared, &run_seeds(cfg), |rng| make_policy(cfg, prepared, rng))
}

/// Builds the environment and runs every run of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RegretTrace> {
    let prepared = prepare(cfg, None)?;
    run_prepared(cfg, &prepared)
}
