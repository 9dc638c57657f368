//! Configuration-driven experiment runner: batches of independent trials,
//! delay statistics, failure fractions against selected bounds, and
//! machine-readable CSV/JSON emission.
//!
//! Determinism contract: `(config, master_seed)` fixes every output byte.
//! Trials derive their streams as `mix_seed(master_seed, trial_index)` and
//! aggregation is order-independent, so the worker count (the
//! `LINESIM_WORKERS` environment variable) affects speed only.

use crate::bounds::{self, BoundQuery, BoundValue, CcpParams, GrowthFn, Regime};
use crate::simnet::{self, NetworkConfig, TrialResult};
use crate::stats::{mean, quantile_sorted, wilson_interval};
use crate::traffic;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment needs at least one trial")]
    NoTrials,
    #[error("epsilon {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("confidence {0} outside (0, 1)")]
    BadConfidence(f64),
    #[error("ccp regime selected but the code has no precode")]
    MissingPrecode,
    #[error("failure fraction needs a nonempty sample")]
    EmptySamples,
    #[error(transparent)]
    Sim(#[from] simnet::SimError),
    #[error(transparent)]
    Bound(#[from] bounds::BoundError),
    #[error(transparent)]
    Traffic(#[from] traffic::TrafficError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One experiment: a network, the bound regimes to judge it against, and the
/// sampling budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub regimes: Vec<Regime>,
    pub trials: u64,
    pub master_seed: u64,
    /// Target failure probability the bounds are evaluated at.
    pub epsilon: f64,
    /// Confidence level for empirical intervals.
    pub confidence: f64,
    /// Horizon-stretch constant for CCP bound queries.
    pub gamma_c: Option<f64>,
    pub growth: GrowthFn,
    pub omega_multiplier: f64,
}

impl ExperimentConfig {
    pub fn new(network: NetworkConfig, regimes: Vec<Regime>, trials: u64, seed: u64) -> Self {
        Self {
            network,
            regimes,
            trials,
            master_seed: seed,
            epsilon: 0.05,
            confidence: 0.95,
            gamma_c: None,
            growth: GrowthFn::Log2K,
            omega_multiplier: 1.0,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::NoTrials);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ExperimentError::BadEpsilon(self.epsilon));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ExperimentError::BadConfidence(self.confidence));
        }
        self.network.validate()?;
        Ok(())
    }

    /// Bound query for one regime, derived from the network under test.
    pub fn bound_query(&self, regime: Regime) -> Result<BoundQuery, ExperimentError> {
        let eq = traffic::equivalent_min_param(&self.network.traffic)?;
        let code = &self.network.code;
        let mut query = BoundQuery::new(
            regime,
            code.k as u64,
            self.network.links() as u64,
            code.q as u64,
            self.epsilon,
            eq.p,
        );
        query.growth = self.growth;
        query.omega_multiplier = self.omega_multiplier;
        if let Some(g) = eq.gamma_e {
            query = query.with_gamma_e(g);
        }
        if regime.is_ccp() {
            let pc = code.precode.as_ref().ok_or(ExperimentError::MissingPrecode)?;
            query = query.with_ccp(CcpParams {
                gamma_a: pc.gamma_a,
                gamma_b: pc.gamma_b,
                gamma_c: self.gamma_c.unwrap_or(0.1),
            });
        }
        Ok(query)
    }
}

/// Per-regime verdict row (the CSV row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub regime: Regime,
    pub k: u64,
    pub l: u64,
    pub q: u64,
    pub alpha: u64,
    pub epsilon: f64,
    pub bound: f64,
    pub mean_delay: f64,
    pub p50: f64,
    pub p95: f64,
    pub fail_frac: f64,
    pub fail_ci_lo: f64,
    pub fail_ci_hi: f64,
    pub censored: u64,
    pub trials: u64,
    pub seed: u64,
    #[serde(skip)]
    pub constraints_ok: bool,
    #[serde(skip)]
    pub violated: Vec<String>,
    #[serde(skip)]
    pub asymptotic_note: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub rows: Vec<RegimeRow>,
    pub config_hash: String,
    pub master_seed: u64,
    pub trials: u64,
    pub censored: u64,
    /// Uncensored delays, sorted ascending.
    pub delays_sorted: Vec<f64>,
}

impl ExperimentSummary {
    pub fn any_constraint_violated(&self) -> bool {
        self.rows.iter().any(|r| !r.constraints_ok)
    }
}

/// Fraction of samples strictly above the threshold, with a two-sided
/// Wilson interval.
pub fn failure_fraction(
    samples: &[f64],
    threshold: f64,
    confidence: f64,
) -> Result<(f64, (f64, f64)), ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::EmptySamples);
    }
    let failures = samples.iter().filter(|&&d| d > threshold).count() as u64;
    let n = samples.len() as u64;
    Ok((
        failures as f64 / n as f64,
        wilson_interval(failures, n, confidence),
    ))
}

fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Runs all trials (in parallel when available) and judges each selected
/// regime. Censored trials always count as failures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    cfg.validate()?;
    let results = run_trials(&cfg.network, cfg.master_seed, cfg.trials)?;
    summarize(cfg, &results)
}

/// Trial batch with per-index derived seeds; order of the returned vector is
/// by trial index regardless of scheduling.
pub fn run_trials(
    network: &NetworkConfig,
    master_seed: u64,
    trials: u64,
) -> Result<Vec<TrialResult>, ExperimentError> {
    let worker_override = std::env::var("LINESIM_WORKERS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let run = || -> Result<Vec<TrialResult>, ExperimentError> {
        (0..trials)
            .into_par_iter()
            .map(|i| simnet::run_trial_seeded(network, master_seed, i).map_err(Into::into))
            .collect()
    };
    match worker_override {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(run),
        None => run(),
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    results: &[TrialResult],
) -> Result<ExperimentSummary, ExperimentError> {
    let mut delays_sorted: Vec<f64> = results
        .iter()
        .filter_map(|r| r.coding_delay)
        .collect();
    delays_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    let censored = results.len() as u64 - delays_sorted.len() as u64;
    let n = results.len() as u64;

    let (mean_delay, p50, p95) = if delays_sorted.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            mean(&delays_sorted),
            quantile_sorted(&delays_sorted, 0.50),
            quantile_sorted(&delays_sorted, 0.95),
        )
    };

    let mut rows = Vec::with_capacity(cfg.regimes.len());
    for &regime in &cfg.regimes {
        let query = cfg.bound_query(regime)?;
        let BoundValue {
            value: bound,
            constraints_ok,
            violated,
            asymptotic_note,
            ..
        } = bounds::evaluate(&query)?;
        // censored trials exceed any bound below the horizon by assumption
        let failures = results
            .iter()
            .filter(|r| r.coding_delay.is_none_or(|d| d > bound))
            .count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(failures, n, cfg.confidence);
        rows.push(RegimeRow {
            regime,
            k: cfg.network.code.k as u64,
            l: cfg.network.links() as u64,
            q: cfg.network.code.q as u64,
            alpha: cfg.network.code.alpha() as u64,
            epsilon: cfg.epsilon,
            bound,
            mean_delay,
            p50,
            p95,
            fail_frac: failures as f64 / n as f64,
            fail_ci_lo: ci_lo,
            fail_ci_hi: ci_hi,
            censored,
            trials: n,
            seed: cfg.master_seed,
            constraints_ok,
            violated,
            asymptotic_note,
        });
    }

    Ok(ExperimentSummary {
        rows,
        config_hash: config_hash(cfg),
        master_seed: cfg.master_seed,
        trials: n,
        censored,
        delays_sorted,
    })
}

pub const CSV_HEADER: &str =
    "regime,k,L,q,alpha,epsilon,bound,mean_delay,p50,p95,fail_frac,fail_ci_lo,fail_ci_hi,censored,trials,seed";

fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.6}")
    }
}

pub fn to_csv(rows: &[RegimeRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.regime.name(),
            r.k,
            r.l,
            r.q,
            r.alpha,
            format_float(r.epsilon),
            format_float(r.bound),
            format_float(r.mean_delay),
            format_float(r.p50),
            format_float(r.p95),
            format_float(r.fail_frac),
            format_float(r.fail_ci_lo),
            format_float(r.fail_ci_hi),
            r.censored,
            r.trials,
            r.seed,
        ));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct JsonPayload {
    config_hash: String,
    master_seed: u64,
    rows: Vec<RegimeRow>,
}

pub fn to_json(summary: &ExperimentSummary) -> String {
    let payload = JsonPayload {
        config_hash: summary.config_hash.clone(),
        master_seed: summary.master_seed,
        rows: summary.rows.clone(),
    };
    let mut s = serde_json::to_string_pretty(&payload).expect("rows serialize");
    s.push('\n');
    s
}

/// Writes the summary in the requested format; CSV ends with a trailing
/// newline and both formats are UTF-8.
pub fn emit(
    summary: &ExperimentSummary,
    format: OutputFormat,
    path: &Path,
) -> Result<(), ExperimentError> {
    let body = match format {
        OutputFormat::Csv => to_csv(&summary.rows),
        OutputFormat::Json => to_json(summary),
    };
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(body.as_bytes())?;
        f.flush()
    };
    write().map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Cartesian sweep over message size, link count, and chunk count. The base
/// network's per-link parameters are cycled to the requested length. Results
/// are concatenated in deterministic grid order (k-major, then L, then q).
pub fn run_sweep(
    base: &ExperimentConfig,
    ks: &[usize],
    ls: &[usize],
    qs: &[usize],
) -> Result<Vec<ExperimentSummary>, ExperimentError> {
    let mut out = Vec::new();
    for &k in ks {
        for &l in ls {
            for &q in qs {
                let mut cfg = base.clone();
                cfg.network.code.k = k;
                cfg.network.code.q = q;
                cfg.network.traffic = resize_traffic(&base.network.traffic, l)?;
                out.push(run_experiment(&cfg)?);
            }
        }
    }
    Ok(out)
}

fn resize_traffic(
    base: &traffic::TrafficSpec,
    links: usize,
) -> Result<traffic::TrafficSpec, ExperimentError> {
    let cycle = |xs: &[f64]| -> Vec<f64> { (0..links).map(|i| xs[i % xs.len()]).collect() };
    let spec = traffic::TrafficSpec {
        kind: base.kind,
        p: cycle(&base.p),
        lambda: base.lambda.as_ref().map(|l| cycle(l)),
    };
    spec.validate()?;
    Ok(spec)
}
