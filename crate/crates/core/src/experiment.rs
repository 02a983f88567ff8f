//! Seed batches: matched-seed policy comparison and one-parameter sweeps.
//!
//! Seed `k` of a batch is `base_seed + k`. Runs may execute on the rayon
//! pool; results are gathered in job order, so parallel and serial
//! execution return identical values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{PolicyKind, SimConfig};
use crate::energy::Constituent;
use crate::sim::{self, PacketCounts, SimError, SimResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("{policy} seed {seed}: {source}")]
    Sim {
        policy: &'static str,
        seed: u64,
        #[source]
        source: SimError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    SensingRadius,
    TxRadius,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SensingRadius => "sensing_radius",
            SweepParam::TxRadius => "tx_radius",
        }
    }

    pub fn apply(self, config: &mut SimConfig, value: f64) {
        match self {
            SweepParam::SensingRadius => config.deployment.sensing_radius = value,
            SweepParam::TxRadius => config.deployment.tx_radius = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: u32,
    pub seeds: u32,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSpec(m.to_string()));
        if !(self.min.is_finite() && self.max.is_finite()) || self.min <= 0.0 {
            return bad("min and max must be finite and positive");
        }
        if self.min >= self.max {
            return bad("min must be < max");
        }
        if self.steps < 2 {
            return bad("steps must be >= 2");
        }
        if self.seeds < 1 {
            return bad("seeds must be >= 1");
        }
        Ok(())
    }

    /// `min + k (max - min) / (steps - 1)` for `k = 0..steps`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n)
            .map(|k| {
                if k == n - 1 {
                    self.max
                } else {
                    self.min + k as f64 * (self.max - self.min) / (n - 1) as f64
                }
            })
            .collect()
    }
}

/// What a batch keeps from one run: the monitored node's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub lifetime: f64,
    pub censored: bool,
    pub counts: PacketCounts,
    /// Monitored-node ledger per constituent, in [`Constituent::ALL`] order.
    pub totals: [f64; 5],
}

impl RunSummary {
    pub fn from_result(r: &SimResult) -> Self {
        let ledger = r.monitored_ledger();
        RunSummary {
            seed: r.seed,
            lifetime: r.lifetime,
            censored: r.censored,
            counts: r.monitored_counts(),
            totals: Constituent::ALL.map(|c| ledger.constituent_total(c)),
        }
    }
}

fn run_batch(
    jobs: &[(PolicyKind, SimConfig, u64)],
    parallel: bool,
) -> Result<Vec<RunSummary>, ExperimentError> {
    let one = |(policy, cfg, seed): &(PolicyKind, SimConfig, u64)| {
        sim::run(cfg, *seed)
            .map(|r| RunSummary::from_result(&r))
            .map_err(|source| ExperimentError::Sim {
                policy: policy.name(),
                seed: *seed,
                source,
            })
    };
    let results: Vec<Result<RunSummary, ExperimentError>> = if parallel {
        jobs.par_iter().map(one).collect()
    } else {
        jobs.iter().map(one).collect()
    };
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRun {
    pub seed: u64,
    pub random: RunSummary,
    pub selective: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub mean_lifetime: f64,
    pub median_lifetime: f64,
    pub censored: usize,
}

impl PolicyStats {
    fn of(lifetimes: &[f64], censored: usize) -> Self {
        PolicyStats {
            mean_lifetime: mean(lifetimes),
            median_lifetime: median(lifetimes),
            censored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub pairs: Vec<PairedRun>,
    pub random: PolicyStats,
    pub selective: PolicyStats,
    /// Fraction of seeds where Selective outlives Random.
    pub selective_win_rate: f64,
    /// Fraction of seeds with b_Global(R) > b_Global(S).
    pub global_rate: f64,
    /// Fraction of seeds with b_Local(R) < b_Local(S).
    pub local_rate: f64,
    /// Fraction of seeds with b_Individual(R) < b_Individual(S).
    pub individual_rate: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Run both policies on seeds `base_seed..base_seed + n_seeds`.
pub fn compare_policies(config: &SimConfig, n_seeds: u32, parallel: bool) -> Result<CompareReport, ExperimentError> {
    if n_seeds < 1 {
        return Err(ExperimentError::InvalidSpec("seeds must be >= 1".into()));
    }
    let base = config.experiment.base_seed;
    let mut jobs = Vec::with_capacity(2 * n_seeds as usize);
    for k in 0..n_seeds as u64 {
        for policy in PolicyKind::ALL {
            jobs.push((policy, config.with_policy(policy), base + k));
        }
    }
    let runs = run_batch(&jobs, parallel)?;
    let pairs: Vec<PairedRun> = runs
        .chunks(2)
        .map(|c| PairedRun {
            seed: c[0].seed,
            random: c[0],
            selective: c[1],
        })
        .collect();
    let n = pairs.len() as f64;
    let rate = |f: &dyn Fn(&PairedRun) -> bool| pairs.iter().filter(|p| f(p)).count() as f64 / n;
    let stats = |pick: &dyn Fn(&PairedRun) -> &RunSummary| {
        let lifetimes: Vec<f64> = pairs.iter().map(|p| pick(p).lifetime).collect();
        PolicyStats::of(&lifetimes, pairs.iter().filter(|p| pick(p).censored).count())
    };
    Ok(CompareReport {
        random: stats(&|p| &p.random),
        selective: stats(&|p| &p.selective),
        selective_win_rate: rate(&|p| p.selective.lifetime > p.random.lifetime),
        global_rate: rate(&|p| p.random.counts.global > p.selective.counts.global),
        local_rate: rate(&|p| p.random.counts.local < p.selective.counts.local),
        individual_rate: rate(&|p| p.random.counts.individual < p.selective.counts.individual),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub param_value: f64,
    pub seed: u64,
    pub lifetime: f64,
    pub censored: bool,
    pub totals: [f64; 5],
    pub counts: PacketCounts,
}

impl SweepRow {
    pub fn total_j(&self) -> f64 {
        self.totals.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub policy: PolicyKind,
    pub param_value: f64,
    pub mean_lifetime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub spec: SweepSpec,
    pub policies: Vec<PolicyKind>,
    /// Sorted by (policy, param_value, seed).
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
    /// Grid index and value of the highest mean lifetime, per policy.
    pub argmax: Vec<(PolicyKind, usize, f64)>,
}

impl SweepOutcome {
    /// Whether `policy`'s argmax lies strictly inside the grid.
    pub fn argmax_interior(&self, policy: PolicyKind) -> bool {
        let last = self.spec.steps as usize - 1;
        self.argmax
            .iter()
            .any(|&(p, k, _)| p == policy && k > 0 && k < last)
    }
}

pub fn sweep(
    config: &SimConfig,
    spec: &SweepSpec,
    policies: &[PolicyKind],
    parallel: bool,
) -> Result<SweepOutcome, ExperimentError> {
    spec.validate()?;
    let mut policies = policies.to_vec();
    policies.sort();
    policies.dedup();
    let grid = spec.grid();
    let base = config.experiment.base_seed;
    let mut jobs = Vec::new();
    let mut keys = Vec::new();
    for &policy in &policies {
        for &value in &grid {
            let mut cfg = config.with_policy(policy);
            spec.param.apply(&mut cfg, value);
            for k in 0..spec.seeds as u64 {
                jobs.push((policy, cfg.clone(), base + k));
                keys.push((policy, value));
            }
        }
    }
    let runs = run_batch(&jobs, parallel)?;
    let mut rows: Vec<SweepRow> = keys
        .iter()
        .zip(&runs)
        .map(|(&(policy, param_value), r)| SweepRow {
            policy,
            param_value,
            seed: r.seed,
            lifetime: r.lifetime,
            censored: r.censored,
            totals: r.totals,
            counts: r.counts,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.policy
            .cmp(&b.policy)
            .then(a.param_value.total_cmp(&b.param_value))
            .then(a.seed.cmp(&b.seed))
    });
    let mut points = Vec::new();
    let mut argmax = Vec::new();
    for &policy in &policies {
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, &value) in grid.iter().enumerate() {
            let lifetimes: Vec<f64> = rows
                .iter()
                .filter(|r| r.policy == policy && r.param_value == value)
                .map(|r| r.lifetime)
                .collect();
            let m = mean(&lifetimes);
            points.push(SweepPoint {
                policy,
                param_value: value,
                mean_lifetime: m,
            });
            if best.is_none_or(|(_, _, bm)| m > bm) {
                best = Some((k, value, m));
            }
        }
        if let Some((k, v, _)) = best {
            argmax.push((policy, k, v));
        }
    }
    Ok(SweepOutcome {
        spec: *spec,
        policies,
        rows,
        points,
        argmax,
    })
}
