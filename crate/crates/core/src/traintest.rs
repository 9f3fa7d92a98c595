//! Train-and-test comparison of fitted models.
//!
//! Model `a` overfits model `b` on a run when it has the lower training
//! error and the higher test error. Error differences within the configured
//! tie tolerance count as equal, so nested models that land on the same
//! optimum do not produce verdicts from floating-point noise.

use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bell::{frequencies, DataTable};
use crate::error::{Error, Result};
use crate::fitting::{fit, loss, FitConfig, FitResult};
use crate::models::ModelSpec;
use crate::rng::{substream, TAG_SPLIT};
use crate::scenarios::{generate, ScenarioSpec};

/// Smallest number of seeds accepted by [`multi_seed_study`].
pub const MIN_STUDY_SEEDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub spec: ModelSpec,
    pub train_error: f64,
    pub test_error: f64,
    pub fitted_ns_delta: f64,
    pub fitted_chsh_max: f64,
    pub restarts_converged: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppt_min_eigenvalue: Option<f64>,
}

impl ModelOutcome {
    fn from_fit(r: &FitResult, test_error: f64) -> Self {
        ModelOutcome {
            spec: r.spec,
            train_error: r.train_error,
            test_error,
            fitted_ns_delta: r.fitted_ns_delta,
            fitted_chsh_max: r.fitted_chsh_max,
            restarts_converged: r.restarts_converged,
            ppt_min_eigenvalue: r.ppt_min_eigenvalue,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTestRun {
    pub train: DataTable,
    pub test: DataTable,
    /// One entry per requested model, in request order.
    pub results: Vec<ModelOutcome>,
    pub tie_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverfitVerdict {
    pub model_a: ModelSpec,
    pub model_b: ModelSpec,
    pub a_overfits_b: bool,
    /// `train_error(a) - train_error(b)`.
    pub train_gap: f64,
    /// `test_error(a) - test_error(b)`.
    pub test_gap: f64,
}

/// Fits every model on `train` and scores it on `test`.
pub fn run(models: &[ModelSpec], train: &DataTable, test: &DataTable, cfg: &FitConfig) -> Result<TrainTestRun> {
    let test_f = frequencies(test)?;
    let results = models
        .iter()
        .map(|spec| {
            let r = fit(spec, train, cfg)?;
            Ok(ModelOutcome::from_fit(&r, loss(&test_f, &r.fitted_behavior)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainTestRun {
        train: *train,
        test: *test,
        results,
        tie_tolerance: cfg.tie_tolerance,
    })
}

/// Verdict of `a` against `b` with the given tie tolerance.
pub fn verdict(a: &ModelOutcome, b: &ModelOutcome, tie_tolerance: f64) -> OverfitVerdict {
    let train_gap = a.train_error - b.train_error;
    let test_gap = a.test_error - b.test_error;
    OverfitVerdict {
        model_a: a.spec,
        model_b: b.spec,
        a_overfits_b: train_gap < -tie_tolerance && test_gap > tie_tolerance,
        train_gap,
        test_gap,
    }
}

/// Verdicts for every ordered pair of distinct positions in the run.
pub fn verdicts(run: &TrainTestRun) -> Vec<OverfitVerdict> {
    let r = &run.results;
    let mut out = Vec::new();
    for i in 0..r.len() {
        for j in 0..r.len() {
            if i != j {
                out.push(verdict(&r[i], &r[j], run.tie_tolerance));
            }
        }
    }
    out
}

/// Per-trial random assignment of an ingested table to train or test
/// (probability `train_fraction` for train).
pub fn split_table(table: &DataTable, train_fraction: f64, seed: u64) -> Result<(DataTable, DataTable)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid("train fraction", "must lie in [0, 1]"));
    }
    let mut train = [0u64; 16];
    let mut test = [0u64; 16];
    for (i, &n) in table.counts().iter().enumerate() {
        let mut rng = substream(seed, &[TAG_SPLIT, i as u64]);
        let k = Binomial::new(n, train_fraction)
            .map(|d| d.sample(&mut rng))
            .map_err(|e| Error::invalid("train fraction", alloc::format!("{e}")))?;
        train[i] = k;
        test[i] = n - k;
    }
    Ok((DataTable::new(train), DataTable::new(test)))
}

/// Outcome of one seed of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub outcomes: Vec<ModelOutcome>,
    pub verdicts: Vec<OverfitVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMedians {
    pub spec: ModelSpec,
    pub median_train_error: f64,
    pub median_test_error: f64,
    pub median_fitted_ns_delta: f64,
    pub median_fitted_chsh_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFraction {
    pub model_a: ModelSpec,
    pub model_b: ModelSpec,
    /// Seeds on which `a` overfits `b`.
    pub overfit_count: usize,
    pub overfit_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub models: Vec<ModelSpec>,
    pub scenario: ScenarioSpec,
    pub seeds: Vec<u64>,
    pub config: FitConfig,
    pub medians: Vec<ModelMedians>,
    pub pairs: Vec<PairFraction>,
}

impl StudySummary {
    pub fn medians_of(&self, spec: &ModelSpec) -> Option<&ModelMedians> {
        self.medians.iter().find(|m| m.spec == *spec)
    }

    /// Overfit fraction of `a` against `b` (first matching pair).
    pub fn fraction(&self, a: &ModelSpec, b: &ModelSpec) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| p.model_a == *a && p.model_b == *b)
            .map(|p| p.overfit_fraction)
    }
}

/// One seed of a study: generate the scenario's tables with that seed and
/// run the comparison.
pub fn study_seed(models: &[ModelSpec], scenario: &ScenarioSpec, seed: u64, cfg: &FitConfig) -> Result<SeedRecord> {
    let spec = ScenarioSpec {
        seed,
        ..scenario.clone()
    };
    let g = generate(&spec)?;
    let r = run(models, &g.train, &g.test, cfg)?;
    Ok(SeedRecord {
        seed,
        verdicts: verdicts(&r),
        outcomes: r.results,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates per-seed records (in the given order) into a summary.
pub fn summarize(
    models: &[ModelSpec],
    scenario: &ScenarioSpec,
    cfg: &FitConfig,
    records: &[SeedRecord],
) -> StudySummary {
    let column = |i: usize, f: fn(&ModelOutcome) -> f64| median(records.iter().map(|r| f(&r.outcomes[i])).collect());
    let medians = models
        .iter()
        .enumerate()
        .map(|(i, spec)| ModelMedians {
            spec: *spec,
            median_train_error: column(i, |o| o.train_error),
            median_test_error: column(i, |o| o.test_error),
            median_fitted_ns_delta: column(i, |o| o.fitted_ns_delta),
            median_fitted_chsh_max: column(i, |o| o.fitted_chsh_max),
        })
        .collect();
    let mut pairs = Vec::new();
    let mut k = 0;
    for i in 0..models.len() {
        for j in 0..models.len() {
            if i == j {
                continue;
            }
            let count = records.iter().filter(|r| r.verdicts[k].a_overfits_b).count();
            pairs.push(PairFraction {
                model_a: models[i],
                model_b: models[j],
                overfit_count: count,
                overfit_fraction: if records.is_empty() { 0.0 } else { count as f64 / records.len() as f64 },
            });
            k += 1;
        }
    }
    StudySummary {
        models: models.to_vec(),
        scenario: scenario.clone(),
        seeds: records.iter().map(|r| r.seed).collect(),
        config: cfg.clone(),
        medians,
        pairs,
    }
}

/// Runs [`study_seed`] for every seed and aggregates.
pub fn multi_seed_study(
    models: &[ModelSpec],
    scenario: &ScenarioSpec,
    seeds: &[u64],
    cfg: &FitConfig,
) -> Result<StudySummary> {
    check_seeds(seeds)?;
    let records = seeds
        .iter()
        .map(|&s| study_seed(models, scenario, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(models, scenario, cfg, &records))
}

pub fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.len() < MIN_STUDY_SEEDS {
        return Err(Error::TooFewSeeds {
            min: MIN_STUDY_SEEDS,
            got: seeds.len(),
        });
    }
    Ok(())
}
