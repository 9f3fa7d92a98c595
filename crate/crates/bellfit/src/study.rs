//! Multi-seed studies fanned out over a rayon pool.

use bellfit_core::scenarios::ground_truth;
use bellfit_core::traintest::{check_seeds, study_seed, summarize, SeedRecord};
use bellfit_core::{FitConfig, ModelSpec, ScenarioSpec, StudySummary};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Parses a seed list such as `0..49`, `3,5,8` or `0..=9,100`.
///
/// Ranges are inclusive at both ends.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let bad = |part: &str| CliError::Config(format!("seeds: cannot parse '{part}'"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((lo, hi)) => {
                let hi = hi.strip_prefix('=').unwrap_or(hi);
                let lo: u64 = lo.trim().parse().map_err(|_| bad(part))?;
                let hi: u64 = hi.trim().parse().map_err(|_| bad(part))?;
                if hi < lo {
                    return Err(bad(part));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("seeds: list contains duplicates".into()));
    }
    Ok(seeds)
}

/// Checks everything that can be rejected before any fit runs.
pub fn validate_inputs(models: &[ModelSpec], scenario: &ScenarioSpec, cfg: &FitConfig) -> CliResult<()> {
    if models.is_empty() {
        return Err(CliError::Config("models: list is empty".into()));
    }
    for m in models {
        m.validate().map_err(|e| CliError::config("model", e))?;
    }
    scenario.validate().map_err(|e| CliError::config("scenario", e))?;
    ground_truth(scenario).map_err(|e| CliError::config("scenario", e))?;
    cfg.validate().map_err(|e| CliError::config("fit config", e))
}

/// Runs one train-and-test comparison per seed on `jobs` worker threads
/// (0 picks the number of CPUs). Records come back in seed order, so the
/// summary does not depend on scheduling.
pub fn run_study(
    models: &[ModelSpec],
    scenario: &ScenarioSpec,
    seeds: &[u64],
    cfg: &FitConfig,
    jobs: usize,
) -> CliResult<(StudySummary, Vec<SeedRecord>)> {
    check_seeds(seeds).map_err(|e| CliError::config("seeds", e))?;
    validate_inputs(models, scenario, cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config("jobs", e))?;
    let records = pool
        .install(|| {
            seeds
                .par_iter()
                .map(|&seed| study_seed(models, scenario, seed, cfg))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(CliError::Fit)?;
    Ok((summarize(models, scenario, cfg, &records), records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellfit_core::scenarios::ScenarioId;
    use bellfit_core::traintest::multi_seed_study;
    use bellfit_core::ModelClass;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..49").unwrap().len(), 50);
        assert_eq!(parse_seeds("0..=2, 7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("1,x").is_err());
        assert!(parse_seeds("1,1").is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let models = [ModelSpec::new(ModelClass::Ccc), ModelSpec::new(ModelClass::Csd0)];
        let scenario = ScenarioSpec {
            trials_per_setting: 300,
            ..ScenarioSpec::new(ScenarioId::Dephased)
        };
        let cfg = FitConfig {
            restarts: 2,
            ..FitConfig::default()
        };
        let seeds: Vec<u64> = (0..12).collect();
        let (par, records) = run_study(&models, &scenario, &seeds, &cfg, 4).unwrap();
        assert_eq!(records.len(), 12);
        assert_eq!(par, multi_seed_study(&models, &scenario, &seeds, &cfg).unwrap());
    }

    #[test]
    fn too_few_seeds_is_a_config_error() {
        let r = run_study(&[ModelSpec::new(ModelClass::Ccc)], &ScenarioSpec::new(ScenarioId::Dephased), &[1, 2], &FitConfig::default(), 1);
        assert!(matches!(r, Err(CliError::Config(_))));
    }
}
