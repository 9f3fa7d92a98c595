//! The four subcommands. Each validates its inputs before doing any work,
//! writes its artifacts only after all computation has finished, and returns
//! a short human-readable summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bellfit_core::bell::{chsh_max, ns_delta, Behavior};
use bellfit_core::fitting::fit;
use bellfit_core::oracles::ppt_min_eigenvalue;
use bellfit_core::scenarios::{generate, truth_state};
use bellfit_core::traintest::{run, verdicts, OverfitVerdict, TrainTestRun};
use bellfit_core::{FitConfig, ModelSpec, ScenarioSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::report::{errors_csv, path_string, read_file, to_json, write_file, JsonArg, RunManifest, TOOL_VERSION};
use crate::study::{parse_seeds, run_study};
use crate::svg::error_chart;
use crate::table::{read_table, table_to_string};

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Globals {
    /// Overrides the scenario seed (`generate`) or the restart seed (other commands).
    pub seed: Option<u64>,
    /// Worker threads for studies; 0 means one per CPU.
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

impl Globals {
    fn out(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Config("--out is required".into()))
    }
}

/// Ground truth written by `generate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub scenario: ScenarioSpec,
    pub behavior: Behavior,
    pub chsh_max: f64,
    pub ns_delta: f64,
    /// Smallest eigenvalue of the partial transpose, for scenarios built from a state.
    pub ppt_min_eigenvalue: Option<f64>,
}

/// Output of `verdict`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub run: TrainTestRun,
    pub verdicts: Vec<OverfitVerdict>,
}

fn inputs(args: &[&JsonArg], extra: &[&Path]) -> Vec<String> {
    args.iter()
        .filter_map(|a| a.path.as_deref())
        .chain(extra.iter().copied())
        .map(path_string)
        .collect()
}

/// `fit.json` gets its manifest at `fit.manifest.json`.
fn sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn load_config(arg: Option<&str>, seed: Option<u64>) -> CliResult<(FitConfig, Option<JsonArg>)> {
    let loaded = arg.map(JsonArg::load).transpose()?;
    let mut cfg: FitConfig = match &loaded {
        Some(a) => a.parse("fit config")?,
        None => FitConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::config("fit config", e))?;
    Ok((cfg, loaded))
}

fn load_models(arg: &JsonArg) -> CliResult<Vec<ModelSpec>> {
    let models: Vec<ModelSpec> = arg.parse("models")?;
    if models.is_empty() {
        return Err(CliError::Config("models: list is empty".into()));
    }
    for m in &models {
        m.validate().map_err(|e| CliError::config("model", e))?;
    }
    Ok(models)
}

fn load_table(path: &Path) -> CliResult<bellfit_core::DataTable> {
    read_table(read_file(path)?.as_bytes())
}

pub fn cmd_generate(scenario: &str, g: &Globals) -> CliResult<String> {
    let out = g.out()?;
    let arg = JsonArg::load(scenario)?;
    let mut spec: ScenarioSpec = arg.parse("scenario")?;
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| CliError::config("scenario", e))?;
    let data = generate(&spec).map_err(|e| CliError::config("scenario", e))?;
    let state = truth_state(&spec).map_err(|e| CliError::config("scenario", e))?;
    let truth = TruthRecord {
        scenario: spec.clone(),
        chsh_max: chsh_max(&data.truth),
        ns_delta: ns_delta(&data.truth),
        behavior: data.truth,
        ppt_min_eigenvalue: state.as_ref().map(ppt_min_eigenvalue),
    };

    let files = ["train.csv", "test.csv", "truth.json", "manifest.json"].map(|f| out.join(f));
    let manifest = RunManifest {
        command: "generate".into(),
        config: json!({ "scenario": spec }),
        input_paths: inputs(&[&arg], &[]),
        output_paths: files[..3].iter().map(|p| path_string(p)).collect(),
        seed: spec.seed,
        tool_version: TOOL_VERSION.into(),
    };
    write_file(&files[0], &table_to_string(&data.train))?;
    write_file(&files[1], &table_to_string(&data.test))?;
    write_file(&files[2], &to_json(&truth))?;
    write_file(&files[3], &to_json(&manifest))?;
    Ok(format!(
        "{}: chsh_max {:.6}, ns_delta {:.3e}, {} trials per setting -> {}",
        spec.id.name(),
        truth.chsh_max,
        truth.ns_delta,
        spec.trials_per_setting,
        out.display()
    ))
}

pub fn cmd_fit(model: &str, table: &Path, config: Option<&str>, g: &Globals) -> CliResult<String> {
    let out = g.out()?;
    let arg = JsonArg::load(model)?;
    let spec: ModelSpec = arg.parse("model")?;
    spec.validate().map_err(|e| CliError::config("model", e))?;
    let (cfg, cfg_arg) = load_config(config, g.seed)?;
    let data = load_table(table)?;
    let result = fit(&spec, &data, &cfg).map_err(CliError::Fit)?;

    let manifest_path = sidecar(out);
    let manifest = RunManifest {
        command: "fit".into(),
        config: json!({ "model": spec, "config": cfg }),
        input_paths: inputs(&[&arg], &[table]).into_iter().chain(cfg_arg.and_then(|a| a.path).map(|p| path_string(&p))).collect(),
        output_paths: vec![path_string(out)],
        seed: cfg.seed,
        tool_version: TOOL_VERSION.into(),
    };
    write_file(out, &to_json(&result))?;
    write_file(&manifest_path, &to_json(&manifest))?;
    let mut line = format!(
        "{}: train error {:.6e}, chsh_max {:.6}, ns_delta {:.3e}, {}/{} restarts converged",
        spec.label(),
        result.train_error,
        result.fitted_chsh_max,
        result.fitted_ns_delta,
        result.restarts_converged,
        cfg.restarts
    );
    if let Some(l) = result.ppt_min_eigenvalue {
        let _ = write!(line, ", ppt min eigenvalue {l:.3e}");
    }
    Ok(line)
}

pub fn cmd_study(models: &str, scenario: &str, seeds: &str, config: Option<&str>, g: &Globals) -> CliResult<String> {
    let out = g.out()?;
    let models_arg = JsonArg::load(models)?;
    let model_list = load_models(&models_arg)?;
    let scenario_arg = JsonArg::load(scenario)?;
    let spec: ScenarioSpec = scenario_arg.parse("scenario")?;
    let seed_list = parse_seeds(seeds)?;
    let (cfg, cfg_arg) = load_config(config, g.seed)?;
    let (summary, records) = run_study(&model_list, &spec, &seed_list, &cfg, g.jobs)?;

    let files = ["study.json", "errors.csv", "errors.svg", "manifest.json"].map(|f| out.join(f));
    let mut input_paths = inputs(&[&models_arg, &scenario_arg], &[]);
    input_paths.extend(cfg_arg.and_then(|a| a.path).map(|p| path_string(&p)));
    let manifest = RunManifest {
        command: "study".into(),
        config: json!({ "models": model_list, "scenario": spec, "seeds": seed_list, "config": cfg }),
        input_paths,
        output_paths: files[..3].iter().map(|p| path_string(p)).collect(),
        seed: cfg.seed,
        tool_version: TOOL_VERSION.into(),
    };
    let title = format!("{}, {} trials per setting, {} seeds", spec.id.name(), spec.trials_per_setting, seed_list.len());
    write_file(&files[0], &to_json(&summary))?;
    write_file(&files[1], &errors_csv(&records))?;
    write_file(&files[2], &error_chart(&title, &summary.medians, "manifest.json"))?;
    write_file(&files[3], &to_json(&manifest))?;

    let mut text = String::new();
    for m in &summary.medians {
        let _ = writeln!(
            text,
            "{:<12} median train {:.4e}  median test {:.4e}",
            m.spec.label(),
            m.median_train_error,
            m.median_test_error
        );
    }
    for p in &summary.pairs {
        let _ = writeln!(
            text,
            "{} overfits {}: {}/{} seeds",
            p.model_a.label(),
            p.model_b.label(),
            p.overfit_count,
            seed_list.len()
        );
    }
    Ok(text.trim_end().to_owned())
}

pub fn cmd_verdict(models: &str, train: &Path, test: &Path, config: Option<&str>, g: &Globals) -> CliResult<String> {
    let out = g.out()?;
    let models_arg = JsonArg::load(models)?;
    let model_list = load_models(&models_arg)?;
    let (cfg, cfg_arg) = load_config(config, g.seed)?;
    let train_table = load_table(train)?;
    let test_table = load_table(test)?;
    let result = run(&model_list, &train_table, &test_table, &cfg).map_err(CliError::Fit)?;
    let report = VerdictReport {
        verdicts: verdicts(&result),
        run: result,
    };

    let mut input_paths = inputs(&[&models_arg], &[train, test]);
    input_paths.extend(cfg_arg.and_then(|a| a.path).map(|p| path_string(&p)));
    let manifest = RunManifest {
        command: "verdict".into(),
        config: json!({ "models": model_list, "config": cfg }),
        input_paths,
        output_paths: vec![path_string(out)],
        seed: cfg.seed,
        tool_version: TOOL_VERSION.into(),
    };
    write_file(out, &to_json(&report))?;
    write_file(&sidecar(out), &to_json(&manifest))?;

    let mut text = String::new();
    for o in &report.run.results {
        let _ = writeln!(text, "{:<12} train {:.6e}  test {:.6e}", o.spec.label(), o.train_error, o.test_error);
    }
    for v in &report.verdicts {
        let _ = writeln!(
            text,
            "{} overfits {}: {} (train gap {:+.3e}, test gap {:+.3e})",
            v.model_a.label(),
            v.model_b.label(),
            if v.a_overfits_b { "yes" } else { "no" },
            v.train_gap,
            v.test_gap
        );
    }
    Ok(text.trim_end().to_owned())
}
