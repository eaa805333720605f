use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rebalance_core::classifier::{train_classifier, Classifier, ClassifierConfig};
use rebalance_core::dataset::EmbeddingDataset;
use rebalance_core::experiment::{self, make_synthetic_benchmark, ClusterClass, ClusterSpec, ProjectionMethod, SweepSpec};
use rebalance_core::io::{load_dataset, save_dataset, Format, FormatError};
use rebalance_core::resample::{self, Method, ResamplerConfig};

use crate::error::{CliError, EXIT_PARTIAL};
use crate::{BalanceArgs, BenchmarkArgs, EvaluateArgs, InspectArgs, ProjectArgs, SweepArgs, TrainArgs};

fn format_for(path: &Path, explicit: Option<&str>) -> Result<Format, CliError> {
    match explicit {
        None => Ok(Format::from_path(path)),
        Some("binary") => Ok(Format::Binary),
        Some("csv") => Ok(Format::Csv),
        Some(other) => Err(CliError::usage(format!("unknown format `{other}`, expected binary or csv"))),
    }
}

fn load(path: &Path) -> Result<EmbeddingDataset, CliError> {
    Ok(load_dataset(path, Format::from_path(path))?)
}

fn save(dataset: &EmbeddingDataset, path: &Path) -> Result<(), CliError> {
    Ok(save_dataset(dataset, path, Format::from_path(path))?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_path_buf(), source }.into())
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::from(FormatError::Io { path: path.to_path_buf(), source }))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Writes `value` into `root` at `path`, creating intermediate objects.
fn set(root: &mut Value, path: &[&str], value: Value) {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node.as_object_mut().unwrap().entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    node.as_object_mut().unwrap().insert(path[path.len() - 1].to_string(), value);
}

fn resolve<T: for<'de> Deserialize<'de>>(merged: Value, what: &str) -> Result<T, CliError> {
    serde_json::from_value(merged).map_err(|e| CliError::config(format!("{what}: {e}")))
}

/// Prints the fully resolved configuration to stderr.
fn announce(command: &str, config: &impl Serialize) {
    eprintln!("config: {}", serde_json::json!({ "command": command, "settings": config }));
}

pub fn inspect(args: &InspectArgs) -> Result<(), CliError> {
    let format = format_for(&args.path, args.format.as_deref())?;
    announce("inspect", &serde_json::json!({ "path": args.path, "format": format_name(format) }));
    let ds = load_dataset(&args.path, format)?;
    let synthetic = ds.synthetic_count();
    println!("n: {}", ds.len());
    println!("d: {}", ds.dim());
    println!("class_count: {}", ds.class_count());
    for (label, count) in ds.class_histogram() {
        println!("class {label}: {count}");
    }
    println!("origin real: {}", ds.len() - synthetic);
    println!("origin synthetic: {synthetic}");
    Ok(())
}

fn format_name(format: Format) -> &'static str {
    match format {
        Format::Binary => "binary",
        Format::Csv => "csv",
    }
}

pub fn balance(args: &BalanceArgs) -> Result<(), CliError> {
    let mut merged = match &args.config {
        Some(path) => read_json(path)?,
        None => Value::Object(Default::default()),
    };
    if let Some(m) = &args.method {
        if Method::parse(m).is_none() {
            return Err(CliError::usage(format!("unknown method `{m}`, expected one of smote, borderline, adasyn, ros, vae")));
        }
        set(&mut merged, &["method"], Value::from(m.as_str()));
    }
    if let Some(k) = args.k {
        set(&mut merged, &["k"], Value::from(k));
    }
    if let Some(seed) = args.seed {
        set(&mut merged, &["seed"], Value::from(seed));
    }
    if merged.get("method").is_none() {
        return Err(CliError::usage("--method is required unless the config sets it"));
    }
    let config: ResamplerConfig = resolve(merged, "resampler config")?;
    announce("balance", &serde_json::json!({
        "resampler": config,
        "in": args.input,
        "out": args.out,
        "provenance": args.provenance,
        "fallback": args.fallback,
    }));

    let ds = load(&args.input)?;
    let out = if args.fallback { resample::balance_with_fallback(&ds, &config)? } else { resample::balance(&ds, &config)? };
    save(&out.dataset, &args.out)?;
    if let Some(path) = &args.provenance {
        write_text(path, &serde_json::to_string_pretty(&out.provenance).expect("provenance serializes"))?;
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut merged = match &args.config {
        Some(path) => read_json(path)?,
        None => Value::Object(Default::default()),
    };
    if let Some(v) = args.hidden {
        set(&mut merged, &["hidden_units"], Value::from(v));
    }
    if args.standardize {
        set(&mut merged, &["standardize"], Value::from(true));
    }
    if let Some(v) = args.seed {
        set(&mut merged, &["train", "seed"], Value::from(v));
    }
    if let Some(v) = args.epochs {
        set(&mut merged, &["train", "max_epochs"], Value::from(v));
    }
    if let Some(v) = args.learning_rate {
        set(&mut merged, &["train", "learning_rate"], Value::from(v));
    }
    if let Some(v) = args.batch_size {
        set(&mut merged, &["train", "batch_size"], Value::from(v));
    }
    if let Some(v) = args.patience {
        set(&mut merged, &["train", "early_stop_patience"], Value::from(v));
    }
    let config: ClassifierConfig = resolve(merged, "classifier config")?;
    announce("train", &serde_json::json!({ "classifier": config, "in": args.input, "valid": args.valid, "model_out": args.model_out }));

    let train = load(&args.input)?;
    let valid = args.valid.as_deref().map(load).transpose()?;
    if let Some(v) = &valid {
        if v.dim() != train.dim() || v.class_count() != train.class_count() {
            return Err(CliError::precondition("validation set shape differs from the training set"));
        }
    }
    let (model, history) = train_classifier(&train, valid.as_ref(), &config)?;
    model.save(&args.model_out)?;
    let summary = serde_json::json!({
        "epochs_run": history.train_loss.len(),
        "best_epoch": history.best_epoch,
        "final_train_loss": history.train_loss.last(),
        "best_valid_loss": history.valid_loss.get(history.best_epoch),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    announce("evaluate", &serde_json::json!({ "model": args.model, "in": args.input }));
    let model = Classifier::load(&args.model)?;
    let test = load(&args.input)?;
    let metrics = experiment::evaluate(&model, &test)?;
    println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    Ok(())
}

#[derive(Deserialize)]
struct SweepFile {
    dataset: Option<PathBuf>,
    #[serde(flatten)]
    spec: Value,
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file: SweepFile = resolve(read_json(&args.config)?, "sweep config")?;
    let mut merged = file.spec;
    if let Some(seed) = args.seed {
        set(&mut merged, &["seed"], Value::from(seed));
    }
    let spec: SweepSpec = resolve(merged, "sweep config")?;
    let dataset_path = match (&args.input, file.dataset) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => resolve_relative(&args.config, p),
        (None, None) => return Err(CliError::usage("no dataset: pass --in or set `dataset` in the config")),
    };
    announce("sweep", &serde_json::json!({ "spec": spec, "dataset": dataset_path, "out_report": args.out_report, "jobs": args.jobs }));

    let ds = load(&dataset_path)?;
    let report = experiment::run_sweep(&ds, &spec, args.jobs)?;
    write_text(&args.out_report, &report.to_json())?;
    let failed = report.failed_cells();
    if failed > 0 {
        return Err(CliError::new("sweep", EXIT_PARTIAL, format!("{failed} of {} cells failed; report written", report.cells.len())));
    }
    Ok(())
}

fn resolve_relative(config: &Path, dataset: PathBuf) -> PathBuf {
    if dataset.is_absolute() {
        return dataset;
    }
    config.parent().map(|dir| dir.join(&dataset)).unwrap_or(dataset)
}

pub fn project(args: &ProjectArgs) -> Result<(), CliError> {
    announce("project", &serde_json::json!({ "method": ProjectionMethod::Pca, "in": args.input, "out": args.out }));
    let ds = load(&args.input)?;
    let projection = experiment::project_2d(&ds, ProjectionMethod::Pca)?;
    let csv = projection.to_csv();
    match &args.out {
        Some(path) => write_text(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

pub fn make_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(path) => resolve::<ClusterSpec>(read_json(path)?, "cluster spec")?,
        None => {
            if args.dim == 0 {
                return Err(CliError::usage("--dim must be positive"));
            }
            let classes = args
                .counts
                .iter()
                .enumerate()
                .map(|(c, &count)| {
                    let mut mean = vec![0.0; args.dim];
                    mean[0] = c as f64 * args.separation;
                    ClusterClass { mean, variance: args.variance, count }
                })
                .collect();
            ClusterSpec { classes, seed: 0 }
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    announce("make-benchmark", &serde_json::json!({ "spec": spec, "out": args.out }));
    let ds = make_synthetic_benchmark(&spec)?;
    save(&ds, &args.out)
}
