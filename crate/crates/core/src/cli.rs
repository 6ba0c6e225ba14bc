//! Command-line front end: `validate`, `fit`, `eval` and `synth`.
//!
//! Exit codes: 0 success, 1 data or model error, 2 usage error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::{parse_dataset, serialize_dataset, split_labelled, Dataset, Domain, SplitSpec, SymptomVocabulary};
use crate::error::Error;
use crate::evaluation::{run_experiment, ExperimentSpec};
use crate::hierarchy::Shape;
use crate::manifest::{sha256_hex, RunManifest};
use crate::predictor::{fit_two_stage, ModelFile};
use crate::synth::{generate, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hierda", version, about = "Population-aware hierarchical domain adaptation for infection prediction")]
pub struct Cli {
    /// Model configuration JSON; unknown keys are rejected.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the seed (split seed for fit, seed list start for eval, generator seed for synth).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for `eval`.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse datasets against a vocabulary and report problems.
    Validate(DataArgs),
    /// Fit the two-stage model for one target dataset.
    Fit(FitArgs),
    /// Run an experiment grid and write result tables.
    Eval(EvalArgs),
    /// Generate synthetic datasets and their ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Symptom vocabulary (JSON array or one name per line). Optional when an index supplies one.
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Datasets: a `datasets.json` index, or `DOMAIN:PATH` with the file stem as dataset id.
    #[arg(required = true, value_name = "DATA")]
    pub data: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Target dataset id (overrides the config).
    #[arg(long)]
    pub target: Option<String>,
    /// Divergence weight (overrides the config).
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Experiment grid JSON.
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator settings JSON; the built-in benchmark when omitted.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failure(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Fit(a) => cmd_fit(cli, a).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Synth(a) => cmd_synth(cli, a).map(|_| EXIT_OK),
    }
}

/// Dataset index written by `synth`; paths are relative to the index file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub vocab: String,
    pub datasets: Vec<IndexEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub dataset_id: String,
    pub domain: Domain,
    pub path: String,
}

struct Source {
    label: String,
    dataset_id: String,
    domain: Domain,
    text: String,
}

struct Inputs {
    vocab: SymptomVocabulary,
    sources: Vec<Source>,
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    manifest.record_input(path.display().to_string(), &bytes);
    String::from_utf8(bytes).map_err(|_| CliError::Failure(Error::validation(format!("{} is not UTF-8", path.display()))))
}

fn load_inputs(args: &DataArgs, manifest: &mut RunManifest) -> CliResult<Inputs> {
    let mut vocab_text = match &args.vocab {
        Some(p) => Some(read_input(p, manifest)?),
        None => None,
    };
    let mut sources = Vec::new();
    for item in &args.data {
        if item.ends_with(".json") {
            let index_path = Path::new(item);
            let index: DatasetIndex = serde_json::from_str(&read_input(index_path, manifest)?)
                .map_err(|e| CliError::Usage(format!("bad dataset index {item}: {e}")))?;
            let dir = index_path.parent().unwrap_or(Path::new(""));
            if vocab_text.is_none() {
                vocab_text = Some(read_input(&dir.join(&index.vocab), manifest)?);
            }
            for entry in index.datasets {
                let path = dir.join(&entry.path);
                sources.push(Source {
                    label: path.display().to_string(),
                    text: read_input(&path, manifest)?,
                    dataset_id: entry.dataset_id,
                    domain: entry.domain,
                });
            }
        } else {
            let (domain, path) = item
                .split_once(':')
                .and_then(|(d, p)| Some((Domain::parse(d)?, p)))
                .ok_or_else(|| CliError::Usage(format!("`{item}`: expected DOMAIN:PATH or an index .json")))?;
            let path = Path::new(path);
            let dataset_id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::Usage(format!("`{item}`: no file name")))?
                .to_string();
            sources.push(Source {
                label: path.display().to_string(),
                text: read_input(path, manifest)?,
                dataset_id,
                domain,
            });
        }
    }
    let vocab_text = vocab_text.ok_or_else(|| CliError::Usage("no vocabulary: pass --vocab or an index".into()))?;
    let vocab = SymptomVocabulary::from_text(&vocab_text)?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &sources {
        if !seen.insert(s.dataset_id.as_str()) {
            return Err(CliError::Usage(format!("dataset id `{}` given twice", s.dataset_id)));
        }
    }
    Ok(Inputs { vocab, sources })
}

fn parse_all(inputs: &Inputs) -> CliResult<Vec<Dataset>> {
    inputs
        .sources
        .iter()
        .map(|s| {
            parse_dataset(&s.text, &inputs.vocab, &s.dataset_id, s.domain)
                .map(|p| p.dataset)
                .map_err(|e| CliError::Failure(Error::validation(format!("{}: {e}", s.label))))
        })
        .collect()
}

/// The effective starting config plus the raw file (for the manifest), if one was given.
fn load_config(cli: &Cli) -> CliResult<(ModelConfig, Option<(String, Vec<u8>)>)> {
    let Some(path) = &cli.config else {
        return Ok((ModelConfig::default(), None));
    };
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Usage(format!("{} is not UTF-8", path.display())))?;
    let config = ModelConfig::from_json(text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((config, Some((path.display().to_string(), bytes))))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> CliResult<String> {
    fs::create_dir_all(dir).map_err(|e| CliError::Failure(e.into()))?;
    fs::write(dir.join(name), contents).map_err(|e| CliError::Failure(e.into()))?;
    Ok(sha256_hex(contents.as_bytes()))
}

#[derive(Debug, Serialize)]
struct FileReport {
    path: String,
    dataset_id: String,
    rows: usize,
    warnings: Vec<String>,
    errors: Vec<String>,
}

fn cmd_validate(args: &DataArgs) -> CliResult<i32> {
    let mut manifest = RunManifest::new("validate", &serde_json::Value::Null, 0)?;
    let inputs = load_inputs(args, &mut manifest)?;
    let reports: Vec<FileReport> = inputs
        .sources
        .iter()
        .map(|s| {
            let parsed = parse_dataset(&s.text, &inputs.vocab, &s.dataset_id, s.domain);
            let (rows, warnings, errors) = match parsed {
                Ok(p) => (p.dataset.len(), p.warnings, vec![]),
                Err(e) => (0, vec![], vec![format!("{}: {e}", s.label)]),
            };
            FileReport {
                path: s.label.clone(),
                dataset_id: s.dataset_id.clone(),
                rows,
                warnings,
                errors,
            }
        })
        .collect();
    let failed = reports.iter().any(|r| !r.errors.is_empty());
    let report = serde_json::to_string_pretty(&serde_json::json!({ "ok": !failed, "files": reports }))
        .map_err(|e| CliError::Failure(e.into()))?;
    // A closed pipe (e.g. `| head`) is not an error of the command.
    let _ = writeln!(std::io::stdout().lock(), "{report}");
    Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> CliResult<()> {
    let (mut config, config_file) = load_config(cli)?;
    if let Some(b) = args.beta {
        config.beta = b;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = &args.target {
        config.target_dataset_id = Some(t.clone());
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut manifest = RunManifest::new("fit", &config, config.seed)?;
    if let Some((p, bytes)) = config_file {
        manifest.record_input(p, &bytes);
    }
    let inputs = load_inputs(&args.data, &mut manifest)?;
    let target = config
        .target_dataset_id
        .clone()
        .ok_or_else(|| CliError::Usage("no target: pass --target or set target_dataset_id".into()))?;
    if !inputs.sources.iter().any(|s| s.dataset_id == target) {
        return Err(CliError::Usage(format!("target `{target}` not among the datasets")));
    }
    let datasets = parse_all(&inputs)?;
    let (target_ds, sources): (Vec<Dataset>, Vec<Dataset>) =
        datasets.into_iter().partition(|d| d.dataset_id == target);
    let split = SplitSpec::new(config.proportion_labelled, config.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let (labelled, _) = split_labelled(&target_ds[0], &split)?;
    let (_, model) = fit_two_stage(&sources, &labelled, &inputs.vocab, &config, Shape::PopulationAware)?;

    let fitted_json = model.fitted.to_json()? + "\n";
    let fitted_sha = write_out(&cli.out, "fitted.json", &fitted_json)?;
    let model_file = ModelFile::new(&model, "fitted.json", &fitted_sha);
    let model_json = serde_json::to_string_pretty(&model_file).map_err(|e| CliError::Failure(e.into()))? + "\n";
    write_out(&cli.out, "model.json", &model_json)?;
    write_out(&cli.out, "manifest.json", &manifest.to_json()?)?;
    if !model.fitted.converged {
        eprintln!(
            "warning: stage one stopped after {} iterations without meeting the tolerance",
            model.fitted.iterations
        );
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> CliResult<i32> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.spec.display())))?;
    let mut spec = ExperimentSpec::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.spec.display())))?;
    let (config, config_file) = load_config(cli)?;
    if config_file.is_some() {
        spec.config = config;
    }
    if let Some(start) = cli.seed {
        let n = spec.seeds.len() as u64;
        spec.seeds = (start..start + n).collect();
    }
    let seed = spec.seeds[0];
    let mut manifest = RunManifest::new("eval", &spec, seed)?;
    manifest.record_input(args.spec.display().to_string(), text.as_bytes());
    if let Some((p, bytes)) = config_file {
        manifest.record_input(p, &bytes);
    }
    let inputs = load_inputs(&args.data, &mut manifest)?;
    for t in &spec.targets {
        if !inputs.sources.iter().any(|s| &s.dataset_id == t) {
            return Err(CliError::Usage(format!("target `{t}` not among the datasets")));
        }
    }
    let datasets = parse_all(&inputs)?;
    let table = run_experiment(&spec, &datasets, &inputs.vocab, cli.jobs)?;

    write_out(&cli.out, "results.csv", &table.results_csv())?;
    write_out(&cli.out, "aggregates.csv", &table.aggregates_csv())?;
    if spec.proportions.len() == 1 {
        write_out(&cli.out, "table1.md", &table.method_grid_markdown(spec.proportions[0]))?;
    } else {
        write_out(&cli.out, "table2.md", &table.proportion_grid_markdown())?;
    }
    write_out(&cli.out, "manifest.json", &manifest.to_json()?)?;
    let errors = table.error_count();
    if errors > 0 {
        eprintln!("{errors} of {} cells failed; see results.csv", table.rows.len());
    }
    Ok(if errors == table.rows.len() { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_synth(cli: &Cli, args: &SynthArgs) -> CliResult<()> {
    let mut manifest_inputs = Vec::new();
    let mut spec = match &args.spec {
        None => SynthSpec::benchmark(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            manifest_inputs.push((p.display().to_string(), text.clone()));
            SynthSpec::from_json(&text)?
        }
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let mut manifest = RunManifest::new("synth", &spec, spec.seed)?;
    for (p, t) in manifest_inputs {
        manifest.record_input(p, t.as_bytes());
    }
    let (datasets, truth) = generate(&spec)?;
    let vocab = spec.vocabulary()?;
    let mut entries = Vec::new();
    for d in &datasets {
        let name = format!("{}.csv", d.dataset_id);
        write_out(&cli.out, &name, &serialize_dataset(d, &vocab)?)?;
        entries.push(IndexEntry {
            dataset_id: d.dataset_id.clone(),
            domain: d.domain,
            path: name,
        });
    }
    write_out(&cli.out, "vocab.txt", &(vocab.names().join("\n") + "\n"))?;
    write_out(&cli.out, "truth.json", &(truth.to_json() + "\n"))?;
    let index = DatasetIndex {
        vocab: "vocab.txt".into(),
        datasets: entries,
    };
    let index_json = serde_json::to_string_pretty(&index).map_err(|e| CliError::Failure(e.into()))? + "\n";
    write_out(&cli.out, "datasets.json", &index_json)?;
    write_out(&cli.out, "manifest.json", &manifest.to_json()?)?;
    Ok(())
}
