use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use redrisk::cohort::{generate_synthetic_cohort, load_cohort, save_cohort, CohortDataset, CohortFormat};
use redrisk::config::{parse_and_validate_config, parse_list, Config, ModelKind};
use redrisk::eval::{run_to_dir, scores_to_csv, ModelArchive};
use redrisk::featurize::FeatureSet;
use redrisk::{Error, Result};

/// Multi-horizon risk prediction from patient event timelines.
#[derive(Debug, Parser)]
#[command(name = "redrisk", version, about, max_term_width = 100)]
struct Cli {
    /// Log filter for standard error (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "REDRISK_LOG", default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort file.
    Gen(GenArgs),
    /// Check a cohort file and/or a config file.
    Validate(ValidateArgs),
    /// Run the experiment protocol and write metrics, ROC points and models.
    Run(RunArgs),
    /// Score a cohort with a saved model archive.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output cohort file.
    #[arg(long)]
    out: PathBuf,
    /// Config whose [cohort.synthetic] section and experiment seed are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of patients.
    #[arg(long)]
    patients: Option<usize>,
    /// Planted signal strength in [0, 1].
    #[arg(long)]
    signal: Option<f64>,
    /// Number of duplicated informative channels.
    #[arg(long)]
    redundancy: Option<usize>,
    /// event-lines or cohort-archive.
    #[arg(long, default_value = "event-lines")]
    format: String,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).multiple(true).args(["data", "config"]))]
struct ValidateArgs {
    /// Cohort file to check.
    data: Option<PathBuf>,
    /// Cohort format; detected from the file when omitted.
    #[arg(long, requires = "data")]
    format: Option<String>,
    /// Config file to check.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file; all defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for metrics.csv, prevalence.csv, roc/, models.json and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated models: cart, lasso, rf, gbm, dnnd, clinician.
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated feature sets: fs1, fs2, fs3.
    #[arg(long)]
    feature_sets: Option<String>,
    /// Overrides experiment.repeats.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Model archive written by `run`.
    #[arg(long)]
    model: PathBuf,
    /// Cohort to score.
    #[arg(long)]
    data: PathBuf,
    /// Cohort format; detected from the file when omitted.
    #[arg(long)]
    format: Option<String>,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<(Config, Vec<u8>)> {
    match path {
        Some(p) => parse_and_validate_config(p),
        None => Ok((Config::default(), Vec::new())),
    }
}

fn load_data(path: &Path, format: Option<&str>) -> Result<CohortDataset> {
    let format = match format {
        Some(f) => f.parse()?,
        None => CohortFormat::detect(path)?,
    };
    load_cohort(path, format)
}

fn gen(a: GenArgs) -> Result<()> {
    let (cfg, _) = load_config(a.config.as_deref())?;
    let mut syn = cfg.cohort.synthetic;
    if let Some(n) = a.patients {
        syn.n_patients = n;
    }
    if let Some(s) = a.signal {
        syn.signal_strength = s;
    }
    if let Some(k) = a.redundancy {
        syn.redundancy_factor = k;
    }
    syn.validate()?;
    let format: CohortFormat = a.format.parse()?;
    let seed = a.seed.unwrap_or(cfg.experiment.seed);
    let ds = generate_synthetic_cohort(&syn, seed)?;
    save_cohort(&ds, &a.out, format)?;
    info!(
        "wrote {} patients, {} assessments to {}",
        ds.patients.len(),
        ds.n_assessments(),
        a.out.display()
    );
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    if let Some(p) = &a.config {
        parse_and_validate_config(p)?;
        info!("{}: config is valid", p.display());
    }
    if let Some(p) = &a.data {
        let ds = load_data(p, a.format.as_deref())?;
        let r = ds.validate()?;
        info!(
            "{}: {} patients, {} assessments, {} diagnoses, {} postcode changes",
            p.display(),
            r.patients,
            r.assessments,
            r.diagnoses,
            r.postcode_changes
        );
        for code in &r.flagged_codes {
            warn!("diagnosis code `{code}` does not look like ICD-10");
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let (mut cfg, bytes) = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.experiment.seed = s;
    }
    if let Some(m) = &a.models {
        cfg.experiment.models = parse_list::<ModelKind>(m)?;
    }
    if let Some(f) = &a.feature_sets {
        cfg.experiment.feature_sets = parse_list::<FeatureSet>(f)?;
    }
    if let Some(r) = a.repeats {
        cfg.experiment.repeats = r;
    }
    cfg.validate()?;
    let (manifest, report) = run_to_dir(&cfg, a.config.as_deref(), &bytes, &a.out_dir)?;
    info!(
        "{} metric rows written to {} (config sha256 {})",
        report.rows.len(),
        a.out_dir.join("metrics.csv").display(),
        manifest.config_sha256
    );
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let archive = ModelArchive::load(&a.model)?;
    let ds = load_data(&a.data, a.format.as_deref())?;
    ds.validate()?;
    let rows = archive.score(&ds)?;
    std::fs::write(&a.out, scores_to_csv(&rows)).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    info!("wrote {} scores to {}", rows.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Validate(a) => validate(a),
        Command::Run(a) => run(a),
        Command::Score(a) => score(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
