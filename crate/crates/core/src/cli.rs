//! The `rolecast` command-line interface.
//!
//! Exit codes: 0 on success, 1 when data fails to load or validate, 2 for
//! configuration and usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::corpus::{parse_dataset, ClassMode, LoadOptions, Role, UserCorpus};
use crate::error::Error;
use crate::evalreport::{
    ablation_run, accuracy, cross_validate, render_comparison, render_report, ConfusionMatrix, CvReport, ReportFormat,
};
use crate::hybrid::{
    featurize_corpus, generate_synthetic_corpus, hybrid_from_json, hybrid_to_json, train_hybrid, FeatureGroup,
    HybridConfig, ImageInputs, Resources, Stacking, SyntheticSpec, UserFeatures, BRIGHTNESS,
};
use crate::imagechannel::{load_external_probs, FsImages, ImageMode};
use crate::learners::{BoostParams, ClassifierKind, ClassifierSpec, ForestParams, ProbabilityVector};
use crate::tweetfeat::{build_ktop_vocabulary, ktop_scores_tokenized, TweetWindow};

#[derive(Debug, Parser)]
#[command(
    name = "rolecast",
    version,
    about = "Classify social-media users as male, female or brand"
)]
pub struct Cli {
    /// Directory holding the lexical resources (defaults to the built-in set).
    #[arg(long, global = true, env = "ROLECAST_RESOURCES")]
    pub resources: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset and report every problem found.
    Validate {
        dataset: PathBuf,
        #[arg(long)]
        require_labels: bool,
        /// Users with fewer tweets are skipped.
        #[arg(long, default_value_t = 1)]
        min_tweets: usize,
    },
    /// Write per-user BF and AF vectors as JSON lines.
    Featurize {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "all")]
        window: TweetWindow,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Train a hybrid model on a labeled dataset.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Stratified cross-validation with a JSON and a Markdown report.
    Evaluate {
        dataset: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Cross-validation with feature groups removed, one row per drop set.
    Ablate {
        dataset: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated groups to drop together; repeat for more rows.
        #[arg(long, required = true)]
        drop: Vec<String>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Predict roles with a saved model.
    Predict {
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// External image probabilities (user_id, p_male, p_female[, p_brand]).
        #[arg(long)]
        image_probs: Option<PathBuf>,
    },
    /// Per-role distribution of one feature with pairwise Welch t-tests.
    Analyze {
        dataset: PathBuf,
        #[arg(long)]
        feature: AnalyzedFeature,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        /// Also write the analysis as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic labeled corpus with images and resources.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        separability: f64,
        #[arg(long, default_value_t = 300)]
        n_users: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        missing_image_rate: f64,
        #[arg(long, default_value = "tri")]
        mode: ClassMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzedFeature {
    #[value(name = "fp_tweet")]
    FpTweet,
    Brightness,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "forest")]
    pub classifier: ClassifierKind,
    /// Trees per forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Boosting rounds.
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value = "all")]
    pub window: TweetWindow,
    #[arg(long, default_value = "fallback")]
    pub image_mode: ImageMode,
    #[arg(long)]
    pub image_probs: Option<PathBuf>,
    #[arg(long, default_value = "tri")]
    pub mode: ClassMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "oof")]
    pub stacking: Stacking,
    #[arg(long, default_value_t = 5)]
    pub inner_folds: usize,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<HybridConfig, CliError> {
        let mut classifier = ClassifierSpec::from(self.classifier);
        match (&mut classifier, self.trees, self.stages) {
            (ClassifierSpec::Forest(p), Some(n), None) => p.n_trees = n,
            (ClassifierSpec::AdaBoost(p), None, Some(n)) => p.n_stages = n,
            (_, None, None) => {}
            _ => {
                return Err(CliError::config(
                    "--trees applies to forest and --stages to adaboost only",
                ))
            }
        }
        if matches!(classifier, ClassifierSpec::Forest(ForestParams { n_trees: 0, .. }))
            || matches!(classifier, ClassifierSpec::AdaBoost(BoostParams { n_stages: 0 }))
        {
            return Err(CliError::config("--trees and --stages must be positive"));
        }
        if self.image_mode == ImageMode::External && self.image_probs.is_none() {
            return Err(CliError::config("--image-mode external needs --image-probs"));
        }
        let config = HybridConfig {
            classifier,
            k: self.k,
            window: self.window,
            image_mode: self.image_mode,
            mode: self.mode,
            seed: self.seed,
            stacking: self.stacking,
            inner_folds: self.inner_folds,
            drop: BTreeSet::new(),
        };
        config.validate().map_err(CliError::Config)?;
        Ok(config)
    }
}

/// A failure together with the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Data(Error),
    #[error("{0}")]
    Config(Error),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(Error::InvalidInput(msg.into()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

pub fn main() -> ExitCode {
    run_from(std::env::args_os())
}

/// Parses `args` (including the program name), runs the command and maps
/// the outcome to an exit code, printing errors to stderr.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_resources(dir: Option<&Path>) -> Result<Resources, CliError> {
    match dir {
        Some(dir) => Resources::load_dir(dir).map_err(CliError::Config),
        None => Resources::builtin().map_err(CliError::Config),
    }
}

fn load_corpus(path: &Path, require_labels: bool) -> Result<UserCorpus, CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let opts = LoadOptions {
        require_labels,
        ..LoadOptions::default()
    };
    let mut outcome = parse_dataset(&text, &path.display().to_string(), &opts);
    for id in &outcome.skipped {
        eprintln!("warning: skipped user `{id}` with too few tweets");
    }
    if !outcome.diagnostics.is_empty() {
        let n = outcome.diagnostics.len();
        for d in outcome.diagnostics.iter().skip(1) {
            eprintln!("{d}");
        }
        if n > 1 {
            eprintln!("{n} problems in {}", path.display());
        }
        return Err(CliError::Data(outcome.diagnostics.swap_remove(0)));
    }
    Ok(outcome.corpus)
}

fn image_base(dataset: &Path) -> PathBuf {
    dataset.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_probs(path: Option<&Path>) -> Result<Option<BTreeMap<String, ProbabilityVector>>, CliError> {
    path.map(load_external_probs).transpose().map_err(CliError::Data)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn parse_drop(spec: &str) -> Result<BTreeSet<FeatureGroup>, CliError> {
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(FeatureGroup::ALL);
        } else {
            out.insert(part.parse().map_err(CliError::Config)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::config(format!("empty drop set `{spec}`")));
    }
    Ok(out)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate {
            dataset,
            require_labels,
            min_tweets,
        } => {
            let text = fs::read_to_string(dataset).map_err(|e| Error::io(dataset, e))?;
            let opts = LoadOptions {
                require_labels: *require_labels,
                min_tweets: *min_tweets,
            };
            let mut outcome = parse_dataset(&text, &dataset.display().to_string(), &opts);
            for d in &outcome.diagnostics {
                eprintln!("{d}");
            }
            if !outcome.diagnostics.is_empty() {
                let n = outcome.diagnostics.len();
                eprintln!("{n} problem(s) found");
                return Err(CliError::Data(outcome.diagnostics.swap_remove(0)));
            }
            println!(
                "ok: {} users accepted, {} skipped",
                outcome.corpus.len(),
                outcome.skipped.len()
            );
            Ok(())
        }
        Command::Featurize {
            dataset,
            out,
            window,
            k,
        } => {
            let resources = load_resources(cli.resources.as_deref())?;
            let corpus = load_corpus(dataset, true)?;
            if *k == 0 {
                return Err(CliError::config("k must be >= 1"));
            }
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: None,
            };
            let feats = featurize_corpus(&corpus, &resources, *window, &images)?;
            let labels = corpus.labels()?;
            let vocab = build_ktop_vocabulary(
                labels.iter().zip(&feats).map(|(&l, f)| (Role::ALL[l], &f.tokens)),
                &Role::ALL,
                *k,
                &resources.stoplist,
            )?;
            let imputed = mean_brightness(&feats);
            #[derive(Serialize)]
            struct Row<'a> {
                user_id: &'a str,
                bf: [f64; 9],
                af: Vec<f64>,
                imputed_brightness: bool,
            }
            let mut text = String::new();
            for f in &feats {
                let (bf, flagged) = f.bf(imputed);
                let af = ktop_scores_tokenized(&f.tokens, &vocab)?.values;
                let row = Row {
                    user_id: &f.user_id,
                    bf: bf.0,
                    af,
                    imputed_brightness: flagged,
                };
                text.push_str(&serde_json::to_string(&row).map_err(Error::from)?);
                text.push('\n');
            }
            write(out, &text)?;
            let vocab_path = out.with_extension("vocab.txt");
            write(&vocab_path, &vocab.to_text())?;
            println!(
                "wrote {} rows to {} and vocabulary to {}",
                feats.len(),
                out.display(),
                vocab_path.display()
            );
            Ok(())
        }
        Command::Train { dataset, out, config } => {
            let cfg = config.to_config()?;
            let resources = load_resources(cli.resources.as_deref())?;
            let corpus = load_corpus(dataset, true)?;
            let probs = load_probs(config.image_probs.as_deref())?;
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: probs.as_ref(),
            };
            let model = train_hybrid(&corpus, &resources, &images, &cfg)?;
            write(out, &hybrid_to_json(&model))?;
            println!(
                "trained on {} users; channels: {}; final width {}",
                corpus.len(),
                model
                    .channels
                    .iter()
                    .map(|c| c.kind.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                model.final_width()
            );
            Ok(())
        }
        Command::Evaluate {
            dataset,
            out_dir,
            folds,
            config,
        } => {
            let cfg = config.to_config()?;
            check_folds(*folds)?;
            let resources = load_resources(cli.resources.as_deref())?;
            let corpus = load_corpus(dataset, true)?;
            let probs = load_probs(config.image_probs.as_deref())?;
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: probs.as_ref(),
            };
            let report = cross_validate(&corpus, &resources, &images, &cfg, *folds)?;
            write(
                &out_dir.join("report.json"),
                &render_report(&report, ReportFormat::Json),
            )?;
            let md = render_report(&report, ReportFormat::Markdown);
            write(&out_dir.join("report.md"), &md)?;
            print!("{md}");
            Ok(())
        }
        Command::Ablate {
            dataset,
            out_dir,
            drop,
            folds,
            config,
        } => {
            let cfg = config.to_config()?;
            check_folds(*folds)?;
            let drops = drop.iter().map(|d| parse_drop(d)).collect::<Result<Vec<_>, _>>()?;
            for d in &drops {
                let mut c = cfg.clone();
                c.drop = d.clone();
                c.validate().map_err(CliError::Config)?;
            }
            let resources = load_resources(cli.resources.as_deref())?;
            let corpus = load_corpus(dataset, true)?;
            let probs = load_probs(config.image_probs.as_deref())?;
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: probs.as_ref(),
            };
            let mut reports: Vec<CvReport> = vec![cross_validate(&corpus, &resources, &images, &cfg, *folds)?];
            for d in &drops {
                reports.push(ablation_run(&corpus, &resources, &images, &cfg, d, *folds)?);
            }
            let json = serde_json::to_string_pretty(&reports).map_err(Error::from)? + "\n";
            write(&out_dir.join("ablation.json"), &json)?;
            let table = render_comparison(&reports)?;
            write(&out_dir.join("ablation.md"), &table)?;
            print!("{table}");
            Ok(())
        }
        Command::Predict {
            dataset,
            model,
            out,
            image_probs,
        } => {
            let resources = load_resources(cli.resources.as_deref())?;
            let text = fs::read_to_string(model).map_err(|e| Error::io(model, e))?;
            let model = hybrid_from_json(&text, &resources)?;
            if model.config.image_mode == ImageMode::External && image_probs.is_none() {
                return Err(CliError::config(
                    "this model uses external image probabilities; pass --image-probs",
                ));
            }
            let corpus = load_corpus(dataset, false)?;
            let probs = load_probs(image_probs.as_deref())?;
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: probs.as_ref(),
            };
            let preds = model.predict_corpus(&corpus, &resources, &images)?;
            let mut text = String::new();
            for p in &preds {
                text.push_str(&serde_json::to_string(p).map_err(Error::from)?);
                text.push('\n');
            }
            write(out, &text)?;
            let flagged = preds.iter().filter(|p| p.flagged).count();
            println!(
                "wrote {} predictions to {} ({flagged} flagged)",
                preds.len(),
                out.display()
            );
            if corpus.users.iter().all(|u| u.label.is_some()) {
                let roles = model.roles();
                let mut cm = ConfusionMatrix::new(roles.len());
                for (u, p) in corpus.users.iter().zip(&preds) {
                    let truth = u.label.expect("checked above");
                    let t = roles.iter().position(|r| *r == truth).ok_or_else(|| {
                        Error::invalid(format!(
                            "user `{}` has role {truth}, which this model cannot predict",
                            u.user_id
                        ))
                    })?;
                    cm.record(t, p.role.index());
                }
                print!("{}", render_confusion(&cm, roles));
                println!("accuracy {:.3}", accuracy(&cm)?);
            }
            Ok(())
        }
        Command::Analyze {
            dataset,
            feature,
            bins,
            out,
        } => {
            if *bins == 0 {
                return Err(CliError::config("--bins must be positive"));
            }
            let resources = load_resources(cli.resources.as_deref())?;
            let corpus = load_corpus(dataset, true)?;
            let provider = FsImages::new(image_base(dataset));
            let images = ImageInputs {
                provider: &provider,
                external: None,
            };
            let feats = featurize_corpus(&corpus, &resources, TweetWindow::All, &images)?;
            let labels = corpus.labels()?;
            let mut values: BTreeMap<Role, Vec<f64>> = BTreeMap::new();
            for (f, &l) in feats.iter().zip(&labels) {
                let v = match feature {
                    AnalyzedFeature::FpTweet => Some(f.bf(0.0).0 .0[6]),
                    AnalyzedFeature::Brightness => f.image_stats.map(|_| f.bf(0.0).0 .0[BRIGHTNESS]),
                };
                if let Some(v) = v {
                    values.entry(Role::ALL[l]).or_default().push(v);
                }
            }
            let analysis = analyze(*feature, &values, *bins)?;
            print!("{}", render_analysis(&analysis));
            if let Some(out) = out {
                write(
                    out,
                    &(serde_json::to_string_pretty(&analysis).map_err(Error::from)? + "\n"),
                )?;
            }
            Ok(())
        }
        Command::Synth {
            out_dir,
            separability,
            n_users,
            seed,
            missing_image_rate,
            mode,
        } => {
            let spec = SyntheticSpec {
                missing_image_rate: *missing_image_rate,
                mode: *mode,
                ..SyntheticSpec::with_separability(*separability)
            };
            spec.validate().map_err(CliError::Config)?;
            let synth = generate_synthetic_corpus(&spec, *n_users, *seed).map_err(CliError::Config)?;
            synth.write_to(out_dir)?;
            println!("wrote {} users to {}", synth.corpus.len(), out_dir.display());
            Ok(())
        }
    }
}

fn check_folds(folds: usize) -> Result<(), CliError> {
    if folds < 2 {
        return Err(CliError::config(format!("--folds must be >= 2, got {folds}")));
    }
    Ok(())
}

fn mean_brightness(feats: &[UserFeatures]) -> f64 {
    let seen: Vec<f64> = feats.iter().filter_map(|f| f.image_stats.map(|s| s[0])).collect();
    if seen.is_empty() {
        0.0
    } else {
        seen.iter().sum::<f64>() / seen.len() as f64
    }
}

fn render_confusion(cm: &ConfusionMatrix, roles: &[Role]) -> String {
    let mut out = String::from("truth \\ predicted");
    for r in roles {
        let _ = write!(out, "\t{r}");
    }
    out.push('\n');
    for (i, r) in roles.iter().enumerate() {
        let _ = write!(out, "{r}");
        for j in 0..roles.len() {
            let _ = write!(out, "\t{}", cm.get(i, j));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleSummary {
    pub role: Role,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelchTest {
    pub a: Role,
    pub b: Role,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAnalysis {
    pub feature: AnalyzedFeature,
    pub range: (f64, f64),
    pub summaries: Vec<RoleSummary>,
    /// Counts per role over equal-width bins spanning `range`.
    pub histogram: BTreeMap<Role, Vec<u64>>,
    pub tests: Vec<WelchTest>,
}

fn summarize(role: Role, v: &[f64]) -> RoleSummary {
    let mut data = Data::new(v.to_vec());
    let sd = if v.len() > 1 { v.std_dev() } else { 0.0 };
    RoleSummary {
        role,
        n: v.len(),
        mean: v.mean(),
        sd,
        q1: data.lower_quartile(),
        median: data.median(),
        q3: data.upper_quartile(),
    }
}

/// Two-sided Welch t-test. `None` when either side has fewer than two values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (a.mean(), b.mean());
    let (va, vb) = (a.variance() / na, b.variance() / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Some(if ma == mb {
            (0.0, na + nb - 2.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, na + nb - 2.0, 0.0)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Some((t, df, p))
}

pub fn analyze(
    feature: AnalyzedFeature,
    values: &BTreeMap<Role, Vec<f64>>,
    bins: usize,
) -> Result<FeatureAnalysis, CliError> {
    let all: Vec<f64> = values.values().flatten().copied().collect();
    if all.is_empty() {
        return Err(CliError::Data(Error::invalid("no values to analyze")));
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let histogram = values
        .iter()
        .map(|(role, v)| {
            let mut counts = vec![0u64; bins];
            for x in v {
                let b = if width > 0.0 {
                    (((x - lo) / width) as usize).min(bins - 1)
                } else {
                    0
                };
                counts[b] += 1;
            }
            (*role, counts)
        })
        .collect();
    let summaries = values.iter().map(|(r, v)| summarize(*r, v)).collect();
    let roles: Vec<&Role> = values.keys().collect();
    let mut tests = Vec::new();
    for i in 0..roles.len() {
        for j in i + 1..roles.len() {
            if let Some((t, df, p_value)) = welch_t_test(&values[roles[i]], &values[roles[j]]) {
                tests.push(WelchTest {
                    a: *roles[i],
                    b: *roles[j],
                    t,
                    df,
                    p_value,
                });
            }
        }
    }
    Ok(FeatureAnalysis {
        feature,
        range: (lo, hi),
        summaries,
        histogram,
        tests,
    })
}

pub fn render_analysis(a: &FeatureAnalysis) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| Role | n | mean | sd | q1 | median | q3 |\n|---|---|---|---|---|---|---|"
    );
    for s in &a.summaries {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |",
            s.role.title(),
            s.n,
            s.mean,
            s.sd,
            s.q1,
            s.median,
            s.q3
        );
    }
    let _ = writeln!(out, "\nhistogram over [{:.4}, {:.4}]", a.range.0, a.range.1);
    for (role, counts) in &a.histogram {
        let cells: Vec<String> = counts.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{role}: {}", cells.join(" "));
    }
    if !a.tests.is_empty() {
        out.push_str("\n| Pair | t | df | p |\n|---|---|---|---|\n");
        for t in &a.tests {
            let _ = writeln!(
                out,
                "| {} vs {} | {:.3} | {:.1} | {:.3e} |",
                t.a, t.b, t.t, t.df, t.p_value
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_matches_hand_computation() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let (t, df, p) = welch_t_test(&a, &b).unwrap();
        // var a = 5/3, var b = 10; se^2 = 5/12 + 2
        let se2: f64 = 5.0 / 12.0 + 2.0;
        assert!((t - (2.5 - 6.0) / se2.sqrt()).abs() < 1e-12);
        let want_df = se2 * se2 / ((5.0f64 / 12.0).powi(2) / 3.0 + 4.0 / 4.0);
        assert!((df - want_df).abs() < 1e-9);
        // reference value from an independent Welch implementation
        assert!((p - 0.069_133_593_192_392_36).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn welch_zero_variance_edges() {
        assert_eq!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap().2, 1.0);
        let (t, _, p) = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(p, 0.0);
        assert!(t.is_infinite() && t < 0.0);
        assert!(welch_t_test(&[1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn histogram_puts_maximum_in_last_bin() {
        let values = BTreeMap::from([(Role::Male, vec![0.0, 0.5, 1.0]), (Role::Female, vec![1.0])]);
        let a = analyze(AnalyzedFeature::FpTweet, &values, 4).unwrap();
        assert_eq!(a.histogram[&Role::Male], vec![1, 0, 1, 1]);
        assert_eq!(a.histogram[&Role::Female], vec![0, 0, 0, 1]);
        assert_eq!(a.summaries[0].median, 0.5);
    }

    #[test]
    fn drop_parsing() {
        let d = parse_drop("bf1, af1").unwrap();
        assert_eq!(d, BTreeSet::from([FeatureGroup::BF1, FeatureGroup::AF1]));
        assert_eq!(parse_drop("all").unwrap().len(), FeatureGroup::ALL.len());
        assert!(matches!(parse_drop("bf9"), Err(CliError::Config(_))));
        assert!(matches!(parse_drop(" , "), Err(CliError::Config(_))));
    }

    #[test]
    fn config_flags_validate() {
        let cli = Cli::try_parse_from(["rolecast", "train", "d.jsonl", "--out", "m.json", "--trees", "7"]).unwrap();
        let Command::Train { config, .. } = &cli.command else {
            panic!()
        };
        let cfg = config.to_config().unwrap();
        assert!(matches!(
            cfg.classifier,
            ClassifierSpec::Forest(ForestParams { n_trees: 7, .. })
        ));
        let cli = Cli::try_parse_from([
            "rolecast",
            "train",
            "d.jsonl",
            "--out",
            "m.json",
            "--classifier",
            "tree",
            "--stages",
            "3",
        ])
        .unwrap();
        let Command::Train { config, .. } = &cli.command else {
            panic!()
        };
        assert_eq!(config.to_config().unwrap_err().exit_code(), 2);
        assert!(Cli::try_parse_from(["rolecast", "train", "d.jsonl", "--out", "m", "--window", "0"]).is_err());
    }
}
