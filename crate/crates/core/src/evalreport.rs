//! Confusion matrices, per-role metrics, cross-validated runs and report
//! rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_fold_indices, Role, UserCorpus};
use crate::error::{Error, Result};
use crate::hybrid::{
    featurize_corpus, train_hybrid_rows, ChannelKind, FeatureGroup, HybridConfig, ImageInputs, Resources, UserFeatures,
};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_rows(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix must be square and non-empty"));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                found: other.n_classes(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

/// Recall, precision and F1 for one class. A zero denominator gives 0 and
/// sets `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Metrics for each class index.
pub fn class_metrics(cm: &ConfusionMatrix) -> Vec<RoleMetrics> {
    (0..cm.n_classes())
        .map(|i| {
            let diag = cm.get(i, i);
            let (recall, dr) = ratio(diag, cm.row_sum(i));
            let (precision, dp) = ratio(diag, cm.col_sum(i));
            let (f1, df) = if recall + precision == 0.0 {
                (0.0, true)
            } else {
                (2.0 * recall * precision / (recall + precision), false)
            };
            RoleMetrics {
                recall,
                precision,
                f1,
                degenerate: dr || dp || df,
            }
        })
        .collect()
}

/// Metrics keyed by role; class `i` is `Role::from_index(i)`.
pub fn per_role_metrics(cm: &ConfusionMatrix) -> Result<BTreeMap<Role, RoleMetrics>> {
    if cm.n_classes() > Role::ALL.len() {
        return Err(Error::invalid(format!(
            "{} classes exceed the role set",
            cm.n_classes()
        )));
    }
    Ok(class_metrics(cm)
        .into_iter()
        .enumerate()
        .map(|(i, m)| (Role::ALL[i], m))
        .collect())
}

/// Trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("accuracy of an empty confusion matrix"));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAccuracy {
    pub kind: ChannelKind,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub channel_accuracy: Vec<ChannelAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRow {
    pub role: Role,
    #[serde(flatten)]
    pub metrics: RoleMetrics,
}

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    /// Row label, e.g. `All Features` or `Without BF1 (name)`.
    pub label: String,
    pub config: HybridConfig,
    pub n_folds: usize,
    pub roles: Vec<Role>,
    pub folds: Vec<FoldResult>,
    /// Sum of the fold matrices; the headline metrics come from here.
    pub pooled: ConfusionMatrix,
    pub metrics: Vec<RoleRow>,
    pub accuracy: f64,
    /// Unweighted mean of the fold accuracies.
    pub mean_fold_accuracy: f64,
    /// Accuracy of each channel's own argmax, pooled over folds.
    pub channel_accuracy: Vec<ChannelAccuracy>,
    /// Users whose prediction relied on imputed image data.
    pub flagged_users: usize,
}

/// `All Features`, or `Without ...` listing the dropped groups.
pub fn ablation_label(drop: &BTreeSet<FeatureGroup>) -> String {
    if drop.is_empty() {
        "All Features".to_string()
    } else {
        let parts: Vec<String> = drop.iter().map(|g| g.label()).collect();
        format!("Without {}", parts.join(", "))
    }
}

struct FoldOutcome {
    result: FoldResult,
    channel_hits: Vec<(ChannelKind, usize)>,
    flagged: usize,
}

/// Cross-validation over precomputed features.
pub fn cross_validate_features(
    feats: &[UserFeatures],
    labels: &[usize],
    resources: &Resources,
    config: &HybridConfig,
    n_folds: usize,
) -> Result<CvReport> {
    config.validate()?;
    let folds = stratified_fold_indices(labels, n_folds, config.seed)?;
    let n_classes = config.mode.n_classes();
    let outcomes: Vec<FoldOutcome> = (0..n_folds)
        .into_par_iter()
        .map(|fold| {
            let wrap = |e: Error| Error::Fold {
                fold,
                source: Box::new(e),
            };
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] == fold);
            let model = train_hybrid_rows(feats, labels, &train, resources, config).map_err(wrap)?;
            let mut cm = ConfusionMatrix::new(n_classes);
            let kinds: Vec<ChannelKind> = model.channels.iter().map(|c| c.kind).collect();
            let mut hits = vec![0usize; kinds.len()];
            let mut flagged = 0;
            for &i in &test {
                let p = model.predict_features(&feats[i]).map_err(wrap)?;
                cm.record(labels[i], p.role.index());
                for (h, c) in hits.iter_mut().zip(&p.channels) {
                    *h += usize::from(c.probs.argmax() == labels[i]);
                }
                flagged += usize::from(p.flagged);
            }
            let n_test = test.len();
            Ok(FoldOutcome {
                result: FoldResult {
                    fold,
                    n_test,
                    accuracy: accuracy(&cm).map_err(wrap)?,
                    channel_accuracy: kinds
                        .iter()
                        .zip(&hits)
                        .map(|(&kind, &h)| ChannelAccuracy {
                            kind,
                            accuracy: h as f64 / n_test as f64,
                        })
                        .collect(),
                    confusion: cm,
                },
                channel_hits: kinds.into_iter().zip(hits).collect(),
                flagged,
            })
        })
        .collect::<Result<_>>()?;

    let mut pooled = ConfusionMatrix::new(n_classes);
    let mut channel_hits: Vec<(ChannelKind, usize)> = Vec::new();
    let mut flagged_users = 0;
    for o in &outcomes {
        pooled.add(&o.result.confusion)?;
        flagged_users += o.flagged;
        if channel_hits.is_empty() {
            channel_hits = o.channel_hits.iter().map(|&(k, _)| (k, 0)).collect();
        }
        for (acc, &(_, h)) in channel_hits.iter_mut().zip(&o.channel_hits) {
            acc.1 += h;
        }
    }
    let total = labels.len() as f64;
    let roles = config.mode.roles().to_vec();
    let metrics = class_metrics(&pooled)
        .into_iter()
        .zip(&roles)
        .map(|(metrics, &role)| RoleRow { role, metrics })
        .collect();
    let folds: Vec<FoldResult> = outcomes.into_iter().map(|o| o.result).collect();
    Ok(CvReport {
        schema_version: REPORT_VERSION,
        label: ablation_label(&config.drop),
        config: config.clone(),
        n_folds,
        roles,
        accuracy: accuracy(&pooled)?,
        mean_fold_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / n_folds as f64,
        folds,
        pooled,
        metrics,
        channel_accuracy: channel_hits
            .into_iter()
            .map(|(kind, h)| ChannelAccuracy {
                kind,
                accuracy: h as f64 / total,
            })
            .collect(),
        flagged_users,
    })
}

/// Stratified `n_folds`-fold cross-validation of the hybrid model.
pub fn cross_validate(
    corpus: &UserCorpus,
    resources: &Resources,
    images: &ImageInputs,
    config: &HybridConfig,
    n_folds: usize,
) -> Result<CvReport> {
    config.validate()?;
    let labels = corpus.labels()?;
    let feats = featurize_corpus(corpus, resources, config.window, images)?;
    cross_validate_features(&feats, &labels, resources, config, n_folds)
}

/// Cross-validation with the given feature groups removed (added to any
/// already dropped by `config`).
pub fn ablation_run(
    corpus: &UserCorpus,
    resources: &Resources,
    images: &ImageInputs,
    config: &HybridConfig,
    drop: &BTreeSet<FeatureGroup>,
    n_folds: usize,
) -> Result<CvReport> {
    let mut config = config.clone();
    config.drop.extend(drop.iter().copied());
    cross_validate(corpus, resources, images, &config, n_folds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Format(format!(
                "unknown report format `{other}` (expected json|markdown)"
            ))),
        }
    }
}

fn cell(v: f64, degenerate: bool) -> String {
    if degenerate {
        format!("{v:.3}*")
    } else {
        format!("{v:.3}")
    }
}

fn markdown(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## {}\n", report.label);
    out.push_str("| Role | R | P | F1 |\n|---|---|---|---|\n");
    for row in &report.metrics {
        let m = &row.metrics;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            row.role.title(),
            cell(m.recall, m.degenerate),
            cell(m.precision, m.degenerate),
            cell(m.f1, m.degenerate)
        );
    }
    let _ = writeln!(
        out,
        "\nAcc: {:.3} (pooled over {} folds; mean fold accuracy {:.3})",
        report.accuracy, report.n_folds, report.mean_fold_accuracy
    );
    if !report.channel_accuracy.is_empty() {
        out.push_str("\n| Channel | Acc |\n|---|---|\n");
        for c in &report.channel_accuracy {
            let _ = writeln!(out, "| {} | {:.3} |", c.kind, c.accuracy);
        }
    }
    if report.metrics.iter().any(|r| r.metrics.degenerate) {
        out.push_str("\n\\* a zero denominator was reported as 0\n");
    }
    out
}

pub fn render_report(report: &CvReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("reports always serialize") + "\n",
        ReportFormat::Markdown => markdown(report),
    }
}

pub fn report_from_json(text: &str) -> Result<CvReport> {
    let report: CvReport = serde_json::from_str(text)?;
    if report.schema_version != REPORT_VERSION {
        return Err(Error::Format(format!(
            "unsupported report schema version {}",
            report.schema_version
        )));
    }
    Ok(report)
}

/// One row per report with per-role R/P/F1 and accuracy, in the layout of a
/// classifier or ablation comparison table. Reports must share a role set.
pub fn render_comparison(reports: &[CvReport]) -> Result<String> {
    let Some(first) = reports.first() else {
        return Err(Error::invalid("no reports to compare"));
    };
    if reports.iter().any(|r| r.roles != first.roles) {
        return Err(Error::invalid("reports cover different role sets"));
    }
    let mut out = String::from("| Configuration |");
    let mut rule = String::from("|---|");
    for role in &first.roles {
        for m in ["R", "P", "F1"] {
            let _ = write!(out, " {} {m} |", role.title());
            rule.push_str("---|");
        }
    }
    out.push_str(" Acc |\n");
    rule.push_str("---|\n");
    out.push_str(&rule);
    for r in reports {
        let _ = write!(out, "| {} |", r.label);
        for row in &r.metrics {
            let m = &row.metrics;
            let _ = write!(out, " {:.3} | {:.3} | {:.3} |", m.recall, m.precision, m.f1);
        }
        let _ = writeln!(out, " {:.3} |", r.accuracy);
    }
    Ok(out)
}
