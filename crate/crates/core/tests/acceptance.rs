//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rolecast::corpus::{stratified_fold_indices, Gender, NameDictionary, Role, WordKind, WordList};
use rolecast::evalreport::{accuracy, cross_validate, per_role_metrics, ConfusionMatrix};
use rolecast::hybrid::{
    featurize_corpus, generate_synthetic_corpus, hybrid_to_json, train_hybrid_rows, FeatureGroup, GroupStrengths,
    HybridConfig, ImageInputs, SyntheticSpec,
};
use rolecast::learners::{best_split, ClassifierSpec, ForestParams, Matrix, Split, MIN_DECREASE};
use rolecast::namefeat::{dp_split_with_cost, name_score, segment_screen_name, Lexicon};
use rolecast::profilefeat::{description_first_person_score, tff_score};
use rolecast::tweetfeat::TweetWindow;

type Outcome = Result<String, String>;
/// Matrix, accuracy and (recall, precision) per role.
type MetricFixture = ([[u64; 3]; 3], f64, [(f64, f64); 3]);
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn formula_fidelity() -> Outcome {
    let dict = NameDictionary::from_rows([("john", Gender::Female, 445), ("john", Gender::Male, 256166)]).unwrap();
    let john = name_score("john", &dict);
    check((john - -0.998).abs() <= 0.0005, format!("name_score(john) = {john}"))?;
    let tff = tff_score(0, 0);
    check(tff == 0.0, format!("tff_score(0, 0) = {tff}"))?;
    let first = WordList::new(WordKind::FirstPerson, ["i", "my", "me"]).unwrap();
    let brand = WordList::new(WordKind::BrandWord, ["official", "we"]).unwrap();
    let table = [
        ("I love my dog", 1.0),
        ("The official account", -1.0),
        ("I am the official voice", 0.0),
        ("Coffee and mountains", 0.0),
    ];
    for (desc, want) in table {
        let got = description_first_person_score(desc, &first, &brand);
        check(got == want, format!("fp_desc({desc:?}) = {got}, want {want}"))?;
    }
    Ok(format!("john {john:.4}, tff(0,0) {tff}, 4 description fixtures"))
}

fn segmentation_table() -> Outcome {
    let names = NameDictionary::from_rows([
        ("john", Gender::Male, 256166),
        ("john", Gender::Female, 445),
        ("clem", Gender::Male, 900),
        ("son", Gender::Male, 50),
        ("tom", Gender::Male, 5000),
        ("my", Gender::Female, 20),
    ])
    .unwrap();
    let lexicon = Lexicon::from_ranked(["on", "john", "clemson", "cl", "ems", "tommy"]);
    let a = segment_screen_name("clemsonjohn", &names, &lexicon);
    check(
        a.tokens == ["clemson", "john"],
        format!("clemsonjohn -> {:?}", a.tokens),
    )?;
    let b = segment_screen_name("123tommy", &names, &lexicon);
    check(b.tokens == ["tommy"], format!("123tommy -> {:?}", b.tokens))?;
    Ok(format!(
        "clemsonjohn -> {:?} ({:?}), 123tommy -> {:?} ({:?})",
        a.tokens, a.method, b.tokens, b.method
    ))
}

fn gini(counts: &[f64], total: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

/// Tries every feature and every midpoint between distinct values.
fn brute_force_split(rows: &[Vec<f64>], y: &[usize], n_classes: usize) -> Option<Split> {
    let n = rows.len() as f64;
    let mut total = vec![0.0; n_classes];
    for &c in y {
        total[c] += 1.0;
    }
    let parent = gini(&total, n);
    let mut best: Option<Split> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut left = vec![0.0; n_classes];
            let mut right = vec![0.0; n_classes];
            for (r, &c) in rows.iter().zip(y) {
                if r[f] <= t {
                    left[c] += 1.0;
                } else {
                    right[c] += 1.0;
                }
            }
            let nl: f64 = left.iter().sum();
            let nr: f64 = right.iter().sum();
            let d = parent - (nl / n) * gini(&left, nl) - (nr / n) * gini(&right, nr);
            if d > MIN_DECREASE && best.is_none_or(|b| d > b.decrease) {
                best = Some(Split {
                    feature: f,
                    threshold: t,
                    decrease: d,
                });
            }
        }
    }
    best
}

fn split_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut found = 0;
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=3);
        let k = rng.random_range(2..=3);
        // quarter-integer grid keeps midpoints exact
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0..6) as f64 / 4.0).collect())
            .collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let features: Vec<usize> = (0..d).collect();
        let got = best_split(&x, &y, k, &features).unwrap();
        let want = brute_force_split(&rows, &y, k);
        check(
            got == want,
            format!("case {case}: best_split {got:?}, brute force {want:?}"),
        )?;
        found += usize::from(got.is_some());
    }
    Ok(format!("200 instances agree exactly ({found} with a split)"))
}

/// Minimum cost over all 2^(n-1) segmentations.
fn brute_force_cost(s: &[char], lexicon: &Lexicon) -> f64 {
    let n = s.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut cost = 0.0;
        let mut start = 0;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let piece: String = s[start..end].iter().collect();
                cost += match lexicon.word_cost(&piece) {
                    Some(c) => c,
                    None if piece.chars().count() == 1 => lexicon.unknown_char_cost(),
                    None => f64::INFINITY,
                };
                start = end;
            }
        }
        best = best.min(cost);
    }
    best
}

fn dp_oracle() -> Outcome {
    let lexicon = Lexicon::from_ranked(["ab", "b", "abc", "ca", "bca"]);
    let alphabet = ['a', 'b', 'c', 'd'];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..500 {
        let len = rng.random_range(1..=10);
        let s: Vec<char> = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let text: String = s.iter().collect();
        let (tokens, cost) = dp_split_with_cost(&text, &lexicon);
        let want = brute_force_cost(&s, &lexicon);
        check(
            tokens.concat() == text,
            format!("case {case}: tokens {tokens:?} do not rebuild {text}"),
        )?;
        check(
            (cost - want).abs() <= 1e-9,
            format!("case {case} {text}: dp {cost}, brute force {want}"),
        )?;
    }
    Ok("500 strings match the exhaustive minimum".into())
}

fn cv_accuracy(
    spec: &SyntheticSpec,
    n_users: usize,
    seed: u64,
    config: &HybridConfig,
) -> rolecast::evalreport::CvReport {
    let s = generate_synthetic_corpus(spec, n_users, seed).unwrap();
    let images = ImageInputs {
        provider: &s.images,
        external: None,
    };
    cross_validate(&s.corpus, &s.resources, &images, config, 10).unwrap()
}

fn end_to_end() -> Outcome {
    let config = HybridConfig::default();
    let sep1 = cv_accuracy(&SyntheticSpec::with_separability(1.0), 300, 42, &config).accuracy;
    check(sep1 >= 0.95, format!("separability 1 accuracy {sep1:.3} < 0.95"))?;
    let accs: Vec<f64> = (0..10)
        .map(|seed| {
            let cfg = HybridConfig { seed, ..config.clone() };
            cv_accuracy(&SyntheticSpec::with_separability(0.0), 300, seed, &cfg).accuracy
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    check(
        (0.25..=0.42).contains(&mean),
        format!("separability 0 mean accuracy {mean:.3} outside [0.25, 0.42]"),
    )?;
    Ok(format!(
        "separability 1: {sep1:.3}; separability 0 mean over 10 seeds: {mean:.3}"
    ))
}

fn stacker_dominance() -> Outcome {
    let mut hybrid = Vec::new();
    let mut channels: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for seed in 0..10 {
        let cfg = HybridConfig {
            seed,
            ..HybridConfig::default()
        };
        let r = cv_accuracy(&SyntheticSpec::with_separability(0.6), 300, seed, &cfg);
        hybrid.push(r.accuracy);
        for c in &r.channel_accuracy {
            channels.entry(c.kind.to_string()).or_default().push(c.accuracy);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let h = mean(&hybrid);
    let mut parts = vec![format!("hybrid {h:.3}")];
    for (kind, accs) in &channels {
        let c = mean(accs);
        parts.push(format!("{kind} {c:.3}"));
        check(
            h >= c - 0.02,
            format!("hybrid {h:.3} below channel {kind} {c:.3} - 0.02"),
        )?;
    }
    Ok(parts.join(", "))
}

fn no_leakage() -> Outcome {
    let s = generate_synthetic_corpus(&SyntheticSpec::with_separability(0.7), 90, 5).unwrap();
    let images = ImageInputs {
        provider: &s.images,
        external: None,
    };
    let config = HybridConfig {
        classifier: ClassifierSpec::Forest(ForestParams {
            n_trees: 25,
            ..Default::default()
        }),
        k: 8,
        inner_folds: 3,
        ..HybridConfig::default()
    };
    let labels = s.corpus.labels().unwrap();
    let folds = stratified_fold_indices(&labels, 3, config.seed).unwrap();
    let feats = featurize_corpus(&s.corpus, &s.resources, TweetWindow::All, &images).unwrap();
    for fold in 0..3 {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != fold).collect();
        let mut corpus = s.corpus.clone();
        let mut mutated = labels.clone();
        for i in (0..labels.len()).filter(|&i| folds[i] == fold) {
            corpus.users[i].tweets = vec!["zebra xylophone quasar".into(); 4];
            mutated[i] = (labels[i] + 1) % 3;
            corpus.users[i].label = Role::from_index(mutated[i]);
        }
        let feats2 = featurize_corpus(&corpus, &s.resources, TweetWindow::All, &images).unwrap();
        let a = train_hybrid_rows(&feats, &labels, &train, &s.resources, &config).unwrap();
        let b = train_hybrid_rows(&feats2, &mutated, &train, &s.resources, &config).unwrap();
        check(
            a.featurizer.vocab == b.featurizer.vocab,
            format!("fold {fold}: vocabularies differ"),
        )?;
        check(
            hybrid_to_json(&a) == hybrid_to_json(&b),
            format!("fold {fold}: models differ"),
        )?;
    }
    Ok("3 folds: models and vocabularies bit-identical after mutating held-out users".into())
}

fn cm(rows: &[[u64; 3]]) -> ConfusionMatrix {
    ConfusionMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn close(a: f64, b: f64, what: &str) -> Result<(), String> {
    check((a - b).abs() <= 1e-12, format!("{what}: got {a}, want {b}"))
}

fn f1(p: f64, r: f64) -> f64 {
    2.0 * p * r / (p + r)
}

fn metric_fidelity() -> Outcome {
    let fixtures: [MetricFixture; 3] = [
        (
            [[8, 2, 0], [1, 9, 0], [0, 0, 10]],
            27.0 / 30.0,
            [(8.0 / 10.0, 8.0 / 9.0), (9.0 / 10.0, 9.0 / 11.0), (1.0, 1.0)],
        ),
        (
            [[5, 3, 2], [4, 4, 2], [1, 1, 8]],
            17.0 / 30.0,
            [
                (5.0 / 10.0, 5.0 / 10.0),
                (4.0 / 10.0, 4.0 / 8.0),
                (8.0 / 10.0, 8.0 / 12.0),
            ],
        ),
        (
            [[7, 0, 3], [2, 6, 0], [0, 5, 1]],
            14.0 / 24.0,
            [(7.0 / 10.0, 7.0 / 9.0), (6.0 / 8.0, 6.0 / 11.0), (1.0 / 6.0, 1.0 / 4.0)],
        ),
    ];
    for (i, (rows, acc, per_role)) in fixtures.iter().enumerate() {
        let m = cm(rows);
        close(accuracy(&m).unwrap(), *acc, &format!("matrix {i} accuracy"))?;
        let metrics = per_role_metrics(&m).unwrap();
        for (role, (r, p)) in Role::ALL.iter().zip(per_role) {
            let got = metrics[role];
            close(got.recall, *r, &format!("matrix {i} {role} recall"))?;
            close(got.precision, *p, &format!("matrix {i} {role} precision"))?;
            close(got.f1, f1(*p, *r), &format!("matrix {i} {role} F1"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let rows: Vec<Vec<u64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.random_range(0..20)).collect())
            .collect();
        let m = ConfusionMatrix::from_rows(rows).unwrap();
        if m.total() == 0 {
            continue;
        }
        for (role, x) in per_role_metrics(&m).unwrap() {
            let (lo, hi) = (x.precision.min(x.recall), x.precision.max(x.recall));
            let ok = x.f1 >= lo - 1e-12 && x.f1 <= hi + 1e-12 && x.f1 <= (x.precision + x.recall) / 2.0 + 1e-12;
            check(
                ok,
                format!(
                    "case {case} {role}: F1 {} outside bounds of P {} R {}",
                    x.f1, x.precision, x.recall
                ),
            )?;
        }
    }
    Ok("3 fixed matrices to 1e-12; F1 bounds on 1000 random matrices".into())
}

fn run_cli(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rolecast"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .env_remove("ROLECAST_RESOURCES")
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("rolecast {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = d.join("corpus");
    run_cli(
        &[
            "synth",
            "--out-dir",
            &s(&data),
            "--n-users",
            "120",
            "--separability",
            "0.7",
            "--seed",
            "9",
        ],
        "1",
    )?;
    let dataset = s(&data.join("users.jsonl"));
    let resources = s(&data.join("resources"));
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "8")] {
        let model = d.join(format!("model{run}.json"));
        let out = d.join(format!("eval{run}"));
        run_cli(
            &[
                "--resources",
                &resources,
                "train",
                &dataset,
                "--out",
                &s(&model),
                "--seed",
                "17",
            ],
            threads,
        )?;
        run_cli(
            &[
                "--resources",
                &resources,
                "evaluate",
                &dataset,
                "--out-dir",
                &s(&out),
                "--seed",
                "17",
            ],
            threads,
        )?;
        models.push(read(&model));
        reports.push((read(&out.join("report.json")), read(&out.join("report.md"))));
    }
    check(
        models.windows(2).all(|w| w[0] == w[1]),
        "model bytes differ between runs",
    )?;
    check(
        reports.windows(2).all(|w| w[0] == w[1]),
        "report bytes differ between runs",
    )?;
    Ok("train and evaluate byte-identical over 4 runs with 1, 1, 4 and 8 threads".into())
}

fn ablation_mechanics() -> Outcome {
    let spec = SyntheticSpec {
        strengths: GroupStrengths {
            name: 1.0,
            ..GroupStrengths::NONE
        },
        ..SyntheticSpec::with_separability(1.0)
    };
    let s = generate_synthetic_corpus(&spec, 300, 21).unwrap();
    let images = ImageInputs {
        provider: &s.images,
        external: None,
    };
    let config = HybridConfig::default();
    let full = cross_validate(&s.corpus, &s.resources, &images, &config, 10)
        .unwrap()
        .accuracy;
    let dropped = HybridConfig {
        drop: [FeatureGroup::BF1].into(),
        ..config
    };
    let without = cross_validate(&s.corpus, &s.resources, &images, &dropped, 10)
        .unwrap()
        .accuracy;
    check(
        full >= 0.9,
        format!("names-only corpus with all features only reaches {full:.3}"),
    )?;
    check(
        (0.25..=0.42).contains(&without),
        format!("accuracy without BF1 {without:.3} outside chance band [0.25, 0.42]"),
    )?;
    Ok(format!("all features {full:.3}, without BF1 {without:.3}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("formula fidelity", formula_fidelity, Some(Duration::from_secs(1))),
        (
            "screen-name segmentation table",
            segmentation_table,
            Some(Duration::from_secs(1)),
        ),
        ("split oracle", split_oracle, Some(Duration::from_secs(10))),
        ("word-split DP oracle", dp_oracle, Some(Duration::from_secs(10))),
        ("end-to-end synthetic", end_to_end, Some(Duration::from_secs(300))),
        ("stacker dominance", stacker_dominance, Some(Duration::from_secs(600))),
        ("no leakage", no_leakage, None),
        ("metric fidelity", metric_fidelity, None),
        ("determinism", determinism, None),
        ("ablation mechanics", ablation_mechanics, None),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(l)) if elapsed > *l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (r, _) => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name} ({elapsed:.2?}): {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
