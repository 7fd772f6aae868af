use sensekit::harness::{
    cross_validate, run_experiment, stratified_folds, CountSource, ExperimentConfig, FoldSource,
    TokenSource,
};
use sensekit::kernel::{build_gram, build_gram_cross};
use sensekit::svm::{decision_values, train_binary, TrainConfig};
use sensekit::text::{Corpus, Split, TextPipeline, TokenizedDoc};
use sensekit::{CountVector, Document, Error, KernelSpec};

/// Two classes living on disjoint halves of a 10-word vocabulary.
fn separable(m_per_class: usize, prefix: &str, split: Split) -> Corpus {
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..m_per_class {
        for (class, base) in [("left", 0u32), ("right", 5u32)] {
            let words = (0..8).map(|k| base + ((i as u32 + k * 3) % 5));
            docs.push(Document::new(
                format!("{prefix}{class}{i}"),
                CountVector::from_words(10, words).unwrap(),
            ));
            labels.push(class.to_string());
        }
    }
    Corpus::new(split, 10, [0; 32], docs, labels).unwrap()
}

fn config(kernels: Vec<KernelSpec>, c: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kernels, c, 99);
    cfg.folds = 3;
    cfg
}

#[test]
fn folds_are_stratified_and_deterministic() {
    let ids: Vec<String> = (0..31).map(|i| format!("d{i}")).collect();
    let labels: Vec<usize> = (0..31).map(|i| usize::from(i % 3 != 0)).collect();
    let fold = stratified_folds(&ids, &labels, 5, 4).unwrap();
    assert_eq!(fold.len(), 31);
    for f in 0..5 {
        let members: Vec<usize> = (0..31).filter(|&i| fold[i] == f).collect();
        let a = members.iter().filter(|&&i| labels[i] == 0).count();
        assert!((2..=3).contains(&a), "fold {f}: {a}");
        assert!(
            (6..=7).contains(&members.len()),
            "fold {f}: {}",
            members.len()
        );
    }
    assert_eq!(fold, stratified_folds(&ids, &labels, 5, 4).unwrap());
    assert_ne!(fold, stratified_folds(&ids, &labels, 5, 5).unwrap());
}

#[test]
fn single_grid_point_gives_one_row() {
    let src = CountSource::new(separable(6, "tr", Split::Train), None).unwrap();
    let cv = cross_validate(&src, &config(vec![KernelSpec::sensing1(50)], vec![1.0])).unwrap();
    assert_eq!(cv.rows.len(), 1);
    assert_eq!(cv.selected, 0);
}

#[test]
fn duplicate_grid_points_score_identically() {
    let src = CountSource::new(separable(6, "tr", Split::Train), None).unwrap();
    let spec = KernelSpec::sensing2(40, 3);
    let cv = cross_validate(&src, &config(vec![spec.clone(), spec], vec![0.5, 0.5])).unwrap();
    assert_eq!(cv.rows.len(), 4);
    let first = cv.rows[0].mean_ccr;
    assert!(cv.rows.iter().all(|r| r.mean_ccr == first));
    assert_eq!(cv.selected, 0);
}

#[test]
fn separable_data_is_classified_perfectly() {
    let src = CountSource::new(
        separable(8, "tr", Split::Train),
        Some(separable(4, "te", Split::Test)),
    )
    .unwrap();
    let cfg = config(
        vec![KernelSpec::sensing0(), KernelSpec::sensing1(100)],
        vec![1.0, 10.0],
    );
    let report = run_experiment(&src, &cfg).unwrap();
    assert_eq!(report.test.correct, report.test.total);
    assert_eq!(report.test.total, 8);
    assert_eq!(report.cv.best().mean_ccr, 1.0);
}

#[test]
fn empty_test_set_is_a_usage_error() {
    let src = CountSource::new(separable(6, "tr", Split::Train), None).unwrap();
    let err = run_experiment(&src, &config(vec![KernelSpec::sensing0()], vec![1.0])).unwrap_err();
    assert!(matches!(err.root(), Error::Usage(_)), "{err}");
}

#[test]
fn reruns_render_identical_reports() {
    let make = || {
        CountSource::new(
            separable(6, "tr", Split::Train),
            Some(separable(3, "te", Split::Test)),
        )
        .unwrap()
    };
    let cfg = config(
        vec![KernelSpec::sensing2(30, 8), KernelSpec::rbf(0.3)],
        vec![0.1, 1.0],
    );
    let a = run_experiment(&make(), &cfg).unwrap();
    let b = run_experiment(&make(), &cfg).unwrap();
    assert_eq!(a.render_kv(), b.render_kv());
    assert_eq!(a.render_table(), b.render_table());
}

fn tokenized(class: &str, words: &[&str], n: usize, prefix: &str) -> Vec<TokenizedDoc> {
    (0..n)
        .map(|i| TokenizedDoc {
            id: format!("{prefix}{class}{i}"),
            label: class.to_string(),
            // Each document brings one word no other document has.
            tokens: words
                .iter()
                .map(|w| w.to_string())
                .chain([format!("{class}only{prefix}{i}")])
                .collect(),
        })
        .collect()
}

#[test]
fn fold_vocabularies_never_see_held_out_documents() {
    let mut train = tokenized("red", &["apple", "cherry"], 6, "tr");
    train.extend(tokenized("blue", &["sky", "ocean"], 6, "tr"));
    let mut test = tokenized("red", &["apple"], 2, "te");
    test.extend(tokenized("blue", &["sky"], 2, "te"));
    let src = TokenSource::new(train, test, &TextPipeline::default());
    let report = run_experiment(&src, &config(vec![KernelSpec::sensing0()], vec![1.0])).unwrap();
    let folds = &report.cv.fold_fingerprints;
    assert_eq!(folds.len(), 3);
    assert!(folds.iter().all(|f| *f != report.train_fingerprint));
    let mut unique = folds.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 3);

    let held_out = src.test_indices().to_vec();
    let feats = src.features(src.train_indices(), &held_out).unwrap();
    assert_eq!(hex::encode(feats.fingerprint), report.train_fingerprint);
}

#[test]
fn duplicating_the_data_equals_doubling_c() {
    let base = separable(5, "tr", Split::Train);
    let mut noisy = base.docs.clone();
    noisy.push(Document::new(
        "odd",
        CountVector::from_words(10, [0, 1, 6, 7, 8]).unwrap(),
    ));
    let mut y: Vec<i8> = base
        .labels
        .iter()
        .map(|l| if l == "left" { 1 } else { -1 })
        .collect();
    y.push(1);
    let dup: Vec<Document> = noisy
        .iter()
        .cloned()
        .chain(
            noisy
                .iter()
                .map(|d| Document::new(format!("{}#2", d.id), d.counts.clone())),
        )
        .collect();
    let y_dup: Vec<i8> = y.iter().chain(&y).copied().collect();
    let probe = separable(2, "pr", Split::Test).docs;
    let spec = KernelSpec::sensing1(60);
    let tight = TrainConfig {
        tolerance: 1e-10,
        ..TrainConfig::with_c(0.3)
    };

    let m1 = train_binary(
        &build_gram(&noisy, &spec).unwrap(),
        &y,
        &TrainConfig {
            c: 0.6,
            ..tight.clone()
        },
    )
    .unwrap();
    let m2 = train_binary(&build_gram(&dup, &spec).unwrap(), &y_dup, &tight).unwrap();
    let d1 = decision_values(&m1, &build_gram_cross(&probe, &noisy, &spec).unwrap()).unwrap();
    let d2 = decision_values(&m2, &build_gram_cross(&probe, &dup, &spec).unwrap()).unwrap();
    for (a, b) in d1.iter().zip(&d2) {
        assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
    }
}
