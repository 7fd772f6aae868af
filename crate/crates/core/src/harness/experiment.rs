use std::collections::BTreeSet;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use super::folds::stratified_folds;
use super::source::{FoldFeatures, FoldSource};
use crate::error::{Error, Result, StageExt};
use crate::kernel::{GramMatrix, KernelSpec};
use crate::svm::{predict_multiclass, train_one_vs_all, TrainConfig};

/// Grid search and evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernels: Vec<KernelSpec>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// Solver settings; `c` is overwritten by each grid value.
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(kernels: Vec<KernelSpec>, c_grid: Vec<f64>, seed: u64) -> Self {
        ExperimentConfig {
            kernels,
            c_grid,
            folds: 5,
            seed,
            train: TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.c_grid.is_empty() {
            return Err(Error::usage("kernel and C grids must be non-empty"));
        }
        if self.folds < 2 {
            return Err(Error::usage(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        for &c in &self.c_grid {
            with_c(&self.train, c).validate()?;
        }
        Ok(())
    }
}

fn with_c(cfg: &TrainConfig, c: f64) -> TrainConfig {
    TrainConfig { c, ..cfg.clone() }
}

/// Correct and total counts of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn ccr(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// CV outcome of one (kernel, C) grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kernel: KernelSpec,
    pub c: f64,
    pub folds: Vec<Tally>,
    /// Mean of the per-fold CCRs.
    pub mean_ccr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub rows: Vec<GridRow>,
    pub selected: usize,
    /// Data-artifact fingerprint of every fold, hex encoded.
    pub fold_fingerprints: Vec<String>,
}

impl CvResult {
    pub fn best(&self) -> &GridRow {
        &self.rows[self.selected]
    }
}

/// Sorted distinct labels of the given items.
fn classes_of(labels: &[String], idx: &[usize]) -> Vec<String> {
    idx.iter()
        .map(|&i| labels[i].clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn class_ids(labels: &[String], idx: &[usize], classes: &[String]) -> Result<Vec<usize>> {
    idx.iter()
        .map(|&i| {
            classes
                .iter()
                .position(|c| *c == labels[i])
                .ok_or_else(|| Error::data(format!("label '{}' not seen in training", labels[i])))
        })
        .collect()
}

/// Trains on `train_gram`; returns the number of correct predictions on
/// the rows of `eval_gram` and the predictions themselves.
fn train_and_score(
    train_gram: &GramMatrix,
    eval_gram: &GramMatrix,
    train_labels: &[usize],
    eval_labels: &[usize],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<(usize, Vec<usize>)> {
    let model = train_one_vs_all(train_gram, train_labels, classes, cfg)?;
    let predictions = predict_multiclass(&model, eval_gram)?;
    let correct = predictions
        .iter()
        .zip(eval_labels)
        .filter(|(p, t)| p == t)
        .count();
    Ok((correct, predictions))
}

fn kept<T: Copy>(xs: &[T], keep: &[usize]) -> Vec<T> {
    keep.iter().map(|&k| xs[k]).collect()
}

/// Stratified k-fold CV over the training split. Features (and any
/// vocabulary) are re-derived from each fold's training portion. Selection
/// is the highest mean CCR, then the smaller C, then grid order.
pub fn cross_validate(source: &dyn FoldSource, cfg: &ExperimentConfig) -> Result<CvResult> {
    cfg.validate()?;
    let train_idx = source.train_indices().to_vec();
    let labels = source.labels();
    let classes = classes_of(labels, &train_idx);
    if classes.len() < 2 {
        return Err(Error::usage("cross-validation needs at least two classes"));
    }
    let ids: Vec<String> = train_idx.iter().map(|&i| source.ids()[i].clone()).collect();
    let y = class_ids(labels, &train_idx, &classes)?;
    let fold_of = stratified_folds(&ids, &y, cfg.folds, cfg.seed)?;

    let fold_features: Vec<(FoldFeatures, Vec<usize>, Vec<usize>)> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let (tr, ev): (Vec<usize>, Vec<usize>) =
                (0..train_idx.len()).partition(|&p| fold_of[p] != f);
            let feats = source.features(&kept(&train_idx, &tr), &kept(&train_idx, &ev))?;
            Ok((feats, kept(&y, &tr), kept(&y, &ev)))
        })
        .collect::<Result<_>>()?;

    // one Gram pair per (kernel, fold), reused across the C grid
    let jobs: Vec<(usize, usize)> = (0..cfg.kernels.len())
        .flat_map(|k| (0..cfg.folds).map(move |f| (k, f)))
        .collect();
    let tallies: Vec<Vec<Tally>> = jobs
        .par_iter()
        .map(|&(k, f)| {
            let spec = &cfg.kernels[k];
            let (feats, ytr, yev) = &fold_features[f];
            let train_gram = feats.train.gram(spec)?;
            let eval_gram = feats.eval.cross_gram(&feats.train, spec)?;
            let ytr = kept(ytr, &feats.train_kept);
            let yev_kept = kept(yev, &feats.eval_kept);
            cfg.c_grid
                .par_iter()
                .map(|&c| {
                    let tc = with_c(&cfg.train, c);
                    let (correct, _) =
                        train_and_score(&train_gram, &eval_gram, &ytr, &yev_kept, &classes, &tc)?;
                    Ok(Tally {
                        correct,
                        total: yev.len(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (k, spec) in cfg.kernels.iter().enumerate() {
        for (ci, &c) in cfg.c_grid.iter().enumerate() {
            let folds: Vec<Tally> = (0..cfg.folds)
                .map(|f| tallies[k * cfg.folds + f][ci])
                .collect();
            let mean_ccr = folds.iter().map(Tally::ccr).sum::<f64>() / folds.len() as f64;
            rows.push(GridRow {
                kernel: spec.clone(),
                c,
                folds,
                mean_ccr,
            });
        }
    }
    let mut selected = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let best = &rows[selected];
        if r.mean_ccr > best.mean_ccr || (r.mean_ccr == best.mean_ccr && r.c < best.c) {
            selected = i;
        }
    }
    let fold_fingerprints = fold_features
        .iter()
        .map(|(f, _, _)| hex::encode(f.fingerprint))
        .collect();
    Ok(CvResult {
        rows,
        selected,
        fold_fingerprints,
    })
}

/// Experiment outcome. Everything except `timings` is a deterministic
/// function of the inputs and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub classes: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub folds: usize,
    pub cv: CvResult,
    pub selected_kernel: KernelSpec,
    pub selected_c: f64,
    pub test: Tally,
    /// `confusion[true][predicted]`; items dropped during feature
    /// extraction are counted in an extra trailing "excluded" column.
    pub confusion: Vec<Vec<usize>>,
    pub train_fingerprint: String,
    pub timings: Vec<(String, f64)>,
}

/// Cross-validates on the training split, retrains the selected
/// configuration on the whole training split and scores the test split.
pub fn run_experiment(source: &dyn FoldSource, cfg: &ExperimentConfig) -> Result<Report> {
    let mut timings = Vec::new();
    let test_idx = source.test_indices().to_vec();
    if test_idx.is_empty() {
        return Err(Error::usage("the test split is empty"));
    }
    let clock = Instant::now();
    let cv = cross_validate(source, cfg).stage("cross-validation")?;
    timings.push((
        "cross_validation".to_string(),
        clock.elapsed().as_secs_f64(),
    ));
    let best = cv.best().clone();
    info!(
        "selected {} with C={} (CV CCR {:.4})",
        best.kernel, best.c, best.mean_ccr
    );

    let clock = Instant::now();
    let train_idx = source.train_indices().to_vec();
    let labels = source.labels();
    let classes = classes_of(labels, &train_idx);
    let ytr = class_ids(labels, &train_idx, &classes)?;
    let yte = class_ids(labels, &test_idx, &classes).stage("test labels")?;
    let feats = source.features(&train_idx, &test_idx).stage("features")?;
    let train_gram = feats.train.gram(&best.kernel).stage("gram")?;
    let test_gram = feats
        .eval
        .cross_gram(&feats.train, &best.kernel)
        .stage("gram")?;
    timings.push(("final_gram".to_string(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let tc = with_c(&cfg.train, best.c);
    let (correct, predictions) = train_and_score(
        &train_gram,
        &test_gram,
        &kept(&ytr, &feats.train_kept),
        &kept(&yte, &feats.eval_kept),
        &classes,
        &tc,
    )
    .stage("final training")?;
    timings.push(("final_training".to_string(), clock.elapsed().as_secs_f64()));

    let excluded = classes.len();
    let mut confusion = vec![vec![0usize; classes.len() + 1]; classes.len()];
    let mut predicted = vec![excluded; test_idx.len()];
    for (p, &pos) in predictions.iter().zip(&feats.eval_kept) {
        predicted[pos] = *p;
    }
    for (t, p) in yte.iter().zip(&predicted) {
        confusion[*t][*p] += 1;
    }
    Ok(Report {
        classes,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        seed: cfg.seed,
        folds: cfg.folds,
        selected_kernel: best.kernel.clone(),
        selected_c: best.c,
        cv,
        test: Tally {
            correct,
            total: test_idx.len(),
        },
        confusion,
        train_fingerprint: hex::encode(feats.fingerprint),
        timings,
    })
}
