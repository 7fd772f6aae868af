use super::synthetic::{generate_split, BayesOracle, SyntheticModel, POSITIVE};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, CountSource, ExperimentConfig};
use crate::kernel::{build_gram, KernelSpec};
use crate::svm::TrainConfig;
use crate::text::Split;

#[derive(Debug, Clone, PartialEq)]
pub struct BayesGapConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// C values relative to `1 / mean(diag K)`: the exact kernel's values
    /// shrink rapidly with document length, so absolute C values are not
    /// comparable across models.
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub tolerance: f64,
}

impl Default for BayesGapConfig {
    fn default() -> Self {
        BayesGapConfig {
            n_train: 500,
            n_test: 5000,
            c_grid: vec![0.1, 1.0, 10.0, 100.0, 1000.0],
            folds: 5,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesGapOutcome {
    pub seed: u64,
    pub svm_ccr: f64,
    pub bayes_ccr: f64,
    /// Selected C before scaling.
    pub relative_c: f64,
}

/// Trains a cross-validated exact-kernel SVM on synthetic data and scores
/// it against the numeric Bayes rule on an independent test sample.
pub fn bayes_gap(model: &SyntheticModel, cfg: &BayesGapConfig) -> Result<BayesGapOutcome> {
    let train = generate_split(model, cfg.n_train, "train", Split::Train)?;
    let test = generate_split(model, cfg.n_test, "test", Split::Test)?;
    let spec = KernelSpec::exact();
    let mean_diag = build_gram(&train.docs, &spec)?.trace() / train.len() as f64;
    if !(mean_diag > 0.0) {
        return Err(Error::data(
            "exact kernel underflowed on the synthetic training set",
        ));
    }

    let mut oracle = BayesOracle::new(model);
    let mut bayes_correct = 0usize;
    for (d, l) in test.docs.iter().zip(&test.labels) {
        let truth = if l == POSITIVE { 1 } else { -1 };
        if oracle.label(&d.counts)? == truth {
            bayes_correct += 1;
        }
    }

    let source = CountSource::new(train, Some(test))?;
    let exp = ExperimentConfig {
        kernels: vec![spec],
        c_grid: cfg.c_grid.iter().map(|c| c / mean_diag).collect(),
        folds: cfg.folds,
        seed: model.seed,
        train: TrainConfig {
            tolerance: cfg.tolerance,
            ..TrainConfig::default()
        },
    };
    let report = run_experiment(&source, &exp)?;
    Ok(BayesGapOutcome {
        seed: model.seed,
        svm_ccr: report.test.ccr(),
        bayes_ccr: bayes_correct as f64 / cfg.n_test as f64,
        relative_c: cfg.c_grid[report.cv.selected],
    })
}
