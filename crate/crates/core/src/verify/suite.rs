//! Acceptance checks shared by the `verify` subcommand and the acceptance
//! test target. Each check reports pass/fail with a one-line detail.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::bayes_gap::{bayes_gap, BayesGapConfig};
use super::montecarlo::log_kernel_direct;
use super::qp::qp_oracle;
use super::quadrature::simplex_integral_oracle;
use super::synthetic::{generate_corpus, SyntheticModel};
use crate::count::{CountVector, Document};
use crate::error::Result;
use crate::harness::{
    run_experiment, sigma_grid, stratified_folds, ExperimentConfig, FoldSource, TokenSource,
};
use crate::kernel::{build_gram, evaluate, gram, keyed_rng, log_kernel_exact, KernelSpec};
use crate::pyramid::{
    build_pyramid, kmeans_fit, pyramid_kernel, KMeansConfig, PyramidDoc, QuantizedPoint,
};
use crate::svm::{solve_dual, TrainConfig};
use crate::text::{load_class_dirs, TextPipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.2}s)",
            self.status, self.id, self.name, self.detail, self.seconds
        )
    }
}

fn finish(
    id: u32,
    name: &'static str,
    start: Instant,
    limit: f64,
    outcome: Result<(bool, String)>,
) -> CheckResult {
    let seconds = start.elapsed().as_secs_f64();
    let (ok, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = seconds < limit;
    if !in_time {
        detail.push_str(&format!("; over the {limit}s budget"));
    }
    CheckResult {
        id,
        name,
        status: if ok && in_time {
            Status::Pass
        } else {
            Status::Fail
        },
        detail,
        seconds,
    }
}

fn skip(id: u32, name: &'static str, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        id,
        name,
        status: Status::Skip,
        detail: detail.into(),
        seconds: 0.0,
    }
}

fn dense(d: &[u32]) -> CountVector {
    CountVector::from_dense(d).expect("small dense vector")
}

/// Exact kernel against simplex quadrature at 2000 cells per edge on the two
/// hand cases and 18 random pairs; relative error ≤ 1e-6.
pub fn kernel_oracle(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = keyed_rng(seed, "check/kernel-oracle");
        let mut pairs = vec![
            (dense(&[1, 0]), dense(&[0, 1])),
            (dense(&[1, 1]), dense(&[2, 0])),
        ];
        while pairs.len() < 20 {
            let w = rng.random_range(2..=3);
            let a: Vec<u32> = (0..w).map(|_| rng.random_range(0..=10)).collect();
            let b: Vec<u32> = (0..w).map(|_| rng.random_range(0..=10)).collect();
            pairs.push((dense(&a), dense(&b)));
        }
        let mut worst = 0.0f64;
        for (a, b) in &pairs {
            let k = log_kernel_exact(a, b)?.exp();
            let q = simplex_integral_oracle(a, b, 2000)?;
            worst = worst.max(((k - q) / q).abs());
        }
        let hand = (log_kernel_exact(&pairs[0].0, &pairs[0].1)?.exp() - 1.0 / 6.0).abs()
            <= 1e-6 / 6.0
            && (log_kernel_exact(&pairs[1].0, &pairs[1].1)?.exp() - 0.1).abs() <= 1e-7;
        Ok((
            worst <= 1e-6 && hand,
            format!(
                "20 pairs, max relative error {worst:.3e} (limit 1e-6), hand cases 1/6 and 1/10 {}",
                if hand { "ok" } else { "off" }
            ),
        ))
    })();
    finish(1, "kernel-oracle equivalence", start, 10.0, outcome)
}

fn random_docs(seed: u64, stream: &str, m: usize, w: usize, max_count: u32) -> Vec<Document> {
    let mut rng = keyed_rng(seed, stream);
    (0..m)
        .map(|i| {
            let mut d: Vec<u32> = (0..w).map(|_| rng.random_range(0..=max_count)).collect();
            if d.iter().all(|&c| c == 0) {
                d[rng.random_range(0..w)] = 1;
            }
            Document::new(format!("{stream}-{i}"), dense(&d))
        })
        .collect()
}

fn min_eigenvalue(values: &[f64], m: usize) -> f64 {
    let mat = DMatrix::from_row_slice(m, m, values);
    SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Exact-kernel Gram of 50 random documents has min eigenvalue ≥ −1e-8·trace.
pub fn psd(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let docs = random_docs(seed, "check/psd", 50, 6, 4);
        let g = build_gram(&docs, &KernelSpec::exact())?;
        let min = min_eigenvalue(g.values(), g.rows());
        let bound = -1e-8 * g.trace();
        Ok((
            min >= bound,
            format!("min eigenvalue {min:.3e}, bound {bound:.3e}"),
        ))
    })();
    finish(2, "PSD property", start, 5.0, outcome)
}

/// `log_kernel_exact` stays finite at N = 1e6, W = 1e5 and tracks the
/// log-sum closed form as both documents are scaled up.
pub fn overflow(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let w = 100_000;
        let mut rng = keyed_rng(seed, "check/overflow");
        let mut base = |n: u32| -> Result<CountVector> {
            CountVector::from_words(w, (0..n).map(|_| rng.random_range(0..w as u32)))
        };
        let a = base(10_000)?;
        let b = base(10_000)?;
        let mut worst = 0.0f64;
        let mut all_finite = true;
        let mut values = Vec::new();
        for k in [1u32, 10, 100] {
            let (sa, sb) = (a.scaled(k)?, b.scaled(k)?);
            let exact = log_kernel_exact(&sa, &sb)?;
            let direct = log_kernel_direct(&sa, &sb)?;
            all_finite &= exact.is_finite();
            worst = worst.max(((exact - direct) / direct).abs());
            values.push(exact);
        }
        let decreasing = values.windows(2).all(|p| p[1] < p[0]);
        Ok((
            all_finite && worst <= 1e-9 && decreasing,
            format!(
                "N up to {}, log K = {:.6e}, max relative deviation from log-sum form {worst:.2e} (limit 1e-9)",
                a.total() * 100,
                values[2]
            ),
        ))
    })();
    finish(3, "overflow robustness", start, 1.0, outcome)
}

struct Instance {
    k: Vec<f64>,
    y: Vec<f64>,
    cross: Vec<f64>,
    c: f64,
}

fn solver_instance(rng: &mut impl Rng, n_test: usize) -> Instance {
    let m = rng.random_range(4..=30);
    let d = m + 5;
    let point = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        (0..d).map(|_| rng.sample(StandardNormal)).collect()
    };
    let xs: Vec<Vec<f64>> = (0..m).map(|_| point(rng)).collect();
    let ts: Vec<Vec<f64>> = (0..n_test).map(|_| point(rng)).collect();
    let mut y: Vec<f64> = (0..m)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let k = (0..m * m).map(|t| dot(&xs[t / m], &xs[t % m])).collect();
    let cross = (0..n_test * m)
        .map(|t| dot(&ts[t / m], &xs[t % m]))
        .collect();
    let c = 10f64.powf(rng.random_range(-1.0..1.0));
    Instance { k, y, cross, c }
}

/// SMO against the QP oracle on 50 random positive-definite instances.
pub fn solver_oracle(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = keyed_rng(seed, "check/solver-oracle");
        let (mut worst, mut compared, mut disagree) = (0.0f64, 0usize, 0usize);
        let n_test = 200;
        for _ in 0..50 {
            let inst = solver_instance(&mut rng, n_test);
            let m = inst.y.len();
            let cfg = TrainConfig {
                tolerance: 1e-9,
                ..TrainConfig::with_c(inst.c)
            };
            let smo = solve_dual(&inst.k, &inst.y, &cfg)?;
            let qp = qp_oracle(&inst.k, &inst.y, inst.c)?;
            worst = worst.max(((smo.objective - qp.objective) / qp.objective).abs());
            for t in 0..n_test {
                let row = &inst.cross[t * m..(t + 1) * m];
                let f_qp: f64 = (0..m)
                    .map(|i| qp.alpha[i] * inst.y[i] * row[i])
                    .sum::<f64>()
                    + qp.bias;
                let f_smo: f64 = (0..m)
                    .map(|i| smo.alpha[i] * inst.y[i] * row[i])
                    .sum::<f64>()
                    - smo.rho;
                if f_qp.abs() >= 1e-6 {
                    compared += 1;
                    if (f_qp >= 0.0) != (f_smo >= 0.0) {
                        disagree += 1;
                    }
                }
            }
        }
        Ok((
            worst <= 1e-6 && disagree == 0,
            format!(
                "50 instances, max relative objective gap {worst:.2e} (limit 1e-6), sign disagreements {disagree}/{compared}"
            ),
        ))
    })();
    finish(4, "solver-oracle equivalence", start, 30.0, outcome)
}

/// Exact-kernel SVM within 3 points of the Bayes rule, mean over `seeds`.
pub fn bayes_optimality(seeds: &[u64]) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let cfg = BayesGapConfig::default();
        let mut parts = Vec::new();
        let mut gap = 0.0;
        for &s in seeds {
            let o = bayes_gap(&SyntheticModel::reference(s), &cfg)?;
            gap += o.bayes_ccr - o.svm_ccr;
            parts.push(format!(
                "{:.2}/{:.2}",
                100.0 * o.svm_ccr,
                100.0 * o.bayes_ccr
            ));
        }
        gap /= seeds.len() as f64;
        Ok((
            gap <= 0.03,
            format!(
                "SVM/Bayes CCR % per seed [{}], mean gap {:.2} points (limit 3)",
                parts.join(", "),
                100.0 * gap
            ),
        ))
    })();
    finish(5, "Bayes optimality", start, 120.0, outcome)
}

/// Location of the 20 Newsgroups "bydate" split (directories
/// `20news-bydate-train` and `20news-bydate-test`).
pub fn newsgroups_dir(root: &Path) -> Option<(std::path::PathBuf, std::path::PathBuf)> {
    let train = root.join("20news-bydate-train");
    let test = root.join("20news-bydate-test");
    (train.is_dir() && test.is_dir()).then_some((train, test))
}

fn newsgroups_source(root: &Path, classes: Option<&[&str]>) -> Result<TokenSource> {
    let (train_dir, test_dir) = newsgroups_dir(root).expect("checked by caller");
    let pipeline = TextPipeline::default();
    let keep = |docs: Vec<crate::text::RawDoc>| -> Vec<crate::text::RawDoc> {
        docs.into_iter()
            .filter(|d| classes.is_none_or(|cs| cs.contains(&d.label.as_str())))
            .collect()
    };
    let train = pipeline.tokenize_docs(&keep(load_class_dirs(&train_dir)?));
    let test = pipeline.tokenize_docs(&keep(load_class_dirs(&test_dir)?));
    Ok(TokenSource::new(train, test, &pipeline))
}

/// Test CCR of the best configuration of one kernel family.
fn family_ccr(source: &TokenSource, kernels: Vec<KernelSpec>, seed: u64) -> Result<f64> {
    let cfg = ExperimentConfig::new(kernels, crate::harness::default_c_grid(), seed);
    Ok(run_experiment(source, &cfg)?.test.ccr())
}

fn rbf_grid(source: &TokenSource) -> Result<Vec<KernelSpec>> {
    let train = source.train_indices().to_vec();
    let feats = source.features(&train, &[])?;
    let crate::harness::FeatureSet::Flat(docs) = feats.train else {
        unreachable!("token sources produce flat features")
    };
    Ok(sigma_grid(&docs)?
        .into_iter()
        .map(KernelSpec::rbf)
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn newsgroups_check(
    id: u32,
    name: &'static str,
    root: Option<&Path>,
    classes: Option<&[&str]>,
    scales: &[u32],
    targets: (f64, f64),
    seed: u64,
    limit: f64,
) -> CheckResult {
    let Some(root) = root.filter(|r| newsgroups_dir(r).is_some()) else {
        return skip(
            id,
            name,
            "20 Newsgroups bydate directories not found; set SENSEKIT_20NG",
        );
    };
    let start = Instant::now();
    let outcome = (|| {
        let source = newsgroups_source(root, classes)?;
        let s1 = family_ccr(
            &source,
            scales.iter().map(|&n| KernelSpec::sensing1(n)).collect(),
            seed,
        )?;
        let s2 = family_ccr(
            &source,
            scales
                .iter()
                .map(|&n| KernelSpec::sensing2(n, seed))
                .collect(),
            seed,
        )?;
        let rbf = family_ccr(&source, rbf_grid(&source)?, seed)?;
        let ok = s1 >= targets.0 && s2 >= targets.1 && s1 > rbf && s2 > rbf;
        Ok((
            ok,
            format!(
                "Sensing1 {:.2}%, Sensing2 {:.2}%, RBF {:.2}% (need >= {:.2}/{:.2} and above RBF)",
                100.0 * s1,
                100.0 * s2,
                100.0 * rbf,
                100.0 * targets.0,
                100.0 * targets.1
            ),
        ))
    })();
    finish(id, name, start, limit, outcome)
}

/// Binary alt.atheism vs talk.religion.misc.
pub fn table1(root: Option<&Path>, seed: u64) -> CheckResult {
    newsgroups_check(
        6,
        "20NG binary reproduction",
        root,
        Some(&["alt.atheism", "talk.religion.misc"]),
        &[50, 150, 500],
        (0.79, 0.79),
        seed,
        900.0,
    )
}

/// All 20 classes, one-vs-all, n = N = 150.
pub fn table2(root: Option<&Path>, seed: u64) -> CheckResult {
    newsgroups_check(
        7,
        "20NG 20-class reproduction",
        root,
        None,
        &[150],
        (0.765, 0.775),
        seed,
        7200.0,
    )
}

fn random_image(rng: &mut impl Rng, id: &str, w: usize, levels: usize) -> Result<PyramidDoc> {
    let (width, height) = (rng.random_range(16..64u32), rng.random_range(16..64u32));
    let n = rng.random_range(0..60);
    let mut points: Vec<QuantizedPoint> = (0..n)
        .map(|_| QuantizedPoint {
            x: rng.random_range(0.0..=width as f64),
            y: rng.random_range(0.0..=height as f64),
            word: rng.random_range(0..w as u32),
        })
        .collect();
    // exercise the cell-boundary rule
    points.push(QuantizedPoint {
        x: width as f64 / 2.0,
        y: height as f64,
        word: 0,
    });
    build_pyramid(id, &points, width, height, levels, w)
}

/// One-hot level weights reproduce the single-level kernel exactly, and
/// cell counts are conserved at every level.
pub fn pyramid_consistency(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = keyed_rng(seed, "check/pyramid");
        let (w, levels) = (6, 2);
        let images = (0..12)
            .map(|i| random_image(&mut rng, &format!("img{i}"), w, levels))
            .collect::<Result<Vec<_>>>()?;
        let mut conserved = true;
        for img in &images {
            let total = img.total_counts().to_dense();
            for l in 0..=levels {
                let mut sum = vec![0u32; w];
                for cell in img.level(l) {
                    for (s, c) in sum.iter_mut().zip(cell.to_dense()) {
                        *s += c;
                    }
                }
                conserved &= sum == total;
            }
        }
        let bases = [
            KernelSpec::exact(),
            KernelSpec::sensing0(),
            KernelSpec::sensing1(150),
            KernelSpec::sensing2(50, seed),
            KernelSpec::rbf(0.5),
            KernelSpec::ppk(1.0),
        ];
        let (mut pairs, mut mismatches) = (0usize, 0usize);
        for base in &bases {
            for a in &images {
                for b in &images {
                    for l in 0..=levels {
                        let mut weights = vec![0.0; levels + 1];
                        weights[l] = 1.0;
                        let pk = pyramid_kernel(a, b, base, &weights)?;
                        let mut direct = 0.0;
                        for (c, (ca, cb)) in a.level(l).iter().zip(b.level(l)).enumerate() {
                            if !ca.is_empty() && !cb.is_empty() {
                                let ka = format!("{}/L{l}/c{c}", a.id);
                                let kb = format!("{}/L{l}/c{c}", b.id);
                                direct += evaluate(base, ca, &ka, cb, &kb)?;
                            }
                        }
                        pairs += 1;
                        if pk.to_bits() != direct.to_bits() {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
        Ok((
            conserved && mismatches == 0,
            format!(
                "{pairs} level kernels over 6 base families, {mismatches} inexact; cell conservation {}",
                if conserved { "holds" } else { "violated" }
            ),
        ))
    })();
    finish(8, "pyramid consistency", start, 30.0, outcome)
}

/// Every randomized path reproduces byte-for-byte under a fixed seed and
/// changes under another.
pub fn determinism(seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (|| {
        let run = |s: u64| -> Result<Vec<(&'static str, Vec<u8>)>> {
            let mut out = Vec::new();
            let docs = random_docs(7, "check/determinism", 12, 30, 6);
            let g = build_gram(&docs, &KernelSpec::sensing2(40, s))?;
            let mut buf = Vec::new();
            gram::write_text(&g, &mut buf).expect("in-memory write");
            out.push(("sensing2 gram", buf));

            let mut rng = keyed_rng(7, "check/determinism/samples");
            let samples: Vec<Vec<f64>> = (0..300)
                .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let v = kmeans_fit(&samples, 5, &KMeansConfig::new(s))?;
            let mut buf = Vec::new();
            v.write(&mut buf).expect("in-memory write");
            out.push(("k-means vocabulary", buf));

            let ids: Vec<String> = docs.iter().map(|d| d.id.clone()).collect();
            let labels: Vec<usize> = (0..ids.len()).map(|i| i % 2).collect();
            let folds = stratified_folds(&ids, &labels, 3, s)?;
            out.push(("cv folds", folds.iter().map(|&f| f as u8).collect()));

            let corpus = generate_corpus(&SyntheticModel::reference(s), 40)?;
            let mut buf = Vec::new();
            corpus.write(&mut buf).expect("in-memory write");
            out.push(("synthetic corpus", buf));
            Ok(out)
        };
        let (a, b, other) = (run(seed)?, run(seed)?, run(seed.wrapping_add(1))?);
        let unstable: Vec<&str> = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| x.1 != y.1)
            .map(|(x, _)| x.0)
            .collect();
        let inert: Vec<&str> = a
            .iter()
            .zip(&other)
            .filter(|(x, y)| x.1 == y.1)
            .map(|(x, _)| x.0)
            .collect();
        let detail = format!(
            "{} paths reproduced; unstable: [{}]; seed-insensitive: [{}]",
            a.len(),
            unstable.join(", "),
            inert.join(", ")
        );
        Ok((unstable.is_empty() && inert.is_empty(), detail))
    })();
    finish(9, "determinism", start, 60.0, outcome)
}

/// Criteria 1–5, 8 and 9, plus the 20 Newsgroups reproductions when
/// `newsgroups` points at the data (the 20-class run only with `heavy`).
pub fn run_all(seed: u64, newsgroups: Option<&Path>, heavy: bool) -> Vec<CheckResult> {
    let mut out = vec![
        kernel_oracle(seed),
        psd(seed),
        overflow(seed),
        solver_oracle(seed),
        bayes_optimality(&[seed, seed + 1, seed + 2, seed + 3, seed + 4]),
        table1(newsgroups, seed),
    ];
    out.push(if heavy {
        table2(newsgroups, seed)
    } else {
        skip(7, "20NG 20-class reproduction", "heavy check not requested")
    });
    out.push(pyramid_consistency(seed));
    out.push(determinism(seed));
    out
}
