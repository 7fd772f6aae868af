use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use log::info;
use sensekit::harness::{
    cross_validate, default_kernel_grid, render_cv_kv, render_cv_table, run_experiment,
    CountSource, DescriptorSource, ExperimentConfig, FeatureSet, FoldSource, PyramidSource,
    TokenSource,
};
use sensekit::kernel::{build_gram, build_gram_cross};
use sensekit::pyramid::{
    build_pyramid, build_pyramid_gram, build_pyramid_gram_cross, kmeans_fit, quantize,
    sample_descriptors, DescriptorSet, PyramidCorpus, PyramidDoc, VisualVocabulary,
};
use sensekit::svm::{
    predict_multiclass, read_models, train_one_vs_all, write_models, MulticlassModel, TrainConfig,
};
use sensekit::text::{load_raw, Corpus};
use sensekit::verify::suite::{self, Status};
use sensekit::{Error, KernelSpec, Result};

use crate::inputs::*;
use crate::*;

fn build_pyramids(
    sets: &[(DescriptorSet, String)],
    vocab: &VisualVocabulary,
    levels: usize,
) -> Result<Vec<PyramidDoc>> {
    sets.iter()
        .map(|(s, _)| {
            build_pyramid(
                &s.id,
                &quantize(s, vocab)?,
                s.width,
                s.height,
                levels,
                vocab.len(),
            )
        })
        .collect()
}

pub fn prepare_text(a: PrepareTextArgs) -> Result<ExitCode> {
    let pipeline = text_pipeline(&a.text)?;
    let train_raw = load_raw(&a.train)?;
    let test_raw = match &a.test {
        Some(p) => load_raw(p)?,
        None => Vec::new(),
    };
    let train = pipeline.tokenize_docs(&train_raw);
    let test = pipeline.tokenize_docs(&test_raw);
    let (vocab, train_corpus, test_corpus) = pipeline.prepare(&train, &test)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_with(&a.out.join("vocab.txt"), |w| vocab.write(w))?;
    write_with(&a.out.join("train.corpus"), |w| train_corpus.write(w))?;
    if a.test.is_some() {
        write_with(&a.out.join("test.corpus"), |w| test_corpus.write(w))?;
    }
    println!(
        "vocabulary {} terms; train {} of {} documents; test {} of {} documents",
        vocab.len(),
        train_corpus.len(),
        train_raw.len(),
        test_corpus.len(),
        test_raw.len()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn prepare_bof(a: PrepareBofArgs) -> Result<ExitCode> {
    let train = load_descriptor_dirs(&a.train)?;
    let test = match &a.test {
        Some(p) => load_descriptor_dirs(p)?,
        None => Vec::new(),
    };
    let sets: Vec<_> = train.iter().map(|(s, _)| s.clone()).collect();
    let samples = sample_descriptors(&sets, a.bof.sample, a.seed);
    let vocab = kmeans_fit(&samples, a.bof.words, &kmeans_config(&a.bof, a.seed))?;
    info!(
        "k-means: {} iterations, inertia {}",
        vocab.iterations, vocab.inertia
    );
    let corpus = |items: &[(DescriptorSet, String)]| -> Result<PyramidCorpus> {
        let docs = build_pyramids(items, &vocab, a.bof.levels)?;
        PyramidCorpus::new(
            a.bof.levels,
            vocab.len(),
            vocab.fingerprint(),
            docs,
            items.iter().map(|(_, l)| l.clone()).collect(),
        )
    };
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_with(&a.out.join("visual_vocab.txt"), |w| vocab.write(w))?;
    write_with(&a.out.join("train.pyramid"), |w| {
        corpus(&train).map_err(std::io::Error::other)?.write(w)
    })?;
    if a.test.is_some() {
        write_with(&a.out.join("test.pyramid"), |w| {
            corpus(&test).map_err(std::io::Error::other)?.write(w)
        })?;
    }
    println!(
        "visual vocabulary {} words from {} descriptors; train {} images; test {} images",
        vocab.len(),
        samples.len(),
        train.len(),
        test.len()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn gram(a: GramArgs) -> Result<ExitCode> {
    let rows = load_corpus(&a.corpus)?;
    let cols = a.cols.as_deref().map(load_corpus).transpose()?;
    let spec = parse_kernel(&a.kernel, a.seed, rows.pyramid_levels())?;
    let g = match (&rows, &cols) {
        (LoadedCorpus::Text(r), None) => build_gram(&r.docs, &spec)?,
        (LoadedCorpus::Text(r), Some(LoadedCorpus::Text(c))) => {
            check_same_vocab(r.vocab_fingerprint, c.vocab_fingerprint)?;
            build_gram_cross(&r.docs, &c.docs, &spec)?
        }
        (LoadedCorpus::Pyramid(r), None) => build_pyramid_gram(&r.docs, &spec)?,
        (LoadedCorpus::Pyramid(r), Some(LoadedCorpus::Pyramid(c))) => {
            check_same_vocab(r.vocab_fingerprint, c.vocab_fingerprint)?;
            build_pyramid_gram_cross(&r.docs, &c.docs, &spec)?
        }
        _ => {
            return Err(Error::usage(
                "row and column corpora must be of the same kind",
            ))
        }
    };
    write_gram(&g, &a.out, a.text)?;
    println!(
        "{}x{} gram for {} written to {}",
        g.rows(),
        g.cols(),
        spec,
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn check_same_vocab(a: [u8; 32], b: [u8; 32]) -> Result<()> {
    if a != b {
        return Err(Error::data(
            "row and column corpora use different vocabularies",
        ));
    }
    Ok(())
}

fn labels_by_id(corpus: &LoadedCorpus) -> HashMap<String, String> {
    corpus
        .ids()
        .into_iter()
        .zip(corpus.labels().iter().cloned())
        .collect()
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    let g = read_gram(&a.gram)?;
    let corpus = load_corpus(&a.corpus)?;
    let by_id = labels_by_id(&corpus);
    let labels = g
        .row_ids()
        .iter()
        .map(|id| {
            by_id.get(id).cloned().ok_or_else(|| {
                Error::data(format!(
                    "gram document '{id}' is not in {}",
                    a.corpus.display()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let cfg = TrainConfig {
        tolerance: a.tolerance,
        ..TrainConfig::with_c(a.c)
    };
    let model = train_one_vs_all(&g, &y, &classes, &cfg)?;
    write_with(&a.out, |w| write_models(&model.models, w))?;
    for m in &model.models {
        if !m.converged {
            log::warn!("model for '{}' hit the iteration cap", m.label);
        }
    }
    println!(
        "{} models over {} documents written to {}",
        model.models.len(),
        g.rows(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn predict(a: PredictArgs) -> Result<ExitCode> {
    let file = fs::File::open(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let models = read_models(std::io::BufReader::new(file))?;
    let model = MulticlassModel {
        classes: models.iter().map(|m| m.label.clone()).collect(),
        models,
    };
    let g = read_gram(&a.gram)?;
    let predicted = predict_multiclass(&model, &g)?;
    let mut out = String::new();
    for (id, &p) in g.row_ids().iter().zip(&predicted) {
        out.push_str(&format!("{id}\t{}\n", model.classes[p]));
    }
    match &a.out {
        Some(p) => write_string(p, &out)?,
        None => print!("{out}"),
    }
    if let Some(cp) = &a.corpus {
        let by_id = labels_by_id(&load_corpus(cp)?);
        let mut correct = 0;
        for (id, &p) in g.row_ids().iter().zip(&predicted) {
            let truth = by_id.get(id).ok_or_else(|| {
                Error::data(format!("test document '{id}' is not in {}", cp.display()))
            })?;
            if *truth == model.classes[p] {
                correct += 1;
            }
        }
        let total = predicted.len();
        eprintln!(
            "CCR {correct}/{total} = {:.2}%",
            if total == 0 {
                0.0
            } else {
                100.0 * correct as f64 / total as f64
            }
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// Item pool plus the information needed for default grids.
struct Prepared {
    source: Box<dyn FoldSource>,
    pyramid_levels: Option<usize>,
}

fn prepared_source(train: &Path, test: Option<&Path>, grid: &GridOptions) -> Result<Prepared> {
    let format = match grid.format.as_str() {
        "auto" if is_prepared_corpus(train) => "corpus",
        "auto" => "text",
        f @ ("text" | "corpus" | "pyramid" | "descriptors") => f,
        other => return Err(Error::usage(format!("unknown input format '{other}'"))),
    };
    match format {
        "corpus" | "pyramid" => {
            let train_c = load_corpus(train)?;
            let test_c = test.map(load_corpus).transpose()?;
            match (train_c, test_c) {
                (LoadedCorpus::Text(tr), te) => {
                    let te: Option<Corpus> = match te {
                        Some(LoadedCorpus::Text(t)) => Some(t),
                        None => None,
                        Some(_) => {
                            return Err(Error::usage("train and test corpora differ in kind"))
                        }
                    };
                    Ok(Prepared {
                        source: Box::new(CountSource::new(tr, te)?),
                        pyramid_levels: None,
                    })
                }
                (LoadedCorpus::Pyramid(tr), te) => {
                    let levels = tr.levels;
                    let te = match te {
                        Some(LoadedCorpus::Pyramid(t)) => Some(t),
                        None => None,
                        Some(_) => {
                            return Err(Error::usage("train and test corpora differ in kind"))
                        }
                    };
                    Ok(Prepared {
                        source: Box::new(PyramidSource::new(tr, te)?),
                        pyramid_levels: Some(levels),
                    })
                }
            }
        }
        "text" => {
            let pipeline = text_pipeline(&grid.text)?;
            let tr = pipeline.tokenize_docs(&load_raw(train)?);
            let te = match test {
                Some(p) => pipeline.tokenize_docs(&load_raw(p)?),
                None => Vec::new(),
            };
            Ok(Prepared {
                source: Box::new(TokenSource::new(tr, te, &pipeline)),
                pyramid_levels: None,
            })
        }
        _ => {
            let tr = load_descriptor_dirs(train)?;
            let te = match test {
                Some(p) => load_descriptor_dirs(p)?,
                None => Vec::new(),
            };
            Ok(Prepared {
                source: Box::new(DescriptorSource::new(
                    tr,
                    te,
                    grid.bof.words,
                    grid.bof.levels,
                    grid.bof.sample,
                    kmeans_config(&grid.bof, grid.seed),
                )),
                pyramid_levels: Some(grid.bof.levels),
            })
        }
    }
}

fn experiment_config(p: &Prepared, grid: &GridOptions) -> Result<ExperimentConfig> {
    let kernels = if grid.kernels.is_empty() {
        match p.pyramid_levels {
            Some(levels) => ["sensing1:n=500", "sensing2:N=500"]
                .iter()
                .map(|k| parse_kernel(k, Some(grid.seed), Some(levels)))
                .collect::<Result<Vec<KernelSpec>>>()?,
            None => {
                let train = p.source.train_indices().to_vec();
                match p.source.features(&train, &[])?.train {
                    FeatureSet::Flat(docs) => default_kernel_grid(&docs, grid.seed)?,
                    FeatureSet::Pyramid(_) => unreachable!("flat sources yield flat features"),
                }
            }
        }
    } else {
        grid.kernels
            .iter()
            .map(|k| parse_kernel(k, Some(grid.seed), p.pyramid_levels))
            .collect::<Result<_>>()?
    };
    let mut cfg = ExperimentConfig::new(kernels, parse_c_grid(&grid.c_grid)?, grid.seed);
    cfg.folds = grid.folds;
    cfg.train.tolerance = grid.tolerance;
    Ok(cfg)
}

pub fn cv(a: CvArgs) -> Result<ExitCode> {
    let p = prepared_source(&a.train, None, &a.grid)?;
    let cfg = experiment_config(&p, &a.grid)?;
    let result = cross_validate(p.source.as_ref(), &cfg)?;
    let table = render_cv_table(&result);
    print!("{table}");
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_string(&out.join("cv.txt"), &table)?;
        write_string(&out.join("cv.kv"), &render_cv_kv(&result))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let p = prepared_source(&a.train, Some(&a.test), &a.grid)?;
    let cfg = experiment_config(&p, &a.grid)?;
    let report = run_experiment(p.source.as_ref(), &cfg)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let table = report.render_table();
    write_string(&a.out.join("report.txt"), &table)?;
    write_string(&a.out.join("report.kv"), &report.render_kv())?;
    write_string(&a.out.join("timings.txt"), &report.render_timings())?;
    print!("{table}");
    std::io::stdout().flush().ok();
    Ok(ExitCode::SUCCESS)
}

pub fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let wanted = |id: u32| a.only.is_empty() || a.only.contains(&id);
    let news = a.newsgroups.as_deref();
    let seed = a.seed;
    let checks: [(u32, &dyn Fn() -> suite::CheckResult); 9] = [
        (1, &|| suite::kernel_oracle(seed)),
        (2, &|| suite::psd(seed)),
        (3, &|| suite::overflow(seed)),
        (4, &|| suite::solver_oracle(seed)),
        (5, &|| {
            suite::bayes_optimality(&[seed, seed + 1, seed + 2, seed + 3, seed + 4])
        }),
        (6, &|| suite::table1(news, seed)),
        (7, &|| {
            if a.heavy {
                suite::table2(news, seed)
            } else {
                suite::CheckResult {
                    id: 7,
                    name: "20NG 20-class reproduction",
                    status: Status::Skip,
                    detail: "pass --heavy to run".into(),
                    seconds: 0.0,
                }
            }
        }),
        (8, &|| suite::pyramid_consistency(seed)),
        (9, &|| suite::determinism(seed)),
    ];
    let mut failed = 0;
    for (id, check) in checks {
        if !wanted(id) {
            continue;
        }
        let r = check();
        println!("{r}");
        std::io::stdout().flush().ok();
        failed += usize::from(r.status == Status::Fail);
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
