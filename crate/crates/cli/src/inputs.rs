use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sensekit::kernel::gram;
use sensekit::pyramid::{default_pyramid_weights, DescriptorSet, KMeansConfig, PyramidCorpus};
use sensekit::text::{Corpus, HeaderMode, Stoplist, TextPipeline};
use sensekit::{Error, GramMatrix, KernelSpec, Result};

use crate::{BofOptions, TextOptions};

/// A prepared corpus file of either kind.
pub enum LoadedCorpus {
    Text(Corpus),
    Pyramid(PyramidCorpus),
}

impl LoadedCorpus {
    pub fn ids(&self) -> Vec<String> {
        match self {
            LoadedCorpus::Text(c) => c.docs.iter().map(|d| d.id.clone()).collect(),
            LoadedCorpus::Pyramid(c) => c.docs.iter().map(|d| d.id.clone()).collect(),
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            LoadedCorpus::Text(c) => &c.labels,
            LoadedCorpus::Pyramid(c) => &c.labels,
        }
    }

    pub fn pyramid_levels(&self) -> Option<usize> {
        match self {
            LoadedCorpus::Text(_) => None,
            LoadedCorpus::Pyramid(c) => Some(c.levels),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

pub fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, s: &str) -> Result<()> {
    write_with(path, |w| w.write_all(s.as_bytes()))
}

/// First two lines of a file, if it is a readable text file.
fn head(path: &Path) -> Option<(String, String)> {
    if !path.is_file() {
        return None;
    }
    let mut lines = open(path).ok()?.lines();
    let a = lines.next()?.ok()?;
    let b = lines.next().and_then(|l| l.ok()).unwrap_or_default();
    Some((a, b))
}

pub fn is_prepared_corpus(path: &Path) -> bool {
    head(path).is_some_and(|(a, _)| a.starts_with("W "))
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus> {
    let Some((_, second)) = head(path).filter(|(a, _)| a.starts_with("W ")) else {
        return Err(Error::data(format!(
            "{}: not a corpus file",
            path.display()
        )));
    };
    let wrap = |e: Error| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    };
    if second.starts_with("L ") {
        PyramidCorpus::read(open(path)?)
            .map(LoadedCorpus::Pyramid)
            .map_err(wrap)
    } else {
        Corpus::read(open(path)?)
            .map(LoadedCorpus::Text)
            .map_err(wrap)
    }
}

/// Parses a kernel spec. A Sensing 2 spec without a seed takes `seed`;
/// specs for pyramid data without weights get the default level weights.
pub fn parse_kernel(
    s: &str,
    seed: Option<u64>,
    pyramid_levels: Option<usize>,
) -> Result<KernelSpec> {
    let (base, rest) = match s.split_once(';') {
        Some((b, r)) => (b.to_string(), Some(r)),
        None => (s.to_string(), None),
    };
    let mut base = base;
    if base.trim_start().starts_with("sensing2") && !base.contains("seed=") {
        let seed =
            seed.ok_or_else(|| Error::usage(format!("kernel '{s}' resamples; pass --seed")))?;
        base = if base.contains(':') {
            format!("{base},seed={seed}")
        } else {
            format!("{base}:seed={seed}")
        };
    }
    let full = match rest {
        Some(r) => format!("{base};{r}"),
        None => base,
    };
    let mut spec: KernelSpec = full.parse()?;
    if let Some(levels) = pyramid_levels {
        if !spec.is_pyramid() {
            spec = spec.with_pyramid(default_pyramid_weights(levels));
        }
    } else if spec.is_pyramid() {
        return Err(Error::usage(format!(
            "kernel '{s}' needs pyramid documents"
        )));
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_c_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0 && c.is_finite())
                .ok_or_else(|| Error::usage(format!("bad C value '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(Error::usage("the C grid is empty"));
    }
    Ok(grid)
}

pub fn text_pipeline(opts: &TextOptions) -> Result<TextPipeline> {
    let stoplist = match opts.stoplist.as_str() {
        "smart" => Stoplist::smart(),
        "none" => Stoplist::empty(),
        path => Stoplist::from_file(Path::new(path))?,
    };
    let headers: HeaderMode = opts.headers.parse()?;
    if opts.min_count == 0 {
        return Err(Error::usage("--min-count must be at least 1"));
    }
    Ok(TextPipeline {
        stoplist,
        headers,
        min_count: opts.min_count,
    })
}

pub fn kmeans_config(opts: &BofOptions, seed: u64) -> KMeansConfig {
    KMeansConfig {
        seed,
        max_iters: opts.max_iters,
        tol: opts.tol,
    }
}

fn read_descriptor_file(path: &Path) -> Result<DescriptorSet> {
    let wrap = |e: Error| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    };
    if path.extension().is_some_and(|e| e == "txt") {
        DescriptorSet::read_text(open(path)?).map_err(wrap)
    } else {
        DescriptorSet::read_binary(&mut open(path)?).map_err(wrap)
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

/// Descriptor files under a directory per class, with their labels.
pub fn load_descriptor_dirs(root: &Path) -> Result<Vec<(DescriptorSet, String)>> {
    let mut out = Vec::new();
    for class in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = class
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        for file in sorted_entries(&class)?.into_iter().filter(|p| p.is_file()) {
            out.push((read_descriptor_file(&file)?, label.clone()));
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "no descriptor files under {}",
            root.display()
        )));
    }
    Ok(out)
}

pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    if path.extension().is_some_and(|e| e == "txt") {
        gram::read_text(open(path)?)
    } else {
        gram::read_binary(path)
    }
}

pub fn write_gram(g: &GramMatrix, path: &Path, text: bool) -> Result<()> {
    if text {
        write_with(path, |w| gram::write_text(g, w))
    } else {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        gram::write_binary(g, path)
    }
}
