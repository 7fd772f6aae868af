use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::kmeans::QuantizedPoint;
use crate::count::{CountVector, WordId};
use crate::error::{Error, Result};
use crate::kernel::gram::{assemble_cross, assemble_symmetric};
use crate::kernel::{GramMatrix, KernelSpec, Prepared};

/// Per-level, per-cell word counts of one image. Level `l` has `4^l` cells
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidDoc {
    pub id: String,
    levels: Vec<Vec<CountVector>>,
}

fn cell_of(v: f64, extent: u32, side: usize) -> usize {
    ((v * side as f64 / extent as f64).floor() as usize).min(side - 1)
}

/// Bins quantized points into every level `0..=levels`.
pub fn build_pyramid(
    id: impl Into<String>,
    points: &[QuantizedPoint],
    width: u32,
    height: u32,
    levels: usize,
    vocab_size: usize,
) -> Result<PyramidDoc> {
    let id = id.into();
    if width == 0 || height == 0 {
        return Err(Error::data(format!("image '{id}' has zero size")));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.x >= 0.0 && p.x <= width as f64 && p.y >= 0.0 && p.y <= height as f64))
    {
        return Err(Error::data(format!(
            "image '{id}': point ({}, {}) lies outside {width}x{height}",
            p.x, p.y
        )));
    }
    let levels = (0..=levels)
        .map(|l| {
            let side = 1usize << l;
            let mut cells: Vec<Vec<WordId>> = vec![Vec::new(); side * side];
            for p in points {
                let r = cell_of(p.y, height, side);
                let c = cell_of(p.x, width, side);
                cells[r * side + c].push(p.word);
            }
            cells
                .into_iter()
                .map(|ws| {
                    CountVector::from_words(vocab_size, ws)
                        .map_err(|e| Error::data(format!("image '{id}': {e}")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PyramidDoc { id, levels })
}

impl PyramidDoc {
    /// Rebuilds coarser levels by summing 2x2 blocks of the finest level.
    pub fn from_finest(
        id: impl Into<String>,
        levels: usize,
        finest: Vec<CountVector>,
    ) -> Result<Self> {
        let id = id.into();
        let side = 1usize << levels;
        if finest.len() != side * side {
            return Err(Error::data(format!(
                "image '{id}': {} finest cells, expected {}",
                finest.len(),
                side * side
            )));
        }
        let w = finest.first().map(|c| c.vocab_size()).unwrap_or(0);
        if finest.iter().any(|c| c.vocab_size() != w) {
            return Err(Error::data(format!(
                "image '{id}': cells disagree on vocabulary size"
            )));
        }
        let mut out = vec![finest];
        for l in (0..levels).rev() {
            let side = 1usize << l;
            let finer = out.last().unwrap();
            let cells = (0..side * side)
                .map(|k| {
                    let (r, c) = (k / side, k % side);
                    let mut pairs = Vec::new();
                    for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        pairs.extend_from_slice(
                            finer[(2 * r + dr) * 2 * side + 2 * c + dc].entries(),
                        );
                    }
                    CountVector::from_pairs(w, pairs)
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(cells);
        }
        out.reverse();
        Ok(PyramidDoc { id, levels: out })
    }

    /// Highest level index `L`.
    pub fn levels(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn vocab_size(&self) -> usize {
        self.levels[0][0].vocab_size()
    }

    pub fn level(&self, l: usize) -> &[CountVector] {
        &self.levels[l]
    }

    /// Whole-image counts.
    pub fn total_counts(&self) -> &CountVector {
        &self.levels[0][0]
    }
}

/// Level weights `1/2^L` for level 0 and `1/2^(L-l+1)` for level `l >= 1`.
pub fn default_pyramid_weights(levels: usize) -> Vec<f64> {
    (0..=levels)
        .map(|l| {
            let e = if l == 0 { levels } else { levels - l + 1 };
            0.5f64.powi(e as i32)
        })
        .collect()
}

/// A pyramid document with every cell prepared for one base kernel; empty
/// cells and zero-weight levels are left as `None`.
struct PreparedPyramid {
    levels: Vec<Vec<Option<Prepared>>>,
}

fn check_shape(doc: &PyramidDoc, weights: &[f64]) -> Result<()> {
    if doc.levels() + 1 != weights.len() {
        return Err(Error::usage(format!(
            "image '{}' has {} pyramid levels, weights cover {}",
            doc.id,
            doc.levels() + 1,
            weights.len()
        )));
    }
    Ok(())
}

impl PreparedPyramid {
    fn new(doc: &PyramidDoc, base: &KernelSpec, weights: &[f64]) -> Result<Self> {
        check_shape(doc, weights)?;
        let levels = doc
            .levels
            .iter()
            .enumerate()
            .map(|(l, cells)| {
                cells
                    .iter()
                    .enumerate()
                    .map(|(c, counts)| {
                        if weights[l] == 0.0 || counts.is_empty() {
                            return Ok(None);
                        }
                        Prepared::new(base, counts, &format!("{}/L{l}/c{c}", doc.id)).map(Some)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedPyramid { levels })
    }

    fn eval(&self, other: &PreparedPyramid, weights: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (l, (a, b)) in self.levels.iter().zip(&other.levels).enumerate() {
            let mut level = 0.0;
            for (ca, cb) in a.iter().zip(b) {
                if let (Some(ca), Some(cb)) = (ca, cb) {
                    level += ca.eval(cb)?;
                }
            }
            total += weights[l] * level;
        }
        Ok(total)
    }
}

fn check_base(base: &KernelSpec, weights: &[f64]) -> Result<()> {
    if base.is_pyramid() {
        return Err(Error::usage(
            "pyramid base kernel must not itself be a pyramid",
        ));
    }
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::usage(
            "pyramid weights must be a non-empty list of non-negative reals",
        ));
    }
    base.validate()
}

fn check_pair(a: &PyramidDoc, b: &PyramidDoc) -> Result<()> {
    if a.levels() != b.levels() || a.vocab_size() != b.vocab_size() {
        return Err(Error::usage(format!(
            "pyramid shape mismatch between '{}' (L={}, W={}) and '{}' (L={}, W={})",
            a.id,
            a.levels(),
            a.vocab_size(),
            b.id,
            b.levels(),
            b.vocab_size()
        )));
    }
    Ok(())
}

/// `Σ_l weights[l] · Σ_c κ(a_{l,c}, b_{l,c})`; a cell pair with an empty
/// side contributes 0.
pub fn pyramid_kernel(
    a: &PyramidDoc,
    b: &PyramidDoc,
    base: &KernelSpec,
    weights: &[f64],
) -> Result<f64> {
    check_base(base, weights)?;
    check_pair(a, b)?;
    let pa = PreparedPyramid::new(a, base, weights)?;
    let pb = PreparedPyramid::new(b, base, weights)?;
    pa.eval(&pb, weights)
}

fn split_spec(spec: &KernelSpec) -> Result<(KernelSpec, Vec<f64>)> {
    if !spec.is_pyramid() {
        return Err(Error::usage(format!("'{spec}' is not a pyramid kernel")));
    }
    let base = spec.base_kernel();
    check_base(&base, &spec.pyramid_weights)?;
    Ok((base, spec.pyramid_weights.clone()))
}

fn prepare_all(
    docs: &[PyramidDoc],
    base: &KernelSpec,
    weights: &[f64],
) -> Result<Vec<PreparedPyramid>> {
    if let Some(first) = docs.first() {
        for d in docs {
            check_pair(first, d)?;
        }
    }
    docs.par_iter()
        .map(|d| PreparedPyramid::new(d, base, weights))
        .collect()
}

/// Gram matrix for a pyramid kernel spec (one with pyramid weights).
pub fn build_pyramid_gram(docs: &[PyramidDoc], spec: &KernelSpec) -> Result<GramMatrix> {
    let (base, weights) = split_spec(spec)?;
    let prepared = prepare_all(docs, &base, &weights)?;
    let ids = docs.iter().map(|d| d.id.clone()).collect();
    assemble_symmetric(ids, &prepared, spec.fingerprint(), |a, b| {
        a.eval(b, &weights)
    })
}

pub fn build_pyramid_gram_cross(
    rows: &[PyramidDoc],
    cols: &[PyramidDoc],
    spec: &KernelSpec,
) -> Result<GramMatrix> {
    let (base, weights) = split_spec(spec)?;
    if let (Some(a), Some(b)) = (rows.first(), cols.first()) {
        check_pair(a, b)?;
    }
    let pr = prepare_all(rows, &base, &weights)?;
    let pc = prepare_all(cols, &base, &weights)?;
    assemble_cross(
        rows.iter().map(|d| d.id.clone()).collect(),
        cols.iter().map(|d| d.id.clone()).collect(),
        &pr,
        &pc,
        spec.fingerprint(),
        |a, b| a.eval(b, &weights),
    )
}

/// Labeled pyramid documents sharing one visual vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidCorpus {
    pub levels: usize,
    pub vocab_size: usize,
    pub vocab_fingerprint: [u8; 32],
    pub docs: Vec<PyramidDoc>,
    pub labels: Vec<String>,
}

impl PyramidCorpus {
    pub fn new(
        levels: usize,
        vocab_size: usize,
        vocab_fingerprint: [u8; 32],
        docs: Vec<PyramidDoc>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::data(
                "pyramid corpus has mismatched document and label counts",
            ));
        }
        if let Some(d) = docs
            .iter()
            .find(|d| d.levels() != levels || d.vocab_size() != vocab_size)
        {
            return Err(Error::data(format!(
                "image '{}' has L={}, W={}; corpus has L={levels}, W={vocab_size}",
                d.id,
                d.levels(),
                d.vocab_size()
            )));
        }
        Ok(PyramidCorpus {
            levels,
            vocab_size,
            vocab_fingerprint,
            docs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn label_set(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Header lines `W`, `L`, `vocab_fingerprint`, `M`, then one
    /// `id<TAB>label<TAB>cell:word:count ...` line per image holding the
    /// finest level only.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "W {}", self.vocab_size)?;
        writeln!(w, "L {}", self.levels)?;
        writeln!(
            w,
            "vocab_fingerprint {}",
            hex::encode(self.vocab_fingerprint)
        )?;
        writeln!(w, "M {}", self.docs.len())?;
        for (d, label) in self.docs.iter().zip(&self.labels) {
            let mut parts = Vec::new();
            for (c, cell) in d.level(self.levels).iter().enumerate() {
                for (word, n) in cell.entries() {
                    parts.push(format!("{c}:{word}:{n}"));
                }
            }
            writeln!(w, "{}\t{}\t{}", d.id, label, parts.join(" "))?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::data("truncated pyramid corpus header"))?
                .map_err(|e| Error::io("<pyramid corpus>", e))?;
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| {
                    Error::data(format!(
                        "expected pyramid corpus header '{key}', got '{line}'"
                    ))
                })
        };
        let w: usize = header("W")?.parse().map_err(|_| Error::data("bad W"))?;
        let levels: usize = header("L")?.parse().map_err(|_| Error::data("bad L"))?;
        if levels > 8 {
            return Err(Error::data(format!(
                "pyramid level {levels} is implausibly deep"
            )));
        }
        let mut fp = [0u8; 32];
        hex::decode_to_slice(header("vocab_fingerprint")?, &mut fp)
            .map_err(|_| Error::data("bad vocabulary fingerprint"))?;
        let m: usize = header("M")?.parse().map_err(|_| Error::data("bad M"))?;
        let side = 1usize << levels;
        let mut docs = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<pyramid corpus>", e))?;
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::data(format!("pyramid corpus line {}: {msg}", n + 1));
            let mut parts = line.splitn(3, '\t');
            let (Some(id), Some(label), Some(body)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected id<TAB>label<TAB>cells"));
            };
            let mut cells = vec![Vec::new(); side * side];
            for tok in body.split_whitespace() {
                let f: Vec<&str> = tok.split(':').collect();
                let [c, word, count] = f[..] else {
                    return Err(bad("expected cell:word:count"));
                };
                let c: usize = c.parse().map_err(|_| bad("bad cell"))?;
                if c >= cells.len() {
                    return Err(bad("cell index out of range"));
                }
                cells[c].push((
                    word.parse::<WordId>().map_err(|_| bad("bad word id"))?,
                    count.parse::<u32>().map_err(|_| bad("bad count"))?,
                ));
            }
            let finest = cells
                .into_iter()
                .map(|p| CountVector::from_sorted(w, p).map_err(|e| bad(&e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            docs.push(PyramidDoc::from_finest(id, levels, finest)?);
            labels.push(label.to_string());
        }
        if docs.len() != m {
            return Err(Error::data(format!(
                "pyramid corpus header says {m} images, found {}",
                docs.len()
            )));
        }
        Self::new(levels, w, fp, docs, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::evaluate;

    fn pt(x: f64, y: f64, word: WordId) -> QuantizedPoint {
        QuantizedPoint { x, y, word }
    }

    #[test]
    fn level_zero_holds_everything() {
        let d = build_pyramid("a", &[pt(0.0, 0.0, 0), pt(3.0, 1.0, 1)], 4, 4, 0, 2).unwrap();
        assert_eq!(d.level(0).len(), 1);
        assert_eq!(d.total_counts().to_dense(), vec![1, 1]);
    }

    #[test]
    fn center_goes_to_lower_right() {
        let d = build_pyramid("a", &[pt(2.0, 2.0, 0)], 4, 4, 1, 1).unwrap();
        assert_eq!(d.level(1)[3].total(), 1);
        let edge = build_pyramid("a", &[pt(4.0, 4.0, 0)], 4, 4, 2, 1).unwrap();
        assert_eq!(edge.level(2)[15].total(), 1);
    }

    #[test]
    fn outside_point_rejected() {
        assert!(matches!(
            build_pyramid("a", &[pt(4.01, 0.0, 0)], 4, 4, 1, 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn default_weights() {
        assert_eq!(default_pyramid_weights(2), vec![0.25, 0.25, 0.5]);
        assert_eq!(default_pyramid_weights(0), vec![1.0]);
        assert_eq!(default_pyramid_weights(1), vec![0.5, 0.5]);
    }

    #[test]
    fn level_zero_reduces_to_base_kernel() {
        let a = build_pyramid(
            "a",
            &[pt(0.0, 0.0, 0), pt(1.0, 1.0, 0), pt(2.0, 2.0, 1)],
            4,
            4,
            0,
            2,
        )
        .unwrap();
        let b = build_pyramid("b", &[pt(3.0, 0.0, 1)], 4, 4, 0, 2).unwrap();
        let base = KernelSpec::sensing0();
        let k = pyramid_kernel(&a, &b, &base, &[1.0]).unwrap();
        let direct = evaluate(&base, a.total_counts(), "a", b.total_counts(), "b").unwrap();
        assert_eq!(k, direct);
        assert_eq!(pyramid_kernel(&a, &b, &base, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let a = build_pyramid("a", &[pt(0.0, 0.0, 0)], 4, 4, 1, 2).unwrap();
        let b = build_pyramid("b", &[pt(0.0, 0.0, 0)], 4, 4, 2, 2).unwrap();
        assert!(matches!(
            pyramid_kernel(&a, &b, &KernelSpec::sensing0(), &[0.5, 0.5]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn corpus_file_round_trip() {
        let pts = [
            pt(0.5, 0.5, 0),
            pt(3.5, 0.5, 1),
            pt(3.9, 3.9, 1),
            pt(2.0, 2.0, 0),
        ];
        let d = build_pyramid("img", &pts, 4, 4, 2, 2).unwrap();
        let c = PyramidCorpus::new(2, 2, [7; 32], vec![d], vec!["cat".into()]).unwrap();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(PyramidCorpus::read(&buf[..]).unwrap(), c);
    }
}
