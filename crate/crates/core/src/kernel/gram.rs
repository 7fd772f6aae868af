//! Gram matrices: assembly, alignment and serialization.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! square (version 1):      "SGRM" | u32 1 | u64 M          | [u8; 32] fingerprint | M·M f64 row-major
//! rectangular (version 2): "SGRM" | u32 2 | u64 rows | u64 cols | [u8; 32] fingerprint | rows·cols f64
//! ```
//!
//! Row and column document ids travel in a sidecar text file (`<path>.ids`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::functions::Prepared;
use super::spec::KernelSpec;
use crate::count::Document;
use crate::error::{Error, Result};

pub const GRAM_MAGIC: &[u8; 4] = b"SGRM";

/// Dense matrix of kernel values with the identities of its rows and
/// columns. Square Gram matrices built from one document list are exactly
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    fingerprint: [u8; 32],
}

impl GramMatrix {
    /// Wraps an existing row-major matrix. All entries must be finite.
    pub fn from_values(
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        values: Vec<f64>,
        fingerprint: [u8; 32],
    ) -> Result<Self> {
        let (rows, cols) = (row_ids.len(), col_ids.len());
        if values.len() != rows * cols {
            return Err(Error::data(format!(
                "gram has {} values, expected {rows}x{cols}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite gram entry at ({}, {})",
                row_ids[i / cols],
                col_ids[i % cols]
            )));
        }
        Ok(GramMatrix {
            rows,
            cols,
            values,
            row_ids,
            col_ids,
            fingerprint,
        })
    }

    /// Square matrix whose rows and columns are the same documents, with
    /// generated ids `0..M`. Handy for tests and oracle cross-checks.
    pub fn from_square(m: usize, values: Vec<f64>) -> Result<Self> {
        let ids: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        Self::from_values(ids.clone(), ids, values, [0; 32])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols && self.row_ids == self.col_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        self.fingerprint
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Sub-matrix on the given row and column positions.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> GramMatrix {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &r in rows {
            let row = self.row(r);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        GramMatrix {
            rows: rows.len(),
            cols: cols.len(),
            values,
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            col_ids: cols.iter().map(|&c| self.col_ids[c].clone()).collect(),
            fingerprint: self.fingerprint,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Gram matrix of `docs` against themselves; the upper triangle is
/// evaluated and mirrored.
pub fn build_gram(docs: &[Document], spec: &KernelSpec) -> Result<GramMatrix> {
    reject_pyramid(spec)?;
    let prepared = prepare_all(docs, spec)?;
    let ids = ids_of(docs);
    assemble_symmetric(ids, &prepared, spec.fingerprint(), |a, b| a.eval(b))
}

/// Rectangular block: one row per document in `rows`, one column per
/// document in `cols` (typically test vs. train).
pub fn build_gram_cross(
    rows: &[Document],
    cols: &[Document],
    spec: &KernelSpec,
) -> Result<GramMatrix> {
    reject_pyramid(spec)?;
    let pr = prepare_all(rows, spec)?;
    let pc = prepare_all(cols, spec)?;
    assemble_cross(
        ids_of(rows),
        ids_of(cols),
        &pr,
        &pc,
        spec.fingerprint(),
        |a, b| a.eval(b),
    )
}

fn reject_pyramid(spec: &KernelSpec) -> Result<()> {
    if spec.is_pyramid() {
        return Err(Error::usage(
            "pyramid kernels need pyramid documents; use the pyramid gram builders",
        ));
    }
    Ok(())
}

fn ids_of(docs: &[Document]) -> Vec<String> {
    docs.iter().map(|d| d.id.clone()).collect()
}

fn prepare_all(docs: &[Document], spec: &KernelSpec) -> Result<Vec<Prepared>> {
    if let Some(first) = docs.first() {
        let w = first.counts.vocab_size();
        if let Some(bad) = docs.iter().find(|d| d.counts.vocab_size() != w) {
            return Err(Error::usage(format!(
                "document '{}' has vocabulary size {}, expected {w}",
                bad.id,
                bad.counts.vocab_size()
            )));
        }
    }
    docs.par_iter()
        .map(|d| {
            Prepared::new(spec, &d.counts, &d.id)
                .map_err(|e| Error::usage(format!("document '{}': {e}", d.id)))
        })
        .collect()
}

pub(crate) fn assemble_symmetric<P: Sync>(
    ids: Vec<String>,
    items: &[P],
    fingerprint: [u8; 32],
    eval: impl Fn(&P, &P) -> Result<f64> + Sync,
) -> Result<GramMatrix> {
    let m = items.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| pair_value(&eval, &items[i], &items[j], &ids[i], &ids[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + k;
            values[i * m + j] = v;
            values[j * m + i] = v;
        }
    }
    Ok(GramMatrix {
        rows: m,
        cols: m,
        values,
        row_ids: ids.clone(),
        col_ids: ids,
        fingerprint,
    })
}

pub(crate) fn assemble_cross<P: Sync>(
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    rows: &[P],
    cols: &[P],
    fingerprint: [u8; 32],
    eval: impl Fn(&P, &P) -> Result<f64> + Sync,
) -> Result<GramMatrix> {
    let values: Vec<Vec<f64>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            cols.iter()
                .enumerate()
                .map(|(j, b)| pair_value(&eval, a, b, &row_ids[i], &col_ids[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(GramMatrix {
        rows: rows.len(),
        cols: cols.len(),
        values: values.concat(),
        row_ids,
        col_ids,
        fingerprint,
    })
}

fn pair_value<P>(
    eval: &impl Fn(&P, &P) -> Result<f64>,
    a: &P,
    b: &P,
    ia: &str,
    ib: &str,
) -> Result<f64> {
    let v = eval(a, b).map_err(|e| match e {
        Error::Usage(m) => Error::Usage(format!("kernel({ia}, {ib}): {m}")),
        Error::Data(m) => Error::Data(format!("kernel({ia}, {ib}): {m}")),
        other => other,
    })?;
    if !v.is_finite() {
        return Err(Error::data(format!(
            "kernel({ia}, {ib}) is not finite: {v}"
        )));
    }
    Ok(v)
}

fn ids_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids");
    PathBuf::from(p)
}

/// Writes the binary matrix to `path` and the document ids to `path.ids`.
pub fn write_binary(gram: &GramMatrix, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(GRAM_MAGIC).map_err(io)?;
    if gram.is_square() {
        w.write_all(&1u32.to_le_bytes()).map_err(io)?;
        w.write_all(&(gram.rows as u64).to_le_bytes()).map_err(io)?;
    } else {
        w.write_all(&2u32.to_le_bytes()).map_err(io)?;
        w.write_all(&(gram.rows as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(gram.cols as u64).to_le_bytes()).map_err(io)?;
    }
    w.write_all(&gram.fingerprint).map_err(io)?;
    for v in &gram.values {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)?;
    write_ids(gram, &ids_path(path))
}

fn write_ids(gram: &GramMatrix, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for id in &gram.row_ids {
        writeln!(w, "r\t{id}").map_err(io)?;
    }
    for id in &gram.col_ids {
        writeln!(w, "c\t{id}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a matrix written by [`write_binary`]. When the `.ids` sidecar is
/// missing, positional ids `0..n` are used.
pub fn read_binary(path: &Path) -> Result<GramMatrix> {
    let io = |e| Error::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != GRAM_MAGIC {
        return Err(Error::data(format!("{}: not a gram file", path.display())));
    }
    let version = read_u32(&mut r).map_err(io)?;
    let (rows, cols) = match version {
        1 => {
            let m = read_u64(&mut r).map_err(io)? as usize;
            (m, m)
        }
        2 => (
            read_u64(&mut r).map_err(io)? as usize,
            read_u64(&mut r).map_err(io)? as usize,
        ),
        v => return Err(Error::data(format!("unsupported gram version {v}"))),
    };
    let mut fingerprint = [0u8; 32];
    r.read_exact(&mut fingerprint).map_err(io)?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::data("gram dimensions overflow"))?;
    let mut values = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf).map_err(io)?;
        values.push(f64::from_le_bytes(buf));
    }
    let ids = ids_path(path);
    let (row_ids, col_ids) = if ids.exists() {
        read_ids(&ids)?
    } else {
        let r = (0..rows).map(|i| i.to_string()).collect();
        let c = (0..cols).map(|i| i.to_string()).collect();
        (r, c)
    };
    if row_ids.len() != rows || col_ids.len() != cols {
        return Err(Error::data(format!(
            "{}: id sidecar does not match a {rows}x{cols} matrix",
            path.display()
        )));
    }
    GramMatrix::from_values(row_ids, col_ids, values, fingerprint)
}

fn read_ids(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match line.split_once('\t') {
            Some(("r", id)) => rows.push(id.to_string()),
            Some(("c", id)) => cols.push(id.to_string()),
            _ if line.is_empty() => {}
            _ => {
                return Err(Error::data(format!(
                    "{}: malformed id line '{line}'",
                    path.display()
                )))
            }
        }
    }
    Ok((rows, cols))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Debug text form: one row per line, space-separated, 17 significant digits.
pub fn write_text(gram: &GramMatrix, w: &mut impl Write) -> std::io::Result<()> {
    for i in 0..gram.rows {
        let line: Vec<String> = gram.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Parses the text form; ids are positional.
pub fn read_text(r: impl BufRead) -> Result<GramMatrix> {
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for line in r.lines() {
        let line = line.map_err(|e| Error::io("<gram text>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::data(format!("gram text row {rows}: {e}")))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::data(format!(
                    "gram text row {rows} has {} values, expected {c}",
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    GramMatrix::from_values(
        (0..rows).map(|i| i.to_string()).collect(),
        (0..cols).map(|i| i.to_string()).collect(),
        values,
        [0; 32],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::CountVector;

    fn docs() -> Vec<Document> {
        [[3u32, 0, 1], [0, 2, 2], [1, 1, 1]]
            .iter()
            .enumerate()
            .map(|(i, d)| Document::new(format!("d{i}"), CountVector::from_dense(d).unwrap()))
            .collect()
    }

    #[test]
    fn single_document_single_word() {
        let d = vec![Document::new("x", CountVector::from_dense(&[4]).unwrap())];
        let g = build_gram(&d, &KernelSpec::sensing0()).unwrap();
        assert_eq!(g.values(), &[0.0]);
    }

    #[test]
    fn symmetric_for_every_family() {
        for spec in [
            KernelSpec::exact(),
            KernelSpec::sensing0(),
            KernelSpec::sensing1(10),
            KernelSpec::sensing2(30, 5),
            KernelSpec::rbf(0.5),
            KernelSpec::ppk(0.5),
        ] {
            let g = build_gram(&docs(), &spec).unwrap();
            assert!(g.is_symmetric(), "{spec}");
        }
    }

    #[test]
    fn cross_block_matches_symmetric_block() {
        let spec = KernelSpec::sensing2(40, 11);
        let d = docs();
        let full = build_gram(&d, &spec).unwrap();
        let cross = build_gram_cross(&d[1..], &d, &spec).unwrap();
        for i in 0..2 {
            assert_eq!(cross.row(i), full.row(i + 1));
        }
        assert_eq!(cross.row_ids(), &["d1".to_string(), "d2".to_string()]);
    }

    #[test]
    fn errors_name_the_offending_document() {
        let mut d = docs();
        d.push(Document::new("empty", CountVector::empty(3).unwrap()));
        let e = build_gram(&d, &KernelSpec::sensing1(5)).unwrap_err();
        assert!(e.to_string().contains("empty"), "{e}");
        let mut d = docs();
        d.push(Document::new(
            "wide",
            CountVector::from_dense(&[1, 1, 1, 1]).unwrap(),
        ));
        let e = build_gram(&d, &KernelSpec::sensing0()).unwrap_err();
        assert!(e.to_string().contains("wide"), "{e}");
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = docs();
        let spec = KernelSpec::sensing1(20);
        for g in [
            build_gram(&d, &spec).unwrap(),
            build_gram_cross(&d[..1], &d, &spec).unwrap(),
        ] {
            let p = dir.path().join("g.bin");
            write_binary(&g, &p).unwrap();
            assert_eq!(read_binary(&p).unwrap(), g);
        }
    }

    #[test]
    fn binary_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_gram(&docs(), &KernelSpec::sensing0()).unwrap();
        let p = dir.path().join("g.bin");
        write_binary(&g, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"SGRM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(&bytes[16..48], &KernelSpec::sensing0().fingerprint());
        assert_eq!(bytes.len(), 48 + 9 * 8);
        assert_eq!(
            f64::from_le_bytes(bytes[48..56].try_into().unwrap()),
            g.get(0, 0)
        );
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = build_gram(&docs(), &KernelSpec::sensing1(7)).unwrap();
        let mut buf = Vec::new();
        write_text(&g, &mut buf).unwrap();
        let back = read_text(&buf[..]).unwrap();
        assert_eq!(back.values(), g.values());
        let first = String::from_utf8(buf).unwrap();
        let tok = first.split_whitespace().next().unwrap();
        let mantissa = tok.split('e').next().unwrap().replace(['-', '.'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(GramMatrix::from_square(1, vec![f64::NAN]).is_err());
    }
}
