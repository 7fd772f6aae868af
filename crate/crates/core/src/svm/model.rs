use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use super::smo::{solve_dual, TrainConfig};
use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector {
    /// Position in the training Gram matrix.
    pub index: usize,
    pub id: String,
    /// β_i = α_i y_i
    pub beta: f64,
}

/// Trained binary classifier: f(x) = Σ β_i K(x, x_i) + bias, label = +1 when
/// f(x) ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support: Vec<SupportVector>,
    pub bias: f64,
    pub c: f64,
    /// Canonical kernel spec string (empty when unknown).
    pub kernel: String,
    pub kernel_fingerprint: [u8; 32],
    /// Name of the class mapped to +1.
    pub label: String,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    /// Same separator with the roles of the classes swapped.
    pub fn negated(&self, label: impl Into<String>) -> SvmModel {
        SvmModel {
            support: self
                .support
                .iter()
                .map(|sv| SupportVector {
                    beta: -sv.beta,
                    ..sv.clone()
                })
                .collect(),
            bias: -self.bias,
            label: label.into(),
            ..self.clone()
        }
    }
}

/// Trains a soft-margin SVM on a square training Gram matrix with labels ±1.
pub fn train_binary(gram: &GramMatrix, labels: &[i8], cfg: &TrainConfig) -> Result<SvmModel> {
    if !gram.is_square() {
        return Err(Error::usage(
            "training gram must be square over one document set",
        ));
    }
    if labels.len() != gram.rows() {
        return Err(Error::usage(format!(
            "{} labels for a {}x{} gram",
            labels.len(),
            gram.rows(),
            gram.cols()
        )));
    }
    if !gram.is_symmetric() {
        return Err(Error::data("training gram is not symmetric"));
    }
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| match l {
            1 => Ok(1.0),
            -1 => Ok(-1.0),
            other => Err(Error::usage(format!(
                "binary labels must be ±1, got {other}"
            ))),
        })
        .collect::<Result<_>>()?;
    let sol = solve_dual(gram.values(), &y, cfg)?;
    let support = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| SupportVector {
            index: i,
            id: gram.row_ids()[i].clone(),
            beta: a * y[i],
        })
        .collect();
    Ok(SvmModel {
        support,
        bias: -sol.rho,
        c: cfg.c,
        kernel: String::new(),
        kernel_fingerprint: gram.fingerprint(),
        label: "+1".to_string(),
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Column position of every support vector in `gram`, matched by id.
fn support_columns(support: &[SupportVector], gram: &GramMatrix) -> Result<Vec<usize>> {
    let aligned = support
        .iter()
        .all(|sv| gram.col_ids().get(sv.index).is_some_and(|id| *id == sv.id));
    if aligned {
        return Ok(support.iter().map(|sv| sv.index).collect());
    }
    let by_id: HashMap<&str, usize> = gram
        .col_ids()
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();
    support
        .iter()
        .map(|sv| {
            by_id.get(sv.id.as_str()).copied().ok_or_else(|| {
                Error::usage(format!("gram has no column for support vector '{}'", sv.id))
            })
        })
        .collect()
}

fn check_fingerprint(model: &[u8; 32], gram: &GramMatrix) -> Result<()> {
    let g = gram.fingerprint();
    if *model != [0; 32] && g != [0; 32] && g != *model {
        return Err(Error::usage(
            "gram was built with a different kernel than the model",
        ));
    }
    Ok(())
}

/// One decision value per row of a test-vs-train Gram block.
pub fn decision_values(model: &SvmModel, gram: &GramMatrix) -> Result<Vec<f64>> {
    check_fingerprint(&model.kernel_fingerprint, gram)?;
    let cols = support_columns(&model.support, gram)?;
    Ok((0..gram.rows())
        .map(|r| {
            let row = gram.row(r);
            model
                .support
                .iter()
                .zip(&cols)
                .map(|(sv, &c)| sv.beta * row[c])
                .sum::<f64>()
                + model.bias
        })
        .collect())
}

/// Binary label for a decision value; zero maps to +1.
pub fn sign_label(value: f64) -> i8 {
    if value >= 0.0 {
        1
    } else {
        -1
    }
}

/// One-vs-all ensemble: one binary model per class, `classes[k]` positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub classes: Vec<String>,
    pub models: Vec<SvmModel>,
}

/// Trains one binary model per class (class = +1, rest = −1). Labels are
/// class ids indexing `classes`. With exactly two classes a single problem is
/// solved and the second model is its negation.
pub fn train_one_vs_all(
    gram: &GramMatrix,
    labels: &[usize],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<MulticlassModel> {
    if classes.len() < 2 {
        return Err(Error::usage("one-vs-all needs at least two classes"));
    }
    let mut counts = vec![0usize; classes.len()];
    for &l in labels {
        *counts.get_mut(l).ok_or_else(|| {
            Error::usage(format!("label id {l} outside {} classes", classes.len()))
        })? += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::usage(format!(
            "class '{}' has no training examples",
            classes[k]
        )));
    }
    let binary = |k: usize| -> Vec<i8> {
        labels
            .iter()
            .map(|&l| if l == k { 1 } else { -1 })
            .collect()
    };
    let models = if classes.len() == 2 {
        let mut first = train_binary(gram, &binary(0), cfg)?;
        first.label = classes[0].clone();
        let second = first.negated(classes[1].clone());
        vec![first, second]
    } else {
        (0..classes.len())
            .into_par_iter()
            .map(|k| {
                train_binary(gram, &binary(k), cfg).map(|mut m| {
                    m.label = classes[k].clone();
                    m
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(MulticlassModel {
        classes: classes.to_vec(),
        models,
    })
}

impl MulticlassModel {
    pub fn set_kernel(&mut self, kernel: &str) {
        for m in &mut self.models {
            m.kernel = kernel.to_string();
        }
    }

    /// Per-class decision values, indexed `[test row][class]`.
    pub fn decision_matrix(&self, gram: &GramMatrix) -> Result<Vec<Vec<f64>>> {
        let per_class = self
            .models
            .iter()
            .map(|m| decision_values(m, gram))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..gram.rows())
            .map(|r| per_class.iter().map(|v| v[r]).collect())
            .collect())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Predicted class id per test row.
pub fn predict_multiclass(model: &MulticlassModel, gram: &GramMatrix) -> Result<Vec<usize>> {
    Ok(model
        .decision_matrix(gram)?
        .iter()
        .map(|row| argmax_lowest(row))
        .collect())
}

fn write_block(m: &SvmModel, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "sensekit-svm {MODEL_FORMAT_VERSION}")?;
    writeln!(w, "kernel {}", m.kernel)?;
    writeln!(
        w,
        "kernel_fingerprint {}",
        hex::encode(m.kernel_fingerprint)
    )?;
    writeln!(w, "c {:.16e}", m.c)?;
    writeln!(w, "bias {:.16e}", m.bias)?;
    writeln!(w, "label {}", m.label)?;
    writeln!(w, "support_vectors {}", m.support.len())?;
    for sv in &m.support {
        writeln!(w, "{}\t{}\t{:.16e}", sv.id, sv.index, sv.beta)?;
    }
    writeln!(w, "end")
}

/// Writes every per-class model as a consecutive block.
pub fn write_models(models: &[SvmModel], w: &mut impl Write) -> std::io::Result<()> {
    for m in models {
        write_block(m, w)?;
    }
    Ok(())
}

/// Parses the blocks written by [`write_models`].
pub fn read_models(r: impl BufRead) -> Result<Vec<SvmModel>> {
    let mut lines = r.lines().enumerate();
    let mut models = Vec::new();
    let bad = |n: usize, msg: &str| Error::data(format!("model line {}: {msg}", n + 1));
    let mut next = |expect: &str| -> Result<Option<(usize, String)>> {
        loop {
            match lines.next() {
                None => return Ok(None),
                Some((n, l)) => {
                    let l = l.map_err(|e| Error::io("<model>", e))?;
                    if l.trim().is_empty() && expect != "sv" {
                        continue;
                    }
                    return Ok(Some((n, l)));
                }
            }
        }
    };
    fn field<'a>(n: usize, line: &'a str, key: &str) -> Result<&'a str> {
        line.strip_prefix(key)
            .and_then(|r| {
                r.strip_prefix(' ')
                    .or(if r.is_empty() { Some("") } else { None })
            })
            .ok_or_else(|| Error::data(format!("model line {}: expected '{key}'", n + 1)))
    }
    while let Some((n, header)) = next("header")? {
        let version = field(n, &header, "sensekit-svm")?;
        if version.trim() != MODEL_FORMAT_VERSION.to_string() {
            return Err(bad(n, &format!("unsupported model version '{version}'")));
        }
        let mut get = |key: &str| -> Result<String> {
            let (n, l) = next(key)?.ok_or_else(|| Error::data("truncated model file"))?;
            Ok(field(n, &l, key)?.to_string())
        };
        let kernel = get("kernel")?;
        let fp_hex = get("kernel_fingerprint")?;
        let c: f64 = get("c")?
            .parse()
            .map_err(|_| Error::data("bad C in model"))?;
        let bias: f64 = get("bias")?
            .parse()
            .map_err(|_| Error::data("bad bias in model"))?;
        let label = get("label")?;
        let count: usize = get("support_vectors")?
            .parse()
            .map_err(|_| Error::data("bad support vector count in model"))?;
        let mut fingerprint = [0u8; 32];
        hex::decode_to_slice(fp_hex.trim(), &mut fingerprint)
            .map_err(|_| Error::data("bad kernel fingerprint in model"))?;
        let mut support = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, l) = next("sv")?.ok_or_else(|| Error::data("truncated model file"))?;
            let mut parts = l.split('\t');
            let (Some(id), Some(idx), Some(beta), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(n, "expected 'id<TAB>index<TAB>beta'"));
            };
            support.push(SupportVector {
                id: id.to_string(),
                index: idx.parse().map_err(|_| bad(n, "bad index"))?,
                beta: beta.parse().map_err(|_| bad(n, "bad beta"))?,
            });
        }
        let (n, end) = next("end")?.ok_or_else(|| Error::data("truncated model file"))?;
        if end.trim() != "end" {
            return Err(bad(n, "expected 'end'"));
        }
        models.push(SvmModel {
            support,
            bias,
            c,
            kernel,
            kernel_fingerprint: fingerprint,
            label,
            objective: f64::NAN,
            iterations: 0,
            converged: true,
        });
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> GramMatrix {
        GramMatrix::from_square(2, vec![1.0, -1.0, -1.0, 1.0]).unwrap()
    }

    #[test]
    fn two_point_decisions() {
        let m = train_binary(&two_point(), &[1, -1], &TrainConfig::with_c(10.0)).unwrap();
        assert!(m.bias.abs() < 1e-12);
        let d = decision_values(&m, &two_point()).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] + 1.0).abs() < 1e-12);
        assert_eq!(m.support.len(), 2);
        assert!((m.support[0].beta - 0.5).abs() < 1e-12);
        assert!((m.support[1].beta + 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_give_constant_bias() {
        let m = SvmModel {
            support: vec![],
            bias: 0.75,
            c: 1.0,
            kernel: String::new(),
            kernel_fingerprint: [0; 32],
            label: "+1".into(),
            objective: 0.0,
            iterations: 0,
            converged: true,
        };
        let g = GramMatrix::from_values(
            vec!["t0".into(), "t1".into()],
            vec!["a".into()],
            vec![3.0, 4.0],
            [0; 32],
        )
        .unwrap();
        assert_eq!(decision_values(&m, &g).unwrap(), vec![0.75, 0.75]);
    }

    #[test]
    fn misaligned_columns_are_rejected() {
        let m = train_binary(&two_point(), &[1, -1], &TrainConfig::with_c(10.0)).unwrap();
        let g = GramMatrix::from_values(
            vec!["t".into()],
            vec!["0".into(), "7".into()],
            vec![1.0, 1.0],
            [0; 32],
        )
        .unwrap();
        assert!(matches!(decision_values(&m, &g), Err(Error::Usage(_))));
        // reordered columns are matched by id
        let g = GramMatrix::from_values(
            vec!["t".into()],
            vec!["1".into(), "0".into()],
            vec![-1.0, 1.0],
            [0; 32],
        )
        .unwrap();
        assert!((decision_values(&m, &g).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_usage_error() {
        assert!(matches!(
            train_binary(&two_point(), &[1, 1], &TrainConfig::default()),
            Err(Error::Usage(_))
        ));
        let classes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        assert!(matches!(
            train_one_vs_all(&two_point(), &[0, 1], &classes, &TrainConfig::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax_lowest(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_lowest(&[-1.0, 2.0, 2.0]), 1);
        assert_eq!(argmax_lowest(&[-1.0, 0.0, 3.0]), 2);
    }

    #[test]
    fn model_file_round_trip() {
        let g = two_point();
        let classes = vec!["pos".to_string(), "neg".to_string()];
        let mut mc = train_one_vs_all(&g, &[0, 1], &classes, &TrainConfig::with_c(10.0)).unwrap();
        mc.set_kernel("sensing0");
        let mut buf = Vec::new();
        write_models(&mc.models, &mut buf).unwrap();
        let back = read_models(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in back.iter().zip(&mc.models) {
            assert_eq!(a.support, b.support);
            assert_eq!(a.bias, b.bias);
            assert_eq!(a.label, b.label);
            assert_eq!(a.kernel, "sensing0");
        }
        assert!(read_models(&b"sensekit-svm 9\n"[..]).is_err());
    }
}
