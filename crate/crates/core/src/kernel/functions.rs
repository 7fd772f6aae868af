//! Pairwise kernel evaluation.
//!
//! Every kernel is evaluated through a per-document [`Prepared`] form so that
//! Gram assembly touches each document's log-factorials (or its Sensing 2
//! resample) once. The public pair functions are thin wrappers over the same
//! code path, which keeps them bitwise identical to Gram entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::spec::{KernelFamily, KernelSpec};
use crate::count::{for_each_shared, for_each_union, CountVector, FrequencyVector, WordId};
use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma};

/// log K(a, b) for the multinomial sensing model with a uniform prior over
/// the simplex:
///
/// Σ_w [lnΓ(a_w+b_w+1) − lnΓ(a_w+1) − lnΓ(b_w+1)] + lnΓ(N_a+1) + lnΓ(N_b+1) − lnΓ(N_a+N_b+W)
///
/// Words missing from either document contribute exactly zero, so only the
/// shared support is visited.
pub fn log_kernel_exact(a: &CountVector, b: &CountVector) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    Ok(log_exact_prepared(&LogCounts::new(a), &LogCounts::new(b)))
}

/// Sensing 0: the log of the closed-form kernel.
pub fn kernel_sensing0(a: &CountVector, b: &CountVector) -> Result<f64> {
    log_kernel_exact(a, b)
}

/// Sensing 1: the log-kernel with every document rescaled to pseudo-length
/// `n`, i.e. counts replaced by n·x̄_w (real-valued, through lnΓ).
pub fn kernel_sensing1(a: &CountVector, b: &CountVector, n: u32) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    if n == 0 {
        return Err(Error::usage("sensing1 requires n > 0"));
    }
    Ok(sensing1_prepared(&Scaled::new(a, n)?, &Scaled::new(b, n)?))
}

/// Resamples `doc` to exactly `n_words` iid draws from its word frequencies.
///
/// The random stream is derived from `(seed, key)` only, where `key` is the
/// document's dataset-stable id, so a document gets the same resample in
/// every pair it takes part in.
pub fn resample(doc: &CountVector, n_words: u32, seed: u64, key: &str) -> Result<CountVector> {
    if doc.is_empty() {
        return Err(Error::usage(format!(
            "cannot resample empty document '{key}'"
        )));
    }
    if n_words == 0 {
        return Err(Error::usage("resample length must be positive"));
    }
    let mut rng = keyed_rng(seed, key);
    let cumulative: Vec<u64> = doc
        .entries()
        .iter()
        .scan(0u64, |acc, &(_, c)| {
            *acc += c as u64;
            Some(*acc)
        })
        .collect();
    let total = doc.total();
    let mut counts = vec![0u32; doc.nnz()];
    for _ in 0..n_words {
        let u = rng.random_range(0..total);
        // first slot whose cumulative count exceeds u
        let slot = cumulative.partition_point(|&c| c <= u);
        counts[slot] += 1;
    }
    let entries = doc
        .entries()
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(&(w, _), c)| (w, c))
        .collect();
    CountVector::from_sorted(doc.vocab_size(), entries)
}

/// Sensing 2: log-kernel of the two documents after each is resampled to
/// `n_words` words (see [`resample`]).
pub fn kernel_sensing2(
    a: &CountVector,
    a_key: &str,
    b: &CountVector,
    b_key: &str,
    n_words: u32,
    seed: u64,
) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    let ra = resample(a, n_words, seed, a_key)?;
    let rb = resample(b, n_words, seed, b_key)?;
    log_kernel_exact(&ra, &rb)
}

/// Gaussian RBF on word frequencies: exp(−‖a−b‖² / 2σ²).
pub fn kernel_rbf(a: &FrequencyVector, b: &FrequencyVector, sigma: f64) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::usage(format!("rbf requires sigma > 0, got {sigma}")));
    }
    Ok(rbf_prepared(a.entries(), b.entries(), sigma))
}

/// Probability product kernel with the maximum-likelihood plug-in estimate:
/// Σ_w (ẑᵃ_w)^ρ (ẑᵇ_w)^ρ.
pub fn kernel_ppk(a: &CountVector, b: &CountVector, rho: f64) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::usage(format!("ppk requires rho > 0, got {rho}")));
    }
    let pa = powered(&a.frequencies()?, rho);
    let pb = powered(&b.frequencies()?, rho);
    Ok(ppk_prepared(&pa, &pb))
}

/// Evaluates `spec` on one pair of keyed documents. Pyramid composition is
/// not handled here; see [`crate::pyramid::pyramid_kernel`].
pub fn evaluate(
    spec: &KernelSpec,
    a: &CountVector,
    a_key: &str,
    b: &CountVector,
    b_key: &str,
) -> Result<f64> {
    check_vocab(a.vocab_size(), b.vocab_size())?;
    let pa = Prepared::new(spec, a, a_key)?;
    let pb = Prepared::new(spec, b, b_key)?;
    pa.eval(&pb)
}

fn check_vocab(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::usage(format!(
            "vocabulary size mismatch: {a} vs {b}"
        )));
    }
    Ok(())
}

pub(crate) fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone)]
pub(crate) struct LogCounts {
    vocab_size: usize,
    total: u64,
    ln_total_fact: f64,
    entries: Vec<(WordId, (u32, f64))>,
}

impl LogCounts {
    fn new(doc: &CountVector) -> Self {
        LogCounts {
            vocab_size: doc.vocab_size(),
            total: doc.total(),
            ln_total_fact: ln_factorial(doc.total()),
            entries: doc
                .entries()
                .iter()
                .map(|&(w, c)| (w, (c, ln_factorial(c as u64))))
                .collect(),
        }
    }
}

fn log_exact_prepared(a: &LogCounts, b: &LogCounts) -> f64 {
    let mut sum = 0.0;
    for_each_shared(&a.entries, &b.entries, |(ca, la), (cb, lb)| {
        sum += ln_factorial(ca as u64 + cb as u64) - (la + lb);
    });
    let w = a.vocab_size as f64;
    sum + (a.ln_total_fact + b.ln_total_fact) - ln_gamma((a.total + b.total) as f64 + w)
}

#[derive(Debug, Clone)]
pub(crate) struct Scaled {
    entries: Vec<(WordId, (f64, f64))>,
}

impl Scaled {
    fn new(doc: &CountVector, n: u32) -> Result<Self> {
        let freq = doc.frequencies()?;
        let n = n as f64;
        Ok(Scaled {
            entries: freq
                .entries()
                .iter()
                .map(|&(w, f)| {
                    let s = n * f;
                    (w, (s, ln_gamma(s + 1.0)))
                })
                .collect(),
        })
    }
}

fn sensing1_prepared(a: &Scaled, b: &Scaled) -> f64 {
    let mut sum = 0.0;
    for_each_shared(&a.entries, &b.entries, |(sa, la), (sb, lb)| {
        sum += ln_gamma(sa + sb + 1.0) - (la + lb);
    });
    sum
}

fn rbf_prepared(a: &[(WordId, f64)], b: &[(WordId, f64)], sigma: f64) -> f64 {
    let mut sq = 0.0;
    for_each_union(a, b, |fa, fb| {
        let d = fa.unwrap_or(0.0) - fb.unwrap_or(0.0);
        sq += d * d;
    });
    (-sq / (2.0 * sigma * sigma)).exp()
}

fn powered(freq: &FrequencyVector, rho: f64) -> Vec<(WordId, f64)> {
    freq.entries()
        .iter()
        .map(|&(w, f)| (w, if rho == 1.0 { f } else { f.powf(rho) }))
        .collect()
}

fn ppk_prepared(a: &[(WordId, f64)], b: &[(WordId, f64)]) -> f64 {
    let mut sum = 0.0;
    for_each_shared(a, b, |pa, pb| sum += pa * pb);
    sum
}

/// A document in the form its kernel family consumes.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    family: KernelFamily,
    sigma: f64,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Counts(LogCounts),
    Scaled(Scaled),
    Sparse(Vec<(WordId, f64)>),
}

impl Prepared {
    pub(crate) fn new(spec: &KernelSpec, doc: &CountVector, key: &str) -> Result<Self> {
        spec.validate()?;
        let repr = match spec.family {
            KernelFamily::SensingExact | KernelFamily::Sensing0 => {
                Repr::Counts(LogCounts::new(doc))
            }
            KernelFamily::Sensing1 => Repr::Scaled(Scaled::new(doc, spec.n)?),
            KernelFamily::Sensing2 => Repr::Counts(LogCounts::new(&resample(
                doc,
                spec.resample_n,
                spec.seed,
                key,
            )?)),
            KernelFamily::Rbf => Repr::Sparse(doc.frequencies()?.entries().to_vec()),
            KernelFamily::Ppk => Repr::Sparse(powered(&doc.frequencies()?, spec.ppk_rho)),
        };
        Ok(Prepared {
            family: spec.family,
            sigma: spec.sigma,
            repr,
        })
    }

    pub(crate) fn eval(&self, other: &Prepared) -> Result<f64> {
        debug_assert_eq!(self.family, other.family);
        let v = match (&self.repr, &other.repr) {
            (Repr::Counts(a), Repr::Counts(b)) => {
                check_vocab(a.vocab_size, b.vocab_size)?;
                let log_k = log_exact_prepared(a, b);
                if self.family == KernelFamily::SensingExact {
                    log_k.exp()
                } else {
                    log_k
                }
            }
            (Repr::Scaled(a), Repr::Scaled(b)) => sensing1_prepared(a, b),
            (Repr::Sparse(a), Repr::Sparse(b)) => match self.family {
                KernelFamily::Rbf => rbf_prepared(a, b, self.sigma),
                _ => ppk_prepared(a, b),
            },
            _ => {
                return Err(Error::usage(
                    "documents prepared for different kernel families",
                ))
            }
        };
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(d: &[u32]) -> CountVector {
        CountVector::from_dense(d).unwrap()
    }

    fn freq(v: &[f64]) -> FrequencyVector {
        FrequencyVector::from_sorted(
            v.len(),
            v.iter().enumerate().map(|(i, &f)| (i as u32, f)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_word_vocabulary_collapses_to_one() {
        for (na, nb) in [(0, 0), (3, 5), (1000, 1)] {
            assert_eq!(log_kernel_exact(&cv(&[na]), &cv(&[nb])).unwrap(), 0.0);
        }
        assert_eq!(kernel_sensing0(&cv(&[3]), &cv(&[5])).unwrap(), 0.0);
    }

    #[test]
    fn two_word_hand_values() {
        // ∫ z(1−z) dz = 1/6 and ∫ 2z(1−z)·z² dz = 1/10
        let k = log_kernel_exact(&cv(&[1, 0]), &cv(&[0, 1])).unwrap();
        assert!((k - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert!((k - -1.791759469228055).abs() < 1e-12);
        let k = log_kernel_exact(&cv(&[1, 1]), &cv(&[2, 0])).unwrap();
        assert!((k - (0.1f64).ln()).abs() < 1e-14);
    }

    #[test]
    fn vocab_mismatch_is_usage_error() {
        let e = log_kernel_exact(&cv(&[1, 0]), &cv(&[1, 0, 0])).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
    }

    #[test]
    fn sensing1_hand_values() {
        assert_eq!(kernel_sensing1(&cv(&[1, 0]), &cv(&[0, 1]), 1).unwrap(), 0.0);
        let k = kernel_sensing1(&cv(&[1, 1]), &cv(&[3, 3]), 2).unwrap();
        assert!((k - 2.0 * 2.0f64.ln()).abs() < 1e-14);
        assert!(kernel_sensing1(&cv(&[0, 0]), &cv(&[1, 1]), 2).is_err());
    }

    #[test]
    fn sensing1_scale_invariance() {
        let a = cv(&[3, 0, 7, 1]);
        let b = cv(&[1, 2, 2, 0]);
        let base = kernel_sensing1(&a, &b, 150).unwrap();
        for c in 2..6 {
            assert_eq!(
                kernel_sensing1(&a.scaled(c).unwrap(), &b, 150).unwrap(),
                base
            );
        }
    }

    #[test]
    fn resample_degenerate_document() {
        let a = cv(&[0, 17, 0, 0]);
        let r = resample(&a, 500, 9, "doc").unwrap();
        assert_eq!(r.to_dense(), vec![0, 500, 0, 0]);
    }

    #[test]
    fn resample_is_keyed() {
        let a = cv(&[5, 5, 5, 5]);
        let r1 = resample(&a, 100, 1, "x").unwrap();
        assert_eq!(r1, resample(&a, 100, 1, "x").unwrap());
        assert_eq!(r1.total(), 100);
        assert_ne!(r1, resample(&a, 100, 1, "y").unwrap());
        assert_ne!(r1, resample(&a, 100, 2, "x").unwrap());
    }

    #[test]
    fn sensing2_deterministic() {
        let a = cv(&[4, 1, 0, 2]);
        let b = cv(&[1, 1, 1, 1]);
        let k1 = kernel_sensing2(&a, "a", &b, "b", 200, 77).unwrap();
        let k2 = kernel_sensing2(&a, "a", &b, "b", 200, 77).unwrap();
        assert_eq!(k1.to_bits(), k2.to_bits());
        assert!(kernel_sensing2(&cv(&[0, 0]), "a", &cv(&[1, 0]), "b", 10, 1).is_err());
    }

    #[test]
    fn rbf_values() {
        let a = freq(&[0.5, 0.5]);
        assert_eq!(kernel_rbf(&a, &a, 0.3).unwrap(), 1.0);
        // ‖(1,0) − (0,1)‖² = 2 = 2σ² for σ = 1
        let k = kernel_rbf(&freq(&[1.0, 0.0]), &freq(&[0.0, 1.0]), 1.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!(kernel_rbf(&a, &a, 0.0).is_err());
    }

    #[test]
    fn ppk_values() {
        let a = cv(&[2, 3, 5]);
        assert!((kernel_ppk(&a, &a, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kernel_ppk(&cv(&[1, 0]), &cv(&[0, 4]), 1.0).unwrap(), 0.0);
        let k = kernel_ppk(&cv(&[1, 1]), &cv(&[3, 0]), 0.5).unwrap();
        assert!((k - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(kernel_ppk(&cv(&[0, 0]), &cv(&[1, 0]), 1.0).is_err());
    }

    #[test]
    fn evaluate_matches_pair_functions() {
        let a = cv(&[4, 1, 0, 2]);
        let b = cv(&[1, 0, 3, 1]);
        let e = evaluate(&KernelSpec::sensing0(), &a, "a", &b, "b").unwrap();
        assert_eq!(e, log_kernel_exact(&a, &b).unwrap());
        let e = evaluate(&KernelSpec::exact(), &a, "a", &b, "b").unwrap();
        assert_eq!(e, log_kernel_exact(&a, &b).unwrap().exp());
        let e = evaluate(&KernelSpec::sensing2(60, 3), &a, "a", &b, "b").unwrap();
        assert_eq!(e, kernel_sensing2(&a, "a", &b, "b", 60, 3).unwrap());
        let e = evaluate(&KernelSpec::sensing1(40), &a, "a", &b, "b").unwrap();
        assert_eq!(e, kernel_sensing1(&a, &b, 40).unwrap());
    }

    #[test]
    fn large_documents_stay_finite() {
        let w = 100_000usize;
        let a = CountVector::from_pairs(w, (0..w as u32).map(|i| (i, 10))).unwrap();
        let b = CountVector::from_pairs(w, vec![(0, 1_000_000)]).unwrap();
        assert_eq!(a.total(), 1_000_000);
        assert!(log_kernel_exact(&a, &b).unwrap().is_finite());
        assert!(log_kernel_exact(&a, &a).unwrap().is_finite());
    }
}
