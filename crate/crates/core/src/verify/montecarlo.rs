use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::count::CountVector;
use crate::error::{Error, Result};
use crate::kernel::keyed_rng;

/// `ln n!` for `n = 0..=max` by compensated summation of `ln k`.
fn ln_factorial_table(max: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(max as usize + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    table.push(0.0);
    for k in 1..=max {
        let term = (k as f64).ln();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        table.push(sum + comp);
    }
    table
}

/// Closed-form log kernel evaluated over the full vocabulary from sums of
/// logarithms, without any log-gamma routine.
pub fn log_kernel_direct(a: &CountVector, b: &CountVector) -> Result<f64> {
    let w = a.vocab_size();
    if b.vocab_size() != w {
        return Err(Error::usage("vocabulary sizes differ"));
    }
    let top = a.total() + b.total() + w as u64 - 1;
    let lf = ln_factorial_table(top);
    let (da, db) = (a.to_dense(), b.to_dense());
    let mut sum = lf[a.total() as usize] + lf[b.total() as usize] - lf[top as usize];
    for (&x, &y) in da.iter().zip(&db) {
        sum += lf[(x + y) as usize] - lf[x as usize] - lf[y as usize];
    }
    Ok(sum)
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub draws: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        McEstimate {
            mean,
            std_err: (var / n).sqrt(),
            draws: xs.len(),
        }
    }
}

fn draw(doc: &CountVector, n_words: u32, rng: &mut impl rand::Rng) -> Result<CountVector> {
    let weights: Vec<u32> = doc.entries().iter().map(|&(_, c)| c).collect();
    let dist =
        WeightedIndex::new(&weights).map_err(|e| Error::usage(format!("cannot resample: {e}")))?;
    let words = (0..n_words).map(|_| doc.entries()[dist.sample(rng)].0);
    CountVector::from_words(doc.vocab_size(), words)
}

/// Distribution of the resampled log kernel: each draw resamples both
/// documents to `n_words` iid words from their empirical frequencies and
/// evaluates [`log_kernel_direct`].
pub fn sensing2_mc_oracle(
    a: &CountVector,
    b: &CountVector,
    n_words: u32,
    draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    if draws < 2 || n_words == 0 {
        return Err(Error::usage("need at least 2 draws of at least 1 word"));
    }
    let mut rng = keyed_rng(seed, "sensing2-mc-oracle");
    let samples = (0..draws)
        .map(|_| {
            let ra = draw(a, n_words, &mut rng)?;
            let rb = draw(b, n_words, &mut rng)?;
            log_kernel_direct(&ra, &rb)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&samples))
}
