use crate::count::{for_each_union, Document};
use crate::error::Result;
use crate::kernel::KernelSpec;

pub fn default_c_grid() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0, 100.0]
}

pub fn default_scale_grid() -> Vec<u32> {
    vec![50, 150, 500]
}

/// Median Euclidean distance between frequency vectors over the first
/// `limit` documents.
pub fn median_pairwise_distance(docs: &[Document], limit: usize) -> Result<f64> {
    let freqs = docs
        .iter()
        .take(limit)
        .map(|d| d.counts.frequencies())
        .collect::<Result<Vec<_>>>()?;
    let mut dists = Vec::new();
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            let mut sq = 0.0;
            for_each_union(freqs[i].entries(), freqs[j].entries(), |a, b| {
                let d = a.unwrap_or(0.0) - b.unwrap_or(0.0);
                sq += d * d;
            });
            dists.push(sq.sqrt());
        }
    }
    if dists.is_empty() {
        return Ok(1.0);
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    Ok(if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    })
}

/// `median · 2^k` for `k = −2..=2`; falls back to a unit median when all
/// documents coincide.
pub fn sigma_grid(docs: &[Document]) -> Result<Vec<f64>> {
    let mut m = median_pairwise_distance(docs, 500)?;
    if !(m > 0.0) {
        m = 1.0;
    }
    Ok((-2..=2).map(|k| m * 2f64.powi(k)).collect())
}

/// Sensing 1 and Sensing 2 at every scale plus RBF over the sigma grid.
pub fn default_kernel_grid(docs: &[Document], seed: u64) -> Result<Vec<KernelSpec>> {
    let mut out = Vec::new();
    for n in default_scale_grid() {
        out.push(KernelSpec::sensing1(n));
    }
    for n in default_scale_grid() {
        out.push(KernelSpec::sensing2(n, seed));
    }
    for s in sigma_grid(docs)? {
        out.push(KernelSpec::rbf(s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::CountVector;

    #[test]
    fn median_of_three_points() {
        let docs: Vec<Document> = [[1, 0], [0, 1], [1, 1]]
            .iter()
            .enumerate()
            .map(|(i, d)| Document::new(i.to_string(), CountVector::from_dense(d).unwrap()))
            .collect();
        // distances: √2, √0.5, √0.5
        assert!((median_pairwise_distance(&docs, 10).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(sigma_grid(&docs).unwrap().len(), 5);
    }
}
