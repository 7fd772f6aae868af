use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::descriptors::DescriptorSet;
use crate::count::WordId;
use crate::error::{Error, Result};
use crate::kernel::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(seed: u64) -> Self {
        KMeansConfig {
            seed,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

/// Centroids of a visual vocabulary plus the fit that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualVocabulary {
    centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    pub inertia: f64,
    pub seed: u64,
}

impl VisualVocabulary {
    pub fn from_centroids(centroids: Vec<Vec<f64>>) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::data(
                "a visual vocabulary needs at least 2 centroids",
            ));
        }
        let dim = centroids[0].len();
        if dim == 0 || centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::data("centroids must share one non-zero dimension"));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::data("centroids must be finite"));
        }
        Ok(VisualVocabulary {
            centroids,
            iterations: 0,
            inertia: f64::NAN,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Nearest centroid; ties go to the lowest id.
    pub fn nearest(&self, x: &[f64]) -> WordId {
        nearest(&self.centroids, x).0 as WordId
    }

    /// One row of centroid values per word, preceded by a `#` metadata line.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "# seed={} iterations={} inertia={}",
            self.seed, self.iterations, self.inertia
        )?;
        for c in &self.centroids {
            let row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut meta = None;
        let mut rows = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            let line = line.trim();
            if let Some(m) = line.strip_prefix('#') {
                meta = Some(m.trim().to_string());
                continue;
            }
            if line.is_empty() {
                continue;
            }
            rows.push(
                line.split_whitespace()
                    .map(str::parse::<f64>)
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::data(format!("vocabulary row {}: not a number", n + 1)))?,
            );
        }
        let mut v = Self::from_centroids(rows)?;
        for kv in meta.iter().flat_map(|m| m.split_whitespace()) {
            match kv.split_once('=') {
                Some(("seed", s)) => v.seed = s.parse().unwrap_or(0),
                Some(("iterations", s)) => v.iterations = s.parse().unwrap_or(0),
                Some(("inertia", s)) => v.inertia = s.parse().unwrap_or(f64::NAN),
                _ => {}
            }
        }
        Ok(v)
    }

    /// SHA-256 of the centroid values (metadata excluded).
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.centroids.iter().flatten() {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// A cluster that loses all its points is re-seeded with the sample farthest
/// from its current centroid (lowest index on ties, each sample used at most
/// once per iteration).
pub fn kmeans_fit(samples: &[Vec<f64>], w: usize, cfg: &KMeansConfig) -> Result<VisualVocabulary> {
    if w < 2 {
        return Err(Error::usage("vocabulary size W must be at least 2"));
    }
    if samples.len() < w {
        return Err(Error::usage(format!(
            "k-means needs at least W={w} samples, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::usage(
            "k-means samples must share one non-zero dimension",
        ));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("k-means samples must be finite"));
    }
    if !(cfg.tol >= 0.0) || cfg.max_iters == 0 {
        return Err(Error::usage("k-means needs max_iters >= 1 and tol >= 0"));
    }

    let mut rng = keyed_rng(cfg.seed, "kmeans++");
    let mut centroids = vec![samples[rng.random_range(0..samples.len())].clone()];
    let mut d2: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centroids[0])).collect();
    while centroids.len() < w {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..samples.len())
        };
        let c = samples[pick].clone();
        for (d, s) in d2.iter_mut().zip(samples) {
            *d = d.min(sq_dist(s, &c));
        }
        centroids.push(c);
    }

    let mut iterations = 0;
    let mut assign: Vec<(usize, f64)>;
    loop {
        assign = samples.par_iter().map(|s| nearest(&centroids, s)).collect();
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; w];
        let mut counts = vec![0usize; w];
        for (s, &(k, _)) in samples.iter().zip(&assign) {
            counts[k] += 1;
            for (acc, v) in sums[k].iter_mut().zip(s) {
                *acc += v;
            }
        }
        let mut used = vec![false; samples.len()];
        let mut shift: f64 = 0.0;
        for k in 0..w {
            let next = if counts[k] > 0 {
                sums[k].iter().map(|v| v / counts[k] as f64).collect()
            } else {
                let mut far = None::<(usize, f64)>;
                for (i, s) in samples.iter().enumerate() {
                    let d = sq_dist(s, &centroids[assign[i].0]);
                    if !used[i] && far.is_none_or(|(_, fd)| d > fd) {
                        far = Some((i, d));
                    }
                }
                let i = far.expect("at least W samples").0;
                used[i] = true;
                samples[i].clone()
            };
            shift = shift.max(sq_dist(&next, &centroids[k]).sqrt());
            centroids[k] = next;
        }
        if shift < cfg.tol {
            assign = samples.par_iter().map(|s| nearest(&centroids, s)).collect();
            break;
        }
    }
    let inertia = assign.iter().map(|&(_, d)| d).sum();
    Ok(VisualVocabulary {
        centroids,
        iterations,
        inertia,
        seed: cfg.seed,
    })
}

/// Up to `d` descriptors drawn without replacement across all images.
pub fn sample_descriptors(sets: &[DescriptorSet], d: usize, seed: u64) -> Vec<Vec<f64>> {
    let all: Vec<&[f64]> = sets.iter().flat_map(|s| s.iter().map(|(_, v)| v)).collect();
    if d >= all.len() {
        return all.into_iter().map(<[f64]>::to_vec).collect();
    }
    let mut rng = keyed_rng(seed, "descriptor-sample");
    let mut idx = rand::seq::index::sample(&mut rng, all.len(), d).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| all[i].to_vec()).collect()
}

/// A descriptor position with its visual word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedPoint {
    pub x: f64,
    pub y: f64,
    pub word: WordId,
}

/// Assigns every descriptor to its nearest centroid.
pub fn quantize(descs: &DescriptorSet, vocab: &VisualVocabulary) -> Result<Vec<QuantizedPoint>> {
    if descs.dim() != vocab.dim() {
        return Err(Error::usage(format!(
            "image '{}' has descriptor dimension {}, vocabulary has {}",
            descs.id,
            descs.dim(),
            vocab.dim()
        )));
    }
    Ok(descs
        .iter()
        .map(|((x, y), d)| QuantizedPoint {
            x,
            y,
            word: vocab.nearest(d),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> Vec<Vec<f64>> {
        let mut s = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.01;
            s.push(vec![t, -t]);
            s.push(vec![10.0 + t, 10.0 - t]);
        }
        s
    }

    #[test]
    fn separates_two_clouds() {
        let s = clouds();
        let v = kmeans_fit(&s, 2, &KMeansConfig::new(3)).unwrap();
        let mut c = v.centroids().to_vec();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!(c[0][0] >= 0.0 && c[0][0] <= 0.19);
        assert!(c[1][0] >= 10.0 && c[1][0] <= 10.19);
        let mean: Vec<f64> = (0..2)
            .map(|k| s.iter().map(|x| x[k]).sum::<f64>() / s.len() as f64)
            .collect();
        let single: f64 = s.iter().map(|x| sq_dist(x, &mean)).sum();
        assert!(v.inertia < single);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = clouds();
        let a = kmeans_fit(&s, 3, &KMeansConfig::new(9)).unwrap();
        let b = kmeans_fit(&s, 3, &KMeansConfig::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            kmeans_fit(&[vec![0.0], vec![1.0]], 3, &KMeansConfig::new(0)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let s = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        let v = kmeans_fit(&s, 3, &KMeansConfig::new(1)).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.centroids().iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn nearest_ties_to_lowest_id() {
        let mut c = vec![vec![100.0]; 8];
        c[3] = vec![-1.0];
        c[7] = vec![1.0];
        let v = VisualVocabulary::from_centroids(c).unwrap();
        assert_eq!(v.nearest(&[0.0]), 3);
    }

    #[test]
    fn centroids_quantize_to_themselves() {
        let v = kmeans_fit(&clouds(), 4, &KMeansConfig::new(2)).unwrap();
        for (k, c) in v.centroids().iter().enumerate() {
            assert_eq!(v.nearest(c), k as WordId);
        }
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let v = kmeans_fit(&clouds(), 2, &KMeansConfig::new(5)).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        let back = VisualVocabulary::read(&buf[..]).unwrap();
        assert_eq!(back.centroids(), v.centroids());
        assert_eq!(back.fingerprint(), v.fingerprint());
        assert_eq!(back.iterations, v.iterations);
    }
}
