use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use sha2::{Digest, Sha256};

use super::quadrature::{multinomial_coefficient, simplex_quadrature};
use crate::count::{CountVector, Document};
use crate::error::{Error, Result};
use crate::kernel::keyed_rng;
use crate::special::{ln_factorial, ln_gamma};
use crate::text::{Corpus, Split};

pub const POSITIVE: &str = "pos";
pub const NEGATIVE: &str = "neg";

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletComponent {
    pub weight: f64,
    pub alpha: Vec<f64>,
}

impl DirichletComponent {
    pub fn new(weight: f64, alpha: &[f64]) -> Self {
        DirichletComponent {
            weight,
            alpha: alpha.to_vec(),
        }
    }

    fn ln_norm(&self) -> f64 {
        ln_gamma(self.alpha.iter().sum()) - self.alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
    }

    /// `∫ p(x | z) Dir(z; α) dz` in closed form.
    fn dirichlet_multinomial(&self, x: &[u32]) -> f64 {
        let n: u64 = x.iter().map(|&c| c as u64).sum();
        let a: f64 = self.alpha.iter().sum();
        let mut ln = ln_factorial(n) + ln_gamma(a) - ln_gamma(n as f64 + a);
        for (&c, &al) in x.iter().zip(&self.alpha) {
            ln += ln_gamma(c as f64 + al) - ln_gamma(al) - ln_factorial(c as u64);
        }
        ln.exp()
    }
}

/// Two-class generative model: `y` from the priors, `z | y` from a Dirichlet
/// mixture, `x | z` multinomial with `doc_len` draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub vocab_size: usize,
    /// `p(y = +1)`, `p(y = −1)`.
    pub priors: [f64; 2],
    pub positive: Vec<DirichletComponent>,
    pub negative: Vec<DirichletComponent>,
    pub doc_len: u32,
    pub seed: u64,
}

impl SyntheticModel {
    /// Three-word model with length-20 documents; the positive class is a
    /// two-component mixture, so its Bayes boundary is not linear in `x`.
    pub fn reference(seed: u64) -> Self {
        SyntheticModel {
            vocab_size: 3,
            priors: [0.5, 0.5],
            positive: vec![
                DirichletComponent::new(0.5, &[6.0, 2.0, 2.0]),
                DirichletComponent::new(0.5, &[2.0, 2.0, 6.0]),
            ],
            negative: vec![DirichletComponent::new(1.0, &[3.0, 4.0, 3.0])],
            doc_len: 20,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticModel {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.vocab_size) {
            return Err(Error::usage("synthetic models use 2 to 5 words"));
        }
        if self.priors.iter().any(|p| !(*p >= 0.0))
            || (self.priors[0] + self.priors[1] - 1.0).abs() > 1e-12
        {
            return Err(Error::usage(
                "class priors must be non-negative and sum to 1",
            ));
        }
        for (name, comps) in [("positive", &self.positive), ("negative", &self.negative)] {
            if comps.is_empty() {
                return Err(Error::usage(format!("{name} class has no components")));
            }
            let total: f64 = comps.iter().map(|c| c.weight).sum();
            if comps.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::usage(format!(
                    "{name} mixture weights must sum to 1"
                )));
            }
            if comps.iter().any(|c| {
                c.alpha.len() != self.vocab_size
                    || c.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite()))
            }) {
                return Err(Error::usage(format!(
                    "{name} Dirichlet parameters must be {} positive reals",
                    self.vocab_size
                )));
            }
        }
        if self.doc_len == 0 {
            return Err(Error::usage("document length must be positive"));
        }
        Ok(())
    }

    fn vocab_fingerprint(&self) -> [u8; 32] {
        Sha256::digest(format!("synthetic:W={}", self.vocab_size).as_bytes()).into()
    }
}

fn pick(weights: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// `m` labeled documents drawn from `model`; `stream` separates independent
/// draws (e.g. train and test) under one seed.
pub fn generate_split(
    model: &SyntheticModel,
    m: usize,
    stream: &str,
    split: Split,
) -> Result<Corpus> {
    model.validate()?;
    if m == 0 {
        return Err(Error::usage("need at least one synthetic document"));
    }
    let mut rng = keyed_rng(model.seed, &format!("synthetic/{stream}"));
    let mut docs = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let positive = rng.random::<f64>() < model.priors[0];
        let comps = if positive {
            &model.positive
        } else {
            &model.negative
        };
        let comp = &comps[pick(comps.iter().map(|c| c.weight), rng.random())];
        let g: Vec<f64> = comp
            .alpha
            .iter()
            .map(|&a| {
                Gamma::new(a, 1.0)
                    .expect("validated shape")
                    .sample(&mut rng)
            })
            .collect();
        let total: f64 = g.iter().sum();
        let z: Vec<f64> = g.iter().map(|v| v / total).collect();
        let words = (0..model.doc_len).map(|_| pick(z.iter().copied(), rng.random()) as u32);
        let counts = CountVector::from_words(model.vocab_size, words)?;
        docs.push(Document::new(format!("{stream}-{i:06}"), counts));
        labels.push(if positive { POSITIVE } else { NEGATIVE }.to_string());
    }
    Corpus::new(
        split,
        model.vocab_size,
        model.vocab_fingerprint(),
        docs,
        labels,
    )
}

/// `m` iid labeled documents from `model`.
pub fn generate_corpus(model: &SyntheticModel, m: usize) -> Result<Corpus> {
    generate_split(model, m, "corpus", Split::Train)
}

/// The two class terms of `⟨p(x | z), w(z)⟩`: `p(+1) ∫ p(x|z) p(z|+1) dz`
/// and `p(−1) ∫ p(x|z) p(z|−1) dz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesTerms {
    pub positive: f64,
    pub negative: f64,
}

impl BayesTerms {
    pub fn value(&self) -> f64 {
        self.positive - self.negative
    }

    /// +1 when the positive term wins or the two agree to 1e-9 relative.
    pub fn label(&self) -> i8 {
        let scale = self.positive.max(self.negative);
        if self.positive >= self.negative || (self.positive - self.negative).abs() <= 1e-9 * scale {
            1
        } else {
            -1
        }
    }
}

fn check_x(model: &SyntheticModel, x: &CountVector) -> Result<()> {
    model.validate()?;
    if x.vocab_size() != model.vocab_size {
        return Err(Error::usage(format!(
            "document has vocabulary size {}, model has {}",
            x.vocab_size(),
            model.vocab_size
        )));
    }
    Ok(())
}

/// Bayes terms from the Dirichlet-multinomial closed form.
pub fn bayes_terms_closed(model: &SyntheticModel, x: &CountVector) -> Result<BayesTerms> {
    check_x(model, x)?;
    let d = x.to_dense();
    let mix = |comps: &[DirichletComponent]| -> f64 {
        comps
            .iter()
            .map(|c| c.weight * c.dirichlet_multinomial(&d))
            .sum()
    };
    Ok(BayesTerms {
        positive: model.priors[0] * mix(&model.positive),
        negative: model.priors[1] * mix(&model.negative),
    })
}

/// Bayes terms by simplex quadrature (`W ≤ 3`).
pub fn bayes_terms_quadrature(
    model: &SyntheticModel,
    x: &CountVector,
    resolution: usize,
) -> Result<BayesTerms> {
    check_x(model, x)?;
    let d = x.to_dense();
    let ln_coef = multinomial_coefficient(&d).ln();
    let term = |prior: f64, comps: &[DirichletComponent]| -> Result<f64> {
        // ln p(x|z) + ln Dir(z; α) = const + Σ (x_w + α_w − 1) ln z_w
        let parts: Vec<(f64, Vec<f64>)> = comps
            .iter()
            .map(|c| {
                let expo = c
                    .alpha
                    .iter()
                    .zip(&d)
                    .map(|(&a, &x)| a - 1.0 + x as f64)
                    .collect();
                (c.weight.ln() + c.ln_norm() + ln_coef, expo)
            })
            .collect();
        let v = simplex_quadrature(model.vocab_size, resolution, |z| {
            let ln_z: Vec<f64> = z.iter().map(|p| p.ln()).collect();
            parts
                .iter()
                .map(|(k, e)| (k + e.iter().zip(&ln_z).map(|(e, l)| e * l).sum::<f64>()).exp())
                .sum()
        })?;
        Ok(prior * v)
    };
    Ok(BayesTerms {
        positive: term(model.priors[0], &model.positive)?,
        negative: term(model.priors[1], &model.negative)?,
    })
}

pub const BAYES_RESOLUTION: usize = 400;

/// Bayes-optimal label of `x` by numeric quadrature of `⟨p(x|z), w(z)⟩`.
pub fn bayes_rule_numeric(model: &SyntheticModel, x: &CountVector) -> Result<i8> {
    Ok(bayes_terms_quadrature(model, x, BAYES_RESOLUTION)?.label())
}

/// Memoizes [`bayes_rule_numeric`] over distinct count vectors.
#[derive(Debug)]
pub struct BayesOracle<'a> {
    model: &'a SyntheticModel,
    cache: HashMap<Vec<u32>, i8>,
}

impl<'a> BayesOracle<'a> {
    pub fn new(model: &'a SyntheticModel) -> Self {
        BayesOracle {
            model,
            cache: HashMap::new(),
        }
    }

    pub fn label(&mut self, x: &CountVector) -> Result<i8> {
        let key = x.to_dense();
        if let Some(&l) = self.cache.get(&key) {
            return Ok(l);
        }
        let l = bayes_rule_numeric(self.model, x)?;
        self.cache.insert(key, l);
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_model_ties_to_positive() {
        let model = SyntheticModel {
            vocab_size: 2,
            priors: [0.5, 0.5],
            positive: vec![DirichletComponent::new(1.0, &[3.0, 1.0])],
            negative: vec![DirichletComponent::new(1.0, &[1.0, 3.0])],
            doc_len: 4,
            seed: 0,
        };
        let x = CountVector::from_dense(&[2, 2]).unwrap();
        let t = bayes_terms_quadrature(&model, &x, 1000).unwrap();
        assert!(t.value().abs() <= 1e-12);
        assert_eq!(t.label(), 1);
        assert_eq!(
            bayes_rule_numeric(&model, &CountVector::from_dense(&[0, 4]).unwrap()).unwrap(),
            -1
        );
    }

    #[test]
    fn dominant_class_wins() {
        let model = SyntheticModel {
            vocab_size: 2,
            priors: [0.5, 0.5],
            positive: vec![DirichletComponent::new(1.0, &[20.0, 1.0])],
            negative: vec![DirichletComponent::new(1.0, &[2.0, 2.0])],
            doc_len: 10,
            seed: 0,
        };
        let x = CountVector::from_dense(&[10, 0]).unwrap();
        assert_eq!(bayes_rule_numeric(&model, &x).unwrap(), 1);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let model = SyntheticModel::reference(0);
        for x in [[20, 0, 0], [7, 7, 6], [0, 3, 17], [10, 10, 0]] {
            let x = CountVector::from_dense(&x).unwrap();
            let q = bayes_terms_quadrature(&model, &x, 600).unwrap();
            let c = bayes_terms_closed(&model, &x).unwrap();
            assert!(
                ((q.positive - c.positive) / c.positive).abs() < 1e-8,
                "{q:?} {c:?}"
            );
            assert!(
                ((q.negative - c.negative) / c.negative).abs() < 1e-8,
                "{q:?} {c:?}"
            );
        }
    }

    #[test]
    fn generation_is_seeded() {
        let m = SyntheticModel::reference(11);
        let a = generate_corpus(&m, 50).unwrap();
        assert_eq!(a, generate_corpus(&m, 50).unwrap());
        assert_ne!(a, generate_corpus(&m.with_seed(12), 50).unwrap());
        assert!(a.docs.iter().all(|d| d.counts.total() == 20));
    }

    #[test]
    fn point_mass_frequencies_converge() {
        let model = SyntheticModel {
            vocab_size: 3,
            priors: [1.0, 0.0],
            positive: vec![DirichletComponent::new(1.0, &[2e5, 3e5, 5e5])],
            negative: vec![DirichletComponent::new(1.0, &[1.0, 1.0, 1.0])],
            doc_len: 100_000,
            seed: 4,
        };
        let c = generate_corpus(&model, 3).unwrap();
        for d in &c.docs {
            let f = d.counts.frequencies().unwrap();
            for (&(_, got), want) in f.entries().iter().zip([0.2, 0.3, 0.5]) {
                assert!((got - want).abs() < 0.01);
            }
        }
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = SyntheticModel::reference(0);
        m.priors = [0.7, 0.7];
        assert!(m.validate().is_err());
        let mut m = SyntheticModel::reference(0);
        m.negative[0].alpha[1] = 0.0;
        assert!(m.validate().is_err());
    }
}
