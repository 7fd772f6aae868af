use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensekit::kernel::{kernel_sensing2, log_kernel_exact};
use sensekit::svm::{solve_dual, TrainConfig};
use sensekit::verify::{
    bayes_terms_closed, bayes_terms_quadrature, generate_corpus, qp_oracle, sensing2_mc_oracle,
    simplex_integral_oracle, simplex_quadrature, SyntheticModel, POSITIVE,
};
use sensekit::CountVector;

fn cv(d: &[u32]) -> CountVector {
    CountVector::from_dense(d).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn hand_values_of_the_closed_form() {
    // ∫₀¹ z² dz, and 2·∫ z₁² z₂ over the unit triangle.
    assert!(
        rel(
            log_kernel_exact(&cv(&[1, 0]), &cv(&[1, 0])).unwrap().exp(),
            1.0 / 3.0
        ) < 1e-14
    );
    let k = log_kernel_exact(&cv(&[1, 1, 0]), &cv(&[1, 0, 0]))
        .unwrap()
        .exp();
    assert!(rel(k, 1.0 / 30.0) < 1e-12, "{k}");
}

#[test]
fn quadrature_converges_toward_the_closed_form() {
    let a = cv(&[3, 1, 2]);
    let b = cv(&[0, 4, 1]);
    let exact = log_kernel_exact(&a, &b).unwrap().exp();
    let errs: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&r| rel(simplex_integral_oracle(&a, &b, r).unwrap(), exact))
        .collect();
    assert!(errs[2] < 1e-9, "{errs:?}");
    assert!(errs[1] <= errs[0] && errs[2] <= errs[1], "{errs:?}");
}

#[test]
fn quadrature_integrates_constants_to_the_simplex_volume() {
    let area = simplex_quadrature(3, 40, |_| 1.0).unwrap();
    assert!((area - 0.5).abs() < 1e-13, "{area}");
    let len = simplex_quadrature(2, 40, |_| 1.0).unwrap();
    assert!((len - 1.0).abs() < 1e-13, "{len}");
}

fn gaussian_gram(m: usize, d: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y: Vec<f64> = (0..m)
        .map(|i| {
            if x[i][0] + 0.3 * x[i][1] > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            k[i * m + j] = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
        }
    }
    (k, y)
}

#[test]
fn smo_matches_the_qp_oracle() {
    for (seed, c) in [(1, 0.1), (2, 1.0), (3, 10.0)] {
        let m = 24;
        let (k, y) = gaussian_gram(m, m + 5, seed);
        let cfg = TrainConfig {
            tolerance: 1e-9,
            ..TrainConfig::with_c(c)
        };
        let smo = solve_dual(&k, &y, &cfg).unwrap();
        let qp = qp_oracle(&k, &y, c).unwrap();
        assert!(smo.converged);
        let gap = (smo.objective - qp.objective).abs() / qp.objective.abs().max(1.0);
        assert!(
            gap < 1e-6,
            "seed {seed}: {} vs {}",
            smo.objective,
            qp.objective
        );
        for (a, b) in smo.alpha.iter().zip(&qp.alpha) {
            assert!((a - b).abs() < 1e-4 * c.max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn sensing2_agrees_with_monte_carlo() {
    let a = cv(&[9, 0, 3, 1, 5, 0, 2]);
    let b = cv(&[1, 4, 4, 0, 2, 6, 1]);
    let n = 30;
    let mc = sensing2_mc_oracle(&a, &b, n, 4000, 17).unwrap();
    let draws = 2000;
    let mean = (0..draws)
        .map(|s| kernel_sensing2(&a, "a", &b, "b", n, s).unwrap())
        .sum::<f64>()
        / draws as f64;
    let tol = 5.0 * mc.std_err * (1.0 + (4000.0f64 / draws as f64)).sqrt();
    assert!(
        (mean - mc.mean).abs() < tol,
        "{mean} vs {} ± {}",
        mc.mean,
        mc.std_err
    );
}

#[test]
fn synthetic_labels_follow_the_priors() {
    let model = SyntheticModel::reference(5);
    let m = 4000;
    let corpus = generate_corpus(&model, m).unwrap();
    let pos = corpus.labels.iter().filter(|l| *l == POSITIVE).count() as f64;
    let p = model.priors[0];
    let sd = (m as f64 * p * (1.0 - p)).sqrt();
    assert!((pos - m as f64 * p).abs() < 3.0 * sd, "{pos}");
    assert!(corpus
        .docs
        .iter()
        .all(|d| d.counts.total() == model.doc_len as u64));
}

#[test]
fn synthetic_word_means_match_the_mixture() {
    let model = SyntheticModel::reference(8);
    let corpus = generate_corpus(&model, 4000).unwrap();
    let mut sums = [0.0f64; 2];
    let mut n = [0usize; 2];
    for (d, l) in corpus.docs.iter().zip(&corpus.labels) {
        let k = usize::from(l != POSITIVE);
        sums[k] += d.counts.get(0) as f64 / model.doc_len as f64;
        n[k] += 1;
    }
    // Mean share of word 0: (0.6 + 0.2) / 2 for positives, 3/10 for negatives.
    assert!((sums[0] / n[0] as f64 - 0.4).abs() < 0.02);
    assert!((sums[1] / n[1] as f64 - 0.3).abs() < 0.02);
}

#[test]
fn bayes_terms_agree_between_closed_form_and_quadrature() {
    let model = SyntheticModel::reference(1);
    for x in [[20, 0, 0], [7, 7, 6], [2, 15, 3], [0, 1, 19]] {
        let x = cv(&x);
        let c = bayes_terms_closed(&model, &x).unwrap();
        let q = bayes_terms_quadrature(&model, &x, 400).unwrap();
        assert!(rel(q.positive, c.positive) < 1e-8);
        assert!(rel(q.negative, c.negative) < 1e-8);
        assert_eq!(c.label(), q.label());
    }
}
