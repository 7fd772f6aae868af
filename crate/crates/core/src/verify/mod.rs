//! Brute-force oracles: simplex quadrature of the kernel integral, a dense
//! QP reference for the SVM dual, a Monte-Carlo oracle for the resampled
//! kernel and a synthetic Dirichlet-mixture model with its Bayes rule.

mod bayes_gap;
mod montecarlo;
mod qp;
mod quadrature;
pub mod suite;
mod synthetic;

pub use bayes_gap::{bayes_gap, BayesGapConfig, BayesGapOutcome};
pub use montecarlo::{log_kernel_direct, sensing2_mc_oracle, McEstimate};
pub use qp::{qp_oracle, QpSolution};
pub use quadrature::{
    multinomial_coefficient, multinomial_pmf, simplex_integral_oracle, simplex_midpoint_rule,
    simplex_quadrature,
};
pub use synthetic::{
    bayes_rule_numeric, bayes_terms_closed, bayes_terms_quadrature, generate_corpus,
    generate_split, BayesOracle, BayesTerms, DirichletComponent, SyntheticModel, BAYES_RESOLUTION,
    NEGATIVE, POSITIVE,
};
