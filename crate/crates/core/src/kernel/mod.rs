//! Sensing-aware bag-of-words kernels, their log-space approximations, the
//! RBF and probability-product baselines, and Gram matrix assembly.

mod functions;
pub mod gram;
mod spec;

pub use functions::{
    evaluate, kernel_ppk, kernel_rbf, kernel_sensing0, kernel_sensing1, kernel_sensing2,
    log_kernel_exact, resample,
};
pub(crate) use functions::{keyed_rng, Prepared};
pub use gram::{build_gram, build_gram_cross, GramMatrix};
pub use spec::{KernelFamily, KernelSpec};
