//! Kernel SVM toolkit built around the sensing-aware bag-of-words kernel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod count;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod pyramid;
pub mod special;
pub mod svm;
pub mod text;
pub mod verify;

pub use count::{CountVector, Document, FrequencyVector, WordId};
pub use error::{Error, Result};
pub use kernel::{GramMatrix, KernelFamily, KernelSpec};
