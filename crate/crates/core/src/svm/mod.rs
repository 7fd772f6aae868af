//! Soft-margin kernel SVM training on precomputed Gram matrices and the
//! one-vs-all multiclass wrapper.

mod model;
pub mod smo;

pub use model::{
    argmax_lowest, decision_values, predict_multiclass, read_models, sign_label, train_binary,
    train_one_vs_all, write_models, MulticlassModel, SupportVector, SvmModel,
};
pub use smo::{solve_dual, DualSolution, TrainConfig};
