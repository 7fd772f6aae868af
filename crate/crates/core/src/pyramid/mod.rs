//! Spatial-pyramid bag-of-features: descriptor ingestion, k-means visual
//! vocabularies, quantization, per-cell counts and the pyramid kernel.

mod build;
mod descriptors;
mod kmeans;

pub use build::{
    build_pyramid, build_pyramid_gram, build_pyramid_gram_cross, default_pyramid_weights,
    pyramid_kernel, PyramidCorpus, PyramidDoc,
};
pub use descriptors::DescriptorSet;
pub use kmeans::{
    kmeans_fit, quantize, sample_descriptors, KMeansConfig, QuantizedPoint, VisualVocabulary,
};
