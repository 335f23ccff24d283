//! Random projection for learning mixtures of Gaussians.
//!
//! The crate covers the geometry of high-dimensional Gaussians (trace-radius,
//! eccentricity, c-separation), random and PCA projections, synthetic mixture
//! generation, EM with full or shared covariances, the project-fit-lift
//! RP+EM procedure, and a per-class mixture classifier.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` / `*32` aliases below fix the precision.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod dataset;
pub mod em;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod projection;
pub mod random;
pub mod scalar;
pub mod synthesis;

pub use classifier::{
    cluster_analysis, ingest, train, ClassMixtureModel, ClusterAnalysis, LabeledDataset,
};
pub use dataset::Dataset;
pub use em::{
    centers_recovered, e_step, init_params, m_step, rp_em, rp_em_lift, rp_em_low, run_em,
    test_loglik, CovarianceRestriction, EmOptions, FitResult, Responsibilities, RpEmResult,
};
pub use error::{Error, Result};
pub use gaussian::{
    norm_tail_bound, pairwise_separation, spectral_summary, Gaussian, Mixture, MixtureDoc,
    SpectralSummary,
};
pub use linalg::Matrix;
pub use projection::{ProjectionDoc, ProjectionKind, ProjectionMatrix};
pub use scalar::Scalar;
pub use synthesis::{CovarianceMode, MixtureSpec};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Gaussian64 = Gaussian<f64>;
pub type Gaussian32 = Gaussian<f32>;
pub type Mixture64 = Mixture<f64>;
pub type Mixture32 = Mixture<f32>;
pub type Projection64 = ProjectionMatrix<f64>;
pub type Projection32 = ProjectionMatrix<f32>;
pub type FitResult64 = em::FitResult<f64>;
pub type FitResult32 = em::FitResult<f32>;
pub type LabeledDataset64 = classifier::LabeledDataset<f64>;
pub type LabeledDataset32 = classifier::LabeledDataset<f32>;
pub type ClassMixtureModel64 = classifier::ClassMixtureModel<f64>;
pub type ClassMixtureModel32 = classifier::ClassMixtureModel<f32>;
