//! Hyperspectral image classification evaluation toolkit.
//!
//! Provides the building blocks for studying how train/test sampling
//! strategies interact with spectral-spatial processing on a single
//! hyperspectral scene: synthetic scene generation, two sampling
//! strategies (stratified random and controlled region-grown random),
//! spatial filters, feature extractors (raw spectral, spatial
//! coordinates, undecimated 3D wavelet packets, extended morphological
//! profiles), classifiers (KNN, linear SVM, random forest), accuracy
//! metrics (OA/AA/kappa), and leakage diagnostics (window overlap rate,
//! spectral correlation decay).

pub mod classify;
pub mod datamodel;
pub mod error;
pub mod features;
pub mod filters;
pub mod harness;
pub mod ingest;
pub mod leakage;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod synthgen;

pub use datamodel::{ConfusionMatrix, FeatureSet, HyperCube, LabelMap, SplitMask, SplitState};
pub use error::Error;
