//! Cross-lingual speech emotion recognition toolkit.
//!
//! The pipeline runs WAV decoding and normalization ([`audio_io`]), MFCC
//! extraction ([`features`]), corpus manifests with binary valence labels
//! ([`corpus`]), speaker- and sentence-independent partitioning
//! ([`splits`]), a small CNN engine trained with Adam ([`nn`], [`models`])
//! and the experiment harness with tabular reports ([`experiments`]).

pub mod audio_io;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod features;
pub mod models;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod splits;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Network32 = nn::Network<f32>;
pub type Network64 = nn::Network<f64>;
pub type MfccExtractor64 = features::MfccExtractor<f64>;
