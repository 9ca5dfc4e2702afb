//! Fragment-level hierarchical molecular representation learning.
//!
//! Molecules are parsed into heavy-atom graphs ([`molgraph`]), decomposed into
//! rings, paths and articulation points ([`fragmenter`]), and encoded by a GIN
//! stack that exchanges messages between atoms and fragments ([`encoder`]).
//! Pretraining predicts the target encoder's embeddings of masked atoms and
//! fragments ([`pretrain`]); [`downstream`] covers fine-tuning, scaffold
//! splits and linear probes. [`fragwl`] holds the WL colour refinement used to
//! compare node-level and fragment-level expressiveness.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix the common choices.

pub mod config;
pub mod downstream;
pub mod encoder;
pub mod fragmenter;
pub mod fragwl;
pub mod molgraph;
pub mod pretrain;
pub mod scalar;
pub mod tensor;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Encoder64 = encoder::HierarchicalEncoder<f64>;
pub type Encoder32 = encoder::HierarchicalEncoder<f32>;
pub type Pretrainer64 = pretrain::Pretrainer<f64>;
pub type Pretrainer32 = pretrain::Pretrainer<f32>;
pub type PropertyModel64 = downstream::PropertyModel<f64>;
pub type PropertyModel32 = downstream::PropertyModel<f32>;
