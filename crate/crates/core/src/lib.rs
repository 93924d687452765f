//! Synthetic root MRI data, layer-wise super-resolution segmentation and
//! distance-tolerant evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod digest;
pub mod metrics;
pub mod net;
pub mod par;
pub mod root_model;
pub mod synth;
pub mod trainer;
pub mod volume;

pub use digest::sha256_hex;
