//! Bit error rate analysis of a massive-MIMO uplink with coarsely quantized
//! receivers, zero-forcing detection and pilot-based channel estimates.
//!
//! The crate is generic over `f32`/`f64` through [`Real`]; `f64` aliases for
//! the main types are exported at the root.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The tabulated 1-bit gain 0.6366 is 2/pi to four places.
#![allow(clippy::approx_constant)]

pub mod analytic;
pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod quantizer;
pub mod rng;
pub mod scalar;
pub mod simulator;
pub mod solvers;

pub use analytic::{
    alpha_of_bits, ber, ber_closed_form, ber_two_term, gamma0, l_factor, BerExpression, CsiRegime,
    LinkParameters, QamOrder, QuantizerSpec, Resolution,
};
pub use error::{Error, Result};
pub use quantizer::{design_codebook, LloydMaxCodebook, Quantizer};
pub use scalar::Real;

pub type Link = LinkParameters<f64>;
pub type Spec = QuantizerSpec<f64>;
pub type Codebook = LloydMaxCodebook<f64>;
pub type Link32 = LinkParameters<f32>;
pub type Spec32 = QuantizerSpec<f32>;
