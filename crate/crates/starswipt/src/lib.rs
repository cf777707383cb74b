//! Robust joint active/passive beamforming for STAR-RIS assisted satellite
//! SWIPT downlinks.
//!
//! The crate models a LEO satellite serving ground terminals through a
//! simultaneously-transmitting-and-reflecting surface, and maximizes the
//! worst-case harvested power subject to information-rate and secrecy
//! constraints under norm-bounded channel uncertainty. The optimization
//! machinery is built from first principles: an S-procedure robustification
//! layer, a native interior-point solver for the resulting semidefinite
//! programs, a penalty method for the rank-one surface constraint, and an
//! alternating loop that ties the beamformer and surface subproblems together.
//!
//! Module map, roughly bottom-up:
//!
//! - [`numerics`] — Hermitian linear algebra: Kronecker forms, eigensolvers,
//!   the complex-to-real PSD embedding.
//! - [`satlink`] — satellite antenna pattern and feeder-link channel model.
//! - [`channel`] — ground-segment channels, cascades, and bounded CSI error.
//! - [`conic`] — semidefinite programming layer: problem builder, structured
//!   lowering, interior-point backend.
//! - [`robustify`] — S-procedure matrix inequalities for the three robust
//!   constraint families.
//! - [`active`] — transmit beamformer subproblem.
//! - [`passive`] — surface coefficient subproblem and penalty loop.
//! - [`orchestrate`] — alternating optimization, schemes, quantization.
//! - [`evaluate`] — harvested power / rate evaluation and feasibility audit.
//! - [`expcli`] — experiment configuration, sweeps, and the command line.

pub mod active;
pub mod channel;
pub mod conic;
pub mod expcli;
pub mod numerics;
pub mod passive;
pub mod record;
pub mod robustify;
pub mod satlink;
#[cfg(test)]
pub(crate) mod testkit;

pub use expcli::config::SystemConfig;
