//! Partial-norm renormalization of tensor-network layers.
//!
//! A layer built from `N` randomly initialized nodes represents a tensor whose
//! entries are sums of products of `N` node entries, so they easily explode
//! past the floating-point range or vanish below it. The protocols in
//! [`renorm`] rescale every node by factors derived from norms of growing
//! sub-networks until the full norm of the layer lands exactly on a target.
//!
//! * [`tensor`]: dense tensors, contraction, Gaussian fill.
//! * [`network`]: TT / TT-M / PEPS builders and the dense oracle.
//! * [`norm`]: Frobenius and linear norms, full and partial, with a reusable
//!   environment cache.
//! * [`renorm`]: the Frobenius (FTNR) and linear (LTNR) protocols.
//! * [`io`]: on-disk network format.
//! * [`harness`]: parameter sweeps, CSV and SVG output.

pub mod error;
pub mod harness;
pub mod io;
pub mod network;
pub mod norm;
pub mod renorm;
pub mod seed;
pub mod tensor;
pub mod value;

pub use error::{Error, Result};
pub use network::{IndexKind, IndexRef, Node, NodeId, Structure, TensorNetworkLayer};
pub use norm::{frobenius_norm_sq, linear_norm, log_norm_reference, EnvironmentCache, Method};
pub use renorm::{ftnr, ltnr, renormalize, RenormConfig, RenormReport, Status, StepCause};
pub use tensor::{
    contract, fill_gaussian, sum_of_entries, sum_of_squares, DenseTensor, InitParams,
};
pub use value::NormValue;
