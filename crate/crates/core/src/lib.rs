//! Topological stirring in a disk with three round stirrers.
//!
//! * [`braid`]: braid words, the SL(2, Z) image and Thurston-Nielsen type.
//! * [`protocol`]: periodic stirrer motions realizing a braid word.
//! * [`field`]: the constant-vorticity stream function on one domain
//!   snapshot, solved by boundary collocation.
//! * [`transport`]: RK4 tracer and flow-map Jacobian integration.
//! * [`diagnostics`]: material-curve stretching, transported vorticity
//!   gradients and circulation along advected loops.
//!
//! The crate is `no_std` (with `alloc`); the `parallel` feature turns on
//! rayon-backed per-point parallelism.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod braid;
pub mod diagnostics;
pub mod field;
pub mod geom;
pub mod protocol;
pub mod transport;

pub use braid::{BraidWord, IntMatrix2, Letter, TnClass};
pub use geom::{Mat2, Point, Vec2};
pub use protocol::{StirrerConfig, StirringProtocol};
