//! Polarization of binary linear kernels of arbitrary dimension.

pub mod asymptotics;
pub mod becpolar;
pub mod boundprop;
pub mod codec;
pub mod construct;
pub mod error;
pub mod extended;
pub mod gf2kernel;
pub mod numfmt;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use extended::{ExtendedUnitValue, Mode};
pub use gf2kernel::{BitMatrix, KernelProfile};
