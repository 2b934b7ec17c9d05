//! Joint phase-shift and hybrid precoder optimization for an Alamouti-coded
//! mmWave downlink assisted by two intelligent reflecting surfaces.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod alamouti;
pub mod channel;
pub mod convex;
pub mod config;
pub mod error;
pub mod hybrid;
pub mod joint;
pub mod linalg;
pub mod scalar;

pub use config::{SeedStream, StreamId, SystemConfig, UpaDims};
pub use error::{Error, Result};
pub use scalar::{ComplexMat, ComplexVec, Real};

/// `f64` channel set.
pub type Channels = channel::ChannelSet<f64>;
/// `f64` complex matrix.
pub type CMat = ComplexMat<f64>;
/// `f64` complex vector.
pub type CVec = ComplexVec<f64>;
