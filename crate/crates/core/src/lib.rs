//! Manifold denoising with spectral graph wavelets.
//!
//! The pipeline builds a Gaussian kNN graph over a noisy point cloud, treats
//! each ambient coordinate as a graph signal, transforms it with a spectral
//! graph wavelet frame, keeps the low-frequency bands and inverts the frame.
//! [`analysis`] checks the spectral-decay bounds that motivate the method.

pub mod analysis;
pub mod denoise;
pub mod error;
pub mod graph;
pub mod sgw;
pub mod pointcloud;

pub use error::{MfdError, Result};
