//! Cell phantom video generation toolkit.
//!
//! Represents single-cell binary mask videos as multivariate time series of
//! elliptical Fourier descriptors, learns their temporal evolution with a
//! denoising diffusion model, generates new phantom videos, and compares
//! datasets through morphological feature curves.

pub mod cli;
pub mod dataset;
pub mod diffusion;
pub mod efd;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
