//! Pixel-space geometry: binary mask frames, contour tracing and resampling,
//! polygon rasterization, and shape measurements (moments, hulls, topology).

mod contour;
mod io;
mod mask;
mod raster;

pub use contour::{extract_contour, resample_arclength, Contour, ContourVideo};
pub use io::{load_mvb1, load_pgm_dir, save_mvb1, save_pgm_dir, VideoIoError};
pub use mask::{MaskFrame, MaskVideo};
pub use raster::{rasterize_contour, rasterize_convex_polygon, sanitize_phantom, RasterOutput};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("frame has no foreground pixels")]
    NoForeground,
    #[error("frame has {0} foreground components, expected exactly one")]
    MultipleComponents(usize),
    #[error("frame has {0} holes, expected none")]
    HasHoles(usize),
    #[error("contour has zero perimeter")]
    DegenerateContour,
    #[error("contour needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("point ({x}, {y}) falls outside the {w}x{h} canvas")]
    OutOfCanvas { x: f64, y: f64, w: u32, h: u32 },
    #[error("frames have mismatched dimensions: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("video must contain at least one frame")]
    EmptyVideo,
}
