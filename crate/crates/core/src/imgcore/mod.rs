//! 2D primitives: image buffers, channel extraction, bilinear sampling, Sobel
//! edges, and a Hough accumulator for near-vertical lines.

mod hough;
pub mod io;
mod raster;
mod sobel;

pub use hough::{hough_lines, HoughParams, LineHypothesis};
pub use raster::{Border, Channel, RasterImage};
pub use sobel::sobel_magnitude;
