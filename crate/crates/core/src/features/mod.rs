//! Spectro-spatial features: per-electrode alpha power, projected to the plane
//! and interpolated onto a square grid.

mod clough_tocher;
mod delaunay;
mod fft;
mod map;
mod projection;
mod spectral;

pub use clough_tocher::{vertex_gradients, CloughTocher};
pub use delaunay::{triangulate, Point};
pub use fft::fft_in_place;
pub use map::{
    cell_centre, extract_ssf, interpolate_map, FeatureConfig, MapInterpolator, SsfExtractor,
    SsfMap, SsfTensor, EXTENT_PAD, FILL_VALUE, GRID_N,
};
pub use projection::{azimuthal_equidistant, project_electrodes, ProjectedLayout};
pub use spectral::{band_bins, band_power, fft_len, MIN_FFT_LEN};
