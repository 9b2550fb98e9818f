//! Grid evaluation of interpolated band-power maps and per-window tensors.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::clough_tocher::{cubic_basis, split_coordinates, sub_patch, CloughTocher};
use super::projection::{project_electrodes, ProjectedLayout};
use super::spectral::band_power;
use crate::data::{AttentionLabel, DecisionWindow, Montage};
use crate::signal::Band;
use crate::{Error, Result};

pub const GRID_N: usize = 32;
/// Grid padding around the hull bounding box, per side.
pub const EXTENT_PAD: f64 = 0.05;
/// Value written to cells outside the hull.
pub const FILL_VALUE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub band: Band,
    /// Consecutive maps per decision window.
    pub sub_windows: usize,
    pub grid_n: usize,
    /// Map `log(1 + p)` instead of `p`.
    pub log_power: bool,
    /// Clamp vertex gradients so no patch overshoots its data.
    pub gradient_limit: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            band: Band::ALPHA,
            sub_windows: 1,
            grid_n: GRID_N,
            log_power: false,
            gradient_limit: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sub_windows == 0 {
            return Err(Error::InvalidConfig("sub_windows must be >= 1".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidConfig("grid_n must be >= 2".into()));
        }
        Ok(())
    }
}

/// One interpolated map, row-major: row index follows `v`, column index `u`,
/// both ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SsfMap {
    pub grid_n: usize,
    pub grid: Vec<f64>,
    /// `(u_min, u_max, v_min, v_max)`
    pub extent: [f64; 4],
}

impl SsfMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.grid_n + col]
    }

    /// Mirror about the vertical axis (`u -> -u` for a symmetric extent).
    pub fn flipped_horizontally(&self) -> SsfMap {
        let n = self.grid_n;
        let grid = (0..n * n)
            .map(|k| self.grid[(k / n) * n + (n - 1 - k % n)])
            .collect();
        SsfMap {
            grid_n: n,
            grid,
            extent: [
                -self.extent[1],
                -self.extent[0],
                self.extent[2],
                self.extent[3],
            ],
        }
    }
}

/// `S` stacked maps for one window, stored single precision `[S][n][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsfTensor {
    pub n_maps: usize,
    pub grid_n: usize,
    pub data: Vec<f32>,
    pub label: AttentionLabel,
    pub subject_id: String,
}

impl SsfTensor {
    pub fn map(&self, s: usize, extent: [f64; 4]) -> SsfMap {
        let len = self.grid_n * self.grid_n;
        SsfMap {
            grid_n: self.grid_n,
            grid: self.data[s * len..(s + 1) * len]
                .iter()
                .map(|&v| f64::from(v))
                .collect(),
            extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cell {
    triangle: usize,
    patch: [usize; 10],
    basis: [f64; 10],
}

/// Layout plus precomputed per-cell patch weights for a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MapInterpolator {
    layout: ProjectedLayout,
    grid_n: usize,
    extent: [f64; 4],
    cells: Vec<Option<Cell>>,
}

impl MapInterpolator {
    pub fn new(layout: ProjectedLayout, grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(Error::InvalidConfig("grid_n must be >= 2".into()));
        }
        let b = layout.bounds();
        let (pu, pv) = (EXTENT_PAD * (b[1] - b[0]), EXTENT_PAD * (b[3] - b[2]));
        let extent = [b[0] - pu, b[1] + pu, b[2] - pv, b[3] + pv];
        let cells = (0..grid_n * grid_n)
            .map(|k| {
                let p = cell_centre(extent, grid_n, k / grid_n, k % grid_n);
                layout.locate(p).map(|(t, l)| {
                    let (i, [s, r, w]) = split_coordinates(l);
                    Cell {
                        triangle: t,
                        patch: sub_patch(i),
                        basis: cubic_basis(s, r, w),
                    }
                })
            })
            .collect();
        Ok(MapInterpolator {
            layout,
            grid_n,
            extent,
            cells,
        })
    }

    pub fn layout(&self) -> &ProjectedLayout {
        &self.layout
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn extent(&self) -> [f64; 4] {
        self.extent
    }

    pub fn is_inside(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.grid_n + col].is_some()
    }

    /// Interpolates one value per layout point onto the grid.
    pub fn map(&self, values: &[f64], gradient_limit: bool) -> Result<SsfMap> {
        let ct = CloughTocher::new(&self.layout, values, gradient_limit)?;
        let grid = self
            .cells
            .iter()
            .map(|cell| match cell {
                Some(c) => {
                    let net = ct.control(c.triangle);
                    c.patch.iter().zip(&c.basis).map(|(&k, b)| net[k] * b).sum()
                }
                None => FILL_VALUE,
            })
            .collect();
        Ok(SsfMap {
            grid_n: self.grid_n,
            grid,
            extent: self.extent,
        })
    }
}

/// Centre of cell `(row, col)` in plane coordinates.
pub fn cell_centre(extent: [f64; 4], n: usize, row: usize, col: usize) -> [f64; 2] {
    let du = (extent[1] - extent[0]) / n as f64;
    let dv = (extent[3] - extent[2]) / n as f64;
    [
        extent[0] + (col as f64 + 0.5) * du,
        extent[2] + (row as f64 + 0.5) * dv,
    ]
}

/// Clough-Tocher map of `values` on a `grid_n` square grid, overshoot guard on.
pub fn interpolate_map(layout: &ProjectedLayout, values: &[f64], grid_n: usize) -> Result<SsfMap> {
    MapInterpolator::new(layout.clone(), grid_n)?.map(values, true)
}

/// Everything needed to turn windows of one channel set into tensors.
#[derive(Debug, Clone)]
pub struct SsfExtractor {
    interp: MapInterpolator,
    /// Row of the window feeding each layout point.
    channel_rows: Vec<usize>,
    cfg: FeatureConfig,
}

impl SsfExtractor {
    /// `channels` names the rows of the windows that will be passed in; every
    /// montage electrode must be among them.
    pub fn new(montage: &Montage, channels: &[String], cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = project_electrodes(montage)?;
        let channel_rows = layout
            .names
            .iter()
            .map(|n| {
                channels
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::UnknownChannel(n.clone()))
            })
            .collect::<Result<_>>()?;
        Ok(SsfExtractor {
            interp: MapInterpolator::new(layout, cfg.grid_n)?,
            channel_rows,
            cfg,
        })
    }

    pub fn interpolator(&self) -> &MapInterpolator {
        &self.interp
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// Band power per layout point for samples `[from, to)` of each row.
    pub fn powers(&self, window: &DecisionWindow, from: usize, to: usize) -> Result<Vec<f64>> {
        let rows: Vec<&[f64]> = self
            .channel_rows
            .iter()
            .map(|&r| &window.samples[r][from..to])
            .collect();
        let mut p = band_power(&rows, window.sample_rate, self.cfg.band)?;
        if self.cfg.log_power {
            p.iter_mut().for_each(|v| *v = libm::log1p(*v));
        }
        Ok(p)
    }
}

/// Splits a window into `S` equal parts and maps the band power of each.
pub fn extract_ssf(window: &DecisionWindow, ex: &SsfExtractor) -> Result<SsfTensor> {
    let s = ex.cfg.sub_windows;
    let need = ex.channel_rows.iter().max().map_or(0, |m| m + 1);
    if window.samples.len() < need {
        return Err(Error::ShapeMismatch {
            what: "window channels".into(),
            expected: need,
            found: window.samples.len(),
        });
    }
    let part = window.len() / s;
    if part < 2 {
        return Err(Error::TooShort {
            needed: 2 * s,
            found: window.len(),
        });
    }
    let n = ex.interp.grid_n;
    let mut data = Vec::with_capacity(s * n * n);
    for k in 0..s {
        let p = ex.powers(window, k * part, (k + 1) * part)?;
        let m = ex.interp.map(&p, ex.cfg.gradient_limit)?;
        data.extend(m.grid.iter().map(|&v| v as f32));
    }
    Ok(SsfTensor {
        n_maps: s,
        grid_n: n,
        data,
        label: window.label,
        subject_id: window.subject_id.clone(),
    })
}
