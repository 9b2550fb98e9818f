//! Single-map dumps for visual inspection: ASCII PGM plus raw CSV.
//!
//! Both files put the front of the head (largest `v`) on the first line and
//! the left side (smallest `u`) in the first column.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ssf_core::data::{segment_windows, RawRecording};
use ssf_core::features::{extract_ssf, SsfExtractor, SsfMap};

use crate::error::Result;
use crate::io::write_atomic;

/// Rows top to bottom as displayed.
fn display_rows(map: &SsfMap) -> impl Iterator<Item = &[f64]> {
    map.grid.chunks(map.grid_n).rev()
}

/// Plain PGM (P2), min-max scaled to 0..=255; a constant map is all zeros.
pub fn pgm(map: &SsfMap) -> String {
    let lo = map.grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P2\n{n} {n}\n255\n", n = map.grid_n);
    for row in display_rows(map) {
        let px: Vec<String> = row
            .iter()
            .map(|&v| {
                let g = if span > 0.0 {
                    ((v - lo) / span * 255.0).round()
                } else {
                    0.0
                };
                format!("{}", g as u8)
            })
            .collect();
        let _ = writeln!(out, "{}", px.join(" "));
    }
    out
}

pub fn csv(map: &SsfMap) -> String {
    let mut out = String::new();
    for row in display_rows(map) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// First map of window `index` of `rec` cut at `window_s` seconds.
pub fn window_map(
    rec: &RawRecording,
    ex: &SsfExtractor,
    window_s: f64,
    overlap: f64,
    index: usize,
) -> Result<SsfMap> {
    let windows = segment_windows(rec, window_s, overlap)?;
    let w = windows.get(index).ok_or(ssf_core::Error::IndexOutOfRange {
        index,
        len: windows.len(),
    })?;
    let t = extract_ssf(w, ex)?;
    Ok(t.map(0, ex.interpolator().extent()))
}

/// Writes `<prefix>.pgm` and `<prefix>.csv`.
pub fn write_dump(prefix: &Path, map: &SsfMap) -> Result<[PathBuf; 2]> {
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let (p, c) = (with_ext(".pgm"), with_ext(".csv"));
    write_atomic(&p, pgm(map).as_bytes())?;
    write_atomic(&c, csv(map).as_bytes())?;
    Ok([p, c])
}
