//! Electrode layouts: bundled BioSemi caps or a JSON file of `{name, x, y, z}`.

use std::path::Path;

use ssf_core::data::Montage;

use crate::error::{Result, SsfError};
use crate::io::read_json;

const BIOSEMI64: &str = include_str!("../data/biosemi64.json");
const BIOSEMI32: &str = include_str!("../data/biosemi32.json");

/// Names accepted by [`load_montage`] besides file paths.
pub const BUNDLED: [&str; 2] = ["biosemi64", "biosemi32"];

pub fn bundled(name: &str) -> Option<Montage> {
    let text = match name {
        "biosemi64" => BIOSEMI64,
        "biosemi32" => BIOSEMI32,
        _ => return None,
    };
    let m: Montage = serde_json::from_str(text).expect("bundled montage parses");
    Some(m)
}

/// A bundled montage by name, otherwise a JSON file.
pub fn load_montage(spec: &str) -> Result<Montage> {
    let m = match bundled(spec) {
        Some(m) => m,
        None => read_json::<Montage>(Path::new(spec))?,
    };
    m.validate().map_err(|e| match e {
        ssf_core::Error::InvalidConfig(msg) => SsfError::format(spec, msg),
        e => e.into(),
    })?;
    Ok(m)
}
