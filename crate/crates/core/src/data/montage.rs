use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Electrode on the unit sphere, head-centred: x right, y front (nasion), z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Electrode {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Left,
    Midline,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Montage {
    entries: Vec<Electrode>,
}

const NORM_TOLERANCE: f64 = 1e-6;
const MIDLINE_TOLERANCE: f64 = 1e-9;

impl Montage {
    pub fn new(entries: Vec<Electrode>) -> Result<Self> {
        let m = Montage { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::DuplicateChannel(e.name.clone()));
            }
            let norm = libm::sqrt(e.x * e.x + e.y * e.y + e.z * e.z);
            if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidConfig(format!(
                    "electrode `{}` has norm {norm}, expected a unit vector",
                    e.name
                )));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[Electrode] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Electrode> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Hemisphere by the sign of x; |x| below 1e-9 counts as midline.
    pub fn hemisphere(e: &Electrode) -> Hemisphere {
        if e.x.abs() < MIDLINE_TOLERANCE {
            Hemisphere::Midline
        } else if e.x < 0.0 {
            Hemisphere::Left
        } else {
            Hemisphere::Right
        }
    }

    /// Same electrodes with x negated.
    pub fn mirrored(&self) -> Montage {
        Montage {
            entries: self
                .entries
                .iter()
                .map(|e| Electrode {
                    x: -e.x,
                    ..e.clone()
                })
                .collect(),
        }
    }
}
