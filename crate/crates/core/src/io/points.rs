//! Control-point JSON:
//! `{"version":1, "coord_space":"ndc", "k":16, "points":[[u,v],...], "displacements":[[du,dv],...]}`.
//!
//! Parsing is strict. Unknown fields, another version or another coordinate
//! space are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Vec2;
use crate::tps::ControlPointSet;

pub const POINTS_VERSION: u32 = 1;
pub const NDC: &str = "ndc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsDocument {
    pub version: u32,
    pub coord_space: String,
    pub k: usize,
    pub points: Vec<Vec2>,
    pub displacements: Vec<Vec2>,
}

impl From<&ControlPointSet> for PointsDocument {
    fn from(c: &ControlPointSet) -> Self {
        Self {
            version: POINTS_VERSION,
            coord_space: NDC.into(),
            k: c.len(),
            points: c.points().to_vec(),
            displacements: c.displacements().to_vec(),
        }
    }
}

pub(crate) fn check_header(version: u32, coord_space: &str) -> Result<()> {
    if version != POINTS_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if coord_space != NDC {
        return Err(Error::Format(format!(
            "coord_space must be \"{NDC}\", got {coord_space:?}"
        )));
    }
    Ok(())
}

impl PointsDocument {
    pub fn into_control(self) -> Result<ControlPointSet> {
        check_header(self.version, &self.coord_space)?;
        if self.points.len() != self.k || self.displacements.len() != self.k {
            return Err(Error::Format(format!(
                "k = {} but {} points and {} displacements",
                self.k,
                self.points.len(),
                self.displacements.len()
            )));
        }
        ControlPointSet::new(self.points, self.displacements)
    }
}

pub fn parse_points(bytes: &[u8]) -> Result<ControlPointSet> {
    let doc: PointsDocument =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("points file: {e}")))?;
    doc.into_control()
}

pub fn points_to_json(control: &ControlPointSet) -> String {
    serde_json::to_string_pretty(&PointsDocument::from(control)).expect("points serialize")
}

pub fn read_points(path: impl AsRef<Path>) -> Result<ControlPointSet> {
    parse_points(&super::read_file(path.as_ref())?)
}

pub fn write_points(control: &ControlPointSet, path: impl AsRef<Path>) -> Result<()> {
    super::write_file(path.as_ref(), points_to_json(control).as_bytes())
}
