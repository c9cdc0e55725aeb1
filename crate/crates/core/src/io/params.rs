//! JSON parameter files for the projective and dense-grid backends.
//!
//! Projective: `{"version":1, "coord_space":"ndc", "homography":[h0,...,h7]}`.
//! Dense: `{"version":1, "coord_space":"ndc", "grid_h":16, "grid_w":16, "offsets":[[du,dv],...]}`
//! with offsets row-major from the top-left grid node.

use serde::{Deserialize, Serialize};

use super::points::{check_header, NDC, POINTS_VERSION};
use crate::backends::{CoarseDeformationGrid, ProjectiveParams};
use crate::error::{Error, Result};
use crate::image::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectiveDocument {
    pub version: u32,
    pub coord_space: String,
    pub homography: [f64; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseGridDocument {
    pub version: u32,
    pub coord_space: String,
    pub grid_h: usize,
    pub grid_w: usize,
    pub offsets: Vec<Vec2>,
}

pub fn parse_projective(bytes: &[u8]) -> Result<ProjectiveParams> {
    let doc: ProjectiveDocument =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("projective file: {e}")))?;
    check_header(doc.version, &doc.coord_space)?;
    ProjectiveParams::new(doc.homography)
}

pub fn parse_dense_grid(bytes: &[u8]) -> Result<CoarseDeformationGrid> {
    let doc: DenseGridDocument =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("dense grid file: {e}")))?;
    check_header(doc.version, &doc.coord_space)?;
    CoarseDeformationGrid::new(doc.grid_h, doc.grid_w, doc.offsets)
}

pub fn projective_to_json(params: &ProjectiveParams) -> String {
    serde_json::to_string_pretty(&ProjectiveDocument {
        version: POINTS_VERSION,
        coord_space: NDC.into(),
        homography: params.params(),
    })
    .expect("homography serializes")
}

pub fn dense_grid_to_json(grid: &CoarseDeformationGrid) -> String {
    serde_json::to_string_pretty(&DenseGridDocument {
        version: POINTS_VERSION,
        coord_space: NDC.into(),
        grid_h: grid.height(),
        grid_w: grid.width(),
        offsets: grid.offsets().to_vec(),
    })
    .expect("grid serializes")
}
