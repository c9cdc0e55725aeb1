//! Five-point face landmarks and their JSON file.
//!
//! Coordinates are pixels of the image they annotate, with pixel centers at
//! integer positions. A file names the five points directly:
//!
//! ```json
//! {"left_eye":[x,y], "right_eye":[x,y], "nose":[x,y], "mouth_left":[x,y], "mouth_right":[x,y]}
//! ```
//!
//! When only eye corners are known, `left_eye_corners` / `right_eye_corners`
//! (two points each) may replace `left_eye` / `right_eye`; the eye center is
//! the average of its corners.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveLandmarks {
    pub left_eye: Vec2,
    pub right_eye: Vec2,
    pub nose: Vec2,
    pub mouth_left: Vec2,
    pub mouth_right: Vec2,
}

/// Minimum distance between the eyes.
pub const MIN_EYE_DISTANCE: f64 = 1.0;

pub fn midpoint(a: Vec2, b: Vec2) -> Vec2 {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

impl FiveLandmarks {
    pub fn new(left_eye: Vec2, right_eye: Vec2, nose: Vec2, mouth_left: Vec2, mouth_right: Vec2) -> Result<Self> {
        let lm = Self {
            left_eye,
            right_eye,
            nose,
            mouth_left,
            mouth_right,
        };
        if !lm.points().iter().all(|p| p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::Domain("landmarks must be finite".into()));
        }
        let (dx, dy) = (left_eye[0] - right_eye[0], left_eye[1] - right_eye[1]);
        let d = dx.hypot(dy);
        if !(d > MIN_EYE_DISTANCE) {
            return Err(Error::Degenerate(format!("eyes are only {d} px apart")));
        }
        Ok(lm)
    }

    /// Builds landmarks with each eye center averaged from its two corners.
    pub fn from_eye_corners(
        left_corners: [Vec2; 2],
        right_corners: [Vec2; 2],
        nose: Vec2,
        mouth_left: Vec2,
        mouth_right: Vec2,
    ) -> Result<Self> {
        Self::new(
            midpoint(left_corners[0], left_corners[1]),
            midpoint(right_corners[0], right_corners[1]),
            nose,
            mouth_left,
            mouth_right,
        )
    }

    pub fn points(&self) -> [Vec2; 5] {
        [self.left_eye, self.right_eye, self.nose, self.mouth_left, self.mouth_right]
    }

    pub fn from_points(p: [Vec2; 5]) -> Result<Self> {
        Self::new(p[0], p[1], p[2], p[3], p[4])
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Result<Self> {
        Self::from_points(self.points().map(f))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarksDocument {
    left_eye: Option<Vec2>,
    right_eye: Option<Vec2>,
    left_eye_corners: Option<[Vec2; 2]>,
    right_eye_corners: Option<[Vec2; 2]>,
    nose: Vec2,
    mouth_left: Vec2,
    mouth_right: Vec2,
}

fn eye(name: &str, center: Option<Vec2>, corners: Option<[Vec2; 2]>) -> Result<Vec2> {
    match (center, corners) {
        (Some(c), None) => Ok(c),
        (None, Some([a, b])) => Ok(midpoint(a, b)),
        (Some(_), Some(_)) => Err(Error::Format(format!(
            "give either {name} or {name}_corners, not both"
        ))),
        (None, None) => Err(Error::Format(format!("missing {name} (or {name}_corners)"))),
    }
}

pub fn parse_landmarks(bytes: &[u8]) -> Result<FiveLandmarks> {
    let doc: LandmarksDocument =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("landmarks file: {e}")))?;
    FiveLandmarks::new(
        eye("left_eye", doc.left_eye, doc.left_eye_corners)?,
        eye("right_eye", doc.right_eye, doc.right_eye_corners)?,
        doc.nose,
        doc.mouth_left,
        doc.mouth_right,
    )
}

pub fn landmarks_to_json(lm: &FiveLandmarks) -> String {
    serde_json::to_string_pretty(lm).expect("landmarks serialize")
}

pub fn read_landmarks(path: impl AsRef<Path>) -> Result<FiveLandmarks> {
    parse_landmarks(&super::read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_eye_forms() {
        let direct = r#"{"left_eye":[30,40],"right_eye":[70,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80]}"#;
        let lm = parse_landmarks(direct.as_bytes()).unwrap();
        assert_eq!(lm.left_eye, [30.0, 40.0]);
        assert_eq!(parse_landmarks(landmarks_to_json(&lm).as_bytes()).unwrap(), lm);

        let corners = r#"{"left_eye_corners":[[25,41],[35,39]],"right_eye":[70,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80]}"#;
        assert_eq!(parse_landmarks(corners.as_bytes()).unwrap(), lm);
    }

    #[test]
    fn rejects_bad_documents() {
        let both = r#"{"left_eye":[30,40],"left_eye_corners":[[25,41],[35,39]],"right_eye":[70,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80]}"#;
        assert!(matches!(parse_landmarks(both.as_bytes()), Err(Error::Format(_))));
        let none = r#"{"right_eye":[70,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80]}"#;
        assert!(matches!(parse_landmarks(none.as_bytes()), Err(Error::Format(_))));
        let extra = r#"{"left_eye":[30,40],"right_eye":[70,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80],"chin":[1,2]}"#;
        assert!(matches!(parse_landmarks(extra.as_bytes()), Err(Error::Format(_))));
        let close = r#"{"left_eye":[30,40],"right_eye":[30.5,40],"nose":[50,60],"mouth_left":[35,80],"mouth_right":[65,80]}"#;
        assert!(matches!(parse_landmarks(close.as_bytes()), Err(Error::Degenerate(_))));
    }
}
