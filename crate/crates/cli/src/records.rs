//! Pose, detection and ground-truth records.

use palletproj::projection::Vec3;
use palletproj::synthcam::{GroundTruth, HeightClass};
use palletproj::{Detection, Localization, PalletPose};
use serde::{Deserialize, Serialize};

pub const CAMERA_FRAME: &str = "camera";

/// A pallet pose in the camera frame. Localization output carries a score
/// and a `[diagnostics]` table with stage timings; initial-pose files need
/// only the frame, position and yaw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub frame: String,
    pub position_mm: [f64; 3],
    pub yaw_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

/// Timing fields, excluded from determinism comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub yaw_ms: f64,
    pub position_ms: f64,
}

impl PoseRecord {
    pub fn from_pose(pose: &PalletPose) -> Self {
        let p = pose.position;
        Self { frame: CAMERA_FRAME.into(), position_mm: [p.x, p.y, p.z], yaw_deg: pose.yaw_deg, score: None, diagnostics: None }
    }

    pub fn from_localization(loc: &Localization) -> Self {
        Self {
            score: Some(loc.depth.profile.best_score),
            diagnostics: Some(Diagnostics { yaw_ms: loc.timings.yaw_ms, position_ms: loc.timings.position_ms }),
            ..Self::from_pose(&loc.pose)
        }
    }

    pub fn pose(&self) -> Result<PalletPose, String> {
        check_frame(&self.frame)?;
        let [x, y, z] = self.position_mm;
        PalletPose::new(Vec3::new(x, y, z), self.yaw_deg).map_err(|e| e.to_string())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let rec: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        rec.pose()?;
        Ok(rec)
    }
}

fn check_frame(frame: &str) -> Result<(), String> {
    if frame == CAMERA_FRAME {
        Ok(())
    } else {
        Err(format!("unsupported frame {frame:?}, expected \"{CAMERA_FRAME}\""))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: String,
    pub position_mm: [f64; 3],
    pub yaw_deg: f64,
    pub score: f64,
    /// Face center in the projected shelf image.
    pub offset_px: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionsFile {
    pub count: usize,
    #[serde(default)]
    pub detections: Vec<DetectionRecord>,
}

impl DetectionsFile {
    pub fn new(dets: &[Detection]) -> Self {
        let detections = dets
            .iter()
            .map(|d| {
                let p = d.pose.position;
                DetectionRecord {
                    frame: CAMERA_FRAME.into(),
                    position_mm: [p.x, p.y, p.z],
                    yaw_deg: d.pose.yaw_deg,
                    score: d.score.0,
                    offset_px: [d.offset_px.0, d.offset_px.1],
                }
            })
            .collect();
        Self { count: dets.len(), detections }
    }
}

impl DetectionRecord {
    /// The detection as an initial pose for `localize`.
    pub fn pose_record(&self) -> PoseRecord {
        PoseRecord { frame: self.frame.clone(), position_mm: self.position_mm, yaw_deg: self.yaw_deg, score: None, diagnostics: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub frame: String,
    pub position_mm: [f64; 3],
    pub yaw_deg: f64,
    pub height_class: HeightClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    #[serde(default)]
    pub pallets: Vec<TruthRecord>,
}

impl TruthFile {
    pub fn new(truths: &[GroundTruth]) -> Self {
        let pallets = truths
            .iter()
            .map(|t| {
                let p = t.pose.position;
                TruthRecord { frame: CAMERA_FRAME.into(), position_mm: [p.x, p.y, p.z], yaw_deg: t.pose.yaw_deg, height_class: t.height_class }
            })
            .collect();
        Self { pallets }
    }
}
