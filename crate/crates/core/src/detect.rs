//! Initial pallet detection on the shelf-front vertical plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{sobel_magnitude, Channel, RasterImage};
use crate::pallet::{build_edge_template, template_search, MatchScore, PalletPose, PalletSpec, SearchParams};
use crate::projection::{project_plane, EquirectImage, PlaneSpec, DEFAULT_EPS_PLANE, Z_UP};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectConfig {
    pub channel: Channel,
    pub search: SearchParams,
    pub eps_plane: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { channel: Channel::Luminance, search: SearchParams::default(), eps_plane: DEFAULT_EPS_PLANE }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub pose: PalletPose,
    pub score: MatchScore,
    pub plane: PlaneSpec,
    /// Face center in the projected shelf image.
    pub offset_px: (usize, usize),
}

/// Gray edge image of a plane projection.
pub fn plane_edges(eq: &EquirectImage, plane: &PlaneSpec, channel: Channel, eps_plane: f64) -> Result<RasterImage> {
    let projected = project_plane(eq, plane, eps_plane)?;
    sobel_magnitude(&projected.to_gray(channel)?)
}

/// Detects pallets on the shelf-front plane. Each detection's pose sits on
/// the plane with the plane's yaw; sorted by score, bounding boxes disjoint.
pub fn detect_pallets(eq: &EquirectImage, shelf: &PlaneSpec, spec: &PalletSpec, cfg: &DetectConfig) -> Result<Vec<Detection>> {
    shelf.validate()?;
    if (shelf.ey + Z_UP).norm() > 1e-6 {
        return Err(Error::invalid("shelf plane rows must run straight down (ey = -z)"));
    }
    let edges = plane_edges(eq, shelf, cfg.channel, cfg.eps_plane)?;
    let tmpl = build_edge_template(spec, shelf.res)?;
    // the outward normal faces the camera
    let normal = {
        let n = shelf.normal();
        if n.dot(&shelf.origin) > 0.0 { -n } else { n }
    };
    template_search(&edges, &tmpl, &cfg.search)?
        .into_iter()
        .map(|hit| {
            let position = shelf.pixel_to_world(hit.offset.0 as f64, hit.offset.1 as f64);
            let yaw_deg = PalletPose::yaw_for_normal(&position, &normal);
            Ok(Detection { pose: PalletPose::new(position, yaw_deg)?, score: hit.score, plane: shelf.clone(), offset_px: hit.offset })
        })
        .collect()
}

/// The detection's pose, used as the starting point for localization.
pub fn detection_to_initial_pose(d: &Detection) -> PalletPose {
    d.pose
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{make_shelf_plane, Vec3};

    #[test]
    fn initial_pose_is_the_detection_pose() {
        let plane = make_shelf_plane(Vec3::new(2000.0, -1500.0, -700.0), Vec3::new(0.0, 1.0, 0.0), 4000.0, 1000.0, 5.0).unwrap();
        let (cu, cv) = plane.center_px();
        let at = |u: f64, v: f64| Detection {
            pose: PalletPose::new(plane.pixel_to_world(u, v), 0.0).unwrap(),
            score: MatchScore(0.9),
            plane: plane.clone(),
            offset_px: (u as usize, v as usize),
        };
        assert_eq!(detection_to_initial_pose(&at(cu, cv)).position, plane.origin);
        let shifted = detection_to_initial_pose(&at(cu + 100.0, cv));
        assert!((shifted.position - (plane.origin + 500.0 * plane.ex)).norm() < 1e-9);
    }

    #[test]
    fn rejects_non_vertical_shelf_plane() {
        let eq = EquirectImage::new(RasterImage::filled(512, 256, 3, 0.5).unwrap()).unwrap();
        let plane = PlaneSpec::new(Vec3::new(0.0, 0.0, -800.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 1000.0, 1000.0, 5.0).unwrap();
        assert!(detect_pallets(&eq, &plane, &PalletSpec::default(), &DetectConfig::default()).is_err());
    }
}
