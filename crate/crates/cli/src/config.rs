//! Pipeline configuration file.

use palletproj::detect::DetectConfig;
use palletproj::imgcore::HoughParams;
use palletproj::localize::{BoundaryMethod, DepthSweepConfig, FlankConfig, HorizontalConfig, LocalizeConfig};
use palletproj::pallet::SearchParams;
use palletproj::projection::PlaneSpec;
use palletproj::{Channel, PalletSpec};
use serde::{Deserialize, Serialize};

/// Every tunable of the pipeline. Missing keys take their defaults; unknown
/// keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub channel: Channel,
    pub boundary_method: BoundaryMethod,
    pub contrast_min: f64,
    pub tau_edge: f64,
    pub theta_detect: f64,
    pub stride: usize,
    pub h_min: f64,
    pub eps_plane: f64,
    pub residual_tol: f64,
    pub prefer_hole_top: bool,
    pub hole_fallback: bool,
    pub yaw_iterations: usize,
    pub hough: HoughParams,
    pub flank: FlankConfig,
    pub horizontal: HorizontalConfig,
    pub depth: DepthSweepConfig,
    pub pallet: PalletSpec,
    /// Shelf-front plane for `detect`.
    pub shelf: Option<PlaneSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let l = LocalizeConfig::default();
        let s = SearchParams::default();
        Self {
            channel: l.channel,
            boundary_method: l.boundary_method,
            contrast_min: l.contrast_min,
            tau_edge: l.tau_edge,
            theta_detect: l.theta_detect,
            stride: s.stride,
            h_min: l.h_min,
            eps_plane: l.eps_plane,
            residual_tol: l.residual_tol,
            prefer_hole_top: l.prefer_hole_top,
            hole_fallback: l.hole_fallback,
            yaw_iterations: l.yaw_iterations,
            hough: l.hough,
            flank: l.flank,
            horizontal: l.horizontal,
            depth: l.depth,
            pallet: PalletSpec::default(),
            shelf: None,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), String> {
        self.localize().validate().map_err(|e| e.to_string())?;
        self.pallet.validate().map_err(|e| e.to_string())?;
        if self.stride == 0 {
            return Err("stride must be at least 1".into());
        }
        if let Some(shelf) = &self.shelf {
            shelf.validate().map_err(|e| format!("shelf: {e}"))?;
        }
        Ok(())
    }

    pub fn localize(&self) -> LocalizeConfig {
        LocalizeConfig {
            channel: self.channel,
            boundary_method: self.boundary_method,
            hough: self.hough,
            flank: self.flank,
            contrast_min: self.contrast_min,
            tau_edge: self.tau_edge,
            theta_detect: self.theta_detect,
            h_min: self.h_min,
            eps_plane: self.eps_plane,
            residual_tol: self.residual_tol,
            prefer_hole_top: self.prefer_hole_top,
            hole_fallback: self.hole_fallback,
            yaw_iterations: self.yaw_iterations,
            horizontal: self.horizontal,
            depth: self.depth,
        }
    }

    pub fn detect(&self) -> DetectConfig {
        DetectConfig {
            channel: self.channel,
            search: SearchParams { stride: self.stride, tau_edge: self.tau_edge, theta_detect: self.theta_detect },
            eps_plane: self.eps_plane,
        }
    }
}
