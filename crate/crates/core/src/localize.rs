//! Pallet localization from an approximate pose.
//!
//! Yaw comes first. The panorama is projected onto the horizontal plane that
//! contains the pallet's front-bottom edge (front-top when the pallet is above
//! the camera, or the fork-hole top edge as a fallback). The plane is laid out
//! so that, if the approximate yaw were right, that edge would run exactly
//! down the center column. Lines lying in a horizontal plane keep their
//! angles under this projection, so the measured tilt of the boundary line
//! is the yaw error.
//!
//! Position comes second, with yaw held fixed: the vertical face plane is
//! slid toward and away from the camera, along the ray through the
//! approximate center, and the depth whose projection best matches the
//! full-scale edge template wins.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::plane_edges;
use crate::error::{Error, Result};
use crate::imgcore::{hough_lines, sobel_magnitude, Channel, HoughParams, LineHypothesis, RasterImage};
use crate::pallet::{build_edge_template, match_score, EdgeTemplate, PalletPose, PalletSpec};
use crate::projection::{
    make_horizontal_plane, make_shelf_plane, project_plane, EquirectImage, PlaneHeight, PlaneSpec, Vec3,
    DEFAULT_EPS_PLANE, DEFAULT_H_MIN,
};

/// `corrected_yaw = yaw + YAW_SIGN * delta_yaw`.
///
/// Image rows follow the face's lateral axis and columns point into the
/// pallet, so a face turned by +d about +z shows a boundary whose top leans
/// toward -u, i.e. a measured tilt of -d.
pub const YAW_SIGN: f64 = -1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMethod {
    #[default]
    FlankThreshold,
    EdgeHough,
}

/// Flank regions: `width_px x height_px` each, immediately left and right of
/// the center column. Boundary crossings are searched within `scan_px` of it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlankConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub scan_px: usize,
}

impl Default for FlankConfig {
    fn default() -> Self {
        Self { width_px: 20, height_px: 100, scan_px: 40 }
    }
}

/// Horizontal projection grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizontalConfig {
    pub res: f64,
    /// Extent perpendicular to the edge.
    pub across_mm: f64,
    /// Extra extent along the edge beyond the pallet width, each side.
    pub along_margin_mm: f64,
    /// Fraction of the pallet (or hole) span whose rows are scanned.
    pub row_span_frac: f64,
}

impl Default for HorizontalConfig {
    fn default() -> Self {
        Self { res: 3.0, across_mm: 400.0, along_margin_mm: 100.0, row_span_frac: 0.8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSweepConfig {
    pub lo_mm: f64,
    pub hi_mm: f64,
    pub coarse_step_mm: f64,
    pub fine_step_mm: f64,
    /// In-plane search half-width at each depth, pixels.
    pub search_px: usize,
    pub res: f64,
}

impl Default for DepthSweepConfig {
    fn default() -> Self {
        Self { lo_mm: -150.0, hi_mm: 550.0, coarse_step_mm: 20.0, fine_step_mm: 2.0, search_px: 10, res: 3.0 }
    }
}

impl DepthSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo_mm <= 0.0 && self.hi_mm >= 0.0 && self.lo_mm < self.hi_mm) {
            return Err(Error::invalid("depth range must contain 0"));
        }
        if !(self.coarse_step_mm > 0.0 && self.fine_step_mm > 0.0 && self.res > 0.0) {
            return Err(Error::invalid("depth steps and resolution must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeConfig {
    pub channel: Channel,
    pub boundary_method: BoundaryMethod,
    pub hough: HoughParams,
    pub flank: FlankConfig,
    pub contrast_min: f64,
    pub tau_edge: f64,
    pub theta_detect: f64,
    pub h_min: f64,
    pub eps_plane: f64,
    pub residual_tol: f64,
    /// Use the fork-hole top edge whenever it is far enough from camera height.
    pub prefer_hole_top: bool,
    /// Retry on the fork-hole top edge when the face boundary is low-contrast.
    pub hole_fallback: bool,
    /// Yaw passes; later passes run only while the last correction exceeds `residual_tol`.
    pub yaw_iterations: usize,
    pub horizontal: HorizontalConfig,
    pub depth: DepthSweepConfig,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            channel: Channel::Luminance,
            boundary_method: BoundaryMethod::FlankThreshold,
            hough: HoughParams::default(),
            flank: FlankConfig::default(),
            contrast_min: 0.05,
            tau_edge: 0.2,
            theta_detect: 0.6,
            h_min: DEFAULT_H_MIN,
            eps_plane: DEFAULT_EPS_PLANE,
            residual_tol: 0.5,
            prefer_hole_top: false,
            hole_fallback: true,
            yaw_iterations: 1,
            horizontal: HorizontalConfig::default(),
            depth: DepthSweepConfig::default(),
        }
    }
}

impl LocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        self.hough.validate()?;
        self.depth.validate()?;
        let positive = [
            self.tau_edge,
            self.h_min,
            self.eps_plane,
            self.residual_tol,
            self.horizontal.res,
            self.horizontal.across_mm,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("thresholds and resolutions must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta_detect) || !(self.contrast_min >= 0.0) {
            return Err(Error::invalid("theta_detect must be in [0, 1] and contrast_min non-negative"));
        }
        if !(self.horizontal.row_span_frac > 0.0 && self.horizontal.row_span_frac <= 1.0) {
            return Err(Error::invalid("row_span_frac must be in (0, 1]"));
        }
        if self.flank.width_px == 0 || self.flank.height_px == 0 || self.flank.scan_px == 0 {
            return Err(Error::invalid("flank sizes must be positive"));
        }
        if self.yaw_iterations == 0 {
            return Err(Error::invalid("yaw_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Picks the horizontal plane for yaw measurement: the bottom face when the
/// pallet is below the camera, the top face when above, the fork-hole top
/// edge when preferred or when the face boundary was too faint.
pub fn select_plane_height(
    pose: &PalletPose,
    spec: &PalletSpec,
    h_min: f64,
    prefer_hole_top: bool,
    face_low_contrast: bool,
) -> Result<PlaneHeight> {
    let usable = |h: PlaneHeight| h.z_of(pose, spec).abs() >= h_min;
    if (prefer_hole_top || face_low_contrast) && usable(PlaneHeight::HoleTop) {
        return Ok(PlaneHeight::HoleTop);
    }
    if PlaneHeight::Bottom.z_of(pose, spec) <= -h_min {
        return Ok(PlaneHeight::Bottom);
    }
    if PlaneHeight::Top.z_of(pose, spec) >= h_min {
        return Ok(PlaneHeight::Top);
    }
    if usable(PlaneHeight::HoleTop) {
        return Ok(PlaneHeight::HoleTop);
    }
    Err(Error::SameHeight { z_mm: PlaneHeight::Bottom.z_of(pose, spec), h_min })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryExtraction {
    pub method: BoundaryMethod,
    /// Boundary point candidates `(u, v)`.
    pub candidates: Vec<(f64, f64)>,
    /// Selected line, refitted to its inlier candidates.
    pub line: LineHypothesis,
    /// Signed tilt of the boundary from the center column; positive when
    /// the top of the line leans toward +u.
    pub delta_yaw_deg: f64,
}

/// Where and how to look for the boundary in a horizontal projection.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryScan {
    pub flank: FlankConfig,
    /// Row around which the flank regions are centered.
    pub flank_row: usize,
    /// Rows searched for boundary points.
    pub rows: Vec<Range<usize>>,
    pub contrast_min: f64,
    pub tau_edge: f64,
    pub hough: HoughParams,
}

impl BoundaryScan {
    /// Flanks centered vertically, every row scanned.
    pub fn whole_image(img: &RasterImage, flank: FlankConfig, contrast_min: f64, hough: HoughParams) -> Self {
        Self { flank, flank_row: img.height() / 2, rows: std::iter::once(0..img.height()).collect(), contrast_min, tau_edge: 0.2, hough }
    }

    fn row_iter(&self, height: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().flat_map(move |r| r.start.min(height)..r.end.min(height))
    }
}

/// Flank-threshold boundary extraction.
///
/// The threshold is the midpoint of the mean intensities of two regions
/// sandwiching the center column. In each scanned row the boundary point is
/// the sub-pixel threshold crossing nearest the center column whose polarity
/// matches the flanks (right-flank side on +u). A Hough transform over the
/// points gives the line.
pub fn extract_boundary_flank(img: &RasterImage, scan: &BoundaryScan) -> Result<BoundaryExtraction> {
    if img.channels() != 1 {
        return Err(Error::invalid("boundary extraction needs a gray image"));
    }
    let (w, h) = (img.width(), img.height());
    let c = w / 2;
    let fw = scan.flank.width_px;
    if c < fw || c + fw >= w {
        return Err(Error::invalid(format!("image width {w} cannot hold two {fw}-px flank regions")));
    }
    let fh = scan.flank.height_px.min(h);
    let r0 = scan.flank_row.saturating_sub(fh / 2).min(h - fh);
    let left = img.region_mean(c - fw, c, r0, r0 + fh).expect("non-empty flank");
    let right = img.region_mean(c + 1, c + 1 + fw, r0, r0 + fh).expect("non-empty flank");
    let contrast = (left - right).abs();
    if contrast < scan.contrast_min {
        return Err(Error::LowContrast { contrast, min: scan.contrast_min });
    }
    let t = (left + right) / 2.0;
    let right_high = right > t;

    let x_lo = c.saturating_sub(scan.flank.scan_px).max(1);
    let x_hi = (c + scan.flank.scan_px).min(w - 1);
    let mut candidates = Vec::new();
    for y in scan.row_iter(h) {
        let mut best: Option<f64> = None;
        for x in x_lo..=x_hi {
            let (a, b) = (img.get(x - 1, y, 0) as f64, img.get(x, y, 0) as f64);
            // crossing between x-1 (left state) and x (right state)
            let crosses = if right_high { a <= t && b > t } else { a >= t && b < t };
            if !crosses {
                continue;
            }
            let u = (x - 1) as f64 + (t - a) / (b - a);
            if best.is_none_or(|bu| (u - c as f64).abs() < (bu - c as f64).abs()) {
                best = Some(u);
            }
        }
        if let Some(u) = best {
            candidates.push((u, y as f64));
        }
    }
    let center = (c as f64, scan.flank_row as f64);
    let lines = hough_lines(&candidates, &scan.hough, center)?;
    finish_boundary(BoundaryMethod::FlankThreshold, candidates, lines[0], &scan.hough)
}

/// Edge-based boundary extraction: Sobel, threshold at `tau_edge`, Hough,
/// then the strong line passing nearest the image center.
pub fn extract_boundary_edge(img: &RasterImage, scan: &BoundaryScan) -> Result<BoundaryExtraction> {
    let edges = sobel_magnitude(&img.to_gray(Channel::Luminance)?)?;
    let (w, h) = (edges.width(), edges.height());
    let mut candidates = Vec::new();
    for y in scan.row_iter(h) {
        for x in 0..w {
            if edges.get(x, y, 0) as f64 >= scan.tau_edge {
                candidates.push((x as f64, y as f64));
            }
        }
    }
    let center = ((w / 2) as f64, scan.flank_row as f64);
    let lines = hough_lines(&candidates, &scan.hough, center)?;
    let top_votes = lines[0].votes;
    // strong lines only, then nearest the center line at the flank row
    let chosen = lines
        .iter()
        .take_while(|l| 2 * l.votes >= top_votes)
        .min_by(|a, b| {
            (a.u_at(center.1) - center.0)
                .abs()
                .total_cmp(&(b.u_at(center.1) - center.0).abs())
        })
        .copied()
        .expect("hough returns at least one line");
    finish_boundary(BoundaryMethod::EdgeHough, candidates, chosen, &scan.hough)
}

/// Least-squares refit of `u = a + b v` over the candidates near `line`.
fn finish_boundary(
    method: BoundaryMethod,
    candidates: Vec<(f64, f64)>,
    line: LineHypothesis,
    hough: &HoughParams,
) -> Result<BoundaryExtraction> {
    let tol = 1.5 * hough.rho_step.max(1.0);
    let inliers: Vec<(f64, f64)> = candidates.iter().copied().filter(|&(u, v)| line.distance(u, v) <= tol).collect();
    let refined = fit_near_vertical(&inliers).map_or(line, |(a, b)| {
        let theta = (-b).atan();
        LineHypothesis { rho: a * theta.cos(), theta_deg: theta.to_degrees(), votes: inliers.len() as u32 }
    });
    let window = hough.half_bins() as f64 * hough.theta_step_deg;
    let delta_yaw_deg = refined.theta_deg.clamp(-window, window);
    Ok(BoundaryExtraction { method, candidates, line: refined, delta_yaw_deg })
}

fn fit_near_vertical(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let (mu, mv) = points.iter().fold((0.0, 0.0), |(su, sv), &(u, v)| (su + u, sv + v));
    let (mu, mv) = (mu / n, mv / n);
    let (mut svv, mut suv) = (0.0, 0.0);
    for &(u, v) in points {
        svv += (v - mv) * (v - mv);
        suv += (u - mu) * (v - mv);
    }
    if svv <= 0.0 {
        return None;
    }
    let b = suv / svv;
    Some((mu - b * mv, b))
}

#[derive(Clone, Debug)]
pub struct YawEstimate {
    /// Input pose with corrected yaw.
    pub pose: PalletPose,
    pub plane_height: PlaneHeight,
    pub plane: PlaneSpec,
    /// Gray horizontal projection the boundary was extracted from.
    pub image: RasterImage,
    pub boundary: BoundaryExtraction,
    /// Passes actually run.
    pub iterations: usize,
}

impl YawEstimate {
    pub fn correction_deg(&self, initial: &PalletPose) -> f64 {
        self.pose.yaw_deg - initial.yaw_deg
    }
}

/// Horizontal projection and boundary scan layout for one pose.
pub fn horizontal_setup(
    pose: &PalletPose,
    spec: &PalletSpec,
    which: PlaneHeight,
    cfg: &LocalizeConfig,
) -> Result<(PlaneSpec, BoundaryScan)> {
    let hc = &cfg.horizontal;
    let along = spec.width_mm + 2.0 * hc.along_margin_mm;
    let plane = make_horizontal_plane(pose, spec, which, along, hc.across_mm, hc.res, cfg.h_min)?;
    let rows = plane.rows();
    let center_row = plane.center_px().1;
    let row_of = |s_mm: f64| center_row + s_mm / hc.res;
    let span = |lo_mm: f64, hi_mm: f64| {
        let (mid, half) = ((lo_mm + hi_mm) / 2.0, (hi_mm - lo_mm) / 2.0 * hc.row_span_frac);
        let a = row_of(mid - half).ceil().max(0.0) as usize;
        let b = (row_of(mid + half).floor().max(0.0) as usize + 1).min(rows);
        a..b
    };
    let (row_ranges, flank_row, flank_rows) = match which {
        PlaneHeight::Bottom | PlaneHeight::Top => {
            let r = span(-spec.width_mm / 2.0, spec.width_mm / 2.0);
            (vec![r.clone()], center_row as usize, r.len())
        }
        PlaneHeight::HoleTop => {
            let ranges: Vec<_> = spec
                .hole_centers_mm()
                .iter()
                .map(|c| span(c - spec.hole_width_mm / 2.0, c + spec.hole_width_mm / 2.0))
                .collect();
            let flank_row = row_of(spec.hole_centers_mm()[1]).round() as usize;
            let len = ranges[1].len();
            (ranges, flank_row, len)
        }
    };
    let flank = FlankConfig { height_px: cfg.flank.height_px.min(flank_rows.max(1)), ..cfg.flank };
    let scan = BoundaryScan {
        flank,
        flank_row,
        rows: row_ranges,
        contrast_min: cfg.contrast_min,
        tau_edge: cfg.tau_edge,
        hough: cfg.hough,
    };
    Ok((plane, scan))
}

fn measure_yaw_error(
    eq: &EquirectImage,
    pose: &PalletPose,
    spec: &PalletSpec,
    which: PlaneHeight,
    cfg: &LocalizeConfig,
) -> Result<(PlaneSpec, RasterImage, BoundaryExtraction)> {
    let (plane, scan) = horizontal_setup(pose, spec, which, cfg)?;
    let img = project_plane(eq, &plane, cfg.eps_plane)?.to_gray(cfg.channel)?;
    let boundary = match cfg.boundary_method {
        BoundaryMethod::FlankThreshold => extract_boundary_flank(&img, &scan)?,
        BoundaryMethod::EdgeHough => extract_boundary_edge(&img, &scan)?,
    };
    Ok((plane, img, boundary))
}

/// Measures the yaw error on the horizontal projection and returns the pose
/// with corrected yaw. Position is left untouched.
pub fn estimate_yaw(eq: &EquirectImage, pose: &PalletPose, spec: &PalletSpec, cfg: &LocalizeConfig) -> Result<YawEstimate> {
    cfg.validate()?;
    spec.validate()?;
    pose.validate()?;
    let mut which = select_plane_height(pose, spec, cfg.h_min, cfg.prefer_hole_top, false)?;
    let mut current = *pose;
    let mut last = None;
    for pass in 0..cfg.yaw_iterations {
        let measured = match measure_yaw_error(eq, &current, spec, which, cfg) {
            Err(Error::LowContrast { .. }) if cfg.hole_fallback && which != PlaneHeight::HoleTop && pass == 0 => {
                match select_plane_height(&current, spec, cfg.h_min, false, true) {
                    Ok(PlaneHeight::HoleTop) => {
                        which = PlaneHeight::HoleTop;
                        measure_yaw_error(eq, &current, spec, which, cfg)
                    }
                    _ => measure_yaw_error(eq, &current, spec, which, cfg),
                }
            }
            other => other,
        };
        let (plane, image, boundary) = measured?;
        let delta = boundary.delta_yaw_deg;
        current = PalletPose::new(current.position, current.yaw_deg + YAW_SIGN * delta)?;
        last = Some(YawEstimate { pose: current, plane_height: which, plane, image, boundary, iterations: pass + 1 });
        if delta.abs() < cfg.residual_tol {
            break;
        }
    }
    Ok(last.expect("at least one yaw pass"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthProfile {
    /// Plane displacements away from the camera, strictly increasing.
    pub offsets_mm: Vec<f64>,
    pub scores: Vec<f64>,
    pub best_offset_mm: f64,
    pub best_score: f64,
}

impl DepthProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("offset_mm,score\n");
        for (o, v) in self.offsets_mm.iter().zip(&self.scores) {
            s.push_str(&format!("{o},{v}\n"));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct DepthSearch {
    pub pose: PalletPose,
    pub profile: DepthProfile,
    /// Projection plane at the winning depth, centered on the final position.
    pub plane: PlaneSpec,
    /// In-plane template offset at the winning depth.
    pub in_plane_px: (i64, i64),
}

struct DepthSample {
    score: f64,
    du: i64,
    dv: i64,
}

/// Face plane for a sweep offset: the approximate center slid along its
/// camera ray until the plane sits `offset_mm` farther than the original.
fn sweep_plane(pose: &PalletPose, spec: &PalletSpec, cfg: &DepthSweepConfig, offset_mm: f64) -> Result<PlaneSpec> {
    let depth0 = pose.camera_depth();
    let origin = pose.position * ((depth0 + offset_mm) / depth0);
    let margin = (cfg.search_px as f64 + 4.0) * cfg.res;
    make_shelf_plane(origin, pose.face_normal(), spec.width_mm + 2.0 * margin, spec.height_mm + 2.0 * margin, cfg.res)
}

fn score_depth(
    eq: &EquirectImage,
    pose: &PalletPose,
    spec: &PalletSpec,
    tmpl: &EdgeTemplate,
    cfg: &LocalizeConfig,
    offset_mm: f64,
) -> Result<DepthSample> {
    let plane = sweep_plane(pose, spec, &cfg.depth, offset_mm)?;
    let edges = plane_edges(eq, &plane, cfg.channel, cfg.eps_plane)?;
    let (cu, cv) = plane.center_px();
    let r = cfg.depth.search_px as i64;
    let mut best = DepthSample { score: f64::NEG_INFINITY, du: 0, dv: 0 };
    // visit offsets nearest the center first so ties keep the smaller shift
    let mut order: Vec<(i64, i64)> = (-r..=r).flat_map(|dv| (-r..=r).map(move |du| (du, dv))).collect();
    order.sort_by_key(|&(du, dv)| (du * du + dv * dv, dv, du));
    for (du, dv) in order {
        let s = match_score(&edges, tmpl, (cu + du as f64, cv + dv as f64), cfg.tau_edge).0;
        if s > best.score {
            best = DepthSample { score: s, du, dv };
        }
    }
    Ok(best)
}

fn offsets_between(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Depth sweep of the yaw-corrected face plane. Coarse sweep over the
/// configured range, fine sweep within one coarse step of the coarse peak.
pub fn search_depth(eq: &EquirectImage, pose: &PalletPose, spec: &PalletSpec, cfg: &LocalizeConfig) -> Result<DepthSearch> {
    cfg.validate()?;
    spec.validate()?;
    let dc = &cfg.depth;
    let depth0 = pose.camera_depth();
    if depth0 + dc.lo_mm <= cfg.eps_plane {
        return Err(Error::DegenerateGeometry(format!(
            "face plane at {depth0:.1} mm cannot be swept {:.1} mm toward the camera",
            -dc.lo_mm
        )));
    }
    let tmpl = build_edge_template(spec, dc.res)?;
    let evaluate = |offsets: &[f64]| -> Result<Vec<(f64, DepthSample)>> {
        offsets
            .par_iter()
            .map(|&o| score_depth(eq, pose, spec, &tmpl, cfg, o).map(|s| (o, s)))
            .collect()
    };
    let key = |o: f64| (o * 1000.0).round() as i64;
    let mut samples: BTreeMap<i64, (f64, DepthSample)> = BTreeMap::new();
    for (o, s) in evaluate(&offsets_between(dc.lo_mm, dc.hi_mm, dc.coarse_step_mm))? {
        samples.insert(key(o), (o, s));
    }
    let coarse_best = samples
        .values()
        .fold(None::<&(f64, DepthSample)>, |acc, cur| match acc {
            Some(b) if b.1.score >= cur.1.score => Some(b),
            _ => Some(cur),
        })
        .map(|(o, _)| *o)
        .expect("non-empty sweep");
    let fine_lo = (coarse_best - dc.coarse_step_mm).max(dc.lo_mm);
    let fine_hi = (coarse_best + dc.coarse_step_mm).min(dc.hi_mm);
    let fine: Vec<f64> = offsets_between(fine_lo, fine_hi, dc.fine_step_mm)
        .into_iter()
        .filter(|o| !samples.contains_key(&key(*o)))
        .collect();
    for (o, s) in evaluate(&fine)? {
        samples.insert(key(o), (o, s));
    }

    let best_score = samples.values().map(|(_, s)| s.score).fold(f64::NEG_INFINITY, f64::max);
    // a flat-topped peak resolves to the middle of its plateau
    let tied: Vec<&(f64, DepthSample)> = samples.values().filter(|(_, s)| s.score >= best_score - 1e-9).collect();
    let (best_offset, best) = tied[tied.len() / 2];
    let profile = DepthProfile {
        offsets_mm: samples.values().map(|(o, _)| *o).collect(),
        scores: samples.values().map(|(_, s)| s.score).collect(),
        best_offset_mm: *best_offset,
        best_score,
    };
    if best_score < cfg.theta_detect {
        return Err(Error::NoPalletAtDepth { best: best_score, threshold: cfg.theta_detect });
    }
    let plane = sweep_plane(pose, spec, dc, *best_offset)?;
    let position = plane.origin + (best.du as f64 * dc.res) * plane.ex + (best.dv as f64 * dc.res) * plane.ey;
    Ok(DepthSearch {
        pose: PalletPose::new(position, pose.yaw_deg)?,
        profile,
        plane: plane.recentered(position),
        in_plane_px: (best.du, best.dv),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Yaw,
    Position,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Yaw => "yaw",
            Stage::Position => "position",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct LocalizeError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub yaw_ms: f64,
    pub position_ms: f64,
}

#[derive(Clone, Debug)]
pub struct Localization {
    pub pose: PalletPose,
    pub yaw: YawEstimate,
    pub depth: DepthSearch,
    pub timings: StageTimings,
}

/// Yaw estimation followed by the depth sweep.
pub fn localize_pallet(
    eq: &EquirectImage,
    initial: &PalletPose,
    spec: &PalletSpec,
    cfg: &LocalizeConfig,
) -> std::result::Result<Localization, LocalizeError> {
    let t0 = Instant::now();
    let yaw = estimate_yaw(eq, initial, spec, cfg).map_err(|source| LocalizeError { stage: Stage::Yaw, source })?;
    let t1 = Instant::now();
    let depth = search_depth(eq, &yaw.pose, spec, cfg).map_err(|source| LocalizeError { stage: Stage::Position, source })?;
    let t2 = Instant::now();
    Ok(Localization {
        pose: depth.pose,
        timings: StageTimings {
            yaw_ms: (t1 - t0).as_secs_f64() * 1e3,
            position_ms: (t2 - t1).as_secs_f64() * 1e3,
        },
        yaw,
        depth,
    })
}

/// Initial pose on the camera ray through `truth`, with the face plane moved
/// `toward_camera_mm` closer, and yaw offset by `yaw_error_deg`. This is the
/// error a detection on a shelf plane in front of the pallet produces.
pub fn perturb_along_ray(truth: &PalletPose, toward_camera_mm: f64, yaw_error_deg: f64) -> Result<PalletPose> {
    let depth = truth.camera_depth();
    let position: Vec3 = truth.position * ((depth - toward_camera_mm) / depth);
    PalletPose::new(position, truth.yaw_deg + yaw_error_deg)
}
