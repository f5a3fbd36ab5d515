//! Full-scale pallet front-face model, its edge template, and template scoring.

use nalgebra::Rotation3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{Border, RasterImage};
use crate::projection::{Vec3, Z_UP};

/// Front-face geometry of a pallet, mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalletSpec {
    pub width_mm: f64,
    pub height_mm: f64,
    pub hole_width_mm: f64,
    pub hole_height_mm: f64,
    /// Center-to-center lateral distance between the two fork holes.
    pub hole_offset_mm: f64,
    /// Height of the hole bottoms above the pallet bottom.
    pub hole_bottom_mm: f64,
    pub corner_radius_mm: f64,
}

impl Default for PalletSpec {
    /// Sample JIS-style dimensions.
    fn default() -> Self {
        Self {
            width_mm: 1100.0,
            height_mm: 144.0,
            hole_width_mm: 240.0,
            hole_height_mm: 100.0,
            hole_offset_mm: 600.0,
            hole_bottom_mm: 22.0,
            corner_radius_mm: 40.0,
        }
    }
}

impl PalletSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.width_mm,
            self.height_mm,
            self.hole_width_mm,
            self.hole_height_mm,
            self.hole_offset_mm,
            self.hole_bottom_mm,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("pallet dimensions must be positive"));
        }
        if !(self.corner_radius_mm >= 0.0) {
            return Err(Error::invalid("corner radius must be non-negative"));
        }
        if self.corner_radius_mm >= self.width_mm.min(self.height_mm) / 2.0 {
            return Err(Error::invalid("corner radius must be below half the smaller face dimension"));
        }
        if self.hole_offset_mm < self.hole_width_mm {
            return Err(Error::invalid("fork holes overlap"));
        }
        if (self.hole_offset_mm + self.hole_width_mm) / 2.0 > self.width_mm / 2.0 {
            return Err(Error::invalid("fork holes extend past the face sides"));
        }
        if self.hole_bottom_mm + self.hole_height_mm > self.height_mm {
            return Err(Error::invalid("fork holes extend past the face top"));
        }
        Ok(())
    }

    /// Lateral centers of the two holes relative to the face center.
    pub fn hole_centers_mm(&self) -> [f64; 2] {
        [-self.hole_offset_mm / 2.0, self.hole_offset_mm / 2.0]
    }
}

/// Pose of the pallet's front-face center in the camera frame.
///
/// Yaw rotates the outward face normal about +z. At yaw 0 the face is
/// parallel to the aisle (the x axis) and the normal points across the aisle
/// toward the camera: `-y` for pallets on the left (`y >= 0`), `+y` for
/// pallets on the right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalletPose {
    pub position: Vec3,
    pub yaw_deg: f64,
}

impl PalletPose {
    pub fn new(position: Vec3, yaw_deg: f64) -> Result<Self> {
        let p = Self { position, yaw_deg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("pose position must be finite"));
        }
        if !(self.yaw_deg > -90.0 && self.yaw_deg < 90.0) {
            return Err(Error::invalid(format!("yaw {} outside (-90, 90)", self.yaw_deg)));
        }
        Ok(())
    }

    pub fn reference_normal(&self) -> Vec3 {
        if self.position.y >= 0.0 {
            Vec3::new(0.0, -1.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        }
    }

    pub fn face_normal(&self) -> Vec3 {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.yaw_deg.to_radians()) * self.reference_normal()
    }

    /// In-plane horizontal axis of the face, the viewer's right.
    pub fn lateral_axis(&self) -> Vec3 {
        Z_UP.cross(&self.face_normal())
    }

    /// Yaw that turns this position's reference normal into `normal`.
    pub fn yaw_for_normal(position: &Vec3, normal: &Vec3) -> f64 {
        let reference = PalletPose { position: *position, yaw_deg: 0.0 }.reference_normal();
        let cross = reference.cross(normal).z;
        cross.atan2(reference.dot(normal)).to_degrees()
    }

    /// Signed distance of the camera from the face plane, positive on the normal side.
    pub fn camera_depth(&self) -> f64 {
        -self.position.dot(&self.face_normal())
    }
}

/// Template match score in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchScore(pub f64);

impl MatchScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Expected contour pixels of the pallet face, as `(u, v)` offsets from the
/// face center at `res` mm/px (u right, v down).
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTemplate {
    pub res: f64,
    pub points: Vec<(f64, f64)>,
    /// Half extents of the face bounding box in pixels.
    pub half_size_px: (f64, f64),
}

impl EdgeTemplate {
    pub fn count(&self) -> usize {
        self.points.len()
    }

    /// Integer bounding-box half extents, rounded up.
    pub fn half_extent_px(&self) -> (usize, usize) {
        (self.half_size_px.0.ceil() as usize, self.half_size_px.1.ceil() as usize)
    }

    /// Debug overlay: the template drawn in white on black, centered.
    pub fn render_overlay(&self, margin_px: usize) -> RasterImage {
        let (hw, hh) = self.half_extent_px();
        let (w, h) = (2 * (hw + margin_px) + 1, 2 * (hh + margin_px) + 1);
        let mut img = RasterImage::from_raw(w, h, 1, vec![0.0; w * h]);
        for &(u, v) in &self.points {
            let x = (u + (hw + margin_px) as f64).round() as usize;
            let y = (v + (hh + margin_px) as f64).round() as usize;
            if x < w && y < h {
                img.set(x, y, 0, 1.0);
            }
        }
        img
    }
}

pub fn build_edge_template(spec: &PalletSpec, res: f64) -> Result<EdgeTemplate> {
    build_edge_template_with_spacing(spec, res, 1.0)
}

/// Like [`build_edge_template`] with contour samples every `spacing_px` pixels.
pub fn build_edge_template_with_spacing(spec: &PalletSpec, res: f64, spacing_px: f64) -> Result<EdgeTemplate> {
    spec.validate()?;
    if !(res > 0.0) || res > spec.width_mm.min(spec.height_mm) / 10.0 {
        return Err(Error::invalid(format!("template resolution {res} mm/px is out of range")));
    }
    if !(spacing_px > 0.0) {
        return Err(Error::invalid("template spacing must be positive"));
    }
    let (a, b) = (spec.width_mm / 2.0 / res, spec.height_mm / 2.0 / res);
    let mut points = Vec::new();
    sample_rect(-a, a, -b, b, spacing_px, &mut points);

    let hole_v_low = (spec.height_mm / 2.0 - spec.hole_bottom_mm) / res;
    let hole_v_high = (spec.height_mm / 2.0 - spec.hole_bottom_mm - spec.hole_height_mm) / res;
    for c in spec.hole_centers_mm() {
        let (u0, u1) = ((c - spec.hole_width_mm / 2.0) / res, (c + spec.hole_width_mm / 2.0) / res);
        sample_rect(u0, u1, hole_v_high, hole_v_low, spacing_px, &mut points);
    }

    if spec.corner_radius_mm > 0.0 {
        let r = spec.corner_radius_mm / res + 1e-9;
        let corners = [(-a, -b), (a, -b), (a, b), (-a, b)];
        points.retain(|&(u, v)| corners.iter().all(|&(cu, cv)| (u - cu).hypot(v - cv) > r));
    }
    if points.is_empty() {
        return Err(Error::invalid("edge template is empty"));
    }
    Ok(EdgeTemplate { res, points, half_size_px: (a, b) })
}

/// Samples the outline of `[u0, u1] x [v0, v1]` clockwise from the top-left
/// corner; every corner appears exactly once.
fn sample_rect(u0: f64, u1: f64, v0: f64, v1: f64, spacing: f64, out: &mut Vec<(f64, f64)>) {
    let corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)];
    for i in 0..4 {
        let (s, e) = (corners[i], corners[(i + 1) % 4]);
        let len = (e.0 - s.0).hypot(e.1 - s.1);
        let n = (len / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            let t = k as f64 / n as f64;
            out.push((s.0 + (e.0 - s.0) * t, s.1 + (e.1 - s.1) * t));
        }
    }
}

/// Mean saturated edge support of the template placed with its center at
/// `offset`: each point contributes `min(1, edge / tau_edge)`, points outside
/// the image contribute 0.
pub fn match_score(edges: &RasterImage, tmpl: &EdgeTemplate, offset: (f64, f64), tau_edge: f64) -> MatchScore {
    let (w, h) = ((edges.width() - 1) as f64, (edges.height() - 1) as f64);
    let inv_tau = 1.0 / tau_edge;
    let mut sum = 0.0f64;
    for &(du, dv) in &tmpl.points {
        let (x, y) = (offset.0 + du, offset.1 + dv);
        if x < 0.0 || y < 0.0 || x > w || y > h {
            continue;
        }
        let e = edges.sample_gray(x, y, Border::Clamp) as f64;
        sum += (e * inv_tau).min(1.0);
    }
    MatchScore(sum / tmpl.count() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchParams {
    pub stride: usize,
    pub tau_edge: f64,
    pub theta_detect: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { stride: 4, tau_edge: 0.2, theta_detect: 0.6 }
    }
}

/// One template-search maximum: face center in image pixels plus its score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemplateHit {
    pub offset: (usize, usize),
    pub score: MatchScore,
}

/// Separable max filter with a `(2r+1) x (2r+1)` window.
fn dilate(img: &RasterImage, r: usize) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let src = img.data();
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (lo, hi) = (x.saturating_sub(r), (x + r).min(w - 1));
            tmp[y * w + x] = src[y * w + lo..=y * w + hi].iter().cloned().fold(0.0, f32::max);
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let (lo, hi) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| tmp[yy * w + x]).fold(0.0, f32::max);
        }
    }
    RasterImage::from_raw(w, h, 1, out)
}

/// Dense template search. A coarse scan at `stride` runs on an edge image
/// dilated by `stride / 2` so no true position falls between grid points;
/// each coarse maximum is then refined at stride 1 on the original edges.
/// Returns maxima scoring at least `theta_detect` whose face bounding boxes
/// are pairwise disjoint, best first.
pub fn template_search(edges: &RasterImage, tmpl: &EdgeTemplate, params: &SearchParams) -> Result<Vec<TemplateHit>> {
    if params.stride == 0 {
        return Err(Error::invalid("search stride must be at least 1"));
    }
    let (hw, hh) = tmpl.half_extent_px();
    let (w, h) = (edges.width(), edges.height());
    if w < 2 * hw + 1 || h < 2 * hh + 1 {
        return Err(Error::invalid(format!(
            "image {w}x{h} is smaller than the {}x{} template",
            2 * hw + 1,
            2 * hh + 1
        )));
    }
    let stride = params.stride;
    let (u_lo, u_hi, v_lo, v_hi) = (hw, w - 1 - hw, hh, h - 1 - hh);
    let us: Vec<usize> = (u_lo..=u_hi).step_by(stride).collect();
    let vs: Vec<usize> = (v_lo..=v_hi).step_by(stride).collect();

    let coarse_edges = if stride > 1 { dilate(edges, stride / 2) } else { edges.clone() };
    let coarse: Vec<f64> = vs
        .par_iter()
        .flat_map_iter(|&v| {
            let ce = &coarse_edges;
            us.iter().map(move |&u| match_score(ce, tmpl, (u as f64, v as f64), params.tau_edge).0)
        })
        .collect();
    let (nu, nv) = (us.len(), vs.len());
    let at = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nu as isize || j >= nv as isize {
            f64::NEG_INFINITY
        } else {
            coarse[j as usize * nu + i as usize]
        }
    };
    let mut seeds = Vec::new();
    for j in 0..nv {
        for i in 0..nu {
            let s = coarse[j * nu + i];
            if s < params.theta_detect {
                continue;
            }
            let peak = (-1isize..=1).all(|dj| {
                (-1isize..=1).all(|di| (di == 0 && dj == 0) || at(i as isize + di, j as isize + dj) <= s)
            });
            if peak {
                seeds.push((us[i], vs[j]));
            }
        }
    }

    let mut hits: Vec<TemplateHit> = seeds
        .par_iter()
        .map(|&(u0, v0)| {
            let mut best = TemplateHit { offset: (u0, v0), score: MatchScore(f64::NEG_INFINITY) };
            let r = stride as isize;
            for dv in -r..=r {
                for du in -r..=r {
                    let (u, v) = (u0 as isize + du, v0 as isize + dv);
                    if u < u_lo as isize || v < v_lo as isize || u > u_hi as isize || v > v_hi as isize {
                        continue;
                    }
                    let s = match_score(edges, tmpl, (u as f64, v as f64), params.tau_edge);
                    if s.0 > best.score.0 {
                        best = TemplateHit { offset: (u as usize, v as usize), score: s };
                    }
                }
            }
            best
        })
        .filter(|hit| hit.score.0 >= params.theta_detect)
        .collect();

    hits.sort_by(|a, b| {
        b.score
            .0
            .total_cmp(&a.score.0)
            .then(a.offset.1.cmp(&b.offset.1))
            .then(a.offset.0.cmp(&b.offset.0))
    });
    let mut kept: Vec<TemplateHit> = Vec::new();
    for hit in hits {
        let disjoint = kept.iter().all(|k| {
            k.offset.0.abs_diff(hit.offset.0) > 2 * hw || k.offset.1.abs_diff(hit.offset.1) > 2 * hh
        });
        if disjoint {
            kept.push(hit);
        }
    }
    Ok(kept)
}
