//! Synthetic equirectangular renderer used as the ground-truth oracle.
//!
//! Scenes are flat-shaded: a floor plane, axis-aligned boxes (shelf beams,
//! uprights, walls), yawed pallet boxes whose front face carries two dark fork
//! holes, and optional painted stripes. The camera is always the frame origin;
//! moving the forklift means translating the scene.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::RasterImage;
use crate::pallet::{PalletPose, PalletSpec};
use crate::projection::{pixel_to_dir, EquirectImage, Vec3};

pub type Rgb = [f32; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Floor {
    pub z_mm: f64,
    pub color: Rgb,
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBox {
    pub min: Vec3,
    pub max: Vec3,
    pub color: Rgb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PalletInstance {
    pub spec: PalletSpec,
    pub pose: PalletPose,
    #[serde(default = "default_pallet_depth")]
    pub depth_mm: f64,
    pub face_color: Rgb,
    pub hole_color: Rgb,
    /// Deck, sides and back; defaults to the face color.
    #[serde(default)]
    pub deck_color: Option<Rgb>,
}

fn default_pallet_depth() -> f64 {
    1000.0
}

/// A painted strip of constant width centered on a segment, lying in the
/// plane through the segment with the given normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stripe {
    pub start: Vec3,
    pub end: Vec3,
    pub width_mm: f64,
    pub normal: Vec3,
    pub color: Rgb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneModel {
    pub background: Rgb,
    #[serde(default)]
    pub floor: Option<Floor>,
    #[serde(default)]
    pub boxes: Vec<SceneBox>,
    #[serde(default)]
    pub pallets: Vec<PalletInstance>,
    #[serde(default)]
    pub stripes: Vec<Stripe>,
    /// Amplitude of additive uniform noise; 0 disables it.
    #[serde(default)]
    pub noise_amplitude: f32,
    #[serde(default)]
    pub noise_seed: u64,
}

impl SceneModel {
    pub fn empty(background: Rgb) -> Self {
        Self {
            background,
            floor: None,
            boxes: Vec::new(),
            pallets: Vec::new(),
            stripes: Vec::new(),
            noise_amplitude: 0.0,
            noise_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let color_ok = |c: &Rgb| c.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v));
        let mut colors = vec![&self.background];
        colors.extend(self.floor.iter().map(|f| &f.color));
        colors.extend(self.boxes.iter().map(|b| &b.color));
        colors.extend(self.pallets.iter().flat_map(|p| [&p.face_color, &p.hole_color]));
        colors.extend(self.stripes.iter().map(|s| &s.color));
        if !colors.into_iter().all(color_ok) {
            return Err(Error::invalid("scene colors must lie in [0, 1]"));
        }
        for b in &self.boxes {
            if !(0..3).all(|i| b.min[i] < b.max[i]) {
                return Err(Error::invalid("scene box has non-positive extent"));
            }
        }
        for p in &self.pallets {
            p.spec.validate()?;
            p.pose.validate()?;
            if !(p.depth_mm > 0.0) {
                return Err(Error::invalid("pallet depth must be positive"));
            }
        }
        for s in &self.stripes {
            let dir = s.end - s.start;
            if !(dir.norm() > 0.0) || !(s.width_mm > 0.0) || s.normal.norm() == 0.0 || dir.cross(&s.normal).norm() == 0.0 {
                return Err(Error::invalid("degenerate stripe"));
            }
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(Error::invalid("noise amplitude must be non-negative"));
        }
        Ok(())
    }

    /// The scene as seen from a camera moved `dx` mm along +x.
    pub fn shifted(&self, dx: f64) -> Self {
        let shift = Vec3::new(dx, 0.0, 0.0);
        let mut s = self.clone();
        for b in &mut s.boxes {
            b.min -= shift;
            b.max -= shift;
        }
        for p in &mut s.pallets {
            p.pose.position -= shift;
        }
        for st in &mut s.stripes {
            st.start -= shift;
            st.end -= shift;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightClass {
    Below,
    Above,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruth {
    pub pose: PalletPose,
    pub height_class: HeightClass,
}

pub fn ground_truth(scene: &SceneModel, index: usize) -> Result<GroundTruth> {
    let p = scene
        .pallets
        .get(index)
        .ok_or(Error::IndexOutOfRange { index, len: scene.pallets.len() })?;
    let height_class = if p.pose.position.z < 0.0 { HeightClass::Below } else { HeightClass::Above };
    Ok(GroundTruth { pose: p.pose, height_class })
}

/// One scene per camera offset along the aisle.
pub fn trajectory_scenes(base: &SceneModel, offsets_mm: &[f64]) -> Vec<SceneModel> {
    offsets_mm.iter().map(|&dx| base.shifted(dx)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderOptions {
    /// Rays per pixel along each axis; 1 samples only the pixel center.
    pub supersample: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { supersample: 2 }
    }
}

pub fn render_equirect(scene: &SceneModel, width: usize, height: usize) -> Result<EquirectImage> {
    render_equirect_with(scene, width, height, &RenderOptions::default())
}

pub fn render_equirect_with(scene: &SceneModel, width: usize, height: usize, opts: &RenderOptions) -> Result<EquirectImage> {
    if width != 2 * height || height < 256 {
        return Err(Error::invalid(format!("render size {width}x{height}: need width = 2 * height and height >= 256")));
    }
    if opts.supersample == 0 {
        return Err(Error::invalid("supersample must be at least 1"));
    }
    scene.validate()?;
    let tracer = Tracer::new(scene);
    let ss = opts.supersample;
    let inv = 1.0 / (ss * ss) as f32;
    let mut data = vec![0.0f32; width * height * 3];
    data.par_chunks_mut(width * 3).enumerate().for_each(|(v, row)| {
        let mut rng = (scene.noise_amplitude > 0.0)
            .then(|| ChaCha8Rng::seed_from_u64(scene.noise_seed ^ (v as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        for u in 0..width {
            let mut acc = [0.0f32; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    // sub-sample offsets symmetric about the pixel center
                    let ou = (sx as f64 + 0.5) / ss as f64 - 0.5;
                    let ov = (sy as f64 + 0.5) / ss as f64 - 0.5;
                    let c = tracer.trace(&pixel_to_dir(u as f64 + ou, v as f64 + ov, width, height));
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            for k in 0..3 {
                let mut val = acc[k] * inv;
                if let Some(rng) = rng.as_mut() {
                    val += rng.random_range(-scene.noise_amplitude..=scene.noise_amplitude);
                }
                row[u * 3 + k] = val.clamp(0.0, 1.0);
            }
        }
    });
    EquirectImage::new(RasterImage::from_raw(width, height, 3, data))
}

/// Precomputed pallet frames for ray casting.
struct PalletFrame<'a> {
    inst: &'a PalletInstance,
    lateral: Vec3,
    normal: Vec3,
}

struct Tracer<'a> {
    scene: &'a SceneModel,
    pallets: Vec<PalletFrame<'a>>,
}

const T_MIN: f64 = 1e-6;

impl<'a> Tracer<'a> {
    fn new(scene: &'a SceneModel) -> Self {
        let pallets = scene
            .pallets
            .iter()
            .map(|inst| PalletFrame { inst, lateral: inst.pose.lateral_axis(), normal: inst.pose.face_normal() })
            .collect();
        Self { scene, pallets }
    }

    fn trace(&self, d: &Vec3) -> Rgb {
        let mut best_t = f64::INFINITY;
        let mut color = self.scene.background;
        if let Some(f) = &self.scene.floor {
            if d.z != 0.0 {
                let t = f.z_mm / d.z;
                if t > T_MIN && t < best_t {
                    best_t = t;
                    color = f.color;
                }
            }
        }
        for b in &self.scene.boxes {
            if let Some((t, _, _)) = slab(&Vec3::zeros(), d, &b.min, &b.max) {
                if t < best_t {
                    best_t = t;
                    color = b.color;
                }
            }
        }
        for pf in &self.pallets {
            if let Some((t, c)) = pf.hit(d) {
                if t < best_t {
                    best_t = t;
                    color = c;
                }
            }
        }
        for s in &self.scene.stripes {
            if let Some(t) = stripe_hit(s, d) {
                // paint sits on its surface: win ties against it
                if t - 1e-3 < best_t {
                    best_t = t - 1e-3;
                    color = s.color;
                }
            }
        }
        color
    }
}

impl PalletFrame<'_> {
    fn hit(&self, d: &Vec3) -> Option<(f64, Rgb)> {
        let spec = &self.inst.spec;
        let p = self.inst.pose.position;
        let o = Vec3::new(-p.dot(&self.lateral), -p.dot(&self.normal), -p.z);
        let dl = Vec3::new(d.dot(&self.lateral), d.dot(&self.normal), d.z);
        let half_w = spec.width_mm / 2.0;
        let half_h = spec.height_mm / 2.0;
        let lo = Vec3::new(-half_w, -self.inst.depth_mm, -half_h);
        let hi = Vec3::new(half_w, 0.0, half_h);
        let (t, axis, from_max) = slab(&o, &dl, &lo, &hi)?;
        if axis == 1 && from_max {
            let hit = o + dl * t;
            let z_from_bottom = hit.z + half_h;
            let in_hole = spec.hole_centers_mm().iter().any(|c| {
                (hit.x - c).abs() <= spec.hole_width_mm / 2.0
                    && z_from_bottom >= spec.hole_bottom_mm
                    && z_from_bottom <= spec.hole_bottom_mm + spec.hole_height_mm
            });
            if in_hole {
                return Some((t, self.inst.hole_color));
            }
            return Some((t, self.inst.face_color));
        }
        Some((t, self.inst.deck_color.unwrap_or(self.inst.face_color)))
    }
}


/// Ray/box entry: `(t, axis, entered through the max face)`. Rays starting
/// inside the box report no hit.
fn slab(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<(f64, usize, bool)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0;
    let mut from_max = false;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i] < lo[i] || o[i] > hi[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (mut t0, mut t1) = ((lo[i] - o[i]) * inv, (hi[i] - o[i]) * inv);
        let mut enters_max = false;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            enters_max = true;
        }
        if t0 > t_near {
            t_near = t0;
            axis = i;
            from_max = enters_max;
        }
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > T_MIN).then_some((t_near, axis, from_max))
}

fn stripe_hit(s: &Stripe, d: &Vec3) -> Option<f64> {
    let n = s.normal.normalize();
    let denom = d.dot(&n);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = s.start.dot(&n) / denom;
    if t <= T_MIN {
        return None;
    }
    let p = d * t - s.start;
    let axis = s.end - s.start;
    let len = axis.norm();
    let along = p.dot(&axis) / len;
    let across = p.dot(&n.cross(&axis).normalize());
    (along >= 0.0 && along <= len && across.abs() <= s.width_mm / 2.0).then_some(t)
}

/// Palette used by the stock scenes.
pub mod palette {
    use super::Rgb;
    pub const BACKGROUND: Rgb = [0.75, 0.75, 0.72];
    pub const FLOOR: Rgb = [0.45, 0.45, 0.45];
    pub const BEAM: Rgb = [0.5, 0.12, 0.03];
    pub const UPRIGHT: Rgb = [0.15, 0.25, 0.5];
    pub const BACK_WALL: Rgb = [0.3, 0.3, 0.3];
    pub const PALLET_WOOD: Rgb = [0.75, 0.6, 0.38];
    pub const PALLET_DECK: Rgb = [0.45, 0.36, 0.22];
    pub const HOLE: Rgb = [0.05, 0.05, 0.08];
    /// Gray whose luminance is close to `LAB_PALLET`'s.
    pub const LAB_FLOOR: Rgb = [0.28, 0.28, 0.28];
    pub const LAB_PALLET: Rgb = [0.1, 0.25, 0.85];
    pub const LAB_DECK: Rgb = [0.05, 0.12, 0.45];
}

/// Racking along one side of the aisle.
#[derive(Clone, Debug, PartialEq)]
pub struct ShelfLayout {
    /// y of the shelf front plane; the racking extends away from the aisle.
    pub front_y: f64,
    pub depth_mm: f64,
    /// z of the top of each beam level.
    pub beam_tops: Vec<f64>,
    pub beam_height_mm: f64,
    /// Beam front faces sit this far behind the shelf front.
    pub beam_setback_mm: f64,
    pub x_range: (f64, f64),
    pub upright_xs: Vec<f64>,
    pub floor_z: f64,
}

impl ShelfLayout {
    pub fn boxes(&self) -> Vec<SceneBox> {
        let away = if self.front_y < 0.0 { -1.0 } else { 1.0 };
        let y_span = |from: f64, to: f64| {
            let (a, b) = (self.front_y + away * from, self.front_y + away * to);
            (a.min(b), a.max(b))
        };
        let top = self.beam_tops.iter().cloned().fold(self.floor_z + 2000.0, f64::max) + 400.0;
        let mut boxes = Vec::new();
        for &z in &self.beam_tops {
            let (y0, y1) = y_span(self.beam_setback_mm, self.beam_setback_mm + 80.0);
            boxes.push(SceneBox {
                min: Vec3::new(self.x_range.0, y0, z - self.beam_height_mm),
                max: Vec3::new(self.x_range.1, y1, z),
                color: palette::BEAM,
            });
        }
        for &x in &self.upright_xs {
            let (y0, y1) = y_span(0.0, self.depth_mm);
            boxes.push(SceneBox {
                min: Vec3::new(x - 40.0, y0, self.floor_z),
                max: Vec3::new(x + 40.0, y1, top),
                color: palette::UPRIGHT,
            });
        }
        let (y0, y1) = y_span(self.depth_mm, self.depth_mm + 50.0);
        boxes.push(SceneBox {
            min: Vec3::new(self.x_range.0, y0, self.floor_z),
            max: Vec3::new(self.x_range.1, y1, top),
            color: palette::BACK_WALL,
        });
        boxes
    }
}

/// How far a stocked pallet's front sticks out past its beam.
pub const BEAM_OVERHANG_MM: f64 = 75.0;

/// Warehouse racking with one beam level under each pallet, pallet fronts
/// `recess_mm` behind the shelf front and `BEAM_OVERHANG_MM` proud of the
/// beams, and uprights midway between bays.
pub fn warehouse_scene(poses: &[PalletPose], spec: &PalletSpec, recess_mm: f64) -> SceneModel {
    let mut scene = SceneModel::empty(palette::BACKGROUND);
    scene.floor = Some(Floor { z_mm: -1500.0, color: palette::FLOOR });
    let front_y = poses.first().map_or(-1500.0, |p| {
        let away = if p.position.y < 0.0 { -1.0 } else { 1.0 };
        p.position.y - away * recess_mm
    });
    let mut beam_tops: Vec<f64> = poses.iter().map(|p| p.position.z - spec.height_mm / 2.0).collect();
    beam_tops.sort_by(f64::total_cmp);
    beam_tops.dedup_by(|a, b| (*a - *b).abs() < 1.0);
    let mut upright_xs = Vec::new();
    for p in poses {
        upright_xs.push(p.position.x - spec.width_mm / 2.0 - 250.0);
        upright_xs.push(p.position.x + spec.width_mm / 2.0 + 250.0);
    }
    let layout = ShelfLayout {
        front_y,
        depth_mm: 1300.0,
        beam_tops,
        beam_height_mm: 100.0,
        beam_setback_mm: recess_mm + BEAM_OVERHANG_MM,
        x_range: (-12000.0, 12000.0),
        upright_xs,
        floor_z: -1500.0,
    };
    scene.boxes = layout.boxes();
    scene.pallets = poses
        .iter()
        .map(|&pose| PalletInstance {
            spec: spec.clone(),
            pose,
            depth_mm: 1000.0,
            face_color: palette::PALLET_WOOD,
            hole_color: palette::HOLE,
            deck_color: Some(palette::PALLET_DECK),
        })
        .collect();
    scene
}

/// A blue pallet standing on a gray floor in front of a far wall; blue and
/// gray have nearly equal luminance.
pub fn lab_scene(pose: PalletPose, spec: &PalletSpec) -> SceneModel {
    let mut scene = SceneModel::empty(palette::BACKGROUND);
    scene.floor = Some(Floor { z_mm: pose.position.z - spec.height_mm / 2.0, color: palette::LAB_FLOOR });
    scene.pallets.push(PalletInstance {
        spec: spec.clone(),
        pose,
        depth_mm: 1000.0,
        face_color: palette::LAB_PALLET,
        hole_color: palette::HOLE,
        deck_color: Some(palette::LAB_DECK),
    });
    scene
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::Channel;

    #[test]
    fn empty_scene_is_uniform() {
        let eq = render_equirect(&SceneModel::empty([0.2, 0.4, 0.6]), 512, 256).unwrap();
        assert!(eq.image().data().chunks(3).all(|p| p == [0.2f32, 0.4, 0.6]));
    }

    #[test]
    fn render_size_preconditions() {
        let s = SceneModel::empty([0.0; 3]);
        assert!(render_equirect(&s, 600, 256).is_err());
        assert!(render_equirect(&s, 256, 128).is_err());
    }

    #[test]
    fn forward_box_silhouette_matches_angular_extent() {
        let (half, dist) = (300.0, 2000.0);
        let mut s = SceneModel::empty([0.0; 3]);
        s.boxes.push(SceneBox {
            min: Vec3::new(dist, -half, -half),
            max: Vec3::new(dist + 100.0, half, half),
            color: [1.0; 3],
        });
        let (w, h) = (1024, 512);
        let eq = render_equirect_with(&s, w, h, &RenderOptions { supersample: 1 }).unwrap();
        let row = h / 2;
        let lit: Vec<usize> = (0..w).filter(|&u| eq.image().get(u, row, 0) > 0.5).collect();
        let (lo, hi) = (*lit.first().unwrap() as f64, *lit.last().unwrap() as f64);
        assert!(((lo + hi) / 2.0 - w as f64 / 2.0).abs() <= 1.0);
        let half_px = (half / dist).atan() / (2.0 * std::f64::consts::PI) * w as f64;
        assert!((hi - w as f64 / 2.0 - half_px).abs() <= 1.0);
        assert!((w as f64 / 2.0 - lo - half_px).abs() <= 1.0);
    }

    #[test]
    fn mirrored_scene_renders_mirrored() {
        let mut s = SceneModel::empty([0.1; 3]);
        s.boxes.push(SceneBox { min: Vec3::new(1500.0, 200.0, -300.0), max: Vec3::new(1800.0, 700.0, 100.0), color: [0.9, 0.2, 0.2] });
        let mut m = s.clone();
        for b in &mut m.boxes {
            let (y0, y1) = (-b.max.y, -b.min.y);
            b.min.y = y0;
            b.max.y = y1;
        }
        let (w, h) = (512, 256);
        let opts = RenderOptions { supersample: 1 };
        let a = render_equirect_with(&s, w, h, &opts).unwrap();
        let b = render_equirect_with(&m, w, h, &opts).unwrap();
        // lon -> -lon maps column u to w - u (mod w)
        let mut mismatches = 0;
        for v in 0..h {
            for u in 1..w {
                if a.image().pixel(u, v) != b.image().pixel(w - u, v) {
                    mismatches += 1;
                }
            }
        }
        assert!(mismatches <= h, "{mismatches} mismatching pixels");
    }

    #[test]
    fn downsampled_double_resolution_matches() {
        let spec = PalletSpec::default();
        let scene = warehouse_scene(&[PalletPose::new(Vec3::new(2000.0, -1500.0, -700.0), 0.0).unwrap()], &spec, 0.0);
        let one = render_equirect(&scene, 1024, 512).unwrap();
        let two = render_equirect(&scene, 2048, 1024).unwrap();
        // pixel centers sit on integer coordinates, so a 1x pixel covers 2x
        // columns 2u-1..=2u+1 with weights 1/4, 1/2, 1/4 (same for rows)
        let wts = [0.25f32, 0.5, 0.25];
        let mut close = 0usize;
        for v in 0..512 {
            for u in 0..1024 {
                let mut down = [0.0f32; 3];
                for (j, wy) in wts.iter().enumerate() {
                    let y = (2 * v + j).saturating_sub(1).min(1023);
                    for (i, wx) in wts.iter().enumerate() {
                        let x = (2 * u + 2048 + i - 1) % 2048;
                        for (c, d) in down.iter_mut().enumerate() {
                            *d += wx * wy * two.image().get(x, y, c);
                        }
                    }
                }
                let a = one.image().pixel(u, v);
                if a.iter().zip(down).all(|(x, y)| (x - y).abs() <= 1.0 / 255.0) {
                    close += 1;
                }
            }
        }
        let frac = close as f64 / (1024.0 * 512.0);
        assert!(frac >= 0.99, "only {frac:.4} of pixels agree");
    }

    #[test]
    fn pallet_holes_and_face_colors() {
        let spec = PalletSpec::default();
        let pose = PalletPose::new(Vec3::new(1500.0, 0.0, 0.0), 0.0).unwrap();
        // y = 0 uses the left-side reference normal (-y); turn it to face the camera (-x)
        let pose = PalletPose { yaw_deg: -90.0 + 1e-9, ..pose };
        let mut s = SceneModel::empty([0.0; 3]);
        s.pallets.push(PalletInstance { spec: spec.clone(), pose, depth_mm: 800.0, face_color: [1.0, 0.0, 0.0], hole_color: [0.0, 1.0, 0.0], deck_color: None });
        let t = Tracer::new(&s);
        // face center: solid board between the holes
        assert_eq!(t.trace(&Vec3::new(1.0, 0.0, 0.0)), [1.0, 0.0, 0.0]);
        // through the middle of one hole
        let hole_z = -spec.height_mm / 2.0 + spec.hole_bottom_mm + spec.hole_height_mm / 2.0;
        let d = Vec3::new(1500.0, 300.0, hole_z).normalize();
        assert_eq!(t.trace(&d), [0.0, 1.0, 0.0]);

        // the deck of a lowered pallet takes the deck color
        s.pallets[0].pose.position.z = -500.0;
        s.pallets[0].deck_color = Some([0.0, 0.0, 1.0]);
        let t = Tracer::new(&s);
        let deck = Vec3::new(1900.0, 0.0, -500.0 + spec.height_mm / 2.0);
        assert_eq!(t.trace(&deck.normalize()), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn noise_is_deterministic_and_bounded() {
        let mut s = SceneModel::empty([0.5; 3]);
        s.noise_amplitude = 0.05;
        s.noise_seed = 7;
        let a = render_equirect(&s, 512, 256).unwrap();
        let b = render_equirect(&s, 512, 256).unwrap();
        assert_eq!(a.image().data(), b.image().data());
        assert!(a.image().data().iter().all(|v| (v - 0.5).abs() <= 0.05 + 1e-6));
        assert!(a.image().data().iter().any(|v| (v - 0.5).abs() > 1e-3));
    }

    #[test]
    fn ground_truth_and_trajectory() {
        let spec = PalletSpec::default();
        let pose = PalletPose::new(Vec3::new(2027.0, -1521.0, -760.0), 3.0).unwrap();
        let scene = warehouse_scene(&[pose], &spec, 0.0);
        let gt = ground_truth(&scene, 0).unwrap();
        assert_eq!(gt.pose.position, Vec3::new(2027.0, -1521.0, -760.0));
        assert_eq!(gt.pose.yaw_deg, 3.0);
        assert_eq!(gt.height_class, HeightClass::Below);
        assert!(ground_truth(&scene, 1).is_err());

        let scenes = trajectory_scenes(&scene, &[0.0]);
        assert_eq!(scenes, vec![scene.clone()]);
        let scenes = trajectory_scenes(&scene, &[0.0, 100.0, 200.0]);
        for (i, s) in scenes.iter().enumerate() {
            assert_eq!(s.pallets[0].pose.position.x, 2027.0 - 100.0 * i as f64);
        }
    }

    #[test]
    fn every_pixel_is_classified() {
        // no NaN or out-of-range sample even looking straight up or down
        let scene = warehouse_scene(&[PalletPose::new(Vec3::new(2000.0, -1500.0, -700.0), 0.0).unwrap()], &PalletSpec::default(), 0.0);
        let eq = render_equirect(&scene, 512, 256).unwrap();
        assert!(eq.image().data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    }

    #[test]
    fn blue_channel_separates_lab_pallet() {
        let spec = PalletSpec::default();
        let pose = PalletPose::new(Vec3::new(2000.0, -1500.0, -760.0), 0.0).unwrap();
        let eq = render_equirect(&lab_scene(pose, &spec), 2048, 1024).unwrap();
        // pixel on the face (between the holes, above the bottom board) and on the floor in front of it
        let face_dir = Vec3::new(2000.0, -1500.0, -760.0 + 40.0);
        let floor_dir = Vec3::new(2000.0, -1200.0, -760.0 - spec.height_mm / 2.0);
        let sample = |c: Channel, d: &Vec3| {
            let (u, v) = eq.dir_to_pixel(d).unwrap();
            eq.image().extract_channel(c).unwrap().get(u.round() as usize, v.round() as usize, 0)
        };
        let lum = (sample(Channel::Luminance, &face_dir) - sample(Channel::Luminance, &floor_dir)).abs();
        let blue = (sample(Channel::B, &face_dir) - sample(Channel::B, &floor_dir)).abs();
        assert!(blue >= 2.0 * lum, "blue contrast {blue}, luminance contrast {lum}");
    }
}
