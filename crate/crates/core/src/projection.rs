//! Camera model and plane projection.
//!
//! The equirectangular image maps longitude `λ = atan2(y, x)` linearly onto
//! columns (`λ = -π` at column 0, `λ = 0` at `width / 2`) and latitude
//! `φ = asin(z)` onto rows (`φ = π/2` at row 0). Integer coordinates are pixel
//! centers, so the pixel at `(width / 2, height / 2)` looks straight down +x.
//!
//! A [`PlaneSpec`] is a metric sampling grid on a 3D plane. Projecting it
//! resamples the panorama along the ray from the camera center through every
//! grid point, giving a rectified image in which anything lying on the plane
//! appears at its true size.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{Border, RasterImage};
use crate::pallet::{PalletPose, PalletSpec};

pub type Vec3 = Vector3<f64>;

pub const Z_UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Default minimum camera-to-plane distance, mm.
pub const DEFAULT_EPS_PLANE: f64 = 50.0;
/// Default minimum vertical distance between camera and a horizontal plane, mm.
pub const DEFAULT_H_MIN: f64 = 100.0;

/// A full-sphere equirectangular panorama (`width == 2 * height`).
#[derive(Clone, Debug)]
pub struct EquirectImage {
    image: RasterImage,
    /// Camera-from-world rotation applied to every ray. Identity for a level mount.
    rotation: Matrix3<f64>,
}

impl EquirectImage {
    pub fn new(image: RasterImage) -> Result<Self> {
        if image.width() != 2 * image.height() {
            return Err(Error::invalid(format!(
                "equirectangular image must be 2:1, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        Ok(Self { image, rotation: Matrix3::identity() })
    }

    /// Sets the mount rotation. Must be orthonormal.
    pub fn with_rotation(mut self, rotation: Matrix3<f64>) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if err > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("mount rotation is not a proper rotation"));
        }
        self.rotation = rotation;
        Ok(self)
    }

    pub fn image(&self) -> &RasterImage {
        &self.image
    }

    pub fn into_image(self) -> RasterImage {
        self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn dir_to_pixel(&self, d: &Vec3) -> Result<(f64, f64)> {
        let n = d.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("ray direction must be a nonzero finite vector"));
        }
        Ok(dir_to_pixel_unchecked(&(self.rotation * (d / n)), self.width(), self.height()))
    }

    pub fn pixel_to_dir(&self, u: f64, v: f64) -> Vec3 {
        self.rotation.transpose() * pixel_to_dir(u, v, self.width(), self.height())
    }

    /// Bilinear lookup along a world-frame ray, writing one value per channel.
    fn sample_dir(&self, d: &Vec3, out: &mut [f32]) {
        let (u, v) = dir_to_pixel_unchecked(&(self.rotation * d.normalize()), self.width(), self.height());
        self.image.sample_bilinear_into(u, v, Border::WrapX, out);
    }
}

/// Pixel coordinates of unit direction `d` for a `width x height` panorama.
pub fn dir_to_pixel_unchecked(d: &Vec3, width: usize, height: usize) -> (f64, f64) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let lon = d.y.atan2(d.x);
    let lat = d.z.clamp(-1.0, 1.0).asin();
    let u = (lon + PI) / (2.0 * PI) * width as f64;
    let v = (FRAC_PI_2 - lat) / PI * height as f64;
    (u, v)
}

/// Unit direction of pixel `(u, v)`; inverse of [`dir_to_pixel_unchecked`].
pub fn pixel_to_dir(u: f64, v: f64, width: usize, height: usize) -> Vec3 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let lon = u / width as f64 * 2.0 * PI - PI;
    let lat = FRAC_PI_2 - v / height as f64 * PI;
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    Vec3::new(cl * co, cl * so, sl)
}

/// A metric sampling grid on a plane. The plane origin maps to pixel
/// `(cols / 2, rows / 2)`; `ex` runs along columns and `ey` down the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub origin: Vec3,
    pub ex: Vec3,
    pub ey: Vec3,
    pub width_mm: f64,
    pub height_mm: f64,
    /// mm per pixel
    pub res: f64,
}

impl PlaneSpec {
    pub fn new(origin: Vec3, ex: Vec3, ey: Vec3, width_mm: f64, height_mm: f64, res: f64) -> Result<Self> {
        let p = Self { origin, ex, ey, width_mm, height_mm, res };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.origin) || !finite(&self.ex) || !finite(&self.ey) {
            return Err(Error::invalid("plane vectors must be finite"));
        }
        if (self.ex.norm() - 1.0).abs() > 1e-6 || (self.ey.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("plane axes must be unit vectors"));
        }
        if self.ex.dot(&self.ey).abs() > 1e-6 {
            return Err(Error::invalid("plane axes must be orthogonal"));
        }
        if !(self.res > 0.0) || !self.res.is_finite() {
            return Err(Error::invalid("plane resolution must be positive"));
        }
        if !(self.width_mm > 0.0 && self.height_mm > 0.0) || self.cols() == 0 || self.rows() == 0 {
            return Err(Error::invalid("plane extent must cover at least one pixel"));
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        (self.width_mm / self.res).round().max(0.0) as usize
    }

    pub fn rows(&self) -> usize {
        (self.height_mm / self.res).round().max(0.0) as usize
    }

    pub fn center_px(&self) -> (f64, f64) {
        ((self.cols() / 2) as f64, (self.rows() / 2) as f64)
    }

    /// Unit normal `ex × ey`.
    pub fn normal(&self) -> Vec3 {
        self.ex.cross(&self.ey)
    }

    pub fn pixel_to_world(&self, u: f64, v: f64) -> Vec3 {
        let (cu, cv) = self.center_px();
        self.origin + (u - cu) * self.res * self.ex + (v - cv) * self.res * self.ey
    }

    /// Inverse of [`Self::pixel_to_world`] for points on the plane.
    pub fn world_to_pixel(&self, p: &Vec3) -> (f64, f64) {
        let (cu, cv) = self.center_px();
        let d = p - self.origin;
        (cu + d.dot(&self.ex) / self.res, cv + d.dot(&self.ey) / self.res)
    }

    /// Unsigned distance from the camera center to the plane.
    pub fn camera_distance(&self) -> f64 {
        self.origin.dot(&self.normal()).abs()
    }

    /// Same grid recentred on `origin`.
    pub fn recentered(&self, origin: Vec3) -> Self {
        Self { origin, ..self.clone() }
    }
}

/// Resamples the panorama onto the plane grid.
pub fn project_plane(eq: &EquirectImage, plane: &PlaneSpec, eps_plane: f64) -> Result<RasterImage> {
    plane.validate()?;
    let dist = plane.camera_distance();
    if dist <= eps_plane {
        return Err(Error::DegenerateGeometry(format!(
            "camera is {dist:.1} mm from the projection plane (minimum {eps_plane:.1} mm)"
        )));
    }
    let (cols, rows) = (plane.cols(), plane.rows());
    let ch = eq.image().channels();
    let mut data = vec![0.0f32; cols * rows * ch];
    data.par_chunks_mut(cols * ch).enumerate().for_each(|(v, row)| {
        for u in 0..cols {
            let x = plane.pixel_to_world(u as f64, v as f64);
            eq.sample_dir(&x, &mut row[u * ch..(u + 1) * ch]);
        }
    });
    Ok(RasterImage::from_raw(cols, rows, ch, data))
}

/// Grid on the vertical shelf-front plane through `origin` with outward
/// (camera-facing) horizontal unit `normal`. Columns run along `Z_UP × normal`,
/// which is the viewer's right when looking at the shelf, so the projection
/// is not mirrored; rows run downward.
pub fn make_shelf_plane(origin: Vec3, normal: Vec3, width_mm: f64, height_mm: f64, res: f64) -> Result<PlaneSpec> {
    if normal.z.abs() > 1e-9 || (normal.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("shelf normal must be a horizontal unit vector"));
    }
    let ex = Z_UP.cross(&normal);
    PlaneSpec::new(origin, ex, -Z_UP, width_mm, height_mm, res)
}

/// Which horizontal edge of the pallet face the horizontal plane contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneHeight {
    Bottom,
    Top,
    /// Upper edge of the fork holes.
    HoleTop,
}

impl PlaneHeight {
    pub fn z_of(self, pose: &PalletPose, spec: &PalletSpec) -> f64 {
        let bottom = pose.position.z - spec.height_mm / 2.0;
        match self {
            PlaneHeight::Bottom => bottom,
            PlaneHeight::Top => pose.position.z + spec.height_mm / 2.0,
            PlaneHeight::HoleTop => bottom + spec.hole_bottom_mm + spec.hole_height_mm,
        }
    }
}

/// Grid on the horizontal plane through one of the pallet's front edges.
///
/// Rows (`ey`) run along the front edge as oriented by the pose's yaw and
/// columns (`ex`) point away from the camera, into the pallet. The origin is
/// the edge point below (or above) the face center, so under a correct pose
/// the edge lies exactly on the center column. `along_mm` is the extent along
/// the edge, `across_mm` perpendicular to it.
pub fn make_horizontal_plane(
    pose: &PalletPose,
    spec: &PalletSpec,
    which: PlaneHeight,
    along_mm: f64,
    across_mm: f64,
    res: f64,
    h_min: f64,
) -> Result<PlaneSpec> {
    let z = which.z_of(pose, spec);
    if z.abs() < h_min {
        return Err(Error::SameHeight { z_mm: z, h_min });
    }
    let n = pose.face_normal();
    let origin = Vec3::new(pose.position.x, pose.position.y, z);
    PlaneSpec::new(origin, -n, pose.lateral_axis(), across_mm, along_mm, res)
}
