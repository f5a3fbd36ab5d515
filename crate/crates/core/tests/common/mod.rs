#![allow(dead_code)]

use std::sync::OnceLock;

use palletproj::imgcore::RasterImage;
use palletproj::projection::{EquirectImage, Vec3};
use palletproj::synthcam::{render_equirect, warehouse_scene};
use palletproj::{PalletPose, PalletSpec};

pub const W: usize = 3840;
pub const H: usize = 1920;

pub fn truth_pose() -> PalletPose {
    PalletPose::new(Vec3::new(2027.0, -1521.0, -760.0), -1.5).unwrap()
}

/// Warehouse scene around `truth_pose`, rendered once per test binary.
pub fn warehouse_fixture() -> &'static EquirectImage {
    static EQ: OnceLock<EquirectImage> = OnceLock::new();
    EQ.get_or_init(|| render_equirect(&warehouse_scene(&[truth_pose()], &PalletSpec::default(), 0.0), W, H).unwrap())
}

/// Sub-pixel positions where `profile` crosses `t`, with the direction of the crossing.
pub fn crossings(profile: &[f32], t: f32) -> Vec<(f64, bool)> {
    profile
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let (a, b) = (w[0], w[1]);
            let rising = a < t && b >= t;
            let falling = a >= t && b < t;
            (rising || falling).then(|| (i as f64 + ((t - a) / (b - a)) as f64, rising))
        })
        .collect()
}

pub fn row(img: &RasterImage, v: usize) -> Vec<f32> {
    (0..img.width()).map(|u| img.get(u, v, 0)).collect()
}

pub fn column(img: &RasterImage, u: usize) -> Vec<f32> {
    (0..img.height()).map(|v| img.get(u, v, 0)).collect()
}

/// Least-squares `y = a + b x`; returns `(a, b, rms residual)`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (points.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}
