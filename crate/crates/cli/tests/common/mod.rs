#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use palletproj::imgcore::RasterImage;
use palletproj::projection::Vec3;
use palletproj::PalletPose;

pub const W: usize = 3840;
pub const H: usize = 1920;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_palletproj")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn palletproj")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin()).current_dir(dir).args(args).output().expect("spawn palletproj")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn truth_pose() -> PalletPose {
    PalletPose::new(Vec3::new(2027.0, -1521.0, -760.0), -1.5).unwrap()
}

pub fn pose_arg(p: &PalletPose) -> String {
    format!("{},{},{},{}", p.position.x, p.position.y, p.position.z, p.yaw_deg)
}

pub fn init_toml(p: &PalletPose) -> String {
    format!(
        "frame = \"camera\"\nposition_mm = [{:?}, {:?}, {:?}]\nyaw_deg = {:?}\n",
        p.position.x, p.position.y, p.position.z, p.yaw_deg
    )
}

pub const SHELF_TOML: &str = "origin = [3000.0, -1521.0, -700.0]\nex = [1.0, 0.0, 0.0]\ney = [0.0, 0.0, -1.0]\nwidth_mm = 8000.0\nheight_mm = 1200.0\nres = 5.0\n";

/// Writes a warehouse scene holding `poses` and renders it at full size.
/// Returns the panorama path.
pub fn render_fixture(dir: &Path, poses: &[PalletPose]) -> PathBuf {
    let mut args = vec!["scene".to_string()];
    for p in poses {
        args.push(format!("--pallet={}", pose_arg(p)));
    }
    args.extend(["--out".into(), "scene.toml".into()]);
    let out = run_in(dir, &args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_in(dir, &["render", "--scene", "scene.toml", "--out", "pano.png", "--truth", "truth.toml"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("pano.png")
}

/// Text of a record with its `[diagnostics]` table removed.
pub fn without_diagnostics(text: &str) -> String {
    let mut out = String::new();
    let mut skipping = false;
    for line in text.lines() {
        if line.trim_start().starts_with('[') {
            skipping = line.trim() == "[diagnostics]";
        }
        if !skipping {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
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
