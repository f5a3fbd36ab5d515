mod common;

use std::fs;

use common::{code, init_toml, render_fixture, run_in, truth_pose, without_diagnostics, H, SHELF_TOML, W};
use palletproj::imgcore::io::{read_image, write_image};
use palletproj::projection::Vec3;
use palletproj::synthcam::{Floor, SceneBox, SceneModel};
use palletproj::{PalletPose, RasterImage};
use palletproj_cli::{DetectionsFile, PipelineConfig, PoseRecord, TruthFile};
use tempfile::tempdir;

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn render_writes_image_and_truth() {
    let dir = tempdir().unwrap();
    let pano = render_fixture(dir.path(), &[truth_pose()]);
    let img = read_image(&pano).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (W, H, 3));
    let truth: TruthFile = toml::from_str(&fs::read_to_string(dir.path().join("truth.toml")).unwrap()).unwrap();
    assert_eq!(truth.pallets.len(), 1);
    assert_eq!(truth.pallets[0].position_mm, [2027.0, -1521.0, -760.0]);
    assert_eq!(truth.pallets[0].yaw_deg, -1.5);

    // small PPM render with explicit size
    let out = run_in(dir.path(), &["render", "--scene", "scene.toml", "--out", "small.ppm", "--truth", "t2.toml", "--width", "1024", "--height", "512", "--supersample", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let small = read_image(&dir.path().join("small.ppm")).unwrap();
    assert_eq!((small.width(), small.height()), (1024, 512));
}

#[test]
fn malformed_scene_leaves_no_files() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "background = [0.5, 0.5]\nwalls = 3\n").unwrap();
    let out = run_in(d, &["render", "--scene", "bad.toml", "--out", "pano.png", "--truth", "truth.toml", "--width", "512", "--height", "256"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    fs::write(d.join("bad2.toml"), "background = [1.5, 0.5, 0.5]\n").unwrap();
    let out = run_in(d, &["render", "--scene", "bad2.toml", "--out", "pano.png", "--truth", "truth.toml", "--width", "512", "--height", "256"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let left: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left.len(), 2, "{left:?}");
}

#[test]
fn bad_config_and_thread_settings_exit_4() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    write_image(&RasterImage::filled(512, 256, 3, 0.5).unwrap(), &d.join("flat.png")).unwrap();
    fs::write(d.join("init.toml"), init_toml(&truth_pose())).unwrap();
    fs::write(d.join("cfg.toml"), "theta_detect = 2.0\n").unwrap();
    let out = run_in(d, &["localize", "--image", "flat.png", "--init", "init.toml", "--config", "cfg.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    fs::write(d.join("init2.toml"), "frame = \"camera\"\nposition_mm = [1.0, 2.0, 3.0]\n").unwrap();
    let out = run_in(d, &["localize", "--image", "flat.png", "--init", "init2.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let out = std::process::Command::new(common::bin())
        .current_dir(d)
        .env("PALLETPROJ_THREADS", "many")
        .args(["default-config"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    let out = run_in(d, &["detect", "--image", "flat.png", "--out", "det.toml"]);
    assert_eq!(code(&out), 4, "missing shelf plane: {}", stderr(&out));
    let out = run_in(d, &["localize", "--image", "missing.png", "--init", "init.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(!d.join("pose.toml").exists() && !d.join("det.toml").exists());
}

#[test]
fn default_config_round_trips_through_the_cli() {
    let dir = tempdir().unwrap();
    let out = run_in(dir.path(), &["default-config", "--out", "cfg.toml"]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("cfg.toml")).unwrap();
    let cfg = PipelineConfig::parse(&text).unwrap();
    assert_eq!(cfg, PipelineConfig::default());
    assert_eq!(cfg.to_toml(), text);
    let stdout = run_in(dir.path(), &["default-config"]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap(), text);
}

#[test]
fn detect_localize_and_project_on_the_fixture() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    render_fixture(d, &[truth_pose()]);
    fs::write(d.join("shelf.toml"), SHELF_TOML).unwrap();

    let out = run_in(d, &["detect", "--image", "pano.png", "--shelf", "shelf.toml", "--out", "det.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dets: DetectionsFile = toml::from_str(&fs::read_to_string(d.join("det.toml")).unwrap()).unwrap();
    assert_eq!(dets.count, 1);
    let det = &dets.detections[0];
    assert!((det.position_mm[0] - 2027.0).abs() < 20.0 && (det.position_mm[2] + 760.0).abs() < 20.0, "{det:?}");

    // the detection seeds localization
    fs::write(d.join("init.toml"), toml::to_string(&det.pose_record()).unwrap()).unwrap();
    let out = run_in(d, &["localize", "--image", "pano.png", "--init", "init.toml", "--out", "pose.toml", "--debug-dir", "dbg"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rec = PoseRecord::parse(&fs::read_to_string(d.join("pose.toml")).unwrap()).unwrap();
    let pose = rec.pose().unwrap();
    assert!((pose.yaw_deg + 1.5).abs() <= 1.0, "{rec:?}");
    assert!((pose.position - truth_pose().position).norm() <= 20.0, "{rec:?}");
    assert!(rec.score.unwrap() >= 0.6);
    let diag = rec.diagnostics.unwrap();
    assert!(diag.yaw_ms >= 0.0 && diag.position_ms > 0.0);
    for f in ["horizontal.png", "boundary.png", "vertical_best.png", "vertical_edges.png", "template_overlay.png"] {
        assert!(read_image(&d.join("dbg").join(f)).is_ok(), "{f}");
    }
    let csv = fs::read_to_string(d.join("dbg/depth_profile.csv")).unwrap();
    assert!(csv.starts_with("offset_mm,score\n"));
    assert!(csv.lines().count() > 30);

    // full-scale front face: 1100 mm at 5 mm/px is 220 px, on a plane turned with the face
    let plane = "origin = [2027.0, -1521.0, -760.0]\nex = [0.9996573249755573, -0.02617694830787315, 0.0]\ney = [0.0, 0.0, -1.0]\nwidth_mm = 1400.0\nheight_mm = 400.0\nres = 5.0\n";
    fs::write(d.join("face.toml"), plane).unwrap();
    let out = run_in(d, &["project", "--image", "pano.png", "--plane", "face.toml", "--out", "face.png"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let face = read_image(&d.join("face.png")).unwrap().to_gray(palletproj::Channel::Luminance).unwrap();
    assert_eq!((face.width(), face.height()), (280, 80));
    // top board row; the wood is lighter than the deck and racking around it
    let across = common::crossings(&common::row(&face, 27), 0.45);
    let width = across.last().unwrap().0 - across.first().unwrap().0;
    assert!((width - 220.0).abs() <= 1.0, "width {width}");

    // horizontal plane through the bottom edge: the boundary splits the strip
    let plane = "origin = [2027.0, -1521.0, -832.0]\nex = [0.0, -1.0, 0.0]\ney = [1.0, 0.0, 0.0]\nwidth_mm = 400.0\nheight_mm = 1300.0\nres = 3.0\n";
    fs::write(d.join("bottom.toml"), plane).unwrap();
    let out = run_in(d, &["project", "--image", "pano.png", "--plane", "bottom.toml", "--out", "bottom.png"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let strip = read_image(&d.join("bottom.png")).unwrap().to_gray(palletproj::Channel::Luminance).unwrap();
    let (w, h) = (strip.width(), strip.height());
    let left = strip.region_mean(w / 2 - 30, w / 2 - 10, h / 2 - 50, h / 2 + 50).unwrap();
    let right = strip.region_mean(w / 2 + 10, w / 2 + 30, h / 2 - 50, h / 2 + 50).unwrap();
    assert!((left - right).abs() > 0.1, "{left} {right}");
}

#[test]
fn degenerate_inputs_map_to_exit_codes() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    render_fixture(d, &[truth_pose()]);

    // pallet at camera height: the horizontal plane passes through the camera
    let level = PalletPose::new(Vec3::new(2027.0, -1521.0, 10.0), 0.0).unwrap();
    fs::write(d.join("level.toml"), init_toml(&level)).unwrap();
    let out = run_in(d, &["localize", "--image", "pano.png", "--init", "level.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));

    // uniform image: no contrast across the flanks
    write_image(&RasterImage::filled(1024, 512, 3, 0.5).unwrap(), &d.join("flat.png")).unwrap();
    fs::write(d.join("init.toml"), init_toml(&truth_pose())).unwrap();
    let out = run_in(d, &["localize", "--image", "flat.png", "--init", "init.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));

    // shelf plane through the camera
    fs::write(d.join("through.toml"), "origin = [2000.0, 0.0, 0.0]\nex = [1.0, 0.0, 0.0]\ney = [0.0, 0.0, -1.0]\nwidth_mm = 2000.0\nheight_mm = 800.0\nres = 5.0\n").unwrap();
    let out = run_in(d, &["detect", "--image", "pano.png", "--shelf", "through.toml", "--out", "det.toml"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = run_in(d, &["project", "--image", "pano.png", "--plane", "through.toml", "--out", "p.png"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(!d.join("pose.toml").exists() && !d.join("det.toml").exists() && !d.join("p.png").exists());
}

#[test]
fn empty_shelf_and_missing_pallet() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    // a plain block whose top edge is where a pallet's bottom edge would be
    let mut scene = SceneModel::empty([0.75, 0.75, 0.72]);
    scene.floor = Some(Floor { z_mm: -1500.0, color: [0.45; 3] });
    scene.boxes.push(SceneBox { min: Vec3::new(0.0, -2600.0, -1500.0), max: Vec3::new(4000.0, -1531.0, -832.0), color: [0.3; 3] });
    scene.boxes.push(SceneBox { min: Vec3::new(0.0, -1531.0, -1500.0), max: Vec3::new(4000.0, -1521.0, -832.0), color: [0.8; 3] });
    fs::write(d.join("block.toml"), toml::to_string_pretty(&scene).unwrap()).unwrap();
    let out = run_in(d, &["render", "--scene", "block.toml", "--out", "pano.png", "--truth", "truth.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let truth: TruthFile = toml::from_str(&fs::read_to_string(d.join("truth.toml")).unwrap()).unwrap();
    assert!(truth.pallets.is_empty());

    fs::write(d.join("shelf.toml"), SHELF_TOML).unwrap();
    let out = run_in(d, &["detect", "--image", "pano.png", "--shelf", "shelf.toml", "--out", "det.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dets: DetectionsFile = toml::from_str(&fs::read_to_string(d.join("det.toml")).unwrap()).unwrap();
    assert_eq!(dets.count, 0);
    assert!(dets.detections.is_empty());

    let init = PalletPose::new(truth_pose().position, 0.0).unwrap();
    fs::write(d.join("init.toml"), init_toml(&init)).unwrap();
    let out = run_in(d, &["localize", "--image", "pano.png", "--init", "init.toml", "--out", "pose.toml"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(!d.join("pose.toml").exists());
}

#[test]
fn outputs_are_deterministic_apart_from_timings() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let pose = PalletPose::new(Vec3::new(1900.0, -1500.0, -700.0), 2.0).unwrap();
    fs::write(d.join("init.toml"), init_toml(&PalletPose::new(Vec3::new(1800.0, -1420.0, -663.0), -1.0).unwrap())).unwrap();
    fs::write(d.join("shelf.toml"), SHELF_TOML.replace("-1521.0", "-1500.0")).unwrap();
    let pose_arg = format!("--pallet={}", common::pose_arg(&pose));
    let mut runs = Vec::new();
    for k in 0..2 {
        let sub = d.join(format!("run{k}"));
        fs::create_dir(&sub).unwrap();
        for args in [
            vec!["scene", pose_arg.as_str(), "--out", "scene.toml"],
            vec!["render", "--scene", "scene.toml", "--out", "pano.png", "--truth", "truth.toml"],
            vec!["detect", "--image", "pano.png", "--shelf", "../shelf.toml", "--out", "det.toml"],
            vec!["localize", "--image", "pano.png", "--init", "../init.toml", "--out", "pose.toml", "--debug-dir", "dbg"],
            vec!["project", "--image", "pano.png", "--plane", "../shelf.toml", "--out", "shelf.png"],
        ] {
            let out = run_in(&sub, &args);
            assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
        }
        runs.push(sub);
    }
    for f in ["scene.toml", "pano.png", "truth.toml", "det.toml", "shelf.png", "dbg/depth_profile.csv", "dbg/boundary.png", "dbg/template_overlay.png"] {
        assert_eq!(fs::read(runs[0].join(f)).unwrap(), fs::read(runs[1].join(f)).unwrap(), "{f}");
    }
    let pose_text = |k: usize| without_diagnostics(&fs::read_to_string(runs[k].join("pose.toml")).unwrap());
    assert_eq!(pose_text(0), pose_text(1));
    assert!(!pose_text(0).contains("yaw_ms"));
}
