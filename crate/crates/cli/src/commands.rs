//! Subcommand implementations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use palletproj::detect::plane_edges;
use palletproj::imgcore::io::{encode_for_path, read_image};
use palletproj::localize::LocalizeError;
use palletproj::pallet::build_edge_template;
use palletproj::projection::{project_plane, PlaneSpec, Vec3, DEFAULT_EPS_PLANE};
use palletproj::synthcam::{ground_truth, lab_scene, render_equirect_with, warehouse_scene, RenderOptions, SceneModel};
use palletproj::{detect_pallets, localize_pallet, EquirectImage, Error, Localization, PalletPose, RasterImage};

use crate::config::PipelineConfig;
use crate::fsio::write_atomic;
use crate::records::{DetectionsFile, PoseRecord, TruthFile};

/// Malformed input file or argument; exits with [`EXIT_PARSE`].
#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_DEGENERATE: u8 = 2;
pub const EXIT_NO_LINE: u8 = 3;
pub const EXIT_PARSE: u8 = 4;
pub const EXIT_NO_PALLET: u8 = 5;

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateGeometry(_) | Error::SameHeight { .. } => EXIT_DEGENERATE,
        Error::LowContrast { .. } | Error::NoLine(_) => EXIT_NO_LINE,
        Error::NoPalletAtDepth { .. } => EXIT_NO_PALLET,
        Error::InvalidArgument(_) | Error::Format(_) => EXIT_PARSE,
        Error::IndexOutOfRange { .. } | Error::Io(_) => EXIT_OTHER,
    }
}

/// Exit status for a failed command: the first recognized cause decides.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ParseError>() {
            return EXIT_PARSE;
        }
        if let Some(e) = cause.downcast_ref::<LocalizeError>() {
            return core_exit_code(&e.source);
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_exit_code(e);
        }
    }
    EXIT_OTHER
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| ParseError(format!("{}: {e}", path.display())).into())
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => PipelineConfig::parse(&read_text(p)?).map_err(|e| ParseError(format!("{}: {e}", p.display())).into()),
    }
}

fn load_panorama(path: &Path) -> Result<EquirectImage> {
    let img = read_image(path).with_context(|| format!("reading image {}", path.display()))?;
    EquirectImage::new(img).with_context(|| format!("{} is not an equirectangular image", path.display()))
}

fn write_image(img: &RasterImage, path: &Path) -> Result<()> {
    write_atomic(path, &encode_for_path(img, path)?)
}

fn to_toml<T: serde::Serialize>(value: &T) -> String {
    toml::to_string_pretty(value).expect("records are always serializable")
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Scene file (TOML).
    #[arg(long)]
    pub scene: PathBuf,
    /// Output panorama (.png, .ppm or .pgm).
    #[arg(long)]
    pub out: PathBuf,
    /// Output ground-truth poses (TOML).
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 3840)]
    pub width: usize,
    #[arg(long, default_value_t = 1920)]
    pub height: usize,
    /// Rays per pixel along each axis.
    #[arg(long, default_value_t = RenderOptions::default().supersample)]
    pub supersample: usize,
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let scene: SceneModel = parse_toml(&args.scene)?;
    scene.validate().map_err(|e| ParseError(format!("{}: {e}", args.scene.display())))?;
    let opts = RenderOptions { supersample: args.supersample };
    let eq = render_equirect_with(&scene, args.width, args.height, &opts)?;
    let truths = (0..scene.pallets.len()).map(|i| ground_truth(&scene, i)).collect::<palletproj::Result<Vec<_>>>()?;
    let image_bytes = encode_for_path(eq.image(), &args.out)?;
    write_atomic(&args.out, &image_bytes)?;
    write_atomic(&args.truth, to_toml(&TruthFile::new(&truths)).as_bytes())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Preset {
    /// Racking with beams and uprights, light pallets.
    Warehouse,
    /// A blue pallet on a gray floor.
    Lab,
}

#[derive(Args, Debug)]
pub struct SceneArgs {
    #[arg(long, value_enum, default_value = "warehouse")]
    pub preset: Preset,
    /// Pallet pose as x,y,z,yaw (mm, degrees); repeat for more pallets.
    #[arg(long = "pallet", value_parser = parse_pose_arg, required = true)]
    pub pallets: Vec<PalletPose>,
    /// Pallet fronts this far behind the shelf front (warehouse only).
    #[arg(long, default_value_t = 0.0)]
    pub recess_mm: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pose_arg(s: &str) -> std::result::Result<PalletPose, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    let [x, y, z, yaw] = v[..] else {
        return Err("expected x,y,z,yaw".into());
    };
    PalletPose::new(Vec3::new(x, y, z), yaw).map_err(|e| e.to_string())
}

pub fn scene(args: &SceneArgs) -> Result<()> {
    let spec = PipelineConfig::default().pallet;
    let scene = match args.preset {
        Preset::Warehouse => warehouse_scene(&args.pallets, &spec, args.recess_mm),
        Preset::Lab => {
            if args.pallets.len() != 1 {
                return Err(ParseError("the lab preset holds exactly one pallet".into()).into());
            }
            lab_scene(args.pallets[0], &spec)
        }
    };
    write_atomic(&args.out, to_toml(&scene).as_bytes())
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Plane file (TOML): origin, ex, ey, width_mm, height_mm, res.
    #[arg(long)]
    pub plane: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum camera-to-plane distance in mm.
    #[arg(long, default_value_t = DEFAULT_EPS_PLANE)]
    pub eps_plane: f64,
}

pub fn project(args: &ProjectArgs) -> Result<()> {
    let plane: PlaneSpec = parse_toml(&args.plane)?;
    let eq = load_panorama(&args.image)?;
    let img = project_plane(&eq, &plane, args.eps_plane)?;
    write_image(&img, &args.out)
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Pipeline config (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shelf-front plane file; overrides the config's [shelf] table.
    #[arg(long)]
    pub shelf: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let shelf = match &args.shelf {
        Some(p) => parse_toml::<PlaneSpec>(p)?,
        None => cfg.shelf.clone().ok_or_else(|| ParseError("no shelf plane: pass --shelf or add a [shelf] table to the config".into()))?,
    };
    let eq = load_panorama(&args.image)?;
    let dets = detect_pallets(&eq, &shelf, &cfg.pallet, &cfg.detect())?;
    write_atomic(&args.out, to_toml(&DetectionsFile::new(&dets)).as_bytes())
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Initial pose file (TOML), e.g. a detection.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for intermediate projections and the depth profile.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
}

pub fn localize(args: &LocalizeArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let init = PoseRecord::parse(&read_text(&args.init)?)
        .and_then(|r| r.pose())
        .map_err(|e| ParseError(format!("{}: {e}", args.init.display())))?;
    let eq = load_panorama(&args.image)?;
    let loc = localize_pallet(&eq, &init, &cfg.pallet, &cfg.localize())?;
    if let Some(dir) = &args.debug_dir {
        write_debug(dir, &eq, &loc, &cfg)?;
    }
    write_atomic(&args.out, to_toml(&PoseRecord::from_localization(&loc)).as_bytes())
}

const RED: [f32; 3] = [1.0, 0.0, 0.0];
const GREEN: [f32; 3] = [0.0, 1.0, 0.0];

fn put(img: &mut RasterImage, u: f64, v: f64, color: [f32; 3]) {
    let (x, y) = (u.round(), v.round());
    if x >= 0.0 && y >= 0.0 && (x as usize) < img.width() && (y as usize) < img.height() {
        for (c, value) in color.into_iter().enumerate() {
            img.set(x as usize, y as usize, c, value);
        }
    }
}

fn write_debug(dir: &Path, eq: &EquirectImage, loc: &Localization, cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let yaw = &loc.yaw;
    write_image(&yaw.image, &dir.join("horizontal.png"))?;

    let mut overlay = yaw.image.to_rgb();
    for v in 0..overlay.height() {
        put(&mut overlay, yaw.boundary.line.u_at(v as f64), v as f64, GREEN);
    }
    for &(u, v) in &yaw.boundary.candidates {
        put(&mut overlay, u, v, RED);
    }
    write_image(&overlay, &dir.join("boundary.png"))?;

    let plane = &loc.depth.plane;
    write_image(&project_plane(eq, plane, cfg.eps_plane)?, &dir.join("vertical_best.png"))?;
    let edges = plane_edges(eq, plane, cfg.channel, cfg.eps_plane)?;
    write_image(&edges, &dir.join("vertical_edges.png"))?;
    let mut matched = edges.to_rgb();
    let (cu, cv) = plane.center_px();
    for &(u, v) in &build_edge_template(&cfg.pallet, plane.res)?.points {
        put(&mut matched, cu + u, cv + v, RED);
    }
    write_image(&matched, &dir.join("template_overlay.png"))?;
    write_atomic(&dir.join("depth_profile.csv"), loc.depth.profile.to_csv().as_bytes())
}

#[derive(Args, Debug)]
pub struct DefaultConfigArgs {
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn default_config(args: &DefaultConfigArgs) -> Result<()> {
    let text = PipelineConfig::default().to_toml();
    match &args.out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Builds the global thread pool from `PALLETPROJ_THREADS` (0 or unset = one per core).
pub fn init_threads(var: Option<String>) -> Result<()> {
    let n = match var.as_deref().map(str::trim) {
        None | Some("") => 0,
        Some(s) => s.parse::<usize>().map_err(|_| ParseError(format!("PALLETPROJ_THREADS={s:?} is not a thread count")))?,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("initializing thread pool")
}
