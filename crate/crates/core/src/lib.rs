//! Pallet localization on warehouse shelves from a single equirectangular image.
//!
//! The pipeline has three stages:
//!
//! 1. [`detect`]: project the panorama onto the shelf-front vertical plane and
//!    find pallets by full-scale edge-template matching. This gives an
//!    approximate pose.
//! 2. [`localize::estimate_yaw`]: project onto the horizontal plane through the
//!    pallet's front-bottom (or front-top) edge. Under the approximate pose that
//!    edge should run down the center column of the projection; its measured
//!    tilt is the yaw error.
//! 3. [`localize::search_depth`]: slide the yaw-corrected vertical plane along
//!    its normal and keep the depth where the projected front face best matches
//!    the full-scale template.
//!
//! [`synthcam`] ray-casts simple shelf scenes into equirectangular images with
//! exact ground truth, which is what the test suites run against.
//!
//! All poses live in the camera frame: x forward along the aisle, y left,
//! z up, origin at the optical center, millimetres.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod detect;
pub mod error;
pub mod imgcore;
pub mod localize;
pub mod pallet;
pub mod projection;
pub mod synthcam;

pub use detect::{detect_pallets, detection_to_initial_pose, DetectConfig, Detection};
pub use error::{Error, Result};
pub use imgcore::{Channel, LineHypothesis, RasterImage};
pub use localize::{localize_pallet, LocalizeConfig, Localization};
pub use pallet::{EdgeTemplate, MatchScore, PalletPose, PalletSpec};
pub use projection::{EquirectImage, PlaneSpec};
