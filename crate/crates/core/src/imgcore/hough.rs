use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accumulator resolution. Theta is the tilt of the line from the image's
/// vertical axis, which is also the angle of the line normal from +u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoughParams {
    pub theta_window_deg: f64,
    pub theta_step_deg: f64,
    pub rho_step: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        Self { theta_window_deg: 15.0, theta_step_deg: 0.1, rho_step: 1.0 }
    }
}

impl HoughParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_step_deg > 0.0) || !(self.rho_step > 0.0) {
            return Err(Error::invalid("hough steps must be positive"));
        }
        if !(self.theta_window_deg >= 0.0 && self.theta_window_deg < 90.0) {
            return Err(Error::invalid("hough theta window must be in [0, 90)"));
        }
        Ok(())
    }

    /// Number of bins on each side of theta = 0.
    pub fn half_bins(&self) -> usize {
        (self.theta_window_deg / self.theta_step_deg).round() as usize
    }

    pub fn theta_of_bin(&self, k: usize) -> f64 {
        (k as f64 - self.half_bins() as f64) * self.theta_step_deg
    }

    /// Quantized rho bin of point `(u, v)` for a line normal at `theta_deg`.
    pub fn rho_bin(&self, u: f64, v: f64, theta_deg: f64) -> i64 {
        let t = theta_deg.to_radians();
        ((u * t.cos() + v * t.sin()) / self.rho_step).round() as i64
    }
}

/// A line `rho = u cos(theta) + v sin(theta)`; positive theta means the top
/// of the line leans toward +u.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineHypothesis {
    pub rho: f64,
    pub theta_deg: f64,
    pub votes: u32,
}

impl LineHypothesis {
    /// Column where the line crosses row `v`.
    pub fn u_at(&self, v: f64) -> f64 {
        let t = self.theta_deg.to_radians();
        (self.rho - v * t.sin()) / t.cos()
    }

    pub fn distance(&self, u: f64, v: f64) -> f64 {
        let t = self.theta_deg.to_radians();
        (u * t.cos() + v * t.sin() - self.rho).abs()
    }
}

/// Ranking order shared by the accumulator and by callers that re-rank:
/// votes descending, then |theta|, then distance of rho from the line of the
/// same theta through `center`.
pub(crate) fn rank_cmp(a: &LineHypothesis, b: &LineHypothesis, half_a: usize, half_b: usize, center: (f64, f64)) -> Ordering {
    let center_dist = |l: &LineHypothesis| {
        let t = l.theta_deg.to_radians();
        (l.rho - (center.0 * t.cos() + center.1 * t.sin())).abs()
    };
    b.votes
        .cmp(&a.votes)
        .then(half_a.cmp(&half_b))
        .then(center_dist(a).total_cmp(&center_dist(b)))
}

/// Hough transform over near-vertical lines. Returns the local maxima of the
/// accumulator (8-neighbourhood), best first. `center` is the image center,
/// used only for tie-breaking.
pub fn hough_lines(points: &[(f64, f64)], params: &HoughParams, center: (f64, f64)) -> Result<Vec<LineHypothesis>> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::NoLine(format!("{} candidate point(s); need at least 2", points.len())));
    }
    let half = params.half_bins();
    let n_theta = 2 * half + 1;
    let mut bins = Vec::with_capacity(n_theta * points.len());
    let (mut r_min, mut r_max) = (i64::MAX, i64::MIN);
    for k in 0..n_theta {
        let theta = params.theta_of_bin(k);
        for &(u, v) in points {
            let r = params.rho_bin(u, v, theta);
            r_min = r_min.min(r);
            r_max = r_max.max(r);
            bins.push(r);
        }
    }
    let n_rho = (r_max - r_min + 1) as usize;
    let mut acc = vec![0u32; n_theta * n_rho];
    for (i, &r) in bins.iter().enumerate() {
        let k = i / points.len();
        acc[k * n_rho + (r - r_min) as usize] += 1;
    }

    let at = |k: isize, r: isize| -> u32 {
        if k < 0 || r < 0 || k >= n_theta as isize || r >= n_rho as isize {
            0
        } else {
            acc[k as usize * n_rho + r as usize]
        }
    };
    let mut peaks: Vec<(LineHypothesis, usize)> = Vec::new();
    for k in 0..n_theta {
        for r in 0..n_rho {
            let votes = acc[k * n_rho + r];
            if votes == 0 {
                continue;
            }
            let is_peak = (-1isize..=1).all(|dk| {
                (-1isize..=1).all(|dr| (dk == 0 && dr == 0) || at(k as isize + dk, r as isize + dr) <= votes)
            });
            if is_peak {
                let line = LineHypothesis {
                    rho: (r as i64 + r_min) as f64 * params.rho_step,
                    theta_deg: params.theta_of_bin(k),
                    votes,
                };
                peaks.push((line, k.abs_diff(half)));
            }
        }
    }
    peaks.sort_by(|(a, ka), (b, kb)| rank_cmp(a, b, *ka, *kb, center));
    Ok(peaks.into_iter().map(|(l, _)| l).collect())
}
