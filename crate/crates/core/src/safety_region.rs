//! Rectangular safety region: selects the lidar rays whose boundary hits
//! evenly cover the four sides of the inflated robot rectangle, records each
//! ray's distance to that boundary, and flags a collision whenever a selected
//! ray reads at or below its safe range.
//!
//! Also builds the two fixed-interval baselines used in the collision
//! benchmark: FIFR (one constant range covering the robot width) and FIRect
//! (per-ray rectangle ranges).

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_two_pi, Footprint, Vec2};

/// Which construction produced a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Rectangular safety region.
    Sr,
    /// Fixed interval, rectangle-fitted ranges.
    Firect,
    /// Fixed interval, fixed range.
    Fifr,
}

impl Representation {
    pub fn label(self) -> &'static str {
        match self {
            Representation::Sr => "SR",
            Representation::Firect => "FIRect",
            Representation::Fifr => "FIFR",
        }
    }
}

/// Selected ray indices with their safe ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyRegionTable {
    pub representation: Representation,
    /// Raw lidar ray count the indices refer to.
    pub n_rays: usize,
    /// Selected raw indices, ascending (= ascending angle from forward).
    pub indices: Vec<usize>,
    /// Safe range per selected ray, parallel to `indices`.
    pub ranges: Vec<f64>,
    /// Ray angles in the lidar frame, [0, 2pi), parallel to `indices`.
    pub angles: Vec<f64>,
    /// Side sampling resolution; zero for the fixed-interval baselines.
    pub resolution: f64,
    /// Axis and corner-diagonal directions splitting the rectangle into 8 phases,
    /// counter-clockwise from forward.
    pub phase_boundaries: [f64; 8],
    /// Table positions of the straight-ahead, straight-left and straight-right rays.
    pub forward: usize,
    pub left: usize,
    pub right: usize,
}

/// State vector derived from one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Observation {
    /// Ranges of the selected rays, table order.
    pub v_obs: Vec<f64>,
    /// Waypoint distance and yaw difference in waypoint-guided mode, else empty.
    pub extras: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.v_obs.len() + self.extras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nearest raw ray to `angle`; exact ties go to the lower index.
pub fn nearest_ray(angle: f64, n_rays: usize) -> usize {
    let inc = 2.0 * PI / n_rays as f64;
    let k = wrap_two_pi(angle) / inc;
    let lo = k.floor();
    let idx = if k - lo > 0.5 { lo as usize + 1 } else { lo as usize };
    idx % n_rays
}

pub fn ray_angle(index: usize, n_rays: usize) -> f64 {
    2.0 * PI / n_rays as f64 * index as f64
}

fn check_rays(n_rays: usize) -> Result<()> {
    if n_rays < 8 {
        return Err(Error::config(format!("need at least 8 lidar rays, got {n_rays}")));
    }
    Ok(())
}

/// Counter-clockwise walk over the rectangle boundary through the 8 phase
/// points: forward axis, front-left corner, left axis, rear-left corner, ...
fn phase_points(fp: &Footprint) -> [Vec2; 8] {
    let r = fp.safety_rect();
    [
        Vec2::new(r.front, 0.0),
        Vec2::new(r.front, r.half_width),
        Vec2::new(0.0, r.half_width),
        Vec2::new(-r.back, r.half_width),
        Vec2::new(-r.back, 0.0),
        Vec2::new(-r.back, -r.half_width),
        Vec2::new(0.0, -r.half_width),
        Vec2::new(r.front, -r.half_width),
    ]
}

impl SafetyRegionTable {
    /// Builds the safety-region table for `footprint` over a lidar of `n_rays`
    /// evenly spaced rays.
    ///
    /// Each of the 8 phase sections (half-sides between an axis hit and a
    /// corner) is sampled at spacing no larger than `resolution`; every
    /// sample maps to its nearest ray and the ray's safe range is the exact
    /// distance to the rectangle along that ray. Rays hit by several samples
    /// keep the largest safe range.
    pub fn build(footprint: &Footprint, n_rays: usize, resolution: f64) -> Result<Self> {
        footprint.validate()?;
        check_rays(n_rays)?;
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::config("resolution must be positive and finite"));
        }
        let rect = footprint.safety_rect();
        let points = phase_points(footprint);
        let mut samples = Vec::new();
        for i in 0..8 {
            let (p, q) = (points[i], points[(i + 1) % 8]);
            let len = p.distance(q);
            let n = ((len / resolution).ceil() as usize).max(1);
            samples.extend((0..n).map(|k| p + (q - p) * (k as f64 / n as f64)));
        }

        let mut selected: Vec<(usize, f64)> = Vec::with_capacity(samples.len());
        for s in samples {
            let idx = nearest_ray(s.angle(), n_rays);
            let range = rect.boundary_distance(ray_angle(idx, n_rays));
            match selected.iter_mut().find(|(i, _)| *i == idx) {
                Some(entry) => entry.1 = entry.1.max(range),
                None => selected.push((idx, range)),
            }
        }
        selected.sort_by_key(|(i, _)| *i);
        let phase_boundaries = points.map(|p| wrap_two_pi(p.angle()));
        Self::assemble(Representation::Sr, n_rays, selected, resolution, phase_boundaries)
    }

    /// Fixed-interval selection of `count` rays with one constant range that
    /// covers only the robot width (half width plus margin).
    pub fn build_fifr(footprint: &Footprint, n_rays: usize, count: usize) -> Result<Self> {
        footprint.validate()?;
        let range = footprint.width / 2.0 + footprint.safety_margin;
        let selected = fixed_interval(n_rays, count)?
            .into_iter()
            .map(|i| (i, range))
            .collect();
        let phase_boundaries = phase_points(footprint).map(|p| wrap_two_pi(p.angle()));
        Self::assemble(Representation::Fifr, n_rays, selected, 0.0, phase_boundaries)
    }

    /// Fixed-interval selection of `count` rays, each with its exact
    /// rectangle-boundary range.
    pub fn build_firect(footprint: &Footprint, n_rays: usize, count: usize) -> Result<Self> {
        footprint.validate()?;
        let rect = footprint.safety_rect();
        let selected = fixed_interval(n_rays, count)?
            .into_iter()
            .map(|i| (i, rect.boundary_distance(ray_angle(i, n_rays))))
            .collect();
        let phase_boundaries = phase_points(footprint).map(|p| wrap_two_pi(p.angle()));
        Self::assemble(Representation::Firect, n_rays, selected, 0.0, phase_boundaries)
    }

    fn assemble(
        representation: Representation,
        n_rays: usize,
        selected: Vec<(usize, f64)>,
        resolution: f64,
        phase_boundaries: [f64; 8],
    ) -> Result<Self> {
        let indices: Vec<usize> = selected.iter().map(|(i, _)| *i).collect();
        let ranges = selected.iter().map(|(_, r)| *r).collect();
        let angles = indices.iter().map(|&i| ray_angle(i, n_rays)).collect();
        let position = |angle: f64| -> usize {
            let target = nearest_ray(angle, n_rays);
            // Closest selected ray by circular index distance.
            (0..indices.len())
                .min_by_key(|&p| {
                    let d = indices[p].abs_diff(target);
                    d.min(n_rays - d)
                })
                .expect("table is never empty")
        };
        Ok(Self {
            representation,
            n_rays,
            forward: position(0.0),
            left: position(FRAC_PI_2),
            right: position(3.0 * FRAC_PI_2),
            indices,
            ranges,
            angles,
            resolution,
            phase_boundaries,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn check_scan(&self, raw_scans: &[f64]) -> Result<()> {
        if raw_scans.len() != self.n_rays {
            return Err(Error::Dimension {
                expected: self.n_rays,
                got: raw_scans.len(),
            });
        }
        Ok(())
    }

    /// Picks the selected rays out of a full raw scan.
    pub fn observe(&self, raw_scans: &[f64]) -> Result<Observation> {
        self.check_scan(raw_scans)?;
        Ok(Observation {
            v_obs: self.indices.iter().map(|&i| raw_scans[i]).collect(),
            extras: Vec::new(),
        })
    }

    pub fn detect_collision(&self, raw_scans: &[f64]) -> Result<bool> {
        self.check_scan(raw_scans)?;
        Ok(self
            .indices
            .iter()
            .zip(&self.ranges)
            .any(|(&i, &safe)| raw_scans[i] <= safe))
    }

    /// Collision test on an already selected observation vector.
    pub fn collides(&self, v_obs: &[f64]) -> bool {
        v_obs.iter().zip(&self.ranges).any(|(obs, safe)| obs <= safe)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

fn fixed_interval(n_rays: usize, count: usize) -> Result<Vec<usize>> {
    check_rays(n_rays)?;
    if count == 0 || count > n_rays {
        return Err(Error::config(format!(
            "fixed-interval count must be in 1..={n_rays}, got {count}"
        )));
    }
    let mut out: Vec<usize> = (0..count)
        .map(|k| nearest_ray(2.0 * PI * k as f64 / count as f64, n_rays))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
