//! Track worlds: static wall segments, a spawn pose and the open-space exit.
//!
//! Worlds are stored as JSON documents whose walls are polylines:
//!
//! ```json
//! {
//!   "name": "corridor",
//!   "description": "10 m straight corridor, 1.2 m wide",
//!   "walls": [[[0.0, 0.6], [10.0, 0.6]], [[0.0, -0.6], [10.0, -0.6]]],
//!   "spawn": [0.8, 0.0, 0.0],
//!   "exit_band": [[10.0, 0.6], [10.0, -0.6]],
//!   "waypoints": [[2.3, 0.0], [3.8, 0.0]]
//! }
//! ```
//!
//! `waypoints` and `open_space_threshold` are optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{oracle_collides, Footprint, Pose2D, Segment, Vec2};

pub mod catalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub walls: Vec<Vec<Vec2>>,
    pub spawn: Pose2D,
    pub exit_band: [Vec2; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_space_threshold: Option<f64>,
}

/// An immutable, validated track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackWorld {
    pub name: String,
    pub description: String,
    polylines: Vec<Vec<Vec2>>,
    walls: Vec<Segment>,
    pub spawn: Pose2D,
    pub exit_band: Segment,
    pub waypoints: Vec<Vec2>,
    pub open_space_threshold: Option<f64>,
}

impl TrackWorld {
    pub fn from_file(file: TrackFile) -> Result<Self> {
        let mut walls = Vec::new();
        for (i, line) in file.walls.iter().enumerate() {
            if line.len() < 2 {
                return Err(Error::config(format!(
                    "world '{}': wall polyline {i} needs at least two points",
                    file.name
                )));
            }
            for pair in line.windows(2) {
                let seg = Segment::new(pair[0], pair[1]);
                if !(seg.a.x.is_finite() && seg.a.y.is_finite() && seg.b.x.is_finite() && seg.b.y.is_finite()) {
                    return Err(Error::config(format!("world '{}': non-finite wall point", file.name)));
                }
                if seg.length() <= 0.0 {
                    return Err(Error::config(format!(
                        "world '{}': zero-length wall segment in polyline {i}",
                        file.name
                    )));
                }
                walls.push(seg);
            }
        }
        if walls.is_empty() {
            return Err(Error::config(format!("world '{}' has no walls", file.name)));
        }
        if let Some(t) = file.open_space_threshold {
            if !(t > 0.0) {
                return Err(Error::config("open_space_threshold must be positive"));
            }
        }
        Ok(Self {
            name: file.name,
            description: file.description,
            polylines: file.walls,
            walls,
            spawn: file.spawn,
            exit_band: Segment::new(file.exit_band[0], file.exit_band[1]),
            waypoints: file.waypoints,
            open_space_threshold: file.open_space_threshold,
        })
    }

    pub fn to_file(&self) -> TrackFile {
        TrackFile {
            name: self.name.clone(),
            description: self.description.clone(),
            walls: self.polylines.clone(),
            spawn: self.spawn,
            exit_band: [self.exit_band.a, self.exit_band.b],
            waypoints: self.waypoints.clone(),
            open_space_threshold: self.open_space_threshold,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("track file serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_pretty() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn walls(&self) -> &[Segment] {
        &self.walls
    }

    pub fn polylines(&self) -> &[Vec<Vec2>] {
        &self.polylines
    }

    /// Checks that the spawn pose is collision-free for `footprint`.
    pub fn validate_spawn(&self, footprint: &Footprint) -> Result<()> {
        if oracle_collides(&self.walls, &self.spawn, footprint) {
            return Err(Error::config(format!(
                "world '{}': spawn pose overlaps a wall",
                self.name
            )));
        }
        Ok(())
    }

    /// Axis-aligned bounds of all walls: (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in self.walls.iter().flat_map(|s| [s.a, s.b]) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    /// True when the straight segment between two points crosses no wall.
    pub fn line_of_sight(&self, from: Vec2, to: Vec2) -> bool {
        !self
            .walls
            .iter()
            .any(|w| crate::geometry::segments_intersect(from, to, w.a, w.b))
    }
}

/// Builds a corridor track from a centerline: walls are the left and right
/// offsets of the centerline (mitered at the vertices), the start is capped
/// and the end opens into free space.
#[derive(Debug, Clone)]
pub struct CorridorBuilder {
    points: Vec<Vec2>,
    half_widths: Vec<f64>,
    heading: f64,
    width: f64,
    spawn_clearance: f64,
    waypoint_spacing: f64,
}

impl CorridorBuilder {
    pub fn new(start: Vec2, heading_deg: f64, width: f64) -> Self {
        Self {
            points: vec![start],
            half_widths: vec![width / 2.0],
            heading: heading_deg.to_radians(),
            width,
            spawn_clearance: 0.8,
            waypoint_spacing: 1.5,
        }
    }

    /// Width used for the next vertex onward.
    pub fn width(mut self, width: f64) -> Self {
        self.width = width;
        self
    }

    pub fn spawn_clearance(mut self, d: f64) -> Self {
        self.spawn_clearance = d;
        self
    }

    /// Rotates the running heading, counter-clockwise positive.
    pub fn turn(mut self, deg: f64) -> Self {
        self.heading += deg.to_radians();
        self
    }

    pub fn forward(mut self, length: f64) -> Self {
        let last = *self.points.last().expect("builder has a start point");
        self.points.push(last + Vec2::from_angle(self.heading) * length);
        self.half_widths.push(self.width / 2.0);
        self
    }

    /// Circular arc approximated by `segments` chords.
    pub fn arc(mut self, radius: f64, deg: f64, segments: usize) -> Self {
        let step = deg.to_radians() / segments as f64;
        let chord = 2.0 * radius * (step.abs() / 2.0).sin();
        for _ in 0..segments {
            self.heading += step / 2.0;
            self = self.forward(chord);
            self.heading += step / 2.0;
        }
        self
    }

    pub fn build(self, name: &str, description: &str) -> Result<TrackWorld> {
        let n = self.points.len();
        if n < 2 {
            return Err(Error::config("corridor needs at least one forward section"));
        }
        let dirs: Vec<Vec2> = self
            .points
            .windows(2)
            .map(|p| (p[1] - p[0]).normalized())
            .collect();
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let hw = self.half_widths[i];
            let offset = if i == 0 {
                dirs[0].perp() * hw
            } else if i == n - 1 {
                dirs[n - 2].perp() * hw
            } else {
                let n0 = dirs[i - 1].perp();
                let n1 = dirs[i].perp();
                let m = (n0 + n1).normalized();
                m * (hw / m.dot(n0))
            };
            left.push(self.points[i] + offset);
            right.push(self.points[i] - offset);
        }
        let start_dir = dirs[0];
        let end_dir = dirs[n - 2];
        let spawn_pos = self.points[0] + start_dir * self.spawn_clearance;
        let spawn = Pose2D::new(spawn_pos.x, spawn_pos.y, start_dir.angle());

        let waypoints = resample(&self.points, self.waypoint_spacing, self.spawn_clearance)
            .into_iter()
            .chain(std::iter::once(self.points[n - 1] + end_dir * 2.0))
            .collect();

        let walls = vec![vec![left[0], right[0]], left.clone(), right.clone()];
        TrackWorld::from_file(TrackFile {
            name: name.to_string(),
            description: description.to_string(),
            walls,
            spawn,
            exit_band: [left[n - 1], right[n - 1]],
            waypoints,
            open_space_threshold: None,
        })
    }
}

/// Points every `spacing` meters of arc length along a polyline, starting
/// `spacing + skip` from its start.
fn resample(points: &[Vec2], spacing: f64, skip: f64) -> Vec<Vec2> {
    let mut out = Vec::new();
    let mut next = skip + spacing;
    let mut travelled = 0.0;
    for pair in points.windows(2) {
        let len = pair[0].distance(pair[1]);
        while next <= travelled + len {
            let s = (next - travelled) / len;
            out.push(pair[0] + (pair[1] - pair[0]) * s);
            next += spacing;
        }
        travelled += len;
    }
    out
}
