//! The bundled tracks, defined by their centerlines.
//!
//! `tracks/*.json` at the repository root are generated from these builders
//! (`cargo run -p narrowspace --example gen_tracks`); a test keeps them in sync.

use crate::error::Result;
use crate::geometry::Vec2;
use crate::world::{CorridorBuilder, TrackWorld};

/// Names of every bundled world, in catalog order.
pub const NAMES: &[&str] = &[
    "corridor", "turn90", "big_track", "track1", "track2", "track3", "track4", "track5", "track6",
    "track7", "track8",
];

/// The eight evaluation tracks. Tracks 1-3 are sections of the big track.
pub const EVAL_TRACKS: &[&str] = &[
    "track1", "track2", "track3", "track4", "track5", "track6", "track7", "track8",
];

pub fn build(name: &str) -> Option<Result<TrackWorld>> {
    let origin = Vec2::ZERO;
    let world = match name {
        "corridor" => CorridorBuilder::new(origin, 0.0, 1.2)
            .forward(10.0)
            .build(name, "straight corridor, 10 m long and 1.2 m wide"),
        "turn90" => CorridorBuilder::new(origin, 0.0, 1.5)
            .forward(5.0)
            .turn(90.0)
            .forward(5.0)
            .build(name, "single 90-degree left turn, 1.5 m wide"),
        "big_track" => big_track(origin).build(
            name,
            "training track: 45-degree bends, 90-degree corners, a 180-degree switchback \
             and a 1.0 m narrow section (combines tracks 1-3)",
        ),
        "track1" => bends_45(CorridorBuilder::new(origin, 0.0, 1.6))
            .forward(2.0)
            .build(name, "45-degree S-bends, 1.6 m wide"),
        "track2" => corners_90(CorridorBuilder::new(origin, 0.0, 1.5))
            .forward(2.0)
            .build(name, "90-degree corners, 1.5 m wide"),
        "track3" => switchback(CorridorBuilder::new(origin, 0.0, 1.8).forward(2.0))
            .build(name, "180-degree switchback, 1.8 m wide"),
        "track4" => CorridorBuilder::new(origin, 0.0, 1.4)
            .forward(2.5)
            .width(1.1)
            .turn(8.0)
            .forward(1.2)
            .width(1.7)
            .turn(-14.0)
            .forward(1.4)
            .width(1.25)
            .turn(10.0)
            .forward(1.1)
            .width(1.8)
            .turn(-9.0)
            .forward(1.5)
            .width(1.15)
            .turn(12.0)
            .forward(1.3)
            .width(1.6)
            .turn(-7.0)
            .forward(1.6)
            .width(1.3)
            .forward(1.5)
            .build(name, "uneven walls, width varying between 1.1 m and 1.8 m"),
        "track5" => CorridorBuilder::new(origin, 0.0, 1.3)
            .forward(3.0)
            .width(1.0)
            .turn(20.0)
            .forward(2.0)
            .turn(-20.0)
            .forward(3.0)
            .width(1.3)
            .forward(1.5)
            .build(name, "narrow passage of 1.0 m with shallow kinks"),
        "track6" => CorridorBuilder::new(origin, 0.0, 1.5)
            .forward(3.5)
            .turn(90.0)
            .forward(3.0)
            .turn(-45.0)
            .forward(2.5)
            .turn(-45.0)
            .forward(3.0)
            .turn(-90.0)
            .forward(3.0)
            .build(name, "mixed 90- and 45-degree corners, 1.5 m wide"),
        "track7" => CorridorBuilder::new(origin, 0.0, 1.6)
            .forward(3.0)
            .turn(90.0)
            .forward(2.6)
            .turn(-90.0)
            .forward(2.6)
            .turn(-90.0)
            .forward(2.6)
            .turn(90.0)
            .forward(2.6)
            .turn(90.0)
            .forward(2.6)
            .build(name, "continuous 90-degree turns, 1.6 m wide"),
        "track8" => CorridorBuilder::new(origin, 0.0, 1.4)
            .forward(2.0)
            .arc(2.5, 60.0, 10)
            .arc(2.5, -120.0, 20)
            .arc(2.5, 60.0, 10)
            .forward(2.0)
            .build(name, "curvy walls from constant-radius arcs, 1.4 m wide"),
        _ => return None,
    };
    Some(world)
}

pub fn all() -> Result<Vec<TrackWorld>> {
    NAMES
        .iter()
        .map(|n| build(n).expect("catalog name resolves"))
        .collect()
}

fn bends_45(b: CorridorBuilder) -> CorridorBuilder {
    b.forward(3.0)
        .turn(45.0)
        .forward(2.5)
        .turn(-45.0)
        .forward(2.0)
        .turn(-45.0)
        .forward(2.5)
        .turn(45.0)
}

fn corners_90(b: CorridorBuilder) -> CorridorBuilder {
    b.forward(3.5)
        .turn(90.0)
        .forward(3.0)
        .turn(-90.0)
        .forward(3.0)
        .turn(-90.0)
        .forward(3.0)
        .turn(90.0)
}

fn switchback(b: CorridorBuilder) -> CorridorBuilder {
    b.forward(3.0)
        .turn(90.0)
        .forward(2.4)
        .turn(90.0)
        .forward(5.0)
}

fn big_track(origin: Vec2) -> CorridorBuilder {
    let b = bends_45(CorridorBuilder::new(origin, 0.0, 1.6)).forward(1.5).width(1.5);
    let b = corners_90(b).forward(1.0).width(1.8);
    // Switchback folds back under the earlier sections, then the narrow
    // section leaves southwards into open space.
    b.forward(3.0)
        .turn(-90.0)
        .forward(2.4)
        .turn(-90.0)
        .forward(5.0)
        .turn(90.0)
        .width(1.0)
        .forward(2.0)
        .width(1.4)
        .forward(2.0)
}
