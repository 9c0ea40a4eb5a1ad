//! Narrow-space self-exploration for rectangular, Ackermann-steering robots.
//!
//! The crate bundles everything needed to train and evaluate exploration
//! policies without maps or waypoints:
//!
//! - [`geometry`] and [`world`]: wall-segment track worlds, ray casting and an
//!   exact footprint overlap test used as ground truth.
//! - [`safety_region`]: the rectangular safety-region scan selection and its
//!   collision test, plus the fixed-interval FIFR / FIRect baselines.
//! - [`vehicle`]: kinematic bicycle model.
//! - [`env`]: the episodic environment and the FOMT reward engine with its
//!   ablations and the waypoint-guided contrast reward.
//! - [`agents`]: DDPG, DQN and behavior cloning on small dense networks.
//! - [`eval`]: evaluation rollouts, the collision-detection benchmark and
//!   report files.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod safety_region;
pub mod vehicle;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Footprint, Pose2D, Segment, Vec2};
pub use safety_region::{Observation, SafetyRegionTable};
pub use vehicle::{Action, AckermannState};
pub use world::TrackWorld;
