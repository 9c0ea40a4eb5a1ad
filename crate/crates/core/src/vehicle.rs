//! Kinematic bicycle model for a front-steered (Ackermann) robot.

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose2D};

/// Speed bound, m/s.
pub const V_MAX: f64 = 0.6;
/// Front steering angle bound, rad.
pub const W_MAX: f64 = 0.6;

/// Commanded linear speed `v` (m/s) and front steering angle `w` (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    /// Clamps both components into their bounds; NaN becomes zero.
    pub fn clamped(self) -> Self {
        let clamp = |x: f64, b: f64| if x.is_nan() { 0.0 } else { x.clamp(-b, b) };
        Self {
            v: clamp(self.v, V_MAX),
            w: clamp(self.w, W_MAX),
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v, self.w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AckermannState {
    pub pose: Pose2D,
    pub last_action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub substeps: usize,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 0.6,
            substeps: 10,
        }
    }
}

/// Advances the state by `dt` under a constant action.
///
/// Each of the `substeps` slices advances the heading by `v/L tan(w) h` and
/// the position along the mid-slice heading. The mid-slice rule is
/// time-symmetric, so driving back with `-v` retraces the path, and it is
/// exact for straight motion.
pub fn step_kinematics(
    state: &AckermannState,
    action: Action,
    dt: f64,
    params: &VehicleParams,
) -> AckermannState {
    let action = action.clamped();
    let substeps = params.substeps.max(1);
    let h = dt / substeps as f64;
    let yaw_rate = action.v / params.wheelbase * action.w.tan();
    let (mut x, mut y, mut theta) = (state.pose.x, state.pose.y, state.pose.theta);
    for _ in 0..substeps {
        let dtheta = yaw_rate * h;
        let mid = theta + 0.5 * dtheta;
        x += action.v * h * mid.cos();
        y += action.v * h * mid.sin();
        theta = normalize_angle(theta + dtheta);
    }
    AckermannState {
        pose: Pose2D::new(x, y, theta),
        last_action: action,
    }
}

/// Tightest turning radius of the rear axle path: `L / tan(w_max)`.
pub fn min_turning_radius(wheelbase: f64, w_max: f64) -> f64 {
    wheelbase / w_max.tan()
}
