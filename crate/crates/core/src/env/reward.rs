//! FOMT reward components and the waypoint-guided contrast reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Forward + obstacle + middle + time.
    Fomt,
    /// FOMT without the middle term.
    Fot,
    /// FOMT without the obstacle and middle terms.
    Ft,
    /// Waypoint-guided distance progress.
    Wg,
}

impl RewardMode {
    pub fn label(self) -> &'static str {
        match self {
            RewardMode::Fomt => "fomt",
            RewardMode::Fot => "fot",
            RewardMode::Ft => "ft",
            RewardMode::Wg => "wg",
        }
    }
}

impl std::str::FromStr for RewardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fomt" => Ok(RewardMode::Fomt),
            "fot" => Ok(RewardMode::Fot),
            "ft" => Ok(RewardMode::Ft),
            "wg" => Ok(RewardMode::Wg),
            other => Err(Error::config(format!("unknown reward mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub mode: RewardMode,
    /// Collision reward.
    pub r_collision: f64,
    /// Open-space reward.
    pub r_open_space: f64,
    /// Goal reward (waypoint-guided mode).
    pub r_goal: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Waypoint progress weight.
    pub c5: f64,
    pub n_f: usize,
    pub n_o: usize,
    pub n_m: usize,
    /// Obstacle-gap discount.
    pub alpha1: f64,
    /// Forward-neighbor discount.
    pub alpha2: f64,
    /// Middle-pair discount.
    pub alpha3: f64,
    /// Per-step time reward.
    pub alpha4: f64,
    /// Lower clamp applied to gaps before the log.
    pub gap_floor: f64,
    /// Waypoint capture radius, meters.
    pub capture_radius: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            mode: RewardMode::Fomt,
            r_collision: -50.0,
            r_open_space: 50.0,
            r_goal: 50.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 100.0,
            n_f: 5,
            n_o: 12,
            n_m: 5,
            alpha1: 0.9,
            alpha2: 0.9,
            alpha3: 0.9,
            alpha4: -1.0,
            gap_floor: 1e-3,
            capture_radius: 0.3,
        }
    }
}

impl RewardParams {
    pub fn with_mode(mode: RewardMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_floor > 0.0) {
            return Err(Error::config("gap_floor must be positive"));
        }
        for a in [self.alpha1, self.alpha2, self.alpha3] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::config("discount factors must lie in (0, 1)"));
            }
        }
        if !(self.capture_radius > 0.0) {
            return Err(Error::config("capture radius must be positive"));
        }
        Ok(())
    }

    /// (c1, c2, c3, c4) after the mode's ablation.
    pub fn effective_weights(&self) -> [f64; 4] {
        match self.mode {
            RewardMode::Fomt | RewardMode::Wg => [self.c1, self.c2, self.c3, self.c4],
            RewardMode::Fot => [self.c1, self.c2, 0.0, self.c4],
            RewardMode::Ft => [self.c1, 0.0, 0.0, self.c4],
        }
    }
}

/// Raw (unweighted) FOMT components of one running step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub f: f64,
    pub o: f64,
    pub m: f64,
    pub t: f64,
}

impl RewardComponents {
    pub fn combine(&self, weights: [f64; 4]) -> f64 {
        weights[0] * self.f + weights[1] * self.o + weights[2] * self.m + weights[3] * self.t
    }
}

fn wrap(i: isize, len: usize) -> usize {
    i.rem_euclid(len as isize) as usize
}

/// Forward term: `sum_k alpha2^k * v * (obs[f+k] + obs[f-k])` for k in 0..=n_f,
/// indices wrapping around the table. The k = 0 term counts `obs[f]` twice.
pub fn reward_forward(v_obs: &[f64], forward: usize, v: f64, params: &RewardParams) -> f64 {
    let len = v_obs.len();
    let f = forward as isize;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for k in 0..=params.n_f as isize {
        sum += weight * v * (v_obs[wrap(f + k, len)] + v_obs[wrap(f - k, len)]);
        weight *= params.alpha2;
    }
    sum
}

/// Obstacle term: log of the smallest gaps between each observed range and
/// its safe range, discounted in ascending gap order.
pub fn reward_obstacle(v_obs: &[f64], safe_ranges: &[f64], params: &RewardParams) -> f64 {
    let mut gaps: Vec<f64> = v_obs
        .iter()
        .zip(safe_ranges)
        .map(|(o, s)| o - s)
        .collect();
    gaps.sort_by(f64::total_cmp);
    let mut weight = 1.0;
    let mut sum = 0.0;
    for g in gaps.iter().take(params.n_o + 1) {
        sum += weight * g.max(params.gap_floor).ln();
        weight *= params.alpha1;
    }
    sum
}

/// Middle term: `-sum_k alpha3^k |obs[right-k] - obs[left+k]|` for k in 0..=n_m.
pub fn reward_middle(v_obs: &[f64], left: usize, right: usize, params: &RewardParams) -> f64 {
    let len = v_obs.len();
    let mut weight = 1.0;
    let mut sum = 0.0;
    for k in 0..=params.n_m as isize {
        let r = v_obs[wrap(right as isize - k, len)];
        let l = v_obs[wrap(left as isize + k, len)];
        sum += weight * (r - l).abs();
        weight *= params.alpha3;
    }
    -sum
}

pub fn reward_time(params: &RewardParams) -> f64 {
    params.alpha4
}

/// Waypoint progress: `c5 * (previous distance - current distance)`.
pub fn reward_waypoint(prev_dist: f64, dist: f64, params: &RewardParams) -> f64 {
    params.c5 * (prev_dist - dist)
}

/// All four components for one observation.
pub fn fomt_components(
    v_obs: &[f64],
    safe_ranges: &[f64],
    positions: (usize, usize, usize),
    v: f64,
    params: &RewardParams,
) -> RewardComponents {
    let (forward, left, right) = positions;
    RewardComponents {
        f: reward_forward(v_obs, forward, v, params),
        o: reward_obstacle(v_obs, safe_ranges, params),
        m: reward_middle(v_obs, left, right, params),
        t: reward_time(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geometric(a: f64, n: usize) -> f64 {
        (0..=n).map(|k| a.powi(k as i32)).sum()
    }

    #[test]
    fn forward_values() {
        let p = RewardParams::default();
        let obs = vec![6.0; 32];
        assert_eq!(reward_forward(&obs, 0, 0.0, &p), 0.0);
        let r = reward_forward(&obs, 0, 0.6, &p);
        assert_abs_diff_eq!(geometric(0.9, 5), 4.68559, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.6 * 12.0 * 4.68559, epsilon = 1e-9);
        assert_abs_diff_eq!(r, 33.736248, epsilon = 1e-6);
        assert_abs_diff_eq!(reward_forward(&obs, 0, -0.6, &p), -r, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_values() {
        let p = RewardParams::default();
        let safe = vec![0.3; 32];
        let ones: Vec<f64> = safe.iter().map(|s| s + 1.0).collect();
        assert_abs_diff_eq!(reward_obstacle(&ones, &safe, &p), 0.0, epsilon = 1e-12);
        let e: Vec<f64> = safe.iter().map(|s| s + std::f64::consts::E).collect();
        assert_abs_diff_eq!(reward_obstacle(&e, &safe, &p), 7.45813, epsilon = 1e-5);
        assert_abs_diff_eq!(reward_obstacle(&e, &safe, &p), geometric(0.9, 12), epsilon = 1e-12);
        let mut close = ones.clone();
        close[7] = 0.31;
        assert_abs_diff_eq!(reward_obstacle(&close, &safe, &p), 0.01f64.ln(), epsilon = 1e-12);
        // Gaps at or below zero clamp to the floor.
        close[7] = 0.2;
        assert_abs_diff_eq!(reward_obstacle(&close, &safe, &p), 1e-3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn middle_values() {
        let p = RewardParams::default();
        let centered = vec![1.0; 32];
        assert_eq!(reward_middle(&centered, 6, 26, &p), 0.0);
        let mut obs = vec![1.0; 32];
        for k in 0..=5 {
            obs[6 + k] = 1.5;
        }
        assert_abs_diff_eq!(reward_middle(&obs, 6, 26, &p), -0.5 * 4.68559, epsilon = 1e-9);
        // Swap sides.
        let mut swapped = vec![1.0; 32];
        for k in 0..=5 {
            swapped[26 - k] = 1.5;
        }
        assert_abs_diff_eq!(
            reward_middle(&swapped, 6, 26, &p),
            reward_middle(&obs, 6, 26, &p),
            epsilon = 1e-15
        );
    }

    #[test]
    fn time_and_waypoint() {
        let mut p = RewardParams::default();
        assert_eq!(reward_time(&p), -1.0);
        assert_eq!((0..100).map(|_| reward_time(&p)).sum::<f64>(), -100.0);
        p.alpha4 = 0.0;
        assert_eq!(reward_time(&p), 0.0);
        assert_abs_diff_eq!(reward_waypoint(2.0, 1.95, &p), 5.0, epsilon = 1e-12);
        assert_eq!(reward_waypoint(2.0, 2.0, &p), 0.0);
    }

    #[test]
    fn mode_weights() {
        let p = RewardParams::with_mode(RewardMode::Ft);
        assert_eq!(p.effective_weights(), [1.0, 0.0, 0.0, 1.0]);
        let p = RewardParams::with_mode(RewardMode::Fot);
        assert_eq!(p.effective_weights(), [1.0, 1.0, 0.0, 1.0]);
        assert_eq!("FOMT".parse::<RewardMode>().unwrap(), RewardMode::Fomt);
        assert!("xyz".parse::<RewardMode>().is_err());
    }
}
