//! Planar kinematic vehicle model and episode lifecycle.
//!
//! The vehicle moves at constant surge speed; the selected rudder angle maps
//! linearly to a yaw rate. Heading is integrated first, then position is
//! advanced along the new heading, so every step displaces the vehicle by
//! exactly `speed * dt`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{GuidanceObservation, Point};

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = (angle + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs.
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Course angle, radians in `[-pi, pi)`.
    pub heading: f64,
    /// Surge speed in m/s, constant within an episode.
    pub speed: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        VehicleState {
            x,
            y,
            heading: wrap_angle(heading),
            speed,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Discrete rudder settings available to the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionSpaceRepr", into = "ActionSpaceRepr")]
pub struct ActionSpace {
    rudder_angles: Vec<f64>,
    yaw_gain: f64,
}

#[derive(Serialize, Deserialize)]
struct ActionSpaceRepr {
    rudder_angles_deg: Vec<f64>,
    yaw_gain: f64,
}

impl TryFrom<ActionSpaceRepr> for ActionSpace {
    type Error = Error;

    fn try_from(repr: ActionSpaceRepr) -> Result<Self> {
        let radians = repr.rudder_angles_deg.iter().map(|d| d.to_radians()).collect();
        ActionSpace::new(radians, repr.yaw_gain)
    }
}

impl From<ActionSpace> for ActionSpaceRepr {
    fn from(space: ActionSpace) -> Self {
        ActionSpaceRepr {
            rudder_angles_deg: space.rudder_angles.iter().map(|r| r.to_degrees()).collect(),
            yaw_gain: space.yaw_gain,
        }
    }
}

impl Default for ActionSpace {
    fn default() -> Self {
        let radians = [-30.0f64, -15.0, 0.0, 15.0, 30.0]
            .iter()
            .map(|d| d.to_radians())
            .collect();
        ActionSpace {
            rudder_angles: radians,
            yaw_gain: 0.5,
        }
    }
}

impl ActionSpace {
    /// Rudder angles must be non-empty, strictly increasing, symmetric about
    /// zero and contain a neutral setting.
    pub fn new(rudder_angles: Vec<f64>, yaw_gain: f64) -> Result<Self> {
        if rudder_angles.is_empty() {
            return Err(Error::InvalidConfig("action space is empty".into()));
        }
        if rudder_angles.iter().any(|r| !r.is_finite()) || !yaw_gain.is_finite() {
            return Err(Error::NonFinite("action space"));
        }
        if rudder_angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "rudder angles must be strictly increasing".into(),
            ));
        }
        let n = rudder_angles.len();
        let symmetric = (0..n).all(|i| (rudder_angles[i] + rudder_angles[n - 1 - i]).abs() < 1e-12);
        if !symmetric {
            return Err(Error::InvalidConfig(
                "rudder angles must be symmetric about zero".into(),
            ));
        }
        if !rudder_angles.contains(&0.0) {
            return Err(Error::InvalidConfig("no neutral rudder action".into()));
        }
        if yaw_gain <= 0.0 {
            return Err(Error::InvalidConfig("yaw_gain must be positive".into()));
        }
        Ok(ActionSpace {
            rudder_angles,
            yaw_gain,
        })
    }

    pub fn len(&self) -> usize {
        self.rudder_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rudder_angles.is_empty()
    }

    pub fn rudder_angles(&self) -> &[f64] {
        &self.rudder_angles
    }

    pub fn yaw_gain(&self) -> f64 {
        self.yaw_gain
    }

    pub fn neutral_index(&self) -> usize {
        self.rudder_angles
            .iter()
            .position(|&r| r == 0.0)
            .expect("validated on construction")
    }

    pub fn rudder(&self, index: usize) -> Result<f64> {
        self.rudder_angles
            .get(index)
            .copied()
            .ok_or(Error::ActionOutOfRange {
                index,
                len: self.rudder_angles.len(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub abort_distance: f64,
    /// Half-width of the uniform initial cross-track offset, meters.
    pub initial_offset_range: f64,
    /// Half-width of the uniform initial heading, radians.
    pub initial_heading_range: f64,
    pub speed: f64,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            dt: 1.0,
            max_steps: 200,
            abort_distance: 50.0,
            initial_offset_range: 10.0,
            initial_heading_range: PI / 6.0,
            speed: 1.0,
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.dt,
            self.abort_distance,
            self.initial_offset_range,
            self.initial_heading_range,
            self.speed,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("episode config"));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        if self.abort_distance <= 0.0 {
            return Err(Error::InvalidConfig("abort_distance must be positive".into()));
        }
        if self.speed <= 0.0 {
            return Err(Error::InvalidConfig("speed must be positive".into()));
        }
        if self.initial_offset_range < 0.0 || self.initial_heading_range < 0.0 {
            return Err(Error::InvalidConfig(
                "initial ranges must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Advances the vehicle one control period under the selected rudder action.
pub fn step(state: &VehicleState, action_index: usize, actions: &ActionSpace, dt: f64) -> Result<VehicleState> {
    let rudder = actions.rudder(action_index)?;
    let heading = if rudder == 0.0 {
        state.heading
    } else {
        wrap_angle(state.heading + actions.yaw_gain * rudder * dt)
    };
    let distance = state.speed * dt;
    Ok(VehicleState {
        x: state.x + distance * heading.cos(),
        y: state.y + distance * heading.sin(),
        heading,
        speed: state.speed,
    })
}

/// Draws an initial state at the path start with a random vertical offset and
/// heading.
pub fn reset<R: Rng + ?Sized>(config: &EpisodeConfig, path_start: Point, rng: &mut R) -> VehicleState {
    let offset = uniform_symmetric(rng, config.initial_offset_range);
    let heading = uniform_symmetric(rng, config.initial_heading_range);
    VehicleState::new(path_start.x, path_start.y + offset, heading, config.speed)
}

fn uniform_symmetric<R: Rng + ?Sized>(rng: &mut R, half_width: f64) -> f64 {
    // Always consume one draw so the stream layout does not depend on ranges.
    let u: f64 = rng.gen();
    if half_width == 0.0 {
        0.0
    } else {
        (2.0 * u - 1.0) * half_width
    }
}

/// `step_count` is the number of steps already taken in the episode.
pub fn is_terminal(obs: &GuidanceObservation, step_count: usize, config: &EpisodeConfig) -> bool {
    step_count >= config.max_steps || obs.d.abs() > config.abort_distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::Task;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs_with_d(d: f64) -> GuidanceObservation {
        GuidanceObservation {
            d,
            c: 0.0,
            k: 0.0,
            c_d: 0.0,
            task: Task::Line,
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!(wrap_angle(-1e-18) < PI);
    }

    #[test]
    fn neutral_rudder_goes_straight() {
        let actions = ActionSpace::default();
        let s = VehicleState::new(0.0, 0.0, 0.0, 1.0);
        let next = step(&s, actions.neutral_index(), &actions, 1.0).unwrap();
        assert_eq!((next.x, next.y, next.heading), (1.0, 0.0, 0.0));
    }

    #[test]
    fn axis_aligned_motion() {
        let actions = ActionSpace::default();
        let s = VehicleState::new(0.0, 0.0, PI / 2.0, 2.0);
        let next = step(&s, actions.neutral_index(), &actions, 1.0).unwrap();
        assert!(next.x.abs() < 1e-12);
        assert!((next.y - 2.0).abs() < 1e-12);
        assert_eq!(next.heading, PI / 2.0);
    }

    #[test]
    fn fifteen_degree_rudder() {
        let actions = ActionSpace::default();
        assert!((actions.rudder(3).unwrap() - 0.2618).abs() < 1e-4);
        let s = VehicleState::new(0.0, 0.0, 0.0, 1.0);
        let next = step(&s, 3, &actions, 1.0).unwrap();
        assert!((next.heading - 0.1309).abs() < 1e-4);
        assert!((next.x - 0.99144).abs() < 1e-5);
        // sin(0.1309) = 0.130526 to six places.
        assert!((next.y - 0.130526).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_action_rejected() {
        let actions = ActionSpace::default();
        let s = VehicleState::new(0.0, 0.0, 0.0, 1.0);
        let err = step(&s, 5, &actions, 1.0).unwrap_err();
        assert!(matches!(err, Error::ActionOutOfRange { index: 5, len: 5 }));
    }

    #[test]
    fn action_space_validation() {
        assert!(ActionSpace::new(vec![], 0.5).is_err());
        assert!(ActionSpace::new(vec![-0.1, 0.0, 0.2], 0.5).is_err());
        assert!(ActionSpace::new(vec![0.1, 0.0, -0.1], 0.5).is_err());
        assert!(ActionSpace::new(vec![-0.1, 0.1], 0.5).is_err());
        assert!(ActionSpace::new(vec![0.0], 0.5).is_ok());
        assert!(ActionSpace::new(vec![-0.1, 0.0, 0.1], 0.0).is_err());
    }

    #[test]
    fn action_space_json_uses_degrees() {
        let json = serde_json::to_string(&ActionSpace::default()).unwrap();
        let back: ActionSpace = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), 5);
        assert!(serde_json::from_str::<ActionSpace>(r#"{"rudder_angles_deg":[1,2],"yaw_gain":0.5}"#).is_err());
    }

    #[test]
    fn reset_on_path_start() {
        let config = EpisodeConfig {
            initial_offset_range: 0.0,
            initial_heading_range: 0.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = reset(&config, Point::new(0.0, 0.0), &mut rng);
        assert_eq!((s.x, s.y, s.heading), (0.0, 0.0, 0.0));
    }

    #[test]
    fn reset_is_deterministic() {
        let config = EpisodeConfig::default();
        let a = reset(&config, Point::new(0.0, 0.0), &mut ChaCha8Rng::seed_from_u64(42));
        let b = reset(&config, Point::new(0.0, 0.0), &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn reset_offsets_are_uniform() {
        let config = EpisodeConfig {
            initial_offset_range: 5.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let offsets: Vec<f64> = (0..n)
            .map(|_| reset(&config, Point::new(0.0, 0.0), &mut rng).y)
            .collect();
        assert!(offsets.iter().all(|o| (-5.0..=5.0).contains(o)));
        let mean = offsets.iter().sum::<f64>() / n as f64;
        // Uniform on [-5, 5] has standard deviation 10 / sqrt(12).
        let sigma_mean = (10.0 / 12f64.sqrt()) / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_mean, "mean {mean}");
    }

    #[test]
    fn terminal_rule() {
        let config = EpisodeConfig::default();
        assert!(is_terminal(&obs_with_d(0.0), config.max_steps, &config));
        assert!(!is_terminal(&obs_with_d(0.0), 0, &config));
        assert!(is_terminal(&obs_with_d(config.abort_distance + 0.1), 1, &config));
        assert!(is_terminal(&obs_with_d(-config.abort_distance - 0.1), 1, &config));
        assert!(!is_terminal(&obs_with_d(config.abort_distance), 1, &config));
    }

    #[test]
    fn episode_config_validation() {
        assert!(EpisodeConfig::default().validate().is_ok());
        let bad = EpisodeConfig { dt: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EpisodeConfig { max_steps: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EpisodeConfig { abort_distance: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn step_invariants(
            x in -100.0..100.0f64,
            y in -100.0..100.0f64,
            heading in -10.0..10.0f64,
            speed in 0.1..5.0f64,
            dt in 0.01..3.0f64,
            actions in proptest::collection::vec(0usize..5, 1..50),
        ) {
            let space = ActionSpace::default();
            let mut s = VehicleState::new(x, y, heading, speed);
            for a in actions {
                let next = step(&s, a, &space, dt).unwrap();
                let moved = ((next.x - s.x).powi(2) + (next.y - s.y).powi(2)).sqrt();
                prop_assert!((moved - speed * dt).abs() < 1e-12);
                prop_assert!(next.heading >= -PI && next.heading < PI);
                if a == space.neutral_index() {
                    prop_assert_eq!(next.heading, s.heading);
                }
                prop_assert_eq!(step(&s, a, &space, dt).unwrap(), next);
                s = next;
            }
        }
    }
}
