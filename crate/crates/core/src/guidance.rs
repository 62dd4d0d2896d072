//! Target paths and line-of-sight style desired course.
//!
//! The intersection point `P` is where the vertical line through the vehicle
//! meets the path, so `P.x` always equals the vehicle's `x`. The target point
//! `S` sits a fixed lookahead length `L` from `P` along the path tangent,
//! oriented toward increasing `x`, and the desired course is the bearing from
//! the vehicle to `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{wrap_angle, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Line,
    Curve,
}

impl Task {
    pub fn obs_dim(self) -> usize {
        match self {
            Task::Line => 2,
            Task::Curve => 4,
        }
    }

    pub fn default_path(self) -> PathSpec {
        match self {
            Task::Line => PathSpec::Line { m: 0.0, b: 0.0 },
            Task::Curve => PathSpec::Sinusoid {
                amplitude: 10.0,
                omega: 0.05,
                phi: 0.0,
                y0: 0.0,
            },
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "line" => Ok(Task::Line),
            "curve" => Ok(Task::Curve),
            other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

/// A target path expressed as `y = f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathSpec {
    Line {
        m: f64,
        b: f64,
    },
    Sinusoid {
        #[serde(rename = "A")]
        amplitude: f64,
        omega: f64,
        phi: f64,
        y0: f64,
    },
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PathSpec::Line { m, b } => {
                if !(m.is_finite() && b.is_finite()) {
                    return Err(Error::NonFinite("line path"));
                }
            }
            PathSpec::Sinusoid {
                amplitude,
                omega,
                phi,
                y0,
            } => {
                if ![amplitude, omega, phi, y0].iter().all(|v| v.is_finite()) {
                    return Err(Error::NonFinite("sinusoid path"));
                }
                if amplitude < 0.0 {
                    return Err(Error::InvalidConfig("sinusoid amplitude must be >= 0".into()));
                }
                if omega <= 0.0 {
                    return Err(Error::InvalidConfig("sinusoid omega must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn y_at(&self, x: f64) -> f64 {
        match *self {
            PathSpec::Line { m, b } => m * x + b,
            PathSpec::Sinusoid {
                amplitude,
                omega,
                phi,
                y0,
            } => amplitude * (omega * x + phi).sin() + y0,
        }
    }

    /// Tangent slope `dy/dx` at `x`.
    pub fn slope_at(&self, x: f64) -> f64 {
        match *self {
            PathSpec::Line { m, .. } => m,
            PathSpec::Sinusoid {
                amplitude,
                omega,
                phi,
                ..
            } => amplitude * omega * (omega * x + phi).cos(),
        }
    }

    pub fn start(&self) -> Point {
        Point::new(0.0, self.y_at(0.0))
    }
}

/// Vertical-intersection projection of a point onto a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub p: Point,
    /// Positive when the vehicle is above the path.
    pub d_signed: f64,
    pub k: f64,
}

pub fn project(vehicle: Point, path: &PathSpec) -> Projection {
    let y_path = path.y_at(vehicle.x);
    Projection {
        p: Point::new(vehicle.x, y_path),
        d_signed: vehicle.y - y_path,
        k: path.slope_at(vehicle.x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredCourse {
    pub s: Point,
    pub c_d: f64,
}

/// Places the target point `lookahead` meters from `p` along the tangent of
/// slope `k` and returns the bearing to it.
pub fn desired_course(vehicle: Point, p: Point, k: f64, lookahead: f64) -> DesiredCourse {
    let norm = (1.0 + k * k).sqrt();
    let s = Point::new(p.x + lookahead / norm, p.y + lookahead * k / norm);
    let c_d = wrap_angle((s.y - vehicle.y).atan2(s.x - vehicle.x));
    DesiredCourse { s, c_d }
}

/// Signed course error `wrap(c_d - c)`.
pub fn course_error(c: f64, c_d: f64) -> f64 {
    wrap_angle(c_d - c)
}

/// Full guidance picture for one vehicle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceSolution {
    pub p: Point,
    pub d: f64,
    pub k: f64,
    pub s: Point,
    pub c_d: f64,
}

pub fn solve(vehicle: Point, path: &PathSpec, lookahead: f64) -> GuidanceSolution {
    let proj = project(vehicle, path);
    let desired = desired_course(vehicle, proj.p, proj.k, lookahead);
    GuidanceSolution {
        p: proj.p,
        d: vehicle.distance(&proj.p),
        k: proj.k,
        s: desired.s,
        c_d: desired.c_d,
    }
}

/// What the agent sees. All fields are always populated; `features` selects
/// the task-specific input vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceObservation {
    /// Signed cross-track distance, meters.
    pub d: f64,
    /// Current course, radians.
    pub c: f64,
    pub k: f64,
    pub c_d: f64,
    pub task: Task,
}

impl GuidanceObservation {
    pub fn features(&self) -> Vec<f64> {
        match self.task {
            Task::Line => vec![self.d, self.c],
            Task::Curve => vec![self.d, self.c, self.k, self.c_d],
        }
    }

    pub fn course_error(&self) -> f64 {
        course_error(self.c, self.c_d)
    }
}

pub fn observe(state: &VehicleState, path: &PathSpec, lookahead: f64, task: Task) -> GuidanceObservation {
    let vehicle = state.position();
    let proj = project(vehicle, path);
    let desired = desired_course(vehicle, proj.p, proj.k, lookahead);
    GuidanceObservation {
        d: proj.d_signed,
        c: state.heading,
        k: proj.k,
        c_d: desired.c_d,
        task,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const EPS: f64 = 1e-12;

    fn horizontal() -> PathSpec {
        PathSpec::Line { m: 0.0, b: 0.0 }
    }

    fn sinusoid() -> PathSpec {
        PathSpec::Sinusoid {
            amplitude: 10.0,
            omega: 0.1,
            phi: 0.0,
            y0: 0.0,
        }
    }

    #[test]
    fn project_horizontal_line() {
        let proj = project(Point::new(3.0, 4.0), &horizontal());
        assert_eq!(proj.p, Point::new(3.0, 0.0));
        assert_eq!(proj.d_signed, 4.0);
        assert_eq!(proj.k, 0.0);
    }

    #[test]
    fn project_diagonal_line() {
        let proj = project(Point::new(2.0, 5.0), &PathSpec::Line { m: 1.0, b: 0.0 });
        assert_eq!(proj.p, Point::new(2.0, 2.0));
        assert_eq!(proj.d_signed, 3.0);
        assert_eq!(proj.k, 1.0);
    }

    #[test]
    fn project_sinusoid() {
        let proj = project(Point::new(0.0, 5.0), &sinusoid());
        assert_eq!(proj.p, Point::new(0.0, 0.0));
        assert_eq!(proj.d_signed, 5.0);
        assert!((proj.k - 1.0).abs() < EPS);
    }

    #[test]
    fn desired_course_examples() {
        let dc = desired_course(Point::new(0.0, 10.0), Point::new(0.0, 0.0), 0.0, 10.0);
        assert_eq!(dc.s, Point::new(10.0, 0.0));
        assert!((dc.c_d + PI / 4.0).abs() < EPS);

        let dc = desired_course(Point::new(5.0, 0.0), Point::new(5.0, 0.0), 0.0, 20.0);
        assert_eq!(dc.s, Point::new(25.0, 0.0));
        assert_eq!(dc.c_d, 0.0);

        let dc = desired_course(Point::new(0.0, 0.0), Point::new(0.0, 0.0), 1.0, 2f64.sqrt());
        assert!((dc.s.x - 1.0).abs() < EPS && (dc.s.y - 1.0).abs() < EPS);
        assert!((dc.c_d - PI / 4.0).abs() < EPS);
    }

    #[test]
    fn course_error_examples() {
        assert_eq!(course_error(1.0, 1.0), 0.0);
        assert!((course_error(-3.0, 3.0) - (6.0 - 2.0 * PI)).abs() < EPS);
        assert!((course_error(-3.0, 3.0) + 0.28319).abs() < 1e-5);
        assert!((course_error(0.0, PI / 2.0) - PI / 2.0).abs() < EPS);
    }

    #[test]
    fn observe_examples() {
        let on_path = VehicleState::new(5.0, 0.0, 0.0, 1.0);
        let obs = observe(&on_path, &horizontal(), 20.0, Task::Line);
        assert_eq!(obs.features(), vec![0.0, 0.0]);

        let above = VehicleState::new(0.0, 10.0, 0.0, 1.0);
        let obs = observe(&above, &horizontal(), 10.0, Task::Line);
        assert_eq!(obs.features(), vec![10.0, 0.0]);

        let curve = VehicleState::new(0.0, 5.0, 0.0, 1.0);
        let obs = observe(&curve, &sinusoid(), 10.0, Task::Curve);
        let expected = desired_course(Point::new(0.0, 5.0), Point::new(0.0, 0.0), 1.0, 10.0);
        let f = obs.features();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0], 5.0);
        assert_eq!(f[1], 0.0);
        assert!((f[2] - 1.0).abs() < EPS);
        assert!((f[3] - expected.c_d).abs() < EPS);
        // S = (10/sqrt2, 10/sqrt2); bearing from (0, 5).
        let s = 10.0 / 2f64.sqrt();
        assert!((f[3] - (s - 5.0).atan2(s)).abs() < EPS);
    }

    #[test]
    fn path_json_schema() {
        let line: PathSpec = serde_json::from_str(r#"{"type":"line","m":0,"b":0}"#).unwrap();
        assert_eq!(line, horizontal());
        let sin: PathSpec =
            serde_json::from_str(r#"{"type":"sinusoid","A":10,"omega":0.1,"phi":0,"y0":0}"#).unwrap();
        assert_eq!(sin, sinusoid());
        let bad = PathSpec::Sinusoid {
            amplitude: 1.0,
            omega: 0.0,
            phi: 0.0,
            y0: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    fn any_path() -> impl Strategy<Value = PathSpec> {
        prop_oneof![
            (-3.0..3.0f64, -20.0..20.0f64).prop_map(|(m, b)| PathSpec::Line { m, b }),
            (0.0..20.0f64, 0.01..0.5f64, -PI..PI, -10.0..10.0f64).prop_map(
                |(amplitude, omega, phi, y0)| PathSpec::Sinusoid {
                    amplitude,
                    omega,
                    phi,
                    y0
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn solution_invariants(
            x in -200.0..200.0f64,
            y in -200.0..200.0f64,
            path in any_path(),
            lookahead in 0.5..50.0f64,
        ) {
            let vehicle = Point::new(x, y);
            let sol = solve(vehicle, &path, lookahead);
            prop_assert_eq!(sol.p.x, x);
            prop_assert!((sol.d - vehicle.distance(&sol.p)).abs() < 1e-9);
            prop_assert!((sol.s.distance(&sol.p) - lookahead).abs() < 1e-9);
            // S lies on the tangent line through P.
            prop_assert!(((sol.s.y - sol.p.y) - sol.k * (sol.s.x - sol.p.x)).abs() < 1e-9 * (1.0 + sol.k.abs()) * lookahead);
            prop_assert!(sol.s.x > sol.p.x);
            prop_assert!(sol.c_d >= -PI && sol.c_d < PI);
        }

        #[test]
        fn on_line_course_matches_direction(x in -100.0..100.0f64, m in -3.0..3.0f64, b in -10.0..10.0f64) {
            let path = PathSpec::Line { m, b };
            let vehicle = Point::new(x, path.y_at(x));
            let sol = solve(vehicle, &path, 20.0);
            prop_assert!((sol.c_d - m.atan()).abs() < 1e-9);
        }

        #[test]
        fn translation_invariance(
            x in -100.0..100.0f64,
            y in -100.0..100.0f64,
            m in -3.0..3.0f64,
            b in -10.0..10.0f64,
            tx in -50.0..50.0f64,
            ty in -50.0..50.0f64,
        ) {
            let path = PathSpec::Line { m, b };
            // Shifting by (tx, ty) maps y = m x + b to y = m x + (b + ty - m tx).
            let shifted = PathSpec::Line { m, b: b + ty - m * tx };
            let a = solve(Point::new(x, y), &path, 20.0);
            let c = solve(Point::new(x + tx, y + ty), &shifted, 20.0);
            prop_assert!(course_error(a.c_d, c.c_d).abs() < 1e-9);
        }

        #[test]
        fn horizontal_distance_is_shortest(x in -500.0..500.0f64, y in -500.0..500.0f64, b in -10.0..10.0f64) {
            let path = PathSpec::Line { m: 0.0, b };
            let proj = project(Point::new(x, y), &path);
            // Perpendicular distance to y = b, computed independently.
            prop_assert!((proj.d_signed.abs() - (y - b).abs()).abs() < 1e-12);
        }
    }
}
