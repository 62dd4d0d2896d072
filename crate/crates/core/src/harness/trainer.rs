use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::guidance::GuidanceObservation;

/// Course-error change (radians) still counted as holding steady.
pub const COURSE_DEAD_BAND: f64 = 0.01;
/// Allowed growth of `|d|` per step (meters) for a step to count as good.
pub const DISTANCE_SLACK: f64 = 0.1;

/// Stand-in for a human trainer: judges each step by whether the vehicle's
/// course error and cross-track distance improved.
#[derive(Debug, Clone)]
pub struct ScriptedTrainer {
    p_fb: f64,
    good: f64,
    bad: f64,
    rng: ChaCha8Rng,
}

impl ScriptedTrainer {
    pub fn new(p_fb: f64, good: f64, bad: f64, rng: ChaCha8Rng) -> Self {
        ScriptedTrainer { p_fb, good, bad, rng }
    }

    /// Whether the move from `prev` to `curr` looks good to the trainer.
    pub fn judge(prev: &GuidanceObservation, curr: &GuidanceObservation) -> bool {
        let err_before = prev.course_error().abs();
        let err_after = curr.course_error().abs();
        let course_ok = err_after <= err_before + COURSE_DEAD_BAND;
        let distance_ok = curr.d.abs() <= prev.d.abs() + DISTANCE_SLACK;
        course_ok && distance_ok
    }

    /// Feedback for one step, given with probability `p_fb`.
    pub fn feedback(&mut self, prev: &GuidanceObservation, curr: &GuidanceObservation) -> Option<f64> {
        // One draw per step regardless of outcome keeps the stream aligned.
        let give = self.rng.gen::<f64>() < self.p_fb;
        give.then(|| if Self::judge(prev, curr) { self.good } else { self.bad })
    }
}
