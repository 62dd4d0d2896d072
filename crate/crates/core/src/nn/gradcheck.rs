use super::mlp::Mlp;
use crate::error::Result;

/// Outcome of comparing backpropagated gradients against central finite
/// differences of `(target - Q(obs, action))^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub params_checked: usize,
}

/// Relative error is `|analytic - numeric| / max(|analytic|, |numeric|, floor)`;
/// the floor keeps vanishing gradients from dividing by zero.
pub const RELATIVE_FLOOR: f64 = 1e-7;

pub fn gradient_check(net: &Mlp, obs: &[f64], action: usize, target: f64, epsilon: f64) -> Result<GradCheckReport> {
    let analytic = net.backward(obs, action, target)?;
    let loss = |n: &Mlp| -> Result<f64> {
        let q = n.forward(obs)?[action];
        Ok((target - q).powi(2))
    };

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        params_checked: 0,
    };
    for (li, grad_layer) in analytic.layers().iter().enumerate() {
        let slots = (0..grad_layer.weights.len())
            .map(|i| (Slot::Weight(i), grad_layer.weights[i]))
            .chain((0..grad_layer.biases.len()).map(|i| (Slot::Bias(i), grad_layer.biases[i])));
        for (slot, a) in slots {
            let original = *slot.get(&mut probe, li);
            *slot.get(&mut probe, li) = original + epsilon;
            let plus = loss(&probe)?;
            *slot.get(&mut probe, li) = original - epsilon;
            let minus = loss(&probe)?;
            *slot.get(&mut probe, li) = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.max_absolute_error = report.max_absolute_error.max(abs);
            report.max_relative_error = report.max_relative_error.max(rel);
            report.params_checked += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Copy)]
enum Slot {
    Weight(usize),
    Bias(usize),
}

impl Slot {
    fn get(self, net: &mut Mlp, layer: usize) -> &mut f64 {
        let layer = &mut net.layers_mut()[layer];
        match self {
            Slot::Weight(i) => &mut layer.weights[i],
            Slot::Bias(i) => &mut layer.biases[i],
        }
    }
}
