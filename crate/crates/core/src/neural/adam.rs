use crate::error::{Error, Result};

use super::{Grads, Mlp};

/// Bias-corrected adaptive moment estimation state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Grads,
    pub second_moment: Grads,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        AdamState {
            first_moment: Grads::zeros_like(net),
            second_moment: Grads::zeros_like(net),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub fn adam_step(net: &mut Mlp, grads: &Grads, state: &mut AdamState) -> Result<()> {
    if !grads.matches(net) || !state.first_moment.matches(net) || !state.second_moment.matches(net) {
        return Err(Error::ContractViolation(
            "adam: gradient shapes do not match network".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::TrainingDiverged {
            update: state.step,
            detail: "non-finite gradient passed to adam".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    for (((p, g), m), v) in net
        .params_mut()
        .zip(grads.values())
        .zip(state.first_moment.values_mut())
        .zip(state.second_moment.values_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Mlp {
        Mlp::init(&[2, 3, 1], 9).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut net = tiny();
        let before = net.clone();
        let mut state = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &Grads::zeros_like(&before), &mut state).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = tiny();
        let before = net.clone();
        let mut grads = Grads::zeros_like(&net);
        grads.layers[0].weights[0] = 0.3;
        grads.layers[1].bias[0] = -2.0;
        let mut state = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &grads, &mut state).unwrap();
        // m_hat = g, v_hat = g^2 at t = 1
        let dw = net.layers[0].weights[0] - before.layers[0].weights[0];
        assert!((dw - -0.0009999999666666678).abs() < 1e-15);
        let db = net.layers[1].bias[0] - before.layers[1].bias[0];
        assert!((db - 1e-3 * 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let mut grads = Grads::zeros_like(&tiny());
        grads.values_mut().enumerate().for_each(|(i, g)| *g = (i as f64).sin());
        let run = || {
            let mut net = tiny();
            let mut state = AdamState::new(&net, 1e-2);
            adam_step(&mut net, &grads, &mut state).unwrap();
            adam_step(&mut net, &grads, &mut state).unwrap();
            (net, state)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut net = tiny();
        let mut grads = Grads::zeros_like(&net);
        grads.layers[0].bias[1] = f64::NAN;
        let mut state = AdamState::new(&net, 1e-3);
        assert!(matches!(
            adam_step(&mut net, &grads, &mut state),
            Err(Error::TrainingDiverged { .. })
        ));
    }
}
