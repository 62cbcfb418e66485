/// Generalized advantage estimation over one worker's segment.
///
/// `dones[t]` marks that the episode ended at step `t`, which cuts both the
/// bootstrap from `values[t + 1]` and the advantage carry. `bootstrap` is
/// the critic's value of the state after the last step.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "gae: sequences differ in length");
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        carry = delta + gamma * lambda * live * carry;
        advantages[t] = carry;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Advantages from the explicit sum `A_t = sum_k (gamma lambda)^k delta_{t+k}`,
/// truncated at the first episode end. Quadratic; used as a reference.
#[allow(clippy::needless_range_loop)]
pub fn gae_explicit(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let delta = |t: usize| {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let live = if dones[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * next_value * live - values[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                sum += weight * delta(k);
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_discount_is_one_step() {
        let r = [1.0, -2.0, 0.5];
        let v = [0.3, 0.1, -0.4];
        let (a, _) = gae(&r, &v, &[false, false, false], 9.0, 0.0, 0.7);
        for t in 0..3 {
            assert!((a[t] - (r[t] - v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_episode() {
        let (a, ret) = gae(&[1.0, 1.0], &[0.5, 0.5], &[false, true], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![1.5, 0.5]);
        assert_eq!(ret, vec![2.0, 1.0]);
    }

    #[test]
    fn bootstrap_ignored_after_done() {
        let (a, _) = gae(&[1.0], &[0.2], &[true], 1e6, 0.99, 0.95);
        assert!((a[0] - 0.8).abs() < 1e-15);
        let (a, _) = gae(&[1.0], &[0.2], &[false], 1.0, 0.5, 0.95);
        assert!((a[0] - 1.3).abs() < 1e-15);
    }
}
