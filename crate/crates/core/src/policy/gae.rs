/// Generalized advantage estimates and value targets.
///
/// `dones[t]` marks that the episode ended with step `t`, so no value is
/// bootstrapped across it. `bootstrap_value` is the critic's estimate for
/// the state following the last step and is ignored when that step is
/// terminal. Returns `(advantages, returns)` with `returns = advantages +
/// values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values and rewards must align");
    assert_eq!(dones.len(), n, "dones and rewards must align");
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        running = delta + gamma * lambda * not_done * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}
