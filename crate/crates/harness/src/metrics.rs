use amp_core::Solution;
use serde::{Deserialize, Serialize};

/// Per-solve quality numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `||x_hat - x0||^2 / p`
    pub mse: f64,
    /// Objective value of the returned solution.
    pub cost: f64,
    /// Percentage of positions whose active/inactive status matches `x0`.
    pub sm: f64,
}

pub fn mse(x_hat: &[f64], x0: &[f64]) -> f64 {
    assert_eq!(x_hat.len(), x0.len(), "mse: length mismatch");
    if x0.is_empty() {
        return 0.0;
    }
    x_hat.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x0.len() as f64
}

/// `100 (p - |S_hat xor S0|) / p`
pub fn support_match(gamma_hat: &[bool], x0: &[f64]) -> f64 {
    assert_eq!(gamma_hat.len(), x0.len(), "support_match: length mismatch");
    if x0.is_empty() {
        return 100.0;
    }
    let p = x0.len();
    let differ = gamma_hat.iter().zip(x0).filter(|(&g, &v)| g != (v != 0.0)).count();
    100.0 * (p - differ) as f64 / p as f64
}

/// The cost is taken from the solution itself, so the AMP row carries the
/// exact value its trace ended on.
pub fn evaluate(sol: &Solution, x0: &[f64]) -> Metrics {
    Metrics { mse: mse(&sol.x, x0), cost: sol.cost, sm: support_match(&sol.gamma, x0) }
}
