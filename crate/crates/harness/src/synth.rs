use amp_core::model::normalize_columns;
use amp_core::{rho_from_prior, Mat, PriorParams, SparseProblem};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Shape and randomness of one family of synthetic instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub p: usize,
    pub q: usize,
    /// Planted nonzeros.
    pub k: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
    /// Planted coefficients are `|N(0,1)|` and the solvers run constrained.
    pub nonneg: bool,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.p == 0 || self.q == 0 {
            return Err(HarnessError::InvalidSpec(format!("p and q must be positive (p={}, q={})", self.p, self.q)));
        }
        if self.k > self.p {
            return Err(HarnessError::InvalidSpec(format!("k={} exceeds p={}", self.k, self.p)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(HarnessError::InvalidSpec(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// How the per-index penalties are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RhoPolicy {
    /// Uniform `kappa`, converted with the instance's noise level and `lambda`.
    Prior { kappa: f64 },
    /// The same penalty for every index.
    Uniform(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub lambda: f64,
    pub rho: RhoPolicy,
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty { lambda: 1e-4, rho: RhoPolicy::Prior { kappa: 0.05 } }
    }
}

impl Penalty {
    pub fn rho(&self, sigma: f64, p: usize) -> Result<Vec<f64>, HarnessError> {
        match self.rho {
            RhoPolicy::Uniform(r) if r.is_finite() => Ok(vec![r; p]),
            RhoPolicy::Uniform(r) => Err(HarnessError::InvalidSpec(format!("rho must be finite, got {r}"))),
            RhoPolicy::Prior { .. } if sigma <= 0.0 => Err(HarnessError::InvalidSpec(
                "the prior penalty needs sigma > 0; supply rho directly for noiseless runs".into(),
            )),
            RhoPolicy::Prior { kappa } => Ok(rho_from_prior(&PriorParams::uniform(sigma, kappa, self.lambda, p))?),
        }
    }
}

/// One generated problem with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: SparseProblem,
    pub x0: Vec<f64>,
}

/// Generator for `(seed, stream)`. Independent streams of the same seed give
/// independent trials, and the sequence does not depend on thread scheduling.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Column-normalized `q x p` Gaussian matrix, drawn column by column.
pub fn gaussian_dictionary(rng: &mut ChaCha8Rng, q: usize, p: usize) -> Result<Mat, HarnessError> {
    let raw = Mat::from_fn(q, p, |_, _| gaussian(rng));
    Ok(normalize_columns(raw)?.0)
}

/// Draws `A`, a `k`-sparse `x0` and `y = A x0 + n`.
///
/// Draw order is fixed: the dictionary, then the support positions, then the
/// coefficients in ascending index order, then the noise.
pub fn gen_problem(spec: &SynthSpec, stream: u64, penalty: &Penalty) -> Result<Instance, HarnessError> {
    spec.validate()?;
    let mut rng = trial_rng(spec.seed, stream);
    let a = gaussian_dictionary(&mut rng, spec.q, spec.p)?;

    let mut positions = sample(&mut rng, spec.p, spec.k).into_vec();
    positions.sort_unstable();
    let mut x0 = vec![0.0; spec.p];
    for &i in &positions {
        let v = gaussian(&mut rng);
        x0[i] = if spec.nonneg { v.abs() } else { v };
    }

    let mut y = a.matvec(&x0);
    if spec.sigma > 0.0 {
        for v in &mut y {
            *v += spec.sigma * gaussian(&mut rng);
        }
    }
    let rho = penalty.rho(spec.sigma, spec.p)?;
    let problem = SparseProblem::new(a, y, penalty.lambda, rho, spec.nonneg)?;
    Ok(Instance { problem, x0 })
}
