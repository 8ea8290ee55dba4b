//! Image-recovery experiment: each 28x28 image is the sparse non-negative
//! signal, measured through a fresh Gaussian dictionary.

use std::path::Path;

use amp_core::SparseProblem;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::experiment::{run_solvers, ExperimentResult};
use crate::idx::DIGIT_SIDE;
use crate::pgm::Gray;
use crate::solvers::{SolverKind, SolverSettings};
use crate::synth::{gaussian, gaussian_dictionary, trial_rng, Instance, Penalty};
use crate::{par_map, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// Row-major intensities in `[0, 1]`.
    pub images: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

fn bezier(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), t: f64) -> (f64, f64) {
    let s = 1.0 - t;
    (s * s * p0.0 + 2.0 * s * t * p1.0 + t * t * p2.0, s * s * p0.1 + 2.0 * s * t * p1.1 + t * t * p2.1)
}

/// Digit-like test images: two to four quadratic pen strokes inside the
/// central 20x20 box, anti-aliased, quantized to 8 bits. Roughly a sixth of
/// the pixels end up nonzero, close to handwritten digits.
pub fn synthetic_digits(n: usize, seed: u64) -> ImageSet {
    let side = DIGIT_SIDE;
    let images = (0..n)
        .map(|i| {
            let mut rng = trial_rng(seed ^ 0x5EED_1DA6, i as u64);
            let mut img = vec![0.0f64; side * side];
            let strokes = rng.random_range(2..=4);
            for _ in 0..strokes {
                let mut pt = || (rng.random_range(4.0..24.0), rng.random_range(4.0..24.0));
                let (a, b, c) = (pt(), pt(), pt());
                let path: Vec<(f64, f64)> = (0..=64).map(|s| bezier(a, b, c, s as f64 / 64.0)).collect();
                for r in 0..side {
                    for col in 0..side {
                        let (y, x) = (r as f64 + 0.5, col as f64 + 0.5);
                        let d = path.iter().map(|&(py, px)| (py - y).hypot(px - x)).fold(f64::INFINITY, f64::min);
                        let v = (1.6 - d).clamp(0.0, 1.0);
                        let cell = &mut img[r * side + col];
                        *cell = cell.max(v);
                    }
                }
            }
            img.iter().map(|&v| (v * 255.0).round() / 255.0).collect()
        })
        .collect();
    ImageSet { rows: side, cols: side, images, labels: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSpec {
    /// Number of measurements.
    pub q: usize,
    pub sigma: f64,
    pub seed: u64,
    pub penalty: Penalty,
}

/// Slab precision for `[0, 1]` pixel intensities at the default noise level;
/// the synthetic-table default is tuned for unit-variance coefficients.
pub const IMAGE_LAMBDA: f64 = 3e-3;

impl Default for ImageSpec {
    fn default() -> Self {
        ImageSpec { q: 350, sigma: 0.03, seed: 0, penalty: Penalty { lambda: IMAGE_LAMBDA, ..Penalty::default() } }
    }
}

/// Measures image `t` with a dictionary drawn from stream `t` of the seed.
pub fn measure_image(image: &[f64], spec: &ImageSpec, t: usize) -> Result<Instance, HarnessError> {
    let p = image.len();
    if spec.q == 0 || p == 0 {
        return Err(HarnessError::InvalidSpec("image recovery needs q >= 1 and non-empty images".into()));
    }
    let mut rng = trial_rng(spec.seed, t as u64);
    let a = gaussian_dictionary(&mut rng, spec.q, p)?;
    let mut y = a.matvec(image);
    if spec.sigma > 0.0 {
        for v in &mut y {
            *v += spec.sigma * gaussian(&mut rng);
        }
    }
    let rho = spec.penalty.rho(spec.sigma, p)?;
    let problem = SparseProblem::new(a, y, spec.penalty.lambda, rho, true)?;
    Ok(Instance { problem, x0: image.to_vec() })
}

/// Recovers every image with every solver in non-negative mode. Rows use the
/// image's nonzero count as `k`, which is also the sparsity handed to OMP.
///
/// With `dump_dir`, writes `img{t}_truth.pgm`, and for each solver
/// `img{t}_{solver}.pgm` (recovered intensities) and `img{t}_{solver}_mask.pgm`
/// (recovered support).
pub fn run_image_recovery(
    images: &ImageSet,
    spec: &ImageSpec,
    solvers: &[SolverKind],
    settings: &SolverSettings,
    threads: usize,
    dump_dir: Option<&Path>,
) -> Result<ExperimentResult, HarnessError> {
    if images.is_empty() {
        return Err(HarnessError::InvalidSpec("no images to recover".into()));
    }
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir)?;
    }
    let (w, h) = (images.cols, images.rows);
    let per_image = par_map(threads, images.len(), |t| -> Result<_, HarnessError> {
        let x0 = &images.images[t];
        let inst = measure_image(x0, spec, t)?;
        let k = x0.iter().filter(|&&v| v != 0.0).count();
        let (rows, amp, solutions) = run_solvers(&inst, t, k, spec.sigma, solvers, settings);
        if let Some(dir) = dump_dir {
            Gray::from_unit(w, h, x0)?.write(&dir.join(format!("img{t:03}_truth.pgm")))?;
            for (solver, sol) in &solutions {
                Gray::from_unit(w, h, &sol.x)?.write(&dir.join(format!("img{t:03}_{solver}.pgm")))?;
                Gray::from_mask(w, h, &sol.gamma)?.write(&dir.join(format!("img{t:03}_{solver}_mask.pgm")))?;
            }
        }
        Ok((rows, amp))
    })?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for r in per_image {
        let (r, a) = r?;
        rows.extend(r);
        runs.extend(a);
    }
    Ok(ExperimentResult::from_rows("image", rows, runs, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_images_are_sparse_and_bounded() {
        let set = synthetic_digits(10, 1);
        assert_eq!(set.len(), 10);
        for img in &set.images {
            assert_eq!(img.len(), 784);
            assert!(img.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let nnz = img.iter().filter(|&&v| v > 0.0).count();
            assert!((40..400).contains(&nnz), "nnz {nnz}");
        }
        assert_eq!(synthetic_digits(3, 1), synthetic_digits(3, 1));
        assert_ne!(synthetic_digits(1, 1), synthetic_digits(1, 2));
    }

    #[test]
    fn measurement_is_deterministic() {
        let img = synthetic_digits(1, 4).images.remove(0);
        let spec = ImageSpec { q: 50, ..ImageSpec::default() };
        let a = measure_image(&img, &spec, 0).unwrap();
        let b = measure_image(&img, &spec, 0).unwrap();
        assert_eq!(a.problem.y(), b.problem.y());
        assert!(a.problem.nonneg());
    }
}
