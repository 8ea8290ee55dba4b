mod common;

use amp_core::linalg::{dot, Mat};
use amp_core::model::{cost, nnls_active_set};
use amp_core::solver::{decide, init_support, nnls_admm, AdmmConfig, AmpState, Move};
use amp_core::{amp, g_exact, residual_corr, rho_from_prior, AmpConfig, PriorParams, SparseProblem, Support, Termination};
use common::{dense_g, dense_solve, gaussian, gaussian_mat, planted, rng, subsets_up_to, unit_columns};
use proptest::prelude::*;

fn small_instance(seed: u64, nonneg: bool) -> SparseProblem {
    let mut r = rng(seed);
    let rho = (0..8).map(|_| 0.02 + 0.05 * gaussian(&mut r).abs()).collect();
    planted(&mut r, 6, 8, 2, 0.05, 0.05, rho, nonneg).0
}

#[test]
fn g_exact_matches_dense_least_squares() {
    for seed in 0..5 {
        let prob = small_instance(seed, false);
        for s in subsets_up_to(8, 3) {
            let (g, _) = g_exact(&prob, &s).unwrap();
            let want = dense_g(&prob, &s);
            assert!((g - want).abs() <= 1e-10 * (1.0 + want.abs()), "S={s:?}: {g} vs {want}");
        }
    }
}

#[test]
fn g_exact_is_cost_of_its_minimizer() {
    let prob = small_instance(17, false);
    for s in subsets_up_to(8, 3) {
        let (g, xs) = g_exact(&prob, &s).unwrap();
        let sol = amp_core::Solution::from_support(&prob, &s, &xs).unwrap();
        assert_eq!(g, cost(&prob, &sol).unwrap());
    }
}

/// Materializes `D = [A; sqrt(lambda) I]` and `z = [y; 0]`.
fn augmented(prob: &SparseProblem) -> (Mat, Vec<f64>) {
    let (q, p) = (prob.q(), prob.p());
    let sl = prob.lambda().sqrt();
    let d = Mat::from_fn(q + p, p, |i, j| if i < q { prob.a()[(i, j)] } else if i - q == j { sl } else { 0.0 });
    let mut z = prob.y().to_vec();
    z.resize(q + p, 0.0);
    (d, z)
}

#[test]
fn residual_corr_matches_materialized_dictionary() {
    let prob = small_instance(3, false);
    let (d, z) = augmented(&prob);
    for s in subsets_up_to(8, 3) {
        let (_, xs) = g_exact(&prob, &s).unwrap();
        let support = Support::from_indices(8, &s).unwrap();
        let r = prob.residual(&s, &xs);
        let aug_r = {
            let mut v = z.clone();
            let dx = d.matvec_cols(&s, &xs);
            for (a, b) in v.iter_mut().zip(dx) {
                *a -= b;
            }
            v
        };
        for i in 0..8 {
            let got = residual_corr(&prob, &support, &xs, &r, i);
            let want = dot(d.col(i), &aug_r);
            assert!((got - want).abs() <= 1e-12, "i={i} S={s:?}");
        }
    }
}

/// Every insertion and removal bound dominates the exact change in `g`.
fn check_bounds(prob: &SparseProblem) -> usize {
    let energy = prob.atom_energy();
    let mut checked = 0;
    for s in subsets_up_to(prob.p(), 3) {
        let (g_s, xs) = g_exact(prob, &s).unwrap();
        let support = Support::from_indices(prob.p(), &s).unwrap();
        let r = prob.residual(&s, &xs);
        let slack = 1e-10 * (1.0 + g_s.abs());
        let mut min_du = f64::INFINITY;
        for i in (0..prob.p()).filter(|i| !s.contains(i)) {
            let mut t = s.clone();
            t.push(i);
            let du = g_exact(prob, &t).unwrap().0 - g_s;
            let c = residual_corr(prob, &support, &xs, &r, i);
            let c = if prob.nonneg() { c.max(0.0) } else { c };
            assert!(prob.rho()[i] - c * c / energy >= du - slack, "insert {i} into {s:?}");
            min_du = min_du.min(du);
            checked += 1;
        }
        let mut min_dv = f64::INFINITY;
        for (pos, &j) in s.iter().enumerate() {
            let t: Vec<usize> = s.iter().copied().filter(|&k| k != j).collect();
            let dv = g_exact(prob, &t).unwrap().0 - g_s;
            let x = xs[pos];
            let d = residual_corr(prob, &support, &xs, &r, j);
            assert!(energy * x * x + 2.0 * d * x - prob.rho()[j] >= dv - slack, "remove {j} from {s:?}");
            min_dv = min_dv.min(dv);
            checked += 1;
        }

        // The solver's own minima agree with the per-index check.
        let st = AmpState::new(prob, support, &AmpConfig::default()).unwrap();
        let none = vec![false; prob.p()];
        if let Some(u) = st.ubar(prob, &none) {
            assert!(u.value >= min_du - slack);
        }
        if let Some(v) = st.vbar(prob, &none) {
            assert!(v.value >= min_dv - slack);
        }
    }
    checked
}

#[test]
fn bounds_dominate_exact_changes() {
    let mut checked = 0;
    for seed in 0..6 {
        checked += check_bounds(&small_instance(100 + seed, false));
        checked += check_bounds(&small_instance(200 + seed, true));
    }
    assert!(checked > 1000);
}

#[test]
fn coefficients_on_twelve_atoms_match_dense_solve() {
    let mut r = rng(21);
    let a = unit_columns(&mut r, 50, 40);
    let y: Vec<f64> = (0..50).map(|_| gaussian(&mut r)).collect();
    let prob = SparseProblem::new(a, y, 0.01, vec![0.1; 40], false).unwrap();
    let s: Vec<usize> = vec![39, 2, 17, 5, 30, 8, 11, 23, 0, 14, 27, 33];
    let st = AmpState::new(&prob, Support::from_indices(40, &s).unwrap(), &AmpConfig::default()).unwrap();
    let gram = prob.a().gram_of(&s, prob.lambda());
    let w: Vec<f64> = s.iter().map(|&i| dot(prob.a().col(i), prob.y())).collect();
    let want = dense_solve(&gram, &w);
    for (x, w) in st.coeffs().iter().zip(&want) {
        assert!((x - w).abs() <= 1e-8 * (1.0 + w.abs()));
    }
}

/// Exhaustive NNLS: best feasible unconstrained solve over all free sets.
fn nnls_enumerate(gram: &Mat, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let obj = |x: &[f64]| 0.5 * dot(x, &gram.matvec(x)) - dot(w, x);
    let mut best = vec![0.0; n];
    let mut best_obj = 0.0;
    for mask in 1u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = Mat::from_fn(free.len(), free.len(), |a, b| gram[(free[a], free[b])]);
        let rhs: Vec<f64> = free.iter().map(|&i| w[i]).collect();
        let zs = dense_solve(&sub, &rhs);
        if zs.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; n];
        for (&i, v) in free.iter().zip(zs) {
            x[i] = v;
        }
        if obj(&x) < best_obj {
            best_obj = obj(&x);
            best = x;
        }
    }
    best
}

#[test]
fn nnls_solvers_match_enumeration() {
    let cfg = AdmmConfig { max_iter: 20_000, ..AdmmConfig::default() };
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let b = gaussian_mat(&mut r, 12, 6);
        let mut g = b.transpose().matmul(&b);
        for i in 0..6 {
            g[(i, i)] += 0.05;
        }
        let w: Vec<f64> = (0..6).map(|_| gaussian(&mut r)).collect();
        let want = nnls_enumerate(&g, &w);
        let admm = nnls_admm(&g, &w, &cfg, None).unwrap();
        assert!(admm.converged);
        let exact = nnls_active_set(&g, &w).unwrap();
        for i in 0..6 {
            assert!((admm.x[i] - want[i]).abs() <= 1e-6, "seed {seed}: admm {:?} vs {want:?}", admm.x);
            assert!((exact[i] - want[i]).abs() <= 1e-9, "seed {seed}: active set {exact:?} vs {want:?}");
            assert!(admm.x[i] >= 0.0);
        }
    }
}

#[test]
fn amp_never_beats_the_global_minimum_and_stays_close() {
    let mut gaps = Vec::new();
    for seed in 0..30 {
        let mut r = rng(400 + seed);
        let (prob, _) = planted(&mut r, 16, 10, 3, 0.05, 0.01, vec![0.01; 10], seed % 2 == 1);
        let best = amp_core::baselines::brute_force(&prob, None).unwrap();
        let rep = amp(&prob, &AmpConfig::default()).unwrap();
        assert!(best.cost <= rep.solution.cost + 1e-12);
        gaps.push(rep.solution.cost - best.cost);
    }
    let exact_hits = gaps.iter().filter(|&&g| g <= 1e-9).count();
    assert!(exact_hits >= 25, "gaps {gaps:?}");
}

#[test]
fn every_accepted_move_beats_its_bound() {
    for seed in 0..10 {
        let mut r = rng(500 + seed);
        let (prob, _) = planted(&mut r, 30, 60, 4, 0.05, 0.01, vec![0.01; 60], false);
        let cfg = AmpConfig::default();
        let rep = amp(&prob, &cfg).unwrap();
        let visited = rep.visited_supports();
        assert!(rep.cost_trace.windows(2).all(|w| w[1] < w[0]));
        for (step, mv) in rep.moves.iter().enumerate() {
            let before = Support::from_indices(60, &visited[step]).unwrap();
            let st = AmpState::new(&prob, before, &cfg).unwrap();
            let none = vec![false; 60];
            let (u, v) = (st.ubar(&prob, &none), st.vbar(&prob, &none));
            assert_eq!(decide(u, v), Some(*mv));
            let bound = match mv {
                Move::Insert(_) => u.unwrap().value,
                Move::Remove(_) => v.unwrap().value,
            };
            let realized = rep.cost_trace[step + 1] - rep.cost_trace[step];
            assert!(realized <= bound + 1e-10, "step {step}: {realized} > {bound}");
        }
    }
}

#[test]
fn reported_cost_is_exact() {
    let mut r = rng(600);
    let (prob, _) = planted(&mut r, 40, 100, 5, 0.05, 0.01, vec![0.01; 100], false);
    let rep = amp(&prob, &AmpConfig::default()).unwrap();
    let (g, _) = g_exact(&prob, &rep.solution.support()).unwrap();
    assert!((rep.solution.cost - g).abs() <= 1e-10 * (1.0 + g));
    assert!((cost(&prob, &rep.solution).unwrap() - g).abs() <= 1e-10 * (1.0 + g));
    assert_eq!(rep.termination, Termination::Converged);
}

#[test]
fn all_negative_penalties_keep_full_support() {
    let mut r = rng(700);
    let prior = PriorParams::uniform(0.5, 0.999, 0.01, 6);
    let rho = rho_from_prior(&prior).unwrap();
    assert!(rho.iter().all(|&v| v < 0.0));
    let (prob, _) = planted(&mut r, 20, 6, 2, 0.1, 0.01, rho, false);
    assert_eq!(init_support(prob.rho()).len(), 6);
    let rep = amp(&prob, &AmpConfig::default()).unwrap();
    assert_eq!(rep.solution.support(), (0..6).collect::<Vec<_>>());
    assert!(rep.moves.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn amp_invariants(seed in any::<u64>(), nonneg in any::<bool>(), k in 1usize..6) {
        let mut r = rng(seed);
        let (prob, _) = planted(&mut r, 20, 30, k, 0.05, 0.01, vec![0.005; 30], nonneg);
        let rep = amp(&prob, &AmpConfig::default()).unwrap();
        prop_assert!(rep.cost_trace.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(rep.iterations <= 300);
        prop_assert_eq!(rep.moves.len() + rep.rejected.len(), rep.iterations);
        if nonneg {
            prop_assert!(rep.solution.x.iter().all(|&v| v >= 0.0));
        }
        let empty = dot(prob.y(), prob.y());
        prop_assert!(rep.solution.cost <= empty);
    }
}
