use approx::assert_relative_eq;
use locasso_core::{
    brute_force_oracle, check_kkt, solve, solve_from, LassoProblem, Matrix, SolveOptions,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(seed: u64, n: usize, p: usize, lambda_frac: f64) -> LassoProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let a = Matrix::from_row_slice(n, p, &a);
    let probe = LassoProblem::new(z.clone(), a.clone(), 0.0).unwrap();
    let lambda = lambda_frac * 2.0 * probe.lambda_max();
    LassoProblem::new(z, a, lambda).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_sign_pattern_oracle(seed in any::<u64>(), n in 3usize..25, p in 1usize..6, frac in 0.0f64..1.0) {
        let prob = random_problem(seed, n, p, frac);
        let sol = solve(&prob, &SolveOptions::default());
        prop_assert!(sol.converged);
        let oracle = brute_force_oracle(&prob).unwrap();
        let best = prob.objective(&oracle);
        prop_assert!((sol.objective_value - best).abs() <= 1e-8 * best.max(1.0));
        prop_assert!(max_diff(&sol.fitted, &prob.fitted(&oracle)) <= 1e-6);
    }

    #[test]
    fn output_satisfies_optimality_system(seed in any::<u64>(), n in 2usize..40, p in 1usize..12, frac in 0.0f64..1.2) {
        let prob = random_problem(seed, n, p, frac);
        let sol = solve(&prob, &SolveOptions::default());
        prop_assert!(sol.converged);
        prop_assert!(check_kkt(&sol.theta, &prob, 1e-8).holds);
        prop_assert!(sol.monotone);
    }

    #[test]
    fn scaling_response_and_penalty_scales_solution(seed in any::<u64>(), c in 0.1f64..10.0, frac in 0.05f64..0.9) {
        let prob = random_problem(seed, 20, 4, frac);
        let scaled = LassoProblem::new(
            prob.z().iter().map(|v| c * v).collect(),
            prob.a().clone(),
            c * prob.lambda(),
        ).unwrap();
        let s1 = solve(&prob, &SolveOptions::default());
        let s2 = solve(&scaled, &SolveOptions::default());
        for (u, v) in s1.fitted.iter().zip(&s2.fitted) {
            prop_assert!((c * u - v).abs() <= 1e-6 * c.max(1.0));
        }
        prop_assert!((c * c * s1.objective_value - s2.objective_value).abs() <= 1e-7 * (c * c).max(1.0));
    }

    #[test]
    fn fitted_values_do_not_depend_on_start(seed in any::<u64>(), start_seed in any::<u64>(), frac in 0.01f64..0.9) {
        // more columns than rows, so minimizers need not be unique
        let prob = random_problem(seed, 5, 9, frac);
        let mut rng = ChaCha8Rng::seed_from_u64(start_seed);
        let start: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let a = solve(&prob, &SolveOptions::default());
        let b = solve_from(&prob, &SolveOptions::default(), &start, |_| {});
        prop_assert!(a.converged && b.converged);
        prop_assert!(max_diff(&a.fitted, &b.fitted) <= 1e-6);
    }

    #[test]
    fn column_permutation_permutes_solution(seed in any::<u64>(), frac in 0.05f64..0.9) {
        let prob = random_problem(seed, 25, 5, frac);
        let perm = [3usize, 0, 4, 1, 2];
        let permuted = LassoProblem::new(prob.z().to_vec(), prob.a().select_columns(&perm), prob.lambda()).unwrap();
        let s = solve(&prob, &SolveOptions::default());
        let t = solve(&permuted, &SolveOptions::default());
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((t.theta[k] - s.theta[j]).abs() <= 1e-6);
        }
    }
}

#[test]
fn penalty_above_lambda_max_gives_zero() {
    let prob = random_problem(3, 30, 6, 0.0);
    let lm = prob.lambda_max();
    let big = LassoProblem::new(prob.z().to_vec(), prob.a().clone(), lm * 1.0001).unwrap();
    let sol = solve(&big, &SolveOptions::default());
    assert!(sol.theta.iter().all(|&t| t == 0.0));
    assert_relative_eq!(sol.objective_value, big.objective(&[0.0; 6]));
}
