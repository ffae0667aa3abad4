//! Linear SVM trainer against independent oracles: a dense grid search for
//! the optimum objective, exhaustive enumeration for XOR, and closed forms.

use camtrap::svm::{logistic, objective, train_linear_svm, LinearModel, SvmTrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod oracles;

use oracles::{grid_optimum, oracle_config, rows, separable_set, ORACLE_LAMBDA};

#[test]
fn four_point_set_reaches_grid_optimum() {
    let points = [[1.0, 0.5], [0.6, 1.0], [-0.8, -0.2], [-0.3, -0.9]];
    let labels = [1.0, 1.0, -1.0, -1.0];
    let fit = train_linear_svm(&rows(&points), &labels, &oracle_config(0)).unwrap();
    let trained = *fit.objective.last().unwrap();
    let optimum = grid_optimum(&points, &labels, ORACLE_LAMBDA);
    assert!(
        trained <= 1.05 * optimum,
        "trained {trained} vs grid optimum {optimum}"
    );
    assert_eq!(fit.model.accuracy(&rows(&points), &labels).unwrap(), 1.0);
}

#[test]
fn separable_pair_is_classified_with_small_lambda() {
    let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
    let y = [1.0, -1.0];
    let cfg = SvmTrainConfig {
        epochs: 50,
        lambda: 1e-3,
        seed: 0,
    };
    let fit = train_linear_svm(&x, &y, &cfg).unwrap();
    assert_eq!(fit.model.accuracy(&x, &y).unwrap(), 1.0);
    assert_eq!(fit.model.predict_label(&x[0]).unwrap(), 1);
    assert_eq!(fit.model.predict_label(&x[1]).unwrap(), -1);
}

#[test]
fn random_separable_sets_reach_grid_optimum() {
    oracles::svm_optimality(7, 10).unwrap();
}

#[test]
fn xor_is_capped_at_three_quarters() {
    oracles::svm_xor(5).unwrap();
}

fn assert_monotone(trace: &[f64], what: &str) {
    for (e, pair) in trace.windows(2).enumerate() {
        assert!(
            pair[1] <= pair[0] + 1e-6,
            "{what}: epoch-averaged objective rose from {} to {} at epoch {}",
            pair[0],
            pair[1],
            e + 1
        );
    }
}

#[test]
fn epoch_averaged_objective_is_non_increasing() {
    let pair = (vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, -1.0]);
    let four = (
        rows(&[[1.0, 0.5], [0.6, 1.0], [-0.8, -0.2], [-0.3, -0.9]]),
        vec![1.0, 1.0, -1.0, -1.0],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fixtures = vec![("pair", pair), ("four", four)];
    for _ in 0..10 {
        let (p, l) = separable_set(&mut rng);
        fixtures.push(("random", (rows(&p), l)));
    }
    for (name, (x, y)) in &fixtures {
        for (lambda, seed) in [(1e-3, 0), (1e-2, 1), (ORACLE_LAMBDA, 2)] {
            let cfg = SvmTrainConfig {
                epochs: 200,
                lambda,
                seed,
            };
            let fit = train_linear_svm(x, y, &cfg).unwrap();
            assert_monotone(&fit.epoch_averaged_objective, name);
            let last = fit.objective.last().unwrap();
            let direct = objective(&fit.model.weights, fit.model.bias, lambda, x, y);
            assert_eq!(*last, direct);
        }
    }
}

#[test]
fn logistic_of_five_exceeds_099() {
    let m = LinearModel {
        weights: vec![1.0],
        bias: 0.0,
        lambda: 1.0,
    };
    let p = m.margin_to_probability(&[5.0], 1.0).unwrap();
    assert!((p - 1.0 / (1.0 + (-5.0f64).exp())).abs() < 1e-15);
    assert!(p > 0.99);
    assert_eq!(m.margin_to_probability(&[0.0], 1.0).unwrap(), 0.5);
}

fn model_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (prop::collection::vec(-3.0..3.0f64, 3), -2.0..2.0f64)
}

proptest! {
    #[test]
    fn margin_is_affine((w, b) in model_strategy(), x in prop::collection::vec(-2.0..2.0f64, 3), y in prop::collection::vec(-2.0..2.0f64, 3)) {
        let m = LinearModel { weights: w, bias: b, lambda: 1.0 };
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, c)| a + c).collect();
        let lhs = m.predict_margin(&xy).unwrap();
        let rhs = m.predict_margin(&x).unwrap() + m.predict_margin(&y).unwrap() - b;
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn labels_follow_margin_sign_and_ignore_positive_scaling((w, b) in model_strategy(), x in prop::collection::vec(-2.0..2.0f64, 3), c in 0.01..100.0f64) {
        let m = LinearModel { weights: w.clone(), bias: b, lambda: 1.0 };
        let margin = m.predict_margin(&x).unwrap();
        let label = m.predict_label(&x).unwrap();
        prop_assert_eq!(label, if margin >= 0.0 { 1 } else { -1 });
        let scaled = LinearModel { weights: w.iter().map(|v| v * c).collect(), bias: b * c, lambda: 1.0 };
        // c·margin keeps its sign unless rounding flips an exact zero
        if margin.abs() > 1e-12 {
            prop_assert_eq!(scaled.predict_label(&x).unwrap(), label);
        }
    }

    #[test]
    fn probability_is_increasing_in_margin(a in -30.0..30.0f64, d in 1e-3..10.0f64, scale in 0.1..5.0f64) {
        let (p, q) = (logistic(scale * a), logistic(scale * (a + d)));
        prop_assert!(p <= q);
        // past 20 the step can vanish below one ulp of 1.0
        if scale * (a + d) < 20.0 {
            prop_assert!(p < q);
        }
        prop_assert!(p > 0.0 && p <= 1.0);
    }
}
