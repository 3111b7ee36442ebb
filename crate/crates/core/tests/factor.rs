mod common;

use adafactor::factor::{i_divergence, project_rank_one, total_divergence, RankOneFactors};
use adafactor::rng::SplitMix64;
use adafactor::tensor::{DenseMatrix, DenseVector};
use proptest::prelude::*;

use common::{alternating_rank_one, i_div_total};

fn nonnegative_matrix() -> impl Strategy<Value = DenseMatrix> {
    (1usize..=6, 1usize..=7).prop_flat_map(|(n, m)| {
        prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 1e-3f64..10.0], n * m)
            .prop_filter("not all zero", |v| v.iter().any(|&x| x > 0.0))
            .prop_map(move |v| DenseMatrix::new(n, m, v).expect("finite"))
    })
}

proptest! {
    #[test]
    fn projection_is_no_worse_than_alternating_minimization(v in nonnegative_matrix(), seed in any::<u64>()) {
        let closed = total_divergence(&v, &project_rank_one(&v).unwrap()).unwrap();
        let (r, s) = alternating_rank_one(&v, seed, 200);
        prop_assert!(closed <= i_div_total(&v, &r, &s) + 1e-8);
    }

    #[test]
    fn projection_preserves_row_and_column_sums(v in nonnegative_matrix()) {
        let p = project_rank_one(&v).unwrap().product();
        for (a, b) in p.row_sums().as_slice().iter().zip(v.row_sums().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        for (a, b) in p.col_sums().as_slice().iter().zip(v.col_sums().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn divergence_is_nonnegative(p in 0.0f64..100.0, q in 1e-6f64..100.0) {
        prop_assert!(i_divergence(p, q).unwrap() >= -1e-12);
    }

    #[test]
    fn rescaling_factors_leaves_the_product_unchanged(v in nonnegative_matrix(), alpha in 0.01f64..100.0) {
        let f = project_rank_one(&v).unwrap();
        let a = f.product();
        let b = f.rescaled(alpha).product();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn perturbing_the_optimum_never_helps() {
    let mut rng = SplitMix64::new(41);
    for _ in 0..30 {
        let (n, m) = (2 + rng.below(5), 2 + rng.below(6));
        let v = DenseMatrix::from_fn(n, m, |_, _| rng.uniform(0.0, 4.0));
        let best = project_rank_one(&v).unwrap();
        let base = total_divergence(&v, &best).unwrap();
        for _ in 0..20 {
            let jitter = |x: &DenseVector, rng: &mut SplitMix64| {
                DenseVector::new(x.as_slice().iter().map(|&a| a * (1.0 + 0.05 * rng.uniform(-1.0, 1.0))).collect())
                    .unwrap()
            };
            let moved = RankOneFactors {
                r: jitter(&best.r, &mut rng),
                s: jitter(&best.s, &mut rng),
            };
            assert!(total_divergence(&v, &moved).unwrap() >= base - 1e-12);
        }
    }
}

#[test]
fn rank_one_inputs_are_recovered() {
    let mut rng = SplitMix64::new(42);
    for _ in 0..20 {
        let (n, m) = (1 + rng.below(6), 1 + rng.below(7));
        let a: Vec<f64> = (0..n).map(|_| rng.uniform(0.1, 3.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.uniform(0.1, 3.0)).collect();
        let v = DenseMatrix::from_fn(n, m, |i, j| a[i] * b[j]);
        let p = project_rank_one(&v).unwrap().product();
        for (x, y) in p.as_slice().iter().zip(v.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * y);
        }
        assert!(total_divergence(&v, &project_rank_one(&v).unwrap()).unwrap().abs() < 1e-12);
    }
}

#[test]
fn rank_two_input_is_only_approximated() {
    let v = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let f = project_rank_one(&v).unwrap();
    let p = f.product();
    for &x in p.as_slice() {
        assert!((x - 0.5).abs() < 1e-15);
    }
    // d(1, 0.5) twice plus d(0, 0.5) twice.
    let expected = 2.0 * (2f64.ln() - 0.5) + 2.0 * 0.5;
    assert!((total_divergence(&v, &f).unwrap() - expected).abs() < 1e-12);
}
