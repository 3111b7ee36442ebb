mod common;

use adafactor::optim::{AdafactorConfig, ClipConfig, Optimizer, OptimizerConfig, SgdConfig, SlotKind};
use adafactor::problems::{
    Batch, EmbeddingScaleProblem, EmbeddingVariant, LogisticRegression, Problem, QuadraticBowl, ScaleJumpStream,
    StreamProblem, TwoLayerNet,
};
use adafactor::schedule::{DecaySchedule, StepSizeSchedule};

use common::{flat, max_fd_relative_error, perturbed_slots};

fn all_problems() -> Vec<Box<dyn Problem>> {
    let mut problems: Vec<Box<dyn Problem>> = vec![
        Box::new(QuadraticBowl::new(8, 10.0, 0.0, 1)),
        Box::new(QuadraticBowl::new(5, 100.0, 0.5, 2)),
        Box::new(LogisticRegression::new(6, 40, 8, 3)),
        Box::new(LogisticRegression::with_classes(5, 30, 10, 3, 4)),
        Box::new(TwoLayerNet::with_data(4, 6, 3, 20, 5, 0.3, 5)),
        Box::new(StreamProblem::new(ScaleJumpStream::new(3, 1.0, 4.0, SlotKind::Matrix { rows: 2, cols: 3 }))),
    ];
    for v in EmbeddingVariant::ALL {
        problems.push(Box::new(EmbeddingScaleProblem::with_sizes(6, v, 7, 4, 6)));
    }
    problems
}

#[test]
fn gradients_match_central_differences() {
    for p in all_problems() {
        for seed in [11, 12, 13] {
            let slots = perturbed_slots(p.as_ref(), seed, 0.5);
            // The noisy quadratic adds noise to the step gradient only.
            let noisy = p.name() == "quad" && p.loss_and_grad(&slots, Batch::Step(1)).1 != p.loss_and_grad(&slots, Batch::Full).1;
            let batches: &[Batch] = if noisy { &[Batch::Full] } else { &[Batch::Full, Batch::Step(seed)] };
            for &batch in batches {
                let err = max_fd_relative_error(p.as_ref(), &slots, batch, 1e-5, 1e-6);
                let limit = match p.name() {
                    "quad" | "logreg" => 1e-6,
                    _ => 1e-5,
                };
                assert!(err < limit, "{} seed {seed} {batch:?}: {err:e}", p.name());
            }
        }
    }
}

#[test]
fn quadratic_gradient_vanishes_at_the_optimum() {
    let p = QuadraticBowl::new(6, 10.0, 0.0, 1);
    let mut slots = p.initial_slots();
    slots[0].value.as_mut_slice().fill(0.0);
    let (loss, g) = p.loss_and_grad(&slots, Batch::Step(1));
    assert_eq!(loss, 0.0);
    assert!(g[0].as_slice().iter().all(|&v| v == 0.0));
    assert_eq!(p.optimum(), Some(0.0));
}

#[test]
fn quadratic_noise_is_added_to_step_gradients_only() {
    let (clean, noisy) = (QuadraticBowl::new(4, 10.0, 0.0, 9), QuadraticBowl::new(4, 10.0, 0.25, 9));
    let slots = clean.initial_slots();
    let (l_full, g_full) = noisy.loss_and_grad(&slots, Batch::Full);
    let (l_step, g_step) = noisy.loss_and_grad(&slots, Batch::Step(3));
    assert_eq!(l_full, l_step);
    assert_eq!(g_full, clean.loss_and_grad(&slots, Batch::Step(3)).1);
    let diff: Vec<f64> = g_step[0].as_slice().iter().zip(g_full[0].as_slice()).map(|(a, b)| a - b).collect();
    assert!(diff.iter().all(|d| d.abs() > 0.0 && d.abs() < 0.25 * 6.0));
    assert_ne!(g_step, noisy.loss_and_grad(&slots, Batch::Step(4)).1);
}

#[test]
fn problems_are_deterministic_given_seed() {
    for (a, b) in all_problems().into_iter().zip(all_problems()) {
        let (sa, sb) = (a.initial_slots(), b.initial_slots());
        assert_eq!(sa, sb, "{}", a.name());
        for batch in [Batch::Full, Batch::Step(1), Batch::Step(77)] {
            let (la, ga) = a.loss_and_grad(&sa, batch);
            let (lb, gb) = b.loss_and_grad(&sb, batch);
            assert_eq!(la.to_bits(), lb.to_bits(), "{}", a.name());
            assert_eq!(flat(&ga), flat(&gb), "{}", a.name());
        }
    }
}

#[test]
fn different_seeds_give_different_problems() {
    let a = QuadraticBowl::new(8, 10.0, 0.0, 1).initial_slots();
    let b = QuadraticBowl::new(8, 10.0, 0.0, 2).initial_slots();
    assert_ne!(a, b);
}

#[test]
fn quadratic_descends_monotonically_under_stable_sgd() {
    let p = QuadraticBowl::new(10, 50.0, 0.0, 7);
    let l_max = p.eigenvalues().iter().copied().fold(0.0, f64::max);
    for fraction in [0.1, 0.5, 0.99] {
        let lr = fraction * 2.0 / l_max;
        let config = OptimizerConfig::Sgd(SgdConfig {
            lr: StepSizeSchedule::constant(lr),
        });
        let mut slots = p.initial_slots();
        let mut opt = Optimizer::new(config, &slots).unwrap();
        let mut previous = p.loss(&slots, Batch::Full);
        for t in 1..=300 {
            let (_, g) = p.loss_and_grad(&slots, Batch::Step(t));
            opt.step(&mut slots, &g).unwrap();
            let loss = p.loss(&slots, Batch::Full);
            assert!(loss <= previous, "lr {lr}: step {t} rose from {previous} to {loss}");
            previous = loss;
        }
    }
}

#[test]
fn constant_stream_has_unit_rms_update() {
    let p = StreamProblem::new(ScaleJumpStream::new(50, 3.0, 3.0, SlotKind::Matrix { rows: 4, cols: 5 }));
    for decay in [DecaySchedule::Increasing(0.8), DecaySchedule::ConstantBiasCorrected(0.999)] {
        let config = OptimizerConfig::Adafactor(AdafactorConfig {
            decay,
            clip: ClipConfig::Disabled,
            ..AdafactorConfig::default()
        });
        let mut slots = p.initial_slots();
        let mut opt = Optimizer::new(config, &slots).unwrap();
        for t in 1..=200 {
            let (_, g) = p.loss_and_grad(&slots, Batch::Step(t));
            let stats = opt.step(&mut slots, &g).unwrap();
            assert!((stats[0].rms_u - 1.0).abs() < 1e-12, "{decay:?} t={t}: {}", stats[0].rms_u);
        }
    }
}

#[test]
fn relative_step_scales_with_initialization() {
    let d = 64;
    let first_alpha = |variant| {
        let p = EmbeddingScaleProblem::new(d, variant, 3);
        let mut slots = p.initial_slots();
        let mut opt = Optimizer::new(OptimizerConfig::Adafactor(AdafactorConfig::default()), &slots).unwrap();
        let (_, g) = p.loss_and_grad(&slots, Batch::Step(1));
        let index = slots.iter().position(|s| s.name == "embedding").unwrap();
        opt.step(&mut slots, &g).unwrap()[index].alpha
    };
    let ratio = first_alpha(EmbeddingVariant::UnitInit) / first_alpha(EmbeddingVariant::SmallInit);
    assert!((ratio - (d as f64).sqrt()).abs() < 1e-9, "ratio {ratio}");
}

#[test]
fn embedding_full_loss_is_bounded_below_by_target_entropy() {
    let p = EmbeddingScaleProblem::new(16, EmbeddingVariant::Scaled, 1);
    let slots = p.initial_slots();
    assert!(p.loss(&slots, Batch::Full) >= p.entropy());
}

#[test]
fn logistic_regression_starts_at_log_two() {
    let p = LogisticRegression::new(16, 256, 32, 1);
    let loss = p.loss(&p.initial_slots(), Batch::Full);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
}
