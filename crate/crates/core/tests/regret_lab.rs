use nol_core::conditioners::{ComparatorBall, EnclosingBox, NormIndex};
use nol_core::learners::{run_stream, LearnerConfig, LearnerKind};
use nol_core::regret::*;
use nol_core::{Loss, SparseExample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ball_of(xs: &[SparseExample], c: f64, q: NormIndex) -> ComparatorBall {
    ComparatorBall::new(EnclosingBox::from_examples(xs), c, q).unwrap()
}

fn two_dim(loss: Loss, seed: u64, len: usize) -> Vec<SparseExample> {
    let mut spec = InstanceSpec::new(2, len, loss);
    spec.density = 1.0;
    let mut xs = random_instance(&spec, seed).unwrap();
    // force d = 2
    xs.retain(|x| !x.is_empty());
    if xs.iter().all(|x| x.dim() < 2) {
        xs.push(SparseExample::new(vec![(1, 0.5)], xs[0].label()).unwrap());
    }
    xs
}

#[test]
fn grid_and_subgradient_oracles_agree_in_two_dimensions() {
    for (k, loss) in [Loss::Squared, Loss::Logistic, Loss::Hinge].into_iter().enumerate() {
        for q in [NormIndex::L1, NormIndex::L2] {
            let xs = two_dim(loss, 10 + k as u64, 80);
            let ball = ball_of(&xs, 1.0, q);
            let a = best_in_hindsight(&xs, loss, &ball, HindsightOracle::grid()).unwrap();
            let b = best_in_hindsight(&xs, loss, &ball, HindsightOracle::subgradient(7)).unwrap();
            let scale = a.total_loss.max(b.total_loss).max(1.0);
            assert!(
                (a.total_loss - b.total_loss).abs() <= ORACLE_TOLERANCE * scale,
                "{loss} {q:?}: grid {} vs subgradient {}",
                a.total_loss,
                b.total_loss
            );
            assert!(ball.contains(&a.w, 1e-9) && ball.contains(&b.w, 1e-9));
        }
    }
}

#[test]
fn hindsight_is_equivariant_under_rescaling() {
    let xs = random_instance(&InstanceSpec::new(4, 150, Loss::Squared), 21).unwrap();
    let d = [4.0, 0.125, 1024.0, 0.5];
    let ys = apply_scaling(&xs, &d).unwrap();
    let oracle = HindsightOracle::Subgradient {
        iterations: 2000,
        restarts: 2,
        seed: 3,
    };
    let a = best_in_hindsight(&xs, Loss::Squared, &ball_of(&xs, 1.0, NormIndex::L1), oracle).unwrap();
    let b = best_in_hindsight(&ys, Loss::Squared, &ball_of(&ys, 1.0, NormIndex::L1), oracle).unwrap();
    assert_eq!(a.total_loss, b.total_loss);
    for ((wa, wb), di) in a.w.iter().zip(&b.w).zip(d) {
        assert_eq!(*wa, wb * di);
    }
}

#[test]
fn scale_invariant_learner_regret_is_invariant() {
    let xs = random_instance(&InstanceSpec::new(3, 300, Loss::Squared), 4).unwrap();
    let d = [0.25, 64.0, 2.0];
    let ys = apply_scaling(&xs, &d).unwrap();
    let oracle = HindsightOracle::Subgradient {
        iterations: 5000,
        restarts: 3,
        seed: 1,
    };
    let regret = |data: &[SparseExample]| {
        let run = run_stream(
            LearnerConfig::new(LearnerKind::Nag, 0.5),
            Loss::Squared,
            data.iter().cloned().map(Ok),
        )
        .unwrap();
        let best = best_in_hindsight(data, Loss::Squared, &ball_of(data, 1.0, NormIndex::L1), oracle).unwrap();
        regret_of_losses(run.losses.iter().copied(), data, Loss::Squared, &best.w).unwrap()
    };
    let (a, b) = (regret(&xs), regret(&ys));
    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn constant_scale_streams_match_the_two_pass_form() {
    // |x_ti| equal to its range whenever present, so every delta_i = 1
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = [3.0, 0.01, 250.0];
    let xs: Vec<SparseExample> = (0..200)
        .map(|_| {
            let f = (0..3)
                .filter_map(|i| {
                    if rng.random_bool(0.7) {
                        Some((i, if rng.random_bool(0.5) { m[i] } else { -m[i] }))
                    } else {
                        None
                    }
                })
                .collect();
            SparseExample::new(f, if rng.random_bool(0.5) { 1.0 } else { -1.0 }).unwrap()
        })
        .collect();
    let r = theorem2_check(&xs, Loss::Hinge, 1.0, HindsightOracle::subgradient(2)).unwrap();
    assert!(r.delta.as_ref().unwrap().iter().all(|&d| d == 1.0));
    let bounds = EnclosingBox::from_examples(&xs);
    let cond = nol_core::conditioners::DiagonalConditioner::streaming(1.0, std::f64::consts::SQRT_2).unwrap();
    let ledger = run_conditioned(
        &xs,
        Loss::Hinge,
        cond,
        &Projection::Running {
            c: 1.0,
            q: NormIndex::L1,
        },
        None,
    )
    .unwrap();
    let closed = theorem1_bound(&ledger.grad_sq(), &bounds, 1.0);
    assert!((r.bound_value - closed).abs() <= 1e-9 * closed);
    assert!(r.passed, "{r:?}");
}

#[test]
fn clipped_projected_rounds_respect_r_max() {
    for (k, loss) in [Loss::Squared, Loss::Hinge, Loss::Logistic].into_iter().enumerate() {
        let xs = random_instance(&InstanceSpec::new(4, 300, loss), 40 + k as u64).unwrap();
        let c = 1.5;
        let cond = nol_core::conditioners::DiagonalConditioner::streaming(c, std::f64::consts::SQRT_2).unwrap();
        let ledger = run_conditioned(&xs, loss, cond, &Projection::Running { c, q: NormIndex::L1 }, Some(c)).unwrap();
        let best = best_in_hindsight(
            &xs,
            loss,
            &ball_of(&xs, c, NormIndex::L1),
            HindsightOracle::subgradient(1),
        )
        .unwrap();
        let max_y = xs.iter().fold(0.0f64, |m, x| m.max(x.label().abs()));
        let cap = r_max(loss, c, max_y);
        for term in per_round_regret(&ledger, &best.w).unwrap() {
            assert!(term <= cap + 1e-12, "{loss}: {term} > {cap}");
        }
        assert!(ledger.rounds.iter().all(|r| r.yhat.abs() <= c));
    }
}

#[test]
fn small_suites_pass() {
    for check in [CheckKind::Lemma1, CheckKind::Thm1, CheckKind::Thm2, CheckKind::Cor1] {
        let mut cfg = SuiteConfig::new(check, 6, 99);
        cfg.len = 120;
        cfg.oracle_iterations = 5000;
        let (reports, summary) = run_suite(&cfg).unwrap();
        assert_eq!(reports.len(), 6);
        assert_eq!(summary.failures, 0, "{check:?}: {reports:#?}");
        if check == CheckKind::Cor1 {
            assert!(reports
                .iter()
                .all(|r| r.tau == Some(corollary1_tau(5, 0.1, 0.5).unwrap())));
        }
    }
}

#[test]
fn lemma1_suite_with_constant_conditioner_has_zero_middle() {
    let mut cfg = SuiteConfig::new(CheckKind::Lemma1, 10, 5);
    cfg.constant_conditioner = true;
    let (reports, summary) = run_suite(&cfg).unwrap();
    assert_eq!(summary.failures, 0);
    for r in &reports {
        assert_eq!(r.components.iter().find(|(n, _)| n == "middle").unwrap().1, 0.0);
    }
}

#[test]
fn suites_are_deterministic() {
    let mut cfg = SuiteConfig::new(CheckKind::Thm2, 4, 1);
    cfg.len = 60;
    cfg.oracle_iterations = 1000;
    let a = run_suite(&cfg).unwrap();
    let b = run_suite(&cfg).unwrap();
    assert_eq!(a, b);
}
