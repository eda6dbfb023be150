use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stiefel_givens::checks::random_angles;
use stiefel_givens::models::{ppca_target, simulate_ppca, PpcaData, PpcaSimulation};
use stiefel_givens::{
    constrain, make_shape, unconstrain, AngleVector, ChartConfig, Evaluator, ModelTarget, UnconstrainedVector,
};

#[test]
fn constrain_inverts_unconstrain() {
    let cfg = ChartConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (n, p) in [(3, 2), (5, 3), (10, 4), (4, 4)] {
        let shape = make_shape(n, p).unwrap();
        for _ in 0..1000 {
            let theta = random_angles(shape, cfg.epsilon + 1e-6, &mut rng);
            let res = constrain(&unconstrain(&theta, &cfg).unwrap(), &cfg, shape).unwrap();
            assert!(!res.degenerate);
            for (a, b) in theta.values().iter().zip(res.theta.values()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn boundary_angle_cannot_be_unconstrained() {
    let cfg = ChartConfig::default();
    let shape = make_shape(3, 1).unwrap();
    let theta = AngleVector::new(shape, vec![0.0, FRAC_PI_2 - cfg.epsilon]).unwrap();
    assert!(unconstrain(&theta, &cfg).is_err());
}

/// For a fixed radius the radius term is the same at every angle.
#[test]
fn radius_term_does_not_depend_on_angle() {
    let cfg = ChartConfig::default();
    let shape = make_shape(2, 1).unwrap();
    for r in [0.8, 1.0, 1.3] {
        let base = constrain(&UnconstrainedVector::new(shape, vec![r, 0.0]).unwrap(), &cfg, shape)
            .unwrap()
            .log_adjust;
        for k in 0..=62 {
            let t = -3.1 + 0.1 * k as f64;
            let xi = UnconstrainedVector::new(shape, vec![r * t.cos(), r * t.sin()]).unwrap();
            let res = constrain(&xi, &cfg, shape).unwrap();
            assert!((res.log_adjust - base).abs() < 1e-12);
            assert!((res.theta.values()[0] - t).abs() < 1e-12);
        }
    }
}

fn ppca_evaluator(mirrored: bool) -> Evaluator {
    let x = simulate_ppca(&PpcaSimulation::default(), 4);
    let model: Arc<dyn ModelTarget> = Arc::new(ppca_target(PpcaData::from_observations(&x).unwrap(), 2).unwrap());
    Evaluator::new(
        model,
        ChartConfig {
            mirrored,
            ..ChartConfig::default()
        },
    )
    .unwrap()
}

/// Log target at lead angle `lead` of column `col`, other coordinates fixed.
fn at_lead(ev: &mut Evaluator, col: usize, lead: f64) -> f64 {
    // layout for (3,2): x12 y12 z13 x23 y23 | lambda(2) sigma2
    let mut q = vec![1.0, 0.0, 0.4, 0.6, 0.8, 0.3, -0.2, 0.1];
    let pos = if col == 0 { 0 } else { 3 };
    q[pos] = lead.cos();
    q[pos + 1] = lead.sin();
    ev.log_density(&q)
}

#[test]
fn mirrored_target_is_continuous_across_seam() {
    let mut ev = ppca_evaluator(true);
    for col in [0, 1] {
        for seam in [FRAC_PI_2, -FRAC_PI_2] {
            let mut gaps = Vec::new();
            for delta in [1e-3, 1e-5] {
                let a = at_lead(&mut ev, col, seam - delta);
                let b = at_lead(&mut ev, col, seam + delta);
                gaps.push((a - b).abs());
            }
            // shrinking with delta, roughly in proportion
            assert!(gaps[1] <= gaps[0] * 0.05 + 1e-12, "col {col} seam {seam}: {gaps:?}");
            assert!(gaps[1] < 1e-3);
        }
    }
}

#[test]
fn mirrored_and_plain_charts_agree_where_no_mirroring_happens() {
    let mut plain = ppca_evaluator(false);
    let mut mirrored = ppca_evaluator(true);
    for lead in [-1.2, -0.3, 0.0, 0.9, 1.5] {
        assert_eq!(at_lead(&mut plain, 0, lead), at_lead(&mut mirrored, 0, lead));
    }
}

proptest! {
    #[test]
    fn constrained_angles_stay_in_range(
        xi in prop::collection::vec(-30.0f64..30.0, 12),
        mirrored in any::<bool>(),
    ) {
        // (5,2): 7 angles, 9 chart coordinates
        let shape = make_shape(5, 2).unwrap();
        let cfg = ChartConfig { mirrored, ..ChartConfig::default() };
        let xi = UnconstrainedVector::new(shape, xi[..9].to_vec()).unwrap();
        let res = constrain(&xi, &cfg, shape).unwrap();
        for (ai, t) in stiefel_givens::angle_indices(shape).iter().zip(res.theta.values()) {
            let (lo, hi) = ai.bounds();
            prop_assert!((lo..=hi).contains(t));
        }
        if !res.degenerate {
            prop_assert!(res.log_adjust.is_finite());
        }
    }
}
