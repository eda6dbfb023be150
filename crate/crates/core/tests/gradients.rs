use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiefel_givens::checks::{gradient_mismatch_for, gradient_models, random_point};
use stiefel_givens::models::uniform_stiefel_target;
use stiefel_givens::oracle::{finite_difference_gradient, gradient_mismatch};
use stiefel_givens::{angle_indices, make_shape, AngleKind, ChartConfig, Evaluator, ModelTarget};

#[test]
fn uniform_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for (n, p) in [(3, 2), (5, 3), (10, 4)] {
        let model: Arc<dyn ModelTarget> = Arc::new(uniform_stiefel_target(make_shape(n, p).unwrap()));
        for mirrored in [false, true] {
            let chart = ChartConfig {
                mirrored,
                ..ChartConfig::default()
            };
            let worst = gradient_mismatch_for(model.clone(), chart, 50, &mut rng).unwrap();
            assert!(worst <= 1.0, "({n},{p}) mirrored={mirrored}: {worst}");
        }
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, model, chart) in gradient_models(3).unwrap() {
        let worst = gradient_mismatch_for(model, chart, 50, &mut rng).unwrap();
        assert!(worst <= 1.0, "{name}: {worst}");
    }
}

/// Scaling a full-circle pair changes only the radius term, so the
/// derivative along the angle, `g . (-y, x)`, is unchanged.
#[test]
fn angular_derivative_ignores_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (_, model, chart) in gradient_models(5).unwrap() {
        let mut ev = Evaluator::new(model, chart).unwrap();
        let mut g = vec![0.0; ev.dim()];
        for _ in 0..20 {
            let q = random_point(&mut ev, &mut rng);
            let mut pos = 0;
            for ai in angle_indices(ev.shape()) {
                if ai.kind != AngleKind::FullCircle {
                    pos += 1;
                    continue;
                }
                let angular = |ev: &mut Evaluator, q: &[f64], g: &mut Vec<f64>| {
                    ev.log_density_grad(q, g);
                    -q[pos + 1] * g[pos] + q[pos] * g[pos + 1]
                };
                let base = angular(&mut ev, &q, &mut g);
                let scale = rng.random_range(0.8..1.25);
                let mut scaled = q.clone();
                scaled[pos] *= scale;
                scaled[pos + 1] *= scale;
                let moved = angular(&mut ev, &scaled, &mut g);
                assert!((base - moved).abs() <= 1e-8 * base.abs().max(1.0), "{base} vs {moved}");
                pos += 2;
            }
        }
    }
}

#[test]
fn aux_gradient_blocks_are_checked_too() {
    // the PPCA noise variance sits last; perturbing only it must match
    let (_, model, chart) = gradient_models(7).unwrap().swap_remove(1);
    let mut ev = Evaluator::new(model, chart).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let q = random_point(&mut ev, &mut rng);
    let mut g = vec![0.0; ev.dim()];
    ev.log_density_grad(&q, &mut g);
    let last = q.len() - 1;
    let fd = finite_difference_gradient(|v| ev.clone().log_density(v), &q, 1e-5);
    assert!(gradient_mismatch(&g[last..], &fd[last..], 1e-5, 1e-8) <= 1.0);
    assert!(g[last] != 0.0);
}
