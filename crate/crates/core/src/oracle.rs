//! Reference implementations used to check the main code paths.
//!
//! Nothing here shares code with the Givens maps beyond calling the forward
//! map as a black box: uniform matrices come from a Householder QR of a
//! Gaussian matrix, the change-of-measure factor is recomputed as a `d x d`
//! determinant of finite-difference Jacobians, and distributions are
//! compared with Kolmogorov-Smirnov statistics.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::givens::{angle_indices, angles_to_matrix, AngleIndex, AngleKind, AngleVector, Shape, StiefelMatrix};

/// Uniform (Haar) draw from `V(p, n)`.
pub fn haar_sample(shape: Shape, seed: u64) -> StiefelMatrix {
    haar_sample_with(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// [`haar_sample`] drawing from an existing generator.
pub fn haar_sample_with(shape: Shape, rng: &mut ChaCha8Rng) -> StiefelMatrix {
    let g = DMatrix::from_fn(shape.n(), shape.p(), |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..shape.p() {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    StiefelMatrix::from_raw(shape, q)
}

/// Largest shape [`numeric_log_measure`] accepts.
pub const NUMERIC_MEASURE_MAX: (usize, usize) = (8, 4);

/// `log |det|` of the `d x d` matrix whose block row `i` is
/// `G[:, i+1..n]^T J_i`, where `J_i` is the finite-difference Jacobian of
/// column `i` of `Y` and `G` the full `n x n` rotation product.
pub fn numeric_log_measure(theta: &AngleVector) -> Result<f64> {
    let shape = theta.shape();
    let (n, p, d) = (shape.n(), shape.p(), shape.d());
    if n > NUMERIC_MEASURE_MAX.0 || p > NUMERIC_MEASURE_MAX.1 {
        return domain(format!("numeric measure limited to n <= 8, p <= 4; got ({n}, {p})"));
    }
    let h = 1e-6;
    let base = theta.values().to_vec();
    // jac[k] = dY / d theta_k
    let mut jac = Vec::with_capacity(d);
    for k in 0..d {
        let mut up = base.clone();
        let mut dn = base.clone();
        up[k] += h;
        dn[k] -= h;
        let diff = (angles_to_matrix(shape, &up)? - angles_to_matrix(shape, &dn)?) / (2.0 * h);
        jac.push(diff);
    }

    let g = full_rotation_product(shape, &base);
    let mut m = DMatrix::zeros(d, d);
    let mut row = 0;
    for i in 0..p {
        for col_g in (i + 1)..n {
            for k in 0..d {
                m[(row, k)] = (0..n).map(|r| g[(r, col_g)] * jac[k][(r, i)]).sum();
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, d);
    let det: f64 = m.lu().determinant();
    Ok(if det == 0.0 { f64::NEG_INFINITY } else { det.abs().ln() })
}

/// `G = R(1,2) R(1,3) ... R(p,n)` as an `n x n` matrix, built by dense
/// multiplication of explicit rotation matrices.
fn full_rotation_product(shape: Shape, angles: &[f64]) -> DMatrix<f64> {
    let n = shape.n();
    let mut g = DMatrix::identity(n, n);
    for (ai, &t) in angle_indices(shape).iter().zip(angles) {
        let (i, j) = (ai.i - 1, ai.j - 1);
        let mut rot = DMatrix::identity(n, n);
        rot[(i, i)] = t.cos();
        rot[(j, j)] = t.cos();
        rot[(i, j)] = -t.sin();
        rot[(j, i)] = t.sin();
        g *= rot;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n_samples: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// One-sample Kolmogorov-Smirnov distance between sorted `samples` and `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64) -> Result<KsReport> {
    if sorted.len() < 100 {
        return domain(format!("KS test needs at least 100 samples, got {}", sorted.len()));
    }
    let n = sorted.len() as f64;
    let mut stat = 0.0_f64;
    for (k, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        stat = stat.max(f - k as f64 / n).max((k + 1) as f64 / n - f);
    }
    let statistic = stat.clamp(0.0, 1.0);
    Ok(KsReport {
        statistic,
        n_samples: sorted.len(),
        threshold,
        pass: statistic < threshold,
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut stat) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / na - j as f64 / nb).abs());
    }
    stat
}

/// Marginal CDF of one Givens angle under the uniform distribution on the
/// Stiefel manifold: uniform for full-circle angles, `prop. to cos^k` for a
/// half-circle angle with exponent `k`.
#[derive(Debug, Clone)]
pub enum AngleCdf {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Cumulative integrals on a uniform grid, interpolated with cubic
    /// Hermite segments whose slopes are the exact density `cos^k / norm`.
    Tabulated {
        lo: f64,
        step: f64,
        exponent: i32,
        norm: f64,
        values: Vec<f64>,
    },
}

const CDF_GRID: usize = 4096;

impl AngleCdf {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AngleCdf::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            AngleCdf::Tabulated {
                lo,
                step,
                exponent,
                norm,
                values,
            } => {
                let t = (x - lo) / step;
                if t <= 0.0 {
                    return 0.0;
                }
                let cell = t.floor() as usize;
                if cell >= values.len() - 1 {
                    return 1.0;
                }
                let u = t - cell as f64;
                let slope = |k: usize| step * (lo + k as f64 * step).cos().max(0.0).powi(*exponent) / norm;
                let (h00, h10) = ((1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u), u * (1.0 - u) * (1.0 - u));
                let (h01, h11) = (u * u * (3.0 - 2.0 * u), u * u * (u - 1.0));
                let v = h00 * values[cell] + h10 * slope(cell) + h01 * values[cell + 1] + h11 * slope(cell + 1);
                v.clamp(0.0, 1.0)
            }
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (left, right) = (simpson(f, a, m), simpson(f, m, b));
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth - 1) + recurse(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    recurse(f, a, b, simpson(f, a, b), tol, depth)
}

pub fn angle_marginal_cdf(index: &AngleIndex) -> AngleCdf {
    match index.kind {
        AngleKind::FullCircle => AngleCdf::Uniform { lo: -PI, hi: PI },
        AngleKind::HalfCircle if index.exponent == 0 => AngleCdf::Uniform {
            lo: -FRAC_PI_2,
            hi: FRAC_PI_2,
        },
        AngleKind::HalfCircle => {
            let k = index.exponent as i32;
            let density = move |t: f64| t.cos().max(0.0).powi(k);
            let step = PI / CDF_GRID as f64;
            let mut values = Vec::with_capacity(CDF_GRID + 1);
            let mut acc = 0.0;
            values.push(0.0);
            for cell in 0..CDF_GRID {
                let a = -FRAC_PI_2 + cell as f64 * step;
                acc += adaptive_simpson(&density, a, a + step, 1e-14, 20);
                values.push(acc);
            }
            for v in &mut values {
                *v /= acc;
            }
            AngleCdf::Tabulated {
                lo: -FRAC_PI_2,
                step,
                exponent: k,
                norm: acc,
                values,
            }
        }
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|k| {
            work[k] = x[k] + step;
            let up = f(&work);
            work[k] = x[k] - step;
            let dn = f(&work);
            work[k] = x[k];
            (up - dn) / (2.0 * step)
        })
        .collect()
}

/// Worst violation of `|a - b| <= max(rel * max(|a|, |b|), abs_floor)`,
/// expressed as a ratio to the allowed error (`<= 1` passes).
pub fn gradient_mismatch(analytic: &[f64], numeric: &[f64], rel: f64, abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| {
            let allowed = (rel * a.abs().max(b.abs())).max(abs_floor);
            (a - b).abs() / allowed
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givens::{log_measure, make_shape, matrix_to_givens, orthonormality_error};
    use rand::RngExt;

    #[test]
    fn haar_output_is_orthonormal() {
        for (n, p) in [(3, 2), (5, 5), (9, 4)] {
            let y = haar_sample(make_shape(n, p).unwrap(), 42);
            assert!(orthonormality_error(y.as_matrix()) < 1e-12);
        }
    }

    #[test]
    fn haar_circle_angle_uniform() {
        let shape = make_shape(2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut angles: Vec<f64> = (0..5000)
            .map(|_| matrix_to_givens(&haar_sample_with(shape, &mut rng)).unwrap().values()[0])
            .collect();
        angles.sort_by(f64::total_cmp);
        let rep = ks_statistic(&angles, |x| (x + PI) / (2.0 * PI), 0.03).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn haar_second_moment() {
        let n = 6;
        let shape = make_shape(n, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..5000)
            .map(|_| haar_sample_with(shape, &mut rng).as_matrix()[(0, 0)].powi(2))
            .collect();
        let mean = draws.iter().sum::<f64>() / 5000.0;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4999.0;
        let se = (var / 5000.0).sqrt();
        assert!((mean - 1.0 / n as f64).abs() < 3.0 * se, "{mean} +/- {se}");
    }

    #[test]
    fn numeric_measure_small_cases() {
        let s = make_shape(4, 2).unwrap();
        assert!(numeric_log_measure(&AngleVector::zeros(s)).unwrap().abs() < 1e-7);
        let s = make_shape(3, 1).unwrap();
        let t = AngleVector::new(s, vec![0.5, 1.0]).unwrap();
        assert!((numeric_log_measure(&t).unwrap() - 1.0_f64.cos().ln()).abs() < 1e-5);
        assert!(numeric_log_measure(&AngleVector::zeros(make_shape(9, 1).unwrap())).is_err());
    }

    #[test]
    fn numeric_measure_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, p) in [(3, 2), (5, 3), (6, 3)] {
            let shape = make_shape(n, p).unwrap();
            for _ in 0..20 {
                let vals: Vec<f64> = angle_indices(shape)
                    .iter()
                    .map(|ai| match ai.kind {
                        AngleKind::FullCircle => rng.random_range(-3.0..3.0),
                        AngleKind::HalfCircle => rng.random_range(-1.4..1.4),
                    })
                    .collect();
                let t = AngleVector::new(shape, vals).unwrap();
                let diff = numeric_log_measure(&t).unwrap() - log_measure(&t);
                assert!(diff.abs() < 1e-5, "{diff}");
            }
        }
    }

    #[test]
    fn ks_basics() {
        let same = vec![0.0; 200];
        let rep = ks_statistic(&same, |x| (x + 1.0) / 2.0, 0.05).unwrap();
        assert!((rep.statistic - 0.5).abs() < 1e-12 && !rep.pass);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        u.sort_by(f64::total_cmp);
        assert!(ks_statistic(&u, |x| x, 0.03).unwrap().pass);
        assert!(ks_statistic(&u[..50], |x| x, 0.03).is_err());
    }

    #[test]
    fn ks_two_sample_basic() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn marginal_cdfs() {
        let idx = angle_indices(make_shape(4, 1).unwrap());
        let full = angle_marginal_cdf(&idx[0]);
        assert!((full.eval(0.0) - 0.5).abs() < 1e-15);
        let one = angle_marginal_cdf(&idx[1]);
        for k in 0..=50 {
            let x = -FRAC_PI_2 + PI * k as f64 / 50.0;
            assert!((one.eval(x) - (1.0 + x.sin()) / 2.0).abs() < 1e-9);
        }
        let two = angle_marginal_cdf(&idx[2]);
        assert_eq!(two.eval(-FRAC_PI_2), 0.0);
        assert_eq!(two.eval(FRAC_PI_2), 1.0);
        let mut prev = 0.0;
        for k in 0..=400 {
            let v = two.eval(-FRAC_PI_2 + PI * k as f64 / 400.0);
            assert!(v >= prev);
            prev = v;
        }
        let flat = AngleIndex {
            i: 1,
            j: 2,
            kind: AngleKind::HalfCircle,
            exponent: 0,
        };
        assert!((angle_marginal_cdf(&flat).eval(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mismatch_metric() {
        assert!(gradient_mismatch(&[1.0, 0.0], &[1.0 + 1e-6, 1e-9], 1e-5, 1e-8) <= 1.0);
        assert!(gradient_mismatch(&[1.0], &[1.001], 1e-5, 1e-8) > 1.0);
    }
}
