//! Maps between unconstrained sampler coordinates and Givens angles.
//!
//! Each full-circle angle is carried by a point `(x, y)` of the plane with
//! `theta = atan2(y, x)`; a Gaussian prior on the radius keeps the point near
//! the unit circle without touching the angle's distribution. Each
//! half-circle angle is carried by one real `z` through a scaled logistic
//! onto `(-pi/2 + eps, pi/2 - eps)`.
//!
//! Coordinates are laid out in angle order: a full-circle angle takes two
//! consecutive slots `(x, y)`, a half-circle angle takes one.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::givens::{angle_indices, AngleKind, AngleVector, Shape};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Radii below this make the full-circle angle ill-defined.
pub const MIN_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    /// Margin cut from both ends of the half-circle range.
    pub epsilon: f64,
    /// Mean of the Gaussian prior on the auxiliary radius.
    pub r_mean: f64,
    /// Standard deviation of the Gaussian prior on the auxiliary radius.
    pub r_sd: f64,
    /// Fold every column's leading angle into `[-pi/2, pi/2]`.
    pub mirrored: bool,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            r_mean: 1.0,
            r_sd: 0.1,
            mirrored: false,
        }
    }
}

impl ChartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < PI / 4.0) {
            return domain(format!("epsilon must lie in (0, pi/4), got {}", self.epsilon));
        }
        if !(self.r_sd > 0.0) || !self.r_mean.is_finite() {
            return domain(format!(
                "radius prior needs finite mean and positive sd, got N({}, {})",
                self.r_mean, self.r_sd
            ));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        PI - 2.0 * self.epsilon
    }

    fn lower(&self) -> f64 {
        -FRAC_PI_2 + self.epsilon
    }
}

/// Unconstrained coordinates: `(x, y)` per full-circle angle, `z` per
/// half-circle angle.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedVector {
    values: Vec<f64>,
}

impl UnconstrainedVector {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.unconstrained_len() {
            return domain(format!(
                "unconstrained vector has length {}, expected {}",
                values.len(),
                shape.unconstrained_len()
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone)]
pub struct ChartResult {
    pub theta: AngleVector,
    /// Logistic log-Jacobians plus the radius log-priors.
    pub log_adjust: f64,
    /// Some auxiliary radius collapsed below [`MIN_RADIUS`].
    pub degenerate: bool,
}

#[inline]
fn log_sigmoid(z: f64) -> f64 {
    // log(1 / (1 + e^-z)) = -softplus(-z)
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    -0.5 * u * u - sd.ln() - HALF_LN_2PI
}

/// Fold a full-circle angle into `[-pi/2, pi/2]`, negating its partner when
/// it had to move.
pub fn mirror(lead: f64, follow: f64) -> (f64, f64) {
    if lead > FRAC_PI_2 {
        (-FRAC_PI_2 + (lead - FRAC_PI_2), -follow)
    } else if lead < -FRAC_PI_2 {
        (FRAC_PI_2 + (lead + FRAC_PI_2), -follow)
    } else {
        (lead, follow)
    }
}

/// Offset of column `col`'s first angle in storage (0-based column).
fn column_start(shape: Shape, col: usize) -> usize {
    (0..col).map(|k| shape.n() - 1 - k).sum()
}

/// Apply the mirroring chart to a full angle vector.
///
/// Column `i` whose leading angle leaves `[-pi/2, pi/2]` has the lead shifted
/// by `pi`; the rest of column `i` and all of column `i + 1` are negated.
/// That composite equals negating columns `i` and `i + 1` of `Y` (only column
/// `i` when it is the last), so any density that is even in each column is
/// continuous across the fold. `signs` receives `d theta_out / d theta_in`
/// per angle.
pub(crate) fn mirror_in_place(shape: Shape, angles: &mut [f64], signs: &mut [f64]) {
    signs.iter_mut().for_each(|s| *s = 1.0);
    let (n, p) = (shape.n(), shape.p());
    for col in 0..shape.full_circle_count() {
        let start = column_start(shape, col);
        let len = n - 1 - col;
        let lead = angles[start];
        if lead.abs() <= FRAC_PI_2 {
            continue;
        }
        let follow = if len > 1 { angles[start + 1] } else { 0.0 };
        let (new_lead, new_follow) = mirror(lead, follow);
        angles[start] = new_lead;
        if len > 1 {
            angles[start + 1] = new_follow;
            signs[start + 1] = -signs[start + 1];
        }
        for k in (start + 2)..(start + len) {
            angles[k] = -angles[k];
            signs[k] = -signs[k];
        }
        if col + 1 < p {
            let next = start + len;
            for k in next..(next + len - 1) {
                angles[k] = -angles[k];
                signs[k] = -signs[k];
            }
        }
    }
}

/// Per-evaluation intermediate values kept for the gradient pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct ChartTrace {
    pub(crate) mirror_signs: Vec<f64>,
}

pub(crate) fn constrain_raw(
    shape: Shape,
    config: &ChartConfig,
    xi: &[f64],
    angles: &mut [f64],
    trace: &mut ChartTrace,
) -> (f64, bool) {
    debug_assert_eq!(xi.len(), shape.unconstrained_len());
    let mut log_adjust = 0.0;
    let mut degenerate = false;
    let mut pos = 0;
    let (lower, width) = (config.lower(), config.width());
    for (k, ai) in angle_indices(shape).iter().enumerate() {
        match ai.kind {
            AngleKind::FullCircle => {
                let (x, y) = (xi[pos], xi[pos + 1]);
                pos += 2;
                let r = x.hypot(y);
                if !(r >= MIN_RADIUS) {
                    degenerate = true;
                }
                angles[k] = y.atan2(x);
                if angles[k] == -PI {
                    angles[k] = PI;
                }
                log_adjust += log_normal_pdf(r, config.r_mean, config.r_sd);
            }
            AngleKind::HalfCircle => {
                let z = xi[pos];
                pos += 1;
                angles[k] = lower + width * sigmoid(z);
                log_adjust += width.ln() + log_sigmoid(z) + log_sigmoid(-z);
            }
        }
    }
    trace.mirror_signs.resize(shape.d(), 1.0);
    if config.mirrored {
        mirror_in_place(shape, angles, &mut trace.mirror_signs);
    } else {
        trace.mirror_signs.iter_mut().for_each(|s| *s = 1.0);
    }
    if !log_adjust.is_finite() {
        degenerate = true;
    }
    (log_adjust, degenerate)
}

/// Chain rule from `d logp / d theta` (post-mirror angles, already including
/// the measure term) back to the unconstrained coordinates, adding the
/// gradient of the chart's own `log_adjust`.
pub(crate) fn backward_raw(
    shape: Shape,
    config: &ChartConfig,
    xi: &[f64],
    theta_bar: &[f64],
    trace: &ChartTrace,
    xi_bar: &mut [f64],
) {
    let mut pos = 0;
    let width = config.width();
    let var = config.r_sd * config.r_sd;
    for (k, ai) in angle_indices(shape).iter().enumerate() {
        let tb = theta_bar[k] * trace.mirror_signs[k];
        match ai.kind {
            AngleKind::FullCircle => {
                let (x, y) = (xi[pos], xi[pos + 1]);
                let r2 = x * x + y * y;
                let r = r2.sqrt();
                let r_bar = -(r - config.r_mean) / var;
                xi_bar[pos] = tb * (-y / r2) + r_bar * (x / r);
                xi_bar[pos + 1] = tb * (x / r2) + r_bar * (y / r);
                pos += 2;
            }
            AngleKind::HalfCircle => {
                let z = xi[pos];
                let sig = sigmoid(z);
                xi_bar[pos] = tb * width * sig * (1.0 - sig) + (1.0 - 2.0 * sig);
                pos += 1;
            }
        }
    }
}

/// Map unconstrained coordinates to in-range angles.
pub fn constrain(xi: &UnconstrainedVector, config: &ChartConfig, shape: Shape) -> Result<ChartResult> {
    if xi.values.len() != shape.unconstrained_len() {
        return domain(format!(
            "unconstrained vector has length {}, expected {}",
            xi.values.len(),
            shape.unconstrained_len()
        ));
    }
    let mut angles = vec![0.0; shape.d()];
    let mut trace = ChartTrace::default();
    let (log_adjust, degenerate) = constrain_raw(shape, config, &xi.values, &mut angles, &mut trace);
    Ok(ChartResult {
        theta: AngleVector::from_raw(shape, angles),
        log_adjust,
        degenerate,
    })
}

/// Inverse of [`constrain`] on its range: full-circle angles go to the unit
/// circle, half-circle angles through the logit.
pub fn unconstrain(theta: &AngleVector, config: &ChartConfig) -> Result<UnconstrainedVector> {
    let shape = theta.shape();
    let limit = FRAC_PI_2 - config.epsilon - 1e-9;
    let (lower, width) = (config.lower(), config.width());
    let mut out = Vec::with_capacity(shape.unconstrained_len());
    for (ai, &t) in angle_indices(shape).iter().zip(theta.values()) {
        match ai.kind {
            AngleKind::FullCircle => {
                let (s, c) = t.sin_cos();
                out.push(c);
                out.push(s);
            }
            AngleKind::HalfCircle => {
                if !(t.abs() <= limit) {
                    return domain(format!(
                        "{} = {t} is outside the chart interval (+/-{limit})",
                        ai.label()
                    ));
                }
                let u = (t - lower) / width;
                out.push((u / (1.0 - u)).ln());
            }
        }
    }
    Ok(UnconstrainedVector { values: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givens::make_shape;

    #[test]
    fn unit_pair_gives_zero_angle_and_peak_radius_prior() {
        let shape = make_shape(2, 1).unwrap();
        let cfg = ChartConfig::default();
        let res = constrain(&UnconstrainedVector::new(shape, vec![1.0, 0.0]).unwrap(), &cfg, shape).unwrap();
        assert_eq!(res.theta.values(), &[0.0]);
        let peak = -(0.1_f64).ln() - HALF_LN_2PI;
        assert!((res.log_adjust - peak).abs() < 1e-14);
        assert!(!res.degenerate);
    }

    #[test]
    fn logistic_midpoint_and_limit() {
        let shape = make_shape(3, 1).unwrap();
        let cfg = ChartConfig::default();
        let res = constrain(
            &UnconstrainedVector::new(shape, vec![1.0, 0.0, 0.0]).unwrap(),
            &cfg,
            shape,
        )
        .unwrap();
        assert!(res.theta.values()[1].abs() < 1e-15);

        let mut prev = f64::INFINITY;
        for z in [10.0, 40.0, 300.0, 800.0] {
            let res = constrain(
                &UnconstrainedVector::new(shape, vec![1.0, 0.0, z]).unwrap(),
                &cfg,
                shape,
            )
            .unwrap();
            assert!(res.theta.values()[1] <= FRAC_PI_2 - cfg.epsilon + 1e-15);
            assert!(res.log_adjust < prev);
            prev = res.log_adjust;
        }
        assert!(prev < -700.0);
        let res = constrain(
            &UnconstrainedVector::new(shape, vec![1.0, 0.0, 1e6]).unwrap(),
            &cfg,
            shape,
        )
        .unwrap();
        assert!((res.theta.values()[1] - (FRAC_PI_2 - cfg.epsilon)).abs() < 1e-15);
    }

    #[test]
    fn collapsed_radius_is_degenerate() {
        let shape = make_shape(2, 1).unwrap();
        let res = constrain(
            &UnconstrainedVector::new(shape, vec![1e-10, 0.0]).unwrap(),
            &ChartConfig::default(),
            shape,
        )
        .unwrap();
        assert!(res.degenerate);
    }

    #[test]
    fn unconstrain_zero_and_boundary() {
        let shape = make_shape(4, 2).unwrap();
        let cfg = ChartConfig::default();
        let xi = unconstrain(&AngleVector::zeros(shape), &cfg).unwrap();
        assert_eq!(xi.values(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

        let s = make_shape(3, 1).unwrap();
        let at_edge = AngleVector::new(s, vec![0.0, FRAC_PI_2 - cfg.epsilon]).unwrap();
        assert!(unconstrain(&at_edge, &cfg).is_err());
    }

    #[test]
    fn mirror_cases() {
        assert_eq!(mirror(0.3, 0.2), (0.3, 0.2));
        let (a, b) = mirror(FRAC_PI_2 + 0.1, 0.2);
        assert!((a - (-FRAC_PI_2 + 0.1)).abs() < 1e-15 && b == -0.2);
        let (a, b) = mirror(-FRAC_PI_2 - 0.1, 0.2);
        assert!((a - (FRAC_PI_2 - 0.1)).abs() < 1e-15 && b == -0.2);
    }

    #[test]
    fn mirror_lands_in_half_range_and_fixes_in_range_pairs() {
        for k in 0..=200 {
            let lead = -PI + 2.0 * PI * k as f64 / 200.0;
            let (l, f) = mirror(lead, 0.4);
            assert!(l.abs() <= FRAC_PI_2 + 1e-15);
            assert_eq!(mirror(l, f), (l, f));
        }
    }

    #[test]
    fn config_validation() {
        assert!(ChartConfig::default().validate().is_ok());
        let bad = ChartConfig {
            epsilon: 1.0,
            ..ChartConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ChartConfig {
            r_sd: 0.0,
            ..ChartConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
