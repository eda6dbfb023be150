//! Log density and exact gradient of the full target in sampler coordinates.
//!
//! The composite is
//!
//! ```text
//! logp(xi, u) = model(Y(theta(xi)), aux(u)) + log_measure(theta)
//!             + chart log-adjust(xi) + aux log-Jacobian(u)
//! ```
//!
//! The reverse pass walks the rotation sequence once: starting from the
//! model's cotangent on `Y`, each rotation is peeled off in the order the
//! angles are stored, the angle's adjoint is read from the two touched rows,
//! and both the matrix and its cotangent are rotated back.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::charts::{backward_raw, constrain_raw, ChartConfig, ChartTrace, UnconstrainedVector};
use crate::error::{domain, Result};
use crate::givens::{angle_indices, forward_in_place, log_measure_raw, AngleKind, Shape};
use crate::models::{aux_labels, aux_len, backward_aux, constrain_aux, ModelTarget};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub logp: f64,
    pub grad_xi: Vec<f64>,
    pub grad_aux: Vec<f64>,
}

/// Accumulate `d logp / d theta` given `y = Y(theta)` and `y_bar = d logp / dY`.
///
/// Consumes `y` and `y_bar` (both end up rotated back to the start of the
/// sequence). Only the columns a rotation can touch are visited.
pub(crate) fn givens_backward(
    shape: Shape,
    angles: &[f64],
    y: &mut DMatrix<f64>,
    y_bar: &mut DMatrix<f64>,
    theta_bar: &mut [f64],
) {
    let (n, p) = (shape.n(), shape.p());
    let mut idx = 0;
    for i in 0..p {
        for j in (i + 1)..n {
            let (s, c) = angles[idx].sin_cos();
            let mut acc = 0.0;
            for col in i..p {
                let (yi, yj) = (y[(i, col)], y[(j, col)]);
                let (bi, bj) = (y_bar[(i, col)], y_bar[(j, col)]);
                // d(row_i')/dtheta = -row_j', d(row_j')/dtheta = row_i'
                acc += bj * yi - bi * yj;
                y[(i, col)] = c * yi + s * yj;
                y[(j, col)] = -s * yi + c * yj;
                y_bar[(i, col)] = c * bi + s * bj;
                y_bar[(j, col)] = -s * bi + c * bj;
            }
            theta_bar[idx] += acc;
            idx += 1;
        }
    }
}

/// Reusable evaluator for one model and chart. Holds all scratch buffers, so
/// each sampling chain should own its own copy.
#[derive(Debug, Clone)]
pub struct Evaluator {
    model: Arc<dyn ModelTarget>,
    shape: Shape,
    chart: ChartConfig,
    n_xi: usize,
    n_aux: usize,
    angles: Vec<f64>,
    theta_bar: Vec<f64>,
    y: DMatrix<f64>,
    y_bar: DMatrix<f64>,
    aux: Vec<f64>,
    aux_bar: Vec<f64>,
    trace: ChartTrace,
}

impl Evaluator {
    pub fn new(model: Arc<dyn ModelTarget>, chart: ChartConfig) -> Result<Self> {
        chart.validate()?;
        let shape = model.shape();
        let n_aux = aux_len(model.aux_blocks());
        Ok(Self {
            shape,
            chart,
            n_xi: shape.unconstrained_len(),
            n_aux,
            angles: vec![0.0; shape.d()],
            theta_bar: vec![0.0; shape.d()],
            y: DMatrix::zeros(shape.n(), shape.p()),
            y_bar: DMatrix::zeros(shape.n(), shape.p()),
            aux: vec![0.0; n_aux],
            aux_bar: vec![0.0; n_aux],
            trace: ChartTrace::default(),
            model,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn chart(&self) -> &ChartConfig {
        &self.chart
    }

    pub fn model(&self) -> &Arc<dyn ModelTarget> {
        &self.model
    }

    /// Total sampler dimension: chart coordinates then unconstrained aux.
    pub fn dim(&self) -> usize {
        self.n_xi + self.n_aux
    }

    pub fn n_xi(&self) -> usize {
        self.n_xi
    }

    /// Forward pass only. Leaves `angles`, `y`, `aux` populated.
    fn forward(&mut self, q: &[f64]) -> Option<f64> {
        let (xi, u) = q.split_at(self.n_xi);
        let (log_adjust, degenerate) = constrain_raw(self.shape, &self.chart, xi, &mut self.angles, &mut self.trace);
        if degenerate {
            return None;
        }
        let log_measure = log_measure_raw(self.shape, &self.angles);
        if !log_measure.is_finite() {
            return None;
        }
        self.y.fill(0.0);
        self.y.fill_diagonal(1.0);
        forward_in_place(self.shape, &self.angles, &mut self.y);
        let aux_log_jac = constrain_aux(self.model.aux_blocks(), u, &mut self.aux);
        Some(log_measure + log_adjust + aux_log_jac)
    }

    /// Log density at `q = [xi, u]`; `-inf` for degenerate or out-of-support
    /// points.
    pub fn log_density(&mut self, q: &[f64]) -> f64 {
        let Some(extra) = self.forward(q) else {
            return f64::NEG_INFINITY;
        };
        let lp = self
            .model
            .evaluate(&self.y, &self.aux, &mut self.y_bar, &mut self.aux_bar);
        let total = lp + extra;
        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Log density and its gradient at `q`. On a non-finite result the
    /// gradient is zeroed.
    pub fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert_eq!(q.len(), self.dim());
        debug_assert_eq!(grad.len(), self.dim());
        let Some(extra) = self.forward(q) else {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        };
        let lp = self
            .model
            .evaluate(&self.y, &self.aux, &mut self.y_bar, &mut self.aux_bar);
        let total = lp + extra;
        if !total.is_finite() {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        }

        self.theta_bar.fill(0.0);
        givens_backward(
            self.shape,
            &self.angles,
            &mut self.y,
            &mut self.y_bar,
            &mut self.theta_bar,
        );
        for ((ai, tb), &t) in angle_indices(self.shape)
            .iter()
            .zip(&mut self.theta_bar)
            .zip(&self.angles)
        {
            if ai.kind == AngleKind::HalfCircle {
                *tb -= ai.exponent as f64 * t.tan();
            }
        }

        let (xi, u) = q.split_at(self.n_xi);
        let (g_xi, g_u) = grad.split_at_mut(self.n_xi);
        backward_raw(self.shape, &self.chart, xi, &self.theta_bar, &self.trace, g_xi);
        backward_aux(self.model.aux_blocks(), u, &self.aux_bar, g_u);
        total
    }

    /// Output row for `q`: post-chart angles, `Y` row-major, constrained aux.
    pub fn constrained_row(&mut self, q: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let (xi, u) = q.split_at(self.n_xi);
        constrain_raw(self.shape, &self.chart, xi, &mut self.angles, &mut self.trace);
        self.y.fill(0.0);
        self.y.fill_diagonal(1.0);
        forward_in_place(self.shape, &self.angles, &mut self.y);
        constrain_aux(self.model.aux_blocks(), u, &mut self.aux);
        out.extend_from_slice(&self.angles);
        for r in 0..self.shape.n() {
            for c in 0..self.shape.p() {
                out.push(self.y[(r, c)]);
            }
        }
        out.extend_from_slice(&self.aux);
    }

    /// Column names matching [`Evaluator::constrained_row`].
    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = angle_indices(self.shape).iter().map(|a| a.label()).collect();
        for r in 1..=self.shape.n() {
            for c in 1..=self.shape.p() {
                names.push(format!("Y_{r}_{c}"));
            }
        }
        names.extend(aux_labels(self.model.aux_blocks()));
        names
    }
}

/// One-shot gradient evaluation at chart coordinates `xi` and unconstrained
/// auxiliary values `aux`.
pub fn eval_grad(
    xi: &UnconstrainedVector,
    aux: &[f64],
    model: Arc<dyn ModelTarget>,
    config: &ChartConfig,
) -> Result<GradientBundle> {
    let mut ev = Evaluator::new(model, *config)?;
    if xi.values().len() != ev.n_xi || aux.len() != ev.n_aux {
        return domain(format!(
            "expected {} chart and {} auxiliary coordinates, got {} and {}",
            ev.n_xi,
            ev.n_aux,
            xi.values().len(),
            aux.len()
        ));
    }
    let mut q = xi.values().to_vec();
    q.extend_from_slice(aux);
    let mut grad = vec![0.0; q.len()];
    let logp = ev.log_density_grad(&q, &mut grad);
    let grad_aux = grad.split_off(ev.n_xi);
    Ok(GradientBundle {
        logp,
        grad_xi: grad,
        grad_aux,
    })
}
