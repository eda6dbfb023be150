//! Hamiltonian Monte Carlo with a jittered path length, warmup adaptation and
//! convergence diagnostics.
//!
//! Warmup runs in three stages. The first half adapts only the step size
//! under a unit metric. The window `[W/2, 0.85 W)` keeps adapting the step
//! size while collecting variances for the diagonal metric. The step size is
//! then searched afresh for the new metric and tuned again over the
//! remainder.

pub mod adapt;
pub mod diagnostics;
pub mod hmc;

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charts::ChartConfig;
use crate::diff::Evaluator;
use crate::error::{domain, Error, Result};
use crate::givens::{angle_indices, AngleKind, Shape};
use crate::models::{unconstrain_aux, ModelTarget};
pub use adapt::{DualAveraging, VarianceEstimator};
pub use diagnostics::{ess, split_rhat};
pub use hmc::{Integrator, State, Transition, DIVERGENCE_THRESHOLD};

/// A differentiable log density in unconstrained coordinates.
pub trait Potential: Clone + Send + Sync {
    fn dim(&self) -> usize;

    /// Log density at `q`, writing its gradient. Non-finite values mark
    /// points outside the support.
    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64;

    /// Random starting point; defaults to uniform on `(-2, 2)` per coordinate.
    fn initial_point(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    /// The values stored for a draw at `q`.
    fn record(&mut self, q: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(q);
    }

    fn column_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|k| format!("q_{k}")).collect()
    }
}

impl Potential for Evaluator {
    fn dim(&self) -> usize {
        Evaluator::dim(self)
    }

    fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
        Evaluator::log_density_grad(self, q, grad)
    }

    /// Unit-radius full-circle pairs at uniform angles, logits on `(-2, 2)`,
    /// and the model's default auxiliary values jittered on the
    /// unconstrained scale.
    fn initial_point(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut q = Vec::with_capacity(Evaluator::dim(self));
        for ai in angle_indices(self.shape()) {
            match ai.kind {
                AngleKind::FullCircle => {
                    let (s, c) = rng.random_range(-PI..PI).sin_cos();
                    q.extend([c, s]);
                }
                AngleKind::HalfCircle => q.push(rng.random_range(-2.0..2.0)),
            }
        }
        let model = self.model().clone();
        let aux = unconstrain_aux(model.aux_blocks(), &model.default_aux())
            .expect("default auxiliary values lie in their support");
        q.extend(aux.iter().map(|u| u + rng.random_range(-0.5..0.5)));
        q
    }

    fn record(&mut self, q: &[f64], out: &mut Vec<f64>) {
        self.constrained_row(q, out);
    }

    fn column_names(&self) -> Vec<String> {
        Evaluator::column_names(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub chains: usize,
    /// Post-warmup draws per chain.
    pub iters: usize,
    pub warmup: usize,
    pub target_accept: f64,
    /// Base path length; each iteration draws its step count from `1..=L`.
    pub leapfrog_steps: usize,
    pub seed: u64,
    /// Worker threads for chains; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iters: 500,
            warmup: 500,
            target_accept: 0.8,
            leapfrog_steps: 16,
            seed: 0,
            threads: None,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return domain("chains must be at least 1");
        }
        if self.iters == 0 || self.warmup == 0 {
            return domain("iters and warmup must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return domain(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        if self.leapfrog_steps == 0 {
            return domain("leapfrog_steps must be at least 1");
        }
        if self.threads == Some(0) {
            return domain("threads must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// One row per post-warmup draw, in the sampler's column order.
    pub draws: DMatrix<f64>,
    /// Mean Metropolis acceptance probability after warmup.
    pub accept_rate: f64,
    /// Divergent proposals after warmup.
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl Diagnostics {
    /// Diagnostics for every column of the merged draws.
    pub fn compute(chains: &[ChainOutput]) -> Result<Self> {
        let Some(first) = chains.first() else {
            return domain("no chains to diagnose");
        };
        let cols = first.draws.ncols();
        let mut rhat = Vec::with_capacity(cols);
        let mut ess_out = Vec::with_capacity(cols);
        for c in 0..cols {
            let series: Vec<Vec<f64>> = chains
                .iter()
                .map(|ch| ch.draws.column(c).iter().copied().collect())
                .collect();
            let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
            rhat.push(split_rhat(&refs)?);
            ess_out.push(ess(&refs)?);
        }
        Ok(Self { rhat, ess: ess_out })
    }

    /// Mean of `xs` over the given columns.
    pub fn mean_over(xs: &[f64], columns: impl IntoIterator<Item = usize>) -> f64 {
        let vals: Vec<f64> = columns.into_iter().map(|c| xs[c]).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub columns: Vec<String>,
    pub chains: Vec<ChainOutput>,
    pub diagnostics: Diagnostics,
}

impl Fit {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All draws of one column, chains concatenated.
    pub fn pooled(&self, column: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.draws.column(column).iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn total_divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }
}

/// Per-chain RNG: one stream of the seed per chain index.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn find_start<P: Potential>(pot: &mut P, rng: &mut ChaCha8Rng) -> Result<State> {
    for _ in 0..100 {
        let q = pot.initial_point(rng);
        let state = State::at(pot, q);
        if state.logp.is_finite() && state.grad.iter().all(|g| g.is_finite()) {
            return Ok(state);
        }
    }
    Err(Error::Sampler("no finite starting point found in 100 attempts".into()))
}

fn run_chain<P: Potential>(mut pot: P, hmc: &HmcConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = chain_rng(hmc.seed, chain);
    let dim = pot.dim();
    let mut state = find_start(&mut pot, &mut rng)?;
    let mut integ = Integrator::new(dim);
    let mut inv_metric = vec![1.0; dim];
    let steps = |rng: &mut ChaCha8Rng| rng.random_range(1..=hmc.leapfrog_steps);

    let w = hmc.warmup;
    let window_start = w / 2;
    let window_end = (w * 17) / 20;
    let use_metric = window_end - window_start >= 10;

    let mut eps = integ.find_step_size(&mut pot, &state, 1.0, hmc.target_accept, &inv_metric, &mut rng);
    let mut da = DualAveraging::new(hmc.target_accept, eps);
    let mut var = VarianceEstimator::new(dim);
    let mut warmup_divergences = 0;
    for it in 0..w {
        if use_metric && it == window_end {
            inv_metric = var.regularized();
            eps = integ.find_step_size(
                &mut pot,
                &state,
                da.final_step_size(),
                hmc.target_accept,
                &inv_metric,
                &mut rng,
            );
            da.restart(eps);
        }
        let l = steps(&mut rng);
        let t = integ.transition(&mut pot, &mut state, eps, l, &inv_metric, &mut rng);
        warmup_divergences += t.divergent as usize;
        eps = da.update(t.accept_prob);
        if use_metric && (window_start..window_end).contains(&it) {
            var.add(&state.q);
        }
    }
    if warmup_divergences as f64 > 0.9 * w as f64 {
        return Err(Error::Sampler(format!(
            "chain {chain}: {warmup_divergences} of {w} warmup transitions diverged; the target is probably \
             improper or badly scaled"
        )));
    }
    let eps = da.final_step_size();

    let mut row = Vec::new();
    pot.record(&state.q, &mut row);
    let mut draws = DMatrix::zeros(hmc.iters, row.len());
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    for it in 0..hmc.iters {
        let l = steps(&mut rng);
        let t = integ.transition(&mut pot, &mut state, eps, l, &inv_metric, &mut rng);
        accept_sum += t.accept_prob;
        divergences += t.divergent as usize;
        pot.record(&state.q, &mut row);
        for (c, v) in row.iter().enumerate() {
            draws[(it, c)] = *v;
        }
    }
    Ok(ChainOutput {
        draws,
        accept_rate: accept_sum / hmc.iters as f64,
        divergences,
        warmup_divergences,
        step_size: eps,
        inv_metric,
    })
}

/// Sample any [`Potential`]. Chains run on up to `hmc.threads` threads; the
/// result does not depend on the thread count.
pub fn run_potential<P: Potential>(pot: &P, hmc: &HmcConfig) -> Result<Fit> {
    hmc.validate()?;
    let threads = hmc
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .min(hmc.chains);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ChainOutput>>>> = Mutex::new((0..hmc.chains).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let chain = next.fetch_add(1, Ordering::Relaxed);
                if chain >= hmc.chains {
                    break;
                }
                let out = run_chain(pot.clone(), hmc, chain);
                results.lock().expect("chain result lock")[chain] = Some(out);
            });
        }
    });
    let chains = results
        .into_inner()
        .expect("chain result lock")
        .into_iter()
        .map(|r| r.expect("every chain ran"))
        .collect::<Result<Vec<_>>>()?;
    let diagnostics = Diagnostics::compute(&chains)?;
    Ok(Fit {
        columns: pot.column_names(),
        chains,
        diagnostics,
    })
}

/// Sample a Stiefel model through the given chart.
pub fn run(model: Arc<dyn ModelTarget>, shape: Shape, chart: ChartConfig, hmc: &HmcConfig) -> Result<Fit> {
    if model.shape() != shape {
        return domain(format!(
            "model {} is defined on {}x{} matrices, not {}x{}",
            model.name(),
            model.shape().n(),
            model.shape().p(),
            shape.n(),
            shape.p()
        ));
    }
    let ev = Evaluator::new(model, chart)?;
    run_potential(&ev, hmc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givens::make_shape;
    use crate::models::uniform_stiefel_target;
    use crate::oracle::ks_statistic;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[derive(Clone)]
    struct StdNormal(usize);

    impl Potential for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
            grad.iter_mut().zip(q).for_each(|(g, x)| *g = -x);
            -0.5 * q.iter().map(|x| x * x).sum::<f64>()
        }
    }

    #[test]
    fn config_validation() {
        assert!(HmcConfig::default().validate().is_ok());
        for bad in [
            HmcConfig {
                iters: 0,
                ..Default::default()
            },
            HmcConfig {
                warmup: 0,
                ..Default::default()
            },
            HmcConfig {
                target_accept: 1.0,
                ..Default::default()
            },
            HmcConfig {
                chains: 0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn standard_normal_moments() {
        let hmc = HmcConfig {
            seed: 11,
            ..Default::default()
        };
        let fit = run_potential(&StdNormal(10), &hmc).unwrap();
        for c in 0..10 {
            let x = fit.pooled(c);
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let ess = fit.diagnostics.ess[c];
            assert!(mean.abs() <= 4.0 / ess.sqrt(), "col {c}: mean {mean}, ess {ess}");
            assert!((var - 1.0).abs() <= 0.15, "col {c}: var {var}");
        }
    }

    #[test]
    fn gaussian_marginals_pass_ks() {
        let hmc = HmcConfig {
            chains: 4,
            iters: 500,
            seed: 5,
            ..Default::default()
        };
        let fit = run_potential(&StdNormal(2), &hmc).unwrap();
        let normal = Normal::standard();
        for c in 0..2 {
            let mut x = fit.pooled(c);
            x.sort_by(f64::total_cmp);
            let rep = ks_statistic(&x, |v| normal.cdf(v), 0.05).unwrap();
            assert!(rep.pass, "col {c}: {}", rep.statistic);
        }
    }

    #[test]
    fn same_seed_same_draws_any_thread_count() {
        let shape = make_shape(4, 2).unwrap();
        let model: Arc<dyn ModelTarget> = Arc::new(uniform_stiefel_target(shape));
        let base = HmcConfig {
            chains: 3,
            iters: 30,
            warmup: 30,
            seed: 99,
            threads: Some(1),
            ..Default::default()
        };
        let a = run(model.clone(), shape, ChartConfig::default(), &base).unwrap();
        let b = run(
            model.clone(),
            shape,
            ChartConfig::default(),
            &HmcConfig {
                threads: Some(3),
                ..base
            },
        )
        .unwrap();
        for (x, y) in a.chains.iter().zip(&b.chains) {
            assert_eq!(x.draws, y.draws);
        }
        let c = run(model, shape, ChartConfig::default(), &HmcConfig { seed: 100, ..base }).unwrap();
        assert_ne!(a.chains[0].draws, c.chains[0].draws);
    }

    #[test]
    fn uniform_sphere_converges() {
        let shape = make_shape(10, 1).unwrap();
        let model: Arc<dyn ModelTarget> = Arc::new(uniform_stiefel_target(shape));
        // the full-circle angle is the slowest coordinate; a longer path keeps
        // every column's R-hat tight rather than just the average
        let hmc = HmcConfig {
            seed: 1,
            leapfrog_steps: 32,
            ..Default::default()
        };
        let fit = run(model, shape, ChartConfig::default(), &hmc).unwrap();
        for (name, r) in fit.columns.iter().zip(&fit.diagnostics.rhat) {
            assert!(*r <= 1.01, "{name}: {r}");
        }
        // stored angles stay in range
        for (k, ai) in angle_indices(shape).iter().enumerate() {
            let (lo, hi) = ai.bounds();
            assert!(fit.pooled(k).iter().all(|t| (lo..=hi).contains(t)));
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let model: Arc<dyn ModelTarget> = Arc::new(uniform_stiefel_target(make_shape(4, 2).unwrap()));
        let err = run(
            model,
            make_shape(4, 1).unwrap(),
            ChartConfig::default(),
            &HmcConfig::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn hopeless_target_aborts() {
        #[derive(Clone)]
        struct Spiky;
        impl Potential for Spiky {
            fn dim(&self) -> usize {
                1
            }
            fn initial_point(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
                vec![0.0]
            }
            fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
                grad[0] = 0.0;
                if q[0] == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let hmc = HmcConfig {
            chains: 1,
            iters: 10,
            warmup: 50,
            ..Default::default()
        };
        match run_potential(&Spiky, &hmc) {
            Err(Error::Sampler(msg)) => assert!(msg.contains("diverged"), "{msg}"),
            other => panic!("expected abort, got {other:?}"),
        }
    }
}
