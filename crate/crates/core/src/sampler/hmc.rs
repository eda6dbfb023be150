//! Leapfrog integration and one Metropolis-corrected HMC transition.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Potential;

/// Energy error beyond which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Current position with its cached log density and gradient.
#[derive(Debug, Clone)]
pub struct State {
    pub q: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl State {
    pub fn at<P: Potential>(pot: &mut P, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = pot.log_density_grad(&q, &mut grad);
        Self { q, logp, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub accept_prob: f64,
    pub accepted: bool,
    pub divergent: bool,
}

/// Scratch space for proposals, owned by one chain.
#[derive(Debug, Clone)]
pub struct Integrator {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_metric).map(|(pi, m)| pi * pi * m).sum::<f64>()
}

impl Integrator {
    pub fn new(dim: usize) -> Self {
        Self {
            q: vec![0.0; dim],
            p: vec![0.0; dim],
            grad: vec![0.0; dim],
            logp: f64::NEG_INFINITY,
        }
    }

    /// Run `steps` leapfrog steps from `(state, p0)`. Returns the final log
    /// density, or `None` as soon as it becomes non-finite.
    fn integrate<P: Potential>(
        &mut self,
        pot: &mut P,
        state: &State,
        step: f64,
        steps: usize,
        inv_metric: &[f64],
    ) -> Option<f64> {
        self.q.copy_from_slice(&state.q);
        self.grad.copy_from_slice(&state.grad);
        let mut logp = state.logp;
        for _ in 0..steps {
            for (p, g) in self.p.iter_mut().zip(&self.grad) {
                *p += 0.5 * step * g;
            }
            for ((q, p), m) in self.q.iter_mut().zip(&self.p).zip(inv_metric) {
                *q += step * m * p;
            }
            logp = pot.log_density_grad(&self.q, &mut self.grad);
            if !logp.is_finite() {
                return None;
            }
            for (p, g) in self.p.iter_mut().zip(&self.grad) {
                *p += 0.5 * step * g;
            }
        }
        self.logp = logp;
        Some(logp)
    }

    fn draw_momentum(&mut self, inv_metric: &[f64], rng: &mut ChaCha8Rng) {
        for (p, m) in self.p.iter_mut().zip(inv_metric) {
            let z: f64 = StandardNormal.sample(rng);
            *p = z / m.sqrt();
        }
    }

    /// Energy change `H(end) - H(start)` of one trajectory with a fresh
    /// momentum; `None` if the trajectory left the support.
    pub fn energy_error<P: Potential>(
        &mut self,
        pot: &mut P,
        state: &State,
        step: f64,
        steps: usize,
        inv_metric: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Option<f64> {
        self.draw_momentum(inv_metric, rng);
        let h0 = -state.logp + kinetic(&self.p, inv_metric);
        let logp = self.integrate(pot, state, step, steps, inv_metric)?;
        let h1 = -logp + kinetic(&self.p, inv_metric);
        h1.is_finite().then_some(h1 - h0)
    }

    /// One HMC transition. `state` is replaced by the proposal when accepted.
    pub fn transition<P: Potential>(
        &mut self,
        pot: &mut P,
        state: &mut State,
        step: f64,
        steps: usize,
        inv_metric: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Transition {
        let delta = self.energy_error(pot, state, step, steps, inv_metric, rng);
        let (accept_prob, divergent) = match delta {
            Some(dh) if dh.abs() <= DIVERGENCE_THRESHOLD => ((-dh).exp().min(1.0), false),
            _ => (0.0, true),
        };
        let u: f64 = rng.random();
        let accepted = !divergent && u < accept_prob;
        if accepted {
            state.q.copy_from_slice(&self.q);
            state.grad.copy_from_slice(&self.grad);
            state.logp = self.logp;
        }
        Transition {
            accept_prob,
            accepted,
            divergent,
        }
    }

    /// Doubling/halving search for a step size whose single-step acceptance
    /// probability crosses `target`.
    pub fn find_step_size<P: Potential>(
        &mut self,
        pot: &mut P,
        state: &State,
        start: f64,
        target: f64,
        inv_metric: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let accept = |this: &mut Self, pot: &mut P, eps: f64, rng: &mut ChaCha8Rng| match this
            .energy_error(pot, state, eps, 1, inv_metric, rng)
        {
            Some(dh) => (-dh).exp().min(1.0),
            None => 0.0,
        };
        let mut eps = start;
        let first = accept(self, pot, eps, rng);
        let up = first > target;
        for _ in 0..60 {
            let next = if up { eps * 2.0 } else { eps * 0.5 };
            if !(1e-10..=1e3).contains(&next) {
                break;
            }
            let a = accept(self, pot, next, rng);
            if up && a <= target {
                break;
            }
            eps = next;
            if !up && a > target {
                break;
            }
        }
        eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[derive(Clone)]
    struct Gauss(Vec<f64>);

    impl Potential for Gauss {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for ((g, x), s) in grad.iter_mut().zip(q).zip(&self.0) {
                *g = -x / (s * s);
                lp -= 0.5 * x * x / (s * s);
            }
            lp
        }
    }

    #[test]
    fn tiny_steps_conserve_energy() {
        let mut pot = Gauss(vec![1.0, 0.5, 2.0]);
        let state = State::at(&mut pot, vec![0.3, -0.2, 1.1]);
        let mut integ = Integrator::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let dh = integ
                .energy_error(&mut pot, &state, 1e-4, 100, &[1.0; 3], &mut rng)
                .unwrap();
            assert!(dh.abs() <= 1e-4, "{dh}");
        }
    }

    #[test]
    fn non_finite_is_divergent_and_rejected() {
        #[derive(Clone)]
        struct Wall;
        impl Potential for Wall {
            fn dim(&self) -> usize {
                1
            }
            fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> f64 {
                grad[0] = 1.0;
                if q[0] > 0.05 {
                    f64::NEG_INFINITY
                } else {
                    q[0]
                }
            }
        }
        let mut pot = Wall;
        let mut state = State::at(&mut pot, vec![0.0]);
        let mut integ = Integrator::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = integ.transition(&mut pot, &mut state, 1.0, 5, &[1.0], &mut rng);
        assert!(t.divergent && !t.accepted);
        assert_eq!(state.q, vec![0.0]);
    }

    #[test]
    fn step_size_search_brackets_target() {
        let mut pot = Gauss(vec![1.0; 4]);
        let state = State::at(&mut pot, vec![0.5; 4]);
        let mut integ = Integrator::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps = integ.find_step_size(&mut pot, &state, 1e-3, 0.8, &[1.0; 4], &mut rng);
        assert!(eps > 0.05 && eps < 4.0, "{eps}");
    }
}
