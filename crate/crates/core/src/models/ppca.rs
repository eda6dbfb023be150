//! Probabilistic PCA with an orthonormal loading matrix.
//!
//! `x_i ~ N(0, C)` with `C = W diag(lambda)^2 W^T + sigma2 I`. The data
//! enter only through the observation count `N` and the second-moment
//! matrix `S_hat = (1/N) sum x_i x_i^T`:
//!
//! ```text
//! log p = -(N/2) log|C| - (N/2) tr(C^-1 S_hat) + log prior
//! ```
//!
//! Priors: every `lambda_k` and `sigma2` are half-normal with sd 5; the
//! `lambda` block is kept positive and strictly decreasing.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AuxBlock, AuxTransform, ModelTarget};
use crate::error::{Error, Result};
use crate::givens::Shape;

const PRIOR_SD: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct PpcaData {
    n_obs: usize,
    sigma_hat: DMatrix<f64>,
}

impl PpcaData {
    /// Build from `(N, S_hat)`. `S_hat` must be symmetric to 1e-10 and
    /// positive semidefinite.
    pub fn new(n_obs: usize, sigma_hat: DMatrix<f64>) -> Result<Self> {
        if n_obs == 0 {
            return Err(Error::Data("PPCA needs at least one observation".into()));
        }
        if !sigma_hat.is_square() || sigma_hat.nrows() == 0 {
            return Err(Error::Data("second-moment matrix must be square and non-empty".into()));
        }
        let asym = (&sigma_hat - sigma_hat.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::Data(format!("second-moment matrix not symmetric ({asym:e})")));
        }
        let scale = sigma_hat.amax().max(1.0);
        let min_eig = sigma_hat.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(Error::Data(format!(
                "second-moment matrix not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { n_obs, sigma_hat })
    }

    /// `S_hat` from an `N x n` observation matrix (rows are observations).
    pub fn from_observations(x: &DMatrix<f64>) -> Result<Self> {
        let n_obs = x.nrows();
        if n_obs == 0 {
            return Err(Error::Data("no observations".into()));
        }
        let mut s = x.transpose() * x / n_obs as f64;
        // exact symmetry regardless of summation order
        let sym = (&s + s.transpose()) * 0.5;
        s.copy_from(&sym);
        Self::new(n_obs, s)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn dim(&self) -> usize {
        self.sigma_hat.nrows()
    }

    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }
}

#[derive(Debug, Clone)]
pub struct PpcaTarget {
    data: PpcaData,
    shape: Shape,
    blocks: Vec<AuxBlock>,
}

/// PPCA target with `p` components. Aux layout: `lambda_1..lambda_p`
/// (decreasing), then `sigma2`.
pub fn ppca_target(data: PpcaData, p: usize) -> Result<PpcaTarget> {
    let shape = Shape::new(data.dim(), p)?;
    Ok(PpcaTarget {
        data,
        shape,
        blocks: vec![
            AuxBlock::new("lambda", p, AuxTransform::OrderedPositive),
            AuxBlock::new("sigma2", 1, AuxTransform::Positive),
        ],
    })
}

impl PpcaTarget {
    pub fn data(&self) -> &PpcaData {
        &self.data
    }

    /// `W diag(lambda)^2 W^T + sigma2 I`.
    pub fn covariance(w: &DMatrix<f64>, lambda: &[f64], sigma2: f64) -> DMatrix<f64> {
        let n = w.nrows();
        let mut c = DMatrix::identity(n, n) * sigma2;
        for (k, &l) in lambda.iter().enumerate() {
            let col = w.column(k);
            c.ger(l * l, &col, &col, 1.0);
        }
        c
    }
}

impl ModelTarget for PpcaTarget {
    fn name(&self) -> &str {
        "ppca"
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn aux_blocks(&self) -> &[AuxBlock] {
        &self.blocks
    }

    fn evaluate(&self, w: &DMatrix<f64>, aux: &[f64], grad_y: &mut DMatrix<f64>, grad_aux: &mut [f64]) -> f64 {
        let p = self.shape.p();
        let (lambda, sigma2) = (&aux[..p], aux[p]);
        let nf = self.data.n_obs as f64;
        let c = Self::covariance(w, lambda, sigma2);
        let Some(chol) = c.cholesky() else {
            return f64::NEG_INFINITY;
        };
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let c_inv = chol.inverse();
        let a = &c_inv * &self.data.sigma_hat;
        let trace = a.trace();
        // d logp / dC = (N/2) (C^-1 S_hat C^-1 - C^-1)
        let s = &a * &c_inv - &c_inv;
        let sw = &s * w;

        let prior: f64 = -(lambda.iter().map(|l| l * l).sum::<f64>() + sigma2 * sigma2) / (2.0 * PRIOR_SD * PRIOR_SD);
        let logp = -0.5 * nf * (log_det + trace) + prior;

        for k in 0..p {
            let l2 = lambda[k] * lambda[k];
            for r in 0..w.nrows() {
                grad_y[(r, k)] = nf * l2 * sw[(r, k)];
            }
            let quad = w.column(k).dot(&sw.column(k));
            grad_aux[k] = nf * lambda[k] * quad - lambda[k] / (PRIOR_SD * PRIOR_SD);
        }
        grad_aux[p] = 0.5 * nf * s.trace() - sigma2 / (PRIOR_SD * PRIOR_SD);
        logp
    }

    fn default_aux(&self) -> Vec<f64> {
        let p = self.shape.p();
        let mut v: Vec<f64> = (0..p).map(|k| (p - k) as f64).collect();
        v.push(1.0);
        v
    }
}

/// Generating configuration for synthetic PPCA data.
#[derive(Debug, Clone)]
pub struct PpcaSimulation {
    pub n_obs: usize,
    pub w: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub sigma2: f64,
}

impl Default for PpcaSimulation {
    /// Three-dimensional data near the horizontal plane: `N = 15`,
    /// `W = I(3,2)`, `lambda = (2, 1)`, `sigma2 = 1`.
    fn default() -> Self {
        Self {
            n_obs: 15,
            w: DMatrix::identity(3, 2),
            lambda: vec![2.0, 1.0],
            sigma2: 1.0,
        }
    }
}

/// Draw `N x n` observations `x = W diag(lambda) z + sigma e`.
pub fn simulate_ppca(sim: &PpcaSimulation, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (sim.w.nrows(), sim.w.ncols());
    let sigma = sim.sigma2.sqrt();
    let mut out = DMatrix::zeros(sim.n_obs, n);
    for row in 0..sim.n_obs {
        let z: DVector<f64> = DVector::from_fn(p, |k, _| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * sim.lambda[k]
        });
        let mean = &sim.w * z;
        for c in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            out[(row, c)] = mean[c] + sigma * e;
        }
    }
    out
}
