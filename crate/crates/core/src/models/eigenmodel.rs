//! Latent eigenmodel for symmetric binary networks.
//!
//! For every dyad `i > j`:
//!
//! ```text
//! Y_ij ~ Bernoulli(Phi([U diag(lambda) U^T]_ij + c))
//! c ~ N(0, 10^2),  lambda_k ~ N(0, n)  (variance n, the node count)
//! ```

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::probit::{inverse_mills, log_ndtr, ndtr};
use super::{AuxBlock, AuxTransform, ModelTarget};
use crate::error::{Error, Result};
use crate::givens::Shape;
use crate::oracle::haar_sample_with;

const C_PRIOR_SD: f64 = 10.0;

/// Symmetric 0/1 adjacency; the diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    n_nodes: usize,
    adjacency: Vec<bool>,
}

impl NetworkData {
    /// From a dense row-major `n x n` 0/1 matrix.
    pub fn from_dense(n_nodes: usize, entries: &[u8]) -> Result<Self> {
        if entries.len() != n_nodes * n_nodes {
            return Err(Error::Data(format!(
                "adjacency has {} entries, expected {}",
                entries.len(),
                n_nodes * n_nodes
            )));
        }
        if let Some(bad) = entries.iter().find(|&&v| v > 1) {
            return Err(Error::Data(format!("adjacency entries must be 0 or 1, found {bad}")));
        }
        for i in 0..n_nodes {
            for j in 0..i {
                if entries[i * n_nodes + j] != entries[j * n_nodes + i] {
                    return Err(Error::Data(format!(
                        "adjacency is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let mut adjacency: Vec<bool> = entries.iter().map(|&v| v == 1).collect();
        for i in 0..n_nodes {
            adjacency[i * n_nodes + i] = false;
        }
        Ok(Self { n_nodes, adjacency })
    }

    /// From an undirected edge list with 0-based node ids. Self loops are
    /// dropped.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![false; n_nodes * n_nodes];
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Data(format!("edge ({a}, {b}) references a node >= {n_nodes}")));
            }
            if a != b {
                adjacency[a * n_nodes + b] = true;
                adjacency[b * n_nodes + a] = true;
            }
        }
        Ok(Self { n_nodes, adjacency })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_nodes + j]
    }

    pub fn dyad_count(&self) -> usize {
        self.n_nodes * (self.n_nodes.saturating_sub(1)) / 2
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n_nodes)
            .map(|i| (0..i).filter(|&j| self.edge(i, j)).count())
            .sum()
    }

    pub fn density(&self) -> f64 {
        self.edge_count() as f64 / self.dyad_count().max(1) as f64
    }
}

/// Position of dyad `(i, j)`, `i > j`, in lower-triangle order.
pub(crate) fn dyad_index(i: usize, j: usize) -> usize {
    i * (i - 1) / 2 + j
}

#[derive(Debug, Clone)]
pub struct EigenmodelTarget {
    data: NetworkData,
    shape: Shape,
    blocks: Vec<AuxBlock>,
    observed: Option<Vec<bool>>,
}

/// Eigenmodel with `p` latent dimensions. Aux layout: `c`, then
/// `lambda_1..lambda_p` (unordered).
pub fn eigenmodel_target(data: NetworkData, p: usize) -> Result<EigenmodelTarget> {
    let shape = Shape::new(data.n_nodes, p)?;
    Ok(EigenmodelTarget {
        data,
        shape,
        blocks: vec![
            AuxBlock::new("c", 1, AuxTransform::Identity),
            AuxBlock::new("lambda", p, AuxTransform::Identity),
        ],
        observed: None,
    })
}

impl EigenmodelTarget {
    /// Constrain `lambda` to be strictly decreasing, removing the label
    /// switching between latent dimensions.
    pub fn with_ordered_lambda(mut self, ordered: bool) -> Self {
        self.blocks[1].transform = if ordered && self.shape.p() > 1 {
            AuxTransform::Ordered
        } else {
            AuxTransform::Identity
        };
        self
    }

    /// Only dyads flagged `true` (lower-triangle order) enter the likelihood.
    pub fn with_observed(mut self, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != self.data.dyad_count() {
            return Err(Error::Data(format!(
                "mask has {} entries, graph has {} dyads",
                observed.len(),
                self.data.dyad_count()
            )));
        }
        self.observed = Some(observed);
        Ok(self)
    }

    pub fn data(&self) -> &NetworkData {
        &self.data
    }

    fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed.as_ref().is_none_or(|m| m[dyad_index(i, j)])
    }

    /// Bernoulli log-likelihood of a single dyad.
    pub fn dyad_log_likelihood(&self, u: &DMatrix<f64>, lambda: &[f64], c: f64, i: usize, j: usize) -> f64 {
        let eta: f64 = (0..lambda.len())
            .map(|k| u[(i, k)] * lambda[k] * u[(j, k)])
            .sum::<f64>()
            + c;
        let sign = if self.data.edge(i, j) { 1.0 } else { -1.0 };
        log_ndtr(sign * eta)
    }
}

impl ModelTarget for EigenmodelTarget {
    fn name(&self) -> &str {
        "eigenmodel"
    }

    fn shape(&self) -> Shape {
        self.shape
    }

    fn aux_blocks(&self) -> &[AuxBlock] {
        &self.blocks
    }

    fn evaluate(&self, u: &DMatrix<f64>, aux: &[f64], grad_y: &mut DMatrix<f64>, grad_aux: &mut [f64]) -> f64 {
        let n = self.data.n_nodes;
        let p = self.shape.p();
        let c = aux[0];
        let lambda = &aux[1..=p];

        let mut ul = u.clone();
        for (k, &l) in lambda.iter().enumerate() {
            ul.column_mut(k).scale_mut(l);
        }
        let m = &ul * u.transpose();

        // g_ij = d loglik / d eta_ij, symmetric with zero diagonal
        let mut g = DMatrix::zeros(n, n);
        let mut loglik = 0.0;
        let mut grad_c = 0.0;
        for i in 1..n {
            for j in 0..i {
                if !self.is_observed(i, j) {
                    continue;
                }
                let eta = m[(i, j)] + c;
                let sign = if self.data.edge(i, j) { 1.0 } else { -1.0 };
                loglik += log_ndtr(sign * eta);
                let gij = sign * inverse_mills(sign * eta);
                g[(i, j)] = gij;
                g[(j, i)] = gij;
                grad_c += gij;
            }
        }

        let lambda_var = n as f64;
        let prior =
            -c * c / (2.0 * C_PRIOR_SD * C_PRIOR_SD) - lambda.iter().map(|l| l * l).sum::<f64>() / (2.0 * lambda_var);

        // sum_{i>j} g_ij eta_ij = tr(G U L U^T) / 2
        grad_y.copy_from(&(&g * &ul));
        let gu = &g * u;
        grad_aux[0] = grad_c - c / (C_PRIOR_SD * C_PRIOR_SD);
        for k in 0..p {
            grad_aux[1 + k] = 0.5 * u.column(k).dot(&gu.column(k)) - lambda[k] / lambda_var;
        }
        loglik + prior
    }

    fn default_aux(&self) -> Vec<f64> {
        let p = self.shape.p();
        let mut v = vec![0.0];
        // distinct values so the ordered variant is also valid
        v.extend((0..p).map(|k| (p - k) as f64));
        v
    }
}

/// A synthetic network together with the parameters that generated it.
#[derive(Debug, Clone)]
pub struct SynthNetwork {
    pub data: NetworkData,
    pub u: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub c: f64,
}

/// Draw `U` uniformly, `lambda` and `c` from their priors, then every dyad.
pub fn synth_network(n_nodes: usize, p: usize, seed: u64) -> Result<SynthNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(n_nodes, p)?;
    let lambda: Vec<f64> = (0..p)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (n_nodes as f64).sqrt()
        })
        .collect();
    let z: f64 = StandardNormal.sample(&mut rng);
    let c = C_PRIOR_SD * z;
    let u = haar_sample_with(shape, &mut rng).into_matrix();
    let data = sample_graph(&u, &lambda, c, &mut rng);
    Ok(SynthNetwork { data, u, lambda, c })
}

pub(crate) fn sample_graph(u: &DMatrix<f64>, lambda: &[f64], c: f64, rng: &mut ChaCha8Rng) -> NetworkData {
    let n = u.nrows();
    let mut adjacency = vec![false; n * n];
    for i in 1..n {
        for j in 0..i {
            let eta: f64 = (0..lambda.len())
                .map(|k| u[(i, k)] * lambda[k] * u[(j, k)])
                .sum::<f64>()
                + c;
            let draw: f64 = rng.random();
            let edge = draw < ndtr(eta);
            adjacency[i * n + j] = edge;
            adjacency[j * n + i] = edge;
        }
    }
    NetworkData { n_nodes: n, adjacency }
}

/// Training mask over the dyads (lower-triangle order): exactly
/// `round(frac * dyads)` dyads, chosen uniformly, are held out (`false`).
pub fn holdout_mask(data: &NetworkData, frac: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::Domain(format!(
            "holdout fraction must lie in [0, 1), got {frac}"
        )));
    }
    let total = data.dyad_count();
    let held = (frac * total as f64).round() as usize;
    let mut order: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // partial Fisher-Yates: the first `held` slots are the held-out dyads
    for k in 0..held {
        let pick = rng.random_range(k..total);
        order.swap(k, pick);
    }
    let mut mask = vec![true; total];
    for &d in &order[..held] {
        mask[d] = false;
    }
    Ok(mask)
}

/// One posterior draw of the eigenmodel parameters; `u` is row-major `n x p`.
#[derive(Debug, Clone, Copy)]
pub struct EigenDraw<'a> {
    pub u: &'a [f64],
    pub lambda: &'a [f64],
    pub c: f64,
}

/// Log posterior-predictive probability of the held-out dyads (`false` in
/// `observed`): per dyad, the edge probability is averaged over the draws.
pub fn heldout_log_predictive<'a>(
    data: &NetworkData,
    observed: &[bool],
    draws: impl IntoIterator<Item = EigenDraw<'a>>,
) -> Result<f64> {
    let n = data.n_nodes;
    if observed.len() != data.dyad_count() {
        return Err(Error::Data(format!(
            "mask has {} entries, graph has {} dyads",
            observed.len(),
            data.dyad_count()
        )));
    }
    let mut prob_sum = vec![0.0; observed.len()];
    let mut count = 0usize;
    for d in draws {
        let p = d.lambda.len();
        if d.u.len() != n * p {
            return Err(Error::Data(format!(
                "draw has {} loadings, expected {}",
                d.u.len(),
                n * p
            )));
        }
        count += 1;
        for i in 1..n {
            for j in 0..i {
                let k = dyad_index(i, j);
                if observed[k] {
                    continue;
                }
                let eta: f64 = (0..p)
                    .map(|l| d.u[i * p + l] * d.lambda[l] * d.u[j * p + l])
                    .sum::<f64>()
                    + d.c;
                prob_sum[k] += ndtr(eta);
            }
        }
    }
    if count == 0 {
        return Err(Error::Data("no posterior draws".into()));
    }
    let mut total = 0.0;
    for i in 1..n {
        for j in 0..i {
            let k = dyad_index(i, j);
            if observed[k] {
                continue;
            }
            let p_edge = prob_sum[k] / count as f64;
            total += if data.edge(i, j) {
                p_edge.ln()
            } else {
                (1.0 - p_edge).ln()
            };
        }
    }
    Ok(total)
}

/// Held-out log-likelihood of the intercept-only model fitted to the
/// training dyads (edge probability = training density, add-one-half
/// smoothed).
pub fn intercept_only_log_predictive(data: &NetworkData, observed: &[bool]) -> f64 {
    let n = data.n_nodes;
    let (mut edges, mut train) = (0.0, 0.0);
    for i in 1..n {
        for j in 0..i {
            if observed[dyad_index(i, j)] {
                train += 1.0;
                edges += data.edge(i, j) as u8 as f64;
            }
        }
    }
    let rate = (edges + 0.5) / (train + 1.0);
    let mut total = 0.0;
    for i in 1..n {
        for j in 0..i {
            if !observed[dyad_index(i, j)] {
                total += if data.edge(i, j) { rate.ln() } else { (1.0 - rate).ln() };
            }
        }
    }
    total
}
