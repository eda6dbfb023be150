//! Transforms for the non-matrix parameters of a model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxTransform {
    /// Unbounded, sampled as is.
    Identity,
    /// `x = exp(u)`.
    Positive,
    /// Positive and strictly decreasing: `x_last = exp(u_last)`,
    /// `x_k = x_(k+1) + exp(u_k)`.
    OrderedPositive,
    /// Strictly decreasing: `x_last = u_last`, `x_k = x_(k+1) + exp(u_k)`.
    Ordered,
}

/// A named block of auxiliary parameters sharing one transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxBlock {
    pub name: String,
    pub len: usize,
    pub transform: AuxTransform,
}

impl AuxBlock {
    pub fn new(name: &str, len: usize, transform: AuxTransform) -> Self {
        Self {
            name: name.to_string(),
            len,
            transform,
        }
    }
}

pub fn aux_len(blocks: &[AuxBlock]) -> usize {
    blocks.iter().map(|b| b.len).sum()
}

/// Output column names: the block name alone for scalars, `name_k`
/// (1-based) otherwise.
pub fn aux_labels(blocks: &[AuxBlock]) -> Vec<String> {
    let mut out = Vec::new();
    for b in blocks {
        if b.len == 1 {
            out.push(b.name.clone());
        } else {
            out.extend((1..=b.len).map(|k| format!("{}_{k}", b.name)));
        }
    }
    out
}

/// Unconstrained -> constrained. Returns the log-Jacobian of the map.
pub fn constrain_aux(blocks: &[AuxBlock], u: &[f64], out: &mut [f64]) -> f64 {
    let mut log_jac = 0.0;
    let mut off = 0;
    for b in blocks {
        let (u, x) = (&u[off..off + b.len], &mut out[off..off + b.len]);
        match b.transform {
            AuxTransform::Identity => x.copy_from_slice(u),
            AuxTransform::Positive => {
                for k in 0..b.len {
                    x[k] = u[k].exp();
                    log_jac += u[k];
                }
            }
            AuxTransform::OrderedPositive | AuxTransform::Ordered => {
                let last = b.len - 1;
                if b.transform == AuxTransform::Ordered {
                    x[last] = u[last];
                } else {
                    x[last] = u[last].exp();
                    log_jac += u[last];
                }
                for k in (0..last).rev() {
                    x[k] = x[k + 1] + u[k].exp();
                    log_jac += u[k];
                }
            }
        }
        off += b.len;
    }
    log_jac
}

/// Pull `grad_x` (w.r.t. constrained values) back to the unconstrained
/// coordinates, adding the gradient of the log-Jacobian.
pub fn backward_aux(blocks: &[AuxBlock], u: &[f64], grad_x: &[f64], grad_u: &mut [f64]) {
    let mut off = 0;
    for b in blocks {
        let (u, gx, gu) = (
            &u[off..off + b.len],
            &grad_x[off..off + b.len],
            &mut grad_u[off..off + b.len],
        );
        match b.transform {
            AuxTransform::Identity => gu.copy_from_slice(gx),
            AuxTransform::Positive => {
                for k in 0..b.len {
                    gu[k] = gx[k] * u[k].exp() + 1.0;
                }
            }
            AuxTransform::OrderedPositive | AuxTransform::Ordered => {
                // x_k depends on u_m for every m >= k.
                let last = b.len - 1;
                let mut prefix = 0.0;
                for m in 0..b.len {
                    prefix += gx[m];
                    gu[m] = if m == last && b.transform == AuxTransform::Ordered {
                        prefix
                    } else {
                        prefix * u[m].exp() + 1.0
                    };
                }
            }
        }
        off += b.len;
    }
}

/// Constrained -> unconstrained, for initialization.
pub fn unconstrain_aux(blocks: &[AuxBlock], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != aux_len(blocks) {
        return domain(format!(
            "expected {} auxiliary values, got {}",
            aux_len(blocks),
            x.len()
        ));
    }
    let mut u = vec![0.0; x.len()];
    let mut off = 0;
    for b in blocks {
        let (x, u) = (&x[off..off + b.len], &mut u[off..off + b.len]);
        match b.transform {
            AuxTransform::Identity => u.copy_from_slice(x),
            AuxTransform::Positive => {
                for k in 0..b.len {
                    if !(x[k] > 0.0) {
                        return domain(format!("{} must be positive, got {}", b.name, x[k]));
                    }
                    u[k] = x[k].ln();
                }
            }
            AuxTransform::OrderedPositive | AuxTransform::Ordered => {
                let last = b.len - 1;
                if b.transform == AuxTransform::Ordered {
                    u[last] = x[last];
                } else if x[last] > 0.0 {
                    u[last] = x[last].ln();
                } else {
                    return domain(format!("{} must be positive, got {}", b.name, x[last]));
                }
                for k in 0..last {
                    let gap = x[k] - x[k + 1];
                    if !(gap > 0.0) {
                        return domain(format!("{} must be strictly decreasing", b.name));
                    }
                    u[k] = gap.ln();
                }
            }
        }
        off += b.len;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks() -> Vec<AuxBlock> {
        vec![
            AuxBlock::new("c", 1, AuxTransform::Identity),
            AuxBlock::new("lambda", 3, AuxTransform::OrderedPositive),
            AuxBlock::new("sigma2", 1, AuxTransform::Positive),
            AuxBlock::new("mu", 2, AuxTransform::Ordered),
        ]
    }

    #[test]
    fn ordering_and_round_trip() {
        let b = blocks();
        let u = [0.3, -0.2, 0.5, 1.1, -0.7, 0.4, -2.0];
        let mut x = [0.0; 7];
        constrain_aux(&b, &u, &mut x);
        assert!(x[1] > x[2] && x[2] > x[3] && x[3] > 0.0);
        assert!(x[5] > x[6]);
        let back = unconstrain_aux(&b, &x).unwrap();
        for (a, b) in back.iter().zip(u) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(
            aux_labels(&b),
            ["c", "lambda_1", "lambda_2", "lambda_3", "sigma2", "mu_1", "mu_2"]
        );
    }

    #[test]
    fn backward_matches_finite_differences() {
        let b = blocks();
        let u = [0.3, -0.2, 0.5, 1.1, -0.7, 0.4, -2.0];
        let weights = [0.7, -1.3, 0.2, 2.0, 0.5, -0.4, 1.5];
        // f(u) = w . x(u) + log_jac(u)
        let f = |u: &[f64]| {
            let mut x = [0.0; 7];
            let lj = constrain_aux(&b, u, &mut x);
            x.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>() + lj
        };
        let mut g = [0.0; 7];
        backward_aux(&b, &u, &weights, &mut g);
        for k in 0..7 {
            let h = 1e-6;
            let mut up = u;
            let mut dn = u;
            up[k] += h;
            dn[k] -= h;
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "coord {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn unconstrain_rejects_invalid() {
        let b = vec![AuxBlock::new("lambda", 2, AuxTransform::OrderedPositive)];
        assert!(unconstrain_aux(&b, &[1.0, 2.0]).is_err());
        assert!(unconstrain_aux(&b, &[1.0, -1.0]).is_err());
        assert!(unconstrain_aux(&b, &[1.0]).is_err());
    }
}
