//! Split-R-hat and multi-chain effective sample size.

use crate::error::{domain, Result};

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Split-R-hat of one parameter. Each chain is cut in half (the middle draw
/// is dropped for odd lengths) and the classic between/within ratio is taken.
/// Zero within-chain variance gives `+inf`.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64> {
    let Some(n_draws) = chains.first().map(|c| c.len()) else {
        return domain("split_rhat needs at least one chain");
    };
    if n_draws < 4 {
        return domain(format!("split_rhat needs at least 4 draws per chain, got {n_draws}"));
    }
    if chains.iter().any(|c| c.len() != n_draws) {
        return domain("split_rhat needs chains of equal length");
    }
    let half = n_draws / 2;
    let mut means = Vec::with_capacity(2 * chains.len());
    let mut within = 0.0;
    for c in chains {
        for part in [&c[..half], &c[n_draws - half..]] {
            let (m, v) = mean_var(part);
            means.push(m);
            within += v;
        }
    }
    within /= means.len() as f64;
    if !(within > 0.0) {
        return Ok(f64::INFINITY);
    }
    let n = half as f64;
    let between = n * mean_var(&means).1;
    let var_plus = (n - 1.0) / n * within + between / n;
    Ok((var_plus / within).sqrt())
}

/// Biased autocovariance at `lag` (normalised by the chain length).
fn autocov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / n as f64
}

/// Effective sample size of one parameter across chains, using Geyer's
/// initial positive sequence with the monotone correction. Capped at the
/// total draw count and floored at 1.
pub fn ess(chains: &[&[f64]]) -> Result<f64> {
    let Some(n) = chains.first().map(|c| c.len()) else {
        return domain("ess needs at least one chain");
    };
    if n < 4 {
        return domain(format!("ess needs at least 4 draws per chain, got {n}"));
    }
    if chains.iter().any(|c| c.len() != n) {
        return domain("ess needs chains of equal length");
    }
    let m = chains.len();
    let total = (m * n) as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let mean_within = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let nf = n as f64;
    let mut var_plus = mean_within * (nf - 1.0) / nf;
    if m > 1 {
        let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
        var_plus += mean_var(&means).1;
    }
    if !(var_plus > 0.0) || !var_plus.is_finite() {
        return Ok(1.0);
    }

    let rho = |lag: usize| {
        let avg = chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| autocov(c, s.0, lag))
            .sum::<f64>()
            / m as f64;
        1.0 - (mean_within - avg) / var_plus
    };

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut t = 1;
    while t + 3 < n && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_hat[t + 1] = even;
            rho_hat[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 && max_t + 1 < n {
        rho_hat[max_t + 1] = even;
    }

    let mut t = 1;
    while t + 2 <= max_t && t + 2 < n {
        let prev = rho_hat[t - 1] + rho_hat[t];
        if rho_hat[t + 1] + rho_hat[t + 2] > prev {
            rho_hat[t + 1] = prev / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }

    let tail = if max_t + 1 < n { rho_hat[max_t + 1] } else { 0.0 };
    let mut tau = -1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + tail;
    tau = tau.max(1.0 / total.log10());
    Ok((total / tau).clamp(1.0, total))
}
