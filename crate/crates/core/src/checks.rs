//! Self-check batteries that compare the library against the oracles.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charts::ChartConfig;
use crate::diff::Evaluator;
use crate::error::{Error, Result};
use crate::givens::{
    angle_indices, givens_to_matrix, log_measure, make_shape, matrix_to_givens, AngleKind, AngleVector, Shape,
};
use crate::models::{
    eigenmodel_target, ppca_target, simulate_ppca, synth_network, uniform_stiefel_target, ModelTarget, PpcaData,
};
use crate::oracle::{
    angle_marginal_cdf, finite_difference_gradient, gradient_mismatch, haar_sample_with, ks_statistic,
    numeric_log_measure,
};
use crate::sampler::Potential;

pub const ROUNDTRIP_SHAPES: [(usize, usize); 3] = [(3, 2), (5, 3), (10, 4)];
pub const ROUNDTRIP_CASES: usize = 1000;
pub const ROUNDTRIP_TOL: f64 = 1e-10;
pub const JACOBIAN_SHAPES: [(usize, usize); 4] = [(3, 1), (3, 2), (5, 3), (6, 3)];
pub const JACOBIAN_POINTS: usize = 200;
pub const JACOBIAN_TOL: f64 = 1e-5;
pub const GRADIENT_POINTS: usize = 200;
pub const GRADIENT_REL: f64 = 1e-5;
pub const GRADIENT_ABS: f64 = 1e-8;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const MARGINAL_SHAPES: [(usize, usize); 3] = [(3, 2), (5, 2), (6, 3)];
pub const MARGINAL_DRAWS: usize = 5000;
pub const KS_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Roundtrip,
    Jacobian,
    Gradient,
    Marginals,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["roundtrip", "jacobian", "gradient", "marginals", "all"];

    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Roundtrip, Suite::Jacobian, Suite::Gradient, Suite::Marginals],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roundtrip" => Ok(Suite::Roundtrip),
            "jacobian" => Ok(Suite::Jacobian),
            "gradient" => Ok(Suite::Gradient),
            "marginals" => Ok(Suite::Marginals),
            "all" => Ok(Suite::All),
            other => Err(Error::Domain(format!(
                "unknown check suite '{other}' (expected one of {})",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Roundtrip => "roundtrip",
            Suite::Jacobian => "jacobian",
            Suite::Gradient => "gradient",
            Suite::Marginals => "marginals",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

/// One comparison: `value` must stay below `threshold`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub suite: Suite,
    pub case: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for it in &self.items {
            writeln!(
                f,
                "{} {:<10} {:<28} {:.3e} (limit {:.1e})",
                if it.pass { "PASS" } else { "FAIL" },
                it.suite,
                it.case,
                it.value,
                it.threshold
            )?;
        }
        write!(
            f,
            "{}",
            if self.pass {
                "all checks passed"
            } else {
                "some checks FAILED"
            }
        )
    }
}

fn item(suite: Suite, case: String, value: f64, threshold: f64) -> CheckItem {
    CheckItem {
        suite,
        case,
        value,
        threshold,
        // NaN fails
        pass: value <= threshold,
    }
}

/// Run `suite` with a fixed `seed`.
pub fn run_checks(suite: Suite, seed: u64) -> Result<CheckReport> {
    let mut items = Vec::new();
    for s in suite.expand() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        items.extend(match s {
            Suite::Roundtrip => roundtrip(&mut rng)?,
            Suite::Jacobian => jacobian(&mut rng)?,
            Suite::Gradient => gradient(&mut rng)?,
            Suite::Marginals => marginals(&mut rng)?,
            Suite::All => unreachable!("expanded above"),
        });
    }
    let pass = items.iter().all(|i| i.pass);
    Ok(CheckReport { seed, items, pass })
}

/// `Y -> angles -> Y` over Haar draws; reports the worst entrywise error.
pub fn roundtrip(rng: &mut ChaCha8Rng) -> Result<Vec<CheckItem>> {
    let mut out = Vec::new();
    for (n, p) in ROUNDTRIP_SHAPES {
        let shape = make_shape(n, p)?;
        let mut worst = 0.0_f64;
        for _ in 0..ROUNDTRIP_CASES {
            let y = haar_sample_with(shape, rng);
            let back = givens_to_matrix(&matrix_to_givens(&y)?);
            worst = worst.max((y.as_matrix() - back.as_matrix()).amax());
        }
        out.push(item(
            Suite::Roundtrip,
            format!("({n},{p}) x{ROUNDTRIP_CASES}"),
            worst,
            ROUNDTRIP_TOL,
        ));
    }
    Ok(out)
}

/// Angles drawn uniformly from their ranges, kept `margin` away from the ends.
pub fn random_angles(shape: Shape, margin: f64, rng: &mut ChaCha8Rng) -> AngleVector {
    let values = angle_indices(shape)
        .iter()
        .map(|ai| {
            let (lo, hi) = ai.bounds();
            rng.random_range(lo + margin..hi - margin)
        })
        .collect();
    AngleVector::new(shape, values).expect("values drawn inside the bounds")
}

/// Analytic measure term against the determinant oracle.
pub fn jacobian(rng: &mut ChaCha8Rng) -> Result<Vec<CheckItem>> {
    let mut out = Vec::new();
    for (n, p) in JACOBIAN_SHAPES {
        let shape = make_shape(n, p)?;
        let mut worst = 0.0_f64;
        for _ in 0..JACOBIAN_POINTS {
            let theta = random_angles(shape, 1e-4, rng);
            let err = (numeric_log_measure(&theta)? - log_measure(&theta)).abs();
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
        out.push(item(
            Suite::Jacobian,
            format!("({n},{p}) x{JACOBIAN_POINTS}"),
            worst,
            JACOBIAN_TOL,
        ));
    }
    Ok(out)
}

/// A named model with the chart it is checked under.
pub type NamedModel = (String, Arc<dyn ModelTarget>, ChartConfig);

/// The three models exercised by the gradient battery.
pub fn gradient_models(seed: u64) -> Result<Vec<NamedModel>> {
    let plain = ChartConfig::default();
    let mirrored = ChartConfig {
        mirrored: true,
        ..plain
    };
    let x = simulate_ppca(&Default::default(), seed);
    let ppca = ppca_target(PpcaData::from_observations(&x)?, 2)?;
    let net = synth_network(12, 3, seed)?;
    Ok(vec![
        (
            "uniform (5,3)".into(),
            Arc::new(uniform_stiefel_target(make_shape(5, 3)?)) as Arc<dyn ModelTarget>,
            plain,
        ),
        ("ppca (3,2) mirrored".into(), Arc::new(ppca), mirrored),
        (
            "eigenmodel (12,3)".into(),
            Arc::new(eigenmodel_target(net.data, 3)?),
            plain,
        ),
    ])
}

/// Random sampler-space point: chart start with the full-circle radii
/// spread over `[0.7, 1.3]`.
pub fn random_point(ev: &mut Evaluator, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q = ev.initial_point(rng);
    let mut pos = 0;
    for ai in angle_indices(ev.shape()) {
        if ai.kind == AngleKind::FullCircle {
            let r = rng.random_range(0.7..1.3);
            q[pos] *= r;
            q[pos + 1] *= r;
            pos += 2;
        } else {
            pos += 1;
        }
    }
    q
}

/// Worst gradient mismatch ratio (`<= 1` passes) of one model.
pub fn gradient_mismatch_for(
    model: Arc<dyn ModelTarget>,
    chart: ChartConfig,
    points: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut ev = Evaluator::new(model, chart)?;
    let mut worst = 0.0_f64;
    let mut grad = vec![0.0; ev.dim()];
    for _ in 0..points {
        let q = random_point(&mut ev, rng);
        let lp = ev.log_density_grad(&q, &mut grad);
        if !lp.is_finite() {
            return Err(Error::Sampler(format!("log density not finite at check point {q:?}")));
        }
        let mut probe = ev.clone();
        let fd = finite_difference_gradient(|v| probe.log_density(v), &q, GRADIENT_STEP);
        worst = worst.max(gradient_mismatch(&grad, &fd, GRADIENT_REL, GRADIENT_ABS));
    }
    Ok(worst)
}

pub fn gradient(rng: &mut ChaCha8Rng) -> Result<Vec<CheckItem>> {
    let seed = rng.random();
    let mut out = Vec::new();
    for (name, model, chart) in gradient_models(seed)? {
        let worst = gradient_mismatch_for(model, chart, GRADIENT_POINTS, rng)?;
        out.push(item(Suite::Gradient, format!("{name} x{GRADIENT_POINTS}"), worst, 1.0));
    }
    Ok(out)
}

/// KS of each reconstructed angle under Haar draws against its marginal.
pub fn marginals(rng: &mut ChaCha8Rng) -> Result<Vec<CheckItem>> {
    let mut out = Vec::new();
    for (n, p) in MARGINAL_SHAPES {
        let shape = make_shape(n, p)?;
        let idx = angle_indices(shape);
        let mut cols = vec![Vec::with_capacity(MARGINAL_DRAWS); idx.len()];
        for _ in 0..MARGINAL_DRAWS {
            let theta = matrix_to_givens(&haar_sample_with(shape, rng))?;
            for (c, v) in cols.iter_mut().zip(theta.values()) {
                c.push(*v);
            }
        }
        for (ai, mut col) in idx.iter().zip(cols) {
            col.sort_by(f64::total_cmp);
            let cdf = angle_marginal_cdf(ai);
            let rep = ks_statistic(&col, |x| cdf.eval(x), KS_THRESHOLD)?;
            out.push(CheckItem {
                pass: rep.pass,
                ..item(
                    Suite::Marginals,
                    format!("({n},{p}) {}", ai.label()),
                    rep.statistic,
                    KS_THRESHOLD,
                )
            });
        }
    }
    Ok(out)
}
