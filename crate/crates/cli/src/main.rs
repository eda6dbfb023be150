mod args;
mod error;
mod output;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use chrono::Utc;
use clap::error::ErrorKind;
use clap::Parser;
use stiefel_givens::bench::{bench_grid, write_csv};
use stiefel_givens::checks::{run_checks, Suite};
use stiefel_givens::models::{
    eigenmodel_target, heldout_log_predictive, holdout_mask, intercept_only_log_predictive, ppca_target,
    read_network_csv, read_observations_csv, simulate_ppca, synth_network, EigenDraw, PpcaData, PpcaSimulation,
};
use stiefel_givens::{make_shape, run, ChartConfig, Fit, HmcConfig, ModelTarget, Shape};

use args::{parse_grid, BenchArgs, CheckArgs, Cli, Command, EigenmodelArgs, PpcaArgs, UniformArgs};
use error::{CliError, CliResult};
use output::{with_suffix, DiagReport, HoldoutReport, RunFiles, RunManifest, Summary};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match &command {
        Command::Uniform(a) => uniform(a, &command),
        Command::Ppca(a) => ppca(a, &command),
        Command::Eigenmodel(a) => eigenmodel(a, &command),
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a),
        Command::Replay(a) => {
            let manifest = output::read_manifest(&a.manifest)?;
            let mut inner = manifest.invocation;
            match &mut inner {
                Command::Uniform(x) => x.out_prefix = a.out_prefix.clone(),
                Command::Ppca(x) => x.out_prefix = a.out_prefix.clone(),
                Command::Eigenmodel(x) => x.out_prefix = a.out_prefix.clone(),
                other => return Err(CliError::Usage(format!("cannot replay a `{}` run", other.name()))),
            }
            // keep the thread count of this process, not the recorded one
            dispatch(inner)
        }
    }
}

/// A sampling run ready to go: the target plus everything the manifest echoes.
struct Job<'a> {
    invocation: &'a Command,
    prefix: &'a Path,
    model: Arc<dyn ModelTarget>,
    shape: Shape,
    chart: ChartConfig,
    hmc: HmcConfig,
}

fn sample(job: Job<'_>, holdout: impl FnOnce(&Fit) -> CliResult<Option<HoldoutReport>>) -> CliResult<()> {
    job.hmc.validate()?;
    let files = RunFiles::new(job.prefix);
    files.probe()?;
    let started_at = Utc::now();
    let clock = Instant::now();
    let fit = run(job.model, job.shape, job.chart, &job.hmc)?;
    let wall = clock.elapsed().as_secs_f64();
    let held = holdout(&fit)?;

    output::write_draws(&files.draws, &fit)?;
    let diag = DiagReport::new(&fit, wall, held);
    output::write_json(&files.diag, &diag)?;
    let manifest = RunManifest {
        command: job.invocation.name().to_string(),
        invocation: job.invocation.clone(),
        hmc: job.hmc,
        chart: job.chart,
        seed: job.hmc.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: Utc::now(),
        diagnostics: Summary::of(&fit),
        outputs: vec![files.draws.clone(), files.diag.clone()],
    };
    output::write_json(&files.manifest, &manifest)?;

    let s = &diag.summary;
    println!(
        "{} draws x {} columns; mean R-hat {:.4}, max R-hat {:.4}, mean ESS {:.0}, min ESS {:.0}, divergences {}, {:.1}s",
        fit.chains.iter().map(|c| c.draws.nrows()).sum::<usize>(),
        fit.columns.len(),
        s.mean_rhat,
        s.max_rhat,
        s.mean_ess,
        s.min_ess,
        s.divergences,
        wall
    );
    if let Some(h) = &diag.holdout {
        println!(
            "held-out log predictive {:.3} vs intercept-only {:.3} over {} dyads",
            h.log_predictive, h.intercept_only, h.held_out_dyads
        );
    }
    println!("wrote {}", files.draws.display());
    Ok(())
}

fn uniform(a: &UniformArgs, invocation: &Command) -> CliResult<()> {
    let shape = make_shape(a.n, a.p)?;
    let job = Job {
        invocation,
        prefix: &a.out_prefix,
        model: Arc::new(stiefel_givens::models::uniform_stiefel_target(shape)),
        shape,
        chart: a.chart.chart(false),
        hmc: a.sampler.hmc(),
    };
    sample(job, |_| Ok(None))
}

fn ppca(a: &PpcaArgs, invocation: &Command) -> CliResult<()> {
    let x = match &a.data {
        Some(path) => read_observations_csv(path)?,
        None => {
            let x = simulate_ppca(&PpcaSimulation::default(), a.data_seed);
            let path = with_suffix(&a.out_prefix, "-data.csv");
            let mut w = output::create(&path)?;
            for row in x.row_iter() {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                writeln!(w, "{}", line.join(",")).map_err(|e| CliError::io(&path, e))?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
            x
        }
    };
    let shape = make_shape(x.ncols(), a.p)?;
    let target = ppca_target(PpcaData::from_observations(&x)?, a.p)?;
    let job = Job {
        invocation,
        prefix: &a.out_prefix,
        model: Arc::new(target),
        shape,
        chart: a.chart.chart(true),
        hmc: a.sampler.hmc(),
    };
    sample(job, |_| Ok(None))
}

fn eigenmodel(a: &EigenmodelArgs, invocation: &Command) -> CliResult<()> {
    let data = match (&a.graph, a.synth) {
        (Some(path), _) => read_network_csv(path, a.nodes)?,
        (None, Some(n)) => synth_network(n, a.p, a.data_seed)?.data,
        (None, None) => return Err(CliError::Usage("one of --graph or --synth is required".into())),
    };
    let shape = make_shape(data.n_nodes(), a.p)?;
    let mut target = eigenmodel_target(data.clone(), a.p)?.with_ordered_lambda(a.ordered_lambda);
    let mask = match a.holdout {
        Some(frac) => {
            let mask = holdout_mask(&data, frac, a.holdout_seed)?;
            target = target.with_observed(mask.clone())?;
            Some((frac, mask))
        }
        None => None,
    };
    let job = Job {
        invocation,
        prefix: &a.out_prefix,
        model: Arc::new(target),
        shape,
        chart: a.chart.chart(false),
        hmc: a.sampler.hmc(),
    };
    let (n, p) = (shape.n(), shape.p());
    sample(job, |fit| {
        let Some((fraction, mask)) = mask else {
            return Ok(None);
        };
        let col = |name: &str| fit.column_index(name).expect("eigenmodel column");
        let (u0, l0, c0) = (col("Y_1_1"), col("lambda_1"), col("c"));
        let rows = fit.chains.iter().flat_map(|ch| ch.draws.row_iter());
        let rows: Vec<Vec<f64>> = rows.map(|r| r.iter().copied().collect()).collect();
        let draws = rows.iter().map(|r| EigenDraw {
            u: &r[u0..u0 + n * p],
            lambda: &r[l0..l0 + p],
            c: r[c0],
        });
        Ok(Some(HoldoutReport {
            fraction,
            held_out_dyads: mask.iter().filter(|&&m| !m).count(),
            log_predictive: heldout_log_predictive(&data, &mask, draws)?,
            intercept_only: intercept_only_log_predictive(&data, &mask),
        }))
    })
}

fn check(a: &CheckArgs) -> CliResult<()> {
    let suite: Suite = a.suite.parse()?;
    let seed = if a.strict {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(a.seed)
    } else {
        a.seed
    };
    let report = run_checks(suite, seed)?;
    println!("seed {seed}");
    println!("{report}");
    if let Some(path) = &a.json {
        output::write_json(path, &report)?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::ChecksFailed)
    }
}

fn bench(a: &BenchArgs) -> CliResult<()> {
    let shapes = parse_grid(&a.grid).map_err(CliError::Usage)?;
    let rows = bench_grid(&shapes, a.reps, a.seed)?;
    match &a.out {
        Some(path) => {
            let w = output::create(path)?;
            write_csv(&rows, w).map_err(|e| match e {
                stiefel_givens::Error::Io(io) => CliError::io(path, io),
                other => other.into(),
            })
        }
        None => Ok(write_csv(&rows, std::io::stdout().lock())?),
    }
}
