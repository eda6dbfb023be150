//! Operation counts and timings of the forward map over a grid of shapes.

use std::io::Write;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::givens::{angle_indices, givens_to_matrix_counted, make_shape, AngleVector, Shape};

pub const HEADER: [&str; 6] = ["n", "p", "d", "ops", "reps", "mean_ns"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    /// Scalar multiply-adds of one forward map.
    pub ops: u64,
    pub reps: usize,
    pub mean_ns: f64,
}

/// Multiply-add count of one forward map at `shape` (independent of the
/// angle values).
pub fn op_count(shape: Shape) -> u64 {
    givens_to_matrix_counted(&AngleVector::zeros(shape)).1
}

/// Time `reps` forward maps per shape. With `reps == 0` nothing is measured
/// and no rows are produced.
pub fn bench_grid(shapes: &[(usize, usize)], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(shapes.len());
    for &(n, p) in shapes {
        let shape = make_shape(n, p)?;
        let values: Vec<f64> = angle_indices(shape)
            .iter()
            .map(|ai| {
                let (lo, hi) = ai.bounds();
                rng.random_range(lo * 0.99..hi * 0.99)
            })
            .collect();
        let theta = AngleVector::new(shape, values)?;
        let mut ops = 0;
        let start = Instant::now();
        for _ in 0..reps {
            let (y, k) = givens_to_matrix_counted(std::hint::black_box(&theta));
            std::hint::black_box(y);
            ops = k;
        }
        let mean_ns = start.elapsed().as_nanos() as f64 / reps as f64;
        rows.push(BenchRow {
            n,
            p,
            d: shape.d(),
            ops,
            reps,
            mean_ns,
        });
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.d.to_string(),
            r.ops.to_string(),
            r.reps.to_string(),
            format!("{:.1}", r.mean_ns),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reps_gives_header_only() {
        let rows = bench_grid(&[(10, 2)], 0, 0).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,p,d,ops,reps,mean_ns\n");
    }

    #[test]
    fn rows_carry_op_counts() {
        let rows = bench_grid(&[(20, 2), (40, 2)], 3, 1).unwrap();
        assert_eq!(rows[0].ops, op_count(make_shape(20, 2).unwrap()));
        assert!(rows[1].ops > rows[0].ops);
    }
}
