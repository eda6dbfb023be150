//! Givens-angle coordinates for the Stiefel manifold `V(p, n)`.
//!
//! A matrix `Y` with orthonormal columns is written as
//!
//! ```text
//! Y = R(1,2) ... R(1,n) R(2,3) ... R(2,n) ... R(p,p+1) ... R(p,n) I(n,p)
//! ```
//!
//! where `R(i,j)` is the plane rotation acting on rows `i` and `j`, with
//! `cos` on the two diagonal slots, `-sin` at `(i,j)` and `+sin` at `(j,i)`.
//! The angles are stored contiguously in the order shown (column `i`
//! ascending, then row `j` ascending). Angle naming in docs is 1-based to
//! match that formula; all storage and row arguments are 0-based.
//!
//! The leading angle of each column, `theta(i,i+1)`, lives on the full circle
//! `(-pi, pi]`; every other angle lives on the half circle `(-pi/2, pi/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Orthonormality tolerance on `|Y^T Y - I|_inf`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Pivot pairs with both magnitudes below this are treated as exact zeros.
const ZERO_PIVOT: f64 = 1e-300;

/// Matrix dimensions `(n, p)` together with the intrinsic dimension
/// `d = n p - p (p + 1) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    n: usize,
    p: usize,
    d: usize,
}

impl Shape {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return domain(format!("invalid shape n={n}, p={p}: need 1 <= p <= n"));
        }
        let d = n * p - p * (p + 1) / 2;
        Ok(Self { n, p, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of Givens angles.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of columns that own a full-circle angle. This is `p`, except
    /// for square shapes where the last column has no angles at all.
    pub fn full_circle_count(&self) -> usize {
        self.p.min(self.n - 1)
    }

    /// Length of the unconstrained sampler vector: one coordinate per
    /// half-circle angle and two per full-circle angle.
    pub fn unconstrained_len(&self) -> usize {
        self.d + self.full_circle_count()
    }

    pub fn angle_indices(&self) -> Vec<AngleIndex> {
        angle_indices(*self)
    }
}

/// Build a [`Shape`], rejecting `p = 0` and `p > n`.
pub fn make_shape(n: usize, p: usize) -> Result<Shape> {
    Shape::new(n, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleKind {
    /// Range `(-pi, pi]`.
    FullCircle,
    /// Range `(-pi/2, pi/2)`.
    HalfCircle,
}

/// Position of one angle `theta(i, j)` in the representation (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleIndex {
    /// Column, `1 <= i <= p`.
    pub i: usize,
    /// Row, `i < j <= n`.
    pub j: usize,
    pub kind: AngleKind,
    /// Power of `cos(theta)` in the change-of-measure factor, `j - i - 1`.
    pub exponent: usize,
}

impl AngleIndex {
    fn new(i: usize, j: usize) -> Self {
        let kind = if j == i + 1 {
            AngleKind::FullCircle
        } else {
            AngleKind::HalfCircle
        };
        Self {
            i,
            j,
            kind,
            exponent: j - i - 1,
        }
    }

    /// Column label used in output files, e.g. `theta_1_3`.
    pub fn label(&self) -> String {
        format!("theta_{}_{}", self.i, self.j)
    }

    /// Closed interval that angles of this kind are stored in.
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            AngleKind::FullCircle => (-PI, PI),
            AngleKind::HalfCircle => (-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// All angle positions of `shape`, in storage order.
pub fn angle_indices(shape: Shape) -> Vec<AngleIndex> {
    let mut out = Vec::with_capacity(shape.d);
    for i in 1..=shape.p {
        for j in (i + 1)..=shape.n {
            out.push(AngleIndex::new(i, j));
        }
    }
    out
}

/// Givens angles for one point of `V(p, n)`.
///
/// Values are checked against the closed ranges `[-pi, pi]` and
/// `[-pi/2, pi/2]`; the half-circle endpoints are a measure-zero set that the
/// reduction can still hit, and [`log_measure`] maps them to `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleVector {
    shape: Shape,
    values: Vec<f64>,
}

impl AngleVector {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.d {
            return domain(format!(
                "angle vector has length {}, shape ({}, {}) needs {}",
                values.len(),
                shape.n,
                shape.p,
                shape.d
            ));
        }
        for (idx, (&v, ai)) in values.iter().zip(angle_indices(shape)).enumerate() {
            let (lo, hi) = ai.bounds();
            if !(v >= lo && v <= hi) {
                return domain(format!(
                    "angle {} (position {idx}) = {v} outside [{lo}, {hi}]",
                    ai.label()
                ));
            }
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            values: vec![0.0; shape.d],
        }
    }

    pub(crate) fn from_raw(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.d);
        Self { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// An `n x p` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelMatrix {
    shape: Shape,
    entries: DMatrix<f64>,
}

impl StiefelMatrix {
    /// Wrap `m`, checking `|m^T m - I|_inf <= 1e-10`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let shape = Shape::new(m.nrows(), m.ncols())?;
        let err = orthonormality_error(&m);
        if !(err <= ORTHONORMAL_TOL) {
            return domain(format!("matrix is not orthonormal: |Y^T Y - I| = {err:e}"));
        }
        Ok(Self { shape, entries: m })
    }

    /// The first `p` columns of the `n x n` identity.
    pub fn identity(shape: Shape) -> Self {
        Self {
            shape,
            entries: DMatrix::identity(shape.n, shape.p),
        }
    }

    pub(crate) fn from_raw(shape: Shape, entries: DMatrix<f64>) -> Self {
        Self { shape, entries }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

/// `max |(M^T M - I)_{ab}|`.
pub fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    let mut worst = 0.0_f64;
    for a in 0..gram.nrows() {
        for b in 0..gram.ncols() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[(a, b)] - target).abs());
        }
    }
    worst
}

/// Left-multiply `m` by the plane rotation on rows `i` and `j` (0-based):
///
/// ```text
/// row_i <- c row_i - s row_j
/// row_j <- s row_i + c row_j
/// ```
///
/// With `c = cos(theta)`, `s = sin(theta)` this is `R(i,j)(theta)`, which
/// turns `e_i` towards `e_j`:
///
/// ```
/// # use nalgebra::DMatrix;
/// # use stiefel_givens::givens::apply_rotation;
/// let mut m = DMatrix::<f64>::identity(2, 2);
/// let t = 0.3_f64;
/// apply_rotation(&mut m, 0, 1, t.cos(), t.sin());
/// assert_eq!(m[(0, 1)], -t.sin());
/// assert_eq!(m[(1, 0)], t.sin());
/// ```
pub fn apply_rotation(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    debug_assert!(i != j);
    rotate_rows(m, i, j, c, s, 0);
}

/// [`apply_rotation`] restricted to columns `first_col..`.
#[inline]
pub(crate) fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64, first_col: usize) {
    for col in first_col..m.ncols() {
        let a = m[(i, col)];
        let b = m[(j, col)];
        m[(i, col)] = c * a - s * b;
        m[(j, col)] = s * a + c * b;
    }
}

/// Apply the representation's rotation sequence to `m` in place.
///
/// `m` starts as `I(n,p)`; rotations are applied right to left, so column `p`
/// is built first. When rotating for column `i` every column left of `i` is
/// still zero in the rows involved, so only columns `i..p` are touched.
/// Returns the number of scalar multiplies performed.
pub(crate) fn forward_in_place(shape: Shape, angles: &[f64], m: &mut DMatrix<f64>) -> u64 {
    let (n, p) = (shape.n, shape.p);
    let mut ops = 0u64;
    let mut idx = shape.d;
    for i in (0..p).rev() {
        for j in ((i + 1)..n).rev() {
            idx -= 1;
            let (s, c) = angles[idx].sin_cos();
            rotate_rows(m, i, j, c, s, i);
            ops += 4 * (p - i) as u64;
        }
    }
    debug_assert_eq!(idx, 0);
    ops
}

/// Evaluate the representation at arbitrary real angles (no range checks).
pub fn angles_to_matrix(shape: Shape, angles: &[f64]) -> Result<DMatrix<f64>> {
    if angles.len() != shape.d {
        return domain(format!(
            "expected {} angles for shape ({}, {}), got {}",
            shape.d,
            shape.n,
            shape.p,
            angles.len()
        ));
    }
    let mut m = DMatrix::identity(shape.n, shape.p);
    forward_in_place(shape, angles, &mut m);
    Ok(m)
}

/// Map Givens angles to the corresponding point of the Stiefel manifold.
pub fn givens_to_matrix(theta: &AngleVector) -> StiefelMatrix {
    givens_to_matrix_counted(theta).0
}

/// [`givens_to_matrix`] plus the number of scalar multiplies it took.
pub fn givens_to_matrix_counted(theta: &AngleVector) -> (StiefelMatrix, u64) {
    let shape = theta.shape;
    let mut m = DMatrix::identity(shape.n, shape.p);
    let ops = forward_in_place(shape, &theta.values, &mut m);
    (StiefelMatrix::from_raw(shape, m), ops)
}

/// Log of the change-of-measure factor `prod cos(theta_ij)^(j-i-1)`.
///
/// Returns `-inf` if any half-circle angle has `cos <= 0`.
pub fn log_measure(theta: &AngleVector) -> f64 {
    log_measure_raw(theta.shape, &theta.values)
}

pub(crate) fn log_measure_raw(shape: Shape, angles: &[f64]) -> f64 {
    let mut total = 0.0;
    for (ai, &t) in angle_indices(shape).iter().zip(angles) {
        if ai.kind == AngleKind::HalfCircle {
            let c = t.cos();
            // cos(pi/2) rounds to a tiny positive number
            if !(c > 0.0) || t.abs() >= FRAC_PI_2 {
                return f64::NEG_INFINITY;
            }
            total += ai.exponent as f64 * c.ln();
        }
    }
    total
}

/// Output of [`givens_reduction`].
#[derive(Debug, Clone)]
pub struct Reduction {
    pub theta: AngleVector,
    /// Leading `p x p` block of the reduced matrix (upper triangular).
    pub r: DMatrix<f64>,
    /// Angles that hit an exact zero pivot pair and were set to 0.
    pub degenerate: Vec<AngleIndex>,
}

/// QR factorization by Givens rotations, recording the rotation angles.
///
/// Columns are cleared left to right; entry `(j, i)` is zeroed by applying
/// `R(i,j)(-theta)` with `theta = atan2(a_ji, a_ii)`. The first rotation of
/// each column leaves a non-negative pivot, so the remaining angles of that
/// column land in `[-pi/2, pi/2]`.
pub fn givens_reduction(a: &DMatrix<f64>) -> Result<Reduction> {
    let shape = Shape::new(a.nrows(), a.ncols())?;
    let (n, p) = (shape.n, shape.p);
    let mut work = a.clone();
    let mut theta = Vec::with_capacity(shape.d);
    let mut degenerate = Vec::new();
    for i in 0..p {
        for j in (i + 1)..n {
            let (top, bottom) = (work[(i, i)], work[(j, i)]);
            let mut t = if top.abs() < ZERO_PIVOT && bottom.abs() < ZERO_PIVOT {
                degenerate.push(AngleIndex::new(i + 1, j + 1));
                0.0
            } else {
                bottom.atan2(top)
            };
            if t == -PI {
                t = PI;
            }
            let (s, c) = t.sin_cos();
            rotate_rows(&mut work, i, j, c, -s, i);
            work[(j, i)] = 0.0;
            theta.push(t);
        }
    }
    let r = work.rows(0, p).into_owned();
    Ok(Reduction {
        theta: AngleVector::from_raw(shape, theta),
        r,
        degenerate,
    })
}

/// Recover the Givens angles of a Stiefel matrix.
///
/// For square shapes the representation only reaches matrices with
/// determinant `+1`; reflections are rejected.
pub fn matrix_to_givens(y: &StiefelMatrix) -> Result<AngleVector> {
    let red = givens_reduction(&y.entries)?;
    let p = y.shape.p;
    let last = red.r[(p - 1, p - 1)];
    if last < 0.0 {
        return domain("matrix has determinant -1; the Givens representation of a square shape covers SO(n) only");
    }
    Ok(red.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn shape_dimension() {
        assert_eq!(make_shape(3, 2).unwrap().d(), 3);
        assert_eq!(make_shape(7, 1).unwrap().d(), 6);
        assert_eq!(make_shape(5, 5).unwrap().d(), 10);
        assert!(make_shape(2, 3).is_err());
        assert!(make_shape(4, 0).is_err());
    }

    #[test]
    fn square_shapes_have_one_fewer_full_circle() {
        let s = make_shape(5, 5).unwrap();
        assert_eq!(s.full_circle_count(), 4);
        assert_eq!(s.unconstrained_len(), 14);
        let s = make_shape(5, 3).unwrap();
        assert_eq!(s.unconstrained_len(), s.d() + 3);
    }

    #[test]
    fn index_order() {
        let idx = angle_indices(make_shape(3, 2).unwrap());
        let got: Vec<_> = idx.iter().map(|a| (a.i, a.j, a.kind, a.exponent)).collect();
        assert_eq!(
            got,
            vec![
                (1, 2, AngleKind::FullCircle, 0),
                (1, 3, AngleKind::HalfCircle, 1),
                (2, 3, AngleKind::FullCircle, 0)
            ]
        );
        let idx = angle_indices(make_shape(2, 1).unwrap());
        assert_eq!(idx.len(), 1);
        assert_eq!(idx[0].kind, AngleKind::FullCircle);
        let exps: Vec<_> = angle_indices(make_shape(4, 1).unwrap())
            .iter()
            .map(|a| a.exponent)
            .collect();
        assert_eq!(exps, vec![0, 1, 2]);
        let exps: Vec<_> = angle_indices(make_shape(4, 2).unwrap())
            .iter()
            .map(|a| a.exponent)
            .collect();
        assert_eq!(exps, vec![0, 1, 2, 0, 1]);
    }

    #[test]
    fn rotation_basics() {
        let mut m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let orig = m.clone();
        apply_rotation(&mut m, 0, 2, 1.0, 0.0);
        assert_eq!(m, orig);

        let mut e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let (s, c) = FRAC_PI_2.sin_cos();
        apply_rotation(&mut e1, 0, 1, c, s);
        assert!(e1[(0, 0)].abs() < 1e-15 && (e1[(1, 0)] - 1.0).abs() < 1e-15);

        let t = 0.7_f64;
        apply_rotation(&mut m, 1, 2, t.cos(), t.sin());
        apply_rotation(&mut m, 1, 2, t.cos(), -t.sin());
        assert!(max_abs_diff(&m, &orig) < 1e-14);
    }

    #[test]
    fn forward_examples() {
        let s = make_shape(4, 2).unwrap();
        assert_eq!(
            givens_to_matrix(&AngleVector::zeros(s)).into_matrix(),
            DMatrix::identity(4, 2)
        );

        let s = make_shape(3, 1).unwrap();
        let y = givens_to_matrix(&AngleVector::new(s, vec![FRAC_PI_2, 0.0]).unwrap()).into_matrix();
        assert!(max_abs_diff(&y, &DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])) < 1e-15);

        let (a, b) = (0.4_f64, -0.9_f64);
        let y = givens_to_matrix(&AngleVector::new(s, vec![a, b]).unwrap()).into_matrix();
        let expect = [a.cos() * b.cos(), a.sin() * b.cos(), b.sin()];
        for r in 0..3 {
            assert!((y[(r, 0)] - expect[r]).abs() < 1e-15);
        }
    }

    #[test]
    fn angle_vector_rejects_bad_input() {
        let s = make_shape(3, 1).unwrap();
        assert!(AngleVector::new(s, vec![0.0]).is_err());
        assert!(AngleVector::new(s, vec![0.0, 2.0]).is_err());
        assert!(angles_to_matrix(s, &[0.1]).is_err());
    }

    #[test]
    fn log_measure_examples() {
        let s = make_shape(3, 1).unwrap();
        assert_eq!(log_measure(&AngleVector::zeros(s)), 0.0);
        let v = log_measure(&AngleVector::new(s, vec![2.5, FRAC_PI_3]).unwrap());
        assert!((v - 0.5_f64.ln()).abs() < 1e-14);
        let edge = AngleVector::new(s, vec![0.0, FRAC_PI_2]).unwrap();
        assert_eq!(log_measure(&edge), f64::NEG_INFINITY);
    }

    #[test]
    fn reduction_trivial_inputs() {
        for (n, p) in [(3, 2), (5, 3), (4, 4)] {
            let a = DMatrix::<f64>::identity(n, p);
            let red = givens_reduction(&a).unwrap();
            assert!(red.theta.values().iter().all(|&t| t == 0.0));
            assert_eq!(red.r, DMatrix::identity(p, p));

            let red = givens_reduction(&(a * 2.0)).unwrap();
            assert!(red.theta.values().iter().all(|&t| t == 0.0));
            assert_eq!(red.r, DMatrix::identity(p, p) * 2.0);
        }
    }

    #[test]
    fn reduction_zero_pivot_is_flagged() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let red = givens_reduction(&a).unwrap();
        assert_eq!(red.theta.values(), &[0.0, 0.0, 0.0]);
        assert_eq!(red.degenerate.len(), 1);
        assert_eq!((red.degenerate[0].i, red.degenerate[0].j), (2, 3));
    }

    #[test]
    fn inverse_examples() {
        let s = make_shape(3, 1).unwrap();
        let y = StiefelMatrix::new(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).unwrap();
        let t = matrix_to_givens(&y).unwrap();
        assert!((t.values()[0] - FRAC_PI_2).abs() < 1e-15 && t.values()[1].abs() < 1e-15);
        assert_eq!(
            matrix_to_givens(&StiefelMatrix::identity(s)).unwrap(),
            AngleVector::zeros(s)
        );

        // -e_1 sits on the full-circle seam and must map to +pi, not -pi.
        let y = StiefelMatrix::new(DMatrix::from_column_slice(3, 1, &[-1.0, -0.0, 0.0])).unwrap();
        assert_eq!(matrix_to_givens(&y).unwrap().values()[0], PI);
    }

    #[test]
    fn square_reflection_rejected() {
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(2, 2)] = -1.0;
        let y = StiefelMatrix::new(m).unwrap();
        assert!(matrix_to_givens(&y).is_err());
    }

    #[test]
    fn non_orthonormal_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.1, 0.0, 1.0, 0.0, 0.0]);
        assert!(StiefelMatrix::new(m).is_err());
    }

    #[test]
    fn op_count_linear_in_n() {
        let count = |n: usize, p: usize| {
            let s = make_shape(n, p).unwrap();
            givens_to_matrix_counted(&AngleVector::zeros(s)).1 as f64
        };
        let r = count(200, 2) / count(100, 2);
        assert!((1.8..=2.5).contains(&r), "{r}");
        let r = count(100, 8) / count(100, 4);
        assert!((3.2..=4.8).contains(&r), "{r}");
    }
}
