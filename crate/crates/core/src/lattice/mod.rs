//! Integer lattice enumeration.
//!
//! Balls and shells are enumerated exactly by recursive coordinate descent on
//! squared norms, so no floating-point rounding enters the membership test.
//! Output order is lexicographic in the coordinates. The [`oracle`] module
//! holds independent brute-force scans used to check these enumerators.

mod grouping;
pub mod oracle;

pub use grouping::{
    build_annulus_partition, build_grouping, cell_index, verify_grouping_bounds, AnnulusPartition,
    BoundReport, GroupKind, GroupingTable, Regime, RegimeSlack, ShellSummary,
};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, Result};

/// A point of `Z^N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        LatticePoint(coords)
    }

    pub fn origin(dim: usize) -> Self {
        LatticePoint(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn norm_sq(&self) -> i64 {
        norm_sq(&self.0)
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn dist_sq(&self, other: &LatticePoint) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn neg(&self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }

    pub fn offset(&self, delta: &[i64]) -> LatticePoint {
        LatticePoint(self.0.iter().zip(delta).map(|(a, b)| a + b).collect())
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn norm_sq(v: &[i64]) -> i64 {
    v.iter().map(|c| c * c).sum()
}

pub(crate) fn isqrt(x: i64) -> i64 {
    debug_assert!(x >= 0);
    (x as u64).isqrt() as i64
}

/// Integer points at squared distance `radius_sq` from `center`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeShell {
    pub dim: usize,
    pub center: LatticePoint,
    pub radius_sq: i64,
    pub points: Vec<LatticePoint>,
}

impl LatticeShell {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Calls `visit` with every offset `t` of length `dim` and `|t|^2 == radius_sq`,
/// in lexicographic order. The slice is reused between calls.
pub fn for_each_sphere_offset<F: FnMut(&[i64])>(dim: usize, radius_sq: i64, mut visit: F) {
    if dim == 0 || radius_sq < 0 {
        return;
    }
    let mut buf = vec![0i64; dim];
    sphere_rec(&mut buf, 0, radius_sq, &mut visit);
}

fn sphere_rec<F: FnMut(&[i64])>(buf: &mut [i64], depth: usize, rem: i64, visit: &mut F) {
    let last = buf.len() - 1;
    let s = isqrt(rem);
    if depth == last {
        if s * s == rem {
            if s == 0 {
                buf[depth] = 0;
                visit(buf);
            } else {
                buf[depth] = -s;
                visit(buf);
                buf[depth] = s;
                visit(buf);
            }
        }
        return;
    }
    for t in -s..=s {
        buf[depth] = t;
        sphere_rec(buf, depth + 1, rem - t * t, visit);
    }
}

/// Calls `visit` with every offset `t` with `|t|^2 <= max_sq`, lexicographically.
pub fn for_each_ball_offset<F: FnMut(&[i64])>(dim: usize, max_sq: i64, mut visit: F) {
    if dim == 0 || max_sq < 0 {
        return;
    }
    let mut buf = vec![0i64; dim];
    ball_rec(&mut buf, 0, max_sq, &mut visit);
}

fn ball_rec<F: FnMut(&[i64])>(buf: &mut [i64], depth: usize, rem: i64, visit: &mut F) {
    let s = isqrt(rem);
    for t in -s..=s {
        buf[depth] = t;
        if depth + 1 == buf.len() {
            visit(buf);
        } else {
            ball_rec(buf, depth + 1, rem - t * t, visit);
        }
    }
}

/// Largest integer `s` with `s < lambda`, i.e. the squared-norm cap of the open ball `|n|^2 < lambda`.
pub fn open_ball_cap(lambda: f64) -> Result<i64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(invalid(format!("lambda must be finite and positive, got {lambda}")));
    }
    Ok(lambda.ceil() as i64 - 1)
}

/// All `n` in `Z^dim` with `|n|^2 < lambda`, in lexicographic order.
pub fn enumerate_ball(dim: usize, lambda: f64) -> Result<Vec<LatticePoint>> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let cap = open_ball_cap(lambda)?;
    let mut out = Vec::new();
    for_each_ball_offset(dim, cap, |t| out.push(LatticePoint(t.to_vec())));
    Ok(out)
}

/// Complete solution set of `|m - center|^2 = radius_sq`.
pub fn enumerate_shell(dim: usize, center: &LatticePoint, radius_sq: i64) -> Result<LatticeShell> {
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if center.dim() != dim {
        return Err(invalid(format!(
            "center has dimension {}, expected {dim}",
            center.dim()
        )));
    }
    if radius_sq < 0 {
        return Err(invalid(format!("radius_sq must be nonnegative, got {radius_sq}")));
    }
    let mut points = Vec::new();
    for_each_sphere_offset(dim, radius_sq, |t| points.push(center.offset(t)));
    Ok(LatticeShell {
        dim,
        center: center.clone(),
        radius_sq,
        points,
    })
}

/// Representatives `n_1 >= n_2 >= ... >= n_N >= 0` of the signed-permutation
/// orbits of `{n : |n| <= n_max}`, paired with their orbit sizes.
///
/// Radial cutoffs make every kernel table invariant under signed coordinate
/// permutations, so maxima over a ball of frequencies can be taken over these.
pub fn orbit_representatives(dim: usize, n_max: i64) -> Vec<(LatticePoint, usize)> {
    let mut out = Vec::new();
    let mut buf = vec![0i64; dim];
    reps_rec(&mut buf, 0, n_max, n_max * n_max, &mut out);
    out
}

fn reps_rec(
    buf: &mut Vec<i64>,
    depth: usize,
    upper: i64,
    rem: i64,
    out: &mut Vec<(LatticePoint, usize)>,
) {
    if depth == buf.len() {
        out.push((LatticePoint(buf.clone()), orbit_size(buf)));
        return;
    }
    let top = upper.min(isqrt(rem));
    for t in 0..=top {
        buf[depth] = t;
        reps_rec(buf, depth + 1, t, rem - t * t, out);
    }
}

fn orbit_size(sorted_desc: &[i64]) -> usize {
    let dim = sorted_desc.len();
    let nonzero = sorted_desc.iter().filter(|&&c| c != 0).count();
    let mut perms = factorial(dim);
    let mut i = 0;
    while i < dim {
        let mut j = i;
        while j < dim && sorted_desc[j] == sorted_desc[i] {
            j += 1;
        }
        perms /= factorial(j - i);
        i = j;
    }
    perms << nonzero
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}
