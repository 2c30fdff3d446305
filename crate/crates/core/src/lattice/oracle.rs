//! Brute-force reference scans over bounding cubes.
//!
//! These do not share code with the recursive enumerators and are used only
//! to check them (tests, `selftest`, acceptance).

use super::{isqrt, LatticePoint};

/// Visits every point of the cube `center + [-half, half]^dim` in lexicographic order.
fn scan_cube<F: FnMut(&[i64])>(dim: usize, center: &[i64], half: i64, mut visit: F) {
    let mut cur: Vec<i64> = center.iter().map(|c| c - half).collect();
    loop {
        visit(&cur);
        let mut axis = dim;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cur[axis] < center[axis] + half {
                cur[axis] += 1;
                break;
            }
            cur[axis] = center[axis] - half;
        }
    }
}

/// Solutions of `|m - center|^2 = radius_sq` found by testing every point of
/// the cube of side `2 * ceil(sqrt(radius_sq)) + 1` around `center`.
pub fn shell_by_cube_scan(dim: usize, center: &LatticePoint, radius_sq: i64) -> Vec<LatticePoint> {
    let half = ceil_sqrt(radius_sq);
    let c = center.coords();
    let mut out = Vec::new();
    scan_cube(dim, c, half, |m| {
        let d: i64 = m.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d == radius_sq {
            out.push(LatticePoint::new(m.to_vec()));
        }
    });
    out
}

/// Number of shell solutions, scanning the cube row by row along the last
/// axis. Every cube point is tested; only the per-row prefix norm is reused.
pub fn shell_count_by_cube_scan(dim: usize, center: &LatticePoint, radius_sq: i64) -> usize {
    let half = ceil_sqrt(radius_sq);
    if dim == 1 {
        return shell_by_cube_scan(dim, center, radius_sq).len();
    }
    let c = center.coords();
    let mut count = 0usize;
    scan_cube(dim - 1, &c[..dim - 1], half, |prefix| {
        let base: i64 = prefix
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if base > radius_sq {
            return;
        }
        for t in -half..=half {
            if base + t * t == radius_sq {
                count += 1;
            }
        }
    });
    count
}

/// `{n : |n|^2 < lambda}` by scanning the cube of half-width `ceil(sqrt(lambda))`.
pub fn ball_by_cube_scan(dim: usize, lambda: f64) -> Vec<LatticePoint> {
    let half = lambda.sqrt().ceil() as i64;
    let origin = vec![0i64; dim];
    let mut out = Vec::new();
    scan_cube(dim, &origin, half, |m| {
        let s: i64 = m.iter().map(|x| x * x).sum();
        if (s as f64) < lambda {
            out.push(LatticePoint::new(m.to_vec()));
        }
    });
    out
}

/// Integer points of the ring `k <= |m - n| < k + 1`, by cube scan.
pub fn ring_by_cube_scan(dim: usize, k: i64, n: &LatticePoint) -> Vec<LatticePoint> {
    let lo = k * k;
    let hi = (k + 1) * (k + 1);
    let c = n.coords();
    let mut out = Vec::new();
    scan_cube(dim, c, k + 1, |m| {
        let d: i64 = m.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if d >= lo && d < hi {
            out.push(LatticePoint::new(m.to_vec()));
        }
    });
    out
}

fn ceil_sqrt(x: i64) -> i64 {
    let s = isqrt(x);
    if s * s == x {
        s
    } else {
        s + 1
    }
}
