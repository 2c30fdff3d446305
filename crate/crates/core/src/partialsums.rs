//! Spherical partial sums `S_lambda f = sum_{|n|^2 < lambda} f_n e^{i n.x}`.
//!
//! Functions are given by a dense box of Fourier coefficients. Partial sums
//! are evaluated either on a full periodic grid by FFT or at arbitrary points
//! by direct summation with separable per-axis exponential tables.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::cutoff::PsiCoefficients;
use crate::error::{invalid, Error, Result};
use crate::kernels::{big_theta_coefficient, theta_coefficient, DEFAULT_TRUNCATION_TOL};
use crate::lattice::{isqrt, open_ball_cap, LatticePoint};
use crate::report::fmt_f64;
use crate::transform::{node, node_coords, phase_sign, unflatten, wrap_index, GridTransform};

/// Fourier coefficients `f_n`, `|n_i| <= band`, dense in lexicographic order of `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumFunction {
    pub dim: usize,
    pub band: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectrumFunction {
    pub fn zero(dim: usize, band: usize) -> Result<SpectrumFunction> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(SpectrumFunction {
            dim,
            band,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * band + 1).pow(dim as u32)],
        })
    }

    pub fn from_fn<F: FnMut(&[i64]) -> Complex64>(dim: usize, band: usize, mut f: F) -> Result<SpectrumFunction> {
        let mut out = SpectrumFunction::zero(dim, band)?;
        let mut n = vec![0i64; dim];
        for i in 0..out.coeffs.len() {
            out.frequency_into(i, &mut n);
            out.coeffs[i] = f(&n);
        }
        Ok(out)
    }

    pub fn single_mode(dim: usize, band: usize, m: &[i64], c: Complex64) -> Result<SpectrumFunction> {
        let mut out = SpectrumFunction::zero(dim, band)?;
        let i = out
            .index(m)
            .ok_or_else(|| invalid(format!("mode {m:?} lies outside band {band}")))?;
        out.coeffs[i] = c;
        Ok(out)
    }

    /// Seeded random coefficients `u_n / (1 + |n|^2)`, `u_n` uniform in the unit
    /// square. With `real`, coefficients are made Hermitian so the function is real.
    pub fn random(dim: usize, band: usize, seed: u64, real: bool) -> Result<SpectrumFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = SpectrumFunction::from_fn(dim, band, |n| {
            let w = 1.0 / (1.0 + crate::lattice::norm_sq(n) as f64);
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w
        })?;
        if real {
            out.symmetrize();
        }
        Ok(out)
    }

    fn side(&self) -> usize {
        2 * self.band + 1
    }

    pub fn index(&self, n: &[i64]) -> Option<usize> {
        if n.len() != self.dim {
            return None;
        }
        let b = self.band as i64;
        let mut i = 0usize;
        for &c in n {
            if c.abs() > b {
                return None;
            }
            i = i * self.side() + (c + b) as usize;
        }
        Some(i)
    }

    fn frequency_into(&self, mut i: usize, out: &mut [i64]) {
        let side = self.side();
        for d in (0..self.dim).rev() {
            out[d] = (i % side) as i64 - self.band as i64;
            i /= side;
        }
    }

    /// `f_n`, zero outside the band.
    pub fn get(&self, n: &[i64]) -> Complex64 {
        self.index(n).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Nonzero modes grouped by `|n|^2`, ascending; modes within a level are lexicographic.
    pub fn levels(&self) -> BTreeMap<i64, Vec<(Vec<i64>, Complex64)>> {
        let mut out: BTreeMap<i64, Vec<(Vec<i64>, Complex64)>> = BTreeMap::new();
        let mut n = vec![0i64; self.dim];
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                self.frequency_into(i, &mut n);
                out.entry(crate::lattice::norm_sq(&n)).or_default().push((n.clone(), c));
            }
        }
        out
    }

    /// `||f||^2 = integral |f|^2 = (2 pi)^N sum |f_n|^2`.
    pub fn norm_sq(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32) * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `(2 pi)^N sum_{|n|^2 < lambda} |f_n|^2`.
    pub fn partial_norm_sq(&self, lambda: f64) -> Result<f64> {
        let cap = open_ball_cap(lambda)?;
        Ok((2.0 * PI).powi(self.dim as i32)
            * self
                .levels()
                .range(..=cap)
                .flat_map(|(_, v)| v.iter().map(|(_, c)| c.norm_sqr()))
                .sum::<f64>())
    }

    /// Largest `|f_n - conj(f_{-n})|`; zero for a real function.
    pub fn hermitian_defect(&self) -> f64 {
        let mut n = vec![0i64; self.dim];
        let mut worst: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            self.frequency_into(i, &mut n);
            let neg: Vec<i64> = n.iter().map(|v| -v).collect();
            worst = worst.max((c - self.get(&neg).conj()).norm());
        }
        worst
    }

    /// Replaces `f_n` by `(f_n + conj(f_{-n})) / 2`.
    pub fn symmetrize(&mut self) {
        let len = self.coeffs.len();
        // lexicographic order maps n to -n by index reversal
        let sym: Vec<Complex64> = (0..len)
            .map(|i| (self.coeffs[i] + self.coeffs[len - 1 - i].conj()) * 0.5)
            .collect();
        self.coeffs = sym;
    }

    /// Largest `|n_i|` over nonzero modes with `|n|^2 <= cap`.
    fn effective_band(&self, cap: i64) -> usize {
        (self.band as i64).min(isqrt(cap.max(0))) as usize
    }
}

/// Values on the full grid `x_j = -pi + 2 pi j / G`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridField {
    pub dim: usize,
    pub grid: usize,
    pub values: Vec<Complex64>,
}

const FIELD_MAGIC: &[u8; 8] = b"SPHLGRD\0";
const FIELD_VERSION: u32 = 1;

impl GridField {
    /// `(2 pi / G)^N sum |v|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        (2.0 * PI / self.grid as f64).powi(self.dim as i32) * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},re,im", header.join(","))?;
        let mut x = vec![0.0; self.dim];
        for (i, v) in self.values.iter().enumerate() {
            node_coords(self.dim, self.grid, i, &mut x);
            let coords: Vec<String> = x.iter().map(|c| fmt_f64(*c)).collect();
            writeln!(w, "{},{},{}", coords.join(","), fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FIELD_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.grid as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<GridField> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != FIELD_VERSION {
            return Err(Error::Format("unsupported field version".into()));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let grid = u32::from_le_bytes(b4) as usize;
        let count = grid
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Format("field size overflows".into()))?;
        let mut values = Vec::with_capacity(count);
        let mut b8 = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            values.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        Ok(GridField { dim, grid, values })
    }
}

/// Flat indices of grid nodes with `|x| <= radius`.
pub fn ball_nodes(dim: usize, grid: usize, radius: f64) -> Vec<usize> {
    let mut x = vec![0.0; dim];
    (0..grid.pow(dim as u32))
        .filter(|&i| {
            node_coords(dim, grid, i, &mut x);
            x.iter().map(|v| v * v).sum::<f64>() <= radius * radius
        })
        .collect()
}

/// Adds modes `c e^{i n.x}` into values at a fixed point set.
///
/// Each point stores one row id per axis into a shared table of
/// `e^{i t x}`, `|t| <= band`, so grid nodes share rows.
pub struct ModeEvaluator {
    dim: usize,
    band: i64,
    table: Vec<Complex64>,
    ids: Vec<u32>,
}

impl ModeEvaluator {
    fn row(x: f64, band: i64, out: &mut Vec<Complex64>) {
        for t in -band..=band {
            out.push(Complex64::from_polar(1.0, t as f64 * x));
        }
    }

    pub fn at_points(dim: usize, band: usize, points: &[Vec<f64>]) -> Result<ModeEvaluator> {
        let b = band as i64;
        let mut table = Vec::new();
        let mut ids = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(invalid(format!("point {i} has dimension {}, expected {dim}", p.len())));
            }
            for &x in p {
                ids.push((table.len() / (2 * band + 1)) as u32);
                Self::row(x, b, &mut table);
            }
        }
        Ok(ModeEvaluator { dim, band: b, table, ids })
    }

    /// Grid nodes given by flat index.
    pub fn at_nodes(dim: usize, band: usize, grid: usize, nodes: &[usize]) -> ModeEvaluator {
        let b = band as i64;
        let mut table = Vec::with_capacity(grid * (2 * band + 1));
        for j in 0..grid {
            Self::row(node(grid, j), b, &mut table);
        }
        let mut idx = vec![0usize; dim];
        let mut ids = Vec::with_capacity(nodes.len() * dim);
        for &flat in nodes {
            unflatten(dim, grid, flat, &mut idx);
            ids.extend(idx.iter().map(|&j| j as u32));
        }
        ModeEvaluator { dim, band: b, table, ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `values[p] += c e^{i n.x_p}`. Requires `|n_i| <= band`.
    pub fn add_mode(&self, values: &mut [Complex64], n: &[i64], c: Complex64) {
        let width = (2 * self.band + 1) as usize;
        let cols: Vec<usize> = n.iter().map(|&t| (t + self.band) as usize).collect();
        for (v, ids) in values.iter_mut().zip(self.ids.chunks_exact(self.dim)) {
            let mut prod = c;
            for (&id, &col) in ids.iter().zip(&cols) {
                prod *= self.table[id as usize * width + col];
            }
            *v += prod;
        }
    }

    fn check_band(&self, f: &SpectrumFunction) -> Result<()> {
        if f.dim != self.dim || f.band as i64 > self.band {
            return Err(invalid("function does not fit the evaluator's dimension or band"));
        }
        Ok(())
    }
}

/// `S_lambda f` at arbitrary points.
pub fn partial_sum(f: &SpectrumFunction, lambda: f64, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let cap = open_ball_cap(lambda)?;
    let eval = ModeEvaluator::at_points(f.dim, f.band, points)?;
    eval.check_band(f)?;
    let mut out = vec![Complex64::new(0.0, 0.0); points.len()];
    for (_, modes) in f.levels().range(..=cap) {
        for (n, c) in modes {
            eval.add_mode(&mut out, n, *c);
        }
    }
    Ok(out)
}

fn check_grid(grid: usize, band: usize) -> Result<()> {
    if !grid.is_power_of_two() || grid < 2 * band + 2 {
        return Err(Error::Aliasing { grid, band });
    }
    Ok(())
}

fn synthesize(f: &SpectrumFunction, cap: i64, grid: usize, plan: &GridTransform) -> GridField {
    let mut data = vec![Complex64::new(0.0, 0.0); plan.len()];
    let mut n = vec![0i64; f.dim];
    for (i, &c) in f.coeffs.iter().enumerate() {
        f.frequency_into(i, &mut n);
        if c != Complex64::new(0.0, 0.0) && crate::lattice::norm_sq(&n) <= cap {
            let slot = n.iter().fold(0, |acc, &t| acc * grid + wrap_index(t, grid));
            data[slot] = c * phase_sign(&n);
        }
    }
    plan.inverse(&mut data);
    GridField {
        dim: f.dim,
        grid,
        values: data,
    }
}

/// `S_lambda f` on the full grid by inverse FFT.
pub fn partial_sum_grid(f: &SpectrumFunction, lambda: f64, grid: usize) -> Result<GridField> {
    let cap = open_ball_cap(lambda)?;
    check_grid(grid, f.effective_band(cap))?;
    Ok(synthesize(f, cap, grid, &GridTransform::new(f.dim, grid)))
}

/// `f` itself on the grid.
pub fn evaluate_grid(f: &SpectrumFunction, grid: usize) -> Result<GridField> {
    check_grid(grid, f.band)?;
    Ok(synthesize(f, i64::MAX, grid, &GridTransform::new(f.dim, grid)))
}

/// `sup_{lambda in levels} |S_lambda f|` on the grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximalField {
    pub dim: usize,
    pub grid: usize,
    pub lambda_max: f64,
    /// Levels actually evaluated, ascending.
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

/// Maximal field over the given levels, each partial sum synthesized from scratch.
pub fn maximal_field_over(f: &SpectrumFunction, levels: &[f64], grid: usize) -> Result<MaximalField> {
    let mut levels = levels.to_vec();
    if levels.is_empty() {
        return Err(invalid("at least one level is required"));
    }
    levels.sort_by(f64::total_cmp);
    let top = open_ball_cap(*levels.last().unwrap())?;
    check_grid(grid, f.effective_band(top))?;
    let plan = GridTransform::new(f.dim, grid);
    let mut values = vec![0.0f64; plan.len()];
    for &lambda in &levels {
        let s = synthesize(f, open_ball_cap(lambda)?, grid, &plan);
        for (m, v) in values.iter_mut().zip(&s.values) {
            *m = (*m).max(v.norm());
        }
    }
    Ok(MaximalField {
        dim: f.dim,
        grid,
        lambda_max: *levels.last().unwrap(),
        levels,
        values,
    })
}

/// `sup_{0 < lambda <= lambda_max} |S_lambda f|` on the grid.
///
/// `S_lambda f` only changes when `lambda` passes `|n|^2 + 1` for a mode in
/// the support, so only those levels are evaluated.
pub fn maximal_field(f: &SpectrumFunction, lambda_max: f64, grid: usize) -> Result<MaximalField> {
    let cap = open_ball_cap(lambda_max)?;
    let levels: Vec<f64> = f.levels().range(..=cap).map(|(&s, _)| (s + 1) as f64).collect();
    if levels.is_empty() {
        check_grid(grid, 0)?;
        return Ok(MaximalField {
            dim: f.dim,
            grid,
            lambda_max,
            levels,
            values: vec![0.0; grid.pow(f.dim as u32)],
        });
    }
    let mut out = maximal_field_over(f, &levels, grid)?;
    out.lambda_max = lambda_max;
    Ok(out)
}

/// Largest `|f|` over grid nodes with `|x| < radius`, on the smallest
/// power-of-two grid at least twice the alias-free size.
pub fn vanishing_residual(f: &SpectrumFunction, radius: f64) -> Result<f64> {
    let grid = (2 * f.band + 2).next_power_of_two().max(32) * 2;
    let field = evaluate_grid(f, grid)?;
    let mut x = vec![0.0; f.dim];
    let mut worst: f64 = 0.0;
    for (i, v) in field.values.iter().enumerate() {
        node_coords(f.dim, grid, i, &mut x);
        if x.iter().map(|c| c * c).sum::<f64>() < radius * radius {
            worst = worst.max(v.norm());
        }
    }
    Ok(worst)
}

pub fn check_vanishing(f: &SpectrumFunction, radius: f64, tol: f64) -> Result<f64> {
    let residual = vanishing_residual(f, radius)?;
    if residual > tol {
        return Err(Error::NotVanishing { radius, residual });
    }
    Ok(residual)
}

pub const DEFAULT_VANISHING_TOL: f64 = 1e-6;

/// Sum `sum_n m_n f_n e^{i n.x}` at the points for a per-frequency multiplier.
fn multiplier_field<M>(f: &SpectrumFunction, eval: &ModeEvaluator, mut mult: M) -> Result<Vec<Complex64>>
where
    M: FnMut(&LatticePoint) -> Result<f64>,
{
    let mut out = vec![Complex64::new(0.0, 0.0); eval.len()];
    for (_, modes) in f.levels() {
        for (n, c) in modes {
            let w = mult(&LatticePoint::new(n.clone()))?;
            if w != 0.0 {
                eval.add_mode(&mut out, &n, c * w);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvolutionReport {
    pub lambda: f64,
    pub points: usize,
    pub vanishing_residual: f64,
    /// `max_x |(theta_lambda * f)(x) - S_lambda f(x)|`.
    pub max_abs_residual: f64,
    pub max_partial_sum: f64,
}

/// Compares `theta_lambda * f`, evaluated through the multiplier
/// `(2 pi)^N (theta_lambda)_n`, with `S_lambda f` at points of the inner ball.
pub fn convolution_form_check(
    f: &SpectrumFunction,
    psi: &PsiCoefficients,
    lambda: f64,
    points: &[Vec<f64>],
    vanishing_tol: f64,
) -> Result<ConvolutionReport> {
    let r = psi.spec.inner_radius;
    for (i, p) in points.iter().enumerate() {
        if p.iter().map(|c| c * c).sum::<f64>() > r * r {
            return Err(Error::PointOutsideBall { index: i, radius: r });
        }
    }
    if f.dim != psi.dim() {
        return Err(invalid("function and cutoff dimensions differ"));
    }
    let vanishing = check_vanishing(f, psi.spec.outer_radius, vanishing_tol)?;
    let k = open_ball_cap(lambda)? as u64 + 1;
    let scale = (2.0 * PI).powi(f.dim as i32);
    let eval = ModeEvaluator::at_points(f.dim, f.band, points)?;
    let conv = multiplier_field(f, &eval, |n| Ok(scale * theta_coefficient(psi, k, n, DEFAULT_TRUNCATION_TOL)?))?;
    let direct = partial_sum(f, lambda, points)?;
    let max_abs_residual = conv.iter().zip(&direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(ConvolutionReport {
        lambda,
        points: points.len(),
        vanishing_residual: vanishing,
        max_abs_residual,
        max_partial_sum: direct.iter().map(|v| v.norm()).fold(0.0, f64::max),
    })
}

/// `theta_j * f` for `j = 0..=q` and `Theta_j * f` for `j < q` at the points,
/// each through its own coefficient sums.
pub type KernelFields = (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>);

pub fn kernel_fields(f: &SpectrumFunction, psi: &PsiCoefficients, q: u64, points: &[Vec<f64>]) -> Result<KernelFields> {
    let scale = (2.0 * PI).powi(f.dim as i32);
    let eval = ModeEvaluator::at_points(f.dim, f.band, points)?;
    let mut small = Vec::with_capacity(q as usize + 1);
    for j in 0..=q {
        small.push(multiplier_field(f, &eval, |n| {
            Ok(scale * theta_coefficient(psi, j, n, DEFAULT_TRUNCATION_TOL)?)
        })?);
    }
    let mut big = Vec::with_capacity(q as usize);
    for j in 0..q {
        big.push(multiplier_field(f, &eval, |n| {
            Ok(scale * big_theta_coefficient(psi, j, n, DEFAULT_TRUNCATION_TOL)?)
        })?);
    }
    Ok((small, big))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub q: usize,
    pub points: usize,
    pub max_abs_residual: f64,
    /// Residual over `|F_q|^2 + sum_j (|G_j|^2 + 2 |G_j| |F_j|)` at the worst point.
    pub max_relative_residual: f64,
}

/// Checks `F_q^2 = sum_{j<q} (G_j^2 + 2 G_j F_j)` pointwise, where `F_j` are
/// the `theta_j * f` fields (`F_0 = 0`) and `G_j` the `Theta_j * f` fields.
pub fn telescoping_check(theta_fields: &[Vec<Complex64>], big_theta_fields: &[Vec<Complex64>]) -> Result<TelescopingReport> {
    let q = big_theta_fields.len();
    if theta_fields.len() != q + 1 {
        return Err(invalid(format!(
            "need q + 1 = {} theta fields, got {}",
            q + 1,
            theta_fields.len()
        )));
    }
    let points = theta_fields[0].len();
    if theta_fields.iter().chain(big_theta_fields).any(|v| v.len() != points) {
        return Err(invalid("fields have different lengths"));
    }
    if theta_fields[0].iter().any(|v| v.norm() != 0.0) {
        return Err(invalid("theta_0 * f must vanish"));
    }
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for x in 0..points {
        let fq = theta_fields[q][x];
        let mut sum = Complex64::new(0.0, 0.0);
        let mut scale = fq.norm_sqr();
        for j in 0..q {
            let (g, fj) = (big_theta_fields[j][x], theta_fields[j][x]);
            sum += g * g + g * fj * 2.0;
            scale += g.norm_sqr() + 2.0 * g.norm() * fj.norm();
        }
        let res = (fq * fq - sum).norm();
        max_abs = max_abs.max(res);
        if scale > 0.0 {
            max_rel = max_rel.max(res / scale);
        }
    }
    Ok(TelescopingReport {
        q,
        points,
        max_abs_residual: max_abs,
        max_relative_residual: max_rel,
    })
}
