//! Fourier coefficients of the localized Dirichlet kernels.
//!
//! With `theta(x, k) = (2 pi)^-N sum_{|m|^2 < k} e^{i m.x}` and
//! `theta_k = theta(., k) psi`, the coefficients are ball and shell sums of the
//! cutoff table:
//!
//! ```text
//! (theta_k)_n = (2 pi)^-N sum_{|n - m|^2 < k} psi_m
//! (Theta_j)_n = (theta_{j+1})_n - (theta_j)_n = (2 pi)^-N sum_{|n - m|^2 = j} psi_m
//! ```
//!
//! Both are real because `psi` is real and even. Points `m` outside the
//! cutoff table are charged the table's edge envelope as a truncation
//! estimate; a coefficient whose estimate exceeds the tolerance is refused.
//!
//! The summability checks walk every shell around a fixed `n` once, in order
//! of increasing radius, producing `(Theta_j)_n`, the running ball sum
//! `(theta_j)_n` and the shell summaries needed for the grouping `Q_q^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::cutoff::PsiCoefficients;
use crate::error::{invalid, Error, Result};
use crate::lattice::{
    enumerate_ball, for_each_ball_offset, for_each_sphere_offset, GroupingTable, LatticePoint,
    ShellSummary,
};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-9;

fn norm_factor(dim: usize) -> f64 {
    (2.0 * PI).powi(-(dim as i32))
}

/// Running sum of `psi_m` over a set of `m`, with truncation accounting.
#[derive(Clone, Copy, Debug, Default)]
struct PsiSum {
    sum: f64,
    missing: usize,
}

impl PsiSum {
    #[inline]
    fn add(&mut self, psi: &PsiCoefficients, m: &[i64]) {
        match psi.real(m) {
            Some(v) => self.sum += v,
            None => self.missing += 1,
        }
    }
}

struct Truncation<'a> {
    psi: &'a PsiCoefficients,
    edge: std::cell::OnceCell<f64>,
    tol: f64,
}

impl<'a> Truncation<'a> {
    fn new(psi: &'a PsiCoefficients, tol: f64) -> Self {
        Truncation {
            psi,
            edge: std::cell::OnceCell::new(),
            tol,
        }
    }

    /// Estimated error of a raw psi-sum, in coefficient units.
    fn estimate(&self, s: &PsiSum, dim: usize) -> f64 {
        if s.missing == 0 {
            return 0.0;
        }
        let edge = *self.edge.get_or_init(|| self.psi.edge_envelope());
        s.missing as f64 * edge * norm_factor(dim)
    }

    fn check(&self, s: &PsiSum, dim: usize) -> Result<f64> {
        let e = self.estimate(s, dim);
        if e > self.tol {
            Err(Error::TruncationExceeded {
                estimate: e,
                tolerance: self.tol,
            })
        } else {
            Ok(e)
        }
    }
}

fn check_point(psi: &PsiCoefficients, n: &LatticePoint) -> Result<()> {
    if n.dim() != psi.dim() {
        return Err(invalid(format!(
            "frequency {n} does not match cutoff dimension {}",
            psi.dim()
        )));
    }
    Ok(())
}

/// `(theta_k)_n` by direct ball summation.
pub fn theta_coefficient(psi: &PsiCoefficients, k: u64, n: &LatticePoint, tol: f64) -> Result<f64> {
    check_point(psi, n)?;
    let trunc = Truncation::new(psi, tol);
    let mut s = PsiSum::default();
    let mut m = vec![0i64; n.dim()];
    for_each_ball_offset(n.dim(), k as i64 - 1, |t| {
        for (d, c) in m.iter_mut().enumerate() {
            *c = n.coords()[d] + t[d];
        }
        s.add(psi, &m);
    });
    trunc.check(&s, n.dim())?;
    Ok(s.sum * norm_factor(n.dim()))
}

/// `(Theta_j)_n` by shell summation; exactly zero for an empty shell.
pub fn big_theta_coefficient(psi: &PsiCoefficients, j: u64, n: &LatticePoint, tol: f64) -> Result<f64> {
    check_point(psi, n)?;
    let trunc = Truncation::new(psi, tol);
    let mut s = PsiSum::default();
    let mut m = vec![0i64; n.dim()];
    for_each_sphere_offset(n.dim(), j as i64, |t| {
        for (d, c) in m.iter_mut().enumerate() {
            *c = n.coords()[d] + t[d];
        }
        s.add(psi, &m);
    });
    trunc.check(&s, n.dim())?;
    Ok(s.sum * norm_factor(n.dim()))
}

/// Coefficients at one level for every frequency of a table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelTable {
    pub level: u64,
    /// Parallel to [`KernelTable::frequencies`].
    pub values: Vec<f64>,
    pub max_truncation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelTable {
    pub dim: usize,
    pub n_max: i64,
    pub psi_grid: usize,
    pub psi_max_index: usize,
    pub truncation_tol: f64,
    /// All `n` with `|n| <= n_max`, lexicographic.
    pub frequencies: Vec<LatticePoint>,
    pub theta: BTreeMap<u64, LevelTable>,
    pub big_theta: BTreeMap<u64, LevelTable>,
}

fn level_table<F>(psi: &PsiCoefficients, freqs: &[LatticePoint], level: u64, tol: f64, visit: F) -> Result<LevelTable>
where
    F: Fn(usize, &mut dyn FnMut(&[i64])) + Sync,
{
    let dim = psi.dim();
    let offsets = {
        let mut v = Vec::new();
        visit(dim, &mut |t: &[i64]| v.extend_from_slice(t));
        v
    };
    let results: Vec<Result<(f64, f64)>> = freqs
        .par_iter()
        .map_init(
            || (vec![0i64; dim], Truncation::new(psi, tol)),
            |(m, trunc), n| {
                let mut s = PsiSum::default();
                for t in offsets.chunks_exact(dim) {
                    for d in 0..dim {
                        m[d] = n.coords()[d] + t[d];
                    }
                    s.add(psi, m);
                }
                let e = trunc.check(&s, dim)?;
                Ok((s.sum * norm_factor(dim), e))
            },
        )
        .collect();
    let mut values = Vec::with_capacity(freqs.len());
    let mut max_truncation: f64 = 0.0;
    for r in results {
        let (v, e) = r?;
        values.push(v);
        max_truncation = max_truncation.max(e);
    }
    Ok(LevelTable {
        level,
        values,
        max_truncation,
    })
}

impl KernelTable {
    pub fn new(psi: &PsiCoefficients, n_max: i64, truncation_tol: f64) -> Result<KernelTable> {
        if n_max < 0 {
            return Err(invalid("n_max must be nonnegative"));
        }
        let frequencies = enumerate_ball(psi.dim(), (n_max * n_max) as f64 + 0.5)?;
        Ok(KernelTable {
            dim: psi.dim(),
            n_max,
            psi_grid: psi.grid,
            psi_max_index: psi.max_index,
            truncation_tol,
            frequencies,
            theta: BTreeMap::new(),
            big_theta: BTreeMap::new(),
        })
    }

    pub fn add_theta_level(&mut self, psi: &PsiCoefficients, k: u64) -> Result<()> {
        let t = theta_coefficients_for(psi, &self.frequencies, k, self.truncation_tol)?;
        self.theta.insert(k, t);
        Ok(())
    }

    pub fn add_big_theta_level(&mut self, psi: &PsiCoefficients, j: u64) -> Result<()> {
        let t = big_theta_coefficients_for(psi, &self.frequencies, j, self.truncation_tol)?;
        self.big_theta.insert(j, t);
        Ok(())
    }

    pub fn index_of(&self, n: &LatticePoint) -> Option<usize> {
        self.frequencies.binary_search(n).ok()
    }

    pub fn theta(&self, k: u64, n: &LatticePoint) -> Option<f64> {
        Some(self.theta.get(&k)?.values[self.index_of(n)?])
    }

    pub fn big_theta(&self, j: u64, n: &LatticePoint) -> Option<f64> {
        Some(self.big_theta.get(&j)?.values[self.index_of(n)?])
    }
}

fn theta_coefficients_for(psi: &PsiCoefficients, freqs: &[LatticePoint], k: u64, tol: f64) -> Result<LevelTable> {
    level_table(psi, freqs, k, tol, |dim, f| for_each_ball_offset(dim, k as i64 - 1, f))
}

fn big_theta_coefficients_for(psi: &PsiCoefficients, freqs: &[LatticePoint], j: u64, tol: f64) -> Result<LevelTable> {
    level_table(psi, freqs, j, tol, |dim, f| for_each_sphere_offset(dim, j as i64, f))
}

/// `(theta_k)_n` for every `|n| <= n_max`.
pub fn theta_coefficients(psi: &PsiCoefficients, k: u64, n_max: i64) -> Result<KernelTable> {
    let mut t = KernelTable::new(psi, n_max, DEFAULT_TRUNCATION_TOL)?;
    t.add_theta_level(psi, k)?;
    Ok(t)
}

/// `(Theta_j)_n` for every `|n| <= n_max`.
pub fn big_theta_coefficients(psi: &PsiCoefficients, j: u64, n_max: i64) -> Result<KernelTable> {
    let mut t = KernelTable::new(psi, n_max, DEFAULT_TRUNCATION_TOL)?;
    t.add_big_theta_level(psi, j)?;
    Ok(t)
}

/// `max |(Theta_j)_n - ((theta_{j+1})_n - (theta_j)_n)|` over `j <= j_max`,
/// `|n| <= n_max`, with every coefficient summed independently.
pub fn max_definition_residual(psi: &PsiCoefficients, j_max: u64, n_max: i64) -> Result<f64> {
    let mut t = KernelTable::new(psi, n_max, DEFAULT_TRUNCATION_TOL)?;
    for j in 0..=j_max + 1 {
        t.add_theta_level(psi, j)?;
    }
    let mut worst: f64 = 0.0;
    for j in 0..=j_max {
        let shell = big_theta_coefficients_for(psi, &t.frequencies, j, t.truncation_tol)?;
        let lo = &t.theta[&j].values;
        let hi = &t.theta[&(j + 1)].values;
        for ((s, a), b) in shell.values.iter().zip(lo).zip(hi) {
            worst = worst.max((s - (b - a)).abs());
        }
    }
    Ok(worst)
}

/// `Q_q^k` for `n = 0`: `Q_q = {q}`, plus `2k` in `Q_0`.
pub fn origin_grouping(k: u32) -> Vec<Vec<u32>> {
    (0..2 * k)
        .map(|q| if q == 0 { vec![0, 2 * k] } else { vec![q] })
        .collect()
}

/// Per-level sums at one frequency `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub n: LatticePoint,
    /// Orbit size of `n` under signed coordinate permutations.
    pub multiplicity: usize,
    /// `block[k] = sum_{k^2 <= j < (k+1)^2} |(Theta_j)_n|^2`.
    pub shell_blocks: Vec<f64>,
    /// `sum_q (q+1)^2 sum_{p in Q_q^k} |(Theta_{k^2+p})_n|^2`, indexed by `k`.
    pub grouped_big_theta: Vec<f64>,
    /// `sum_q (q+1) sum_{p in Q_q^k} |(Theta_{k^2+p})_n|`, indexed by `k`.
    pub grouped_big_theta_linear: Vec<f64>,
    /// `sum_q (q+1)^-2 sum_{p in Q_q^k} |(theta_{k^2+p})_n|^2`, indexed by `k`.
    pub grouped_theta: Vec<f64>,
    pub max_truncation: f64,
    pub partition_violations: usize,
    pub cardinality_violations: usize,
}

/// Walks every shell `|m - n|^2 = j` for `j < max((grouped_levels + 1)^2, block_levels^2)`.
///
/// `block_levels` blocks feed the shell-block sums; levels `k = 0..=grouped_levels`
/// feed the grouped sums. For `n = 0` the grouping is [`origin_grouping`].
pub fn frequency_profile(
    psi: &PsiCoefficients,
    n: &LatticePoint,
    multiplicity: usize,
    block_levels: u32,
    grouped_levels: u32,
    tol: f64,
) -> Result<FrequencyProfile> {
    check_point(psi, n)?;
    let dim = n.dim();
    let scale = norm_factor(dim);
    let trunc = Truncation::new(psi, tol);
    let k_top = block_levels.max(grouped_levels + 1);
    let at_origin = n.is_origin();

    let mut profile = FrequencyProfile {
        n: n.clone(),
        multiplicity,
        shell_blocks: vec![0.0; block_levels as usize],
        grouped_big_theta: vec![0.0; grouped_levels as usize + 1],
        grouped_big_theta_linear: vec![0.0; grouped_levels as usize + 1],
        grouped_theta: vec![0.0; grouped_levels as usize + 1],
        max_truncation: 0.0,
        partition_violations: 0,
        cardinality_violations: 0,
    };

    let mut ball = PsiSum::default();
    let mut m = vec![0i64; dim];
    for k in 0..k_top {
        let lo = (k as i64) * (k as i64);
        let width = 2 * k as usize + 1;
        let mut big = Vec::with_capacity(width);
        let mut small = Vec::with_capacity(width);
        let mut summaries = Vec::with_capacity(width);
        for p in 0..width as i64 {
            // theta_j is the ball sum strictly inside shell j
            small.push(ball.sum * scale);
            let mut shell = PsiSum::default();
            let mut summary: Option<ShellSummary> = None;
            let grouped = k <= grouped_levels && !at_origin;
            for_each_sphere_offset(dim, lo + p, |t| {
                for d in 0..dim {
                    m[d] = n.coords()[d] + t[d];
                }
                shell.add(psi, &m);
                if grouped {
                    ShellSummary::absorb(&mut summary, &m, n.coords());
                }
            });
            profile.max_truncation = profile.max_truncation.max(trunc.check(&shell, dim)?);
            ball.sum += shell.sum;
            ball.missing += shell.missing;
            profile.max_truncation = profile.max_truncation.max(trunc.check(&ball, dim)?);
            big.push(shell.sum * scale);
            summaries.push(summary);
        }
        if (k as usize) < profile.shell_blocks.len() {
            profile.shell_blocks[k as usize] = big.iter().map(|v| v * v).sum();
        }
        if k >= 1 && k <= grouped_levels {
            let groups = if at_origin {
                origin_grouping(k)
            } else {
                let table = GroupingTable::from_summaries(dim, k, n, summaries)?;
                if !table.is_partition() {
                    profile.partition_violations += 1;
                }
                table.groups
            };
            let ku = k as usize;
            for (q, group) in groups.iter().enumerate() {
                let w = (q + 1) as f64;
                if group.len() * group.len() >= 16 * (q + 1) {
                    profile.cardinality_violations += 1;
                }
                for &p in group {
                    let (b, s) = (big[p as usize], small[p as usize]);
                    profile.grouped_big_theta[ku] += w * w * b * b;
                    profile.grouped_big_theta_linear[ku] += w * b.abs();
                    profile.grouped_theta[ku] += s * s / (w * w);
                }
            }
        }
    }
    Ok(profile)
}

/// Profiles for all orbit representatives, in order.
pub fn frequency_profiles(
    psi: &PsiCoefficients,
    centers: &[(LatticePoint, usize)],
    block_levels: u32,
    grouped_levels: u32,
    tol: f64,
) -> Result<Vec<FrequencyProfile>> {
    centers
        .par_iter()
        .map(|(n, mult)| frequency_profile(psi, n, *mult, block_levels, grouped_levels, tol))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaMaximum {
    pub label: String,
    /// Weight exponent `l`, when the quantity has one.
    pub exponent: Option<u32>,
    /// Level `k` the maximum is taken at, when per-level.
    pub level: Option<u64>,
    pub value: f64,
    pub argmax: LatticePoint,
    pub argmax_level: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub parameters: BTreeMap<String, f64>,
    pub maxima: Vec<LemmaMaximum>,
    /// Largest of the uniform-in-`n` totals (or of the weighted maxima).
    pub bound_estimate: f64,
    /// Uniform total at the full level range over the total at half the range.
    pub growth_ratio: Option<f64>,
    /// Largest `|n|` among the maxima sits in the outermost unit shell of the frequency range.
    pub argmax_on_boundary: bool,
    /// Per-frequency totals at the full level range, `(n, total)`.
    pub per_frequency: Vec<(LatticePoint, f64)>,
    /// Total at `n = 0`, kept apart where the grouping is undefined there.
    pub origin_total: Option<f64>,
    pub violations: usize,
}

fn bad(v: f64) -> bool {
    !v.is_finite() || v < 0.0
}

/// Empirical `C_l = max |(theta_k)_n| (1 + ||n| - sqrt(k)|)^l` over the table.
pub fn verify_lemma1(table: &KernelTable, l_values: &[u32], k_values: &[u64]) -> LemmaReport {
    let mut maxima = Vec::new();
    let mut violations = 0;
    let mut on_boundary = false;
    let edge = table.n_max as f64 - 1.0;
    for &l in l_values {
        let mut best = LemmaMaximum {
            label: format!("C_{l}"),
            exponent: Some(l),
            level: None,
            value: 0.0,
            argmax: LatticePoint::origin(table.dim),
            argmax_level: None,
        };
        for &k in k_values {
            let Some(level) = table.theta.get(&k) else {
                violations += 1;
                continue;
            };
            let root = (k as f64).sqrt();
            for (n, v) in table.frequencies.iter().zip(&level.values) {
                if !v.is_finite() {
                    violations += 1;
                    continue;
                }
                let w = v.abs() * (1.0 + (n.norm() - root).abs()).powi(l as i32);
                if w > best.value {
                    best.value = w;
                    best.argmax = n.clone();
                    best.argmax_level = Some(k);
                }
            }
        }
        on_boundary |= best.argmax.norm() > edge && best.value > 0.0;
        maxima.push(best);
    }
    let bound_estimate = maxima.iter().map(|m| m.value).fold(0.0, f64::max);
    let mut parameters = BTreeMap::new();
    parameters.insert("n_max".into(), table.n_max as f64);
    parameters.insert("k_max".into(), k_values.iter().copied().max().unwrap_or(0) as f64);
    LemmaReport {
        lemma_id: "lemma1".into(),
        parameters,
        maxima,
        bound_estimate,
        growth_ratio: None,
        argmax_on_boundary: on_boundary,
        per_frequency: Vec::new(),
        origin_total: None,
        violations,
    }
}

fn n_max_of(profiles: &[FrequencyProfile]) -> f64 {
    profiles.iter().map(|p| p.n.norm()).fold(0.0, f64::max)
}

fn max_over<F: Fn(&FrequencyProfile) -> f64>(profiles: &[FrequencyProfile], f: F) -> (f64, LatticePoint) {
    let mut best = (0.0, profiles[0].n.clone());
    for p in profiles {
        let v = f(p);
        if v > best.0 {
            best = (v, p.n.clone());
        }
    }
    best
}

fn check_profiles(profiles: &[FrequencyProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(invalid("no frequency profiles supplied"));
    }
    Ok(())
}

/// Shell-block sums weighted by `(1 + ||n| - k|)^l` and the total
/// `sum_{j < levels^2} |(Theta_j)_n|^2`, uniformly in `n`.
pub fn verify_lemma2(profiles: &[FrequencyProfile], l_values: &[u32], levels: u32) -> Result<LemmaReport> {
    check_profiles(profiles)?;
    let levels = levels as usize;
    if profiles.iter().any(|p| p.shell_blocks.len() < levels) {
        return Err(invalid("profiles do not cover the requested shell blocks"));
    }
    let mut violations = 0;
    for p in profiles {
        violations += p.shell_blocks[..levels].iter().filter(|&&v| bad(v)).count();
    }
    let mut maxima = Vec::new();
    for &l in l_values {
        for k in 0..levels {
            let (value, argmax) = max_over(profiles, |p| {
                p.shell_blocks[k] * (1.0 + (p.n.norm() - k as f64).abs()).powi(l as i32)
            });
            maxima.push(LemmaMaximum {
                label: format!("block_l{l}"),
                exponent: Some(l),
                level: Some(k as u64),
                value,
                argmax,
                argmax_level: Some(k as u64),
            });
        }
    }
    let total = |p: &FrequencyProfile, upto: usize| p.shell_blocks[..upto].iter().sum::<f64>();
    let (full, argmax) = max_over(profiles, |p| total(p, levels));
    let (half, _) = max_over(profiles, |p| total(p, levels / 2));
    maxima.push(LemmaMaximum {
        label: "total".into(),
        exponent: None,
        level: None,
        value: full,
        argmax: argmax.clone(),
        argmax_level: None,
    });
    let mut parameters = BTreeMap::new();
    parameters.insert("levels".into(), levels as f64);
    parameters.insert("j_limit".into(), (levels * levels) as f64);
    parameters.insert("n_max".into(), n_max_of(profiles));
    Ok(LemmaReport {
        lemma_id: "lemma2".into(),
        parameters,
        maxima,
        bound_estimate: full,
        growth_ratio: (half > 0.0).then(|| full / half),
        argmax_on_boundary: argmax.norm() > n_max_of(profiles) - 1.0,
        per_frequency: profiles.iter().map(|p| (p.n.clone(), total(p, levels))).collect(),
        origin_total: None,
        violations,
    })
}

type LevelAccessor<'a> = &'a dyn Fn(&FrequencyProfile) -> &[f64];

fn grouped_report(
    lemma_id: &str,
    profiles: &[FrequencyProfile],
    levels: u32,
    per_level: impl Fn(&FrequencyProfile) -> &[f64],
    extra: Option<(&str, LevelAccessor<'_>)>,
    count_cardinality: bool,
) -> Result<LemmaReport> {
    check_profiles(profiles)?;
    let top = levels as usize;
    if profiles.iter().any(|p| per_level(p).len() <= top) {
        return Err(invalid("profiles do not cover the requested levels"));
    }
    let (origin, rest): (Vec<&FrequencyProfile>, Vec<&FrequencyProfile>) =
        profiles.iter().partition(|p| p.n.is_origin());
    if rest.is_empty() {
        return Err(invalid("at least one nonzero frequency is required"));
    }
    let rest: Vec<FrequencyProfile> = rest.into_iter().cloned().collect();
    let mut violations = 0;
    for p in &rest {
        violations += per_level(p)[..=top].iter().filter(|&&v| bad(v)).count();
        violations += p.partition_violations;
        if count_cardinality {
            violations += p.cardinality_violations;
        }
    }
    let mut maxima = Vec::new();
    for k in 1..=top {
        let (value, argmax) = max_over(&rest, |p| per_level(p)[k]);
        maxima.push(LemmaMaximum {
            label: "per_level".into(),
            exponent: None,
            level: Some(k as u64),
            value,
            argmax,
            argmax_level: Some(k as u64),
        });
    }
    if let Some((label, f)) = extra {
        for k in 1..=top {
            let (value, argmax) = max_over(&rest, |p| f(p)[k]);
            maxima.push(LemmaMaximum {
                label: label.into(),
                exponent: None,
                level: Some(k as u64),
                value,
                argmax,
                argmax_level: Some(k as u64),
            });
        }
    }
    let total = |p: &FrequencyProfile, upto: usize| per_level(p)[..=upto].iter().sum::<f64>();
    let (full, argmax) = max_over(&rest, |p| total(p, top));
    let (half, _) = max_over(&rest, |p| total(p, top / 2));
    maxima.push(LemmaMaximum {
        label: "total".into(),
        exponent: None,
        level: None,
        value: full,
        argmax: argmax.clone(),
        argmax_level: None,
    });
    let mut parameters = BTreeMap::new();
    parameters.insert("k_max".into(), top as f64);
    parameters.insert("n_max".into(), n_max_of(profiles));
    Ok(LemmaReport {
        lemma_id: lemma_id.into(),
        parameters,
        maxima,
        bound_estimate: full,
        growth_ratio: (half > 0.0).then(|| full / half),
        argmax_on_boundary: argmax.norm() > n_max_of(profiles) - 1.0,
        per_frequency: rest.iter().map(|p| (p.n.clone(), total(p, top))).collect(),
        origin_total: origin.first().map(|p| total(p, top)),
        violations,
    })
}

/// `(q+1)^2`-weighted grouped shell sums per level, and their total over
/// `k <= levels`, uniformly in `n != 0`. The `(q+1)`-weighted first-power sums
/// are reported alongside as `linear`.
pub fn verify_lemma4(profiles: &[FrequencyProfile], levels: u32) -> Result<LemmaReport> {
    grouped_report(
        "lemma4",
        profiles,
        levels,
        |p| &p.grouped_big_theta,
        Some(("linear", &|p: &FrequencyProfile| &p.grouped_big_theta_linear[..])),
        false,
    )
}

/// `(q+1)^-2`-weighted grouped ball sums, totalled over `k <= levels`.
pub fn verify_lemma5(profiles: &[FrequencyProfile], levels: u32) -> Result<LemmaReport> {
    grouped_report("lemma5", profiles, levels, |p| &p.grouped_theta, None, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::{make_cutoff, psi_coefficients, Profile};

    fn psi(grid: usize, max_index: usize) -> PsiCoefficients {
        psi_coefficients(&make_cutoff(1.0, 0.5, 2, Profile::BumpQuotient).unwrap(), grid, max_index).unwrap()
    }

    fn p(v: &[i64]) -> LatticePoint {
        LatticePoint::new(v.to_vec())
    }

    #[test]
    fn trivial_levels() {
        let t = psi(128, 32);
        let scale = (2.0 * PI).powi(-2);
        for n in [p(&[0, 0]), p(&[3, -1]), p(&[7, 7])] {
            assert_eq!(theta_coefficient(&t, 0, &n, 1e-9).unwrap(), 0.0);
            let one = theta_coefficient(&t, 1, &n, 1e-9).unwrap();
            assert_eq!(one, scale * t.real(n.coords()).unwrap());
        }
        let shell1 = big_theta_coefficient(&t, 1, &p(&[0, 0]), 1e-9).unwrap();
        let direct = scale * [[1, 0], [-1, 0], [0, 1], [0, -1]].iter().map(|m| t.real(m).unwrap()).sum::<f64>();
        assert!((shell1 - direct).abs() < 1e-18);
    }

    #[test]
    fn empty_shells_are_exact_zeros() {
        let t = psi(128, 32);
        let table = big_theta_coefficients(&t, 3, 10).unwrap();
        assert!(table.big_theta[&3].values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn truncation_is_refused() {
        let t = psi(64, 8);
        let err = theta_coefficient(&t, 50, &p(&[6, 0]), 1e-9).unwrap_err();
        assert!(matches!(err, Error::TruncationExceeded { .. }));
    }

    #[test]
    fn definition_consistency() {
        let t = psi(256, 48);
        let r = max_definition_residual(&t, 60, 12).unwrap();
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn symmetric_under_signed_permutations() {
        let t = psi(256, 48);
        let table = theta_coefficients(&t, 40, 10).unwrap();
        for n in &table.frequencies {
            let v = table.theta(40, n).unwrap();
            let c = n.coords();
            for image in [p(&[-c[0], -c[1]]), p(&[c[1], c[0]]), p(&[-c[1], c[0]])] {
                assert!((table.theta(40, &image).unwrap() - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn origin_grouping_covers_all_parameters() {
        for k in 1..6 {
            let g = origin_grouping(k);
            let mut all: Vec<u32> = g.iter().flatten().copied().collect();
            all.sort();
            assert_eq!(all, (0..=2 * k).collect::<Vec<_>>());
            for (q, grp) in g.iter().enumerate() {
                assert!(grp.len() * grp.len() < 16 * (q + 1));
            }
        }
    }

    #[test]
    fn profile_matches_direct_coefficients() {
        let t = psi(256, 48);
        let n = p(&[4, 1]);
        let prof = frequency_profile(&t, &n, 1, 6, 5, 1e-9).unwrap();
        // shell block k = 3 from direct shell sums
        let block: f64 = (9..16)
            .map(|j| big_theta_coefficient(&t, j, &n, 1e-9).unwrap().powi(2))
            .sum();
        assert!((prof.shell_blocks[3] - block).abs() < 1e-15);
        // grouped theta at k = 2 from direct ball sums and the lattice grouping
        let g = crate::lattice::build_grouping(2, 2, &n).unwrap();
        let mut want = 0.0;
        for (q, grp) in g.groups.iter().enumerate() {
            for &pp in grp {
                let th = theta_coefficient(&t, 4 + pp as u64, &n, 1e-9).unwrap();
                want += th * th / ((q + 1) * (q + 1)) as f64;
            }
        }
        assert!((prof.grouped_theta[2] - want).abs() < 1e-14);
        assert_eq!(prof.grouped_theta[0], 0.0);
    }

    #[test]
    fn lemma_reports_are_clean() {
        let t = psi(256, 48);
        let centers = crate::lattice::orbit_representatives(2, 10);
        let profiles = frequency_profiles(&t, &centers, 12, 8, 1e-9).unwrap();
        let l2 = verify_lemma2(&profiles, &[0, 4], 12).unwrap();
        let l4 = verify_lemma4(&profiles, 8).unwrap();
        let l5 = verify_lemma5(&profiles, 8).unwrap();
        for r in [&l2, &l4, &l5] {
            assert_eq!(r.violations, 0, "{}", r.lemma_id);
            assert!(r.bound_estimate.is_finite() && r.bound_estimate > 0.0);
        }
        assert!(l4.origin_total.is_some());
        assert!(l2.per_frequency.iter().all(|(_, v)| *v >= 0.0));
        // (1,0,0) single term lower bound for lemma 5
        let lone = profiles.iter().find(|p| p.n == LatticePoint::new(vec![3, 0])).unwrap();
        let th0 = theta_coefficient(&t, 1, &lone.n, 1e-9).unwrap();
        assert!(lone.grouped_theta.iter().sum::<f64>() >= th0 * th0 * 0.25 - 1e-18);
    }
}
