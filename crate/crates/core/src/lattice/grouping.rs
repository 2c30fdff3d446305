//! Cylinder cells of a lattice ring and the grouping of shell parameters.
//!
//! For a level `k >= 1` and a frequency `n != 0`, the ring
//! `K = {m : k <= |m - n| < k + 1}` holds exactly the shells
//! `|m - n|^2 = k^2 + p` for `p = 0..=2k`. A ring point is placed in cell `q`
//! when its distance `d` to the line through the origin and `n` satisfies
//! `q <= d^2 < q + 1`; cells run over `q = 0..2k`. Distance to the line is the
//! same as the distance of the projection onto the tangent hyperplane at the
//! ring's near pole from that pole, so classifying by `d` reproduces the
//! cylinder bases directly. Points with `d^2 >= 2k` fall outside every
//! cylinder and are kept in [`AnnulusPartition::outer`].
//!
//! `d^2 * |n|^2 = |m|^2 |n|^2 - (m . n)^2` is an integer, so cell membership is
//! decided in exact arithmetic.
//!
//! Each parameter `p` with a nonempty shell is grouped under the smallest cell
//! its shell touches. Shells lying entirely outside the cylinders are orphans:
//! scanning `q` upward, every cell that received nothing takes the smallest
//! remaining orphan. Orphans left after the empty cells run out are appended
//! to the last cell and listed in [`GroupingTable::overflow`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{for_each_sphere_offset, norm_sq, LatticePoint};
use crate::error::{invalid, Error, Result};

/// `floor(d^2)` where `d` is the distance from `m` to the line through 0 and `n`.
pub fn cell_index(m: &[i64], n: &[i64]) -> u64 {
    let mm: i128 = m.iter().map(|&x| (x as i128) * (x as i128)).sum();
    let nn: i128 = n.iter().map(|&x| (x as i128) * (x as i128)).sum();
    let mn: i128 = m.iter().zip(n).map(|(&a, &b)| (a as i128) * (b as i128)).sum();
    let cross = mm * nn - mn * mn;
    debug_assert!(cross >= 0 && nn > 0);
    (cross / nn) as u64
}

fn check_level(dim: usize, k: u32, n: &LatticePoint) -> Result<()> {
    if dim == 0 || n.dim() != dim {
        return Err(invalid(format!(
            "frequency {n} does not have dimension {dim}"
        )));
    }
    if k == 0 {
        return Err(invalid("level k must be at least 1"));
    }
    if n.is_origin() {
        return Err(Error::UndefinedAxis);
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnulusPartition {
    pub dim: usize,
    pub k: u32,
    pub n: LatticePoint,
    /// `cells[q]` for `q = 0..2k`, each in lexicographic order.
    pub cells: Vec<Vec<LatticePoint>>,
    /// Ring points with `d^2 >= 2k`.
    pub outer: Vec<LatticePoint>,
    pub axis_unit: Vec<f64>,
    /// Point of the line through 0 and `n` on the sphere `|x - n| = k + 1`
    /// nearest the origin.
    pub y0: Vec<f64>,
}

impl AnnulusPartition {
    pub fn point_count(&self) -> usize {
        self.cells.iter().map(Vec::len).sum::<usize>() + self.outer.len()
    }
}

pub fn build_annulus_partition(dim: usize, k: u32, n: &LatticePoint) -> Result<AnnulusPartition> {
    check_level(dim, k, n)?;
    let cell_count = 2 * k as usize;
    let mut cells = vec![Vec::new(); cell_count];
    let mut outer = Vec::new();
    let lo = (k as i64) * (k as i64);
    let mut ring = Vec::new();
    for p in 0..=2 * k as i64 {
        for_each_sphere_offset(dim, lo + p, |t| ring.push(n.offset(t)));
    }
    ring.sort();
    for m in ring {
        let q = cell_index(m.coords(), n.coords()) as usize;
        if q < cell_count {
            cells[q].push(m);
        } else {
            outer.push(m);
        }
    }
    let norm = n.norm();
    let axis_unit: Vec<f64> = n.coords().iter().map(|&c| c as f64 / norm).collect();
    let reach = k as f64 + 1.0;
    let y0 = n
        .coords()
        .iter()
        .zip(&axis_unit)
        .map(|(&c, u)| c as f64 - reach * u)
        .collect();
    Ok(AnnulusPartition {
        dim,
        k,
        n: n.clone(),
        cells,
        outer,
        axis_unit,
        y0,
    })
}

/// What a shell of the ring looks like from the grouping's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellSummary {
    /// Smallest cell index over the shell's points (may exceed `2k - 1`).
    pub min_cell: u64,
    /// Smallest `|m|^2` over the shell's points.
    pub min_norm_sq: i64,
    pub count: usize,
}

impl ShellSummary {
    /// Folds one shell point into a running summary.
    pub fn absorb(acc: &mut Option<ShellSummary>, m: &[i64], n: &[i64]) {
        let cell = cell_index(m, n);
        let nsq = norm_sq(m);
        match acc {
            None => {
                *acc = Some(ShellSummary {
                    min_cell: cell,
                    min_norm_sq: nsq,
                    count: 1,
                })
            }
            Some(s) => {
                s.min_cell = s.min_cell.min(cell);
                s.min_norm_sq = s.min_norm_sq.min(nsq);
                s.count += 1;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Geometric,
    Orphan,
    Empty,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupingTable {
    pub dim: usize,
    pub k: u32,
    pub n: LatticePoint,
    /// `groups[q]`, ascending parameters `p`.
    pub groups: Vec<Vec<u32>>,
    pub kinds: Vec<GroupKind>,
    /// Per parameter `p = 0..=2k`; `None` for an empty shell.
    pub shells: Vec<Option<ShellSummary>>,
    /// Orphans that found no empty cell and were appended to the last one.
    pub overflow: Vec<u32>,
}

impl GroupingTable {
    /// Assigns parameters to cells from per-shell summaries (`shells[p]`, `p = 0..=2k`).
    pub fn from_summaries(
        dim: usize,
        k: u32,
        n: &LatticePoint,
        shells: Vec<Option<ShellSummary>>,
    ) -> Result<GroupingTable> {
        check_level(dim, k, n)?;
        if shells.len() != 2 * k as usize + 1 {
            return Err(invalid(format!(
                "expected {} shell summaries, got {}",
                2 * k + 1,
                shells.len()
            )));
        }
        let cell_count = 2 * k as usize;
        let mut groups = vec![Vec::new(); cell_count];
        let mut orphans = Vec::new();
        for (p, s) in shells.iter().enumerate() {
            if let Some(s) = s {
                if (s.min_cell as usize) < cell_count {
                    groups[s.min_cell as usize].push(p as u32);
                } else {
                    orphans.push(p as u32);
                }
            }
        }
        let mut kinds: Vec<GroupKind> = groups
            .iter()
            .map(|g| {
                if g.is_empty() {
                    GroupKind::Empty
                } else {
                    GroupKind::Geometric
                }
            })
            .collect();
        let mut pending = orphans.into_iter();
        for q in 0..cell_count {
            if kinds[q] == GroupKind::Empty {
                match pending.next() {
                    Some(p) => {
                        groups[q].push(p);
                        kinds[q] = GroupKind::Orphan;
                    }
                    None => break,
                }
            }
        }
        let overflow: Vec<u32> = pending.collect();
        if !overflow.is_empty() {
            let last = groups.last_mut().expect("k >= 1 gives at least two cells");
            last.extend_from_slice(&overflow);
            last.sort_unstable();
        }
        Ok(GroupingTable {
            dim,
            k,
            n: n.clone(),
            groups,
            kinds,
            shells,
            overflow,
        })
    }

    /// Group index holding `p`, if any.
    pub fn group_of(&self, p: u32) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&p))
    }

    /// Every parameter with a nonempty shell occurs in exactly one group and
    /// no parameter occurs twice.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![0u32; self.shells.len()];
        for g in &self.groups {
            for &p in g {
                match seen.get_mut(p as usize) {
                    Some(c) => *c += 1,
                    None => return false,
                }
            }
        }
        seen.iter()
            .zip(&self.shells)
            .all(|(&c, s)| if s.is_some() { c == 1 } else { c <= 1 })
    }

    /// Smallest `|m|^2` over all shells grouped under `q`.
    pub fn group_min_norm_sq(&self, q: usize) -> Option<i64> {
        self.groups[q]
            .iter()
            .filter_map(|&p| self.shells[p as usize].map(|s| s.min_norm_sq))
            .min()
    }
}

pub fn build_grouping(dim: usize, k: u32, n: &LatticePoint) -> Result<GroupingTable> {
    check_level(dim, k, n)?;
    let lo = (k as i64) * (k as i64);
    let shells = (0..=2 * k as i64)
        .map(|p| {
            let mut acc = None;
            for_each_sphere_offset(dim, lo + p, |t| {
                let m: Vec<i64> = n.coords().iter().zip(t).map(|(a, b)| a + b).collect();
                ShellSummary::absorb(&mut acc, &m, n.coords());
            });
            acc
        })
        .collect();
    GroupingTable::from_summaries(dim, k, n, shells)
}

/// Position of `|n|` relative to the level `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `|n| >= k + 1`: bound `sqrt((|n| - k - 1)^2 + q)`.
    Outside,
    /// `k < |n| < k + 1`: bound `sqrt(q)`.
    Straddling,
    /// `|n| <= k`: bound `sqrt((|n| - k)^2 + q) / 2`.
    Inside,
}

impl Regime {
    pub fn classify(n_norm_sq: i64, k: u32) -> Regime {
        let k = k as i64;
        if n_norm_sq >= (k + 1) * (k + 1) {
            Regime::Outside
        } else if n_norm_sq <= k * k {
            Regime::Inside
        } else {
            Regime::Straddling
        }
    }

    /// Lower bound on `|m|` for points grouped under cell `q`.
    pub fn bound(self, n_norm_sq: i64, k: u32, q: u64) -> f64 {
        let nn = (n_norm_sq as f64).sqrt();
        let k = k as f64;
        let q = q as f64;
        match self {
            Regime::Outside => ((nn - k - 1.0).powi(2) + q).sqrt(),
            Regime::Straddling => q.sqrt(),
            Regime::Inside => 0.5 * ((nn - k).powi(2) + q).sqrt(),
        }
    }

    /// Exact integer test of `|m| >= bound(q)` given `|m|^2`.
    pub fn holds(self, m_norm_sq: i64, n_norm_sq: i64, k: u32, q: u64) -> bool {
        let mm = m_norm_sq as i128;
        let nn = n_norm_sq as i128;
        let q = q as i128;
        let k = k as i128;
        // x >= -2 c |n|  <=>  x >= 0  or  x^2 <= 4 c^2 |n|^2
        let against_root = |x: i128, c: i128| x >= 0 || x * x <= 4 * c * c * nn;
        match self {
            Regime::Outside => {
                let a = k + 1;
                against_root(mm - q - nn - a * a, a)
            }
            Regime::Straddling => mm >= q,
            Regime::Inside => against_root(4 * mm - nn - k * k - q, k),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RegimeSlack {
    /// Number of `(k, n)` pairs falling in this regime.
    pub pairs: usize,
    /// Number of nonempty groups checked.
    pub groups_checked: usize,
    /// `min (|m| - bound)` over checked groups; `None` when vacuous.
    pub min_slack: Option<f64>,
    pub violations: usize,
}

impl RegimeSlack {
    pub fn is_vacuous(&self) -> bool {
        self.groups_checked == 0
    }

    fn merge(&mut self, other: &RegimeSlack) {
        self.pairs += other.pairs;
        self.groups_checked += other.groups_checked;
        self.violations += other.violations;
        self.min_slack = match (self.min_slack, other.min_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BoundReport {
    pub dim: usize,
    pub k_max: u32,
    pub centers: Vec<LatticePoint>,
    pub tables_built: usize,
    /// `min (4 sqrt(q + 1) - |Q_q|)` over all groups.
    pub cardinality_min_slack: f64,
    pub cardinality_violations: usize,
    pub largest_group: usize,
    pub partition_violations: usize,
    pub overflow_orphans: usize,
    pub outside: RegimeSlack,
    pub straddling: RegimeSlack,
    pub inside: RegimeSlack,
    pub violations: usize,
}

impl BoundReport {
    fn absorb(&mut self, t: &GroupingTable) {
        self.tables_built += 1;
        if !t.is_partition() {
            self.partition_violations += 1;
        }
        self.overflow_orphans += t.overflow.len();
        let nn = t.n.norm_sq();
        let regime = Regime::classify(nn, t.k);
        let mut slack = RegimeSlack {
            pairs: 1,
            ..Default::default()
        };
        for (q, g) in t.groups.iter().enumerate() {
            let size = g.len();
            self.largest_group = self.largest_group.max(size);
            let card_slack = 4.0 * ((q + 1) as f64).sqrt() - size as f64;
            self.cardinality_min_slack = self.cardinality_min_slack.min(card_slack);
            if (size * size) as u64 >= 16 * (q as u64 + 1) {
                self.cardinality_violations += 1;
            }
            if let Some(min_sq) = t.group_min_norm_sq(q) {
                slack.groups_checked += 1;
                let s = (min_sq as f64).sqrt() - regime.bound(nn, t.k, q as u64);
                slack.min_slack = Some(slack.min_slack.map_or(s, |v: f64| v.min(s)));
                if !regime.holds(min_sq, nn, t.k, q as u64) {
                    slack.violations += 1;
                }
            }
        }
        match regime {
            Regime::Outside => self.outside.merge(&slack),
            Regime::Straddling => self.straddling.merge(&slack),
            Regime::Inside => self.inside.merge(&slack),
        }
    }

    fn finish(&mut self) {
        self.violations = self.cardinality_violations
            + self.partition_violations
            + self.outside.violations
            + self.straddling.violations
            + self.inside.violations;
    }
}

/// Checks the cardinality bound `|Q_q^k| < 4 sqrt(q + 1)` and the three
/// minimum-norm bounds for every `k = 1..=k_max` and every center.
///
/// The minimum-norm bounds are monotone in `|m|`, so checking the smallest
/// `|m|^2` of each group covers every point of every grouped shell.
pub fn verify_grouping_bounds(
    dim: usize,
    k_max: u32,
    centers: &[LatticePoint],
) -> Result<BoundReport> {
    if k_max == 0 {
        return Err(invalid("k_max must be at least 1"));
    }
    if centers.is_empty() {
        return Err(invalid("at least one center is required"));
    }
    for c in centers {
        check_level(dim, 1, c)?;
    }
    let partials: Vec<Result<BoundReport>> = centers
        .par_iter()
        .map(|n| {
            let mut r = BoundReport {
                cardinality_min_slack: f64::INFINITY,
                ..Default::default()
            };
            for k in 1..=k_max {
                r.absorb(&build_grouping(dim, k, n)?);
            }
            Ok(r)
        })
        .collect();
    let mut report = BoundReport {
        dim,
        k_max,
        centers: centers.to_vec(),
        cardinality_min_slack: f64::INFINITY,
        ..Default::default()
    };
    for part in partials {
        let part = part?;
        report.tables_built += part.tables_built;
        report.cardinality_min_slack = report.cardinality_min_slack.min(part.cardinality_min_slack);
        report.cardinality_violations += part.cardinality_violations;
        report.largest_group = report.largest_group.max(part.largest_group);
        report.partition_violations += part.partition_violations;
        report.overflow_orphans += part.overflow_orphans;
        report.outside.merge(&part.outside);
        report.straddling.merge(&part.straddling);
        report.inside.merge(&part.inside);
    }
    report.finish();
    Ok(report)
}
