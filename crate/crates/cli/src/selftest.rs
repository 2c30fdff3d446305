//! Invariant suite run by `sphloc selftest`.

use anyhow::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeSet;
use std::f64::consts::PI;

use sphloc::cutoff::{make_cutoff, psi_coefficients, PsiCoefficients};
use sphloc::experiments::{inner_l2_of_function, localization_curve, make_test_function, TestFunctionSpec};
use sphloc::kernels::{
    big_theta_coefficient, frequency_profiles, max_definition_residual, verify_lemma2, verify_lemma4, verify_lemma5,
    DEFAULT_TRUNCATION_TOL,
};
use sphloc::lattice::oracle::{ball_by_cube_scan, shell_by_cube_scan};
use sphloc::lattice::{enumerate_ball, enumerate_shell, orbit_representatives, verify_grouping_bounds, LatticePoint};
use sphloc::partialsums::{
    kernel_fields, maximal_field, partial_sum, partial_sum_grid, telescoping_check, SpectrumFunction,
};
use sphloc::transform::node_coords;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub violations: usize,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub checks: Vec<Check>,
    pub total_violations: usize,
}

struct Scale {
    shell_j: i64,
    shells: usize,
    group_k: u32,
    group_centers: usize,
    psi_grid: usize,
    psi_max: usize,
    kernel_j: u64,
    kernel_n: i64,
    lemma_k: u32,
    lemma_n: i64,
    band: usize,
    grid: usize,
}

fn scale(dim: usize, quick: bool) -> Scale {
    let low = dim >= 3 || quick;
    Scale {
        shell_j: if quick { 400 } else { 2500 },
        shells: if quick { 40 } else { 200 },
        group_k: if quick { 15 } else { 40 },
        group_centers: if quick { 5 } else { 20 },
        psi_grid: if low { 64 } else { 256 },
        psi_max: if low { 16 } else { 64 },
        kernel_j: if quick { 30 } else { 60 },
        kernel_n: if low { 4 } else { 10 },
        lemma_k: if low { 6 } else { 16 },
        lemma_n: if low { 4 } else { 12 },
        band: if low { 4 } else { 8 },
        grid: if low { 16 } else { 32 },
    }
}

fn check(name: &str, violations: usize, detail: String) -> Check {
    Check {
        name: name.into(),
        violations,
        skipped: false,
        detail,
    }
}

fn skipped(name: &str, why: &str) -> Check {
    Check {
        name: name.into(),
        violations: 0,
        skipped: true,
        detail: why.into(),
    }
}

fn lattice_checks(cfg: &RunConfig, s: &Scale, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let dim = cfg.dim;
    let mut mismatches = 0;
    for _ in 0..s.shells {
        let c = LatticePoint::new((0..dim).map(|_| rng.gen_range(-20..=20)).collect());
        let j = rng.gen_range(0..=s.shell_j);
        let fast: BTreeSet<_> = enumerate_shell(dim, &c, j)?.points.into_iter().collect();
        let slow: BTreeSet<_> = shell_by_cube_scan(dim, &c, j).into_iter().collect();
        mismatches += usize::from(fast != slow);
    }
    let mut ball_mismatch = 0;
    for lambda in [0.5, 1.0, 2.5, 10.0, 50.0, 101.0] {
        ball_mismatch += usize::from(enumerate_ball(dim, lambda)? != ball_by_cube_scan(dim, lambda));
    }
    let centers: Vec<LatticePoint> = (0..s.group_centers)
        .map(|_| loop {
            let p = LatticePoint::new((0..dim).map(|_| rng.gen_range(-30..=30)).collect());
            if !p.is_origin() {
                break p;
            }
        })
        .collect();
    let g = verify_grouping_bounds(dim, s.group_k, &centers)?;
    Ok(vec![
        check("shell oracle", mismatches, format!("{} random shells, j <= {}", s.shells, s.shell_j)),
        check("ball oracle", ball_mismatch, "6 levels".into()),
        check(
            "grouping bounds",
            g.violations,
            format!(
                "k <= {}, {} centers, cardinality {}, partition {}, regimes {}/{}/{}",
                s.group_k,
                centers.len(),
                g.cardinality_violations,
                g.partition_violations,
                g.outside.violations,
                g.straddling.violations,
                g.inside.violations
            ),
        ),
    ])
}

fn psi_checks(psi: &PsiCoefficients) -> Check {
    let mut bad = 0;
    for (m, v) in psi.iter() {
        let neg: Vec<i64> = m.iter().map(|c| -c).collect();
        let mut swapped = m.clone();
        swapped.reverse();
        let same = |o: Option<Complex64>| o.is_some_and(|w| (w - v).norm() <= 1e-12);
        if v.im.abs() > 1e-12 || !same(psi.get(&neg)) || !same(psi.get(&swapped)) {
            bad += 1;
        }
    }
    check("cutoff symmetry", bad, format!("{} coefficients real, even and permutation invariant", psi.len()))
}

fn kernel_checks(cfg: &RunConfig, s: &Scale, psi: &PsiCoefficients) -> Result<Vec<Check>> {
    let dim = cfg.dim;
    let residual = max_definition_residual(psi, s.kernel_j, s.kernel_n)?;
    let mut nonzero = 0;
    let mut empty = 0;
    let origin = LatticePoint::origin(dim);
    let probes = [origin.clone(), LatticePoint::new((0..dim as i64).map(|i| i + 1).collect())];
    for j in 0..=s.kernel_j as i64 {
        if enumerate_shell(dim, &origin, j)?.is_empty() {
            empty += 1;
            for n in &probes {
                nonzero += usize::from(big_theta_coefficient(psi, j as u64, n, DEFAULT_TRUNCATION_TOL)? != 0.0);
            }
        }
    }
    let centers = orbit_representatives(dim, s.lemma_n);
    let profiles = frequency_profiles(psi, &centers, s.lemma_k, s.lemma_k, DEFAULT_TRUNCATION_TOL)?;
    let l2 = verify_lemma2(&profiles, &[0, 4], s.lemma_k)?;
    let l4 = verify_lemma4(&profiles, s.lemma_k)?;
    let l5 = verify_lemma5(&profiles, s.lemma_k)?;
    Ok(vec![
        check(
            "kernel definition consistency",
            usize::from(residual > 1e-12),
            format!("max |Theta_j - (theta_(j+1) - theta_j)| = {residual:.3e} for j <= {}", s.kernel_j),
        ),
        check("zero shells", nonzero, format!("{empty} empty shells give exact zeros")),
        check("shell-block sums", l2.violations, format!("{} frequencies", centers.len())),
        check("grouped shell sums", l4.violations, format!("k <= {}", s.lemma_k)),
        check("grouped ball sums", l5.violations, format!("k <= {}, includes cardinality", s.lemma_k)),
    ])
}

fn partial_sum_checks(cfg: &RunConfig, s: &Scale, psi: &PsiCoefficients, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let dim = cfg.dim;
    let f = SpectrumFunction::random(dim, s.band, cfg.seed, true)?;
    let top = (dim * s.band * s.band + 1) as f64;
    let lambdas: Vec<f64> = (1..=10).map(|i| top * i as f64 / 10.0).collect();

    let mut parseval_bad = 0;
    let mut worst_parseval: f64 = 0.0;
    for &l in &lambdas {
        let grid = partial_sum_grid(&f, l, s.grid)?.l2_norm_sq();
        let spec = f.partial_norm_sq(l)?;
        let rel = (grid - spec).abs() / spec.max(f64::MIN_POSITIVE);
        worst_parseval = worst_parseval.max(rel);
        parseval_bad += usize::from(rel > 1e-10);
    }

    let nodes: Vec<usize> = (0..32).map(|_| rng.gen_range(0..s.grid.pow(dim as u32))).collect();
    let points: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&i| {
            let mut x = vec![0.0; dim];
            node_coords(dim, s.grid, i, &mut x);
            x
        })
        .collect();
    let mut two_path: f64 = 0.0;
    for &l in &lambdas {
        let field = partial_sum_grid(&f, l, s.grid)?;
        let direct = partial_sum(&f, l, &points)?;
        for (&i, d) in nodes.iter().zip(&direct) {
            two_path = two_path.max((field.values[i] - d).norm());
        }
    }

    let small = maximal_field(&f, top / 2.0, s.grid)?;
    let large = maximal_field(&f, top, s.grid)?;
    let last = partial_sum_grid(&f, top, s.grid)?;
    let monotone_bad = small
        .values
        .iter()
        .zip(&large.values)
        .zip(&last.values)
        .filter(|((a, b), c)| a > b || c.norm() > **b + 1e-12)
        .count();

    let random_points: Vec<Vec<f64>> = (0..16).map(|_| (0..dim).map(|_| rng.gen_range(-PI..PI)).collect()).collect();
    let q = if s.band > 4 { 25 } else { 12 };
    let (theta, big) = kernel_fields(&f, psi, q, &random_points)?;
    let tele = telescoping_check(&theta, &big)?;

    Ok(vec![
        check("parseval per partial sum", parseval_bad, format!("max relative difference {worst_parseval:.3e}")),
        check("two-path partial sums", usize::from(two_path > 1e-10), format!("max difference {two_path:.3e}")),
        check("maximal field monotone", monotone_bad, format!("{} nodes", small.values.len())),
        check(
            "telescoping identity",
            usize::from(tele.max_relative_residual > 1e-10),
            format!("q = {q}, relative residual {:.3e}", tele.max_relative_residual),
        ),
    ])
}

fn endpoint_check(cfg: &RunConfig, quick: bool) -> Result<Check> {
    if cfg.dim != 2 {
        return Ok(skipped("localization endpoint", "runs in dimension 2 only"));
    }
    let band = if quick { 64 } else { 128 };
    let grid = if quick { 256 } else { 512 };
    let spec = TestFunctionSpec::new(cfg.kind()?, cfg.outer_radius, cfg.inner_radius, 2, band);
    let f = match make_test_function(&spec) {
        Ok(t) => t.function,
        Err(e) => return Ok(check("localization endpoint", 1, format!("test function rejected: {e}"))),
    };
    let past = (2 * band * band + 1) as f64;
    let rep = localization_curve(&f, cfg.outer_radius, cfg.inner_radius, &[past], grid)?;
    let norm = f.norm_sq().sqrt();
    let l2 = rep.rows[0].l2_inner;
    let residual = inner_l2_of_function(&f, cfg.inner_radius, grid)?;
    let ok = l2 <= 1e-6 * norm && (l2 - residual).abs() <= 1e-6 * norm;
    Ok(check(
        "localization endpoint",
        usize::from(!ok),
        format!("band {band}: inner L2 {l2:.3e}, construction residual {residual:.3e}"),
    ))
}

pub fn run(cfg: &RunConfig) -> Result<SelftestReport> {
    let s = scale(cfg.dim, cfg.quick);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let psi = psi_coefficients(
        &make_cutoff(cfg.outer_radius, cfg.inner_radius, cfg.dim, cfg.profile()?)?,
        s.psi_grid,
        s.psi_max,
    )?;
    let mut checks = lattice_checks(cfg, &s, &mut rng)?;
    checks.push(psi_checks(&psi));
    checks.extend(kernel_checks(cfg, &s, &psi)?);
    checks.extend(partial_sum_checks(cfg, &s, &psi, &mut rng)?);
    checks.push(endpoint_check(cfg, cfg.quick)?);
    let total_violations = checks.iter().map(|c| c.violations).sum();
    Ok(SelftestReport {
        quick: cfg.quick,
        checks,
        total_violations,
    })
}
