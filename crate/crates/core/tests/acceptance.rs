//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sphloc::cutoff::{make_cutoff, psi_coefficients, verify_psi_decay, CutoffSpec, Profile};
use sphloc::experiments::{
    inner_l2_of_function, localization_curve, make_test_function, maximal_inequality_ratio, TestFunctionKind,
    TestFunctionSpec,
};
use sphloc::kernels::{
    frequency_profiles, max_definition_residual, theta_coefficients, verify_lemma2, verify_lemma4, verify_lemma5,
    DEFAULT_TRUNCATION_TOL,
};
use sphloc::lattice::oracle::shell_by_cube_scan;
use sphloc::lattice::{enumerate_shell, orbit_representatives, verify_grouping_bounds, LatticePoint};
use sphloc::partialsums::{
    ball_nodes, convolution_form_check, kernel_fields, partial_sum_grid, telescoping_check, SpectrumFunction,
};
use sphloc::transform::node_coords;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_cutoff() -> CutoffSpec {
    make_cutoff(1.0, 0.5, 2, Profile::BumpQuotient).unwrap()
}

fn random_center(rng: &mut ChaCha8Rng, dim: usize, half: i64) -> LatticePoint {
    LatticePoint::new((0..dim).map(|_| rng.gen_range(-half..=half)).collect())
}

fn lattice_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut checks = 0;
    let mut points = 0usize;
    for dim in [2usize, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + dim as u64);
        let centers: Vec<LatticePoint> = (0..20).map(|_| random_center(&mut rng, dim, 50)).collect();
        let mut js: Vec<i64> = (0..197).map(|_| rng.gen_range(0..=10_000)).collect();
        js.extend([0, 1, 10_000]);
        // N = 3 pairs each j with one center to keep the cube scans within budget
        let pairs: Vec<(usize, i64)> = if dim == 2 {
            (0..centers.len()).flat_map(|c| js.iter().map(move |&j| (c, j))).collect()
        } else {
            js.iter().enumerate().map(|(i, &j)| (i % centers.len(), j)).collect()
        };
        for (c, j) in pairs {
            let center = &centers[c];
            let fast: BTreeSet<LatticePoint> = enumerate_shell(dim, center, j).unwrap().points.into_iter().collect();
            let slow: BTreeSet<LatticePoint> = shell_by_cube_scan(dim, center, j).into_iter().collect();
            checks += 1;
            points += slow.len();
            if fast != slow {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{checks} (j, center) pairs over N = 2, 3, {points} points, {mismatches} mismatches"),
    )
}

fn grouping_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut centers = Vec::new();
    while centers.len() < 50 {
        let n = random_center(&mut rng, 2, 150);
        let nn = n.norm_sq();
        if (1..=150 * 150).contains(&nn) {
            centers.push(n);
        }
    }
    let r = verify_grouping_bounds(2, 100, &centers).unwrap();
    outcome(
        r.violations == 0,
        format!(
            "{} tables, largest group {}, cardinality violations {}, partition violations {}, regime violations {}/{}/{}",
            r.tables_built,
            r.largest_group,
            r.cardinality_violations,
            r.partition_violations,
            r.outside.violations,
            r.straddling.violations,
            r.inside.violations
        ),
    )
}

fn cutoff_decay() -> Outcome {
    let spec = default_cutoff();
    let big = psi_coefficients(&spec, 512, 64).unwrap();
    let small = psi_coefficients(&spec, 512, 32).unwrap();
    let cancel = big.sum().norm() / big.abs_sum();
    let rb = verify_psi_decay(&big, &[4, 6]);
    let rs = verify_psi_decay(&small, &[4, 6]);
    let mut pass = cancel <= 1e-8;
    let mut parts = vec![format!("|sum psi|/sum|psi| = {cancel:.3e} (need <= 1e-8)")];
    for j in [4, 6] {
        let (eb, es) = (rb.entry(j).unwrap(), rs.entry(j).unwrap());
        let drift = (eb.constant - es.constant).abs() / eb.constant;
        pass &= !eb.at_edge && drift <= 0.01;
        parts.push(format!(
            "j = {j}: max at {:?}{}, drift M 32 -> 64 {:.2}%",
            eb.argmax,
            if eb.at_edge { " (table edge)" } else { "" },
            100.0 * drift
        ));
    }
    outcome(pass, parts.join("; "))
}

/// `G^-2 sum_x theta(x, k) psi(x) e^{-i n.x}` by direct summation.
fn quadrature_theta(spec: &CutoffSpec, grid: usize, k_max: u64, n_max: i64) -> Vec<(LatticePoint, Vec<f64>)> {
    let nodes: Vec<f64> = (0..grid).map(|j| -PI + 2.0 * PI * j as f64 / grid as f64).collect();
    let ball: Vec<(i64, i64)> = (-4..=4i64)
        .flat_map(|a| (-4..=4i64).map(move |b| (a, b)))
        .filter(|(a, b)| ((a * a + b * b) as u64) < k_max)
        .collect();
    let freqs: Vec<LatticePoint> = (-n_max..=n_max)
        .flat_map(|a| (-n_max..=n_max).map(move |b| LatticePoint::new(vec![a, b])))
        .filter(|n| n.norm_sq() <= n_max * n_max)
        .collect();
    let width = (2 * n_max + 1) as usize;
    // e^{-i t x_j} for |t| <= n_max
    let table: Vec<Complex64> = nodes
        .iter()
        .flat_map(|&x| (-n_max..=n_max).map(move |t| Complex64::from_polar(1.0, -(t as f64) * x)))
        .collect();
    let levels = k_max as usize + 1;
    let mut acc = vec![Complex64::new(0.0, 0.0); freqs.len() * levels];
    let scale = (2.0 * PI).powi(-2);
    let mut weights = vec![0.0; levels];
    for (i, &x1) in nodes.iter().enumerate() {
        for (j, &x2) in nodes.iter().enumerate() {
            let psi = spec.psi(&[x1, x2]);
            if psi == 0.0 {
                continue;
            }
            for (k, w) in weights.iter_mut().enumerate() {
                let theta: f64 = ball
                    .iter()
                    .filter(|(a, b)| ((a * a + b * b) as usize) < k)
                    .map(|&(a, b)| (a as f64 * x1 + b as f64 * x2).cos())
                    .sum();
                *w = scale * theta * psi;
            }
            for (f, n) in freqs.iter().enumerate() {
                let c = n.coords();
                let e = table[i * width + (c[0] + n_max) as usize] * table[j * width + (c[1] + n_max) as usize];
                for k in 0..levels {
                    acc[f * levels + k] += e * weights[k];
                }
            }
        }
    }
    let g2 = (grid * grid) as f64;
    freqs
        .into_iter()
        .enumerate()
        .map(|(f, n)| (n, (0..levels).map(|k| acc[f * levels + k].re / g2).collect()))
        .collect()
}

fn kernel_oracle() -> Outcome {
    let spec = default_cutoff();
    let psi = psi_coefficients(&spec, 1024, 256).unwrap();
    let oracle = quadrature_theta(&spec, 384, 10, 10);
    let mut worst: f64 = 0.0;
    for k in 0..=10u64 {
        let table = theta_coefficients(&psi, k, 10).unwrap();
        for (n, vals) in &oracle {
            worst = worst.max((table.theta(k, n).unwrap() - vals[k as usize]).abs());
        }
    }
    let telescoped = max_definition_residual(&psi, 100, 20).unwrap();
    outcome(
        worst <= 1e-6 && telescoped <= 1e-12,
        format!("quadrature max error {worst:.3e} (need <= 1e-6); shell vs telescoped max difference {telescoped:.3e} (need <= 1e-12)"),
    )
}

fn uniform_summability() -> Outcome {
    let psi = psi_coefficients(&default_cutoff(), 1024, 256).unwrap();
    let centers = orbit_representatives(2, 75);
    let profiles = frequency_profiles(&psi, &centers, 100, 50, DEFAULT_TRUNCATION_TOL).unwrap();
    let l2 = verify_lemma2(&profiles, &[0], 100).unwrap();
    let l4 = verify_lemma4(&profiles, 50).unwrap();
    let l5 = verify_lemma5(&profiles, 50).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, r) in [("shell blocks j < 100^2", &l2), ("grouped (q+1)^2 k <= 50", &l4), ("grouped (q+1)^-2 k <= 50", &l5)] {
        let g = r.growth_ratio.unwrap_or(f64::INFINITY);
        pass &= g < 1.05 && r.violations == 0;
        parts.push(format!("{name}: max {:.4e} growth {:.4} violations {}", r.bound_estimate, g, r.violations));
    }
    outcome(pass, parts.join("; "))
}

fn telescoping() -> Outcome {
    let psi = psi_coefficients(&default_cutoff(), 256, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let points: Vec<Vec<f64>> = (0..64)
        .map(|_| vec![rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)])
        .collect();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let f = SpectrumFunction::random(2, 8, 1000 + seed, true).unwrap();
        let (small, big) = kernel_fields(&f, &psi, 25, &points).unwrap();
        worst = worst.max(telescoping_check(&small, &big).unwrap().max_relative_residual);
    }
    outcome(worst <= 1e-10, format!("10 functions, q = 25, max relative residual {worst:.3e} (need <= 1e-10)"))
}

fn parseval() -> Outcome {
    let f = SpectrumFunction::random(2, 24, 5, false).unwrap();
    let mut worst: f64 = 0.0;
    for lambda in [1.0, 2.0, 5.5, 17.0, 50.0, 100.0, 250.0, 577.0, 1000.0, 1153.0] {
        let grid = partial_sum_grid(&f, lambda, 64).unwrap().l2_norm_sq();
        let spec = f.partial_norm_sq(lambda).unwrap();
        worst = worst.max((grid - spec).abs() / spec.max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-10, format!("10 levels, max relative difference {worst:.3e} (need <= 1e-10)"))
}

fn inner_points(grid: usize, radius: f64) -> Vec<Vec<f64>> {
    ball_nodes(2, grid, radius)
        .into_iter()
        .map(|i| {
            let mut x = vec![0.0; 2];
            node_coords(2, grid, i, &mut x);
            x
        })
        .collect()
}

fn bump() -> SpectrumFunction {
    make_test_function(&TestFunctionSpec::new(TestFunctionKind::SmoothAnnulusBump, 1.0, 0.5, 2, 128))
        .unwrap()
        .function
}

fn convolution() -> Outcome {
    let psi = psi_coefficients(&default_cutoff(), 1024, 256).unwrap();
    let f = bump();
    let points = inner_points(512, 0.5);
    let mut worst: f64 = 0.0;
    for lambda in [10.0, 50.0, 100.0] {
        worst = worst.max(convolution_form_check(&f, &psi, lambda, &points, 1e-6).unwrap().max_abs_residual);
    }
    outcome(
        worst <= 1e-6,
        format!("{} inner nodes, lambda in {{10, 50, 100}}, max residual {worst:.3e} (need <= 1e-6)", points.len()),
    )
}

fn maximal_ratio() -> Outcome {
    let f = bump();
    let rep = maximal_inequality_ratio(&f, 1.0, 0.5, &[100.0, 400.0, 1600.0, 6400.0], 512).unwrap();
    let rho: Vec<f64> = rep.rows.iter().map(|r| r.rho).collect();
    let g = rho[3] / rho[2];
    outcome(
        g < 1.1,
        format!(
            "rho = {:?}, rho(6400)/rho(1600) = {g:.6} (need < 1.1), empirical C = {:.6e}",
            rho.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>(),
            rep.empirical_constant
        ),
    )
}

fn endpoint() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [
        TestFunctionKind::SmoothAnnulusBump,
        TestFunctionKind::BandLimitedProjection,
        TestFunctionKind::RandomSpectrumOffball,
    ] {
        let mut spec = TestFunctionSpec::new(kind, 1.0, 0.5, 2, 128);
        spec.seed = 3;
        let f = make_test_function(&spec).unwrap().function;
        let past = (2 * 128 * 128 + 1) as f64;
        let rep = localization_curve(&f, 1.0, 0.5, &[past], 512).unwrap();
        let norm = f.norm_sq().sqrt();
        let l2 = rep.rows[0].l2_inner;
        let residual = inner_l2_of_function(&f, 0.5, 512).unwrap();
        let ok = l2 <= 1e-6 * norm && (l2 - residual).abs() <= 1e-6 * norm;
        pass &= ok;
        parts.push(format!(
            "{}: inner L2 {l2:.3e}, construction residual {residual:.3e}, relative {:.3e}",
            kind.name(),
            l2 / norm
        ));
    }
    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Duration); 10] = [
        ("lattice oracle equivalence", lattice_oracle, Duration::from_secs(60)),
        ("grouping bounds", grouping_bounds, Duration::from_secs(300)),
        ("cutoff decay", cutoff_decay, Duration::MAX),
        ("kernel oracle", kernel_oracle, Duration::MAX),
        ("uniform summability", uniform_summability, Duration::from_secs(900)),
        ("telescoping identity", telescoping, Duration::MAX),
        ("parseval per partial sum", parseval, Duration::MAX),
        ("convolution reduction", convolution, Duration::MAX),
        ("maximal inequality proxy", maximal_ratio, Duration::from_secs(600)),
        ("localization endpoint", endpoint, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = check();
        let took = start.elapsed();
        if took > *budget {
            o.pass = false;
            o.detail.push_str(&format!("; runtime {took:.1?} over budget {budget:.0?}"));
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.1?}) {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            took,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
