use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use sphloc::cutoff::{make_cutoff, psi_coefficients, verify_psi_decay, DecayFitReport, PsiCoefficients};
use sphloc::experiments::{localization_curve, make_test_function, maximal_inequality_ratio, TestFunctionSpec};
use sphloc::kernels::{
    frequency_profiles, verify_lemma1, verify_lemma2, verify_lemma4, verify_lemma5, KernelTable, LemmaReport,
    DEFAULT_TRUNCATION_TOL,
};
use sphloc::lattice::{
    build_grouping, enumerate_ball, enumerate_shell, orbit_representatives, verify_grouping_bounds, LatticePoint,
};
use sphloc::report::{to_json, TOOL_NAME, TOOL_VERSION};

use crate::config::RunConfig;

/// Raised after reports are written when a check found violations.
#[derive(Debug)]
pub struct Violation(pub String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

pub struct Output<'a> {
    pub cfg: &'a RunConfig,
    pub command: &'a str,
}

impl Output<'_> {
    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.cfg.out_dir)
            .with_context(|| format!("creating output directory {}", self.cfg.out_dir.display()))?;
        Ok(self.cfg.out_dir.join(name))
    }

    pub fn json<T: Serialize>(&self, name: &str, result: T) -> Result<PathBuf> {
        let env = Envelope {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command: self.command,
            config: self.cfg,
            result,
        };
        let path = self.path(name)?;
        std::fs::write(&path, to_json(&env)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn file<F>(&self, name: &str, write: F) -> Result<Option<PathBuf>>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        if !self.cfg.csv && name.ends_with(".csv") {
            return Ok(None);
        }
        let path = self.path(name)?;
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write(&mut w)?;
        w.flush()?;
        Ok(Some(path))
    }
}

fn parse_point(dim: usize, s: &str) -> Result<LatticePoint> {
    let coords: Vec<i64> = s
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(|t| t.trim().parse::<i64>().with_context(|| format!("bad coordinate `{t}` in `{s}`")))
        .collect::<Result<_>>()?;
    if coords.len() != dim {
        bail!("point `{s}` has {} coordinates, expected {dim}", coords.len());
    }
    Ok(LatticePoint::new(coords))
}

fn write_points<W: Write>(w: &mut W, dim: usize, points: &[LatticePoint]) -> Result<()> {
    let header: Vec<String> = (1..=dim).map(|i| format!("m_{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EnumerateResult {
    mode: &'static str,
    center: LatticePoint,
    radius_sq: Option<i64>,
    lambda: Option<f64>,
    count: usize,
    points: Vec<LatticePoint>,
}

pub fn enumerate(cfg: &RunConfig, shell: Option<i64>, ball: Option<f64>, center: Option<&str>) -> Result<()> {
    let out = Output { cfg, command: "enumerate" };
    let center = match center {
        Some(s) => parse_point(cfg.dim, s)?,
        None => LatticePoint::origin(cfg.dim),
    };
    let result = match (shell, ball) {
        (Some(j), None) => {
            let s = enumerate_shell(cfg.dim, &center, j)?;
            EnumerateResult {
                mode: "shell",
                center,
                radius_sq: Some(j),
                lambda: None,
                count: s.points.len(),
                points: s.points,
            }
        }
        (None, Some(lambda)) => {
            if !center.is_origin() {
                bail!("--center applies to --shell only");
            }
            let points = enumerate_ball(cfg.dim, lambda)?;
            EnumerateResult {
                mode: "ball",
                center,
                radius_sq: None,
                lambda: Some(lambda),
                count: points.len(),
                points,
            }
        }
        _ => bail!("give exactly one of --shell J or --ball LAMBDA"),
    };
    out.file("enumerate.csv", |w| write_points(w, cfg.dim, &result.points))?;
    let (count, mode) = (result.count, result.mode);
    let path = out.json("enumerate.json", result)?;
    println!("{count}");
    eprintln!("{count} points ({mode}) written to {}", path.display());
    Ok(())
}

fn sample_centers(dim: usize, count: usize, n_max: i64, seed: u64) -> Result<Vec<LatticePoint>> {
    if n_max < 1 {
        bail!("nmax must be at least 1 to sample nonzero centers");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = LatticePoint::new((0..dim).map(|_| rng.gen_range(-n_max..=n_max)).collect());
        if (1..=n_max * n_max).contains(&p.norm_sq()) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn grouping(cfg: &RunConfig, k: Option<u32>, center: Option<&str>) -> Result<()> {
    let out = Output { cfg, command: "grouping" };
    if let Some(k) = k {
        let n = parse_point(cfg.dim, center.context("--k needs --center")?)?;
        let table = build_grouping(cfg.dim, k, &n)?;
        let largest = table.groups.iter().map(|g| g.len()).max().unwrap_or(0);
        let partition = table.is_partition();
        let path = out.json("grouping.json", &table)?;
        println!("k = {k}, n = {n}: {} cells, largest group {largest}, partition {partition}", table.groups.len());
        eprintln!("written to {}", path.display());
        return Ok(());
    }
    let centers = sample_centers(cfg.dim, cfg.samples, cfg.n_max, cfg.seed)?;
    let report = verify_grouping_bounds(cfg.dim, cfg.k_max, &centers)?;
    let path = out.json("grouping.json", &report)?;
    println!(
        "grouping bounds: {} tables, largest group {}, violations {}",
        report.tables_built, report.largest_group, report.violations
    );
    eprintln!("written to {}", path.display());
    if report.violations > 0 {
        return Err(Violation(format!("grouping bounds: {} violations", report.violations)).into());
    }
    Ok(())
}

fn psi_table(cfg: &RunConfig) -> Result<PsiCoefficients> {
    let spec = make_cutoff(cfg.outer_radius, cfg.inner_radius, cfg.dim, cfg.profile()?)?;
    Ok(psi_coefficients(&spec, cfg.psi_grid, cfg.psi_max_index)?)
}

#[derive(Serialize)]
struct CutoffResult {
    max_index: usize,
    grid: usize,
    coefficient_sum: f64,
    coefficient_abs_sum: f64,
    cancellation: f64,
    parseval_norm_sq: f64,
    grid_norm_sq: f64,
    edge_envelope: f64,
    decay: DecayFitReport,
}

pub fn cutoff(cfg: &RunConfig) -> Result<()> {
    let out = Output { cfg, command: "cutoff" };
    let psi = psi_table(cfg)?;
    out.file("psi.csv", |w| Ok(psi.write_csv(w)?))?;
    let cache = out.path("psi.bin")?;
    psi.write_cache(BufWriter::new(File::create(&cache)?))?;
    let result = CutoffResult {
        max_index: psi.max_index,
        grid: psi.grid,
        coefficient_sum: psi.sum().re,
        coefficient_abs_sum: psi.abs_sum(),
        cancellation: psi.sum().norm() / psi.abs_sum(),
        parseval_norm_sq: psi.parseval_norm_sq(),
        grid_norm_sq: psi.grid_norm_sq,
        edge_envelope: psi.edge_envelope(),
        decay: verify_psi_decay(&psi, &cfg.exponents),
    };
    let summary: Vec<String> = result
        .decay
        .entries
        .iter()
        .map(|e| format!("C_{} = {:.4e}{}", e.exponent, e.constant, if e.at_edge { " (edge)" } else { "" }))
        .collect();
    println!("cutoff: |sum psi|/sum|psi| = {:.3e}, {}", result.cancellation, summary.join(", "));
    let path = out.json("cutoff.json", result)?;
    eprintln!("written to {}", path.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum LemmaChoice {
    Lemma1,
    Lemma2,
    Lemma4,
    Lemma5,
    All,
}

fn summarize(r: &LemmaReport) -> String {
    let growth = r.growth_ratio.map_or("n/a".to_string(), |g| format!("{g:.4}"));
    format!(
        "{}: bound {:.4e}, growth {}, violations {}{}",
        r.lemma_id,
        r.bound_estimate,
        growth,
        r.violations,
        if r.argmax_on_boundary { ", argmax on range boundary" } else { "" }
    )
}

pub fn kernels(cfg: &RunConfig, which: LemmaChoice) -> Result<()> {
    let out = Output { cfg, command: "kernels" };
    let psi = psi_table(cfg)?;
    let mut reports = Vec::new();
    if matches!(which, LemmaChoice::Lemma1 | LemmaChoice::All) {
        let mut table = KernelTable::new(&psi, cfg.n_max, DEFAULT_TRUNCATION_TOL)?;
        let ks: Vec<u64> = (0..=cfg.k_max as u64).collect();
        for &k in &ks {
            table.add_theta_level(&psi, k)?;
        }
        reports.push(verify_lemma1(&table, &cfg.exponents, &ks));
    }
    let need_profiles = !matches!(which, LemmaChoice::Lemma1);
    if need_profiles {
        if cfg.k_max < 2 {
            bail!("kmax must be at least 2 for the summability checks");
        }
        let centers = orbit_representatives(cfg.dim, cfg.n_max);
        let grouped = if matches!(which, LemmaChoice::Lemma2) { 0 } else { cfg.k_max };
        let blocks = if matches!(which, LemmaChoice::Lemma4 | LemmaChoice::Lemma5) { 0 } else { cfg.k_max };
        let profiles = frequency_profiles(&psi, &centers, blocks, grouped, DEFAULT_TRUNCATION_TOL)?;
        if blocks > 0 {
            reports.push(verify_lemma2(&profiles, &cfg.exponents, blocks)?);
        }
        if matches!(which, LemmaChoice::Lemma4 | LemmaChoice::All) {
            reports.push(verify_lemma4(&profiles, cfg.k_max)?);
        }
        if matches!(which, LemmaChoice::Lemma5 | LemmaChoice::All) {
            reports.push(verify_lemma5(&profiles, cfg.k_max)?);
        }
    }
    let mut violations = 0;
    for r in &reports {
        let path = out.json(&format!("kernels_{}.json", r.lemma_id), r)?;
        println!("{}", summarize(r));
        eprintln!("written to {}", path.display());
        violations += r.violations;
    }
    if violations > 0 {
        return Err(Violation(format!("kernels: {violations} violations")).into());
    }
    Ok(())
}

fn test_function(cfg: &RunConfig) -> Result<sphloc::partialsums::SpectrumFunction> {
    let mut spec = TestFunctionSpec::new(cfg.kind()?, cfg.outer_radius, cfg.inner_radius, cfg.dim, cfg.band);
    spec.seed = cfg.seed;
    Ok(make_test_function(&spec)?.function)
}

pub fn experiment(cfg: &RunConfig, maximal: bool) -> Result<()> {
    let name = if maximal { "maxop" } else { "localize" };
    let out = Output { cfg, command: name };
    let start = Instant::now();
    let f = test_function(cfg)?;
    let run = if maximal { maximal_inequality_ratio } else { localization_curve };
    let report = run(&f, cfg.outer_radius, cfg.inner_radius, &cfg.lambda_list, cfg.grid)?;
    out.file(&format!("{name}.csv"), |w| Ok(report.write_csv(w)?))?;
    let path = out.json(&format!("{name}.json"), &report)?;
    let last = report.rows.last().expect("lambda list is nonempty");
    if maximal {
        println!(
            "maxop: rho({}) = {:.6e}, empirical C = {:.6e}, last growth {}",
            last.lambda,
            last.rho,
            report.empirical_constant,
            report.growth_ratios.last().copied().flatten().map_or("n/a".into(), |g| format!("{g:.4}"))
        );
    } else {
        println!(
            "localize: at lambda = {}: sup {:.3e}, inner L2 {:.3e}, ratio {:.3e}",
            last.lambda, last.sup_inner, last.l2_inner, last.ratio
        );
    }
    eprintln!("written to {} in {:.2?}", path.display(), start.elapsed());
    Ok(())
}

pub fn selftest(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let report = crate::selftest::run(cfg)?;
    let out = Output { cfg, command: "selftest" };
    let path = out.json("selftest.json", &report)?;
    for c in &report.checks {
        let status = if c.skipped { "skip" } else if c.violations == 0 { "ok" } else { "FAIL" };
        eprintln!("{status:>4}  {}: {}", c.name, c.detail);
    }
    println!(
        "selftest: {} checks, {} violations",
        report.checks.len(),
        report.total_violations
    );
    eprintln!("written to {} in {:.2?}", path.display(), start.elapsed());
    if report.total_violations > 0 {
        return Err(Violation(format!("selftest: {} violations", report.total_violations)).into());
    }
    Ok(())
}
