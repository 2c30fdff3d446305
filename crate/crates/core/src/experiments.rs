//! Test functions vanishing on a ball, the maximal-inequality ratio and
//! localization curves on the inner ball.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{invalid, Error, Result};
use crate::lattice::open_ball_cap;
use crate::partialsums::{
    ball_nodes, check_vanishing, evaluate_grid, ModeEvaluator, SpectrumFunction, DEFAULT_VANISHING_TOL,
};
use crate::report::{fmt_f64, TOOL_NAME, TOOL_VERSION};
use crate::transform::{node_coords, phase_sign, signed_frequency, GridTransform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionKind {
    /// Gaussian ring `exp(-((|x| - c) / s)^2)` midway between `R` and `pi`.
    SmoothAnnulusBump,
    /// `1 + sum_i cos x_i` times a smooth indicator of `|x| > R`, projected to the band.
    BandLimitedProjection,
    /// A seeded random low-band spectrum times the same indicator, projected to the band.
    RandomSpectrumOffball,
}

impl TestFunctionKind {
    pub fn name(self) -> &'static str {
        match self {
            TestFunctionKind::SmoothAnnulusBump => "smooth-annulus-bump",
            TestFunctionKind::BandLimitedProjection => "band-limited-projection",
            TestFunctionKind::RandomSpectrumOffball => "random-spectrum-offball",
        }
    }

    pub fn parse(s: &str) -> Result<TestFunctionKind> {
        match s {
            "smooth-annulus-bump" | "bump" => Ok(TestFunctionKind::SmoothAnnulusBump),
            "band-limited-projection" | "projection" => Ok(TestFunctionKind::BandLimitedProjection),
            "random-spectrum-offball" | "random" => Ok(TestFunctionKind::RandomSpectrumOffball),
            _ => Err(invalid(format!("unknown test function kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub kind: TestFunctionKind,
    /// The function vanishes on `|x| < outer_radius`.
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub dim: usize,
    /// Spectral cutoff: coefficients kept for `|n_i| <= band`.
    pub band: usize,
    pub seed: u64,
    pub amplitude: f64,
}

impl TestFunctionSpec {
    pub fn new(kind: TestFunctionKind, outer_radius: f64, inner_radius: f64, dim: usize, band: usize) -> Self {
        TestFunctionSpec {
            kind,
            outer_radius,
            inner_radius,
            dim,
            band,
            seed: 0,
            amplitude: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let (big, small) = (self.outer_radius, self.inner_radius);
        if !(small > 0.0 && small < big && big <= PI) {
            return Err(invalid(format!("radii must satisfy 0 < r < R <= pi, got R = {big}, r = {small}")));
        }
        if self.dim == 0 || self.band == 0 {
            return Err(invalid("dimension and band must be positive"));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFunction {
    pub spec: TestFunctionSpec,
    pub function: SpectrumFunction,
    /// Largest `|f|` on verification-grid nodes with `|x| < R`.
    pub ball_residual: f64,
}

/// Band of the random base spectrum used by `random-spectrum-offball`.
pub fn random_base_band(band: usize) -> usize {
    (band / 8).max(1)
}

fn sample_grid(band: usize) -> usize {
    (2 * band + 2).next_power_of_two().max(16)
}

/// Samples `g` on the grid and keeps the coefficients with `|n_i| <= band`.
fn project<F: FnMut(&[f64]) -> f64>(dim: usize, band: usize, mut g: F) -> Result<SpectrumFunction> {
    let grid = sample_grid(band);
    let plan = GridTransform::new(dim, grid);
    let mut x = vec![0.0; dim];
    let mut data: Vec<Complex64> = (0..plan.len())
        .map(|i| {
            node_coords(dim, grid, i, &mut x);
            Complex64::new(g(&x), 0.0)
        })
        .collect();
    plan.forward(&mut data);
    let scale = (grid as f64).powi(-(dim as i32));
    let mut out = SpectrumFunction::zero(dim, band)?;
    let mut idx = vec![0usize; dim];
    let mut n = vec![0i64; dim];
    for (i, v) in data.iter().enumerate() {
        crate::transform::unflatten(dim, grid, i, &mut idx);
        for d in 0..dim {
            n[d] = signed_frequency(idx[d], grid);
        }
        if let Some(j) = out.index(&n) {
            out.coeffs[j] = v * scale * phase_sign(&n);
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Smooth indicator of `|x| > R`: `erfc((R' - |x|) / s) / 2` with
/// `R' = R + 6 s`, `s = 12 / (band - base_band)`.
struct OffBallMask {
    edge: f64,
    width: f64,
}

impl OffBallMask {
    fn new(outer_radius: f64, band: usize, base_band: usize) -> Result<OffBallMask> {
        let room = band.saturating_sub(base_band);
        if room == 0 {
            return Err(invalid("band leaves no room for the off-ball mask"));
        }
        let width = 12.0 / room as f64;
        let edge = outer_radius + 6.0 * width;
        if edge + 6.0 * width >= PI {
            return Err(invalid(format!(
                "band {band} is too small for a smooth indicator outside radius {outer_radius}"
            )));
        }
        Ok(OffBallMask { edge, width })
    }

    fn at(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        0.5 * libm::erfc((self.edge - r) / self.width)
    }
}

/// `P_band(mask * g)` for a base spectrum `g` of smaller band.
pub fn project_off_ball(base: &SpectrumFunction, outer_radius: f64, band: usize) -> Result<SpectrumFunction> {
    if base.band >= band {
        return Err(invalid("base band must be below the target band"));
    }
    let mask = OffBallMask::new(outer_radius, band, base.band)?;
    let grid = sample_grid(band);
    let base_field = evaluate_grid(base, grid)?;
    let mut i = 0usize;
    project(base.dim, band, |x| {
        let v = mask.at(x) * base_field.values[i].re;
        i += 1;
        v
    })
}

pub fn make_test_function(spec: &TestFunctionSpec) -> Result<TestFunction> {
    spec.validate()?;
    let (dim, band) = (spec.dim, spec.band);
    let mut function = if spec.amplitude == 0.0 {
        SpectrumFunction::zero(dim, band)?
    } else {
        match spec.kind {
            TestFunctionKind::SmoothAnnulusBump => {
                let center = 0.5 * (spec.outer_radius + PI);
                let width = (PI - spec.outer_radius) / 12.0;
                project(dim, band, |x| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    (-((r - center) / width).powi(2)).exp()
                })?
            }
            TestFunctionKind::BandLimitedProjection => {
                let mut base = SpectrumFunction::zero(dim, 1)?;
                let origin = vec![0i64; dim];
                let j = base.index(&origin).unwrap();
                base.coeffs[j] = Complex64::new(1.0, 0.0);
                for d in 0..dim {
                    for s in [-1, 1] {
                        let mut e = origin.clone();
                        e[d] = s;
                        let j = base.index(&e).unwrap();
                        base.coeffs[j] = Complex64::new(0.5, 0.0);
                    }
                }
                project_off_ball(&base, spec.outer_radius, band)?
            }
            TestFunctionKind::RandomSpectrumOffball => {
                let base = SpectrumFunction::random(dim, random_base_band(band), spec.seed, true)?;
                project_off_ball(&base, spec.outer_radius, band)?
            }
        }
    };
    if spec.amplitude != 0.0 && spec.amplitude != 1.0 {
        for c in function.coeffs.iter_mut() {
            *c *= spec.amplitude;
        }
    }
    let ball_residual = check_vanishing(&function, spec.outer_radius, DEFAULT_VANISHING_TOL)?;
    Ok(TestFunction {
        spec: spec.clone(),
        function,
        ball_residual,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub grid: usize,
    pub band: usize,
    pub lambda_list: Vec<f64>,
    pub inner_nodes: usize,
    /// `||f||^2 = (2 pi)^N sum |f_n|^2`.
    pub norm_sq: f64,
    pub vanishing_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub lambda: f64,
    /// `sup` over inner nodes of `|S_lambda f|`.
    pub sup_inner: f64,
    /// Inner-ball L2 norm of `S_lambda f`.
    pub l2_inner: f64,
    /// `l2_inner / ||f||`.
    pub ratio: f64,
    /// Inner-ball integral of `(sup_{lambda' <= lambda} |S_lambda' f|)^2`.
    pub maximal_l2_sq: f64,
    /// `maximal_l2_sq / ||f||^2`.
    pub rho: f64,
    pub maximal_sup: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    /// Ratio of the tracked quantity between consecutive rows.
    pub growth_ratios: Vec<Option<f64>>,
    /// Largest `rho` over the tested levels (maximal experiment) or largest `ratio`.
    pub empirical_constant: f64,
    pub note: String,
    /// Wall time; kept out of the serialized report so reruns are byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,sup_inner,l2_inner,ratio,maximal_l2_sq,rho,maximal_sup")?;
        for r in &self.rows {
            let cols = [r.lambda, r.sup_inner, r.l2_inner, r.ratio, r.maximal_l2_sq, r.rho, r.maximal_sup];
            let cols: Vec<String> = cols.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", cols.join(","))?;
        }
        Ok(())
    }
}

fn validate_radii(outer: f64, inner: f64) -> Result<()> {
    if !(inner > 0.0 && inner < outer && outer <= PI) {
        return Err(invalid(format!("radii must satisfy 0 < r < R <= pi, got R = {outer}, r = {inner}")));
    }
    Ok(())
}

/// Scans partial sums on the inner-ball nodes in order of `|n|^2`, recording a row at each level.
fn scan(
    f: &SpectrumFunction,
    outer: f64,
    inner: f64,
    lambda_list: &[f64],
    grid: usize,
) -> Result<(ExperimentConfig, Vec<ExperimentRow>)> {
    validate_radii(outer, inner)?;
    if lambda_list.is_empty() {
        return Err(invalid("lambda list is empty"));
    }
    if !grid.is_power_of_two() || grid < 2 * f.band + 2 {
        return Err(Error::Aliasing { grid, band: f.band });
    }
    let mut caps = Vec::with_capacity(lambda_list.len());
    for &l in lambda_list {
        caps.push(open_ball_cap(l)?);
    }
    if caps.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("lambda list must be nondecreasing"));
    }
    let vanishing_residual = check_vanishing(f, outer, DEFAULT_VANISHING_TOL)?;
    let nodes = ball_nodes(f.dim, grid, inner);
    let eval = ModeEvaluator::at_nodes(f.dim, f.band, grid, &nodes);
    let cell = (2.0 * PI / grid as f64).powi(f.dim as i32);
    let norm_sq = f.norm_sq();
    let norm = norm_sq.sqrt();
    let safe = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

    let mut values = vec![Complex64::new(0.0, 0.0); nodes.len()];
    let mut sup = vec![0.0f64; nodes.len()];
    let levels = f.levels();
    let mut pending = levels.iter().peekable();
    let mut rows = Vec::with_capacity(caps.len());
    for (&lambda, &cap) in lambda_list.iter().zip(&caps) {
        while let Some((&s, modes)) = pending.peek() {
            if s > cap {
                break;
            }
            for (n, c) in modes.iter() {
                eval.add_mode(&mut values, n, *c);
            }
            for (m, v) in sup.iter_mut().zip(&values) {
                *m = m.max(v.norm());
            }
            pending.next();
        }
        let l2_sq: f64 = cell * values.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let maximal_l2_sq: f64 = cell * sup.iter().map(|v| v * v).sum::<f64>();
        rows.push(ExperimentRow {
            lambda,
            sup_inner: values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            l2_inner: l2_sq.sqrt(),
            ratio: safe(l2_sq.sqrt(), norm),
            maximal_l2_sq,
            rho: safe(maximal_l2_sq, norm_sq),
            maximal_sup: sup.iter().copied().fold(0.0, f64::max),
        });
    }
    let config = ExperimentConfig {
        dim: f.dim,
        outer_radius: outer,
        inner_radius: inner,
        grid,
        band: f.band,
        lambda_list: lambda_list.to_vec(),
        inner_nodes: nodes.len(),
        norm_sq,
        vanishing_residual,
    };
    Ok((config, rows))
}

fn growth(values: &[f64]) -> Vec<Option<f64>> {
    values
        .windows(2)
        .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
        .collect()
}

/// `rho(Lambda) = integral_{|x| <= r} |sup_{lambda <= Lambda} S_lambda f|^2 / ||f||^2`
/// for each `Lambda` (nondecreasing), with inner-ball Riemann sums on grid nodes.
pub fn maximal_inequality_ratio(
    f: &SpectrumFunction,
    outer: f64,
    inner: f64,
    lambda_list: &[f64],
    grid: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (config, rows) = scan(f, outer, inner, lambda_list, grid)?;
    let rho: Vec<f64> = rows.iter().map(|r| r.rho).collect();
    Ok(ExperimentReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        experiment: "maximal".into(),
        config,
        growth_ratios: growth(&rho),
        empirical_constant: rho.iter().copied().fold(0.0, f64::max),
        note: "empirical constant is the largest rho over the tested levels; growth thresholds are proxies for boundedness".into(),
        rows,
        runtime: start.elapsed(),
    })
}

/// `sup` and L2 norm of `S_lambda f` on the inner ball for each `lambda`.
pub fn localization_curve(
    f: &SpectrumFunction,
    outer: f64,
    inner: f64,
    lambda_list: &[f64],
    grid: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let (config, rows) = scan(f, outer, inner, lambda_list, grid)?;
    let ratio: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(ExperimentReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        experiment: "localization".into(),
        config,
        growth_ratios: growth(&ratio),
        empirical_constant: ratio.iter().copied().fold(0.0, f64::max),
        note: "curves are descriptive; no convergence rate is implied".into(),
        rows,
        runtime: start.elapsed(),
    })
}

/// Inner-ball L2 norm of `f` itself from its grid realization.
pub fn inner_l2_of_function(f: &SpectrumFunction, inner: f64, grid: usize) -> Result<f64> {
    let field = evaluate_grid(f, grid)?;
    let cell = (2.0 * PI / grid as f64).powi(f.dim as i32);
    let sum: f64 = ball_nodes(f.dim, grid, inner)
        .into_iter()
        .map(|i| field.values[i].norm_sqr())
        .sum();
    Ok((cell * sum).sqrt())
}
