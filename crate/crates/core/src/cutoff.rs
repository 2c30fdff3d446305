//! The smooth radial cutoff and its Fourier coefficient table.
//!
//! With transition radii `a = (R - r) / 3` and `b = 2 (R - r) / 3`, the profile
//! `phi1` equals 1 on `[0, a]`, 0 on `[b, inf)` and decreases in between;
//! `phi2 = 1 - phi1`. The cutoff `psi(x) = phi2(|x|)` on `[-pi, pi)^N` is
//! extended periodically in every coordinate. It vanishes near the origin
//! and equals 1 near the cell boundary, so the periodic extension is smooth.
//!
//! Coefficients use `psi_m = (2 pi)^-N * integral psi(x) e^{-i m.x} dx`,
//! approximated by the uniform-grid sum, which is spectrally accurate for a
//! smooth periodic integrand.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::transform::{self, GridTransform};

/// Coefficients below this magnitude are at the double-precision quadrature floor.
pub const NOISE_FLOOR: f64 = 1e-14;

/// Shape of the transition between the two radii.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `g(s) = h(s) / (h(s) + h(1 - s))` with `h(s) = exp(-1/s)`; infinitely smooth.
    BumpQuotient,
    /// Quintic `6 s^5 - 15 s^4 + 10 s^3`; twice continuously differentiable.
    Smootherstep,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::BumpQuotient => "bump",
            Profile::Smootherstep => "smootherstep",
        }
    }

    pub fn parse(s: &str) -> Result<Profile> {
        match s {
            "bump" | "bump-quotient" => Ok(Profile::BumpQuotient),
            "smootherstep" | "poly" => Ok(Profile::Smootherstep),
            other => Err(invalid(format!("unknown cutoff profile '{other}'"))),
        }
    }

    fn code(self) -> u8 {
        match self {
            Profile::BumpQuotient => 0,
            Profile::Smootherstep => 1,
        }
    }

    fn from_code(c: u8) -> Result<Profile> {
        match c {
            0 => Ok(Profile::BumpQuotient),
            1 => Ok(Profile::Smootherstep),
            _ => Err(Error::Format(format!("unknown profile code {c}"))),
        }
    }

    /// Rising step on `[0, 1]`: 0 at `s <= 0`, 1 at `s >= 1`.
    pub fn step(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            Profile::BumpQuotient => {
                let h = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
                let (u, v) = (h(s), h(1.0 - s));
                u / (u + v)
            }
            Profile::Smootherstep => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub dim: usize,
    pub profile: Profile,
}

pub fn make_cutoff(outer_radius: f64, inner_radius: f64, dim: usize, profile: Profile) -> Result<CutoffSpec> {
    if !(outer_radius.is_finite() && inner_radius.is_finite()) {
        return Err(invalid("radii must be finite"));
    }
    if inner_radius <= 0.0 {
        return Err(invalid(format!("inner radius must be positive, got {inner_radius}")));
    }
    if inner_radius >= outer_radius {
        return Err(invalid(format!(
            "inner radius {inner_radius} must be below outer radius {outer_radius}"
        )));
    }
    if outer_radius > PI {
        return Err(invalid(format!("outer radius {outer_radius} exceeds pi")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    Ok(CutoffSpec {
        outer_radius,
        inner_radius,
        dim,
        profile,
    })
}

impl CutoffSpec {
    /// `a = (R - r) / 3`.
    pub fn plateau_end(&self) -> f64 {
        (self.outer_radius - self.inner_radius) / 3.0
    }

    /// `b = 2 (R - r) / 3`.
    pub fn transition_end(&self) -> f64 {
        2.0 * (self.outer_radius - self.inner_radius) / 3.0
    }

    pub fn phi1(&self, t: f64) -> f64 {
        let (a, b) = (self.plateau_end(), self.transition_end());
        1.0 - self.profile.step((t - a) / (b - a))
    }

    pub fn phi2(&self, t: f64) -> f64 {
        let (a, b) = (self.plateau_end(), self.transition_end());
        self.profile.step((t - a) / (b - a))
    }

    /// `psi(x)` after wrapping every coordinate into `[-pi, pi)`.
    pub fn psi(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|&c| wrap(c).powi(2)).sum();
        self.phi2(r2.sqrt())
    }
}

pub(crate) fn wrap(x: f64) -> f64 {
    x - 2.0 * PI * ((x + PI) / (2.0 * PI)).floor()
}

/// `psi_m` for `|m_i| <= max_index`, stored densely in lexicographic order of `m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiCoefficients {
    pub spec: CutoffSpec,
    pub max_index: usize,
    pub grid: usize,
    pub values: Vec<Complex64>,
    /// `(2 pi / G)^N sum_x psi(x)^2` over the quadrature grid.
    pub grid_norm_sq: f64,
}

pub fn psi_coefficients(spec: &CutoffSpec, grid: usize, max_index: usize) -> Result<PsiCoefficients> {
    if !grid.is_multiple_of(2) || grid < 4 * max_index || grid == 0 {
        return Err(Error::Undersampled { grid, max_index });
    }
    let dim = spec.dim;
    let total = grid
        .checked_pow(dim as u32)
        .filter(|&t| t <= 1 << 28)
        .ok_or_else(|| invalid(format!("grid {grid}^{dim} is too large")))?;
    let samples: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |x, flat| {
                transform::node_coords(dim, grid, flat, x);
                spec.psi(x)
            },
        )
        .collect();
    let cell = (2.0 * PI / grid as f64).powi(dim as i32);
    let grid_norm_sq = samples.iter().map(|v| v * v).sum::<f64>() * cell;

    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    GridTransform::new(dim, grid).forward(&mut data);
    let scale = 1.0 / total as f64;

    let side = 2 * max_index + 1;
    let count = side.pow(dim as u32);
    let mut values = Vec::with_capacity(count);
    let mut m = vec![0i64; dim];
    let mut slot = vec![0usize; dim];
    for idx in 0..count {
        offset_of(idx, dim, max_index, &mut m);
        for d in 0..dim {
            slot[d] = transform::wrap_index(m[d], grid);
        }
        let v = data[transform::flatten(grid, &slot)] * (scale * transform::phase_sign(&m));
        values.push(v);
    }
    let table = PsiCoefficients {
        spec: *spec,
        max_index,
        grid,
        values,
        grid_norm_sq,
    };
    let edge = table.edge_envelope();
    if edge < NOISE_FLOOR {
        log::warn!(
            "psi table edge |psi_m| = {edge:e} is below the quadrature noise floor; decay fits are truncated"
        );
    }
    Ok(table)
}

fn offset_of(mut idx: usize, dim: usize, max_index: usize, out: &mut [i64]) {
    let side = 2 * max_index + 1;
    for d in (0..dim).rev() {
        out[d] = (idx % side) as i64 - max_index as i64;
        idx /= side;
    }
}

impl PsiCoefficients {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn index(&self, m: &[i64]) -> Option<usize> {
        let big = self.max_index as i64;
        let side = 2 * big + 1;
        let mut idx = 0i64;
        for &c in m {
            if c.abs() > big {
                return None;
            }
            idx = idx * side + c + big;
        }
        Some(idx as usize)
    }

    /// `psi_m`, or `None` outside the table.
    pub fn get(&self, m: &[i64]) -> Option<Complex64> {
        self.index(m).map(|i| self.values[i])
    }

    /// Real part of `psi_m` (psi is real and even); `None` outside the table.
    pub fn real(&self, m: &[i64]) -> Option<f64> {
        self.index(m).map(|i| self.values[i].re)
    }

    pub fn covers(&self, m: &[i64]) -> bool {
        m.iter().all(|c| c.unsigned_abs() as usize <= self.max_index)
    }

    /// Iterates `(m, psi_m)` in table order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, Complex64)> + '_ {
        let dim = self.dim();
        self.values.iter().enumerate().map(move |(i, v)| {
            let mut m = vec![0i64; dim];
            offset_of(i, dim, self.max_index, &mut m);
            (m, *v)
        })
    }

    pub fn sum(&self) -> Complex64 {
        self.values.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum()
    }

    /// `(2 pi)^N sum |psi_m|^2` over the table.
    pub fn parseval_norm_sq(&self) -> f64 {
        (2.0 * PI).powi(self.dim() as i32) * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Largest `|psi_m|` on the outer face `max_i |m_i| = max_index`.
    pub fn edge_envelope(&self) -> f64 {
        let big = self.max_index as i64;
        self.iter()
            .filter(|(m, _)| m.iter().any(|c| c.abs() == big))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.dim();
        let header: Vec<String> = (1..=dim).map(|i| format!("m_{i}")).collect();
        writeln!(w, "{},re,im", header.join(","))?;
        for (m, v) in self.iter() {
            let coords: Vec<String> = m.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{}", coords.join(","), crate::report::fmt_f64(v.re), crate::report::fmt_f64(v.im))?;
        }
        Ok(())
    }

    /// Binary cache: magic, version, then little-endian header and values.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        for v in [self.dim() as u32, self.max_index as u32, self.grid as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&[self.spec.profile.code()])?;
        for v in [self.spec.outer_radius, self.spec.inner_radius, self.grid_norm_sq] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<PsiCoefficients> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!("unsupported cache version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let max_index = read_u32(&mut r)? as usize;
        let grid = read_u32(&mut r)? as usize;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let profile = Profile::from_code(code[0])?;
        let outer = read_f64(&mut r)?;
        let inner = read_f64(&mut r)?;
        let grid_norm_sq = read_f64(&mut r)?;
        let spec = make_cutoff(outer, inner, dim, profile)?;
        let count = (2 * max_index + 1).pow(dim as u32);
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            values.push(Complex64::new(re, im));
        }
        Ok(PsiCoefficients {
            spec,
            max_index,
            grid,
            values,
            grid_norm_sq,
        })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"SPHLPSI\0";
const CACHE_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayEntry {
    pub exponent: u32,
    /// `max |psi_m| (1 + |m|)^j` over unflagged entries.
    pub constant: f64,
    pub argmax: Vec<i64>,
    pub argmax_norm: f64,
    /// The maximum sits on the outer face of the table.
    pub at_edge: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub max_index: usize,
    pub grid: usize,
    pub entries: Vec<DecayEntry>,
    /// Smallest integer radius from which every radial envelope value is
    /// below [`NOISE_FLOOR`]; `None` if the table never reaches the floor.
    pub noise_floor_radius: Option<usize>,
    pub flagged: usize,
}

impl DecayFitReport {
    pub fn entry(&self, exponent: u32) -> Option<&DecayEntry> {
        self.entries.iter().find(|e| e.exponent == exponent)
    }
}

pub fn verify_psi_decay(table: &PsiCoefficients, exponents: &[u32]) -> DecayFitReport {
    let big = table.max_index as i64;
    let mut flagged = 0;
    let mut envelope: Vec<f64> = Vec::new();
    let mut entries: Vec<DecayEntry> = exponents
        .iter()
        .map(|&j| DecayEntry {
            exponent: j,
            constant: 0.0,
            argmax: vec![0; table.dim()],
            argmax_norm: 0.0,
            at_edge: false,
        })
        .collect();
    for (m, v) in table.iter() {
        let mag = v.norm();
        let norm = (m.iter().map(|c| c * c).sum::<i64>() as f64).sqrt();
        let shell = norm.floor() as usize;
        if envelope.len() <= shell {
            envelope.resize(shell + 1, 0.0);
        }
        envelope[shell] = envelope[shell].max(mag);
        if mag < NOISE_FLOOR {
            flagged += 1;
            continue;
        }
        for e in entries.iter_mut() {
            let w = mag * (1.0 + norm).powi(e.exponent as i32);
            if w > e.constant {
                e.constant = w;
                e.argmax = m.clone();
                e.argmax_norm = norm;
                e.at_edge = m.iter().any(|c| c.abs() == big);
            }
        }
    }
    let noise_floor_radius = envelope
        .iter()
        .rposition(|&e| e >= NOISE_FLOOR)
        .map(|last| last + 1)
        .filter(|&r| r < envelope.len());
    DecayFitReport {
        max_index: table.max_index,
        grid: table.grid,
        entries,
        noise_floor_radius,
        flagged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spec() -> CutoffSpec {
        make_cutoff(1.0, 0.5, 2, Profile::BumpQuotient).unwrap()
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(make_cutoff(1.0, 1.0, 2, Profile::BumpQuotient).is_err());
        assert!(make_cutoff(1.0, 1.5, 2, Profile::BumpQuotient).is_err());
        assert!(make_cutoff(3.5, 0.5, 2, Profile::BumpQuotient).is_err());
        assert!(make_cutoff(1.0, 0.0, 2, Profile::BumpQuotient).is_err());
        assert!(make_cutoff(1.0, -0.1, 2, Profile::BumpQuotient).is_err());
    }

    #[test]
    fn profile_shape() {
        let s = default_spec();
        let (a, b) = (s.plateau_end(), s.transition_end());
        assert_eq!(s.psi(&[0.0, 0.0]), 0.0);
        assert_eq!(s.phi1(a), 1.0);
        assert_eq!(s.phi1(b), 0.0);
        let mid = s.phi1(0.5 * (a + b));
        assert!(mid > 0.0 && mid < 1.0);
        assert_eq!(s.psi(&[PI, 0.0]), 1.0);
        assert_eq!(s.psi(&[-PI * 0.6, PI * 0.8]), 1.0);
        let mut prev = 1.0;
        for i in 0..=200 {
            let t = i as f64 / 200.0 * 0.5;
            let v = s.phi1(t);
            assert!(v <= prev);
            prev = v;
        }
        let p = make_cutoff(1.0, 0.5, 2, Profile::Smootherstep).unwrap();
        assert!((p.phi2(0.5 * (a + b)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psi_is_even_and_periodic() {
        let s = make_cutoff(2.0, 0.4, 3, Profile::BumpQuotient).unwrap();
        for i in 0..50 {
            let x = [0.03 * i as f64, -0.7 + 0.011 * i as f64, 0.5 - 0.02 * i as f64];
            let v = s.psi(&x);
            let neg: Vec<f64> = x.iter().map(|c| -c).collect();
            assert_eq!(v, s.psi(&neg));
            for axis in 0..3 {
                let mut y = x;
                y[axis] += 2.0 * PI;
                assert!((v - s.psi(&y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_undersampled_grid() {
        let s = default_spec();
        assert!(matches!(psi_coefficients(&s, 100, 32), Err(Error::Undersampled { .. })));
        assert!(matches!(psi_coefficients(&s, 129, 16), Err(Error::Undersampled { .. })));
    }

    #[test]
    fn table_symmetries() {
        let t = psi_coefficients(&default_spec(), 128, 24).unwrap();
        for (m, v) in t.iter() {
            let neg: Vec<i64> = m.iter().map(|c| -c).collect();
            assert!((t.get(&neg).unwrap() - v.conj()).norm() < 1e-15);
            assert!(v.im.abs() < 1e-15);
            let swapped = [m[1], m[0]];
            assert!((t.get(&swapped).unwrap() - v).norm() < 1e-15);
        }
    }

    #[test]
    fn mean_value_matches_finer_quadrature() {
        let s = default_spec();
        let coarse = psi_coefficients(&s, 512, 64).unwrap();
        let fine = psi_coefficients(&s, 1024, 64).unwrap();
        let c0 = coarse.real(&[0, 0]).unwrap();
        assert!(c0 > 0.0 && c0 < 1.0);
        assert!((c0 - fine.real(&[0, 0]).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn cache_roundtrip() {
        let t = psi_coefficients(&default_spec(), 64, 8).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        let back = PsiCoefficients::read_cache(&buf[..]).unwrap();
        assert_eq!(back.values, t.values);
        assert_eq!(back.spec, t.spec);
        assert!(PsiCoefficients::read_cache(&buf[1..]).is_err());
    }

    #[test]
    fn decay_report_basics() {
        let t = psi_coefficients(&default_spec(), 256, 32).unwrap();
        let r = verify_psi_decay(&t, &[0, 4]);
        let c0 = r.entry(0).unwrap();
        assert_eq!(c0.argmax, vec![0, 0]);
        assert!((c0.constant - t.real(&[0, 0]).unwrap()).abs() < 1e-15);
        assert!(r.entry(4).unwrap().constant.is_finite());
    }
}
