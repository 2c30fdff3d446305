//! Run configuration: defaults, flat `key = value` config file, environment, flags.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};

use sphloc::cutoff::Profile;
use sphloc::experiments::TestFunctionKind;

pub const OUT_DIR_ENV: &str = "SPHLOC_OUT";

/// Fully resolved configuration, embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub dim: usize,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub profile: String,
    /// Quadrature grid for the cutoff coefficients.
    pub psi_grid: usize,
    /// Cutoff table half-width `M`.
    pub psi_max_index: usize,
    /// Evaluation grid for partial sums.
    pub grid: usize,
    pub band: usize,
    pub k_max: u32,
    pub n_max: i64,
    pub lambda_list: Vec<f64>,
    pub kind: String,
    pub seed: u64,
    pub samples: usize,
    pub exponents: Vec<u32>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub csv: bool,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            outer_radius: 1.0,
            inner_radius: 0.5,
            profile: Profile::BumpQuotient.name().into(),
            psi_grid: 1024,
            psi_max_index: 256,
            grid: 512,
            band: 128,
            k_max: 50,
            n_max: 75,
            lambda_list: vec![100.0, 400.0, 1600.0, 6400.0, 16384.0],
            kind: TestFunctionKind::SmoothAnnulusBump.name().into(),
            seed: 0,
            samples: 20,
            exponents: vec![0, 2, 4, 6],
            out_dir: PathBuf::from("sphloc-out"),
            threads: 0,
            csv: true,
            quick: false,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow::anyhow!("{key}: cannot parse `{s}`")))
        .collect()
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| anyhow::anyhow!("{key}: cannot parse `{v}`"))
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys match the long flag names;
    /// `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "dim" => self.dim = parse(k, value)?,
            "outer_radius" | "r_outer" => self.outer_radius = parse(k, value)?,
            "inner_radius" | "r_inner" => self.inner_radius = parse(k, value)?,
            "profile" => self.profile = value.trim().into(),
            "psi_grid" => self.psi_grid = parse(k, value)?,
            "psi_max_index" => self.psi_max_index = parse(k, value)?,
            "grid" => self.grid = parse(k, value)?,
            "band" => self.band = parse(k, value)?,
            "kmax" | "k_max" => self.k_max = parse(k, value)?,
            "nmax" | "n_max" => self.n_max = parse(k, value)?,
            "lambdas" | "lambda_list" => self.lambda_list = parse_list(k, value)?,
            "kind" => self.kind = value.trim().into(),
            "seed" => self.seed = parse(k, value)?,
            "samples" => self.samples = parse(k, value)?,
            "exponents" => self.exponents = parse_list(k, value)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "threads" => self.threads = parse(k, value)?,
            "csv" => self.csv = parse(k, value)?,
            "quick" => self.quick = parse(k, value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), i + 1);
            };
            self.set(k, v).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.dim) {
            bail!("dim must be between 1 and 4, got {}", self.dim);
        }
        let (big, small) = (self.outer_radius, self.inner_radius);
        if !(small > 0.0 && small < big && big <= std::f64::consts::PI) {
            bail!("radii must satisfy 0 < r < R <= pi, got R = {big}, r = {small}");
        }
        self.profile()?;
        self.kind()?;
        if self.lambda_list.is_empty() || self.lambda_list.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            bail!("lambdas must be a nonempty list of positive numbers");
        }
        if self.lambda_list.windows(2).any(|w| w[0] > w[1]) {
            bail!("lambdas must be nondecreasing");
        }
        if self.n_max < 0 {
            bail!("nmax must be nonnegative");
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<Profile> {
        Ok(Profile::parse(&self.profile)?)
    }

    pub fn kind(&self) -> Result<TestFunctionKind> {
        Ok(TestFunctionKind::parse(&self.kind)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_and_comments() {
        let dir = std::env::temp_dir().join(format!("sphloc-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "# comment\ndim = 3\nlambdas = 10, 20\nout-dir = x # trailing\n").unwrap();
        let mut c = RunConfig::default();
        c.load_file(&path).unwrap();
        assert_eq!(c.dim, 3);
        assert_eq!(c.lambda_list, vec![10.0, 20.0]);
        assert_eq!(c.out_dir, PathBuf::from("x"));
        std::fs::write(&path, "bogus = 1\n").unwrap();
        assert!(c.load_file(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.inner_radius = 2.0;
        assert!(c.validate().is_err());
        let c = RunConfig {
            lambda_list: vec![10.0, 5.0],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
