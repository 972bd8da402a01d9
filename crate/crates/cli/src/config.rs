//! Flags, the optional TOML config file, and their merge into a `RunConfig`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use weylm::herglotz::DEFAULT_EPS;
use weylm::ivp::Method;
use weylm::linalg::{c64, Complex64, ComplexVector};
use weylm::weyl::TruncationSchedule;
use weylm::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Report Hermiticity and integrability of a potential and/or boundary operator.
    Validate,
    /// Solve one vector initial value problem and dump the path.
    SolveIvp,
    /// Dump the fundamental system and its Wronskian identity residuals.
    Fundamental,
    /// m-function on a grid of spectral parameters.
    MGrid,
    /// Interval masses of the spectral measure by Stieltjes inversion.
    SpectralMeasure,
    /// Green's kernel dump and resolvent application.
    Green,
    /// Herglotz residual scan and kernel invariance.
    HerglotzCheck,
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Picard,
    RkAdaptive,
    Exact,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Picard => Method::Picard,
            MethodArg::RkAdaptive => Method::RkAdaptive,
            MethodArg::Exact => Method::Exact,
        }
    }
}

/// Every setting is optional here so that flags can override the file.
#[derive(Debug, Default, Clone, Parser, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Potential JSON file.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Boundary operator JSON file (Dirichlet when absent).
    #[arg(long)]
    pub alpha: Option<PathBuf>,
    /// Synthetic Herglotz model JSON, used instead of a potential's m-function.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Real parts: `lo:hi:n` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub z_re: Option<String>,
    /// Imaginary parts: `lo:hi:n` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub z_im: Option<String>,
    /// Truncation caps beyond `a`: `start:limit` (doubling) or a comma list.
    #[arg(long)]
    pub b_schedule: Option<String>,
    /// Convergence tolerance between successive caps.
    #[arg(long)]
    pub m_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Anchor of the initial value problem (defaults to `a`).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Right end of output grids (defaults to the end of the potential grid).
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Output grid step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Initial value, comma-separated complex entries such as `1,0.5-2i`.
    #[arg(long, allow_hyphen_values = true)]
    pub h0: Option<String>,
    /// Initial derivative, same format as `--h0`.
    #[arg(long, allow_hyphen_values = true)]
    pub h1: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_max: Option<f64>,
    /// Number of measure intervals.
    #[arg(long)]
    pub intervals: Option<usize>,
    /// Decreasing ε trail, comma-separated.
    #[arg(long)]
    pub eps: Option<String>,
    /// Right end of the forcing support for `green`.
    #[arg(long)]
    pub support: Option<f64>,
    /// Constant forcing vector on `[a, support]` for `green`.
    #[arg(long, allow_hyphen_values = true)]
    pub rhs: Option<String>,
    /// Kernel dump points per axis for `green`.
    #[arg(long)]
    pub kernel_points: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "weylm", version, about = "Weyl–Titchmarsh m-functions of half-line matrix Schrödinger operators")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

macro_rules! merge {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        Settings { $($field: $flags.$field.or($file.$field),)* }
    };
}

impl Settings {
    fn merged(self, file: Settings) -> Settings {
        merge!(
            self, file, potential, alpha, synthetic, z_re, z_im, b_schedule, m_tol, out, jobs, x0, x_max, step, h0, h1,
            method, lambda_min, lambda_max, intervals, eps, support, rhs, kernel_points
        )
    }
}

pub struct RunConfig {
    pub command: Command,
    pub settings: Settings,
    pub out: PathBuf,
    pub jobs: usize,
    pub m_tol: f64,
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let settings = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let mut file: Settings = toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                // relative paths in the file are relative to the file
                let base = config_dir(path);
                for p in [&mut file.potential, &mut file.alpha, &mut file.synthetic, &mut file.out].into_iter().flatten() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                cli.settings.merged(file)
            }
            None => cli.settings,
        };
        for path in [&settings.potential, &settings.alpha, &settings.synthetic].into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{} does not exist", path.display()),
                )));
            }
        }
        let m_tol = settings.m_tol.unwrap_or(1e-10);
        positive("m-tol", m_tol)?;
        for (name, v) in [("step", settings.step), ("support", settings.support)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        let jobs = settings
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        Ok(Self {
            command: cli.command,
            out: settings.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            settings,
            jobs,
            m_tol,
        })
    }

    pub fn schedule(&self, a: f64) -> Result<TruncationSchedule> {
        match self.settings.b_schedule.as_deref() {
            None => Ok(TruncationSchedule::doubling(a, 10.0, 1310720.0, self.m_tol)),
            Some(spec) => {
                if let Some((start, limit)) = spec.split_once(':') {
                    let (start, limit) = (number(start)?, number(limit)?);
                    positive("b-schedule start", start)?;
                    TruncationSchedule::new(TruncationSchedule::doubling(a, start, limit, self.m_tol).bs, self.m_tol)
                } else {
                    let caps = list(spec, number)?;
                    TruncationSchedule::new(caps.into_iter().map(|b| a + b).collect(), self.m_tol)
                }
            }
        }
    }

    /// Row-major over `(Re z, Im z)`: real part outer, imaginary inner.
    pub fn z_grid(&self) -> Result<Vec<Complex64>> {
        let re = axis(self.settings.z_re.as_deref().unwrap_or("0"))?;
        let im = axis(self.settings.z_im.as_deref().unwrap_or("1"))?;
        Ok(re.iter().flat_map(|&x| im.iter().map(move |&y| c64(x, y))).collect())
    }

    pub fn single_z(&self) -> Result<Complex64> {
        Ok(self.z_grid()?[0])
    }

    pub fn eps(&self) -> Result<Vec<f64>> {
        match self.settings.eps.as_deref() {
            None => Ok(DEFAULT_EPS.to_vec()),
            Some(s) => list(s, number),
        }
    }

    pub fn vector(&self, spec: Option<&str>, dim: usize, default_index: Option<usize>) -> Result<ComplexVector> {
        match spec {
            None => {
                let mut v = ComplexVector::zeros(dim);
                if let Some(i) = default_index {
                    v[i] = c64(1.0, 0.0);
                }
                Ok(v)
            }
            Some(s) => {
                let entries = list(s, |t| {
                    Complex64::from_str(t).map_err(|_| Error::InvalidConfig(format!("bad complex number {t:?}")))
                })?;
                if entries.len() != dim {
                    return Err(Error::DimError {
                        expected: dim,
                        found: entries.len(),
                    });
                }
                Ok(ComplexVector::from_vec(entries))
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
    }
}

fn number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidConfig(format!("bad number {s:?}")))
}

fn list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(|t| item(t.trim())).collect()
}

/// `lo:hi:n` (n points, ends included) or a comma list.
pub fn axis(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (number(lo)?, number(hi)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad point count in {spec:?}")))?;
            match n {
                0 => Err(Error::InvalidConfig(format!("empty range {spec:?}"))),
                1 => Ok(vec![lo]),
                _ => Ok(weylm::quadrature::linspace(lo, hi, n - 1)),
            }
        }
        [_] => list(spec, number),
        _ => Err(Error::InvalidConfig(format!("bad range {spec:?}"))),
    }
}
