//! One function per subcommand. Each writes its artifacts under `out` and
//! returns the text for stdout, or `Outcome::Failed` when a check it ran did
//! not pass.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use weylm::green::{boundary_residual, kernel_csv, GreenContext};
use weylm::herglotz::{
    herglotz_scan, kernel_invariance, measure_csv, measure_interval, probe_points, HerglotzSampler, MeasureApprox,
    Synthetic,
};
use weylm::ivp::{solve_vector_ivp, Forcing};
use weylm::linalg::ComplexVector;
use weylm::selftest::run_all;
use weylm::weyl::{
    default_config, fundamental_system_with, identity_suite, m_function_trail, m_grid_csv, IDENTITY_LABELS,
};
use weylm::{BoundaryOperator, Complex64, Error, PotentialModel, Result};

use crate::config::{Command, RunConfig};

/// Smallest eigenvalue of `Im M` tolerated by the Herglotz scan.
const HERGLOTZ_TOL: f64 = 1e-10;
const KERNEL_TOL: f64 = 1e-8;
const ANGLE_TOL: f64 = 1e-6;
const PROBE_SEED: u64 = 7;

pub enum Outcome {
    Ok(String),
    Failed(String),
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.command != Command::Selftest {
        fs::create_dir_all(&cfg.out)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| match cfg.command {
        Command::Validate => validate(cfg),
        Command::SolveIvp => solve_ivp(cfg),
        Command::Fundamental => fundamental(cfg),
        Command::MGrid => m_grid(cfg),
        Command::SpectralMeasure => spectral_measure(cfg),
        Command::Green => green(cfg),
        Command::HerglotzCheck => herglotz_check(cfg),
        Command::Selftest => selftest(),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn potential(cfg: &RunConfig) -> Result<PotentialModel> {
    let path = cfg
        .settings
        .potential
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--potential is required".into()))?;
    PotentialModel::from_json(&fs::read(path)?)
}

fn boundary(cfg: &RunConfig, dim: usize) -> Result<BoundaryOperator> {
    let Some(path) = &cfg.settings.alpha else {
        return Ok(BoundaryOperator::dirichlet(dim));
    };
    let bc = BoundaryOperator::from_json(&fs::read(path)?)?;
    if bc.dim() != dim {
        return Err(Error::DimError {
            expected: dim,
            found: bc.dim(),
        });
    }
    Ok(bc)
}

/// The synthetic model when given, the potential's m-function otherwise.
fn sampler(cfg: &RunConfig) -> Result<HerglotzSampler> {
    if let Some(path) = &cfg.settings.synthetic {
        return Ok(HerglotzSampler::synthetic(Synthetic::from_json(&fs::read(path)?)?));
    }
    let v = potential(cfg)?;
    let bc = boundary(cfg, v.dim())?;
    let sched = cfg.schedule(v.a())?;
    Ok(HerglotzSampler::weyl(v, bc, sched))
}

/// Uniform nodes on `[lo, hi]` at spacing at most `step`, merged with `extra`.
fn nodes(lo: f64, hi: f64, step: f64, extra: &[f64]) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::InvalidConfig(format!("empty range [{lo}, {hi}]")));
    }
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let mut xs = weylm::quadrature::linspace(lo, hi, n);
    xs.extend(extra.iter().filter(|&&x| x > lo && x < hi));
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite nodes"));
    xs.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * q.abs().max(1.0));
    Ok(xs)
}

fn x_max(cfg: &RunConfig, v: &PotentialModel) -> f64 {
    cfg.settings.x_max.unwrap_or_else(|| v.b_max())
}

fn require_nonreal(z: Complex64) -> Result<()> {
    if z.im == 0.0 {
        return Err(Error::RealSpectralParameter { z });
    }
    Ok(())
}

#[derive(Serialize)]
struct PotentialSummary {
    dim: usize,
    a: f64,
    b_max: f64,
    nodes: usize,
    max_hermiticity_residual: f64,
    norm_integral: f64,
    all_finite: bool,
}

#[derive(Serialize)]
struct BoundarySummary {
    dim: usize,
    pythagoras: f64,
    commutator: f64,
    spectral_excess: f64,
}

#[derive(Serialize)]
struct ValidateReport {
    potential: Option<PotentialSummary>,
    alpha: Option<BoundarySummary>,
}

fn validate(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.settings.potential.is_none() && cfg.settings.alpha.is_none() {
        return Err(Error::InvalidConfig("validate needs --potential and/or --alpha".into()));
    }
    let v = cfg.settings.potential.as_ref().map(|_| potential(cfg)).transpose()?;
    let potential = v.as_ref().map(|v| {
        let r = v.validate();
        PotentialSummary {
            dim: v.dim(),
            a: v.a(),
            b_max: v.b_max(),
            nodes: v.grid().len(),
            max_hermiticity_residual: r.max_residual,
            norm_integral: r.norm_integral,
            all_finite: r.all_finite,
        }
    });
    let alpha = match &cfg.settings.alpha {
        None => None,
        Some(path) => {
            let bc = BoundaryOperator::from_json(&fs::read(path)?)?;
            if let Some(v) = &v {
                if v.dim() != bc.dim() {
                    return Err(Error::DimError {
                        expected: v.dim(),
                        found: bc.dim(),
                    });
                }
            }
            let r = bc.check();
            Some(BoundarySummary {
                dim: bc.dim(),
                pythagoras: r.pythagoras,
                commutator: r.commutator,
                spectral_excess: r.spectral_excess,
            })
        }
    };
    let report = ValidateReport { potential, alpha };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
    write(&cfg.out, "validate.json", &json)?;
    Ok(Outcome::Ok(json))
}

fn solve_ivp(cfg: &RunConfig) -> Result<Outcome> {
    let v = potential(cfg)?;
    let d = v.dim();
    let z = cfg.single_z()?;
    let x0 = cfg.settings.x0.unwrap_or(v.a());
    let hi = x_max(cfg, &v);
    let grid = nodes(v.a(), hi, cfg.settings.step.unwrap_or(1e-2), &[x0])?;
    let h0 = cfg.vector(cfg.settings.h0.as_deref(), d, Some(0))?;
    let h1 = cfg.vector(cfg.settings.h1.as_deref(), d, None)?;
    let mut ivp_cfg = default_config(&v);
    if let Some(m) = cfg.settings.method {
        ivp_cfg.method = m.into();
    }
    let path = solve_vector_ivp(&v, z, x0, &h0, &h1, &Forcing::Zero, &grid, &ivp_cfg)?;
    write(&cfg.out, "ivp.csv", &path.to_csv())?;
    Ok(Outcome::Ok(format!("solved on {} nodes at z = {z}", grid.len())))
}

fn fundamental(cfg: &RunConfig) -> Result<Outcome> {
    let v = potential(cfg)?;
    let bc = boundary(cfg, v.dim())?;
    let z = cfg.single_z()?;
    require_nonreal(z)?;
    let grid = nodes(v.a(), x_max(cfg, &v), cfg.settings.step.unwrap_or(1e-2), v.grid())?;
    let mut ivp_cfg = default_config(&v);
    if let Some(m) = cfg.settings.method {
        ivp_cfg.method = m.into();
    }
    let fs = fundamental_system_with(&v, &bc, z, &grid, &ivp_cfg)?;
    write(&cfg.out, "theta.csv", &fs.theta.to_csv())?;
    write(&cfg.out, "phi.csv", &fs.phi.to_csv())?;
    let report = identity_suite(&fs, &grid);
    let mut csv = String::from("identity,residual\n");
    for (label, r) in IDENTITY_LABELS.iter().zip(report.residuals) {
        csv.push_str(&format!("{label},{r}\n"));
    }
    csv.push_str(&format!("block inverse left,{}\n", report.block_inverse.0));
    csv.push_str(&format!("block inverse right,{}\n", report.block_inverse.1));
    csv.push_str(&format!("initial conditions,{}\n", fs.initial_condition_residual()));
    write(&cfg.out, "identities.csv", &csv)?;
    Ok(Outcome::Ok(format!(
        "max identity residual {:e} over {} nodes",
        report.max(),
        grid.len()
    )))
}

fn m_grid(cfg: &RunConfig) -> Result<Outcome> {
    let zs = cfg.z_grid()?;
    // reject the whole grid before any work is done
    if let Some(&z) = zs.iter().find(|z| z.im == 0.0) {
        return Err(Error::RealSpectralParameter { z });
    }
    let v = potential(cfg)?;
    let bc = boundary(cfg, v.dim())?;
    let sched = cfg.schedule(v.a())?;
    let samples = zs
        .par_iter()
        .map(|&z| m_function_trail(&v, &bc, z, &sched))
        .collect::<Result<Vec<_>>>()?;
    write(&cfg.out, "m_grid.csv", &m_grid_csv(&samples))?;
    if let Some(s) = samples.iter().find(|s| !s.converged) {
        let (b, delta) = *s.truncations_used.last().expect("nonempty trail");
        return Err(Error::NotConverged { b, delta });
    }
    Ok(Outcome::Ok(format!("{} samples converged", samples.len())))
}

fn spectral_measure(cfg: &RunConfig) -> Result<Outcome> {
    let m = sampler(cfg)?;
    let lo = cfg.settings.lambda_min.unwrap_or(0.0);
    let hi = cfg.settings.lambda_max.unwrap_or(1.0);
    let n = cfg.settings.intervals.unwrap_or(4);
    if !(hi > lo) || n == 0 {
        return Err(Error::InvalidConfig("need lambda-min < lambda-max and intervals ≥ 1".into()));
    }
    let eps = cfg.eps()?;
    let breakpoints = weylm::quadrature::linspace(lo, hi, n);
    let pieces = breakpoints
        .par_windows(2)
        .map(|w| measure_interval(&m, w[0], w[1], &eps))
        .collect::<Result<Vec<_>>>()?;
    let measure = MeasureApprox::from_pieces(&breakpoints, pieces);
    write(&cfg.out, "measure.csv", &measure_csv(&measure))?;
    let total = measure.total().expect("at least one interval");
    Ok(Outcome::Ok(format!(
        "{n} intervals on ({lo}, {hi}], trace of total mass {}",
        total.trace().re
    )))
}

/// Constant `rhs` on `[a, support]`, zero beyond; the support end is repeated
/// so that the jump is carried by the grid.
fn forcing(v: &PotentialModel, rhs: &ComplexVector, support: f64, hi: f64, step: f64) -> Result<(Vec<f64>, Vec<ComplexVector>)> {
    let a = v.a();
    let zero = ComplexVector::zeros(v.dim());
    if support >= hi {
        let grid = nodes(a, hi, step, v.grid())?;
        let f = vec![rhs.clone(); grid.len()];
        return Ok((grid, f));
    }
    let left = nodes(a, support, step, v.grid())?;
    let right = nodes(support, hi, step, v.grid())?;
    let mut f = vec![rhs.clone(); left.len()];
    f.extend(std::iter::repeat_n(zero, right.len()));
    let grid = left.into_iter().chain(right).collect();
    Ok((grid, f))
}

fn green(cfg: &RunConfig) -> Result<Outcome> {
    let v = potential(cfg)?;
    let bc = boundary(cfg, v.dim())?;
    let z = cfg.single_z()?;
    require_nonreal(z)?;
    let sched = cfg.schedule(v.a())?;
    let a = v.a();
    let support = cfg.settings.support.unwrap_or(1.0);
    let hi = cfg.settings.x_max.unwrap_or(a + 2.0 * support);
    let ctx = GreenContext::new(&v, &bc, z, &sched)?;

    let k = cfg.settings.kernel_points.unwrap_or(11).max(2);
    let xs = weylm::quadrature::linspace(a, hi, k - 1);
    let fs = ctx.system(&xs)?;
    let evals: Vec<_> = (0..fs.grid().len())
        .flat_map(|i| (0..fs.grid().len()).map(move |j| (i, j)))
        .map(|(i, j)| ctx.kernel_at(&fs, i, j))
        .collect();
    write(&cfg.out, "kernel.csv", &kernel_csv(&evals))?;

    let rhs = cfg.vector(cfg.settings.rhs.as_deref(), v.dim(), Some(0))?;
    let (grid, f) = forcing(&v, &rhs, a + support, hi, cfg.settings.step.unwrap_or(1e-2))?;
    let u = ctx.apply(&f, &grid)?;
    write(&cfg.out, "resolvent.csv", &u.to_csv())?;
    Ok(Outcome::Ok(format!(
        "kernel on {k}×{k} nodes, resolvent on {} nodes, boundary residual {:e}",
        grid.len(),
        boundary_residual(&u, &bc)
    )))
}

fn herglotz_check(cfg: &RunConfig) -> Result<Outcome> {
    let m = sampler(cfg)?;
    let probes = if cfg.settings.z_re.is_some() || cfg.settings.z_im.is_some() {
        cfg.z_grid()?
    } else {
        probe_points(100, PROBE_SEED)
    };
    if let Some(&z) = probes.iter().find(|z| !(z.im > 0.0)) {
        return Err(Error::RealSpectralParameter { z });
    }
    let rows = probes
        .par_iter()
        .map(|&z| Ok((z, herglotz_scan(&m, &[z])?)))
        .collect::<Result<Vec<(Complex64, f64)>>>()?;
    let mut csv = String::from("re_z,im_z,min_eig_im_m\n");
    for (z, e) in &rows {
        csv.push_str(&format!("{},{},{e}\n", z.re, z.im));
    }
    write(&cfg.out, "herglotz.csv", &csv)?;
    let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let kernel = kernel_invariance(&m, &probes, KERNEL_TOL, ANGLE_TOL)?;
    let dims: Vec<usize> = kernel.probes.iter().map(|p| p.kernel_dim).collect();
    let summary = format!(
        "smallest eigenvalue of Im M {min:e} over {} probes; kernel dimensions {}..={}, max angle {:e}, {}",
        rows.len(),
        dims.iter().min().expect("probes"),
        dims.iter().max().expect("probes"),
        kernel.max_angle,
        if kernel.consistent { "invariant" } else { "not invariant" }
    );
    if min < -HERGLOTZ_TOL || !kernel.consistent {
        return Ok(Outcome::Failed(summary));
    }
    Ok(Outcome::Ok(summary))
}

fn selftest() -> Result<Outcome> {
    let results = run_all();
    let text = results.iter().map(|r| r.line()).collect::<Vec<_>>().join("\n");
    if results.iter().all(|r| r.passed) {
        Ok(Outcome::Ok(text))
    } else {
        Ok(Outcome::Failed(text))
    }
}
