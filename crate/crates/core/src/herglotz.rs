//! Nevanlinna data of matrix Herglotz functions: the constant and linear
//! terms, Stieltjes inversion, point masses, kernel invariance,
//! reconstruction and Hilbert-transform boundary values.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, im_part, op_norm, principal_sqrt, re_part, singular_values, BoundaryOperator, Complex64,
    ComplexMatrix, ComplexVector, HermitianMatrix, MatrixEntries, I,
};
use crate::potential::PotentialModel;
use crate::quadrature::{adaptive_simpson, extrapolate_to_zero, simpson};
use crate::weyl::{herglotz_residual, m_function, TruncationSchedule};

/// Default `ε` trail for boundary limits.
pub const DEFAULT_EPS: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
/// Default `η` trail for the linear term.
pub const DEFAULT_ETA: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];
/// Negative eigenvalues of a mass above `-MASS_TOL` are clipped to zero.
pub const MASS_TOL: f64 = 1e-6;

type Evaluator = dyn Fn(Complex64) -> Result<ComplexMatrix> + Send + Sync;

/// A matrix function on the upper half-plane, extended to the lower one by
/// `M(z) = M(z̄)*`, with memoised evaluations.
pub struct HerglotzSampler {
    dim: usize,
    evaluator: Box<Evaluator>,
    cache: RwLock<HashMap<(u64, u64), ComplexMatrix>>,
}

impl HerglotzSampler {
    pub fn new(dim: usize, evaluator: impl Fn(Complex64) -> Result<ComplexMatrix> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            evaluator: Box::new(evaluator),
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// The m-function of `v` under `bc`.
    pub fn weyl(v: PotentialModel, bc: BoundaryOperator, sched: TruncationSchedule) -> Self {
        let dim = v.dim();
        Self::new(dim, move |z| Ok(m_function(&v, &bc, z, &sched)?.m))
    }

    pub fn synthetic(model: Synthetic) -> Self {
        Self::new(model.dim(), move |z| Ok(model.eval(z)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn eval(&self, z: Complex64) -> Result<ComplexMatrix> {
        if z.im == 0.0 || !z.is_finite() {
            return Err(Error::RealSpectralParameter { z });
        }
        if z.im < 0.0 {
            return Ok(self.eval(z.conj())?.adjoint());
        }
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(m) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let m = (self.evaluator)(z)?;
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimError {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        self.cache.write().expect("cache lock").insert(key, m.clone());
        Ok(m)
    }

    /// `Im M(z)` as a Hermitian matrix.
    pub fn imag(&self, z: Complex64) -> Result<HermitianMatrix> {
        HermitianMatrix::new(im_part(&self.eval(z)?))
    }
}

/// Closed-form Herglotz functions used as test samplers.
#[derive(Debug, Clone)]
pub enum Synthetic {
    /// `(λ₀ − z)⁻¹ P`.
    Pole { lambda0: f64, weight: HermitianMatrix },
    Constant(ComplexMatrix),
    /// `C + D z`.
    Linear { c: HermitianMatrix, d: HermitianMatrix },
    /// `i√z` (Dirichlet) or `i/√z` (Neumann) times the identity.
    Free { dim: usize, neumann: bool },
    /// `2(√(z−1)√(z+1) − z) P`, density `(2/π)√(1−t²) P` on `[−1, 1]`.
    Semicircle { weight: HermitianMatrix },
    /// Block-diagonal sum of models.
    Diagonal(Vec<Synthetic>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeBoundary {
    #[default]
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SyntheticSpec {
    Pole {
        dim: usize,
        lambda0: f64,
        weight: MatrixEntries,
    },
    Constant {
        dim: usize,
        value: MatrixEntries,
    },
    Linear {
        dim: usize,
        c: MatrixEntries,
        d: MatrixEntries,
    },
    Free {
        dim: usize,
        #[serde(default)]
        boundary: FreeBoundary,
    },
    Semicircle {
        dim: usize,
        #[serde(default)]
        weight: Option<MatrixEntries>,
    },
    Diagonal {
        blocks: Vec<SyntheticSpec>,
    },
}

fn psd(m: ComplexMatrix) -> Result<HermitianMatrix> {
    let h = HermitianMatrix::new(m)?;
    if h.smallest_eigenvalue() < -MASS_TOL {
        return Err(Error::NegativeMass {
            min_eigenvalue: h.smallest_eigenvalue(),
        });
    }
    Ok(h)
}

impl SyntheticSpec {
    pub fn build(self) -> Result<Synthetic> {
        Ok(match self {
            SyntheticSpec::Pole { dim, lambda0, weight } => Synthetic::Pole {
                lambda0,
                weight: psd(weight.into_matrix(dim)?)?,
            },
            SyntheticSpec::Constant { dim, value } => {
                let value = value.into_matrix(dim)?;
                psd(im_part(&value))?;
                Synthetic::Constant(value)
            }
            SyntheticSpec::Linear { dim, c, d } => Synthetic::Linear {
                c: HermitianMatrix::new(c.into_matrix(dim)?)?,
                d: psd(d.into_matrix(dim)?)?,
            },
            SyntheticSpec::Free { dim, boundary } => Synthetic::Free {
                dim,
                neumann: boundary == FreeBoundary::Neumann,
            },
            SyntheticSpec::Semicircle { dim, weight } => Synthetic::Semicircle {
                weight: match weight {
                    Some(w) => psd(w.into_matrix(dim)?)?,
                    None => HermitianMatrix::identity(dim),
                },
            },
            SyntheticSpec::Diagonal { blocks } => {
                if blocks.is_empty() {
                    return Err(Error::InvalidConfig("diagonal model needs at least one block".into()));
                }
                Synthetic::Diagonal(blocks.into_iter().map(SyntheticSpec::build).collect::<Result<_>>()?)
            }
        })
    }
}

impl Synthetic {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice::<SyntheticSpec>(bytes)?.build()
    }

    pub fn dim(&self) -> usize {
        match self {
            Synthetic::Pole { weight, .. } | Synthetic::Semicircle { weight } => weight.dim(),
            Synthetic::Constant(m) => m.nrows(),
            Synthetic::Linear { c, .. } => c.dim(),
            Synthetic::Free { dim, .. } => *dim,
            Synthetic::Diagonal(blocks) => blocks.iter().map(Synthetic::dim).sum(),
        }
    }

    /// Value at `z` in the upper half-plane.
    pub fn eval(&self, z: Complex64) -> ComplexMatrix {
        match self {
            Synthetic::Pole { lambda0, weight } => weight.matrix() / (c64(*lambda0, 0.0) - z),
            Synthetic::Constant(m) => m.clone(),
            Synthetic::Linear { c, d } => c.matrix() + d.matrix() * z,
            Synthetic::Free { dim, neumann } => {
                let k = principal_sqrt(z);
                identity(*dim) * if *neumann { I / k } else { I * k }
            }
            Synthetic::Semicircle { weight } => {
                let s = principal_sqrt(z - 1.0) * principal_sqrt(z + 1.0);
                weight.matrix() * (2.0 * (s - z))
            }
            Synthetic::Diagonal(blocks) => {
                let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
                let mut at = 0;
                for b in blocks {
                    let n = b.dim();
                    out.view_mut((at, at), (n, n)).copy_from(&b.eval(z));
                    at += n;
                }
                out
            }
        }
    }
}

/// Rejects trails that are not finite or whose successive differences
/// do not shrink.
fn check_trail(values: &[ComplexMatrix], what: &str) -> Result<()> {
    if values.iter().any(|v| !crate::linalg::is_finite(v)) {
        return Err(Error::NonDecayingTrail(format!("{what}: non-finite samples")));
    }
    if values.len() < 3 {
        return Ok(());
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| op_norm(&(&w[1] - &w[0]))).collect();
    let scale = values.iter().map(op_norm).fold(0.0, f64::max);
    let (first, last) = (diffs[0], diffs[diffs.len() - 1]);
    if last > first * (1.0 + 1e-6) + 1e-12 * scale.max(1.0) {
        return Err(Error::NonDecayingTrail(format!(
            "{what}: step differences grow from {first:e} to {last:e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct MeasureApprox {
    pub intervals: Vec<(f64, f64)>,
    pub masses: Vec<HermitianMatrix>,
    /// Per interval, the `(ε, mass)` samples that were extrapolated.
    pub epsilon_trail: Vec<Vec<(f64, ComplexMatrix)>>,
}

impl MeasureApprox {
    /// Assembles interval results computed for `breakpoints` in order.
    pub fn from_pieces(breakpoints: &[f64], pieces: Vec<IntervalMass>) -> Self {
        let mut out = Self::default();
        for (w, piece) in breakpoints.windows(2).zip(pieces) {
            out.intervals.push((w[0], w[1]));
            out.masses.push(piece.mass);
            out.epsilon_trail.push(piece.trail);
        }
        out
    }

    pub fn total(&self) -> Option<ComplexMatrix> {
        let mut it = self.masses.iter();
        let first = it.next()?.matrix().clone();
        Some(it.fold(first, |acc, m| acc + m.matrix()))
    }

    /// `Σ mass / (1 + λ̄²)` with `λ̄` the interval midpoints.
    pub fn weighted_total(&self, dim: usize) -> ComplexMatrix {
        self.intervals
            .iter()
            .zip(&self.masses)
            .fold(ComplexMatrix::zeros(dim, dim), |acc, (&(l1, l2), m)| {
                let mid = 0.5 * (l1 + l2);
                acc + m.matrix() / c64(1.0 + mid * mid, 0.0)
            })
    }
}

#[derive(Debug, Clone)]
pub struct NevanlinnaData {
    pub c: HermitianMatrix,
    pub d: HermitianMatrix,
    /// `Im M(i)`: the budget `D + ∫ dΩ/(1+λ²)` the measure must fill.
    pub im_at_i: HermitianMatrix,
    pub measure: MeasureApprox,
}

/// `C = Re M(i)` and `D = lim M(iη)/(iη)`, the limit taken from the two
/// largest `η` of the schedule.
pub fn nevanlinna_constants(m: &HerglotzSampler, eta_schedule: &[f64]) -> Result<NevanlinnaData> {
    if eta_schedule.len() < 2 || eta_schedule.windows(2).any(|w| !(w[1] > w[0])) || !(eta_schedule[0] > 0.0) {
        return Err(Error::InvalidConfig("eta schedule must be positive and increasing".into()));
    }
    let at_i = m.eval(I)?;
    let ratios: Vec<ComplexMatrix> = eta_schedule
        .iter()
        .map(|&eta| Ok(m.eval(c64(0.0, eta))? / c64(0.0, eta)))
        .collect::<Result<_>>()?;
    if check_trail(&ratios, "linear term").is_err() {
        return Err(Error::DivergentLinearTerm);
    }
    let n = ratios.len();
    let hs = [1.0 / eta_schedule[n - 2], 1.0 / eta_schedule[n - 1]];
    let d = extrapolate_to_zero(&hs, &ratios[n - 2..]);
    Ok(NevanlinnaData {
        c: HermitianMatrix::new(re_part(&at_i))?,
        d: HermitianMatrix::new(re_part(&d))?.psd_repair(MASS_TOL)?,
        im_at_i: HermitianMatrix::new(im_part(&at_i))?,
        measure: MeasureApprox::default(),
    })
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) || !(eps[eps.len() - 1] > 0.0) {
        return Err(Error::InvalidConfig("eps schedule must be positive and decreasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IntervalMass {
    pub mass: HermitianMatrix,
    pub trail: Vec<(f64, ComplexMatrix)>,
}

/// Mass of `(λ1, λ2]`: `(1/π)∫ Im M(λ+iε) dλ` over the interval shifted by
/// `ε`, extrapolated to `ε = 0`.
pub fn stieltjes_interval(m: &HerglotzSampler, l1: f64, l2: f64, eps: &[f64]) -> Result<IntervalMass> {
    if !(l1 < l2) {
        return Err(Error::InvalidConfig(format!("empty interval ({l1}, {l2}]")));
    }
    check_eps(eps)?;
    let mut trail = Vec::with_capacity(eps.len());
    for &e in eps {
        let f = |l: f64| -> Result<ComplexMatrix> { Ok(im_part(&m.eval(c64(l, e))?) / c64(std::f64::consts::PI, 0.0)) };
        let panels = ((l2 - l1) / (20.0 * e)).ceil().clamp(8.0, 4000.0) as usize;
        trail.push(adaptive_simpson(&f, l1 + e, l2 + e, panels, 1e-10, 40)?);
    }
    check_trail(&trail, "stieltjes")?;
    let mass = HermitianMatrix::new(re_part(&extrapolate_to_zero(eps, &trail)))?.psd_repair(MASS_TOL)?;
    Ok(IntervalMass {
        mass,
        trail: eps.iter().copied().zip(trail).collect(),
    })
}

pub fn stieltjes_inversion(m: &HerglotzSampler, l1: f64, l2: f64, eps: &[f64]) -> Result<HermitianMatrix> {
    Ok(stieltjes_interval(m, l1, l2, eps)?.mass)
}

/// Mass of `(λ1, λ2]` for measure tables. The `ε` trail is scaled down on
/// intervals narrower than ten times its first entry, since the `ε` shift
/// of the window would otherwise move atoms across interval ends.
pub fn measure_interval(m: &HerglotzSampler, l1: f64, l2: f64, eps: &[f64]) -> Result<IntervalMass> {
    check_eps(eps)?;
    let scale = ((l2 - l1) / (10.0 * eps[0])).min(1.0);
    let local: Vec<f64> = eps.iter().map(|e| e * scale).collect();
    stieltjes_interval(m, l1, l2, &local)
}

/// Masses of the consecutive intervals `(λ_k, λ_{k+1}]`.
pub fn discretize_measure(m: &HerglotzSampler, breakpoints: &[f64], eps: &[f64]) -> Result<MeasureApprox> {
    let pieces = breakpoints
        .windows(2)
        .map(|w| measure_interval(m, w[0], w[1], eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureApprox::from_pieces(breakpoints, pieces))
}

/// `lim ε Im M(λ0+iε)`, after checking that `ε Re M(λ0+iε)` vanishes.
pub fn point_mass(m: &HerglotzSampler, l0: f64, eps: &[f64]) -> Result<HermitianMatrix> {
    check_eps(eps)?;
    let values: Vec<ComplexMatrix> = eps.iter().map(|&e| Ok(m.eval(c64(l0, e))? * c64(e, 0.0))).collect::<Result<_>>()?;
    let im: Vec<ComplexMatrix> = values.iter().map(im_part).collect();
    let re: Vec<ComplexMatrix> = values.iter().map(re_part).collect();
    check_trail(&im, "point mass")?;
    let scale = values.iter().map(op_norm).fold(1.0, f64::max);
    let re_limit = op_norm(&extrapolate_to_zero(eps, &re));
    if re_limit > 1e-6 * scale {
        return Err(Error::NonDecayingTrail(format!(
            "ε Re M does not vanish at {l0}: limit {re_limit:e}"
        )));
    }
    HermitianMatrix::new(extrapolate_to_zero(eps, &im))?.psd_repair(MASS_TOL)
}

/// `M(λ + i0)` extrapolated from the `ε` trail.
pub fn boundary_value(m: &HerglotzSampler, l: f64, eps: &[f64]) -> Result<ComplexMatrix> {
    check_eps(eps)?;
    let values: Vec<ComplexMatrix> = eps.iter().map(|&e| m.eval(c64(l, e))).collect::<Result<_>>()?;
    check_trail(&values, "boundary value")?;
    Ok(extrapolate_to_zero(eps, &values))
}

#[derive(Debug, Clone)]
pub struct KernelProbe {
    pub z: Complex64,
    pub kernel_dim: usize,
    /// Smallest eigenvalue of `Im M` on the complement of its kernel.
    pub complement_min: f64,
}

#[derive(Debug, Clone)]
pub struct KernelReport {
    pub probes: Vec<KernelProbe>,
    /// Largest principal angle between the first probe's kernel and the others.
    pub max_angle: f64,
    pub consistent: bool,
}

/// Kernel of `Im M(z)` at each probe, and whether it stays put.
pub fn kernel_invariance(m: &HerglotzSampler, probes: &[Complex64], kernel_tol: f64, angle_tol: f64) -> Result<KernelReport> {
    if probes.len() < 2 || probes.iter().any(|z| !(z.im > 0.0)) {
        return Err(Error::InvalidConfig("need at least two probes in the upper half-plane".into()));
    }
    let mut bases = Vec::new();
    let mut out = Vec::new();
    for &z in probes {
        let im = m.imag(z)?;
        let vals = im.eigenvalues();
        let vecs = im.eigenvectors();
        let kernel: Vec<usize> = (0..vals.len()).filter(|&j| vals[j] < kernel_tol).collect();
        let complement_min = (0..vals.len())
            .filter(|j| !kernel.contains(j))
            .map(|j| vals[j])
            .fold(f64::INFINITY, f64::min);
        let mut basis = ComplexMatrix::zeros(vals.len(), kernel.len());
        for (c, &j) in kernel.iter().enumerate() {
            basis.set_column(c, &vecs.column(j));
        }
        out.push(KernelProbe {
            z,
            kernel_dim: kernel.len(),
            complement_min,
        });
        bases.push(basis);
    }
    let same_dim = out.iter().all(|p| p.kernel_dim == out[0].kernel_dim);
    let mut max_angle: f64 = 0.0;
    if same_dim && out[0].kernel_dim > 0 {
        for b in &bases[1..] {
            let cosines = singular_values(&(bases[0].adjoint() * b));
            let smallest = cosines.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
            max_angle = max_angle.max(smallest.acos());
        }
    }
    let consistent = same_dim && max_angle <= angle_tol && out.iter().all(|p| p.complement_min > 0.0);
    Ok(KernelReport {
        probes: out,
        max_angle: if same_dim { max_angle } else { f64::INFINITY },
        consistent,
    })
}

/// `C + D z + Σ mass [(λ̄ − z)⁻¹ − λ̄/(1 + λ̄²)]`, after checking that the
/// measure accounts for `Im M(i) − D` to within `budget_tol` (relative).
pub fn reconstruct(data: &NevanlinnaData, z: Complex64, budget_tol: f64) -> Result<ComplexMatrix> {
    let dim = data.c.dim();
    let target = data.im_at_i.matrix() - data.d.matrix();
    let shortfall = op_norm(&(&target - data.measure.weighted_total(dim)));
    let scale = op_norm(&target);
    if shortfall > budget_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::WindowTooNarrow(format!(
            "measure misses {:.3}% of Im M(i)",
            100.0 * shortfall / scale.max(f64::MIN_POSITIVE)
        )));
    }
    let mut out = data.c.matrix() + data.d.matrix() * z;
    for (&(l1, l2), mass) in data.measure.intervals.iter().zip(&data.measure.masses) {
        let mid = 0.5 * (l1 + l2);
        let kernel = c64(1.0, 0.0) / (c64(mid, 0.0) - z) - c64(mid / (1.0 + mid * mid), 0.0);
        out += mass.matrix() * kernel;
    }
    Ok(out)
}

/// `PV ∫ ρ(t) f/(t − λ) dt + iπ ρ(λ) f` for a density sampled on `ts`,
/// by subtracting `ρ(λ)` and integrating the smooth remainder.
pub fn hilbert_boundary_value(ts: &[f64], density: &[ComplexMatrix], f: &ComplexVector, l: f64) -> Result<ComplexVector> {
    let n = ts.len();
    if n < 4 || density.len() != n {
        return Err(Error::GridMismatch(format!("{} density samples on {} nodes", density.len(), n)));
    }
    if let Some(i) = (1..n).find(|&i| !(ts[i] > ts[i - 1])) {
        return Err(Error::NonMonotoneGrid { index: i });
    }
    let (lo, hi) = (ts[0], ts[n - 1]);
    if !(l > lo && l < hi) {
        return Err(Error::WindowTooNarrow(format!("λ = {l} is not inside [{lo}, {hi}]")));
    }
    let at = interpolate(ts, density, l);
    let gap = 1e-12 * (hi - lo);
    let values: Vec<ComplexVector> = (0..n)
        .map(|k| {
            let dt = ts[k] - l;
            if dt.abs() > gap {
                (&density[k] - &at) * f / c64(dt, 0.0)
            } else {
                // removable point: the derivative by central differences
                let (a, b) = (k.max(1) - 1, (k + 1).min(n - 1));
                (&density[b] - &density[a]) * f / c64(ts[b] - ts[a], 0.0)
            }
        })
        .collect();
    let log = ((hi - l) / (l - lo)).ln();
    Ok(simpson(ts, &values) + &at * f * c64(log, std::f64::consts::PI))
}

/// Cubic interpolation from the four nodes around `x`.
fn interpolate(ts: &[f64], ys: &[ComplexMatrix], x: f64) -> ComplexMatrix {
    let n = ts.len();
    let i = ts.partition_point(|&t| t <= x).clamp(2, n - 2) - 2;
    let nodes = &ts[i..i + 4];
    let mut out = ComplexMatrix::zeros(ys[0].nrows(), ys[0].ncols());
    for j in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if k != j {
                w *= (x - nodes[k]) / (nodes[j] - nodes[k]);
            }
        }
        out += &ys[i + j] * c64(w, 0.0);
    }
    out
}

/// `n` reproducible probes with `Re z ∈ [−5, 5]` and `Im z ∈ [0.1, 5]`.
pub fn probe_points(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| c64(rng.gen_range(-5.0..5.0), rng.gen_range(0.1..5.0))).collect()
}

/// Smallest eigenvalue of `Im M` over the probes.
pub fn herglotz_scan(m: &HerglotzSampler, probes: &[Complex64]) -> Result<f64> {
    probes
        .iter()
        .try_fold(f64::INFINITY, |acc, &z| Ok(acc.min(herglotz_residual(&m.eval(z)?))))
}

/// Rows `λ1, λ2`, row-major `Re/Im` mass entries, then the smallest `ε`.
pub fn measure_csv(measure: &MeasureApprox) -> String {
    let d = measure.masses.first().map_or(0, HermitianMatrix::dim);
    let mut out = String::from("lambda1,lambda2");
    for j in 0..d {
        for k in 0..d {
            out.push_str(&format!(",re_w{j}{k},im_w{j}{k}"));
        }
    }
    out.push_str(",eps\n");
    for (i, (&(l1, l2), mass)) in measure.intervals.iter().zip(&measure.masses).enumerate() {
        out.push_str(&format!("{l1},{l2}"));
        for j in 0..d {
            for k in 0..d {
                let w = mass.matrix()[(j, k)];
                out.push_str(&format!(",{},{}", w.re, w.im));
            }
        }
        let eps = measure.epsilon_trail.get(i).and_then(|t| t.last()).map_or(f64::NAN, |t| t.0);
        out.push_str(&format!(",{eps}\n"));
    }
    out
}
