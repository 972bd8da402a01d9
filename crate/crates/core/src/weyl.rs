//! Fundamental systems, their Wronskian identities, and the m-function.

use crate::error::{Error, Result};
use crate::ivp::{
    cell_transfer, solve_operator_ivp, Forcing, IntegratorConfig, Method, OperatorState, SolutionPath,
};
use crate::linalg::{
    condition_number, identity, im_part, inverse, op_norm, principal_sqrt, BlockOperator2x2, BoundaryOperator, Complex64,
    ComplexMatrix, HermitianMatrix,
};
use crate::potential::{AnalyticTag, PotentialModel};

/// Condition number beyond which a cap or denominator is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Longest exact-transfer piece, in units of the local decay length, before
/// the state is renormalised.
const MAX_GROWTH: f64 = 20.0;

/// Sub-cell width for linearly interpolated potentials.
const LINEAR_SUBCELL: f64 = 2e-3;

#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    pub z: Complex64,
    pub bc: BoundaryOperator,
    pub theta: SolutionPath<OperatorState>,
    pub phi: SolutionPath<OperatorState>,
    pub theta_conj: SolutionPath<OperatorState>,
    pub phi_conj: SolutionPath<OperatorState>,
}

/// Exact propagation where the potential allows it, adaptive otherwise.
pub fn default_config(v: &PotentialModel) -> IntegratorConfig {
    let constant = matches!(v.analytic_tag(), Some(AnalyticTag::Zero | AnalyticTag::Constant));
    if v.is_piecewise_constant() || constant {
        IntegratorConfig::with_method(Method::Exact)
    } else {
        let mut cfg = IntegratorConfig::with_method(Method::RkAdaptive);
        cfg.abs_tol = 1e-12;
        cfg.rel_tol = 1e-12;
        cfg
    }
}

pub fn fundamental_system(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    grid: &[f64],
) -> Result<FundamentalSystem> {
    fundamental_system_with(v, bc, z, grid, &default_config(v))
}

pub fn fundamental_system_with(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<FundamentalSystem> {
    if bc.dim() != v.dim() {
        return Err(Error::DimError {
            expected: v.dim(),
            found: bc.dim(),
        });
    }
    if grid.first() != Some(&v.a()) {
        return Err(Error::GridMismatch(format!(
            "fundamental systems start at the regular endpoint a = {}",
            v.a()
        )));
    }
    let a = v.a();
    let minus_sin = -bc.sin();
    let solve = |z: Complex64, y0: &ComplexMatrix, y1: &ComplexMatrix| {
        solve_operator_ivp(v, z, a, y0, y1, &Forcing::Zero, grid, cfg)
    };
    Ok(FundamentalSystem {
        z,
        bc: bc.clone(),
        theta: solve(z, bc.cos(), bc.sin())?,
        phi: solve(z, &minus_sin, bc.cos())?,
        theta_conj: solve(z.conj(), bc.cos(), bc.sin())?,
        phi_conj: solve(z.conj(), &minus_sin, bc.cos())?,
    })
}

impl FundamentalSystem {
    pub fn grid(&self) -> &[f64] {
        &self.theta.grid
    }

    /// Largest deviation of the four paths from their data at `a`.
    pub fn initial_condition_residual(&self) -> f64 {
        let (c, s) = (self.bc.cos(), self.bc.sin());
        let mut worst: f64 = 0.0;
        for (t, p) in [(&self.theta, &self.phi), (&self.theta_conj, &self.phi_conj)] {
            let (t0, p0) = (&t.states[0], &p.states[0]);
            worst = worst
                .max((&t0.y - c).camax())
                .max((&t0.dy - s).camax())
                .max((&p0.y + s).camax())
                .max((&p0.dy - c).camax());
        }
        worst
    }

    /// The block `[[θ, φ], [θ', φ']]` at node `i`, at `z` or at `z̄`.
    pub fn block(&self, i: usize, conjugate: bool) -> BlockOperator2x2 {
        let (t, p) = if conjugate {
            (&self.theta_conj.states[i], &self.phi_conj.states[i])
        } else {
            (&self.theta.states[i], &self.phi.states[i])
        };
        BlockOperator2x2::new(t.y.clone(), p.y.clone(), t.dy.clone(), p.dy.clone()).expect("matching blocks")
    }
}

pub const IDENTITY_LABELS: [&str; 8] = [
    "theta-theta wronskian",
    "phi-phi wronskian",
    "phi-theta wronskian",
    "theta-phi wronskian",
    "value cross term",
    "derivative cross term",
    "right inverse, derivative-value",
    "right inverse, value-derivative",
];

#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Max over probes of each identity residual, in `IDENTITY_LABELS` order.
    pub residuals: [f64; 8],
    /// Max over probes of the left and right residuals of the block inverse.
    pub block_inverse: (f64, f64),
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.residuals
            .iter()
            .cloned()
            .fold(self.block_inverse.0.max(self.block_inverse.1), f64::max)
    }
}

/// The eight Wronskian identities linking the system at `z` and `z̄`,
/// evaluated at the nodes nearest `probe_xs`.
pub fn identity_suite(fs: &FundamentalSystem, probe_xs: &[f64]) -> IdentityReport {
    let d = fs.bc.dim();
    let eye = identity(d);
    let mut residuals = [0.0f64; 8];
    let mut block_inverse = (0.0f64, 0.0f64);
    for &x in probe_xs {
        let i = fs.theta.nearest_index(x);
        let (t, p) = (&fs.theta.states[i], &fs.phi.states[i]);
        let (tb, pb) = (&fs.theta_conj.states[i], &fs.phi_conj.states[i]);
        let (tba, tbda) = (tb.y.adjoint(), tb.dy.adjoint());
        let (pba, pbda) = (pb.y.adjoint(), pb.dy.adjoint());
        let values = [
            op_norm(&(&tbda * &t.y - &tba * &t.dy)),
            op_norm(&(&pbda * &p.y - &pba * &p.dy)),
            op_norm(&(&pbda * &t.y - &pba * &t.dy - &eye)),
            op_norm(&(&tba * &p.dy - &tbda * &p.y - &eye)),
            op_norm(&(&p.y * &tba - &t.y * &pba)),
            op_norm(&(&p.dy * &tbda - &t.dy * &pbda)),
            op_norm(&(&p.dy * &tba - &t.dy * &pba - &eye)),
            op_norm(&(&t.y * &pbda - &p.y * &tbda - &eye)),
        ];
        for (r, v) in residuals.iter_mut().zip(values) {
            *r = r.max(v);
        }
        let (l, r) = fs.block(i, false).inverse_residuals(&fs.block(i, true));
        block_inverse = (block_inverse.0.max(l), block_inverse.1.max(r));
    }
    IdentityReport {
        residuals,
        block_inverse,
    }
}

fn require_nonreal(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::RealSpectralParameter { z });
    }
    Ok(())
}

/// Pieces `[lo, hi]` with a constant matrix each, covering `[a, b]`.
fn pieces(v: &PotentialModel, z: Complex64, b: f64) -> Result<Vec<(f64, f64, HermitianMatrix)>> {
    let a = v.a();
    let mut nodes = vec![a];
    nodes.extend(v.breakpoints_between(a, b));
    nodes.push(b);
    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let cell = v.cell_of(0.5 * (lo + hi))?;
        let linear = !v.is_piecewise_constant() && cell + 1 < v.cell_count();
        if linear {
            let n = ((hi - lo) / LINEAR_SUBCELL).ceil().max(1.0) as usize;
            let h = (hi - lo) / n as f64;
            for k in 0..n {
                let (l, r) = (lo + h * k as f64, if k + 1 == n { hi } else { lo + h * (k + 1) as f64 });
                let mid = HermitianMatrix::new(v.matrix_in_cell(cell, 0.5 * (l + r)))?;
                out.push((l, r, mid));
            }
        } else {
            let value = v.cell_value(cell).clone();
            let decay = value
                .eigenvalues()
                .iter()
                .map(|&l| principal_sqrt(z - l).im.abs())
                .fold(0.0, f64::max);
            let n = if decay > 0.0 {
                ((hi - lo) * decay / MAX_GROWTH).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = (hi - lo) / n as f64;
            for k in 0..n {
                let r = if k + 1 == n { hi } else { lo + h * (k + 1) as f64 };
                out.push((lo + h * k as f64, r, value.clone()));
            }
        }
    }
    Ok(out)
}

/// `M_b` with a Dirichlet cap at `b`: the matrix for which `θ + φ M_b`
/// vanishes at `b`.
///
/// The solutions vanishing at `b` are propagated from `b` down to `a` with
/// exact cell transfers, renormalised after every piece to the pair
/// `(I, R)` with `R = Y' Y⁻¹`. Matching `θ + φ M` to that column space at
/// `a` gives `M = (cos α + R sin α)⁻¹ (R cos α − sin α)`.
pub fn m_truncated(v: &PotentialModel, bc: &BoundaryOperator, z: Complex64, b: f64) -> Result<ComplexMatrix> {
    require_nonreal(z)?;
    if !(b > v.a()) {
        return Err(Error::InvalidConfig(format!("cap {b} must lie beyond a = {}", v.a())));
    }
    if bc.dim() != v.dim() {
        return Err(Error::DimError {
            expected: v.dim(),
            found: bc.dim(),
        });
    }
    let r = if v.is_piecewise_constant() {
        riccati_at_a(v, z, b)?
    } else {
        // midpoint sub-cells are second order; one Richardson step lifts it
        let coarse = riccati_at_a(v, z, b)?;
        let fine = riccati_at_a_with(v, z, b, 0.5)?;
        (fine * Complex64::new(4.0, 0.0) - coarse) / Complex64::new(3.0, 0.0)
    };
    let (c, s) = (bc.cos(), bc.sin());
    let denom = c + &r * s;
    let condition = condition_number(&denom);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::NearSingularCap { condition });
    }
    let inv = inverse(&denom).ok_or(Error::NearSingularCap { condition })?;
    Ok(inv * (&r * c - s))
}

fn riccati_at_a(v: &PotentialModel, z: Complex64, b: f64) -> Result<ComplexMatrix> {
    riccati_at_a_with(v, z, b, 1.0)
}

fn riccati_at_a_with(v: &PotentialModel, z: Complex64, b: f64, refine: f64) -> Result<ComplexMatrix> {
    let d = v.dim();
    let mut list = pieces(v, z, b)?;
    if refine != 1.0 {
        // halve every linear sub-cell
        let mut finer = Vec::with_capacity(list.len() * 2);
        for (lo, hi, value) in list {
            let cell = v.cell_of(0.5 * (lo + hi))?;
            if !v.is_piecewise_constant() && cell + 1 < v.cell_count() {
                let mid = 0.5 * (lo + hi);
                finer.push((lo, mid, HermitianMatrix::new(v.matrix_in_cell(cell, 0.5 * (lo + mid)))?));
                finer.push((mid, hi, HermitianMatrix::new(v.matrix_in_cell(cell, 0.5 * (mid + hi)))?));
            } else {
                finer.push((lo, hi, value));
            }
        }
        list = finer;
    }
    let mut y = ComplexMatrix::zeros(d, d);
    let mut dy = identity(d);
    for (lo, hi, value) in list.iter().rev() {
        let (ny, ndy) = cell_transfer(value, z, lo - hi, &y, &dy);
        let inv = inverse(&ny).ok_or_else(|| Error::NearSingularCap {
            condition: condition_number(&ny),
        })?;
        dy = ndy * inv;
        y = identity(d);
    }
    Ok(dy)
}

#[derive(Debug, Clone)]
pub struct TruncationSchedule {
    pub bs: Vec<f64>,
    pub m_tol: f64,
}

impl TruncationSchedule {
    pub fn new(bs: Vec<f64>, m_tol: f64) -> Result<Self> {
        if bs.len() < 2 {
            return Err(Error::InvalidConfig("a truncation schedule needs at least two caps".into()));
        }
        if bs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("truncation caps must increase".into()));
        }
        if !(m_tol > 0.0) {
            return Err(Error::InvalidConfig("m_tol must be positive".into()));
        }
        Ok(Self { bs, m_tol })
    }

    /// `a + start·2^k` up to `a + limit`.
    pub fn doubling(a: f64, start: f64, limit: f64, m_tol: f64) -> Self {
        let mut bs = Vec::new();
        let mut len = start;
        while len <= limit * (1.0 + 1e-12) {
            bs.push(a + len);
            len *= 2.0;
        }
        Self { bs, m_tol }
    }

    fn check(&self, a: f64) -> Result<()> {
        Self::new(self.bs.clone(), self.m_tol)?;
        if !(self.bs[0] > a) {
            return Err(Error::InvalidConfig(format!("caps must lie beyond a = {a}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeylSample {
    pub z: Complex64,
    pub m: ComplexMatrix,
    /// `(b, ‖M_b − M_previous‖)`; the first entry carries `NaN`.
    pub truncations_used: Vec<(f64, f64)>,
    pub converged: bool,
}

impl WeylSample {
    pub fn last_delta(&self) -> f64 {
        self.truncations_used.last().map_or(f64::NAN, |t| t.1)
    }
}

/// Walks the schedule and stops at the first successive difference within
/// `m_tol`; the trail is returned whether or not that happened.
pub fn m_function_trail(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    sched: &TruncationSchedule,
) -> Result<WeylSample> {
    require_nonreal(z)?;
    sched.check(v.a())?;
    let mut trail = Vec::with_capacity(sched.bs.len());
    let mut previous: Option<ComplexMatrix> = None;
    for &b in &sched.bs {
        let m = m_truncated(v, bc, z, b)?;
        let delta = previous.as_ref().map_or(f64::NAN, |p| op_norm(&(&m - p)));
        trail.push((b, delta));
        if delta <= sched.m_tol {
            return Ok(WeylSample {
                z,
                m,
                truncations_used: trail,
                converged: true,
            });
        }
        previous = Some(m);
    }
    Ok(WeylSample {
        z,
        m: previous.expect("nonempty schedule"),
        truncations_used: trail,
        converged: false,
    })
}

pub fn m_function(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    sched: &TruncationSchedule,
) -> Result<WeylSample> {
    let sample = m_function_trail(v, bc, z, sched)?;
    if !sample.converged {
        let (b, delta) = *sample.truncations_used.last().expect("nonempty trail");
        return Err(Error::NotConverged { b, delta });
    }
    Ok(sample)
}

/// `ψ = θ + φ m` on the grid of `fs`.
pub fn weyl_solution(fs: &FundamentalSystem, m: &ComplexMatrix) -> SolutionPath<OperatorState> {
    SolutionPath {
        grid: fs.theta.grid.clone(),
        states: fs
            .theta
            .states
            .iter()
            .zip(&fs.phi.states)
            .map(|(t, p)| OperatorState {
                y: &t.y + &p.y * m,
                dy: &t.dy + &p.dy * m,
            })
            .collect(),
        z: fs.z,
        x0: fs.theta.x0,
    }
}

/// Per-column `∫_lo^hi ‖ψ e_j‖²` over consecutive windows of width `window`.
pub fn tail_norms(psi: &SolutionPath<OperatorState>, window: f64) -> Vec<(f64, Vec<f64>)> {
    let grid = &psi.grid;
    let d = psi.states.first().map_or(0, |s| s.y.ncols());
    let mut out = Vec::new();
    let mut lo = grid[0];
    while lo + window <= grid[grid.len() - 1] * (1.0 + 1e-12) {
        let i0 = psi.nearest_index(lo);
        let i1 = psi.nearest_index(lo + window);
        let cols = (0..d)
            .map(|j| {
                let ys: Vec<f64> = psi.states[i0..=i1].iter().map(|s| s.y.column(j).norm_squared()).collect();
                *crate::quadrature::cumulative(&grid[i0..=i1], &ys).last().expect("nonempty window")
            })
            .collect();
        out.push((lo, cols));
        lo += window;
    }
    out
}

pub fn reflection_residual(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    sched: &TruncationSchedule,
) -> Result<f64> {
    let m = m_function(v, bc, z, sched)?.m;
    let mc = m_function(v, bc, z.conj(), sched)?.m;
    Ok(op_norm(&(m - mc.adjoint())))
}

/// Change of boundary condition: `m_β = (C + D m_α)(A + B m_α)⁻¹` with the
/// blocks of the rotation from `α` to `β`.
pub fn lft_transform(m_alpha: &ComplexMatrix, alpha: &BoundaryOperator, beta: &BoundaryOperator) -> Result<ComplexMatrix> {
    let (sa, ca) = (alpha.sin(), alpha.cos());
    let (sb, cb) = (beta.sin(), beta.cos());
    let a = cb * ca + sb * sa;
    let b = -(cb * sa) + sb * ca;
    let c = -(sb * ca) + cb * sa;
    let d = sb * sa + cb * ca;
    let denom = a + b * m_alpha;
    let condition = condition_number(&denom);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularDenominator { condition });
    }
    let inv = inverse(&denom).ok_or(Error::SingularDenominator { condition })?;
    Ok((c + d * m_alpha) * inv)
}

/// Smallest eigenvalue of `Im m`.
pub fn herglotz_residual(m: &ComplexMatrix) -> f64 {
    let im = im_part(m);
    // im_part is Hermitian by construction
    HermitianMatrix::new(im).map_or(f64::NAN, |h| h.smallest_eigenvalue())
}

/// For `u = ψ f` with a Dirichlet condition: `‖m u(a) − u'(a)‖`, with the
/// derivative taken by a one-sided three-point difference of the values.
pub fn dirichlet_to_neumann_residual(psi: &SolutionPath<OperatorState>, m: &ComplexMatrix, f: &crate::linalg::ComplexVector) -> f64 {
    let g = &psi.grid;
    let (h1, h2) = (g[1] - g[0], g[2] - g[1]);
    let u = |i: usize| &psi.states[i].y * f;
    let w0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    let w1 = (h1 + h2) / (h1 * h2);
    let w2 = -h1 / (h2 * (h1 + h2));
    let du = u(0) * Complex64::new(w0, 0.0) + u(1) * Complex64::new(w1, 0.0) + u(2) * Complex64::new(w2, 0.0);
    (m * u(0) - du).norm()
}

/// One row per sample: `Re z, Im z`, row-major `Re m_jk, Im m_jk`, then the
/// convergence flag and the last successive difference.
pub fn m_grid_csv(samples: &[WeylSample]) -> String {
    let d = samples.first().map_or(0, |s| s.m.nrows());
    let mut out = String::from("re_z,im_z");
    for j in 0..d {
        for k in 0..d {
            out.push_str(&format!(",re_m{j}{k},im_m{j}{k}"));
        }
    }
    out.push_str(",converged,delta\n");
    for s in samples {
        out.push_str(&format!("{},{}", s.z.re, s.z.im));
        for j in 0..d {
            for k in 0..d {
                out.push_str(&format!(",{},{}", s.m[(j, k)].re, s.m[(j, k)].im));
            }
        }
        out.push_str(&format!(",{},{}\n", s.converged, s.last_delta()));
    }
    out
}
