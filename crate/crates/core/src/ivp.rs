//! Initial value problems for `-y'' + V y - z y = f` on a gridded potential.
//!
//! Three propagators share one node layout: successive approximations on the
//! integral form, an adaptive Dormand–Prince pair on the first-order system,
//! and exact per-cell propagation for piecewise-constant potentials.

use crate::error::{Error, Result};
use crate::linalg::{cos_sinc, op_norm, principal_sqrt, Complex64, ComplexMatrix, ComplexVector, HermitianMatrix};
use crate::potential::PotentialModel;
use crate::quadrature::{cumulative, cumulative_segmented, Integrand};

/// Lower-bound constant of the small-interval estimate.
pub const LOWER_BOUND_C0: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    pub y: ComplexVector,
    pub dy: ComplexVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorState {
    pub y: ComplexMatrix,
    pub dy: ComplexMatrix,
}

impl OperatorState {
    pub fn adjoint(&self) -> OperatorState {
        OperatorState {
            y: self.y.adjoint(),
            dy: self.dy.adjoint(),
        }
    }

    pub fn column(&self, j: usize) -> VectorState {
        VectorState {
            y: self.y.column(j).into_owned(),
            dy: self.dy.column(j).into_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionPath<S> {
    pub grid: Vec<f64>,
    pub states: Vec<S>,
    pub z: Complex64,
    pub x0: f64,
}

impl<S> SolutionPath<S> {
    /// Index of the node equal to `x` up to rounding.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        node_index(&self.grid, x)
    }

    pub fn nearest_index(&self, x: f64) -> usize {
        let i = self.grid.partition_point(|&g| g < x);
        if i == 0 {
            0
        } else if i == self.grid.len() {
            i - 1
        } else if (self.grid[i] - x).abs() < (x - self.grid[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }
}

fn node_index(grid: &[f64], x: f64) -> Option<usize> {
    let tol = 1e-12 * x.abs().max(1.0);
    let i = grid.partition_point(|&g| g < x - tol);
    (i < grid.len() && (grid[i] - x).abs() <= tol).then_some(i)
}

fn push_complex(out: &mut String, v: Complex64) {
    out.push_str(&format!(",{},{}", v.re, v.im));
}

impl SolutionPath<VectorState> {
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.y.len());
        let mut out = String::from("x");
        for name in ["y", "dy"] {
            for i in 0..d {
                out.push_str(&format!(",re_{name}{i},im_{name}{i}"));
            }
        }
        out.push('\n');
        for (x, s) in self.grid.iter().zip(&self.states) {
            out.push_str(&x.to_string());
            for v in s.y.iter().chain(s.dy.iter()) {
                push_complex(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }
}

impl SolutionPath<OperatorState> {
    pub fn column(&self, j: usize) -> SolutionPath<VectorState> {
        SolutionPath {
            grid: self.grid.clone(),
            states: self.states.iter().map(|s| s.column(j)).collect(),
            z: self.z,
            x0: self.x0,
        }
    }

    /// Row-major `Y` then `Y'` per node.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.y.nrows());
        let mut out = String::from("x");
        for name in ["Y", "dY"] {
            for i in 0..d {
                for j in 0..d {
                    out.push_str(&format!(",re_{name}{i}{j},im_{name}{i}{j}"));
                }
            }
        }
        out.push('\n');
        for (x, s) in self.grid.iter().zip(&self.states) {
            out.push_str(&x.to_string());
            for m in [&s.y, &s.dy] {
                for i in 0..d {
                    for j in 0..d {
                        push_complex(&mut out, m[(i, j)]);
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    RkAdaptive,
    /// Per-cell closed form; piecewise-constant potentials and zero forcing only.
    Exact,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub method: Method,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_picard_terms: usize,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::RkAdaptive,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_picard_terms: 400,
            max_step: 0.1,
        }
    }
}

impl IntegratorConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerances and max_step must be positive (abs {}, rel {}, step {})",
                self.abs_tol, self.rel_tol, self.max_step
            )));
        }
        if self.max_picard_terms == 0 {
            return Err(Error::InvalidConfig("max_picard_terms must be positive".into()));
        }
        Ok(())
    }
}

/// Inhomogeneity: zero, or samples on the solver grid.
#[derive(Debug, Clone)]
pub enum Forcing<T> {
    Zero,
    Sampled(Vec<T>),
}

impl<T: Integrand> Forcing<T> {
    fn check(&self, grid: &[f64]) -> Result<()> {
        match self {
            Forcing::Sampled(s) if s.len() != grid.len() => Err(Error::GridMismatch(format!(
                "{} forcing samples for {} grid nodes",
                s.len(),
                grid.len()
            ))),
            _ => Ok(()),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Cubic Lagrange interpolation between user samples, so the
    /// propagators see the forcing to the same order as the quadratures.
    fn at(&self, grid: &[f64], x: f64) -> Option<T> {
        let Forcing::Sampled(s) = self else { return None };
        if let Some(i) = node_index(grid, x) {
            return Some(s[i].clone());
        }
        let n = grid.len();
        let mut v = s[0].zero_like();
        if n < 4 {
            let i = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
            let w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
            v.axpy(1.0 - w, &s[i - 1]);
            v.axpy(w, &s[i]);
            return Some(v);
        }
        let i = grid.partition_point(|&g| g <= x);
        let lo = i.saturating_sub(2).min(n - 4);
        for j in lo..lo + 4 {
            let mut w = 1.0;
            for k in lo..lo + 4 {
                if k != j {
                    w *= (x - grid[k]) / (grid[j] - grid[k]);
                }
            }
            v.axpy(w, &s[j]);
        }
        Some(v)
    }
}

/// User grid refined by the potential's nodes.
struct Layout {
    xs: Vec<f64>,
    user: Vec<usize>,
    origin: usize,
    /// Internal nodes that are potential nodes.
    breaks: Vec<bool>,
}

fn check_grid(v: &PotentialModel, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    for i in 1..grid.len() {
        if !(grid[i] > grid[i - 1]) {
            return Err(Error::NonMonotoneGrid { index: i });
        }
    }
    if !(grid[0] >= v.a()) || !grid[grid.len() - 1].is_finite() {
        return Err(Error::OutOfDomain { x: grid[0] });
    }
    Ok(())
}

fn layout(v: &PotentialModel, grid: &[f64], x0: f64, refine: bool) -> Result<Layout> {
    check_grid(v, grid)?;
    let origin_user = node_index(grid, x0)
        .ok_or_else(|| Error::GridMismatch(format!("anchor {x0} is not a grid node")))?;
    let mut xs: Vec<f64> = grid.to_vec();
    if refine {
        for b in v.breakpoints_between(grid[0], grid[grid.len() - 1]) {
            if node_index(grid, b).is_none() {
                xs.push(b);
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    }
    let user: Vec<usize> = grid
        .iter()
        .map(|&g| node_index(&xs, g).expect("user node kept"))
        .collect();
    let breaks = xs.iter().map(|&x| node_index(v.grid(), x).is_some()).collect();
    Ok(Layout {
        origin: user[origin_user],
        xs,
        user,
        breaks,
    })
}

/// Propagation through one cell of constant `V`: the state is advanced by
/// `t` (either sign) in the eigenbasis of `V`.
pub fn cell_transfer(
    v: &HermitianMatrix,
    z: Complex64,
    t: f64,
    y: &ComplexMatrix,
    dy: &ComplexMatrix,
) -> (ComplexMatrix, ComplexMatrix) {
    let u = v.eigenvectors();
    let ua = u.adjoint();
    let w = &ua * y;
    let wd = &ua * dy;
    let mut w1 = w.clone();
    let mut wd1 = wd.clone();
    for (j, &lambda) in v.eigenvalues().iter().enumerate() {
        let ksq = z - lambda;
        let (c, s) = cos_sinc(ksq, t);
        for col in 0..w.ncols() {
            w1[(j, col)] = c * w[(j, col)] + s * wd[(j, col)];
            wd1[(j, col)] = -ksq * s * w[(j, col)] + c * wd[(j, col)];
        }
    }
    (u * w1, u * wd1)
}

fn as_column(v: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn exact_states(
    v: &PotentialModel,
    z: Complex64,
    lay: &Layout,
    h0: &ComplexVector,
    h1: &ComplexVector,
) -> Result<Vec<VectorState>> {
    let constant = matches!(
        v.analytic_tag(),
        Some(crate::potential::AnalyticTag::Zero | crate::potential::AnalyticTag::Constant)
    );
    if !v.is_piecewise_constant() && !constant {
        return Err(Error::InvalidConfig(
            "exact propagation needs a piecewise-constant potential".into(),
        ));
    }
    let n = lay.xs.len();
    let mut states: Vec<Option<VectorState>> = vec![None; n];
    let start = (as_column(h0), as_column(h1));
    states[lay.origin] = Some(VectorState {
        y: h0.clone(),
        dy: h1.clone(),
    });
    let step = |from: usize, to: usize, st: &(ComplexMatrix, ComplexMatrix)| -> Result<(ComplexMatrix, ComplexMatrix)> {
        let cell = v.cell_of(0.5 * (lay.xs[from] + lay.xs[to]))?;
        Ok(cell_transfer(v.cell_value(cell), z, lay.xs[to] - lay.xs[from], &st.0, &st.1))
    };
    let mut st = start.clone();
    for i in lay.origin..n - 1 {
        st = step(i, i + 1, &st)?;
        states[i + 1] = Some(VectorState {
            y: st.0.column(0).into_owned(),
            dy: st.1.column(0).into_owned(),
        });
    }
    let mut st = start;
    for i in (1..=lay.origin).rev() {
        st = step(i, i - 1, &st)?;
        states[i - 1] = Some(VectorState {
            y: st.0.column(0).into_owned(),
            dy: st.1.column(0).into_owned(),
        });
    }
    Ok(states.into_iter().map(|s| s.expect("every node visited")).collect())
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integration of `u' = rhs(x, u)` from `x_start` to `x_end`.
fn dopri(
    rhs: &dyn Fn(f64, &ComplexVector) -> ComplexVector,
    x_start: f64,
    x_end: f64,
    u: ComplexVector,
    h_guess: &mut f64,
    cfg: &IntegratorConfig,
) -> Result<ComplexVector> {
    let dir = (x_end - x_start).signum();
    let mut x = x_start;
    let mut u = u;
    let mut k1 = rhs(x, &u);
    // local tolerances are tightened so the accumulated error stays inside
    // the requested one over typical grids
    let (atol, rtol) = (0.01 * cfg.abs_tol, 0.01 * cfg.rel_tol);
    while (x_end - x) * dir > 0.0 {
        let remaining = (x_end - x).abs();
        let mut h = h_guess.min(cfg.max_step).min(remaining);
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h < 1e-13 * x.abs().max(1.0) {
            return Err(Error::ToleranceNotMet(format!("step size underflow at x = {x}")));
        }
        let hs = h * dir;
        let mut ks: Vec<ComplexVector> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for stage in 1..7 {
            let mut arg = u.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = DP_A[stage][j];
                if a != 0.0 {
                    Integrand::axpy(&mut arg, hs * a, k);
                }
            }
            ks.push(rhs(x + DP_C[stage] * hs, &arg));
        }
        let mut next = u.clone();
        let mut err = u.zero_like();
        for j in 0..7 {
            if j < 6 && DP_A[6][j] != 0.0 {
                Integrand::axpy(&mut next, hs * DP_A[6][j], &ks[j]);
            }
            if DP_E[j] != 0.0 {
                Integrand::axpy(&mut err, hs * DP_E[j], &ks[j]);
            }
        }
        let mut ratio: f64 = 0.0;
        for i in 0..u.len() {
            let scale = atol + rtol * u[i].norm().max(next[i].norm());
            ratio = ratio.max(err[i].norm() / scale);
        }
        if !ratio.is_finite() {
            return Err(Error::ToleranceNotMet(format!("non-finite state near x = {x}")));
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        if ratio <= 1.0 {
            x = if last { x_end } else { x + hs };
            u = next;
            // first-same-as-last: stage 7 is the derivative at the new point
            k1 = ks.swap_remove(6);
            if !last || factor > 1.0 {
                *h_guess = h * factor;
            }
        } else {
            *h_guess = h * factor;
        }
    }
    Ok(u)
}

fn rk_states(
    v: &PotentialModel,
    z: Complex64,
    lay: &Layout,
    grid: &[f64],
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    cfg: &IntegratorConfig,
) -> Result<Vec<VectorState>> {
    let d = h0.len();
    let n = lay.xs.len();
    let pack = |y: &ComplexVector, dy: &ComplexVector| {
        let mut u = ComplexVector::zeros(2 * d);
        u.rows_mut(0, d).copy_from(y);
        u.rows_mut(d, d).copy_from(dy);
        u
    };
    let unpack = |u: &ComplexVector| VectorState {
        y: u.rows(0, d).into_owned(),
        dy: u.rows(d, d).into_owned(),
    };
    let mut states: Vec<Option<VectorState>> = vec![None; n];
    states[lay.origin] = Some(VectorState {
        y: h0.clone(),
        dy: h1.clone(),
    });
    let advance = |from: usize, to: usize, u: ComplexVector, h_guess: &mut f64| -> Result<ComplexVector> {
        let cell = v.cell_of(0.5 * (lay.xs[from] + lay.xs[to]))?;
        let rhs = |x: f64, u: &ComplexVector| -> ComplexVector {
            let y = u.rows(0, d);
            let mut shifted = v.matrix_in_cell(cell, x);
            for i in 0..d {
                shifted[(i, i)] -= z;
            }
            let mut out = ComplexVector::zeros(2 * d);
            out.rows_mut(0, d).copy_from(&u.rows(d, d));
            let mut acc = shifted * y;
            if let Some(fx) = f.at(grid, x) {
                acc -= fx;
            }
            out.rows_mut(d, d).copy_from(&acc);
            out
        };
        dopri(&rhs, lay.xs[from], lay.xs[to], u, h_guess, cfg)
    };
    let mut h_guess = cfg.max_step.min(0.01);
    let mut u = pack(h0, h1);
    for i in lay.origin..n - 1 {
        u = advance(i, i + 1, u, &mut h_guess)?;
        states[i + 1] = Some(unpack(&u));
    }
    let mut h_guess = cfg.max_step.min(0.01);
    let mut u = pack(h0, h1);
    for i in (1..=lay.origin).rev() {
        u = advance(i, i - 1, u, &mut h_guess)?;
        states[i - 1] = Some(unpack(&u));
    }
    Ok(states.into_iter().map(|s| s.expect("every node visited")).collect())
}

/// One direction away from the anchor, parametrised by `t = |x - x0|`.
struct Leg {
    nodes: Vec<usize>,
    ts: Vec<f64>,
    /// `+1` forward, `-1` backward; `d/dt = sign · d/dx`.
    sign: f64,
    /// Local indices where a new potential cell starts.
    breaks: Vec<usize>,
    /// Cell of each segment between breaks.
    cells: Vec<usize>,
    cos: Vec<Complex64>,
    sinc: Vec<Complex64>,
}

fn legs(v: &PotentialModel, z: Complex64, lay: &Layout) -> Result<Vec<Leg>> {
    let n = lay.xs.len();
    let x0 = lay.xs[lay.origin];
    let mut out = Vec::new();
    for sign in [1.0, -1.0] {
        let nodes: Vec<usize> = if sign > 0.0 {
            (lay.origin..n).collect()
        } else {
            (0..=lay.origin).rev().collect()
        };
        if nodes.len() < 2 {
            continue;
        }
        let ts: Vec<f64> = nodes.iter().map(|&i| (lay.xs[i] - x0).abs()).collect();
        let mut breaks = Vec::new();
        let mut cells = Vec::new();
        for j in 0..nodes.len() - 1 {
            if j > 0 && lay.breaks[nodes[j]] {
                breaks.push(j);
            }
            if j == 0 || lay.breaks[nodes[j]] {
                cells.push(v.cell_of(0.5 * (lay.xs[nodes[j]] + lay.xs[nodes[j + 1]]))?);
            }
        }
        let (cos, sinc) = ts.iter().map(|&t| cos_sinc(z, t)).unzip();
        out.push(Leg {
            nodes,
            ts,
            sign,
            breaks,
            cells,
            cos,
            sinc,
        });
    }
    Ok(out)
}

impl Leg {
    /// `∫_0^t s(t - t') g(t') dt'` and its `t`-derivative, by the split of the
    /// kernel into products of `cos` and `sinc`.
    fn convolve(
        &self,
        z: Complex64,
        g: impl Fn(usize, usize) -> ComplexVector,
    ) -> (Vec<ComplexVector>, Vec<ComplexVector>) {
        let a = cumulative_segmented(&self.ts, &self.breaks, |seg, j| g(seg, j) * self.cos[j]);
        let b = cumulative_segmented(&self.ts, &self.breaks, |seg, j| g(seg, j) * self.sinc[j]);
        let mut y = Vec::with_capacity(self.ts.len());
        let mut dy = Vec::with_capacity(self.ts.len());
        for j in 0..self.ts.len() {
            y.push(&a[j] * self.sinc[j] - &b[j] * self.cos[j]);
            dy.push(&a[j] * self.cos[j] + &b[j] * (z * self.sinc[j]));
        }
        (y, dy)
    }

    fn potential_times(&self, v: &PotentialModel, xs: &[f64], seg: usize, j: usize, y: &ComplexVector) -> ComplexVector {
        v.matrix_in_cell(self.cells[seg], xs[self.nodes[j]]) * y
    }
}

/// Runs successive approximations on one leg; `visit(n, y_n, y_n')` sees
/// each term with derivatives in `x`, and returns whether to continue.
fn picard_leg(
    v: &PotentialModel,
    z: Complex64,
    lay: &Layout,
    grid: &[f64],
    leg: &Leg,
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    mut visit: impl FnMut(usize, &[ComplexVector], &[ComplexVector]) -> bool,
) {
    let h1t = h1 * Complex64::new(leg.sign, 0.0);
    let m = leg.nodes.len();
    let mut y: Vec<ComplexVector> = (0..m)
        .map(|j| h0 * leg.cos[j] + &h1t * leg.sinc[j])
        .collect();
    let mut dy: Vec<ComplexVector> = (0..m)
        .map(|j| h0 * (-z * leg.sinc[j]) + &h1t * leg.cos[j])
        .collect();
    if !f.is_zero() {
        let samples: Vec<ComplexVector> = leg
            .nodes
            .iter()
            .map(|&i| f.at(grid, lay.xs[i]).expect("sampled forcing"))
            .collect();
        let (fy, fdy) = leg.convolve(z, |_, j| samples[j].clone());
        for j in 0..m {
            y[j] -= &fy[j];
            dy[j] -= &fdy[j];
        }
    }
    let mut n = 0;
    loop {
        let dx: Vec<ComplexVector> = dy.iter().map(|d| d * Complex64::new(leg.sign, 0.0)).collect();
        if !visit(n, &y, &dx) {
            return;
        }
        let (ny, ndy) = leg.convolve(z, |seg, j| leg.potential_times(v, &lay.xs, seg, j, &y[j]));
        y = ny;
        dy = ndy;
        n += 1;
    }
}

fn sup_norm(a: &[ComplexVector], b: &[ComplexVector]) -> f64 {
    a.iter().zip(b).map(|(y, d)| y.norm() + d.norm()).fold(0.0, f64::max)
}

fn picard_states(
    v: &PotentialModel,
    z: Complex64,
    lay: &Layout,
    grid: &[f64],
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    cfg: &IntegratorConfig,
) -> Result<Vec<VectorState>> {
    let d = h0.len();
    let n = lay.xs.len();
    let mut states: Vec<VectorState> = vec![
        VectorState {
            y: ComplexVector::zeros(d),
            dy: ComplexVector::zeros(d),
        };
        n
    ];
    states[lay.origin] = VectorState {
        y: h0.clone(),
        dy: h1.clone(),
    };
    for leg in legs(v, z, lay)? {
        let m = leg.nodes.len();
        let mut sum_y = vec![ComplexVector::zeros(d); m];
        let mut sum_dy = vec![ComplexVector::zeros(d); m];
        let mut converged = false;
        let mut quiet = 0;
        picard_leg(v, z, lay, grid, &leg, h0, h1, f, |k, y, dy| {
            for j in 0..m {
                sum_y[j] += &y[j];
                sum_dy[j] += &dy[j];
            }
            let term = sup_norm(y, dy);
            let total = sup_norm(&sum_y, &sum_dy);
            // two consecutive negligible terms, to skip accidental zeros
            if term <= 1e-3 * (cfg.abs_tol + cfg.rel_tol * total) {
                quiet += 1;
            } else {
                quiet = 0;
            }
            if quiet >= 2 || (k >= 1 && term == 0.0) {
                converged = true;
                return false;
            }
            k + 1 < cfg.max_picard_terms
        });
        if !converged {
            return Err(Error::ToleranceNotMet(format!(
                "successive approximations did not settle within {} terms",
                cfg.max_picard_terms
            )));
        }
        for (j, &i) in leg.nodes.iter().enumerate().skip(1) {
            states[i] = VectorState {
                y: sum_y[j].clone(),
                dy: sum_dy[j].clone(),
            };
        }
    }
    Ok(states)
}

fn check_dims(v: &PotentialModel, vs: &[&ComplexVector]) -> Result<()> {
    for h in vs {
        if h.len() != v.dim() {
            return Err(Error::DimError {
                expected: v.dim(),
                found: h.len(),
            });
        }
    }
    Ok(())
}

fn check_forcing_dims(v: &PotentialModel, f: &Forcing<ComplexVector>) -> Result<()> {
    if let Forcing::Sampled(s) = f {
        check_dims(v, &s.iter().collect::<Vec<_>>())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn solve_vector_ivp(
    v: &PotentialModel,
    z: Complex64,
    x0: f64,
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionPath<VectorState>> {
    cfg.check()?;
    check_dims(v, &[h0, h1])?;
    check_forcing_dims(v, f)?;
    f.check(grid)?;
    let lay = layout(v, grid, x0, true)?;
    let states = match cfg.method {
        Method::Exact => {
            if !f.is_zero() {
                return Err(Error::InvalidConfig("exact propagation takes zero forcing only".into()));
            }
            exact_states(v, z, &lay, h0, h1)?
        }
        Method::RkAdaptive => rk_states(v, z, &lay, grid, h0, h1, f, cfg)?,
        Method::Picard => picard_states(v, z, &lay, grid, h0, h1, f, cfg)?,
    };
    Ok(SolutionPath {
        grid: grid.to_vec(),
        states: lay.user.iter().map(|&i| states[i].clone()).collect(),
        z,
        x0: grid[node_index(grid, x0).expect("checked anchor")],
    })
}

/// The terms `y_0, …, y_n` of the successive approximations (not partial
/// sums), each on the user grid.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterates(
    v: &PotentialModel,
    z: Complex64,
    x0: f64,
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    grid: &[f64],
    n: usize,
) -> Result<Vec<SolutionPath<VectorState>>> {
    check_dims(v, &[h0, h1])?;
    check_forcing_dims(v, f)?;
    f.check(grid)?;
    let lay = layout(v, grid, x0, true)?;
    let d = h0.len();
    let zero = VectorState {
        y: ComplexVector::zeros(d),
        dy: ComplexVector::zeros(d),
    };
    let mut terms: Vec<Vec<VectorState>> = vec![vec![zero.clone(); lay.xs.len()]; n + 1];
    // at the anchor only y_0 carries the initial data
    terms[0][lay.origin] = VectorState {
        y: h0.clone(),
        dy: h1.clone(),
    };
    for leg in legs(v, z, &lay)? {
        picard_leg(v, z, &lay, grid, &leg, h0, h1, f, |k, y, dy| {
            for (j, &i) in leg.nodes.iter().enumerate().skip(1) {
                terms[k][i] = VectorState {
                    y: y[j].clone(),
                    dy: dy[j].clone(),
                };
            }
            k < n
        });
    }
    let x0 = grid[node_index(grid, x0).expect("checked anchor")];
    Ok(terms
        .into_iter()
        .map(|t| SolutionPath {
            grid: grid.to_vec(),
            states: lay.user.iter().map(|&i| t[i].clone()).collect(),
            z,
            x0,
        })
        .collect())
}

/// Constants of the factorial bound on the successive approximations over
/// `|x - x0| ≤ length`: `‖y_n‖ + ‖y_n'‖ ≤ c0 (c1 ∫‖V‖)^n / n! · data`.
#[derive(Debug, Clone, Copy)]
pub struct PicardBoundConstants {
    pub c0: f64,
    pub c1: f64,
}

pub fn picard_bound_constants(z: Complex64, length: f64) -> PicardBoundConstants {
    let k = principal_sqrt(z);
    let growth = (k.im.abs() * length).exp();
    let m_sinc = length * growth;
    let m_cos = growth;
    PicardBoundConstants {
        c0: (m_cos + k.norm_sqr() * m_sinc).max(m_sinc + m_cos),
        c1: m_sinc + m_cos,
    }
}

#[derive(Debug, Clone)]
pub struct PicardBoundReport {
    pub constants: PicardBoundConstants,
    pub potential_integral: f64,
    pub data_norm: f64,
    /// `(n, sup_x ‖y_n‖ + ‖y_n'‖, bound)`.
    pub terms: Vec<(usize, f64, f64)>,
    pub holds: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn picard_bound_check(
    v: &PotentialModel,
    z: Complex64,
    x0: f64,
    h0: &ComplexVector,
    h1: &ComplexVector,
    f: &Forcing<ComplexVector>,
    grid: &[f64],
    n: usize,
) -> Result<PicardBoundReport> {
    let iterates = picard_iterates(v, z, x0, h0, h1, f, grid, n)?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let length = (hi - x0).max(x0 - lo);
    let constants = picard_bound_constants(z, length);
    let potential_integral = v.shifted_norm_integral(Complex64::new(0.0, 0.0), lo, hi)?;
    let forcing_integral = match f {
        Forcing::Zero => 0.0,
        Forcing::Sampled(s) => {
            let norms: Vec<f64> = s.iter().map(|v| v.norm()).collect();
            *cumulative(grid, &norms).last().expect("nonempty grid")
        }
    };
    let data_norm = h0.norm() + h1.norm() + forcing_integral;
    let mut terms = Vec::with_capacity(n + 1);
    let mut factor = constants.c0 * data_norm;
    let mut holds = true;
    for (k, path) in iterates.iter().enumerate() {
        if k > 0 {
            factor *= constants.c1 * potential_integral / k as f64;
        }
        let size = path
            .states
            .iter()
            .map(|s| s.y.norm() + s.dy.norm())
            .fold(0.0, f64::max);
        // quadrature noise allowance
        let bound = factor * (1.0 + 1e-9) + 1e-12;
        holds &= size <= bound;
        terms.push((k, size, bound));
    }
    Ok(PicardBoundReport {
        constants,
        potential_integral,
        data_norm,
        terms,
        holds,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn solve_operator_ivp(
    v: &PotentialModel,
    z: Complex64,
    x0: f64,
    y0: &ComplexMatrix,
    y1: &ComplexMatrix,
    f: &Forcing<ComplexMatrix>,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SolutionPath<OperatorState>> {
    let d = v.dim();
    for m in [y0, y1] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimError {
                expected: d,
                found: if m.nrows() != d { m.nrows() } else { m.ncols() },
            });
        }
    }
    let mut states = vec![
        OperatorState {
            y: ComplexMatrix::zeros(d, d),
            dy: ComplexMatrix::zeros(d, d),
        };
        grid.len()
    ];
    let mut anchor = x0;
    for j in 0..d {
        let fj = match f {
            Forcing::Zero => Forcing::Zero,
            Forcing::Sampled(s) => Forcing::Sampled(s.iter().map(|m| m.column(j).into_owned()).collect()),
        };
        let col = solve_vector_ivp(
            v,
            z,
            x0,
            &y0.column(j).into_owned(),
            &y1.column(j).into_owned(),
            &fj,
            grid,
            cfg,
        )?;
        anchor = col.x0;
        for (s, c) in states.iter_mut().zip(&col.states) {
            s.y.set_column(j, &c.y);
            s.dy.set_column(j, &c.dy);
        }
    }
    Ok(SolutionPath {
        grid: grid.to_vec(),
        states,
        z,
        x0: anchor,
    })
}

/// Max-norm residual of the integral form at every node of `path`:
/// `y - [c h0 + s h1 + ∫ s(x - x') (V y - f)]` with `h0, h1` read at the
/// anchor. Segments break only at potential nodes that are grid nodes.
pub fn integral_equation_residual(
    v: &PotentialModel,
    path: &SolutionPath<VectorState>,
    f: &Forcing<ComplexVector>,
) -> Result<Vec<f64>> {
    f.check(&path.grid)?;
    let lay = layout(v, &path.grid, path.x0, false)?;
    let z = path.z;
    let h0 = &path.states[lay.origin].y;
    let h1 = &path.states[lay.origin].dy;
    let mut out = vec![0.0; path.grid.len()];
    for leg in legs(v, z, &lay)? {
        // the integrand is one-sided at cell boundaries
        let (conv, _) = leg.convolve(z, |seg, j| {
            let i = leg.nodes[j];
            let vy = leg.potential_times(v, &lay.xs, seg, j, &path.states[i].y);
            let mut g = vy;
            if let Some(fx) = f.at(&path.grid, lay.xs[i]) {
                g -= fx;
            }
            g
        });
        let h1t = h1 * Complex64::new(leg.sign, 0.0);
        for (j, &i) in leg.nodes.iter().enumerate() {
            let free = h0 * leg.cos[j] + &h1t * leg.sinc[j];
            out[i] = (&path.states[i].y - free - &conv[j]).camax();
        }
    }
    Ok(out)
}

/// `Y_p(x) = θ(x) ∫_{x0}^x φ(z̄)^* F − φ(x) ∫_{x0}^x θ(z̄)^* F`, the solution
/// of `(τ - z) Y = F` with zero data at `x0`.
pub fn variation_of_constants(
    theta: &SolutionPath<OperatorState>,
    phi: &SolutionPath<OperatorState>,
    theta_conj: &SolutionPath<OperatorState>,
    phi_conj: &SolutionPath<OperatorState>,
    f: &[ComplexMatrix],
    x0: f64,
) -> Result<SolutionPath<OperatorState>> {
    let grid = &theta.grid;
    for p in [phi, theta_conj, phi_conj] {
        if p.grid != *grid {
            return Err(Error::GridMismatch("fundamental paths on different grids".into()));
        }
    }
    if f.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{} forcing samples for {} grid nodes",
            f.len(),
            grid.len()
        )));
    }
    let origin = node_index(grid, x0).ok_or_else(|| Error::GridMismatch(format!("anchor {x0} is not a grid node")))?;
    let ga: Vec<ComplexMatrix> = phi_conj.states.iter().zip(f).map(|(s, f)| s.y.adjoint() * f).collect();
    let gb: Vec<ComplexMatrix> = theta_conj.states.iter().zip(f).map(|(s, f)| s.y.adjoint() * f).collect();
    let a = cumulative(grid, &ga);
    let b = cumulative(grid, &gb);
    let states = (0..grid.len())
        .map(|i| {
            let ai = &a[i] - &a[origin];
            let bi = &b[i] - &b[origin];
            OperatorState {
                y: &theta.states[i].y * &ai - &phi.states[i].y * &bi,
                dy: &theta.states[i].dy * &ai - &phi.states[i].dy * &bi,
            }
        })
        .collect();
    Ok(SolutionPath {
        grid: grid.clone(),
        states,
        z: theta.z,
        x0: grid[origin],
    })
}

/// `(f1, f2') − (f1', f2)`, conjugate-linear in the first slot.
pub fn wronskian_vector(f1: &VectorState, f2: &VectorState) -> Result<Complex64> {
    if f1.y.len() != f2.y.len() {
        return Err(Error::DimError {
            expected: f1.y.len(),
            found: f2.y.len(),
        });
    }
    Ok(f1.y.dotc(&f2.dy) - f1.dy.dotc(&f2.y))
}

/// `F1 F2' − F1' F2`.
pub fn wronskian_operator(f1: &OperatorState, f2: &OperatorState) -> Result<ComplexMatrix> {
    if f1.y.ncols() != f2.y.nrows() {
        return Err(Error::DimError {
            expected: f1.y.ncols(),
            found: f2.y.nrows(),
        });
    }
    Ok(&f1.y * &f2.dy - &f1.dy * &f2.y)
}

/// How `τ` is applied inside Green's formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMode {
    /// Both paths solve `τ y = z y` at their own `z`.
    Equation,
    /// `y''` from differences of `y'`; `V` cancels from the formula.
    Numerical,
}

/// Three-point derivative on a nonuniform grid.
fn differentiate(xs: &[f64], ys: &[ComplexVector]) -> Vec<ComplexVector> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let (l, m, r) = if i == 0 {
                (0, 1, 2)
            } else if i == n - 1 {
                (n - 3, n - 2, n - 1)
            } else {
                (i - 1, i, i + 1)
            };
            // derivative of the quadratic through (l, m, r) at xs[i]
            let x = xs[i];
            let (a, b, c) = (xs[l], xs[m], xs[r]);
            let wl = ((x - b) + (x - c)) / ((a - b) * (a - c));
            let wm = ((x - a) + (x - c)) / ((b - a) * (b - c));
            let wr = ((x - a) + (x - b)) / ((c - a) * (c - b));
            &ys[l] * Complex64::new(wl, 0.0) + &ys[m] * Complex64::new(wm, 0.0) + &ys[r] * Complex64::new(wr, 0.0)
        })
        .collect()
}

/// `|∫_{x1}^{x2} [(τf, g) − (f, τg)] − (W(f,g)(x2) − W(f,g)(x1))|`.
pub fn green_formula_residual(
    f: &SolutionPath<VectorState>,
    g: &SolutionPath<VectorState>,
    x1: f64,
    x2: f64,
    mode: TauMode,
) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch("paths on different grids".into()));
    }
    let i1 = f.index_of(x1).ok_or_else(|| Error::GridMismatch(format!("{x1} is not a grid node")))?;
    let i2 = f.index_of(x2).ok_or_else(|| Error::GridMismatch(format!("{x2} is not a grid node")))?;
    let (i1, i2) = (i1.min(i2), i1.max(i2));
    let xs = &f.grid[i1..=i2];
    let integrand: Vec<Complex64> = match mode {
        TauMode::Equation => {
            let factor = f.z.conj() - g.z;
            (i1..=i2).map(|i| factor * f.states[i].y.dotc(&g.states[i].y)).collect()
        }
        TauMode::Numerical => {
            if f.grid.len() < 3 {
                return Err(Error::GridMismatch("need at least three nodes".into()));
            }
            let fdy: Vec<ComplexVector> = f.states.iter().map(|s| s.dy.clone()).collect();
            let gdy: Vec<ComplexVector> = g.states.iter().map(|s| s.dy.clone()).collect();
            let f2 = differentiate(&f.grid, &fdy);
            let g2 = differentiate(&g.grid, &gdy);
            (i1..=i2)
                .map(|i| -f2[i].dotc(&g.states[i].y) + f.states[i].y.dotc(&g2[i]))
                .collect()
        }
    };
    let integral = *cumulative(xs, &integrand).last().expect("nonempty range");
    let w2 = wronskian_vector(&f.states[i2], &g.states[i2])?;
    let w1 = wronskian_vector(&f.states[i1], &g.states[i1])?;
    Ok((integral - (w2 - w1)).norm())
}

#[derive(Debug, Clone, Copy)]
pub struct LowerBoundReport {
    pub length: f64,
    /// `∫_{x0}^x ‖z − V‖`.
    pub shifted_integral: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// Checks `∫_{x0}^x ‖y‖² ≥ c0² (x − x0)³ ‖(y(x0), y'(x0))‖²` with `c0 = 1/10`
/// for a homogeneous solution, after certifying the interval is short
/// enough. The certificate uses the Gronwall constant `√2 e^{L I}` for the
/// remainder `y − (y0 + (x − x0) y1)`, `I = ∫‖z − V‖`, which must not exceed
/// `√3 c0 / I` for the bracketed factor to stay above `c0`.
pub fn ivp_lower_bound_check(
    v: &PotentialModel,
    path: &SolutionPath<VectorState>,
    x0: f64,
    x: f64,
) -> Result<LowerBoundReport> {
    let i0 = path.index_of(x0).ok_or_else(|| Error::GridMismatch(format!("{x0} is not a grid node")))?;
    let i1 = path.index_of(x).ok_or_else(|| Error::GridMismatch(format!("{x} is not a grid node")))?;
    let length = x - x0;
    if length < 0.0 || length > 1.0 {
        return Err(Error::RegimeNotSatisfied {
            length,
            detail: "needs 0 ≤ x − x0 ≤ 1".into(),
        });
    }
    let shifted_integral = v.shifted_norm_integral(path.z, x0, x)?;
    let gronwall = std::f64::consts::SQRT_2 * (length * shifted_integral).exp();
    if gronwall * shifted_integral > 3f64.sqrt() * LOWER_BOUND_C0 {
        return Err(Error::RegimeNotSatisfied {
            length,
            detail: format!(
                "remainder constant {:.3e} times ∫‖z − V‖ = {:.3e} exceeds √3·c0",
                gronwall, shifted_integral
            ),
        });
    }
    let norms: Vec<f64> = path.states[i0..=i1].iter().map(|s| s.y.norm_squared()).collect();
    let lhs = if i1 > i0 {
        *cumulative(&path.grid[i0..=i1], &norms).last().expect("nonempty")
    } else {
        0.0
    };
    let s0 = &path.states[i0];
    let rhs = LOWER_BOUND_C0 * LOWER_BOUND_C0 * length.powi(3) * (s0.y.norm_squared() + s0.dy.norm_squared());
    Ok(LowerBoundReport {
        length,
        shifted_integral,
        lhs,
        rhs,
        passed: lhs >= rhs,
    })
}

/// Empirical constant `C` with `sup_x ‖y(x)‖ + ‖y'(x)‖ ≤ C (‖h0‖ + ‖h1‖)`,
/// measured from the unit initial data.
pub fn empirical_continuity_constant(
    v: &PotentialModel,
    z: Complex64,
    x0: f64,
    grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let d = v.dim();
    let mut worst: f64 = 0.0;
    for j in 0..2 * d {
        let mut h = [ComplexVector::zeros(d), ComplexVector::zeros(d)];
        h[j / d][j % d] = Complex64::new(1.0, 0.0);
        let path = solve_vector_ivp(v, z, x0, &h[0], &h[1], &Forcing::Zero, grid, cfg)?;
        let size = path
            .states
            .iter()
            .map(|s| s.y.norm() + s.dy.norm())
            .fold(0.0, f64::max);
        worst = worst.max(size);
    }
    // unit data in each of the 2d real-orthogonal directions; a general
    // datum splits into at most √(2d) times its norm
    Ok(worst * ((2 * d) as f64).sqrt())
}

/// Max operator norm over a path, a convenience for diagnostics.
pub fn path_sup_norm(path: &SolutionPath<OperatorState>) -> f64 {
    path.states.iter().map(|s| op_norm(&s.y)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, random_hermitian, random_vector};
    use crate::potential::{random_piecewise_constant, Extension, Interpolation};
    use crate::quadrature::linspace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> ComplexVector {
        ComplexVector::from_element(1, c64(v, 0.0))
    }

    fn free_oracle(z: Complex64, t: f64, h0: &ComplexVector, h1: &ComplexVector) -> (ComplexVector, ComplexVector) {
        let k = principal_sqrt(z);
        if k.norm() == 0.0 {
            return (h0 + h1 * c64(t, 0.0), h1.clone());
        }
        let (c, s) = ((k * t).cos(), (k * t).sin());
        (h0 * c + h1 * (s / k), h0 * (-k * s) + h1 * c)
    }

    fn all_methods() -> [IntegratorConfig; 3] {
        [
            IntegratorConfig::with_method(Method::Picard),
            IntegratorConfig::with_method(Method::RkAdaptive),
            IntegratorConfig::with_method(Method::Exact),
        ]
    }

    #[test]
    fn constant_solution_for_trivial_problem() {
        let v = PotentialModel::zero(1, 0.0, 2.0);
        let grid = linspace(0.0, 2.0, 20);
        for cfg in all_methods() {
            let p = solve_vector_ivp(&v, c64(0.0, 0.0), 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg).unwrap();
            for s in &p.states {
                assert!((s.y[0] - c64(1.0, 0.0)).norm() < 1e-13);
                assert!(s.dy[0].norm() < 1e-13);
            }
        }
    }

    #[test]
    fn free_closed_form_both_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = PotentialModel::zero(2, 0.0, 3.0);
        let grid = linspace(0.0, 3.0, 600);
        let x0 = grid[200];
        let h0 = random_vector(&mut rng, 2);
        let h1 = random_vector(&mut rng, 2);
        for z in [c64(2.0, 1.0), c64(-1.0, 0.5), c64(0.0, 0.0)] {
            for cfg in all_methods() {
                let p = solve_vector_ivp(&v, z, x0, &h0, &h1, &Forcing::Zero, &grid, &cfg).unwrap();
                for (x, s) in p.grid.iter().zip(&p.states) {
                    let (y, dy) = free_oracle(z, x - x0, &h0, &h1);
                    assert!((&s.y - y).camax() < 1e-8, "{:?} {z} {x}", cfg.method);
                    assert!((&s.dy - dy).camax() < 1e-8, "{:?} {z} {x}", cfg.method);
                }
            }
        }
    }

    #[test]
    fn cosh_for_unit_potential() {
        let v = PotentialModel::constant(0.0, 1.0, HermitianMatrix::identity(1), Extension::Zero).unwrap();
        let grid = linspace(0.0, 1.0, 100);
        for cfg in all_methods() {
            let p = solve_vector_ivp(&v, c64(0.0, 0.0), 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg).unwrap();
            assert!((p.states[100].y[0].re - 1f64.cosh()).abs() < 1e-9, "{:?}", cfg.method);
            assert!((p.states[100].y[0].re - 1.5430806).abs() < 1e-7);
        }
    }

    #[test]
    fn picard_terms_vanish_without_potential() {
        let v = PotentialModel::zero(1, 0.0, 1.0);
        let grid = linspace(0.0, 1.0, 10);
        let terms = picard_iterates(&v, c64(1.0, 1.0), 0.0, &scalar(1.0), &scalar(2.0), &Forcing::Zero, &grid, 3).unwrap();
        for t in &terms[1..] {
            assert!(t.states.iter().all(|s| s.y.camax() == 0.0 && s.dy.camax() == 0.0));
        }
    }

    #[test]
    fn picard_partial_sums_follow_cosh_series() {
        let v = PotentialModel::constant(0.0, 1.0, HermitianMatrix::identity(1), Extension::Zero).unwrap();
        let grid = linspace(0.0, 1.0, 200);
        let terms = picard_iterates(&v, c64(0.0, 0.0), 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, 6).unwrap();
        let mut worst: f64 = 0.0;
        for (i, x) in grid.iter().enumerate() {
            let sum: Complex64 = terms.iter().map(|t| t.states[i].y[0]).sum();
            worst = worst.max((sum - c64(x.cosh(), 0.0)).norm());
        }
        // Taylor remainder of cosh after x^6/6!
        assert!(worst <= 1.0 / 5040.0, "{worst}");
        // each term is x^{2n}/(2n)!
        assert!((terms[3].states[200].y[0].re - 1.0 / 720.0).abs() < 1e-10);
    }

    #[test]
    fn picard_bound_on_random_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let v = random_piecewise_constant(&mut rng, 2, 0.0, 8, 0.25, 1.5);
            let grid = linspace(0.0, 2.0, 400);
            let h0 = random_vector(&mut rng, 2);
            let h1 = random_vector(&mut rng, 2);
            let f = Forcing::Sampled(grid.iter().map(|_| random_vector(&mut rng, 2)).collect());
            let report = picard_bound_check(&v, c64(1.0, 2.0), 0.5, &h0, &h1, &f, &grid, 10).unwrap();
            assert!(report.holds, "{:?}", report.terms);
        }
    }

    #[test]
    fn operator_columns_match_vector_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_piecewise_constant(&mut rng, 3, 0.0, 5, 0.2, 1.0);
        let grid = linspace(0.0, 1.0, 50);
        let y0 = ComplexMatrix::from_fn(3, 3, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let y1 = ComplexMatrix::from_fn(3, 3, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        for cfg in all_methods() {
            let op = solve_operator_ivp(&v, c64(0.5, 1.0), 0.4, &y0, &y1, &Forcing::Zero, &grid, &cfg).unwrap();
            for j in 0..3 {
                let col = solve_vector_ivp(&v, c64(0.5, 1.0), 0.4, &y0.column(j).into_owned(), &y1.column(j).into_owned(), &Forcing::Zero, &grid, &cfg).unwrap();
                for (a, b) in op.states.iter().zip(&col.states) {
                    assert!((a.y.column(j) - &b.y).camax() <= 1e-14);
                    assert!((a.dy.column(j) - &b.dy).camax() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn operator_free_cosine() {
        let v = PotentialModel::zero(2, 0.0, 2.0);
        let grid = linspace(0.0, 2.0, 40);
        let z = c64(3.0, -0.5);
        let p = solve_operator_ivp(&v, z, 0.0, &ComplexMatrix::identity(2, 2), &ComplexMatrix::zeros(2, 2), &Forcing::Zero, &grid, &IntegratorConfig::with_method(Method::Exact)).unwrap();
        for (x, s) in grid.iter().zip(&p.states) {
            let c = (principal_sqrt(z) * *x).cos();
            assert!((&s.y - ComplexMatrix::identity(2, 2) * c).camax() < 1e-13);
        }
    }

    #[test]
    fn methods_agree_on_random_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let d = 1 + trial % 4;
            let v = random_piecewise_constant(&mut rng, d, 0.0, 6, 0.3, 1.0);
            let grid = linspace(0.0, 1.8, 1800);
            let h0 = random_vector(&mut rng, d);
            let h1 = random_vector(&mut rng, d);
            let z = c64(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0));
            let mut cfg = IntegratorConfig::with_method(Method::Picard);
            cfg.abs_tol = 1e-9;
            cfg.rel_tol = 1e-9;
            let picard = solve_vector_ivp(&v, z, 0.6, &h0, &h1, &Forcing::Zero, &grid, &cfg).unwrap();
            cfg.method = Method::RkAdaptive;
            let rk = solve_vector_ivp(&v, z, 0.6, &h0, &h1, &Forcing::Zero, &grid, &cfg).unwrap();
            let allowed = 10.0 * (cfg.abs_tol + cfg.rel_tol);
            for (a, b) in picard.states.iter().zip(&rk.states) {
                assert!((&a.y - &b.y).camax() <= allowed, "trial {trial}: {}", (&a.y - &b.y).camax());
                assert!((&a.dy - &b.dy).camax() <= allowed, "trial {trial}: {} {}", (&a.dy - &b.dy).camax(), a.dy.norm());
            }
        }
    }

    #[test]
    fn integral_form_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.25, 1.0);
        let grid = linspace(0.0, 1.0, 1000);
        let h0 = random_vector(&mut rng, 2);
        let h1 = random_vector(&mut rng, 2);
        let f = Forcing::Sampled(grid.iter().map(|x| ComplexVector::from_element(2, c64(x.sin(), 0.0))).collect());
        for method in [Method::Picard, Method::RkAdaptive] {
            let cfg = IntegratorConfig::with_method(method);
            let p = solve_vector_ivp(&v, c64(1.0, 1.0), 0.3, &h0, &h1, &f, &grid, &cfg).unwrap();
            let r = integral_equation_residual(&v, &p, &f).unwrap();
            let worst = r.iter().cloned().fold(0.0, f64::max);
            assert!(worst < 1e-9, "{method:?} {worst}");
        }
    }

    #[test]
    fn exact_rejects_forcing_and_linear() {
        let v = PotentialModel::zero(1, 0.0, 1.0);
        let grid = linspace(0.0, 1.0, 4);
        let f = Forcing::Sampled(vec![scalar(1.0); 5]);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        assert!(matches!(
            solve_vector_ivp(&v, c64(0.0, 1.0), 0.0, &scalar(1.0), &scalar(0.0), &f, &grid, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let lin = PotentialModel::new(
            vec![0.0, 1.0],
            vec![HermitianMatrix::zeros(1), HermitianMatrix::identity(1)],
            Interpolation::Linear,
            Extension::Zero,
        )
        .unwrap();
        assert!(matches!(
            solve_vector_ivp(&lin, c64(0.0, 1.0), 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn linear_potential_picard_matches_rk() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let values = (0..5).map(|_| random_hermitian(&mut rng, 2, 1.0)).collect();
        let v = PotentialModel::new(linspace(0.0, 1.0, 4), values, Interpolation::Linear, Extension::Zero).unwrap();
        let grid = linspace(0.0, 1.0, 800);
        let h0 = random_vector(&mut rng, 2);
        let h1 = random_vector(&mut rng, 2);
        let a = solve_vector_ivp(&v, c64(0.0, 1.0), 0.0, &h0, &h1, &Forcing::Zero, &grid, &IntegratorConfig::with_method(Method::Picard)).unwrap();
        let b = solve_vector_ivp(&v, c64(0.0, 1.0), 0.0, &h0, &h1, &Forcing::Zero, &grid, &IntegratorConfig::with_method(Method::RkAdaptive)).unwrap();
        assert!((&a.states[800].y - &b.states[800].y).camax() < 1e-9);
    }

    #[test]
    fn solutions_are_entire_in_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.5, 1.0);
        let grid = linspace(0.0, 2.0, 8);
        let h0 = random_vector(&mut rng, 2);
        let h1 = random_vector(&mut rng, 2);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let at = |z: Complex64| solve_vector_ivp(&v, z, 0.0, &h0, &h1, &Forcing::Zero, &grid, &cfg).unwrap().states[8].y.clone();
        let z0 = c64(0.7, -0.2);
        let r = 1.5;
        let n = 64;
        let mut mean = ComplexVector::zeros(2);
        for j in 0..n {
            let w = Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
            mean += at(z0 + w) / c64(n as f64, 0.0);
        }
        assert!((mean - at(z0)).camax() < 1e-6);
    }

    #[test]
    fn continuity_in_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.25, 1.0);
        let grid = linspace(0.0, 1.0, 100);
        let z = c64(1.0, 1.0);
        let cfg = IntegratorConfig::with_method(Method::Picard);
        let c_emp = empirical_continuity_constant(&v, z, 0.0, &grid, &cfg).unwrap();
        let constants = picard_bound_constants(z, 1.0);
        let vint = v.shifted_norm_integral(c64(0.0, 0.0), 0.0, 1.0).unwrap();
        let c_cert = constants.c0 * (constants.c1 * vint).exp();
        assert!(c_emp <= c_cert);
        let h0 = random_vector(&mut rng, 2);
        let h1 = random_vector(&mut rng, 2);
        let f = Forcing::Sampled(grid.iter().map(|_| random_vector(&mut rng, 2)).collect());
        let base = solve_vector_ivp(&v, z, 0.0, &h0, &h1, &f, &grid, &cfg).unwrap();
        for delta in [1e-2, 1e-4, 1e-6] {
            let dh0 = random_vector(&mut rng, 2) * c64(delta, 0.0);
            let dh1 = random_vector(&mut rng, 2) * c64(delta, 0.0);
            let moved = solve_vector_ivp(&v, z, 0.0, &(&h0 + &dh0), &(&h1 + &dh1), &f, &grid, &cfg).unwrap();
            let change = base
                .states
                .iter()
                .zip(&moved.states)
                .map(|(a, b)| (&a.y - &b.y).norm() + (&a.dy - &b.dy).norm())
                .fold(0.0, f64::max);
            assert!(change <= c_emp * (dh0.norm() + dh1.norm()) * (1.0 + 1e-8));
            // forcing perturbation against the certified constant
            let Forcing::Sampled(fs) = &f else { unreachable!() };
            let df: Vec<ComplexVector> = fs.iter().map(|_| random_vector(&mut rng, 2) * c64(delta, 0.0)).collect();
            let pushed = Forcing::Sampled(fs.iter().zip(&df).map(|(a, b)| a + b).collect());
            let moved = solve_vector_ivp(&v, z, 0.0, &h0, &h1, &pushed, &grid, &cfg).unwrap();
            let change = base.states.iter().zip(&moved.states).map(|(a, b)| (&a.y - &b.y).norm() + (&a.dy - &b.dy).norm()).fold(0.0, f64::max);
            let df_int = *cumulative(&grid, &df.iter().map(|v| v.norm()).collect::<Vec<_>>()).last().unwrap();
            assert!(change <= c_cert * df_int);
        }
    }

    #[test]
    fn textbook_wronskian() {
        let v = PotentialModel::zero(1, 0.0, 3.0);
        let grid = linspace(0.0, 3.0, 30);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let z = c64(1.0, 0.0);
        let c = solve_vector_ivp(&v, z, 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg).unwrap();
        let s = solve_vector_ivp(&v, z, 0.0, &scalar(0.0), &scalar(1.0), &Forcing::Zero, &grid, &cfg).unwrap();
        for (a, b) in c.states.iter().zip(&s.states) {
            assert!((wronskian_vector(a, b).unwrap() - c64(1.0, 0.0)).norm() < 1e-13);
            assert!(wronskian_vector(a, a).unwrap().norm() < 1e-15);
        }
        assert!(matches!(
            wronskian_vector(&c.states[0], &VectorState { y: ComplexVector::zeros(2), dy: ComplexVector::zeros(2) }),
            Err(Error::DimError { .. })
        ));
    }

    #[test]
    fn operator_wronskian_of_conjugate_pair_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let v = random_piecewise_constant(&mut rng, 3, 0.0, 5, 0.4, 1.0);
        let grid = linspace(0.0, 2.0, 40);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let z = c64(0.3, 1.2);
        let alpha = crate::linalg::BoundaryOperator::new(random_hermitian(&mut rng, 3, 1.0));
        let run = |z: Complex64| {
            solve_operator_ivp(&v, z, 0.0, alpha.cos(), alpha.sin(), &Forcing::Zero, &grid, &cfg).unwrap()
        };
        let theta = run(z);
        let theta_bar = run(z.conj());
        for (a, b) in theta_bar.states.iter().zip(&theta.states) {
            let w = wronskian_operator(&a.adjoint(), b).unwrap();
            assert!(w.camax() < 1e-12);
        }
    }

    #[test]
    fn green_formula_for_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 5, 0.4, 1.0);
        let grid = linspace(0.0, 2.0, 400);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let z = c64(0.5, 0.8);
        let f = solve_vector_ivp(&v, z, 0.0, &random_vector(&mut rng, 2), &random_vector(&mut rng, 2), &Forcing::Zero, &grid, &cfg).unwrap();
        let g = solve_vector_ivp(&v, z.conj(), 0.0, &random_vector(&mut rng, 2), &random_vector(&mut rng, 2), &Forcing::Zero, &grid, &cfg).unwrap();
        assert!(green_formula_residual(&f, &g, 0.0, 2.0, TauMode::Equation).unwrap() <= 1e-8);
        // same z on both sides: the integral is genuinely nonzero
        let g2 = solve_vector_ivp(&v, z, 0.0, &random_vector(&mut rng, 2), &random_vector(&mut rng, 2), &Forcing::Zero, &grid, &cfg).unwrap();
        assert!(green_formula_residual(&f, &g2, 0.5, 1.5, TauMode::Equation).unwrap() <= 1e-8);
    }

    fn smooth_pair(h: f64) -> (SolutionPath<VectorState>, SolutionPath<VectorState>) {
        let n = (1.0 / h).round() as usize;
        let grid = linspace(0.0, 1.0, n);
        let f = grid
            .iter()
            .map(|&x| VectorState {
                y: ComplexVector::from_vec(vec![c64(x.sin(), x * x), c64((2.0 * x).cos(), 0.0)]),
                dy: ComplexVector::from_vec(vec![c64(x.cos(), 2.0 * x), c64(-2.0 * (2.0 * x).sin(), 0.0)]),
            })
            .collect();
        let g = grid
            .iter()
            .map(|&x| VectorState {
                y: ComplexVector::from_vec(vec![c64(x.exp(), 0.0), c64(0.0, x.powi(3))]),
                dy: ComplexVector::from_vec(vec![c64(x.exp(), 0.0), c64(0.0, 3.0 * x * x)]),
            })
            .collect();
        let z = c64(0.0, 0.0);
        (
            SolutionPath { grid: grid.clone(), states: f, z, x0: 0.0 },
            SolutionPath { grid, states: g, z, x0: 0.0 },
        )
    }

    #[test]
    fn green_formula_for_smooth_functions_refines() {
        let (f, g) = smooth_pair(1e-3);
        let fine = green_formula_residual(&f, &g, 0.0, 1.0, TauMode::Numerical).unwrap();
        assert!(fine <= 1e-6, "{fine}");
        let (f, g) = smooth_pair(4e-3);
        let coarse = green_formula_residual(&f, &g, 0.0, 1.0, TauMode::Numerical).unwrap();
        assert!(coarse > fine);
    }

    #[test]
    fn variation_of_constants_free_quadratic() {
        let v = PotentialModel::zero(1, 0.0, 1.0);
        let grid = linspace(0.0, 1.0, 100);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let bc = crate::linalg::BoundaryOperator::dirichlet(1);
        let z = c64(0.0, 0.0);
        let theta = solve_operator_ivp(&v, z, 0.0, bc.cos(), bc.sin(), &Forcing::Zero, &grid, &cfg).unwrap();
        let phi = solve_operator_ivp(&v, z, 0.0, &(-bc.sin()), bc.cos(), &Forcing::Zero, &grid, &cfg).unwrap();
        let f = vec![ComplexMatrix::identity(1, 1); grid.len()];
        let yp = variation_of_constants(&theta, &phi, &theta, &phi, &f, 0.0).unwrap();
        for (x, s) in grid.iter().zip(&yp.states) {
            assert!((s.y[(0, 0)] - c64(-x * x / 2.0, 0.0)).norm() < 1e-14);
            assert!((s.dy[(0, 0)] - c64(-x, 0.0)).norm() < 1e-13);
        }
        let zero = vec![ComplexMatrix::zeros(1, 1); grid.len()];
        let yp = variation_of_constants(&theta, &phi, &theta, &phi, &zero, 0.0).unwrap();
        assert!(yp.states.iter().all(|s| s.y.camax() == 0.0));
        assert!(matches!(
            variation_of_constants(&theta, &phi, &theta, &phi, &zero[1..], 0.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn variation_of_constants_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.25, 1.0);
        let grid = linspace(0.0, 1.0, 1000);
        let z = c64(0.4, 0.9);
        let bc = crate::linalg::BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let exact = IntegratorConfig::with_method(Method::Exact);
        let run = |z: Complex64, y0: &ComplexMatrix, y1: &ComplexMatrix| {
            solve_operator_ivp(&v, z, 0.0, y0, y1, &Forcing::Zero, &grid, &exact).unwrap()
        };
        let ms = -bc.sin();
        let theta = run(z, bc.cos(), bc.sin());
        let phi = run(z, &ms, bc.cos());
        let theta_bar = run(z.conj(), bc.cos(), bc.sin());
        let phi_bar = run(z.conj(), &ms, bc.cos());
        let f: Vec<ComplexMatrix> = grid
            .iter()
            .map(|&x| ComplexMatrix::from_fn(2, 2, |i, j| c64((x * (i + 1) as f64).sin(), (x + j as f64).cos())))
            .collect();
        let yp = variation_of_constants(&theta, &phi, &theta_bar, &phi_bar, &f, 0.0).unwrap();
        let zero = ComplexMatrix::zeros(2, 2);
        let direct = solve_operator_ivp(&v, z, 0.0, &zero, &zero, &Forcing::Sampled(f), &grid, &IntegratorConfig::with_method(Method::RkAdaptive)).unwrap();
        for (a, b) in yp.states.iter().zip(&direct.states) {
            assert!((&a.y - &b.y).camax() <= 1e-8, "{}", (&a.y - &b.y).camax());
        }
    }

    #[test]
    fn lower_bound_examples() {
        let v = PotentialModel::zero(1, 0.0, 1.0);
        let grid = linspace(0.0, 1.0, 100);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        let one = solve_vector_ivp(&v, c64(0.0, 0.0), 0.0, &scalar(1.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg).unwrap();
        let r = ivp_lower_bound_check(&v, &one, 0.0, 0.5).unwrap();
        assert!(r.passed);
        assert!((r.lhs - 0.5).abs() < 1e-12);
        assert!((r.rhs - 0.01 * 0.125).abs() < 1e-15);
        let zero = solve_vector_ivp(&v, c64(0.0, 0.0), 0.0, &scalar(0.0), &scalar(0.0), &Forcing::Zero, &grid, &cfg).unwrap();
        assert!(ivp_lower_bound_check(&v, &zero, 0.0, 0.5).unwrap().passed);
        assert!(matches!(
            ivp_lower_bound_check(&v, &one, 0.0, 0.5).map(|_| ()).and(
                ivp_lower_bound_check(&PotentialModel::constant(0.0, 1.0, HermitianMatrix::scaled_identity(1, 50.0), Extension::Zero).unwrap(), &one, 0.0, 0.5).map(|_| ())
            ),
            Err(Error::RegimeNotSatisfied { .. })
        ));
    }

    #[test]
    fn lower_bound_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let v = random_piecewise_constant(&mut rng, 3, 0.0, 2, 0.05, 0.15);
        let grid = linspace(0.0, 0.1, 100);
        let cfg = IntegratorConfig::with_method(Method::Exact);
        for _ in 0..50 {
            let p = solve_vector_ivp(&v, c64(0.0, 1.0), 0.0, &random_vector(&mut rng, 3), &random_vector(&mut rng, 3), &Forcing::Zero, &grid, &cfg).unwrap();
            let r = ivp_lower_bound_check(&v, &p, 0.0, 0.1).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn csv_layout() {
        let v = PotentialModel::zero(2, 0.0, 1.0);
        let grid = linspace(0.0, 1.0, 2);
        let p = solve_operator_ivp(&v, c64(0.0, 1.0), 0.0, &ComplexMatrix::identity(2, 2), &ComplexMatrix::zeros(2, 2), &Forcing::Zero, &grid, &IntegratorConfig::with_method(Method::Exact)).unwrap();
        let csv = p.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 1 + 2 * 2 * 4);
        assert!(lines[1].starts_with("0,1,0,0,0"));
        let vp = p.column(0).to_csv();
        assert_eq!(vp.lines().next().unwrap(), "x,re_y0,im_y0,re_y1,im_y1,re_dy0,im_dy0,re_dy1,im_dy1");
    }
}
