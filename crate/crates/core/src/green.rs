//! Green's kernel of the half-line operator and resolvent application.

use crate::error::{Error, Result};
use crate::ivp::{OperatorState, SolutionPath, VectorState};
use crate::linalg::{identity, BoundaryOperator, Complex64, ComplexMatrix, ComplexVector};
use crate::potential::PotentialModel;
use crate::quadrature::{cumulative_segmented, extrapolate_to_zero};
use crate::weyl::{fundamental_system, m_function, FundamentalSystem, TruncationSchedule};

/// Offsets from the corner used for the boundary limit of the kernel.
pub const CORNER_OFFSETS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Kernel value with its first and mixed derivatives at `(x, x')`.
#[derive(Debug, Clone)]
pub struct GreenKernelEval {
    pub z: Complex64,
    pub x: f64,
    pub xp: f64,
    pub value: ComplexMatrix,
    pub dx: ComplexMatrix,
    pub dxp: ComplexMatrix,
    pub dxdxp: ComplexMatrix,
}

/// m-functions at `z` and `z̄` for one potential and boundary condition;
/// everything else in this module is assembled from them and the
/// fundamental system.
pub struct GreenContext<'a> {
    v: &'a PotentialModel,
    bc: BoundaryOperator,
    z: Complex64,
    m: ComplexMatrix,
    m_conj: ComplexMatrix,
}

/// `ψ = θ + φ m` at node `i`, at `z` or at `z̄`.
fn weyl_state(fs: &FundamentalSystem, i: usize, conj: bool, m: &ComplexMatrix) -> OperatorState {
    let (t, p) = if conj {
        (&fs.theta_conj.states[i], &fs.phi_conj.states[i])
    } else {
        (&fs.theta.states[i], &fs.phi.states[i])
    };
    OperatorState {
        y: &t.y + &p.y * m,
        dy: &t.dy + &p.dy * m,
    }
}

impl<'a> GreenContext<'a> {
    pub fn new(v: &'a PotentialModel, bc: &BoundaryOperator, z: Complex64, sched: &TruncationSchedule) -> Result<Self> {
        let m = m_function(v, bc, z, sched)?.m;
        let m_conj = m_function(v, bc, z.conj(), sched)?.m;
        Ok(Self {
            v,
            bc: bc.clone(),
            z,
            m,
            m_conj,
        })
    }

    pub fn m(&self) -> &ComplexMatrix {
        &self.m
    }

    /// Fundamental system on `{a} ∪ xs`, sorted and deduplicated.
    pub fn system(&self, xs: &[f64]) -> Result<FundamentalSystem> {
        let a = self.v.a();
        let mut grid = vec![a];
        for &x in xs {
            if !(x >= a) || !x.is_finite() {
                return Err(Error::OutOfDomain { x });
            }
            grid.push(x);
        }
        grid.sort_by(|p, q| p.partial_cmp(q).expect("finite nodes"));
        grid.dedup();
        fundamental_system(self.v, &self.bc, self.z, &grid)
    }

    /// Kernel at nodes `i` (for `x`) and `j` (for `x'`) of `fs`.
    pub fn kernel_at(&self, fs: &FundamentalSystem, i: usize, j: usize) -> GreenKernelEval {
        let (x, xp) = (fs.grid()[i], fs.grid()[j]);
        // x ≤ x': φ(z, x) ψ(z̄, x')*; otherwise ψ(z, x) φ(z̄, x')*
        let (left, right) = if x <= xp {
            (fs.phi.states[i].clone(), weyl_state(fs, j, true, &self.m_conj))
        } else {
            (weyl_state(fs, i, false, &self.m), fs.phi_conj.states[j].clone())
        };
        let (ra, rda) = (right.y.adjoint(), right.dy.adjoint());
        GreenKernelEval {
            z: self.z,
            x,
            xp,
            value: &left.y * &ra,
            dx: &left.dy * &ra,
            dxp: &left.y * &rda,
            dxdxp: &left.dy * &rda,
        }
    }

    pub fn kernel(&self, x: f64, xp: f64) -> Result<GreenKernelEval> {
        let fs = self.system(&[x, xp])?;
        let i = fs.theta.index_of(x).expect("node inserted");
        let j = fs.theta.index_of(xp).expect("node inserted");
        Ok(self.kernel_at(&fs, i, j))
    }

    /// `u = ∫ G(z, x, x') f(x') dx'` and `u'` at every node of `grid`, with
    /// `f` taken as zero beyond the last node. A node may be repeated once to
    /// carry the left and right limits of a jump in `f`.
    pub fn apply(&self, f: &[ComplexVector], grid: &[f64]) -> Result<SolutionPath<VectorState>> {
        if grid.first() != Some(&self.v.a()) {
            return Err(Error::UnsupportedSupport(format!(
                "quadrature grid must start at a = {}",
                self.v.a()
            )));
        }
        if f.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for {} grid nodes",
                f.len(),
                grid.len()
            )));
        }
        if let Some(i) = (1..grid.len()).find(|&i| {
            !(grid[i] >= grid[i - 1]) || (i >= 2 && grid[i] == grid[i - 2]) || (grid[i] == grid[i - 1] && i + 1 == grid.len())
        }) {
            return Err(Error::NonMonotoneGrid { index: i });
        }
        if !grid[grid.len() - 1].is_finite() {
            return Err(Error::UnsupportedSupport("quadrature grid must be finite".into()));
        }
        let d = self.v.dim();
        if let Some(s) = f.iter().find(|s| s.len() != d) {
            return Err(Error::DimError {
                expected: d,
                found: s.len(),
            });
        }
        // distinct nodes with the samples seen from the left and right
        let mut xs = Vec::with_capacity(grid.len());
        let mut left = Vec::with_capacity(grid.len());
        let mut right = Vec::with_capacity(grid.len());
        let mut node_of = Vec::with_capacity(grid.len());
        for (i, &x) in grid.iter().enumerate() {
            if xs.last() == Some(&x) {
                *right.last_mut().expect("node present") = i;
            } else {
                xs.push(x);
                left.push(i);
                right.push(i);
            }
            node_of.push(xs.len() - 1);
        }
        let fs = fundamental_system(self.v, &self.bc, self.z, &xs)?;
        let n = xs.len();
        let psi: Vec<OperatorState> = (0..n).map(|k| weyl_state(&fs, k, false, &self.m)).collect();
        let psi_conj: Vec<OperatorState> = (0..n).map(|k| weyl_state(&fs, k, true, &self.m_conj)).collect();
        let breaks = smooth_breaks(self.v, &xs, |k| left[k] != right[k]);
        // break number j ends segment j and starts segment j + 1
        let sample = |seg: usize, k: usize| match breaks.binary_search(&k) {
            Ok(j) if j == seg => &f[left[k]],
            _ => &f[right[k]],
        };
        let lower = cumulative_segmented(&xs, &breaks, |seg, k| fs.phi_conj.states[k].y.adjoint() * sample(seg, k));
        let upper = cumulative_segmented(&xs, &breaks, |seg, k| psi_conj[k].y.adjoint() * sample(seg, k));
        let total = upper[n - 1].clone();
        let states = node_of
            .iter()
            .map(|&k| {
                let above = &total - &upper[k];
                VectorState {
                    y: &psi[k].y * &lower[k] + &fs.phi.states[k].y * &above,
                    dy: &psi[k].dy * &lower[k] + &fs.phi.states[k].dy * &above,
                }
            })
            .collect();
        Ok(SolutionPath {
            grid: grid.to_vec(),
            states,
            z: self.z,
            x0: grid[0],
        })
    }
}

/// Interior nodes of `xs` where integrands lose smoothness: potential nodes
/// and nodes flagged by `extra`.
fn smooth_breaks(v: &PotentialModel, xs: &[f64], extra: impl Fn(usize) -> bool) -> Vec<usize> {
    (1..xs.len().saturating_sub(1))
        .filter(|&k| extra(k) || v.grid().iter().any(|&g| (g - xs[k]).abs() <= 1e-12 * g.abs().max(1.0)))
        .collect()
}

pub fn green_kernel(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    x: f64,
    xp: f64,
    sched: &TruncationSchedule,
) -> Result<GreenKernelEval> {
    GreenContext::new(v, bc, z, sched)?.kernel(x, xp)
}

pub fn apply_resolvent(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    f: &[ComplexVector],
    quad_grid: &[f64],
    sched: &TruncationSchedule,
) -> Result<SolutionPath<VectorState>> {
    GreenContext::new(v, bc, z, sched)?.apply(f, quad_grid)
}

/// `‖sin(α) u'(a) + cos(α) u(a)‖` for a resolvent output.
pub fn boundary_residual(u: &SolutionPath<VectorState>, bc: &BoundaryOperator) -> f64 {
    let s0 = &u.states[0];
    (bc.sin() * &s0.dy + bc.cos() * &s0.y).norm()
}

/// One-vector form of the identity `m = C₂ C₁⁻¹` from the resolvent side:
/// with `u` the boundary-side solution built from `f0` on `[a, c]`,
/// `g = −∫_a^c φ(z̄)^* f0`, `T = ∫_a^c θ(z̄)^* f0` and
/// `h = cos(α) u'(a) − sin(α) u(a) + T`, returns `‖h − m g‖`.
///
/// Here `u = −R(z) f0 χ_[a,c]`; with the resolvent's own sign the same
/// combination comes out negated.
pub fn resolvent_consistency(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    f0: &ComplexVector,
    c: f64,
    n: usize,
    sched: &TruncationSchedule,
) -> Result<f64> {
    let a = v.a();
    if !(c > a) {
        return Err(Error::InvalidConfig(format!("support end {c} must lie beyond a = {a}")));
    }
    let ctx = GreenContext::new(v, bc, z, sched)?;
    let mut grid = crate::quadrature::linspace(a, c, n.max(2));
    for b in v.breakpoints_between(a, c) {
        grid.push(b);
    }
    grid.sort_by(|p, q| p.partial_cmp(q).expect("finite nodes"));
    grid.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * p.abs().max(1.0));
    let f: Vec<ComplexVector> = grid.iter().map(|_| f0.clone()).collect();
    let resolved = ctx.apply(&f, &grid)?;
    let fs = fundamental_system(v, bc, z, &grid)?;
    let breaks = smooth_breaks(v, &grid, |_| false);
    let last = grid.len() - 1;
    let g = -cumulative_segmented(&grid, &breaks, |_, i| fs.phi_conj.states[i].y.adjoint() * f0)[last].clone();
    let t = cumulative_segmented(&grid, &breaks, |_, i| fs.theta_conj.states[i].y.adjoint() * f0)[last].clone();
    let u = -&resolved.states[0].y;
    let du = -&resolved.states[0].dy;
    let h = bc.cos() * du - bc.sin() * u + t;
    Ok((h - ctx.m() * g).norm())
}

/// The boundary sandwich `(−sin α, cos α) [[G, G_x'], [G_x, G_xx']] (−sin α; cos α)`
/// at the corner `x = a`, `x' → a+`, extrapolated from `CORNER_OFFSETS`.
pub fn m_from_green_boundary(
    v: &PotentialModel,
    bc: &BoundaryOperator,
    z: Complex64,
    sched: &TruncationSchedule,
) -> Result<ComplexMatrix> {
    let ctx = GreenContext::new(v, bc, z, sched)?;
    let a = v.a();
    let xs: Vec<f64> = CORNER_OFFSETS.iter().map(|h| a + h).collect();
    let fs = ctx.system(&xs)?;
    let (s, c) = (bc.sin(), bc.cos());
    let values: Vec<ComplexMatrix> = xs
        .iter()
        .map(|&xp| {
            let j = fs.theta.index_of(xp).expect("node inserted");
            let k = ctx.kernel_at(&fs, 0, j);
            s * &k.value * s - s * &k.dxp * c - c * &k.dx * s + c * &k.dxdxp * c
        })
        .collect();
    Ok(extrapolate_to_zero(&CORNER_OFFSETS, &values))
}

/// Jump of `∂_x G` across the diagonal at `x`, from one-sided derivatives.
pub fn derivative_jump(ctx: &GreenContext, x: f64) -> Result<ComplexMatrix> {
    let fs = ctx.system(&[x])?;
    let i = fs.theta.index_of(x).expect("node inserted");
    // above the diagonal uses the ψ(z, x) φ(z̄, x')* branch
    let psi = weyl_state(&fs, i, false, &ctx.m);
    let psi_conj = weyl_state(&fs, i, true, &ctx.m_conj);
    let upper = &psi.dy * fs.phi_conj.states[i].y.adjoint();
    let lower = &fs.phi.states[i].dy * psi_conj.y.adjoint();
    Ok(upper - lower)
}

/// Rows `x, x'`, then row-major `Re G_jk, Im G_jk`.
pub fn kernel_csv(evals: &[GreenKernelEval]) -> String {
    let d = evals.first().map_or(0, |e| e.value.nrows());
    let mut out = String::from("x,xp");
    for j in 0..d {
        for k in 0..d {
            out.push_str(&format!(",re_g{j}{k},im_g{j}{k}"));
        }
    }
    out.push('\n');
    for e in evals {
        out.push_str(&format!("{},{}", e.x, e.xp));
        for j in 0..d {
            for k in 0..d {
                out.push_str(&format!(",{},{}", e.value[(j, k)].re, e.value[(j, k)].im));
            }
        }
        out.push('\n');
    }
    out
}

/// `identity(d)` scaled by `−1`: the expected derivative jump.
pub fn expected_jump(d: usize) -> ComplexMatrix {
    -identity(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, op_norm, principal_sqrt, random_hermitian, random_vector, HermitianMatrix, I};
    use crate::potential::random_piecewise_constant;
    use crate::quadrature::linspace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sched() -> TruncationSchedule {
        TruncationSchedule::doubling(0.0, 10.0, 1280.0, 1e-10)
    }

    #[test]
    fn free_kernel_closed_form() {
        let v = PotentialModel::zero(1, 0.0, 10.0);
        let bc = BoundaryOperator::dirichlet(1);
        let ctx = GreenContext::new(&v, &bc, I, &sched()).unwrap();
        let k = principal_sqrt(I);
        for (x, xp) in [(0.3, 1.2), (1.2, 0.3), (0.7, 0.7), (2.0, 5.0)] {
            let lo: f64 = f64::min(x, xp);
            let hi: f64 = f64::max(x, xp);
            let oracle = (k * lo).sin() / k * (I * k * hi).exp();
            let g = ctx.kernel(x, xp).unwrap().value[(0, 0)];
            assert!((g - oracle).norm() < 1e-9, "{x} {xp}");
        }
    }

    #[test]
    fn kernel_symmetries_and_jump() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.5, 1.0);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let z = c64(0.4, 0.9);
        let ctx = GreenContext::new(&v, &bc, z, &sched()).unwrap();
        let ctx_conj = GreenContext::new(&v, &bc, z.conj(), &sched()).unwrap();
        // diagonal: both branches
        let fs = ctx.system(&[0.8]).unwrap();
        let i = fs.theta.index_of(0.8).unwrap();
        let upper = ctx.kernel_at(&fs, i, i).value;
        let lower = &weyl_state(&fs, i, false, ctx.m()).y * fs.phi_conj.states[i].y.adjoint();
        assert!(op_norm(&(upper - lower)) <= 1e-8);
        for (x, xp) in [(0.2, 1.1), (1.6, 0.5)] {
            let g = ctx.kernel(x, xp).unwrap().value;
            let h = ctx_conj.kernel(xp, x).unwrap().value;
            assert!(op_norm(&(g - h.adjoint())) <= 1e-8);
        }
        let jump = derivative_jump(&ctx, 0.8).unwrap();
        assert!(op_norm(&(jump - expected_jump(2))) <= 1e-6);
    }

    #[test]
    fn jump_by_finite_differences() {
        let v = PotentialModel::zero(1, 0.0, 5.0);
        let bc = BoundaryOperator::dirichlet(1);
        let ctx = GreenContext::new(&v, &bc, c64(1.0, 1.0), &sched()).unwrap();
        let (xp, h) = (1.0, 1e-5);
        let g = |x: f64| ctx.kernel(x, xp).unwrap().value[(0, 0)];
        let right = (g(xp + 2.0 * h) - g(xp + h)) / h;
        let left = (g(xp - h) - g(xp - 2.0 * h)) / h;
        assert!((right - left + 1.0).norm() < 1e-4);
    }

    #[test]
    fn diagonal_is_herglotz() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.5, 1.0);
        let bc = BoundaryOperator::dirichlet(2);
        for z in [c64(-1.0, 0.2), c64(2.0, 1.0)] {
            let ctx = GreenContext::new(&v, &bc, z, &sched()).unwrap();
            for x in [0.1, 0.9, 1.7] {
                let g = ctx.kernel(x, x).unwrap().value;
                let im = HermitianMatrix::new(crate::linalg::im_part(&g)).unwrap();
                assert!(im.smallest_eigenvalue() >= -1e-8);
            }
        }
    }

    fn manufactured(
        v: &PotentialModel,
        bc: &BoundaryOperator,
        z: Complex64,
        hvec: &ComplexVector,
        c: f64,
        grid: &[f64],
    ) -> (Vec<ComplexVector>, Vec<ComplexVector>) {
        // w = (−sin α + (x − a) cos α) h · (1 − t²)³ on [a, c], zero after
        let a = v.a();
        let base = -(bc.sin() * hvec);
        let slope = bc.cos() * hvec;
        let mut w = Vec::new();
        let mut f = Vec::new();
        let mut seen: Vec<f64> = Vec::new();
        for &x in grid {
            let s = x - a;
            let t = s / (c - a);
            if t >= 1.0 {
                w.push(ComplexVector::zeros(hvec.len()));
                f.push(ComplexVector::zeros(hvec.len()));
                continue;
            }
            let q = 1.0 - t * t;
            let b = q.powi(3);
            let db = -6.0 * t * q * q / (c - a);
            let d2b = (-6.0 * q * q + 24.0 * t * t * q) / ((c - a) * (c - a));
            let p = &base + &slope * c64(s, 0.0);
            let wx = &p * c64(b, 0.0);
            let w2 = &slope * c64(2.0 * db, 0.0) + &p * c64(d2b, 0.0);
            // a repeated node takes the left cell the first time
            let mut cell = v.cell_of(x).unwrap();
            if seen.last() == Some(&x) {
                seen.clear();
            } else if grid.iter().filter(|&&g| g == x).count() == 2 {
                cell -= 1;
                seen.push(x);
            }
            let vx = v.matrix_in_cell(cell, x);
            f.push(-w2 + &vx * &wx - &wx * z);
            w.push(wx);
        }
        (w, f)
    }

    #[test]
    fn manufactured_solution_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 3, 0.5, 1.0);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let z = c64(0.5, 1.0);
        let hvec = random_vector(&mut rng, 2);
        let mut grid = Vec::new();
        for k in 0..4 {
            grid.extend(linspace(0.5 * k as f64, 0.5 * (k + 1) as f64, 500));
        }
        let (w, f) = manufactured(&v, &bc, z, &hvec, 1.5, &grid);
        let u = apply_resolvent(&v, &bc, z, &f, &grid, &sched()).unwrap();
        let keep: Vec<usize> = (0..grid.len()).filter(|&i| i == 0 || grid[i] != grid[i - 1]).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| grid[i]).collect();
        let err: Vec<f64> = keep.iter().map(|&i| (&u.states[i].y - &w[i]).norm_squared()).collect();
        let norm: Vec<f64> = keep.iter().map(|&i| w[i].norm_squared()).collect();
        let e = crate::quadrature::simpson(&xs, &err).sqrt();
        let n = crate::quadrature::simpson(&xs, &norm).sqrt();
        assert!(e / n <= 1e-4, "{}", e / n);
        assert!(boundary_residual(&u, &bc) <= 1e-8);
    }

    #[test]
    fn zero_forcing_and_bad_grids() {
        let v = PotentialModel::zero(2, 0.0, 3.0);
        let bc = BoundaryOperator::dirichlet(2);
        let grid = linspace(0.0, 1.0, 10);
        let zero = vec![ComplexVector::zeros(2); 11];
        let u = apply_resolvent(&v, &bc, I, &zero, &grid, &sched()).unwrap();
        assert!(u.states.iter().all(|s| s.y.norm() == 0.0));
        let shifted = linspace(0.5, 1.0, 10);
        assert!(matches!(
            apply_resolvent(&v, &bc, I, &zero, &shifted, &sched()),
            Err(Error::UnsupportedSupport(_))
        ));
        assert!(matches!(
            apply_resolvent(&v, &bc, I, &zero[1..], &grid, &sched()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn boundary_condition_for_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 3, 0.5, 1.0);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let grid = linspace(0.0, 1.5, 300);
        let f: Vec<ComplexVector> = grid.iter().map(|_| random_vector(&mut rng, 2)).collect();
        let u = apply_resolvent(&v, &bc, c64(-0.5, 0.7), &f, &grid, &sched()).unwrap();
        assert!(boundary_residual(&u, &bc) <= 1e-8);
    }

    #[test]
    fn consistency_identity() {
        let v = PotentialModel::zero(1, 0.0, 3.0);
        let bc = BoundaryOperator::dirichlet(1);
        let f0 = ComplexVector::from_element(1, c64(1.0, 0.0));
        assert!(resolvent_consistency(&v, &bc, I, &f0, 1.0, 1000, &sched()).unwrap() <= 1e-5);
        let zero = ComplexVector::zeros(1);
        assert_eq!(resolvent_consistency(&v, &bc, I, &zero, 1.0, 100, &sched()).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.5, 1.0);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        for _ in 0..3 {
            let f0 = random_vector(&mut rng, 2);
            assert!(resolvent_consistency(&v, &bc, c64(1.0, 1.0), &f0, 1.3, 1000, &sched()).unwrap() <= 1e-4);
        }
    }

    #[test]
    fn corner_sandwich_recovers_m() {
        let free = PotentialModel::zero(1, 0.0, 3.0);
        let m = m_from_green_boundary(&free, &BoundaryOperator::dirichlet(1), I, &sched()).unwrap();
        assert!((m[(0, 0)] - I * principal_sqrt(I)).norm() <= 1e-4);
        let m = m_from_green_boundary(&free, &BoundaryOperator::neumann(1), I, &sched()).unwrap();
        assert!((m[(0, 0)] - I / principal_sqrt(I)).norm() <= 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_piecewise_constant(&mut rng, 2, 0.0, 4, 0.5, 1.0);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let z = c64(0.3, 1.1);
        let direct = m_function(&v, &bc, z, &sched()).unwrap().m;
        let corner = m_from_green_boundary(&v, &bc, z, &sched()).unwrap();
        assert!(op_norm(&(direct - corner)) <= 1e-3);
    }

    #[test]
    fn csv_rows() {
        let v = PotentialModel::zero(1, 0.0, 3.0);
        let e = green_kernel(&v, &BoundaryOperator::dirichlet(1), I, 0.5, 1.0, &sched()).unwrap();
        let csv = kernel_csv(&[e]);
        assert_eq!(csv.lines().next().unwrap(), "x,xp,re_g00,im_g00");
        assert!(csv.lines().nth(1).unwrap().starts_with("0.5,1,"));
    }
}
