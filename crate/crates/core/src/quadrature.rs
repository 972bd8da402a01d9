//! Quadrature and extrapolation on scalar-, vector- and matrix-valued data.

use crate::error::{Error, Result};
use crate::linalg::{op_norm, Complex64, ComplexMatrix, ComplexVector};

/// Values that can be integrated: a zero, `self += w·other` and a norm.
pub trait Integrand: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, w: f64, other: &Self);
    fn size(&self) -> f64;
}

impl Integrand for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, w: f64, other: &Self) {
        *self += w * other;
    }
    fn size(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, w: f64, other: &Self) {
        *self += other * w;
    }
    fn size(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for ComplexVector {
    fn zero_like(&self) -> Self {
        ComplexVector::zeros(self.len())
    }
    fn axpy(&mut self, w: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b * w;
        }
    }
    fn size(&self) -> f64 {
        self.norm()
    }
}

impl Integrand for ComplexMatrix {
    fn zero_like(&self) -> Self {
        ComplexMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, w: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b * w;
        }
    }
    fn size(&self) -> f64 {
        if self.len() <= 16 {
            op_norm(self)
        } else {
            self.norm()
        }
    }
}

fn combine<T: Integrand>(terms: &[(f64, &T)]) -> T {
    let mut acc = terms[0].1.zero_like();
    for (w, v) in terms {
        acc.axpy(*w, v);
    }
    acc
}

/// Weights `w` with `∫_lo^hi p = Σ w_j y_j` for the quadratic `p` through
/// `(t_j, y_j)`.
pub fn quadratic_weights(t: [f64; 3], lo: f64, hi: f64) -> [f64; 3] {
    // work relative to `lo` so fine panels far from the origin keep precision
    let t = [t[0] - lo, t[1] - lo, t[2] - lo];
    let h = hi - lo;
    let mut w = [0.0; 3];
    for j in 0..3 {
        let (m1, m2) = match j {
            0 => (t[1], t[2]),
            1 => (t[0], t[2]),
            _ => (t[0], t[1]),
        };
        let denom = (t[j] - m1) * (t[j] - m2);
        // ∫_0^h (x - m1)(x - m2) dx
        let integral = h * (h * h / 3.0 - (m1 + m2) * h / 2.0 + m1 * m2);
        w[j] = integral / denom;
    }
    w
}

/// Cumulative integrals `∫_{x_0}^{x_i}` over one smooth segment.
///
/// Even nodes use composite Simpson from the start; an odd node adds the
/// half-panel rule of the quadratic through its neighbours, so no error
/// accumulates beyond one panel.
pub fn cumulative<T: Integrand>(xs: &[f64], ys: &[T]) -> Vec<T> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mut out: Vec<T> = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(ys[0].zero_like());
    if n == 2 {
        let h = xs[1] - xs[0];
        out.push(combine(&[(0.5 * h, &ys[0]), (0.5 * h, &ys[1])]));
        return out;
    }
    for i in 1..n {
        if i % 2 == 0 {
            let w = quadratic_weights([xs[i - 2], xs[i - 1], xs[i]], xs[i - 2], xs[i]);
            let mut v = out[i - 2].clone();
            v.axpy(w[0], &ys[i - 2]);
            v.axpy(w[1], &ys[i - 1]);
            v.axpy(w[2], &ys[i]);
            out.push(v);
        } else {
            let (k0, k1, k2) = if i + 1 < n { (i - 1, i, i + 1) } else { (i - 2, i - 1, i) };
            let w = quadratic_weights([xs[k0], xs[k1], xs[k2]], xs[i - 1], xs[i]);
            let mut v = out[i - 1].clone();
            v.axpy(w[0], &ys[k0]);
            v.axpy(w[1], &ys[k1]);
            v.axpy(w[2], &ys[k2]);
            out.push(v);
        }
    }
    out
}

/// Composite Simpson over one smooth segment.
pub fn simpson<T: Integrand>(xs: &[f64], ys: &[T]) -> T {
    cumulative(xs, ys).pop().expect("at least one node")
}

/// Cumulative integrals over a grid split into smooth segments.
///
/// `breaks` lists the node indices (strictly inside the grid) where the
/// integrand may jump; `value(segment, node)` returns the one-sided value of
/// the integrand at `node` as seen from `segment`.
pub fn cumulative_segmented<T: Integrand>(
    xs: &[f64],
    breaks: &[usize],
    mut value: impl FnMut(usize, usize) -> T,
) -> Vec<T> {
    let n = xs.len();
    let mut bounds = Vec::with_capacity(breaks.len() + 1);
    let mut start = 0;
    for &b in breaks {
        if b > start && b < n - 1 {
            bounds.push((start, b));
            start = b;
        }
    }
    bounds.push((start, n - 1));
    let mut out: Vec<T> = Vec::with_capacity(n);
    for (seg, &(s, e)) in bounds.iter().enumerate() {
        let ys: Vec<T> = (s..=e).map(|j| value(seg, j)).collect();
        let cum = cumulative(&xs[s..=e], &ys);
        let offset = out.last().cloned();
        for (k, mut c) in cum.into_iter().enumerate() {
            if k == 0 && seg > 0 {
                continue;
            }
            if let Some(off) = &offset {
                c.axpy(1.0, off);
            }
            out.push(c);
        }
    }
    out
}

/// Adaptive Simpson on `[a, b]` starting from `panels` equal panels.
pub fn adaptive_simpson<T: Integrand>(
    f: &dyn Fn(f64) -> Result<T>,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    max_depth: usize,
) -> Result<T> {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let tol = abs_tol / panels as f64;
    let mut total: Option<T> = None;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let hi = if p + 1 == panels { b } else { lo + h };
        let flo = f(lo)?;
        let fhi = f(hi)?;
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid)?;
        let whole = combine(&[((hi - lo) / 6.0, &flo), (4.0 * (hi - lo) / 6.0, &fmid), ((hi - lo) / 6.0, &fhi)]);
        let piece = adaptive_step(f, lo, hi, &flo, &fmid, &fhi, whole, tol, max_depth)?;
        match total.as_mut() {
            None => total = Some(piece),
            Some(t) => t.axpy(1.0, &piece),
        }
    }
    Ok(total.expect("at least one panel"))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<T: Integrand>(
    f: &dyn Fn(f64) -> Result<T>,
    lo: f64,
    hi: f64,
    flo: &T,
    fmid: &T,
    fhi: &T,
    whole: T,
    tol: f64,
    depth: usize,
) -> Result<T> {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let flm = f(lm)?;
    let frm = f(rm)?;
    // actual half widths: `mid` is rounded, and `h/2` would leave an
    // error floor of one ulp times the integrand
    let (hl, hr) = (mid - lo, hi - mid);
    let left = combine(&[(hl / 6.0, flo), (4.0 * hl / 6.0, &flm), (hl / 6.0, fmid)]);
    let right = combine(&[(hr / 6.0, fmid), (4.0 * hr / 6.0, &frm), (hr / 6.0, fhi)]);
    let mut both = left.clone();
    both.axpy(1.0, &right);
    let mut diff = both.clone();
    diff.axpy(-1.0, &whole);
    let err = diff.size();
    let unresolvable = hi - lo <= 64.0 * f64::EPSILON * lo.abs().max(hi.abs());
    if depth == 0 || err <= 15.0 * tol || unresolvable {
        // Richardson correction of the two-panel estimate.
        let mut corrected = both;
        corrected.axpy(1.0 / 15.0, &diff);
        if depth == 0 && err > 15.0 * tol && !unresolvable {
            return Err(Error::ToleranceNotMet(format!(
                "adaptive quadrature on [{lo}, {hi}] stalled with error {err:e}"
            )));
        }
        return Ok(corrected);
    }
    let mut l = adaptive_step(f, lo, mid, flo, &flm, fmid, left, 0.5 * tol, depth - 1)?;
    let r = adaptive_step(f, mid, hi, fmid, &frm, fhi, right, 0.5 * tol, depth - 1)?;
    l.axpy(1.0, &r);
    Ok(l)
}

/// Neville polynomial extrapolation of `values[i] ≈ F(hs[i])` to `h = 0`.
pub fn extrapolate_to_zero<T: Integrand>(hs: &[f64], values: &[T]) -> T {
    assert_eq!(hs.len(), values.len());
    assert!(!hs.is_empty());
    let mut p: Vec<T> = values.to_vec();
    let n = hs.len();
    for level in 1..n {
        for i in 0..n - level {
            let hi = hs[i];
            let hj = hs[i + level];
            // P = (hj·p_i − hi·p_{i+1}) / (hj − hi), evaluated at 0
            let mut v = p[i].zero_like();
            v.axpy(hj / (hj - hi), &p[i]);
            v.axpy(-hi / (hj - hi), &p[i + 1]);
            p[i] = v;
        }
    }
    p.swap_remove(0)
}

/// Uniform grid with `n` intervals on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| if i == n { hi } else { lo + h * i as f64 })
        .collect()
}
