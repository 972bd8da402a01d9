//! Dense complex linear algebra at finite dimension.
//!
//! Every matrix function in the crate goes through the eigendecomposition
//! of a Hermitian matrix (`U diag(f(λ)) U*`). There is no Padé or
//! scaling-and-squaring path; dimensions are small and the algebraic
//! identities (`sin² + cos² = I`, unitarity of `e^{2iα}`) then hold to
//! round-off.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative Hermiticity tolerance: `‖A − A*‖ ≤ HERMITICITY_TOL · ‖A‖`.
pub const HERMITICITY_TOL: f64 = 1e-10;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Spectral (operator) norm.
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    singular_values(m)[0]
}

/// Singular values in decreasing order.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    // the SVD stops on an absolute threshold, so work at unit scale
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return vec![scale; m.nrows().min(m.ncols())];
    }
    let mut sv: Vec<f64> = (m / c64(scale, 0.0))
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s * scale)
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// `σ_max / σ_min`; infinite for singular input.
pub fn condition_number(m: &ComplexMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Hermitian part `(M + M*)/2`.
pub fn re_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// "Imaginary" part `(M − M*)/(2i)`, itself Hermitian.
pub fn im_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m - m.adjoint()) * c64(0.0, -0.5)
}

pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    op_norm(&(m - m.adjoint()))
}

pub fn inverse(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    m.clone().lu().try_inverse()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Square root with the branch cut along `[0, ∞)`, i.e. `Im √z ≥ 0`.
/// On the positive real axis the limit from the upper half-plane is taken,
/// which is the nonnegative real root.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        return if z.re >= 0.0 {
            c64(z.re.sqrt(), 0.0)
        } else {
            c64(0.0, (-z.re).sqrt())
        };
    }
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// `cos(k t)` and `sin(k t)/k` for `k² = ksq`. Both are entire in `ksq`, so
/// the branch of the root is irrelevant; the second is evaluated by its
/// series when `k t` is tiny.
pub fn cos_sinc(ksq: Complex64, t: f64) -> (Complex64, Complex64) {
    let k = ksq.sqrt();
    let w = k * t;
    if w.norm() < 1e-4 {
        let w2 = ksq * (t * t);
        let c = Complex64::new(1.0, 0.0) - w2 / 2.0 + w2 * w2 / 24.0;
        let s = (Complex64::new(1.0, 0.0) - w2 / 6.0 + w2 * w2 / 120.0) * t;
        (c, s)
    } else {
        (w.cos(), w.sin() / k)
    }
}

/// Hermitian matrix together with its eigendecomposition `A = U diag(λ) U*`.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    matrix: ComplexMatrix,
    eigenvalues: DVector<f64>,
    eigenvectors: ComplexMatrix,
}

impl PartialEq for HermitianMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl HermitianMatrix {
    /// Validates Hermiticity relative to `‖A‖` and caches the
    /// eigendecomposition of the symmetrised matrix.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimError {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if !is_finite(&matrix) {
            return Err(Error::InvalidHermitian {
                residual: f64::NAN,
                tolerance: 0.0,
            });
        }
        let residual = hermiticity_residual(&matrix);
        let tolerance = HERMITICITY_TOL * op_norm(&matrix);
        if residual > tolerance {
            return Err(Error::InvalidHermitian { residual, tolerance });
        }
        Ok(Self::from_symmetrized(re_part(&matrix)))
    }

    fn from_symmetrized(matrix: ComplexMatrix) -> Self {
        let eig = SymmetricEigen::new(matrix.clone());
        Self {
            matrix,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    fn from_parts(eigenvalues: DVector<f64>, eigenvectors: ComplexMatrix) -> Self {
        let diag = ComplexMatrix::from_diagonal(&eigenvalues.map(|l| c64(l, 0.0)));
        let matrix = re_part(&(&eigenvectors * diag * eigenvectors.adjoint()));
        Self {
            matrix,
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(DVector::zeros(dim), identity(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, t: f64) -> Self {
        Self::from_parts(DVector::from_element(dim, t), identity(dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self::from_parts(DVector::from_column_slice(diag), identity(diag.len()))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigenvectors
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Operator norm, read off the spectrum.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, l| acc.max(l.abs()))
    }

    /// `‖U diag(λ) U* − A‖`.
    pub fn reconstruction_residual(&self) -> f64 {
        let diag = ComplexMatrix::from_diagonal(&self.eigenvalues.map(|l| c64(l, 0.0)));
        op_norm(&(&self.eigenvectors * diag * self.eigenvectors.adjoint() - &self.matrix))
    }

    /// Real functional calculus `f(A) = U diag(f(λ)) U*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        Self::from_parts(self.eigenvalues.map(f), self.eigenvectors.clone())
    }

    /// Complex functional calculus; the result is normal but in general
    /// not Hermitian.
    pub fn map_complex(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let diag = ComplexMatrix::from_diagonal(&self.eigenvalues.map(f));
        &self.eigenvectors * diag * self.eigenvectors.adjoint()
    }

    /// Clips eigenvalues in `(-tol, 0)` to zero; anything more negative is
    /// an error.
    pub fn psd_repair(&self, tol: f64) -> Result<HermitianMatrix> {
        let min = self.smallest_eigenvalue();
        if min >= 0.0 {
            return Ok(self.clone());
        }
        if min <= -tol {
            return Err(Error::NegativeMass { min_eigenvalue: min });
        }
        Ok(self.map(|l| l.max(0.0)))
    }
}

/// `f(A)` for a Hermitian `A`, validating Hermiticity first.
pub fn hermitian_calculus(a: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    Ok(HermitianMatrix::new(a.clone())?.map(f))
}

/// Self-adjoint boundary operator `α` with `sin α` and `cos α`.
#[derive(Debug, Clone)]
pub struct BoundaryOperator {
    alpha: HermitianMatrix,
    sin: HermitianMatrix,
    cos: HermitianMatrix,
}

/// Residuals of the trigonometric identities for a boundary operator.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryReport {
    pub pythagoras: f64,
    pub commutator: f64,
    /// How far the spectra of `sin α`, `cos α` stick out of `[-1, 1]`.
    pub spectral_excess: f64,
}

impl BoundaryOperator {
    pub fn new(alpha: HermitianMatrix) -> Self {
        let sin = alpha.map(f64::sin);
        let cos = alpha.map(f64::cos);
        Self { alpha, sin, cos }
    }

    pub fn from_matrix(alpha: ComplexMatrix) -> Result<Self> {
        Ok(Self::new(HermitianMatrix::new(alpha)?))
    }

    /// `α = 0`: Dirichlet condition `u(a) = 0`.
    pub fn dirichlet(dim: usize) -> Self {
        Self::scalar(dim, 0.0)
    }

    /// `α = (π/2) I`: Neumann condition `u'(a) = 0`.
    pub fn neumann(dim: usize) -> Self {
        Self::scalar(dim, std::f64::consts::FRAC_PI_2)
    }

    pub fn scalar(dim: usize, t: f64) -> Self {
        Self::new(HermitianMatrix::scaled_identity(dim, t))
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    pub fn alpha(&self) -> &HermitianMatrix {
        &self.alpha
    }

    pub fn sin(&self) -> &ComplexMatrix {
        self.sin.matrix()
    }

    pub fn cos(&self) -> &ComplexMatrix {
        self.cos.matrix()
    }

    pub fn check(&self) -> BoundaryReport {
        let s = self.sin();
        let c = self.cos();
        let pythagoras = op_norm(&(s * s + c * c - identity(self.dim())));
        let commutator = op_norm(&(s * c - c * s));
        let excess = |h: &HermitianMatrix| {
            (h.largest_eigenvalue() - 1.0)
                .max(-1.0 - h.smallest_eigenvalue())
                .max(0.0)
        };
        BoundaryReport {
            pythagoras,
            commutator,
            spectral_excess: excess(&self.sin).max(excess(&self.cos)),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: BoundaryFile = serde_json::from_slice(bytes)?;
        let matrix = file.alpha.into_matrix(file.dim)?;
        Self::from_matrix(matrix)
    }

    pub fn to_json(&self) -> String {
        let file = BoundaryFile {
            dim: self.dim(),
            alpha: MatrixEntries::Flat(flatten(self.alpha.matrix())),
        };
        serde_json::to_string(&file).expect("boundary operator serialises")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundaryFile {
    dim: usize,
    alpha: MatrixEntries,
}

/// Row-major `[re, im]` pairs, either flat (`d²` pairs) or nested by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntries {
    Flat(Vec<[f64; 2]>),
    Rows(Vec<Vec<[f64; 2]>>),
}

impl MatrixEntries {
    pub fn into_matrix(self, dim: usize) -> Result<ComplexMatrix> {
        let flat: Vec<[f64; 2]> = match self {
            MatrixEntries::Flat(v) => v,
            MatrixEntries::Rows(rows) => {
                if rows.len() != dim {
                    return Err(Error::DimError {
                        expected: dim,
                        found: rows.len(),
                    });
                }
                rows.into_iter().flatten().collect()
            }
        };
        if flat.len() != dim * dim {
            return Err(Error::DimError {
                expected: dim * dim,
                found: flat.len(),
            });
        }
        Ok(ComplexMatrix::from_row_iterator(
            dim,
            dim,
            flat.into_iter().map(|[re, im]| c64(re, im)),
        ))
    }
}

pub fn flatten(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

/// `c1 sin α + c2 cos α` with a singular-value certificate.
#[derive(Debug, Clone)]
pub struct BoundaryCombination {
    pub matrix: ComplexMatrix,
    pub smallest_singular_value: f64,
    pub invertible: bool,
}

pub fn boundary_combination(
    c1: Complex64,
    c2: Complex64,
    bc: &BoundaryOperator,
) -> Result<BoundaryCombination> {
    if c1 == Complex64::new(0.0, 0.0) && c2 == Complex64::new(0.0, 0.0) {
        return Err(Error::DegenerateCombination);
    }
    let matrix = bc.sin() * c1 + bc.cos() * c2;
    let smallest = singular_values(&matrix).last().cloned().unwrap_or(0.0);
    let scale = c1.norm() + c2.norm();
    Ok(BoundaryCombination {
        matrix,
        smallest_singular_value: smallest,
        invertible: smallest > 1e-14 * scale,
    })
}

/// Cayley transform `U = e^{2iα}` of the Hermitian relation `M_α`.
pub fn cayley_transform(bc: &BoundaryOperator) -> ComplexMatrix {
    bc.alpha().map_complex(|t| Complex64::from_polar(1.0, 2.0 * t))
}

/// `‖sin(α) f₂ + cos(α) f₁‖`; zero exactly when `(f₁, f₂) ∈ M_α`.
pub fn hermitian_relation_residual(
    f1: &ComplexVector,
    f2: &ComplexVector,
    bc: &BoundaryOperator,
) -> Result<f64> {
    let d = bc.dim();
    for v in [f1, f2] {
        if v.len() != d {
            return Err(Error::DimError {
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok((bc.sin() * f2 + bc.cos() * f1).norm())
}

/// The block operator `Θ = [[θ, φ], [θ', φ']]`.
#[derive(Debug, Clone)]
pub struct BlockOperator2x2 {
    pub theta: ComplexMatrix,
    pub phi: ComplexMatrix,
    pub dtheta: ComplexMatrix,
    pub dphi: ComplexMatrix,
}

impl BlockOperator2x2 {
    pub fn new(
        theta: ComplexMatrix,
        phi: ComplexMatrix,
        dtheta: ComplexMatrix,
        dphi: ComplexMatrix,
    ) -> Result<Self> {
        let d = theta.nrows();
        for m in [&theta, &phi, &dtheta, &dphi] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimError {
                    expected: d,
                    found: m.nrows().max(m.ncols()),
                });
            }
        }
        Ok(Self {
            theta,
            phi,
            dtheta,
            dphi,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut m = ComplexMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.theta);
        m.view_mut((0, d), (d, d)).copy_from(&self.phi);
        m.view_mut((d, 0), (d, d)).copy_from(&self.dtheta);
        m.view_mut((d, d), (d, d)).copy_from(&self.dphi);
        m
    }

    /// Candidate inverse `[[φ̄'*, −φ̄*], [−θ̄'*, θ̄*]]` assembled from the
    /// blocks evaluated at the conjugate spectral parameter.
    pub fn conjugate_inverse(conj: &BlockOperator2x2) -> ComplexMatrix {
        let d = conj.dim();
        let mut m = ComplexMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&conj.dphi.adjoint());
        m.view_mut((0, d), (d, d)).copy_from(&(-conj.phi.adjoint()));
        m.view_mut((d, 0), (d, d)).copy_from(&(-conj.dtheta.adjoint()));
        m.view_mut((d, d), (d, d)).copy_from(&conj.theta.adjoint());
        m
    }

    /// `(‖LΘ − I‖, ‖ΘL − I‖)` with `L` the conjugate inverse.
    pub fn inverse_residuals(&self, conj: &BlockOperator2x2) -> (f64, f64) {
        let theta = self.to_matrix();
        let inv = Self::conjugate_inverse(conj);
        let id = identity(2 * self.dim());
        (
            op_norm(&(&inv * &theta - &id)),
            op_norm(&(&theta * &inv - &id)),
        )
    }
}

/// Random Hermitian matrix with entries of size about `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
        }
    }
    HermitianMatrix::new(re_part(&m)).expect("symmetrised matrix is Hermitian")
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    ComplexVector::from_fn(dim, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn calculus_of_trivial_arguments() {
        let zero = hermitian_calculus(&ComplexMatrix::zeros(3, 3), f64::sin).unwrap();
        assert_eq!(op_norm(zero.matrix()), 0.0);
        let half_pi = HermitianMatrix::scaled_identity(2, FRAC_PI_2).map(f64::cos);
        assert!(op_norm(half_pi.matrix()) < 1e-16);
    }

    #[test]
    fn sin_cos_pythagoras_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..=8 {
            let a = random_hermitian(&mut rng, d, 2.0);
            assert!(a.reconstruction_residual() < 1e-12 * (1.0 + a.norm()));
            let s = a.map(f64::sin);
            let c = a.map(f64::cos);
            let r = op_norm(&(s.matrix() * s.matrix() + c.matrix() * c.matrix() - identity(d)));
            assert!(r < 1e-12, "d = {d}: {r}");
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        match hermitian_calculus(&m, f64::sin) {
            Err(Error::InvalidHermitian { residual, .. }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sqrt_branch() {
        assert_eq!(principal_sqrt(c64(-1.0, 0.0)), c64(0.0, 1.0));
        assert_eq!(principal_sqrt(c64(-1.0, -0.0)), c64(0.0, 1.0));
        assert_eq!(principal_sqrt(c64(4.0, 0.0)), c64(2.0, 0.0));
        let w = principal_sqrt(I);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w - c64(r, r)).norm() < 1e-15);
        let w = principal_sqrt(c64(1.0, -1e-3));
        assert!(w.im >= 0.0);
    }

    #[test]
    fn combination_examples() {
        let bc = BoundaryOperator::dirichlet(2);
        let comb = boundary_combination(I, c64(1.0, 0.0), &bc).unwrap();
        assert!(op_norm(&(comb.matrix - identity(2))) < 1e-15);
        assert!(comb.invertible);

        let bc = BoundaryOperator::neumann(2);
        let comb = boundary_combination(c64(1.0, 0.0), I, &bc).unwrap();
        assert!(op_norm(&(comb.matrix - identity(2))) < 1e-15);

        let zero = c64(0.0, 0.0);
        assert!(matches!(
            boundary_combination(zero, zero, &bc),
            Err(Error::DegenerateCombination)
        ));
    }

    #[test]
    fn combination_random_alpha_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let bc = BoundaryOperator::new(random_hermitian(&mut rng, 3, 3.0));
            let comb = boundary_combination(I, c64(1.0, 0.0), &bc).unwrap();
            // |i sin λ + cos λ| = 1 for real λ, so all singular values are 1.
            assert!((comb.smallest_singular_value - 1.0).abs() < 1e-12);
            assert!(comb.invertible);
        }
    }

    #[test]
    fn cayley_examples() {
        let u = cayley_transform(&BoundaryOperator::dirichlet(2));
        assert!(op_norm(&(u - identity(2))) < 1e-15);
        let u = cayley_transform(&BoundaryOperator::neumann(2));
        assert!(op_norm(&(u + identity(2))) < 1e-15);
    }

    #[test]
    fn relation_residual_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f1 = random_vector(&mut rng, 2);
        let zero = ComplexVector::zeros(2);
        let r = hermitian_relation_residual(&f1, &zero, &BoundaryOperator::neumann(2)).unwrap();
        assert!(r < 1e-15 * f1.norm() * 10.0);
        let r = hermitian_relation_residual(&zero, &f1, &BoundaryOperator::dirichlet(2)).unwrap();
        assert_eq!(r, 0.0);

        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 3, 2.0));
        let h = random_vector(&mut rng, 3);
        let f1 = -(bc.sin() * &h);
        let f2 = bc.cos() * &h;
        assert!(hermitian_relation_residual(&f1, &f2, &bc).unwrap() < 1e-12);

        assert!(matches!(
            hermitian_relation_residual(&h, &ComplexVector::zeros(2), &bc),
            Err(Error::DimError { .. })
        ));
    }

    #[test]
    fn boundary_json_roundtrip_and_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bc = BoundaryOperator::new(random_hermitian(&mut rng, 2, 1.0));
        let json = bc.to_json();
        let back = BoundaryOperator::from_json(json.as_bytes()).unwrap();
        assert_eq!(back.alpha().matrix(), bc.alpha().matrix());

        let rows = br#"{"dim": 2, "alpha": [[[0.0, 0.0], [0.5, 0.0]], [[0.5, 0.0], [1.0, 0.0]]]}"#;
        let bc = BoundaryOperator::from_json(rows).unwrap();
        assert_eq!(bc.alpha().matrix()[(0, 1)], c64(0.5, 0.0));
    }

    proptest::proptest! {
        #[test]
        fn sqrt_squares_back(re in -1e3f64..1e3, im in -1e3f64..1e3) {
            let z = c64(re, im);
            let w = principal_sqrt(z);
            proptest::prop_assert!(w.im >= -1e-15);
            proptest::prop_assert!((w * w - z).norm() <= 1e-13 * z.norm().max(1e-300));
        }

        #[test]
        fn cayley_is_unitary_and_encodes_relation(seed in 0u64..1000, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bc = BoundaryOperator::new(random_hermitian(&mut rng, d, 3.0));
            let report = bc.check();
            proptest::prop_assert!(report.pythagoras < 1e-10 && report.commutator < 1e-10);
            proptest::prop_assert!(report.spectral_excess < 1e-12);
            let u = cayley_transform(&bc);
            proptest::prop_assert!(op_norm(&(u.adjoint() * &u - identity(d))) < 1e-10);
            let h = random_vector(&mut rng, d);
            let f1 = -(bc.sin() * &h);
            let f2 = bc.cos() * &h;
            let id = identity(d);
            let rel = (&u - &id) * f2 + (&u + &id) * f1 * I;
            proptest::prop_assert!(rel.norm() <= 1e-10 * h.norm());
        }
    }
}
