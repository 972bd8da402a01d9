//! Gridded Hermitian-matrix potentials on `[a, b_max]` and beyond.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{flatten, hermiticity_residual, op_norm, ComplexMatrix, HermitianMatrix, MatrixEntries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// The value on `[x_i, x_{i+1})` is that of the left node.
    #[default]
    PiecewiseConstant,
    Linear,
}

/// How the potential continues past `b_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    #[default]
    Zero,
    Freeze,
}

/// Shapes with closed-form solutions, detected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticTag {
    Zero,
    Constant,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    dim: usize,
    grid: Vec<f64>,
    values: Vec<HermitianMatrix>,
    interpolation: Interpolation,
    extension: Extension,
    analytic_tag: Option<AnalyticTag>,
    tail: HermitianMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
struct PotentialFile {
    dim: usize,
    a: f64,
    grid: Vec<f64>,
    values: Vec<MatrixEntries>,
    #[serde(default)]
    interpolation: Interpolation,
    #[serde(default)]
    extension: Extension,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub node_residuals: Vec<f64>,
    pub max_residual: f64,
    /// `∫_a^{b_max} ‖V(x)‖ dx` by the trapezoid rule on the interpolant.
    pub norm_integral: f64,
    pub all_finite: bool,
}

impl PotentialModel {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<HermitianMatrix>,
        interpolation: Interpolation,
        extension: Extension,
    ) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::Parse("potential grid needs at least two nodes".into()));
        }
        if values.len() != grid.len() {
            return Err(Error::DimError {
                expected: grid.len(),
                found: values.len(),
            });
        }
        for i in 1..grid.len() {
            if grid[i] <= grid[i - 1] || !grid[i].is_finite() {
                return Err(Error::NonMonotoneGrid { index: i });
            }
        }
        let dim = values[0].dim();
        if let Some(v) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimError {
                expected: dim,
                found: v.dim(),
            });
        }
        let tail = match extension {
            Extension::Zero => HermitianMatrix::zeros(dim),
            Extension::Freeze => values[values.len() - 1].clone(),
        };
        let analytic_tag = detect_tag(&values);
        Ok(Self {
            dim,
            grid,
            values,
            interpolation,
            extension,
            analytic_tag,
            tail,
        })
    }

    /// `V ≡ C` on `[a, b_max]`.
    pub fn constant(a: f64, b_max: f64, value: HermitianMatrix, extension: Extension) -> Result<Self> {
        Self::new(
            vec![a, b_max],
            vec![value.clone(), value],
            Interpolation::PiecewiseConstant,
            extension,
        )
    }

    pub fn zero(dim: usize, a: f64, b_max: f64) -> Self {
        Self::constant(a, b_max, HermitianMatrix::zeros(dim), Extension::Zero).expect("valid grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> f64 {
        self.grid[0]
    }

    pub fn b_max(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn analytic_tag(&self) -> Option<AnalyticTag> {
        self.analytic_tag
    }

    /// Number of cells, including the unbounded extension cell.
    pub fn cell_count(&self) -> usize {
        self.grid.len()
    }

    /// Cell `i < N` is `[x_i, x_{i+1})`; cell `N` is `[b_max, ∞)`.
    pub fn cell_of(&self, x: f64) -> Result<usize> {
        if !(x >= self.a()) {
            return Err(Error::OutOfDomain { x });
        }
        let n = self.grid.len() - 1;
        if x >= self.b_max() {
            return Ok(n);
        }
        Ok(self.grid.partition_point(|&g| g <= x) - 1)
    }

    /// Potential nodes strictly between `lo` and `hi`.
    pub fn breakpoints_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        self.grid.iter().cloned().filter(|&g| g > lo && g < hi).collect()
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.interpolation == Interpolation::PiecewiseConstant
    }

    /// The constant value of a cell of a piecewise-constant model.
    pub fn cell_value(&self, cell: usize) -> &HermitianMatrix {
        let n = self.grid.len() - 1;
        if cell >= n {
            &self.tail
        } else {
            &self.values[cell]
        }
    }

    /// Value at `x` as seen from inside `cell` (one-sided at cell ends).
    pub fn matrix_in_cell(&self, cell: usize, x: f64) -> ComplexMatrix {
        let n = self.grid.len() - 1;
        if cell >= n {
            return self.tail.matrix().clone();
        }
        match self.interpolation {
            Interpolation::PiecewiseConstant => self.values[cell].matrix().clone(),
            Interpolation::Linear => {
                let (x0, x1) = (self.grid[cell], self.grid[cell + 1]);
                let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                self.values[cell].matrix().scale(1.0 - w) + self.values[cell + 1].matrix().scale(w)
            }
        }
    }

    /// Interpolated value for `a ≤ x ≤ b_max`.
    pub fn evaluate(&self, x: f64) -> Result<HermitianMatrix> {
        if !(x >= self.a() && x <= self.b_max()) {
            return Err(Error::OutOfDomain { x });
        }
        if x == self.b_max() {
            return Ok(self.values[self.values.len() - 1].clone());
        }
        let cell = self.cell_of(x)?;
        match self.interpolation {
            Interpolation::PiecewiseConstant => Ok(self.values[cell].clone()),
            Interpolation::Linear => HermitianMatrix::new(self.matrix_in_cell(cell, x)),
        }
    }

    /// Like [`evaluate`](Self::evaluate) but continues past `b_max` by the
    /// extension rule.
    pub fn evaluate_extended(&self, x: f64) -> Result<ComplexMatrix> {
        if x > self.b_max() {
            return Ok(self.tail.matrix().clone());
        }
        Ok(self.evaluate(x)?.into_matrix())
    }

    pub fn validate(&self) -> ValidationReport {
        let node_residuals: Vec<f64> = self.values.iter().map(|v| hermiticity_residual(v.matrix())).collect();
        let max_residual = node_residuals.iter().cloned().fold(0.0, f64::max);
        let norms: Vec<f64> = self.values.iter().map(|v| v.norm()).collect();
        let mut norm_integral = 0.0;
        for i in 0..self.grid.len() - 1 {
            let h = self.grid[i + 1] - self.grid[i];
            norm_integral += match self.interpolation {
                Interpolation::PiecewiseConstant => norms[i] * h,
                Interpolation::Linear => 0.5 * (norms[i] + norms[i + 1]) * h,
            };
        }
        ValidationReport {
            node_residuals,
            max_residual,
            norm_integral,
            all_finite: self.values.iter().all(|v| crate::linalg::is_finite(v.matrix())),
        }
    }

    /// `∫_lo^hi ‖z − V(x)‖ dx` over the interpolant (trapezoid per cell).
    pub fn shifted_norm_integral(&self, z: crate::linalg::Complex64, lo: f64, hi: f64) -> Result<f64> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut nodes = vec![lo];
        nodes.extend(self.breakpoints_between(lo, hi));
        nodes.push(hi);
        let d = self.dim;
        let mut total = 0.0;
        for w in nodes.windows(2) {
            let cell = self.cell_of(0.5 * (w[0] + w[1]))?;
            let f = |x: f64| op_norm(&(ComplexMatrix::identity(d, d) * z - self.matrix_in_cell(cell, x)));
            total += 0.5 * (f(w[0]) + f(w[1])) * (w[1] - w[0]);
        }
        Ok(total)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: PotentialFile = serde_json::from_slice(bytes)?;
        if file.grid.first() != Some(&file.a) {
            return Err(Error::Parse(format!(
                "grid must start at a = {}, found {:?}",
                file.a,
                file.grid.first()
            )));
        }
        if file.values.len() != file.grid.len() {
            return Err(Error::Parse(format!(
                "{} grid nodes but {} values",
                file.grid.len(),
                file.values.len()
            )));
        }
        for i in 1..file.grid.len() {
            if !(file.grid[i] > file.grid[i - 1]) {
                return Err(Error::NonMonotoneGrid { index: i });
            }
        }
        let mut values = Vec::with_capacity(file.values.len());
        for (index, entries) in file.values.into_iter().enumerate() {
            let m = entries.into_matrix(file.dim)?;
            if !crate::linalg::is_finite(&m) {
                return Err(Error::Parse(format!("value {index} has non-finite entries")));
            }
            let residual = hermiticity_residual(&m);
            if residual > crate::linalg::HERMITICITY_TOL * op_norm(&m) {
                return Err(Error::NonHermitianSample { index, residual });
            }
            values.push(HermitianMatrix::new(m).map_err(|_| Error::NonHermitianSample { index, residual })?);
        }
        Self::new(file.grid, values, file.interpolation, file.extension)
    }

    pub fn to_json(&self) -> String {
        let file = PotentialFile {
            dim: self.dim,
            a: self.a(),
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| MatrixEntries::Flat(flatten(v.matrix()))).collect(),
            interpolation: self.interpolation,
            extension: self.extension,
        };
        serde_json::to_string_pretty(&file).expect("potential serialises")
    }
}

fn detect_tag(values: &[HermitianMatrix]) -> Option<AnalyticTag> {
    if values.iter().all(|v| v.matrix().iter().all(|z| z.norm() == 0.0)) {
        return Some(AnalyticTag::Zero);
    }
    if values.iter().all(|v| v.matrix() == values[0].matrix()) {
        return Some(AnalyticTag::Constant);
    }
    let diagonal = values.iter().all(|v| {
        let m = v.matrix();
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() == 0.0))
    });
    diagonal.then_some(AnalyticTag::Diagonal)
}

/// Piecewise-constant potential on `[a, a + cells·cell_len]` with random
/// Hermitian cell values of size about `scale`.
pub fn random_piecewise_constant<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    a: f64,
    cells: usize,
    cell_len: f64,
    scale: f64,
) -> PotentialModel {
    let grid: Vec<f64> = (0..=cells).map(|i| a + cell_len * i as f64).collect();
    let values = (0..=cells)
        .map(|_| crate::linalg::random_hermitian(rng, dim, scale))
        .collect();
    PotentialModel::new(grid, values, Interpolation::PiecewiseConstant, Extension::Zero)
        .expect("valid random potential")
}
