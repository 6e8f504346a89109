//! Discretized operators on a fractal measure.
//!
//! * [`assemble_dmu_kernel`]: Nyström matrix of `D^μ_s = tr_μ (id−Δ)^{-s} id_μ`.
//! * [`assemble_trace_operator`] / [`trace_gram`]: the trace `tr_μ` on
//!   H^s-normalized Fourier modes, or its Gram matrix `tr_μ tr_μ*`.
//! * [`assemble_tmu_galerkin`]: compression of `T^μ_τ` to piecewise-constant
//!   functions on the level-L cells.
//!
//! All three share the atom space of a [`FractalMeasure`]; matrices carry an
//! [`Assembly`] record describing how they were built.

mod bessel;
mod dump;
mod fourier;
mod galerkin;
mod nystrom;

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bessel::{bessel_k, BesselKernel, LocalModel, RHO_MIN};
pub use dump::{read_dump, write_dump};
pub use fourier::{assemble_trace_operator, fourier_of_fmu, trace_gram, FrequencyGrid, ModeSet};
pub use galerkin::assemble_tmu_galerkin;
pub use nystrom::{assemble_dmu_kernel, attractor_energy, cell_self_energy};

use crate::error::{Error, Result};
use crate::fractal_measure::FractalMeasure;

/// What the rows or columns of a [`DiscretizedOperator`] index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDesc {
    /// One coordinate per atom of a level-L quadrature, in `L_p(Γ, μ)`.
    AtomSpace { atoms: usize, level: usize, p: f64 },
    /// Coefficients of H^s-normalized Fourier modes.
    ModeSpace { modes: usize, s: f64 },
    /// Samples on a uniform spatial grid.
    GridSpace { points: usize, s: f64, p: f64 },
}

impl SpaceDesc {
    pub fn cardinality(&self) -> usize {
        match *self {
            SpaceDesc::AtomSpace { atoms, .. } => atoms,
            SpaceDesc::ModeSpace { modes, .. } => modes,
            SpaceDesc::GridSpace { points, .. } => points,
        }
    }
}

/// How an operator was assembled.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub kind: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub level: Option<usize>,
    pub cutoff: Option<f64>,
    pub warnings: Vec<String>,
}

impl Assembly {
    pub fn new(kind: &str) -> Self {
        Assembly { kind: kind.to_string(), ..Default::default() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }
}

/// Dense matrix storage; real when the assembly produced no imaginary parts.
#[derive(Debug, Clone)]
pub enum OperatorMatrix {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl OperatorMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            OperatorMatrix::Real(m) => m.nrows(),
            OperatorMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            OperatorMatrix::Real(m) => m.ncols(),
            OperatorMatrix::Complex(m) => m.ncols(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            OperatorMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            OperatorMatrix::Complex(m) => m[(i, j)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                best = best.max(self.get(i, j).norm());
            }
        }
        best
    }

    /// Complex copy of the matrix.
    pub fn to_complex(&self) -> Mat<Complex64> {
        match self {
            OperatorMatrix::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0)),
            OperatorMatrix::Complex(m) => m.clone(),
        }
    }

    /// Drops the imaginary part when it is below `tol` times the largest entry.
    pub fn compact(self, tol: f64) -> Self {
        match self {
            OperatorMatrix::Complex(m) => {
                let scale = (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| (i, j))).map(|(i, j)| m[(i, j)].norm()).fold(0.0, f64::max);
                let imag = (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| (i, j))).map(|(i, j)| m[(i, j)].im.abs()).fold(0.0, f64::max);
                if imag <= tol * scale {
                    OperatorMatrix::Real(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))
                } else {
                    OperatorMatrix::Complex(m)
                }
            }
            real => real,
        }
    }
}

/// Dense operator between finite-dimensional model spaces.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    matrix: OperatorMatrix,
    domain: SpaceDesc,
    codomain: SpaceDesc,
    assembly: Assembly,
    symmetric: bool,
}

impl DiscretizedOperator {
    /// Wraps a matrix, checking shapes. The symmetric flag is set when the
    /// matrix is Hermitian to `1e-10` of its largest entry.
    pub fn new(matrix: OperatorMatrix, domain: SpaceDesc, codomain: SpaceDesc, assembly: Assembly) -> Result<Self> {
        if matrix.ncols() != domain.cardinality() {
            return Err(Error::ShapeMismatch { expected: domain.cardinality(), got: matrix.ncols() });
        }
        if matrix.nrows() != codomain.cardinality() {
            return Err(Error::ShapeMismatch { expected: codomain.cardinality(), got: matrix.nrows() });
        }
        let symmetric = matrix.nrows() == matrix.ncols() && hermitian_defect(&matrix) <= 1e-10 * matrix.max_abs();
        Ok(DiscretizedOperator { matrix, domain, codomain, assembly, symmetric })
    }

    /// Operator from a plain matrix on `ℓ_2` atom space, mainly for tests and
    /// small audits.
    pub fn from_matrix(matrix: OperatorMatrix) -> Self {
        let domain = SpaceDesc::AtomSpace { atoms: matrix.ncols(), level: 0, p: 2.0 };
        let codomain = SpaceDesc::AtomSpace { atoms: matrix.nrows(), level: 0, p: 2.0 };
        Self::new(matrix, domain, codomain, Assembly::new("explicit")).expect("shapes follow the matrix")
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn domain(&self) -> &SpaceDesc {
        &self.domain
    }

    pub fn codomain(&self) -> &SpaceDesc {
        &self.codomain
    }

    pub fn assembly(&self) -> &Assembly {
        &self.assembly
    }

    pub fn assembly_mut(&mut self) -> &mut Assembly {
        &mut self.assembly
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// The operator multiplied by a real constant.
    pub fn scaled(&self, c: f64) -> Self {
        let matrix = match &self.matrix {
            OperatorMatrix::Real(m) => OperatorMatrix::Real(Mat::from_fn(m.nrows(), m.ncols(), |i, j| c * m[(i, j)])),
            OperatorMatrix::Complex(m) => OperatorMatrix::Complex(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)),
        };
        DiscretizedOperator { matrix, ..self.clone() }
    }
}

fn hermitian_defect(m: &OperatorMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m.get(i, j) - m.get(j, i).conj()).norm());
        }
    }
    worst
}

/// `n − d < 2s ≤ n`.
pub(crate) fn check_kernel_window(measure: &FractalMeasure, a: f64, what: &str) -> Result<()> {
    let n = measure.ambient_dim() as f64;
    let d = measure.dimension();
    if !(n - d < a && a <= n) {
        return Err(Error::WindowViolation(format!("{what} = {a} must satisfy n − d = {} < {what} ≤ n = {n}", n - d)));
    }
    Ok(())
}
