use faer::Mat;
use num_complex::Complex64;

use super::fourier::{cell_kernels, general_kernel, FrequencyGrid};
use super::{check_kernel_window, Assembly, DiscretizedOperator, OperatorMatrix, SpaceDesc};
use crate::error::{Error, Result};
use crate::fractal_measure::FractalMeasure;
use crate::psido_engine::Symbol;

/// Share of the integrand in the taper band above which a warning is recorded.
pub(crate) const BAND_WARNING: f64 = 1e-6;

/// Compression of `T^μ_τ` to functions constant on the level-L cells:
///
/// ```text
/// M[j,k] = w_k (2π)^{-n} ∫ τ(γ_j, ξ) φ_0(|ξ|/Ξ) |Ψ(r^L ξ)|² e^{i(γ_j−γ_k)·ξ} dξ.
/// ```
///
/// Requires `n − d < sp ≤ n` and a symbol of declared order `−sp`.
/// Separable symbols `Σ_t a_t(x) b_t(ξ)` reduce to `Σ_t diag(a_t(γ)) K_{b_t} W`.
pub fn assemble_tmu_galerkin(sym: &Symbol, s: f64, p: f64, measure: &FractalMeasure, grid: &FrequencyGrid) -> Result<DiscretizedOperator> {
    if !(p >= 1.0 && p.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!("need s > 0 and finite p ≥ 1, got s = {s}, p = {p}")));
    }
    check_kernel_window(measure, s * p, "sp")?;
    if sym.dim() != measure.ambient_dim() {
        return Err(Error::ShapeMismatch { expected: measure.ambient_dim(), got: sym.dim() });
    }
    if (sym.order() + s * p).abs() > 1e-9 {
        return Err(Error::SymbolOrderMismatch { declared: sym.order(), required: -s * p });
    }
    let count = measure.len();
    let w = measure.weights();
    let (mat, band_ratio, path) = match sym.separable_terms() {
        Some(terms) => {
            let freqs: Vec<_> = terms.iter().map(|t| t.freq.clone()).collect();
            let kernels = cell_kernels(measure, grid, &freqs)?;
            let mut mat = Mat::<Complex64>::zeros(count, count);
            for (t, k) in terms.iter().zip(&kernels.matrices) {
                let a: Vec<Complex64> = (0..count).map(|j| (t.space)(measure.atom(j))).collect();
                mat += Mat::from_fn(count, count, |j, c| a[j] * k[(j, c)] * w[c]);
            }
            (mat, kernels.band_ratio, kernels.path)
        }
        None => {
            let kernels = general_kernel(measure, grid, sym)?;
            let k = &kernels.matrices[0];
            (Mat::from_fn(count, count, |j, c| k[(j, c)] * w[c]), kernels.band_ratio, kernels.path)
        }
    };
    let space = SpaceDesc::AtomSpace { atoms: count, level: measure.level(), p };
    let mut assembly = Assembly {
        level: Some(measure.level()),
        cutoff: Some(grid.cutoff),
        ..Assembly::new("tmu_galerkin")
            .with("symbol", sym.name())
            .with("s", s)
            .with("p", p)
            .with("spacing", grid.spacing)
            .with("path", path)
            .with("band_ratio", band_ratio)
    };
    if band_ratio > BAND_WARNING {
        assembly.warnings.push(format!("integrand share {band_ratio:.2e} in the cutoff band exceeds 1e-6"));
    }
    DiscretizedOperator::new(OperatorMatrix::Complex(mat).compact(1e-12), space.clone(), space, assembly)
}
