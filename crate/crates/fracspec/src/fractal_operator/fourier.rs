//! Fourier-side assembly on the level-L cells.
//!
//! Cell `j` of a rotation-free IFS has normalized transform
//! `e^{-iγ_j·ξ} Ψ(r^L ξ)` with `Ψ` the [`CellProfile`]. For a multiplier `b`,
//! averaging the operator with symbol `b` over `cell j × cell k` gives
//!
//! ```text
//! K_b[j,k] = (2π)^{-n} ∫ b(ξ) φ_0(|ξ|/Ξ) |Ψ(r^L ξ)|² e^{i(γ_j−γ_k)·ξ} dξ.
//! ```
//!
//! The integral is a Riemann sum with spacing `Δξ ≤ π/(4 D)`, `D` the larger
//! of the attractor and hull diameters. In one dimension, when the atoms sit
//! on a lattice `x_0 + hℤ`, the sum folds onto `M` residues and one inverse
//! FFT yields `K_b` at every lattice offset. Otherwise the matrix is built
//! from dense blocks of modes.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{Assembly, DiscretizedOperator, OperatorMatrix, SpaceDesc};
use crate::besov_analysis::{bessel_weight, phi0};
use crate::error::{Error, Result};
use crate::fractal_measure::{CellProfile, FractalMeasure};
use crate::psido_engine::{PointFn, Symbol};

/// Largest number of explicit modes in a [`ModeSet`].
const MAX_MODES: usize = 1 << 22;
/// Largest `N² · modes` product for the dense assembly path.
const MAX_DENSE_WORK: f64 = 2e11;
/// Largest lattice period for the folded path.
const MAX_PERIOD: usize = 1 << 24;
const CHUNK: usize = 2048;

/// Smooth frequency cutoff `Ξ` and quadrature spacing `Δξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub cutoff: f64,
    pub spacing: f64,
}

fn phase_diameter(measure: &FractalMeasure) -> f64 {
    measure.attractor_diameter().max(measure.hull_diameter())
}

impl FrequencyGrid {
    pub fn new(cutoff: f64, spacing: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff.is_finite() && spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} and spacing {spacing} must be positive")));
        }
        Ok(FrequencyGrid { cutoff, spacing })
    }

    /// `Ξ = 8π / cell diameter`, resolving four oscillations across a cell.
    pub fn auto(measure: &FractalMeasure) -> Self {
        Self::with_cutoff(measure, 8.0 * PI / measure.cell_diameter())
    }

    /// The given cutoff with spacing `π / (4 D)`.
    pub fn with_cutoff(measure: &FractalMeasure, cutoff: f64) -> Self {
        FrequencyGrid { cutoff, spacing: PI / (4.0 * phase_diameter(measure)) }
    }

    /// Radius beyond which the taper vanishes.
    pub fn support(&self) -> f64 {
        1.5 * self.cutoff
    }

    pub fn taper(&self, radius: f64) -> f64 {
        phi0(radius / self.cutoff)
    }
}

/// Finite family of Fourier modes `e^{ix·ξ_l}` with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    dim: usize,
    frequencies: Vec<f64>,
    weights: Vec<f64>,
}

impl ModeSet {
    /// Lattice `Δξ ℤ^n` inside the taper support, weighted by `Δξ^n φ_0`.
    pub fn grid(dim: usize, grid: &FrequencyGrid) -> Result<Self> {
        let u = (grid.support() / grid.spacing).floor() as i64;
        let count = (2 * u + 1) as f64;
        if count.powi(dim as i32) > MAX_MODES as f64 {
            return Err(Error::Unsupported(format!(
                "{} modes exceed the explicit mode limit {MAX_MODES}; lower the cutoff",
                count.powi(dim as i32)
            )));
        }
        let cell = grid.spacing.powi(dim as i32);
        let mut frequencies = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![-u; dim];
        loop {
            let xi: Vec<f64> = idx.iter().map(|&i| i as f64 * grid.spacing).collect();
            let taper = grid.taper(xi.iter().map(|v| v * v).sum::<f64>().sqrt());
            if taper > 0.0 {
                frequencies.extend_from_slice(&xi);
                weights.push(cell * taper);
            }
            let mut a = dim;
            loop {
                if a == 0 {
                    return Ok(ModeSet { dim, frequencies, weights });
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= u {
                    break;
                }
                idx[a] = -u;
            }
        }
    }

    pub fn explicit(dim: usize, frequencies: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if frequencies.len() != weights.len() {
            return Err(Error::ShapeMismatch { expected: frequencies.len(), got: weights.len() });
        }
        if let Some(bad) = frequencies.iter().find(|f| f.len() != dim) {
            return Err(Error::ShapeMismatch { expected: dim, got: bad.len() });
        }
        Ok(ModeSet { dim, frequencies: frequencies.concat(), weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn frequency(&self, l: usize) -> &[f64] {
        &self.frequencies[l * self.dim..(l + 1) * self.dim]
    }

    pub fn weight(&self, l: usize) -> f64 {
        self.weights[l]
    }
}

/// `F(fμ)(ξ) = (2π)^{-n/2} Σ_j w_j f(γ_j) e^{-iγ_j·ξ}` at each `ξ`.
pub fn fourier_of_fmu(values: &[Complex64], measure: &FractalMeasure, xis: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    if values.len() != measure.len() {
        return Err(Error::ShapeMismatch { expected: measure.len(), got: values.len() });
    }
    let n = measure.ambient_dim();
    let conv = (2.0 * PI).powf(-(n as f64) / 2.0);
    xis.iter()
        .map(|xi| {
            if xi.len() != n {
                return Err(Error::ShapeMismatch { expected: n, got: xi.len() });
            }
            let sum: Complex64 = (0..measure.len())
                .map(|j| {
                    let phase: f64 = measure.atom(j).iter().zip(xi).map(|(a, b)| a * b).sum();
                    values[j] * measure.weights()[j] * Complex64::from_polar(1.0, -phase)
                })
                .sum();
            Ok(sum * conv)
        })
        .collect()
}

/// Cell-averaged kernels, one per multiplier, with the share of the
/// integrand mass that sits in the taper band `Ξ < |ξ| < 3Ξ/2`.
pub(crate) struct CellKernels {
    pub matrices: Vec<Mat<Complex64>>,
    pub band_ratio: f64,
    pub path: &'static str,
}

/// Lattice indices of 1-D atoms: `x_j = x_0 + idx_j h`.
fn lattice_indices(measure: &FractalMeasure) -> Option<(f64, Vec<i64>)> {
    if measure.ambient_dim() != 1 || measure.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = (0..measure.len()).map(|j| measure.atom(j)[0]).collect();
    let mut sorted = xs.clone();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > 1e-12 * span).fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return None;
    }
    for div in 1..=16 {
        let h = gap / div as f64;
        let mut idx = Vec::with_capacity(xs.len());
        let mut ok = true;
        for &x in &xs {
            let u = (x - xs[0]) / h;
            let k = u.round();
            if (u - k).abs() > 1e-6 {
                ok = false;
                break;
            }
            idx.push(k as i64);
        }
        if ok {
            return Some((h, idx));
        }
    }
    None
}

/// Smallest `2^a 3^b 5^c ≥ target`.
fn smooth_size(target: usize) -> usize {
    let mut best = usize::MAX;
    let mut p2 = 1usize;
    while p2 < 2 * target.max(1) {
        let mut p3 = p2;
        while p3 < 2 * target.max(1) {
            let mut p5 = p3;
            while p5 < target {
                p5 *= 5;
            }
            best = best.min(p5);
            p3 *= 3;
        }
        p2 *= 2;
    }
    best
}

fn lattice_kernels(measure: &FractalMeasure, grid: &FrequencyGrid, profile: &CellProfile, multipliers: &[PointFn]) -> Option<CellKernels> {
    let (h, idx) = lattice_indices(measure)?;
    let period = 2.0 * PI / grid.spacing;
    let target = (period / h).ceil() as usize;
    if target > MAX_PERIOD {
        return None;
    }
    let m = smooth_size(target);
    let dxi = 2.0 * PI / (m as f64 * h);
    let u_max = (grid.support() / dxi).floor() as i64;
    let scale = measure.ratio().powi(measure.level() as i32);
    let mut sums = vec![vec![Complex64::new(0.0, 0.0); m]; multipliers.len()];
    let (mut total, mut band) = (vec![0.0; multipliers.len()], vec![0.0; multipliers.len()]);
    for u in -u_max..=u_max {
        let xi = u as f64 * dxi;
        let taper = grid.taper(xi.abs());
        if taper == 0.0 {
            continue;
        }
        let power = profile.power_1d(scale * xi);
        let slot = u.rem_euclid(m as i64) as usize;
        for (t, b) in multipliers.iter().enumerate() {
            let bv = b(&[xi]) * power;
            sums[t][slot] += bv * taper;
            total[t] += bv.norm() * taper;
            if xi.abs() > grid.cutoff {
                band[t] += bv.norm();
            }
        }
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(m);
    let norm = dxi / (2.0 * PI);
    let count = measure.len();
    let matrices = sums
        .into_iter()
        .map(|mut s| {
            fft.process(&mut s);
            Mat::from_fn(count, count, |j, k| s[(idx[j] - idx[k]).rem_euclid(m as i64) as usize] * norm)
        })
        .collect();
    let band_ratio = band.iter().zip(&total).map(|(b, t)| if *t > 0.0 { b / t } else { 0.0 }).fold(0.0, f64::max);
    Some(CellKernels { matrices, band_ratio, path: "lattice_fft" })
}

/// Phase-and-profile block `E[j, l] = e^{iγ_j·ξ_l} conj Ψ(r^L ξ_l)`.
fn mode_block(measure: &FractalMeasure, profile: &CellProfile, modes: &ModeSet, range: std::ops::Range<usize>) -> Mat<Complex64> {
    let scale = measure.ratio().powi(measure.level() as i32);
    let psi: Vec<Complex64> = range
        .clone()
        .map(|l| {
            let eta: Vec<f64> = modes.frequency(l).iter().map(|v| v * scale).collect();
            profile.eval(&eta).conj()
        })
        .collect();
    Mat::from_fn(measure.len(), range.len(), |j, c| {
        let l = range.start + c;
        let phase: f64 = measure.atom(j).iter().zip(modes.frequency(l)).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, phase) * psi[c]
    })
}

fn check_dense_work(measure: &FractalMeasure, modes: &ModeSet, terms: usize) -> Result<()> {
    let work = (measure.len() as f64).powi(2) * modes.len() as f64 * terms as f64;
    if work > MAX_DENSE_WORK {
        return Err(Error::Unsupported(format!(
            "dense Fourier assembly needs {work:.2e} operations (limit {MAX_DENSE_WORK:.0e}); lower the level or the cutoff"
        )));
    }
    Ok(())
}

fn band_share(grid: &FrequencyGrid, modes: &ModeSet, l: usize, value: f64, total: &mut f64, band: &mut f64) {
    let radius = modes.frequency(l).iter().map(|v| v * v).sum::<f64>().sqrt();
    *total += value;
    if radius > grid.cutoff {
        let taper = grid.taper(radius);
        if taper > 0.0 {
            *band += value / taper;
        }
    }
}

/// Dense path: `K_b = E diag((2π)^{-n} c_l b(ξ_l)) E*`, in blocks of modes.
fn dense_kernels(measure: &FractalMeasure, grid: &FrequencyGrid, profile: &CellProfile, multipliers: &[PointFn]) -> Result<CellKernels> {
    let n = measure.ambient_dim();
    let modes = ModeSet::grid(n, grid)?;
    check_dense_work(measure, &modes, multipliers.len())?;
    let conv = (2.0 * PI).powi(-(n as i32));
    let count = measure.len();
    let mut matrices = vec![Mat::<Complex64>::zeros(count, count); multipliers.len()];
    let (mut total, mut band) = (0.0, 0.0);
    for start in (0..modes.len()).step_by(CHUNK) {
        let range = start..(start + CHUNK).min(modes.len());
        let e = mode_block(measure, profile, &modes, range.clone());
        for (t, b) in multipliers.iter().enumerate() {
            let coef: Vec<Complex64> = range.clone().map(|l| b(modes.frequency(l)) * modes.weight(l) * conv).collect();
            for (c, l) in range.clone().enumerate() {
                if t == 0 {
                    let v = coef[c].norm() * e[(0, c)].norm_sqr();
                    band_share(grid, &modes, l, v, &mut total, &mut band);
                }
            }
            let a = Mat::from_fn(count, range.len(), |j, c| e[(j, c)] * coef[c]);
            matrices[t] += &a * e.adjoint();
        }
    }
    let band_ratio = if total > 0.0 { band / total } else { 0.0 };
    Ok(CellKernels { matrices, band_ratio, path: "dense" })
}

pub(crate) fn cell_kernels(measure: &FractalMeasure, grid: &FrequencyGrid, multipliers: &[PointFn]) -> Result<CellKernels> {
    let profile = measure.cell_profile()?;
    if let Some(k) = lattice_kernels(measure, grid, &profile, multipliers) {
        return Ok(k);
    }
    dense_kernels(measure, grid, &profile, multipliers)
}

/// `(2π)^{-n} ∫ τ(γ_j, ξ) φ_0 |Ψ|² e^{i(γ_j−γ_k)·ξ} dξ` for a non-separable symbol.
pub(crate) fn general_kernel(measure: &FractalMeasure, grid: &FrequencyGrid, sym: &Symbol) -> Result<CellKernels> {
    let profile = measure.cell_profile()?;
    let n = measure.ambient_dim();
    let modes = ModeSet::grid(n, grid)?;
    check_dense_work(measure, &modes, 1)?;
    let conv = (2.0 * PI).powi(-(n as i32));
    let count = measure.len();
    let mut out = Mat::<Complex64>::zeros(count, count);
    let (mut total, mut band) = (0.0, 0.0);
    for start in (0..modes.len()).step_by(CHUNK) {
        let range = start..(start + CHUNK).min(modes.len());
        let e = mode_block(measure, &profile, &modes, range.clone());
        let a = Mat::from_fn(count, range.len(), |j, c| {
            let l = range.start + c;
            e[(j, c)] * sym.eval(measure.atom(j), modes.frequency(l)) * (modes.weight(l) * conv)
        });
        for (c, l) in range.clone().enumerate() {
            let v = a[(0, c)].norm() * e[(0, c)].norm();
            band_share(grid, &modes, l, v, &mut total, &mut band);
        }
        out += &a * e.adjoint();
    }
    let band_ratio = if total > 0.0 { band / total } else { 0.0 };
    Ok(CellKernels { matrices: vec![out], band_ratio, path: "dense_general" })
}

pub(crate) fn check_trace_window(measure: &FractalMeasure, s: f64, p: f64) -> Result<()> {
    let n = measure.ambient_dim() as f64;
    let d = measure.dimension();
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p = {p} must be finite and at least 1")));
    }
    if !((n - d) / p < s && s <= n / p) {
        return Err(Error::WindowViolation(format!("trace needs (n − d)/p = {} < s ≤ n/p = {}, got s = {s}", (n - d) / p, n / p)));
    }
    Ok(())
}

/// Matrix of `tr_μ` from H^s-normalized modes to cell averages:
/// `T[j, l] = (2π)^{-n/2} √c_l w_{-s}(ξ_l) e^{iγ_j·ξ_l} conj Ψ(r^L ξ_l)`,
/// where `c_l` is the mode weight. Rows are plain coordinates; singular
/// values in `L_2(μ)` are those of `diag(√w) T`.
pub fn assemble_trace_operator(measure: &FractalMeasure, s: f64, p: f64, modes: &ModeSet) -> Result<DiscretizedOperator> {
    check_trace_window(measure, s, p)?;
    let n = measure.ambient_dim();
    if modes.dim != n {
        return Err(Error::ShapeMismatch { expected: n, got: modes.dim });
    }
    let profile = measure.cell_profile()?;
    let entries = measure.len() as f64 * modes.len() as f64;
    if entries > (MAX_MODES * 16) as f64 {
        return Err(Error::Unsupported(format!("{entries:.2e} trace entries; use trace_gram for large levels")));
    }
    let conv = (2.0 * PI).powf(-(n as f64) / 2.0);
    let mut mat = Mat::<Complex64>::zeros(measure.len(), modes.len());
    for start in (0..modes.len()).step_by(CHUNK) {
        let range = start..(start + CHUNK).min(modes.len());
        let e = mode_block(measure, &profile, modes, range.clone());
        for (c, l) in range.enumerate() {
            let xi_sq: f64 = modes.frequency(l).iter().map(|v| v * v).sum();
            let col = conv * modes.weight(l).sqrt() * bessel_weight(-s, xi_sq);
            for j in 0..measure.len() {
                mat[(j, l)] = e[(j, c)] * col;
            }
        }
    }
    let domain = SpaceDesc::ModeSpace { modes: modes.len(), s };
    let codomain = SpaceDesc::AtomSpace { atoms: measure.len(), level: measure.level(), p };
    let assembly = Assembly { level: Some(measure.level()), ..Assembly::new("trace_operator").with("s", s).with("p", p) };
    DiscretizedOperator::new(OperatorMatrix::Complex(mat).compact(1e-12), domain, codomain, assembly)
}

/// Gram matrix `diag(√w) K_{w_{-2s}} diag(√w)` of the trace into `L_2(μ)`;
/// its eigenvalues are the squared approximation numbers of `tr_μ`.
pub fn trace_gram(measure: &FractalMeasure, s: f64, grid: &FrequencyGrid) -> Result<DiscretizedOperator> {
    check_trace_window(measure, s, 2.0)?;
    let b: PointFn = std::sync::Arc::new(move |xi: &[f64]| Complex64::new(bessel_weight(-2.0 * s, xi.iter().map(|v| v * v).sum()), 0.0));
    let kernels = cell_kernels(measure, grid, &[b])?;
    let k = &kernels.matrices[0];
    let sw: Vec<f64> = measure.weights().iter().map(|w| w.sqrt()).collect();
    let count = measure.len();
    let mat = Mat::from_fn(count, count, |i, j| 0.5 * (k[(i, j)] + k[(j, i)].conj()).re * sw[i] * sw[j]);
    let space = SpaceDesc::AtomSpace { atoms: count, level: measure.level(), p: 2.0 };
    let mut assembly = Assembly {
        level: Some(measure.level()),
        cutoff: Some(grid.cutoff),
        ..Assembly::new("trace_gram")
            .with("s", s)
            .with("spacing", grid.spacing)
            .with("path", kernels.path)
            .with("band_ratio", kernels.band_ratio)
    };
    if kernels.band_ratio > super::galerkin::BAND_WARNING {
        assembly.warnings.push(format!("integrand share {:.2e} in the cutoff band exceeds 1e-6", kernels.band_ratio));
    }
    DiscretizedOperator::new(OperatorMatrix::Real(mat), space.clone(), space, assembly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal_measure::build_cantor_like;
    use crate::fractal_operator::assemble_dmu_kernel;

    fn cantor(level: usize) -> FractalMeasure {
        let ifs = build_cantor_like(1, 2, 1.0 / 3.0, &[vec![0.0], vec![2.0 / 3.0]]).unwrap();
        FractalMeasure::quadrature(&ifs, level).unwrap()
    }

    fn sym_eigs(op: &DiscretizedOperator) -> Vec<f64> {
        let m = op.matrix().to_complex();
        let re = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re);
        let mut v: Vec<f64> = re.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        v.reverse();
        v
    }

    #[test]
    fn transform_of_the_measure() {
        let mu = cantor(4);
        let ones = vec![Complex64::new(1.0, 0.0); mu.len()];
        let at0 = fourier_of_fmu(&ones, &mu, &[vec![0.0]]).unwrap()[0];
        assert!((at0.re - 0.398_942_280_401_432_7).abs() < 1e-15 && at0.im.abs() < 1e-15);
        let zeros = vec![Complex64::new(0.0, 0.0); mu.len()];
        assert!(fourier_of_fmu(&zeros, &mu, &[vec![3.0], vec![-7.5]]).unwrap().iter().all(|v| v.norm() == 0.0));
        let ifs = mu.ifs().clone();
        let point = FractalMeasure::from_atoms(&ifs, 0, vec![vec![0.0]], vec![1.0]).unwrap();
        for v in fourier_of_fmu(&[Complex64::new(1.0, 0.0)], &point, &[vec![1.0], vec![40.0]]).unwrap() {
            assert!((v - Complex64::new(0.398_942_280_401_432_7, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1), 1);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(121), 125);
        assert_eq!(smooth_size(708_580), 708_588);
    }

    #[test]
    fn lattice_and_dense_paths_agree() {
        let mu = cantor(4);
        let grid = FrequencyGrid::auto(&mu);
        let profile = mu.cell_profile().unwrap();
        let b: PointFn = std::sync::Arc::new(|xi: &[f64]| Complex64::new(bessel_weight(-0.9, xi[0] * xi[0]), 0.0));
        let folded = lattice_kernels(&mu, &grid, &profile, &[b.clone()]).unwrap();
        let dense = dense_kernels(&mu, &grid, &profile, &[b]).unwrap();
        let (f, d) = (&folded.matrices[0], &dense.matrices[0]);
        let scale = d[(0, 0)].norm();
        for j in 0..mu.len() {
            for k in 0..mu.len() {
                // Spacings differ slightly (smooth FFT size), so agreement is
                // to quadrature accuracy rather than round-off.
                assert!((f[(j, k)] - d[(j, k)]).norm() < 1e-3 * scale, "{j},{k}");
            }
        }
    }

    #[test]
    fn constant_mode_gives_a_constant_column() {
        let mu = cantor(3);
        let modes = ModeSet::explicit(1, vec![vec![0.0], vec![2.0]], vec![1.0, 1.0]).unwrap();
        let op = assemble_trace_operator(&mu, 0.45, 2.0, &modes).unwrap();
        let conv = (2.0 * PI).powf(-0.5);
        for j in 0..mu.len() {
            assert!((op.matrix().get(j, 0) - Complex64::new(conv, 0.0)).norm() < 1e-15);
        }
        let none = ModeSet::explicit(1, vec![vec![5.0]], vec![0.0]).unwrap();
        assert_eq!(assemble_trace_operator(&mu, 0.45, 2.0, &none).unwrap().matrix().max_abs(), 0.0);
        assert!(matches!(assemble_trace_operator(&mu, 0.1, 2.0, &modes), Err(Error::WindowViolation(_))));
    }

    #[test]
    fn trace_singular_values_match_the_gram() {
        let mu = cantor(4);
        let grid = FrequencyGrid::auto(&mu);
        let modes = ModeSet::grid(1, &grid).unwrap();
        let t = assemble_trace_operator(&mu, 0.45, 2.0, &modes).unwrap().matrix().to_complex();
        let sw: Vec<f64> = mu.weights().iter().map(|w| w.sqrt()).collect();
        let wt = Mat::from_fn(t.nrows(), t.ncols(), |j, l| t[(j, l)] * sw[j]);
        let sv: Vec<f64> = wt.singular_values().unwrap();
        let gram = trace_gram(&mu, 0.45, &grid).unwrap();
        let eig = sym_eigs(&gram);
        for k in 0..mu.len() {
            assert!((sv[k] * sv[k] / eig[k] - 1.0).abs() < 2e-3, "k={k}: {} vs {}", sv[k] * sv[k], eig[k]);
        }
    }

    #[test]
    fn gram_tracks_the_nystrom_kernel() {
        let mu = cantor(7);
        let gram = trace_gram(&mu, 0.45, &FrequencyGrid::auto(&mu)).unwrap();
        let nys = assemble_dmu_kernel(&mu, 0.45).unwrap();
        let (a, b) = (sym_eigs(&gram), sym_eigs(&nys));
        for k in 0..20 {
            assert!((a[k] / b[k] - 1.0).abs() < 0.03, "k={k}: {} vs {}", a[k], b[k]);
        }
    }
}
