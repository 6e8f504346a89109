//! Littlewood–Paley analysis on a periodic grid.
//!
//! Functions live on a [`SpatialGrid`] (extent `R`, `N` points per axis,
//! `N` a power of two). The dyadic resolution of unity is built from the
//! fixed profile [`phi0`]: `φ_0 = 1` on `|ξ| ≤ 1`, `0` on `|ξ| ≥ 3/2`, and
//! `φ_k(ξ) = φ_0(2^{-k}ξ) − φ_0(2^{-k+1}ξ)`.
//!
//! ```
//! use fracspec::besov_analysis::{besov_norm, BesovParams, DyadicResolution, GridFunction, SpatialGrid};
//!
//! let grid = SpatialGrid::new(1, 256, 40.0).unwrap();
//! let f = GridFunction::from_real_fn(&grid, |x| (-x[0] * x[0]).exp());
//! let res = DyadicResolution::covering(&grid);
//! let b = besov_norm(&f, BesovParams::new(1.0, 2.0, 2.0), &res).unwrap();
//! let back = f.lift(1.0).lift(-1.0);
//! assert!(f.max_abs_diff(&back) < 1e-12);
//! assert!(b > 0.0);
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Largest share of spectral energy allowed outside the last dyadic shell.
pub const BAND_TOLERANCE: f64 = 1e-8;

fn glue(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Radial profile of the resolution of unity: 1 up to radius 1, 0 from
/// radius 3/2, joined by the `exp(-1/t)` transition.
pub fn phi0(t: f64) -> f64 {
    let t = t.abs();
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 1.5 {
        return 0.0;
    }
    let u = (t - 1.0) / 0.5;
    let a = glue(1.0 - u);
    a / (a + glue(u))
}

/// `φ_k` at radius `t`.
pub fn phi(k: usize, t: f64) -> f64 {
    if k == 0 {
        phi0(t)
    } else {
        phi0(t / 2f64.powi(k as i32)) - phi0(t / 2f64.powi(k as i32 - 1))
    }
}

/// `w_α(ξ) = (1+|ξ|²)^{α/2}` from the squared radius.
#[inline]
pub fn bessel_weight(alpha: f64, xi_sq: f64) -> f64 {
    (1.0 + xi_sq).powf(alpha / 2.0)
}

/// Uniform periodic grid on `[-R/2, R/2)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    points: usize,
    extent: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, points: usize, extent: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} must be 1, 2 or 3")));
        }
        if !points.is_power_of_two() || points < 2 {
            return Err(Error::InvalidParameter(format!("{points} points per axis is not a power of two")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("extent {extent} must be positive")));
        }
        Ok(SpatialGrid { dim, points, extent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    /// Cell volume `(R/N)^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    fn axis_indices(&self, flat: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).map(move |a| flat / self.points.pow((self.dim - 1 - a) as u32) % self.points)
    }

    /// Spatial coordinates of flat index `i` (row-major, last axis fastest).
    pub fn point(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        self.axis_indices(i).map(|k| -self.extent / 2.0 + k as f64 * h).collect()
    }

    /// Frequency of spectral index `k` in DFT order.
    pub fn frequency(&self, k: usize) -> Vec<f64> {
        let n = self.points as i64;
        let unit = 2.0 * std::f64::consts::PI / self.extent;
        self.axis_indices(k)
            .map(|i| {
                let i = i as i64;
                let signed = if i < n / 2 { i } else { i - n };
                unit * signed as f64
            })
            .collect()
    }

    /// `|ξ|` for every spectral index.
    pub fn frequency_norms(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.frequency(k).iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    /// Largest `|ξ|` on the grid.
    pub fn max_frequency(&self) -> f64 {
        let nyquist = std::f64::consts::PI / self.spacing();
        nyquist * (self.dim as f64).sqrt()
    }

    /// Same extent with twice as many points per axis.
    pub fn refined(&self) -> Self {
        SpatialGrid { points: self.points * 2, ..self.clone() }
    }
}

/// Forward (unnormalized) or inverse (normalized by `N^n`) transform along
/// every axis, in place.
pub(crate) fn fft_nd(grid: &SpatialGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.points;
    let mut planner = FftPlanner::<f64>::new();
    let plan: Arc<dyn Fft<f64>> = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                plan.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Complex samples on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: &SpatialGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), got: samples.len() });
        }
        Ok(GridFunction { grid: grid.clone(), samples })
    }

    pub fn from_fn(grid: &SpatialGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        GridFunction { grid: grid.clone(), samples }
    }

    pub fn from_real_fn(grid: &SpatialGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        GridFunction { grid: grid.clone(), samples: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Discrete Fourier coefficients (unnormalized DFT, DFT index order).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.samples.clone();
        fft_nd(&self.grid, &mut data, false);
        data
    }

    pub fn from_spectrum(grid: &SpatialGrid, mut spectrum: Vec<Complex64>) -> Self {
        fft_nd(grid, &mut spectrum, true);
        GridFunction { grid: grid.clone(), samples: spectrum }
    }

    /// Applies the Fourier multiplier `m(ξ)`.
    pub fn multiply_spectrum(&self, m: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut spec = self.spectrum();
        for (k, v) in spec.iter_mut().enumerate() {
            *v *= m(&self.grid.frequency(k));
        }
        Self::from_spectrum(&self.grid, spec)
    }

    /// The lift `I_α f = (w_α f̂)^∨`.
    pub fn lift(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return self.clone();
        }
        self.multiply_spectrum(|xi| Complex64::new(bessel_weight(alpha, xi.iter().map(|x| x * x).sum()), 0.0))
    }

    /// Riemann-sum `L_p` norm; `p = ∞` gives the maximum modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let sum: f64 = self.samples.iter().map(|v| v.norm().powf(p)).sum();
        (sum * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        GridFunction { grid: self.grid.clone(), samples: self.samples.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        GridFunction { grid: self.grid.clone(), samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect() }
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Trigonometric interpolation onto the grid with twice the points per
    /// axis; exact for functions band-limited below the coarse Nyquist rate.
    pub fn refined(&self) -> Self {
        let fine = self.grid.refined();
        let n = self.grid.points as i64;
        let spec = self.spectrum();
        let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
        let scale = 2f64.powi(self.grid.dim as i32);
        for (k, v) in spec.iter().enumerate() {
            let mut fine_index = 0usize;
            let mut skip = false;
            for i in self.grid.axis_indices(k) {
                let i = i as i64;
                if i == n / 2 {
                    // Drop the Nyquist column; it has no unique continuation.
                    skip = true;
                }
                let signed = if i < n / 2 { i } else { i - n };
                let fi = signed.rem_euclid(2 * n) as usize;
                fine_index = fine_index * (2 * n as usize) + fi;
            }
            if !skip {
                out[fine_index] = v * scale;
            }
        }
        Self::from_spectrum(&fine, out)
    }

    /// Share of spectral energy where `φ_0(|ξ|/radius) < 1`, weighted by
    /// the discarded part of the profile.
    pub fn spectral_tail(&self, radius: f64) -> f64 {
        let spec = self.spectrum();
        let norms = self.grid.frequency_norms();
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = spec.iter().zip(&norms).map(|(v, &t)| (1.0 - phi0(t / radius)).powi(2) * v.norm_sqr()).sum();
        tail / total
    }
}

/// Smoothness and integrability exponents `(s, p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, q: f64) -> Self {
        BesovParams { s, p, q }
    }
}

/// Tabulated `φ_0, …, φ_J` on the frequency grid of a [`SpatialGrid`].
#[derive(Debug, Clone)]
pub struct DyadicResolution {
    levels: usize,
    grid: SpatialGrid,
    table: Vec<Vec<f64>>,
    residual: f64,
}

impl DyadicResolution {
    /// `φ_j` for `0 ≤ j ≤ levels` on the grid frequencies.
    pub fn new(levels: usize, grid: &SpatialGrid) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidParameter("a dyadic resolution needs at least one level".into()));
        }
        let norms = grid.frequency_norms();
        let table: Vec<Vec<f64>> = (0..=levels).map(|j| norms.iter().map(|&t| phi(j, t)).collect()).collect();
        let top = 2f64.powi(levels as i32);
        let residual = norms
            .iter()
            .enumerate()
            .filter(|(_, &t)| t <= top)
            .map(|(k, _)| (table.iter().map(|row| row[k]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(DyadicResolution { levels, grid: grid.clone(), table, residual })
    }

    /// Smallest resolution whose last shell reaches every grid frequency.
    pub fn covering(grid: &SpatialGrid) -> Self {
        let levels = grid.max_frequency().log2().ceil().max(1.0) as usize;
        Self::new(levels, grid).expect("levels ≥ 1")
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `max |Σ_{j≤J} φ_j − 1|` over grid frequencies with `|ξ| ≤ 2^J`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `φ_j` at every spectral index.
    pub fn level(&self, j: usize) -> &[f64] {
        &self.table[j]
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
}

/// `(Σ_j 2^{jsq} ‖(φ_j f̂)^∨‖_{L_p}^q)^{1/q}` with the usual supremum for
/// `q = ∞`.
pub fn besov_norm(f: &GridFunction, params: BesovParams, res: &DyadicResolution) -> Result<f64> {
    if f.grid != res.grid {
        return Err(Error::InvalidParameter("function and resolution live on different grids".into()));
    }
    if !(params.p > 0.0 && params.q > 0.0) {
        return Err(Error::InvalidParameter(format!("p = {} and q = {} must be positive", params.p, params.q)));
    }
    let spec = f.spectrum();
    let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let top = 2f64.powi(res.levels as i32);
    let norms = f.grid.frequency_norms();
    let outside: f64 = spec.iter().zip(&norms).map(|(v, &t)| (1.0 - phi0(t / top)).powi(2) * v.norm_sqr()).sum();
    let fraction = outside / total;
    if fraction > BAND_TOLERANCE {
        return Err(Error::BandOverflow { fraction });
    }
    let mut acc = 0.0;
    for j in 0..=res.levels {
        let block: Vec<Complex64> = spec.iter().zip(&res.table[j]).map(|(v, w)| v * *w).collect();
        let lp = GridFunction::from_spectrum(&f.grid, block).lp_norm(params.p);
        let term = 2f64.powf(j as f64 * params.s) * lp;
        if params.q.is_infinite() {
            acc = f64::max(acc, term);
        } else {
            acc += term.powf(params.q);
        }
    }
    Ok(if params.q.is_infinite() { acc } else { acc.powf(1.0 / params.q) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(1, 512, 40.0).unwrap()
    }

    /// Gaussian-windowed trigonometric polynomial with random coefficients.
    fn random_band_limited(grid: &SpatialGrid, rng: &mut ChaCha8Rng) -> GridFunction {
        let modes: Vec<(f64, Complex64)> = (0..6)
            .map(|_| (rng.random_range(-3.0..3.0), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        let width = rng.random_range(1.0..2.5);
        GridFunction::from_fn(grid, |x| {
            let env = (-x[0] * x[0] / (2.0 * width * width)).exp();
            modes.iter().map(|(k, c)| c * Complex64::from_polar(env, k * x[0])).sum()
        })
    }

    #[test]
    fn profile_plateau_and_support() {
        assert_eq!(phi0(0.0), 1.0);
        assert_eq!(phi0(1.0), 1.0);
        assert_eq!(phi0(1.5), 0.0);
        assert_eq!(phi(1, 2.0), 1.0);
        assert_eq!(phi(3, 0.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = phi0(1.0 + 0.005 * i as f64);
            assert!(v <= prev);
            prev = v;
        }
        for k in 1..8 {
            let lo = 2f64.powi(k - 1);
            for i in 0..2000 {
                let t = i as f64 * 0.01 * 2f64.powi(k);
                if t < lo || t > 3.0 * lo {
                    assert_eq!(phi(k as usize, t), 0.0, "k={k} t={t}");
                }
            }
        }
    }

    #[test]
    fn partition_residual_is_tiny() {
        let g = SpatialGrid::new(2, 64, 10.0).unwrap();
        let res = DyadicResolution::covering(&g);
        assert!(res.residual() <= 1e-12);
        let g1 = SpatialGrid::new(1, 4096, 20.0).unwrap();
        assert!(DyadicResolution::new(9, &g1).unwrap().residual() <= 1e-12);
    }

    #[test]
    fn low_band_norm_is_lp_norm() {
        let g = grid();
        // Frequencies 2π k / 40 ≤ 1 for |k| ≤ 6.
        let f = GridFunction::from_real_fn(&g, |x| 1.0 + (2.0 * std::f64::consts::PI * 3.0 * x[0] / 40.0).cos());
        let res = DyadicResolution::covering(&g);
        for &p in &[1.0, 2.0, 3.5] {
            let b = besov_norm(&f, BesovParams::new(1.3, p, p), &res).unwrap();
            assert!((b / f.lp_norm(p) - 1.0).abs() < 1e-12, "p = {p}");
        }
        assert_eq!(besov_norm(&GridFunction::zeros(&g), BesovParams::new(1.0, 2.0, 2.0), &res).unwrap(), 0.0);
    }

    #[test]
    fn hilbert_case_matches_plancherel_weights() {
        // For p = q = 2 the norm squared is Σ_j 4^{js} Σ_ξ φ_j² |f̂|², a
        // purely spectral computation that skips the inverse transforms.
        let g = grid();
        let res = DyadicResolution::covering(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let f = random_band_limited(&g, &mut rng);
            let spec = f.spectrum();
            let s = 0.7;
            let mut oracle = 0.0;
            for j in 0..=res.levels() {
                let block: f64 = spec.iter().zip(res.level(j)).map(|(v, w)| w * w * v.norm_sqr()).sum();
                oracle += 4f64.powf(j as f64 * s) * block;
            }
            let oracle = (oracle * g.cell_volume() / g.len() as f64).sqrt();
            let b = besov_norm(&f, BesovParams::new(s, 2.0, 2.0), &res).unwrap();
            assert!((b / oracle - 1.0).abs() < 1e-10, "{b} vs {oracle}");
        }
    }

    #[test]
    fn hs_equivalence_band_over_gaussians() {
        let g = SpatialGrid::new(1, 1024, 60.0).unwrap();
        let res = DyadicResolution::covering(&g);
        let mut ratios = Vec::new();
        for &width in &[0.3, 0.5, 1.0, 2.0, 4.0] {
            let f = GridFunction::from_real_fn(&g, |x| (-x[0] * x[0] / (2.0 * width * width)).exp());
            let spec = f.spectrum();
            let norms = g.frequency_norms();
            let hs: f64 = spec.iter().zip(&norms).map(|(v, t)| (1.0 + t * t) * v.norm_sqr()).sum();
            let hs = (hs * g.cell_volume() / g.len() as f64).sqrt();
            ratios.push(besov_norm(&f, BesovParams::new(1.0, 2.0, 2.0), &res).unwrap() / hs);
        }
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 1.5, "{ratios:?}");
        assert!(lo > 0.5 && hi < 2.0, "{ratios:?}");
    }

    #[test]
    fn lift_round_trip_and_equivalence() {
        let g = grid();
        let res = DyadicResolution::covering(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_band_limited(&g, &mut rng);
            assert_eq!(f.lift(0.0), f);
            assert!(f.lift(1.7).lift(-1.7).max_abs_diff(&f) < 1e-10);
            let alpha = rng.random_range(-1.5..1.5);
            let s = 0.8;
            let lhs = besov_norm(&f.lift(alpha), BesovParams::new(s - alpha, 2.0, 2.0), &res).unwrap();
            let rhs = besov_norm(&f, BesovParams::new(s, 2.0, 2.0), &res).unwrap();
            let ratio = lhs / rhs;
            assert!((0.25..=4.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn band_overflow_is_detected() {
        let g = grid();
        let res = DyadicResolution::new(2, &g).unwrap();
        let f = GridFunction::from_real_fn(&g, |x| (-x[0] * x[0]).exp() * (20.0 * x[0]).cos());
        assert!(matches!(besov_norm(&f, BesovParams::new(1.0, 2.0, 2.0), &res), Err(Error::BandOverflow { .. })));
    }

    #[test]
    fn monotone_in_s_and_homogeneous() {
        let g = grid();
        let res = DyadicResolution::covering(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_band_limited(&g, &mut rng);
        let mut prev = 0.0;
        for i in 0..10 {
            let b = besov_norm(&f, BesovParams::new(0.2 * i as f64, 1.5, 1.5), &res).unwrap();
            assert!(b >= prev);
            prev = b;
        }
        let c = Complex64::new(-2.0, 1.5);
        let params = BesovParams::new(0.9, 3.0, f64::INFINITY);
        let lhs = besov_norm(&f.scale(c), params, &res).unwrap();
        let rhs = c.norm() * besov_norm(&f, params, &res).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_preserves_band_limited_functions() {
        let g = grid();
        let f = GridFunction::from_real_fn(&g, |x| (-x[0] * x[0] / 4.0).exp());
        let fine = f.refined();
        let direct = GridFunction::from_real_fn(fine.grid(), |x| (-x[0] * x[0] / 4.0).exp());
        assert!(fine.max_abs_diff(&direct) < 1e-12);
        let g2 = SpatialGrid::new(2, 128, 20.0).unwrap();
        let f2 = GridFunction::from_real_fn(&g2, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp());
        let direct2 = GridFunction::from_real_fn(&g2.refined(), |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp());
        let err = f2.refined().max_abs_diff(&direct2);
        assert!(err < 1e-10, "{err}");
    }
}
