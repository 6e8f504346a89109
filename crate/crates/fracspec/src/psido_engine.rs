//! Hörmander-class symbols `τ(x, ξ)` and the operators `T_τ` they define.
//!
//! A [`Symbol`] carries its declared order `σ` and type `δ`; the estimate it
//! claims is `|D^α_x D^γ_ξ τ(x,ξ)| ≤ c_{αγ} (1+|ξ|)^{σ−|γ|+δ|α|}`, which
//! [`validate_symbol`] probes numerically. On a periodic grid,
//! `(T_τ f)(x) = (2π)^{-n/2} ∫ e^{ix·ξ} τ(x,ξ) φ_0(ξ/Ξ) f̂(ξ) dξ`.
//!
//! ```
//! use fracspec::besov_analysis::{GridFunction, SpatialGrid};
//! use fracspec::psido_engine::{apply_psido, Symbol};
//!
//! let grid = SpatialGrid::new(1, 128, 20.0).unwrap();
//! let f = GridFunction::from_real_fn(&grid, |x| (-x[0] * x[0]).exp());
//! let tf = apply_psido(&Symbol::bessel_power(1, -1.0), &f, grid.max_frequency()).unwrap();
//! assert!(tf.max_abs_diff(&f.lift(-1.0)) < 1e-12);
//! ```

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov_analysis::{besov_norm, bessel_weight, phi0, BesovParams, DyadicResolution, GridFunction};
use crate::error::{Error, Result};

/// Function of a single point (a space or a frequency factor).
pub type PointFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
/// Function of `(x, ξ)`.
pub type FullFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;

/// Cutoff-tail limit for [`apply_psido`].
pub const CUTOFF_TOLERANCE: f64 = 1e-8;
/// Allowed growth of estimated constants or ratios under refinement.
pub const REFINEMENT_GROWTH: f64 = 0.10;

/// One term `a(x) b(ξ)` of a separable symbol.
#[derive(Clone)]
pub struct SeparableTerm {
    pub space: PointFn,
    pub freq: PointFn,
}

#[derive(Clone)]
enum Repr {
    Multiplier(PointFn),
    Separable(Vec<SeparableTerm>),
    General(FullFn),
}

/// A symbol with its declared class `S^σ_{1,δ}`.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    dim: usize,
    order: f64,
    delta: f64,
    max_depth: usize,
    repr: Repr,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Multiplier(_) => "multiplier".to_string(),
            Repr::Separable(t) => format!("separable({})", t.len()),
            Repr::General(_) => "general".to_string(),
        };
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("delta", &self.delta)
            .field("kind", &kind)
            .finish()
    }
}

fn norm_sq(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum()
}

fn real(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> PointFn {
    Arc::new(move |p| Complex64::new(f(p), 0.0))
}

impl Symbol {
    fn build(name: &str, dim: usize, order: f64, delta: f64, repr: Repr) -> Self {
        Symbol { name: name.to_string(), dim, order, delta, max_depth: 3, repr }
    }

    /// x-independent symbol `b(ξ)`.
    pub fn multiplier(name: &str, dim: usize, order: f64, b: PointFn) -> Self {
        Self::build(name, dim, order, 0.0, Repr::Multiplier(b))
    }

    /// `Σ_t a_t(x) b_t(ξ)`.
    pub fn separable(name: &str, dim: usize, order: f64, delta: f64, terms: Vec<SeparableTerm>) -> Self {
        Self::build(name, dim, order, delta, Repr::Separable(terms))
    }

    pub fn general(name: &str, dim: usize, order: f64, delta: f64, f: FullFn) -> Self {
        Self::build(name, dim, order, delta, Repr::General(f))
    }

    /// `τ ≡ 1`.
    pub fn identity(dim: usize) -> Self {
        Self::multiplier("identity", dim, 0.0, Arc::new(|_| Complex64::new(1.0, 0.0)))
    }

    /// `w_σ(ξ) = (1+|ξ|²)^{σ/2}`.
    pub fn bessel_power(dim: usize, sigma: f64) -> Self {
        Self::multiplier("bessel_power", dim, sigma, real(move |xi| bessel_weight(sigma, norm_sq(xi))))
    }

    /// `w_σ(ξ) (1 + ½ cos x_1)`.
    pub fn separable_demo(dim: usize, sigma: f64) -> Self {
        let term = SeparableTerm { space: real(|x| 1.0 + 0.5 * x[0].cos()), freq: real(move |xi| bessel_weight(sigma, norm_sq(xi))) };
        Self::separable("separable_demo", dim, sigma, 0.0, vec![term])
    }

    /// `Σ_{j=1}^{J} e^{i 2^j x_1} ψ(2^{-j} ξ)` with `ψ(ξ) = φ_0(ξ) − φ_0(2ξ)`,
    /// a symbol of order 0 and type δ = 1 that is not of type δ < 1.
    pub fn exotic_demo(dim: usize, levels: usize) -> Self {
        let terms = (1..=levels)
            .map(|j| {
                let freq = 2f64.powi(j as i32);
                SeparableTerm {
                    space: Arc::new(move |x: &[f64]| Complex64::from_polar(1.0, freq * x[0])) as PointFn,
                    freq: real(move |xi| {
                        let t = norm_sq(xi).sqrt() / freq;
                        phi0(t) - phi0(2.0 * t)
                    }),
                }
            })
            .collect();
        Self::separable("exotic_demo", dim, 0.0, 1.0, terms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Deepest derivative order the symbol asks to be validated at.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn is_x_independent(&self) -> bool {
        matches!(self.repr, Repr::Multiplier(_))
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        match &self.repr {
            Repr::Multiplier(b) => b(xi),
            Repr::Separable(terms) => terms.iter().map(|t| (t.space)(x) * (t.freq)(xi)).sum(),
            Repr::General(f) => f(x, xi),
        }
    }

    /// Terms `a_t(x) b_t(ξ)` when the symbol is separable; a multiplier is
    /// one term with `a ≡ 1`.
    pub fn separable_terms(&self) -> Option<Vec<SeparableTerm>> {
        match &self.repr {
            Repr::Multiplier(b) => Some(vec![SeparableTerm { space: Arc::new(|_| Complex64::new(1.0, 0.0)), freq: b.clone() }]),
            Repr::Separable(t) => Some(t.clone()),
            Repr::General(_) => None,
        }
    }

    /// `c · τ`.
    pub fn scaled(&self, c: f64) -> Self {
        let repr = match &self.repr {
            Repr::Multiplier(b) => {
                let b = b.clone();
                Repr::Multiplier(Arc::new(move |xi| b(xi) * c))
            }
            Repr::Separable(terms) => Repr::Separable(
                terms
                    .iter()
                    .map(|t| {
                        let b = t.freq.clone();
                        SeparableTerm { space: t.space.clone(), freq: Arc::new(move |xi| b(xi) * c) }
                    })
                    .collect(),
            ),
            Repr::General(f) => {
                let f = f.clone();
                Repr::General(Arc::new(move |x, xi| f(x, xi) * c))
            }
        };
        Symbol { repr, name: format!("{}*{c}", self.name), ..self.clone() }
    }
}

/// `τ_σ(x,ξ) = τ(x,ξ) w_{−σ}(ξ)`, declared of order 0 with the same `δ`.
pub fn compose_lifted_symbol(sym: &Symbol) -> Symbol {
    let sigma = sym.order;
    let lift = move |xi: &[f64]| bessel_weight(-sigma, norm_sq(xi));
    let repr = match &sym.repr {
        Repr::Multiplier(b) => {
            let b = b.clone();
            Repr::Multiplier(Arc::new(move |xi| b(xi) * lift(xi)))
        }
        Repr::Separable(terms) => Repr::Separable(
            terms
                .iter()
                .map(|t| {
                    let b = t.freq.clone();
                    SeparableTerm { space: t.space.clone(), freq: Arc::new(move |xi| b(xi) * lift(xi)) }
                })
                .collect(),
        ),
        Repr::General(f) => {
            let f = f.clone();
            Repr::General(Arc::new(move |x, xi| f(x, xi) * lift(xi)))
        }
    };
    Symbol { name: format!("{}_lifted", sym.name), order: 0.0, repr, ..sym.clone() }
}

/// Probe points for [`validate_symbol`]: a tensor grid of `xi_points` per
/// axis on `[−xi_max, xi_max]` and `x_points` per axis on
/// `[−x_half_width, x_half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub xi_max: f64,
    pub xi_points: usize,
    pub x_half_width: f64,
    pub x_points: usize,
}

impl ProbeSpec {
    pub fn new(xi_max: f64, xi_points: usize, x_half_width: f64, x_points: usize) -> Self {
        ProbeSpec { xi_max, xi_points, x_half_width, x_points }
    }

    /// Twice the density on twice the frequency range.
    pub fn refined(&self) -> Self {
        ProbeSpec { xi_max: 2.0 * self.xi_max, xi_points: 4 * self.xi_points - 3, x_points: 2 * self.x_points - 1, ..*self }
    }
}

fn axis(half: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![0.0];
    }
    (0..count).map(|i| -half + 2.0 * half * i as f64 / (count - 1) as f64).collect()
}

fn tensor(points: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|p| points.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    out
}

fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    tensor(&(0..=max_order).map(|v| v as f64).collect::<Vec<_>>(), dim)
        .into_iter()
        .map(|v| v.into_iter().map(|c| c as usize).collect::<Vec<usize>>())
        .filter(|a: &Vec<usize>| a.iter().sum::<usize>() <= max_order)
        .collect()
}

/// Central-difference stencil `(offset, weight)` for the k-th derivative,
/// accurate to second order, before division by `h^k`.
fn stencil(k: usize) -> &'static [(f64, f64)] {
    match k {
        0 => &[(0.0, 1.0)],
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        _ => unreachable!("derivative orders are capped at 3"),
    }
}

/// `D^α_x D^γ_ξ τ(x, ξ)` by nested central differences with steps `hx`,
/// `hxi`. The x-stencils are outermost, so an x-independent symbol gives
/// exact zeros for every `α ≠ 0`.
fn mixed_difference(sym: &Symbol, x: &[f64], xi: &[f64], alpha: &[usize], gamma: &[usize], hx: f64, hxi: f64) -> Complex64 {
    let n = x.len();
    let mut px = x.to_vec();
    let mut pxi = xi.to_vec();
    nested(sym, &mut px, &mut pxi, alpha, gamma, hx, hxi, 0, n)
}

#[allow(clippy::too_many_arguments)]
fn nested(sym: &Symbol, x: &mut [f64], xi: &mut [f64], alpha: &[usize], gamma: &[usize], hx: f64, hxi: f64, stage: usize, n: usize) -> Complex64 {
    if stage == 2 * n {
        return sym.eval(x, xi);
    }
    let (k, h, on_x, axis) = if stage < n { (alpha[stage], hx, true, stage) } else { (gamma[stage - n], hxi, false, stage - n) };
    if k == 0 {
        return nested(sym, x, xi, alpha, gamma, hx, hxi, stage + 1, n);
    }
    let base = if on_x { x[axis] } else { xi[axis] };
    let mut acc = Complex64::new(0.0, 0.0);
    for &(o, c) in stencil(k) {
        if on_x {
            x[axis] = base + o * h;
        } else {
            xi[axis] = base + o * h;
        }
        acc += nested(sym, x, xi, alpha, gamma, hx, hxi, stage + 1, n) * c;
    }
    if on_x {
        x[axis] = base;
    } else {
        xi[axis] = base;
    }
    acc / h.powi(k as i32)
}

/// One estimated constant `ĉ_{αγ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub alpha: Vec<usize>,
    pub gamma: Vec<usize>,
    pub coarse: f64,
    pub refined: f64,
    pub stable: bool,
}

/// Outcome of [`validate_symbol`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub symbol: String,
    pub order: f64,
    pub delta: f64,
    pub probes: ProbeSpec,
    pub constants: Vec<ConstantEstimate>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn constant(&self, alpha: &[usize], gamma: &[usize]) -> Option<&ConstantEstimate> {
        self.constants.iter().find(|c| c.alpha == alpha && c.gamma == gamma)
    }

    /// `Err(Instability)` naming the first unstable constant on failure.
    pub fn into_result(self) -> Result<Self> {
        if let Some(bad) = self.constants.iter().find(|c| !c.stable) {
            return Err(Error::Instability(format!(
                "ĉ for α = {:?}, γ = {:?} grows from {:.4e} to {:.4e} under probe refinement",
                bad.alpha, bad.gamma, bad.coarse, bad.refined
            )));
        }
        Ok(self)
    }
}

/// Relative step for a derivative of total order `k`: `1e-3`, enlarged to
/// `ε^{1/(k+2)}` once round-off would dominate the second-order stencil.
fn step_scale(k: i32) -> f64 {
    f64::max(1e-3, f64::EPSILON.powf(1.0 / (k + 2) as f64))
}

fn estimate_constants(sym: &Symbol, probes: &ProbeSpec, pairs: &[(Vec<usize>, Vec<usize>)]) -> Vec<f64> {
    let n = sym.dim;
    let xis = tensor(&axis(probes.xi_max, probes.xi_points), n);
    let xs = tensor(&axis(probes.x_half_width, probes.x_points), n);
    let mut best = vec![0.0f64; pairs.len()];
    for xi in &xis {
        let size = 1.0 + norm_sq(xi).sqrt();
        for x in &xs {
            for (slot, (alpha, gamma)) in best.iter_mut().zip(pairs) {
                let (a, g) = (alpha.iter().sum::<usize>() as f64, gamma.iter().sum::<usize>() as f64);
                let base = step_scale((a + g) as i32);
                let hxi = base * size;
                let hx = base / size.powf(sym.delta);
                let d = if a + g == 0.0 {
                    sym.eval(x, xi)
                } else {
                    let coarse = mixed_difference(sym, x, xi, alpha, gamma, hx, hxi);
                    let fine = mixed_difference(sym, x, xi, alpha, gamma, hx / 2.0, hxi / 2.0);
                    (fine * 4.0 - coarse) / 3.0
                };
                let v = d.norm() / size.powf(sym.order - g + sym.delta * a);
                *slot = if v.is_finite() { slot.max(v) } else { f64::INFINITY };
            }
        }
    }
    best
}

/// Estimates every `ĉ_{αγ}` with `|α|, |γ| ≤ max_order` on `probes` and on
/// [`ProbeSpec::refined`]. A constant is stable when it is finite and grows
/// by at most 10% (plus `1e-9` of `ĉ_00` for round-off on vanishing
/// derivatives).
pub fn validate_symbol(sym: &Symbol, probes: &ProbeSpec, max_order: usize) -> Result<ValidationReport> {
    if max_order > 3 {
        return Err(Error::InvalidParameter(format!("derivative order {max_order} exceeds 3")));
    }
    let idx = multi_indices(sym.dim, max_order);
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = idx.iter().flat_map(|a| idx.iter().map(move |g| (a.clone(), g.clone()))).collect();
    let coarse = estimate_constants(sym, probes, &pairs);
    let fine = estimate_constants(sym, &probes.refined(), &pairs);
    let floor = 1e-9 * coarse[0].max(fine[0]);
    let constants: Vec<ConstantEstimate> = pairs
        .into_iter()
        .zip(coarse.iter().zip(&fine))
        .map(|((alpha, gamma), (&c, &f))| ConstantEstimate {
            alpha,
            gamma,
            coarse: c,
            refined: f,
            stable: c.is_finite() && f.is_finite() && f <= (1.0 + REFINEMENT_GROWTH) * c + floor,
        })
        .collect();
    let pass = constants.iter().all(|c| c.stable);
    Ok(ValidationReport { symbol: sym.name.clone(), order: sym.order, delta: sym.delta, probes: *probes, constants, pass })
}

/// `T_τ f` on the grid of `f`, with the smooth cutoff `φ_0(|ξ|/Ξ)`.
///
/// Multipliers take one FFT pass, separable symbols one pass per term; a
/// general symbol costs `O(N_x · N_ξ)` evaluations.
pub fn apply_psido(sym: &Symbol, f: &GridFunction, cutoff: f64) -> Result<GridFunction> {
    let grid = f.grid();
    if sym.dim != grid.dim() {
        return Err(Error::ShapeMismatch { expected: grid.dim(), got: sym.dim });
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency cutoff {cutoff} must be positive")));
    }
    let tail = f.spectral_tail(cutoff);
    if tail > CUTOFF_TOLERANCE {
        return Err(Error::CutoffTooSmall { fraction: tail, cutoff });
    }
    let mut spec = f.spectrum();
    let freqs: Vec<Vec<f64>> = (0..grid.len()).map(|k| grid.frequency(k)).collect();
    let taper: Vec<f64> = freqs.iter().map(|xi| phi0(norm_sq(xi).sqrt() / cutoff)).collect();
    let one = Complex64::new(1.0, 0.0);
    if let Repr::Multiplier(b) = &sym.repr {
        // A multiplier that is 1 on every grid frequency is the identity.
        if freqs.iter().zip(&taper).all(|(xi, &t)| t == 1.0 && b(xi) == one) {
            return Ok(f.clone());
        }
    }
    for (v, t) in spec.iter_mut().zip(&taper) {
        *v *= *t;
    }
    if let Some(terms) = sym.separable_terms() {
        let mut out = GridFunction::zeros(grid);
        let x_independent = sym.is_x_independent();
        for t in terms {
            let block: Vec<Complex64> = spec.iter().zip(&freqs).map(|(v, xi)| v * (t.freq)(xi)).collect();
            let g = GridFunction::from_spectrum(grid, block);
            let g = if x_independent {
                g
            } else {
                let samples = g.samples().iter().enumerate().map(|(i, v)| v * (t.space)(&grid.point(i))).collect();
                GridFunction::new(grid, samples)?
            };
            out = out.add(&g);
        }
        return Ok(out);
    }
    // General symbol: direct sum over ξ in ascending index order.
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let roots: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let total = grid.len();
    let digits = |flat: usize| -> Vec<usize> { (0..dim).map(|a| flat / n.pow((dim - 1 - a) as u32) % n).collect() };
    let kdigits: Vec<Vec<usize>> = (0..total).map(digits).collect();
    let samples = (0..total)
        .map(|i| {
            let x = grid.point(i);
            let idig = digits(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, v) in spec.iter().enumerate() {
                if *v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let phase = idig.iter().zip(&kdigits[k]).map(|(a, b)| a * b).sum::<usize>() % n;
                acc += sym.eval(&x, &freqs[k]) * v * roots[phase];
            }
            acc / total as f64
        })
        .collect();
    GridFunction::new(grid, samples)
}

/// Result of [`boundedness_probe`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `‖T_τ f‖ / ‖f‖` per corpus entry; `None` for the zero function.
    pub ratios: Vec<Option<f64>>,
    pub refined_ratios: Vec<Option<f64>>,
    pub max_ratio: Option<f64>,
    pub refined_max_ratio: Option<f64>,
    pub skipped: usize,
    pub pass: bool,
}

fn ratios(sym: &Symbol, params: BesovParams, corpus: &[GridFunction], cutoff: f64) -> Result<Vec<Option<f64>>> {
    corpus
        .iter()
        .map(|f| {
            let res = DyadicResolution::covering(f.grid());
            let base = besov_norm(f, params, &res)?;
            if base == 0.0 {
                return Ok(None);
            }
            let tf = apply_psido(sym, f, cutoff)?;
            Ok(Some(besov_norm(&tf, params, &res)? / base))
        })
        .collect()
}

/// Largest Besov-norm ratio over `corpus`, and again with every function
/// resampled on a grid twice as fine. PASS when the maximum is finite and
/// grows by at most 10%.
pub fn boundedness_probe(sym: &Symbol, params: BesovParams, corpus: &[GridFunction]) -> Result<BoundednessReport> {
    if !(params.s > 0.0 && params.p >= 1.0) {
        return Err(Error::InvalidParameter(format!("probe needs s > 0 and p ≥ 1, got s = {}, p = {}", params.s, params.p)));
    }
    let params = BesovParams { q: params.p, ..params };
    let cutoff = corpus.first().map(|f| f.grid().max_frequency()).unwrap_or(1.0);
    let coarse = ratios(sym, params, corpus, cutoff)?;
    let refined_corpus: Vec<GridFunction> = corpus.iter().map(|f| f.refined()).collect();
    let fine = ratios(sym, params, &refined_corpus, cutoff)?;
    let max = |v: &[Option<f64>]| v.iter().flatten().cloned().fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))));
    let (max_ratio, refined_max_ratio) = (max(&coarse), max(&fine));
    let pass = match (max_ratio, refined_max_ratio) {
        (Some(a), Some(b)) => a.is_finite() && b.is_finite() && b <= (1.0 + REFINEMENT_GROWTH) * a,
        _ => true,
    };
    Ok(BoundednessReport {
        skipped: coarse.iter().filter(|r| r.is_none()).count(),
        ratios: coarse,
        refined_ratios: fine,
        max_ratio,
        refined_max_ratio,
        pass,
    })
}
