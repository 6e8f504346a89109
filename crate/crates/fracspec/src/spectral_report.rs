//! Eigensolves, eigenvalue ordering, decay-exponent fits and the comparison
//! with the predicted rates.
//!
//! Eigenvalues are ordered by nonincreasing modulus, ties broken by real part
//! and then imaginary part, both descending. All three keys are compared on
//! a grid of `1e-12 |λ_1|`, and values below `1e-12 |λ_1|` count as zero.
//!
//! ```
//! use fracspec::spectral_report::{fit_decay_exponent, theoretical_exponent, FitPolicy};
//!
//! let lambda: Vec<f64> = (1..=500).map(|k| (k as f64).powf(-0.8415)).collect();
//! let fit = fit_decay_exponent(&lambda, &FitPolicy::default()).unwrap();
//! assert!((fit.slope + 0.8415).abs() < 1e-6);
//! let d = 2f64.ln() / 3f64.ln();
//! assert!((theoretical_exponent(1, d, 0.45, 2.0).unwrap() + 0.84150).abs() < 1e-5);
//! ```

use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractal_measure::FractalMeasure;
use crate::fractal_operator::{trace_gram, Assembly, DiscretizedOperator, FrequencyGrid, OperatorMatrix};
use crate::s_numbers::{SNumberContext, SNumberKind, SNumberSequence};

/// Relative threshold below which eigenvalues count as zero.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Number of leading eigenpairs whose residual is checked on the symmetric path.
pub const RESIDUAL_PAIRS: usize = 50;
/// Residual bound `‖Kv − λv‖ ≤ RESIDUAL_TOL ‖K‖` on the symmetric path.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Fewest nonzero eigenvalues a fit accepts.
pub const MIN_NONZERO: usize = 30;

/// Solver used by [`eigen_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    Symmetric,
    General,
}

/// Ordered eigenvalues of a square operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
    path: SolvePath,
    max_residual: Option<f64>,
}

impl Spectrum {
    /// Orders arbitrary eigenvalues.
    pub fn from_values(eigenvalues: Vec<Complex64>, path: SolvePath) -> Self {
        let top = eigenvalues.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        // Keys on a grid of 1e-12 |λ_1|, so round-off cannot decide ties.
        let q = |v: f64| if top > 0.0 { (v / top / ZERO_THRESHOLD).round() as i64 } else { 0 };
        let mut keyed: Vec<([i64; 3], Complex64)> = eigenvalues.into_iter().map(|z| ([q(z.norm()), q(z.re), q(z.im)], z)).collect();
        keyed.sort_by(|a, b| b.0.cmp(&a.0));
        Spectrum { eigenvalues: keyed.into_iter().map(|(_, z)| z).collect(), path, max_residual: None }
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn path(&self) -> SolvePath {
        self.path
    }

    /// Largest relative residual of the leading pairs, symmetric path only.
    pub fn max_residual(&self) -> Option<f64> {
        self.max_residual
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    /// Number of eigenvalues above the zero threshold.
    pub fn nonzero_count(&self) -> usize {
        let top = self.eigenvalues.first().map_or(0.0, |z| z.norm());
        self.eigenvalues.iter().take_while(|z| top > 0.0 && z.norm() > ZERO_THRESHOLD * top).count()
    }

    /// Writes `k,re,im,modulus` rows after `#`-prefixed preamble lines.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "k,re,im,modulus")?;
        for (k, z) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{:e},{:e},{:e}", k + 1, z.re, z.im, z.norm())?;
        }
        Ok(())
    }
}

fn solver_error(op: &DiscretizedOperator, detail: String) -> Error {
    Error::Convergence { context: format!("eigensolve of {} operator", op.assembly().kind), detail }
}

/// Full spectrum of a square operator. Hermitian operators go through the
/// self-adjoint solver and return real eigenvalues, with the residual of the
/// leading pairs checked against `1e-8 ‖K‖`.
pub fn eigen_spectrum(op: &DiscretizedOperator) -> Result<Spectrum> {
    let n = op.matrix().nrows();
    if n != op.matrix().ncols() {
        return Err(Error::ShapeMismatch { expected: n, got: op.matrix().ncols() });
    }
    if n == 0 {
        return Ok(Spectrum { eigenvalues: Vec::new(), path: SolvePath::General, max_residual: None });
    }
    if !op.is_symmetric() {
        let values = op.matrix().to_complex().eigenvalues().map_err(|e| solver_error(op, format!("{e:?}")))?;
        return Ok(Spectrum::from_values(values, SolvePath::General));
    }
    let (values, residuals) = match op.matrix() {
        OperatorMatrix::Real(m) => symmetric_pairs(m, |v| v.abs()).map_err(|e| solver_error(op, e))?,
        OperatorMatrix::Complex(m) => symmetric_pairs(m, |v| v.norm()).map_err(|e| solver_error(op, e))?,
    };
    let norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let worst = residuals.iter().fold(0.0f64, |a, &r| a.max(r));
    let relative = if norm > 0.0 { worst / norm } else { 0.0 };
    if relative > RESIDUAL_TOL {
        return Err(solver_error(op, format!("leading residual {relative:.2e} exceeds {RESIDUAL_TOL:e} ‖K‖")));
    }
    let mut spec = Spectrum::from_values(values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), SolvePath::Symmetric);
    spec.max_residual = Some(relative);
    Ok(spec)
}

/// Eigenvalues of a Hermitian matrix, and `‖Kv − λv‖` for the pairs of
/// largest modulus.
fn symmetric_pairs<T>(m: &Mat<T>, abs: impl Fn(T) -> f64) -> std::result::Result<(Vec<f64>, Vec<f64>), String>
where
    T: faer::traits::ComplexField<Real = f64> + Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let n = m.nrows();
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| faer::traits::math_utils::real(&s[i])).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let mut residuals = Vec::new();
    for &i in idx.iter().take(RESIDUAL_PAIRS) {
        let v = u.col(i);
        let kv = m * v;
        let r = (0..n).map(|j| abs(kv[j] - v[j] * values[i]).powi(2)).sum::<f64>().sqrt();
        residuals.push(r);
    }
    Ok((values, residuals))
}

/// `−1 + (n − sp)/d`, the eigenvalue exponent, for `n − d < sp ≤ n`.
pub fn theoretical_exponent(n: usize, d: f64, s: f64, p: f64) -> Result<f64> {
    check_window(n, d, s, p)?;
    Ok(-1.0 + (n as f64 - s * p) / d)
}

/// `−1/p + (n/p − s)/d`, the exponent of `a_k(tr_μ)`, for `n − d < sp ≤ n`.
pub fn trace_exponent(n: usize, d: f64, s: f64, p: f64) -> Result<f64> {
    check_window(n, d, s, p)?;
    Ok(-1.0 / p + (n as f64 / p - s) / d)
}

fn check_window(n: usize, d: f64, s: f64, p: f64) -> Result<()> {
    let nf = n as f64;
    if !(d > 0.0 && d < nf && p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 < d < n and finite p ≥ 1, got d = {d}, n = {n}, p = {p}")));
    }
    let sp = s * p;
    if !(nf - d < sp && sp <= nf) {
        return Err(Error::WindowViolation(format!("sp = {sp} must satisfy n − d = {} < sp ≤ n = {nf}", nf - d)));
    }
    Ok(())
}

/// Index range `[lo, hi]` of a fit; unset ends take the defaults `lo = 10`
/// and `hi = min(0.2 · count, 400)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPolicy {
    pub lo: Option<usize>,
    pub hi: Option<usize>,
}

impl WindowPolicy {
    pub fn fixed(lo: usize, hi: usize) -> Self {
        WindowPolicy { lo: Some(lo), hi: Some(hi) }
    }

    /// Concrete window for `count` eigenvalues of which `nonzero` are nonzero.
    pub fn resolve(&self, count: usize, nonzero: usize) -> Result<[usize; 2]> {
        let lo = self.lo.unwrap_or(10).max(1);
        let hi = self.hi.unwrap_or(((0.2 * count as f64).floor() as usize).min(400)).min(nonzero);
        if hi < lo + 1 {
            return Err(Error::InsufficientSpectrum { needed: lo + 1, found: hi });
        }
        Ok([lo, hi])
    }
}

/// Regression used on `(log k, log |λ_k|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitMethod {
    LeastSquares,
    /// Quantile regression; the line lies above a `quantile` share of points.
    UpperEnvelope { quantile: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPolicy {
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default = "least_squares")]
    pub method: FitMethod,
}

fn least_squares() -> FitMethod {
    FitMethod::LeastSquares
}

impl Default for FitPolicy {
    fn default() -> Self {
        FitPolicy { window: WindowPolicy::default(), method: FitMethod::LeastSquares }
    }
}

/// Fitted line `log |λ_k| ≈ intercept + slope · log k` over `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub window: [usize; 2],
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation from the line.
    pub residual: f64,
    pub method: FitMethod,
}

/// Fits the decay of `moduli`, which must be nonincreasing up to the tie
/// grid of [`Spectrum`] ordering.
pub fn fit_decay_exponent(moduli: &[f64], policy: &FitPolicy) -> Result<DecayFit> {
    let top = moduli.iter().fold(0.0f64, |a, &m| a.max(m));
    let slack = ZERO_THRESHOLD * top;
    if moduli.windows(2).any(|w| w[1] > w[0] + slack) || moduli.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidParameter("moduli must be finite, nonnegative and nonincreasing".into()));
    }
    let nonzero = moduli.iter().take_while(|&&m| top > 0.0 && m > ZERO_THRESHOLD * top).count();
    if nonzero < MIN_NONZERO {
        return Err(Error::InsufficientSpectrum { needed: MIN_NONZERO, found: nonzero });
    }
    let window = policy.window.resolve(moduli.len(), nonzero)?;
    let xs: Vec<f64> = (window[0]..=window[1]).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = (window[0]..=window[1]).map(|k| moduli[k - 1].ln()).collect();
    let (slope, intercept) = match policy.method {
        FitMethod::LeastSquares => ols(&xs, &ys),
        FitMethod::UpperEnvelope { quantile } => {
            if !(quantile > 0.0 && quantile < 1.0) {
                return Err(Error::InvalidParameter(format!("quantile {quantile} must lie in (0, 1)")));
            }
            quantile_line(&xs, &ys, quantile)
        }
    };
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    Ok(DecayFit { window, slope, intercept, residual, method: policy.method })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Minimizes the pinball loss. For a fixed slope the best intercept is the
/// `tau`-quantile of the residuals, and the profiled loss is convex in the
/// slope, so a golden-section search finds the minimum.
fn quantile_line(xs: &[f64], ys: &[f64], tau: f64) -> (f64, f64) {
    let intercept = |b: f64| {
        let mut r: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - b * x).collect();
        r.sort_by(f64::total_cmp);
        let idx = ((tau * r.len() as f64).ceil() as usize).clamp(1, r.len()) - 1;
        r[idx]
    };
    let loss = |b: f64| {
        let a = intercept(b);
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let u = y - a - b * x;
                if u >= 0.0 {
                    tau * u
                } else {
                    (tau - 1.0) * u
                }
            })
            .sum::<f64>()
    };
    let (ols_slope, _) = ols(xs, ys);
    let (mut lo, mut hi) = (ols_slope - 10.0, ols_slope + 10.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (loss(c), loss(d));
    while hi - lo > 1e-10 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = loss(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = loss(d);
        }
    }
    let b = 0.5 * (lo + hi);
    (b, intercept(b))
}

/// How a fitted slope is compared with the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|slope − predicted| ≤ tolerance`.
    TwoSided,
    /// `slope ≤ predicted + tolerance`.
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub deviation: f64,
}

impl Verdict {
    pub fn judge(slope: f64, predicted: f64, tolerance: f64, comparison: Comparison) -> Self {
        let deviation = slope - predicted;
        let pass = match comparison {
            Comparison::TwoSided => deviation.abs() <= tolerance,
            Comparison::UpperBound => deviation <= tolerance,
        };
        Verdict { pass, comparison, tolerance, deviation }
    }
}

/// Spectrum, fit and verdict of one operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(skip)]
    pub spectrum: Spectrum,
    pub count: usize,
    pub nonzero: usize,
    pub solver: SolvePath,
    pub max_residual: Option<f64>,
    pub fit: DecayFit,
    pub theoretical_exponent: f64,
    pub verdict: Verdict,
    pub provenance: Assembly,
}

impl SpectrumReport {
    pub fn new(spectrum: Spectrum, fit: DecayFit, theoretical_exponent: f64, tolerance: f64, comparison: Comparison, provenance: Assembly) -> Self {
        SpectrumReport {
            count: spectrum.len(),
            nonzero: spectrum.nonzero_count(),
            solver: spectrum.path(),
            max_residual: spectrum.max_residual(),
            verdict: Verdict::judge(fit.slope, theoretical_exponent, tolerance, comparison),
            spectrum,
            fit,
            theoretical_exponent,
            provenance,
        }
    }
}

/// Eigensolve, fit and compare in one step.
pub fn analyze(op: &DiscretizedOperator, policy: &FitPolicy, predicted: f64, tolerance: f64, comparison: Comparison) -> Result<SpectrumReport> {
    let spectrum = eigen_spectrum(op)?;
    let fit = fit_decay_exponent(&spectrum.moduli(), policy)?;
    Ok(SpectrumReport::new(spectrum, fit, predicted, tolerance, comparison, op.assembly().clone()))
}

/// Approximation numbers of `tr_μ` against their predicted exponent.
#[derive(Debug, Clone, Serialize)]
pub struct TraceReport {
    pub approximation: SNumberSequence,
    pub fit: DecayFit,
    pub theoretical_exponent: f64,
    pub verdict: Verdict,
    pub provenance: Assembly,
}

/// `a_k(tr_μ : H^s → L_2(μ))` from the eigenvalues of `tr_μ tr_μ*`, which
/// are `a_k²`, fitted and compared with `−1/p + (n/p − s)/d`.
pub fn snumber_exponent_check(measure: &FractalMeasure, s: f64, p: f64, policy: &FitPolicy, tolerance: f64) -> Result<TraceReport> {
    if p != 2.0 {
        return Err(Error::Unsupported(format!("exact approximation numbers need p = 2, got {p}")));
    }
    let predicted = trace_exponent(measure.ambient_dim(), measure.dimension(), s, p)?;
    let gram = trace_gram(measure, s, &FrequencyGrid::auto(measure))?;
    let spectrum = eigen_spectrum(&gram)?;
    // Round-off leaves tiny negative eigenvalues of the Gram matrix.
    let mut a: Vec<f64> = spectrum.eigenvalues().iter().map(|z| z.re.max(0.0).sqrt()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    let fit = fit_decay_exponent(&a, policy)?;
    let context = SNumberContext { source: "trace gram".into(), p_domain: 2.0, p_codomain: 2.0 };
    Ok(TraceReport {
        approximation: SNumberSequence::new(SNumberKind::Approximation, a, context)?,
        verdict: Verdict::judge(fit.slope, predicted, tolerance, Comparison::TwoSided),
        fit,
        theoretical_exponent: predicted,
        provenance: gram.assembly().clone(),
    })
}

/// `max_{k ≤ k_max} |a_k² − λ_k| / λ_k`.
pub fn transference_defect(a: &[f64], lambda: &[f64], k_max: usize) -> Result<f64> {
    if a.len() < k_max || lambda.len() < k_max {
        return Err(Error::InsufficientSpectrum { needed: k_max, found: a.len().min(lambda.len()) });
    }
    Ok((0..k_max).map(|k| (a[k] * a[k] - lambda[k]).abs() / lambda[k].abs()).fold(0.0, f64::max))
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

    fn real_op(n: usize, f: impl Fn(usize, usize) -> f64) -> DiscretizedOperator {
        DiscretizedOperator::from_matrix(OperatorMatrix::Real(Mat::from_fn(n, n, f)))
    }

    fn power_law(count: usize, exponent: f64) -> Vec<f64> {
        (1..=count).map(|k| (k as f64).powf(exponent)).collect()
    }

    #[test]
    fn diagonal_spectrum() {
        let s = eigen_spectrum(&real_op(2, |i, j| if i == j { 1.0 / (1 + i) as f64 } else { 0.0 })).unwrap();
        assert_eq!(s.path(), SolvePath::Symmetric);
        assert!((s.eigenvalues()[0] - 1.0).norm() < 1e-15 && (s.eigenvalues()[1] - 0.5).norm() < 1e-15);
    }

    #[test]
    fn two_atom_kernel_closed_form() {
        let op = assemble_dmu_kernel(&cantor(1), 0.45).unwrap();
        let (a, b) = (op.matrix().get(0, 0).re, op.matrix().get(0, 1).re);
        let s = eigen_spectrum(&op).unwrap();
        assert!((s.eigenvalues()[0].re - (a + b)).abs() < 1e-14 * (a + b));
        assert!((s.eigenvalues()[1].re - (a - b)).abs() < 1e-14 * (a + b));
    }

    #[test]
    fn zero_matrix() {
        let s = eigen_spectrum(&real_op(4, |_, _| 0.0)).unwrap();
        assert!(s.eigenvalues().iter().all(|z| z.norm() == 0.0));
        assert_eq!(s.nonzero_count(), 0);
        assert!(matches!(fit_decay_exponent(&s.moduli(), &FitPolicy::default()), Err(Error::InsufficientSpectrum { .. })));
    }

    #[test]
    fn ties_break_on_real_then_imaginary_part() {
        let rot = real_op(2, |i, j| [[0.0, -1.0], [1.0, 0.0]][i][j]);
        let s = eigen_spectrum(&rot).unwrap();
        assert_eq!(s.path(), SolvePath::General);
        assert!(s.eigenvalues()[0].im > 0.0 && s.eigenvalues()[1].im < 0.0);
        let flip = eigen_spectrum(&real_op(2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 })).unwrap();
        assert!(flip.eigenvalues()[0].re > 0.0);
    }

    #[test]
    fn symmetric_spectra_are_real_and_resolved() {
        let op = assemble_dmu_kernel(&cantor(6), 0.45).unwrap();
        let s = eigen_spectrum(&op).unwrap();
        assert!(s.eigenvalues().iter().all(|z| z.im == 0.0));
        assert!(s.max_residual().unwrap() <= RESIDUAL_TOL);
        let general = Spectrum::from_values(op.matrix().to_complex().eigenvalues().unwrap(), SolvePath::General);
        for (a, b) in s.eigenvalues().iter().zip(general.eigenvalues()).take(20) {
            assert!((a - b).norm() < 1e-10 * s.eigenvalues()[0].norm());
        }
    }

    #[test]
    fn exponents() {
        let d = 2f64.ln() / 3f64.ln();
        assert!((theoretical_exponent(1, d, 0.45, 2.0).unwrap() + 0.84150).abs() < 5e-6);
        assert_eq!(theoretical_exponent(1, d, 0.5, 2.0).unwrap(), -1.0);
        assert!((theoretical_exponent(1, d, 0.8 / 1.5, 1.5).unwrap() + 0.68301).abs() < 5e-6);
        assert!((trace_exponent(1, d, 0.45, 2.0).unwrap() + 0.42075).abs() < 5e-6);
        assert!((trace_exponent(1, d, 0.5, 2.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(theoretical_exponent(1, d, 0.6, 2.0), Err(Error::WindowViolation(_))));
        assert!(matches!(theoretical_exponent(1, d, 0.1, 2.0), Err(Error::WindowViolation(_))));
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_decay_exponent(&power_law(1000, -0.8415), &FitPolicy::default()).unwrap();
        assert_eq!(fit.window, [10, 200]);
        assert!((fit.slope + 0.8415).abs() < 1e-6);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn perturbed_power_law() {
        let mut lam: Vec<f64> = (1..=1000).map(|k| 3.0 * (k as f64).powf(-0.8415) * (1.0 + 0.05 * if k % 2 == 0 { 1.0 } else { -1.0 })).collect();
        lam.sort_by(|a, b| b.total_cmp(a));
        let fit = fit_decay_exponent(&lam, &FitPolicy::default()).unwrap();
        assert!((fit.slope + 0.8415).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn signs_do_not_matter() {
        let law = power_law(400, -0.7);
        let alternating: Vec<Complex64> = law.iter().enumerate().map(|(k, v)| Complex64::new(if k % 2 == 0 { *v } else { -*v }, 0.0)).collect();
        let spec = Spectrum::from_values(alternating, SolvePath::General);
        let a = fit_decay_exponent(&spec.moduli(), &FitPolicy::default()).unwrap();
        let b = fit_decay_exponent(&law, &FitPolicy::default()).unwrap();
        assert_eq!(a.slope, b.slope);
    }

    #[test]
    fn scaling_keeps_order_and_slope() {
        let op = assemble_dmu_kernel(&cantor(7), 0.45).unwrap();
        let a = eigen_spectrum(&op).unwrap();
        let b = eigen_spectrum(&op.scaled(7.5)).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x * 7.5 - y).norm() <= 1e-10 * b.eigenvalues()[0].norm());
        }
        let policy = FitPolicy { window: WindowPolicy::fixed(10, 60), ..Default::default() };
        let fa = fit_decay_exponent(&a.moduli(), &policy).unwrap();
        let fb = fit_decay_exponent(&b.moduli(), &policy).unwrap();
        assert!((fa.slope - fb.slope).abs() < 1e-9);
        assert!((fb.intercept - fa.intercept - 7.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn upper_envelope_ignores_dips() {
        let law = power_law(1000, -0.7);
        let dipped: Vec<f64> = law.iter().enumerate().map(|(k, v)| if k % 5 == 0 { v * 0.5 } else { *v }).collect();
        let mut sorted = dipped.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let policy = FitPolicy { window: WindowPolicy::default(), method: FitMethod::UpperEnvelope { quantile: 0.95 } };
        let env = fit_decay_exponent(&power_law(1000, -0.7), &policy).unwrap();
        assert!((env.slope + 0.7).abs() < 1e-6, "{env:?}");
        let fit = fit_decay_exponent(&sorted, &policy).unwrap();
        assert!(fit.slope <= -0.7 + 0.05, "{fit:?}");
        let xs: Vec<f64> = (fit.window[0]..=fit.window[1]).map(|k| (k as f64).ln()).collect();
        let above = xs.iter().zip(fit.window[0]..).filter(|(x, k)| sorted[k - 1].ln() <= fit.intercept + fit.slope * **x + 1e-12).count();
        assert!(above as f64 >= 0.95 * xs.len() as f64);
    }

    #[test]
    fn verdicts() {
        assert!(Verdict::judge(-0.80, -0.84, 0.08, Comparison::TwoSided).pass);
        assert!(!Verdict::judge(-0.70, -0.84, 0.08, Comparison::TwoSided).pass);
        assert!(Verdict::judge(-2.0, -0.68, 0.08, Comparison::UpperBound).pass);
        assert!(!Verdict::judge(-0.5, -0.68, 0.08, Comparison::UpperBound).pass);
    }

    #[test]
    fn trace_rate_and_transference() {
        let mu = cantor(8);
        let policy = FitPolicy { window: WindowPolicy::fixed(10, 50), ..Default::default() };
        let rep = snumber_exponent_check(&mu, 0.45, 2.0, &policy, 0.1).unwrap();
        assert!(rep.verdict.pass, "{:?}", rep.fit);
        let lam = eigen_spectrum(&assemble_dmu_kernel(&mu, 0.45).unwrap()).unwrap();
        let defect = transference_defect(rep.approximation.values(), &lam.moduli(), 20).unwrap();
        assert!(defect < 0.03, "{defect}");
        assert!(matches!(snumber_exponent_check(&mu, 0.45, 1.5, &policy, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn csv_layout() {
        let spec = Spectrum::from_values(vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, -0.0)], SolvePath::Symmetric);
        let mut out = Vec::new();
        spec.write_csv(&mut out, &["hash abc".to_string()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "# hash abc\nk,re,im,modulus\n1,1e0,-0e0,1e0\n2,5e-1,0e0,5e-1\n");
    }
}
