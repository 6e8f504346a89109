//! Radial kernel `G_a` of the Bessel potential `(id − Δ)^{-a/2}`.
//!
//! With `F g(ξ) = (2π)^{-n/2} ∫ e^{-ix·ξ} g(x) dx`, the inverse transform of
//! `(1+|ξ|²)^{-a/2}` is the radial function
//!
//! ```text
//! G_a(ρ) = 2^{1-a/2} / Γ(a/2) · ρ^{(a-n)/2} K_{(n-a)/2}(ρ)
//! ```
//!
//! and `(id − Δ)^{-a/2} g = (2π)^{-n/2} G_a * g`.
//!
//! `K_ν` comes from `∫_0^∞ e^{-x cosh t} cosh(νt) dt`; the trapezoid rule on
//! that integrand converges exponentially in the step. Values are tabulated
//! on a logarithmic radius grid and read back by cubic Hermite interpolation
//! of `log G` against `log ρ`, using the exact derivative
//! `d/dρ [ρ^{-ν} K_ν(ρ)] = −ρ^{-ν} K_{ν+1}(ρ)`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Smallest tabulated radius.
pub const RHO_MIN: f64 = 1e-12;
const RHO_MAX: f64 = 60.0;
const NODES_PER_UNIT: f64 = 200.0;

/// `K_ν(x)` for real `ν` and `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let nu = nu.abs();
    let h = 0.1;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    if f(0.0) == 0.0 {
        return 0.0;
    }
    // The integrand is unimodal with its peak where x sinh t = ν tanh νt.
    let mut sum = 0.5 * f(0.0);
    let mut prev = f(0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let v = f(t);
        sum += v;
        if v < prev && v <= 1e-18 * sum {
            break;
        }
        prev = v;
        k += 1;
    }
    sum * h
}

/// Behaviour of `G_a` at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalModel {
    /// `G(ρ) ≈ coef · ρ^{-beta}` with `beta = n − a > 0`.
    Power { coef: f64, beta: f64 },
    /// `G(ρ) ≈ −coef · ln ρ` (the case a = n).
    Log { coef: f64 },
    /// Bounded at the origin (a > n).
    Regular { value_at_zero: f64 },
}

/// Tabulated `G_a` in dimension `n`.
#[derive(Debug, Clone)]
pub struct BesselKernel {
    order: f64,
    dim: usize,
    scale: f64,
    log_rho0: f64,
    step: f64,
    log_g: Vec<f64>,
    slope: Vec<f64>,
}

impl BesselKernel {
    pub fn new(order: f64, dim: usize) -> Result<Self> {
        if !(order > 0.0 && order.is_finite()) || dim == 0 {
            return Err(Error::InvalidParameter(format!("Bessel kernel needs a > 0 and n ≥ 1, got a = {order}, n = {dim}")));
        }
        let scale = 2f64.powf(1.0 - order / 2.0) / gamma(order / 2.0);
        let log_rho0 = RHO_MIN.ln();
        let span = RHO_MAX.ln() - log_rho0;
        let count = (span * NODES_PER_UNIT).ceil() as usize + 1;
        let step = span / (count - 1) as f64;
        let mut kernel = BesselKernel { order, dim, scale, log_rho0, step, log_g: Vec::with_capacity(count), slope: Vec::with_capacity(count) };
        for i in 0..count {
            let rho = (log_rho0 + i as f64 * step).exp();
            let g = kernel.direct(rho);
            let dg = kernel.direct_derivative(rho);
            kernel.log_g.push(g.ln());
            kernel.slope.push(rho * dg / g);
        }
        Ok(kernel)
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `2^{1-a/2} / Γ(a/2)`, the constant in front of `ρ^{-ν} K_ν(ρ)`.
    pub fn convention_constant(&self) -> f64 {
        self.scale
    }

    fn nu(&self) -> f64 {
        (self.dim as f64 - self.order) / 2.0
    }

    fn direct(&self, rho: f64) -> f64 {
        let nu = self.nu();
        self.scale * rho.powf(-nu) * bessel_k(nu, rho)
    }

    fn direct_derivative(&self, rho: f64) -> f64 {
        let nu = self.nu();
        -self.scale * rho.powf(-nu) * bessel_k(nu + 1.0, rho)
    }

    /// `G_a(ρ)`. Radii below [`RHO_MIN`] are an error when the kernel is
    /// singular (a ≤ n).
    pub fn eval(&self, rho: f64) -> Result<f64> {
        if rho < RHO_MIN || rho.is_nan() {
            if self.order > self.dim as f64 && rho >= 0.0 {
                return Ok(if rho == 0.0 { self.value_at_zero() } else { self.direct(rho) });
            }
            return Err(Error::Singularity { radius: rho, floor: RHO_MIN });
        }
        Ok(self.eval_unchecked(rho))
    }

    /// Table lookup for `ρ ≥ RHO_MIN`; callers guarantee the range.
    #[inline]
    pub fn eval_unchecked(&self, rho: f64) -> f64 {
        let u = (rho.ln() - self.log_rho0) / self.step;
        let i = u.floor() as usize;
        if i + 1 >= self.log_g.len() {
            return self.direct(rho);
        }
        let t = u - i as f64;
        let (y0, y1) = (self.log_g[i], self.log_g[i + 1]);
        let (m0, m1) = (self.slope[i] * self.step, self.slope[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * m1;
        v.exp()
    }

    fn value_at_zero(&self) -> f64 {
        let n = self.dim as f64;
        2f64.powf(-n / 2.0) * gamma((self.order - n) / 2.0) / gamma(self.order / 2.0)
    }

    /// Leading behaviour at the origin, from the small-argument expansion of `K_ν`.
    pub fn local_model(&self) -> LocalModel {
        let n = self.dim as f64;
        let a = self.order;
        if a < n {
            let nu = (n - a) / 2.0;
            LocalModel::Power { coef: self.scale * gamma(nu) * 2f64.powf(nu - 1.0), beta: n - a }
        } else if a == n {
            LocalModel::Log { coef: self.scale }
        } else {
            LocalModel::Regular { value_at_zero: self.value_at_zero() }
        }
    }
}
