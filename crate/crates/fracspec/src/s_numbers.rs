//! Approximation and entropy numbers of finite-dimensional operators, and
//! audits of the inequalities that relate them.
//!
//! Approximation numbers in `ℓ_2` are singular values. Entropy numbers
//! `e_k(T) = inf{ε : T(U_A) is covered by 2^{k−1} ε-balls of B}` are
//! bracketed by brute force: the domain ball is cut into cells of pitch `g`,
//! cell centers are mapped, and
//!
//! * an upper bound comes from covering the mapped centers (farthest-point
//!   seeding, then minimax refinement) plus the certified fill
//!   `η = (g/2) max_{v ∈ {±1}^D} ‖T v‖`, since every point of `U_A` lies in a
//!   kept cell;
//! * lower bounds come from volume comparison and from packings: `K + 1`
//!   points of `T(U_A)` at mutual distance `> D` force `e_k ≥ D/2` for
//!   `K = 2^{k−1}`.
//!
//! Entropy numbers depend on the scalar field. Carl's inequalities are
//! statements about complex spaces, so eigenvalue audits use
//! [`Field::Complex`].
//!
//! ```
//! use faer::Mat;
//! use fracspec::s_numbers::{approximation_numbers_hilbert, entropy_numbers_bruteforce, Field};
//! use num_complex::Complex64;
//!
//! let t = Mat::from_fn(2, 2, |i, j| Complex64::new(if i == j { 1.0 / (1 + i) as f64 } else { 0.0 }, 0.0));
//! assert_eq!(approximation_numbers_hilbert(&t).unwrap().values(), &[1.0, 0.5]);
//! let e = entropy_numbers_bruteforce(&t, 2, f64::INFINITY, f64::INFINITY, Field::Real).unwrap();
//! assert!(e.lower.get(2) <= 0.5 && 0.5 <= e.upper.get(2));
//! ```

use std::f64::consts::{LN_2, PI};

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest real dimension of the brute-force domain.
pub const MAX_REAL_DIM: usize = 6;
/// Largest `k` for brute force, so at most 64 centers.
pub const MAX_ENTROPY_INDEX: usize = 7;
const REL_TOL: f64 = 1e-12;

/// What a [`SNumberSequence`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SNumberKind {
    Approximation,
    EntropyUpper,
    EntropyLower,
    EntropyExact,
    /// The equivalent-up-to-constants diagonal estimator; not a bound.
    EntropyEstimate,
}

/// Norms of the spaces an operator acts between.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SNumberContext {
    pub source: String,
    pub p_domain: f64,
    pub p_codomain: f64,
}

/// Finite nonincreasing list of nonnegative values, `values[k−1] = s_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SNumberSequence {
    kind: SNumberKind,
    values: Vec<f64>,
    context: SNumberContext,
}

impl SNumberSequence {
    /// Checks that `values` are finite, nonnegative and nonincreasing up to
    /// relative round-off, which is then flattened away.
    pub fn new(kind: SNumberKind, mut values: Vec<f64>, context: SNumberContext) -> Result<Self> {
        for k in 0..values.len() {
            let v = values[k];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("s-number {} = {v} is not a finite nonnegative value", k + 1)));
            }
            if k > 0 && v > values[k - 1] {
                if v > values[k - 1] * (1.0 + REL_TOL) {
                    return Err(Error::InvalidParameter(format!("sequence increases at k = {}: {} < {v}", k + 1, values[k - 1])));
                }
                values[k] = values[k - 1];
            }
        }
        Ok(SNumberSequence { kind, values, context })
    }

    pub fn kind(&self) -> SNumberKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn context(&self) -> &SNumberContext {
        &self.context
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `s_k` for `k ≥ 1`, zero past the stored range.
    pub fn get(&self, k: usize) -> f64 {
        assert!(k >= 1, "s-numbers are indexed from 1");
        self.values.get(k - 1).copied().unwrap_or(0.0)
    }
}

fn hilbert_context(source: &str) -> SNumberContext {
    SNumberContext { source: source.to_string(), p_domain: 2.0, p_codomain: 2.0 }
}

/// Singular values, descending: `a_k` of the matrix as a map `ℓ_2 → ℓ_2`.
pub fn approximation_numbers_hilbert(matrix: &Mat<Complex64>) -> Result<SNumberSequence> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return SNumberSequence::new(SNumberKind::Approximation, Vec::new(), hilbert_context("matrix"));
    }
    let sv = matrix
        .singular_values()
        .map_err(|e| Error::Convergence { context: "singular values".into(), detail: format!("{e:?}") })?;
    SNumberSequence::new(SNumberKind::Approximation, sv, hilbert_context("matrix"))
}

/// `a_k = σ_k` for the diagonal map `ℓ_p^N → ℓ_p^N`.
pub fn approximation_numbers_diagonal(sigma: &[f64], p: f64) -> Result<SNumberSequence> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, ∞]")));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("diagonal entries must be positive".into()));
    }
    let context = SNumberContext { source: "diagonal".into(), p_domain: p, p_codomain: p };
    SNumberSequence::new(SNumberKind::Approximation, sigma.to_vec(), context)
}

/// `sup_{j ≤ N} 2^{−(k−1)/j} (σ_1⋯σ_j)^{1/j}`, equivalent to `e_k` of the
/// diagonal operator up to constants.
pub fn entropy_estimate_diagonal(sigma: &[f64], k: usize) -> Result<f64> {
    entropy_volume_bound_diagonal(sigma, k, Field::Real)
}

/// Volume lower bound for `e_k(diag(σ) : ℓ_2^N → ℓ_2^N)` over `field`:
/// `sup_j 2^{−(k−1)/(c j)} (σ_1⋯σ_j)^{1/j}` with `c = 1` over ℝ and `c = 2`
/// over ℂ, from projecting onto the first `j` coordinates.
///
/// Over ℂ the `j = k` term makes the geometric-mean Carl inequality an
/// equality at `m = k`, so this is the matched entropy sequence for
/// eigenvalue audits.
pub fn entropy_volume_bound_diagonal(sigma: &[f64], k: usize, field: Field) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k starts at 1".into()));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) || sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter("sigma must be positive and nonincreasing".into()));
    }
    let mut log_prod = 0.0;
    let mut best: f64 = 0.0;
    for (j, s) in sigma.iter().enumerate() {
        let j1 = (j + 1) as f64;
        log_prod += s.ln();
        let c = if field == Field::Complex { 2.0 } else { 1.0 };
        best = best.max((log_prod / j1 - (k - 1) as f64 * LN_2 / (c * j1)).exp());
    }
    Ok(best)
}

/// `(Σ_k e_k^q k^{q/p−1})^{1/q}`, or `sup_k e_k k^{1/p}` for `q = ∞`.
pub fn entropy_ideal_quasinorm(e: &SNumberSequence, p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::InvalidParameter(format!("need p > 0 and q > 0, got {p}, {q}")));
    }
    let terms = e.values().iter().enumerate().map(|(i, &v)| (v, (i + 1) as f64));
    if q.is_infinite() {
        return Ok(terms.map(|(v, k)| v * k.powf(1.0 / p)).fold(0.0, f64::max));
    }
    Ok(terms.map(|(v, k)| v.powf(q) * k.powf(q / p - 1.0)).sum::<f64>().powf(1.0 / q))
}

/// Scalar field of the spaces in a brute-force computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Real,
    Complex,
}

/// Resolution of the brute-force covering search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyOptions {
    /// Upper limit on the number of domain cells before the ball test.
    pub cell_budget: usize,
    /// Minimax refinement rounds after farthest-point seeding.
    pub refine_rounds: usize,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions { cell_budget: 100_000, refine_rounds: 6 }
    }
}

/// Brute-force bracket `lower_k ≤ e_k ≤ upper_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBounds {
    pub lower: SNumberSequence,
    pub upper: SNumberSequence,
    /// Cell pitch of the domain partition.
    pub pitch: f64,
    /// Certified fill added to every covering radius.
    pub fill: f64,
}

/// `ℓ_p` norm over the field on real coordinates; complex vectors store
/// `(re, im)` pairs.
#[derive(Debug, Clone, Copy)]
struct Metric {
    p: f64,
    field: Field,
}

impl Metric {
    #[inline]
    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        self.norm_of(a.iter().zip(b).map(|(x, y)| x - y), a.len())
    }

    #[inline]
    fn norm(&self, v: &[f64]) -> f64 {
        self.norm_of(v.iter().copied(), v.len())
    }

    #[inline]
    fn norm_of(&self, mut it: impl Iterator<Item = f64>, len: usize) -> f64 {
        // ℓ_2 over ℂ is the Euclidean norm of the real coordinates.
        if self.p == 2.0 {
            return it.map(|x| x * x).sum::<f64>().sqrt();
        }
        let mut acc: f64 = 0.0;
        let mut next = || match self.field {
            Field::Real => it.next().map(f64::abs),
            Field::Complex => it.next().map(|re| re.hypot(it.next().unwrap_or(0.0))),
        };
        let count = if self.field == Field::Complex { len / 2 } else { len };
        for _ in 0..count {
            let m = next().unwrap_or(0.0);
            if self.p.is_infinite() {
                acc = acc.max(m);
            } else {
                acc += m.powf(self.p);
            }
        }
        if self.p.is_infinite() {
            acc
        } else {
            acc.powf(1.0 / self.p)
        }
    }
}

/// Points of equal dimension stored contiguously.
struct Cloud {
    dim: usize,
    data: Vec<f64>,
}

impl Cloud {
    fn new(dim: usize) -> Self {
        Cloud { dim, data: Vec::new() }
    }

    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    fn push(&mut self, v: &[f64]) {
        self.data.extend_from_slice(v);
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Real-coordinate action of the matrix.
struct RealMap {
    rows: usize,
    cols: usize,
    field: Field,
    entries: Vec<Complex64>,
}

impl RealMap {
    fn new(matrix: &Mat<Complex64>, field: Field) -> Self {
        let entries = (0..matrix.nrows()).flat_map(|i| (0..matrix.ncols()).map(move |j| (i, j))).map(|(i, j)| matrix[(i, j)]).collect();
        RealMap { rows: matrix.nrows(), cols: matrix.ncols(), field, entries }
    }

    fn factor(&self) -> usize {
        if self.field == Field::Complex {
            2
        } else {
            1
        }
    }

    fn domain_dim(&self) -> usize {
        self.cols * self.factor()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            match self.field {
                Field::Real => out.push(row.iter().zip(x).map(|(a, v)| a.re * v).sum()),
                Field::Complex => {
                    let z: Complex64 = row.iter().enumerate().map(|(j, a)| a * Complex64::new(x[2 * j], x[2 * j + 1])).sum();
                    out.push(z.re);
                    out.push(z.im);
                }
            }
        }
    }
}

/// `ln vol` of the unit ball of `ℓ_p^N` over the field.
fn ln_ball_volume(n: usize, p: f64, field: Field) -> f64 {
    let nf = n as f64;
    let inv = if p.is_infinite() { 0.0 } else { 1.0 / p };
    match field {
        Field::Real => nf * (2.0f64.ln() + ln_gamma(1.0 + inv)) - ln_gamma(1.0 + nf * inv),
        Field::Complex => nf * (PI.ln() + ln_gamma(1.0 + 2.0 * inv)) - ln_gamma(1.0 + 2.0 * nf * inv),
    }
}

/// Farthest-point ordering: `order[0]` is the point of largest norm, each
/// next point maximizes its distance to those chosen; `gaps[i]` is that
/// distance for `order[i]`.
fn farthest_points(points: &Cloud, count: usize, metric: Metric) -> (Vec<usize>, Vec<f64>) {
    let mut order = Vec::new();
    let mut gaps = Vec::new();
    let n = points.len();
    if n == 0 {
        return (order, gaps);
    }
    let mut first = 0;
    let mut best = -1.0;
    for i in 0..n {
        let v = metric.norm(points.point(i));
        if v > best {
            best = v;
            first = i;
        }
    }
    let mut nearest: Vec<f64> = (0..n).map(|i| metric.dist(points.point(i), points.point(first))).collect();
    order.push(first);
    gaps.push(f64::INFINITY);
    while order.len() < count.min(n) {
        let (next, gap) = nearest.iter().enumerate().fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if gap <= 0.0 {
            break;
        }
        order.push(next);
        gaps.push(gap);
        let q = points.point(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(metric.dist(points.point(i), q));
        }
    }
    (order, gaps)
}

/// Minimax center of a cluster: the midrange for real `ℓ_∞`, otherwise
/// Bădoiu–Clarkson steps toward the farthest point.
fn minimax_center(points: &Cloud, cluster: &[usize], start: &[f64], metric: Metric) -> Vec<f64> {
    let dim = start.len();
    if metric.p.is_infinite() && metric.field == Field::Real {
        return (0..dim)
            .map(|a| {
                let lo = cluster.iter().map(|&i| points.point(i)[a]).fold(f64::INFINITY, f64::min);
                let hi = cluster.iter().map(|&i| points.point(i)[a]).fold(f64::NEG_INFINITY, f64::max);
                0.5 * (lo + hi)
            })
            .collect();
    }
    let mut c = start.to_vec();
    for step in 1..=64 {
        let mut far = cluster[0];
        let mut worst = -1.0;
        for &i in cluster {
            let d = metric.dist(points.point(i), &c);
            if d > worst {
                worst = d;
                far = i;
            }
        }
        let t = 1.0 / (step + 1) as f64;
        for (ca, fa) in c.iter_mut().zip(points.point(far)) {
            *ca += t * (fa - *ca);
        }
    }
    c
}

fn covering_radius(points: &Cloud, centers: usize, metric: Metric, rounds: usize) -> f64 {
    let n = points.len();
    if centers >= n {
        return 0.0;
    }
    let (seeds, _) = farthest_points(points, centers, metric);
    let mut ctrs: Vec<Vec<f64>> = seeds.iter().map(|&i| points.point(i).to_vec()).collect();
    let mut best = f64::INFINITY;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); ctrs.len()];
    for round in 0..=rounds {
        clusters.iter_mut().for_each(Vec::clear);
        let mut radius: f64 = 0.0;
        for i in 0..n {
            let pt = points.point(i);
            let mut c = 0;
            let mut d = f64::INFINITY;
            for (j, ctr) in ctrs.iter().enumerate() {
                let e = metric.dist(pt, ctr);
                if e < d {
                    d = e;
                    c = j;
                }
            }
            radius = radius.max(d);
            clusters[c].push(i);
        }
        best = best.min(radius);
        if round == rounds {
            break;
        }
        for (c, cl) in ctrs.iter_mut().zip(&clusters) {
            if !cl.is_empty() {
                *c = minimax_center(points, cl, c, metric);
            }
        }
    }
    best
}

/// Brute-force bounds for `e_1, …, e_{k_max}` of the matrix as a map
/// `ℓ_{p_dom} → ℓ_{p_cod}` over `field`, with default resolution.
pub fn entropy_numbers_bruteforce(matrix: &Mat<Complex64>, k_max: usize, p_dom: f64, p_cod: f64, field: Field) -> Result<EntropyBounds> {
    entropy_numbers_bruteforce_with(matrix, k_max, p_dom, p_cod, field, EntropyOptions::default())
}

pub fn entropy_numbers_bruteforce_with(
    matrix: &Mat<Complex64>,
    k_max: usize,
    p_dom: f64,
    p_cod: f64,
    field: Field,
    opts: EntropyOptions,
) -> Result<EntropyBounds> {
    if k_max == 0 || k_max > MAX_ENTROPY_INDEX {
        return Err(Error::InvalidParameter(format!("k_max = {k_max} must lie in 1..={MAX_ENTROPY_INDEX}")));
    }
    if !(p_dom >= 1.0 && p_cod >= 1.0) {
        return Err(Error::InvalidParameter(format!("norm exponents {p_dom}, {p_cod} must be at least 1")));
    }
    let map = RealMap::new(matrix, field);
    if field == Field::Real && map.entries.iter().any(|a| a.im != 0.0) {
        return Err(Error::InvalidParameter("a real-field computation needs a real matrix".into()));
    }
    let dim = map.domain_dim();
    if dim > MAX_REAL_DIM {
        return Err(Error::DimensionTooLarge { dim, limit: MAX_REAL_DIM });
    }
    let context = SNumberContext { source: format!("brute force ({field:?})"), p_domain: p_dom, p_codomain: p_cod };
    let per_axis = ((opts.cell_budget as f64).powf(1.0 / dim.max(1) as f64).floor() as usize).max(2);
    let pitch = 2.0 / per_axis as f64;

    let dom = Metric { p: p_dom, field };
    let cod = Metric { p: p_cod, field };
    let out_dim = map.rows * map.factor();

    // Mapped centers of kept cells, and the mapped centers that lie in U_A.
    let mut images = Cloud::new(out_dim);
    let mut inside = Cloud::new(out_dim);
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    let mut center = vec![0.0; dim];
    let mut nearest = vec![0.0; dim];
    let total = per_axis.pow(dim as u32);
    for _ in 0..total {
        for a in 0..dim {
            let lo = -1.0 + pitch * idx[a] as f64;
            center[a] = lo + 0.5 * pitch;
            nearest[a] = 0.0f64.clamp(lo, lo + pitch);
        }
        if dom.norm(&nearest) <= 1.0 {
            map.apply(&center, &mut out);
            if dom.norm(&center) <= 1.0 {
                inside.push(&out);
            }
            images.push(&out);
        }
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    // Extreme points of U_A join the packing candidates.
    for a in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut v = vec![0.0; dim];
            v[a] = sign;
            map.apply(&v, &mut out);
            inside.push(&out);
        }
    }
    if p_dom.is_infinite() && field == Field::Real {
        for mask in 0..(1usize << dim) {
            let v: Vec<f64> = (0..dim).map(|a| if mask >> a & 1 == 1 { 1.0 } else { -1.0 }).collect();
            map.apply(&v, &mut out);
            inside.push(&out);
        }
    }
    let mut fill: f64 = 0.0;
    for mask in 0..(1usize << dim) {
        let v: Vec<f64> = (0..dim).map(|a| if mask >> a & 1 == 1 { 1.0 } else { -1.0 }).collect();
        map.apply(&v, &mut out);
        fill = fill.max(cod.norm(&out));
    }
    fill *= pitch / 2.0;

    let mut upper: Vec<f64> = (1..=k_max).map(|k| covering_radius(&images, 1 << (k - 1), cod, opts.refine_rounds) + fill).collect();
    for k in 1..upper.len() {
        upper[k] = upper[k].min(upper[k - 1]);
    }

    let (_, gaps) = farthest_points(&inside, (1 << (k_max - 1)) + 1, cod);
    let volume = if map.rows == map.cols && dim > 0 {
        let det = matrix.as_ref().determinant().norm();
        let ln_det = det.ln() * map.factor() as f64;
        let ln_ratio = ln_det + ln_ball_volume(map.cols, p_dom, field) - ln_ball_volume(map.rows, p_cod, field);
        Some(ln_ratio)
    } else {
        None
    };
    let mut lower: Vec<f64> = (1..=k_max)
        .map(|k| {
            let centers = 1usize << (k - 1);
            let packing = gaps.get(centers).map_or(0.0, |g| g / 2.0);
            let vol = volume.map_or(0.0, |ln_ratio| {
                let v = ((ln_ratio - (k - 1) as f64 * LN_2) / dim as f64).exp();
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            });
            packing.max(vol)
        })
        .collect();
    for k in (0..lower.len().saturating_sub(1)).rev() {
        lower[k] = lower[k].max(lower[k + 1]);
    }
    for k in 0..k_max {
        if lower[k] > upper[k] * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::Instability(format!("entropy bracket inverted at k = {}: {} > {}", k + 1, lower[k], upper[k])));
        }
    }
    Ok(EntropyBounds {
        lower: SNumberSequence::new(SNumberKind::EntropyLower, lower, context.clone())?,
        upper: SNumberSequence::new(SNumberKind::EntropyUpper, upper, context)?,
        pitch,
        fill,
    })
}

/// One failed inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

/// Outcome of an inequality audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub check: String,
    pub k_range: [usize; 2],
    /// Smallest `rhs − lhs` seen; `None` when nothing was checked.
    pub worst_slack: Option<f64>,
    pub checked: usize,
    pub pass: bool,
    /// False for consistency checks whose inputs are estimates, not bounds.
    pub theorem: bool,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl AuditReport {
    fn new(check: &str, theorem: bool) -> Self {
        AuditReport {
            check: check.to_string(),
            k_range: [0, 0],
            worst_slack: None,
            checked: 0,
            pass: true,
            theorem,
            violations: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records `lhs ≤ rhs`, allowing round-off `tol · max(scale, |lhs|, |rhs|)`.
    fn record(&mut self, k: usize, lhs: f64, rhs: f64, tol: f64, scale: f64, detail: impl FnOnce() -> String) {
        self.checked += 1;
        self.k_range = if self.checked == 1 { [k, k] } else { [self.k_range[0].min(k), self.k_range[1].max(k)] };
        let slack = rhs - lhs;
        self.worst_slack = Some(self.worst_slack.map_or(slack, |s| s.min(slack)));
        if lhs > rhs + tol * scale.max(rhs.abs()).max(lhs.abs()) {
            self.pass = false;
            self.violations.push(Violation { k, lhs, rhs, detail: detail() });
        }
    }

    /// Folds another report of the same check into this one.
    pub fn merge(&mut self, other: AuditReport) {
        if other.checked > 0 {
            self.k_range = if self.checked == 0 {
                other.k_range
            } else {
                [self.k_range[0].min(other.k_range[0]), self.k_range[1].max(other.k_range[1])]
            };
        }
        self.checked += other.checked;
        self.worst_slack = match (self.worst_slack, other.worst_slack) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.pass &= other.pass;
        self.violations.extend(other.violations);
        self.notes.extend(other.notes);
    }
}

/// Carl's inequality `|λ_k| ≤ √2 e_k` and its geometric-mean refinement
/// `(Π_{j≤k} |λ_j|)^{1/k} ≤ inf_m 2^{(m−1)/(2k)} e_m`, for every `k` up to
/// the length of `entropy`. `moduli` must be sorted in descending order;
/// missing eigenvalues count as zero.
pub fn carl_audit(moduli: &[f64], entropy: &SNumberSequence) -> AuditReport {
    let theorem = entropy.kind() != SNumberKind::EntropyEstimate;
    let mut rep = AuditReport::new("carl", theorem);
    if !theorem {
        rep.notes.push("entropy values are estimates; this is a consistency check".into());
    }
    if entropy.is_empty() {
        rep.notes.push("empty entropy sequence; vacuous pass".into());
        return rep;
    }
    if moduli.windows(2).any(|w| w[1] > w[0]) {
        rep.pass = false;
        rep.notes.push("eigenvalue moduli are not in descending order".into());
        return rep;
    }
    let lam = |k: usize| moduli.get(k - 1).copied().unwrap_or(0.0);
    let mut log_prod = 0.0;
    let mut zero_seen = false;
    for k in 1..=entropy.len() {
        let l = lam(k);
        rep.record(k, l, 2f64.sqrt() * entropy.get(k), REL_TOL, 0.0, || "|λ_k| ≤ √2 e_k".into());
        if l == 0.0 {
            zero_seen = true;
        } else {
            log_prod += l.ln();
        }
        let gm = if zero_seen { 0.0 } else { (log_prod / k as f64).exp() };
        let rhs = (1..=entropy.len())
            .map(|m| 2f64.powf((m - 1) as f64 / (2 * k) as f64) * entropy.get(m))
            .fold(f64::INFINITY, f64::min);
        rep.record(k, gm, rhs, REL_TOL, 0.0, || "geometric mean ≤ inf_m 2^{(m−1)/2k} e_m".into());
    }
    rep
}

fn random_complex(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<Complex64> {
    Mat::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_real(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat<Complex64> {
    Mat::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
}

fn eigen_moduli(m: &Mat<Complex64>) -> Result<Vec<f64>> {
    let ev: Vec<Complex64> = m.eigenvalues().map_err(|e| Error::Convergence { context: "corpus eigenvalues".into(), detail: format!("{e:?}") })?;
    let mut v: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Carl audits over `count` random complex square matrices of size
/// `1..=max_dim`, with brute-force upper bounds in `ℓ_2` over ℂ.
pub fn carl_corpus_audit(count: usize, max_dim: usize, k_max: usize, seed: u64) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = AuditReport::new("carl_corpus", true);
    let opts = EntropyOptions { cell_budget: 40_000, refine_rounds: 4 };
    for _ in 0..count {
        let n = rng.random_range(1..=max_dim);
        let m = random_complex(&mut rng, n, n);
        let moduli = eigen_moduli(&m)?;
        let bounds = entropy_numbers_bruteforce_with(&m, k_max, 2.0, 2.0, Field::Complex, opts)?;
        rep.merge(carl_audit(&moduli, &bounds.upper));
    }
    Ok(rep)
}

/// Sample sizes for [`composition_law_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionSpec {
    /// Random `ℓ_2` triples checked through singular values.
    pub triples: usize,
    pub max_dim: usize,
    /// Random real triples checked through brute-force entropy bounds.
    pub entropy_triples: usize,
    pub entropy_max_dim: usize,
    pub seed: u64,
}

impl Default for CompositionSpec {
    fn default() -> Self {
        CompositionSpec { triples: 50, max_dim: 6, entropy_triples: 20, entropy_max_dim: 3, seed: 7 }
    }
}

fn spectral_norm(m: &Mat<Complex64>) -> Result<f64> {
    Ok(approximation_numbers_hilbert(m)?.get(1))
}

/// Composition and duality laws for approximation numbers (exact, via
/// singular values) and bound-paired composition laws for entropy numbers:
///
/// * `a_k(RST) ≤ ‖R‖ a_k(S) ‖T‖` and `a_{k+l−1}(ST) ≤ a_k(S) a_l(T)`;
/// * `a_k(T*) = a_k(T)` to `1e-10`;
/// * `lower e_k(RST) ≤ ‖R‖ upper e_k(S) ‖T‖` and
///   `lower e_{k+l−1}(ST) ≤ upper e_k(S) upper e_l(T)`.
pub fn composition_law_audit(spec: &CompositionSpec) -> Result<Vec<AuditReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut three = AuditReport::new("approximation_three_factor", true);
    let mut mult = AuditReport::new("approximation_multiplicative", true);
    let mut dual = AuditReport::new("approximation_duality", true);
    for _ in 0..spec.triples {
        let dims: Vec<usize> = (0..4).map(|_| rng.random_range(1..=spec.max_dim)).collect();
        let r = random_complex(&mut rng, dims[0], dims[1]);
        let s = random_complex(&mut rng, dims[1], dims[2]);
        let t = random_complex(&mut rng, dims[2], dims[3]);
        let (nr, nt) = (spectral_norm(&r)?, spectral_norm(&t)?);
        let a_s = approximation_numbers_hilbert(&s)?;
        let a_t = approximation_numbers_hilbert(&t)?;
        let rst = &r * &s * &t;
        let a_rst = approximation_numbers_hilbert(&rst)?;
        let st = &s * &t;
        let a_st = approximation_numbers_hilbert(&st)?;
        let kmax = spec.max_dim;
        for k in 1..=kmax {
            three.record(k, a_rst.get(k), nr * a_s.get(k) * nt, 1e-10, nr * a_s.get(1) * nt, || "a_k(RST) ≤ ‖R‖ a_k(S) ‖T‖".into());
            for l in 1..=kmax {
                mult.record(k + l - 1, a_st.get(k + l - 1), a_s.get(k) * a_t.get(l), 1e-10, a_s.get(1) * a_t.get(1), || format!("a_{{k+l−1}}(ST) ≤ a_k(S) a_l(T), l = {l}"));
            }
        }
        let adj = s.adjoint().to_owned();
        let a_adj = approximation_numbers_hilbert(&adj)?;
        for k in 1..=kmax {
            let (x, y) = (a_s.get(k), a_adj.get(k));
            let scale = a_s.get(1).max(f64::MIN_POSITIVE);
            dual.record(k, (x - y).abs(), 1e-10 * scale, 0.0, 0.0, || "|a_k(S*) − a_k(S)| ≤ 1e-10 ‖S‖".into());
        }
    }

    let mut e_three = AuditReport::new("entropy_three_factor", true);
    let mut e_mult = AuditReport::new("entropy_multiplicative", true);
    let opts = EntropyOptions { cell_budget: 40_000, refine_rounds: 4 };
    let k_max = 4;
    for _ in 0..spec.entropy_triples {
        let n = rng.random_range(1..=spec.entropy_max_dim);
        let r = random_real(&mut rng, n, n);
        let s = random_real(&mut rng, n, n);
        let t = random_real(&mut rng, n, n);
        let (nr, nt) = (spectral_norm(&r)?, spectral_norm(&t)?);
        let es = entropy_numbers_bruteforce_with(&s, k_max, 2.0, 2.0, Field::Real, opts)?;
        let et = entropy_numbers_bruteforce_with(&t, k_max, 2.0, 2.0, Field::Real, opts)?;
        let est = entropy_numbers_bruteforce_with(&(&s * &t), 2 * k_max - 1, 2.0, 2.0, Field::Real, opts)?;
        let erst = entropy_numbers_bruteforce_with(&(&r * &s * &t), k_max, 2.0, 2.0, Field::Real, opts)?;
        for k in 1..=k_max {
            e_three.record(k, erst.lower.get(k), nr * es.upper.get(k) * nt, REL_TOL, 0.0, || "lower e_k(RST) ≤ ‖R‖ upper e_k(S) ‖T‖".into());
            for l in 1..=k_max {
                e_mult.record(k + l - 1, est.lower.get(k + l - 1), es.upper.get(k) * et.upper.get(l), REL_TOL, 0.0, || {
                    format!("lower e_{{k+l−1}}(ST) ≤ upper e_k(S) upper e_l(T), l = {l}")
                });
            }
        }
    }
    Ok(vec![three, mult, dual, e_three, e_mult])
}

/// Brute-force entropy brackets of a diagonal operator on `ℓ_p^N` and of its
/// dual on `ℓ_{p'}^N`, side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityRow {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
    pub dual_lower: f64,
    pub dual_upper: f64,
    /// Ratio of bracket midpoints, dual over primal.
    pub ratio: f64,
}

/// Report-only comparison of entropy numbers of `diag(sigma)` and its dual.
pub fn entropy_duality_report(sigma: &[f64], p: f64, k_max: usize) -> Result<Vec<DualityRow>> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, ∞]")));
    }
    let dual_p = if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    };
    let n = sigma.len();
    let m = Mat::from_fn(n, n, |i, j| Complex64::new(if i == j { sigma[i] } else { 0.0 }, 0.0));
    let primal = entropy_numbers_bruteforce(&m, k_max, p, p, Field::Real)?;
    let dual = entropy_numbers_bruteforce(&m, k_max, dual_p, dual_p, Field::Real)?;
    Ok((1..=k_max)
        .map(|k| {
            let mid = 0.5 * (primal.lower.get(k) + primal.upper.get(k));
            let dmid = 0.5 * (dual.lower.get(k) + dual.upper.get(k));
            DualityRow {
                k,
                lower: primal.lower.get(k),
                upper: primal.upper.get(k),
                dual_lower: dual.lower.get(k),
                dual_upper: dual.upper.get(k),
                ratio: if mid > 0.0 { dmid / mid } else { 1.0 },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> Mat<Complex64> {
        let n = values.len();
        Mat::from_fn(n, n, |i, j| Complex64::new(if i == j { values[i] } else { 0.0 }, 0.0))
    }

    #[test]
    fn singular_values_of_simple_matrices() {
        assert_eq!(approximation_numbers_hilbert(&diag(&[3.0, 1.0])).unwrap().values(), &[3.0, 1.0]);
        let a = approximation_numbers_hilbert(&diag(&[1.0; 5])).unwrap();
        assert_eq!(a.get(5), 1.0);
        assert_eq!(a.get(6), 0.0);
    }

    #[test]
    fn adjoint_has_the_same_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_complex(&mut rng, 8, 8);
        let a = approximation_numbers_hilbert(&m).unwrap();
        let b = approximation_numbers_hilbert(&m.transpose().to_owned()).unwrap();
        for k in 1..=8 {
            assert!((a.get(k) - b.get(k)).abs() < 1e-12 * a.get(1));
        }
    }

    #[test]
    fn first_value_is_the_operator_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_complex(&mut rng, 5, 3);
        let a1 = approximation_numbers_hilbert(&m).unwrap().get(1);
        // Power iteration on M*M.
        let mtm = m.adjoint() * &m;
        let mut v = Mat::<Complex64>::from_fn(3, 1, |i, _| Complex64::new(1.0 + i as f64, 0.5));
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = &mtm * &v;
            lambda = w.norm_l2() / v.norm_l2();
            let n = w.norm_l2();
            v = Mat::from_fn(3, 1, |i, _| w[(i, 0)] / n);
        }
        assert!((lambda.sqrt() - a1).abs() < 1e-10 * a1);
    }

    #[test]
    fn diagonal_closed_form() {
        assert_eq!(approximation_numbers_diagonal(&[1.0, 0.5, 0.25], 3.0).unwrap().values(), &[1.0, 0.5, 0.25]);
        let svd = approximation_numbers_hilbert(&diag(&[1.0, 0.5, 0.25])).unwrap();
        assert_eq!(approximation_numbers_diagonal(&[1.0, 0.5, 0.25], 2.0).unwrap().values(), svd.values());
        assert_eq!(approximation_numbers_diagonal(&[0.3; 4], 1.0).unwrap().values(), &[0.3; 4]);
        assert!(approximation_numbers_diagonal(&[1.0, 2.0], 2.0).is_err());
    }

    #[test]
    fn diagonal_entropy_estimator() {
        assert!((entropy_estimate_diagonal(&[1.0, 0.5], 2).unwrap() - 0.5).abs() < 1e-15);
        for k in 1..6 {
            let v = entropy_estimate_diagonal(&[0.7], k).unwrap();
            assert!((v - 0.7 * 2f64.powi(-(k as i32 - 1))).abs() < 1e-15);
            let ones = entropy_estimate_diagonal(&[1.0; 4], k).unwrap();
            assert!((ones - 2f64.powf(-((k - 1) as f64) / 4.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn ideal_quasinorms() {
        let ctx = hilbert_context("test");
        let single = SNumberSequence::new(SNumberKind::EntropyExact, vec![1.0, 0.0, 0.0], ctx.clone()).unwrap();
        assert_eq!(entropy_ideal_quasinorm(&single, 1.7, 3.0).unwrap(), 1.0);
        let p = 2.5;
        let flat = SNumberSequence::new(SNumberKind::EntropyExact, (1..=50).map(|k| (k as f64).powf(-1.0 / p)).collect(), ctx.clone()).unwrap();
        assert!((entropy_ideal_quasinorm(&flat, p, f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
        let harmonic = SNumberSequence::new(SNumberKind::EntropyExact, (1..=100).map(|k| 1.0 / k as f64).collect(), ctx).unwrap();
        let partial: f64 = (1..=100).map(|k| 1.0 / (k * k) as f64).sum();
        let got = entropy_ideal_quasinorm(&harmonic, 2.0, 2.0).unwrap();
        assert!((got - partial.sqrt()).abs() < 1e-14);
        assert!((got - 1.2787).abs() < 1e-4);
    }

    #[test]
    fn diagonal_on_sup_norm_plane() {
        let e = entropy_numbers_bruteforce(&diag(&[1.0, 0.5]), 2, f64::INFINITY, f64::INFINITY, Field::Real).unwrap();
        assert!(e.lower.get(1) >= 1.0 - 1e-12 && e.upper.get(1) <= 1.0 + 0.01, "{e:?}");
        assert!(e.lower.get(2) >= 0.5 - 1e-12 && e.upper.get(2) <= 0.5 + 0.01, "{e:?}");
    }

    #[test]
    fn volume_bound_on_euclidean_plane() {
        let e = entropy_numbers_bruteforce(&diag(&[1.0, 0.5]), 3, 2.0, 2.0, Field::Real).unwrap();
        // Volume gives 0.5; the packing (±1, 0), (0, 1/2) gives √1.25 / 2.
        assert!(e.lower.get(2) >= 0.5, "{e:?}");
        assert!((e.lower.get(2) - 1.25f64.sqrt() / 2.0).abs() < 1e-12, "{e:?}");
        for k in 1..=3 {
            assert!(e.lower.get(k) <= e.upper.get(k));
        }
    }

    #[test]
    fn zero_operator() {
        let e = entropy_numbers_bruteforce(&diag(&[0.0, 0.0]), 4, 2.0, 2.0, Field::Real).unwrap();
        assert!(e.upper.values().iter().all(|&v| v == 0.0));
        assert!(e.lower.values().iter().all(|&v| v == 0.0));
        let rep = carl_audit(&[0.0, 0.0], &e.upper);
        assert!(rep.pass && rep.violations.is_empty());
    }

    #[test]
    fn size_limits() {
        let err = entropy_numbers_bruteforce(&diag(&[1.0; 4]), 2, 2.0, 2.0, Field::Complex).unwrap_err();
        assert!(matches!(err, Error::DimensionTooLarge { dim: 8, .. }));
        assert!(entropy_numbers_bruteforce(&diag(&[1.0]), 8, 2.0, 2.0, Field::Real).is_err());
    }

    #[test]
    fn complex_scalar_entropy() {
        // Multiplication by c on ℂ: covering a disc of radius |c| by 2^{k−1}
        // discs. The volume bound is |c| 2^{−(k−1)/2}.
        let c = Complex64::new(0.6, -0.3);
        let m = Mat::from_fn(1, 1, |_, _| c);
        let e = entropy_numbers_bruteforce(&m, 4, 2.0, 2.0, Field::Complex).unwrap();
        for k in 1..=4 {
            let vol = c.norm() * 2f64.powf(-((k - 1) as f64) / 2.0);
            assert!(e.lower.get(k) >= vol * (1.0 - 1e-12));
            assert!(e.upper.get(k) >= e.lower.get(k));
        }
        assert!((e.upper.get(1) - c.norm()).abs() < 0.02 * c.norm());
    }

    #[test]
    fn carl_on_the_plane_example() {
        let e = entropy_numbers_bruteforce(&diag(&[1.0, 0.5]), 5, 2.0, 2.0, Field::Complex).unwrap();
        let rep = carl_audit(&[1.0, 0.5], &e.upper);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.worst_slack.unwrap() >= 0.0);
    }

    #[test]
    fn carl_flags_a_corrupted_spectrum() {
        let e = entropy_numbers_bruteforce(&diag(&[1.0, 0.5]), 3, 2.0, 2.0, Field::Complex).unwrap();
        assert!(carl_audit(&[1.0, 0.5], &e.upper).pass);
        // λ_2 tripled, then re-sorted: |λ_1| = 1.5 exceeds √2 ‖T‖.
        let rep = carl_audit(&[1.5, 1.0], &e.upper);
        assert!(!rep.pass, "{rep:?}");
        assert!(rep.violations.iter().any(|v| v.k == 1));
    }

    #[test]
    fn small_carl_corpus() {
        let rep = carl_corpus_audit(10, 2, 5, 3).unwrap();
        assert!(rep.pass, "{:?}", rep.violations);
        assert!(rep.checked > 0);
    }

    #[test]
    fn estimator_consistency_is_flagged() {
        let sigma = [1.0, 0.6, 0.3, 0.1];
        let est: Vec<f64> = (1..=6).map(|k| entropy_estimate_diagonal(&sigma, k).unwrap()).collect();
        let seq = SNumberSequence::new(SNumberKind::EntropyEstimate, est, hilbert_context("estimate")).unwrap();
        let rep = carl_audit(&sigma, &seq);
        assert!(!rep.theorem);
        assert!(!rep.notes.is_empty());
    }

    #[test]
    fn volume_bounds_sit_below_brute_force() {
        let sigma = [1.0, 0.5];
        let e = entropy_numbers_bruteforce(&diag(&sigma), 4, 2.0, 2.0, Field::Complex).unwrap();
        for k in 1..=4 {
            let v = entropy_volume_bound_diagonal(&sigma, k, Field::Complex).unwrap();
            assert!(v <= e.upper.get(k), "k = {k}");
            assert!(v >= entropy_estimate_diagonal(&sigma, k).unwrap());
        }
    }

    #[test]
    fn complex_volume_bounds_satisfy_carl() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut sigma: Vec<f64> = (0..40).map(|_| rng.random_range(0.01..1.0)).collect();
            sigma.sort_by(|a, b| b.total_cmp(a));
            let e: Vec<f64> = (1..=30).map(|k| entropy_volume_bound_diagonal(&sigma, k, Field::Complex).unwrap()).collect();
            let seq = SNumberSequence::new(SNumberKind::EntropyLower, e, hilbert_context("volume")).unwrap();
            let rep = carl_audit(&sigma, &seq);
            assert!(rep.pass, "{:?}", rep.violations);
            let mut bad = sigma.clone();
            bad[4] *= 2.0;
            bad.sort_by(|a, b| b.total_cmp(a));
            assert!(!carl_audit(&bad, &seq).pass);
        }
    }

    #[test]
    fn composition_laws_hold() {
        let spec = CompositionSpec { triples: 10, entropy_triples: 4, ..Default::default() };
        for rep in composition_law_audit(&spec).unwrap() {
            assert!(rep.pass, "{rep:?}");
            assert!(rep.checked > 0);
        }
    }

    #[test]
    fn identity_compositions_are_equalities() {
        let id = diag(&[1.0; 3]);
        let a = approximation_numbers_hilbert(&(&id * &id)).unwrap();
        assert_eq!(a.values(), &[1.0; 3]);
    }

    #[test]
    fn duality_rows_for_a_diagonal() {
        let rows = entropy_duality_report(&[1.0, 0.5], 1.5, 3).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!(r.lower <= r.upper && r.dual_lower <= r.dual_upper);
            assert!(r.ratio > 0.0);
        }
    }

    #[test]
    fn sequences_must_not_increase() {
        let ctx = hilbert_context("t");
        assert!(SNumberSequence::new(SNumberKind::Approximation, vec![1.0, 2.0], ctx.clone()).is_err());
        let s = SNumberSequence::new(SNumberKind::Approximation, vec![1.0, 1.0 + 1e-15], ctx).unwrap();
        assert_eq!(s.get(2), 1.0);
    }
}
