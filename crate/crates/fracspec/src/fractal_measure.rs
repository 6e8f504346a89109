//! Self-similar d-sets and quadrature for their normalized Hausdorff measure.
//!
//! A [`SimilitudeIFS`] describes the attractor Γ of finitely many contracting
//! similitudes `S_i(x) = r_i R_i x + t_i`. [`FractalMeasure`] discretizes the
//! normalized Hausdorff measure μ on Γ (mass 1) by one atom per length-L word,
//! placed at `S_w(c)` with `c` the attractor barycenter.
//!
//! ```
//! use fracspec::fractal_measure::{build_cantor_like, FractalMeasure};
//!
//! let ifs = build_cantor_like(1, 2, 1.0 / 3.0, &[vec![0.0], vec![2.0 / 3.0]]).unwrap();
//! assert!((ifs.dimension() - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
//! let mu = FractalMeasure::quadrature(&ifs, 1).unwrap();
//! assert!((mu.atom(0)[0] - 1.0 / 6.0).abs() < 1e-15);
//! assert_eq!(mu.weights(), &[0.5, 0.5]);
//! ```

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest atom count [`FractalMeasure::quadrature`] builds unless told otherwise.
pub const DEFAULT_ATOM_BUDGET: usize = 1 << 14;

/// `x ↦ ratio · rotation · x + translation`, rotation stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Similitude {
    pub ratio: f64,
    pub rotation: Vec<f64>,
    pub translation: Vec<f64>,
}

impl Similitude {
    /// Similitude without rotation.
    pub fn scaling(ratio: f64, translation: Vec<f64>) -> Self {
        let n = translation.len();
        let mut rotation = vec![0.0; n * n];
        for i in 0..n {
            rotation[i * n + i] = 1.0;
        }
        Similitude { ratio, rotation, translation }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let rx: f64 = (0..n).map(|k| self.rotation[i * n + k] * x[k]).sum();
                self.ratio * rx + self.translation[i]
            })
            .collect()
    }

    fn linear(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| self.ratio * (0..n).map(|k| self.rotation[i * n + k] * x[k]).sum::<f64>())
            .collect()
    }

    fn is_rotation_free(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|k| self.rotation[i * n + k] == if i == k { 1.0 } else { 0.0 }))
    }
}

/// Iterated function system of similitudes in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilitudeIFS {
    ambient_dim: usize,
    maps: Vec<Similitude>,
    separation_certificate: Option<String>,
    dimension: f64,
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.lo.len();
        (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] }).collect())
            .collect()
    }

    fn hull(points: &[Vec<f64>]) -> Self {
        let n = points[0].len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in points {
            for i in 0..n {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        BoundingBox { lo, hi }
    }

    /// True when the boxes share more than a face. A degenerate (flat) axis
    /// overlaps whenever the intervals meet.
    fn overlaps(&self, other: &BoundingBox, tol: f64) -> bool {
        (0..self.lo.len()).all(|i| {
            let inter = self.hi[i].min(other.hi[i]) - self.lo[i].max(other.lo[i]);
            let flat = self.hi[i] - self.lo[i] <= tol || other.hi[i] - other.lo[i] <= tol;
            inter > tol || (flat && inter >= -tol)
        })
    }
}

impl SimilitudeIFS {
    /// Validates the maps, computes the similarity dimension and checks that
    /// the level-1 cells have disjoint interiors.
    pub fn new(ambient_dim: usize, maps: Vec<Similitude>, separation_certificate: Option<String>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidParameter("ambient dimension must be at least 1".into()));
        }
        if maps.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 maps, got {}", maps.len())));
        }
        for (i, s) in maps.iter().enumerate() {
            if !(s.ratio > 0.0 && s.ratio < 1.0) {
                return Err(Error::InvalidParameter(format!("map {i}: ratio {} not in (0,1)", s.ratio)));
            }
            if s.translation.len() != ambient_dim || s.rotation.len() != ambient_dim * ambient_dim {
                return Err(Error::InvalidParameter(format!("map {i}: wrong shape for dimension {ambient_dim}")));
            }
            if !is_orthogonal(&s.rotation, ambient_dim) {
                return Err(Error::InvalidParameter(format!("map {i}: rotation is not orthogonal")));
            }
        }
        for i in 0..maps.len() {
            for j in 0..i {
                if maps[i] == maps[j] {
                    return Err(Error::InvalidParameter(format!("maps {j} and {i} coincide")));
                }
            }
        }
        let dimension = moran_dimension(&maps);
        if !(dimension > 0.0 && dimension < ambient_dim as f64) {
            return Err(Error::DimensionOutOfRange { d: dimension, n: ambient_dim });
        }
        let ifs = SimilitudeIFS { ambient_dim, maps, separation_certificate, dimension };
        ifs.check_level1_separation()?;
        Ok(ifs)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn separation_certificate(&self) -> Option<&str> {
        self.separation_certificate.as_deref()
    }

    /// Similarity dimension: `log m / log(1/r)` for equal ratios, otherwise the
    /// root of the Moran equation `Σ r_i^d = 1`.
    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    /// Common ratio when all maps share one.
    pub fn equal_ratio(&self) -> Option<f64> {
        let r = self.maps[0].ratio;
        self.maps.iter().all(|s| s.ratio == r).then_some(r)
    }

    pub fn is_rotation_free(&self) -> bool {
        self.maps.iter().all(Similitude::is_rotation_free)
    }

    /// Fixed point of the averaged affine map `x ↦ (1/m) Σ S_i(x)`.
    pub fn barycenter(&self) -> Vec<f64> {
        let n = self.ambient_dim;
        let m = self.maps.len() as f64;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for s in &self.maps {
            for i in 0..n {
                for k in 0..n {
                    a[i * n + k] -= s.ratio * s.rotation[i * n + k] / m;
                }
                b[i] += s.translation[i] / m;
            }
        }
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        solve_small(a, b, n)
    }

    /// Axis-aligned box containing the attractor, found by iterating the box
    /// map from an invariant ball. Exact for rotation-free systems.
    pub fn bounding_box(&self) -> BoundingBox {
        let c = self.barycenter();
        let radius = self
            .maps
            .iter()
            .map(|s| dist(&s.apply(&c), &c) / (1.0 - s.ratio))
            .fold(0.0, f64::max);
        let mut bb = BoundingBox {
            lo: c.iter().map(|x| x - radius).collect(),
            hi: c.iter().map(|x| x + radius).collect(),
        };
        for _ in 0..2000 {
            let images: Vec<Vec<f64>> =
                self.maps.iter().flat_map(|s| bb.corners().into_iter().map(move |p| s.apply(&p))).collect();
            let next = BoundingBox::hull(&images);
            let change = next.lo.iter().zip(&bb.lo).chain(next.hi.iter().zip(&bb.hi)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            bb = next;
            if change <= 1e-16 * (1.0 + radius) {
                break;
            }
        }
        bb
    }

    fn check_level1_separation(&self) -> Result<()> {
        let bb = self.bounding_box();
        let tol = 1e-12 * bb.diameter().max(f64::MIN_POSITIVE);
        let cells: Vec<BoundingBox> = self
            .maps
            .iter()
            .map(|s| BoundingBox::hull(&bb.corners().iter().map(|p| s.apply(p)).collect::<Vec<_>>()))
            .collect();
        for i in 0..cells.len() {
            for j in 0..i {
                if cells[i].overlaps(&cells[j], tol) {
                    return Err(Error::OverlapDetected(j, i));
                }
            }
        }
        Ok(())
    }

    /// Translations of the maps re-centred at the barycenter: the centred
    /// attractor satisfies `Γ − c = ∪ (r R_i (Γ − c) + u_i)`.
    fn centered_offsets(&self) -> Vec<Vec<f64>> {
        let c = self.barycenter();
        self.maps
            .iter()
            .map(|s| {
                let rc = s.linear(&c);
                (0..self.ambient_dim).map(|i| s.translation[i] + rc[i] - c[i]).collect()
            })
            .collect()
    }
}

/// IFS of `m` rotation-free maps with common ratio `r`.
pub fn build_cantor_like(n: usize, m: usize, r: f64, translations: &[Vec<f64>]) -> Result<SimilitudeIFS> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!("ratio {r} not in (0,1)")));
    }
    if translations.len() != m {
        return Err(Error::InvalidParameter(format!("{m} maps but {} translations", translations.len())));
    }
    if let Some(t) = translations.iter().find(|t| t.len() != n) {
        return Err(Error::InvalidParameter(format!("translation {t:?} is not a point of R^{n}")));
    }
    let maps = translations.iter().map(|t| Similitude::scaling(r, t.clone())).collect();
    SimilitudeIFS::new(n, maps, Some("level-1 cell boxes pairwise disjoint".into()))
}

fn moran_dimension(maps: &[Similitude]) -> f64 {
    let r = maps[0].ratio;
    if maps.iter().all(|s| s.ratio == r) {
        return (maps.len() as f64).ln() / (1.0 / r).ln();
    }
    // Σ r_i^d is strictly decreasing in d.
    let f = |d: f64| maps.iter().map(|s| s.ratio.powf(d)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn is_orthogonal(rot: &[f64], n: usize) -> bool {
    (0..n).all(|i| {
        (0..n).all(|j| {
            let dot: f64 = (0..n).map(|k| rot[i * n + k] * rot[j * n + k]).sum();
            (dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10
        })
    })
}

/// Gaussian elimination with partial pivoting for tiny dense systems.
fn solve_small(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs())).unwrap();
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
        }
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Level-L atom quadrature of the normalized Hausdorff measure on Γ.
#[derive(Debug, Clone)]
pub struct FractalMeasure {
    ifs: SimilitudeIFS,
    level: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    ratio: f64,
    attractor_diameter: f64,
}

impl FractalMeasure {
    /// Atoms `S_w(c)` for every word of length `level`, in lexicographic word
    /// order, with weights `m^{-L}`.
    pub fn quadrature(ifs: &SimilitudeIFS, level: usize) -> Result<Self> {
        Self::quadrature_with_budget(ifs, level, DEFAULT_ATOM_BUDGET)
    }

    pub fn quadrature_with_budget(ifs: &SimilitudeIFS, level: usize, budget: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidParameter("quadrature level must be at least 1".into()));
        }
        let ratio = ifs
            .equal_ratio()
            .ok_or_else(|| Error::Unsupported("quadrature needs equal contraction ratios".into()))?;
        let m = ifs.maps.len();
        let atoms_needed = (m as u128).checked_pow(level as u32).unwrap_or(u128::MAX);
        if atoms_needed > budget as u128 {
            return Err(Error::BudgetExceeded { level, atoms: atoms_needed, budget });
        }
        let atoms = word_points(ifs, level);
        let count = atoms_needed as usize;
        let weights = vec![(m as f64).powi(-(level as i32)); count];
        let attractor_diameter = ifs.bounding_box().diameter();
        Ok(FractalMeasure { ifs: ifs.clone(), level, atoms, weights, ratio, attractor_diameter })
    }

    /// Measure made of explicitly given atoms, used for closed-form checks
    /// (single atoms, two-point configurations).
    ///
    /// The carrier `ifs` supplies the cell geometry; `level` fixes the cell
    /// diameter `r^L · diam(Γ)`.
    pub fn from_atoms(ifs: &SimilitudeIFS, level: usize, atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let ratio = ifs
            .equal_ratio()
            .ok_or_else(|| Error::Unsupported("quadrature needs equal contraction ratios".into()))?;
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::ShapeMismatch { expected: atoms.len().max(1), got: weights.len() });
        }
        let n = ifs.ambient_dim;
        if atoms.iter().any(|a| a.len() != n) {
            return Err(Error::InvalidParameter(format!("atoms must lie in R^{n}")));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter("weights must be positive with unit sum".into()));
        }
        Ok(FractalMeasure {
            ifs: ifs.clone(),
            level,
            atoms: atoms.concat(),
            weights,
            ratio,
            attractor_diameter: ifs.bounding_box().diameter(),
        })
    }

    pub fn ifs(&self) -> &SimilitudeIFS {
        &self.ifs
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dimension(&self) -> f64 {
        self.ifs.dimension
    }

    pub fn ambient_dim(&self) -> usize {
        self.ifs.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        let n = self.ambient_dim();
        &self.atoms[j * n..(j + 1) * n]
    }

    /// All atom coordinates, row-major (`len × n`).
    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn attractor_diameter(&self) -> f64 {
        self.attractor_diameter
    }

    /// Diameter of a level-L cell, `r^L · diam(Γ)`.
    pub fn cell_diameter(&self) -> f64 {
        self.ratio.powi(self.level as i32) * self.attractor_diameter
    }

    /// Diameter of the atom cloud.
    pub fn hull_diameter(&self) -> f64 {
        let n = self.ambient_dim();
        let pts: Vec<Vec<f64>> = (0..self.len()).map(|j| self.atom(j).to_vec()).collect();
        if n == 1 {
            let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            return hi - lo;
        }
        BoundingBox::hull(&pts).diameter()
    }

    /// Base-m digits of the word that labels atom `j`.
    pub fn word(&self, j: usize) -> Vec<usize> {
        let m = self.ifs.maps.len();
        let mut digits = vec![0; self.level];
        let mut rest = j;
        for d in digits.iter_mut().rev() {
            *d = rest % m;
            rest /= m;
        }
        digits
    }

    /// `μ_L(B(center, ρ)) / ρ^d`. Centers far from Γ simply give 0.
    pub fn ball_measure_ratio(&self, center: &[f64], radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
        }
        if center.len() != self.ambient_dim() {
            return Err(Error::ShapeMismatch { expected: self.ambient_dim(), got: center.len() });
        }
        if self.cell_diameter() > radius / 10.0 {
            return Err(Error::Resolution { level: self.level, cell: self.cell_diameter(), radius });
        }
        let mass: f64 = (0..self.len())
            .filter(|&j| dist(self.atom(j), center) <= radius)
            .map(|j| self.weights[j])
            .sum();
        Ok(mass / radius.powf(self.dimension()))
    }

    /// `(Σ_j w_j |f(γ_j)|^p)^{1/p}`.
    pub fn lp_norm(&self, values: &[Complex64], p: f64) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: values.len() });
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must be finite and at least 1")));
        }
        let sum: f64 = values.iter().zip(&self.weights).map(|(v, w)| w * v.norm().powf(p)).sum();
        Ok(sum.powf(1.0 / p))
    }

    /// Fourier profile of one normalized cell: `∫ e^{-i z·η} dμ_c(z)` for the
    /// attractor re-centred at its barycenter. A level-L cell `j` has transform
    /// `e^{-i γ_j·ξ} · cell_profile(r^L ξ)`.
    pub fn cell_profile(&self) -> Result<CellProfile> {
        if !self.ifs.is_rotation_free() {
            return Err(Error::Unsupported("cell transforms need rotation-free maps".into()));
        }
        Ok(CellProfile::new(&self.ifs))
    }

    /// Writes `word,x1..xn,weight` rows.
    pub fn write_atoms_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.ambient_dim();
        let m = self.ifs.maps.len();
        let coords: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        writeln!(out, "word,{},weight", coords.join(","))?;
        for j in 0..self.len() {
            let digits: Vec<String> = self.word(j).iter().map(|d| d.to_string()).collect();
            let word = if m <= 10 { digits.concat() } else { digits.join(".") };
            let xs: Vec<String> = self.atom(j).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{word},{},{}", xs.join(","), self.weights[j])?;
        }
        Ok(())
    }
}

/// Points `S_w(c)` for all words of the given length, lexicographic order.
fn word_points(ifs: &SimilitudeIFS, level: usize) -> Vec<f64> {
    let n = ifs.ambient_dim;
    let mut pts = ifs.barycenter();
    for _ in 0..level {
        let count = pts.len() / n;
        let mut next = Vec::with_capacity(pts.len() * ifs.maps.len());
        for s in &ifs.maps {
            for j in 0..count {
                next.extend(s.apply(&pts[j * n..(j + 1) * n]));
            }
        }
        pts = next;
    }
    pts
}

/// Infinite-product evaluator for the Fourier transform of the centred
/// self-similar measure: `Π_k (1/m) Σ_i e^{-i r^k η·u_i}`.
#[derive(Debug, Clone)]
pub struct CellProfile {
    ratio: f64,
    offsets: Vec<Vec<f64>>,
    max_offset: f64,
}

impl CellProfile {
    fn new(ifs: &SimilitudeIFS) -> Self {
        let offsets = ifs.centered_offsets();
        let max_offset = offsets.iter().map(|u| u.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        CellProfile { ratio: ifs.maps[0].ratio, offsets, max_offset }
    }

    pub fn eval(&self, eta: &[f64]) -> Complex64 {
        let m = self.offsets.len() as f64;
        let mut scale = 1.0;
        let norm = eta.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut acc = Complex64::new(1.0, 0.0);
        // The first moment of the offsets vanishes, so once the phase drops
        // below 1e-8 the remaining factors equal 1 to double precision.
        while scale * norm * self.max_offset > 1e-8 {
            let mut f = Complex64::new(0.0, 0.0);
            for u in &self.offsets {
                let phase: f64 = -scale * eta.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
                f += Complex64::from_polar(1.0, phase);
            }
            acc *= f / m;
            scale *= self.ratio;
        }
        acc
    }

    /// `|profile(η)|²` for a scalar frequency in one dimension.
    pub fn power_1d(&self, eta: f64) -> f64 {
        let m2 = (self.offsets.len() * self.offsets.len()) as f64;
        let mut scale = 1.0;
        let mut acc = 1.0;
        while scale * eta.abs() * self.max_offset > 1e-8 && acc > 0.0 {
            let (mut c, mut s) = (0.0, 0.0);
            for u in &self.offsets {
                let (si, co) = (scale * eta * u[0]).sin_cos();
                c += co;
                s += si;
            }
            acc *= (c * c + s * s) / m2;
            scale *= self.ratio;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> SimilitudeIFS {
        build_cantor_like(1, 2, 1.0 / 3.0, &[vec![0.0], vec![2.0 / 3.0]]).unwrap()
    }

    #[test]
    fn cantor_dimension_solves_moran() {
        let ifs = cantor();
        let d = ifs.dimension();
        assert!((d - 0.630_929_753_571_457_4).abs() < 1e-15);
        assert!((2.0 * (1.0f64 / 3.0).powf(d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_ratio_interval_is_rejected() {
        let err = build_cantor_like(1, 2, 0.5, &[vec![0.0], vec![0.5]]).unwrap_err();
        assert!(matches!(err, Error::DimensionOutOfRange { .. }), "{err}");
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let t = vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![0.4, 0.0]];
        let err = build_cantor_like(2, 3, 0.45, &t).unwrap_err();
        assert!(matches!(err, Error::OverlapDetected(0, 1)), "{err}");
    }

    #[test]
    fn four_corner_set_has_dimension_one() {
        let t = vec![vec![0.0, 0.0], vec![0.75, 0.0], vec![0.0, 0.75], vec![0.75, 0.75]];
        let ifs = build_cantor_like(2, 4, 0.25, &t).unwrap();
        assert!((ifs.dimension() - 1.0).abs() < 1e-15);
        assert_eq!(ifs.barycenter(), vec![0.5, 0.5]);
    }

    #[test]
    fn unequal_ratios_solve_moran_but_refuse_quadrature() {
        let maps = vec![Similitude::scaling(0.2, vec![0.0]), Similitude::scaling(0.4, vec![0.6])];
        let ifs = SimilitudeIFS::new(1, maps, None).unwrap();
        let d = ifs.dimension();
        assert!((0.2f64.powf(d) + 0.4f64.powf(d) - 1.0).abs() < 1e-12);
        assert!(matches!(FractalMeasure::quadrature(&ifs, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn level_one_and_two_atoms() {
        let ifs = cantor();
        let mu = FractalMeasure::quadrature(&ifs, 1).unwrap();
        assert!((mu.atom(0)[0] - 1.0 / 6.0).abs() < 1e-16);
        assert!((mu.atom(1)[0] - 5.0 / 6.0).abs() < 1e-15);
        let mu2 = FractalMeasure::quadrature(&ifs, 2).unwrap();
        assert_eq!(mu2.len(), 4);
        assert!(mu2.weights().iter().all(|&w| w == 0.25));
        assert_eq!(mu2.word(2), vec![1, 0]);
        assert!((mu2.atom(2)[0] - (2.0 / 3.0 + 1.0 / 18.0)).abs() < 1e-15);
    }

    #[test]
    fn first_moment_is_one_half_at_every_level() {
        let ifs = cantor();
        for level in 1..=8 {
            let mu = FractalMeasure::quadrature(&ifs, level).unwrap();
            let mean: f64 = (0..mu.len()).map(|j| mu.weights()[j] * mu.atom(j)[0]).sum();
            assert!((mean - 0.5).abs() < 1e-14, "level {level}: {mean}");
            assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn budget_error_names_atom_count() {
        let err = FractalMeasure::quadrature_with_budget(&cantor(), 12, 2048).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { level: 12, atoms: 4096, budget: 2048 }));
    }

    #[test]
    fn atoms_stay_inside_inflated_box() {
        let t = vec![vec![0.0, 0.0], vec![0.75, 0.0], vec![0.0, 0.75], vec![0.75, 0.75]];
        let ifs = build_cantor_like(2, 4, 0.25, &t).unwrap();
        let mu = FractalMeasure::quadrature(&ifs, 4).unwrap();
        let bb = ifs.bounding_box();
        let pad = mu.cell_diameter();
        for j in 0..mu.len() {
            for (i, x) in mu.atom(j).iter().enumerate() {
                assert!(*x >= bb.lo[i] - pad && *x <= bb.hi[i] + pad);
            }
        }
    }

    #[test]
    fn ball_ratios_match_closed_forms() {
        let mu = FractalMeasure::quadrature(&cantor(), 6).unwrap();
        assert!((mu.ball_measure_ratio(&[0.0], 1.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((mu.ball_measure_ratio(&[0.0], 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mu.ball_measure_ratio(&[5.0], 1.0).unwrap(), 0.0);
        let coarse = FractalMeasure::quadrature(&cantor(), 2).unwrap();
        assert!(matches!(coarse.ball_measure_ratio(&[0.0], 0.5), Err(Error::Resolution { .. })));
    }

    #[test]
    fn lp_norms() {
        let mu = FractalMeasure::quadrature(&cantor(), 1).unwrap();
        let v = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        assert!((mu.lp_norm(&v, 2.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        let ones = vec![Complex64::new(1.0, 0.0); 2];
        assert!((mu.lp_norm(&ones, 3.7).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(mu.lp_norm(&ones[..1], 2.0), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn cantor_profile_is_cosine_product() {
        let mu = FractalMeasure::quadrature(&cantor(), 3).unwrap();
        let prof = mu.cell_profile().unwrap();
        for &eta in &[0.0, 0.7, 3.0, 41.0, 1234.5] {
            let mut expect = 1.0;
            let mut t: f64 = eta / 3.0;
            while t.abs() > 1e-12 {
                expect *= t.cos();
                t /= 3.0;
            }
            let got = prof.eval(&[eta]);
            assert!((got.re - expect).abs() < 1e-12 && got.im.abs() < 1e-12, "{eta}: {got} vs {expect}");
        }
    }

    #[test]
    fn atom_csv_has_words() {
        let mu = FractalMeasure::quadrature(&cantor(), 2).unwrap();
        let mut buf = Vec::new();
        mu.write_atoms_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "word,x1,weight");
        assert!(lines[2].starts_with("01,"));
        assert_eq!(lines.len(), 5);
    }
}
