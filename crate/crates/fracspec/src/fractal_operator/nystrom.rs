use faer::Mat;

use super::bessel::{BesselKernel, LocalModel, RHO_MIN};
use super::{check_kernel_window, Assembly, DiscretizedOperator, OperatorMatrix, SpaceDesc};
use crate::error::{Error, Result};
use crate::fractal_measure::{dist, FractalMeasure, SimilitudeIFS};

/// Extra subdivision levels used for the diagonal self-interaction.
const SELF_LEVELS: usize = 4;
/// Largest atom count used to estimate attractor energies.
const ENERGY_ATOMS: usize = 2048;

/// Energy of the normalized attractor measure for the singular part of the
/// kernel: `∬ |u−v|^{-β} dμ dμ` for a power model, `∬ −ln|u−v| dμ dμ` for the
/// logarithmic one.
///
/// Self-similarity splits the double integral into m diagonal blocks, each a
/// rescaled copy of the whole, and off-diagonal blocks between disjoint
/// cells. Only the latter need quadrature:
/// `I = Off / (1 − r^{-β}/m)` and `J = (Off − ln(r)/m) / (1 − 1/m)`.
pub fn attractor_energy(ifs: &SimilitudeIFS, model: LocalModel) -> Result<f64> {
    let r = ifs
        .equal_ratio()
        .ok_or_else(|| Error::Unsupported("attractor energy needs equal ratios".into()))?;
    let m = ifs.maps().len();
    let mut level = 1;
    while m.pow(level as u32 + 1) <= ENERGY_ATOMS {
        level += 1;
    }
    let mu = FractalMeasure::quadrature_with_budget(ifs, level, usize::MAX)?;
    let block = mu.len() / m;
    let w = mu.weights()[0];
    let pair_sum = |f: &dyn Fn(f64) -> f64| {
        let mut total = 0.0;
        for a in 0..mu.len() {
            for b in 0..mu.len() {
                if a / block != b / block {
                    total += f(dist(mu.atom(a), mu.atom(b)));
                }
            }
        }
        total * w * w
    };
    match model {
        LocalModel::Power { beta, .. } => {
            let growth = r.powf(-beta) / m as f64;
            if growth >= 1.0 {
                return Err(Error::WindowViolation(format!("energy exponent {beta} is not below the dimension {}", ifs.dimension())));
            }
            Ok(pair_sum(&|rho| rho.powf(-beta)) / (1.0 - growth))
        }
        LocalModel::Log { .. } => {
            let mf = m as f64;
            Ok((pair_sum(&|rho| -rho.ln()) - r.ln() / mf) / (1.0 - 1.0 / mf))
        }
        LocalModel::Regular { .. } => Ok(0.0),
    }
}

/// Mean of `G` over `cell × cell` for a level-L cell, `(1/w²) ∬ G(|u−v|) dμ dμ`.
///
/// The cell is subdivided [`SELF_LEVELS`] more levels. Distinct sub-cells
/// interact through `G` at their atom distance; each sub-cell's own energy
/// uses the local model of `G` at the origin, integrated exactly against the
/// self-similar measure and matched to `G` at the sub-cell diameter.
pub fn cell_self_energy(kernel: &BesselKernel, measure: &FractalMeasure) -> Result<f64> {
    let ifs = measure.ifs();
    let sub = FractalMeasure::quadrature_with_budget(ifs, SELF_LEVELS, usize::MAX)?;
    let r = measure.ratio();
    let lambda = r.powi(measure.level() as i32);
    let count = sub.len();
    let w = 1.0 / count as f64;
    let mut cross = 0.0;
    for a in 0..count {
        for b in a + 1..count {
            let rho = lambda * dist(sub.atom(a), sub.atom(b));
            cross += 2.0 * kernel.eval(rho)?;
        }
    }
    let scale = lambda * r.powi(SELF_LEVELS as i32);
    let diam = measure.attractor_diameter();
    let delta = scale * diam;
    let local = match kernel.local_model() {
        model @ LocalModel::Power { coef, beta } => {
            let energy = attractor_energy(ifs, model)?;
            coef * (scale.powf(-beta) * energy - delta.powf(-beta)) + kernel.eval(delta)?
        }
        model @ LocalModel::Log { coef } => {
            let energy = attractor_energy(ifs, model)?;
            coef * (energy + diam.ln()) + kernel.eval(delta)?
        }
        LocalModel::Regular { .. } => kernel.eval(0.0)?,
    };
    Ok(cross * w * w + count as f64 * w * w * local)
}

/// Nyström matrix of `D^μ_s`:
/// `K_jk = (2π)^{-n/2} √w_j G_{2s}(|γ_j − γ_k|) √w_k` off the diagonal and
/// `K_jj = (2π)^{-n/2} w_j · mean_{cell j × cell j} G_{2s}`.
///
/// Requires `n − d < 2s ≤ n`. The matrix is real symmetric; its eigenvalues
/// approximate those of `D^μ_s` on `L_2(Γ, μ)`.
pub fn assemble_dmu_kernel(measure: &FractalMeasure, s: f64) -> Result<DiscretizedOperator> {
    let a = 2.0 * s;
    check_kernel_window(measure, a, "2s")?;
    let n = measure.ambient_dim();
    let kernel = BesselKernel::new(a, n)?;
    let conv = (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0);
    let self_mean = cell_self_energy(&kernel, measure)?;
    let count = measure.len();
    let sw: Vec<f64> = measure.weights().iter().map(|w| w.sqrt()).collect();
    let mut mat = Mat::<f64>::zeros(count, count);
    for j in 0..count {
        mat[(j, j)] = conv * measure.weights()[j] * self_mean;
        for k in j + 1..count {
            let rho = dist(measure.atom(j), measure.atom(k));
            if rho < RHO_MIN {
                return Err(Error::Singularity { radius: rho, floor: RHO_MIN });
            }
            let v = conv * sw[j] * kernel.eval_unchecked(rho) * sw[k];
            mat[(j, k)] = v;
            mat[(k, j)] = v;
        }
    }
    let space = SpaceDesc::AtomSpace { atoms: count, level: measure.level(), p: 2.0 };
    let assembly = Assembly {
        level: Some(measure.level()),
        ..Assembly::new("dmu_kernel")
            .with("s", s)
            .with("kernel_order", a)
            .with("convention_constant", conv)
            .with("self_interaction_levels", SELF_LEVELS as u64)
            .with("cell_mean_kernel", self_mean)
    };
    DiscretizedOperator::new(OperatorMatrix::Real(mat), space.clone(), space, assembly)
}
