use fracspec::fractal_measure::{build_cantor_like, FractalMeasure};
use fracspec::fractal_operator::{assemble_dmu_kernel, assemble_tmu_galerkin, FrequencyGrid};
use fracspec::psido_engine::Symbol;
use fracspec::spectral_report::eigen_spectrum;

fn cantor(level: usize) -> FractalMeasure {
    let ifs = build_cantor_like(1, 2, 1.0 / 3.0, &[vec![0.0], vec![2.0 / 3.0]]).unwrap();
    FractalMeasure::quadrature(&ifs, level).unwrap()
}

fn relative_gap(a: &[f64], b: &[f64], count: usize) -> f64 {
    (0..count).map(|k| (a[k] - b[k]).abs() / b[k]).fold(0.0, f64::max)
}

#[test]
fn nystrom_matrix_is_positive_semidefinite() {
    for level in [4, 7, 9] {
        let spectrum = eigen_spectrum(&assemble_dmu_kernel(&cantor(level), 0.45).unwrap()).unwrap();
        let values = spectrum.eigenvalues();
        let top = values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let bottom = values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        assert!(bottom >= -1e-8 * top, "level {level}: min {bottom}, max {top}");
        assert!(values.iter().all(|z| z.im == 0.0));
    }
}

#[test]
fn leading_eigenvalues_settle_across_levels() {
    let moduli: Vec<Vec<f64>> = (9..=10).map(|l| eigen_spectrum(&assemble_dmu_kernel(&cantor(l), 0.45).unwrap()).unwrap().moduli()).collect();
    let gap = relative_gap(&moduli[1], &moduli[0], 20);
    assert!(gap <= 0.05, "top-20 gap {gap}");
}

#[test]
fn galerkin_spectrum_is_stable_under_cutoff_doubling() {
    let mu = cantor(6);
    let sym = Symbol::separable_demo(1, -0.8);
    let (s, p) = (0.8 / 1.5, 1.5);
    let base = FrequencyGrid::auto(&mu);
    let doubled = FrequencyGrid::with_cutoff(&mu, 2.0 * base.cutoff);
    let a = eigen_spectrum(&assemble_tmu_galerkin(&sym, s, p, &mu, &base).unwrap()).unwrap().moduli();
    let b = eigen_spectrum(&assemble_tmu_galerkin(&sym, s, p, &mu, &doubled).unwrap()).unwrap().moduli();
    let gap = relative_gap(&a, &b, 20);
    assert!(gap <= 0.02, "gap {gap}");
}
