//! Config-driven runs: build the measure, assemble, eigensolve, fit, audit
//! and write artifacts.
//!
//! Every artifact starts with the artifact version, the SHA-256 of the
//! canonical config and the seed. Outputs are computed in memory and written
//! only after every stage succeeded, so a failed run leaves no files. Runs are
//! deterministic: the same config gives byte-identical files.
//!
//! ```
//! use fracspec::experiment::ExperimentConfig;
//!
//! let json = r#"{
//!     "schema_version": 1,
//!     "name": "demo",
//!     "fractal": { "n": 1, "m": 2, "r": 0.3333333333333333,
//!                  "translations": [[0.0], [0.6666666666666666]], "level": 6 },
//!     "analysis": { "s": 0.45, "p": 2.0, "operator": "nystrom" },
//!     "seed": 1
//! }"#;
//! let config = ExperimentConfig::from_json(json).unwrap();
//! assert_eq!(config.config_hash().len(), 64);
//! assert!(ExperimentConfig::from_json(&json.replace("\"seed\"", "\"sede\"")).is_err());
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::besov_analysis::{BesovParams, GridFunction, SpatialGrid};
use crate::error::{Error, Result};
use crate::fractal_measure::{build_cantor_like, FractalMeasure, DEFAULT_ATOM_BUDGET};
use crate::fractal_operator::{assemble_dmu_kernel, assemble_tmu_galerkin, DiscretizedOperator, FrequencyGrid};
use crate::psido_engine::{boundedness_probe, validate_symbol, BoundednessReport, ProbeSpec, Symbol, ValidationReport};
use crate::s_numbers::{
    carl_audit, carl_corpus_audit, composition_law_audit, entropy_duality_report, entropy_ideal_quasinorm, entropy_volume_bound_diagonal,
    entropy_numbers_bruteforce, AuditReport, CompositionSpec, DualityRow, EntropyBounds, Field, SNumberContext, SNumberKind,
    SNumberSequence,
};
use crate::spectral_report::{
    eigen_spectrum, fit_decay_exponent, snumber_exponent_check, theoretical_exponent, transference_defect, Comparison, DecayFit,
    FitMethod, FitPolicy, Spectrum, SpectrumReport, WindowPolicy,
};

/// Config schema understood by this version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalSpec {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub translations: Vec<Vec<f64>>,
    pub level: usize,
}

/// Operator whose spectrum a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Nyström matrix of `D^μ_s`; needs `p = 2`.
    Nystrom,
    /// Cell Galerkin matrix of `T^μ_τ` for the configured symbol.
    Galerkin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSpec {
    Identity,
    BesselPower { order: f64 },
    SeparableDemo { order: f64 },
    ExoticDemo { levels: usize },
}

impl SymbolSpec {
    pub fn build(&self, dim: usize) -> Symbol {
        match *self {
            SymbolSpec::Identity => Symbol::identity(dim),
            SymbolSpec::BesselPower { order } => Symbol::bessel_power(dim, order),
            SymbolSpec::SeparableDemo { order } => Symbol::separable_demo(dim, order),
            SymbolSpec::ExoticDemo { levels } => Symbol::exotic_demo(dim, levels),
        }
    }
}

/// Uniform grid for the symbol boundedness probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 256, extent: 8.0 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    pub s: f64,
    pub p: f64,
    pub operator: OperatorKind,
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    /// Frequency cutoff `Ξ`; defaults to `8π / cell diameter`.
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub probes: Option<ProbeSpec>,
}

fn default_tolerance() -> f64 {
    0.08
}

fn two_sided() -> Comparison {
    Comparison::TwoSided
}

fn least_squares() -> FitMethod {
    FitMethod::LeastSquares
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    #[serde(default)]
    pub window: WindowPolicy,
    #[serde(default = "least_squares")]
    pub method: FitMethod,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "two_sided")]
    pub comparison: Comparison,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec { window: WindowPolicy::default(), method: FitMethod::LeastSquares, tolerance: 0.08, comparison: Comparison::TwoSided }
    }
}

impl FitSpec {
    pub fn policy(&self) -> FitPolicy {
        FitPolicy { window: self.window, method: self.method }
    }
}

/// Trace approximation-number run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSpec {
    pub tolerance: f64,
    pub transference_k: usize,
    pub transference_tolerance: f64,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec { tolerance: 0.05, transference_k: 50, transference_tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSpec {
    /// Random complex matrices in the Carl corpus.
    pub carl_corpus: usize,
    pub corpus_max_dim: usize,
    pub corpus_k_max: usize,
    pub composition_triples: usize,
    pub composition_max_dim: usize,
    pub entropy_triples: usize,
    pub entropy_max_dim: usize,
    /// Length of the diagonal entropy estimate of the computed spectrum.
    pub estimate_k_max: usize,
    pub duality_p: Vec<f64>,
}

impl Default for AuditSpec {
    fn default() -> Self {
        AuditSpec {
            carl_corpus: 100,
            corpus_max_dim: 3,
            corpus_k_max: 5,
            composition_triples: 50,
            composition_max_dim: 6,
            entropy_triples: 20,
            entropy_max_dim: 3,
            estimate_k_max: 64,
            duality_p: vec![1.0, 1.5, 3.0],
        }
    }
}

/// One experiment. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub fractal: FractalSpec,
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub fit: FitSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub audits: AuditSpec,
    #[serde(default)]
    pub convergence_levels: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Parses and validates a config.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(Error::at(&format!("loading {}", path.display())))
    }

    /// Checks everything that can be checked without assembling.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!("name {:?} must be nonempty ASCII letters, digits, '_' or '-'", self.name)));
        }
        let ifs = build_cantor_like(self.fractal.n, self.fractal.m, self.fractal.r, &self.fractal.translations)?;
        let (n, d) = (self.fractal.n, ifs.dimension());
        let a = &self.analysis;
        theoretical_exponent(n, d, a.s, a.p)?;
        match a.operator {
            OperatorKind::Nystrom => {
                if a.p != 2.0 {
                    return Err(Error::Config(format!("the nystrom operator needs p = 2, got {}", a.p)));
                }
                if let Some(sym) = &a.symbol {
                    if *sym != (SymbolSpec::BesselPower { order: -2.0 * a.s }) {
                        return Err(Error::Config("the nystrom operator only takes the symbol bessel_power with order −2s".into()));
                    }
                }
            }
            OperatorKind::Galerkin => {
                let sym = a.symbol.as_ref().ok_or_else(|| Error::Config("the galerkin operator needs a symbol".into()))?;
                let order = sym.build(n).order();
                if (order + a.s * a.p).abs() > 1e-9 {
                    return Err(Error::SymbolOrderMismatch { declared: order, required: -a.s * a.p });
                }
            }
        }
        if let Some(c) = a.cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("cutoff {c} must be positive")));
            }
        }
        if !(self.fit.tolerance > 0.0) || !(self.trace.tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.convergence_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("convergence_levels must be strictly ascending".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the config without its output directory.
    pub fn config_hash(&self) -> String {
        let canonical = ExperimentConfig { output_dir: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("configs serialize");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same config at another level.
    pub fn at_level(&self, level: usize) -> Self {
        let mut c = self.clone();
        c.fractal.level = level;
        c
    }

    pub fn measure(&self) -> Result<FractalMeasure> {
        let f = &self.fractal;
        let ifs = build_cantor_like(f.n, f.m, f.r, &f.translations)?;
        FractalMeasure::quadrature_with_budget(&ifs, f.level, DEFAULT_ATOM_BUDGET)
    }

    pub fn frequency_grid(&self, measure: &FractalMeasure) -> FrequencyGrid {
        match self.analysis.cutoff {
            Some(c) => FrequencyGrid::with_cutoff(measure, c),
            None => FrequencyGrid::auto(measure),
        }
    }

    /// The configured symbol; `w_{−2s}` when none is given.
    pub fn symbol(&self) -> Symbol {
        let spec = self.analysis.symbol.clone().unwrap_or(SymbolSpec::BesselPower { order: -self.analysis.s * self.analysis.p });
        spec.build(self.fractal.n)
    }

    pub fn assemble(&self, measure: &FractalMeasure) -> Result<DiscretizedOperator> {
        let a = &self.analysis;
        match a.operator {
            OperatorKind::Nystrom => assemble_dmu_kernel(measure, a.s),
            OperatorKind::Galerkin => assemble_tmu_galerkin(&self.symbol(), a.s, a.p, measure, &self.frequency_grid(measure)),
        }
    }

    pub fn predicted_exponent(&self) -> Result<f64> {
        let ifs = build_cantor_like(self.fractal.n, self.fractal.m, self.fractal.r, &self.fractal.translations)?;
        theoretical_exponent(self.fractal.n, ifs.dimension(), self.analysis.s, self.analysis.p)
    }
}

/// Identification block at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactHeader {
    pub artifact: &'static str,
    pub version: &'static str,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactHeader {
    pub fn new(config: &ExperimentConfig) -> Self {
        ArtifactHeader {
            artifact: "fracspec",
            version: env!("CARGO_PKG_VERSION"),
            experiment: config.name.clone(),
            config_hash: config.config_hash(),
            seed: config.seed,
        }
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("{} {}", self.artifact, self.version),
            format!("experiment {}", self.experiment),
            format!("config_hash {}", self.config_hash),
            format!("seed {}", self.seed),
        ]
    }
}

/// Files of one run, held in memory until every stage has succeeded.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: String, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    fn json<T: Serialize>(&mut self, name: String, header: &ArtifactHeader, body: &T) -> Result<()> {
        let value = serde_json::json!({ "header": header, "body": body });
        let mut bytes = serde_json::to_vec_pretty(&value).map_err(|e| Error::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file, removing the ones already written if one fails.
    fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(&path);
                return Err(Error::io(&path, e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn csv_preamble(header: &ArtifactHeader) -> Vec<String> {
    header.lines()
}

fn plot_script(header: &ArtifactHeader, csv_name: &str, fit: &DecayFit, predicted: f64) -> String {
    let mut s = String::new();
    for line in header.lines() {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str(&format!(
        r##"import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

k, lam = [], []
with open("{csv_name}") as f:
    rows = (line for line in f if not line.startswith("#"))
    for row in csv.DictReader(rows):
        if float(row["modulus"]) > 0:
            k.append(int(row["k"]))
            lam.append(float(row["modulus"]))

lo, hi = {lo}, {hi}
slope, intercept, predicted = {slope:e}, {intercept:e}, {predicted:e}
fig, ax = plt.subplots()
ax.loglog(k, lam, ".", ms=2, label="|lambda_k|")
xs = [lo, hi]
ax.loglog(xs, [math.exp(intercept) * x**slope for x in xs], "-", label=f"fit {{slope:.4f}}")
ax.loglog(xs, [math.exp(intercept) * lo ** (slope - predicted) * x**predicted for x in xs], "--", label=f"predicted {{predicted:.4f}}")
ax.set_xlabel("k")
ax.set_ylabel("|lambda_k|")
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{stem}.png", dpi=150)
"##,
        lo = fit.window[0],
        hi = fit.window[1],
        slope = fit.slope,
        intercept = fit.intercept,
        stem = csv_name.trim_end_matches(".csv"),
    ));
    s
}

fn output_dir(config: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Result of [`run_spectrum`].
#[derive(Debug)]
pub struct SpectrumOutcome {
    pub report: SpectrumReport,
    pub files: Vec<PathBuf>,
}

/// Computes the spectrum of the configured operator, fits its decay and
/// compares with `−1 + (n − sp)/d`. Writes `<name>_spectrum.csv`,
/// `<name>_report.json` and `<name>_plot.py`.
pub fn run_spectrum(config: &ExperimentConfig, out: Option<&Path>) -> Result<SpectrumOutcome> {
    let report = compute_spectrum(config)?;
    let header = ArtifactHeader::new(config);
    let mut outputs = Outputs::default();
    let csv_name = format!("{}_spectrum.csv", config.name);
    let mut csv = Vec::new();
    report.spectrum.write_csv(&mut csv, &csv_preamble(&header)).map_err(|e| Error::io(Path::new(&csv_name), e))?;
    outputs.add(csv_name.clone(), csv);
    outputs.json(format!("{}_report.json", config.name), &header, &serde_json::json!({ "config": config, "report": &report }))?;
    outputs.add(format!("{}_plot.py", config.name), plot_script(&header, &csv_name, &report.fit, report.theoretical_exponent).into_bytes());
    let files = outputs.commit(&output_dir(config, out))?;
    Ok(SpectrumOutcome { report, files })
}

/// The spectrum report without writing anything.
pub fn compute_spectrum(config: &ExperimentConfig) -> Result<SpectrumReport> {
    let measure = config.measure().map_err(Error::at("building the measure"))?;
    let op = config.assemble(&measure).map_err(Error::at("assembling the operator"))?;
    let spectrum = eigen_spectrum(&op).map_err(Error::at("eigensolve"))?;
    let fit = fit_decay_exponent(&spectrum.moduli(), &config.fit.policy()).map_err(Error::at("fitting the decay"))?;
    let predicted = config.predicted_exponent()?;
    Ok(SpectrumReport::new(spectrum, fit, predicted, config.fit.tolerance, config.fit.comparison, op.assembly().clone()))
}

/// One level of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub atoms: usize,
    pub slope: f64,
    /// Change of the slope from the previous level.
    pub delta: Option<f64>,
    pub top: Vec<f64>,
}

/// Per-level slopes and leading eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub predicted: f64,
    /// Slope deltas shrink, or stay below the noise floor `0.01`.
    pub stabilizing: bool,
    pub files: Vec<PathBuf>,
}

/// Noise floor under which slope deltas count as converged.
pub const CONVERGENCE_FLOOR: f64 = 0.01;

/// Runs the spectrum pipeline at each level and writes
/// `<name>_convergence.csv` and `<name>_convergence.json`.
pub fn run_convergence(config: &ExperimentConfig, levels: &[usize], out: Option<&Path>) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("convergence levels must be nonempty and strictly ascending".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &level in levels {
        let report = compute_spectrum(&config.at_level(level)).map_err(Error::at(&format!("level {level}")))?;
        let delta = rows.last().map(|r| report.fit.slope - r.slope);
        rows.push(ConvergenceRow {
            level,
            atoms: report.count,
            slope: report.fit.slope,
            delta,
            top: report.spectrum.moduli().into_iter().take(20).collect(),
        });
    }
    let deltas: Vec<f64> = rows.iter().filter_map(|r| r.delta.map(f64::abs)).collect();
    let stabilizing = deltas.windows(2).all(|w| w[1] <= w[0] || w[1] <= CONVERGENCE_FLOOR);
    let header = ArtifactHeader::new(config);
    let mut csv = String::new();
    for line in csv_preamble(&header) {
        csv.push_str(&format!("# {line}\n"));
    }
    csv.push_str("level,atoms,slope,delta");
    for k in 1..=20 {
        csv.push_str(&format!(",lambda_{k}"));
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!("{},{},{:e},{}", r.level, r.atoms, r.slope, r.delta.map_or(String::new(), |d| format!("{d:e}"))));
        for k in 0..20 {
            csv.push_str(&r.top.get(k).map_or(",".to_string(), |v| format!(",{v:e}")));
        }
        csv.push('\n');
    }
    let predicted = config.predicted_exponent()?;
    let mut outputs = Outputs::default();
    outputs.add(format!("{}_convergence.csv", config.name), csv.into_bytes());
    outputs.json(
        format!("{}_convergence.json", config.name),
        &header,
        &serde_json::json!({ "levels": levels, "rows": &rows, "predicted": predicted, "stabilizing": stabilizing }),
    )?;
    let files = outputs.commit(&output_dir(config, out))?;
    Ok(ConvergenceTable { rows, predicted, stabilizing, files })
}

/// Complex volume bounds for `e_k` of the diagonal operator with the given
/// moduli, the entropy sequence matched to a spectrum for Carl audits.
pub fn estimate_sequence(moduli: &[f64], k_max: usize) -> Result<SNumberSequence> {
    let mut positive: Vec<f64> = moduli.iter().copied().filter(|&m| m > 0.0).collect();
    positive.sort_by(|a, b| b.total_cmp(a));
    let values = if positive.is_empty() {
        Vec::new()
    } else {
        (1..=k_max).map(|k| entropy_volume_bound_diagonal(&positive, k, Field::Complex)).collect::<Result<Vec<_>>>()?
    };
    let context = SNumberContext { source: "diagonal volume bound of the spectrum".into(), p_domain: 2.0, p_codomain: 2.0 };
    SNumberSequence::new(SNumberKind::EntropyEstimate, values, context)
}

/// One entry of the entropy-ideal table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasinormEntry {
    pub p: f64,
    /// `None` stands for `q = ∞`.
    pub q: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityInstance {
    pub p: f64,
    pub sigma: Vec<f64>,
    pub rows: Vec<DualityRow>,
}

/// Everything [`run_audits`] checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditBundle {
    /// Carl consistency check of the computed spectrum against its own
    /// diagonal entropy estimate.
    pub spectrum_carl: AuditReport,
    pub carl_corpus: AuditReport,
    pub composition: Vec<AuditReport>,
    /// Report-only.
    pub duality: Vec<DualityInstance>,
    pub quasinorms: Vec<QuasinormEntry>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Carl check of `moduli` against `entropy` plus the entropy-ideal table of
/// `entropy`. An empty spectrum passes vacuously with a warning.
pub fn audit_spectrum(moduli: &[f64], entropy: &SNumberSequence) -> Result<(AuditReport, Vec<QuasinormEntry>, Vec<String>)> {
    let mut warnings = Vec::new();
    let top = moduli.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        warnings.push("empty spectrum: spectrum audits are vacuous".to_string());
    }
    let mut sorted = moduli.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let report = carl_audit(&sorted, entropy);
    let mut table = Vec::new();
    for p in [0.5, 1.0, 2.0] {
        for q in [Some(1.0), Some(2.0), None] {
            let value = entropy_ideal_quasinorm(entropy, p, q.unwrap_or(f64::INFINITY))?;
            table.push(QuasinormEntry { p, q, value });
        }
    }
    Ok((report, table, warnings))
}

/// Runs every audit and writes `<name>_audits.json`.
pub fn run_audits(config: &ExperimentConfig, out: Option<&Path>) -> Result<(AuditBundle, Vec<PathBuf>)> {
    let bundle = compute_audits(config)?;
    let header = ArtifactHeader::new(config);
    let mut outputs = Outputs::default();
    outputs.json(format!("{}_audits.json", config.name), &header, &bundle)?;
    let files = outputs.commit(&output_dir(config, out))?;
    Ok((bundle, files))
}

pub fn compute_audits(config: &ExperimentConfig) -> Result<AuditBundle> {
    let a = &config.audits;
    let measure = config.measure().map_err(Error::at("building the measure"))?;
    let op = config.assemble(&measure).map_err(Error::at("assembling the operator"))?;
    let spectrum = eigen_spectrum(&op).map_err(Error::at("eigensolve"))?;
    let moduli = spectrum.moduli();
    let entropy = estimate_sequence(&moduli, a.estimate_k_max).map_err(Error::at("entropy estimate"))?;
    let (spectrum_carl, quasinorms, warnings) = audit_spectrum(&moduli, &entropy)?;
    let carl_corpus = carl_corpus_audit(a.carl_corpus, a.corpus_max_dim, a.corpus_k_max, config.seed).map_err(Error::at("carl corpus"))?;
    let spec = CompositionSpec {
        triples: a.composition_triples,
        max_dim: a.composition_max_dim,
        entropy_triples: a.entropy_triples,
        entropy_max_dim: a.entropy_max_dim,
        seed: config.seed,
    };
    let composition = composition_law_audit(&spec).map_err(Error::at("composition laws"))?;
    let sigma: Vec<f64> = if top_two(&moduli) { vec![1.0, moduli[1] / moduli[0]] } else { vec![1.0, 0.5] };
    let duality = a
        .duality_p
        .iter()
        .map(|&p| Ok(DualityInstance { p, sigma: sigma.clone(), rows: entropy_duality_report(&sigma, p, 3)? }))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::at("entropy duality"))?;
    let pass = spectrum_carl.pass && carl_corpus.pass && composition.iter().all(|r| r.pass);
    Ok(AuditBundle { spectrum_carl, carl_corpus, composition, duality, quasinorms, warnings, pass })
}

fn top_two(moduli: &[f64]) -> bool {
    moduli.len() >= 2 && moduli[0] > 0.0 && moduli[1] > 0.0
}

/// Result of [`run_trace_snumbers`].
#[derive(Debug, Clone, Serialize)]
pub struct TraceOutcome {
    pub slope: f64,
    pub predicted: f64,
    pub slope_pass: bool,
    /// `max_{k ≤ K} |a_k² − λ_k| / λ_k` against the Nyström spectrum.
    pub transference_defect: f64,
    pub transference_pass: bool,
    pub pass: bool,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Approximation numbers of the trace, their fitted exponent and the
/// transference identity `a_k² = λ_k(D^μ_s)`. Writes `<name>_trace.csv` and
/// `<name>_trace.json`.
pub fn run_trace_snumbers(config: &ExperimentConfig, out: Option<&Path>) -> Result<TraceOutcome> {
    let measure = config.measure().map_err(Error::at("building the measure"))?;
    let (s, p) = (config.analysis.s, config.analysis.p);
    let report = snumber_exponent_check(&measure, s, p, &config.fit.policy(), config.trace.tolerance).map_err(Error::at("trace approximation numbers"))?;
    let dmu = assemble_dmu_kernel(&measure, s).map_err(Error::at("assembling the operator"))?;
    let lambda = eigen_spectrum(&dmu).map_err(Error::at("eigensolve"))?.moduli();
    let defect = transference_defect(report.approximation.values(), &lambda, config.trace.transference_k).map_err(Error::at("transference"))?;
    let transference_pass = defect <= config.trace.transference_tolerance;
    let header = ArtifactHeader::new(config);
    let mut csv = String::new();
    for line in csv_preamble(&header) {
        csv.push_str(&format!("# {line}\n"));
    }
    csv.push_str("k,a_k,a_k_squared,lambda_k\n");
    for (k, a) in report.approximation.values().iter().enumerate() {
        csv.push_str(&format!("{},{a:e},{:e},{:e}\n", k + 1, a * a, lambda.get(k).copied().unwrap_or(0.0)));
    }
    let outcome = TraceOutcome {
        slope: report.fit.slope,
        predicted: report.theoretical_exponent,
        slope_pass: report.verdict.pass,
        transference_defect: defect,
        transference_pass,
        pass: report.verdict.pass && transference_pass,
        files: Vec::new(),
    };
    let mut outputs = Outputs::default();
    outputs.add(format!("{}_trace.csv", config.name), csv.into_bytes());
    outputs.json(format!("{}_trace.json", config.name), &header, &serde_json::json!({ "fit": report.fit, "verdict": report.verdict, "outcome": &outcome }))?;
    let files = outputs.commit(&output_dir(config, out))?;
    Ok(TraceOutcome { files, ..outcome })
}

/// One brute-force covering demo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyDemo {
    pub label: String,
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub p_domain: Option<f64>,
    pub p_codomain: Option<f64>,
    pub field: Field,
    pub bounds: EntropyBounds,
}

fn finite(p: f64) -> Option<f64> {
    p.is_finite().then_some(p)
}

/// Brute-force entropy brackets for a few small operators: `diag(1, 1/2)` on
/// `ℓ_∞`, `ℓ_2` and `ℓ_1`, and one seeded random complex 2×2 matrix.
/// Writes `<name>_entropy_lab.json`.
pub fn run_entropy_lab(config: &ExperimentConfig, out: Option<&Path>) -> Result<(Vec<EntropyDemo>, Vec<PathBuf>)> {
    let diag = faer::Mat::from_fn(2, 2, |i, j| Complex64::new(if i == j { [1.0, 0.5][i] } else { 0.0 }, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let random = faer::Mat::from_fn(2, 2, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let cases = [
        ("diag(1, 1/2) on l_inf", &diag, f64::INFINITY, Field::Real),
        ("diag(1, 1/2) on l_2", &diag, 2.0, Field::Real),
        ("diag(1, 1/2) on l_1", &diag, 1.0, Field::Real),
        ("random complex 2x2 on l_2", &random, 2.0, Field::Complex),
    ];
    let mut demos = Vec::new();
    for (label, m, p, field) in cases {
        let bounds = entropy_numbers_bruteforce(m, 4, p, p, field).map_err(Error::at(label))?;
        let matrix = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        demos.push(EntropyDemo { label: label.into(), matrix, p_domain: finite(p), p_codomain: finite(p), field, bounds });
    }
    let header = ArtifactHeader::new(config);
    let mut outputs = Outputs::default();
    outputs.json(format!("{}_entropy_lab.json", config.name), &header, &demos)?;
    let files = outputs.commit(&output_dir(config, out))?;
    Ok((demos, files))
}

/// Symbol-estimate validation and the Besov boundedness probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolOutcome {
    pub validation: ValidationReport,
    pub boundedness: BoundednessReport,
    pub pass: bool,
}

/// Seeded corpus of Gaussian wave packets on `grid`.
pub fn wave_packet_corpus(grid: &SpatialGrid, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    (0..count)
        .map(|_| {
            let modes: Vec<(Vec<f64>, f64, f64)> = (0..5)
                .map(|_| ((0..dim).map(|_| rng.random_range(-4.0..4.0)).collect(), rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3)))
                .collect();
            let width = rng.random_range(1.0..2.0);
            GridFunction::from_fn(grid, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let env = (-r2 / (2.0 * width * width)).exp();
                modes.iter().map(|(k, a, ph)| Complex64::from_polar(a * env, k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + ph)).sum()
            })
        })
        .collect()
}

/// Validates the configured symbol and probes `T_τ : B^{s}_p → B^{s−σ}_p`
/// on a seeded wave-packet corpus. Writes `<name>_symbol.json`.
pub fn run_validate_symbol(config: &ExperimentConfig, out: Option<&Path>) -> Result<SymbolOutcome> {
    let sym = config.symbol();
    let probes = config.analysis.probes.unwrap_or(ProbeSpec::new(16.0, 33, 3.0, 25));
    let validation = validate_symbol(&sym, &probes, 2).map_err(Error::at("symbol validation"))?;
    let g = config.analysis.grid;
    let grid = SpatialGrid::new(config.fractal.n, g.points, g.extent).map_err(Error::at("probe grid"))?;
    let corpus = wave_packet_corpus(&grid, 8, config.seed);
    let params = BesovParams::new(config.analysis.s, config.analysis.p, config.analysis.p);
    let boundedness = boundedness_probe(&sym, params, &corpus).map_err(Error::at("boundedness probe"))?;
    let outcome = SymbolOutcome { pass: validation.pass && boundedness.pass, validation, boundedness };
    let header = ArtifactHeader::new(config);
    let mut outputs = Outputs::default();
    outputs.json(format!("{}_symbol.json", config.name), &header, &outcome)?;
    outputs.commit(&output_dir(config, out))?;
    Ok(outcome)
}

/// Moduli of a spectrum with one entry multiplied, re-sorted; used for fault
/// injection.
pub fn corrupt_spectrum(spectrum: &Spectrum, k: usize, factor: f64) -> Vec<f64> {
    let mut m = spectrum.moduli();
    if let Some(v) = m.get_mut(k - 1) {
        *v *= factor;
    }
    m.sort_by(|a, b| b.total_cmp(a));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "schema_version": 1,
                "name": "unit",
                "fractal": { "n": 1, "m": 2, "r": 0.3333333333333333,
                             "translations": [[0.0], [0.6666666666666666]], "level": 7 },
                "analysis": { "s": 0.45, "p": 2.0, "operator": "nystrom" },
                "fit": { "window": { "lo": 10, "hi": 60 } },
                "audits": { "carl_corpus": 4, "composition_triples": 4, "entropy_triples": 2 },
                "seed": 11
            }"#,
        )
        .unwrap()
    }

    fn tempdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("fracspec-exp-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn load_time_gates() {
        let text = serde_json::to_string(&base()).unwrap();
        let bad_window = text.replace("\"s\":0.45", "\"s\":0.6");
        assert!(matches!(ExperimentConfig::from_json(&bad_window), Err(Error::WindowViolation(_))));
        let bad_key = text.replace("\"seed\"", "\"seeed\"");
        assert!(matches!(ExperimentConfig::from_json(&bad_key), Err(Error::Config(_))));
        let bad_version = text.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(ExperimentConfig::from_json(&bad_version), Err(Error::Config(_))));
        let galerkin = text.replace("\"nystrom\"", "\"galerkin\"");
        assert!(matches!(ExperimentConfig::from_json(&galerkin), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = base();
        let b = ExperimentConfig { output_dir: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), ExperimentConfig { seed: 12, ..a.clone() }.config_hash());
    }

    #[test]
    fn spectrum_run_is_reproducible() {
        let config = base();
        let (d1, d2) = (tempdir("a"), tempdir("b"));
        let r1 = run_spectrum(&config, Some(&d1)).unwrap();
        let r2 = run_spectrum(&config, Some(&d2)).unwrap();
        assert_eq!(r1.files.len(), 3);
        for (a, b) in r1.files.iter().zip(&r2.files) {
            let (x, y) = (fs::read(a).unwrap(), fs::read(b).unwrap());
            assert_eq!(x, y, "{}", a.display());
            assert!(String::from_utf8(x).unwrap().contains(&config.config_hash()));
        }
        let _ = fs::remove_dir_all(d1);
        let _ = fs::remove_dir_all(d2);
    }

    #[test]
    fn failed_runs_leave_no_files() {
        let config = base().at_level(2);
        let dir = tempdir("fail");
        let err = run_spectrum(&config, Some(&dir)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().starts_with("fitting the decay"));
        assert!(!dir.exists());
    }

    #[test]
    fn convergence_single_level_and_budget() {
        let dir = tempdir("conv");
        let t = run_convergence(&base(), &[6], Some(&dir)).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].delta.is_none());
        let err = run_convergence(&base(), &[6, 15], Some(&dir)).unwrap_err();
        assert!(err.to_string().contains("level 15"), "{err}");
        let _ = fs::remove_dir_all(dir);
    }

    #[test]
    fn empty_spectrum_is_a_vacuous_pass() {
        let entropy = estimate_sequence(&[0.0; 4], 8).unwrap();
        let (rep, _, warnings) = audit_spectrum(&[0.0; 4], &entropy).unwrap();
        assert!(rep.pass);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn audit_bundle_passes() {
        let bundle = compute_audits(&base()).unwrap();
        assert!(bundle.pass, "{bundle:?}");
        assert!(!bundle.spectrum_carl.theorem);
    }

    #[test]
    fn corrupted_spectrum_is_flagged() {
        let config = base();
        let measure = config.measure().unwrap();
        let spectrum = eigen_spectrum(&config.assemble(&measure).unwrap()).unwrap();
        let entropy = estimate_sequence(&spectrum.moduli(), 64).unwrap();
        let (clean, _, _) = audit_spectrum(&spectrum.moduli(), &entropy).unwrap();
        assert!(clean.pass);
        let (bad, _, _) = audit_spectrum(&corrupt_spectrum(&spectrum, 5, 2.0), &entropy).unwrap();
        assert!(!bad.pass, "{bad:?}");
    }
}
