//! `fracspec` command-line driver.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 for
//! configuration errors and 3 for numerical errors. With several configs the
//! largest status wins.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use fracspec::experiment::{
    run_audits, run_convergence, run_entropy_lab, run_spectrum, run_trace_snumbers, run_validate_symbol, ExperimentConfig,
};
use fracspec::Error;

#[derive(Parser)]
#[command(name = "fracspec", version, about = "Spectra of fractal pseudodifferential operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config; repeat to run several.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configs to run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Slope tolerance, overriding the config.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue decay of the configured operator.
    Spectrum(Common),
    /// Slopes and leading eigenvalues over a range of levels.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Levels to run, overriding the config.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
    },
    /// Carl, composition, duality and entropy-ideal audits.
    Audits(Common),
    /// Approximation numbers of the trace and the transference identity.
    TraceSnumbers(Common),
    /// Brute-force covering demos.
    EntropyLab(Common),
    /// Symbol estimates and the Besov boundedness probe.
    ValidateSymbol(Common),
}

/// Verdict of one config: `Ok(true)` pass, `Ok(false)` fail.
fn run_one(command: &Command, path: &Path, common: &Common) -> Result<(bool, String), Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(t) = common.tolerance {
        if !(t > 0.0) {
            return Err(Error::Config(format!("--tolerance {t} must be positive")));
        }
        config.fit.tolerance = t;
    }
    let out = common.out.as_deref();
    let name = config.name.clone();
    Ok(match command {
        Command::Spectrum(_) => {
            let r = run_spectrum(&config, out)?.report;
            let line = format!(
                "{name}: slope {:.5} over [{}, {}], predicted {:.5}, tolerance {} ({:?})",
                r.fit.slope, r.fit.window[0], r.fit.window[1], r.theoretical_exponent, r.verdict.tolerance, r.verdict.comparison
            );
            (r.verdict.pass, line)
        }
        Command::Convergence { levels, .. } => {
            let levels = if levels.is_empty() { config.convergence_levels.clone() } else { levels.clone() };
            let t = run_convergence(&config, &levels, out)?;
            let slopes: Vec<String> = t.rows.iter().map(|r| format!("L{}={:.5}", r.level, r.slope)).collect();
            (t.stabilizing, format!("{name}: {}; stabilizing {}", slopes.join(" "), t.stabilizing))
        }
        Command::Audits(_) => {
            let (b, _) = run_audits(&config, out)?;
            let failed: Vec<&str> = std::iter::once(&b.spectrum_carl)
                .chain(std::iter::once(&b.carl_corpus))
                .chain(&b.composition)
                .filter(|r| !r.pass)
                .map(|r| r.check.as_str())
                .collect();
            let mut line = format!("{name}: audits {}", if failed.is_empty() { "pass".to_string() } else { format!("failed: {}", failed.join(", ")) });
            for w in &b.warnings {
                line.push_str(&format!("\nwarning: {w}"));
            }
            (b.pass, line)
        }
        Command::TraceSnumbers(_) => {
            let t = run_trace_snumbers(&config, out)?;
            let line = format!(
                "{name}: a_k slope {:.5}, predicted {:.5}; transference defect {:.3e}",
                t.slope, t.predicted, t.transference_defect
            );
            (t.pass, line)
        }
        Command::EntropyLab(_) => {
            let (demos, _) = run_entropy_lab(&config, out)?;
            let lines: Vec<String> = demos
                .iter()
                .map(|d| {
                    let pairs: Vec<String> =
                        (1..=d.bounds.upper.len()).map(|k| format!("e_{k} in [{:.4}, {:.4}]", d.bounds.lower.get(k), d.bounds.upper.get(k))).collect();
                    format!("{name}: {}: {}", d.label, pairs.join(", "))
                })
                .collect();
            (true, lines.join("\n"))
        }
        Command::ValidateSymbol(_) => {
            let o = run_validate_symbol(&config, out)?;
            let line = format!(
                "{name}: symbol {} estimates {}, boundedness max ratio {:?}",
                o.validation.symbol,
                if o.validation.pass { "stable" } else { "unstable" },
                o.boundedness.max_ratio
            );
            (o.pass, line)
        }
    })
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Spectrum(c) | Command::Audits(c) | Command::TraceSnumbers(c) | Command::EntropyLab(c) | Command::ValidateSymbol(c) => c,
        Command::Convergence { common, .. } => common,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = common(&cli.command);
    let next = AtomicUsize::new(0);
    let status = Mutex::new(vec![0u8; common.config.len()]);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(path) = common.config.get(i) else { break };
        let code = match run_one(&cli.command, path, common) {
            Ok((pass, line)) => {
                println!("{line}");
                println!("{}: {}", path.display(), if pass { "PASS" } else { "FAIL" });
                u8::from(!pass)
            }
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                e.exit_code() as u8
            }
        };
        status.lock().expect("status lock")[i] = code;
    };
    std::thread::scope(|s| {
        for _ in 0..common.jobs.clamp(1, common.config.len()) {
            s.spawn(worker);
        }
    });
    let worst = status.into_inner().expect("status lock").into_iter().max().unwrap_or(0);
    ExitCode::from(worst)
}
