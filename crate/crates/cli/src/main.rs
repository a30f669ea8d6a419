//! Command-line front end. Every number printed here is produced by a
//! library call; the binary only parses configuration, moves files, and
//! formats output.
//!
//! Exit codes: 0 all good, 1 verification failure, 2 inconclusive-only,
//! 64 usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bmkit::block_norms::{block_norm, dual_norm, finite_decomposition, SolveOptions};
use bmkit::bm_norms::{bm_norm, bm_norm_raw, continuous_char_estimate, slice_norm, CubeTermTable};
use bmkit::exponents::OuterExp;
use bmkit::verifier::{run_suite, CheckStatus, SuiteConfig};
use bmkit::{ExponentSet, GridFunction, LatticeConfig};

const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "bmkit",
    version,
    about = "Dyadic-lattice Bourgain-Morrey norms, block norms, and their verification suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one norm of a grid-function file.
    Norm {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Grid-function JSON document.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        which: WhichNorm,
        /// Scales for `--which slice`; defaults to every family scale.
        #[arg(long)]
        scale: Vec<i32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for value and certificate files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute and export a pruned block decomposition.
    Decompose {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Coefficients below `prune_tol * max` merge into one tail block.
        #[arg(long, default_value_t = 1e-3)]
        prune_tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite and write report files.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated subset of check names.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Negative-control override of the translation constant 2^{n/r'}.
        #[arg(long, hide = true)]
        debug_translation_constant: Option<f64>,
    },
    /// Emit experiment tables as CSV.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: ExperimentKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichNorm {
    Bm,
    Block,
    Dual,
    Slice,
    ContChar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Triviality,
    RefinementStability,
}

// ---------------------------------------------------------------------------
// Configuration file
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default = "default_lattice")]
    lattice: LatticeConfig,
    #[serde(default)]
    exponents: ExponentsConfig,
    #[serde(default)]
    solver: SolveOptions,
    #[serde(default)]
    corpus: CorpusConfig,
    #[serde(default)]
    output: OutputConfig,
    /// Ball-center density for the sampled continuous characterization.
    #[serde(default = "default_samples")]
    cont_char_samples: usize,
}

fn default_lattice() -> LatticeConfig {
    LatticeConfig::new(1, 3, 0, true).expect("default lattice")
}

fn default_samples() -> usize {
    4
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lattice: default_lattice(),
            exponents: ExponentsConfig::default(),
            solver: SolveOptions::default(),
            corpus: CorpusConfig::default(),
            output: OutputConfig::default(),
            cont_char_samples: default_samples(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentsConfig {
    p: f64,
    t: f64,
    /// A number or the string "inf".
    r: serde_json::Value,
    q: f64,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default = "default_components")]
    d: usize,
}

fn default_components() -> usize {
    4
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            t: 2.0,
            r: serde_json::json!(3.0),
            q: 2.0,
            eta: None,
            d: default_components(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusConfig {
    #[serde(default = "default_corpus_size")]
    size: usize,
    #[serde(default = "default_distribution")]
    distribution: String,
    #[serde(default = "default_sparsity")]
    sparsity: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            size: default_corpus_size(),
            distribution: default_distribution(),
            sparsity: default_sparsity(),
        }
    }
}

fn default_corpus_size() -> usize {
    100
}

fn default_distribution() -> String {
    "mixed".to_string()
}

fn default_sparsity() -> f64 {
    0.5
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    #[serde(default)]
    dir: Option<PathBuf>,
}

struct Usage(String);

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self, Usage> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Usage(format!("malformed config {}: {e}", path.display())))
    }

    fn exponent_set(&self) -> Result<ExponentSet, Usage> {
        let r = match &self.exponents.r {
            serde_json::Value::Number(x) => OuterExp::Finite(
                x.as_f64()
                    .ok_or_else(|| Usage("exponent r is not a number".into()))?,
            ),
            serde_json::Value::String(s) if s == "inf" || s == "infinity" => OuterExp::Infinite,
            other => {
                return Err(Usage(format!(
                    "exponent r must be a number or \"inf\", got {other}"
                )))
            }
        };
        let e = ExponentSet::new(
            self.lattice.dim,
            self.exponents.p,
            self.exponents.t,
            r,
            self.exponents.q,
        )
        .map_err(|e| Usage(e.to_string()))?;
        match self.exponents.eta {
            Some(eta) => e.with_eta(eta).map_err(|e| Usage(e.to_string())),
            None => Ok(e),
        }
    }

    /// Norm and decomposition commands work in the nontrivial regime only.
    fn nontrivial_exponent_set(&self) -> Result<ExponentSet, Usage> {
        let e = self.exponent_set()?;
        e.require_nontrivial()
            .map_err(|err| Usage(err.to_string()))?;
        Ok(e)
    }

    fn load_input(&self, path: &Path) -> Result<GridFunction, Usage> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Usage(format!("cannot read input {}: {e}", path.display())))?;
        let f = GridFunction::from_json_str(&text, self.lattice.periodic)
            .map_err(|e| Usage(format!("malformed grid function {}: {e}", path.display())))?;
        if *f.config() != self.lattice {
            return Err(Usage(format!(
                "input lattice {:?} does not match configured lattice {:?}",
                f.config(),
                self.lattice
            )));
        }
        if f.components() != self.exponents.d {
            return Err(Usage(format!(
                "input has d = {}, configuration expects d = {}",
                f.components(),
                self.exponents.d
            )));
        }
        Ok(f)
    }
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Writes through a temp file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Usage> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut temp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Usage(format!("cannot create temp file: {e}")))?;
    temp.write_all(contents.as_bytes())
        .map_err(|e| Usage(format!("cannot write {}: {e}", path.display())))?;
    temp.persist(path)
        .map_err(|e| Usage(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| config.output.dir.clone())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_norm(
    config: Option<PathBuf>,
    input: PathBuf,
    which: WhichNorm,
    scales: Vec<i32>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8, Usage> {
    let mut run = RunConfig::load(config.as_deref())?;
    if let Some(seed) = seed {
        run.solver.seed = seed;
    }
    let e = run.nontrivial_exponent_set()?;
    let f = run.load_input(&input)?;
    let out = out_dir(out, &run);
    let mut document = serde_json::Map::new();

    match which {
        WhichNorm::Bm => {
            let value = bm_norm(&f, &e).map_err(|e| Usage(e.to_string()))?;
            println!("{value}");
            document.insert("which".into(), "bm".into());
            document.insert("value".into(), value.into());
            if let Some(dir) = &out {
                let table =
                    CubeTermTable::for_exponents(&f, &e).map_err(|e| Usage(e.to_string()))?;
                write_atomic(&dir.join("cube_terms.csv"), &table.to_csv())?;
            }
        }
        WhichNorm::Block => {
            let (value, decomposition) =
                block_norm(&f, &e, &run.solver).map_err(|e| Usage(e.to_string()))?;
            println!("{value}");
            document.insert("which".into(), "block".into());
            document.insert("value".into(), value.into());
            if let Some(dir) = &out {
                write_atomic(
                    &dir.join("block_certificate.json"),
                    &decomposition.to_json_string(f.config(), f.components()),
                )?;
            }
        }
        WhichNorm::Dual => {
            let (value, certificate) =
                dual_norm(&f, &e, &run.solver).map_err(|e| Usage(e.to_string()))?;
            println!("{value}");
            document.insert("which".into(), "dual".into());
            document.insert("value".into(), value.into());
            document.insert("converged".into(), certificate.converged.into());
            if let Some(dir) = &out {
                let witness = serde_json::json!({
                    "value": certificate.value,
                    "converged": certificate.converged,
                    "witness": serde_json::from_str::<serde_json::Value>(
                        &certificate.witness.to_json_string()
                    )
                    .expect("witness serializes"),
                });
                write_atomic(
                    &dir.join("dual_certificate.json"),
                    &serde_json::to_string_pretty(&witness).expect("certificate serializes"),
                )?;
            }
        }
        WhichNorm::Slice => {
            let scales = if scales.is_empty() {
                (run.lattice.coarsest..=run.lattice.finest).collect()
            } else {
                scales
            };
            let mut map = serde_json::Map::new();
            for scale in scales {
                let value = slice_norm(&f, &e, scale).map_err(|e| Usage(e.to_string()))?;
                println!("{scale} {value}");
                map.insert(scale.to_string(), value.into());
            }
            document.insert("which".into(), "slice".into());
            document.insert("values".into(), map.into());
        }
        WhichNorm::ContChar => {
            let value = continuous_char_estimate(&f, &e, run.cont_char_samples)
                .map_err(|e| Usage(e.to_string()))?;
            println!("{value}");
            document.insert("which".into(), "cont_char".into());
            document.insert("value".into(), value.into());
        }
    }
    if let Some(dir) = &out {
        let name = format!(
            "norm_{}.json",
            document["which"].as_str().expect("which set")
        );
        write_atomic(
            &dir.join(name),
            &serde_json::to_string_pretty(&document).expect("document serializes"),
        )?;
    }
    Ok(0)
}

fn cmd_decompose(
    config: Option<PathBuf>,
    input: PathBuf,
    prune_tol: f64,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8, Usage> {
    let mut run = RunConfig::load(config.as_deref())?;
    if let Some(seed) = seed {
        run.solver.seed = seed;
    }
    let e = run.nontrivial_exponent_set()?;
    let f = run.load_input(&input)?;
    let decomposition =
        finite_decomposition(&f, &e, prune_tol).map_err(|e| Usage(e.to_string()))?;
    println!("{}", decomposition.cost(&e));
    if let Some(dir) = out_dir(out, &run) {
        write_atomic(
            &dir.join("decomposition.json"),
            &decomposition.to_json_string(f.config(), f.components()),
        )?;
    }
    Ok(0)
}

fn cmd_verify(
    config: Option<PathBuf>,
    checks: Option<Vec<String>>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    tamper: Option<f64>,
) -> Result<u8, Usage> {
    let run = RunConfig::load(config.as_deref())?;
    // Exponent-rule validation happens before any computation.
    run.exponent_set()?;
    let threads = std::env::var("BMKIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let suite = SuiteConfig {
        seed: seed.unwrap_or(run.solver.seed),
        corpus_size: run.corpus.size,
        solver: run.solver,
        translation_constant_override: tamper,
        check_filter: checks,
        threads,
    };
    let report = run_suite(&suite);
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Inconclusive => "INCONCLUSIVE",
        };
        println!(
            "{status:12} {:24} worst {:.6e} vs bound {:.6e} ({} ms)",
            check.name, check.worst_ratio, check.constant, check.runtime_ms
        );
    }
    if let Some(dir) = out_dir(out, &run) {
        write_atomic(&dir.join("report.json"), &report.to_json())?;
        write_atomic(&dir.join("report.csv"), &report.to_csv())?;
    }
    if report.any_failed() {
        Ok(EXIT_FAIL)
    } else if report.any_inconclusive() {
        Ok(EXIT_INCONCLUSIVE)
    } else {
        Ok(0)
    }
}

fn cmd_experiment(
    config: Option<PathBuf>,
    kind: ExperimentKind,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<u8, Usage> {
    let mut run = RunConfig::load(config.as_deref())?;
    if let Some(seed) = seed {
        run.solver.seed = seed;
    }
    let (name, csv) = match kind {
        ExperimentKind::Triviality => ("triviality", triviality_table(&run)?),
        ExperimentKind::RefinementStability => ("refinement_stability", refinement_table(&run)?),
    };
    print!("{csv}");
    if let Some(dir) = out_dir(out, &run) {
        write_atomic(&dir.join(format!("experiment_{name}.csv")), &csv)?;
    }
    Ok(0)
}

/// Partial norms of the window indicator as the finest scale grows; the
/// increment column isolates each new scale's contribution.
fn triviality_table(run: &RunConfig) -> Result<String, Usage> {
    let e = run.exponent_set()?;
    let r = match e.r() {
        OuterExp::Finite(r) => r,
        OuterExp::Infinite => return Err(Usage("triviality experiment needs finite r".into())),
    };
    let dim = run.lattice.dim;
    let j_max = 12;
    let mut csv = String::from("J,partial_norm,increment,increment_ratio\n");
    let mut previous_norm: Option<f64> = None;
    let mut previous_increment: Option<f64> = None;
    for finest in 0..=j_max {
        // Keep the whole-family norm cost at desk scale in two dimensions.
        if finest as usize * dim > 16 {
            break;
        }
        let config = LatticeConfig::new(dim, finest, 0, false).map_err(|e| Usage(e.to_string()))?;
        let f = GridFunction::window_indicator(config);
        let norm = bm_norm_raw(&f, e.p(), e.t(), e.r(), e.q()).map_err(|e| Usage(e.to_string()))?;
        let increment =
            previous_norm.map(|prev| (norm.powf(r) - prev.powf(r)).max(0.0).powf(1.0 / r));
        let ratio = match (increment, previous_increment) {
            (Some(inc), Some(prev)) if prev > 0.0 => format!("{}", inc / prev),
            _ => String::new(),
        };
        csv.push_str(&format!(
            "{finest},{norm},{},{ratio}\n",
            increment.map(|i| i.to_string()).unwrap_or_default()
        ));
        previous_norm = Some(norm);
        previous_increment = increment.or(previous_increment);
    }
    Ok(csv)
}

/// Refinement drift of the maximal-operator ratios, via the suite check.
fn refinement_table(run: &RunConfig) -> Result<String, Usage> {
    let suite = SuiteConfig {
        seed: run.solver.seed,
        corpus_size: run.corpus.size.max(1),
        solver: run.solver,
        translation_constant_override: None,
        check_filter: None,
        threads: None,
    };
    let check = bmkit::verifier::check_maximal_stability(&suite);
    let mut csv = String::from("instance,drift,bound\n");
    for record in &check.records {
        csv.push_str(&format!(
            "{},{},{}\n",
            record.instance, record.ratio, record.bound
        ));
    }
    Ok(csv)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Norm {
            config,
            input,
            which,
            scale,
            seed,
            out,
        } => cmd_norm(config, input, which, scale, seed, out),
        Command::Decompose {
            config,
            input,
            prune_tol,
            seed,
            out,
        } => cmd_decompose(config, input, prune_tol, seed, out),
        Command::Verify {
            config,
            checks,
            seed,
            out,
            debug_translation_constant,
        } => cmd_verify(config, checks, seed, out, debug_translation_constant),
        Command::Experiment {
            config,
            kind,
            seed,
            out,
        } => cmd_experiment(config, kind, seed, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Usage(message)) => {
            eprintln!("bmkit: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
