//! Executable certification of the quantitative inequalities on seeded
//! random corpora and crafted instances.
//!
//! Every check reduces to records of the form `ratio <= bound`; optimizer
//! stalls are reported as `inconclusive`, never as mathematical failures.
//! Fixed seeds make reports reproducible byte for byte (runtimes aside), and
//! every failing instance carries a fingerprint that replays to the same
//! measured ratio.

mod checks;
mod corpus;

use serde::{Deserialize, Serialize};

use crate::block_norms::SolveOptions;

pub use checks::{
    check_averaging_bound, check_averaging_convergence, check_convolution, check_duality,
    check_fatou, check_lattice_monotonicity, check_maximal_stability, check_operator_bounds,
    check_pairing, check_translation, check_triangle, check_triviality_trend, replay_instance,
};
pub use corpus::corpus_function;

/// Check and per-instance outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Optimizer did not converge; no mathematical conclusion.
    Inconclusive,
}

/// One measured instance of a check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    /// Replayable fingerprint, e.g. `rand:17` or `crafted:dirac`.
    pub instance: String,
    pub ratio: f64,
    pub bound: f64,
    pub outcome: CheckStatus,
}

impl InstanceRecord {
    fn conclusive(instance: String, ratio: f64, bound: f64) -> Self {
        let outcome = if ratio <= bound {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            instance,
            ratio,
            bound,
            outcome,
        }
    }

    fn inconclusive(instance: String, ratio: f64, bound: f64) -> Self {
        Self {
            instance,
            ratio,
            bound,
            outcome: CheckStatus::Inconclusive,
        }
    }
}

/// Aggregated result of one named check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// The inequality being certified, with its constant spelled out.
    pub statement: String,
    pub status: CheckStatus,
    /// Bound constant in force (after any negative-control override).
    pub constant: f64,
    pub worst_ratio: f64,
    pub worst_instance: String,
    pub runtime_ms: u64,
    pub records: Vec<InstanceRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckResult {
    fn assemble(
        name: &str,
        statement: &str,
        constant: f64,
        records: Vec<InstanceRecord>,
        notes: Vec<String>,
        started: std::time::Instant,
    ) -> Self {
        let mut status = CheckStatus::Pass;
        for record in &records {
            match record.outcome {
                CheckStatus::Fail => {
                    status = CheckStatus::Fail;
                    break;
                }
                CheckStatus::Inconclusive => status = CheckStatus::Inconclusive,
                CheckStatus::Pass => {}
            }
        }
        let (worst_ratio, worst_instance) = records
            .iter()
            .filter(|r| r.ratio.is_finite())
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .map(|r| (r.ratio, r.instance.clone()))
            .unwrap_or((0.0, String::new()));
        Self {
            name: name.to_string(),
            statement: statement.to_string(),
            status,
            constant,
            worst_ratio,
            worst_instance,
            runtime_ms: started.elapsed().as_millis() as u64,
            records,
            notes,
        }
    }
}

/// Suite controls; defaults match the desk-scale certification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Size of the largest random corpora; checks specified at half size use
    /// `corpus_size / 2`. Zero leaves only crafted instances.
    #[serde(default = "default_corpus")]
    pub corpus_size: usize,
    #[serde(default)]
    pub solver: SolveOptions,
    /// Negative-control override for the translation/convolution constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_constant_override: Option<f64>,
    /// Run only the named checks when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_filter: Option<Vec<String>>,
    /// Cap on worker threads (`BMKIT_THREADS` in the command-line runner).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_seed() -> u64 {
    7
}

fn default_corpus() -> usize {
    100
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            corpus_size: default_corpus(),
            solver: SolveOptions::default(),
            translation_constant_override: None,
            check_filter: None,
            threads: None,
        }
    }
}

/// Serializable outcome of a whole suite run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn any_failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Fail)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.checks
            .iter()
            .any(|c| c.status == CheckStatus::Inconclusive)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Byte-stable form: runtimes zeroed, everything else untouched.
    pub fn to_canonical_json(&self) -> String {
        let mut copy = self.clone();
        for check in &mut copy.checks {
            check.runtime_ms = 0;
        }
        copy.to_json()
    }

    /// Flat rows `check,instance,ratio,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,instance,ratio,bound\n");
        for check in &self.checks {
            for record in &check.records {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    check.name, record.instance, record.ratio, record.bound
                ));
            }
        }
        out
    }
}

/// Names of all suite checks, in report order.
pub const CHECK_NAMES: [&str; 11] = [
    "averaging_bound",
    "averaging_convergence",
    "convolution_bound",
    "duality_gap",
    "fatou_truncation",
    "lattice_monotonicity",
    "maximal_stability",
    "pairing_holder",
    "translation_bound",
    "triangle_inequality",
    "triviality_trend",
];

fn check_by_name(name: &str) -> Option<fn(&SuiteConfig) -> CheckResult> {
    match name {
        "averaging_bound" => Some(check_averaging_bound),
        "averaging_convergence" => Some(check_averaging_convergence),
        "convolution_bound" => Some(check_convolution),
        "duality_gap" => Some(check_duality),
        "fatou_truncation" => Some(check_fatou),
        "lattice_monotonicity" => Some(check_lattice_monotonicity),
        "maximal_stability" => Some(check_maximal_stability),
        "pairing_holder" => Some(check_pairing),
        "translation_bound" => Some(check_translation),
        "triangle_inequality" => Some(check_triangle),
        "triviality_trend" => Some(check_triviality_trend),
        _ => None,
    }
}

/// Runs the configured checks; the report is sorted by check name so the
/// merge is order-independent.
pub fn run_suite(config: &SuiteConfig) -> VerificationReport {
    // Filter entries match whole names or prefixes ("duality" selects
    // "duality_gap").
    let selected: Vec<&str> = CHECK_NAMES
        .iter()
        .copied()
        .filter(|name| {
            config
                .check_filter
                .as_ref()
                .map(|list| list.iter().any(|x| name.starts_with(x.as_str())))
                .unwrap_or(true)
        })
        .collect();

    let threads = config
        .threads
        .unwrap_or_else(|| selected.len().max(1))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.min(selected.len().max(1)))
        .build()
        .expect("thread pool");

    let mut checks: Vec<CheckResult> = pool.install(|| {
        use rayon::prelude::*;
        selected
            .par_iter()
            .map(|name| (check_by_name(name).expect("known check"))(config))
            .collect()
    });
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    VerificationReport {
        schema_version: 1,
        seed: config.seed,
        checks,
    }
}
