//! The individual checks. Each reduces its statement to per-instance
//! records `ratio <= bound`; instance ids replay deterministically through
//! [`replay_instance`].

use std::time::Instant;

use rayon::prelude::*;

use super::corpus::{corpus_function, mix, name_salt, single_block};
use super::{CheckResult, InstanceRecord, SuiteConfig};
use crate::block_norms::{block_norm, dual_norm, SolveOptions};
use crate::bm_norms::{bm_norm, bm_norm_raw, per_scale_bm};
use crate::error::Error;
use crate::exponents::{ExponentSet, OuterExp};
use crate::grid::{pairing, random_function, GridFunction};
use crate::lattice::LatticeConfig;
use crate::operators::{
    average_at_scale, convolve, maximal, translate_cells, KernelSpec, MaximalVariant,
};

fn std_exponents(dim: usize) -> ExponentSet {
    ExponentSet::new(dim, 1.5, 2.0, OuterExp::Finite(3.0), 2.0).expect("reference exponents")
}

fn lattice_cells8() -> LatticeConfig {
    LatticeConfig::new(1, 3, 0, false).expect("8-cell lattice")
}

fn lattice_cells16_periodic() -> LatticeConfig {
    LatticeConfig::new(1, 4, 0, true).expect("16-cell periodic lattice")
}

fn run_records<F>(ids: Vec<String>, compute: F) -> Vec<InstanceRecord>
where
    F: Fn(&str) -> InstanceRecord + Sync,
{
    ids.par_iter().map(|id| compute(id)).collect()
}

fn rand_ids(count: usize) -> impl Iterator<Item = String> {
    (0..count).map(|i| format!("rand:{i}"))
}

fn parse_rand(id: &str) -> Option<usize> {
    id.strip_prefix("rand:")?.parse().ok()
}

/// `a / b` with the convention that a vanishing denominator passes only if
/// the numerator vanishes too.
fn guarded_ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

// ---------------------------------------------------------------------------
// Duality gap
// ---------------------------------------------------------------------------

const DUALITY_GAP_BOUND: f64 = 1e-4;
const DUALITY_GAP_BOUND_CRAFTED: f64 = 1e-6;

fn duality_ids(cfg: &SuiteConfig) -> Vec<String> {
    let mut ids = vec!["crafted:zero".to_string()];
    ids.extend((0..4).map(|k| format!("crafted:cell{k}")));
    ids.extend(rand_ids(cfg.corpus_size));
    ids
}

fn duality_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let seed = mix(cfg.seed, name_salt("duality_gap"));
    let (g, bound) = if id == "crafted:zero" {
        (GridFunction::zero(config, 2), DUALITY_GAP_BOUND_CRAFTED)
    } else if let Some(k) = id.strip_prefix("crafted:cell") {
        let k: usize = k.parse().ok()?;
        let d = 1 + k % 4;
        let components: Vec<f64> = (0..d)
            .map(|i| 0.6 + 0.3 * (i as f64) - 0.2 * k as f64)
            .collect();
        let mut g = GridFunction::zero(config, d);
        g.set((2 * k + 1) % config.cell_count(), &components);
        (g, DUALITY_GAP_BOUND_CRAFTED)
    } else {
        let i = parse_rand(id)?;
        let d = 1 + i % 4;
        (corpus_function(seed, i, config, d, &e), DUALITY_GAP_BOUND)
    };
    if g.is_zero() {
        return Some(InstanceRecord::conclusive(id.to_string(), 0.0, bound));
    }
    let upper = match block_norm(&g, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { best_value, .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                best_value,
                bound,
            ))
        }
        Err(_) => return None,
    };
    let (lower, cert) = dual_norm(&g, &e, &cfg.solver).ok()?;
    if !cert.converged {
        return Some(InstanceRecord::inconclusive(
            id.to_string(),
            f64::NAN,
            bound,
        ));
    }
    if lower > upper * (1.0 + 1e-12) {
        // Weak duality itself violated; report the overshoot against a
        // machine-level allowance.
        return Some(InstanceRecord::conclusive(
            format!("{id}:order"),
            lower / upper - 1.0,
            1e-12,
        ));
    }
    let gap = (upper - lower) / upper;
    Some(InstanceRecord::conclusive(id.to_string(), gap, bound))
}

pub fn check_duality(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let records = run_records(duality_ids(cfg), |id| {
        duality_instance(cfg, id).expect("known duality instance")
    });
    CheckResult::assemble(
        "duality_gap",
        "pairing supremum <= decomposition infimum, relative gap <= 1e-4 after convergence",
        DUALITY_GAP_BOUND,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Pairing bound (Hoelder chain) and attainment
// ---------------------------------------------------------------------------

const PAIRING_BOUND: f64 = 1.0 + 1e-6;
const ATTAINMENT_BOUND: f64 = 1.0 / 0.999;

fn pairing_ids(cfg: &SuiteConfig) -> Vec<String> {
    let mut ids: Vec<String> = rand_ids(cfg.corpus_size).collect();
    ids.extend((0..4).map(|i| format!("crafted:attain{i}")));
    ids
}

fn pairing_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let seed = mix(cfg.seed, name_salt("pairing_holder"));
    if let Some(i) = id.strip_prefix("crafted:attain") {
        let i: usize = i.parse().ok()?;
        let g = corpus_function(mix(seed, 77), 3 * i, config, 3, &e);
        if g.is_zero() {
            return Some(InstanceRecord::conclusive(
                id.to_string(),
                0.0,
                ATTAINMENT_BOUND,
            ));
        }
        let upper = match block_norm(&g, &e, &cfg.solver) {
            Ok((value, _)) => value,
            Err(Error::NonConvergence { .. }) => {
                return Some(InstanceRecord::inconclusive(
                    id.to_string(),
                    f64::NAN,
                    ATTAINMENT_BOUND,
                ))
            }
            Err(_) => return None,
        };
        let (value, cert) = dual_norm(&g, &e, &cfg.solver).ok()?;
        if !cert.converged {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                ATTAINMENT_BOUND,
            ));
        }
        let witness_norm = bm_norm(&cert.witness, &e).ok()?;
        let ratio = guarded_ratio(upper * witness_norm, value);
        return Some(InstanceRecord::conclusive(
            id.to_string(),
            ratio,
            ATTAINMENT_BOUND,
        ));
    }
    let i = parse_rand(id)?;
    let g = corpus_function(seed, 2 * i, config, 3, &e);
    let f = corpus_function(mix(seed, 1), 2 * i + 1, config, 3, &e);
    let product = match block_norm(&g, &e, &cfg.solver) {
        Ok((value, _)) => value * bm_norm(&f, &e).ok()?,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                PAIRING_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let ratio = guarded_ratio(pairing(&g, &f).ok()?.abs(), product);
    Some(InstanceRecord::conclusive(
        id.to_string(),
        ratio,
        PAIRING_BOUND,
    ))
}

pub fn check_pairing(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let records = run_records(pairing_ids(cfg), |id| {
        pairing_instance(cfg, id).expect("known pairing instance")
    });
    CheckResult::assemble(
        "pairing_holder",
        "|pairing(g, f)| <= block(g) * primal(f) * (1 + 1e-6); dual witnesses attain >= 0.999",
        PAIRING_BOUND,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Translation bound
// ---------------------------------------------------------------------------

const SHIFT_BOUND: f64 = 1.0 + 1e-4;

fn translation_constant(cfg: &SuiteConfig, e: &ExponentSet) -> f64 {
    cfg.translation_constant_override
        .unwrap_or_else(|| e.translation_constant())
}

fn translation_ids(cfg: &SuiteConfig) -> Vec<String> {
    let mut ids = vec!["crafted:identity".to_string(), "crafted:block".to_string()];
    ids.extend(rand_ids(cfg.corpus_size / 2));
    ids
}

/// Worst coefficient-cost ratio over all cell shifts of one function.
fn worst_shift_ratio(
    f: &GridFunction,
    e: &ExponentSet,
    solver: &SolveOptions,
    constant: f64,
    shifts: &[i64],
) -> Result<f64, InstanceOutcome> {
    let base = match block_norm(f, e, solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => return Err(InstanceOutcome::Stalled),
        Err(_) => return Err(InstanceOutcome::Invalid),
    };
    if base == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for &shift in shifts {
        let moved = translate_cells(f, &[shift]).map_err(|_| InstanceOutcome::Invalid)?;
        let value = match block_norm(&moved, e, solver) {
            Ok((value, _)) => value,
            Err(Error::NonConvergence { .. }) => return Err(InstanceOutcome::Stalled),
            Err(_) => return Err(InstanceOutcome::Invalid),
        };
        worst = worst.max(value / (constant * base));
    }
    Ok(worst)
}

enum InstanceOutcome {
    Stalled,
    Invalid,
}

fn translation_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells16_periodic();
    let e = std_exponents(1);
    let constant = translation_constant(cfg, &e);
    let seed = mix(cfg.seed, name_salt("translation_bound"));
    let all_shifts: Vec<i64> = (1..config.cell_count() as i64).collect();
    let (f, shifts): (GridFunction, Vec<i64>) = match id {
        "crafted:identity" => (corpus_function(seed, 0, config, 2, &e), vec![0]),
        "crafted:block" => {
            // A block straddled across two same-scale cubes after the shift.
            (single_block(mix(seed, 5), config, 2, &e), all_shifts)
        }
        _ => {
            let i = parse_rand(id)?;
            (corpus_function(seed, i, config, 3, &e), all_shifts)
        }
    };
    if f.is_zero() {
        return Some(InstanceRecord::conclusive(id.to_string(), 0.0, SHIFT_BOUND));
    }
    match worst_shift_ratio(&f, &e, &cfg.solver, constant, &shifts) {
        Ok(ratio) => Some(InstanceRecord::conclusive(
            id.to_string(),
            ratio,
            SHIFT_BOUND,
        )),
        Err(InstanceOutcome::Stalled) => Some(InstanceRecord::inconclusive(
            id.to_string(),
            f64::NAN,
            SHIFT_BOUND,
        )),
        Err(InstanceOutcome::Invalid) => None,
    }
}

pub fn check_translation(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let e = std_exponents(1);
    let constant = translation_constant(cfg, &e);
    let records = run_records(translation_ids(cfg), |id| {
        translation_instance(cfg, id).expect("known translation instance")
    });
    CheckResult::assemble(
        "translation_bound",
        "block(shifted f) <= 2^{n/r'} * block(f) * (1 + 1e-4) for cell-aligned periodic shifts",
        constant,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Convolution bound
// ---------------------------------------------------------------------------

fn convolution_ids(cfg: &SuiteConfig) -> Vec<String> {
    let mut ids = vec!["crafted:dirac".to_string()];
    ids.extend(rand_ids(cfg.corpus_size / 2));
    ids
}

fn convolution_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells16_periodic();
    let e = std_exponents(1);
    let constant = translation_constant(cfg, &e);
    let seed = mix(cfg.seed, name_salt("convolution_bound"));

    if id == "crafted:dirac" {
        // Unit kernel: convolution must agree with translation exactly.
        let f = corpus_function(seed, 1, config, 2, &e);
        let kernel = KernelSpec::dirac(config, 3);
        let conv = convolve(&f, &kernel).ok()?;
        let shifted = translate_cells(&f, &[3]).ok()?;
        let diff = conv.sub(&shifted).ok()?;
        let drift = diff.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Some(InstanceRecord::conclusive(
            id.to_string(),
            guarded_ratio(drift, scale),
            1e-12,
        ));
    }

    let i = parse_rand(id)?;
    let f = corpus_function(seed, 2 * i, config, 3, &e);
    let kernel_fn = random_function(
        mix(seed, 1000 + i as u64),
        config,
        1,
        if i % 2 == 0 { 0.0 } else { 0.5 },
    );
    let kernel = KernelSpec::new(kernel_fn).ok()?;
    if f.is_zero() || kernel.l1_norm() == 0.0 {
        return Some(InstanceRecord::conclusive(id.to_string(), 0.0, SHIFT_BOUND));
    }
    let base = match block_norm(&f, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                SHIFT_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let conv = convolve(&f, &kernel).ok()?;
    let value = match block_norm(&conv, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                SHIFT_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let ratio = guarded_ratio(value, constant * kernel.l1_norm() * base);
    Some(InstanceRecord::conclusive(
        id.to_string(),
        ratio,
        SHIFT_BOUND,
    ))
}

pub fn check_convolution(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let e = std_exponents(1);
    let constant = translation_constant(cfg, &e);
    let records = run_records(convolution_ids(cfg), |id| {
        convolution_instance(cfg, id).expect("known convolution instance")
    });
    CheckResult::assemble(
        "convolution_bound",
        "block(f * k) <= 2^{n/r'} * |k|_{L^1} * block(f) * (1 + 1e-4) on the periodic lattice",
        constant,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Averaging operator: bound and convergence
// ---------------------------------------------------------------------------

const AVERAGING_BOUND: f64 = 1.0 + 1e-10;
const AVERAGING_MONOTONE_BOUND: f64 = 1.0 + 1e-12;

fn averaging_instance(cfg: &SuiteConfig, id: &str, convergence: bool) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let name = if convergence {
        "averaging_convergence"
    } else {
        "averaging_bound"
    };
    let seed = mix(cfg.seed, name_salt(name));
    let i = parse_rand(id)?;
    let f = corpus_function(seed, i, config, 3, &e);
    if f.is_zero() {
        let bound = if convergence {
            AVERAGING_MONOTONE_BOUND
        } else {
            AVERAGING_BOUND
        };
        return Some(InstanceRecord::conclusive(id.to_string(), 0.0, bound));
    }
    if convergence {
        // Residual norms must decrease in the averaging scale and vanish at
        // the finest scale.
        let mut previous = f64::INFINITY;
        let mut worst: f64 = 0.0;
        for scale in config.coarsest..=config.finest {
            let avg = average_at_scale(&f, scale).ok()?;
            let delta = bm_norm(&f.sub(&avg).ok()?, &e).ok()?;
            if previous.is_finite() {
                worst = worst.max(guarded_ratio(delta, previous));
            }
            if scale == config.finest && delta != 0.0 {
                return Some(InstanceRecord::conclusive(
                    format!("{id}:finest"),
                    f64::INFINITY,
                    AVERAGING_MONOTONE_BOUND,
                ));
            }
            previous = delta;
        }
        return Some(InstanceRecord::conclusive(
            id.to_string(),
            worst,
            AVERAGING_MONOTONE_BOUND,
        ));
    }
    let constant = e.averaging_constant()?;
    let base = bm_norm(&f, &e).ok()?;
    let mut worst: f64 = 0.0;
    for scale in config.coarsest..=config.finest {
        let avg = average_at_scale(&f, scale).ok()?;
        worst = worst.max(guarded_ratio(bm_norm(&avg, &e).ok()?, constant * base));
    }
    Some(InstanceRecord::conclusive(
        id.to_string(),
        worst,
        AVERAGING_BOUND,
    ))
}

pub fn check_averaging_bound(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let e = std_exponents(1);
    let ids: Vec<String> = rand_ids(cfg.corpus_size / 4).collect();
    let records = run_records(ids, |id| {
        averaging_instance(cfg, id, false).expect("known averaging instance")
    });
    CheckResult::assemble(
        "averaging_bound",
        "primal(scale average of f) <= (1 + sum_{i>=1} 2^{n r i (1/r - 1/t)})^{1/r} * primal(f)",
        e.averaging_constant().unwrap_or(f64::NAN),
        records,
        Vec::new(),
        started,
    )
}

pub fn check_averaging_convergence(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let ids: Vec<String> = rand_ids(cfg.corpus_size / 4).collect();
    let records = run_records(ids, |id| {
        averaging_instance(cfg, id, true).expect("known averaging instance")
    });
    CheckResult::assemble(
        "averaging_convergence",
        "primal(f - scale average) is non-increasing in the scale and zero at the finest",
        1.0,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Maximal operator stability under refinement
// ---------------------------------------------------------------------------

const MAXIMAL_EXPONENT_GRID: [(f64, f64, f64, f64); 6] = [
    (1.5, 2.0, 3.0, 3.0),
    (1.4, 1.9, 2.8, 3.5),
    (1.6, 2.1, 3.2, 2.8),
    (1.7, 2.3, 3.6, 2.2),
    (1.8, 2.4, 4.0, 2.5),
    (2.0, 2.6, 4.2, 2.0),
];
const MAXIMAL_DRIFT_BOUND: f64 = 1.1;
const MAXIMAL_CORPUS: usize = 4;

fn maximal_ids(cfg: &SuiteConfig) -> Vec<String> {
    if cfg.corpus_size == 0 {
        return Vec::new();
    }
    let mut ids = Vec::new();
    for point in 0..MAXIMAL_EXPONENT_GRID.len() {
        for eta_idx in 0..2 {
            for side in ["bm", "block"] {
                ids.push(format!("grid:{point}:eta:{eta_idx}:side:{side}"));
            }
        }
    }
    ids
}

fn maximal_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let mut parts = id.split(':');
    if parts.next()? != "grid" {
        return None;
    }
    let point: usize = parts.next()?.parse().ok()?;
    if parts.next()? != "eta" {
        return None;
    }
    let eta_idx: usize = parts.next()?.parse().ok()?;
    if parts.next()? != "side" {
        return None;
    }
    let side = parts.next()?;
    let (p, t, r, q) = *MAXIMAL_EXPONENT_GRID.get(point)?;
    let e = ExponentSet::new(1, p, t, OuterExp::Finite(r), q).ok()?;
    let eta = if eta_idx == 0 {
        1.0
    } else {
        (1.0 + e.p_conj().min(e.q_conj())) / 2.0
    };
    let seed = mix(cfg.seed, name_salt("maximal_stability")).wrapping_add(point as u64);
    let coarse = lattice_cells8();

    let corpus: Vec<GridFunction> = (0..MAXIMAL_CORPUS)
        .map(|i| corpus_function(seed, i, coarse, 3, &e))
        .filter(|f| !f.is_zero())
        .collect();
    let refined: Vec<GridFunction> = corpus.iter().map(GridFunction::refine).collect();

    let measure = |funcs: &[GridFunction]| -> Option<f64> {
        let mut worst: f64 = 0.0;
        for f in funcs {
            let image = maximal(f, MaximalVariant::Componentwise { eta }).ok()?;
            if side == "bm" {
                let config = f.config();
                for scale in config.coarsest..=config.finest {
                    let denom = per_scale_bm(f, &e, scale).ok()?;
                    if denom > 1e-12 {
                        worst = worst.max(per_scale_bm(&image, &e, scale).ok()? / denom);
                    }
                }
            } else {
                let denom = match block_norm(f, &e, &cfg.solver) {
                    Ok((value, _)) => value,
                    Err(_) => return None,
                };
                let numer = match block_norm(&image, &e, &cfg.solver) {
                    Ok((value, _)) => value,
                    Err(_) => return None,
                };
                if denom > 0.0 {
                    worst = worst.max(numer / denom);
                }
            }
        }
        Some(worst)
    };

    let Some(coarse_ratio) = measure(&corpus) else {
        return Some(InstanceRecord::inconclusive(
            id.to_string(),
            f64::NAN,
            MAXIMAL_DRIFT_BOUND,
        ));
    };
    let Some(fine_ratio) = measure(&refined) else {
        return Some(InstanceRecord::inconclusive(
            id.to_string(),
            f64::NAN,
            MAXIMAL_DRIFT_BOUND,
        ));
    };
    let drift = if coarse_ratio == 0.0 && fine_ratio == 0.0 {
        1.0
    } else {
        (fine_ratio / coarse_ratio).max(coarse_ratio / fine_ratio)
    };
    Some(InstanceRecord::conclusive(
        id.to_string(),
        drift,
        MAXIMAL_DRIFT_BOUND,
    ))
}

pub fn check_maximal_stability(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let records = run_records(maximal_ids(cfg), |id| {
        maximal_instance(cfg, id).expect("known maximal instance")
    });
    CheckResult::assemble(
        "maximal_stability",
        "per-scale and block-side maximal operator ratios drift <= 10% under one refinement",
        MAXIMAL_DRIFT_BOUND,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Lattice monotonicity
// ---------------------------------------------------------------------------

const MONOTONE_BOUND: f64 = 1.0 + 1e-5;

fn monotonicity_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let seed = mix(cfg.seed, name_salt("lattice_monotonicity"));
    let i = parse_rand(id)?;
    let raw = corpus_function(seed, i, config, 3, &e);
    if raw.is_zero() {
        return Some(InstanceRecord::conclusive(
            id.to_string(),
            0.0,
            MONOTONE_BOUND,
        ));
    }
    // Dominating envelope g = |raw| and a pointwise-dominated f.
    let g = GridFunction::from_values(config, 3, raw.values().iter().map(|v| v.abs()).collect())
        .ok()?;
    let damp = random_function(mix(seed, 400 + i as u64), config, 3, 0.0);
    let f = GridFunction::from_values(
        config,
        3,
        g.values()
            .iter()
            .zip(damp.values())
            .map(|(gv, s)| gv * (s / (1.0 + s.abs())))
            .collect(),
    )
    .ok()?;
    let dominated = match block_norm(&f, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                MONOTONE_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let dominating = match block_norm(&g, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                MONOTONE_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let ratio = guarded_ratio(dominated, dominating);
    Some(InstanceRecord::conclusive(
        id.to_string(),
        ratio,
        MONOTONE_BOUND,
    ))
}

pub fn check_lattice_monotonicity(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let ids: Vec<String> = rand_ids(cfg.corpus_size / 2).collect();
    let records = run_records(ids, |id| {
        monotonicity_instance(cfg, id).expect("known monotonicity instance")
    });
    CheckResult::assemble(
        "lattice_monotonicity",
        "componentwise |f_i| <= g_i implies block(f) <= block(g) within solver tolerance",
        1.0,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Fatou property along support truncations
// ---------------------------------------------------------------------------

const FATOU_BOUND: f64 = 1.0 + 1e-6;

fn fatou_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let seed = mix(cfg.seed, name_salt("fatou_truncation"));
    let i = parse_rand(id)?;
    let f = corpus_function(seed, i, config, 2, &e);
    if f.is_zero() {
        return Some(InstanceRecord::conclusive(id.to_string(), 0.0, FATOU_BOUND));
    }
    let cells = config.cell_count();
    let mut worst: f64 = 0.0;
    let mut previous: Option<f64> = None;
    let mut last = 0.0;
    for len in 1..=cells {
        let truncated = f.restrict_to_cells(&(0..len).collect::<Vec<_>>());
        let value = match block_norm(&truncated, &e, &cfg.solver) {
            Ok((value, _)) => value,
            Err(Error::NonConvergence { .. }) => {
                return Some(InstanceRecord::inconclusive(
                    id.to_string(),
                    f64::NAN,
                    FATOU_BOUND,
                ))
            }
            Err(_) => return None,
        };
        if let Some(prev) = previous {
            worst = worst.max(guarded_ratio(prev, value.max(f64::MIN_POSITIVE)));
        }
        previous = Some(value);
        last = value;
    }
    let full = match block_norm(&f, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                FATOU_BOUND,
            ))
        }
        Err(_) => return None,
    };
    worst = worst.max(guarded_ratio(full, last));
    Some(InstanceRecord::conclusive(
        id.to_string(),
        worst,
        FATOU_BOUND,
    ))
}

pub fn check_fatou(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let ids: Vec<String> = rand_ids(cfg.corpus_size / 4).collect();
    let records = run_records(ids, |id| {
        fatou_instance(cfg, id).expect("known fatou instance")
    });
    CheckResult::assemble(
        "fatou_truncation",
        "block norms of support truncations increase to the full norm (liminf inequality)",
        1.0,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Triangle inequality
// ---------------------------------------------------------------------------

const TRIANGLE_BOUND: f64 = 1.0 + 1e-5;

fn triangle_instance(cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    let config = lattice_cells8();
    let e = std_exponents(1);
    let seed = mix(cfg.seed, name_salt("triangle_inequality"));
    let i = parse_rand(id)?;
    let f = corpus_function(seed, 2 * i, config, 3, &e);
    let g = corpus_function(mix(seed, 2), 2 * i + 1, config, 3, &e);
    let mut parts = 0.0;
    for h in [&f, &g] {
        parts += match block_norm(h, &e, &cfg.solver) {
            Ok((value, _)) => value,
            Err(Error::NonConvergence { .. }) => {
                return Some(InstanceRecord::inconclusive(
                    id.to_string(),
                    f64::NAN,
                    TRIANGLE_BOUND,
                ))
            }
            Err(_) => return None,
        };
    }
    let total = match block_norm(&f.add(&g).ok()?, &e, &cfg.solver) {
        Ok((value, _)) => value,
        Err(Error::NonConvergence { .. }) => {
            return Some(InstanceRecord::inconclusive(
                id.to_string(),
                f64::NAN,
                TRIANGLE_BOUND,
            ))
        }
        Err(_) => return None,
    };
    let ratio = guarded_ratio(total, parts);
    Some(InstanceRecord::conclusive(
        id.to_string(),
        ratio,
        TRIANGLE_BOUND,
    ))
}

pub fn check_triangle(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let ids: Vec<String> = rand_ids(cfg.corpus_size / 4).collect();
    let records = run_records(ids, |id| {
        triangle_instance(cfg, id).expect("known triangle instance")
    });
    CheckResult::assemble(
        "triangle_inequality",
        "block(f + g) <= block(f) + block(g) within solver tolerance",
        1.0,
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Triviality trend
// ---------------------------------------------------------------------------

const TRIVIALITY_RATIO_TOLERANCE: f64 = 1e-3;
const TRIVIALITY_J_MAX: i32 = 12;

/// Partial cube-family norm of the unit-window indicator up to finest scale `finest`.
fn window_partial_norm(finest: i32, p: f64, t: f64, r: f64) -> f64 {
    let config = LatticeConfig::new(1, finest, 0, false).expect("triviality lattice");
    let f = GridFunction::window_indicator(config);
    bm_norm_raw(&f, p, t, OuterExp::Finite(r), 2.0).expect("partial norm")
}

fn triviality_instance(_cfg: &SuiteConfig, id: &str) -> Option<InstanceRecord> {
    match id {
        "crafted:geometric" => {
            // r > t: increments (in the r-th power domain) decay with ratio
            // 2^{n (1/r - 1/t)}.
            let (p, t, r) = (1.5, 2.0, 3.0);
            let target = f64::exp2(1.0 / r - 1.0 / t);
            let mut previous_norm = window_partial_norm(1, p, t, r);
            let mut previous_inc =
                (previous_norm.powf(r) - window_partial_norm(0, p, t, r).powf(r)).powf(1.0 / r);
            let mut worst_err: f64 = 0.0;
            for finest in 2..=TRIVIALITY_J_MAX {
                let norm = window_partial_norm(finest, p, t, r);
                let inc = (norm.powf(r) - previous_norm.powf(r)).powf(1.0 / r);
                worst_err = (inc / previous_inc - target).abs().max(0.0);
                previous_norm = norm;
                previous_inc = inc;
            }
            Some(InstanceRecord::conclusive(
                id.to_string(),
                worst_err,
                TRIVIALITY_RATIO_TOLERANCE,
            ))
        }
        "crafted:critical" => {
            // r = t: the per-scale contribution never drops below 0.9 of its
            // initial value, and partial norms grow without bound.
            let (p, t, r) = (1.5, 2.0, 2.0);
            let e = ExponentSet::new(1, p, t, OuterExp::Finite(r), 2.0).ok()?;
            let config = LatticeConfig::new(1, TRIVIALITY_J_MAX, 0, false).ok()?;
            let f = GridFunction::window_indicator(config);
            let initial = per_scale_bm(&f, &e, 0).ok()?;
            let mut worst: f64 = 0.0;
            for scale in 0..=TRIVIALITY_J_MAX {
                let c = per_scale_bm(&f, &e, scale).ok()?;
                worst = worst.max(guarded_ratio(0.9 * initial, c));
            }
            // Partial norms strictly increase.
            let mut prev = 0.0;
            for finest in 0..=6 {
                let value = window_partial_norm(finest, p, t, r);
                if value <= prev {
                    return Some(InstanceRecord::conclusive(
                        format!("{id}:monotone"),
                        f64::INFINITY,
                        1.0,
                    ));
                }
                prev = value;
            }
            Some(InstanceRecord::conclusive(id.to_string(), worst, 1.0))
        }
        "crafted:divergent" => {
            // r < t: per-scale contributions grow, so they certainly stay
            // above 0.9 of the initial one.
            let (p, t, r) = (1.5, 2.5, 2.0);
            let e = ExponentSet::new(1, p, t, OuterExp::Finite(r), 2.0).ok()?;
            let config = LatticeConfig::new(1, TRIVIALITY_J_MAX, 0, false).ok()?;
            let f = GridFunction::window_indicator(config);
            let initial = per_scale_bm(&f, &e, 0).ok()?;
            let mut worst: f64 = 0.0;
            for scale in 0..=TRIVIALITY_J_MAX {
                let c = per_scale_bm(&f, &e, scale).ok()?;
                worst = worst.max(guarded_ratio(0.9 * initial, c));
            }
            Some(InstanceRecord::conclusive(id.to_string(), worst, 1.0))
        }
        "crafted:coarse" => {
            // Fixed data, coarser windows: each added coarse scale contributes
            // less (exponent 1/t - 1/p is negative).
            let e = std_exponents(1);
            let mut previous = f64::INFINITY;
            let mut worst: f64 = 0.0;
            for coarsest in (-4..=0).rev() {
                let config = LatticeConfig::new(1, 2, coarsest, false).ok()?;
                let mut f = GridFunction::zero(config, 1);
                for cell in 0..4 {
                    f.set(cell, &[1.0]);
                }
                let term = per_scale_bm(&f, &e, coarsest).ok()?;
                if previous.is_finite() {
                    worst = worst.max(guarded_ratio(term, previous));
                }
                previous = term;
            }
            Some(InstanceRecord::conclusive(
                id.to_string(),
                worst,
                1.0 - 1e-6,
            ))
        }
        _ => None,
    }
}

pub fn check_triviality_trend(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let ids = vec![
        "crafted:geometric".to_string(),
        "crafted:critical".to_string(),
        "crafted:divergent".to_string(),
        "crafted:coarse".to_string(),
    ];
    let records = run_records(ids, |id| {
        triviality_instance(cfg, id).expect("known triviality instance")
    });
    CheckResult::assemble(
        "triviality_trend",
        "window-indicator increment ratios approach 2^{n (1/r - 1/t)} when r > t; \
         per-scale contributions stay bounded below when r = t",
        f64::exp2(1.0 / 3.0 - 0.5),
        records,
        Vec::new(),
        started,
    )
}

// ---------------------------------------------------------------------------
// Operator-bound aggregate and replay
// ---------------------------------------------------------------------------

/// Aggregate of the four operator statements (translation, convolution,
/// averaging, maximal); record ids are prefixed with their source check.
pub fn check_operator_bounds(cfg: &SuiteConfig) -> CheckResult {
    let started = Instant::now();
    let parts = [
        check_translation(cfg),
        check_convolution(cfg),
        check_averaging_bound(cfg),
        check_averaging_convergence(cfg),
        check_maximal_stability(cfg),
    ];
    let mut records = Vec::new();
    for part in &parts {
        for record in &part.records {
            records.push(InstanceRecord {
                instance: format!("{}/{}", part.name, record.instance),
                ..record.clone()
            });
        }
    }
    let e = std_exponents(1);
    CheckResult::assemble(
        "operator_bounds",
        "translation, convolution, averaging, and maximal statements combined",
        translation_constant(cfg, &e),
        records,
        Vec::new(),
        started,
    )
}

/// Recomputes one instance from its fingerprint `(check, instance)`.
pub fn replay_instance(cfg: &SuiteConfig, check: &str, instance: &str) -> Option<InstanceRecord> {
    match check {
        "duality_gap" => duality_instance(cfg, instance),
        "pairing_holder" => pairing_instance(cfg, instance),
        "translation_bound" => translation_instance(cfg, instance),
        "convolution_bound" => convolution_instance(cfg, instance),
        "averaging_bound" => averaging_instance(cfg, instance, false),
        "averaging_convergence" => averaging_instance(cfg, instance, true),
        "maximal_stability" => maximal_instance(cfg, instance),
        "lattice_monotonicity" => monotonicity_instance(cfg, instance),
        "fatou_truncation" => fatou_instance(cfg, instance),
        "triangle_inequality" => triangle_instance(cfg, instance),
        "triviality_trend" => triviality_instance(cfg, instance),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::CheckStatus;

    fn small_cfg() -> SuiteConfig {
        SuiteConfig {
            corpus_size: 6,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn triviality_trend_passes() {
        let result = check_triviality_trend(&small_cfg());
        assert_eq!(result.status, CheckStatus::Pass, "{result:?}");
    }

    #[test]
    fn duality_check_passes_on_small_corpus() {
        let result = check_duality(&small_cfg());
        assert_eq!(result.status, CheckStatus::Pass, "{result:?}");
    }

    #[test]
    fn tampered_translation_constant_fails() {
        let cfg = SuiteConfig {
            corpus_size: 4,
            translation_constant_override: Some(1.0),
            ..SuiteConfig::default()
        };
        let result = check_translation(&cfg);
        assert_eq!(
            result.status,
            CheckStatus::Fail,
            "negative control must trip"
        );
    }

    #[test]
    fn replay_reproduces_ratios() {
        let cfg = small_cfg();
        for (check, run) in [
            (
                "duality_gap",
                check_duality as fn(&SuiteConfig) -> CheckResult,
            ),
            ("pairing_holder", check_pairing),
            ("triviality_trend", check_triviality_trend),
        ] {
            let result = run(&cfg);
            for record in result.records.iter().take(3) {
                let replayed = replay_instance(&cfg, check, &record.instance)
                    .unwrap_or_else(|| panic!("replay {}/{}", check, record.instance));
                if record.ratio.is_finite() {
                    assert!(
                        (replayed.ratio - record.ratio).abs()
                            <= 1e-12 * record.ratio.abs().max(1.0),
                        "replay drift on {}/{}",
                        check,
                        record.instance
                    );
                }
            }
        }
    }

    #[test]
    fn operator_aggregate_merges_records() {
        let cfg = SuiteConfig {
            corpus_size: 2,
            ..SuiteConfig::default()
        };
        let result = check_operator_bounds(&cfg);
        assert!(result
            .records
            .iter()
            .any(|r| r.instance.starts_with("translation_bound/")));
        assert!(result
            .records
            .iter()
            .any(|r| r.instance.starts_with("maximal_stability/")));
    }
}
