//! Seeded instance generation: a mixture of dense Gaussian fields, sparse
//! spikes, and capacity-tight single blocks, so both spread and concentrated
//! extremal profiles are exercised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exponents::ExponentSet;
use crate::grid::{lp_norm_on_cube, random_function, GridFunction};
use crate::lattice::{cells_of, enumerate_cubes, LatticeConfig};

/// SplitMix64 step, used to derive per-instance seeds.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over a check name, for stable per-check seed derivation.
pub(crate) fn name_salt(name: &str) -> u64 {
    let mut hash = 0xCBF2_9CE4_8422_2325u64;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Deterministic corpus member `idx`: index 0 mod 3 is dense Gaussian,
/// 1 mod 3 a sparse spike field, 2 mod 3 a capacity-tight single block.
pub fn corpus_function(
    seed: u64,
    idx: usize,
    config: LatticeConfig,
    components: usize,
    e: &ExponentSet,
) -> GridFunction {
    let instance_seed = mix(seed, idx as u64);
    match idx % 3 {
        0 => random_function(instance_seed, config, components, 0.0),
        1 => random_function(instance_seed, config, components, 0.75).scale(3.0),
        _ => single_block(instance_seed, config, components, e),
    }
}

/// A function supported on one random family cube, normalized so its
/// conjugate-side local norm meets the capacity bound exactly.
pub fn single_block(
    seed: u64,
    config: LatticeConfig,
    components: usize,
    e: &ExponentSet,
) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cubes = enumerate_cubes(&config);
    let cube = cubes[rng.random_range(0..cubes.len())].clone();
    let cells = cells_of(&cube, &config).expect("enumerated cube");
    let raw = random_function(mix(seed, 1), config, components, 0.0).restrict_to_cells(&cells);
    let norm = lp_norm_on_cube(&raw, &cube, e.p_conj(), e.q_conj()).expect("cube in family");
    if norm == 0.0 {
        return raw;
    }
    raw.scale(cube.volume_pow(e.primal_weight_exp()) / norm)
}
