//! The conjugate-side block norm computed two independent ways: as a convex
//! decomposition infimum and as a supremum of pairings over the primal unit
//! ball. The two routes sandwich the true norm from above and below.
//!
//! A block on a cube `Q` is a function supported on `Q` with
//! `||b||_{L^{p'}(l^{q'})} <= |Q|^{1/t - 1/p}`; the block norm of `g` is the
//! least `l^{r'}` coefficient cost over decompositions `g = sum lambda_Q b_Q`.
//! Splitting `g_Q = lambda_Q b_Q` turns the infimum into the convex program
//!
//! ```text
//! minimize ( sum_Q ( |Q|^{1/p - 1/t} ||g_Q||_{L^{p'}(l^{q'})} )^{r'} )^{1/r'}
//! subject to sum_Q g_Q = g,  supp g_Q in Q.
//! ```

mod dual;
mod primal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{lp_norm_global, lp_norm_on_cube, GridFunction};
use crate::lattice::{ancestor_at_scale, cells_of, covering_cube, CubeIndex, LatticeConfig};

pub use dual::dual_norm;

/// One decomposition entry: a nonnegative coefficient and a capacity-tight
/// block supported on its cube.
#[derive(Debug, Clone)]
pub struct BlockEntry {
    pub cube: CubeIndex,
    pub coefficient: f64,
    pub block: GridFunction,
}

/// A feasible block decomposition; its `l^{r'}` coefficient cost is an upper
/// bound for the block norm whenever the residual vanishes.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub entries: Vec<BlockEntry>,
    /// `L^{p'}(l^{q'})` norm of `g - sum coefficient * block`.
    pub residual_norm: f64,
}

impl BlockDecomposition {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            residual_norm: 0.0,
        }
    }

    /// `l^{r'}` norm of the coefficients.
    pub fn cost(&self, e: &ExponentSet) -> f64 {
        let rc = e.r_conj();
        self.entries
            .iter()
            .map(|entry| entry.coefficient.powf(rc))
            .sum::<f64>()
            .powf(1.0 / rc)
    }

    pub fn reconstruct(&self, config: LatticeConfig, components: usize) -> GridFunction {
        let mut out = GridFunction::zero(config, components);
        for entry in &self.entries {
            out = out
                .axpy(entry.coefficient, &entry.block)
                .expect("entries share the lattice");
        }
        out
    }

    /// Checks the support and capacity conditions of every entry.
    pub fn validate(&self, e: &ExponentSet) -> Result<()> {
        for entry in &self.entries {
            if entry.coefficient < 0.0 {
                return Err(Error::InvalidExponent(format!(
                    "negative coefficient {}",
                    entry.coefficient
                )));
            }
            let config = entry.block.config();
            let inside = cells_of(&entry.cube, config)?;
            let mut mask = vec![false; config.cell_count()];
            for cell in &inside {
                mask[*cell] = true;
            }
            for (cell, inside_cube) in mask.iter().enumerate() {
                if !inside_cube && entry.block.get(cell).iter().any(|&v| v != 0.0) {
                    return Err(Error::ShapeMismatch(format!(
                        "block leaks outside its cube at cell {cell}"
                    )));
                }
            }
            let capacity = entry.cube.volume_pow(e.primal_weight_exp());
            let norm = lp_norm_on_cube(&entry.block, &entry.cube, e.p_conj(), e.q_conj())?;
            if norm > capacity * (1.0 + 1e-9) {
                return Err(Error::ShapeMismatch(format!(
                    "capacity violated: {norm} > {capacity}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self, config: &LatticeConfig, components: usize) -> BlockDecompositionDoc {
        let entries = self
            .entries
            .iter()
            .map(|entry| {
                let cells = cells_of(&entry.cube, config).expect("entry cube in family");
                BlockEntryDoc {
                    j: entry.cube.scale,
                    m: entry.cube.corner.clone(),
                    lambda: entry.coefficient,
                    block_values: cells.iter().map(|&c| entry.block.get(c).to_vec()).collect(),
                }
            })
            .collect();
        BlockDecompositionDoc {
            n: config.dim,
            finest: config.finest,
            j_min: config.coarsest,
            d: components,
            residual_norm: self.residual_norm,
            entries,
        }
    }

    pub fn from_doc(doc: &BlockDecompositionDoc, periodic: bool) -> Result<Self> {
        let config = LatticeConfig::new(doc.n, doc.finest, doc.j_min, periodic)?;
        let mut entries = Vec::with_capacity(doc.entries.len());
        for e in &doc.entries {
            let cube = CubeIndex::new(e.j, e.m.clone());
            let cells = cells_of(&cube, &config)?;
            if cells.len() != e.block_values.len() {
                return Err(Error::ShapeMismatch(format!(
                    "entry on scale {} has {} cell rows, expected {}",
                    e.j,
                    e.block_values.len(),
                    cells.len()
                )));
            }
            let mut block = GridFunction::zero(config, doc.d);
            for (cell, row) in cells.iter().zip(&e.block_values) {
                if row.len() != doc.d {
                    return Err(Error::ShapeMismatch(format!(
                        "cell row with {} entries, expected d = {}",
                        row.len(),
                        doc.d
                    )));
                }
                block.set(*cell, row);
            }
            entries.push(BlockEntry {
                cube,
                coefficient: e.lambda,
                block,
            });
        }
        Ok(Self {
            entries,
            residual_norm: doc.residual_norm,
        })
    }

    pub fn to_json_string(&self, config: &LatticeConfig, components: usize) -> String {
        serde_json::to_string(&self.to_doc(config, components)).expect("decomposition serializes")
    }

    pub fn from_json_str(text: &str, periodic: bool) -> Result<Self> {
        let doc: BlockDecompositionDoc =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_doc(&doc, periodic)
    }
}

/// Wire format: entries are a JSON list of `{j, m, lambda, block_values}`
/// with `block_values` in ascending cell order within the cube.
#[derive(Debug, Serialize, Deserialize)]
pub struct BlockDecompositionDoc {
    pub n: usize,
    #[serde(rename = "J")]
    pub finest: i32,
    pub j_min: i32,
    pub d: usize,
    pub residual_norm: f64,
    pub entries: Vec<BlockEntryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BlockEntryDoc {
    pub j: i32,
    pub m: Vec<i64>,
    pub lambda: f64,
    pub block_values: Vec<Vec<f64>>,
}

/// A primal-ball witness certifying a lower bound for the block norm.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// Function with primal norm `<= 1 + 1e-9`.
    pub witness: GridFunction,
    /// `pairing(g, witness)`; always a valid lower bound.
    pub value: f64,
    /// False when the ascent stalled before meeting its tolerance.
    pub converged: bool,
}

/// Optimizer controls shared by both routes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative tolerance on the returned value.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Kept for reproducibility bookkeeping; both solvers are deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    40_000
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
            seed: 0,
        }
    }
}

/// Per-scale ancestor maps shared by the solvers.
pub(crate) struct ScaleMaps {
    pub levels: usize,
    pub cube_of: Vec<Vec<usize>>,
    pub cubes_at: Vec<usize>,
}

impl ScaleMaps {
    pub fn build(config: &LatticeConfig) -> Self {
        let levels = config.num_scales();
        let cells = config.cell_count();
        let mut cube_of = Vec::with_capacity(levels);
        let mut cubes_at = Vec::with_capacity(levels);
        for level in 0..levels {
            let scale = config.coarsest + level as i32;
            let extent = 1usize << level;
            let shift = (config.finest - scale) as u32;
            let mut ids = Vec::with_capacity(cells);
            for cell in 0..cells {
                let coords = config.cell_coords(cell);
                let id = coords
                    .iter()
                    .fold(0usize, |acc, &c| acc * extent + (c >> shift) as usize);
                ids.push(id);
            }
            cube_of.push(ids);
            cubes_at.push(extent.pow(config.dim as u32));
        }
        Self {
            levels,
            cube_of,
            cubes_at,
        }
    }
}

/// Decomposition-infimum route. Returns the optimal value together with the
/// splitting converted to `(lambda, block)` pairs; the residual vanishes by
/// construction. Fails with the best feasible value if the optimizer stalls.
pub fn block_norm(
    g: &GridFunction,
    e: &ExponentSet,
    opts: &SolveOptions,
) -> Result<(f64, BlockDecomposition)> {
    e.require_nontrivial()?;
    check_dims(g, e)?;
    primal::solve(g, e, opts)
}

fn check_dims(g: &GridFunction, e: &ExponentSet) -> Result<()> {
    if g.config().dim != e.dim() {
        return Err(Error::ShapeMismatch(format!(
            "lattice dimension {} vs exponent dimension {}",
            g.config().dim,
            e.dim()
        )));
    }
    Ok(())
}

/// Cheap upper bound: the one-block decomposition on the smallest covering
/// cube, `||g||_{L^{p'}(l^{q'})} * |Q|^{1/p - 1/t}` minimized over covering
/// cubes.
pub fn block_norm_upper(g: &GridFunction, e: &ExponentSet) -> Result<f64> {
    check_dims(g, e)?;
    let support = g.support_cells();
    let Some(smallest) = covering_cube(&support, g.config()) else {
        return Ok(0.0);
    };
    let norm = lp_norm_global(g, e.p_conj(), e.q_conj())?;
    let mut best = f64::INFINITY;
    for scale in g.config().coarsest..=smallest.scale {
        let cube = ancestor_at_scale(support[0], scale, g.config())?;
        best = best.min(norm * cube.volume_pow(e.dual_weight_exp()));
    }
    Ok(best)
}

/// Prunes the optimizer's splitting: entries with `lambda < tol * max lambda`
/// are merged into one extra block on their smallest covering cube. Falls
/// back to the unpruned decomposition if the merged entry violates capacity
/// or the pruned cost leaves the `(1 + tol)` band.
pub fn finite_decomposition(
    g: &GridFunction,
    e: &ExponentSet,
    tol: f64,
) -> Result<BlockDecomposition> {
    let opts = SolveOptions::default();
    let (value, full) = block_norm(g, e, &opts)?;
    if full.entries.is_empty() || tol <= 0.0 {
        return Ok(full);
    }
    let max_coeff = full
        .entries
        .iter()
        .map(|en| en.coefficient)
        .fold(0.0, f64::max);
    let threshold = tol * max_coeff;
    let (kept, pruned): (Vec<&BlockEntry>, Vec<&BlockEntry>) = full
        .entries
        .iter()
        .partition(|en| en.coefficient >= threshold);
    if pruned.is_empty() {
        return Ok(full);
    }

    // Tail absorption: the discarded mass forms one more block.
    let mut tail = GridFunction::zero(*g.config(), g.components());
    for entry in &pruned {
        tail = tail.axpy(entry.coefficient, &entry.block)?;
    }
    let mut entries: Vec<BlockEntry> = kept.into_iter().cloned().collect();
    if !tail.is_zero() {
        let cover =
            covering_cube(&tail.support_cells(), g.config()).expect("nonzero tail has support");
        let norm = lp_norm_on_cube(&tail, &cover, e.p_conj(), e.q_conj())?;
        let coefficient = cover.volume_pow(e.dual_weight_exp()) * norm;
        entries.push(BlockEntry {
            cube: cover,
            coefficient,
            block: tail.scale(1.0 / coefficient),
        });
    }
    let residual = g.sub(&reconstruct_from(&entries, g))?;
    let pruned_decomp = BlockDecomposition {
        entries,
        residual_norm: lp_norm_global(&residual, e.p_conj(), e.q_conj())?,
    };
    if pruned_decomp.validate(e).is_err() || pruned_decomp.cost(e) > (1.0 + tol) * value {
        return Ok(full);
    }
    Ok(pruned_decomp)
}

fn reconstruct_from(entries: &[BlockEntry], like: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zero(*like.config(), like.components());
    for entry in entries {
        out = out
            .axpy(entry.coefficient, &entry.block)
            .expect("same lattice");
    }
    out
}
