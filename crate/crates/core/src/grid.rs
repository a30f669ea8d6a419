//! Vector-valued piecewise-constant functions on the finest cells, the
//! sequence-space value norms, local `L^p` norms, and the duality pairing.
//!
//! Because functions are constant on cells, every integral below is a finite
//! sum with no quadrature error; accumulation order is fixed (cell-index
//! ascending) for reproducibility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{cells_of, CubeIndex, LatticeConfig};

/// A function taking a `components`-vector value on each finest cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    config: LatticeConfig,
    components: usize,
    /// Cell-major storage: `values[cell * components + i]`.
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zero(config: LatticeConfig, components: usize) -> Self {
        Self {
            config,
            components,
            values: vec![0.0; config.cell_count() * components],
        }
    }

    pub fn from_values(config: LatticeConfig, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::ShapeMismatch("need at least one component".into()));
        }
        if values.len() != config.cell_count() * components {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                config.cell_count() * components,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid value {bad}")));
        }
        Ok(Self {
            config,
            components,
            values,
        })
    }

    /// Constant function with the same vector value on every cell.
    pub fn constant(config: LatticeConfig, value: &[f64]) -> Result<Self> {
        let mut f = Self::zero(config, value.len().max(1));
        if value.is_empty() {
            return Err(Error::ShapeMismatch("need at least one component".into()));
        }
        for cell in 0..config.cell_count() {
            f.set(cell, value);
        }
        Ok(f)
    }

    /// Scalar indicator of the whole window.
    pub fn window_indicator(config: LatticeConfig) -> Self {
        Self::constant(config, &[1.0]).expect("one component")
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn cell_count(&self) -> usize {
        self.config.cell_count()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.components..(cell + 1) * self.components]
    }

    pub fn set(&mut self, cell: usize, value: &[f64]) {
        self.values[cell * self.components..(cell + 1) * self.components].copy_from_slice(value);
    }

    pub fn same_shape(&self, other: &GridFunction) -> bool {
        self.config == other.config && self.components == other.components
    }

    fn require_same_shape(&self, other: &GridFunction) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "({:?}, d={}) vs ({:?}, d={})",
                self.config, self.components, other.config, other.components
            )))
        }
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        let values = self.values.iter().map(|v| v * factor).collect();
        GridFunction {
            config: self.config,
            components: self.components,
            values,
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(-1.0, other)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &GridFunction) -> Result<GridFunction> {
        self.require_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(GridFunction {
            config: self.config,
            components: self.components,
            values,
        })
    }

    /// Zero the function outside the listed cells.
    pub fn restrict_to_cells(&self, cells: &[usize]) -> GridFunction {
        let mut out = GridFunction::zero(self.config, self.components);
        for &cell in cells {
            out.set(cell, self.get(cell));
        }
        out
    }

    /// Cells carrying at least one nonzero component, ascending.
    pub fn support_cells(&self) -> Vec<usize> {
        (0..self.cell_count())
            .filter(|&c| self.get(c).iter().any(|&v| v != 0.0))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Re-sample onto the lattice refined by one level; cell values are
    /// copied to all children, so the function is unchanged pointwise.
    pub fn refine(&self) -> GridFunction {
        let fine = LatticeConfig {
            finest: self.config.finest + 1,
            ..self.config
        };
        let mut out = GridFunction::zero(fine, self.components);
        for cell in 0..fine.cell_count() {
            let coords = fine.cell_coords(cell);
            let coarse: Vec<i64> = coords.iter().map(|&c| c >> 1).collect();
            out.set(cell, self.get(self.config.cell_index(&coarse)));
        }
        out
    }
}

/// `(sum_i |v_i|^s)^{1/s}` for `s` in `(1, inf)`.
pub fn value_norm(v: &[f64], s: f64) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "value norm needs s in (1, inf), got {s}"
        )));
    }
    let mut sum = 0.0;
    for &x in v {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("vector entry {x}")));
        }
        sum += x.abs().powf(s);
    }
    Ok(sum.powf(1.0 / s))
}

/// `L^p` norm of the `l^q`-magnitude of `f` over a cube:
/// `(sum_{cells in Q} |f(cell)|_q^p * cellvol)^{1/p}`. Exact for
/// piecewise-constant `f`. Requires `p >= 1` and `q` in `(1, inf)`.
pub fn lp_norm_on_cube(f: &GridFunction, cube: &CubeIndex, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "local norm needs p in [1, inf), got {p}"
        )));
    }
    let cells = cells_of(cube, f.config())?;
    let vol = f.config().cell_volume();
    let mut sum = 0.0;
    for cell in cells {
        sum += value_norm(f.get(cell), q)?.powf(p) * vol;
    }
    Ok(sum.powf(1.0 / p))
}

/// Same norm taken over the whole window.
pub fn lp_norm_global(f: &GridFunction, p: f64, q: f64) -> Result<f64> {
    let root = CubeIndex::new(f.config().coarsest, vec![0; f.config().dim]);
    lp_norm_on_cube(f, &root, p, q)
}

/// `L^1` norm of a scalar function over the window.
pub fn l1_norm(f: &GridFunction) -> f64 {
    let vol = f.config().cell_volume();
    f.values().iter().map(|v| v.abs() * vol).sum::<f64>()
}

/// Duality pairing `sum_cells <g(cell), f(cell)> * cellvol`; bilinear and
/// symmetric.
pub fn pairing(g: &GridFunction, f: &GridFunction) -> Result<f64> {
    g.require_same_shape(f)?;
    let vol = g.config().cell_volume();
    let mut sum = 0.0;
    for (a, b) in g.values().iter().zip(f.values()) {
        sum += a * b;
    }
    Ok(sum * vol)
}

/// Deterministic random function: i.i.d. standard normal entries, then a
/// `floor(sparsity * cells)`-subset of cells (chosen by the same generator)
/// is zeroed.
pub fn random_function(
    seed: u64,
    config: LatticeConfig,
    components: usize,
    sparsity: f64,
) -> GridFunction {
    let sparsity = sparsity.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = config.cell_count();
    let mut f = GridFunction::zero(config, components);
    for v in f.values.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    let zeroed = (sparsity * cells as f64).floor() as usize;
    let picked = rand::seq::index::sample(&mut rng, cells, zeroed.min(cells));
    for cell in picked {
        f.values[cell * components..(cell + 1) * components].fill(0.0);
    }
    f
}

/// Wire format: `{"n", "J", "j_min", "d", "values"}` with row-major cell
/// order; each `values` entry is one cell's component vector.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridFunctionDoc {
    pub n: usize,
    #[serde(rename = "J")]
    pub finest: i32,
    pub j_min: i32,
    pub d: usize,
    pub values: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn to_doc(&self) -> GridFunctionDoc {
        GridFunctionDoc {
            n: self.config.dim,
            finest: self.config.finest,
            j_min: self.config.coarsest,
            d: self.components,
            values: (0..self.cell_count())
                .map(|c| self.get(c).to_vec())
                .collect(),
        }
    }

    /// The document does not carry periodicity; the caller supplies it.
    pub fn from_doc(doc: &GridFunctionDoc, periodic: bool) -> Result<Self> {
        let config = LatticeConfig::new(doc.n, doc.finest, doc.j_min, periodic)?;
        if doc.values.len() != config.cell_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} cells, got {}",
                config.cell_count(),
                doc.values.len()
            )));
        }
        let mut flat = Vec::with_capacity(config.cell_count() * doc.d);
        for row in &doc.values {
            if row.len() != doc.d {
                return Err(Error::ShapeMismatch(format!(
                    "cell row with {} entries, expected d = {}",
                    row.len(),
                    doc.d
                )));
            }
            flat.extend_from_slice(row);
        }
        GridFunction::from_values(config, doc.d, flat)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("grid document serializes")
    }

    pub fn from_json_str(text: &str, periodic: bool) -> Result<Self> {
        let doc: GridFunctionDoc =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_doc(&doc, periodic)
    }
}
