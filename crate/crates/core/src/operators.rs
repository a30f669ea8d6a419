//! Cell-exact operators on grid functions: scale averaging, periodic
//! translation, convolution with scalar kernels, and the dyadic maximal
//! family.
//!
//! The dyadic-cube maximal stands in for the ball maximal; on a dyadic
//! lattice the two are comparable with dimensional constants, so measured
//! operator-norm ratios are dyadic constants.

use crate::error::{Error, Result};
use crate::grid::{l1_norm, value_norm, GridFunction};
use crate::lattice::{cells_of, enumerate_cubes, LatticeConfig};

/// A scalar convolution kernel with its cached `L^1` norm.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    function: GridFunction,
    l1: f64,
}

impl KernelSpec {
    pub fn new(function: GridFunction) -> Result<Self> {
        if function.components() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "kernels are scalar, got d = {}",
                function.components()
            )));
        }
        let l1 = l1_norm(&function);
        Ok(Self { function, l1 })
    }

    /// Unit of convolution: mass `1/cellvol` on one cell.
    pub fn dirac(config: LatticeConfig, cell: usize) -> Self {
        let mut f = GridFunction::zero(config, 1);
        f.set(cell, &[1.0 / config.cell_volume()]);
        Self {
            l1: 1.0,
            function: f,
        }
    }

    pub fn function(&self) -> &GridFunction {
        &self.function
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1
    }
}

/// Conditional expectation onto scale-`k` cubes: on each cube the output is
/// the constant cell average. Idempotent; the identity at the finest scale.
pub fn average_at_scale(f: &GridFunction, scale: i32) -> Result<GridFunction> {
    let config = f.config();
    config.require_scale(scale)?;
    let mut out = GridFunction::zero(*config, f.components());
    for cube in enumerate_cubes(config)
        .into_iter()
        .filter(|c| c.scale == scale)
    {
        let cells = cells_of(&cube, config)?;
        let mut mean = vec![0.0f64; f.components()];
        for &cell in &cells {
            for (m, v) in mean.iter_mut().zip(f.get(cell)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= cells.len() as f64;
        }
        for &cell in &cells {
            out.set(cell, &mean);
        }
    }
    Ok(out)
}

/// Cyclic shift by whole cells; an isometry of every cell-wise norm.
pub fn translate_cells(f: &GridFunction, shift: &[i64]) -> Result<GridFunction> {
    let config = f.config();
    if !config.periodic {
        return Err(Error::PeriodicRequired);
    }
    if shift.len() != config.dim {
        return Err(Error::ShapeMismatch(format!(
            "shift has {} axes, lattice has {}",
            shift.len(),
            config.dim
        )));
    }
    let width = config.cells_per_axis() as i64;
    let mut out = GridFunction::zero(*config, f.components());
    for cell in 0..config.cell_count() {
        let coords = config.cell_coords(cell);
        let source: Vec<i64> = coords
            .iter()
            .zip(shift)
            .map(|(&c, &s)| (c - s).rem_euclid(width))
            .collect();
        out.set(cell, f.get(config.cell_index(&source)));
    }
    Ok(out)
}

/// Translation by a continuous offset, which must be a whole number of cells
/// on each axis.
pub fn translate(f: &GridFunction, offset: &[f64]) -> Result<GridFunction> {
    let cell_side = f64::exp2(-f64::from(f.config().finest));
    let mut shift = Vec::with_capacity(offset.len());
    for &y in offset {
        let cells = y / cell_side;
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::NonCellAligned(format!(
                "offset {y} is {cells} cells"
            )));
        }
        shift.push(cells.round() as i64);
    }
    translate_cells(f, &shift)
}

/// Periodic convolution `(f * k)(x) = sum_y k(y) f(x - y) cellvol`, exact for
/// cell-aligned piecewise-constant data.
pub fn convolve(f: &GridFunction, kernel: &KernelSpec) -> Result<GridFunction> {
    let config = f.config();
    if !config.periodic {
        return Err(Error::PeriodicRequired);
    }
    if kernel.function.config() != config {
        return Err(Error::ShapeMismatch(
            "kernel and function live on different lattices".into(),
        ));
    }
    let vol = config.cell_volume();
    let width = config.cells_per_axis() as i64;
    let mut out = GridFunction::zero(*config, f.components());
    let cells = config.cell_count();
    let mut acc = vec![0.0f64; f.components()];
    for target in 0..cells {
        acc.fill(0.0);
        let t_coords = config.cell_coords(target);
        for source in 0..cells {
            let k = kernel.function.get(source)[0];
            if k == 0.0 {
                continue;
            }
            let s_coords = config.cell_coords(source);
            let arg: Vec<i64> = t_coords
                .iter()
                .zip(&s_coords)
                .map(|(&t, &s)| (t - s).rem_euclid(width))
                .collect();
            let fv = f.get(config.cell_index(&arg));
            for (a, v) in acc.iter_mut().zip(fv) {
                *a += k * v * vol;
            }
        }
        out.set(target, &acc);
    }
    Ok(out)
}

/// Which maximal function to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaximalVariant {
    /// `sup_Q avg_Q |f|_q` over family cubes containing the cell (scalar output).
    ScalarNorm { q: f64 },
    /// Per-component powered maximal `(sup_Q avg_Q |f_i|^eta)^{1/eta}`.
    Componentwise { eta: f64 },
}

/// Dyadic maximal over the finite cube family.
pub fn maximal(f: &GridFunction, variant: MaximalVariant) -> Result<GridFunction> {
    let config = f.config();
    match variant {
        MaximalVariant::ScalarNorm { q } => {
            let magnitudes: Vec<f64> = (0..config.cell_count())
                .map(|cell| value_norm(f.get(cell), q))
                .collect::<Result<_>>()?;
            let best = cube_maxima(config, &[magnitudes], 1.0)?;
            GridFunction::from_values(*config, 1, best)
        }
        MaximalVariant::Componentwise { eta } => {
            if eta <= 0.0 {
                return Err(Error::InvalidExponent(format!(
                    "maximal power must be positive, got {eta}"
                )));
            }
            let d = f.components();
            let mut channels = Vec::with_capacity(d);
            for i in 0..d {
                channels.push(
                    (0..config.cell_count())
                        .map(|c| f.get(c)[i].abs().powf(eta))
                        .collect::<Vec<f64>>(),
                );
            }
            let per_channel = cube_maxima(config, &channels, 1.0 / eta)?;
            let cells = config.cell_count();
            let mut values = vec![0.0f64; cells * d];
            for cell in 0..cells {
                for i in 0..d {
                    values[cell * d + i] = per_channel[i * cells + cell];
                }
            }
            GridFunction::from_values(*config, d, values)
        }
    }
}

/// For each channel and cell, the maximum over containing cubes of the cube
/// average, raised to `post_power`. Channels are returned concatenated.
fn cube_maxima(config: &LatticeConfig, channels: &[Vec<f64>], post_power: f64) -> Result<Vec<f64>> {
    let cells = config.cell_count();
    let mut out = vec![0.0f64; channels.len() * cells];
    for cube in enumerate_cubes(config) {
        let members = cells_of(&cube, config)?;
        let count = members.len() as f64;
        for (ch, data) in channels.iter().enumerate() {
            let avg = members.iter().map(|&c| data[c]).sum::<f64>() / count;
            for &cell in &members {
                let slot = &mut out[ch * cells + cell];
                if avg > *slot {
                    *slot = avg;
                }
            }
        }
    }
    if post_power != 1.0 {
        for v in out.iter_mut() {
            *v = v.powf(post_power);
        }
    }
    Ok(out)
}
