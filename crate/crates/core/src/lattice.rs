//! Dyadic cube indexing and the finite cube family over a bounded window.
//!
//! The window is `[0, 2^-j_min)^n`, so the coarsest scale holds exactly one
//! cube and no partial cubes appear. A cube at scale `j` has side `2^-j`;
//! its `2^n` children at scale `j+1` tile it exactly, and every cube in the
//! family is a disjoint union of finest-level cells. Cell indices are
//! row-major over the finest grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a dyadic cube: side `2^-scale`, lower corner at `2^-scale * corner`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeIndex {
    /// Scale `j`; larger means smaller cubes.
    pub scale: i32,
    /// Integer corner `m`, one entry per axis.
    pub corner: Vec<i64>,
}

impl CubeIndex {
    pub fn new(scale: i32, corner: Vec<i64>) -> Self {
        Self { scale, corner }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    /// Side length `2^-scale`.
    pub fn side(&self) -> f64 {
        f64::exp2(-f64::from(self.scale))
    }

    /// Volume `2^{-scale * n}`, exact in f64 for `|scale * n| <= 900`.
    pub fn volume(&self) -> f64 {
        f64::exp2(-f64::from(self.scale) * self.dim() as f64)
    }

    /// `|Q|^alpha` computed through exponent arithmetic, never by powering a
    /// rounded volume.
    pub fn volume_pow(&self, alpha: f64) -> f64 {
        f64::exp2(-f64::from(self.scale) * self.dim() as f64 * alpha)
    }

    /// The `2^n` children at scale `scale + 1`; their union is `self`.
    pub fn children(&self) -> Vec<CubeIndex> {
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0..(1u32 << n) {
            let corner: Vec<i64> = (0..n)
                .map(|axis| 2 * self.corner[axis] + i64::from((mask >> axis) & 1))
                .collect();
            out.push(CubeIndex::new(self.scale + 1, corner));
        }
        out
    }

    pub fn parent(&self) -> CubeIndex {
        let corner = self.corner.iter().map(|&m| m.div_euclid(2)).collect();
        CubeIndex::new(self.scale - 1, corner)
    }

    /// Whether `other` is contained in `self` (dyadic cubes nest or are disjoint).
    pub fn contains(&self, other: &CubeIndex) -> bool {
        if other.scale < self.scale || other.dim() != self.dim() {
            return false;
        }
        let shift = (other.scale - self.scale) as u32;
        self.corner
            .iter()
            .zip(&other.corner)
            .all(|(&a, &b)| b >> shift == a)
    }
}

/// The finite cube family: scales `coarsest..=finest` over the window
/// `[0, 2^-coarsest)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Spatial dimension `n` (1 or 2).
    #[serde(rename = "n")]
    pub dim: usize,
    /// Finest scale `J`; cells are the scale-`J` cubes.
    #[serde(rename = "J")]
    pub finest: i32,
    /// Coarsest scale; the window is the single scale-`j_min` cube.
    #[serde(rename = "j_min")]
    pub coarsest: i32,
    /// Wrap translations and convolutions around the window.
    pub periodic: bool,
}

impl LatticeConfig {
    pub fn new(dim: usize, finest: i32, coarsest: i32, periodic: bool) -> Result<Self> {
        let config = Self {
            dim,
            finest,
            coarsest,
            periodic,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidLattice(format!(
                "dimension must be 1 or 2, got {}",
                self.dim
            )));
        }
        if self.coarsest > self.finest {
            return Err(Error::InvalidLattice(format!(
                "j_min = {} exceeds J = {}",
                self.coarsest, self.finest
            )));
        }
        let levels = (self.finest - self.coarsest) as u32;
        if levels as usize * self.dim > 26 {
            return Err(Error::InvalidLattice(format!(
                "lattice too large: 2^{} cells",
                levels as usize * self.dim
            )));
        }
        Ok(())
    }

    /// Number of refinement levels `J - j_min`.
    pub fn levels(&self) -> u32 {
        (self.finest - self.coarsest) as u32
    }

    /// Number of scales in the family, `J - j_min + 1`.
    pub fn num_scales(&self) -> usize {
        self.levels() as usize + 1
    }

    pub fn cells_per_axis(&self) -> usize {
        1usize << self.levels()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// Volume of one finest-level cell, `2^{-J n}`.
    pub fn cell_volume(&self) -> f64 {
        f64::exp2(-f64::from(self.finest) * self.dim as f64)
    }

    /// Side length of the window, `2^-j_min`.
    pub fn window_side(&self) -> f64 {
        f64::exp2(-f64::from(self.coarsest))
    }

    pub fn window_volume(&self) -> f64 {
        f64::exp2(-f64::from(self.coarsest) * self.dim as f64)
    }

    /// Whether a cube belongs to the family (scale in range, inside window).
    pub fn in_family(&self, cube: &CubeIndex) -> bool {
        if cube.dim() != self.dim || cube.scale < self.coarsest || cube.scale > self.finest {
            return false;
        }
        let extent = 1i64 << (cube.scale - self.coarsest);
        cube.corner.iter().all(|&m| (0..extent).contains(&m))
    }

    fn require_in_family(&self, cube: &CubeIndex) -> Result<()> {
        if self.in_family(cube) {
            Ok(())
        } else {
            Err(Error::CubeOutsideFamily {
                scale: cube.scale,
                corner: cube.corner.clone(),
            })
        }
    }

    pub fn require_scale(&self, scale: i32) -> Result<()> {
        if scale < self.coarsest || scale > self.finest {
            return Err(Error::ScaleOutsideFamily {
                scale,
                coarsest: self.coarsest,
                finest: self.finest,
            });
        }
        Ok(())
    }

    /// Row-major cell index of a finest-scale corner.
    pub fn cell_index(&self, coords: &[i64]) -> usize {
        let width = self.cells_per_axis();
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * width + c as usize)
    }

    /// Finest-scale corner of a cell index (inverse of `cell_index`).
    pub fn cell_coords(&self, cell: usize) -> Vec<i64> {
        let width = self.cells_per_axis();
        let mut rem = cell;
        let mut coords = vec![0i64; self.dim];
        for axis in (0..self.dim).rev() {
            coords[axis] = (rem % width) as i64;
            rem /= width;
        }
        coords
    }

    /// Number of cubes at one scale of the family.
    pub fn cubes_at_scale(&self, scale: i32) -> usize {
        (1usize << (scale - self.coarsest)).pow(self.dim as u32)
    }
}

/// All cubes of the family, ordered lexicographically in `(scale, corner)`.
pub fn enumerate_cubes(config: &LatticeConfig) -> Vec<CubeIndex> {
    let mut cubes = Vec::new();
    for scale in config.coarsest..=config.finest {
        let extent = 1i64 << (scale - config.coarsest);
        match config.dim {
            1 => {
                for m in 0..extent {
                    cubes.push(CubeIndex::new(scale, vec![m]));
                }
            }
            2 => {
                for m0 in 0..extent {
                    for m1 in 0..extent {
                        cubes.push(CubeIndex::new(scale, vec![m0, m1]));
                    }
                }
            }
            _ => unreachable!("validated dimension"),
        }
    }
    cubes
}

/// Cell indices covered by a cube, ascending. Contiguous in one dimension;
/// in two dimensions the cube covers one contiguous run per grid row.
pub fn cells_of(cube: &CubeIndex, config: &LatticeConfig) -> Result<Vec<usize>> {
    config.require_in_family(cube)?;
    let span = 1i64 << (config.finest - cube.scale);
    match config.dim {
        1 => {
            let start = cube.corner[0] * span;
            Ok((start..start + span).map(|c| c as usize).collect())
        }
        2 => {
            let width = config.cells_per_axis();
            let (r0, c0) = (cube.corner[0] * span, cube.corner[1] * span);
            let mut cells = Vec::with_capacity((span * span) as usize);
            for row in r0..r0 + span {
                for col in c0..c0 + span {
                    cells.push(row as usize * width + col as usize);
                }
            }
            Ok(cells)
        }
        _ => unreachable!("validated dimension"),
    }
}

/// The ancestor of a cell at a given scale of the family.
pub fn ancestor_at_scale(cell: usize, scale: i32, config: &LatticeConfig) -> Result<CubeIndex> {
    config.require_scale(scale)?;
    let shift = (config.finest - scale) as u32;
    let corner = config
        .cell_coords(cell)
        .iter()
        .map(|&c| c >> shift)
        .collect();
    Ok(CubeIndex::new(scale, corner))
}

/// All cubes containing a cell, one per scale, coarse to fine. The list is
/// totally ordered by inclusion.
pub fn ancestors_of_cell(cell: usize, config: &LatticeConfig) -> Vec<CubeIndex> {
    (config.coarsest..=config.finest)
        .map(|scale| ancestor_at_scale(cell, scale, config).expect("scale in range"))
        .collect()
}

/// Smallest family cube containing every listed cell; `None` for an empty list.
pub fn covering_cube(cells: &[usize], config: &LatticeConfig) -> Option<CubeIndex> {
    let first = *cells.first()?;
    'scales: for scale in (config.coarsest..=config.finest).rev() {
        let candidate = ancestor_at_scale(first, scale, config).expect("scale in range");
        for &cell in &cells[1..] {
            let anc = ancestor_at_scale(cell, scale, config).expect("scale in range");
            if anc != candidate {
                continue 'scales;
            }
        }
        return Some(candidate);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dim: usize, finest: i32, coarsest: i32) -> LatticeConfig {
        LatticeConfig::new(dim, finest, coarsest, false).unwrap()
    }

    #[test]
    fn single_cell_lattice() {
        let cfg = config(1, 0, 0);
        assert_eq!(enumerate_cubes(&cfg), vec![CubeIndex::new(0, vec![0])]);
        assert_eq!(cfg.cell_count(), 1);
    }

    #[test]
    fn one_refinement_1d() {
        let cfg = config(1, 1, 0);
        assert_eq!(
            enumerate_cubes(&cfg),
            vec![
                CubeIndex::new(0, vec![0]),
                CubeIndex::new(1, vec![0]),
                CubeIndex::new(1, vec![1]),
            ]
        );
    }

    #[test]
    fn cube_count_2d_matches_closed_form() {
        // 1 + 2^n cubes for one refinement level.
        let cfg = config(2, 1, 0);
        assert_eq!(enumerate_cubes(&cfg).len(), 5);
        // Enumeration oracle for two levels: sum of 4^k.
        let cfg = config(2, 2, 0);
        assert_eq!(enumerate_cubes(&cfg).len(), 1 + 4 + 16);
    }

    #[test]
    fn cells_of_whole_family() {
        let cfg = config(1, 2, 0);
        let root = CubeIndex::new(0, vec![0]);
        assert_eq!(cells_of(&root, &cfg).unwrap(), vec![0, 1, 2, 3]);
        let leaf = CubeIndex::new(2, vec![3]);
        assert_eq!(cells_of(&leaf, &cfg).unwrap(), vec![3]);
        let mid = CubeIndex::new(1, vec![0]);
        assert_eq!(cells_of(&mid, &cfg).unwrap(), vec![0, 1]);
    }

    #[test]
    fn cells_outside_family_rejected() {
        let cfg = config(1, 2, 0);
        let bad = CubeIndex::new(3, vec![0]);
        assert!(cells_of(&bad, &cfg).is_err());
        let outside = CubeIndex::new(1, vec![2]);
        assert!(cells_of(&outside, &cfg).is_err());
    }

    #[test]
    fn ancestors_example() {
        let cfg = config(1, 2, 0);
        assert_eq!(
            ancestors_of_cell(3, &cfg),
            vec![
                CubeIndex::new(0, vec![0]),
                CubeIndex::new(1, vec![1]),
                CubeIndex::new(2, vec![3]),
            ]
        );
        let chain = ancestors_of_cell(3, &cfg);
        for pair in chain.windows(2) {
            assert!(pair[0].contains(&pair[1]));
        }
    }

    #[test]
    fn ancestors_trivial_lattice() {
        let cfg = config(2, 0, 0);
        assert_eq!(ancestors_of_cell(0, &cfg).len(), 1);
    }

    #[test]
    fn children_tile_parent() {
        let cfg = config(2, 2, 0);
        let parent = CubeIndex::new(1, vec![1, 0]);
        let mut child_cells: Vec<usize> = parent
            .children()
            .iter()
            .flat_map(|c| cells_of(c, &cfg).unwrap())
            .collect();
        child_cells.sort_unstable();
        assert_eq!(child_cells, cells_of(&parent, &cfg).unwrap());
        assert_eq!(parent.children().len(), 4);
        for child in parent.children() {
            assert_eq!(child.parent(), parent);
            assert!(parent.contains(&child));
        }
    }

    #[test]
    fn partition_property_per_scale() {
        for cfg in [config(1, 3, 0), config(2, 2, -1)] {
            for scale in cfg.coarsest..=cfg.finest {
                let mut counts = vec![0usize; cfg.cell_count()];
                for cube in enumerate_cubes(&cfg).iter().filter(|c| c.scale == scale) {
                    for cell in cells_of(cube, &cfg).unwrap() {
                        counts[cell] += 1;
                    }
                }
                assert!(
                    counts.iter().all(|&c| c == 1),
                    "scale {scale} not a partition"
                );
            }
        }
    }

    #[test]
    fn enumeration_is_stable() {
        let cfg = config(2, 2, 0);
        assert_eq!(enumerate_cubes(&cfg), enumerate_cubes(&cfg));
    }

    #[test]
    fn volume_is_exact_power_of_two() {
        let cube = CubeIndex::new(5, vec![3, 7]);
        assert_eq!(cube.volume(), f64::exp2(-10.0));
        assert_eq!(cube.volume_pow(1.0), cube.volume());
        assert_eq!(CubeIndex::new(-2, vec![0]).volume(), 4.0);
    }

    #[test]
    fn covering_cube_examples() {
        let cfg = config(1, 3, 0);
        assert_eq!(covering_cube(&[], &cfg), None);
        assert_eq!(covering_cube(&[5], &cfg), Some(CubeIndex::new(3, vec![5])));
        assert_eq!(
            covering_cube(&[0, 3], &cfg),
            Some(CubeIndex::new(1, vec![0]))
        );
        assert_eq!(
            covering_cube(&[3, 4], &cfg),
            Some(CubeIndex::new(0, vec![0]))
        );
    }

    #[test]
    fn negative_coarsest_window() {
        let cfg = config(1, 1, -1);
        assert_eq!(cfg.window_side(), 2.0);
        assert_eq!(cfg.cell_count(), 4);
        assert_eq!(enumerate_cubes(&cfg).len(), 1 + 2 + 4);
    }
}
