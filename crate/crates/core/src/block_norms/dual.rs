//! Pairing-supremum solver, the independent lower-bound route.
//!
//! `max { pairing(g, f) : primal norm of f <= 1 }` is computed through the
//! equivalent convex form `min { N(f) : pairing(g, f) = 1 }`: every feasible
//! iterate yields the valid lower bound `pairing(g, f / N(f)) = 1 / N(f)`,
//! and any stationary point of the ratio is a global maximizer. Descent runs
//! projected spectral gradient steps, with the affine pairing constraint
//! restored exactly after every move. Sup-aggregation (`r = inf`) is handled
//! by the same solver through a hardening `l^rho` schedule, with certificates
//! always evaluated under the true sup norm.

use super::{DualCertificate, ScaleMaps, SolveOptions};
use crate::error::{Error, Result};
use crate::exponents::{ExponentSet, OuterExp};
use crate::grid::{pairing, GridFunction};

pub fn dual_norm(
    g: &GridFunction,
    e: &ExponentSet,
    opts: &SolveOptions,
) -> Result<(f64, DualCertificate)> {
    e.require_nontrivial()?;
    if g.config().dim != e.dim() {
        return Err(Error::ShapeMismatch(format!(
            "lattice dimension {} vs exponent dimension {}",
            g.config().dim,
            e.dim()
        )));
    }
    if g.is_zero() {
        return Ok((
            0.0,
            DualCertificate {
                witness: GridFunction::zero(*g.config(), g.components()),
                value: 0.0,
                converged: true,
            },
        ));
    }

    let ball = BallGeometry::build(g, e);
    let self_pairing = pairing(g, g)?;
    let mut point: Vec<f64> = g.values().iter().map(|v| v / self_pairing).collect();

    let stages: Vec<f64> = match e.r() {
        OuterExp::Finite(r) => vec![r],
        OuterExp::Infinite => vec![8.0, 64.0, 512.0, 4096.0, 32768.0],
    };
    let budget = (opts.max_iters / stages.len()).max(100);

    let mut best_point = point.clone();
    let mut best_norm = ball.norm(&point, None);
    let mut converged = false;
    for &rho in &stages {
        let outcome = spg_stage(&ball, &mut point, rho, budget, opts.tol);
        converged = outcome;
        let true_norm = ball.norm(&point, None);
        if true_norm < best_norm {
            best_norm = true_norm;
            best_point.copy_from_slice(&point);
        }
    }

    let witness = GridFunction::from_values(
        *g.config(),
        g.components(),
        best_point.iter().map(|v| v / best_norm).collect(),
    )?;
    let value = pairing(g, &witness)?;
    Ok((
        value,
        DualCertificate {
            witness,
            value,
            converged,
        },
    ))
}

/// Primal-ball geometry: cube terms of the aggregated norm and the pairing
/// constraint data, in flat coordinates.
struct BallGeometry {
    maps: ScaleMaps,
    cells: usize,
    components: usize,
    vol: f64,
    /// `|Q_l|^{1/t - 1/p}` per scale index.
    weights: Vec<f64>,
    offsets: Vec<usize>,
    total_cubes: usize,
    p: f64,
    q: f64,
    r: OuterExp,
    /// Constraint normal `g * cellvol` and its squared length.
    normal: Vec<f64>,
    normal_sq: f64,
    /// Norm-equivalence floor: `N(h) >= lambda_min * |h|_2`, from the
    /// finest-cube terms alone.
    lambda_min: f64,
}

impl BallGeometry {
    fn build(g: &GridFunction, e: &ExponentSet) -> Self {
        let config = g.config();
        let maps = ScaleMaps::build(config);
        let vol = config.cell_volume();
        let mut weights = Vec::with_capacity(maps.levels);
        let mut offsets = Vec::with_capacity(maps.levels);
        let mut total = 0usize;
        for level in 0..maps.levels {
            let j = config.coarsest + level as i32;
            weights.push(f64::exp2(
                -f64::from(j) * config.dim as f64 * e.primal_weight_exp(),
            ));
            offsets.push(total);
            total += maps.cubes_at[level];
        }
        let normal: Vec<f64> = g.values().iter().map(|v| v * vol).collect();
        let normal_sq = normal.iter().map(|v| v * v).sum();
        let cells = config.cell_count();
        // l^r over cells against l^2, and l^q over components against l^2.
        let cell_factor = match e.r() {
            OuterExp::Finite(r) if r > 2.0 => (cells as f64).powf(1.0 / r - 0.5),
            OuterExp::Infinite => (cells as f64).powf(-0.5),
            _ => 1.0,
        };
        let comp_factor = if e.q() > 2.0 {
            (g.components() as f64).powf(1.0 / e.q() - 0.5)
        } else {
            1.0
        };
        let lambda_min =
            weights[maps.levels - 1] * vol.powf(1.0 / e.p()) * cell_factor * comp_factor;
        Self {
            maps,
            cells,
            components: g.components(),
            vol,
            weights,
            offsets,
            total_cubes: total,
            p: e.p(),
            q: e.q(),
            r: e.r(),
            normal,
            normal_sq,
            lambda_min,
        }
    }

    /// Upper bound on `N(f) - N*` over the pairing hyperplane, by convexity
    /// and the level-set diameter `2 N(f) / lambda_min`.
    fn suboptimality_bound(&self, norm: f64, grad: &[f64]) -> f64 {
        let mut along = 0.0;
        for (g, n) in grad.iter().zip(&self.normal) {
            along += g * n;
        }
        let shift = along / self.normal_sq;
        let mut tangent_sq = 0.0;
        for (g, n) in grad.iter().zip(&self.normal) {
            let t = g - shift * n;
            tangent_sq += t * t;
        }
        tangent_sq.sqrt() * 2.0 * norm / self.lambda_min
    }

    /// Restores `sum f * normal = 1` exactly.
    fn restore_constraint(&self, point: &mut [f64]) {
        let mut value = 0.0;
        for (f, n) in point.iter().zip(&self.normal) {
            value += f * n;
        }
        let shift = (value - 1.0) / self.normal_sq;
        for (f, n) in point.iter_mut().zip(&self.normal) {
            *f -= shift * n;
        }
    }

    /// Cube masses `L_Q = sum vol |f(c)|_q^p` and cell magnitudes.
    fn masses(&self, point: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut magnitude = vec![0.0f64; self.cells];
        for (cell, slot) in magnitude.iter_mut().enumerate() {
            let mut sum = 0.0;
            for i in 0..self.components {
                sum += point[cell * self.components + i].abs().powf(self.q);
            }
            *slot = sum.powf(1.0 / self.q);
        }
        let mut mass = vec![0.0f64; self.total_cubes];
        for level in 0..self.maps.levels {
            let cube_of = &self.maps.cube_of[level];
            let offset = self.offsets[level];
            for cell in 0..self.cells {
                mass[offset + cube_of[cell]] += self.vol * magnitude[cell].powf(self.p);
            }
        }
        (mass, magnitude)
    }

    /// Aggregated norm with exponent `rho` (the true norm when `rho` matches
    /// `r`, or a hardening surrogate for the sup case); `None` uses the true
    /// aggregation.
    fn norm(&self, point: &[f64], rho: Option<f64>) -> f64 {
        let (mass, _) = self.masses(point);
        self.aggregate(&mass, rho)
    }

    fn aggregate(&self, mass: &[f64], rho: Option<f64>) -> f64 {
        let mut top = 0.0f64;
        for level in 0..self.maps.levels {
            let offset = self.offsets[level];
            for id in 0..self.maps.cubes_at[level] {
                top = top.max(self.weights[level] * mass[offset + id].powf(1.0 / self.p));
            }
        }
        if top == 0.0 {
            return 0.0;
        }
        let rho = match (rho, self.r) {
            (Some(rho), _) => rho,
            (None, OuterExp::Finite(r)) => r,
            (None, OuterExp::Infinite) => return top,
        };
        let mut sum = 0.0;
        for level in 0..self.maps.levels {
            let offset = self.offsets[level];
            for id in 0..self.maps.cubes_at[level] {
                let term = self.weights[level] * mass[offset + id].powf(1.0 / self.p);
                sum += (term / top).powf(rho);
            }
        }
        top * sum.powf(1.0 / rho)
    }

    /// Norm surrogate and gradient at `point` for aggregation exponent `rho`.
    fn eval(&self, point: &[f64], rho: f64, grad: &mut [f64]) -> f64 {
        let (mass, magnitude) = self.masses(point);
        let norm = self.aggregate(&mass, Some(rho));
        grad.fill(0.0);
        if norm == 0.0 {
            return 0.0;
        }
        // Per-cell sums of (term/N)^{rho-1} * w * L^{(1-p)/p} over ancestors.
        let mut coeff = vec![0.0f64; self.cells];
        for level in 0..self.maps.levels {
            let cube_of = &self.maps.cube_of[level];
            let offset = self.offsets[level];
            let mut cube_coeff = vec![0.0f64; self.maps.cubes_at[level]];
            for (id, kappa) in cube_coeff.iter_mut().enumerate() {
                let l_mass = mass[offset + id];
                if l_mass > 1e-290 {
                    let term = self.weights[level] * l_mass.powf(1.0 / self.p);
                    *kappa = (term / norm).powf(rho - 1.0)
                        * self.weights[level]
                        * l_mass.powf((1.0 - self.p) / self.p);
                }
            }
            for cell in 0..self.cells {
                coeff[cell] += cube_coeff[cube_of[cell]];
            }
        }
        for cell in 0..self.cells {
            let u = magnitude[cell];
            if u <= 1e-290 {
                continue;
            }
            let shared = self.vol * u.powf(self.p - self.q) * coeff[cell];
            for i in 0..self.components {
                let v = point[cell * self.components + i];
                if v != 0.0 {
                    grad[cell * self.components + i] =
                        shared * v.abs().powf(self.q - 1.0) * v.signum();
                }
            }
        }
        norm
    }
}

/// One smooth descent stage; returns whether the suboptimality certificate
/// met the stage tolerance.
fn spg_stage(ball: &BallGeometry, point: &mut [f64], rho: f64, budget: usize, tol: f64) -> bool {
    let n = point.len();
    let mut grad = vec![0.0; n];
    ball.restore_constraint(point);
    let mut norm = ball.eval(point, rho, &mut grad);
    let grad_top = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut alpha = if grad_top > 0.0 { 0.1 / grad_top } else { 1.0 };

    let mut candidate = vec![0.0; n];
    let mut new_grad = vec![0.0; n];
    let mut stalled = 0usize;
    for _ in 0..budget {
        if ball.suboptimality_bound(norm, &grad) <= 1e-12 * norm {
            return true;
        }

        let mut accepted = false;
        let mut step = alpha.clamp(1e-14, 1e12);
        for _ in 0..60 {
            candidate.copy_from_slice(point);
            for i in 0..n {
                candidate[i] -= step * grad[i];
            }
            ball.restore_constraint(&mut candidate);
            let mut directional = 0.0;
            for i in 0..n {
                directional += grad[i] * (candidate[i] - point[i]);
            }
            let trial = ball.eval(&candidate, rho, &mut new_grad);
            if trial <= norm + 1e-4 * directional {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..n {
                    let s = candidate[i] - point[i];
                    ss += s * s;
                    sy += s * (new_grad[i] - grad[i]);
                }
                alpha = if sy > 0.0 {
                    (ss / sy).clamp(1e-14, 1e12)
                } else {
                    step * 4.0
                };
                if norm - trial <= 1e-15 * norm {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                point.copy_from_slice(&candidate);
                grad.copy_from_slice(&new_grad);
                norm = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || stalled >= 50 {
            return ball.suboptimality_bound(norm, &grad) <= tol * norm;
        }
    }
    ball.suboptimality_bound(norm, &grad) <= tol * norm
}
