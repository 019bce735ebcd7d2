//! Homogenized problem `αu + H̄(Du) = 0` off the origin with the effective
//! Dirichlet value `−E/α` at the origin.

use serde::Serialize;

use crate::effective::EffectiveHamiltonianTable;
use crate::error::{Error, Result};
use crate::fields::{composite_inf, is_downward, legendre_cost, norm, ControlSet, DefectCost, PeriodicCost};
use crate::grid::{Geometry, GridField};
use crate::solver::{solve_scheme, NodeKind, Scheme, SolveOptions, SolveReport};

/// Margin in the visibility predicate `E > H̄(p₀) + tol`.
pub const VISIBILITY_TOL: f64 = 1e-2;
/// Agreement below this counts as exact.
pub const EXACT_TOL: f64 = 1e-9;

pub fn defect_visible(ergodic: f64, table: &EffectiveHamiltonianTable) -> bool {
    ergodic > table.min_value + VISIBILITY_TOL
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizedSolution {
    #[serde(skip)]
    pub field: GridField,
    pub ergodic: f64,
    pub alpha: f64,
    pub hbar_min: f64,
    pub hbar_zero: f64,
    pub visible: bool,
    /// Homogenized value without the defect, `−H̄(0)/α`.
    pub u_per: f64,
    /// Value imposed at the origin node.
    pub origin_value: f64,
    pub report: SolveReport,
    pub warnings: Vec<String>,
}

/// Value iteration for the control problem with running cost `ℓ̄(a)` (the
/// conjugate of the tabulated `H̄`) and the option to stop at the origin
/// with payoff `−E/α`.
pub fn solve_homogenized(
    table: &EffectiveHamiltonianTable,
    ergodic: f64,
    alpha: f64,
    grid: &GridField,
) -> Result<HomogenizedSolution> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if ergodic < table.min_value - VISIBILITY_TOL {
        return Err(Error::Inconsistent(format!(
            "E = {ergodic} is below min H̄ = {}",
            table.min_value
        )));
    }
    if matches!(grid.geometry, Geometry::Torus) {
        return Err(Error::Config("homogenized problem needs a box or ball grid".into()));
    }
    if grid.dim != table.dim {
        return Err(Error::Config("table and grid differ in dimension".into()));
    }
    if !table.is_convex(1e-2) {
        return Err(Error::Precondition(format!(
            "table is not convex: midpoint violation {:.3e}",
            table.convexity_violation
        )));
    }
    let kinetic = table.to_kinetic()?;
    let speed = kinetic.lipschitz();
    let controls = ControlSet::default_for(grid.dim, speed)?;
    let cost = legendre_cost(&kinetic, &controls)?;
    let hbar_zero = table.eval(&vec![0.0; grid.dim]);
    let u_per = -hbar_zero / alpha;
    let origin_value = (-ergodic / alpha).min(u_per);
    let origin = grid.origin_index();
    let mut warnings = Vec::new();
    if norm(&table.p0()) > 1e-2 {
        warnings.push(format!("minimizer p0 = {:?} is not 0: no closed form to compare with", table.p0()));
    }
    if norm(&grid.coords(origin)[..grid.dim]) > 1e-12 {
        warnings.push("grid has no node at the origin; pinned the nearest one".into());
    }
    let kinds = (0..grid.len())
        .map(|i| {
            if !grid.active[i] {
                NodeKind::Inactive
            } else if i == origin {
                NodeKind::Pinned
            } else {
                NodeKind::Free
            }
        })
        .collect();
    let mut pinned = vec![0.0; grid.len()];
    pinned[origin] = origin_value;
    let scheme = Scheme {
        grid,
        controls: &controls,
        control_cost: cost,
        state_cost: vec![0.0; grid.len()],
        discount: Some(alpha),
        kinds,
        pinned_values: pinned,
    };
    let (vals, report) = solve_scheme(&scheme, &SolveOptions::default())?;
    let mut field = grid.clone();
    field.values = vals;
    for i in 0..field.len() {
        if !field.active[i] {
            field.values[i] = 0.0;
        }
    }
    Ok(HomogenizedSolution {
        field,
        ergodic,
        alpha,
        hbar_min: table.min_value,
        hbar_zero,
        visible: defect_visible(ergodic, table),
        u_per,
        origin_value,
        report,
        warnings,
    })
}

/// `max |u − u_per|` on shells `r ≤ |x| < r + h`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub shells: Vec<(f64, f64)>,
    /// Smallest ladder radius from which every shell agrees exactly.
    pub exact_from: Option<f64>,
    /// No shell agrees exactly.
    pub never_exact: bool,
}

pub fn check_infinity(sol: &HomogenizedSolution, radii: &[f64]) -> DecayReport {
    let f = &sol.field;
    let dim = f.dim;
    let shells: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let e = f
                .active_indices()
                .filter(|&i| {
                    let d = norm(&f.coords(i)[..dim]);
                    d >= r - 1e-9 && d < r + f.h - 1e-9
                })
                .map(|i| (f.values[i] - sol.u_per).abs())
                .fold(0.0, f64::max);
            (r, e)
        })
        .collect();
    let mut exact_from = None;
    for k in (0..shells.len()).rev() {
        if shells[k].1 <= EXACT_TOL {
            exact_from = Some(shells[k].0);
        } else {
            break;
        }
    }
    let never_exact = shells.iter().all(|s| s.1 > EXACT_TOL);
    DecayReport { shells, exact_from, never_exact }
}

/// Extent of the region where `u` differs from `u_per`, refined by linear
/// extrapolation of the gap to zero (1D, averaged over both sides).
pub fn measured_mu(sol: &HomogenizedSolution) -> Option<f64> {
    let f = &sol.field;
    if f.dim != 1 {
        return None;
    }
    let gap = |i: usize| (f.values[i] - sol.u_per).abs();
    let origin = f.origin_index();
    let mut ends = Vec::new();
    for side in [-1i64, 1] {
        let mut k = 0i64;
        loop {
            let j = origin as i64 + side * (k + 1);
            if j < 0 || j as usize >= f.len() || gap(j as usize) <= EXACT_TOL {
                break;
            }
            k += 1;
        }
        let last = origin as i64 + side * k;
        let next = last + side;
        if next < 0 || next as usize >= f.len() {
            // the defect reaches the edge of the grid
            return Some(f64::INFINITY);
        }
        let x_last = f.coords(last as usize)[0].abs();
        if k == 0 {
            ends.push(x_last);
            continue;
        }
        let before = origin as i64 + side * (k - 1);
        let (g1, g0) = (gap(last as usize), gap(before as usize));
        let slope = (g0 - g1) / f.h;
        ends.push(if slope > 0.0 { x_last + g1 / slope } else { x_last });
    }
    Some(0.5 * (ends[0] + ends[1]))
}

/// Closed-form homogenized solution for `|p| − ℓ` in 1D with `α = 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HomogenizedClosedForm {
    pub mean: f64,
    pub periodic_inf: f64,
    pub composite_inf: f64,
    /// Radius beyond which `u = inf ℓ_per`; infinite in a constant environment.
    pub mu: f64,
}

impl HomogenizedClosedForm {
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() < self.mu {
            self.mean - (-x.abs()).exp() * (self.mean - self.composite_inf)
        } else {
            self.periodic_inf
        }
    }

    /// The inner branch at `x`, whatever `μ` is.
    pub fn inner(&self, x: f64) -> f64 {
        self.mean - (-x.abs()).exp() * (self.mean - self.composite_inf)
    }
}

pub fn analytic_homogenized_1d(periodic: &PeriodicCost, defect: &DefectCost) -> Result<HomogenizedClosedForm> {
    if periodic.dim() != 1 || defect.dim() != 1 {
        return Err(Error::Precondition("closed-form homogenized solution is one-dimensional".into()));
    }
    let (mean, pinf) = (periodic.mean(), periodic.inf());
    if !is_downward(periodic, defect) {
        return Ok(HomogenizedClosedForm { mean, periodic_inf: pinf, composite_inf: pinf, mu: 0.0 });
    }
    let cinf = composite_inf(periodic, defect).1;
    let ratio = (mean - pinf) / (mean - cinf);
    let mu = if ratio <= 0.0 { f64::INFINITY } else { -ratio.ln() };
    Ok(HomogenizedClosedForm { mean, periodic_inf: pinf, composite_inf: cinf, mu })
}
