//! Ergodic constant of the defect from state-constrained truncated problems.

use rayon::prelude::*;
use serde::Serialize;

use crate::effective::{check_schedule, Extrapolation, MONOTONE_TOL};
use crate::error::{Error, Result};
use crate::fields::{composite_inf, is_downward, DefectCost, HamiltonianSpec, PeriodicCost};
use crate::grid::GridField;
use crate::solver::{solve_discounted_constrained, SolveOptions};

/// Largest spread of the last three levels before a warning.
pub const SPREAD_TOL: f64 = 5e-2;
/// Successive `E^R` within this are taken as converged in `R`.
pub const RADIUS_TOL: f64 = 1e-2;

/// `E^R` for one radius.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedErgodic {
    pub radius: f64,
    pub h: f64,
    /// Levels `−λ·avg_{B_R₀} w^{λ,R}`.
    pub extrapolation: Extrapolation,
    /// `−λ w^{λ,R}(0)` for each rate.
    pub origin_levels: Vec<(f64, f64)>,
    pub value: f64,
    /// Nodes in the averaging ball.
    pub averaged_nodes: usize,
    pub warnings: Vec<String>,
    /// `w^{λ,R}` at the smallest rate.
    #[serde(skip)]
    pub last_field: GridField,
    pub last_lambda: f64,
}

/// Grid used for a truncated problem of radius `radius` and spacing `h`.
pub fn truncated_grid(dim: usize, radius: f64, h: f64) -> Result<GridField> {
    GridField::ball(dim, radius, h)
}

/// `E^R`: extrapolated `−λ w^{λ,R}` averaged over the defect support.
pub fn ergodic_constant_truncated(
    spec: &HamiltonianSpec,
    radius: f64,
    lambdas: &[f64],
    grid: &GridField,
) -> Result<TruncatedErgodic> {
    check_schedule(lambdas)?;
    let r0 = spec.landscape().defect.radius();
    if radius <= r0 {
        return Err(Error::Precondition(format!("radius {radius} must exceed the defect radius {r0}")));
    }
    let dim = grid.dim;
    let mut avg: Vec<usize> = grid
        .active_indices()
        .filter(|&i| crate::fields::norm(&grid.coords(i)[..dim]) <= r0 + 1e-12)
        .collect();
    if avg.is_empty() {
        avg.push(grid.origin_index());
    }
    let origin = grid.origin_index();
    let mut seq = Vec::new();
    let mut origin_levels = Vec::new();
    let mut warm: Option<(Vec<f64>, f64, f64)> = None;
    let mut last = None;
    for &lambda in lambdas {
        let mut opts = SolveOptions::default();
        if let Some((w, lp, level)) = &warm {
            let delta = level * (1.0 / lambda - 1.0 / lp);
            opts.warm_start = Some(w.iter().map(|v| v - delta).collect());
        }
        let (w, _) = solve_discounted_constrained(spec, lambda, grid, &opts)?;
        let level = -lambda * avg.iter().map(|&i| w.values[i]).sum::<f64>() / avg.len() as f64;
        seq.push((lambda, level));
        origin_levels.push((lambda, -lambda * w.values[origin]));
        // warm start from the field-wide mean level, which tracks the constant part
        warm = Some((w.values.clone(), lambda, -lambda * w.mean()));
        last = Some(w);
    }
    let extrapolation = Extrapolation::from_sequence(seq);
    let mut warnings = Vec::new();
    if extrapolation.spread > SPREAD_TOL {
        warnings.push(format!("discount sweep spread {:.3e} at R = {radius}", extrapolation.spread));
    }
    if !extrapolation.is_monotone(MONOTONE_TOL) {
        warnings.push(format!("non-monotone discount sweep at R = {radius}"));
    }
    Ok(TruncatedErgodic {
        radius,
        h: grid.h,
        value: extrapolation.limit,
        extrapolation,
        origin_levels,
        averaged_nodes: avg.len(),
        warnings,
        last_field: last.expect("schedule is nonempty"),
        last_lambda: *lambdas.last().expect("nonempty"),
    })
}

/// `E` from a sweep of radii.
#[derive(Debug, Clone, Serialize)]
pub struct ErgodicEstimate {
    pub radii: Vec<f64>,
    pub per_radius: Vec<TruncatedErgodic>,
    pub value: f64,
    pub converged: bool,
    /// `max(E^{R_small} − E^{R_large}, 0)` over all ordered pairs.
    pub monotonicity_violation: f64,
    pub warnings: Vec<String>,
}

impl ErgodicEstimate {
    pub fn values(&self) -> Vec<f64> {
        self.per_radius.iter().map(|t| t.value).collect()
    }
}

pub fn ergodic_constant(spec: &HamiltonianSpec, radii: &[f64], lambdas: &[f64], h: f64) -> Result<ErgodicEstimate> {
    if radii.len() < 3 {
        return Err(Error::Config(format!("radius sweep needs at least 3 radii, got {}", radii.len())));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("radius sweep must be increasing".into()));
    }
    let dim = spec.dim();
    let per_radius = radii
        .par_iter()
        .map(|&r| {
            let grid = truncated_grid(dim, r, h)?;
            ergodic_constant_truncated(spec, r, lambdas, &grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = per_radius.iter().map(|t| t.value).collect();
    let mut violation: f64 = 0.0;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            violation = violation.max(vals[i] - vals[j]);
        }
    }
    let n = vals.len();
    let converged = (vals[n - 1] - vals[n - 2]).abs() <= RADIUS_TOL;
    let mut warnings: Vec<String> = per_radius.iter().flat_map(|t| t.warnings.clone()).collect();
    if !converged {
        warnings.push(format!(
            "E^R not converged in R: last two values {:.6} and {:.6}",
            vals[n - 2],
            vals[n - 1]
        ));
    }
    Ok(ErgodicEstimate {
        radii: radii.to_vec(),
        value: vals[n - 1],
        per_radius,
        converged,
        monotonicity_violation: violation,
        warnings,
    })
}

/// `E = −inf(ℓ_per + ℓ₀)` for `|p| − ℓ` in 1D with a downward defect.
pub fn analytic_e_1d(periodic: &PeriodicCost, defect: &DefectCost) -> Result<f64> {
    if periodic.dim() != 1 || defect.dim() != 1 {
        return Err(Error::Precondition("closed-form ergodic constant is one-dimensional".into()));
    }
    if !is_downward(periodic, defect) {
        return Err(Error::Precondition(format!(
            "defect {} does not lower the infimum of {}",
            defect.label(),
            periodic.label()
        )));
    }
    Ok(-composite_inf(periodic, defect).1)
}

/// `E = H̄(0) − ℓ₀(0)` for a radial setting.
pub fn analytic_e_radial(hbar0: f64, defect: &DefectCost) -> f64 {
    hbar0 - defect.at_origin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::DEFAULT_LAMBDAS;
    use crate::fields::Kinetic;

    fn spec(per: PeriodicCost, def: DefectCost) -> HamiltonianSpec {
        HamiltonianSpec::separable(Kinetic::Norm, per, def).unwrap()
    }

    #[test]
    fn closed_forms() {
        let z = PeriodicCost::zero(1);
        assert!((analytic_e_1d(&z, &DefectCost::well(1, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((analytic_e_1d(&z, &DefectCost::well(1, 2.0)).unwrap() - 2.0).abs() < 1e-9);
        let s = PeriodicCost::sine(1.0, 0.0);
        let e = analytic_e_1d(&s, &DefectCost::well(1, 1.0)).unwrap();
        assert!((e - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-6, "{e}");
        assert!(analytic_e_1d(&z, &DefectCost::hump(1, 1.0)).is_err());
        assert_eq!(analytic_e_radial(0.0, &DefectCost::well(2, 1.0)), 1.0);
        assert_eq!(analytic_e_radial(0.7, &DefectCost::none(2)), 0.7);
    }

    #[test]
    fn truncated_examples() {
        let sp = spec(PeriodicCost::zero(1), DefectCost::none(1));
        let g = truncated_grid(1, 4.0, 0.02).unwrap();
        let t = ergodic_constant_truncated(&sp, 4.0, &DEFAULT_LAMBDAS, &g).unwrap();
        assert!(t.value.abs() < 1e-6);
        let sp = spec(PeriodicCost::zero(1), DefectCost::well(1, 1.0));
        let t = ergodic_constant_truncated(&sp, 4.0, &DEFAULT_LAMBDAS, &g).unwrap();
        assert!((t.value - 1.0).abs() < 2e-2, "{}", t.value);
        assert!(ergodic_constant_truncated(&sp, 0.4, &DEFAULT_LAMBDAS, &g).is_err());
    }

    #[test]
    fn radius_sweep_flat() {
        let sp = spec(PeriodicCost::zero(1), DefectCost::well(1, 1.0));
        let e = ergodic_constant(&sp, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.02).unwrap();
        assert!((e.value - 1.0).abs() < 2e-2 && e.converged);
        assert!(e.monotonicity_violation <= 1e-2);
    }

    #[test]
    fn sine_environment() {
        let s = PeriodicCost::sine(1.0, 0.0);
        let sp = spec(s.clone(), DefectCost::well(1, 1.0));
        let e = ergodic_constant(&sp, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.01).unwrap();
        let exact = analytic_e_1d(&s, &DefectCost::well(1, 1.0)).unwrap();
        assert!((e.value - exact).abs() < 3e-2, "{} vs {exact}", e.value);
        assert!(e.monotonicity_violation <= 1e-2);
        let plain = spec(s, DefectCost::none(1));
        let e = ergodic_constant(&plain, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.01).unwrap();
        assert!((e.value - 1.0).abs() < 3e-2, "{}", e.value);
    }
}
