//! Global corrector `w`, its growth, the partner slope `p̃` and the
//! piecewise-affine corrector `χ_{p,p̃}`.

use serde::Serialize;

use crate::effective::EffectiveHamiltonianTable;
use crate::ergodic::{ergodic_constant_truncated, truncated_grid};
use crate::error::{Error, Result};
use crate::fields::{norm, pad, HamiltonianSpec};
use crate::grid::GridField;
use crate::solver::{momentum_cost, solve_scheme, NodeKind, Scheme, SolveOptions};

/// Residual of `H(y, Du) = level` in the scheme sense at every active node,
/// skipping controls whose foot leaves the domain.
fn discrete_residual(spec: &HamiltonianSpec, u: &GridField, level: f64, skip: impl Fn(usize) -> bool) -> Result<Vec<f64>> {
    let cf = spec.control_form()?;
    let dt = u.h / cf.controls.max_speed();
    let dim = u.dim;
    let mut out = Vec::new();
    for i in u.active_indices() {
        if skip(i) {
            continue;
        }
        let y = u.coords(i);
        let ell = cf.landscape.eval(&y[..dim]);
        let mut best = f64::NEG_INFINITY;
        for (j, a) in cf.controls.vectors().iter().enumerate() {
            let foot = [y[0] + dt * a[0], y[1] + dt * a[1]];
            if let Some(next) = u.interpolate(&foot[..dim]) {
                best = best.max((u.values[i] - next) / dt - ell - cf.effective_control_cost(j));
            }
        }
        out.push((best - level).abs());
    }
    Ok(out)
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Corrector on a ball, normalized to vanish at the node nearest the origin.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorField {
    #[serde(skip)]
    pub field: GridField,
    pub radius: f64,
    /// Level of the equation it solves (`E^R` here).
    pub level: f64,
    pub residual_median: f64,
    pub lipschitz: f64,
}

/// `w^R ≈ w^{λ,R} − w^{λ,R}(0)` at the smallest rate of the schedule.
pub fn corrector_w(spec: &HamiltonianSpec, radius: f64, lambdas: &[f64], h: f64) -> Result<CorrectorField> {
    let grid = truncated_grid(spec.dim(), radius, h)?;
    let t = ergodic_constant_truncated(spec, radius, lambdas, &grid)?;
    let w0 = t.last_field.values[t.last_field.origin_index()];
    let field = t.last_field.map(|_, v| v - w0);
    // interior nodes only: the constraint boundary carries its own Hamiltonian
    let inner = radius - 2.0 * field.h;
    let dim = field.dim;
    let residual = discrete_residual(spec, &field, t.value, |i| norm(&field.coords(i)[..dim]) > inner)?;
    Ok(CorrectorField {
        radius,
        level: t.value,
        residual_median: median(&residual),
        lipschitz: field.gradient_sup(),
        field,
    })
}

/// `m(r) = min_{r ≤ |y| < r+h} (w(y) − p₀·y)` on a radius ladder.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub p0: Vec<f64>,
    pub ladder: Vec<(f64, f64)>,
    pub strictly_increasing: bool,
    /// `min_r m(r)`.
    pub lower_bound: f64,
    /// Oscillation of `w − p₀·y` on the unit ball, the bound expected when the
    /// defect is invisible.
    pub oscillation: f64,
    pub bounded_below: bool,
    /// Whether the report matches the expected regime.
    pub verdict: bool,
    pub visible: bool,
}

/// Evaluates the growth ladder on an already computed corrector.
pub fn growth_ladder(w: &CorrectorField, p0: &[f64], ladder: &[f64], visible: bool) -> Result<GrowthReport> {
    let f = &w.field;
    let dim = f.dim;
    let q = pad(p0);
    let tilted = |i: usize| {
        let y = f.coords(i);
        f.values[i] - q[0] * y[0] - q[1] * y[1]
    };
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let m = f
            .active_indices()
            .filter(|&i| {
                let d = norm(&f.coords(i)[..dim]);
                d >= r - 1e-9 && d < r + f.h - 1e-9
            })
            .map(tilted)
            .fold(f64::INFINITY, f64::min);
        if !m.is_finite() {
            return Err(Error::Config(format!("no grid nodes on the shell of radius {r}")));
        }
        rows.push((r, m));
    }
    let oscillation = f
        .active_indices()
        .filter(|&i| norm(&f.coords(i)[..dim]) <= 1.0 + 1e-9)
        .map(|i| tilted(i).abs())
        .fold(0.0, f64::max);
    let strictly_increasing = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let lower_bound = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let bounded_below = lower_bound >= -oscillation - 1e-2 * (1.0 + oscillation);
    Ok(GrowthReport {
        p0: p0.to_vec(),
        ladder: rows,
        strictly_increasing,
        lower_bound,
        oscillation,
        bounded_below,
        verdict: if visible { strictly_increasing } else { bounded_below },
        visible,
    })
}

/// Computes `w^R` and its growth ladder against `p₀`.
pub fn check_growth(
    spec: &HamiltonianSpec,
    p0: &[f64],
    radius: f64,
    ladder: &[f64],
    lambdas: &[f64],
    h: f64,
    visible: bool,
) -> Result<GrowthReport> {
    if let Some(r) = ladder.iter().find(|&&r| r + h > radius) {
        return Err(Error::Config(format!("ladder radius {r} does not fit in the ball of radius {radius}")));
    }
    let w = corrector_w(spec, radius, lambdas, h)?;
    growth_ladder(&w, p0, ladder, visible)
}

/// The pair `(p, p̃)` with `H̄(p̃) = H̄(p)` on the opposite side of `p₀`.
#[derive(Debug, Clone, Serialize)]
pub struct PTildePair {
    pub p: Vec<f64>,
    pub p_tilde: Vec<f64>,
    /// Unit vector with `(p − p₀)·e < 0 < (p̃ − p₀)·e`.
    pub e: Vec<f64>,
    pub level: f64,
    /// The level sits on the flat part of `H̄`; `p̃` is the far plateau edge.
    pub degenerate: bool,
}

impl PTildePair {
    /// Checks the defining properties against the table.
    pub fn invariants_hold(&self, table: &EffectiveHamiltonianTable) -> bool {
        let p0 = pad(&table.p0());
        let (p, pt, e) = (pad(&self.p), pad(&self.p_tilde), pad(&self.e));
        let a = [p[0] - p0[0], p[1] - p0[1]];
        let b = [pt[0] - p0[0], pt[1] - p0[1]];
        let cross = a[0] * b[1] - a[1] * b[0];
        let colinear = cross.abs() <= 1e-9 * (1.0 + norm(&a) * norm(&b));
        let level_ok = (table.eval(&self.p_tilde) - self.level).abs() <= 1e-3 * (1.0 + self.level.abs());
        let sides = a[0] * e[0] + a[1] * e[1] < 0.0 && b[0] * e[0] + b[1] * e[1] > 0.0;
        colinear && (level_ok || self.degenerate) && sides
    }
}

pub fn find_ptilde(table: &EffectiveHamiltonianTable, p: &[f64]) -> Result<PTildePair> {
    let p0 = pad(&table.p0());
    let q = pad(p);
    let dim = table.dim;
    let dir = [q[0] - p0[0], q[1] - p0[1]];
    let dist = norm(&dir);
    if dist <= 1e-12 {
        return Err(Error::Precondition("p coincides with the minimizer p0".into()));
    }
    let level = table.eval(p);
    let at = |t: f64| -> Vec<f64> { (0..dim).map(|i| p0[i] + t * dir[i]).collect() };
    let e: Vec<f64> = (0..dim).map(|i| -dir[i] / dist).collect();
    if level < table.min_value - 1e-12 {
        return Err(Error::Precondition(format!("level {level} is below min H̄ = {}", table.min_value)));
    }
    if let Some((lo, hi)) = table.plateau {
        if level <= table.min_value + crate::effective::PLATEAU_TOL {
            // the far edge of the flat set along the line
            let s_p = q[0] * table.direction[0] + q[1] * table.direction[1];
            let edge = if s_p >= table.s0 { lo } else { hi };
            let pt: Vec<f64> = (0..dim).map(|i| edge * table.direction[i]).collect();
            return Ok(PTildePair { p: p.to_vec(), p_tilde: pt, e, level, degenerate: true });
        }
    }
    // walk out on the t < 0 side until the level is crossed
    let f = |t: f64| table.eval(&at(t)) - level;
    let span = (table.s[table.s.len() - 1] - table.s[0]).abs() / dist;
    let mut t_far = -1.0;
    while f(t_far) < 0.0 {
        t_far *= 2.0;
        if -t_far > 8.0 * span.max(1.0) {
            return Err(Error::Precondition(format!("no crossing of level {level} on the far side of p0")));
        }
    }
    let (mut a, mut b) = (t_far, 0.0);
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        if f(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(PTildePair { p: p.to_vec(), p_tilde: at(0.5 * (a + b)), e, level, degenerate: false })
}

/// Periodic correctors of the two slopes, as mean-zero torus fields.
#[derive(Debug, Clone)]
pub struct SlopeCorrectors<'a> {
    pub chi_p: &'a GridField,
    pub chi_p_tilde: &'a GridField,
}

/// `χ^R_{p,p̃}` with its sandwich and sublinearity diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PiecewiseCorrector {
    #[serde(skip)]
    pub field: GridField,
    pub radius: f64,
    pub level: f64,
    /// `max(χ^R − min(p·y + χ_p, p̃·y + χ_p̃))`.
    pub upper_constant: f64,
    pub iterations: usize,
}

fn boundary_data(p: [f64; 2], pt: [f64; 2], chi: &SlopeCorrectors<'_>, y: [f64; 2], dim: usize) -> f64 {
    let per = |f: &GridField| f.interpolate(&y[..dim]).expect("torus interpolation");
    let a = p[0] * y[0] + p[1] * y[1] + per(chi.chi_p);
    let b = pt[0] * y[0] + pt[1] * y[1] + per(chi.chi_p_tilde);
    a.min(b)
}

/// Dirichlet problem `H(y, Dχ) = H̄(p)` in `B_R` with exit data
/// `min(p·y + χ_p, p̃·y + χ_p̃)`, solved as an undiscounted exit-time problem
/// with running cost `ℓ + ℓ̄ + H̄(p)`.
#[allow(clippy::too_many_arguments)]
pub fn corrector_piecewise(
    spec: &HamiltonianSpec,
    p: &[f64],
    p_tilde: &[f64],
    hbar_p: f64,
    ergodic: f64,
    radius: f64,
    h: f64,
    chi: &SlopeCorrectors<'_>,
) -> Result<PiecewiseCorrector> {
    if hbar_p <= ergodic {
        return Err(Error::Precondition(format!(
            "piecewise corrector needs H̄(p) > E, got H̄(p) = {hbar_p} and E = {ergodic}"
        )));
    }
    let dim = spec.dim();
    let grid = GridField::ball(dim, radius, h)?;
    let cf = spec.control_form()?;
    let (pp, pt) = (pad(p), pad(p_tilde));
    let edge = radius - grid.h + 1e-9;
    let mut kinds = Vec::with_capacity(grid.len());
    let mut pinned = vec![0.0; grid.len()];
    let mut state = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if !grid.active[i] {
            kinds.push(NodeKind::Inactive);
            continue;
        }
        let y = grid.coords(i);
        if norm(&y[..dim]) >= edge {
            kinds.push(NodeKind::Pinned);
            pinned[i] = boundary_data(pp, pt, chi, y, dim);
        } else {
            kinds.push(NodeKind::Free);
            state[i] = cf.landscape.eval(&y[..dim]) + hbar_p;
        }
    }
    let scheme = Scheme {
        grid: &grid,
        controls: &cf.controls,
        control_cost: momentum_cost(&cf.controls, &cf.control_cost, cf.shift),
        state_cost: state,
        discount: None,
        kinds,
        pinned_values: pinned,
    };
    let (vals, rep) = solve_scheme(&scheme, &SolveOptions::default())?;
    let mut field = grid.clone();
    field.values = vals;
    let upper_constant = field
        .active_indices()
        .map(|i| field.values[i] - boundary_data(pp, pt, chi, field.coords(i), dim))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PiecewiseCorrector { field, radius, level: hbar_p, upper_constant, iterations: rep.iterations })
}

/// Subsolution `σ = min(w − c, p·y + χ_p, p̃·y + χ_p̃)` and the sandwich it gives.
#[derive(Debug, Clone, Serialize)]
pub struct Sandwich {
    /// Shift making `w − c` the smallest branch on `B_{R₀+1}`.
    pub c: f64,
    /// `max(σ − χ^R)`: nonpositive up to discretization error.
    pub lower_violation: f64,
    /// `max(χ^R − min(...))`.
    pub c2: f64,
    /// `max(min(...) − σ)`.
    pub lower_gap: f64,
}

pub fn sandwich(
    chi_r: &PiecewiseCorrector,
    w: &CorrectorField,
    p: &[f64],
    p_tilde: &[f64],
    defect_radius: f64,
    chi: &SlopeCorrectors<'_>,
) -> Result<Sandwich> {
    let f = &chi_r.field;
    let dim = f.dim;
    let (pp, pt) = (pad(p), pad(p_tilde));
    let wv = |y: [f64; 2]| -> Result<f64> {
        w.field
            .interpolate(&y[..dim])
            .ok_or_else(|| Error::Config(format!("global corrector does not cover {:?}", &y[..dim])))
    };
    let mut c = f64::NEG_INFINITY;
    for i in f.active_indices() {
        let y = f.coords(i);
        if norm(&y[..dim]) <= defect_radius + 1.0 {
            c = c.max(wv(y)? - boundary_data(pp, pt, chi, y, dim));
        }
    }
    let c = c + 1.0;
    let (mut lower_violation, mut c2, mut lower_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in f.active_indices() {
        let y = f.coords(i);
        let g = boundary_data(pp, pt, chi, y, dim);
        let sigma = (wv(y)? - c).min(g);
        lower_violation = lower_violation.max(sigma - f.values[i]);
        c2 = c2.max(f.values[i] - g);
        lower_gap = lower_gap.max(g - sigma);
    }
    Ok(Sandwich { c, lower_violation, c2, lower_gap })
}

/// `max_{r ≤ |y| < r+h} |χ^R − min(p·y, p̃·y)| / r` for each radius.
pub fn sublinearity(chi_r: &PiecewiseCorrector, p: &[f64], p_tilde: &[f64], radii: &[f64]) -> Vec<(f64, f64)> {
    let f = &chi_r.field;
    let dim = f.dim;
    let (pp, pt) = (pad(p), pad(p_tilde));
    radii
        .iter()
        .map(|&r| {
            let m = f
                .active_indices()
                .filter(|&i| {
                    let d = norm(&f.coords(i)[..dim]);
                    d >= r - 1e-9 && d < r + f.h - 1e-9
                })
                .map(|i| {
                    let y = f.coords(i);
                    let aff = (pp[0] * y[0] + pp[1] * y[1]).min(pt[0] * y[0] + pt[1] * y[1]);
                    (f.values[i] - aff).abs() / r
                })
                .fold(0.0, f64::max);
            (r, m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{periodic_corrector, DEFAULT_LAMBDAS};
    use crate::fields::{DefectCost, Kinetic, PeriodicCost};

    fn spec(per: PeriodicCost, def: DefectCost) -> HamiltonianSpec {
        HamiltonianSpec::separable(Kinetic::Norm, per, def).unwrap()
    }

    #[test]
    fn flat_corrector_profile() {
        let zero = corrector_w(&spec(PeriodicCost::zero(1), DefectCost::none(1)), 4.0, &DEFAULT_LAMBDAS, 0.02).unwrap();
        assert!(zero.field.sup_norm() < 1e-9);
        let d = DefectCost::well(1, 1.0);
        let sp = spec(PeriodicCost::zero(1), d.clone());
        let mut lips = Vec::new();
        for r in [2.0, 4.0, 8.0] {
            let w = corrector_w(&sp, r, &DEFAULT_LAMBDAS, 0.02).unwrap();
            lips.push(w.lipschitz);
            if r == 4.0 {
                let mut worst: f64 = 0.0;
                for i in w.field.active_indices() {
                    let x = w.field.coords(i)[0];
                    if (0.0..=3.0).contains(&x) {
                        let exact = crate::oracles::w_lambda_flat(&d, 1e-3, x).unwrap().limit;
                        worst = worst.max((w.field.values[i] - exact).abs());
                    }
                }
                assert!(worst <= 3e-2, "{worst}");
            }
        }
        let (lo, hi) = lips.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(hi / lo <= 1.1, "{lips:?}");
    }

    #[test]
    fn growth_regimes() {
        let sp = spec(PeriodicCost::zero(1), DefectCost::well(1, 1.0));
        let g = check_growth(&sp, &[0.0], 6.0, &[1.0, 2.0, 3.0, 4.0], &DEFAULT_LAMBDAS, 0.02, true).unwrap();
        assert!(g.strictly_increasing && g.verdict, "{:?}", g.ladder);
        let sp = spec(PeriodicCost::sine(1.0, 0.0), DefectCost::none(1));
        let g = check_growth(&sp, &[0.0], 6.0, &[1.0, 2.0, 3.0, 4.0], &DEFAULT_LAMBDAS, 0.01, false).unwrap();
        assert!(g.bounded_below && g.verdict, "{:?} {}", g.ladder, g.oscillation);
    }

    #[test]
    fn ptilde_on_a_symmetric_table() {
        let s: Vec<f64> = (0..61).map(|k| -3.0 + 0.1 * k as f64).collect();
        let v: Vec<f64> = s.iter().map(|x| x.abs().max(1.0)).collect();
        let t = EffectiveHamiltonianTable::from_samples(1, [1.0, 0.0], s, v, 1.0, (1.0, 1.0)).unwrap();
        let pair = find_ptilde(&t, &[2.0]).unwrap();
        assert!((pair.p_tilde[0] + 2.0).abs() < 1e-3 && !pair.degenerate);
        assert!(pair.invariants_hold(&t));
        let flat = find_ptilde(&t, &[0.5]).unwrap();
        assert!(flat.degenerate && (flat.p_tilde[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn piecewise_without_environment() {
        let sp = spec(PeriodicCost::zero(1), DefectCost::none(1));
        let torus = GridField::torus(1, 50).unwrap();
        let c1 = periodic_corrector(&sp, &[1.0], 1e-2, &torus).unwrap().field;
        let c2 = periodic_corrector(&sp, &[-1.0], 1e-2, &torus).unwrap().field;
        let chi = SlopeCorrectors { chi_p: &c1, chi_p_tilde: &c2 };
        let r = corrector_piecewise(&sp, &[1.0], &[-1.0], 1.0, 0.0, 4.0, 0.02, &chi).unwrap();
        let worst = r.field.active_indices().map(|i| (r.field.values[i] + r.field.coords(i)[0].abs()).abs()).fold(0.0, f64::max);
        assert!(worst <= r.field.h, "{worst}");
        assert!(corrector_piecewise(&sp, &[1.0], &[-1.0], 1.0, 1.5, 4.0, 0.02, &chi).is_err());
    }

    #[test]
    fn sine_well_sandwich_and_sublinearity() {
        let sp = spec(PeriodicCost::sine(1.0, 0.0), DefectCost::well(1, 1.0));
        let torus = GridField::torus(1, 400).unwrap();
        let c1 = periodic_corrector(&sp, &[2.0], 1e-3, &torus).unwrap();
        let c2 = periodic_corrector(&sp, &[-2.0], 1e-3, &torus).unwrap();
        let chi = SlopeCorrectors { chi_p: &c1.field, chi_p_tilde: &c2.field };
        let mut c2s = Vec::new();
        for r in [4.0, 8.0] {
            let w = corrector_w(&sp, r, &DEFAULT_LAMBDAS, 0.01).unwrap();
            let x = corrector_piecewise(&sp, &[2.0], &[-2.0], 2.0, w.level, r, 0.01, &chi).unwrap();
            let sw = sandwich(&x, &w, &[2.0], &[-2.0], 0.5, &chi).unwrap();
            if r == 8.0 {
                let sub = sublinearity(&x, &[2.0], &[-2.0], &[2.0, 4.0, 6.0]);
                assert!(sub.windows(2).all(|w| w[1].1 < w[0].1));
            }
            assert!(sw.lower_violation <= 5e-2);
            c2s.push(sw.c2);
        }
        assert!(c2s.iter().all(|c| c.is_finite()));
    }
}
