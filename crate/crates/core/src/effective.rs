//! Effective Hamiltonian from the discounted periodic cell problem.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{pad, HamiltonianSpec, Kinetic, KineticTable, PeriodicCost};
use crate::grid::GridField;
use crate::solver::{solve_discounted_periodic, SolveOptions};

/// Default vanishing-discount schedule.
pub const DEFAULT_LAMBDAS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
/// Slack allowed in the approach of `−λ⟨w_λ⟩` to its limit before a warning.
pub const MONOTONE_TOL: f64 = 1e-3;
/// Values within this of the minimum count as a plateau when locating `p₀`.
pub const PLATEAU_TOL: f64 = 5e-3;

pub(crate) fn check_schedule(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < 3 {
        return Err(Error::Config(format!("discount schedule needs at least 3 entries, got {}", lambdas.len())));
    }
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Config("discount rates must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("discount schedule must be strictly decreasing".into()));
    }
    Ok(())
}

/// Least-squares line through `(x_i, y_i)`; returns `(intercept, slope)`.
pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Extrapolated limit of a discount sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    /// `(λ, level)` pairs in schedule order.
    pub sequence: Vec<(f64, f64)>,
    pub limit: f64,
    pub slope: f64,
    /// Spread of the last three levels.
    pub spread: f64,
}

impl Extrapolation {
    pub fn from_sequence(sequence: Vec<(f64, f64)>) -> Self {
        let tail = &sequence[sequence.len().saturating_sub(3)..];
        let (limit, slope) = linear_fit(tail);
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
        Extrapolation { sequence, limit, slope, spread: hi - lo }
    }

    /// True when the levels move toward the limit in one direction.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let v: Vec<f64> = self.sequence.iter().map(|p| p.1).collect();
        let up = v.windows(2).all(|w| w[1] >= w[0] - tol);
        let down = v.windows(2).all(|w| w[1] <= w[0] + tol);
        up || down
    }
}

/// `H̄(p)` with its discount sweep.
#[derive(Debug, Clone, Serialize)]
pub struct HbarEstimate {
    pub p: Vec<f64>,
    pub value: f64,
    pub extrapolation: Extrapolation,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Runs the discount schedule on one torus grid and extrapolates `−λ⟨w_λ⟩`.
pub fn effective_hamiltonian_at(
    spec: &HamiltonianSpec,
    p: &[f64],
    lambdas: &[f64],
    grid: &GridField,
) -> Result<HbarEstimate> {
    check_schedule(lambdas)?;
    let mut seq = Vec::with_capacity(lambdas.len());
    let mut warm: Option<(Vec<f64>, f64, f64)> = None;
    let mut iterations = 0;
    for &lambda in lambdas {
        let mut opts = SolveOptions::default();
        if let Some((w, lp, level)) = &warm {
            // w_λ ≈ −H̄/λ + χ: move the constant part to the new rate
            let delta = level * (1.0 / lambda - 1.0 / lp);
            opts.warm_start = Some(w.iter().map(|v| v - delta).collect());
        }
        let (w, rep) = solve_discounted_periodic(spec, p, lambda, grid, &opts)?;
        iterations += rep.iterations;
        let level = -lambda * w.mean();
        seq.push((lambda, level));
        warm = Some((w.values, lambda, level));
    }
    let extrapolation = Extrapolation::from_sequence(seq);
    let mut warnings = Vec::new();
    if !extrapolation.is_monotone(MONOTONE_TOL) {
        warnings.push(format!("non-monotone discount sweep at p = {p:?}"));
    }
    Ok(HbarEstimate { p: p.to_vec(), value: extrapolation.limit, extrapolation, iterations, warnings })
}

/// `H̄` sampled along `p = s·direction` on a uniform `s` grid.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveHamiltonianTable {
    pub dim: usize,
    pub direction: [f64; 2],
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// Minimizer along the line, refined between nodes.
    pub s0: f64,
    pub min_value: f64,
    /// Several near-minimal nodes: `s0` is the midpoint of the flat set.
    pub plateau: Option<(f64, f64)>,
    /// `max_k (H_k − (H_{k−1} + H_{k+1})/2)`, clipped below at 0.
    pub convexity_violation: f64,
    /// `max |ΔH|/Δs` between adjacent nodes.
    pub lipschitz: f64,
    pub max_speed: f64,
    /// Smallest slope `(H(end) − H(s0))/|end − s0|` at the two ends.
    pub coercivity_slope: f64,
    /// `min_k (H_k − (r_f|p_k| − M_ℓ))`.
    pub coercivity_margin: f64,
    pub radial: bool,
    pub warnings: Vec<String>,
}

impl EffectiveHamiltonianTable {
    /// Builds a table from samples and fills every diagnostic.
    pub fn from_samples(
        dim: usize,
        direction: [f64; 2],
        s: Vec<f64>,
        values: Vec<f64>,
        max_speed: f64,
        coercivity: (f64, f64),
    ) -> Result<Self> {
        if s.len() != values.len() || s.len() < 3 {
            return Err(Error::Config("table needs at least 3 matching samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("table has non-finite values".into()));
        }
        let n = s.len();
        let (kmin, &vmin) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        // contiguous near-minimal run around the minimizer
        let mut lo = kmin;
        while lo > 0 && values[lo - 1] <= vmin + PLATEAU_TOL {
            lo -= 1;
        }
        let mut hi = kmin;
        while hi + 1 < n && values[hi + 1] <= vmin + PLATEAU_TOL {
            hi += 1;
        }
        let (s0, min_value, plateau) = if hi > lo {
            (0.5 * (s[lo] + s[hi]), vmin, Some((s[lo], s[hi])))
        } else if kmin > 0 && kmin + 1 < n {
            let (a, b, c) = (values[kmin - 1], values[kmin], values[kmin + 1]);
            let d = s[kmin + 1] - s[kmin];
            let curv = a - 2.0 * b + c;
            if curv > 0.0 {
                let off = 0.5 * (a - c) / curv;
                let off = off.clamp(-0.5, 0.5);
                (s[kmin] + off * d, b - 0.25 * (a - c) * off, None)
            } else {
                (s[kmin], b, None)
            }
        } else {
            (s[kmin], vmin, None)
        };
        let convexity_violation = (1..n - 1)
            .map(|k| values[k] - 0.5 * (values[k - 1] + values[k + 1]))
            .fold(0.0, f64::max);
        let lipschitz = s
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        let slope = |k: usize| {
            let d = (s[k] - s0).abs();
            if d > 0.0 {
                (values[k] - min_value) / d
            } else {
                f64::INFINITY
            }
        };
        let coercivity_slope = slope(0).min(slope(n - 1));
        let (rf, ml) = coercivity;
        let coercivity_margin = s
            .iter()
            .zip(&values)
            .map(|(x, v)| v - (rf * x.abs() - ml))
            .fold(f64::INFINITY, f64::min);
        let mut warnings = Vec::new();
        if s0 - s[0] < 1e-12 || s[n - 1] - s0 < 1e-12 {
            warnings.push("minimizer sits at the edge of the table".into());
        }
        Ok(EffectiveHamiltonianTable {
            dim,
            direction,
            s,
            values,
            s0,
            min_value,
            plateau,
            convexity_violation,
            lipschitz,
            max_speed,
            coercivity_slope,
            coercivity_margin,
            radial: false,
            warnings,
        })
    }

    /// The minimizing covector `p₀`.
    pub fn p0(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.s0 * self.direction[i]).collect()
    }

    /// Covector of node `k`.
    pub fn p_at(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.s[k] * self.direction[i]).collect()
    }

    /// Linear interpolation along the line, end slopes beyond.
    pub fn eval_scalar(&self, s: f64) -> f64 {
        let n = self.s.len();
        let i = match self.s.partition_point(|&q| q <= s) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// `H̄(p)`: radial tables use `|p|`, line tables the projection on the direction.
    pub fn eval(&self, p: &[f64]) -> f64 {
        let q = pad(p);
        if self.radial {
            self.eval_scalar((q[0] * q[0] + q[1] * q[1]).sqrt())
        } else {
            self.eval_scalar(q[0] * self.direction[0] + q[1] * self.direction[1])
        }
    }

    /// `max |H̄(s) − H̄(−s)|` over the nodes whose mirror is also a node.
    pub fn symmetry_gap(&self) -> f64 {
        let n = self.s.len();
        (0..n)
            .filter(|&k| (self.s[k] + self.s[n - 1 - k]).abs() < 1e-9)
            .map(|k| (self.values[k] - self.values[n - 1 - k]).abs())
            .fold(0.0, f64::max)
    }

    /// Kinetic term for the homogenized problem. Radial tables keep the
    /// `s ≥ 0` half.
    pub fn to_kinetic(&self) -> Result<Kinetic> {
        if self.radial || self.dim == 2 {
            let (s, v): (Vec<f64>, Vec<f64>) =
                self.s.iter().zip(&self.values).filter(|(s, _)| **s >= -1e-12).map(|(s, v)| (s.max(0.0), *v)).unzip();
            if s.first() != Some(&0.0) {
                return Err(Error::Config("radial table must contain |p| = 0".into()));
            }
            Ok(Kinetic::Table(KineticTable::new(s, v, true)?))
        } else {
            Ok(Kinetic::Table(KineticTable::new(self.s.clone(), self.values.clone(), false)?))
        }
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.convexity_violation <= tol
    }
}

/// Tabulates `H̄` on `n_p` uniform points of `[p_min, p_max]` (1D).
pub fn tabulate(
    spec: &HamiltonianSpec,
    p_min: f64,
    p_max: f64,
    n_p: usize,
    lambdas: &[f64],
    grid: &GridField,
) -> Result<EffectiveHamiltonianTable> {
    if spec.dim() != 1 {
        return Err(Error::Config("use tabulate_along for two-dimensional specs".into()));
    }
    tabulate_along(spec, [1.0, 0.0], p_min, p_max, n_p, lambdas, grid)
}

/// Tabulates `H̄(s·direction)` on `n_p` uniform values of `s`.
pub fn tabulate_along(
    spec: &HamiltonianSpec,
    direction: [f64; 2],
    s_min: f64,
    s_max: f64,
    n_p: usize,
    lambdas: &[f64],
    grid: &GridField,
) -> Result<EffectiveHamiltonianTable> {
    if n_p < 5 {
        return Err(Error::Config(format!("table needs at least 5 points, got {n_p}")));
    }
    if !(s_max > s_min) {
        return Err(Error::Config("table range must be nonempty".into()));
    }
    check_schedule(lambdas)?;
    let dim = spec.dim();
    let len = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !(len > 0.0) {
        return Err(Error::Config("table direction must be nonzero".into()));
    }
    let dir = if dim == 1 { [direction[0].signum(), 0.0] } else { [direction[0] / len, direction[1] / len] };
    let s: Vec<f64> = (0..n_p).map(|k| s_min + (s_max - s_min) * k as f64 / (n_p - 1) as f64).collect();
    let estimates = s
        .par_iter()
        .map(|&sk| {
            let p: Vec<f64> = (0..dim).map(|i| sk * dir[i]).collect();
            effective_hamiltonian_at(spec, &p, lambdas, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = estimates.iter().map(|e| e.value).collect();
    let mut table =
        EffectiveHamiltonianTable::from_samples(dim, dir, s, values, spec.max_speed(), spec.coercivity_constants()?)?;
    for e in estimates {
        table.warnings.extend(e.warnings);
    }
    Ok(table)
}

/// `H̄(p)` for `|p| − ℓ(y)` in 1D: `−inf ℓ` below the threshold `⟨ℓ⟩ − inf ℓ`,
/// `|p| − ⟨ℓ⟩` above it.
pub fn analytic_hbar_1d(cost: &PeriodicCost, p: f64) -> Result<f64> {
    if cost.dim() != 1 {
        return Err(Error::Precondition("closed-form effective Hamiltonian is one-dimensional".into()));
    }
    let (mean, inf) = (cost.mean(), cost.inf());
    Ok(if p.abs() <= mean - inf { -inf } else { p.abs() - mean })
}

/// Mean-zero periodic corrector and its discrete cell-problem residual.
#[derive(Debug, Clone)]
pub struct PeriodicCorrector {
    pub field: GridField,
    /// `−λ⟨w_λ⟩`, the level the residual is measured against.
    pub level: f64,
    /// Per-node `|H_Δ(y, p + Dχ) − level|`.
    pub residual: Vec<f64>,
}

impl PeriodicCorrector {
    pub fn residual_median(&self) -> f64 {
        let mut r = self.residual.clone();
        r.sort_by(f64::total_cmp);
        r[r.len() / 2]
    }

    pub fn residual_max(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }
}

pub fn periodic_corrector(spec: &HamiltonianSpec, p: &[f64], lambda: f64, grid: &GridField) -> Result<PeriodicCorrector> {
    // tighter than the default so the corrector is not dominated by the stopping error
    let opts = SolveOptions { tol: 1e-13, ..SolveOptions::default() };
    let (w, rep) = solve_discounted_periodic(spec, p, lambda, grid, &opts)?;
    let mean = w.mean();
    let level = -lambda * mean;
    let chi = w.map(|_, v| v - mean);
    // second pass removes the rounding left by the large constant part
    let drift = chi.mean();
    let chi = chi.map(|_, v| v - drift);
    let cf = spec.control_form()?;
    let pp = pad(p);
    let dt = rep.time_step;
    let dim = grid.dim;
    let residual = (0..grid.len())
        .map(|i| {
            let y = grid.coords(i);
            let ell = cf.landscape.periodic.eval(&y[..dim]);
            let h = cf
                .controls
                .vectors()
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let foot = [y[0] + dt * a[0], y[1] + dt * a[1]];
                    let next = chi.interpolate(&foot[..dim]).expect("torus interpolation");
                    (chi.values[i] - next) / dt - ell - cf.effective_control_cost(j) - pp[0] * a[0] - pp[1] * a[1]
                })
                .fold(f64::NEG_INFINITY, f64::max);
            (h - level).abs()
        })
        .collect();
    Ok(PeriodicCorrector { field: chi, level, residual })
}
