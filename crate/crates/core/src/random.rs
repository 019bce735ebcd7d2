//! Bernoulli lattices of defects.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{norm, DefectLattice, HamiltonianSpec};
use crate::grid::{Geometry, GridField};
use crate::oracles::FlatDefectSolution;
use crate::solver::{solve_eps_problem, SolveOptions, SolveReport};

/// `u_ε` must be this close to `ū` at the edge of a truncated window.
pub const WINDOW_TOL: f64 = 1e-3;

/// How the occupation probability is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Density {
    Fixed { eta: f64 },
    /// `η = η̄·ε`.
    Scaled { eta_bar: f64 },
}

impl Density {
    pub fn probability(&self, eps: f64) -> Result<f64> {
        let eta = match *self {
            Density::Fixed { eta } => eta,
            Density::Scaled { eta_bar } => eta_bar * eps,
        };
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("occupation probability {eta} is outside [0, 1]")));
        }
        Ok(eta)
    }
}

/// Inclusive box of lattice indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub dim: usize,
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl IndexWindow {
    /// `[-half, half]^dim`.
    pub fn centered(dim: usize, half: i64) -> Self {
        let b = if dim == 2 { half } else { 0 };
        IndexWindow { dim, lo: [-half, -b], hi: [half, b] }
    }

    pub fn len(&self) -> usize {
        ((self.hi[0] - self.lo[0] + 1) * (self.hi[1] - self.lo[1] + 1)).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = [i64; 2]> + '_ {
        (self.lo[0]..=self.hi[0]).flat_map(move |i| (self.lo[1]..=self.hi[1]).map(move |j| [i, j]))
    }

    pub fn contains(&self, k: [i64; 2]) -> bool {
        (0..2).all(|a| k[a] >= self.lo[a] && k[a] <= self.hi[a])
    }
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

/// Stream id of a site; unique for `|k_i| < 2^31`.
fn site_key(k: [i64; 2]) -> u64 {
    (zigzag(k[0]) << 32) | (zigzag(k[1]) & 0xffff_ffff)
}

/// Uniform in `[0, 1)` keyed by `(seed, k)`.
pub fn site_uniform(base: &ChaCha8Rng, k: [i64; 2]) -> f64 {
    let mut rng = base.clone();
    rng.set_stream(site_key(k));
    rng.set_word_pos(0);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeRealization {
    pub window: IndexWindow,
    pub q: u32,
    pub eps: f64,
    pub density: Density,
    pub eta: f64,
    pub seed: u64,
    /// `X_k` in window order (first index slowest).
    pub indicators: Vec<bool>,
}

pub fn sample_lattice(density: Density, eps: f64, window: IndexWindow, q: u32, seed: u64) -> Result<LatticeRealization> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    if q == 0 {
        return Err(Error::Config("lattice multiplier q must be positive".into()));
    }
    if window.dim != 1 && window.dim != 2 {
        return Err(Error::Config("lattice dimension must be 1 or 2".into()));
    }
    let eta = density.probability(eps)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let indicators = window.iter().map(|k| site_uniform(&base, k) < eta).collect();
    Ok(LatticeRealization { window, q, eps, density, eta, seed, indicators })
}

impl LatticeRealization {
    pub fn is_set(&self, k: [i64; 2]) -> bool {
        if !self.window.contains(k) {
            return false;
        }
        let w = &self.window;
        let row = (w.hi[1] - w.lo[1] + 1) as usize;
        self.indicators[(k[0] - w.lo[0]) as usize * row + (k[1] - w.lo[1]) as usize]
    }

    pub fn sites(&self) -> Vec<[i64; 2]> {
        self.window.iter().zip(&self.indicators).filter(|(_, x)| **x).map(|(k, _)| k).collect()
    }

    pub fn frequency(&self) -> f64 {
        self.indicators.iter().filter(|x| **x).count() as f64 / self.indicators.len().max(1) as f64
    }

    /// Empirical frequency within three binomial standard deviations of `η`.
    pub fn frequency_plausible(&self) -> bool {
        let n = self.indicators.len().max(1) as f64;
        let sd = (self.eta * (1.0 - self.eta) / n).sqrt();
        (self.frequency() - self.eta).abs() <= 3.0 * sd + 1e-12
    }

    /// Physical position `εq·k` of a site.
    pub fn position(&self, k: [i64; 2]) -> [f64; 2] {
        let s = self.eps * self.q as f64;
        [s * k[0] as f64, s * k[1] as f64]
    }
}

/// Number of lattice steps beyond which `|u_ε − ū| ≤ WINDOW_TOL`, probing
/// along the first axis (the single-defect profile is radial).
pub fn required_reach(u_eps: &dyn Fn(&[f64]) -> f64, u_bar: f64, step: f64, dim: usize) -> usize {
    let mut m = 1usize;
    loop {
        let d = [m as f64 * step, 0.0];
        let e = [-(m as f64) * step, 0.0];
        if (u_eps(&d[..dim]) - u_bar).abs() <= WINDOW_TOL && (u_eps(&e[..dim]) - u_bar).abs() <= WINDOW_TOL {
            return m;
        }
        m = if m < 64 { m + 1 } else { m + m / 8 };
        if m > 1 << 26 {
            return m;
        }
    }
}

/// `min_k (X_k u_ε(x − εqk) + (1 − X_k) ū)` over the window.
pub fn u_random_min(x: &[f64], real: &LatticeRealization, u_eps: &dyn Fn(&[f64]) -> f64, u_bar: f64) -> Result<f64> {
    let dim = real.window.dim;
    if x.len() != dim {
        return Err(Error::Domain("point and lattice differ in dimension".into()));
    }
    let step = real.eps * real.q as f64;
    let reach = required_reach(u_eps, u_bar, step, dim) as i64;
    let c = [(x[0] / step).round() as i64, if dim == 2 { (x[1] / step).round() as i64 } else { 0 }];
    let w = &real.window;
    let mut available = i64::MAX;
    for (a, ca) in c.iter().enumerate().take(dim) {
        available = available.min(ca - w.lo[a]).min(w.hi[a] - ca);
    }
    if available < reach {
        return Err(Error::WindowTooSmall { required: reach as f64, available: available.max(0) as f64 });
    }
    let mut best = f64::INFINITY;
    let lo1 = if dim == 2 { c[1] - reach } else { 0 };
    let hi1 = if dim == 2 { c[1] + reach } else { 0 };
    for i in c[0] - reach..=c[0] + reach {
        for j in lo1..=hi1 {
            let k = [i, j];
            let v = if real.is_set(k) {
                let p = real.position(k);
                let y = [x[0] - p[0], if dim == 2 { x[1] - p[1] } else { 0.0 }];
                u_eps(&y[..dim])
            } else {
                u_bar
            };
            best = best.min(v);
        }
    }
    // sites beyond the reach contribute ū up to the window tolerance
    Ok(best.min(u_bar))
}

/// Solves the ε-problem with one defect copy on every occupied site.
pub fn direct_random_solve(
    real: &LatticeRealization,
    base: &HamiltonianSpec,
    alpha: f64,
    grid: &GridField,
) -> Result<(GridField, SolveReport)> {
    let dim = real.window.dim;
    if base.dim() != dim || grid.dim != dim {
        return Err(Error::Config("realization, spec and grid differ in dimension".into()));
    }
    let extent = match grid.geometry {
        Geometry::Box { half_width } => half_width,
        Geometry::Ball { radius } => radius,
        Geometry::Torus => return Err(Error::Config("random solve needs a box or ball grid".into())),
    };
    let step = real.eps * real.q as f64;
    for a in 0..dim {
        if (real.window.lo[a] as f64) * step > -extent || (real.window.hi[a] as f64) * step < extent {
            return Err(Error::Precondition(format!(
                "lattice window does not cover the domain [-{extent}, {extent}] along axis {a}"
            )));
        }
    }
    let lattice = DefectLattice::new(real.q as f64, real.sites())?;
    let landscape = base.landscape().clone().with_lattice(lattice);
    let spec = base.with_landscape(landscape)?;
    solve_eps_problem(&spec, alpha, real.eps, grid, &SolveOptions::default())
}

/// Empirical and exact CDF of `Z = e^{−kε}`, `k` geometric.
#[derive(Debug, Clone, Serialize)]
pub struct CdfTable {
    pub eps: f64,
    pub eta: f64,
    pub samples: usize,
    pub two_sided: bool,
    pub t: Vec<f64>,
    pub empirical: Vec<f64>,
    /// Exact law at this `ε`.
    pub exact: Vec<f64>,
    /// `t^η̄` (one-sided) or `t^{2η̄}` (two-sided) in the scaled regime.
    pub limit: Option<Vec<f64>>,
    pub dkw_band: f64,
    pub max_exact_gap: f64,
}

impl CdfTable {
    pub fn within_dkw(&self) -> bool {
        self.max_exact_gap <= self.dkw_band
    }
}

/// `k` with `P(k) = (1 − η)^k η`, `k ≥ 0`, by inversion.
fn geometric(rng: &mut ChaCha8Rng, eta: f64) -> u64 {
    if eta >= 1.0 {
        return 0;
    }
    if eta <= 0.0 {
        return u64::MAX;
    }
    // U in (0, 1]
    let u = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    (u.ln() / (-eta).ln_1p()).floor() as u64
}

/// `P(Z ≤ t) = (1 − η)^{⌈−ln t / ε⌉}` for one side.
pub fn exact_cdf(eta: f64, eps: f64, t: f64) -> f64 {
    if t >= 1.0 {
        return 1.0;
    }
    if t <= 0.0 {
        return 0.0;
    }
    let k = (-t.ln() / eps - 1e-12).ceil();
    ((1.0 - eta).ln() * k).exp()
}

pub fn limit_law_mc(density: Density, eps: f64, samples: usize, seed: u64, ts: &[f64], two_sided: bool) -> Result<CdfTable> {
    if samples < 10_000 {
        return Err(Error::Config(format!("need at least 10^4 samples, got {samples}")));
    }
    let eta = density.probability(eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<f64> = (0..samples)
        .map(|_| {
            let draw = |r: &mut ChaCha8Rng| {
                let k = geometric(r, eta);
                if k == u64::MAX { 0.0 } else { (-(k as f64) * eps).exp() }
            };
            let a = draw(&mut rng);
            if two_sided { a.max(draw(&mut rng)) } else { a }
        })
        .collect();
    z.sort_by(f64::total_cmp);
    let n = samples as f64;
    let empirical: Vec<f64> = ts.iter().map(|&t| z.partition_point(|&v| v <= t) as f64 / n).collect();
    let power = if two_sided { 2 } else { 1 };
    let exact: Vec<f64> = ts.iter().map(|&t| exact_cdf(eta, eps, t).powi(power)).collect();
    let limit = match density {
        Density::Scaled { eta_bar } => Some(ts.iter().map(|&t| t.powf(eta_bar * power as f64)).collect()),
        Density::Fixed { .. } => None,
    };
    let max_exact_gap = empirical.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CdfTable {
        eps,
        eta,
        samples,
        two_sided,
        t: ts.to_vec(),
        empirical,
        exact,
        limit,
        dkw_band: ((2.0f64 / 0.01).ln() / (2.0 * n)).sqrt(),
        max_exact_gap,
    })
}

/// Settings of the three density regimes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub fixed_eta: f64,
    pub fixed_eps: f64,
    pub fixed_realizations: usize,
    /// Sparse regime uses `η = ε²`.
    pub sparse_eps: f64,
    pub sparse_realizations: usize,
    pub scaled_eta_bar: f64,
    pub scaled_eps: f64,
    pub scaled_realizations: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig {
            fixed_eta: 0.3,
            fixed_eps: 0.01,
            fixed_realizations: 200,
            sparse_eps: 0.01,
            sparse_realizations: 200,
            scaled_eta_bar: 1.0,
            scaled_eps: 1e-3,
            scaled_realizations: 500,
            tol: 0.05,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeStat {
    pub eps: f64,
    pub eta: f64,
    pub realizations: usize,
    /// Fraction of `u(0)` within `tol` of the regime's target.
    pub fraction: f64,
    /// Probability of that event at this `ε`, from the exact site law.
    pub expected_fraction: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub defect_floor: f64,
    pub fixed: RegimeStat,
    pub sparse: RegimeStat,
    pub scaled: RegimeStat,
    /// `(max − min)/|ℓ₀(0)|` in the scaled regime.
    pub scaled_coverage: f64,
}

/// `u(0)` for `count` independent realizations (seeds `seed + r`).
pub fn origin_values(sol: &FlatDefectSolution, density: Density, count: usize, seed: u64) -> Result<Vec<f64>> {
    let eps = sol.eps();
    let u = |y: &[f64]| sol.eval(y[0]);
    let reach = required_reach(&u, 0.0, eps, 1) as i64;
    let window = IndexWindow::centered(1, reach + 1);
    (0..count)
        .into_par_iter()
        .map(|r| {
            let real = sample_lattice(density, eps, window, 1, seed.wrapping_add(r as u64))?;
            u_random_min(&[0.0], &real, &u, 0.0)
        })
        .collect()
}

/// Runs the three regimes on a flat environment with one downward defect.
pub fn regime_summary(defect: &crate::fields::DefectCost, cfg: &RegimeConfig) -> Result<RegimeReport> {
    let floor = defect.at_origin();
    let stat = |eps: f64, density: Density, count: usize, seed: u64, target: f64| -> Result<RegimeStat> {
        let sol = FlatDefectSolution::downward(defect, eps)?;
        let vals = origin_values(&sol, density, count, seed)?;
        let eta = density.probability(eps)?;
        let fraction = vals.iter().filter(|v| (*v - target).abs() <= cfg.tol).count() as f64 / count as f64;
        // exact probability: sites whose defect alone brings u(0) near the target
        let u = |y: &[f64]| sol.eval(y[0]);
        let reach = required_reach(&u, 0.0, eps, 1) as i64;
        let near: i64 = (-reach..=reach).filter(|&k| (sol.eval(-(k as f64) * eps) - target).abs() <= cfg.tol).count() as i64;
        let below: i64 = (-reach..=reach).filter(|&k| sol.eval(-(k as f64) * eps) < target - cfg.tol).count() as i64;
        // the nearest occupied site decides u(0); nearness is monotone in |k|
        let expected_fraction = if target == 0.0 {
            (1.0 - eta).powi((2 * reach + 1 - near) as i32)
        } else {
            (1.0 - (1.0 - eta).powi(near as i32)) * (1.0 - eta).powi(below as i32)
        };
        let (min, max) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        Ok(RegimeStat { eps, eta, realizations: count, fraction, expected_fraction, min, max })
    };
    let fixed = stat(cfg.fixed_eps, Density::Fixed { eta: cfg.fixed_eta }, cfg.fixed_realizations, cfg.seed, floor)?;
    let sparse = stat(
        cfg.sparse_eps,
        Density::Fixed { eta: cfg.sparse_eps * cfg.sparse_eps },
        cfg.sparse_realizations,
        cfg.seed.wrapping_add(1 << 32),
        0.0,
    )?;
    let scaled = stat(
        cfg.scaled_eps,
        Density::Scaled { eta_bar: cfg.scaled_eta_bar },
        cfg.scaled_realizations,
        cfg.seed.wrapping_add(2 << 32),
        floor,
    )?;
    let scaled_coverage = if floor != 0.0 { (scaled.max - scaled.min) / floor.abs() } else { 0.0 };
    Ok(RegimeReport { defect_floor: floor, fixed, sparse, scaled, scaled_coverage })
}

/// Evidence for the separation multiplier `q` in the radial 2D setting.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub eps: f64,
    pub h: f64,
    /// Discrete Lipschitz bound of `u_ε`.
    pub lipschitz: f64,
    /// Smallest radial slope on the ring where `u_ε` stays well below `ū`.
    pub delta: f64,
    pub ring: (f64, f64),
    /// `3 + M/δ`.
    pub threshold: f64,
    /// `(q, passes)` for every candidate above the threshold that fits the grid.
    pub checked: Vec<(u32, bool)>,
    pub chosen: Option<u32>,
    pub origin_value: f64,
    pub expected_origin_value: f64,
    pub symmetry_deviation: f64,
    #[serde(skip)]
    pub field: GridField,
}

fn central_gradient(f: &GridField, i: usize) -> Option<[f64; 2]> {
    let x = f.coords(i);
    let h = f.h;
    let gx = (f.interpolate(&[x[0] + h, x[1]])? - f.interpolate(&[x[0] - h, x[1]])?) / (2.0 * h);
    let gy = (f.interpolate(&[x[0], x[1] + h])? - f.interpolate(&[x[0], x[1] - h])?) / (2.0 * h);
    Some([gx, gy])
}

/// Solves the single-defect ε-problem on `grid` (2D ball) and tests the
/// two-support comparison for each candidate `q`.
pub fn verify_separation_2d(
    spec: &HamiltonianSpec,
    hbar0: f64,
    eps: f64,
    grid: &GridField,
    candidates: &[u32],
) -> Result<SeparationReport> {
    if spec.dim() != 2 || grid.dim != 2 {
        return Err(Error::Config("separation check is two-dimensional".into()));
    }
    let defect = &spec.landscape().defect;
    let fl = defect.flags();
    if !(fl.radial && fl.nonpositive && fl.single_min_at_origin) {
        return Err(Error::Precondition("defect must be radial, nonpositive, with its minimum at the origin".into()));
    }
    if !spec.landscape().periodic.is_constant() {
        return Err(Error::Precondition("separation check expects a constant environment".into()));
    }
    let expected_e = hbar0 - defect.at_origin();
    if expected_e <= hbar0 {
        return Err(Error::Precondition("defect is invisible: E = H̄(0)".into()));
    }
    let radius = match grid.geometry {
        Geometry::Ball { radius } | Geometry::Box { half_width: radius } => radius,
        Geometry::Torus => return Err(Error::Config("separation check needs a ball grid".into())),
    };
    let (u, _) = solve_eps_problem(spec, 1.0, eps, grid, &SolveOptions::default())?;
    let u_bar = -hbar0;
    let support = eps * defect.radius();
    let origin_value = u.values[u.origin_index()];
    // ring: outside the support, where u_ε < ū − β with β a quarter of the gap
    let beta = 0.25 * (expected_e - hbar0);
    let mut lipschitz: f64 = 0.0;
    let mut delta = f64::INFINITY;
    let mut ring = (f64::INFINITY, 0.0f64);
    for i in u.active_indices() {
        let x = u.coords(i);
        let r = norm(&x);
        let Some(g) = central_gradient(&u, i) else { continue };
        lipschitz = lipschitz.max(norm(&g));
        if r >= support + u.h && u.values[i] < u_bar - beta {
            let radial = (g[0] * x[0] + g[1] * x[1]) / r;
            delta = delta.min(radial);
            ring = (ring.0.min(r), ring.1.max(r));
        }
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::Precondition(format!("no positive radial slope on the ring (delta = {delta})")));
    }
    let threshold = 3.0 + lipschitz / delta;
    let inside: Vec<usize> = u.active_indices().filter(|&i| norm(&u.coords(i)) <= support + 1e-12).collect();
    let mut checked = Vec::new();
    let mut chosen = None;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    for q in sorted {
        if (q as f64) <= threshold {
            continue;
        }
        let spacing = eps * q as f64;
        let shifts: Vec<[f64; 2]> = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [2.0, 0.0], [2.0, 1.0]]
            .iter()
            .map(|k| [k[0] * spacing, k[1] * spacing])
            .filter(|s| norm(s) + support <= radius - 2.0 * u.h)
            .collect();
        if shifts.is_empty() {
            continue;
        }
        let mut ok = true;
        'outer: for s in &shifts {
            for &i in &inside {
                let z = u.coords(i);
                // both supports by symmetry of the pair
                for sign in [1.0, -1.0] {
                    let far = [z[0] - sign * s[0], z[1] - sign * s[1]];
                    let Some(v) = u.interpolate(&far) else { continue };
                    if u.values[i] > v + 1e-12 {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        checked.push((q, ok));
        if ok && chosen.is_none() {
            chosen = Some(q);
        }
    }
    let rot = std::f64::consts::FRAC_PI_4;
    let (c, s) = (rot.cos(), rot.sin());
    let symmetry_deviation = u
        .active_indices()
        .filter_map(|i| {
            let x = u.coords(i);
            let y = [c * x[0] - s * x[1], s * x[0] + c * x[1]];
            u.interpolate(&y).map(|v| (v - u.values[i]).abs())
        })
        .fold(0.0, f64::max);
    Ok(SeparationReport {
        eps,
        h: u.h,
        lipschitz,
        delta,
        ring,
        threshold,
        checked,
        chosen,
        origin_value,
        expected_origin_value: -expected_e,
        symmetry_deviation,
        field: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DefectCost;

    #[test]
    fn lattice_sampling() {
        let w = IndexWindow::centered(1, 5000);
        let all = sample_lattice(Density::Fixed { eta: 1.0 }, 0.1, w, 1, 3).unwrap();
        assert!(all.indicators.iter().all(|x| *x));
        let none = sample_lattice(Density::Fixed { eta: 0.0 }, 0.1, w, 1, 3).unwrap();
        assert!(none.indicators.iter().all(|x| !*x));
        let r = sample_lattice(Density::Fixed { eta: 0.3 }, 0.1, w, 1, 3).unwrap();
        assert!((r.frequency() - 0.3).abs() < 0.02 && r.frequency_plausible());
        // enlarging the window keeps earlier indicators
        let big = sample_lattice(Density::Fixed { eta: 0.3 }, 0.1, IndexWindow::centered(1, 6000), 1, 3).unwrap();
        assert!(w.iter().all(|k| r.is_set(k) == big.is_set(k)));
        assert!(sample_lattice(Density::Fixed { eta: 1.5 }, 0.1, w, 1, 3).is_err());
        assert!(sample_lattice(Density::Scaled { eta_bar: 2.0 }, 0.6, w, 1, 3).is_err());
    }

    #[test]
    fn min_formula_special_cases() {
        let d = DefectCost::well(1, 1.0);
        let eps = 0.05;
        let sol = FlatDefectSolution::downward(&d, eps).unwrap();
        let u = |y: &[f64]| sol.eval(y[0]);
        let w = IndexWindow::centered(1, 400);
        let empty = sample_lattice(Density::Fixed { eta: 0.0 }, eps, w, 1, 1).unwrap();
        assert_eq!(u_random_min(&[0.3], &empty, &u, 0.0).unwrap(), 0.0);
        let mut one = empty.clone();
        let mid = one.indicators.len() / 2;
        one.indicators[mid] = true;
        assert_eq!(u_random_min(&[0.3], &one, &u, 0.0).unwrap(), sol.eval(0.3));
        let mut two = one.clone();
        two.indicators[mid + 1] = true;
        for x in [-0.1, 0.0, 0.02, 0.025, 0.07, 0.4] {
            let a = u_random_min(&[x], &two, &u, 0.0).unwrap();
            let b = crate::oracles::two_defect_min(&d, eps, x).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
        let small = sample_lattice(Density::Fixed { eta: 0.3 }, eps, IndexWindow::centered(1, 20), 1, 1).unwrap();
        assert!(matches!(u_random_min(&[0.0], &small, &u, 0.0), Err(Error::WindowTooSmall { .. })));
    }

    #[test]
    fn geometric_law() {
        let ts = [0.25, 0.5, 0.75];
        for eta_bar in [0.5, 1.0, 2.0] {
            let t = limit_law_mc(Density::Scaled { eta_bar }, 1e-3, 100_000, 11, &ts, false).unwrap();
            let lim = t.limit.clone().unwrap();
            for (emp, l) in t.empirical.iter().zip(&lim) {
                assert!((emp - l).abs() <= 0.02);
            }
            assert!(t.within_dkw());
        }
        let t = limit_law_mc(Density::Scaled { eta_bar: 1.0 }, 1e-3, 100_000, 5, &[0.5], true).unwrap();
        assert!((t.empirical[0] - 0.25).abs() <= 0.02);
        assert!(limit_law_mc(Density::Scaled { eta_bar: 1.0 }, 1e-3, 100, 5, &[0.5], true).is_err());
    }

    #[test]
    fn regimes() {
        let rep = regime_summary(&DefectCost::well(1, 1.0), &RegimeConfig::default()).unwrap();
        assert!(rep.fixed.fraction >= 0.95);
        let sd = (rep.sparse.expected_fraction * (1.0 - rep.sparse.expected_fraction) / 200.0).sqrt();
        assert!((rep.sparse.fraction - rep.sparse.expected_fraction).abs() <= 3.0 * sd + 1e-9);
        assert!(rep.scaled.min <= -0.9 && rep.scaled.max >= -0.1, "{:?}", rep.scaled);
        assert!(rep.scaled_coverage >= 0.8);
    }

    #[test]
    fn direct_solve_matches_min_formula() {
        use crate::fields::{Kinetic, PeriodicCost};
        let d = DefectCost::well(1, 1.0);
        let eps = 0.05;
        let spec = HamiltonianSpec::separable(Kinetic::Norm, PeriodicCost::zero(1), d.clone()).unwrap();
        let grid = GridField::boxed(1, 3.0, 0.0125).unwrap();
        let window = IndexWindow::centered(1, 200);
        let real = sample_lattice(Density::Fixed { eta: 0.3 }, eps, window, 1, 42).unwrap();
        let (u, _) = direct_random_solve(&real, &spec, 1.0, &grid).unwrap();
        let sol = FlatDefectSolution::downward(&d, eps).unwrap();
        let ue = |y: &[f64]| sol.eval(y[0]);
        let mut err: f64 = 0.0;
        for i in u.active_indices() {
            let x = u.coords(i)[0];
            if x.abs() <= 2.0 {
                err = err.max((u.values[i] - u_random_min(&[x], &real, &ue, 0.0).unwrap()).abs());
            }
        }
        assert!(err <= (3.0 * grid.h).max(3e-2), "{err}");
        let (again, _) = direct_random_solve(&real, &spec, 1.0, &grid).unwrap();
        assert_eq!(u.values, again.values);
        let empty = sample_lattice(Density::Fixed { eta: 0.0 }, eps, window, 1, 42).unwrap();
        let (z, _) = direct_random_solve(&empty, &spec, 1.0, &grid).unwrap();
        assert!(z.sup_norm() < 1e-9);
        let narrow = sample_lattice(Density::Fixed { eta: 0.3 }, eps, IndexWindow::centered(1, 10), 1, 42).unwrap();
        assert!(matches!(direct_random_solve(&narrow, &spec, 1.0, &grid), Err(Error::Precondition(_))));
    }

    #[test]
    fn radial_separation() {
        use crate::fields::{Kinetic, PeriodicCost};
        let spec = HamiltonianSpec::separable(Kinetic::Relativistic, PeriodicCost::zero(2), DefectCost::well(2, 1.0)).unwrap();
        let g = GridField::ball_nodes(2, 4.0, 201).unwrap();
        let r = verify_separation_2d(&spec, 0.0, 0.25, &g, &(1..=12).collect::<Vec<_>>()).unwrap();
        assert!(r.chosen.is_some_and(|q| q <= 12 && q as f64 > r.threshold));
        assert!((r.origin_value + 1.0).abs() <= 5e-2);
        assert!(r.symmetry_deviation <= 2.0 * r.h);
        assert!(r.delta > 0.0 && r.lipschitz >= r.delta);
    }
}
