//! Named presets, ε-sweeps against the homogenized limit, and the full
//! pipeline report.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correctors::{check_growth, GrowthReport};
use crate::effective::{analytic_hbar_1d, tabulate_along, EffectiveHamiltonianTable, DEFAULT_LAMBDAS};
use crate::ergodic::{analytic_e_1d, analytic_e_radial, ergodic_constant, ErgodicEstimate};
use crate::error::{Error, Result};
use crate::fields::{is_downward, norm, DefectCost, HamiltonianSpec, Kinetic, PeriodicCost};
use crate::grid::GridField;
use crate::homogenized::{
    analytic_homogenized_1d, check_infinity, defect_visible, measured_mu, solve_homogenized, DecayReport,
    HomogenizedClosedForm, VISIBILITY_TOL,
};
use crate::solver::{solve_eps_problem, SolveOptions};

pub const PRESET_NAMES: [&str; 7] = ["flat-down", "sin-down", "flat-up", "sin", "flat", "none", "radial-2d"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticChoice {
    Norm,
    Relativistic,
}

impl KineticChoice {
    pub fn build(self) -> Kinetic {
        match self {
            KineticChoice::Norm => Kinetic::Norm,
            KineticChoice::Relativistic => Kinetic::Relativistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Environment {
    Zero,
    Constant { value: f64 },
    /// `A·sin(2π(y + φ))`; in 2D the sum over both axes.
    Sine { amplitude: f64, #[serde(default)] phase: f64 },
}

impl Environment {
    pub fn build(self, dim: usize) -> Result<PeriodicCost> {
        Ok(match self {
            Environment::Zero => PeriodicCost::zero(dim),
            Environment::Constant { value } => PeriodicCost::constant(dim, value),
            Environment::Sine { amplitude, phase } => {
                if dim == 1 {
                    PeriodicCost::sine(amplitude, phase)
                } else if phase == 0.0 {
                    PeriodicCost::sine_2d(amplitude)
                } else {
                    return Err(Error::Config("2D sine environment takes no phase".into()));
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DefectChoice {
    None,
    /// `−depth·cos²(π|y|)` on `|y| ≤ 1/2`.
    Well { depth: f64 },
    /// `height·cos²(π|y|)` on `|y| ≤ 1/2`.
    Hump { height: f64 },
    Bump { amplitude: f64, radius: f64 },
}

impl DefectChoice {
    pub fn build(self, dim: usize) -> Result<DefectCost> {
        Ok(match self {
            DefectChoice::None => DefectCost::none(dim),
            DefectChoice::Well { depth } => DefectCost::well(dim, depth),
            DefectChoice::Hump { height } => DefectCost::hump(dim, height),
            DefectChoice::Bump { amplitude, radius } => DefectCost::cos2_bump(dim, amplitude, radius)?,
        })
    }
}

/// Problem data plus every schedule needed to run it end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub dim: usize,
    pub kinetic: KineticChoice,
    pub environment: Environment,
    pub defect: DefectChoice,
    pub alpha: f64,
    /// Torus nodes per axis for `H̄`.
    pub torus_nodes: usize,
    /// `H̄` is tabulated on `[-p_max, p_max]`.
    pub p_max: f64,
    pub p_points: usize,
    pub lambdas: Vec<f64>,
    pub radii: Vec<f64>,
    pub ergodic_h: f64,
    /// Half-width of the homogenized domain.
    pub domain: f64,
    pub homog_h: f64,
    pub eps_schedule: Vec<f64>,
    pub eps_domain: f64,
    /// `h = ε / cells_per_eps` in the ε-problems.
    pub cells_per_eps: f64,
    /// Errors are measured on `[-window, window]^d`.
    pub window: f64,
    pub growth_radius: Option<f64>,
    pub ladder: Vec<f64>,
    /// Wall-clock budget in seconds for the full pipeline.
    pub budget_s: f64,
    pub seed: u64,
}

impl Preset {
    pub fn named(name: &str) -> Result<Self> {
        let one = |name: &str, environment, defect, ergodic_h| Preset {
            name: name.into(),
            dim: 1,
            kinetic: KineticChoice::Norm,
            environment,
            defect,
            alpha: 1.0,
            torus_nodes: 400,
            p_max: 3.0,
            p_points: 31,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            radii: vec![2.0, 4.0, 8.0],
            ergodic_h,
            domain: 4.0,
            homog_h: 0.01,
            eps_schedule: vec![0.2, 0.1, 0.05],
            eps_domain: 3.0,
            cells_per_eps: 10.0,
            window: 2.0,
            growth_radius: Some(6.0),
            ladder: vec![1.0, 2.0, 3.0, 4.0],
            budget_s: 120.0,
            seed: 0,
        };
        let sine = Environment::Sine { amplitude: 1.0, phase: 0.0 };
        let well = DefectChoice::Well { depth: 1.0 };
        Ok(match name {
            "flat-down" | "flat" => one(name, Environment::Zero, well, 0.02),
            "sin-down" | "sin" => one(name, sine, well, 0.01),
            "flat-up" => one(name, Environment::Zero, DefectChoice::Hump { height: 1.0 }, 0.02),
            "none" => one(name, sine, DefectChoice::None, 0.01),
            "radial-2d" => Preset {
                name: name.into(),
                dim: 2,
                kinetic: KineticChoice::Relativistic,
                environment: Environment::Zero,
                defect: well,
                alpha: 1.0,
                torus_nodes: 8,
                p_max: 3.0,
                p_points: 31,
                lambdas: DEFAULT_LAMBDAS.to_vec(),
                radii: vec![1.0, 2.0, 4.0],
                ergodic_h: 0.04,
                domain: 4.0,
                homog_h: 0.04,
                eps_schedule: vec![1.0, 0.5, 0.25],
                eps_domain: 4.0,
                cells_per_eps: 6.25,
                window: 2.0,
                growth_radius: Some(4.0),
                ladder: vec![1.0, 2.0, 3.0],
                budget_s: 600.0,
                seed: 0,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn periodic(&self) -> Result<PeriodicCost> {
        self.environment.build(self.dim)
    }

    pub fn defect_cost(&self) -> Result<DefectCost> {
        self.defect.build(self.dim)
    }

    pub fn spec(&self) -> Result<HamiltonianSpec> {
        self.validate()?;
        HamiltonianSpec::separable(self.kinetic.build(), self.periodic()?, self.defect_cost()?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive".into());
        }
        for (label, v) in [
            ("p_max", self.p_max),
            ("ergodic_h", self.ergodic_h),
            ("domain", self.domain),
            ("homog_h", self.homog_h),
            ("eps_domain", self.eps_domain),
            ("cells_per_eps", self.cells_per_eps),
            ("window", self.window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{label} must be positive, got {v}"));
            }
        }
        if self.cells_per_eps < 4.0 {
            return bad("cells_per_eps must be at least 4".into());
        }
        if self.window >= self.eps_domain || self.window > self.domain {
            return bad("error window must lie inside both domains".into());
        }
        if self.eps_schedule.is_empty() || self.eps_schedule.iter().any(|e| !(*e > 0.0)) {
            return bad("eps schedule must be nonempty and positive".into());
        }
        Ok(())
    }

    /// Closed forms apply to `|p| − ℓ` in 1D with `α = 1`.
    pub fn has_closed_form(&self) -> bool {
        self.dim == 1 && self.kinetic == KineticChoice::Norm && self.alpha == 1.0
    }
}

/// Tabulates `H̄` for a preset; 2D tables are radial.
pub fn hbar_table(preset: &Preset) -> Result<EffectiveHamiltonianTable> {
    let spec = preset.spec()?;
    let torus = GridField::torus(preset.dim, preset.torus_nodes)?;
    let mut t = tabulate_along(&spec, [1.0, 0.0], -preset.p_max, preset.p_max, preset.p_points, &preset.lambdas, &torus)
        .map_err(|e| e.at("hbar"))?;
    if preset.dim == 2 {
        t.radial = true;
    }
    Ok(t)
}

/// Ergodic constant expected from the closed forms, when one applies.
pub fn ergodic_oracle(preset: &Preset, hbar_zero: f64) -> Result<Option<f64>> {
    let (per, def) = (preset.periodic()?, preset.defect_cost()?);
    if preset.has_closed_form() {
        return Ok(Some(if is_downward(&per, &def) { analytic_e_1d(&per, &def)? } else { -per.inf() }));
    }
    if preset.dim == 2 && per.is_constant() && def.flags().radial {
        return Ok(Some(analytic_e_radial(hbar_zero, &def)));
    }
    Ok(None)
}

/// Reference `u` for the ε-sweep.
#[derive(Debug, Clone)]
pub enum Reference {
    Closed(HomogenizedClosedForm),
    Numeric(GridField),
}

impl Reference {
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        match self {
            Reference::Closed(c) => Some(c.eval(x[0])),
            Reference::Numeric(f) => f.interpolate(x),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Reference::Closed(_) => "closed form",
            Reference::Numeric(_) => "numeric homogenized solve",
        }
    }
}

pub fn homogenized_reference(preset: &Preset) -> Result<Reference> {
    if preset.has_closed_form() {
        return Ok(Reference::Closed(analytic_homogenized_1d(&preset.periodic()?, &preset.defect_cost()?)?));
    }
    let table = hbar_table(preset)?;
    let spec = preset.spec()?;
    let e = ergodic_constant(&spec, &preset.radii, &preset.lambdas, preset.ergodic_h).map_err(|e| e.at("ergodic"))?;
    let grid = homog_grid(preset)?;
    let sol = solve_homogenized(&table, e.value, preset.alpha, &grid).map_err(|e| e.at("homogenize"))?;
    Ok(Reference::Numeric(sol.field))
}

fn homog_grid(preset: &Preset) -> Result<GridField> {
    if preset.dim == 1 {
        GridField::boxed(1, preset.domain, preset.homog_h)
    } else {
        GridField::ball(2, preset.domain, preset.homog_h)
    }
}

fn eps_grid(preset: &Preset, eps: f64) -> Result<GridField> {
    let h = eps / preset.cells_per_eps;
    if preset.dim == 1 {
        GridField::boxed(1, preset.eps_domain, h)
    } else {
        GridField::ball(2, preset.eps_domain, h)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub h: f64,
    /// Sup error on the window without the origin node.
    pub error_off_origin: f64,
    pub error_with_origin: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorTable {
    pub preset: String,
    pub window: f64,
    pub reference: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_with_origin < w[0].error_with_origin)
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.error_with_origin)
    }

    /// Each off-origin error is at most the matching full error.
    pub fn nested(&self) -> bool {
        self.rows.iter().all(|r| r.error_off_origin <= r.error_with_origin)
    }
}

/// Solves the ε-problem for every `ε` of the schedule and measures the sup
/// distance to the homogenized solution on the window.
pub fn convergence_study(preset: &Preset) -> Result<ErrorTable> {
    let spec = preset.spec()?;
    let reference = homogenized_reference(preset)?;
    let mut rows = Vec::new();
    for &eps in &preset.eps_schedule {
        let start = Instant::now();
        let grid = eps_grid(preset, eps)?;
        let (u, _) = solve_eps_problem(&spec, preset.alpha, eps, &grid, &SolveOptions::default())
            .map_err(|e| e.at("solve-eps"))?;
        let origin = u.origin_index();
        let (mut off, mut all): (f64, f64) = (0.0, 0.0);
        for i in u.active_indices() {
            let x = u.coords(i);
            if x[..preset.dim].iter().any(|c| c.abs() > preset.window + 1e-12) {
                continue;
            }
            let Some(r) = reference.eval(&x[..preset.dim]) else { continue };
            let e = (u.values[i] - r).abs();
            all = all.max(e);
            if i != origin {
                off = off.max(e);
            }
        }
        rows.push(ErrorRow {
            eps,
            h: grid.h,
            error_off_origin: off,
            error_with_origin: all,
            runtime_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ErrorTable { preset: preset.name.clone(), window: preset.window, reference: reference.label().into(), rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct HbarSummary {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    pub p0: Vec<f64>,
    pub min_value: f64,
    pub hbar_zero: f64,
    pub convexity_violation: f64,
    pub lipschitz: f64,
    pub coercivity_slope: f64,
    pub coercivity_margin: f64,
    pub symmetry_gap: f64,
    /// `max |H̄ − closed form|` over the nodes.
    pub oracle_max_delta: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogenizedSummary {
    pub origin_value: f64,
    pub u_per: f64,
    pub mu: Option<f64>,
    pub mu_oracle: Option<f64>,
    /// Sup distance to the closed form on `[-3, 3]`.
    pub oracle_sup_error: Option<f64>,
    pub decay: DecayReport,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub preset: Preset,
    pub hbar: HbarSummary,
    pub ergodic: ErgodicEstimate,
    pub ergodic_oracle: Option<f64>,
    pub visible: bool,
    pub homogenized: HomogenizedSummary,
    pub growth: Option<GrowthReport>,
    pub invariants: Vec<Invariant>,
    /// Seconds per stage; the only nondeterministic part of the report.
    pub timing: BTreeMap<String, f64>,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> Vec<&Invariant> {
        self.invariants.iter().filter(|i| !i.passed).collect()
    }

    /// JSON value without the timing block.
    pub fn stable_json(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("timing");
        }
        Ok(v)
    }
}

/// `H̄` table, `E`, visibility, homogenized solve and growth check, with
/// every available closed form compared.
pub fn pipeline_report(preset: &Preset) -> Result<PipelineReport> {
    let spec = preset.spec()?;
    let (per, def) = (preset.periodic()?, preset.defect_cost()?);
    let mut timing = BTreeMap::new();
    let mut invariants = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        invariants.push(Invariant { name: name.into(), passed, detail });
    };

    let clock = Instant::now();
    let table = hbar_table(preset)?;
    timing.insert("hbar".to_string(), clock.elapsed().as_secs_f64());
    let zero = vec![0.0; preset.dim];
    let hbar_zero = table.eval(&zero);
    let oracle_max_delta = if preset.has_closed_form() {
        let mut d: f64 = 0.0;
        for (s, v) in table.s.iter().zip(&table.values) {
            d = d.max((v - analytic_hbar_1d(&per, *s)?).abs());
        }
        Some(d)
    } else if preset.dim == 2 && per.is_constant() {
        let k = preset.kinetic.build();
        Some(table.s.iter().zip(&table.values).map(|(s, v)| (v - (k.eval(&[*s, 0.0]) - per.mean())).abs()).fold(0.0, f64::max))
    } else {
        None
    };
    if let Some(d) = oracle_max_delta {
        let tol = if preset.dim == 1 { 2e-2 } else { 5e-2 };
        check("hbar_matches_closed_form", d <= tol, format!("max delta {d:.3e}"));
    }
    check("hbar_convex", table.is_convex(1e-2), format!("violation {:.3e}", table.convexity_violation));
    check("hbar_coercive", table.coercivity_margin >= -1e-2, format!("margin {:.3e}", table.coercivity_margin));
    let hbar = HbarSummary {
        s: table.s.clone(),
        values: table.values.clone(),
        p0: table.p0(),
        min_value: table.min_value,
        hbar_zero,
        convexity_violation: table.convexity_violation,
        lipschitz: table.lipschitz,
        coercivity_slope: table.coercivity_slope,
        coercivity_margin: table.coercivity_margin,
        symmetry_gap: table.symmetry_gap(),
        oracle_max_delta,
        warnings: table.warnings.clone(),
    };

    let clock = Instant::now();
    let ergodic =
        ergodic_constant(&spec, &preset.radii, &preset.lambdas, preset.ergodic_h).map_err(|e| e.at("ergodic"))?;
    timing.insert("ergodic".to_string(), clock.elapsed().as_secs_f64());
    let e = ergodic.value;
    let ergodic_oracle = ergodic_oracle(preset, hbar_zero)?;
    if let Some(o) = ergodic_oracle {
        check("ergodic_matches_closed_form", (e - o).abs() <= 3e-2, format!("E = {e:.6}, expected {o:.6}"));
    }
    check(
        "ergodic_monotone_in_radius",
        ergodic.monotonicity_violation <= 1e-2,
        format!("violation {:.3e}", ergodic.monotonicity_violation),
    );
    check(
        "ergodic_above_hbar_min",
        e >= table.min_value - 1e-2,
        format!("E = {e:.6}, min H̄ = {:.6}", table.min_value),
    );
    let visible = defect_visible(e, &table);
    if let Some(o) = ergodic_oracle {
        let expected = o > table.min_value + VISIBILITY_TOL;
        check("visibility_matches_closed_form", visible == expected, format!("visible = {visible}"));
    }

    let clock = Instant::now();
    let grid = homog_grid(preset)?;
    let sol = solve_homogenized(&table, e, preset.alpha, &grid).map_err(|e| e.at("homogenize"))?;
    timing.insert("homogenize".to_string(), clock.elapsed().as_secs_f64());
    let radii: Vec<f64> = (1..=((preset.domain - 0.5) / 0.25) as usize).map(|k| 0.25 * k as f64).collect();
    let decay = check_infinity(&sol, &radii);
    let (mut mu, mut mu_oracle, mut oracle_sup_error) = (None, None, None);
    if preset.has_closed_form() {
        let cf = analytic_homogenized_1d(&per, &def)?;
        let f = &sol.field;
        let err = f
            .active_indices()
            .filter(|&i| f.coords(i)[0].abs() <= 3.0)
            .map(|i| (f.values[i] - cf.eval(f.coords(i)[0])).abs())
            .fold(0.0, f64::max);
        check("homogenized_matches_closed_form", err <= 2e-2, format!("sup error {err:.3e}"));
        oracle_sup_error = Some(err);
        if cf.mu.is_finite() && cf.mu > 0.0 {
            let m = measured_mu(&sol);
            let ok = m.is_some_and(|m| (m - cf.mu).abs() <= 2e-2);
            check("mu_matches_closed_form", ok, format!("measured {m:?}, expected {:.6}", cf.mu));
            mu = m;
            mu_oracle = Some(cf.mu);
        } else if cf.mu.is_infinite() {
            check("never_exact_in_constant_environment", decay.never_exact, format!("{:?}", decay.exact_from));
        }
    }
    if !visible {
        let gap = (sol.field.active_indices().map(|i| (sol.field.values[i] - sol.u_per).abs())).fold(0.0, f64::max);
        check("invisible_defect_gives_u_per", gap <= 1e-6, format!("sup |u - u_per| = {gap:.3e}"));
    }
    let homogenized = HomogenizedSummary {
        origin_value: sol.origin_value,
        u_per: sol.u_per,
        mu,
        mu_oracle,
        oracle_sup_error,
        decay,
        iterations: sol.report.iterations,
        warnings: sol.warnings.clone(),
    };

    let growth = match preset.growth_radius {
        Some(r) => {
            let clock = Instant::now();
            let g = check_growth(&spec, &table.p0(), r, &preset.ladder, &preset.lambdas, preset.ergodic_h, visible)
                .map_err(|e| e.at("growth"))?;
            timing.insert("growth".to_string(), clock.elapsed().as_secs_f64());
            check("growth_dichotomy", g.verdict, format!("ladder {:?}", g.ladder));
            Some(g)
        }
        None => None,
    };
    if norm(&table.p0()) > 1e-2 {
        check("minimizer_at_origin", false, format!("p0 = {:?}", table.p0()));
    }
    Ok(PipelineReport { preset: preset.clone(), hbar, ergodic, ergodic_oracle, visible, homogenized, growth, invariants, timing })
}
