//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::correctors::{check_growth, corrector_w};
use crate::effective::effective_hamiltonian_at;
use crate::ergodic::ergodic_constant;
use crate::error::{Error, Result};
use crate::experiments::{convergence_study, ergodic_oracle, hbar_table, pipeline_report, Invariant, Preset};
use crate::fields::is_downward;
use crate::grid::GridField;
use crate::homogenized::{defect_visible, solve_homogenized};
use crate::oracles::FlatDefectSolution;
use crate::output::{fmt_g, write_cdf, write_csv, write_field, write_json, write_realization};
use crate::random::{
    limit_law_mc, origin_values, regime_summary, required_reach, sample_lattice, u_random_min, Density, IndexWindow,
    RegimeConfig,
};
use crate::solver::{solve_eps_problem, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hjdefect", version, about = "Homogenization of Hamilton-Jacobi equations with a localized defect")]
pub struct Cli {
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effective Hamiltonian at given momenta, or the full table.
    Hbar {
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long)]
        p_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Ergodic constant of the defect from truncated cell problems.
    Ergodic {
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Oscillatory problem at one ε.
    SolveEps {
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Homogenized Dirichlet problem.
    Homogenize {
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Global corrector and its growth.
    Corrector {
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Bernoulli defect lattices: realization, limit law, regimes.
    Random {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        eta_bar: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        law_eps: Option<f64>,
        #[arg(long)]
        two_sided: bool,
    },
    /// ε-sweep against the homogenized solution.
    Converge {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Full pipeline report.
    Report,
}

/// Options of the `random` subcommand.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub eta: Option<f64>,
    pub eta_bar: Option<f64>,
    pub eps: Option<f64>,
    pub q: Option<u32>,
    pub samples: Option<usize>,
    pub law_eps: Option<f64>,
    pub two_sided: Option<bool>,
    pub t: Option<Vec<f64>>,
    pub regimes: Option<RegimeConfig>,
}

/// JSON run configuration.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    /// Inline problem definition instead of a named preset.
    pub problem: Option<Preset>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub alpha: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub eps_schedule: Option<Vec<f64>>,
    pub torus_nodes: Option<usize>,
    pub ergodic_h: Option<f64>,
    pub homog_h: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub p_max: Option<f64>,
    pub p_points: Option<usize>,
    pub eps: Option<f64>,
    pub radius: Option<f64>,
    pub random: Option<RandomConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Everything a subcommand needs, validated before any file is written.
struct Run {
    preset: Preset,
    out: PathBuf,
    cfg: RunConfig,
}

fn resolve(cli: &Cli) -> Result<Run> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut preset = match (&cli.preset, &cfg.problem, &cfg.preset) {
        (Some(name), _, _) => Preset::named(name)?,
        (None, Some(p), _) => p.clone(),
        (None, None, Some(name)) => Preset::named(name)?,
        (None, None, None) => Preset::named("flat-down")?,
    };
    if let Some(v) = cfg.alpha {
        preset.alpha = v;
    }
    if let Some(v) = cfg.lambdas.clone() {
        preset.lambdas = v;
    }
    if let Some(v) = cfg.radii.clone() {
        preset.radii = v;
    }
    if let Some(v) = cfg.eps_schedule.clone() {
        preset.eps_schedule = v;
    }
    if let Some(v) = cfg.torus_nodes {
        preset.torus_nodes = v;
    }
    if let Some(v) = cfg.ergodic_h {
        preset.ergodic_h = v;
    }
    if let Some(v) = cfg.homog_h {
        preset.homog_h = v;
    }
    if let Some(v) = cfg.p_max {
        preset.p_max = v;
    }
    if let Some(v) = cfg.p_points {
        preset.p_points = v;
    }
    if let Some(s) = cli.seed.or(cfg.seed) {
        preset.seed = s;
    }
    match &cli.command {
        Command::Hbar { p, p_max, points } => {
            if !p.is_empty() {
                cfg.p = Some(p.clone());
            }
            if let Some(v) = p_max {
                preset.p_max = *v;
            }
            if let Some(v) = points {
                preset.p_points = *v;
            }
        }
        Command::Ergodic { radii, h } => {
            if let Some(r) = radii {
                preset.radii = r.clone();
            }
            if let Some(h) = h {
                preset.ergodic_h = *h;
            }
        }
        Command::SolveEps { eps, alpha } => {
            if eps.is_some() {
                cfg.eps = *eps;
            }
            if let Some(a) = alpha {
                preset.alpha = *a;
            }
        }
        Command::Homogenize { alpha } => {
            if let Some(a) = alpha {
                preset.alpha = *a;
            }
        }
        Command::Corrector { radius } => {
            if radius.is_some() {
                cfg.radius = *radius;
            }
        }
        Command::Random { eta, eta_bar, eps, q, samples, law_eps, two_sided } => {
            let r = cfg.random.get_or_insert_with(RandomConfig::default);
            if eta.is_some() {
                r.eta = *eta;
                r.eta_bar = None;
            }
            if eta_bar.is_some() {
                r.eta_bar = *eta_bar;
                r.eta = None;
            }
            if eps.is_some() {
                r.eps = *eps;
            }
            if q.is_some() {
                r.q = *q;
            }
            if samples.is_some() {
                r.samples = *samples;
            }
            if law_eps.is_some() {
                r.law_eps = *law_eps;
            }
            if *two_sided {
                r.two_sided = Some(true);
            }
        }
        Command::Converge { eps } => {
            if let Some(e) = eps {
                preset.eps_schedule = e.clone();
            }
        }
        Command::Report => {}
    }
    preset.validate()?;
    preset.spec()?;
    if let Some(j) = cli.jobs.or(cfg.jobs) {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
    }
    let out = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Run { preset, out, cfg })
}

/// Outcome of a subcommand: summary line and checked invariants.
struct Outcome {
    summary: String,
    invariants: Vec<Invariant>,
}

fn inv(name: &str, passed: bool, detail: String) -> Invariant {
    Invariant { name: name.into(), passed, detail }
}

fn cmd_hbar(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let spec = p.spec()?;
    if let Some(ps) = &run.cfg.p {
        if p.dim != 1 {
            return Err(Error::Config("--p is for one-dimensional presets".into()));
        }
        let torus = GridField::torus(1, p.torus_nodes)?;
        let mut rows = Vec::new();
        let mut parts = Vec::new();
        let mut invariants = Vec::new();
        for &pk in ps {
            let est = effective_hamiltonian_at(&spec, &[pk], &p.lambdas, &torus).map_err(|e| e.at("hbar"))?;
            let unc = est.extrapolation.spread.max(2e-2);
            parts.push(format!("hbar={:.2}±{:.2}", est.value, unc));
            rows.push(vec![pk, est.value, unc]);
            invariants.push(inv(
                "extrapolation_monotone",
                est.extrapolation.is_monotone(crate::effective::MONOTONE_TOL),
                format!("p = {pk}"),
            ));
        }
        write_csv(&run.out.join("hbar.csv"), &["p", "hbar", "uncertainty"], rows)?;
        return Ok(Outcome { summary: parts.join(" "), invariants });
    }
    let t = hbar_table(p)?;
    write_csv(
        &run.out.join("hbar.csv"),
        &["s", "hbar"],
        t.s.iter().zip(&t.values).map(|(s, v)| vec![*s, *v]),
    )?;
    write_json(&run.out.join("hbar.json"), &t)?;
    let invariants = vec![
        inv("convex", t.is_convex(1e-2), format!("violation {:.3e}", t.convexity_violation)),
        inv("coercive", t.coercivity_margin >= -1e-2, format!("margin {:.3e}", t.coercivity_margin)),
    ];
    Ok(Outcome {
        summary: format!("hbar table: {} points, min={} at p0={:?}", t.s.len(), fmt_g(t.min_value), t.p0()),
        invariants,
    })
}

fn cmd_ergodic(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let e = ergodic_constant(&p.spec()?, &p.radii, &p.lambdas, p.ergodic_h).map_err(|e| e.at("ergodic"))?;
    write_csv(&run.out.join("ergodic.csv"), &["R", "E_R"], e.radii.iter().zip(e.values()).map(|(r, v)| vec![*r, v]))?;
    write_json(&run.out.join("ergodic.json"), &e)?;
    let mut invariants = vec![inv(
        "monotone_in_radius",
        e.monotonicity_violation <= 1e-2,
        format!("violation {:.3e}", e.monotonicity_violation),
    )];
    if p.dim == 1 || p.periodic()?.is_constant() {
        let hbar0 = -p.periodic()?.inf();
        if let Some(o) = ergodic_oracle(p, hbar0)? {
            invariants.push(inv("closed_form", (e.value - o).abs() <= 3e-2, format!("E = {}, expected {}", e.value, o)));
        }
    }
    Ok(Outcome { summary: format!("E={:.4} converged={}", e.value, e.converged), invariants })
}

fn cmd_solve_eps(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let eps = run.cfg.eps.unwrap_or(0.05);
    let h = eps / p.cells_per_eps;
    let grid = if p.dim == 1 { GridField::boxed(1, p.eps_domain, h)? } else { GridField::ball(2, p.eps_domain, h)? };
    let (u, rep) = solve_eps_problem(&p.spec()?, p.alpha, eps, &grid, &SolveOptions::default())
        .map_err(|e| e.at("solve-eps"))?;
    write_field(&run.out, "u_eps", &u, json!({"eps": eps, "alpha": p.alpha, "iterations": rep.iterations, "preset": p.name}))?;
    let u0 = u.values[u.origin_index()];
    let mut invariants = Vec::new();
    let (per, def) = (p.periodic()?, p.defect_cost()?);
    if p.has_closed_form() && per.is_constant() && per.mean() == 0.0 && is_downward(&per, &def) {
        if let Ok(sol) = FlatDefectSolution::downward(&def, eps) {
            let err = u
                .active_indices()
                .filter(|&i| u.coords(i)[0].abs() <= 2.0)
                .map(|i| (u.values[i] - sol.eval(u.coords(i)[0])).abs())
                .fold(0.0, f64::max);
            invariants.push(inv("closed_form", err <= (3.0 * h).max(3e-2), format!("sup error {err:.3e}")));
        }
    }
    Ok(Outcome { summary: format!("u_eps(0)={} iterations={}", fmt_g(u0), rep.iterations), invariants })
}

fn cmd_homogenize(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let table = hbar_table(p)?;
    let e = ergodic_constant(&p.spec()?, &p.radii, &p.lambdas, p.ergodic_h).map_err(|e| e.at("ergodic"))?;
    let grid = if p.dim == 1 { GridField::boxed(1, p.domain, p.homog_h)? } else { GridField::ball(2, p.domain, p.homog_h)? };
    let sol = solve_homogenized(&table, e.value, p.alpha, &grid).map_err(|e| e.at("homogenize"))?;
    write_field(
        &run.out,
        "u_homog",
        &sol.field,
        json!({"E": sol.ergodic, "alpha": sol.alpha, "visible": sol.visible, "u_per": sol.u_per, "preset": p.name}),
    )?;
    let invariants = vec![inv(
        "origin_value",
        sol.origin_value <= sol.u_per + 1e-12,
        format!("u(0) = {}, u_per = {}", sol.origin_value, sol.u_per),
    )];
    Ok(Outcome {
        summary: format!("u(0)={} E={:.4} visible={}", fmt_g(sol.origin_value), e.value, defect_visible(e.value, &table)),
        invariants,
    })
}

fn cmd_corrector(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let spec = p.spec()?;
    let radius = run.cfg.radius.or(p.growth_radius).unwrap_or(6.0);
    let table = hbar_table(p)?;
    let e = ergodic_constant(&spec, &p.radii, &p.lambdas, p.ergodic_h).map_err(|e| e.at("ergodic"))?;
    let visible = defect_visible(e.value, &table);
    let w = corrector_w(&spec, radius, &p.lambdas, p.ergodic_h).map_err(|e| e.at("corrector"))?;
    write_field(&run.out, "corrector_w", &w.field, json!({"radius": radius, "level": w.level, "preset": p.name}))?;
    let ladder: Vec<f64> = p.ladder.iter().copied().filter(|r| *r < radius).collect();
    let g = check_growth(&spec, &table.p0(), radius, &ladder, &p.lambdas, p.ergodic_h, visible)
        .map_err(|e| e.at("growth"))?;
    write_json(&run.out.join("growth.json"), &g)?;
    Ok(Outcome {
        summary: format!("corrector level={:.4} visible={} growth_ok={}", w.level, visible, g.verdict),
        invariants: vec![inv("growth_dichotomy", g.verdict, format!("{:?}", g.ladder))],
    })
}

fn cmd_random(run: &Run) -> Result<Outcome> {
    let p = &run.preset;
    let rc = run.cfg.random.clone().unwrap_or_default();
    let seed = p.seed;
    let density = match (rc.eta, rc.eta_bar) {
        (_, Some(b)) => Density::Scaled { eta_bar: b },
        (Some(e), None) => Density::Fixed { eta: e },
        (None, None) => Density::Fixed { eta: 0.3 },
    };
    let eps = rc.eps.unwrap_or(0.05);
    let q = rc.q.unwrap_or(1);
    let (per, def) = (p.periodic()?, p.defect_cost()?);
    if p.dim != 1 || !per.is_constant() || per.mean() != 0.0 || !is_downward(&per, &def) {
        return Err(Error::Config("random lattices need a flat one-dimensional preset with a downward defect".into()));
    }
    let sol = FlatDefectSolution::downward(&def, eps)?;
    let u = |y: &[f64]| sol.eval(y[0]);
    let reach = required_reach(&u, 0.0, eps * q as f64, 1) as i64;
    let real = sample_lattice(density, eps, IndexWindow::centered(1, reach + 2), q, seed)?;
    write_realization(&run.out.join("realization.csv"), &real)?;
    let u0 = u_random_min(&[0.0], &real, &u, 0.0)?;

    let law_density = match density {
        Density::Scaled { .. } => density,
        Density::Fixed { .. } => Density::Scaled { eta_bar: 1.0 },
    };
    let ts = rc.t.clone().unwrap_or_else(|| (1..20).map(|k| k as f64 * 0.05).collect());
    let law = limit_law_mc(
        law_density,
        rc.law_eps.unwrap_or(1e-3),
        rc.samples.unwrap_or(100_000),
        seed,
        &ts,
        rc.two_sided.unwrap_or(false),
    )?;
    write_cdf(&run.out.join("cdf.csv"), &law)?;

    let mut regimes_cfg = rc.regimes.clone().unwrap_or_default();
    regimes_cfg.seed = seed;
    let regimes = regime_summary(&def, &regimes_cfg)?;
    write_json(&run.out.join("regimes.json"), &regimes)?;
    let samples = origin_values(&sol, density, 200, seed)?;
    write_json(
        &run.out.join("random.json"),
        &json!({
            "eps": eps, "q": q, "eta": real.eta, "seed": seed, "frequency": real.frequency(),
            "u0": u0, "u0_samples": samples,
        }),
    )?;
    let invariants = vec![
        inv("frequency_within_3_sigma", real.frequency_plausible(), format!("frequency {}", real.frequency())),
        inv("cdf_within_dkw_band", law.within_dkw(), format!("gap {:.3e} band {:.3e}", law.max_exact_gap, law.dkw_band)),
        inv("below_u_bar", samples.iter().all(|v| *v <= 1e-12), String::new()),
        inv("fixed_regime", regimes.fixed.fraction >= 0.95, format!("fraction {}", regimes.fixed.fraction)),
        inv("scaled_regime_coverage", regimes.scaled_coverage >= 0.8, format!("coverage {}", regimes.scaled_coverage)),
    ];
    Ok(Outcome {
        summary: format!("u(0)={} eta={} occupied={}/{}", fmt_g(u0), real.eta, real.sites().len(), real.indicators.len()),
        invariants,
    })
}

fn cmd_converge(run: &Run) -> Result<Outcome> {
    let t = convergence_study(&run.preset)?;
    write_csv(
        &run.out.join("error_table.csv"),
        &["eps", "h", "error_off_origin", "error_with_origin", "runtime_s"],
        t.rows.iter().map(|r| vec![r.eps, r.h, r.error_off_origin, r.error_with_origin, r.runtime_s]),
    )?;
    let invariants = vec![
        inv("nested_errors", t.nested(), String::new()),
        inv("error_decreasing", t.strictly_decreasing(), format!("{:?}", t.rows.iter().map(|r| r.error_with_origin).collect::<Vec<_>>())),
    ];
    Ok(Outcome { summary: format!("final error={} ({} rows)", fmt_g(t.final_error()), t.rows.len()), invariants })
}

fn cmd_report(run: &Run) -> Result<Outcome> {
    let r = pipeline_report(&run.preset)?;
    write_json(&run.out.join("report.json"), &r.stable_json()?)?;
    write_json(&run.out.join("timing.json"), &r.timing)?;
    Ok(Outcome {
        summary: format!("E={:.4} visible={} invariants={}/{}", r.ergodic.value, r.visible, r.invariants.len() - r.failures().len(), r.invariants.len()),
        invariants: r.invariants,
    })
}

fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) | Error::Domain(_) | Error::Precondition(_) | Error::Json(_) | Error::WindowTooSmall { .. } => {
            EXIT_CONFIG
        }
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INVARIANT,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let run = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(j) = cli.jobs.or(run.cfg.jobs) {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    if let Err(e) = fs::create_dir_all(&run.out) {
        eprintln!("error: cannot create {}: {e}", run.out.display());
        return EXIT_INVARIANT;
    }
    let outcome = match &cli.command {
        Command::Hbar { .. } => cmd_hbar(&run),
        Command::Ergodic { .. } => cmd_ergodic(&run),
        Command::SolveEps { .. } => cmd_solve_eps(&run),
        Command::Homogenize { .. } => cmd_homogenize(&run),
        Command::Corrector { .. } => cmd_corrector(&run),
        Command::Random { .. } => cmd_random(&run),
        Command::Converge { .. } => cmd_converge(&run),
        Command::Report => cmd_report(&run),
    };
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            let failed: Vec<_> = o.invariants.iter().filter(|i| !i.passed).collect();
            for f in &failed {
                eprintln!("invariant violated: {} {}", f.name, f.detail);
            }
            if failed.is_empty() {
                EXIT_OK
            } else {
                EXIT_INVARIANT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
