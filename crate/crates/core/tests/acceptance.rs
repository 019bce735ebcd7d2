//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjdefect::correctors::{check_growth, corrector_piecewise, corrector_w, find_ptilde, sublinearity, SlopeCorrectors};
use hjdefect::effective::{analytic_hbar_1d, effective_hamiltonian_at, periodic_corrector, tabulate, DEFAULT_LAMBDAS};
use hjdefect::ergodic::ergodic_constant;
use hjdefect::experiments::{convergence_study, pipeline_report, Preset};
use hjdefect::fields::{composite_inf, DefectCost, HamiltonianSpec, Kinetic, PeriodicCost};
use hjdefect::grid::GridField;
use hjdefect::homogenized::{analytic_homogenized_1d, measured_mu, solve_homogenized, EXACT_TOL};
use hjdefect::oracles::{u_eps_flat, FlatDefectSolution};
use hjdefect::random::{
    direct_random_solve, limit_law_mc, regime_summary, sample_lattice, u_random_min, verify_separation_2d, Density,
    IndexWindow, RegimeConfig,
};
use hjdefect::solver::{solve_discounted_periodic, solve_eps_problem, SolveOptions};

type Outcome = Result<String, String>;

fn norm_spec(per: PeriodicCost, def: DefectCost) -> HamiltonianSpec {
    HamiltonianSpec::separable(Kinetic::Norm, per, def).unwrap()
}

fn sine() -> PeriodicCost {
    PeriodicCost::sine(1.0, 0.0)
}

fn well() -> DefectCost {
    DefectCost::well(1, 1.0)
}

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

fn effective_hamiltonian() -> Outcome {
    let spec = norm_spec(sine(), DefectCost::none(1));
    let torus = GridField::torus(1, 400).map_err(e)?;
    let mut worst: f64 = 0.0;
    for p in [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
        let est = effective_hamiltonian_at(&spec, &[p], &DEFAULT_LAMBDAS, &torus).map_err(e)?;
        let exact = analytic_hbar_1d(&sine(), p).map_err(e)?;
        worst = worst.max((est.value - exact).abs());
    }
    ensure(worst <= 2e-2, format!("max |H̄ - oracle| = {worst:.3e}"))?;
    Ok(format!("max |H̄ - oracle| = {worst:.3e}"))
}

fn ergodic_flat() -> Outcome {
    let spec = norm_spec(PeriodicCost::zero(1), well());
    let est = ergodic_constant(&spec, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.02).map_err(e)?;
    ensure((est.value - 1.0).abs() <= 2e-2, format!("E = {:.6}", est.value))?;
    Ok(format!("E = {:.6}", est.value))
}

fn ergodic_periodic() -> Outcome {
    let spec = norm_spec(sine(), well());
    let est = ergodic_constant(&spec, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.01).map_err(e)?;
    let oracle = -composite_inf(&sine(), &well()).1;
    ensure((est.value - oracle).abs() <= 3e-2, format!("E = {:.6}, oracle {oracle:.6}", est.value))?;
    ensure(est.monotonicity_violation <= 1e-2, format!("E^R not monotone: {:?}", est.values()))?;
    let torus = GridField::torus(1, 200).map_err(e)?;
    let table = tabulate(&spec, -3.0, 3.0, 25, &DEFAULT_LAMBDAS, &torus).map_err(e)?;
    ensure(
        est.value >= table.min_value - 1e-2,
        format!("E = {:.6} below H̄(p0) = {:.6}", est.value, table.min_value),
    )?;
    Ok(format!("E = {:.6} (oracle {oracle:.6}), E^R = {:?}, H̄(p0) = {:.4}", est.value, est.values(), table.min_value))
}

fn homogenized_1d() -> Outcome {
    let mut notes = Vec::new();
    for (label, per) in [("flat", PeriodicCost::zero(1)), ("sin", sine())] {
        let spec = norm_spec(per.clone(), well());
        let torus = GridField::torus(1, 200).map_err(e)?;
        let table = tabulate(&spec, -3.0, 3.0, 61, &DEFAULT_LAMBDAS, &torus).map_err(e)?;
        let est = ergodic_constant(&spec, &[2.0, 4.0, 8.0], &DEFAULT_LAMBDAS, 0.01).map_err(e)?;
        let grid = GridField::boxed(1, 4.0, 0.01).map_err(e)?;
        let sol = solve_homogenized(&table, est.value, 1.0, &grid).map_err(e)?;
        let cf = analytic_homogenized_1d(&per, &well()).map_err(e)?;
        let f = &sol.field;
        let nodes: Vec<usize> = f.active_indices().collect();
        let err = nodes
            .iter()
            .filter(|&&i| f.coords(i)[0].abs() <= 3.0)
            .map(|&i| (f.values[i] - cf.eval(f.coords(i)[0])).abs())
            .fold(0.0, f64::max);
        ensure(err <= 2e-2, format!("{label}: sup error {err:.3e}"))?;
        let gap = |i: usize| (f.values[i] - sol.u_per).abs();
        if cf.mu.is_finite() {
            let mu = measured_mu(&sol).ok_or("no measured mu")?;
            ensure((mu - cf.mu).abs() <= 2e-2, format!("{label}: mu {mu:.4} vs {:.4}", cf.mu))?;
            let cut = cf.mu + 2.0 * f.h;
            let off = nodes.iter().filter(|&&i| f.coords(i)[0].abs() > cut).map(|&i| gap(i)).fold(0.0, f64::max);
            ensure(off <= EXACT_TOL, format!("{label}: |u - u_per| = {off:.3e} beyond mu + 2h"))?;
            notes.push(format!("{label}: err {err:.2e}, mu {mu:.4} (exact {:.4})", cf.mu));
        } else {
            let least = nodes.iter().map(|&i| gap(i)).fold(f64::INFINITY, f64::min);
            ensure(least > EXACT_TOL, format!("{label}: u meets u_per somewhere ({least:.3e})"))?;
            notes.push(format!("{label}: err {err:.2e}, min |u - u_per| {least:.2e}"));
        }
    }
    Ok(notes.join("; "))
}

fn convergence() -> Outcome {
    let mut notes = Vec::new();
    for name in ["flat-down", "sin-down"] {
        let t = convergence_study(&Preset::named(name).map_err(e)?).map_err(e)?;
        let errs: Vec<f64> = t.rows.iter().map(|r| r.error_with_origin).collect();
        ensure(t.strictly_decreasing() && t.final_error() <= 0.1, format!("{name}: errors {errs:?}"))?;
        notes.push(format!("{name} {:?}", errs.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()));
    }
    let mut up = Preset::named("flat-up").map_err(e)?;
    up.eps_schedule = vec![0.05];
    let t = convergence_study(&up).map_err(e)?;
    ensure(t.final_error() <= 0.05, format!("flat-up: error {:.4}", t.final_error()))?;
    notes.push(format!("flat-up {:.4}", t.final_error()));
    Ok(notes.join("; "))
}

fn single_defect_oracle() -> Outcome {
    let eps = 0.05;
    let spec = norm_spec(PeriodicCost::zero(1), well());
    let grid = GridField::boxed(1, 3.0, eps / 20.0).map_err(e)?;
    let (u, _) = solve_eps_problem(&spec, 1.0, eps, &grid, &SolveOptions::default()).map_err(e)?;
    let mut err: f64 = 0.0;
    for i in u.active_indices() {
        let x = u.coords(i)[0];
        if x.abs() <= 2.0 {
            err = err.max((u.values[i] - u_eps_flat(&well(), eps, x).map_err(e)?).abs());
        }
    }
    let tol = (3.0 * grid.h).max(3e-2);
    ensure(err <= tol, format!("sup error {err:.3e} > {tol:.3e}"))?;
    Ok(format!("sup error {err:.3e}"))
}

fn random_min_formula() -> Outcome {
    let eps = 0.05;
    let spec = norm_spec(PeriodicCost::zero(1), well());
    let grid = GridField::boxed(1, 3.0, eps / 4.0).map_err(e)?;
    let real = sample_lattice(Density::Fixed { eta: 0.3 }, eps, IndexWindow::centered(1, 200), 1, 2024).map_err(e)?;
    let (u, _) = direct_random_solve(&real, &spec, 1.0, &grid).map_err(e)?;
    let sol = FlatDefectSolution::downward(&well(), eps).map_err(e)?;
    let ue = |y: &[f64]| sol.eval(y[0]);
    let mut err: f64 = 0.0;
    for i in u.active_indices() {
        let x = u.coords(i)[0];
        if x.abs() <= 2.0 {
            err = err.max((u.values[i] - u_random_min(&[x], &real, &ue, 0.0).map_err(e)?).abs());
        }
    }
    let tol = (3.0 * grid.h).max(3e-2);
    ensure(err <= tol, format!("sup error {err:.3e} > {tol:.3e}"))?;
    Ok(format!("sup error {err:.3e}, {} defects", real.sites().len()))
}

fn limit_law() -> Outcome {
    let ts = [0.25, 0.5, 0.75];
    let mut worst: f64 = 0.0;
    for (k, eta_bar) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let t = limit_law_mc(Density::Scaled { eta_bar }, 1e-3, 100_000, 100 + k as u64, &ts, false).map_err(e)?;
        let lim = t.limit.as_ref().ok_or("no limit column")?;
        for (emp, l) in t.empirical.iter().zip(lim) {
            worst = worst.max((emp - l).abs());
        }
    }
    ensure(worst <= 0.02, format!("max CDF gap {worst:.4}"))?;
    let rep = regime_summary(&well(), &RegimeConfig::default()).map_err(e)?;
    ensure(rep.fixed.fraction >= 0.95, format!("regime (i) fraction {}", rep.fixed.fraction))?;
    ensure(rep.scaled_coverage >= 0.8, format!("regime (iii) coverage {}", rep.scaled_coverage))?;
    Ok(format!(
        "max CDF gap {worst:.4}, regime (i) {:.3}, regime (iii) coverage {:.3}",
        rep.fixed.fraction, rep.scaled_coverage
    ))
}

fn radial_2d() -> Outcome {
    let spec =
        HamiltonianSpec::separable(Kinetic::Relativistic, PeriodicCost::zero(2), DefectCost::well(2, 1.0)).map_err(e)?;
    let est = ergodic_constant(&spec, &[1.0, 2.0, 4.0], &DEFAULT_LAMBDAS, 0.04).map_err(e)?;
    ensure((est.value - 1.0).abs() <= 5e-2, format!("E = {:.4}", est.value))?;
    let grid = GridField::ball_nodes(2, 4.0, 201).map_err(e)?;
    let r = verify_separation_2d(&spec, 0.0, 0.25, &grid, &(1..=12).collect::<Vec<_>>()).map_err(e)?;
    ensure((r.origin_value + 1.0).abs() <= 5e-2, format!("u(0) = {:.4}", r.origin_value))?;
    ensure(r.symmetry_deviation <= 2.0 * r.h, format!("symmetry deviation {:.3e}", r.symmetry_deviation))?;
    let q = r.chosen.ok_or(format!("no q passes (M = {:.3}, delta = {:.3})", r.lipschitz, r.delta))?;
    Ok(format!(
        "E = {:.4}, u(0) = {:.4}, symmetry {:.2e}, q = {q} (threshold {:.2})",
        est.value, r.origin_value, r.symmetry_deviation, r.threshold
    ))
}

fn monotone_pairs() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let torus = GridField::torus(1, 64).map_err(e)?;
    for _ in 0..20 {
        let low: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let high: Vec<f64> = low.iter().map(|v| v + rng.gen_range(0.0..0.5)).collect();
        let lambda = rng.gen_range(0.05..1.0);
        let p = rng.gen_range(-2.0..2.0);
        let solve = |vals: Vec<f64>| -> Result<Vec<f64>, String> {
            let spec = norm_spec(PeriodicCost::from_samples(vals).map_err(e)?, DefectCost::none(1));
            Ok(solve_discounted_periodic(&spec, &[p], lambda, &torus, &SolveOptions::default()).map_err(e)?.0.values)
        };
        let (a, b) = (solve(low)?, solve(high)?);
        let dip = a.iter().zip(&b).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max);
        ensure(dip <= 1e-9, format!("raising the cost lowered the value by {dip:.3e}"))?;
    }
    Ok(20)
}

fn properties() -> Outcome {
    let pairs = monotone_pairs()?;

    let flat = norm_spec(PeriodicCost::zero(1), well());
    let g = check_growth(&flat, &[0.0], 6.0, &[1.0, 2.0, 3.0, 4.0], &DEFAULT_LAMBDAS, 0.02, true).map_err(e)?;
    ensure(g.strictly_increasing && g.verdict, format!("flat growth ladder {:?}", g.ladder))?;
    let plain = norm_spec(sine(), DefectCost::none(1));
    let g = check_growth(&plain, &[0.0], 6.0, &[1.0, 2.0, 3.0, 4.0], &DEFAULT_LAMBDAS, 0.01, false).map_err(e)?;
    ensure(g.bounded_below && g.verdict, format!("no-defect growth ladder {:?}", g.ladder))?;

    let sp = norm_spec(sine(), well());
    let torus = GridField::torus(1, 400).map_err(e)?;
    let c1 = periodic_corrector(&sp, &[2.0], 1e-3, &torus).map_err(e)?;
    let c2 = periodic_corrector(&sp, &[-2.0], 1e-3, &torus).map_err(e)?;
    let chi = SlopeCorrectors { chi_p: &c1.field, chi_p_tilde: &c2.field };
    let w = corrector_w(&sp, 8.0, &DEFAULT_LAMBDAS, 0.01).map_err(e)?;
    let x = corrector_piecewise(&sp, &[2.0], &[-2.0], 2.0, w.level, 8.0, 0.01, &chi).map_err(e)?;
    let sub = sublinearity(&x, &[2.0], &[-2.0], &[2.0, 4.0, 6.0]);
    ensure(sub.windows(2).all(|s| s[1].1 < s[0].1), format!("sublinearity ratios {sub:?}"))?;

    let small = GridField::torus(1, 200).map_err(e)?;
    let table = tabulate(&sp, -3.0, 3.0, 31, &DEFAULT_LAMBDAS, &small).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let level = rng.gen_range(1.05..2.9);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let pair = find_ptilde(&table, &[side * level]).map_err(e)?;
        ensure(pair.invariants_hold(&table), format!("PTildePair invariants fail at p = {}", side * level))?;
    }

    let d = Density::Fixed { eta: 0.3 };
    let r1 = sample_lattice(d, 0.05, IndexWindow::centered(1, 500), 1, 9).map_err(e)?;
    let r2 = sample_lattice(d, 0.05, IndexWindow::centered(1, 500), 1, 9).map_err(e)?;
    ensure(r1.indicators == r2.indicators, "lattice sampling is not deterministic".into())?;
    let l1 = limit_law_mc(Density::Scaled { eta_bar: 1.0 }, 1e-3, 10_000, 3, &[0.5], true).map_err(e)?;
    let l2 = limit_law_mc(Density::Scaled { eta_bar: 1.0 }, 1e-3, 10_000, 3, &[0.5], true).map_err(e)?;
    ensure(l1.empirical == l2.empirical, "limit law sampling is not deterministic".into())?;
    let cfg = RegimeConfig { fixed_realizations: 50, sparse_realizations: 50, scaled_realizations: 50, ..Default::default() };
    let g1 = serde_json::to_string(&regime_summary(&well(), &cfg).map_err(e)?).map_err(e)?;
    let g2 = serde_json::to_string(&regime_summary(&well(), &cfg).map_err(e)?).map_err(e)?;
    ensure(g1 == g2, "regime summary is not deterministic".into())?;
    let preset = Preset::named("flat").map_err(e)?;
    let j1 = pipeline_report(&preset).map_err(e)?.stable_json().map_err(e)?;
    let j2 = pipeline_report(&preset).map_err(e)?.stable_json().map_err(e)?;
    ensure(j1 == j2, "pipeline report is not deterministic".into())?;

    Ok(format!("{pairs} monotone pairs, growth dichotomy, sublinearity {:?}, 10 PTilde pairs, determinism", sub
        .iter()
        .map(|s| format!("{:.4}", s.1))
        .collect::<Vec<_>>()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "effective Hamiltonian", budget: Duration::from_secs(30), run: effective_hamiltonian },
        Criterion { id: 2, name: "ergodic constant, flat", budget: Duration::from_secs(30), run: ergodic_flat },
        Criterion { id: 3, name: "ergodic constant, periodic", budget: Duration::from_secs(120), run: ergodic_periodic },
        Criterion { id: 4, name: "homogenized limit 1D", budget: Duration::MAX, run: homogenized_1d },
        Criterion { id: 5, name: "convergence in eps", budget: Duration::from_secs(300), run: convergence },
        Criterion { id: 6, name: "single-defect oracle", budget: Duration::MAX, run: single_defect_oracle },
        Criterion { id: 7, name: "random min-formula", budget: Duration::MAX, run: random_min_formula },
        Criterion { id: 8, name: "limit law and regimes", budget: Duration::from_secs(60), run: limit_law },
        Criterion { id: 9, name: "2D radial", budget: Duration::from_secs(600), run: radial_2d },
        Criterion { id: 10, name: "property suites", budget: Duration::MAX, run: properties },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let result = match result {
            Ok(d) if took > c.budget => Err(format!("{d}; over budget {:.0}s", c.budget.as_secs_f64())),
            r => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {} ({:.1}s): {detail}", c.id, c.name, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {} ({:.1}s): {why}", c.id, c.name, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
