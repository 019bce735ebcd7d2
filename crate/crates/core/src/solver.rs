//! Semi-Lagrangian value iteration for stationary HJ equations.
//!
//! With dynamics `f(x,a) = a` and time step `Δt = h / M_f`, each node solves
//!
//! ```text
//! w(y) = min_a [ c_λ · (ℓ(y) + ℓ̄(a) + p·a) + β · I[w](y + Δt·a) ]
//! ```
//!
//! where `β = e^{-λΔt}`, `c_λ = (1-β)/λ` (so constants are reproduced exactly)
//! and `I` is multilinear interpolation. In the undiscounted case `β = 1` and
//! `c_λ = Δt`. Sweeps are Gauss–Seidel over all `2^d` node orderings; the
//! weight a stencil puts on the node itself is solved for implicitly.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{pad, ControlSet, HamiltonianSpec};
use crate::grid::{Geometry, GridField};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once the sup-norm update of a round is at most `tol · (1 + |w|∞)`.
    pub tol: f64,
    pub max_rounds: usize,
    /// Initial values (same layout as the grid).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-9, max_rounds: 1_000_000, warm_start: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Completed rounds; a round visits every node once per ordering.
    pub iterations: usize,
    pub final_update: f64,
    /// `e^{-λΔt}` (1 when undiscounted).
    pub contraction: f64,
    pub time_step: f64,
    pub wall_time_s: f64,
    /// Sup-norm update of each round.
    #[serde(skip)]
    pub update_history: Vec<f64>,
}

/// Node role inside the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Free,
    /// Value held fixed (Dirichlet data or a pinned point).
    Pinned,
    /// Outside the domain; never read.
    Inactive,
}

/// One discrete problem for [`solve_scheme`].
#[derive(Debug, Clone)]
pub struct Scheme<'a> {
    pub grid: &'a GridField,
    pub controls: &'a ControlSet,
    /// Per-control cost, already including any momentum term `p·a`.
    pub control_cost: Vec<f64>,
    /// Per-node state cost.
    pub state_cost: Vec<f64>,
    /// Discount rate; `None` for the undiscounted exit-time problem.
    pub discount: Option<f64>,
    pub kinds: Vec<NodeKind>,
    /// Values of pinned nodes (ignored elsewhere).
    pub pinned_values: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Step {
    mask: u16,
    state_coef: f64,
    constant: f64,
    count: u8,
    slots: [u8; 3],
    weights: [f64; 3],
}

fn slot_of(dim: usize, o: [i64; 2]) -> usize {
    if dim == 1 {
        (o[0] + 1) as usize
    } else {
        ((o[0] + 1) * 3 + (o[1] + 1)) as usize
    }
}

/// Interpolation corners of the foot `y + d` for a displacement `d` in grid
/// units with `|d_i| ≤ 1`: offsets and weights, zero weights dropped.
fn corners(dim: usize, d: [f64; 2]) -> Vec<([i64; 2], f64)> {
    let split = |v: f64| {
        let i = v.floor();
        (i as i64, v - i)
    };
    let (i0, w0) = split(d[0]);
    let (i1, w1) = if dim == 2 { split(d[1]) } else { (0, 0.0) };
    let mut out = Vec::new();
    for a in 0..2i64 {
        for b in 0..(if dim == 2 { 2i64 } else { 1 }) {
            let wa = if a == 0 { 1.0 - w0 } else { w0 };
            let wb = if dim == 1 { 1.0 } else if b == 0 { 1.0 - w1 } else { w1 };
            let w = wa * wb;
            if w > 1e-14 {
                out.push(([i0 + a, if dim == 2 { i1 + b } else { 0 }], w));
            }
        }
    }
    out
}

/// Runs Gauss–Seidel value iteration to the stopping rule and returns the
/// node values.
pub fn solve_scheme(scheme: &Scheme<'_>, opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let grid = scheme.grid;
    let dim = grid.dim;
    let len = grid.len();
    let controls = scheme.controls;
    if controls.dim() != dim {
        return Err(Error::Config("control set and grid differ in dimension".into()));
    }
    if scheme.control_cost.len() != controls.len() || scheme.state_cost.len() != len || scheme.kinds.len() != len {
        return Err(Error::Config("scheme arrays do not match grid/control sizes".into()));
    }
    if scheme.state_cost.iter().zip(&scheme.kinds).any(|(v, k)| *k == NodeKind::Free && !v.is_finite()) {
        return Err(Error::Domain("non-finite state cost".into()));
    }
    if let Some(l) = scheme.discount {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("discount must be positive, got {l}")));
        }
    }
    let mf = controls.max_speed();
    let dt = grid.h / mf;
    let beta = scheme.discount.map_or(1.0, |l| (-l * dt).exp());
    let run_coef = scheme.discount.map_or(dt, |l| -(-l * dt).exp_m1() / l);

    // neighbourhood table
    let slots = if dim == 1 { 3 } else { 9 };
    let self_slot = slot_of(dim, [0, 0]);
    let mut nb = vec![NONE; len * slots];
    let mut usable = vec![0u16; len];
    let n = grid.n as i64;
    for idx in 0..len {
        let ij = grid.unflatten(idx);
        for o0 in -1..=1i64 {
            for o1 in if dim == 2 { -1..=1i64 } else { 0..=0 } {
                let mut q = [ij[0] as i64 + o0, ij[1] as i64 + o1];
                if grid.is_periodic() {
                    q = [q[0].rem_euclid(n), q[1].rem_euclid(n)];
                }
                if q[0] < 0 || q[0] >= n || q[1] < 0 || (dim == 2 && q[1] >= n) {
                    continue;
                }
                let j = grid.flatten([q[0] as usize, q[1] as usize]);
                let s = slot_of(dim, [o0, o1]);
                nb[idx * slots + s] = j as u32;
                if scheme.kinds[j] != NodeKind::Inactive {
                    usable[idx] |= 1 << s;
                }
            }
        }
    }

    // per-control stencils
    let mut steps = Vec::with_capacity(controls.len());
    for (j, a) in controls.vectors().iter().enumerate() {
        let d = [a[0] / mf, a[1] / mf];
        let cs = corners(dim, d);
        let mut mask = 0u16;
        let mut self_w = 0.0;
        let mut others = Vec::new();
        for (o, w) in cs {
            let s = slot_of(dim, o);
            mask |= 1 << s;
            if s == self_slot {
                self_w = w;
            } else {
                others.push((s as u8, w));
            }
        }
        let denom = 1.0 - beta * self_w;
        if denom <= 1e-15 {
            // a pure self-loop carries no information when undiscounted
            continue;
        }
        let mut step = Step {
            mask,
            state_coef: run_coef / denom,
            constant: run_coef * scheme.control_cost[j] / denom,
            count: others.len() as u8,
            slots: [0; 3],
            weights: [0.0; 3],
        };
        for (k, (s, w)) in others.into_iter().enumerate() {
            step.slots[k] = s;
            step.weights[k] = beta * w / denom;
        }
        steps.push(step);
    }

    let free: Vec<usize> = (0..len).filter(|&i| scheme.kinds[i] == NodeKind::Free).collect();
    for &i in &free {
        if !steps.iter().any(|s| s.mask & !usable[i] == 0) {
            return Err(Error::Config(format!(
                "no admissible control at node {:?}",
                grid.coords(i)
            )));
        }
    }

    // initial values
    let mut w = match &opts.warm_start {
        Some(v) if v.len() == len => v.clone(),
        Some(_) => return Err(Error::Config("warm start has the wrong length".into())),
        None => {
            let zero = controls.vectors().iter().position(|a| a[0] == 0.0 && a[1] == 0.0);
            (0..len)
                .map(|i| match (scheme.discount, zero) {
                    (Some(l), Some(z)) => (scheme.state_cost[i] + scheme.control_cost[z]) / l,
                    (Some(_), None) => 0.0,
                    (None, _) => f64::INFINITY,
                })
                .collect()
        }
    };
    for (i, wi) in w.iter_mut().enumerate() {
        match scheme.kinds[i] {
            NodeKind::Pinned => *wi = scheme.pinned_values[i],
            NodeKind::Inactive => *wi = 0.0,
            NodeKind::Free => {}
        }
    }

    let orderings: Vec<[bool; 2]> = if dim == 1 {
        vec![[false, false], [true, false]]
    } else {
        vec![[false, false], [true, false], [false, true], [true, true]]
    };
    let nn = grid.n;
    let order_index = |o: [bool; 2], k: usize| -> usize {
        if dim == 1 {
            if o[0] { nn - 1 - k } else { k }
        } else {
            let (a, b) = (k / nn, k % nn);
            let a = if o[0] { nn - 1 - a } else { a };
            let b = if o[1] { nn - 1 - b } else { b };
            a * nn + b
        }
    };
    let is_free: Vec<bool> = scheme.kinds.iter().map(|k| *k == NodeKind::Free).collect();
    let mut history = Vec::new();
    let mut rounds = 0;
    let mut last = f64::INFINITY;
    let mut prev = w.clone();
    loop {
        if rounds >= opts.max_rounds {
            return Err(Error::NotConverged { iterations: rounds, residual: last });
        }
        prev.copy_from_slice(&w);
        for &o in &orderings {
            for k in 0..len {
                let i = order_index(o, k);
                if !is_free[i] {
                    continue;
                }
                let li = scheme.state_cost[i];
                let base = &nb[i * slots..(i + 1) * slots];
                let us = usable[i];
                let mut best = f64::INFINITY;
                for s in &steps {
                    if s.mask & !us != 0 {
                        continue;
                    }
                    let mut v = s.state_coef * li + s.constant;
                    for k in 0..s.count as usize {
                        v += s.weights[k] * w[base[s.slots[k] as usize] as usize];
                    }
                    if v < best {
                        best = v;
                    }
                }
                w[i] = best;
            }
        }
        rounds += 1;
        let mut update: f64 = 0.0;
        for &i in &free {
            let (a, b) = (prev[i], w[i]);
            if a.is_finite() && b.is_finite() {
                update = update.max((a - b).abs());
            } else if a != b {
                update = f64::INFINITY;
            }
        }
        history.push(update);
        last = update;
        let scale = w.iter().zip(&scheme.kinds).filter(|(v, k)| **k != NodeKind::Inactive && v.is_finite()).map(|(v, _)| v.abs()).fold(0.0, f64::max);
        if update <= opts.tol * (1.0 + scale) {
            break;
        }
    }
    if let Some(i) = (0..len).find(|&i| is_free[i] && !w[i].is_finite()) {
        return Err(Error::Domain(format!("node {:?} cannot reach the boundary", grid.coords(i))));
    }
    let report = SolveReport {
        iterations: rounds,
        final_update: last,
        contraction: beta,
        time_step: dt,
        wall_time_s: start.elapsed().as_secs_f64(),
        update_history: history,
    };
    Ok((w, report))
}

fn require_dim(spec: &HamiltonianSpec, grid: &GridField) -> Result<()> {
    if spec.dim() != grid.dim {
        return Err(Error::Config(format!("{}D Hamiltonian on a {}D grid", spec.dim(), grid.dim)));
    }
    Ok(())
}

pub(crate) fn momentum_cost(controls: &ControlSet, base: &[f64], momentum: [f64; 2]) -> Vec<f64> {
    controls
        .vectors()
        .iter()
        .zip(base)
        .map(|(a, c)| c + momentum[0] * a[0] + momentum[1] * a[1])
        .collect()
}

pub(crate) fn field_from(grid: &GridField, values: Vec<f64>) -> GridField {
    let mut out = grid.clone();
    out.values = values;
    for i in 0..out.len() {
        if !out.active[i] {
            out.values[i] = 0.0;
        }
    }
    out
}

/// Discounted cell problem `λw + H_per(y, p + Dw) = 0` on the unit torus.
/// Only the periodic part of the landscape is used.
pub fn solve_discounted_periodic(
    spec: &HamiltonianSpec,
    p: &[f64],
    lambda: f64,
    grid: &GridField,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    require_dim(spec, grid)?;
    if !grid.is_periodic() {
        return Err(Error::Config("periodic solve needs a torus grid".into()));
    }
    if p.len() != spec.dim() || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("bad covector {p:?}")));
    }
    let cf = spec.control_form()?;
    let pp = pad(p);
    let momentum = [pp[0] + cf.shift[0], pp[1] + cf.shift[1]];
    let state_cost = (0..grid.len()).map(|i| cf.landscape.periodic.eval(&grid.coords(i)[..grid.dim])).collect();
    let scheme = Scheme {
        grid,
        controls: &cf.controls,
        control_cost: momentum_cost(&cf.controls, &cf.control_cost, momentum),
        state_cost,
        discount: Some(lambda),
        kinds: vec![NodeKind::Free; grid.len()],
        pinned_values: vec![0.0; grid.len()],
    };
    let (w, rep) = solve_scheme(&scheme, opts)?;
    Ok((field_from(grid, w), rep))
}

/// State-constrained discounted problem `λw + H(y, Dw) = 0` in a ball (or
/// box): a control is admissible only if its foot point's interpolation
/// corners are all inside the domain.
pub fn solve_discounted_constrained(
    spec: &HamiltonianSpec,
    lambda: f64,
    grid: &GridField,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    require_dim(spec, grid)?;
    let radius = match grid.geometry {
        Geometry::Ball { radius } => radius,
        Geometry::Box { half_width } => half_width,
        Geometry::Torus => return Err(Error::Config("constrained solve needs a ball or box grid".into())),
    };
    let r0 = spec.landscape().defect.radius();
    if radius <= r0 {
        return Err(Error::Precondition(format!("domain radius {radius} must exceed the defect radius {r0}")));
    }
    let cf = spec.control_form()?;
    let state_cost = (0..grid.len())
        .map(|i| if grid.active[i] { cf.landscape.eval(&grid.coords(i)[..grid.dim]) } else { 0.0 })
        .collect();
    let kinds = grid.active.iter().map(|&a| if a { NodeKind::Free } else { NodeKind::Inactive }).collect();
    let scheme = Scheme {
        grid,
        controls: &cf.controls,
        control_cost: momentum_cost(&cf.controls, &cf.control_cost, cf.shift),
        state_cost,
        discount: Some(lambda),
        kinds,
        pinned_values: vec![0.0; grid.len()],
    };
    let (w, rep) = solve_scheme(&scheme, opts)?;
    Ok((field_from(grid, w), rep))
}

/// `αu + H(x/ε, Du) = 0` on a box or ball, the artificial boundary treated as
/// a state constraint. The cost is evaluated at `x/ε` node by node.
pub fn solve_eps_problem(
    spec: &HamiltonianSpec,
    alpha: f64,
    eps: f64,
    grid: &GridField,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    require_dim(spec, grid)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    if grid.h > eps / 4.0 {
        return Err(Error::Precondition(format!(
            "grid spacing {} is too coarse for epsilon {eps}: need h <= epsilon/4 = {}",
            grid.h,
            eps / 4.0
        )));
    }
    let extent = match grid.geometry {
        Geometry::Ball { radius } => radius,
        Geometry::Box { half_width } => half_width,
        Geometry::Torus => return Err(Error::Config("epsilon problem needs a ball or box grid".into())),
    };
    let support = eps * spec.landscape().defect.radius();
    if extent <= support + grid.h {
        return Err(Error::Precondition(format!(
            "domain half-width {extent} does not contain the rescaled defect support {support}"
        )));
    }
    let cf = spec.control_form()?;
    let state_cost = (0..grid.len())
        .map(|i| {
            if grid.active[i] {
                let x = grid.coords(i);
                cf.landscape.eval(&[x[0] / eps, x[1] / eps][..grid.dim])
            } else {
                0.0
            }
        })
        .collect();
    let kinds = grid.active.iter().map(|&a| if a { NodeKind::Free } else { NodeKind::Inactive }).collect();
    let scheme = Scheme {
        grid,
        controls: &cf.controls,
        control_cost: momentum_cost(&cf.controls, &cf.control_cost, cf.shift),
        state_cost,
        discount: Some(alpha),
        kinds,
        pinned_values: vec![0.0; grid.len()],
    };
    let (w, rep) = solve_scheme(&scheme, opts)?;
    Ok((field_from(grid, w), rep))
}
