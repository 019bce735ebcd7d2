//! Running costs, control sets and Hamiltonians.
//!
//! Points and covectors are passed as slices of length `dim` (1 or 2).
//! Internally everything is padded to `[f64; 2]`.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Samples per unit period used by the dense-sampling oracle (1D).
pub const SAMPLES_PER_PERIOD: usize = 10_000;
/// Tolerance of the sampling oracle after local refinement.
pub const ORACLE_TOL: f64 = 1e-6;
/// Default spacing of the radial momentum grid used by [`legendre_cost`].
pub const LEGENDRE_STEP: f64 = 1e-3;
/// Default extent of the radial momentum grid used by [`legendre_cost`].
pub const LEGENDRE_RANGE: f64 = 50.0;

pub type Profile = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type RadialProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub(crate) fn pad(x: &[f64]) -> [f64; 2] {
    match x.len() {
        0 => [0.0, 0.0],
        1 => [x[0], 0.0],
        _ => [x[0], x[1]],
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")))
    }
}

fn check_finite(what: &str, x: &[f64]) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite {what}: {x:?}")))
    }
}

// ---------------------------------------------------------------------------
// dense-sampling oracle

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimum of `f` on `[a, b]`: `n` uniform samples followed by golden-section
/// refinement around the best sample.
pub fn sample_min_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let n = n.max(2);
    let step = (b - a) / n as f64;
    let mut best = (a, f(a));
    for i in 1..=n {
        let y = a + i as f64 * step;
        let v = f(y);
        if v < best.1 {
            best = (y, v);
        }
    }
    let lo = (best.0 - step).max(a);
    let hi = (best.0 + step).min(b);
    let refined = golden_min(f, lo, hi);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

/// 2D analogue of [`sample_min_1d`] on the square `[a, b]^2` with `n` samples
/// per axis and compass-search refinement.
pub fn sample_min_2d(f: &dyn Fn([f64; 2]) -> f64, a: f64, b: f64, n: usize) -> ([f64; 2], f64) {
    let n = n.max(2);
    let step = (b - a) / n as f64;
    let mut best = ([a, a], f([a, a]));
    for i in 0..=n {
        for j in 0..=n {
            let y = [a + i as f64 * step, a + j as f64 * step];
            let v = f(y);
            if v < best.1 {
                best = (y, v);
            }
        }
    }
    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = step;
    let (mut y, mut v) = best;
    while s > 1e-10 {
        let mut moved = false;
        for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [R, R], [-R, -R], [R, -R], [-R, R]] {
            let z = [y[0] + s * d[0], y[1] + s * d[1]];
            let fz = f(z);
            if fz < v {
                y = z;
                v = fz;
                moved = true;
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    (y, v)
}

/// Summary statistics of a periodic cost from dense sampling.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CostStats {
    pub mean: f64,
    pub inf: f64,
    pub argmin: [f64; 2],
    pub sup: f64,
    pub bound: f64,
    pub lipschitz: f64,
}

fn periodic_stats(dim: usize, f: &Profile) -> CostStats {
    if dim == 1 {
        let n = SAMPLES_PER_PERIOD;
        let mut sum = 0.0;
        let mut lip: f64 = 0.0;
        let mut prev = f(&[0.0]);
        let first = prev;
        for i in 0..n {
            let v = if i == 0 { first } else { f(&[i as f64 / n as f64]) };
            sum += v;
            if i > 0 {
                lip = lip.max((v - prev).abs() * n as f64);
            }
            prev = v;
        }
        lip = lip.max((first - prev).abs() * n as f64);
        let g = |y: f64| f(&[y]);
        let (ymin, vmin) = sample_min_1d(&g, 0.0, 1.0, n);
        let neg = |y: f64| -f(&[y]);
        let (_, vmax) = sample_min_1d(&neg, 0.0, 1.0, n);
        let sup = -vmax;
        CostStats {
            mean: sum / n as f64,
            inf: vmin,
            argmin: [ymin.rem_euclid(1.0), 0.0],
            sup,
            bound: vmin.abs().max(sup.abs()),
            lipschitz: lip,
        }
    } else {
        let n = (SAMPLES_PER_PERIOD as f64).sqrt() as usize;
        let mut sum = 0.0;
        let mut lip: f64 = 0.0;
        let mut vals = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = f(&[i as f64 / n as f64, j as f64 / n as f64]);
                vals[i * n + j] = v;
                sum += v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = vals[i * n + j];
                lip = lip.max((vals[((i + 1) % n) * n + j] - v).abs() * n as f64);
                lip = lip.max((vals[i * n + (j + 1) % n] - v).abs() * n as f64);
            }
        }
        let g = |y: [f64; 2]| f(&y);
        let (ymin, vmin) = sample_min_2d(&g, 0.0, 1.0, n);
        let neg = |y: [f64; 2]| -f(&y);
        let (_, vmax) = sample_min_2d(&neg, 0.0, 1.0, n);
        let sup = -vmax;
        CostStats {
            mean: sum / (n * n) as f64,
            inf: vmin,
            argmin: [ymin[0].rem_euclid(1.0), ymin[1].rem_euclid(1.0)],
            sup,
            bound: vmin.abs().max(sup.abs()),
            lipschitz: lip,
        }
    }
}

// ---------------------------------------------------------------------------
// periodic cost

/// A 1-periodic running cost `y ↦ ℓ_per(y)`.
#[derive(Clone)]
pub struct PeriodicCost {
    dim: usize,
    label: String,
    f: Profile,
    stats: CostStats,
}

impl fmt::Debug for PeriodicCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicCost")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("stats", &self.stats)
            .finish()
    }
}

impl PeriodicCost {
    /// Wraps an evaluator, checking periodicity on sample points and
    /// recording mean, infimum, bound and Lipschitz constant.
    pub fn new(dim: usize, label: impl Into<String>, f: Profile) -> Result<Self> {
        check_dim(dim)?;
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
        };
        for _ in 0..64 {
            let y = [next(), next()];
            let base = f(&y[..dim]);
            if !base.is_finite() {
                return Err(Error::Domain(format!("cost is not finite at {:?}", &y[..dim])));
            }
            for axis in 0..dim {
                let mut z = y;
                z[axis] += 1.0;
                let shifted = f(&z[..dim]);
                if (shifted - base).abs() > 1e-12 * base.abs().max(1.0) {
                    return Err(Error::Domain(format!(
                        "cost is not 1-periodic along axis {axis}: {base} vs {shifted}"
                    )));
                }
            }
        }
        let stats = periodic_stats(dim, &f);
        Ok(PeriodicCost { dim, label: label.into(), f, stats })
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        PeriodicCost {
            dim,
            label: format!("const({c})"),
            f: Arc::new(move |_| c),
            stats: CostStats { mean: c, inf: c, argmin: [0.0, 0.0], sup: c, bound: c.abs(), lipschitz: 0.0 },
        }
    }

    /// `amplitude · sin(2π(y + phase))` in 1D.
    pub fn sine(amplitude: f64, phase: f64) -> Self {
        let f: Profile = Arc::new(move |y| amplitude * (2.0 * PI * (y[0] + phase)).sin());
        Self::new(1, format!("sin(a={amplitude},phase={phase})"), f).expect("sine is periodic")
    }

    /// `amplitude · (sin 2πy₁ + sin 2πy₂) / 2`.
    pub fn sine_2d(amplitude: f64) -> Self {
        let f: Profile = Arc::new(move |y| {
            0.5 * amplitude * ((2.0 * PI * y[0]).sin() + (2.0 * PI * y[1]).sin())
        });
        Self::new(2, format!("sin2d(a={amplitude})"), f).expect("sine is periodic")
    }

    /// Piecewise-linear periodic interpolant of samples at `y = i/n`, `i < n`.
    pub fn from_samples(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config("tabulated cost needs at least two samples".into()));
        }
        check_finite("tabulated cost", &values)?;
        let n = values.len();
        let f: Profile = Arc::new(move |y| {
            let t = y[0].rem_euclid(1.0) * n as f64;
            let i = (t.floor() as usize).min(n - 1);
            let w = t - i as f64;
            values[i] * (1.0 - w) + values[(i + 1) % n] * w
        });
        Self::new(1, format!("table({n})"), f)
    }

    /// `y ↦ ℓ_per(y + offset)`.
    pub fn translated(&self, offset: &[f64]) -> Self {
        let off = pad(offset);
        let inner = self.f.clone();
        let dim = self.dim;
        let f: Profile = Arc::new(move |y| {
            let z = [y[0] + off[0], if dim > 1 { y[1] + off[1] } else { 0.0 }];
            inner(&z[..dim])
        });
        let mut stats = self.stats;
        stats.argmin = [
            (stats.argmin[0] - off[0]).rem_euclid(1.0),
            if dim > 1 { (stats.argmin[1] - off[1]).rem_euclid(1.0) } else { 0.0 },
        ];
        PeriodicCost { dim, label: format!("{}+shift{:?}", self.label, &off[..dim]), f, stats }
    }

    pub fn plus_constant(&self, c: f64) -> Self {
        let inner = self.f.clone();
        let f: Profile = Arc::new(move |y| inner(y) + c);
        let mut stats = self.stats;
        stats.mean += c;
        stats.inf += c;
        stats.sup += c;
        stats.bound = stats.inf.abs().max(stats.sup.abs());
        PeriodicCost { dim: self.dim, label: format!("{}+{c}", self.label), f, stats }
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn stats(&self) -> &CostStats {
        &self.stats
    }
    pub fn mean(&self) -> f64 {
        self.stats.mean
    }
    pub fn inf(&self) -> f64 {
        self.stats.inf
    }
    pub fn bound(&self) -> f64 {
        self.stats.bound
    }
    pub fn lipschitz(&self) -> f64 {
        self.stats.lipschitz
    }
    pub fn is_constant(&self) -> bool {
        self.stats.sup - self.stats.inf <= 1e-14
    }
}

// ---------------------------------------------------------------------------
// defect

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct DefectFlags {
    pub nonpositive: bool,
    pub nonnegative: bool,
    pub even: bool,
    /// Minimum at the origin, nondecreasing away from it along every ray.
    pub single_min_at_origin: bool,
    /// Maximum at the origin, nonincreasing away from it along every ray.
    pub single_max_at_origin: bool,
    pub radial: bool,
}

/// Compactly supported perturbation `y ↦ ℓ₀(y)` with `ℓ₀ = 0` outside `B_radius`.
#[derive(Clone)]
pub struct DefectCost {
    dim: usize,
    label: String,
    f: Profile,
    radius: f64,
    flags: DefectFlags,
    min: f64,
    max: f64,
}

impl fmt::Debug for DefectCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DefectCost")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("radius", &self.radius)
            .field("flags", &self.flags)
            .finish()
    }
}

fn ray_samples(dim: usize) -> Vec<[f64; 2]> {
    if dim == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..16).map(|k| {
            let t = 2.0 * PI * k as f64 / 16.0 + 0.1;
            [t.cos(), t.sin()]
        })
        .collect()
    }
}

impl DefectCost {
    /// Wraps an evaluator; values outside `B_radius` are forced to zero and
    /// the evaluator itself must already vanish there on sampled points.
    pub fn new(dim: usize, label: impl Into<String>, radius: f64, f: Profile) -> Result<Self> {
        check_dim(dim)?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("defect radius must be finite and nonnegative, got {radius}")));
        }
        let rays = ray_samples(dim);
        let n = 400;
        // support check on the shell radius < |y| <= radius + 1
        for d in &rays {
            for i in 1..=n {
                let r = radius + i as f64 / n as f64;
                let y = [r * d[0], r * d[1]];
                let v = f(&y[..dim]);
                if v != 0.0 {
                    return Err(Error::Domain(format!(
                        "defect does not vanish outside radius {radius}: value {v} at |y|={r}"
                    )));
                }
            }
        }
        let origin = f(&[0.0, 0.0][..dim]);
        let mut flags = DefectFlags {
            nonpositive: true,
            nonnegative: true,
            even: true,
            single_min_at_origin: true,
            single_max_at_origin: true,
            radial: true,
        };
        let (mut min, mut max) = (origin, origin);
        let m = 2000;
        let tol = 1e-14;
        for d in &rays {
            let mut prev = origin;
            for i in 1..=m {
                let r = radius * i as f64 / m as f64;
                let y = [r * d[0], r * d[1]];
                let v = f(&y[..dim]);
                if !v.is_finite() {
                    return Err(Error::Domain(format!("defect is not finite at {:?}", &y[..dim])));
                }
                let w = f(&[-y[0], -y[1]][..dim]);
                min = min.min(v);
                max = max.max(v);
                flags.nonpositive &= v <= 0.0;
                flags.nonnegative &= v >= 0.0;
                flags.even &= (v - w).abs() <= 1e-12;
                flags.single_min_at_origin &= v >= prev - tol && v >= origin;
                flags.single_max_at_origin &= v <= prev + tol && v <= origin;
                if dim == 2 {
                    let t = 0.37f64;
                    let z = [y[0] * t.cos() - y[1] * t.sin(), y[0] * t.sin() + y[1] * t.cos()];
                    flags.radial &= (f(&z) - v).abs() <= 1e-12;
                }
                prev = v;
            }
        }
        flags.nonpositive &= origin <= 0.0;
        flags.nonnegative &= origin >= 0.0;
        if dim == 1 {
            flags.radial = flags.even;
        }
        Ok(DefectCost { dim, label: label.into(), f, radius, flags, min, max })
    }

    /// No defect at all.
    pub fn none(dim: usize) -> Self {
        DefectCost {
            dim,
            label: "none".into(),
            f: Arc::new(|_| 0.0),
            radius: 0.0,
            flags: DefectFlags {
                nonpositive: true,
                nonnegative: true,
                even: true,
                single_min_at_origin: true,
                single_max_at_origin: true,
                radial: true,
            },
            min: 0.0,
            max: 0.0,
        }
    }

    /// `amplitude · cos²(π|y| / (2 radius))` on `|y| ≤ radius`, zero outside.
    /// Negative amplitude gives a downward well with minimum `amplitude` at 0.
    pub fn cos2_bump(dim: usize, amplitude: f64, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Config("bump radius must be positive".into()));
        }
        let f: Profile = Arc::new(move |y| {
            let r = norm(y);
            if r <= radius {
                let c = (PI * r / (2.0 * radius)).cos();
                amplitude * c * c
            } else {
                0.0
            }
        });
        Self::new(dim, format!("cos2(a={amplitude},r={radius})"), radius, f)
    }

    /// Downward well of the given depth supported on `|y| ≤ 1/2`.
    pub fn well(dim: usize, depth: f64) -> Self {
        Self::cos2_bump(dim, -depth, 0.5).expect("valid bump")
    }

    /// Upward hump of the given height supported on `|y| ≤ 1/2`.
    pub fn hump(dim: usize, height: f64) -> Self {
        Self::cos2_bump(dim, height, 0.5).expect("valid bump")
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        if self.radius == 0.0 || norm(y) > self.radius {
            0.0
        } else {
            (self.f)(y)
        }
    }

    pub fn at_origin(&self) -> f64 {
        self.eval(&[0.0, 0.0][..self.dim])
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn flags(&self) -> DefectFlags {
        self.flags
    }
    /// Sampled minimum over the support (and 0).
    pub fn min(&self) -> f64 {
        self.min.min(0.0)
    }
    pub fn max(&self) -> f64 {
        self.max.max(0.0)
    }
    pub fn is_zero(&self) -> bool {
        self.radius == 0.0 || (self.min == 0.0 && self.max == 0.0)
    }

    /// Pointwise multiple `k · ℓ₀`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let inner = self.f.clone();
        let f: Profile = Arc::new(move |y| k * inner(y));
        Self::new(self.dim, format!("{}*{k}", self.label), self.radius, f)
    }
}

// ---------------------------------------------------------------------------
// composite landscape

/// Occupied sites of a defect lattice: a copy of the defect sits at `spacing · k`
/// for every listed `k`.
#[derive(Debug, Clone)]
pub struct DefectLattice {
    pub spacing: f64,
    sites: HashSet<[i64; 2]>,
}

impl DefectLattice {
    pub fn new(spacing: f64, sites: impl IntoIterator<Item = [i64; 2]>) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Config("lattice spacing must be positive".into()));
        }
        Ok(DefectLattice { spacing, sites: sites.into_iter().collect() })
    }

    pub fn contains(&self, k: [i64; 2]) -> bool {
        self.sites.contains(&k)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

/// State cost `ℓ = ℓ_per + ℓ₀`, optionally with ℓ₀ replicated on a lattice.
#[derive(Debug, Clone)]
pub struct Landscape {
    pub periodic: PeriodicCost,
    pub defect: DefectCost,
    pub lattice: Option<DefectLattice>,
}

impl Landscape {
    pub fn new(periodic: PeriodicCost, defect: DefectCost) -> Result<Self> {
        if periodic.dim() != defect.dim() {
            return Err(Error::Config(format!(
                "periodic cost is {}D but defect is {}D",
                periodic.dim(),
                defect.dim()
            )));
        }
        Ok(Landscape { periodic, defect, lattice: None })
    }

    pub fn flat(dim: usize) -> Self {
        Landscape { periodic: PeriodicCost::zero(dim), defect: DefectCost::none(dim), lattice: None }
    }

    pub fn with_lattice(mut self, lattice: DefectLattice) -> Self {
        self.lattice = Some(lattice);
        self
    }

    pub fn dim(&self) -> usize {
        self.periodic.dim()
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.periodic.eval(y) + self.defect_part(y)
    }

    #[inline]
    pub fn defect_part(&self, y: &[f64]) -> f64 {
        match &self.lattice {
            None => self.defect.eval(y),
            Some(lat) => {
                let q = lat.spacing;
                let dim = self.dim();
                let yy = pad(y);
                let reach = (self.defect.radius() / q).ceil() as i64 + 1;
                let c0 = (yy[0] / q).round() as i64;
                let c1 = if dim > 1 { (yy[1] / q).round() as i64 } else { 0 };
                let r1 = if dim > 1 { reach } else { 0 };
                let mut total = 0.0;
                for k0 in c0 - reach..=c0 + reach {
                    for k1 in c1 - r1..=c1 + r1 {
                        if lat.contains([k0, k1]) {
                            let z = [yy[0] - q * k0 as f64, yy[1] - q * k1 as f64];
                            total += self.defect.eval(&z[..dim]);
                        }
                    }
                }
                total
            }
        }
    }

    /// `sup |ℓ|` bound used by the witnesses.
    pub fn bound(&self) -> f64 {
        let extra = if self.lattice.is_some() { 2f64.powi(self.dim() as i32) } else { 1.0 };
        self.periodic.bound() + extra * self.defect.min().abs().max(self.defect.max().abs())
    }
}

/// Sampling-oracle value of `inf(ℓ_per + ℓ₀)` and a minimizer.
pub fn composite_inf(periodic: &PeriodicCost, defect: &DefectCost) -> ([f64; 2], f64) {
    let reach = defect.radius() + 1.0;
    let (y_out, v_out) = (periodic.stats().argmin, periodic.inf());
    let (y_in, v_in) = if periodic.dim() == 1 {
        let g = |y: f64| periodic.eval(&[y]) + defect.eval(&[y]);
        let n = (2.0 * reach * SAMPLES_PER_PERIOD as f64).ceil() as usize;
        let (y, v) = sample_min_1d(&g, -reach, reach, n);
        ([y, 0.0], v)
    } else {
        let g = |y: [f64; 2]| periodic.eval(&y) + defect.eval(&y);
        let n = (2.0 * reach * 100.0).ceil() as usize;
        sample_min_2d(&g, -reach, reach, n)
    };
    if v_in < v_out {
        (y_in, v_in)
    } else {
        (y_out, v_out)
    }
}

/// Whether the defect lowers the infimum: `inf(ℓ_per+ℓ₀) < inf ℓ_per` by more
/// than the oracle tolerance.
pub fn is_downward(periodic: &PeriodicCost, defect: &DefectCost) -> bool {
    composite_inf(periodic, defect).1 < periodic.inf() - ORACLE_TOL
}

// ---------------------------------------------------------------------------
// control sets

/// Finite set of control vectors with `|a| ≤ max_speed`; contains `a = 0`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ControlSet {
    dim: usize,
    vectors: Vec<[f64; 2]>,
    directions: usize,
    speeds: usize,
    max_speed: f64,
}

impl ControlSet {
    /// 1D: `n` equally spaced speeds in `[-max_speed, max_speed]` (`n` odd so 0 is included).
    pub fn line(n: usize, max_speed: f64) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Config(format!("1D control count must be odd and >= 3, got {n}")));
        }
        if !(max_speed > 0.0) {
            return Err(Error::Config("max speed must be positive".into()));
        }
        let half = (n / 2) as i64;
        let vectors = (-half..=half).map(|k| [max_speed * k as f64 / half as f64, 0.0]).collect();
        Ok(ControlSet { dim: 1, vectors, directions: 2, speeds: n / 2 + 1, max_speed })
    }

    /// 2D: zero plus `directions` equally spaced headings times `speeds - 1`
    /// nonzero speeds up to `max_speed`.
    pub fn disk(directions: usize, speeds: usize, max_speed: f64) -> Result<Self> {
        if directions < 4 || !directions.is_multiple_of(4) {
            return Err(Error::Config(format!("direction count must be a positive multiple of 4, got {directions}")));
        }
        if speeds < 2 {
            return Err(Error::Config("need at least one nonzero speed".into()));
        }
        if !(max_speed > 0.0) {
            return Err(Error::Config("max speed must be positive".into()));
        }
        let mut vectors = vec![[0.0, 0.0]];
        for k in 0..directions {
            let t = 2.0 * PI * k as f64 / directions as f64;
            let (s, c) = t.sin_cos();
            // snap axis-aligned components so symmetric sets stay exactly symmetric
            let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
            for j in 1..speeds {
                let m = max_speed * j as f64 / (speeds - 1) as f64;
                vectors.push([snap(m * c), snap(m * s)]);
            }
        }
        Ok(ControlSet { dim: 2, vectors, directions, speeds, max_speed })
    }

    /// 21 speeds in 1D, 32 × 11 in 2D.
    pub fn default_for(dim: usize, max_speed: f64) -> Result<Self> {
        match dim {
            1 => Self::line(21, max_speed),
            2 => Self::disk(32, 11, max_speed),
            _ => Err(Error::Config(format!("dimension must be 1 or 2, got {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.vectors.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }
    pub fn counts(&self) -> (usize, usize) {
        (self.directions, self.speeds)
    }

    /// Largest `r` with `max_a (-p·a) ≥ r|p|` for every `p`.
    pub fn inner_radius(&self) -> f64 {
        if self.dim == 1 {
            self.max_speed
        } else {
            self.max_speed * (PI / self.directions as f64).cos()
        }
    }

    /// Closed under `a ↦ -a` (and, in 2D, quarter turns).
    pub fn is_symmetric(&self) -> bool {
        let has = |v: [f64; 2]| {
            self.vectors.iter().any(|w| (w[0] - v[0]).abs() < 1e-12 && (w[1] - v[1]).abs() < 1e-12)
        };
        self.vectors.iter().all(|a| has([-a[0], -a[1]]) && (self.dim == 1 || has([-a[1], a[0]])))
    }
}

// ---------------------------------------------------------------------------
// kinetic part

/// Tabulated convex kinetic profile, either on a signed 1D grid or radial in |p|.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct KineticTable {
    pub p: Vec<f64>,
    pub values: Vec<f64>,
    pub radial: bool,
}

impl KineticTable {
    pub fn new(p: Vec<f64>, values: Vec<f64>, radial: bool) -> Result<Self> {
        if p.len() != values.len() || p.len() < 2 {
            return Err(Error::Config("kinetic table needs matching grids of length >= 2".into()));
        }
        check_finite("kinetic table", &values)?;
        if p.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("kinetic table grid must be strictly increasing".into()));
        }
        if radial && p[0] != 0.0 {
            return Err(Error::Config("radial kinetic table must start at |p| = 0".into()));
        }
        Ok(KineticTable { p, values, radial })
    }

    /// Linear interpolation, linear extrapolation with the end slopes.
    pub fn eval_scalar(&self, s: f64) -> f64 {
        let n = self.p.len();
        let i = match self.p.partition_point(|&q| q <= s) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (a, b) = (self.p[i], self.p[i + 1]);
        let t = (s - a) / (b - a);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn lipschitz(&self) -> f64 {
        self.p
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Convex kinetic term `K(p)` of a separable Hamiltonian `K(p) - ℓ(x)`.
#[derive(Clone)]
pub enum Kinetic {
    /// `K(p) = |p|`.
    Norm,
    /// `K(p) = sqrt(1 + |p|²) - 1`.
    Relativistic,
    /// `K(p) = k(|p|)` for a user profile with the given Lipschitz constant.
    Radial { label: String, profile: RadialProfile, lipschitz: f64 },
    Table(KineticTable),
}

impl fmt::Debug for Kinetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kinetic::Norm => write!(f, "Norm"),
            Kinetic::Relativistic => write!(f, "Relativistic"),
            Kinetic::Radial { label, lipschitz, .. } => write!(f, "Radial({label}, lip={lipschitz})"),
            Kinetic::Table(t) => write!(f, "Table(n={}, radial={})", t.p.len(), t.radial),
        }
    }
}

impl Kinetic {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Kinetic::Norm => norm(p),
            Kinetic::Relativistic => {
                let s = norm(p);
                (1.0 + s * s).sqrt() - 1.0
            }
            Kinetic::Radial { profile, .. } => profile(norm(p)),
            Kinetic::Table(t) => {
                if t.radial {
                    t.eval_scalar(norm(p))
                } else {
                    t.eval_scalar(p[0])
                }
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Kinetic::Norm | Kinetic::Relativistic => 1.0,
            Kinetic::Radial { lipschitz, .. } => *lipschitz,
            Kinetic::Table(t) => t.lipschitz(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Kinetic::Norm => "norm".into(),
            Kinetic::Relativistic => "relativistic".into(),
            Kinetic::Radial { label, .. } => label.clone(),
            Kinetic::Table(_) => "table".into(),
        }
    }
}

/// Control cost `ℓ̄(a) = sup_p (-p·a - K(p))` for every control, on the
/// default momentum grid.
pub fn legendre_cost(kinetic: &Kinetic, controls: &ControlSet) -> Result<Vec<f64>> {
    legendre_cost_with(kinetic, controls, LEGENDRE_STEP, LEGENDRE_RANGE)
}

/// [`legendre_cost`] with an explicit radial grid `s = 0, step, …, range`.
/// For radial `K` the supremum is attained with `p` antiparallel to `a`, so
/// only `sup_s (s|a| - k(s))` is needed.
pub fn legendre_cost_with(kinetic: &Kinetic, controls: &ControlSet, step: f64, range: f64) -> Result<Vec<f64>> {
    if let Kinetic::Table(t) = kinetic {
        if !t.radial {
            if controls.dim() != 1 {
                return Err(Error::Config("signed kinetic table requires 1D controls".into()));
            }
            return Ok(controls
                .vectors()
                .iter()
                .map(|a| {
                    t.p.iter()
                        .zip(&t.values)
                        .map(|(p, k)| -p * a[0] - k)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect());
        }
    }
    if !(step > 0.0 && range > step) {
        return Err(Error::Config("legendre grid needs 0 < step < range".into()));
    }
    let (s_grid, k_grid): (Vec<f64>, Vec<f64>) = match kinetic {
        Kinetic::Table(t) => (t.p.clone(), t.values.clone()),
        _ => {
            let n = (range / step).round() as usize;
            (0..=n)
                .map(|i| {
                    let s = i as f64 * step;
                    (s, kinetic.eval(&[s]))
                })
                .unzip()
        }
    };
    let k0 = k_grid[0];
    if !k0.is_finite() {
        return Err(Error::Domain("kinetic term is not finite at p = 0".into()));
    }
    for (s, k) in s_grid.iter().zip(&k_grid) {
        if !k.is_finite() || *k < k0 - 1e-12 {
            return Err(Error::Domain(format!(
                "kinetic term is not bounded below by its value at 0 (K({s}) = {k} < K(0) = {k0})"
            )));
        }
    }
    let lip = kinetic.lipschitz();
    let mut out = Vec::with_capacity(controls.len());
    for a in controls.vectors() {
        let speed = norm(a);
        if speed > lip + 1e-12 && !matches!(kinetic, Kinetic::Table(_)) {
            return Err(Error::Domain(format!(
                "control speed {speed} exceeds the Lipschitz constant {lip} of the kinetic term"
            )));
        }
        let best = s_grid
            .iter()
            .zip(&k_grid)
            .map(|(s, k)| s * speed - k)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(best);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Hamiltonians

/// `H(x,p) = max_a (-p·a - ℓ(x) - ℓ̄(a) - shift·a)`, dynamics `f(x,a) = a`.
#[derive(Debug, Clone)]
pub struct ControlForm {
    pub controls: ControlSet,
    /// Control-dependent cost `ℓ̄(a_j)`, one entry per control.
    pub control_cost: Vec<f64>,
    pub landscape: Landscape,
    /// Momentum folded into the cost: `ℓ̃(x,a) = ℓ(x,a) + shift·a`.
    pub shift: [f64; 2],
}

impl ControlForm {
    pub fn new(controls: ControlSet, control_cost: Vec<f64>, landscape: Landscape) -> Result<Self> {
        if control_cost.len() != controls.len() {
            return Err(Error::Config(format!(
                "{} control costs for {} controls",
                control_cost.len(),
                controls.len()
            )));
        }
        if controls.dim() != landscape.dim() {
            return Err(Error::Config("controls and landscape differ in dimension".into()));
        }
        check_finite("control cost", &control_cost)?;
        Ok(ControlForm { controls, control_cost, landscape, shift: [0.0, 0.0] })
    }

    pub fn dim(&self) -> usize {
        self.controls.dim()
    }

    /// `ℓ̄(a_j) + shift·a_j`.
    pub fn effective_control_cost(&self, j: usize) -> f64 {
        let a = self.controls.vectors()[j];
        self.control_cost[j] + self.shift[0] * a[0] + self.shift[1] * a[1]
    }

    /// `max_j (-p·a_j - ℓ̄(a_j) - shift·a_j)`: the Hamiltonian without the state cost.
    pub fn kinetic_part(&self, p: &[f64]) -> f64 {
        let p = pad(p);
        self.controls
            .vectors()
            .iter()
            .enumerate()
            .map(|(j, a)| -(p[0] * a[0] + p[1] * a[1]) - self.effective_control_cost(j))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `H(x,p) = K(p) - ℓ(x)`.
#[derive(Debug, Clone)]
pub struct SeparableForm {
    pub kinetic: Kinetic,
    pub landscape: Landscape,
}

#[derive(Debug, Clone)]
pub enum HamiltonianSpec {
    ControlForm(ControlForm),
    Separable(SeparableForm),
}

impl HamiltonianSpec {
    pub fn separable(kinetic: Kinetic, periodic: PeriodicCost, defect: DefectCost) -> Result<Self> {
        Ok(HamiltonianSpec::Separable(SeparableForm { kinetic, landscape: Landscape::new(periodic, defect)? }))
    }

    pub fn dim(&self) -> usize {
        self.landscape().dim()
    }

    pub fn landscape(&self) -> &Landscape {
        match self {
            HamiltonianSpec::ControlForm(c) => &c.landscape,
            HamiltonianSpec::Separable(s) => &s.landscape,
        }
    }

    /// Same Hamiltonian with a different state cost.
    pub fn with_landscape(&self, landscape: Landscape) -> Result<Self> {
        if landscape.dim() != self.dim() {
            return Err(Error::Config("landscape dimension mismatch".into()));
        }
        Ok(match self {
            HamiltonianSpec::ControlForm(c) => HamiltonianSpec::ControlForm(ControlForm { landscape, ..c.clone() }),
            HamiltonianSpec::Separable(s) => HamiltonianSpec::Separable(SeparableForm { landscape, kinetic: s.kinetic.clone() }),
        })
    }

    /// Control-form realization; separable specs go through [`legendre_cost`]
    /// with the default control set.
    pub fn control_form(&self) -> Result<ControlForm> {
        match self {
            HamiltonianSpec::ControlForm(c) => Ok(c.clone()),
            HamiltonianSpec::Separable(s) => {
                let controls = ControlSet::default_for(s.landscape.dim(), s.kinetic.lipschitz())?;
                let cost = legendre_cost(&s.kinetic, &controls)?;
                ControlForm::new(controls, cost, s.landscape.clone())
            }
        }
    }

    /// Bound on `|∂_p H|`.
    pub fn max_speed(&self) -> f64 {
        match self {
            HamiltonianSpec::ControlForm(c) => c.controls.max_speed(),
            HamiltonianSpec::Separable(s) => s.kinetic.lipschitz(),
        }
    }

    /// `(r_f, M_ℓ)` such that `H(x,p) ≥ r_f|p| - M_ℓ`.
    pub fn coercivity_constants(&self) -> Result<(f64, f64)> {
        match self {
            HamiltonianSpec::ControlForm(c) => {
                let worst = (0..c.controls.len()).map(|j| c.effective_control_cost(j).abs()).fold(0.0, f64::max);
                Ok((c.controls.inner_radius(), c.landscape.bound() + worst))
            }
            HamiltonianSpec::Separable(s) => {
                let r = s.kinetic.lipschitz();
                // sup_p (r|p| - K(p)) is the conjugate at speed r
                let probe = ControlSet::line(3, r)?;
                let conj = legendre_cost(&s.kinetic, &probe)?[2];
                Ok((r, s.landscape.bound() + conj.max(0.0)))
            }
        }
    }
}

/// `H(x, p)` for either variant.
pub fn eval_hamiltonian(spec: &HamiltonianSpec, x: &[f64], p: &[f64]) -> Result<f64> {
    check_finite("point", x)?;
    check_finite("covector", p)?;
    let dim = spec.dim();
    if x.len() != dim || p.len() != dim {
        return Err(Error::Domain(format!("expected {dim}D point and covector")));
    }
    Ok(match spec {
        HamiltonianSpec::Separable(s) => s.kinetic.eval(p) - s.landscape.eval(x),
        HamiltonianSpec::ControlForm(c) => c.kinetic_part(p) - c.landscape.eval(x),
    })
}

/// Spec with `ℓ̃(x,a) = ℓ(x,a) + p0·a`, so that `H̃(x,p) = H(x, p + p0)`.
/// Separable specs are first converted to control form.
pub fn shift_hamiltonian(spec: &HamiltonianSpec, p0: &[f64]) -> Result<HamiltonianSpec> {
    check_finite("shift", p0)?;
    if p0.len() != spec.dim() {
        return Err(Error::Domain("shift dimension mismatch".into()));
    }
    let mut c = spec.control_form()?;
    let q = pad(p0);
    c.shift = [c.shift[0] + q[0], c.shift[1] + q[1]];
    Ok(HamiltonianSpec::ControlForm(c))
}

/// Outcome of a sampled structural check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WitnessReport {
    pub samples: usize,
    /// Smallest slack observed; negative means a violation.
    pub worst_margin: f64,
}

impl WitnessReport {
    pub fn holds(&self) -> bool {
        self.worst_margin >= -1e-10
    }
}

/// `H(x,p) ≥ r_f|p| - M_ℓ` over all sample pairs.
pub fn coercivity_witness(spec: &HamiltonianSpec, xs: &[Vec<f64>], ps: &[Vec<f64>]) -> Result<WitnessReport> {
    let (r, m) = spec.coercivity_constants()?;
    let mut worst = f64::INFINITY;
    for x in xs {
        for p in ps {
            let h = eval_hamiltonian(spec, x, p)?;
            worst = worst.min(h - (r * norm(p) - m));
        }
    }
    Ok(WitnessReport { samples: xs.len() * ps.len(), worst_margin: worst })
}

/// `|H(x,p) - H(x,q)| ≤ M_f |p - q|` over consecutive sample covectors.
pub fn lipschitz_witness(spec: &HamiltonianSpec, xs: &[Vec<f64>], ps: &[Vec<f64>]) -> Result<WitnessReport> {
    let mf = spec.max_speed();
    let mut worst = f64::INFINITY;
    for x in xs {
        for w in ps.windows(2) {
            let d: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect();
            let gap = (eval_hamiltonian(spec, x, &w[0])? - eval_hamiltonian(spec, x, &w[1])?).abs();
            worst = worst.min(mf * norm(&d) + 1e-12 - gap);
        }
    }
    Ok(WitnessReport { samples: xs.len() * ps.len().saturating_sub(1), worst_margin: worst })
}

/// Midpoint convexity in `p` over consecutive sample covectors.
pub fn convexity_witness(spec: &HamiltonianSpec, xs: &[Vec<f64>], ps: &[Vec<f64>]) -> Result<WitnessReport> {
    let mut worst = f64::INFINITY;
    for x in xs {
        for w in ps.windows(2) {
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let lhs = eval_hamiltonian(spec, x, &mid)?;
            let rhs = 0.5 * (eval_hamiltonian(spec, x, &w[0])? + eval_hamiltonian(spec, x, &w[1])?);
            worst = worst.min(rhs + 1e-10 - lhs);
        }
    }
    Ok(WitnessReport { samples: xs.len() * ps.len().saturating_sub(1), worst_margin: worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_well() -> HamiltonianSpec {
        HamiltonianSpec::separable(Kinetic::Norm, PeriodicCost::zero(1), DefectCost::well(1, 1.0)).unwrap()
    }

    #[test]
    fn separable_eval_examples() {
        let spec = flat_well();
        assert!((eval_hamiltonian(&spec, &[0.0], &[0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_hamiltonian(&spec, &[2.0], &[3.0]).unwrap() - 3.0).abs() < 1e-15);
        assert!(eval_hamiltonian(&spec, &[f64::NAN], &[0.0]).is_err());
    }

    #[test]
    fn control_form_matches_norm() {
        let spec = flat_well();
        let cf = HamiltonianSpec::ControlForm(spec.control_form().unwrap());
        assert_eq!(cf.control_form().unwrap().controls.len(), 21);
        for x in [-0.3, 0.0, 0.1, 0.7] {
            for p in [-2.0f64, 0.0, 2.0] {
                let direct = p.abs() - spec.landscape().eval(&[x]);
                let h = eval_hamiltonian(&cf, &[x], &[p]).unwrap();
                assert!((h - direct).abs() <= 1e-12, "x={x} p={p}: {h} vs {direct}");
            }
        }
    }

    #[test]
    fn legendre_of_norm_vanishes() {
        let c = ControlSet::line(21, 1.0).unwrap();
        let l = legendre_cost(&Kinetic::Norm, &c).unwrap();
        assert!(l.iter().all(|v| v.abs() < 1e-15));
        let d = ControlSet::disk(32, 11, 1.0).unwrap();
        assert_eq!(d.len(), 321);
        assert!(legendre_cost(&Kinetic::Norm, &d).unwrap().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn legendre_relativistic_closed_form() {
        let c = ControlSet::line(21, 1.0).unwrap();
        let l = legendre_cost(&Kinetic::Relativistic, &c).unwrap();
        for (a, v) in c.vectors().iter().zip(&l) {
            let s = a[0].abs();
            if [0.0, 0.5, 0.9].iter().any(|t| (t - s).abs() < 1e-12) {
                let exact = 1.0 - (1.0 - s * s).sqrt();
                assert!((v - exact).abs() < 1e-3, "a={s}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn legendre_rejects_unbounded_below() {
        let k = Kinetic::Radial { label: "neg".into(), profile: Arc::new(|s| -s), lipschitz: 1.0 };
        let c = ControlSet::line(5, 1.0).unwrap();
        assert!(matches!(legendre_cost(&k, &c), Err(Error::Domain(_))));
    }

    #[test]
    fn shift_is_a_momentum_translation() {
        let spec = flat_well();
        let same = shift_hamiltonian(&spec, &[0.0]).unwrap();
        let shifted = shift_hamiltonian(&spec, &[1.0]).unwrap();
        for x in [-0.2, 0.0, 0.4, 3.0] {
            for p in [-1.5, -0.5, 0.0, 0.5] {
                let h0 = eval_hamiltonian(&spec, &[x], &[p]).unwrap();
                assert!((eval_hamiltonian(&same, &[x], &[p]).unwrap() - h0).abs() < 1e-12);
                let h1 = eval_hamiltonian(&spec, &[x], &[p + 1.0]).unwrap();
                assert!((eval_hamiltonian(&shifted, &[x], &[p]).unwrap() - h1).abs() < 1e-12);
            }
        }
        let xs: Vec<Vec<f64>> = (-8..=8).map(|i| vec![i as f64 * 0.1]).collect();
        let ps: Vec<Vec<f64>> = (-30..=30).map(|i| vec![i as f64 * 0.1]).collect();
        for s in [&spec, &shifted] {
            assert!(coercivity_witness(s, &xs, &ps).unwrap().holds());
            assert!(lipschitz_witness(s, &xs, &ps).unwrap().holds());
            assert!(convexity_witness(s, &xs, &ps).unwrap().holds());
        }
    }

    #[test]
    fn defect_flags_and_support() {
        let w = DefectCost::well(1, 1.0);
        let f = w.flags();
        assert!(f.nonpositive && f.even && f.single_min_at_origin && !f.single_max_at_origin);
        assert_eq!(w.eval(&[0.6]), 0.0);
        assert!((w.at_origin() + 1.0).abs() < 1e-15);
        let h = DefectCost::hump(1, 1.0);
        assert!(h.flags().nonnegative && h.flags().single_max_at_origin);
        let r = DefectCost::well(2, 1.0);
        assert!(r.flags().radial && r.flags().single_min_at_origin);
        let leaky: Profile = Arc::new(|y| -(-y[0] * y[0]).exp());
        assert!(DefectCost::new(1, "leaky", 0.5, leaky).is_err());
    }

    #[test]
    fn sampling_oracle_values() {
        let s = PeriodicCost::sine(1.0, 0.0);
        assert!(s.mean().abs() < 1e-12);
        assert!((s.inf() + 1.0).abs() < 1e-9);
        let (y, v) = composite_inf(&s, &DefectCost::well(1, 1.0));
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((v + golden).abs() < ORACLE_TOL, "{v}");
        assert!((y[0] + 0.1762).abs() < 1e-3, "{y:?}");
        assert!(is_downward(&s, &DefectCost::well(1, 1.0)));
        assert!(!is_downward(&s, &DefectCost::hump(1, 1.0)));
        assert!(!is_downward(&PeriodicCost::zero(1), &DefectCost::none(1)));
    }

    #[test]
    fn periodicity_is_enforced() {
        let bad: Profile = Arc::new(|y| y[0]);
        assert!(PeriodicCost::new(1, "ramp", bad).is_err());
        let t = PeriodicCost::from_samples(vec![0.0, 1.0, 0.0, -1.0]).unwrap();
        assert!((t.eval(&[0.25]) - 1.0).abs() < 1e-12);
        assert!((t.eval(&[1.125]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn composite_equals_periodic_off_support() {
        let l = Landscape::new(PeriodicCost::sine(1.0, 0.0), DefectCost::well(1, 1.0)).unwrap();
        for i in 0..200 {
            let y = 0.5 + 1e-9 + i as f64 * 0.037;
            assert_eq!(l.eval(&[y]), l.periodic.eval(&[y]));
            assert_eq!(l.eval(&[-y]), l.periodic.eval(&[-y]));
        }
    }

    #[test]
    fn control_sets() {
        let d = ControlSet::disk(32, 11, 1.0).unwrap();
        assert!(d.is_symmetric());
        assert!(d.vectors().iter().any(|a| a[0] == 0.0 && a[1] == 0.0));
        assert!(d.vectors().iter().all(|a| norm(a) <= 1.0 + 1e-12));
        assert!(ControlSet::line(4, 1.0).is_err());
    }
}
