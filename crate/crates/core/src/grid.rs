//! Uniform grids over a torus, a ball or a box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    /// Unit torus, `n` nodes per axis at `i/n`.
    Torus,
    /// Nodes of the box grid with `|x| ≤ radius`.
    Ball { radius: f64 },
    /// `[-half_width, half_width]^d`.
    Box { half_width: f64 },
}

/// Scalar values on a uniform tensor grid. Ball grids keep the enclosing box
/// layout plus an activity mask; inactive nodes hold 0 and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub geometry: Geometry,
    pub dim: usize,
    pub h: f64,
    /// Nodes per axis.
    pub n: usize,
    /// Coordinate of node 0 along each axis.
    pub origin: f64,
    pub values: Vec<f64>,
    pub active: Vec<bool>,
}

fn check(dim: usize, h: f64) -> Result<()> {
    if dim != 1 && dim != 2 {
        return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
    }
    Ok(())
}

impl GridField {
    /// Torus with `n` nodes per axis.
    pub fn torus(dim: usize, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::Config("torus needs at least 4 nodes per axis".into()));
        }
        let h = 1.0 / n as f64;
        check(dim, h)?;
        let len = n.pow(dim as u32);
        Ok(GridField { geometry: Geometry::Torus, dim, h, n, origin: 0.0, values: vec![0.0; len], active: vec![true; len] })
    }

    /// Box `[-half_width, half_width]^d`; the spacing is adjusted so that
    /// `half_width` is a whole number of cells.
    pub fn boxed(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        check(dim, h)?;
        if !(half_width > 0.0) {
            return Err(Error::Config("box half-width must be positive".into()));
        }
        let half = (half_width / h).round().max(1.0) as usize;
        let h = half_width / half as f64;
        let n = 2 * half + 1;
        let len = n.pow(dim as u32);
        Ok(GridField {
            geometry: Geometry::Box { half_width },
            dim,
            h,
            n,
            origin: -half_width,
            values: vec![0.0; len],
            active: vec![true; len],
        })
    }

    /// Ball of the given radius, laid out on the enclosing box grid.
    pub fn ball(dim: usize, radius: f64, h: f64) -> Result<Self> {
        let mut g = Self::boxed(dim, radius, h)?;
        g.geometry = Geometry::Ball { radius };
        for i in 0..g.len() {
            let x = g.coords(i);
            g.active[i] = crate::fields::norm(&x[..dim]) <= radius + 1e-9 * g.h;
        }
        Ok(g)
    }

    /// Box grid with `n` nodes per axis (odd) spanning `[-half_width, half_width]`.
    pub fn boxed_nodes(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Config("node count must be odd and >= 3".into()));
        }
        Self::boxed(dim, half_width, 2.0 * half_width / (n - 1) as f64)
    }

    /// Ball grid with `n` nodes per axis across the diameter.
    pub fn ball_nodes(dim: usize, radius: f64, n: usize) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::Config("node count must be odd and >= 3".into()));
        }
        Self::ball(dim, radius, 2.0 * radius / (n - 1) as f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.geometry, Geometry::Torus)
    }

    /// Axis indices of a flat index; the first axis varies slowest.
    #[inline]
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    #[inline]
    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        if self.dim == 1 {
            ij[0]
        } else {
            ij[0] * self.n + ij[1]
        }
    }

    /// Coordinates of a node (second entry 0 in 1D).
    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let ij = self.unflatten(idx);
        let x0 = self.origin + ij[0] as f64 * self.h;
        let x1 = if self.dim == 2 { self.origin + ij[1] as f64 * self.h } else { 0.0 };
        [x0, x1]
    }

    /// Flat index of the node closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let axis = |v: f64| {
            let t = ((v - self.origin) / self.h).round();
            if self.is_periodic() {
                (t as i64).rem_euclid(self.n as i64) as usize
            } else {
                t.clamp(0.0, (self.n - 1) as f64) as usize
            }
        };
        let i = axis(x[0]);
        let j = if self.dim == 2 { axis(x[1]) } else { 0 };
        self.flatten([i, j])
    }

    /// Node closest to the origin.
    pub fn origin_index(&self) -> usize {
        self.nearest(&[0.0, 0.0])
    }

    /// Multilinear interpolation at `x`; `None` outside the grid or when a
    /// needed corner is inactive.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let locate = |v: f64| -> Option<(i64, f64)> {
            let t = (v - self.origin) / self.h;
            let i = t.floor();
            let w = t - i;
            let i = i as i64;
            if self.is_periodic() {
                Some((i, w))
            } else if t < -1e-9 || t > (self.n - 1) as f64 + 1e-9 {
                None
            } else {
                let i = i.clamp(0, self.n as i64 - 1);
                Some((i, (t - i as f64).clamp(0.0, 1.0)))
            }
        };
        let (i0, w0) = locate(x[0])?;
        let (i1, w1) = if self.dim == 2 { locate(x[1])? } else { (0, 0.0) };
        let mut total = 0.0;
        let m = if self.dim == 2 { 2 } else { 1 };
        for a in 0..2 {
            for b in 0..m {
                let wa = if a == 0 { 1.0 - w0 } else { w0 };
                let wb = if self.dim == 1 { 1.0 } else if b == 0 { 1.0 - w1 } else { w1 };
                let wt = wa * wb;
                if wt == 0.0 {
                    continue;
                }
                let ia = self.wrap(i0 + a as i64)?;
                let ib = if self.dim == 2 { self.wrap(i1 + b as i64)? } else { 0 };
                let idx = self.flatten([ia, ib]);
                if !self.active[idx] {
                    return None;
                }
                total += wt * self.values[idx];
            }
        }
        Some(total)
    }

    fn wrap(&self, i: i64) -> Option<usize> {
        if self.is_periodic() {
            Some(i.rem_euclid(self.n as i64) as usize)
        } else if i >= 0 && (i as usize) < self.n {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Indices of active nodes.
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.active[i])
    }

    /// Mean over active nodes.
    pub fn mean(&self) -> f64 {
        let (s, c) = self.active_indices().fold((0.0, 0usize), |(s, c), i| (s + self.values[i], c + 1));
        s / c.max(1) as f64
    }

    /// `max |v|` over active nodes.
    pub fn sup_norm(&self) -> f64 {
        self.active_indices().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.active_indices()
            .map(|i| self.values[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }

    /// Same layout with values replaced by `f(x, v)`.
    pub fn map(&self, f: impl Fn([f64; 2], f64) -> f64) -> GridField {
        let mut out = self.clone();
        for i in 0..self.len() {
            if self.active[i] {
                out.values[i] = f(self.coords(i), self.values[i]);
            }
        }
        out
    }

    /// Largest one-sided difference quotient between active axis neighbours.
    pub fn gradient_sup(&self) -> f64 {
        let mut best: f64 = 0.0;
        for idx in self.active_indices() {
            let ij = self.unflatten(idx);
            for axis in 0..self.dim {
                let mut nb = ij;
                let next = ij[axis] as i64 + 1;
                let Some(w) = self.wrap(next) else { continue };
                nb[axis] = w;
                let j = self.flatten(nb);
                if self.active[j] {
                    best = best.max((self.values[j] - self.values[idx]).abs() / self.h);
                }
            }
        }
        best
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.active_indices().find(|&i| !self.values[i].is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Domain(format!("non-finite value at node {:?}", self.coords(i)))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts() {
        let t = GridField::torus(1, 400).unwrap();
        assert_eq!(t.len(), 400);
        assert!((t.h - 0.0025).abs() < 1e-15);
        let b = GridField::ball_nodes(2, 4.0, 201).unwrap();
        assert_eq!(b.n, 201);
        assert!((b.h - 0.04).abs() < 1e-15);
        assert!(b.active_indices().all(|i| { let x = b.coords(i); (x[0] * x[0] + x[1] * x[1]).sqrt() <= 4.0 + 1e-9 }));
        let o = b.origin_index();
        assert_eq!(b.coords(o), [0.0, 0.0]);
        assert!(GridField::boxed(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn interpolation_is_exact_on_affine() {
        let mut g = GridField::boxed(2, 1.0, 0.1).unwrap();
        g = g.map(|x, _| 2.0 * x[0] - x[1] + 0.5);
        let v = g.interpolate(&[0.33, -0.71]).unwrap();
        assert!((v - (0.66 + 0.71 + 0.5)).abs() < 1e-12);
        assert!(g.interpolate(&[1.2, 0.0]).is_none());
        let mut t = GridField::torus(1, 8).unwrap();
        t = t.map(|x, _| x[0]);
        // wraps between the last node (7/8) and node 0
        let v = t.interpolate(&[0.9375]).unwrap();
        assert!((v - 0.4375).abs() < 1e-12);
    }
}
