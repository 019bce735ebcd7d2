//! Closed-form 1D solutions used as ground truth.
//!
//! All formulas assume the separable Hamiltonian `|p| − ℓ(y)` with the
//! dynamics `ẏ = a`, `|a| ≤ 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{DefectCost, PeriodicCost};
use crate::quadrature::{integrate, QUAD_TOL};

fn require_1d(d: usize) -> Result<()> {
    if d == 1 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("closed forms are one-dimensional, got dimension {d}")))
    }
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// Which single-defect formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectOrientation {
    Downward,
    Upward,
}

/// Solution of `u + |u′| = ℓ₀(x/ε)` on the whole line for a single defect in a
/// flat environment.
#[derive(Debug, Clone)]
pub struct FlatDefectSolution {
    defect: DefectCost,
    eps: f64,
    orientation: DefectOrientation,
    tol: f64,
    /// Downward branch constants `ℓ₀(0) + ∫ e^{±t} ℓ₀(t/ε)` over the whole
    /// support, so points outside it cost one exponential.
    outer: [f64; 2],
}

impl FlatDefectSolution {
    /// Downward defect: needs a single minimum at the origin.
    pub fn downward(defect: &DefectCost, eps: f64) -> Result<Self> {
        require_1d(defect.dim())?;
        check_scale("epsilon", eps)?;
        if !defect.flags().single_min_at_origin {
            return Err(Error::Precondition(format!(
                "defect {} does not have a single minimum at the origin",
                defect.label()
            )));
        }
        let mut sol = FlatDefectSolution {
            defect: defect.clone(),
            eps,
            orientation: DefectOrientation::Downward,
            tol: QUAD_TOL,
            outer: [0.0; 2],
        };
        let s = sol.support();
        let l0 = defect.at_origin();
        sol.outer = [
            l0 + integrate(&|t| (-t).exp() * sol.cost(t), -s, 0.0, QUAD_TOL),
            l0 + integrate(&|t| t.exp() * sol.cost(t), 0.0, s, QUAD_TOL),
        ];
        Ok(sol)
    }

    /// Upward defect: needs a nonnegative even profile with a single maximum at 0.
    pub fn upward(defect: &DefectCost, eps: f64) -> Result<Self> {
        require_1d(defect.dim())?;
        check_scale("epsilon", eps)?;
        let fl = defect.flags();
        if !(fl.nonnegative && fl.even && fl.single_max_at_origin) {
            return Err(Error::Precondition(format!(
                "defect {} must be nonnegative, even, with a single maximum at the origin",
                defect.label()
            )));
        }
        Ok(FlatDefectSolution {
            defect: defect.clone(),
            eps,
            orientation: DefectOrientation::Upward,
            tol: QUAD_TOL,
            outer: [0.0; 2],
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn orientation(&self) -> DefectOrientation {
        self.orientation
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Rescaled cost `ℓ₀(x/ε)`.
    pub fn cost(&self, x: f64) -> f64 {
        self.defect.eval(&[x / self.eps])
    }

    fn support(&self) -> f64 {
        self.eps * self.defect.radius()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s = self.support();
        let l = |t: f64| self.cost(t);
        match self.orientation {
            DefectOrientation::Downward => {
                let l0 = self.defect.at_origin();
                if x > s {
                    return (-x).exp() * self.outer[1];
                }
                if x < -s {
                    return x.exp() * self.outer[0];
                }
                if x >= 0.0 {
                    let b = x.min(s);
                    // e^{-x} ∫_0^b e^t ℓ = ∫_0^b e^{t-x} ℓ, kept in range for large x
                    (-x).exp() * l0 + integrate(&|t| (t - x).exp() * l(t), 0.0, b, self.tol)
                } else {
                    let a = x.max(-s);
                    x.exp() * l0 + integrate(&|t| (x - t).exp() * l(t), a, 0.0, self.tol)
                }
            }
            DefectOrientation::Upward => {
                if x <= 0.0 {
                    let b = x.min(s);
                    if b <= -s {
                        return 0.0;
                    }
                    integrate(&|t| (t - x).exp() * l(t), -s, b, self.tol)
                } else {
                    let a = x.max(-s);
                    if a >= s {
                        return 0.0;
                    }
                    integrate(&|t| (x - t).exp() * l(t), a, s, self.tol)
                }
            }
        }
    }

    /// Derivative from the ODE each branch satisfies.
    pub fn derivative(&self, x: f64) -> f64 {
        let u = self.eval(x);
        let l = self.cost(x);
        match self.orientation {
            DefectOrientation::Downward => {
                if x >= 0.0 {
                    l - u
                } else {
                    u - l
                }
            }
            DefectOrientation::Upward => {
                if x <= 0.0 {
                    l - u
                } else {
                    u - l
                }
            }
        }
    }

    /// `u + |u′| − ℓ₀(x/ε)`.
    pub fn residual(&self, x: f64) -> f64 {
        self.eval(x) + self.derivative(x).abs() - self.cost(x)
    }
}

/// Single downward defect in a flat environment at scale `ε`.
pub fn u_eps_flat(defect: &DefectCost, eps: f64, x: f64) -> Result<f64> {
    Ok(FlatDefectSolution::downward(defect, eps)?.eval(x))
}

/// Single upward defect in a flat environment at scale `ε`.
pub fn u_eps_flat_upward(defect: &DefectCost, eps: f64, x: f64) -> Result<f64> {
    Ok(FlatDefectSolution::upward(defect, eps)?.eval(x))
}

/// Discounted whole-line problem `λw + |w′| = ℓ₀` and its normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountedValue {
    pub value: f64,
    /// `w(x) − w(0)`.
    pub normalized: f64,
    /// `λ → 0` limit of the normalized value.
    pub limit: f64,
}

pub fn w_lambda_flat(defect: &DefectCost, lambda: f64, x: f64) -> Result<DiscountedValue> {
    require_1d(defect.dim())?;
    check_scale("lambda", lambda)?;
    if !defect.flags().single_min_at_origin {
        return Err(Error::Precondition(format!(
            "defect {} does not have a single minimum at the origin",
            defect.label()
        )));
    }
    let l0 = defect.at_origin();
    let r = defect.radius();
    let l = |t: f64| defect.eval(&[t]);
    let ax = x.abs();
    let b = ax.min(r);
    // substituting t → −t turns the x < 0 branch into the x > 0 one
    let lr = |t: f64| if x >= 0.0 { l(t) } else { l(-t) };
    let weighted = integrate(&|t| (lambda * (t - ax)).exp() * lr(t), 0.0, b, QUAD_TOL);
    let plain = integrate(&lr, 0.0, b, QUAD_TOL);
    let decay = (-lambda * ax).exp_m1();
    Ok(DiscountedValue {
        value: (decay + 1.0) * l0 / lambda + weighted,
        normalized: decay / lambda * l0 + weighted,
        limit: -l0 * ax + plain,
    })
}

/// The pair `g(x) = e^{−x}∫_{−∞}^x e^t ℓ(t/ε) dt`, `h(x) = e^{x}∫_x^∞ e^{−t} ℓ(t/ε) dt`,
/// both `ε`-periodic, with `g + g′ = ℓ(x/ε)` and `h − h′ = ℓ(x/ε)`.
#[derive(Debug, Clone)]
pub struct PeriodicPair {
    cost: PeriodicCost,
    eps: f64,
    tol: f64,
    /// `⟨g⟩ − ⟨ℓ⟩` measured at construction.
    pub mean_gap: f64,
}

pub fn g_h_periodic(cost: &PeriodicCost, eps: f64) -> Result<PeriodicPair> {
    require_1d(cost.dim())?;
    check_scale("epsilon", eps)?;
    let mut pair = PeriodicPair { cost: cost.clone(), eps, tol: 1e-11, mean_gap: 0.0 };
    // trapezoid rule is spectrally accurate for smooth periodic integrands
    let n = 256;
    let mean_g = (0..n).map(|i| pair.g(eps * i as f64 / n as f64)).sum::<f64>() / n as f64;
    pair.mean_gap = mean_g - cost.mean();
    Ok(pair)
}

impl PeriodicPair {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `ℓ(x/ε)`.
    pub fn cost(&self, x: f64) -> f64 {
        self.cost.eval(&[x / self.eps])
    }

    fn tail_factor(&self) -> f64 {
        // Σ_k e^{−kε}
        -1.0 / (-self.eps).exp_m1()
    }

    pub fn g(&self, x: f64) -> f64 {
        let one = integrate(&|s| s.exp() * self.cost(x + s), -self.eps, 0.0, self.tol);
        self.tail_factor() * one
    }

    pub fn h(&self, x: f64) -> f64 {
        let one = integrate(&|s| (-s).exp() * self.cost(x + s), 0.0, self.eps, self.tol);
        self.tail_factor() * one
    }

    pub fn g_derivative(&self, x: f64) -> f64 {
        self.cost(x) - self.g(x)
    }

    pub fn h_derivative(&self, x: f64) -> f64 {
        self.h(x) - self.cost(x)
    }
}

/// Two identical defects at 0 and `ε`: `min(u_ε(x), u_ε(x − ε))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoDefectValue {
    pub value: f64,
    /// Set when the defect is not even, so the unit spacing may be too tight.
    pub uneven_warning: bool,
}

pub fn two_defect_min(defect: &DefectCost, eps: f64, x: f64) -> Result<TwoDefectValue> {
    let sol = FlatDefectSolution::downward(defect, eps)?;
    Ok(TwoDefectValue { value: sol.eval(x).min(sol.eval(x - eps)), uneven_warning: !defect.flags().even })
}

/// Samples `f` at `n` uniform points of `[a, b]`.
pub fn tabulate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let x = a + (b - a) * i as f64 / (n - 1) as f64;
            (x, f(x))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn well() -> DefectCost {
        DefectCost::well(1, 1.0)
    }

    #[test]
    fn downward_values() {
        let d = well();
        assert!((u_eps_flat(&d, 0.05, 0.0).unwrap() + 1.0).abs() < 1e-12);
        let v = u_eps_flat(&d, 0.05, 1.0).unwrap();
        assert!((v + (-1f64).exp()).abs() < 1e-2, "{v}");
        let sol = FlatDefectSolution::downward(&d, 0.05).unwrap();
        for i in 0..100 {
            let x = -2.0 + 4.0 * (i as f64 + 0.5) / 100.0;
            assert!(sol.residual(x).abs() < 1e-6, "residual at {x}");
            assert!((sol.eval(x) - sol.eval(-x)).abs() < 1e-9);
        }
        assert!(u_eps_flat(&DefectCost::hump(1, 1.0), 0.05, 0.0).is_err());
    }

    #[test]
    fn upward_values() {
        let z = DefectCost::none(1);
        assert_eq!(u_eps_flat_upward(&z, 0.05, 0.3).unwrap(), 0.0);
        let hmp = DefectCost::hump(1, 1.0);
        let sol = FlatDefectSolution::upward(&hmp, 0.05).unwrap();
        assert!(sol.eval(0.0).abs() <= 0.05);
        for i in 0..100 {
            let x = -0.1 + 0.2 * (i as f64 + 0.5) / 100.0;
            assert!(sol.eval(x) >= 0.0);
            assert!(sol.residual(x).abs() < 1e-6);
        }
        assert!(u_eps_flat_upward(&well(), 0.05, 0.0).is_err());
    }

    #[test]
    fn discounted_line() {
        let d = well();
        let w = w_lambda_flat(&d, 1e-3, 0.0).unwrap();
        assert!((-1e-3 * w.value - 1.0).abs() < 1e-3);
        let w3 = w_lambda_flat(&d, 1e-3, 3.0).unwrap();
        let exact = 3.0 - 0.25;
        assert!((w3.limit - exact).abs() < 1e-8);
        assert!((w3.normalized - exact).abs() < 1e-2);
        let wm = w_lambda_flat(&d, 1e-3, -3.0).unwrap();
        assert!((wm.normalized - w3.normalized).abs() < 1e-9);
        let z = w_lambda_flat(&DefectCost::none(1), 0.1, 1.3).unwrap();
        assert_eq!((z.value, z.normalized, z.limit), (0.0, 0.0, 0.0));
    }

    #[test]
    fn periodic_pair() {
        let c = g_h_periodic(&PeriodicCost::constant(1, 0.7), 0.1).unwrap();
        assert!((c.g(0.123) - 0.7).abs() < 1e-10 && (c.h(0.4) - 0.7).abs() < 1e-10);
        let s = g_h_periodic(&PeriodicCost::sine(1.0, 0.0), 0.1).unwrap();
        assert!(s.mean_gap.abs() < 1e-8, "{}", s.mean_gap);
        for i in 0..20 {
            let x = 0.013 * i as f64;
            // central difference against the ODE
            let d = 1e-5;
            let gd = (s.g(x + d) - s.g(x - d)) / (2.0 * d);
            assert!((gd - s.g_derivative(x)).abs() < 1e-5);
            let hd = (s.h(x + d) - s.h(x - d)) / (2.0 * d);
            assert!((hd - s.h_derivative(x)).abs() < 1e-5);
            assert!((s.g(x + 0.1) - s.g(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn two_defects() {
        let d = well();
        let eps = 0.05;
        let mid = two_defect_min(&d, eps, eps / 2.0).unwrap();
        let a = u_eps_flat(&d, eps, eps / 2.0).unwrap();
        assert!((mid.value - a).abs() < 1e-12 && !mid.uneven_warning);
        let x = -0.01;
        assert_eq!(two_defect_min(&d, eps, x).unwrap().value, u_eps_flat(&d, eps, x).unwrap());
    }
}
