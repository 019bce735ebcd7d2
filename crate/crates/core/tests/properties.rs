use proptest::prelude::*;

use hjdefect::effective::EffectiveHamiltonianTable;
use hjdefect::correctors::find_ptilde;
use hjdefect::fields::{eval_hamiltonian, shift_hamiltonian, DefectCost, HamiltonianSpec, Kinetic, PeriodicCost};
use hjdefect::oracles::FlatDefectSolution;
use hjdefect::output::fmt_g;
use hjdefect::random::{exact_cdf, sample_lattice, u_random_min, Density, IndexWindow};

fn sine_well() -> HamiltonianSpec {
    HamiltonianSpec::separable(Kinetic::Norm, PeriodicCost::sine(1.0, 0.0), DefectCost::well(1, 1.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_formula_stays_below_u_bar_and_drops_with_more_defects(
        seed in any::<u64>(), eta in 0.0f64..1.0, x in -1.0f64..1.0, flip in 0usize..201,
    ) {
        let eps = 0.05;
        let sol = FlatDefectSolution::downward(&DefectCost::well(1, 1.0), eps).unwrap();
        let u = |y: &[f64]| sol.eval(y[0]);
        let real = sample_lattice(Density::Fixed { eta }, eps, IndexWindow::centered(1, 300), 1, seed).unwrap();
        let base = u_random_min(&[x], &real, &u, 0.0).unwrap();
        prop_assert!(base <= 0.0);
        let mut more = real.clone();
        more.indicators[200 + flip] = true;
        prop_assert!(u_random_min(&[x], &more, &u, 0.0).unwrap() <= base);
    }

    #[test]
    fn growing_the_window_keeps_indicators(seed in any::<u64>(), eta in 0.0f64..1.0) {
        let a = sample_lattice(Density::Fixed { eta }, 0.1, IndexWindow::centered(2, 5), 2, seed).unwrap();
        let b = sample_lattice(Density::Fixed { eta }, 0.1, IndexWindow::centered(2, 9), 2, seed).unwrap();
        for k in a.window.iter() {
            prop_assert_eq!(a.is_set(k), b.is_set(k));
        }
    }

    #[test]
    fn hamiltonian_is_convex_in_p(x in -3.0f64..3.0, p in -4.0f64..4.0, q in -4.0f64..4.0) {
        let s = sine_well();
        let mid = eval_hamiltonian(&s, &[x], &[(p + q) / 2.0]).unwrap();
        let avg = 0.5 * (eval_hamiltonian(&s, &[x], &[p]).unwrap() + eval_hamiltonian(&s, &[x], &[q]).unwrap());
        prop_assert!(mid <= avg + 1e-10);
    }

    #[test]
    fn shift_moves_the_momentum(x in -3.0f64..3.0, p in -3.0f64..3.0, p0 in -2.0f64..2.0) {
        let s = sine_well();
        let shifted = shift_hamiltonian(&s, &[p0]).unwrap();
        let a = eval_hamiltonian(&shifted, &[x], &[p]).unwrap();
        let b = eval_hamiltonian(&s, &[x], &[p + p0]).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn exact_cdf_is_monotone(eta in 0.0f64..1.0, eps in 1e-3f64..0.5, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        prop_assert!(exact_cdf(eta, eps, lo) <= exact_cdf(eta, eps, hi));
    }

    #[test]
    fn g_format_round_trips(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_g(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 1e-11);
    }

    #[test]
    fn ptilde_invariants(level in 1.01f64..2.9, side in prop::bool::ANY) {
        let s: Vec<f64> = (0..61).map(|k| -3.0 + 0.1 * k as f64).collect();
        let v: Vec<f64> = s.iter().map(|x| x.abs().max(1.0)).collect();
        let t = EffectiveHamiltonianTable::from_samples(1, [1.0, 0.0], s, v, 1.0, (1.0, 1.0)).unwrap();
        let p = if side { level } else { -level };
        let pair = find_ptilde(&t, &[p]).unwrap();
        prop_assert!(pair.invariants_hold(&t));
        prop_assert!((pair.p_tilde[0] + p).abs() <= 1e-3);
    }
}
