use std::collections::BTreeMap;

use geomlab_core::metric::dsl::builtin;
use geomlab_core::models::{sn, TableRow};
use geomlab_core::ComparisonModel;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (f64, f64, usize)> {
    (-2.0..2.0f64, -3.0..3.0f64, 2usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn area_ratio_starts_at_one((kappa, beta, n) in params()) {
        let m = ComparisonModel::new(kappa, beta, n).unwrap();
        prop_assert!((m.area_ratio(0.0) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn warping_vanishes_at_and_after_collapse((kappa, beta, n) in params(), extra in 0.0..5.0f64) {
        let m = ComparisonModel::new(kappa, beta, n).unwrap();
        if m.is_collapsing() {
            prop_assert_eq!(m.f_tilde(m.collapse + extra), 0.0);
            let mut last = f64::INFINITY;
            for k in 2..8 {
                let v = m.f_tilde(m.collapse - 10f64.powi(-k)).abs();
                prop_assert!(v < last);
                last = v;
            }
            prop_assert!(last < 1e-6 * m.f(0.0).abs().max(1.0));
        }
    }

    #[test]
    fn warping_is_bounded((kappa, beta, n) in params()) {
        let m = ComparisonModel::new(kappa, beta, n).unwrap();
        let t_max = if m.is_collapsing() { m.collapse } else { 3.0 };
        let grid: Vec<f64> = (0..=200).map(|i| t_max * i as f64 / 200.0).collect();
        if kappa > 1e-12 {
            let cap = 1.0 / kappa.sqrt();
            for &t in &grid {
                prop_assert!(m.f_tilde(t).abs() <= cap * (1.0 + 1e-12));
            }
        } else {
            let f0 = m.f(0.0).abs();
            let bound = (m.f_tilde(t_max).abs() / f0).max(1.0);
            for &t in &grid {
                prop_assert!(m.f_tilde(t).abs() / f0 <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ball_volume_is_nondecreasing((kappa, beta, n) in params()) {
        let m = ComparisonModel::new(kappa, beta, n).unwrap();
        let mut last = 0.0;
        for i in 1..=30 {
            let v = m.ball_volume_normalized(0.1 * i as f64);
            prop_assert!(v >= last);
            last = v;
        }
    }
}

#[test]
fn sn_solves_its_ode() {
    let h = 1e-3;
    for kappa in [-1.0, 0.0, 1.0] {
        let mut worst = 0.0_f64;
        for i in 1..3000 {
            let s = i as f64 * h;
            let dd = (sn(kappa, s + h) - 2.0 * sn(kappa, s) + sn(kappa, s - h)) / (h * h);
            worst = worst.max((dd + kappa * sn(kappa, s)).abs());
        }
        assert!(worst <= 1e-6, "kappa {kappa}: residual {worst:e}");
    }
}

#[test]
fn every_row_has_equality_in_ricci_and_mean_curvature() {
    for n in [2usize, 3] {
        for row in TableRow::ALL {
            let (kappa, beta) = row.representative(n);
            let p: BTreeMap<String, f64> = [("kappa", kappa), ("beta", beta), ("n", n as f64)]
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect();
            let doc = builtin("model", &p).unwrap();
            let model = doc.model.unwrap();
            assert_eq!(model.row, row);
            let g = &doc.metric;
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            for t in [0.0, 0.1, 0.3] {
                let mut x = vec![0.0; n];
                x[0] = t;
                if !g.chart.contains(&x) {
                    continue;
                }
                let ric = g.ricci_at(&x).unwrap().eval(&e);
                assert!(
                    (ric - (n as f64 - 1.0) * kappa).abs() <= 1e-6,
                    "{row:?} n={n} t={t}: {ric}"
                );
            }
            let sigma = doc.sigma.unwrap();
            let q = sigma.patch.point(&vec![0.1; n - 1]);
            let h = sigma.mean_curvature(g, &q[..n]).unwrap();
            assert!((h - beta).abs() <= 1e-6, "{row:?} n={n}: H = {h}");
        }
    }
}
