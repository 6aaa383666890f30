use std::collections::BTreeMap;

use geomlab_core::metric::dsl::builtin;
use geomlab_core::MetricField;
use proptest::prelude::*;

fn fixture(name: &str, params: &[(&str, f64)]) -> MetricField {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap().metric
}

fn unit_point(metric: &MetricField, u: &[f64]) -> Vec<f64> {
    let c = &metric.chart;
    (0..metric.dim())
        .map(|i| c.lower[i] + (0.05 + 0.9 * u[i]) * c.extent(i))
        .collect()
}

const FIXTURES: [&str; 6] = [
    "sphere2",
    "sphere_stereo3",
    "remark",
    "model",
    "rw_c11",
    "revolution_c11",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_values_are_symmetric(idx in 0..FIXTURES.len(), u in prop::collection::vec(0.0..1.0f64, 3)) {
        let m = fixture(FIXTURES[idx], &[]);
        let x = unit_point(&m, &u);
        let g = m.eval(&x).unwrap();
        let n = m.dim();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g[i][j], g[j][i]);
            }
        }
    }

    #[test]
    fn flat_metrics_have_zero_ricci(idx in 0..4usize, u in prop::collection::vec(0.0..1.0f64, 4)) {
        let name = ["minkowski2", "minkowski3", "minkowski4", "euclidean3"][idx];
        let m = fixture(name, &[]);
        let x = unit_point(&m, &u);
        let ric = m.ricci_at(&x).unwrap();
        for row in ric.rows() {
            for v in row {
                prop_assert!(v.abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn sphere_ricci_equals_metric(u in prop::collection::vec(0.0..1.0f64, 3)) {
        let m = fixture("sphere_stereo3", &[("half_width", 3.0)]);
        let x = unit_point(&m, &u);
        let g = m.eval(&x).unwrap();
        let ric = m.ricci_at(&x).unwrap().rows();
        for i in 0..3 {
            for j in 0..3 {
                // Ric = (n − 1) g on the unit 3-sphere.
                prop_assert!((ric[i][j] - 2.0 * g[i][j]).abs() <= 1e-8 * (1.0 + g[i][j].abs()));
            }
        }
    }
}

#[test]
fn signature_is_stable_on_a_thousand_point_grid() {
    for name in FIXTURES {
        let m = fixture(name, &[]);
        let per_axis = if m.dim() == 2 { 32 } else { 10 };
        let grid = m.chart.grid(per_axis, 0.0);
        assert!(grid.len() >= 1000, "{name}");
        let pattern = |x: &[f64]| {
            let e = m.eigenvalues(x).unwrap();
            e.iter().filter(|v| **v < 0.0).count()
        };
        let first = pattern(&grid[0]);
        for x in &grid {
            assert_eq!(pattern(x), first, "{name} at {x:?}");
            m.check_signature_at(x).unwrap();
        }
    }
}

fn christoffel_error(closed: &MetricField, h: f64, x: &[f64]) -> f64 {
    let n = closed.dim();
    let fd = closed.clone().with_finite_differences().with_fd_step(&vec![h; n]);
    let a = closed.christoffel_at(x).unwrap();
    let b = fd.christoffel_at(x).unwrap();
    let mut err = 0.0_f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                err = err.max((a.get(k, i, j) - b.get(k, i, j)).abs());
            }
        }
    }
    err
}

#[test]
fn finite_difference_christoffels_are_second_order() {
    type Case<'a> = (&'a str, &'a [(&'a str, f64)], Vec<f64>);
    let cases: [Case; 5] = [
        ("sphere2", &[], vec![0.8, 0.3]),
        ("sphere_stereo2", &[], vec![0.4, -0.7]),
        ("sphere_stereo3", &[], vec![0.3, -0.2, 0.5]),
        ("rw_c11", &[], vec![0.7, 0.1]),
        ("model", &[("kappa", -1.0), ("beta", 0.5)], vec![0.3, 0.1]),
    ];
    for (name, params, x) in cases {
        let m = fixture(name, params);
        let e1 = christoffel_error(&m, 1e-2, &x);
        let e2 = christoffel_error(&m, 5e-3, &x);
        assert!(e1 > 0.0, "{name}");
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "{name}: errors {e1:e}, {e2:e}, order {order}");
    }
}

#[test]
fn remark_ricci_is_unbounded_below_as_the_norm_bound_grows() {
    use geomlab_core::metric::{check_ricci_bound, BoundMode};
    let m = fixture("remark", &[("eps", 1.0)]);
    let p = vec![vec![1.0, 1.0, 1.0]];
    let minima: Vec<f64> = [2.0, 5.0, 10.0]
        .iter()
        .map(|&c| {
            check_ricci_bound(&m, 0.0, &p, 256, BoundMode::Timelike { c_bound: c }, 0.0)
                .unwrap()
                .min_margin
        })
        .collect();
    assert!(minima[0] > minima[1] && minima[1] > minima[2], "{minima:?}");
}
