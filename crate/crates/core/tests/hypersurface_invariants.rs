use std::collections::BTreeMap;

use geomlab_core::geodesic::normal_jacobian;
use geomlab_core::linalg;
use geomlab_core::metric::dsl::{builtin, parse_document, MetricDocument};
use geomlab_core::models::TableRow;
use geomlab_core::{NormalBundle, SearchConfig, StepControl};
use proptest::prelude::*;

fn doc(name: &str, params: &[(&str, f64)]) -> MetricDocument {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap()
}

/// Past sheet of the unit hyperboloid in 2-D Minkowski space. Its future
/// normals all meet at the origin after proper time 1.
fn past_hyperboloid() -> MetricDocument {
    parse_document(
        r#"{"kind": "components", "n": 2, "coords": ["t", "x"],
            "box": [[-2.5, 1.5], [-2.5, 2.5]], "signature": "lorentzian", "time_covector": [1, 0],
            "components": ["-1", "0", "1"],
            "sigma": {"level_set": "t + sqrt(1 + x^2)",
                      "patch": {"params": ["u"], "box": [[-0.5, 0.5]], "embedding": ["-sqrt(1 + u^2)", "u"]}}}"#,
    )
    .unwrap()
}

#[test]
fn normals_are_unit_timelike_and_orthogonal() {
    let docs = [
        doc("minkowski3", &[]),
        doc("minkowski_hyperboloid", &[("n", 3.0)]),
        doc("model", &[("kappa", -1.0), ("beta", 0.5), ("n", 3.0)]),
        doc("rw_c11", &[("n", 3.0)]),
        past_hyperboloid(),
    ];
    for d in &docs {
        let sigma = d.sigma.as_ref().unwrap();
        let m = &d.metric;
        let n = m.dim();
        for s in sigma.normal_bundle_sample(m, 5).unwrap() {
            let (_, tangents) = sigma.patch.point_and_tangents(&s.params);
            let g = m.eval(&s.foot).unwrap();
            let nn = linalg::bilinear(&g, n, &s.normal, &s.normal);
            assert!((nn + 1.0).abs() <= 1e-10, "{}: g(n,n) = {nn}", m.label);
            for t in &tangents {
                let pairing = linalg::bilinear(&g, n, &s.normal, &t[..n]);
                assert!(pairing.abs() <= 1e-10, "{}: g(n,T) = {pairing}", m.label);
            }
            assert!(m.is_future(&s.normal));
        }
    }
}

#[test]
fn separation_dominates_normal_arc_length() {
    let d = doc("rw_c11", &[("kappa", -1.0), ("kappa2", -0.5), ("ts", 0.3)]);
    let sigma = d.sigma.as_ref().unwrap();
    let bundle = NormalBundle::new(&d.metric, sigma, SearchConfig::default()).unwrap();
    for u in [-0.2, 0.0, 0.15] {
        let cut = bundle.cut(&[u], 1.0).unwrap();
        let gamma = bundle.normal_geodesic(&[u], cut.estimate).unwrap();
        for k in 1..=5 {
            let t = cut.estimate * k as f64 / 6.0;
            let p = gamma.position(t).unwrap();
            let tau = bundle.separation(&p).unwrap().tau;
            assert!(tau >= t - bundle.config.witness_tol, "u = {u}, t = {t}: tau = {tau}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(27))]

    #[test]
    fn model_separation_is_exact(row in 0..TableRow::ALL.len(), i in 0..5usize, j in 0..5usize) {
        let (kappa, beta) = TableRow::ALL[row].representative(2);
        let d = doc("model", &[("kappa", kappa), ("beta", beta)]);
        let model = d.model.unwrap();
        let bundle = NormalBundle::new(&d.metric, d.sigma.as_ref().unwrap(), SearchConfig::default()).unwrap();
        let t_top = 0.9 * model.collapse.min(3.0);
        let t0 = t_top * (i + 1) as f64 / 5.0;
        let x0 = -0.2 + 0.1 * j as f64;
        let est = bundle.separation(&[t0, x0]).unwrap();
        prop_assert!((est.tau - t0).abs() <= 1e-4, "{:?} at ({}, {}): {}", TableRow::ALL[row], t0, x0, est.tau);
        prop_assert!((est.foot[1] - x0).abs() <= 1e-4);
    }
}

#[test]
fn cut_probe_halfway_is_maximizing() {
    let d = doc("model", &[("kappa", 1.0), ("beta", 0.0)]);
    let bundle = NormalBundle::new(&d.metric, d.sigma.as_ref().unwrap(), SearchConfig::default()).unwrap();
    let cut = bundle.cut(&[0.1], 3.0).unwrap();
    let t = 0.5 * cut.estimate;
    let p = bundle.normal_geodesic(&[0.1], t).unwrap().position(t).unwrap();
    let tau = bundle.separation(&p).unwrap().tau;
    assert!((tau - t).abs() <= bundle.config.tol_cut, "{tau} vs {t}");
}

#[test]
fn past_hyperboloid_normals_focus_at_proper_time_one() {
    let d = past_hyperboloid();
    let sigma = d.sigma.as_ref().unwrap();
    let control = StepControl::default();
    for u in [-0.4, 0.0, 0.3] {
        let foot = sigma.patch.point(&[u]);
        let frame = normal_jacobian(&d.metric, sigma, &foot[..2], 1.5, &control).unwrap();
        let at_one = frame.solution.position(1.0).unwrap();
        assert!(at_one.iter().all(|c| c.abs() <= 1e-9), "u = {u}: {at_one:?}");
        for tau in [0.0, 0.25, 0.5, 0.75, 1.0, 1.25] {
            let j = frame.jacobian(&d.metric, tau).unwrap();
            assert!((j - (1.0 - tau)).abs() <= 1e-8, "u = {u}, tau = {tau}: J = {j}");
        }
    }
}
