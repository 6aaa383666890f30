use std::collections::BTreeMap;

use geomlab_core::geodesic::{exp_map, integrate_geodesic, normal_jacobian};
use geomlab_core::metric::dsl::{builtin, time_slice};
use geomlab_core::models::TableRow;
use geomlab_core::{ComparisonModel, MetricField, StepControl, TangentVector, Termination};
use proptest::prelude::*;

fn fixture(name: &str, params: &[(&str, f64)]) -> MetricField {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap().metric
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Great circles through the origin of the stereographic sphere end at
    /// `tan(s/2)` along the initial direction. Any step-size path works, so
    /// the end state must not depend on how the last step was taken.
    #[test]
    fn stereographic_exp_map_hits_closed_form(s in 0.05..2.5f64, angle in 0.0..std::f64::consts::TAU) {
        let m = fixture("sphere_stereo2", &[]);
        let dir = [angle.cos(), angle.sin()];
        // g = 4 δ at the origin, so |w|_g = s needs |w| = s/2.
        let w = [0.5 * s * dir[0], 0.5 * s * dir[1]];
        let x = exp_map(&m, &[0.0, 0.0], &w, &StepControl::default()).unwrap();
        let r = (0.5 * s).tan();
        prop_assert!(dist(&x, &[r * dir[0], r * dir[1]]) <= 1e-8 * r.max(1.0));
    }

    #[test]
    fn energy_is_conserved_on_smooth_fixtures(
        idx in 0..3usize,
        a in -1.0..1.0f64,
        b in -1.0..1.0f64,
    ) {
        let (name, base, v): (&str, Vec<f64>, Vec<f64>) = match idx {
            0 => ("sphere_stereo2", vec![0.1, -0.2], vec![a, b]),
            1 => ("sphere2", vec![1.2, 0.0], vec![a, b]),
            _ => ("model", vec![0.0, 0.0], vec![1.5 + a.abs(), b]),
        };
        let p = if name == "model" { vec![("kappa", -1.0), ("beta", 0.5)] } else { vec![] };
        let m = fixture(name, &p);
        prop_assume!(v.iter().any(|c| c.abs() > 1e-3));
        let sol = integrate_geodesic(&m, &TangentVector::new(base, v), 1.0, &StepControl::default()).unwrap();
        prop_assert!(sol.energy_drift() <= 1e-7, "drift {}", sol.energy_drift());
    }

    #[test]
    fn jacobian_matches_model_area_ratio(row in 0..TableRow::ALL.len(), n in 2usize..4, u in -0.2..0.2f64) {
        let (kappa, beta) = TableRow::ALL[row].representative(n);
        let model = ComparisonModel::new(kappa, beta, n).unwrap();
        let metric = model.metric_field(2.0, 0.5).unwrap();
        let sigma = time_slice(n, 0.25, 0.5);
        let tau_max = (0.9 * model.collapse).min(1.5);
        let mut foot = vec![0.0; n];
        foot[1] = u;
        let frame = normal_jacobian(&metric, &sigma, &foot, tau_max, &StepControl::default()).unwrap();
        for i in 0..=20 {
            let tau = tau_max * i as f64 / 20.0;
            let j = frame.jacobian(&metric, tau).unwrap();
            prop_assert!((j - model.area_ratio(tau)).abs() <= 1e-5, "tau {}: {} vs {}", tau, j, model.area_ratio(tau));
        }
    }
}

#[test]
fn exp_map_is_first_order_tangent_at_zero() {
    let m = fixture("sphere_stereo2", &[]);
    let p = [0.3, -0.4];
    let w = [0.6, 0.8];
    let c = StepControl::default();
    let quotients: Vec<f64> = [1e-2, 5e-3]
        .iter()
        .map(|&s| {
            let x = exp_map(&m, &p, &[s * w[0], s * w[1]], &c).unwrap();
            dist(&x, &[p[0] + s * w[0], p[1] + s * w[1]]) / (s * s)
        })
        .collect();
    // The quotient tends to |Γ(w,w)|/2, so it stays bounded and nearly constant.
    assert!(quotients[0] < 10.0 && quotients[1] < 10.0);
    assert!(
        (quotients[0] - quotients[1]).abs() < 0.05 * quotients[0],
        "{quotients:?}"
    );
}

fn end_point(m: &MetricField, h: f64) -> Vec<f64> {
    let v = TangentVector::new(vec![0.1, 0.0], vec![1.1, 0.3]);
    let sol = integrate_geodesic(m, &v, 0.8, &StepControl::fixed(h)).unwrap();
    assert_eq!(sol.termination, Termination::ReachedT);
    sol.position(0.8).unwrap()
}

#[test]
fn fixed_step_order_survives_an_interface_crossing() {
    let m = fixture("rw_c11", &[("kappa", 0.0), ("kappa2", 1.0), ("ts", 0.4)]);
    let sol = integrate_geodesic(
        &m,
        &TangentVector::new(vec![0.1, 0.0], vec![1.1, 0.3]),
        0.8,
        &StepControl::fixed(0.05),
    )
    .unwrap();
    assert_eq!(sol.crossings.len(), 1);
    let a = end_point(&m, 0.05);
    let b = end_point(&m, 0.025);
    let c = end_point(&m, 0.0125);
    let ratio = dist(&a, &b) / dist(&b, &c);
    assert!(ratio >= 3.5, "step-halving ratio {ratio}");
}

#[test]
fn fixed_step_order_is_four_on_smooth_metrics() {
    let m = fixture("sphere_stereo2", &[]);
    let a = end_point(&m, 0.05);
    let b = end_point(&m, 0.025);
    let c = end_point(&m, 0.0125);
    let ratio = dist(&a, &b) / dist(&b, &c);
    assert!(ratio >= 14.0, "step-halving ratio {ratio}");
}
