use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::*;
use crate::metric::dsl::builtin;
use crate::metric::source::ConstantSource;
use crate::metric::{ChartDomain, Signature, Smoothness};
use crate::models::ComparisonModel;

fn flat(lower: &[f64], upper: &[f64]) -> MetricField {
    let n = lower.len();
    MetricField::new(
        ChartDomain::boxed(lower, upper).unwrap(),
        Signature::Riemannian,
        Smoothness::Smooth,
        Arc::new(ConstantSource::diagonal(&vec![1.0; n])),
        "flat",
    )
    .unwrap()
}

fn fixture(name: &str) -> MetricField {
    builtin(name, &BTreeMap::new()).unwrap().metric
}

#[test]
fn flat_geodesics_are_straight_lines() {
    let m = flat(&[-5.0, -5.0], &[5.0, 5.0]);
    let v = TangentVector::new(vec![0.5, -1.0], vec![0.3, 0.7]);
    let sol = integrate_geodesic(&m, &v, 3.0, &StepControl::default()).unwrap();
    assert_eq!(sol.termination, Termination::ReachedT);
    for t in [0.0, 0.77, 1.5, 3.0] {
        let x = sol.position(t).unwrap();
        assert!((x[0] - (0.5 + 0.3 * t)).abs() < 1e-13);
        assert!((x[1] - (-1.0 + 0.7 * t)).abs() < 1e-13);
    }
}

#[test]
fn great_circle_closes_after_two_pi() {
    let m = fixture("sphere2");
    let v = TangentVector::new(vec![PI / 2.0, -PI], vec![0.0, 1.0]);
    let sol = integrate_geodesic(&m, &v, 2.0 * PI, &StepControl::default()).unwrap();
    assert_eq!(sol.termination, Termination::ReachedT);
    let x = sol.position(2.0 * PI).unwrap();
    assert!((x[0] - PI / 2.0).abs() < 1e-6);
    assert!((x[1] - PI).abs() < 1e-6);
    assert!(sol.energy_drift() < 1e-7);
}

#[test]
fn oblique_sphere_geodesic_conserves_energy() {
    let m = fixture("sphere2");
    let v = TangentVector::new(vec![1.0, 0.0], vec![0.4, 1.1]);
    let sol = integrate_geodesic(&m, &v, 4.0, &StepControl::default()).unwrap();
    assert!(sol.energy_drift() < 1e-7, "drift {}", sol.energy_drift());
}

#[test]
fn geodesic_aimed_at_boundary_exits_chart() {
    let m = flat(&[0.0, 0.0], &[1.0, 1.0]);
    let v = TangentVector::new(vec![0.5, 0.5], vec![1.0, 0.0]);
    let sol = integrate_geodesic(&m, &v, 2.0, &StepControl::default()).unwrap();
    assert_eq!(sol.termination, Termination::ExitedChart);
    assert!((sol.t_end() - 0.5).abs() < 1e-8);
    assert!(m.chart.contains(&sol.position(sol.t_end()).unwrap()));
}

#[test]
fn start_outside_chart_is_a_domain_exit() {
    let m = flat(&[0.0, 0.0], &[1.0, 1.0]);
    let v = TangentVector::new(vec![1.5, 0.5], vec![1.0, 0.0]);
    assert!(matches!(
        integrate_geodesic(&m, &v, 1.0, &StepControl::default()),
        Err(GeomError::DomainExit { .. })
    ));
}

#[test]
fn fixed_step_rk4_is_fourth_order() {
    let m = fixture("sphere2");
    let v = TangentVector::new(vec![1.0, 0.0], vec![0.4, 1.1]);
    let reference = integrate_geodesic(&m, &v, 2.0, &StepControl::fixed(0.0025))
        .unwrap()
        .position(2.0)
        .unwrap();
    let err = |h: f64| {
        let x = integrate_geodesic(&m, &v, 2.0, &StepControl::fixed(h))
            .unwrap()
            .position(2.0)
            .unwrap();
        ((x[0] - reference[0]).powi(2) + (x[1] - reference[1]).powi(2)).sqrt()
    };
    let ratio = err(0.08) / err(0.04);
    assert!(ratio >= 14.0, "ratio {ratio}");
}

#[test]
fn exp_map_basics() {
    let m = flat(&[-5.0, -5.0], &[5.0, 5.0]);
    let c = StepControl::default();
    assert_eq!(exp_map(&m, &[1.0, 2.0], &[0.0, 0.0], &c).unwrap(), vec![1.0, 2.0]);
    let x = exp_map(&m, &[1.0, 2.0], &[0.5, -1.0], &c).unwrap();
    assert!((x[0] - 1.5).abs() < 1e-13 && (x[1] - 1.0).abs() < 1e-13);
    let model = ComparisonModel::new(-1.0, 0.5, 2)
        .unwrap()
        .metric_field(3.0, 0.5)
        .unwrap();
    let x = exp_map(&model, &[0.0, 0.2], &[0.7, 0.0], &c).unwrap();
    assert!((x[0] - 0.7).abs() < 1e-10 && (x[1] - 0.2).abs() < 1e-10);
}

#[test]
fn exp_map_fails_when_leaving_chart() {
    let m = flat(&[0.0, 0.0], &[1.0, 1.0]);
    assert!(matches!(
        exp_map(&m, &[0.5, 0.5], &[2.0, 0.0], &StepControl::default()),
        Err(GeomError::DomainExit { .. })
    ));
}

#[test]
fn arc_length_of_unit_speed_and_null_geodesics() {
    let m = fixture("sphere2");
    let v = TangentVector::new(vec![1.0, 0.0], vec![0.0, 1.0 / 1f64.sin()]);
    let sol = integrate_geodesic(&m, &v, 2.5, &StepControl::default()).unwrap();
    assert!((arc_length(&m, &sol, 0.0, 2.5).unwrap() - 2.5).abs() < 1e-8);
    let mink = fixture("minkowski2");
    let null = TangentVector::new(vec![0.0, 0.0], vec![1.0, 1.0]);
    let sol = integrate_geodesic(&mink, &null, 2.0, &StepControl::default()).unwrap();
    assert!(arc_length(&mink, &sol, 0.0, 2.0).unwrap() < 1e-12);
    assert!(matches!(
        arc_length(&mink, &sol, 0.0, 3.0),
        Err(GeomError::SpanViolation { .. })
    ));
}

#[test]
fn minkowski_segment_length() {
    let mink = fixture("minkowski2");
    let l = polyline_length(&mink, &[vec![0.0, 0.0], vec![2.0, 1.0]]).unwrap();
    assert!((l - 3f64.sqrt()).abs() < 1e-14);
}

#[test]
fn flat_hyperplane_has_unit_jacobian() {
    let doc = builtin("minkowski3", &BTreeMap::new()).unwrap();
    let sigma = doc.sigma.unwrap();
    let frame = normal_jacobian(&doc.metric, &sigma, &[0.0, 0.3, -0.2], 2.0, &StepControl::default()).unwrap();
    for t in [0.0, 0.5, 2.0] {
        assert!((frame.jacobian(&doc.metric, t).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(frame.frame_deviation < 1e-10);
}

#[test]
fn model_jacobian_follows_warping_function() {
    for (kappa, beta) in [(1.0, 0.0), (-1.0, 0.5), (0.0, -1.0)] {
        let model = ComparisonModel::new(kappa, beta, 3).unwrap();
        let metric = model.metric_field(3.0, 0.5).unwrap();
        let sigma = crate::metric::dsl::time_slice(3, 0.25, 0.5);
        let tau_max = (0.9 * model.collapse).min(2.0);
        let frame = normal_jacobian(&metric, &sigma, &[0.0, 0.1, 0.0], tau_max, &StepControl::default()).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..=40 {
            let tau = tau_max * i as f64 / 40.0;
            let expected = model.area_ratio(tau);
            worst = worst.max((frame.jacobian(&metric, tau).unwrap() - expected).abs());
        }
        assert!(worst < 1e-5, "kappa {kappa} beta {beta}: {worst}");
        assert!(frame.frame_deviation < 1e-8);
    }
}

#[test]
fn shooting_recovers_sphere_distances() {
    let m = fixture("sphere_normal2");
    let c = StepControl::default();
    let d = riemannian_distance(&m, &[-PI / 2.0, 0.0], &[PI / 2.0, 0.0], &c).unwrap();
    assert!((d - PI).abs() < 1e-6);
    let d = riemannian_distance(&m, &[0.0, 0.0], &[0.3, 0.4], &c).unwrap();
    assert!((d - 0.5).abs() < 1e-9);
}

#[test]
fn csv_has_header_and_rows() {
    let m = flat(&[-5.0, -5.0], &[5.0, 5.0]);
    let v = TangentVector::new(vec![0.0, 0.0], vec![1.0, 0.0]);
    let sol = integrate_geodesic(&m, &v, 0.1, &StepControl::default()).unwrap();
    let csv = sol.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x0,x1,v0,v1,energy,J");
    assert_eq!(lines.count(), sol.len());
}
