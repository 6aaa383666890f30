use std::collections::BTreeMap;
use std::f64::consts::PI;

use geomlab_core::metric::dsl::{builtin, MetricDocument};
use geomlab_core::models::riemannian_model_volume;
use geomlab_core::volume::{
    lorentz_model_series, lorentzian_quadrature, ratio_series, riemannian_model_series, riemannian_quadrature,
    uniform_grid, VolumeConfig, VolumeMethod, VolumeSeries,
};

fn doc(name: &str, params: &[(&str, f64)]) -> MetricDocument {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    builtin(name, &p).unwrap()
}

#[test]
fn whole_round_sphere_has_area_four_pi() {
    let d = doc("sphere_stereo2", &[("half_width", 20.0)]);
    let q = riemannian_quadrature(&d.metric, &[0.0, 0.0], &[1.0, PI], &VolumeConfig::default()).unwrap();
    let area = q.series.values[1];
    assert!((area / (4.0 * PI) - 1.0).abs() <= 1e-2, "area {area}");
    assert!(q.rays.iter().any(|r| r.clipped_by_chart));
    assert!(!q.series.flags.is_empty());
}

#[test]
fn small_balls_are_euclidean() {
    for name in ["sphere_stereo2", "sphere_normal2", "revolution_c11"] {
        let d = doc(name, &[]);
        let p = vec![0.0; 2];
        let q = riemannian_quadrature(&d.metric, &p, &[0.05], &VolumeConfig::default()).unwrap();
        let ratio = q.series.values[0] / (PI * 0.05 * 0.05);
        assert!((ratio - 1.0).abs() <= 1e-2, "{name}: {ratio}");
    }
}

#[test]
fn sphere_ball_volumes_match_the_model() {
    let d = doc("sphere_normal3", &[]);
    let grid = uniform_grid(0.1, 1.5, 8);
    let cfg = VolumeConfig {
        angular_nodes: 32,
        ..VolumeConfig::default()
    };
    let q = riemannian_quadrature(&d.metric, &[0.0; 3], &grid, &cfg).unwrap();
    for (k, &r) in grid.iter().enumerate() {
        let exact = riemannian_model_volume(1.0, 3, r);
        assert!(q.series.values[k] <= (1.0 + 1e-3) * exact, "r = {r}");
        assert!((q.series.values[k] / exact - 1.0).abs() <= 1e-3, "r = {r}");
    }
    let r = ratio_series(&q.series, &riemannian_model_series(1.0, 3, &grid), 1e-3).unwrap();
    assert!(r.nonincreasing);
}

#[test]
fn lorentz_volumes_vanish_at_zero_and_are_nested() {
    let d = doc("rw_c11", &[("kappa", 0.0), ("kappa2", 1.0), ("ts", 0.3)]);
    let cfg = VolumeConfig {
        patch_nodes: 6,
        ..VolumeConfig::default()
    };
    let mut grid = vec![1e-3];
    grid.extend(uniform_grid(0.1, 1.0, 10));
    let q = lorentzian_quadrature(&d.metric, d.sigma.as_ref().unwrap(), &grid, &cfg).unwrap();
    // vol B_A^+(t) ≈ area(A)·t for small t.
    let normalized = q.series.values[0] / q.patch_area;
    assert!((normalized - 1e-3).abs() <= 1e-6, "{normalized}");
    assert!(q.series.is_nondecreasing());
    assert!(q.series.values.iter().all(|v| *v >= 0.0));
}

#[test]
fn shell_areas_are_the_derivative_of_volume() {
    let d = doc("model", &[("kappa", -1.0), ("beta", 0.5)]);
    let cfg = VolumeConfig {
        patch_nodes: 6,
        ..VolumeConfig::default()
    };
    let h = 0.01;
    let centers = [0.3, 0.6, 0.9, 1.2];
    let grid: Vec<f64> = centers.iter().flat_map(|c| [c - h, *c, c + h]).collect();
    let q = lorentzian_quadrature(&d.metric, d.sigma.as_ref().unwrap(), &grid, &cfg).unwrap();
    for k in 0..centers.len() {
        let v = &q.series.values[3 * k..3 * k + 3];
        let derivative = (v[2] - v[0]) / (2.0 * h);
        let shell = q.shell_areas[3 * k + 1];
        assert!(
            (derivative / shell - 1.0).abs() <= 2e-2,
            "t = {}: {derivative} vs {shell}",
            centers[k]
        );
    }
}

#[test]
fn model_against_itself_is_constant() {
    let d = doc("model", &[("kappa", -1.0), ("beta", 0.5)]);
    let model = d.model.unwrap();
    let cfg = VolumeConfig {
        patch_nodes: 4,
        ..VolumeConfig::default()
    };
    let grid = uniform_grid(0.1, 1.5, 8);
    let q = lorentzian_quadrature(&d.metric, d.sigma.as_ref().unwrap(), &grid, &cfg).unwrap();
    for (k, &t) in grid.iter().enumerate() {
        let normalized = q.series.values[k] / q.patch_area;
        assert!((normalized - model.ball_volume_normalized(t)).abs() <= 1e-4, "t = {t}");
    }
    let r = ratio_series(&q.series, &lorentz_model_series(&model, &grid, q.patch_area), 1e-3).unwrap();
    assert!(r.nonincreasing);
    assert!(r.spread() <= 1e-4, "spread {}", r.spread());
}

#[test]
fn increasing_ratio_is_located() {
    let grid = vec![1.0, 2.0, 3.0, 4.0];
    let series = |values: Vec<f64>| VolumeSeries {
        label: "s".into(),
        method: VolumeMethod::ClosedForm,
        grid: grid.clone(),
        errors: vec![0.0; values.len()],
        values,
        flags: Vec::new(),
    };
    let num = series(vec![1.0, 2.0, 3.3, 4.0]);
    let den = series(vec![1.0, 2.0, 3.0, 4.0]);
    let r = ratio_series(&num, &den, 1e-3).unwrap();
    assert!(!r.nonincreasing);
    assert_eq!(r.worst_at, Some(2.0));
    assert!((r.worst_violation - 0.1).abs() < 1e-12);
}

#[test]
fn monte_carlo_is_independent_of_worker_count() {
    use geomlab_core::volume::riemannian_monte_carlo;
    let d = doc("sphere_stereo2", &[("half_width", 3.0)]);
    let cfg = VolumeConfig {
        mc_samples: 4000,
        seed: 17,
        ..VolumeConfig::default()
    };
    let grid = [0.5, 1.0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| riemannian_monte_carlo(&d.metric, &[0.0, 0.0], &grid, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.values, b.values);
    assert_eq!(a.errors, b.errors);
}
