use std::collections::BTreeMap;

use geomlab_core::metric::dsl::{builtin, parse_document};
use geomlab_core::mollifier::{metric_distance_dh, mollify_metric, Region};

fn rw(ts: f64) -> geomlab_core::metric::dsl::MetricDocument {
    let p: BTreeMap<String, f64> = [("kappa", -1.0), ("kappa2", 1.0), ("ts", ts)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    builtin("rw_c11", &p).unwrap()
}

/// `f = e^t` below `t = 0.02`, continued as a quadratic with matching value
/// and slope: `H(Σ) = 1` on `{t = 0}` and `f''` jumps just above it.
fn kinked_warp() -> geomlab_core::metric::dsl::MetricDocument {
    parse_document(
        r#"{"kind": "warped_product", "n": 2, "fiber": "flat",
            "f": "piecewise(t < 0.02, exp(t), exp(0.02) * (1 + (t - 0.02) + (t - 0.02)^2))",
            "box": [[-0.5, 1.0], [-0.5, 0.5]], "interfaces": ["t = 0.02"],
            "sigma": {"level_set": "t", "patch": {"params": ["u"], "box": [[-0.25, 0.25]], "embedding": ["0", "u"]}}}"#,
    )
    .unwrap()
}

#[test]
fn mean_curvature_converges_under_mollification() {
    let d = kinked_warp();
    let sigma = d.sigma.as_ref().unwrap();
    let feet: Vec<Vec<f64>> = (0..5)
        .map(|i| sigma.patch.point(&[-0.2 + 0.1 * i as f64])[..2].to_vec())
        .collect();
    let mut last = f64::INFINITY;
    for radius in [0.1, 0.05, 0.025, 0.0125] {
        let smooth = mollify_metric(&d.metric, radius, 16).unwrap();
        let mut err = 0.0_f64;
        for q in &feet {
            let h = sigma.mean_curvature(&d.metric, q).unwrap();
            let h_eps = sigma.mean_curvature(&smooth, q).unwrap();
            err = err.max((h_eps - h).abs());
        }
        assert!(err < last, "radius {radius}: {err} after {last}");
        if last.is_infinite() {
            assert!(err > 1e-6, "the widest kernel should see the kink: {err}");
        }
        last = err;
    }
}

#[test]
fn metric_distance_shrinks_with_the_kernel() {
    let d = rw(0.3);
    let region = Region {
        lower: vec![0.0, -0.2],
        upper: vec![0.6, 0.2],
        per_axis: 7,
    };
    let points = region.grid();
    let mut last = f64::INFINITY;
    for radius in [0.08, 0.04, 0.02] {
        let smooth = mollify_metric(&d.metric, radius, 16).unwrap();
        let dh = metric_distance_dh(&d.metric, &smooth, &points).unwrap().value;
        assert!(dh < last, "radius {radius}: {dh}");
        last = dh;
    }
}
