//! Comparison-model audit: each Table 1 row realizes `Ric(∂_t,∂_t) =
//! (n−1)κ` and `H(Σ) = β` with equality, and the extended warping
//! functions converge along the known parameter sequences.

use anyhow::Result;
use geomlab_core::metric::dsl::time_slice;
use geomlab_core::models::{limit_family_check, ComparisonModel, LimitCase, TableRow, EXCEPTIONAL_RAW_FLOOR};
use serde::{Deserialize, Serialize};

use super::{begin, uniform};
use crate::config::ScenarioConfig;
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub dims: Vec<usize>,
    pub tol: f64,
    /// Interior time samples per model chart.
    pub time_samples: usize,
    /// Patch samples per model for the mean curvature.
    pub patch_samples: usize,
    pub horizon: f64,
    pub limit_cases: Vec<LimitCase>,
    pub limit_n: usize,
    pub limit_t_max: f64,
    pub limit_nodes: usize,
    pub ks: Vec<usize>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            dims: vec![2, 3, 4],
            tol: 1e-6,
            time_samples: 5,
            patch_samples: 3,
            horizon: 3.0,
            limit_cases: vec![
                LimitCase::FlatNonzeroBeta { beta0: -1.0 },
                LimitCase::FlatCriticalApproach,
                LimitCase::PositiveBetaToZero { kappa0: 1.0 },
                LimitCase::NegativeCritical { kappa0: -1.0 },
                LimitCase::Exceptional { kappa0: -1.0 },
            ],
            limit_n: 3,
            limit_t_max: 3.0,
            limit_nodes: 61,
            ks: vec![4, 8, 16],
        }
    }
}

/// `(max |Ric(∂_t,∂_t) − (n−1)κ|, max |H − β|)` over the sample points.
pub fn audit_model(model: &ComparisonModel, params: &Params) -> Result<(f64, f64)> {
    let n = model.n;
    let metric = model.metric_field(params.horizon, 0.5)?;
    let (lo, hi) = (metric.chart.lower[0], metric.chart.upper[0]);
    let mut ric_err = 0.0_f64;
    let k = params.time_samples.max(1);
    for i in 0..k {
        let mut x = vec![0.0; n];
        x[0] = lo + (hi - lo) * (i as f64 + 0.5) / k as f64;
        let sample = metric.ricci_at(&x)?;
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        ric_err = ric_err.max((sample.eval(&e) - (n as f64 - 1.0) * model.kappa).abs());
    }
    let sigma = time_slice(n, 0.25, 0.5);
    let mut h_err = 0.0_f64;
    let m = params.patch_samples.max(1);
    for i in 0..m {
        let frac = (i as f64 + 0.5) / m as f64;
        let u: Vec<f64> = (0..n - 1)
            .map(|a| sigma.patch.lower[a] + frac * (sigma.patch.upper[a] - sigma.patch.lower[a]))
            .collect();
        let q = sigma.patch.point(&u);
        h_err = h_err.max((sigma.mean_curvature(&metric, &q[..n])? - model.beta).abs());
    }
    Ok((ric_err, h_err))
}

fn non_decreases(values: &[f64]) -> usize {
    values
        .windows(2)
        .filter(|w| !(w[1] < w[0]) && !(w[0] <= 1e-12 && w[1] <= 1e-12))
        .count()
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let params: Params = cfg.params()?;
    let (mut report, _) = begin(cfg, &params, Vec::new)?;
    let mut rows = Vec::new();
    for (index, row) in TableRow::ALL.into_iter().enumerate() {
        let mut worst = (0.0_f64, 0.0_f64);
        for &n in &params.dims {
            let (kappa, beta) = row.representative(n);
            let model = ComparisonModel::new(kappa, beta, n)?;
            let (ric, h) = audit_model(&model, &params)?;
            worst = (worst.0.max(ric), worst.1.max(h));
            let collapse = if model.collapse.is_finite() {
                model.collapse
            } else {
                -1.0
            };
            rows.push(vec![
                index as f64,
                n as f64,
                kappa,
                beta,
                model.offset,
                collapse,
                ric,
                h,
            ]);
        }
        report.check(Check::new(
            format!("{row:?}: |Ric(dt,dt) - (n-1)kappa|"),
            worst.0,
            Relation::Le,
            params.tol,
        ));
        report.check(Check::new(
            format!("{row:?}: |H(Sigma) - beta|"),
            worst.1,
            Relation::Le,
            params.tol,
        ));
    }
    report.series.push(Series::table(
        "table1 models",
        &[
            "row",
            "n",
            "kappa",
            "beta",
            "offset",
            "collapse",
            "ricci_error",
            "mean_curvature_error",
        ],
        rows,
    ));

    let grid = uniform(0.0, params.limit_t_max, params.limit_nodes);
    for case in &params.limit_cases {
        let r = limit_family_check(*case, params.limit_n, &grid, &params.ks)?;
        let name = format!("{case:?}");
        let rows =
            r.ks.iter()
                .enumerate()
                .map(|(i, k)| vec![*k as f64, r.raw_sup[i], r.normalized_sup[i]])
                .collect();
        report.series.push(Series::table(
            format!("limit {name}"),
            &["k", "raw_sup", "normalized_sup"],
            rows,
        ));
        if case.raw_converges() {
            report.check(Check::new(
                format!("f~ limit {name}: non-decreasing steps of raw discrepancy"),
                non_decreases(&r.raw_sup) as f64,
                Relation::Le,
                0.0,
            ));
        } else {
            let raw_min = r.raw_sup.iter().copied().fold(f64::INFINITY, f64::min);
            report.check(Check::new(
                format!("f~ limit {name}: min raw discrepancy"),
                raw_min,
                Relation::Ge,
                EXCEPTIONAL_RAW_FLOOR,
            ));
            report.check(Check::new(
                format!("f~ limit {name}: non-decreasing steps of normalized discrepancy"),
                non_decreases(&r.normalized_sup) as f64,
                Relation::Le,
                0.0,
            ));
        }
    }
    Ok(report)
}
