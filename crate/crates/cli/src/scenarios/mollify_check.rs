//! Mollifier suite on a `C^{1,1}` fixture, plus the smooth counterexample
//! where `Ric(X,X)` is unbounded below over timelike `X` with growing norm.

use anyhow::Result;
use geomlab_core::metric::dsl::builtin;
use geomlab_core::metric::{check_ricci_bound, BoundMode};
use geomlab_core::mollifier::{eps_family_checks, FamilyConfig};
use serde::{Deserialize, Serialize};

use super::begin;
use crate::config::{FixtureRef, ScenarioConfig};
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Run the ε-family suite on the fixtures (off: remark block only).
    pub run_family: bool,
    /// Family settings; `kappa` and `beta` come from the fixture.
    pub family: FamilyConfig,
    /// Largest over smallest second-difference bound across the family.
    pub uniformity_ratio: f64,
    /// Smallest accepted ratio of successive geodesic deviations.
    pub geodesic_ratio_min: f64,
    pub remark: RemarkParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemarkParams {
    pub enabled: bool,
    pub eps: f64,
    pub point: Vec<f64>,
    pub tol: f64,
    /// Growing euclidean bounds on the timelike sample vectors.
    pub c_list: Vec<f64>,
    pub directions: usize,
    /// `min Ric(X,X) < −unbounded_below` at the largest bound.
    pub unbounded_below: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            run_family: true,
            family: FamilyConfig::default(),
            uniformity_ratio: 2.0,
            geodesic_ratio_min: 1.5,
            remark: RemarkParams::default(),
        }
    }
}

impl Default for RemarkParams {
    fn default() -> Self {
        RemarkParams {
            enabled: true,
            eps: 1.0,
            point: vec![1.0, 1.0, 1.0],
            tol: 1e-8,
            c_list: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            directions: 256,
            unbounded_below: 10.0,
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![FixtureRef::builtin("rw_c11", &[("ts", 0.05)])
        .with_label("C11 Robertson-Walker")
        .with_bounds(0.0, 0.0)]
}

/// Closed-form Ricci tensor of `−(1 + ε x²y²z²) dx² + dy² + dz²` at `(1, 1, 1)`.
pub fn remark_ricci(eps: f64) -> [[f64; 3]; 3] {
    let s = 1.0 / (1.0 + eps).powi(2);
    let off = -eps * (2.0 + eps) * s;
    [
        [(1.0 + eps) * 2.0 * eps * s, 0.0, 0.0],
        [0.0, -eps * s, off],
        [0.0, off, -eps * s],
    ]
}

fn remark_block(report: &mut RunReport, p: &RemarkParams) -> Result<()> {
    let params = [("eps".to_string(), p.eps)].into_iter().collect();
    let metric = builtin("remark", &params)?.metric;
    let ric = metric.ricci_at(&p.point)?;
    let rows = ric.rows();
    let mut err = 0.0_f64;
    if p.point.iter().all(|x| *x == 1.0) {
        let exact = remark_ricci(p.eps);
        for i in 0..3 {
            for j in 0..3 {
                err = err.max((rows[i][j] - exact[i][j]).abs());
            }
        }
        report.check(
            Check::new(
                "remark: max |Ric_ij - closed form| at (1,1,1)",
                err,
                Relation::Le,
                p.tol,
            )
            .with_detail(format!("eps = {}", p.eps)),
        );
    }
    report
        .series
        .push(Series::table("remark Ricci matrix", &["col0", "col1", "col2"], rows));

    let mut table = Vec::new();
    let mut lowest = f64::INFINITY;
    for &c in &p.c_list {
        let r = check_ricci_bound(
            &metric,
            0.0,
            std::slice::from_ref(&p.point),
            p.directions,
            BoundMode::Timelike { c_bound: c },
            0.0,
        )?;
        lowest = lowest.min(r.min_margin);
        table.push(vec![c, r.min_margin]);
    }
    report.check(
        Check::new(
            "remark: min Ric(X,X) over timelike X with |X| <= C",
            lowest,
            Relation::Lt,
            -p.unbounded_below,
        )
        .with_detail(format!("C up to {}", p.c_list.iter().copied().fold(0.0, f64::max))),
    );
    report.series.push(Series::table(
        "remark min Ric(X,X) by C",
        &["c_bound", "min_ricci"],
        table,
    ));
    Ok(())
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let params: Params = cfg.params()?;
    let (mut report, fixtures) = begin(cfg, &params, default_fixtures)?;
    for fx in fixtures.iter().filter(|_| params.run_family) {
        let label = &fx.label;
        let mut family = params.family.clone();
        family.kappa = fx.kappa()?;
        family.beta = fx.beta()?;
        let r = eps_family_checks(&fx.doc.metric, fx.sigma()?, &family)?;

        for e in &r.entries {
            report.check(
                Check::new(
                    format!("{label}: d_h(g, g_eps) at eps = {}", e.eps),
                    e.dh_inner,
                    Relation::Lt,
                    e.eps,
                )
                .with_detail(format!(
                    "kernel radius {:.4e}, lambda {:.3e}",
                    e.kernel_radius, e.lambda
                )),
            );
        }
        let c1_steps = r
            .entries
            .windows(2)
            .filter(|w| !(w[1].c1_deviation < w[0].c1_deviation))
            .count();
        report.check(Check::new(
            format!("{label}: non-decreasing steps of the C1 deviation"),
            c1_steps as f64,
            Relation::Le,
            0.0,
        ));
        let sd_min = r
            .entries
            .iter()
            .map(|e| e.second_difference)
            .fold(f64::INFINITY, f64::min);
        report.check(
            Check::new(
                format!("{label}: spread of second-difference bounds (max/min)"),
                r.second_difference_bound / sd_min,
                Relation::Le,
                params.uniformity_ratio,
            )
            .with_detail(format!("uniform bound {:.4e}", r.second_difference_bound)),
        );
        report.check(Check::new(
            format!("{label}: Ricci eps0 (delta = {})", family.delta),
            r.ricci_eps0.unwrap_or(0.0),
            Relation::Gt,
            0.0,
        ));
        report.check(Check::new(
            format!("{label}: mean-curvature eps0 (eta = {})", family.eta),
            r.mean_curvature_eps0.unwrap_or(0.0),
            Relation::Gt,
            0.0,
        ));
        report.check(Check::new(
            format!("{label}: cone nesting violations"),
            r.nesting_violations as f64,
            Relation::Le,
            0.0,
        ));
        let samples = r.entries.iter().map(|e| e.nesting_samples).min().unwrap_or(0);
        report.check(Check::new(
            format!("{label}: cone nesting samples per eps"),
            samples as f64,
            Relation::Ge,
            family.nesting_samples as f64,
        ));
        let ratio_min = r.geodesic_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        report.check(
            Check::new(
                format!("{label}: min ratio of successive geodesic deviations"),
                ratio_min,
                Relation::Ge,
                params.geodesic_ratio_min,
            )
            .with_detail(format!("{} ratios", r.geodesic_ratios.len())),
        );
        let rows = r
            .entries
            .iter()
            .map(|e| {
                vec![
                    e.eps,
                    e.kernel_radius,
                    e.lambda,
                    e.dh_inner,
                    e.c1_deviation,
                    e.second_difference,
                    e.ricci_margin,
                    e.mean_curvature_sup,
                    e.mean_curvature_margin,
                    e.nesting_samples as f64,
                    e.nesting_violations as f64,
                    e.geodesic_deviation,
                ]
            })
            .collect();
        report.series.push(Series::table(
            format!("{label} eps family"),
            &[
                "eps",
                "kernel_radius",
                "lambda",
                "dh_inner",
                "c1_deviation",
                "second_difference",
                "ricci_margin",
                "mean_curvature_sup",
                "mean_curvature_margin",
                "nesting_samples",
                "nesting_violations",
                "geodesic_deviation",
            ],
            rows,
        ));
    }
    if params.remark.enabled {
        remark_block(&mut report, &params.remark)?;
    }
    Ok(report)
}
