//! Riemannian volume comparison: `r ↦ vol B_p(r)/vol_κ B^κ(r)` is
//! nonincreasing and `vol B_p(r) ≤ vol_κ B^κ(r)` under `Ric ≥ (n−1)κ`.

use anyhow::Result;
use geomlab_core::metric::{check_ricci_bound, BoundMode};
use geomlab_core::volume::{
    ratio_series, riemannian_model_series, riemannian_monte_carlo, riemannian_quadrature, VolumeConfig,
};
use serde::{Deserialize, Serialize};

use super::{agreement_check, begin, positive_grid};
use crate::config::{FixtureRef, ScenarioConfig};
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub r_nodes: usize,
    /// Default `r_max` as a fraction of the smallest chart half-extent
    /// about the pole (fixture `horizon` overrides).
    pub horizon_fraction: f64,
    pub tol_mono: f64,
    /// Equality fixtures: `max |ratio − 1|` bound.
    pub tol_equal: f64,
    /// `vol B_p(r) ≤ (1 + tol_bound) vol_κ B^κ(r)`.
    pub tol_bound: f64,
    pub volume: VolumeConfig,
    pub monte_carlo: bool,
    pub agreement_nodes: usize,
    pub agreement_sigmas: f64,
    pub ricci_grid: usize,
    pub ricci_directions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            r_nodes: 50,
            horizon_fraction: 0.95,
            tol_mono: 1e-3,
            tol_equal: 1e-3,
            tol_bound: 1e-3,
            volume: VolumeConfig {
                angular_nodes: 48,
                mc_samples: 20_000,
                ..VolumeConfig::default()
            },
            monte_carlo: true,
            agreement_nodes: 4,
            agreement_sigmas: 3.0,
            ricci_grid: 9,
            ricci_directions: 32,
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![
        FixtureRef::builtin("sphere_normal3", &[])
            .with_label("round S3")
            .with_bounds(1.0, 0.0)
            .with_equality(),
        FixtureRef::builtin("revolution_c11", &[])
            .with_label("C11 revolution")
            .with_bounds(1.0, 0.0),
    ]
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let mut params: Params = cfg.params()?;
    params.volume.seed = cfg.seed;
    let (mut report, fixtures) = begin(cfg, &params, default_fixtures)?;
    for fx in &fixtures {
        let metric = &fx.doc.metric;
        let n = metric.dim();
        let kappa = fx.kappa()?;
        let pole = fx.pole()?;
        let label = &fx.label;

        let points = metric.chart.grid(params.ricci_grid, 0.02);
        let ric = check_ricci_bound(
            metric,
            kappa,
            &points,
            params.ricci_directions,
            BoundMode::Riemannian,
            1e-6,
        )?;
        report.check(
            Check::new(
                format!("{label}: min Ric(X,X) - (n-1)kappa"),
                ric.min_margin,
                Relation::Ge,
                -1e-6,
            )
            .with_detail(format!(
                "{} points ({} skipped at interfaces)",
                ric.points_used, ric.skipped_invalid
            )),
        );

        let half = (0..n)
            .map(|i| (metric.chart.upper[i] - pole[i]).min(pole[i] - metric.chart.lower[i]))
            .fold(f64::INFINITY, f64::min);
        let r_max = fx.horizon.unwrap_or(params.horizon_fraction * half);
        let grid = positive_grid(r_max, params.r_nodes);
        let quad = riemannian_quadrature(metric, &pole, &grid, &params.volume)?;
        let clipped = quad
            .rays
            .iter()
            .filter(|r| r.clipped_by_chart && r.reach < r_max)
            .count();
        report.check(Check::new(
            format!("{label}: rays clipped by the chart"),
            clipped as f64,
            Relation::Le,
            0.0,
        ));
        let nesting = quad.series.values.windows(2).filter(|w| w[1] < w[0]).count();
        report.check(Check::new(
            format!("{label}: decreasing volume steps"),
            nesting as f64,
            Relation::Le,
            0.0,
        ));

        let model = riemannian_model_series(kappa, n, &grid);
        let ratio = ratio_series(&quad.series, &model, params.tol_mono)?;
        report.check(
            Check::new(
                format!("{label}: worst relative increase of vol B_p(r)/vol_kappa B(r)"),
                ratio.worst_violation,
                Relation::Le,
                params.tol_mono,
            )
            .with_detail(format!("{} nodes up to r = {r_max:.4}", ratio.grid.len())),
        );
        let excess = ratio.ratios.iter().map(|r| r - 1.0).fold(f64::NEG_INFINITY, f64::max);
        report.check(Check::new(
            format!("{label}: max vol B_p(r)/vol_kappa B(r) - 1"),
            excess,
            Relation::Le,
            params.tol_bound,
        ));
        if fx.equality {
            let dev = ratio.ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            report.check(Check::new(
                format!("{label}: max |ratio - 1|"),
                dev,
                Relation::Le,
                params.tol_equal,
            ));
        }
        report
            .series
            .push(Series::volume(format!("{label} vol B_p(r) quadrature"), &quad.series));
        report.series.push(Series::ratio(format!("{label} ratio"), &ratio));

        if params.monte_carlo {
            let mc = riemannian_monte_carlo(metric, &pole, &grid, &params.volume)?;
            report.check(agreement_check(
                label,
                &quad.series,
                &mc,
                params.agreement_nodes,
                params.agreement_sigmas,
            ));
            report
                .series
                .push(Series::volume(format!("{label} vol B_p(r) Monte Carlo"), &mc));
        }
    }
    Ok(report)
}
