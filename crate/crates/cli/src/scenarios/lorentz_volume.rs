//! Lorentzian volume comparison: `t ↦ vol B_A^+(t)/vol_{κ,β} B_B^+(t)` is
//! nonincreasing on `[0, T]` under `CCC(κ, β)`.

use anyhow::{bail, Result};
use geomlab_core::metric::{check_ricci_bound, BoundMode};
use geomlab_core::volume::{
    lorentz_model_series, lorentzian_monte_carlo, lorentzian_quadrature, ratio_series, VolumeConfig,
};
use geomlab_core::ComparisonModel;
use serde::{Deserialize, Serialize};

use super::{agreement_check, begin, positive_grid, sup_mean_curvature};
use crate::config::{FixtureRef, ScenarioConfig};
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Default horizon `T` (fixture `horizon` overrides).
    pub horizon: f64,
    pub t_nodes: usize,
    pub tol_mono: f64,
    /// Equality fixtures: spread `max/min − 1` of the ratio.
    pub tol_equal: f64,
    /// Relative gap between centered volume differences and shell areas.
    pub tol_coarea: f64,
    /// Euclidean bound on the timelike vectors of the curvature check.
    pub c_bound: f64,
    pub ricci_grid: usize,
    pub ricci_directions: usize,
    pub patch_grid: usize,
    pub volume: VolumeConfig,
    pub monte_carlo: bool,
    pub agreement_nodes: usize,
    pub agreement_sigmas: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            horizon: 1.5,
            t_nodes: 30,
            tol_mono: 1e-3,
            tol_equal: 1e-4,
            tol_coarea: 2e-2,
            c_bound: 3.0,
            ricci_grid: 7,
            ricci_directions: 32,
            patch_grid: 7,
            volume: VolumeConfig {
                mc_samples: 20_000,
                ..VolumeConfig::default()
            },
            monte_carlo: true,
            agreement_nodes: 4,
            agreement_sigmas: 3.0,
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![
        FixtureRef::builtin("rw_c11", &[])
            .with_label("C11 Robertson-Walker")
            .with_bounds(0.0, 0.0),
        FixtureRef::builtin("model", &[("kappa", -1.0), ("beta", 0.5)])
            .with_label("model(-1, 0.5)")
            .with_equality(),
    ]
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let mut params: Params = cfg.params()?;
    params.volume.seed = cfg.seed;
    let (mut report, fixtures) = begin(cfg, &params, default_fixtures)?;
    report.notes.push(
        "global hyperbolicity is assumed, not verified: fixtures are warped products over a time interval".to_string(),
    );
    for fx in &fixtures {
        let metric = &fx.doc.metric;
        let sigma = fx.sigma()?;
        let n = metric.dim();
        let (kappa, beta) = (fx.kappa()?, fx.beta()?);
        let model = ComparisonModel::new(kappa, beta, n)?;
        let label = &fx.label;
        let t_max = fx.horizon.unwrap_or(params.horizon);

        let points = metric.chart.grid(params.ricci_grid, 0.02);
        let ric = check_ricci_bound(
            metric,
            kappa,
            &points,
            params.ricci_directions,
            BoundMode::Timelike {
                c_bound: params.c_bound,
            },
            1e-6,
        )?;
        report.check(
            Check::new(
                format!("{label}: min Ric(X,X) - (n-1)kappa on timelike X"),
                ric.min_margin,
                Relation::Ge,
                -1e-6,
            )
            .with_detail(format!(
                "{} points ({} skipped at interfaces)",
                ric.points_used, ric.skipped_invalid
            )),
        );
        let h_sup = sup_mean_curvature(metric, sigma, params.patch_grid)?;
        report.check(Check::new(
            format!("{label}: sup_A H - beta"),
            h_sup - beta,
            Relation::Le,
            1e-6,
        ));

        let grid = positive_grid(t_max, params.t_nodes);
        let quad = lorentzian_quadrature(metric, sigma, &grid, &params.volume)?;
        if let Some(f) = quad.feet.iter().find(|f| f.reach < t_max - 1e-9 && f.cut > f.reach) {
            bail!(
                "fixture `{label}`: normal geodesic from {:?} exists only up to {:.6} < T = {t_max}",
                f.foot,
                f.reach
            );
        }
        let decreasing = quad.series.values.windows(2).filter(|w| w[1] < w[0]).count();
        report.check(Check::new(
            format!("{label}: decreasing volume steps"),
            decreasing as f64,
            Relation::Le,
            0.0,
        ));

        let h = grid[1] - grid[0];
        let mut coarea = 0.0_f64;
        for i in 1..grid.len() - 1 {
            let shell = quad.shell_areas[i];
            if shell > 0.0 {
                let dv = (quad.series.values[i + 1] - quad.series.values[i - 1]) / (2.0 * h);
                coarea = coarea.max((dv - shell).abs() / shell);
            }
        }
        report.check(Check::new(
            format!("{label}: centered dV/dt vs shell area (relative)"),
            coarea,
            Relation::Le,
            params.tol_coarea,
        ));

        let den = lorentz_model_series(&model, &grid, quad.patch_area);
        let ratio = ratio_series(&quad.series, &den, params.tol_mono)?;
        report.check(
            Check::new(
                format!("{label}: worst relative increase of vol B_A(t)/vol_(kappa,beta) B_B(t)"),
                ratio.worst_violation,
                Relation::Le,
                params.tol_mono,
            )
            .with_detail(format!("{} nodes up to T = {t_max}", ratio.grid.len())),
        );
        if fx.equality {
            report.check(Check::new(
                format!("{label}: ratio spread max/min - 1"),
                ratio.spread(),
                Relation::Le,
                params.tol_equal,
            ));
        }
        report
            .series
            .push(Series::volume(format!("{label} vol B_A(t) quadrature"), &quad.series));
        report.series.push(Series::ratio(format!("{label} ratio"), &ratio));
        let rows = grid.iter().zip(&quad.shell_areas).map(|(t, a)| vec![*t, *a]).collect();
        report.series.push(Series::table(
            format!("{label} shell areas"),
            &["parameter", "shell_area"],
            rows,
        ));

        if params.monte_carlo {
            let mc = lorentzian_monte_carlo(metric, sigma, &grid, &params.volume)?;
            report.check(agreement_check(
                label,
                &quad.series,
                &mc,
                params.agreement_nodes,
                params.agreement_sigmas,
            ));
            report
                .series
                .push(Series::volume(format!("{label} vol B_A(t) Monte Carlo"), &mc));
        }
    }
    Ok(report)
}
