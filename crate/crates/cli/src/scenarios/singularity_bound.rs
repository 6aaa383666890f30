//! Singularity bound: under `CCC(κ, β)` with `b_{κ,β} < ∞`, every point in
//! the future of `Σ` has `τ_Σ(p) ≤ b_{κ,β}`, and normal geodesics stop
//! maximizing by `b_{κ,β}`.

use anyhow::{bail, Result};
use geomlab_core::hypersurface::CutHorizon;
use geomlab_core::metric::{check_ricci_bound, BoundMode};
use geomlab_core::volume::{lorentzian_monte_carlo, lorentzian_quadrature, VolumeConfig};
use geomlab_core::{ComparisonModel, NormalBundle, SearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{agreement_check, begin, positive_grid, sup_mean_curvature, uniform};
use crate::config::{FixtureRef, ScenarioConfig};
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Points sampled in the chart to the future of `Σ`.
    pub samples: usize,
    /// `τ_Σ ≤ b (1 + tol_bound)`.
    pub tol_bound: f64,
    /// Equality fixtures: `|s⁺ − b| ≤ tol_cut`.
    pub tol_cut: f64,
    /// Foot points of the cut-function evaluations.
    pub cut_feet: usize,
    pub search: SearchConfig,
    pub c_bound: f64,
    pub ricci_grid: usize,
    pub ricci_directions: usize,
    pub patch_grid: usize,
    /// Volume agreement on `[0, fraction · chart top]`.
    pub monte_carlo: bool,
    pub volume_fraction: f64,
    pub t_nodes: usize,
    pub volume: VolumeConfig,
    pub agreement_nodes: usize,
    pub agreement_sigmas: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            samples: 200,
            tol_bound: 1e-2,
            tol_cut: 1e-2,
            cut_feet: 5,
            search: SearchConfig::default(),
            c_bound: 3.0,
            ricci_grid: 7,
            ricci_directions: 32,
            patch_grid: 7,
            monte_carlo: true,
            volume_fraction: 0.9,
            t_nodes: 20,
            volume: VolumeConfig {
                mc_samples: 20_000,
                ..VolumeConfig::default()
            },
            agreement_nodes: 4,
            agreement_sigmas: 3.0,
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![
        FixtureRef::builtin("model", &[("kappa", 1.0), ("beta", 0.0)])
            .with_label("model(1, 0)")
            .with_equality(),
        FixtureRef::builtin("rw_c11", &[("kappa", 1.0), ("kappa2", 4.0)])
            .with_label("C11 Robertson-Walker(1, 4)")
            .with_bounds(1.0, 0.0),
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
        let bound = ComparisonModel::new(kappa, beta, n)?.collapse;
        if !bound.is_finite() {
            bail!(
                "fixture `{}`: b_(kappa,beta) is infinite for kappa = {kappa}, beta = {beta}",
                fx.label
            );
        }
        let label = &fx.label;

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

        let bundle = NormalBundle::new(metric, sigma, params.search)?;
        let top = metric.chart.upper[0];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let samples: Vec<Vec<f64>> = (0..params.samples)
            .map(|_| {
                let mut p = vec![rng.random_range(0.02..0.99) * top];
                for a in 0..n - 1 {
                    p.push(rng.random_range(sigma.patch.lower[a]..sigma.patch.upper[a]));
                }
                p
            })
            .collect();
        let estimates: Vec<_> = samples
            .par_iter()
            .map(|p| bundle.separation(p))
            .collect::<Result<_, _>>()?;
        let tau_max = estimates.iter().map(|e| e.tau).fold(0.0, f64::max);
        let provisional = estimates.iter().filter(|e| e.lower_bound_only).count();
        report.check(
            Check::new(
                format!("{label}: max sampled tau_Sigma / b - 1"),
                tau_max / bound - 1.0,
                Relation::Le,
                params.tol_bound,
            )
            .with_detail(format!(
                "b = {bound:.6}, {} samples, {provisional} lower bounds only",
                samples.len()
            )),
        );
        let rows = estimates
            .iter()
            .map(|e| {
                let mut row = e.point.clone();
                row.push(e.tau);
                row.push(if e.lower_bound_only { 1.0 } else { 0.0 });
                row
            })
            .collect();
        let mut columns: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        columns.extend(["tau".to_string(), "lower_bound_only".to_string()]);
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        report
            .series
            .push(Series::table(format!("{label} sampled tau_Sigma"), &columns, rows));

        let m = sigma.patch.dim();
        let feet: Vec<Vec<f64>> = uniform(0.0, 1.0, params.cut_feet.max(1))
            .into_iter()
            .map(|s| {
                (0..m)
                    .map(|a| sigma.patch.lower[a] + s * (sigma.patch.upper[a] - sigma.patch.lower[a]))
                    .collect()
            })
            .collect();
        let cuts: Vec<_> = feet
            .par_iter()
            .map(|u| bundle.cut(u, 2.0 * bound))
            .collect::<Result<_, _>>()?;
        let cut_max = cuts.iter().map(|c| c.estimate).fold(0.0, f64::max);
        let kinds: Vec<String> = cuts.iter().map(|c| format!("{:?}", c.horizon)).collect();
        if fx.equality {
            let dev = cuts.iter().map(|c| (c.estimate - bound).abs()).fold(0.0, f64::max);
            report.check(
                Check::new(format!("{label}: max |s+ - b|"), dev, Relation::Le, params.tol_cut)
                    .with_detail(format!("horizons {kinds:?}")),
            );
        }
        report.check(
            Check::new(
                format!("{label}: max s+ / b - 1"),
                cut_max / bound - 1.0,
                Relation::Le,
                params.tol_cut,
            )
            .with_detail(format!("horizons {kinds:?}")),
        );
        if cuts.iter().any(|c| c.horizon == CutHorizon::TruncatedHorizon) {
            report.notes.push(format!(
                "{label}: some normal geodesics leave the chart before the cut predicate fires; their estimate is the exit time"
            ));
        }
        let rows = cuts
            .iter()
            .map(|c| {
                let mut row = c.params.clone();
                row.extend([c.estimate, c.bracket.0, c.bracket.1]);
                row
            })
            .collect();
        let mut columns: Vec<String> = (0..m).map(|a| format!("u{a}")).collect();
        columns.extend(["cut".to_string(), "bracket_lo".to_string(), "bracket_hi".to_string()]);
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        report
            .series
            .push(Series::table(format!("{label} cut function"), &columns, rows));

        if params.monte_carlo {
            let grid = positive_grid(params.volume_fraction * top, params.t_nodes);
            let quad = lorentzian_quadrature(metric, sigma, &grid, &params.volume)?;
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
                .push(Series::volume(format!("{label} vol B_A(t) quadrature"), &quad.series));
            report
                .series
                .push(Series::volume(format!("{label} vol B_A(t) Monte Carlo"), &mc));
        }
    }
    Ok(report)
}
