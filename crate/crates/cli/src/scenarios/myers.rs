//! Diameter bound `diam ≤ π/√κ` under `Ric ≥ (n−1)κ > 0`, checked with
//! shooting distances between sampled point pairs.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use geomlab_core::geodesic::riemannian_distance;
use geomlab_core::metric::{check_ricci_bound, BoundMode};
use geomlab_core::StepControl;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::begin;
use crate::config::{FixtureRef, ScenarioConfig};
use crate::report::{Check, Relation, RunReport, Series};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub pairs: usize,
    /// Points are drawn uniformly (by chart area) from the coordinate ball
    /// of this radius about the pole; defaults to `π/(2√κ)`.
    pub sample_radius: Option<f64>,
    pub tol: f64,
    /// A pair expected at distance `π/√κ`; defaults to `pole ± π/(2√κ)·e₁`.
    pub antipodal_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub control: StepControl,
    /// Curvature-hypothesis sampling: grid nodes per axis and directions.
    pub ricci_grid: usize,
    pub ricci_directions: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            pairs: 1000,
            sample_radius: None,
            tol: 1e-3,
            antipodal_pair: None,
            control: StepControl::default(),
            ricci_grid: 7,
            ricci_directions: 32,
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![FixtureRef::builtin("sphere_normal2", &[]).with_bounds(1.0, 0.0)]
}

fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    loop {
        let u: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return (0..n).map(|i| center[i] + radius * u[i]).collect();
        }
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let params: Params = cfg.params()?;
    let (mut report, fixtures) = begin(cfg, &params, default_fixtures)?;
    for fx in &fixtures {
        let kappa = fx.kappa()?;
        if kappa <= 0.0 {
            bail!("fixture `{}`: the diameter bound needs kappa > 0", fx.label);
        }
        let metric = &fx.doc.metric;
        let pole = fx.pole()?;
        let n = metric.dim();
        let bound = PI / kappa.sqrt();
        let radius = params.sample_radius.unwrap_or(0.5 * bound);

        let points = metric.chart.grid(params.ricci_grid, 0.05);
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
                format!("{}: min Ric(X,X) - (n-1)kappa", fx.label),
                ric.min_margin,
                Relation::Ge,
                -1e-6,
            )
            .with_detail(format!("{} points, {} vectors", ric.points_used, ric.vectors_tested)),
        );

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..params.pairs)
            .map(|_| {
                (
                    sample_ball(&mut rng, &pole, radius),
                    sample_ball(&mut rng, &pole, radius),
                )
            })
            .collect();
        let distances: Vec<Option<f64>> = pairs
            .par_iter()
            .map(|(p, q)| riemannian_distance(metric, p, q, &params.control).ok())
            .collect();
        let failures = distances.iter().filter(|d| d.is_none()).count();
        let mut max = 0.0_f64;
        let mut rows = Vec::with_capacity(pairs.len());
        for ((p, q), d) in pairs.iter().zip(&distances) {
            let d = d.unwrap_or(-1.0);
            if d > max {
                max = d;
            }
            let mut row = p.clone();
            row.extend(q);
            row.push(d);
            rows.push(row);
        }
        let mut columns: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        columns.extend((0..n).map(|i| format!("q{i}")));
        columns.push("distance".to_string());
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        report.series.push(Series::table(
            format!("{} pair distances (-1: no solution)", fx.label),
            &columns,
            rows,
        ));

        report.check(Check::new(
            format!("{}: max sampled distance - pi/sqrt(kappa)", fx.label),
            max - bound,
            Relation::Le,
            params.tol,
        ));
        report.check(Check::new(
            format!("{}: pairs without a shooting solution", fx.label),
            failures as f64,
            Relation::Le,
            0.0,
        ));

        let (a, b) = params.antipodal_pair.clone().unwrap_or_else(|| {
            let mut a = pole.clone();
            let mut b = pole.clone();
            a[0] += 0.5 * bound;
            b[0] -= 0.5 * bound;
            (a, b)
        });
        let d = riemannian_distance(metric, &a, &b, &params.control)?;
        report.check(
            Check::new(
                format!("{}: antipodal pair distance - pi/sqrt(kappa)", fx.label),
                d - bound,
                Relation::Ge,
                -params.tol,
            )
            .with_detail(format!("{a:?} to {b:?}")),
        );
        report.check(Check::new(
            format!("{}: antipodal pair distance - pi/sqrt(kappa) (upper)", fx.label),
            d - bound,
            Relation::Le,
            params.tol,
        ));
    }
    Ok(report)
}
