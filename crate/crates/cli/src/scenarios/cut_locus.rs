//! Thinness of the cut set: the fraction of sampled points with two or more
//! maximizing normal geodesics from `Σ` is small.

use anyhow::Result;
use geomlab_core::{NormalBundle, SearchConfig};
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
    pub samples: usize,
    /// Largest accepted two-witness fraction.
    pub max_fraction: f64,
    /// Sampled times as fractions of the chart top.
    pub time_range: (f64, f64),
    pub search: SearchConfig,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            samples: 2000,
            max_fraction: 1e-2,
            time_range: (0.02, 0.99),
            search: SearchConfig {
                witness_tol: 1e-3,
                ..SearchConfig::default()
            },
        }
    }
}

pub fn default_fixtures() -> Vec<FixtureRef> {
    vec![FixtureRef::builtin("model", &[("kappa", 1.0), ("beta", 0.0)]).with_label("model(1, 0)")]
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let params: Params = cfg.params()?;
    let (mut report, fixtures) = begin(cfg, &params, default_fixtures)?;
    for fx in &fixtures {
        let metric = &fx.doc.metric;
        let sigma = fx.sigma()?;
        let n = metric.dim();
        let label = &fx.label;
        let bundle = NormalBundle::new(metric, sigma, params.search)?;
        let top = metric.chart.upper[0];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let samples: Vec<Vec<f64>> = (0..params.samples)
            .map(|_| {
                let mut p = vec![rng.random_range(params.time_range.0..params.time_range.1) * top];
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
        let reached: Vec<_> = estimates.iter().filter(|e| e.tau > 0.0).collect();
        let multi = reached.iter().filter(|e| e.witnesses >= 2).count();
        let fraction = multi as f64 / reached.len().max(1) as f64;
        report.check(
            Check::new(
                format!("{label}: two-witness fraction"),
                fraction,
                Relation::Lt,
                params.max_fraction,
            )
            .with_detail(format!(
                "{multi} of {} reached samples, witness tolerance {:.1e}",
                reached.len(),
                params.search.witness_tol
            )),
        );
        report.check(Check::new(
            format!("{label}: samples reached by a normal geodesic"),
            reached.len() as f64,
            Relation::Gt,
            0.0,
        ));
        let rows = estimates
            .iter()
            .map(|e| {
                let mut row = e.point.clone();
                row.extend([e.tau, e.witnesses as f64, e.competitors as f64]);
                row
            })
            .collect();
        let mut columns: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        columns.extend(["tau".to_string(), "witnesses".to_string(), "competitors".to_string()]);
        let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
        report
            .series
            .push(Series::table(format!("{label} witnesses"), &columns, rows));
    }
    Ok(report)
}
