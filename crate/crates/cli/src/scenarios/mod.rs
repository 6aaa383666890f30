//! Scenario drivers. Each builds its fixtures, runs the engines and turns
//! every verified property into a [`Check`].

use std::time::Instant;

use anyhow::Result;
use geomlab_core::volume::VolumeSeries;
use geomlab_core::{Hypersurface, MetricField};
use serde::Serialize;

use crate::config::{FixtureRef, LoadedFixture, Scenario, ScenarioConfig};
use crate::report::{Check, Relation, RunReport};

pub mod bishop_gromov;
pub mod cut_locus;
pub mod lorentz_volume;
pub mod mollify_check;
pub mod myers;
pub mod singularity_bound;
pub mod table1_audit;

/// Run one scenario; deterministic for a fixed config and seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = match cfg.scenario {
        Scenario::BishopGromov => bishop_gromov::run(cfg),
        Scenario::LorentzVolume => lorentz_volume::run(cfg),
        Scenario::Myers => myers::run(cfg),
        Scenario::SingularityBound => singularity_bound::run(cfg),
        Scenario::MollifyCheck => mollify_check::run(cfg),
        Scenario::CutLocus => cut_locus::run(cfg),
        Scenario::Table1Audit => table1_audit::run(cfg),
    }?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Resolve fixtures (explicit or default) and start a report whose config
/// echo holds the resolved fixtures and parameters.
fn begin<P: Serialize>(
    cfg: &ScenarioConfig,
    params: &P,
    defaults: impl FnOnce() -> Vec<FixtureRef>,
) -> Result<(RunReport, Vec<LoadedFixture>)> {
    let refs = if cfg.fixtures.is_empty() {
        defaults()
    } else {
        cfg.fixtures.clone()
    };
    let fixtures = refs.iter().map(|f| f.load(&cfg.base_dir)).collect::<Result<Vec<_>>>()?;
    let echo = serde_json::json!({
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "fixtures": refs,
        "params": params,
    });
    Ok((RunReport::new(cfg.scenario, cfg.seed, echo), fixtures))
}

/// Indices of `count` grid nodes spread evenly and ending at the last node.
fn spread_indices(len: usize, count: usize) -> Vec<usize> {
    let count = count.clamp(1, len.max(1));
    let mut out: Vec<usize> = (1..=count).map(|j| (j * len).div_ceil(count) - 1).collect();
    out.dedup();
    out
}

/// `max |V_q − V_mc| / σ_mc` over the selected nodes, as a `≤ 3` check.
fn agreement_check(
    label: &str,
    quadrature: &VolumeSeries,
    monte_carlo: &VolumeSeries,
    nodes: usize,
    sigmas: f64,
) -> Check {
    let mut worst = 0.0_f64;
    let mut at = 0.0;
    for i in spread_indices(quadrature.grid.len(), nodes) {
        let diff = (quadrature.values[i] - monte_carlo.values[i]).abs();
        let sigma = monte_carlo.errors[i];
        let z = if diff == 0.0 {
            0.0
        } else if sigma > 0.0 {
            diff / sigma
        } else {
            f64::INFINITY
        };
        if z > worst {
            worst = z;
            at = quadrature.grid[i];
        }
    }
    Check::new(
        format!("{label}: quadrature vs Monte Carlo |dV|/sigma"),
        worst,
        Relation::Le,
        sigmas,
    )
    .with_detail(format!("worst at parameter {at:.4}"))
}

/// `sup_A H` over a `per_axis`-node grid on the patch of `sigma`.
fn sup_mean_curvature(metric: &MetricField, sigma: &Hypersurface, per_axis: usize) -> Result<f64> {
    let m = sigma.patch.dim();
    let k = per_axis.max(2);
    let mut sup = f64::NEG_INFINITY;
    for i in 0..k.pow(m as u32) {
        let u: Vec<f64> = (0..m)
            .map(|a| {
                let j = (i / k.pow(a as u32)) % k;
                sigma.patch.lower[a] + (sigma.patch.upper[a] - sigma.patch.lower[a]) * j as f64 / (k - 1) as f64
            })
            .collect();
        let q = sigma.patch.point(&u);
        sup = sup.max(sigma.mean_curvature(metric, &q[..metric.dim()])?);
    }
    Ok(sup)
}

fn uniform(a: f64, b: f64, count: usize) -> Vec<f64> {
    geomlab_core::volume::uniform_grid(a, b, count)
}

/// Grid `T/count, 2T/count, …, T`.
fn positive_grid(horizon: f64, count: usize) -> Vec<f64> {
    uniform(horizon / count as f64, horizon, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_indices_end_at_last() {
        assert_eq!(spread_indices(30, 4), vec![7, 14, 22, 29]);
        assert_eq!(spread_indices(3, 10), vec![0, 1, 2]);
        assert_eq!(spread_indices(1, 1), vec![0]);
    }
}
