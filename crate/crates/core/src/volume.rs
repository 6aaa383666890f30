//! Volumes of Lorentzian future balls `B_A^+(t)` and Riemannian balls
//! `B_p(r)` by normal-exponential quadrature clipped at the cut time and by
//! Monte Carlo, plus monotonicity ratio reports.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geodesic::{
    normal_jacobian, polar_ray, riemannian_distance, shoot, GeodesicSolution, StepControl, Termination,
};
use crate::hypersurface::{Hypersurface, NormalBundle, SearchConfig};
use crate::linalg::{self, Vector, MAX_DIM};
use crate::metric::MetricField;
use crate::models::{riemannian_model_volume, ComparisonModel};
use crate::quadrature::gauss_legendre_on;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    Quadrature,
    MonteCarlo,
    ClosedForm,
}

/// Volumes on a parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSeries {
    pub label: String,
    pub method: VolumeMethod,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Statistical standard error (Monte Carlo) or quadrature tolerance.
    pub errors: Vec<f64>,
    /// Conditions met while computing (chart clipping, coverage gaps).
    pub flags: Vec<String>,
}

impl VolumeSeries {
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,volume,error\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{:e},{:e},{:e}\n",
                self.grid[i], self.values[i], self.errors[i]
            ));
        }
        out
    }
}

/// Shared sampling options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VolumeConfig {
    /// Gauss-Legendre nodes per patch axis (Lorentzian quadrature).
    pub patch_nodes: usize,
    /// Angular resolution of the Riemannian polar rule.
    pub angular_nodes: usize,
    pub control: StepControl,
    /// Clip rays at the cut function (Lorentzian quadrature).
    pub clip_at_cut: bool,
    pub search: SearchConfig,
    pub mc_samples: usize,
    pub mc_batch: usize,
    pub seed: u64,
    /// Nominal quadrature tolerance reported as the quadrature error.
    pub quadrature_tolerance: f64,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            patch_nodes: 16,
            angular_nodes: 64,
            control: StepControl::default(),
            clip_at_cut: true,
            search: SearchConfig::default(),
            mc_samples: 200_000,
            mc_batch: 1000,
            seed: 0,
            quadrature_tolerance: 1e-6,
        }
    }
}

/// Per-foot quadrature data of the Lorentzian coarea integral.
#[derive(Debug, Clone, Serialize)]
pub struct FootRecord {
    pub params: Vec<f64>,
    pub foot: Vec<f64>,
    pub weight: f64,
    pub cut: f64,
    /// Parameter at which the normal geodesic stopped.
    pub reach: f64,
}

/// Lorentzian quadrature result: volumes and the shell areas `d vol/dt`.
#[derive(Debug, Clone, Serialize)]
pub struct LorentzQuadrature {
    pub series: VolumeSeries,
    pub shell_areas: Vec<f64>,
    pub patch_area: f64,
    pub feet: Vec<FootRecord>,
}

/// `vol B_A^+(t) = ∫_A ∫₀^{min(t, s⁺(n(q)))} |J(n(q), τ)| dτ dμ_Σ(q)` on the
/// grid, with the patch `A` of `sigma`.
pub fn lorentzian_quadrature(
    metric: &MetricField,
    sigma: &Hypersurface,
    grid: &[f64],
    config: &VolumeConfig,
) -> Result<LorentzQuadrature> {
    check_grid(grid)?;
    let t_max = *grid.last().unwrap();
    let n = metric.dim();
    let samples = sigma.normal_bundle_sample(metric, config.patch_nodes)?;
    let bundle = if config.clip_at_cut {
        Some(NormalBundle::new(metric, sigma, config.search)?)
    } else {
        None
    };
    type Ray = (GeodesicSolution, f64, f64);
    let rays: Vec<Result<Ray>> = samples
        .par_iter()
        .map(|s| {
            let frame = normal_jacobian(metric, sigma, &s.foot, t_max, &config.control)?;
            let reach = frame.solution.t_end();
            let cut = match &bundle {
                Some(b) => b.cut(&s.params, t_max)?.estimate,
                None => f64::INFINITY,
            };
            Ok((frame.solution, cut, reach))
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    let mut shells = vec![0.0; grid.len()];
    let mut flags = Vec::new();
    let mut feet = Vec::new();
    for (s, ray) in samples.iter().zip(rays) {
        let (sol, cut, reach) = ray?;
        for (k, &t) in grid.iter().enumerate() {
            let end = t.min(cut).min(reach);
            if end < t.min(cut) - 1e-9 && sol.termination != Termination::ReachedT && flags.len() < 16 {
                flags.push(format!(
                    "normal geodesic from {:?} stops at {reach:.6} before t = {t:.6}",
                    s.foot
                ));
            }
            if end > 0.0 {
                values[k] += s.area_weight * sol.accumulated(end)?;
            }
            if t < cut && t <= reach {
                shells[k] += s.area_weight * sol.jacobian(metric, t)?.abs();
            }
        }
        feet.push(FootRecord {
            params: s.params.clone(),
            foot: s.foot[..n].to_vec(),
            weight: s.area_weight,
            cut,
            reach,
        });
    }
    flags.dedup();
    let patch_area = samples.iter().map(|s| s.area_weight).sum();
    Ok(LorentzQuadrature {
        series: VolumeSeries {
            label: format!("vol B_A^+(t) [{}]", metric.label),
            method: VolumeMethod::Quadrature,
            grid: grid.to_vec(),
            values,
            errors: vec![config.quadrature_tolerance; grid.len()],
            flags,
        },
        shell_areas: shells,
        patch_area,
        feet,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(GeomError::invalid("empty parameter grid"));
    }
    if grid.iter().any(|t| !(*t >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeomError::invalid(
            "parameter grid must be nonnegative and strictly increasing",
        ));
    }
    Ok(())
}

fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Accumulate Monte Carlo estimates `V_box · mean(1_{in} ρ)` per grid node.
fn mc_series(
    label: String,
    grid: &[f64],
    box_volume: f64,
    samples: usize,
    hits: &[(f64, f64)],
    flags: Vec<String>,
) -> VolumeSeries {
    // hits: (parameter at which the point enters the ball, density)
    let mut values = Vec::with_capacity(grid.len());
    let mut errors = Vec::with_capacity(grid.len());
    let nf = samples as f64;
    for &t in grid {
        let (mut s1, mut s2) = (0.0, 0.0);
        for &(enter, rho) in hits {
            if enter < t {
                s1 += rho;
                s2 += rho * rho;
            }
        }
        let mean = s1 / nf;
        let var = (s2 / nf - mean * mean).max(0.0);
        values.push(box_volume * mean);
        errors.push(box_volume * (var / nf).sqrt());
    }
    VolumeSeries {
        label,
        method: VolumeMethod::MonteCarlo,
        grid: grid.to_vec(),
        values,
        errors,
        flags,
    }
}

/// Monte Carlo `vol B_A^+(t)`: box sampling around the reach of the normal
/// geodesics from `A`, membership by the time-separation search, density
/// `√|det g|`.
pub fn lorentzian_monte_carlo(
    metric: &MetricField,
    sigma: &Hypersurface,
    grid: &[f64],
    config: &VolumeConfig,
) -> Result<VolumeSeries> {
    check_grid(grid)?;
    let n = metric.dim();
    let t_max = *grid.last().unwrap();
    let bundle = NormalBundle::new(metric, sigma, config.search)?;
    let (mut lo, mut hi) = bundle.reach(t_max, true);
    for i in 0..n {
        let pad = 0.05 * (hi[i] - lo[i]).max(1e-3);
        lo[i] = (lo[i] - pad).max(metric.chart.lower[i]);
        hi[i] = (hi[i] + pad).min(metric.chart.upper[i]);
    }
    let box_volume: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
    let batches = config.mc_samples.div_ceil(config.mc_batch.max(1));
    type Batch = (Vec<(f64, f64)>, usize);
    let per_batch: Vec<Result<Batch>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(config.seed, b as u64);
            let count = config.mc_batch.min(config.mc_samples - b * config.mc_batch);
            let mut hits = Vec::new();
            let mut provisional = 0;
            for _ in 0..count {
                let p: Vec<f64> = (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()).collect();
                if !bundle.is_future(&p) {
                    continue;
                }
                let est = bundle.separation(&p)?;
                if est.lower_bound_only {
                    provisional += 1;
                }
                if est.tau > 0.0 && !est.params.is_empty() && sigma.patch.contains(&est.params, 1e-9) {
                    let rho = linalg::determinant(&metric.value(&p), n).abs().sqrt();
                    hits.push((est.tau, rho));
                }
            }
            Ok((hits, provisional))
        })
        .collect();
    let mut hits = Vec::new();
    let mut provisional = 0;
    for r in per_batch {
        let (h, p) = r?;
        hits.extend(h);
        provisional += p;
    }
    let mut flags = vec![format!("sampling box {lo:?} .. {hi:?}")];
    if provisional > 0 {
        flags.push(format!("{provisional} samples with lower-bound-only separation"));
    }
    Ok(mc_series(
        format!("vol B_A^+(t) [{}]", metric.label),
        grid,
        box_volume,
        config.mc_samples,
        &hits,
        flags,
    ))
}

/// Unit directions of a product rule on `S^{n−1}` with weights summing to
/// the sphere area.
pub fn sphere_rule(n: usize, nodes: usize) -> Vec<(Vector, f64)> {
    let nodes = nodes.max(4);
    match n {
        2 => (0..nodes)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
                ([a.cos(), a.sin(), 0.0, 0.0], 2.0 * PI / nodes as f64)
            })
            .collect(),
        3 => {
            let m = nodes.div_ceil(2);
            let mut out = Vec::new();
            for (z, wz) in gauss_legendre_on(m, -1.0, 1.0) {
                let rho = (1.0 - z * z).sqrt();
                for k in 0..nodes {
                    let a = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
                    out.push(([rho * a.cos(), rho * a.sin(), z, 0.0], wz * 2.0 * PI / nodes as f64));
                }
            }
            out
        }
        _ => {
            // Gauss rule in the last coordinate, recursive on the rest.
            let m = nodes.div_ceil(2);
            let mut out = Vec::new();
            for (z, wz) in gauss_legendre_on(m, -1.0, 1.0) {
                let rho = (1.0 - z * z).sqrt();
                let jac = rho.powi(n as i32 - 3);
                for (u, wu) in sphere_rule(n - 1, nodes) {
                    let mut v = [0.0; MAX_DIM];
                    for i in 0..n - 1 {
                        v[i] = rho * u[i];
                    }
                    v[n - 1] = z;
                    out.push((v, wz * wu * jac));
                }
            }
            out
        }
    }
}

/// Per-direction Riemannian polar data.
#[derive(Debug, Clone, Serialize)]
pub struct PolarRay {
    pub direction: Vec<f64>,
    pub weight: f64,
    /// First zero of the radial Jacobian (cut estimate) or the chart exit.
    pub cut: f64,
    pub reach: f64,
    pub clipped_by_chart: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarQuadrature {
    pub series: VolumeSeries,
    pub rays: Vec<PolarRay>,
}

/// `g`-orthonormal frame at `p` from the coordinate basis.
fn orthonormal_frame(metric: &MetricField, p: &[f64]) -> Result<Vec<Vector>> {
    let n = metric.dim();
    let g = metric.eval(p)?;
    let basis: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = [0.0; MAX_DIM];
            e[i] = 1.0;
            e
        })
        .collect();
    linalg::gram_schmidt(&g, n, &basis, 1e-14).ok_or_else(|| GeomError::SingularMetric { point: p.to_vec() })
}

fn first_jacobian_zero(metric: &MetricField, sol: &GeodesicSolution) -> Result<Option<f64>> {
    let Some(&idx) = sol.flagged.first() else {
        return Ok(None);
    };
    let times = sol.times();
    let (mut a, mut b) = (times[idx - 1], times[idx]);
    let ja = sol.jacobian(metric, a)?;
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if sol.jacobian(metric, m)?.signum() == ja.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Polar quadrature of `vol B_p(r)`: each radial ray contributes
/// `∫₀^{min(r, cut)} |J| ds`, with the cut estimated by the first zero of
/// the radial Jacobian and rays stopped at the chart boundary (flagged).
pub fn riemannian_quadrature(
    metric: &MetricField,
    p: &[f64],
    grid: &[f64],
    config: &VolumeConfig,
) -> Result<PolarQuadrature> {
    check_grid(grid)?;
    if metric.signature.is_lorentzian() {
        return Err(GeomError::invalid("Riemannian ball volume needs a Riemannian metric"));
    }
    let n = metric.dim();
    let r_max = *grid.last().unwrap();
    let frame = orthonormal_frame(metric, p)?;
    let rule = sphere_rule(n, config.angular_nodes);
    let rays: Vec<Result<(GeodesicSolution, PolarRay)>> = rule
        .par_iter()
        .map(|(omega, w)| {
            let mut v = vec![0.0; n];
            for (a, e) in frame.iter().enumerate() {
                for k in 0..n {
                    v[k] += omega[a] * e[k];
                }
            }
            let sol = polar_ray(metric, p, &v, r_max, &config.control)?;
            let reach = sol.t_end();
            let zero = first_jacobian_zero(metric, &sol)?;
            let clipped = sol.termination != Termination::ReachedT && zero.is_none_or(|z| z > reach);
            let cut = zero.unwrap_or(f64::INFINITY).min(reach);
            Ok((
                sol,
                PolarRay {
                    direction: v,
                    weight: *w,
                    cut,
                    reach,
                    clipped_by_chart: clipped,
                },
            ))
        })
        .collect();
    let mut values = vec![0.0; grid.len()];
    let mut out_rays = Vec::with_capacity(rays.len());
    let mut clipped = 0;
    for ray in rays {
        let (sol, info) = ray?;
        for (k, &r) in grid.iter().enumerate() {
            let end = r.min(info.cut);
            if end > 0.0 {
                values[k] += info.weight * sol.accumulated(end)?;
            }
        }
        if info.clipped_by_chart && info.reach < r_max {
            clipped += 1;
        }
        out_rays.push(info);
    }
    let mut flags = Vec::new();
    if clipped > 0 {
        flags.push(format!(
            "{clipped} of {} rays clipped by the chart boundary",
            out_rays.len()
        ));
    }
    Ok(PolarQuadrature {
        series: VolumeSeries {
            label: format!("vol B_p(r) [{}]", metric.label),
            method: VolumeMethod::Quadrature,
            grid: grid.to_vec(),
            values,
            errors: vec![config.quadrature_tolerance; grid.len()],
            flags,
        },
        rays: out_rays,
    })
}

/// Monte Carlo `vol B_p(r)` with the shooting distance, seeded by the
/// closest polar ray node.
pub fn riemannian_monte_carlo(
    metric: &MetricField,
    p: &[f64],
    grid: &[f64],
    config: &VolumeConfig,
) -> Result<VolumeSeries> {
    check_grid(grid)?;
    let n = metric.dim();
    let r_max = *grid.last().unwrap();
    let frame = orthonormal_frame(metric, p)?;
    let rule = sphere_rule(n, config.angular_nodes.min(32));
    let seeds: Vec<GeodesicSolution> = rule
        .par_iter()
        .map(|(omega, _)| {
            let mut v = vec![0.0; n];
            for (a, e) in frame.iter().enumerate() {
                for k in 0..n {
                    v[k] += omega[a] * e[k];
                }
            }
            polar_ray(metric, p, &v, r_max, &config.control)
        })
        .collect::<Result<_>>()?;
    // (position, initial velocity reaching it) at every node of the seed rays.
    let anchors: Vec<(Vec<f64>, Vec<f64>)> = seeds
        .iter()
        .flat_map(|s| {
            let v0 = s.node(0).velocity;
            s.nodes()
                .into_iter()
                .map(move |node| (node.position, v0.iter().map(|v| v * node.t).collect()))
        })
        .collect();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (x, _) in &anchors {
        for i in 0..n {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    for i in 0..n {
        let pad = 0.05 * (hi[i] - lo[i]);
        lo[i] = (lo[i] - pad).max(metric.chart.lower[i]);
        hi[i] = (hi[i] + pad).min(metric.chart.upper[i]);
    }
    let box_volume: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
    let fast = StepControl::fixed(0.02);
    let batches = config.mc_samples.div_ceil(config.mc_batch.max(1));
    let per_batch: Vec<(Vec<(f64, f64)>, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(config.seed, b as u64);
            let count = config.mc_batch.min(config.mc_samples - b * config.mc_batch);
            let mut hits = Vec::new();
            let mut failures = 0;
            for _ in 0..count {
                let q: Vec<f64> = (0..n).map(|i| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()).collect();
                // Closest ray node gives the initial velocity guess.
                let guess = anchors
                    .iter()
                    .min_by(|a, b| dist2(&a.0, &q).total_cmp(&dist2(&b.0, &q)))
                    .map(|a| a.1.clone())
                    .unwrap_or_else(|| (0..n).map(|i| q[i] - p[i]).collect());
                let d = match shoot(metric, p, &q, Some(&guess), &fast) {
                    Ok(w) => metric.norm_sq(p, &w).map(|s| s.max(0.0).sqrt()),
                    Err(_) => riemannian_distance(metric, p, &q, &fast),
                };
                match d {
                    Ok(d) if d < r_max => {
                        let rho = linalg::determinant(&metric.value(&q), n).abs().sqrt();
                        hits.push((d, rho));
                    }
                    Ok(_) => {}
                    Err(_) => failures += 1,
                }
            }
            (hits, failures)
        })
        .collect();
    let mut hits = Vec::new();
    let mut failures = 0;
    for (h, f) in per_batch {
        hits.extend(h);
        failures += f;
    }
    let mut flags = vec![format!("sampling box {lo:?} .. {hi:?}")];
    if failures > 0 {
        flags.push(format!("{failures} samples without a shooting solution"));
    }
    Ok(mc_series(
        format!("vol B_p(r) [{}]", metric.label),
        grid,
        box_volume,
        config.mc_samples,
        &hits,
        flags,
    ))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `area(A) · vol_{κ,β}B_B^+(t)/area(B)` on the grid.
pub fn lorentz_model_series(model: &ComparisonModel, grid: &[f64], area: f64) -> VolumeSeries {
    VolumeSeries {
        label: format!("model(kappa={}, beta={}, n={})", model.kappa, model.beta, model.n),
        method: VolumeMethod::ClosedForm,
        grid: grid.to_vec(),
        values: grid.iter().map(|t| area * model.ball_volume_normalized(*t)).collect(),
        errors: vec![crate::models::VOLUME_QUAD_TOL; grid.len()],
        flags: Vec::new(),
    }
}

/// `vol_κ B^κ(r)` on the grid.
pub fn riemannian_model_series(kappa: f64, n: usize, grid: &[f64]) -> VolumeSeries {
    VolumeSeries {
        label: format!("constant curvature {kappa}, n = {n}"),
        method: VolumeMethod::ClosedForm,
        grid: grid.to_vec(),
        values: grid.iter().map(|r| riemannian_model_volume(kappa, n, *r)).collect(),
        errors: vec![1e-12; grid.len()],
        flags: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub numerator: VolumeSeries,
    pub denominator: VolumeSeries,
    /// Grid nodes where the denominator is positive.
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Grid nodes dropped because the denominator vanished.
    pub dropped: Vec<f64>,
    pub tol_mono: f64,
    /// `max (r_{i+1} − r_i)/r_i` over adjacent pairs.
    pub worst_violation: f64,
    /// Grid value at which the worst adjacent increase starts.
    pub worst_at: Option<f64>,
    pub nonincreasing: bool,
}

impl RatioReport {
    /// Relative spread `(max − min)/max` of the ratios.
    pub fn spread(&self) -> f64 {
        let max = self.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            (max - min) / max
        } else {
            0.0
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,numerator,denominator,ratio\n");
        for (i, t) in self.grid.iter().enumerate() {
            let k = self.numerator.grid.iter().position(|g| g == t).unwrap_or(i);
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                t, self.numerator.values[k], self.denominator.values[k], self.ratios[i]
            ));
        }
        out
    }
}

/// Ratio of two series on a common grid with the monotonicity verdict.
pub fn ratio_series(numerator: &VolumeSeries, denominator: &VolumeSeries, tol_mono: f64) -> Result<RatioReport> {
    if numerator.grid.len() != denominator.grid.len()
        || numerator
            .grid
            .iter()
            .zip(&denominator.grid)
            .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
    {
        return Err(GeomError::invalid("ratio series need a common grid"));
    }
    let mut grid = Vec::new();
    let mut ratios = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..numerator.grid.len() {
        if denominator.values[i] > 0.0 {
            grid.push(numerator.grid[i]);
            ratios.push(numerator.values[i] / denominator.values[i]);
        } else {
            dropped.push(numerator.grid[i]);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    for i in 1..ratios.len() {
        let v = (ratios[i] - ratios[i - 1]) / ratios[i - 1].abs().max(f64::MIN_POSITIVE);
        if v > worst {
            worst = v;
            worst_at = Some(grid[i - 1]);
        }
    }
    if ratios.len() < 2 {
        worst = 0.0;
    }
    Ok(RatioReport {
        numerator: numerator.clone(),
        denominator: denominator.clone(),
        grid,
        ratios,
        dropped,
        tol_mono,
        nonincreasing: worst <= tol_mono,
        worst_violation: worst,
        worst_at,
    })
}

/// Uniform grid of `count` nodes on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![b];
    }
    (0..count)
        .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::metric::dsl::builtin;

    fn doc(name: &str, params: &[(&str, f64)]) -> crate::metric::dsl::MetricDocument {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        builtin(name, &p).unwrap()
    }

    #[test]
    fn sphere_rules_integrate_area() {
        for n in [2, 3] {
            let total: f64 = sphere_rule(n, 12).iter().map(|(_, w)| w).sum();
            assert!((total - crate::models::unit_sphere_area(n)).abs() < 1e-10, "n = {n}");
        }
        let total: f64 = sphere_rule(4, 32).iter().map(|(_, w)| w).sum();
        assert!((total / crate::models::unit_sphere_area(4) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn flat_disk_area() {
        let d = doc("euclidean2", &[]);
        let q = riemannian_quadrature(&d.metric, &[0.0, 0.0], &[0.05, 1.0], &VolumeConfig::default()).unwrap();
        assert!((q.series.values[1] - PI).abs() < 0.005 * PI);
        assert!((q.series.values[0] / (PI * 0.0025) - 1.0).abs() < 0.01);
    }

    #[test]
    fn model_lorentz_volume_matches_closed_form() {
        let d = doc("model", &[("kappa", -1.0), ("beta", 0.5)]);
        let model = d.model.unwrap();
        let cfg = VolumeConfig {
            patch_nodes: 4,
            clip_at_cut: false,
            ..VolumeConfig::default()
        };
        let grid = [1e-3, 0.5, 1.0];
        let q = lorentzian_quadrature(&d.metric, d.sigma.as_ref().unwrap(), &grid, &cfg).unwrap();
        for (k, t) in grid.iter().enumerate() {
            let expected = model.ball_volume_normalized(*t);
            assert!((q.series.values[k] / q.patch_area - expected).abs() < 1e-4, "t = {t}");
        }
    }

    #[test]
    fn ratio_verdicts() {
        let mk = |values: Vec<f64>| VolumeSeries {
            label: "s".into(),
            method: VolumeMethod::ClosedForm,
            grid: vec![1.0, 2.0, 3.0],
            values,
            errors: vec![0.0; 3],
            flags: vec![],
        };
        let a = mk(vec![1.0, 2.0, 3.0]);
        let same = ratio_series(&a, &a, 1e-3).unwrap();
        assert!(same.nonincreasing && same.spread() < 1e-15);
        let bumped = ratio_series(&mk(vec![1.0, 2.0, 3.3]), &a, 1e-3).unwrap();
        assert!(!bumped.nonincreasing);
        assert_eq!(bumped.worst_at, Some(2.0));
        let dropped = ratio_series(&a, &mk(vec![0.0, 1.0, 1.0]), 1e-3).unwrap();
        assert_eq!(dropped.dropped, vec![1.0]);
    }
}
