//! Smooth approximation of `C^{1,1}` metrics by componentwise convolution,
//! the `d_h` distance, lightcone-nested inner approximations, and the
//! degradation checks across an `ε`-family.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geodesic::{integrate_flow, FlowSpec, StepControl};
use crate::hypersurface::Hypersurface;
use crate::linalg::{self, Matrix, MAX_DIM, ZERO_MAT};
use crate::metric::sampler::{halton, unit_directions};
use crate::metric::source::{ComponentSource, MetricJet};
use crate::metric::{check_ricci_bound, BoundMode, ChartDomain, Locus, MetricField, Smoothness};
use crate::quadrature::{adaptive_simpson, gauss_legendre_on};

/// Gauss-Legendre nodes per kernel axis (per piece when split at an
/// interface).
pub const DEFAULT_KERNEL_ORDER: usize = 16;

/// Unnormalized bump `exp(−1/(1−s²))` on `(−1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| adaptive_simpson(&bump, -1.0, 1.0, 1e-15))
}

/// One-dimensional kernel profile `ρ₁(s)`, supported on `[−1, 1]` with unit
/// mass. The `n`-dimensional kernel is the product `ρ₁(y₁)⋯ρ₁(yₙ)`.
pub fn kernel(s: f64) -> f64 {
    bump(s) / bump_mass()
}

/// Discrete kernel rule on `[−1, 1]`, split at `split` when given, with
/// weights renormalized to unit mass.
pub fn kernel_rule(order: usize, split: Option<f64>) -> Vec<(f64, f64)> {
    let pieces: Vec<(f64, f64)> = match split {
        Some(s) if s > -1.0 && s < 1.0 => vec![(-1.0, s), (s, 1.0)],
        _ => vec![(-1.0, 1.0)],
    };
    let mut rule: Vec<(f64, f64)> = pieces
        .iter()
        .flat_map(|&(a, b)| gauss_legendre_on(order, a, b))
        .map(|(s, w)| (s, w * kernel(s)))
        .collect();
    let mass: f64 = rule.iter().map(|(_, w)| w).sum();
    for node in &mut rule {
        node.1 /= mass;
    }
    rule
}

/// `(ζg) ∗ ρ_r`: componentwise convolution with the product kernel of radius
/// `r`; the cutoff is realized by restricting the chart to points whose
/// kernel window lies inside the source chart.
pub struct MollifiedSource {
    base: MetricField,
    radius: f64,
    order: usize,
}

impl fmt::Debug for MollifiedSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MollifiedSource")
            .field("base", &self.base.label)
            .field("radius", &self.radius)
            .field("order", &self.order)
            .finish()
    }
}

impl MollifiedSource {
    fn axis_rules(&self, x: &[f64]) -> Vec<Vec<(f64, f64)>> {
        let n = self.base.dim();
        (0..n)
            .map(|axis| {
                let mut split = None;
                let mut order = self.order;
                for locus in self.base.loci() {
                    match locus {
                        Locus::Coordinate { axis: a, value } if *a == axis => {
                            // y = x − r s crosses the locus at s = (x − value)/r.
                            let s = (x[axis] - value) / self.radius;
                            if s.abs() < 1.0 {
                                split = Some(s);
                            }
                        }
                        Locus::Sphere { .. } => order = 2 * self.order,
                        _ => {}
                    }
                }
                kernel_rule(order, split)
            })
            .collect()
    }

    fn accumulate<T>(&self, x: &[f64], mut visit: impl FnMut(&[f64], f64) -> Option<T>) -> Option<()> {
        let n = self.base.dim();
        let rules = self.axis_rules(x);
        let mut idx = vec![0usize; n];
        let mut y = [0.0; MAX_DIM];
        loop {
            let mut w = 1.0;
            for a in 0..n {
                let (s, wa) = rules[a][idx[a]];
                y[a] = x[a] - self.radius * s;
                w *= wa;
            }
            visit(&y[..n], w)?;
            let mut a = 0;
            loop {
                if a == n {
                    return Some(());
                }
                idx[a] += 1;
                if idx[a] < rules[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }
}

impl ComponentSource for MollifiedSource {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> Matrix {
        let n = self.dim();
        let mut g = ZERO_MAT;
        self.accumulate(x, |y, w| {
            let gy = self.base.value(y);
            for i in 0..n {
                for j in 0..n {
                    g[i][j] += w * gy[i][j];
                }
            }
            Some(())
        });
        g
    }

    fn has_jets(&self) -> bool {
        true
    }

    fn jet(&self, x: &[f64], second: bool) -> Option<MetricJet> {
        let n = self.dim();
        let mut out = MetricJet::zero(n);
        self.accumulate(x, |y, w| {
            let j = self.base.jet(y, second).ok()?;
            for i in 0..n {
                for k in 0..n {
                    out.g[i][k] += w * j.g[i][k];
                    for a in 0..n {
                        out.dg[a][i][k] += w * j.dg[a][i][k];
                        if second {
                            for b in 0..n {
                                out.ddg[a][b][i][k] += w * j.ddg[a][b][i][k];
                            }
                        }
                    }
                }
            }
            Some(())
        })?;
        Some(out)
    }
}

/// Smooth approximation of `metric` with kernel radius `radius`. The result
/// lives on the source chart shrunk by `radius` on every side.
pub fn mollify_metric(metric: &MetricField, radius: f64, order: usize) -> Result<MetricField> {
    let n = metric.dim();
    if !(radius > 0.0) {
        return Err(GeomError::invalid("kernel radius must be positive"));
    }
    let lower: Vec<f64> = metric.chart.lower.iter().map(|l| l + radius).collect();
    let upper: Vec<f64> = metric.chart.upper.iter().map(|u| u - radius).collect();
    if (0..n).any(|i| upper[i] <= lower[i]) {
        return Err(GeomError::invalid(format!(
            "kernel radius {radius} exceeds the chart half-extent"
        )));
    }
    let chart = ChartDomain::new(lower, upper, metric.chart.names.clone())?;
    let source = MollifiedSource {
        base: metric.clone(),
        radius,
        order: order.max(2),
    };
    MetricField::new(
        chart,
        metric.signature.clone(),
        Smoothness::Smooth,
        Arc::new(source),
        format!("{} * rho({radius:.4e})", metric.label),
    )
}

/// `g + λh` with `h` the euclidean metric of the chart.
#[derive(Debug)]
pub struct ShiftedSource {
    inner: Arc<dyn ComponentSource>,
    lambda: f64,
}

impl ComponentSource for ShiftedSource {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> Matrix {
        let mut g = self.inner.value(x);
        for (i, row) in g.iter_mut().enumerate().take(self.dim()) {
            row[i] += self.lambda;
        }
        g
    }

    fn has_jets(&self) -> bool {
        self.inner.has_jets()
    }

    fn jet(&self, x: &[f64], second: bool) -> Option<MetricJet> {
        let mut j = self.inner.jet(x, second)?;
        for i in 0..self.dim() {
            j.g[i][i] += self.lambda;
        }
        Some(j)
    }
}

/// Inner approximation `ǧ = g_smooth + λh` with narrower lightcones.
pub fn inner_approximation(smooth: &MetricField, lambda: f64) -> Result<MetricField> {
    if !smooth.signature.is_lorentzian() {
        return Err(GeomError::invalid("inner approximation needs a Lorentzian metric"));
    }
    if !(lambda >= 0.0) {
        return Err(GeomError::invalid("λ must be nonnegative"));
    }
    let source = ShiftedSource {
        inner: smooth.source().clone(),
        lambda,
    };
    let mut out = MetricField::new(
        smooth.chart.clone(),
        smooth.signature.clone(),
        smooth.smoothness.clone(),
        Arc::new(source),
        format!("{} + {lambda:.4e} h", smooth.label),
    )?;
    out.mode = smooth.mode;
    Ok(out)
}

/// Axis-aligned sample region with a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub per_axis: usize,
}

impl Region {
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let k = self.per_axis.max(2);
        let axes: Vec<Vec<f64>> = (0..self.lower.len())
            .map(|a| {
                (0..k)
                    .map(|i| self.lower[a] + (self.upper[a] - self.lower[a]) * i as f64 / (k - 1) as f64)
                    .collect()
            })
            .collect();
        crate::metric::cartesian(&axes)
    }

    /// `count` Halton points in the region.
    pub fn halton_points(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.lower.len();
        (1..=count as u64)
            .map(|i| {
                let u = halton(i, n);
                (0..n)
                    .map(|a| self.lower[a] + (self.upper[a] - self.lower[a]) * u[a])
                    .collect()
            })
            .collect()
    }

    fn inside(&self, chart: &ChartDomain) -> bool {
        (0..self.lower.len()).all(|a| self.lower[a] >= chart.lower[a] && self.upper[a] <= chart.upper[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub value: f64,
    pub witness_point: Vec<f64>,
    pub points: usize,
}

/// `d_h(g₁, g₂) = sup |g₁(X,Y) − g₂(X,Y)| / (‖X‖_h ‖Y‖_h)` over the sample
/// points, `h` euclidean. The supremum over direction pairs at a point is
/// the spectral norm of `g₁ − g₂`, computed exactly.
pub fn metric_distance_dh(g1: &MetricField, g2: &MetricField, points: &[Vec<f64>]) -> Result<DistanceReport> {
    if points.is_empty() {
        return Err(GeomError::EmptySample("d_h needs at least one sample point".into()));
    }
    if g1.dim() != g2.dim() {
        return Err(GeomError::invalid("metrics live on charts of different dimension"));
    }
    let n = g1.dim();
    let values: Vec<Result<f64>> = points
        .par_iter()
        .map(|p| {
            let a = g1.eval(p)?;
            let b = g2.eval(p)?;
            let mut d = ZERO_MAT;
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = a[i][j] - b[i][j];
                }
            }
            Ok(linalg::sym_eigenvalues(&d, n)
                .iter()
                .fold(0.0_f64, |m, e| m.max(e.abs())))
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(DistanceReport {
        value: best.0,
        witness_point: points[best.1].clone(),
        points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub samples: usize,
    pub violations: usize,
    /// `max g(X,X)/|X|²` over `ǧ`-null samples (negative when nested).
    pub worst_margin: f64,
    pub witness_point: Vec<f64>,
    pub witness_vector: Vec<f64>,
}

/// Sample `ǧ`-null vectors `X = a∂₀ + w` (spatial unit `w`, both roots `a`)
/// at the points and count those that are not `g`-timelike.
pub fn cone_nesting(
    original: &MetricField,
    inner: &MetricField,
    points: &[Vec<f64>],
    spatial_directions: usize,
) -> Result<NestingReport> {
    let n = original.dim();
    if points.is_empty() {
        return Err(GeomError::EmptySample("cone nesting needs sample points".into()));
    }
    let spatial: Vec<[f64; MAX_DIM]> = if n == 2 {
        vec![[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]]
    } else {
        unit_directions(n - 1, spatial_directions.max(1))
    };
    struct Local {
        samples: usize,
        violations: usize,
        worst: f64,
        point: Vec<f64>,
        vector: Vec<f64>,
    }
    let locals: Vec<Result<Local>> = points
        .par_iter()
        .map(|p| {
            let gc = inner.eval(p)?;
            let g = original.eval(p)?;
            let mut local = Local {
                samples: 0,
                violations: 0,
                worst: f64::NEG_INFINITY,
                point: p.clone(),
                vector: Vec::new(),
            };
            if gc[0][0] >= 0.0 {
                return Err(GeomError::invalid(format!(
                    "∂₀ is not timelike for the inner metric at {p:?}"
                )));
            }
            for s in &spatial {
                let mut w = [0.0; MAX_DIM];
                w[1..n].copy_from_slice(&s[..n - 1]);
                let b: f64 = (1..n).map(|j| gc[0][j] * w[j]).sum();
                let c = linalg::bilinear(&gc, n, &w, &w);
                let disc = b * b - gc[0][0] * c;
                if disc < 0.0 {
                    continue;
                }
                for root in [(-b + disc.sqrt()) / gc[0][0], (-b - disc.sqrt()) / gc[0][0]] {
                    let mut x = w;
                    x[0] = root;
                    let q = linalg::bilinear(&g, n, &x, &x) / linalg::dot(n, &x, &x);
                    local.samples += 1;
                    if q >= 0.0 {
                        local.violations += 1;
                    }
                    if q > local.worst {
                        local.worst = q;
                        local.vector = x[..n].to_vec();
                    }
                }
            }
            Ok(local)
        })
        .collect();
    let mut report = NestingReport {
        samples: 0,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        witness_point: Vec::new(),
        witness_vector: Vec::new(),
    };
    for l in locals {
        let l = l?;
        report.samples += l.samples;
        report.violations += l.violations;
        if l.worst > report.worst_margin {
            report.worst_margin = l.worst;
            report.witness_point = l.point;
            report.witness_vector = l.vector;
        }
    }
    Ok(report)
}

/// Points whose null-vector samples give at least `samples` cone samples.
pub fn nesting_points(region: &Region, samples: usize, spatial_directions: usize) -> Vec<Vec<f64>> {
    let n = region.lower.len();
    let per_point = 2 * if n == 2 { 2 } else { spatial_directions.max(1) };
    region.halton_points(samples.div_ceil(per_point))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    /// Descending `ε` list.
    pub eps_list: Vec<f64>,
    pub kernel_order: usize,
    /// Verification region `K`.
    pub region: Region,
    pub kappa: f64,
    pub beta: f64,
    pub delta: f64,
    pub eta: f64,
    /// Euclidean bound `C` on timelike sample vectors.
    pub c_bound: f64,
    pub directions: usize,
    /// Geodesic horizon `T` of the ε-continuity check.
    pub horizon: f64,
    pub normals: usize,
    /// Foot-point nodes per patch axis for mean curvature.
    pub patch_grid: usize,
    pub nesting_samples: usize,
    pub nesting_directions: usize,
    /// Spacing of the second differences.
    pub second_difference_step: f64,
    /// Shrink the kernel radius until `d_h(g, ǧ_ε) < ε`.
    pub calibrate: bool,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            eps_list: vec![0.1, 0.05, 0.025],
            kernel_order: DEFAULT_KERNEL_ORDER,
            region: Region {
                lower: vec![-0.1, -0.25],
                upper: vec![0.6, 0.25],
                per_axis: 8,
            },
            kappa: 0.0,
            beta: 0.0,
            delta: 0.05,
            eta: 0.05,
            c_bound: 3.0,
            directions: 64,
            horizon: 1.0,
            normals: 10,
            patch_grid: 5,
            nesting_samples: 100_000,
            nesting_directions: 8,
            second_difference_step: 1e-2,
            calibrate: true,
        }
    }
}

/// Per-`ε` entry of an [`ApproxCheckReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsEntry {
    pub eps: f64,
    pub kernel_radius: f64,
    /// `λ = 2 d_h(g, g_ε)` of the inner approximation.
    pub lambda: f64,
    pub dh_member: f64,
    pub dh_inner: f64,
    pub c1_deviation: f64,
    pub second_difference: f64,
    /// `min Ric_ε(X,X) − (n−1)(κ−δ)` over `K` and the sampler.
    pub ricci_margin: f64,
    pub ricci_witness_point: Vec<f64>,
    pub ricci_witness_vector: Vec<f64>,
    pub mean_curvature_sup: f64,
    /// `β + η − sup_A H_ε`.
    pub mean_curvature_margin: f64,
    /// `sup_A |H_ε − H|`.
    pub mean_curvature_deviation: f64,
    pub nesting_samples: usize,
    pub nesting_violations: usize,
    pub geodesic_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCheckReport {
    pub source: String,
    pub kappa: f64,
    pub beta: f64,
    pub delta: f64,
    pub eta: f64,
    pub c_bound: f64,
    pub entries: Vec<EpsEntry>,
    /// `d_h(g, ǧ_ε) < ε` for every `ε`.
    pub dh_calibrated: bool,
    pub c1_strictly_decreasing: bool,
    /// Largest second difference over the family (the recorded uniform bound).
    pub second_difference_bound: f64,
    /// Largest `ε` below which (within the list) the Ricci margin is `≥ 0`.
    pub ricci_eps0: Option<f64>,
    pub mean_curvature_eps0: Option<f64>,
    pub nesting_violations: usize,
    /// Ratios of successive geodesic deviations.
    pub geodesic_ratios: Vec<f64>,
}

/// Largest `ε` of the (descending) list such that `pass` holds for it and
/// every smaller listed `ε`.
pub fn eps0(entries: &[EpsEntry], pass: impl Fn(&EpsEntry) -> bool) -> Option<f64> {
    let mut found = None;
    for e in entries.iter().rev() {
        if pass(e) {
            found = Some(e.eps);
        } else {
            break;
        }
    }
    found
}

fn first_derivative_deviation(a: &MetricField, b: &MetricField, points: &[Vec<f64>]) -> Result<f64> {
    let n = a.dim();
    let devs: Vec<Result<f64>> = points
        .par_iter()
        .map(|p| {
            let ja = a.jet(p, false)?;
            let jb = b.jet(p, false)?;
            let mut m = 0.0_f64;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        m = m.max((ja.dg[k][i][j] - jb.dg[k][i][j]).abs());
                    }
                }
            }
            Ok(m)
        })
        .collect();
    devs.into_iter().try_fold(0.0_f64, |m, d| Ok(m.max(d?)))
}

/// Largest centered second difference of any component over the points.
pub fn max_second_difference(metric: &MetricField, points: &[Vec<f64>], h: f64) -> f64 {
    let n = metric.dim();
    points
        .par_iter()
        .map(|p| {
            let mut m = 0.0_f64;
            let at = |da: usize, sa: f64, db: usize, sb: f64| {
                let mut y = p.clone();
                y[da] += sa * h;
                y[db] += sb * h;
                metric.value(&y)
            };
            for a in 0..n {
                for b in a..n {
                    let (pp, pm, mp, mm) = (
                        at(a, 1.0, b, 1.0),
                        at(a, 1.0, b, -1.0),
                        at(a, -1.0, b, 1.0),
                        at(a, -1.0, b, -1.0),
                    );
                    for i in 0..n {
                        for j in 0..n {
                            let d = (pp[i][j] - pm[i][j] - mp[i][j] + mm[i][j]) / (4.0 * h * h);
                            m = m.max(d.abs());
                        }
                    }
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

/// Halton feet on the patch with a rapidity in `[−0.4, 0.4]` each.
fn normal_params(sigma: &Hypersurface, count: usize) -> Vec<(Vec<f64>, f64)> {
    let m = sigma.patch.dim();
    (1..=count as u64)
        .map(|i| {
            let u = halton(i, m + 1);
            let params = (0..m)
                .map(|a| sigma.patch.lower[a] + (sigma.patch.upper[a] - sigma.patch.lower[a]) * u[a])
                .collect();
            (params, 0.8 * (u[m] - 0.5))
        })
        .collect()
}

/// `sup` over sample vectors and `t ∈ [0, T]` of `‖γ̇^ε(t) − γ̇(t)‖` for
/// geodesics of both metrics with the same initial vector. The vectors are
/// unit normals boosted by a rapidity along the first tangent direction, so
/// that the sample is not confined to the normal geodesics.
fn geodesic_deviation(
    g: &MetricField,
    ge: &MetricField,
    sigma: &Hypersurface,
    count: usize,
    horizon: f64,
) -> Result<f64> {
    let n = g.dim();
    let control = StepControl::default();
    let devs: Vec<Result<f64>> = normal_params(sigma, count)
        .par_iter()
        .map(|(u, rapidity)| {
            let q = sigma.patch.point(u);
            let q = &q[..n];
            let normal = sigma.unit_normal(g, q)?;
            let tangent = sigma.tangent_frame(g, q, &normal)?;
            let v: Vec<f64> = (0..n)
                .map(|k| rapidity.cosh() * normal[k] + rapidity.sinh() * tangent[0][k])
                .collect();
            let a = integrate_flow(g, q, &v, &FlowSpec::default(), horizon, &control)?;
            let b = integrate_flow(ge, q, &v, &FlowSpec::default(), horizon, &control)?;
            let end = a.t_end().min(b.t_end());
            let mut m = 0.0_f64;
            for i in 0..=100 {
                let t = end * i as f64 / 100.0;
                let va = a.velocity(t)?;
                let vb = b.velocity(t)?;
                let d: f64 = (0..n).map(|k| (va[k] - vb[k]).powi(2)).sum::<f64>().sqrt();
                m = m.max(d);
            }
            Ok(m)
        })
        .collect();
    devs.into_iter().try_fold(0.0_f64, |m, d| Ok(m.max(d?)))
}

fn sup_mean_curvature(metric: &MetricField, sigma: &Hypersurface, per_axis: usize) -> Result<Vec<f64>> {
    let m = sigma.patch.dim();
    let k = per_axis.max(2);
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..k)
                .map(|i| {
                    sigma.patch.lower[a] + (sigma.patch.upper[a] - sigma.patch.lower[a]) * i as f64 / (k - 1) as f64
                })
                .collect()
        })
        .collect();
    crate::metric::cartesian(&axes)
        .iter()
        .map(|u| {
            let q = sigma.patch.point(u);
            sigma.mean_curvature(metric, &q[..metric.dim()])
        })
        .collect()
}

/// Build the `ε`-family of inner approximations `ǧ_ε = g_ε + λh` and run the
/// degradation checks on the verification region.
pub fn eps_family_checks(
    metric: &MetricField,
    sigma: &Hypersurface,
    config: &FamilyConfig,
) -> Result<ApproxCheckReport> {
    if config.eps_list.is_empty() {
        return Err(GeomError::invalid("empty ε list"));
    }
    if config.eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GeomError::invalid("ε list must be strictly descending"));
    }
    let grid = config.region.grid();
    let base_h = sup_mean_curvature(metric, sigma, config.patch_grid)?;
    let mut entries = Vec::new();
    for &eps in &config.eps_list {
        let mut radius = eps;
        let (member, dh_member) = loop {
            let member = mollify_metric(metric, radius, config.kernel_order)?;
            if !config.region.inside(&member.chart) {
                return Err(GeomError::invalid(format!(
                    "kernel radius {radius} too large for the verification region margin"
                )));
            }
            let d = metric_distance_dh(metric, &member, &grid)?.value;
            if !config.calibrate || 3.0 * d < eps || radius < 1e-6 * eps {
                break (member, d);
            }
            radius *= 0.5;
        };
        let lambda = 2.0 * dh_member;
        let inner = inner_approximation(&member, lambda)?;
        let dh_inner = metric_distance_dh(metric, &inner, &grid)?.value;
        let c1_deviation = first_derivative_deviation(metric, &inner, &grid)?;
        let second_difference = max_second_difference(&inner, &grid, config.second_difference_step);
        let ricci = check_ricci_bound(
            &inner,
            config.kappa - config.delta,
            &grid,
            config.directions,
            BoundMode::Timelike {
                c_bound: config.c_bound,
            },
            0.0,
        )?;
        let hs = sup_mean_curvature(&inner, sigma, config.patch_grid)?;
        let mean_curvature_sup = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_curvature_deviation = hs.iter().zip(&base_h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let points = nesting_points(&config.region, config.nesting_samples, config.nesting_directions);
        let nesting = cone_nesting(metric, &inner, &points, config.nesting_directions)?;
        let geodesic_deviation = geodesic_deviation(metric, &inner, sigma, config.normals, config.horizon)?;
        entries.push(EpsEntry {
            eps,
            kernel_radius: radius,
            lambda,
            dh_member,
            dh_inner,
            c1_deviation,
            second_difference,
            ricci_margin: ricci.min_margin,
            ricci_witness_point: ricci.witness_point,
            ricci_witness_vector: ricci.witness_vector,
            mean_curvature_sup,
            mean_curvature_margin: config.beta + config.eta - mean_curvature_sup,
            mean_curvature_deviation,
            nesting_samples: nesting.samples,
            nesting_violations: nesting.violations,
            geodesic_deviation,
        });
    }
    let geodesic_ratios = entries
        .windows(2)
        .filter(|w| w[1].geodesic_deviation > 1e-14)
        .map(|w| w[0].geodesic_deviation / w[1].geodesic_deviation)
        .collect();
    Ok(ApproxCheckReport {
        source: metric.label.clone(),
        kappa: config.kappa,
        beta: config.beta,
        delta: config.delta,
        eta: config.eta,
        c_bound: config.c_bound,
        dh_calibrated: entries.iter().all(|e| e.dh_inner < e.eps),
        c1_strictly_decreasing: entries.windows(2).all(|w| w[1].c1_deviation < w[0].c1_deviation),
        second_difference_bound: entries.iter().map(|e| e.second_difference).fold(0.0, f64::max),
        ricci_eps0: eps0(&entries, |e| e.ricci_margin >= 0.0),
        mean_curvature_eps0: eps0(&entries, |e| e.mean_curvature_margin >= 0.0),
        nesting_violations: entries.iter().map(|e| e.nesting_violations).sum(),
        geodesic_ratios,
        entries,
    })
}

/// Per-`ε` margins as CSV.
pub fn report_csv(report: &ApproxCheckReport) -> String {
    let mut out = String::from(
        "eps,kernel_radius,lambda,dh_member,dh_inner,c1_deviation,second_difference,ricci_margin,mean_curvature_sup,mean_curvature_margin,nesting_violations,geodesic_deviation\n",
    );
    for e in &report.entries {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}\n",
            e.eps,
            e.kernel_radius,
            e.lambda,
            e.dh_member,
            e.dh_inner,
            e.c1_deviation,
            e.second_difference,
            e.ricci_margin,
            e.mean_curvature_sup,
            e.mean_curvature_margin,
            e.nesting_violations,
            e.geodesic_deviation
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::metric::dsl::builtin;
    use crate::metric::source::ConstantSource;
    use crate::metric::Signature;

    fn lorentz_const(diag: &[f64]) -> MetricField {
        let n = diag.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0;
        MetricField::new(
            ChartDomain::boxed(&vec![-1.0; n], &vec![1.0; n]).unwrap(),
            Signature::Lorentzian { time_covector: c },
            Smoothness::Smooth,
            Arc::new(ConstantSource::diagonal(diag)),
            "const",
        )
        .unwrap()
    }

    #[test]
    fn kernel_has_unit_mass() {
        let mass: f64 = gauss_legendre_on(200, -1.0, 1.0)
            .iter()
            .map(|(s, w)| w * kernel(*s))
            .sum();
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        assert!(kernel(0.3) >= 0.0 && kernel(1.2) == 0.0);
    }

    #[test]
    fn constant_metric_is_unchanged() {
        let g = lorentz_const(&[-1.0, 2.0]);
        let ge = mollify_metric(&g, 0.1, 16).unwrap();
        let a = ge.eval(&[0.3, -0.2]).unwrap();
        assert!((a[0][0] + 1.0).abs() < 1e-12 && (a[1][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_components_are_unchanged() {
        let doc = r#"{"kind":"components","n":2,"box":[[-1,1],[-1,1]],"signature":"riemannian","components":["2 + 0.3*x0 - 0.1*x1","0.05*x0","1.5 + 0.2*x1"]}"#;
        let g = crate::metric::dsl::parse_metric_spec(doc).unwrap();
        let ge = mollify_metric(&g, 0.2, 16).unwrap();
        for p in [[0.1, 0.2], [-0.5, 0.7]] {
            let a = g.eval(&p).unwrap();
            let b = ge.eval(&p).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn c11_deviation_is_second_order() {
        let g = builtin("rw_c11", &BTreeMap::new()).unwrap().metric;
        let pts: Vec<Vec<f64>> = (0..=20).map(|i| vec![0.3 + 0.01 * i as f64, 0.0]).collect();
        let d1 = metric_distance_dh(&g, &mollify_metric(&g, 0.1, 16).unwrap(), &pts)
            .unwrap()
            .value;
        let d2 = metric_distance_dh(&g, &mollify_metric(&g, 0.05, 16).unwrap(), &pts)
            .unwrap()
            .value;
        let ratio = d1 / d2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn dh_of_diagonal_perturbation() {
        let a = lorentz_const(&[-1.0, 1.0]);
        let b = lorentz_const(&[-1.3, 1.0]);
        let pts = vec![vec![0.0, 0.0], vec![0.5, 0.5]];
        assert!((metric_distance_dh(&a, &b, &pts).unwrap().value - 0.3).abs() < 1e-14);
        assert_eq!(metric_distance_dh(&a, &a, &pts).unwrap().value, 0.0);
        assert!(metric_distance_dh(&a, &b, &[]).is_err());
    }

    #[test]
    fn minkowski_inner_cones_nest() {
        let g = lorentz_const(&[-1.0, 1.0, 1.0]);
        let inner = inner_approximation(&g, 0.1).unwrap();
        let region = Region {
            lower: vec![-0.5; 3],
            upper: vec![0.5; 3],
            per_axis: 3,
        };
        let pts = nesting_points(&region, 100_000, 8);
        let rep = cone_nesting(&g, &inner, &pts, 8).unwrap();
        assert!(rep.samples >= 100_000);
        assert_eq!(rep.violations, 0);
        let same = cone_nesting(&g, &inner_approximation(&g, 0.0).unwrap(), &pts[..10], 8).unwrap();
        assert!(same.violations > 0 && same.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn eps0_takes_the_passing_tail() {
        let mk = |eps: f64, margin: f64| EpsEntry {
            eps,
            kernel_radius: eps,
            lambda: 0.0,
            dh_member: 0.0,
            dh_inner: 0.0,
            c1_deviation: 0.0,
            second_difference: 0.0,
            ricci_margin: margin,
            ricci_witness_point: vec![],
            ricci_witness_vector: vec![],
            mean_curvature_sup: 0.0,
            mean_curvature_margin: 0.0,
            mean_curvature_deviation: 0.0,
            nesting_samples: 0,
            nesting_violations: 0,
            geodesic_deviation: 0.0,
        };
        let e = vec![mk(0.1, -1.0), mk(0.05, 0.1), mk(0.025, 0.2)];
        assert_eq!(eps0(&e, |x| x.ricci_margin >= 0.0), Some(0.05));
        let e = vec![mk(0.1, 1.0), mk(0.05, -0.1)];
        assert_eq!(eps0(&e, |x| x.ricci_margin >= 0.0), None);
    }
}
