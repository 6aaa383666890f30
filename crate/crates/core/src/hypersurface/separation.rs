//! Time separation from `Σ` by competitor search over normal geodesics, the
//! cut function, and membership in future balls `B_A^+(t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Hypersurface;
use crate::error::{GeomError, Result};
use crate::geodesic::{integrate_flow, normal_fields, FlowSpec, GeodesicSolution, StepControl, Termination};
use crate::linalg::{self, Matrix, ZERO_MAT};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Foot-point grid nodes per patch axis for the seed bundle.
    pub foot_grid: usize,
    /// Parameter length of the seed geodesics.
    pub horizon: f64,
    /// Step control for seed and refinement geodesics.
    pub control: StepControl,
    /// Number of distinct seeds refined per query.
    pub max_seeds: usize,
    pub max_newton: usize,
    /// Euclidean residual `|γ(s) − p|` accepted as a hit.
    pub residual_tol: f64,
    /// Competitors whose lengths differ by at most this are witnesses of
    /// the same maximum.
    pub witness_tol: f64,
    /// Tolerance of the cut predicate `τ_Σ(γ_v(t)) > t + tol_cut`.
    pub tol_cut: f64,
    /// Final bracket width of the cut bisection.
    pub cut_bracket: f64,
    /// Scan step of the cut predicate before bisection.
    pub cut_scan: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            foot_grid: 9,
            horizon: 3.0,
            control: StepControl::fixed(0.02),
            max_seeds: 3,
            max_newton: 25,
            residual_tol: 1e-10,
            witness_tol: 1e-3,
            tol_cut: 1e-3,
            cut_bracket: 1e-2,
            cut_scan: 0.05,
        }
    }
}

/// `τ_Σ(p)` estimate with its maximizing witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationEstimate {
    pub point: Vec<f64>,
    pub tau: f64,
    /// Patch parameters of the maximizing foot point (empty when `τ = 0`).
    pub params: Vec<f64>,
    pub foot: Vec<f64>,
    /// Set when the search may have missed a longer competitor.
    pub lower_bound_only: bool,
    /// Number of distinct foot points whose geodesics reach `p` with length
    /// within `witness_tol` of the maximum.
    pub witnesses: usize,
    /// Number of distinct orthogonal geodesics found reaching `p`.
    pub competitors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutHorizon {
    /// The cut predicate fired inside the bracket.
    Found,
    /// The predicate never fired up to the requested horizon.
    ExceedsHorizon,
    /// The geodesic left the chart first; the estimate is its exit time.
    TruncatedHorizon,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutRecord {
    pub params: Vec<f64>,
    pub foot: Vec<f64>,
    pub normal: Vec<f64>,
    pub estimate: f64,
    pub bracket: (f64, f64),
    pub horizon: CutHorizon,
    /// Longer competitor found at the upper end of the bracket.
    pub witness: Option<SeparationEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Interior,
    Sphere,
    Outside,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipResult {
    pub membership: Membership,
    pub estimate: SeparationEstimate,
    /// The underlying estimate is only a lower bound.
    pub provisional: bool,
}

#[derive(Debug, Clone)]
struct Ray {
    params: Vec<f64>,
    solution: GeodesicSolution,
}

/// Precomputed normal geodesics from a grid over the widened patch; serves
/// as the seed set for all separation queries on one `(M, Σ)` pair.
#[derive(Debug, Clone)]
pub struct NormalBundle<'a> {
    metric: &'a MetricField,
    sigma: &'a Hypersurface,
    pub config: SearchConfig,
    rays: Vec<Ray>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    spacing: Vec<f64>,
    future_sign: f64,
}

struct Hit {
    params: Vec<f64>,
    foot: Vec<f64>,
    s: f64,
}

impl<'a> NormalBundle<'a> {
    pub fn new(metric: &'a MetricField, sigma: &'a Hypersurface, config: SearchConfig) -> Result<Self> {
        let m = sigma.patch.dim();
        if m + 1 != metric.dim() {
            return Err(GeomError::Hypersurface(format!(
                "patch has {m} parameters, expected {}",
                metric.dim() - 1
            )));
        }
        let (lower, upper) = sigma.patch.widened(sigma.search_margin);
        let k = config.foot_grid.max(2);
        let axes: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                (0..k)
                    .map(|i| lower[a] + (upper[a] - lower[a]) * i as f64 / (k - 1) as f64)
                    .collect()
            })
            .collect();
        let spacing = (0..m).map(|a| (upper[a] - lower[a]) / (k - 1) as f64).collect();
        let grid = crate::metric::cartesian(&axes);
        let center: Vec<f64> = (0..m)
            .map(|a| 0.5 * (sigma.patch.lower[a] + sigma.patch.upper[a]))
            .collect();
        let c = sigma.patch.point(&center);
        let future_sign = sigma.normal_field(metric, &c[..metric.dim()])?.future_sign;
        let rays: Vec<Option<Ray>> = grid
            .par_iter()
            .map(|u| {
                let foot = sigma.patch.point(u);
                let x = &foot[..metric.dim()];
                if !metric.chart.contains(x) {
                    return None;
                }
                let normal = sigma.normal_field(metric, x).ok()?.normal;
                let solution = integrate_flow(
                    metric,
                    x,
                    &normal,
                    &FlowSpec::default(),
                    config.horizon,
                    &config.control,
                )
                .ok()?;
                Some(Ray {
                    params: u.clone(),
                    solution,
                })
            })
            .collect();
        let rays: Vec<Ray> = rays.into_iter().flatten().collect();
        if rays.is_empty() {
            return Err(GeomError::Hypersurface(
                "no normal geodesic of the search bundle could be integrated".into(),
            ));
        }
        Ok(NormalBundle {
            metric,
            sigma,
            config,
            rays,
            lower,
            upper,
            spacing,
            future_sign,
        })
    }

    pub fn metric(&self) -> &MetricField {
        self.metric
    }

    pub fn sigma(&self) -> &Hypersurface {
        self.sigma
    }

    /// Whether `p` lies strictly to the future of `Σ`.
    pub fn is_future(&self, p: &[f64]) -> bool {
        self.sigma.level(p) * self.future_sign > 0.0
    }

    /// Bounding box of the seed geodesics up to `t_max` (optionally only
    /// those with feet in `A`), used to size Monte Carlo sampling boxes.
    pub fn reach(&self, t_max: f64, patch_only: bool) -> (Vec<f64>, Vec<f64>) {
        let n = self.metric.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for ray in &self.rays {
            if patch_only && !self.sigma.patch.contains(&ray.params, 1e-12) {
                continue;
            }
            for node in ray.solution.nodes() {
                if node.t > t_max {
                    break;
                }
                for i in 0..n {
                    lo[i] = lo[i].min(node.position[i]);
                    hi[i] = hi[i].max(node.position[i]);
                }
            }
        }
        (lo, hi)
    }

    /// Seeds `(params, s)`: closest approach of each ray to `p`, keeping the
    /// best ones whose foot points are not grid neighbours of each other.
    fn seeds(&self, p: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let n = self.metric.dim();
        let mut best: Vec<(f64, usize, f64)> = self
            .rays
            .iter()
            .enumerate()
            .map(|(i, ray)| {
                let mut dmin = f64::INFINITY;
                let mut smin = 0.0;
                for node in 0..ray.solution.len() {
                    let st = ray.solution.node(node);
                    let d: f64 = (0..n).map(|k| (st.position[k] - p[k]).powi(2)).sum();
                    if d < dmin {
                        dmin = d;
                        smin = st.t;
                    }
                }
                (dmin, i, smin)
            })
            .collect();
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<(Vec<f64>, f64)> = Vec::new();
        for (_, i, s) in best {
            let u = &self.rays[i].params;
            let adjacent = chosen
                .iter()
                .any(|(c, _)| (0..u.len()).all(|a| (c[a] - u[a]).abs() <= 1.5 * self.spacing[a]));
            if !adjacent {
                chosen.push((u.clone(), s));
            }
            if chosen.len() >= self.config.max_seeds {
                break;
            }
        }
        chosen
    }

    /// `γ_{E(u)}(s)` and the Jacobian of `(u, s) ↦ γ_{E(u)}(s)`.
    fn shoot(&self, u: &[f64], s: f64) -> Option<(Vec<f64>, Matrix)> {
        let n = self.metric.dim();
        let (foot, tangents) = self.sigma.patch.point_and_tangents(u);
        let x = &foot[..n];
        if !self.metric.chart.contains(x) {
            return None;
        }
        let frame = self.sigma.normal_field(self.metric, x).ok()?;
        let spec = FlowSpec {
            fields: normal_fields(&frame, &tangents),
            ..FlowSpec::default()
        };
        let sol = integrate_flow(self.metric, x, &frame.normal, &spec, s, &self.config.control).ok()?;
        if sol.termination != Termination::ReachedT {
            return None;
        }
        let end = sol.state(s).ok()?;
        let mut jac = ZERO_MAT;
        for a in 0..n - 1 {
            let (y, _) = sol.jacobi_field(a, s).ok()?;
            for k in 0..n {
                jac[k][a] = y[k];
            }
        }
        for k in 0..n {
            jac[k][n - 1] = end.velocity[k];
        }
        Some((end.position, jac))
    }

    /// Damped Newton on `(u, s)` for `γ_{E(u)}(s) = p`.
    fn refine(&self, p: &[f64], u0: &[f64], s0: f64) -> Option<Hit> {
        let n = self.metric.dim();
        let m = n - 1;
        let mut z: Vec<f64> = u0.to_vec();
        z.push(s0.max(1e-3));
        let residual = |x: &[f64]| (0..n).map(|k| (x[k] - p[k]).powi(2)).sum::<f64>().sqrt();
        let (mut x, mut jac) = self.shoot(&z[..m], z[m])?;
        let mut r = residual(&x);
        for _ in 0..self.config.max_newton {
            if r < self.config.residual_tol {
                break;
            }
            let f: Vec<f64> = (0..n).map(|k| p[k] - x[k]).collect();
            let delta = linalg::solve(&jac, n, &f)?;
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..10 {
                let mut trial: Vec<f64> = (0..n).map(|k| z[k] + step * delta[k]).collect();
                if trial[m] <= 0.0 {
                    trial[m] = 0.5 * z[m];
                }
                if let Some((xt, jt)) = self.shoot(&trial[..m], trial[m]) {
                    let rt = residual(&xt);
                    if rt < r {
                        z = trial;
                        x = xt;
                        jac = jt;
                        r = rt;
                        improved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if r > 1e2 * self.config.residual_tol {
            return None;
        }
        let foot = self.sigma.patch.point(&z[..m])[..n].to_vec();
        Some(Hit {
            params: z[..m].to_vec(),
            foot,
            s: z[m],
        })
    }

    fn in_search_box(&self, u: &[f64], tol: f64) -> bool {
        (0..u.len()).all(|a| u[a] >= self.lower[a] - tol && u[a] <= self.upper[a] + tol)
    }

    fn on_search_boundary(&self, u: &[f64]) -> bool {
        (0..u.len()).any(|a| {
            let tol = 1e-3 * (self.upper[a] - self.lower[a]);
            u[a] - self.lower[a] < tol || self.upper[a] - u[a] < tol
        })
    }

    /// `τ_Σ(p)` over the orthogonal-geodesic competitor family.
    pub fn separation(&self, p: &[f64]) -> Result<SeparationEstimate> {
        let n = self.metric.dim();
        self.metric.eval(p)?;
        let zero = SeparationEstimate {
            point: p[..n].to_vec(),
            tau: 0.0,
            params: Vec::new(),
            foot: Vec::new(),
            lower_bound_only: false,
            witnesses: 0,
            competitors: 0,
        };
        if !self.is_future(p) {
            return Ok(zero);
        }
        let mut hits: Vec<Hit> = Vec::new();
        for (u, s) in self.seeds(p) {
            if let Some(hit) = self.refine(p, &u, s) {
                if hit.s > 0.0 && self.in_search_box(&hit.params, 1e-9) {
                    let duplicate = hits.iter().any(|h| {
                        (0..u.len()).all(|a| (h.params[a] - hit.params[a]).abs() < 1e-6) && (h.s - hit.s).abs() < 1e-6
                    });
                    if !duplicate {
                        hits.push(hit);
                    }
                }
            }
        }
        let Some(best) = hits.iter().max_by(|a, b| a.s.total_cmp(&b.s)) else {
            return Ok(SeparationEstimate {
                lower_bound_only: true,
                ..zero
            });
        };
        let witnesses = hits.iter().filter(|h| best.s - h.s <= self.config.witness_tol).count();
        Ok(SeparationEstimate {
            point: p[..n].to_vec(),
            tau: best.s,
            params: best.params.clone(),
            foot: best.foot.clone(),
            lower_bound_only: self.on_search_boundary(&best.params),
            witnesses,
            competitors: hits.len(),
        })
    }

    /// Normal geodesic from the foot with patch parameters `u`.
    pub fn normal_geodesic(&self, u: &[f64], t_max: f64) -> Result<GeodesicSolution> {
        let n = self.metric.dim();
        let foot = self.sigma.patch.point(u);
        let normal = self.sigma.unit_normal(self.metric, &foot[..n])?;
        integrate_flow(
            self.metric,
            &foot[..n],
            &normal[..n],
            &FlowSpec::default(),
            t_max,
            &self.config.control,
        )
    }

    /// Cut function `s_Σ^+` along the normal geodesic from `E(u)`.
    pub fn cut(&self, u: &[f64], t_max: f64) -> Result<CutRecord> {
        let n = self.metric.dim();
        let sol = self.normal_geodesic(u, t_max)?;
        let reach = sol.t_end();
        let foot = self.sigma.patch.point(u)[..n].to_vec();
        let normal = sol.velocity(0.0)?;
        let tol = self.config.tol_cut;
        let fires = |t: f64| -> Result<Option<SeparationEstimate>> {
            let p = sol.position(t)?;
            let est = self.separation(&p)?;
            Ok((est.tau > t + tol).then_some(est))
        };
        let mut lo = 0.0;
        let mut hi = None;
        let mut t = self.config.cut_scan;
        while t <= reach {
            if let Some(est) = fires(t)? {
                hi = Some((t, est));
                break;
            }
            lo = t;
            t += self.config.cut_scan;
        }
        let Some((mut hi_t, mut witness)) = hi else {
            let horizon = if sol.termination == Termination::ReachedT {
                CutHorizon::ExceedsHorizon
            } else {
                CutHorizon::TruncatedHorizon
            };
            return Ok(CutRecord {
                params: u.to_vec(),
                foot,
                normal,
                estimate: reach,
                bracket: (lo, reach),
                horizon,
                witness: None,
            });
        };
        while hi_t - lo > self.config.cut_bracket {
            let mid = 0.5 * (lo + hi_t);
            match fires(mid)? {
                Some(est) => {
                    hi_t = mid;
                    witness = est;
                }
                None => lo = mid,
            }
        }
        Ok(CutRecord {
            params: u.to_vec(),
            foot,
            normal,
            estimate: 0.5 * (lo + hi_t),
            bracket: (lo, hi_t),
            horizon: CutHorizon::Found,
            witness: Some(witness),
        })
    }

    /// Classify `p` against `B_A^+(t)` and `S_A^+(t)` with `A` the patch.
    pub fn membership(&self, t: f64, p: &[f64], tol: f64) -> Result<MembershipResult> {
        let estimate = self.separation(p)?;
        Ok(classify(self.sigma, estimate, t, tol))
    }
}

/// Membership from a separation estimate: the foot must lie in `A`.
pub(crate) fn classify(sigma: &Hypersurface, estimate: SeparationEstimate, t: f64, tol: f64) -> MembershipResult {
    let in_a = !estimate.params.is_empty() && sigma.patch.contains(&estimate.params, 1e-9);
    let membership = if !in_a || estimate.tau <= 0.0 {
        Membership::Outside
    } else if (estimate.tau - t).abs() <= tol {
        Membership::Sphere
    } else if estimate.tau < t {
        Membership::Interior
    } else {
        Membership::Outside
    };
    MembershipResult {
        membership,
        provisional: estimate.lower_bound_only,
        estimate,
    }
}

/// One-shot `τ_Σ(p)`; builds a seed bundle for a single query.
pub fn time_separation(
    metric: &MetricField,
    sigma: &Hypersurface,
    p: &[f64],
    config: &SearchConfig,
) -> Result<SeparationEstimate> {
    NormalBundle::new(metric, sigma, *config)?.separation(p)
}

/// One-shot cut function along the normal geodesic from `E(u)`.
pub fn cut_function(
    metric: &MetricField,
    sigma: &Hypersurface,
    u: &[f64],
    t_max: f64,
    config: &SearchConfig,
) -> Result<CutRecord> {
    NormalBundle::new(metric, sigma, *config)?.cut(u, t_max)
}

/// One-shot membership of `p` in `B_A^+(t)`.
pub fn ball_membership(
    metric: &MetricField,
    sigma: &Hypersurface,
    t: f64,
    p: &[f64],
    tol: f64,
    config: &SearchConfig,
) -> Result<MembershipResult> {
    NormalBundle::new(metric, sigma, *config)?.membership(t, p, tol)
}
