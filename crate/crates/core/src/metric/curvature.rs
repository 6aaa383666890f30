//! Levi-Civita connection and Ricci curvature from a metric jet, and the
//! sampled Ricci lower-bound check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler;
use super::{MetricField, MetricJet};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Matrix, Vector, MAX_DIM, ZERO_MAT};

type Tensor3 = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];

const ZERO_T3: Tensor3 = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// Christoffel symbols of the second kind, `Γ^k_ij`.
#[derive(Debug, Clone, Copy)]
pub struct Christoffel {
    pub n: usize,
    pub gamma: Tensor3,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][i][j]
    }

    /// `Γ^k_ij` from `g` and `∂g`; `None` when `g` is singular.
    pub fn from_jet(jet: &MetricJet) -> Option<Christoffel> {
        let n = jet.n;
        let inv = linalg::inverse(&jet.g, n)?;
        let lowered = lowered_christoffel(jet);
        Some(Christoffel {
            n,
            gamma: raise(&inv, &lowered, n),
        })
    }

    /// Geodesic acceleration `−Γ^k_ij v^i v^j`.
    #[inline]
    pub fn acceleration(&self, v: &[f64]) -> Vector {
        let n = self.n;
        let mut a = [0.0; MAX_DIM];
        for (k, ak) in a.iter_mut().enumerate().take(n) {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.gamma[k][i][j] * v[i] * v[j];
                }
            }
            *ak = -s;
        }
        a
    }
}

/// Christoffel symbols together with their first partial derivatives,
/// `dgamma[m][k][i][j] = ∂_m Γ^k_ij`.
#[derive(Debug, Clone, Copy)]
pub struct ConnectionJet {
    pub christoffel: Christoffel,
    pub dgamma: [Tensor3; MAX_DIM],
}

impl ConnectionJet {
    pub fn from_jet(jet: &MetricJet) -> Option<ConnectionJet> {
        let n = jet.n;
        let inv = linalg::inverse(&jet.g, n)?;
        let lowered = lowered_christoffel(jet);
        let gamma = raise(&inv, &lowered, n);
        let mut dgamma = [ZERO_T3; MAX_DIM];
        for m in 0..n {
            // ∂_m g^{kl} = −g^{ka} ∂_m g_ab g^{bl}
            let mut dinv = ZERO_MAT;
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s += inv[k][a] * jet.dg[m][a][b] * inv[b][l];
                        }
                    }
                    dinv[k][l] = -s;
                }
            }
            // ∂_m Γ_lij = ½(∂_m∂_i g_jl + ∂_m∂_j g_il − ∂_m∂_l g_ij)
            let mut dlow = ZERO_T3;
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        dlow[l][i][j] = 0.5 * (jet.ddg[m][i][j][l] + jet.ddg[m][j][i][l] - jet.ddg[m][l][i][j]);
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += dinv[k][l] * lowered[l][i][j] + inv[k][l] * dlow[l][i][j];
                        }
                        dgamma[m][k][i][j] = s;
                    }
                }
            }
        }
        Some(ConnectionJet {
            christoffel: Christoffel { n, gamma },
            dgamma,
        })
    }

    /// `R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik`.
    pub fn ricci(&self) -> Matrix {
        let n = self.christoffel.n;
        let g = &self.christoffel.gamma;
        let mut ric = ZERO_MAT;
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.dgamma[k][k][i][j] - self.dgamma[j][k][i][k];
                    for l in 0..n {
                        s += g[k][k][l] * g[l][i][j] - g[k][j][l] * g[l][i][k];
                    }
                }
                ric[i][j] = s;
                ric[j][i] = s;
            }
        }
        ric
    }
}

fn lowered_christoffel(jet: &MetricJet) -> Tensor3 {
    let n = jet.n;
    let mut low = ZERO_T3;
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (jet.dg[i][j][l] + jet.dg[j][i][l] - jet.dg[l][i][j]);
                low[l][i][j] = v;
                low[l][j][i] = v;
            }
        }
    }
    low
}

fn raise(inv: &Matrix, low: &Tensor3, n: usize) -> Tensor3 {
    let mut out = ZERO_T3;
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|l| inv[k][l] * low[l][i][j]).sum();
                out[k][i][j] = v;
                out[k][j][i] = v;
            }
        }
    }
    out
}

pub(crate) fn ricci_from_jet(jet: &MetricJet) -> Option<Matrix> {
    ConnectionJet::from_jet(jet).map(|c| c.ricci())
}

/// Ricci components at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    pub ricci: Matrix,
    pub n: usize,
    /// False when the point lies within one stencil width of an interface.
    pub valid: bool,
}

impl CurvatureSample {
    pub fn eval(&self, x: &[f64]) -> f64 {
        linalg::bilinear(&self.ricci, self.n, x, x)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.ricci[i][..self.n].to_vec()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundMode {
    /// All vectors, normalized to `g(X,X) = 1`.
    Riemannian,
    /// Timelike vectors normalized to `g(X,X) = −1` with euclidean norm at
    /// most `c_bound`.
    Timelike { c_bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kappa: f64,
    pub mode: BoundMode,
    /// `min Ric(X,X) − (n−1)κ` over accepted samples.
    pub min_margin: f64,
    pub witness_point: Vec<f64>,
    pub witness_vector: Vec<f64>,
    pub points_used: usize,
    pub vectors_tested: usize,
    pub skipped_invalid: usize,
    /// Points where no sample vector satisfies the norm bound.
    pub points_without_vectors: usize,
    pub tolerance: f64,
    pub pass: bool,
}

struct PointResult {
    margin: f64,
    vector: Vector,
    tested: usize,
}

/// Sample `Ric(X,X) − (n−1)κ` over `points × directions` with `X`
/// normalized per `mode`. Points flagged invalid are skipped and counted.
pub fn check_ricci_bound(
    metric: &MetricField,
    kappa: f64,
    points: &[Vec<f64>],
    directions: usize,
    mode: BoundMode,
    tolerance: f64,
) -> Result<BoundReport> {
    let n = metric.dim();
    let per_point: Vec<Result<Option<PointResult>>> = points
        .par_iter()
        .map(|p| {
            let sample = metric.ricci_at(p)?;
            if !sample.valid {
                return Ok(None);
            }
            let g = metric.value(p);
            let vectors = match mode {
                BoundMode::Riemannian => riemannian_vectors(&g, n, directions),
                BoundMode::Timelike { c_bound } => timelike_vectors(metric, p, &g, directions, c_bound)?,
            };
            let mut best = PointResult {
                margin: f64::INFINITY,
                vector: [0.0; MAX_DIM],
                tested: vectors.len(),
            };
            for x in &vectors {
                let margin = sample.eval(x) - (n as f64 - 1.0) * kappa;
                if margin < best.margin {
                    best.margin = margin;
                    best.vector = *x;
                }
            }
            Ok(Some(best))
        })
        .collect();

    let mut min_margin = f64::INFINITY;
    let mut witness_point = Vec::new();
    let mut witness_vector = Vec::new();
    let mut used = 0;
    let mut skipped = 0;
    let mut no_vectors = 0;
    let mut tested = 0;
    for (p, r) in points.iter().zip(per_point) {
        match r? {
            None => skipped += 1,
            Some(res) => {
                if res.tested == 0 {
                    no_vectors += 1;
                    continue;
                }
                used += 1;
                tested += res.tested;
                if res.margin < min_margin {
                    min_margin = res.margin;
                    witness_point = p.clone();
                    witness_vector = res.vector[..n].to_vec();
                }
            }
        }
    }
    if tested == 0 {
        return Err(GeomError::EmptySample(format!(
            "no admissible (point, vector) samples: {} points, {skipped} skipped near interfaces, {no_vectors} without admissible vectors",
            points.len()
        )));
    }
    Ok(BoundReport {
        kappa,
        mode,
        min_margin,
        witness_point,
        witness_vector,
        points_used: used,
        vectors_tested: tested,
        skipped_invalid: skipped,
        points_without_vectors: no_vectors,
        tolerance,
        pass: min_margin >= -tolerance,
    })
}

/// Rapidity spacing of the timelike sample.
const RAPIDITY_STEP: f64 = 0.05;
/// Rapidity cap of the timelike sample.
const RAPIDITY_MAX: f64 = 20.0;

/// Euclidean unit directions rescaled to `g(X,X) = 1`.
fn riemannian_vectors(g: &Matrix, n: usize, directions: usize) -> Vec<Vector> {
    sampler::unit_directions(n, directions)
        .iter()
        .filter_map(|u| {
            let q = linalg::bilinear(g, n, u, u);
            (q > 0.0).then(|| scaled(u, 1.0 / q.sqrt(), n))
        })
        .collect()
}

/// Future unit timelike vectors `cosh(a) e₀ + sinh(a) w` in a g-orthonormal
/// frame, `w` over spatial unit directions and `a` over a rapidity grid,
/// kept while the euclidean norm is at most `c_bound`.
fn timelike_vectors(
    metric: &MetricField,
    p: &[f64],
    g: &Matrix,
    directions: usize,
    c_bound: f64,
) -> Result<Vec<Vector>> {
    let n = metric.dim();
    let frame = lorentz_frame(metric, p, g)?;
    let spatial: Vec<Vec<f64>> = if n == 2 {
        vec![vec![1.0], vec![-1.0]]
    } else {
        sampler::unit_directions(n - 1, directions.max(1))
            .iter()
            .map(|w| w[..n - 1].to_vec())
            .collect()
    };
    let mut out = Vec::new();
    for w in &spatial {
        let mut e = [0.0; MAX_DIM];
        for (a, wa) in w.iter().enumerate() {
            for i in 0..n {
                e[i] += wa * frame[a + 1][i];
            }
        }
        let mut a = 0.0;
        while a <= RAPIDITY_MAX {
            let mut x = [0.0; MAX_DIM];
            for i in 0..n {
                x[i] = a.cosh() * frame[0][i] + a.sinh() * e[i];
            }
            if linalg::norm(n, &x) <= c_bound {
                out.push(x);
            } else if a > 1.0 {
                break;
            }
            a += RAPIDITY_STEP;
        }
    }
    Ok(out)
}

/// g-orthonormal frame with a future timelike `e₀ ∝ g⁻¹τ` first.
fn lorentz_frame(metric: &MetricField, p: &[f64], g: &Matrix) -> Result<Vec<Vector>> {
    let n = metric.dim();
    let singular = || GeomError::SingularMetric { point: p.to_vec() };
    let super::Signature::Lorentzian { time_covector } = &metric.signature else {
        return Err(GeomError::invalid("timelike sampling needs a Lorentzian metric"));
    };
    let mut e0 = linalg::solve(g, n, time_covector).ok_or_else(singular)?;
    if !metric.is_future(&e0) {
        e0.iter_mut().for_each(|c| *c = -*c);
    }
    let mut frame = linalg::gram_schmidt(g, n, &[e0], 1e-14).ok_or_else(singular)?;
    for j in 0..n {
        if frame.len() == n {
            break;
        }
        let mut candidate = frame.clone();
        let mut d = [0.0; MAX_DIM];
        d[j] = 1.0;
        candidate.push(d);
        if let Some(f) = linalg::gram_schmidt(g, n, &candidate, 1e-10) {
            frame = f;
        }
    }
    if frame.len() < n {
        return Err(singular());
    }
    Ok(frame)
}

fn scaled(u: &Vector, s: f64, n: usize) -> Vector {
    let mut x = [0.0; MAX_DIM];
    for i in 0..n {
        x[i] = u[i] * s;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::dsl::builtin;
    use std::collections::BTreeMap;

    #[test]
    fn sphere_christoffels_match_closed_form() {
        let m = builtin("sphere2", &BTreeMap::new()).unwrap().metric;
        for &th in &[0.3, 1.0, 2.2] {
            let c = m.christoffel_at(&[th, 0.4]).unwrap();
            assert!((c.get(0, 1, 1) + th.sin() * th.cos()).abs() < 1e-12);
            assert!((c.get(1, 0, 1) - th.cos() / th.sin()).abs() < 1e-12);
            assert!(c.get(0, 0, 0).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_ricci_equals_metric() {
        let m = builtin("sphere2", &BTreeMap::new()).unwrap().metric;
        for &th in &[0.4, 1.3, 2.5] {
            let x = [th, -1.0];
            let ric = m.ricci_at(&x).unwrap();
            let g = m.eval(&x).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((ric.ricci[i][j] - g[i][j]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn remark_ricci_matrix() {
        let m = builtin("remark", &BTreeMap::new()).unwrap().metric;
        let s = m.ricci_at(&[1.0, 1.0, 1.0]).unwrap();
        let expected = [[1.0, 0.0, 0.0], [0.0, -0.25, -0.75], [0.0, -0.75, -0.25]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (s.ricci[i][j] - expected[i][j]).abs() < 1e-12,
                    "{i}{j}: {}",
                    s.ricci[i][j]
                );
            }
        }
    }

    #[test]
    fn bound_check_on_sphere_is_tight() {
        let m = builtin("sphere2", &BTreeMap::new()).unwrap().metric;
        let pts = m.chart.grid(4, 0.1);
        let r = check_ricci_bound(&m, 1.0, &pts, 64, BoundMode::Riemannian, 1e-9).unwrap();
        assert!(r.pass);
        assert!(r.min_margin.abs() < 1e-9);
    }

    #[test]
    fn timelike_sample_covers_narrow_cones() {
        let mut params = BTreeMap::new();
        params.insert("kappa".to_string(), -1.0);
        params.insert("beta".to_string(), 0.5);
        let m = builtin("model", &params).unwrap().metric;
        let pts = m.chart.grid(7, 0.02);
        let r = check_ricci_bound(&m, -1.0, &pts, 16, BoundMode::Timelike { c_bound: 3.0 }, 1e-9).unwrap();
        assert_eq!(r.points_used, pts.len());
        assert_eq!(r.points_without_vectors, 0);
        assert!(r.min_margin.abs() < 1e-9, "{}", r.min_margin);
    }

    #[test]
    fn remark_ricci_unbounded_below_on_timelike_vectors() {
        let m = builtin("remark", &BTreeMap::new()).unwrap().metric;
        let p = vec![vec![1.0, 1.0, 1.0]];
        let mut last = f64::INFINITY;
        for c in [1.0, 5.0, 20.0] {
            let r = check_ricci_bound(&m, 0.0, &p, 64, BoundMode::Timelike { c_bound: c }, 0.0).unwrap();
            assert!(r.min_margin <= last);
            last = r.min_margin;
        }
        assert!(last < -10.0, "{last}");
    }

    #[test]
    fn empty_sample_is_an_error() {
        let m = builtin("minkowski2", &BTreeMap::new()).unwrap().metric;
        let pts: Vec<Vec<f64>> = vec![];
        assert!(check_ricci_bound(&m, 0.0, &pts, 16, BoundMode::Riemannian, 1e-9).is_err());
    }
}
