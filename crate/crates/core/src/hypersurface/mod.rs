//! Spacelike hypersurfaces `Σ = {F = 0}` with a compact parameterized patch
//! `A`, unit normals, mean curvature, time separation, cut function and
//! ball membership.

mod separation;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::linalg::{self, Matrix, Vector, MAX_DIM, ZERO_MAT};
use crate::metric::MetricField;

pub use separation::{
    ball_membership, cut_function, time_separation, CutHorizon, CutRecord, Membership, MembershipResult, NormalBundle,
    SearchConfig, SeparationEstimate,
};

/// Default lower bound for the euclidean norm of `dF` on the band around `Σ`.
pub const DEFAULT_MIN_GRADIENT: f64 = 1e-6;

/// Points with `|F| ≤ LEVEL_TOL` are considered on `Σ`.
pub const LEVEL_TOL: f64 = 1e-8;

/// Parameterized compact patch `A = E([lower, upper])` inside `Σ`.
#[derive(Debug, Clone)]
pub struct Patch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `n` expressions in the patch parameters.
    pub embedding: Vec<Expr>,
}

impl Patch {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        (0..self.dim()).all(|a| u[a] >= self.lower[a] - tol && u[a] <= self.upper[a] + tol)
    }

    pub fn point(&self, u: &[f64]) -> Vector {
        let mut x = [0.0; MAX_DIM];
        for (i, e) in self.embedding.iter().enumerate() {
            x[i] = e.eval(u);
        }
        x
    }

    /// Embedded point and the coordinate tangent vectors `∂E/∂u_a`.
    pub fn point_and_tangents(&self, u: &[f64]) -> (Vector, Vec<Vector>) {
        let vars = Jet::vars(u);
        let mut x = [0.0; MAX_DIM];
        let mut tangents = vec![[0.0; MAX_DIM]; self.dim()];
        for (i, e) in self.embedding.iter().enumerate() {
            let j = e.eval_jet(&vars);
            x[i] = j.v;
            for (a, t) in tangents.iter_mut().enumerate() {
                t[i] = j.d[a];
            }
        }
        (x, tangents)
    }

    /// The patch box widened by `fraction` of its extent on every side.
    pub fn widened(&self, fraction: f64) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.dim())
            .map(|a| self.lower[a] - fraction * (self.upper[a] - self.lower[a]))
            .collect();
        let hi = (0..self.dim())
            .map(|a| self.upper[a] + fraction * (self.upper[a] - self.lower[a]))
            .collect();
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct Hypersurface {
    pub level_set: Expr,
    pub patch: Patch,
    /// Competitor foot points are searched over the patch box widened by
    /// this fraction on every side.
    pub search_margin: f64,
    pub min_gradient: f64,
}

/// Unit normal with the derivative data used by Jacobi initialization.
#[derive(Debug, Clone, Copy)]
pub struct NormalFrame {
    pub n: usize,
    pub point: Vector,
    pub normal: Vector,
    /// `dnormal[k][j] = ∂_j N^k` of the extended unit normal field.
    pub dnormal: Matrix,
    /// Sign of `dF(N)`: `F` increases toward the future when positive.
    pub future_sign: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalSample {
    pub params: Vec<f64>,
    pub foot: Vec<f64>,
    pub normal: Vec<f64>,
    pub area_weight: f64,
}

impl Hypersurface {
    pub fn new(level_set: Expr, patch: Patch, search_margin: f64) -> Self {
        Hypersurface {
            level_set,
            patch,
            search_margin,
            min_gradient: DEFAULT_MIN_GRADIENT,
        }
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        self.level_set.eval(x)
    }

    /// Extended unit normal field and its coordinate derivatives at `x`
    /// (which need not lie on `Σ`).
    pub fn normal_field(&self, metric: &MetricField, x: &[f64]) -> Result<NormalFrame> {
        let n = metric.dim();
        let fj = self.level_set.eval_jet(&Jet::vars(&x[..n]));
        let df = fj.d;
        let grad_norm = linalg::norm(n, &df);
        if grad_norm < self.min_gradient {
            return Err(GeomError::Hypersurface(format!(
                "level-set gradient {grad_norm:.3e} below {:.1e} at {:?}",
                self.min_gradient,
                &x[..n]
            )));
        }
        let jet = metric.jet(x, false)?;
        let inv = linalg::inverse(&jet.g, n).ok_or_else(|| GeomError::SingularMetric { point: x[..n].to_vec() })?;
        let grad = linalg::mat_vec(&inv, n, &df);
        let q = linalg::dot(n, &grad, &df);
        if q >= 0.0 {
            return Err(GeomError::Hypersurface(format!(
                "hypersurface is not spacelike at {:?} (g(dF,dF) = {q:.3e})",
                &x[..n]
            )));
        }
        let root = (-q).sqrt();
        let mut sigma = 1.0;
        let mut normal = [0.0; MAX_DIM];
        for k in 0..n {
            normal[k] = grad[k] / root;
        }
        if !metric.is_future(&normal) {
            sigma = -1.0;
            for v in normal.iter_mut().take(n) {
                *v = -*v;
            }
        }
        // ∂_j G^k = ∂_j g^{kl} F_l + g^{kl} F_lj,  ∂_j g^{kl} = −g^{ka} ∂_j g_ab g^{bl}
        let mut dgrad = ZERO_MAT;
        for j in 0..n {
            let mut dg_inv_df = [0.0; MAX_DIM];
            // (∂_j g) G
            let dg_g = linalg::mat_vec(&jet.dg[j], n, &grad);
            let corr = linalg::mat_vec(&inv, n, &dg_g);
            for k in 0..n {
                dg_inv_df[k] = -corr[k];
            }
            let mut hess_col = [0.0; MAX_DIM];
            for l in 0..n {
                hess_col[l] = fj.h[l][j];
            }
            let h_term = linalg::mat_vec(&inv, n, &hess_col);
            for k in 0..n {
                dgrad[k][j] = dg_inv_df[k] + h_term[k];
            }
        }
        let mut dnormal = ZERO_MAT;
        for j in 0..n {
            let dq: f64 = (0..n).map(|k| dgrad[k][j] * df[k] + grad[k] * fj.h[k][j]).sum();
            for k in 0..n {
                dnormal[k][j] = sigma * (dgrad[k][j] / root + grad[k] * 0.5 * dq / (root * root * root));
            }
        }
        let future_sign = (sigma * q / root).signum();
        Ok(NormalFrame {
            n,
            point: linalg::to_vector(&x[..n]),
            normal,
            dnormal,
            future_sign,
        })
    }

    fn check_on_level(&self, x: &[f64]) -> Result<()> {
        let f = self.level(x);
        if f.abs() > LEVEL_TOL {
            return Err(GeomError::Hypersurface(format!(
                "point {x:?} is off the level set (F = {f:.3e})"
            )));
        }
        Ok(())
    }

    /// Future-directed unit normal at a point of `Σ`.
    pub fn unit_normal(&self, metric: &MetricField, q: &[f64]) -> Result<Vector> {
        metric.eval(q)?;
        self.check_on_level(q)?;
        Ok(self.normal_field(metric, q)?.normal)
    }

    /// Whether `x` lies strictly on the future side of `Σ`.
    pub fn future_side(&self, metric: &MetricField, x: &[f64]) -> Result<bool> {
        let frame = self.normal_field(metric, x)?;
        Ok(self.level(x) * frame.future_sign > 0.0)
    }

    /// `g`-orthonormal basis of `T_qΣ` obtained by projecting the coordinate
    /// vectors orthogonally to the normal.
    pub fn tangent_frame(&self, metric: &MetricField, q: &[f64], normal: &Vector) -> Result<Vec<Vector>> {
        let n = metric.dim();
        let g = metric.value(q);
        let mut candidates: Vec<Vector> = (0..n)
            .map(|i| {
                let mut e = [0.0; MAX_DIM];
                e[i] = 1.0;
                let c = linalg::bilinear(&g, n, &e, normal);
                for k in 0..n {
                    e[k] += c * normal[k];
                }
                e
            })
            .collect();
        // Drop the projection with the smallest norm: it is the most nearly
        // parallel to the normal.
        let weakest = (0..n)
            .min_by(|&a, &b| {
                let qa = linalg::bilinear(&g, n, &candidates[a], &candidates[a]);
                let qb = linalg::bilinear(&g, n, &candidates[b], &candidates[b]);
                qa.total_cmp(&qb)
            })
            .unwrap();
        candidates.remove(weakest);
        linalg::gram_schmidt(&g, n, &candidates, 1e-14)
            .ok_or_else(|| GeomError::Hypersurface(format!("degenerate tangent space at {q:?}")))
    }

    /// `H = tr S_N` with `S_N(V) = tan ∇_V N`.
    pub fn mean_curvature(&self, metric: &MetricField, q: &[f64]) -> Result<f64> {
        metric.eval(q)?;
        self.check_on_level(q)?;
        let n = metric.dim();
        let frame = self.normal_field(metric, q)?;
        let christoffel = metric.christoffel_unchecked(q)?;
        let basis = self.tangent_frame(metric, q, &frame.normal)?;
        let g = metric.value(q);
        let mut h = 0.0;
        for e in &basis {
            let mut nabla = [0.0; MAX_DIM];
            for k in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    let mut conn = frame.dnormal[k][j];
                    for i in 0..n {
                        conn += christoffel.get(k, j, i) * frame.normal[i];
                    }
                    s += e[j] * conn;
                }
                nabla[k] = s;
            }
            h += linalg::bilinear(&g, n, e, &nabla);
        }
        Ok(h)
    }

    /// Induced area weight `√det(g(∂_a E, ∂_b E))` at patch parameters `u`.
    pub fn area_weight(&self, metric: &MetricField, u: &[f64]) -> f64 {
        let n = metric.dim();
        let (x, tangents) = self.patch.point_and_tangents(u);
        let g = metric.value(&x[..n]);
        let m = tangents.len();
        let mut gram = ZERO_MAT;
        for a in 0..m {
            for b in 0..m {
                gram[a][b] = linalg::bilinear(&g, n, &tangents[a], &tangents[b]);
            }
        }
        linalg::determinant(&gram, m).max(0.0).sqrt()
    }

    /// Normal bundle sample over a Gauss-Legendre grid of the patch with
    /// `per_axis` nodes per parameter; weights include the quadrature weights.
    pub fn normal_bundle_sample(&self, metric: &MetricField, per_axis: usize) -> Result<Vec<NormalSample>> {
        let axes: Vec<Vec<(f64, f64)>> = (0..self.patch.dim())
            .map(|a| crate::quadrature::gauss_legendre_on(per_axis, self.patch.lower[a], self.patch.upper[a]))
            .collect();
        let mut out = Vec::new();
        for combo in cartesian_rules(&axes) {
            let params: Vec<f64> = combo.iter().map(|(x, _)| *x).collect();
            let weight: f64 = combo.iter().map(|(_, w)| *w).product();
            let foot = self.patch.point(&params);
            let normal = self.unit_normal(metric, &foot[..metric.dim()])?;
            out.push(NormalSample {
                foot: foot[..metric.dim()].to_vec(),
                normal: normal[..metric.dim()].to_vec(),
                area_weight: weight * self.area_weight(metric, &params),
                params,
            });
        }
        Ok(out)
    }

    /// Area of the patch by Gauss-Legendre quadrature.
    pub fn patch_area(&self, metric: &MetricField, per_axis: usize) -> Result<f64> {
        Ok(self
            .normal_bundle_sample(metric, per_axis)?
            .iter()
            .map(|s| s.area_weight)
            .sum())
    }
}

pub(crate) fn cartesian_rules(axes: &[Vec<(f64, f64)>]) -> Vec<Vec<(f64, f64)>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &node in axis {
                let mut p = prefix.clone();
                p.push(node);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
