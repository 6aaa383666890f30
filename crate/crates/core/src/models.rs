//! Comparison spacetimes `M_{κ,β} = −dt² + f_{κ,β}(t)² h` and Riemannian
//! constant-curvature model volumes.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::metric::source::{Fiber, Profile, WarpedProductSource};
use crate::metric::{ChartDomain, MetricField, Signature, Smoothness};
use crate::quadrature::adaptive_simpson;

/// Ties within this distance of a row boundary resolve to the boundary row.
pub const CLASSIFICATION_TOL: f64 = 1e-12;

/// Absolute tolerance of the normalized ball-volume quadrature.
pub const VOLUME_QUAD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableRow {
    /// κ<0, |β| < (n−1)√|κ|.
    NegativeSubcritical,
    /// κ<0, |β| = (n−1)√|κ|.
    NegativeCritical,
    /// κ<0, β > (n−1)√|κ|.
    NegativeExpanding,
    /// κ<0, β < −(n−1)√|κ|.
    NegativeCollapsing,
    /// κ=0, β=0.
    FlatStatic,
    /// κ=0, β>0.
    FlatExpanding,
    /// κ=0, β<0.
    FlatCollapsing,
    /// κ>0, β≠0.
    PositiveTilted,
    /// κ>0, β=0.
    PositiveSymmetric,
}

impl TableRow {
    pub const ALL: [TableRow; 9] = [
        TableRow::NegativeSubcritical,
        TableRow::NegativeCritical,
        TableRow::NegativeExpanding,
        TableRow::NegativeCollapsing,
        TableRow::FlatStatic,
        TableRow::FlatExpanding,
        TableRow::FlatCollapsing,
        TableRow::PositiveTilted,
        TableRow::PositiveSymmetric,
    ];

    /// A representative `(κ, β)` for this row in dimension `n`.
    pub fn representative(self, n: usize) -> (f64, f64) {
        let m = (n - 1) as f64;
        match self {
            TableRow::NegativeSubcritical => (-1.0, 0.5 * m),
            TableRow::NegativeCritical => (-1.0, m),
            TableRow::NegativeExpanding => (-1.0, 2.0 * m),
            TableRow::NegativeCollapsing => (-1.0, -2.0 * m),
            TableRow::FlatStatic => (0.0, 0.0),
            TableRow::FlatExpanding => (0.0, 1.0),
            TableRow::FlatCollapsing => (0.0, -1.0),
            TableRow::PositiveTilted => (1.0, -0.5),
            TableRow::PositiveSymmetric => (1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonModel {
    pub kappa: f64,
    pub beta: f64,
    pub n: usize,
    pub row: TableRow,
    pub fiber: Fiber,
    /// Offset `b` of the warping function.
    pub offset: f64,
    /// Collapse time `b_{κ,β}`; infinite when `f` never vanishes for `t > 0`.
    pub collapse: f64,
}

/// Entry of the catalog dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub row: TableRow,
    pub kappa: f64,
    pub beta: f64,
    pub n: usize,
    pub fiber: Fiber,
    pub offset: f64,
    /// `None` encodes an infinite collapse time.
    pub collapse: Option<f64>,
}

impl ComparisonModel {
    pub fn new(kappa: f64, beta: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(GeomError::invalid(format!(
                "model dimension must be at least 2, got {n}"
            )));
        }
        if !kappa.is_finite() || !beta.is_finite() {
            return Err(GeomError::invalid("model parameters must be finite"));
        }
        let m = (n - 1) as f64;
        let (row, fiber, offset, collapse) = if kappa.abs() <= CLASSIFICATION_TOL {
            if beta.abs() <= CLASSIFICATION_TOL {
                (TableRow::FlatStatic, Fiber::Flat, 0.0, f64::INFINITY)
            } else if beta > 0.0 {
                (TableRow::FlatExpanding, Fiber::Hyperbolic, m / beta, f64::INFINITY)
            } else {
                (TableRow::FlatCollapsing, Fiber::Hyperbolic, m / beta, -m / beta)
            }
        } else if kappa < 0.0 {
            let s = (-kappa).sqrt();
            let x = beta / (m * s);
            if (x.abs() - 1.0).abs() <= CLASSIFICATION_TOL {
                (TableRow::NegativeCritical, Fiber::Flat, 0.0, f64::INFINITY)
            } else if x.abs() < 1.0 {
                (TableRow::NegativeSubcritical, Fiber::Sphere, x.atanh(), f64::INFINITY)
            } else if x > 1.0 {
                (
                    TableRow::NegativeExpanding,
                    Fiber::Hyperbolic,
                    arccoth(x),
                    f64::INFINITY,
                )
            } else {
                let b = arccoth(x);
                (TableRow::NegativeCollapsing, Fiber::Hyperbolic, b, -b / s)
            }
        } else {
            let s = kappa.sqrt();
            if beta.abs() <= CLASSIFICATION_TOL {
                (TableRow::PositiveSymmetric, Fiber::Hyperbolic, PI / 2.0, PI / (2.0 * s))
            } else {
                let b = arccot(beta / (m * s));
                let collapse = (-b + PI / 2.0 * (1.0 + beta.signum())) / s;
                (TableRow::PositiveTilted, Fiber::Hyperbolic, b, collapse)
            }
        };
        Ok(ComparisonModel {
            kappa,
            beta,
            n,
            row,
            fiber,
            offset,
            collapse,
        })
    }

    /// `(f, f', f'')` of the warping function at `t`.
    pub fn f_derivs(&self, t: f64) -> (f64, f64, f64) {
        let b = self.offset;
        match self.row {
            TableRow::FlatStatic => (1.0, 0.0, 0.0),
            TableRow::FlatExpanding | TableRow::FlatCollapsing => (t + b, 1.0, 0.0),
            TableRow::NegativeCritical => {
                let w = self.beta.signum() * (-self.kappa).sqrt();
                let e = (w * t).exp();
                (e, w * e, w * w * e)
            }
            TableRow::NegativeSubcritical => {
                let s = (-self.kappa).sqrt();
                let a = s * t + b;
                (a.cosh() / s, a.sinh(), s * a.cosh())
            }
            TableRow::NegativeExpanding | TableRow::NegativeCollapsing => {
                let s = (-self.kappa).sqrt();
                let a = s * t + b;
                (a.sinh() / s, a.cosh(), s * a.sinh())
            }
            TableRow::PositiveTilted => {
                let s = self.kappa.sqrt();
                let a = s * t + b;
                (a.sin() / s, a.cos(), -s * a.sin())
            }
            TableRow::PositiveSymmetric => {
                let s = self.kappa.sqrt();
                let a = s * t;
                (a.cos() / s, -a.sin(), -s * a.cos())
            }
        }
    }

    pub fn f(&self, t: f64) -> f64 {
        self.f_derivs(t).0
    }

    /// Warping function extended by zero from the collapse time on.
    pub fn f_tilde(&self, t: f64) -> f64 {
        if t >= self.collapse {
            0.0
        } else {
            self.f(t)
        }
    }

    /// `(f̃(t)/f(0))^{n−1}`: normalized area of the future sphere at time `t`.
    pub fn area_ratio(&self, t: f64) -> f64 {
        (self.f_tilde(t) / self.f(0.0)).powi(self.n as i32 - 1)
    }

    /// `∫₀ᵗ area_ratio`: normalized volume of the future ball at time `t`.
    pub fn ball_volume_normalized(&self, t: f64) -> f64 {
        let upper = t.min(self.collapse);
        if upper <= 0.0 {
            return 0.0;
        }
        adaptive_simpson(&|s| self.area_ratio(s), 0.0, upper, VOLUME_QUAD_TOL)
    }

    pub fn is_collapsing(&self) -> bool {
        self.collapse.is_finite()
    }

    pub fn catalog_entry(&self) -> CatalogEntry {
        CatalogEntry {
            row: self.row,
            kappa: self.kappa,
            beta: self.beta,
            n: self.n,
            fiber: self.fiber,
            offset: self.offset,
            collapse: self.collapse.is_finite().then_some(self.collapse),
        }
    }

    /// Time interval used for the model chart: starts slightly in the past of
    /// `Σ = {t = 0}` and stops just short of the collapse time (or at
    /// `horizon` when the model never collapses).
    pub fn time_range(&self, horizon: f64) -> (f64, f64) {
        let f0 = self.f(0.0).abs();
        let mut lower = -0.25;
        while self.f(lower).abs() < 0.5 * f0 {
            lower *= 0.5;
        }
        let upper = if self.is_collapsing() {
            self.collapse - MODEL_COLLAPSE_GAP
        } else {
            horizon
        };
        (lower, upper)
    }

    /// The model as a warped-product metric on `[t_lo, t_hi] × [−w, w]^{n−1}`.
    pub fn metric_field(&self, horizon: f64, half_width: f64) -> Result<MetricField> {
        let (lo, hi) = self.time_range(horizon);
        let mut lower = vec![lo];
        let mut upper = vec![hi];
        let mut names = vec!["t".to_string()];
        for i in 1..self.n {
            lower.push(-half_width);
            upper.push(half_width);
            names.push(format!("x{i}"));
        }
        let chart = ChartDomain::new(lower, upper, names)?;
        let mut covector = vec![0.0; self.n];
        covector[0] = 1.0;
        MetricField::new(
            chart,
            Signature::Lorentzian {
                time_covector: covector,
            },
            Smoothness::Smooth,
            Arc::new(WarpedProductSource::new(self.n, Arc::new(*self), self.fiber)),
            format!("model(kappa={}, beta={}, n={})", self.kappa, self.beta, self.n),
        )
    }
}

/// Distance kept between the model chart and the collapse time, where the
/// metric degenerates.
pub const MODEL_COLLAPSE_GAP: f64 = 5e-3;

impl Profile for ComparisonModel {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        self.f_derivs(t)
    }
}

/// `coth⁻¹(x)` for `|x| > 1`.
fn arccoth(x: f64) -> f64 {
    0.5 * ((x + 1.0) / (x - 1.0)).ln()
}

/// `cot⁻¹(x) = tan⁻¹(1/x)`, with values in `(−π/2, π/2)`.
fn arccot(x: f64) -> f64 {
    (1.0 / x).atan()
}

/// `sn_κ`, the solution of `y'' + κ y = 0` with `y(0) = 0`, `y'(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnFunction {
    pub kappa: f64,
}

impl SnFunction {
    pub fn eval(&self, s: f64) -> f64 {
        sn(self.kappa, s)
    }
}

pub fn sn(kappa: f64, s: f64) -> f64 {
    if kappa > 0.0 {
        let w = kappa.sqrt();
        (w * s).sin() / w
    } else if kappa < 0.0 {
        let w = (-kappa).sqrt();
        (w * s).sinh() / w
    } else {
        s
    }
}

/// Area of the unit `(n−1)`-sphere.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n - 2) as f64 * unit_sphere_area(n - 2),
    }
}

/// Volume of a geodesic ball of radius `r` in the simply connected
/// `n`-dimensional space of constant curvature `κ`.
pub fn riemannian_model_volume(kappa: f64, n: usize, r: f64) -> f64 {
    let mut upper = r.max(0.0);
    if kappa > 0.0 {
        upper = upper.min(PI / kappa.sqrt());
    }
    if upper == 0.0 {
        return 0.0;
    }
    let c = unit_sphere_area(n);
    c * adaptive_simpson(&|s| sn(kappa, s).powi(n as i32 - 1), 0.0, upper, 1e-12)
}

/// Parameter sequences along which the extended warping functions are
/// known to converge (or, in the exceptional case, only after
/// normalization by `f(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum LimitCase {
    /// κ₀ = 0, β₀ ≠ 0, κ_k = −1/k, β_k = β₀.
    FlatNonzeroBeta { beta0: f64 },
    /// κ₀ = β₀ = 0, κ_k = −1/k, β_k = (n−1)√|κ_k|.
    FlatCriticalApproach,
    /// κ₀ > 0, β₀ = 0, κ_k = κ₀, β_k = 1/k.
    PositiveBetaToZero { kappa0: f64 },
    /// κ₀ < 0, β₀ = (n−1)√|κ₀|, κ_k = κ₀ − 1/k, β_k = (n−1)√|κ_k|.
    NegativeCritical { kappa0: f64 },
    /// κ₀ < 0, β₀ = −(n−1)√|κ₀|, κ_k = κ₀ − 1/k, β_k = β₀ + 1/k.
    Exceptional { kappa0: f64 },
    /// Fixed parameters.
    Constant { kappa: f64, beta: f64 },
}

impl LimitCase {
    fn validate(&self) -> Result<()> {
        let bad = match *self {
            LimitCase::FlatNonzeroBeta { beta0 } => beta0 == 0.0,
            LimitCase::PositiveBetaToZero { kappa0 } => kappa0 <= 0.0,
            LimitCase::NegativeCritical { kappa0 } | LimitCase::Exceptional { kappa0 } => kappa0 >= 0.0,
            LimitCase::FlatCriticalApproach | LimitCase::Constant { .. } => false,
        };
        if bad {
            return Err(GeomError::invalid(format!(
                "limit case parameters outside the hypotheses: {self:?}"
            )));
        }
        Ok(())
    }

    /// Limit parameters `(κ₀, β₀)`.
    pub fn limit(&self, n: usize) -> (f64, f64) {
        let m = (n - 1) as f64;
        match *self {
            LimitCase::FlatNonzeroBeta { beta0 } => (0.0, beta0),
            LimitCase::FlatCriticalApproach => (0.0, 0.0),
            LimitCase::PositiveBetaToZero { kappa0 } => (kappa0, 0.0),
            LimitCase::NegativeCritical { kappa0 } => (kappa0, m * (-kappa0).sqrt()),
            LimitCase::Exceptional { kappa0 } => (kappa0, -m * (-kappa0).sqrt()),
            LimitCase::Constant { kappa, beta } => (kappa, beta),
        }
    }

    /// Member `k` of the approximating sequence.
    pub fn member(&self, n: usize, k: usize) -> (f64, f64) {
        let m = (n - 1) as f64;
        let inv = 1.0 / k as f64;
        match *self {
            LimitCase::FlatNonzeroBeta { beta0 } => (-inv, beta0),
            LimitCase::FlatCriticalApproach => (-inv, m * inv.sqrt()),
            LimitCase::PositiveBetaToZero { kappa0 } => (kappa0, inv),
            LimitCase::NegativeCritical { kappa0 } => {
                let kappa = kappa0 - inv;
                (kappa, m * (-kappa).sqrt())
            }
            LimitCase::Exceptional { kappa0 } => (kappa0 - inv, -m * (-kappa0).sqrt() + inv),
            LimitCase::Constant { kappa, beta } => (kappa, beta),
        }
    }

    /// Whether the raw functions `f̃` are expected to converge.
    pub fn raw_converges(&self) -> bool {
        !matches!(self, LimitCase::Exceptional { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitReport {
    pub case: LimitCase,
    pub n: usize,
    pub ks: Vec<usize>,
    /// `sup_grid |f̃_k − f̃₀|` per member.
    pub raw_sup: Vec<f64>,
    /// `sup_grid |f̃_k/f_k(0) − f̃₀/f₀(0)|` per member.
    pub normalized_sup: Vec<f64>,
    pub raw_decreasing: bool,
    pub normalized_decreasing: bool,
    /// Observed behavior agrees with the expected one for this case.
    pub verdict: bool,
}

/// Discrepancies below this are treated as exact agreement.
const LIMIT_ZERO: f64 = 1e-12;

/// Minimum raw discrepancy that counts as "bounded away from zero".
pub const EXCEPTIONAL_RAW_FLOOR: f64 = 0.1;

fn decreasing(values: &[f64]) -> bool {
    values.iter().all(|v| *v <= LIMIT_ZERO) || values.windows(2).all(|w| w[1] < w[0])
}

pub fn limit_family_check(case: LimitCase, n: usize, grid: &[f64], ks: &[usize]) -> Result<LimitReport> {
    case.validate()?;
    if grid.is_empty() || ks.is_empty() || grid.iter().any(|t| *t < 0.0) {
        return Err(GeomError::invalid(
            "limit check needs a nonempty grid of t ≥ 0 and a nonempty k list",
        ));
    }
    let (k0, b0) = case.limit(n);
    let limit = ComparisonModel::new(k0, b0, n)?;
    let f00 = limit.f(0.0);
    let mut raw_sup = Vec::with_capacity(ks.len());
    let mut normalized_sup = Vec::with_capacity(ks.len());
    for &k in ks {
        let (kk, bk) = case.member(n, k);
        let model = ComparisonModel::new(kk, bk, n)?;
        let fk0 = model.f(0.0);
        let mut raw = 0.0_f64;
        let mut normalized = 0.0_f64;
        for &t in grid {
            raw = raw.max((model.f_tilde(t) - limit.f_tilde(t)).abs());
            normalized = normalized.max((model.f_tilde(t) / fk0 - limit.f_tilde(t) / f00).abs());
        }
        raw_sup.push(raw);
        normalized_sup.push(normalized);
    }
    let raw_decreasing = decreasing(&raw_sup);
    let normalized_decreasing = decreasing(&normalized_sup);
    let verdict = if case.raw_converges() {
        raw_decreasing && normalized_decreasing
    } else {
        normalized_decreasing && raw_sup.iter().all(|v| *v >= EXCEPTIONAL_RAW_FLOOR)
    };
    Ok(LimitReport {
        case,
        n,
        ks: ks.to_vec(),
        raw_sup,
        normalized_sup,
        raw_decreasing,
        normalized_decreasing,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_static_row() {
        let m = ComparisonModel::new(0.0, 0.0, 3).unwrap();
        assert_eq!(m.row, TableRow::FlatStatic);
        assert_eq!(m.fiber, Fiber::Flat);
        assert!(m.collapse.is_infinite());
        assert_eq!(m.f_tilde(7.0), 1.0);
        assert!((m.ball_volume_normalized(2.5) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn positive_symmetric_row() {
        let m = ComparisonModel::new(1.0, 0.0, 3).unwrap();
        assert_eq!(m.row, TableRow::PositiveSymmetric);
        assert!((m.collapse - PI / 2.0).abs() < 1e-15);
        for t in [0.0, 0.4, 1.2] {
            assert!((m.f(t) - f64::cos(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_collapsing_row() {
        let m = ComparisonModel::new(0.0, -1.0, 2).unwrap();
        assert_eq!(m.row, TableRow::FlatCollapsing);
        assert_eq!(m.fiber, Fiber::Hyperbolic);
        assert_eq!(m.offset, -1.0);
        assert_eq!(m.collapse, 1.0);
        assert_eq!(m.f_tilde(2.0), 0.0);
        assert_eq!(m.f_tilde(0.0), -1.0);
        assert!((m.area_ratio(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(m.area_ratio(1.5), 0.0);
        assert!((m.ball_volume_normalized(1.0) - 0.5).abs() < 1e-9);
        assert!((m.ball_volume_normalized(3.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn boundary_ties_resolve_to_critical_row() {
        let m = ComparisonModel::new(-4.0, 2.0 * 2.0 * (1.0 + 1e-14), 3).unwrap();
        assert_eq!(m.row, TableRow::NegativeCritical);
    }

    #[test]
    fn representatives_land_in_their_rows() {
        for n in 2..=4 {
            for row in TableRow::ALL {
                let (k, b) = row.representative(n);
                assert_eq!(ComparisonModel::new(k, b, n).unwrap().row, row);
            }
        }
    }

    #[test]
    fn collapse_time_is_a_zero_of_f() {
        for row in TableRow::ALL {
            let (k, b) = row.representative(3);
            let m = ComparisonModel::new(k, b, 3).unwrap();
            if m.is_collapsing() {
                assert!(m.f(m.collapse).abs() < 1e-12, "{row:?}");
                for t in [0.0, 0.25 * m.collapse, 0.5 * m.collapse, 0.99 * m.collapse] {
                    assert!(m.f(t) != 0.0);
                }
            }
        }
    }

    #[test]
    fn riemannian_volumes() {
        assert!((riemannian_model_volume(0.0, 2, 1.3) - PI * 1.69).abs() < 1e-10);
        assert!((riemannian_model_volume(1.0, 2, 1.0) - 2.0 * PI * (1.0 - 1f64.cos())).abs() < 1e-10);
        assert!((riemannian_model_volume(1.0, 3, 10.0) - 2.0 * PI * PI).abs() < 1e-9);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert_eq!(sn(0.0, 0.7), 0.7);
    }

    #[test]
    fn limit_case_parameter_mismatch() {
        let grid = [0.0, 1.0];
        assert!(limit_family_check(LimitCase::FlatNonzeroBeta { beta0: 0.0 }, 2, &grid, &[4]).is_err());
        assert!(limit_family_check(LimitCase::Exceptional { kappa0: 1.0 }, 2, &grid, &[4]).is_err());
    }
}
