//! Metrics on a single coordinate chart.
//!
//! A [`MetricField`] couples a [`ChartDomain`] with a component source, a
//! signature (with time orientation for Lorentzian metrics), and a
//! smoothness declaration. `C^{1,1}` metrics list their interface loci,
//! where second derivatives jump; curvature within one stencil width of a
//! locus is flagged invalid rather than reported.

mod curvature;
pub mod dsl;
pub mod sampler;
pub mod source;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{self, Matrix, Vector, MAX_DIM, ZERO_MAT};

pub use curvature::{check_ricci_bound, BoundMode, BoundReport, Christoffel, ConnectionJet, CurvatureSample};
pub use source::{ComponentSource, MetricJet};

/// Default finite-difference step as a fraction of the chart extent.
pub const DEFAULT_FD_FRACTION: f64 = 1e-4;

/// Curvature is not reported within this many FD steps of an interface.
pub const STENCIL_WIDTH_STEPS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDomain {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl ChartDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self> {
        let dim = lower.len();
        if dim < 2 {
            return Err(GeomError::invalid(format!(
                "chart dimension must be at least 2, got {dim}"
            )));
        }
        if dim > MAX_DIM {
            return Err(GeomError::invalid(format!(
                "chart dimension {dim} exceeds the supported maximum {MAX_DIM}"
            )));
        }
        if upper.len() != dim || names.len() != dim {
            return Err(GeomError::invalid("chart box and coordinate names disagree in length"));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(GeomError::invalid(format!(
                    "chart box has no extent on axis {axis}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(ChartDomain {
            dim,
            lower,
            upper,
            names,
        })
    }

    /// A box with default coordinate names `x0, x1, ...`.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let names = (0..lower.len()).map(|i| format!("x{i}")).collect();
        ChartDomain::new(lower.to_vec(), upper.to_vec(), names)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() >= self.dim && (0..self.dim).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// True when the point is at least `margin[i]` inside the box on every axis.
    pub fn contains_with_margin(&self, x: &[f64], margin: &[f64]) -> bool {
        (0..self.dim).all(|i| x[i] - margin[i] >= self.lower[i] && x[i] + margin[i] <= self.upper[i])
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim).map(|i| 0.5 * (self.lower[i] + self.upper[i])).collect()
    }

    /// Regular grid with `per_axis` nodes on each axis, inset by `inset`
    /// (fraction of the extent) from the faces.
    pub fn grid(&self, per_axis: usize, inset: f64) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| {
                let lo = self.lower[i] + inset * self.extent(i);
                let hi = self.upper[i] - inset * self.extent(i);
                if per_axis == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per_axis)
                        .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
                        .collect()
                }
            })
            .collect();
        cartesian(&axes)
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Signature {
    Riemannian,
    /// Lorentzian with time orientation: a timelike vector `X` is future
    /// directed iff `time_covector(X) > 0`.
    Lorentzian {
        time_covector: Vec<f64>,
    },
}

impl Signature {
    pub fn is_lorentzian(&self) -> bool {
        matches!(self, Signature::Lorentzian { .. })
    }

    fn describe(&self) -> &'static str {
        match self {
            Signature::Riemannian => "riemannian (all eigenvalues positive)",
            Signature::Lorentzian { .. } => "lorentzian (exactly one negative eigenvalue)",
        }
    }

    pub fn matches(&self, eigenvalues: &[f64]) -> bool {
        let negative = eigenvalues.iter().filter(|&&e| e < 0.0).count();
        let zero = eigenvalues.iter().any(|&e| e == 0.0 || !e.is_finite());
        !zero
            && match self {
                Signature::Riemannian => negative == 0,
                Signature::Lorentzian { .. } => negative == 1,
            }
    }
}

/// A hypersurface across which second derivatives of the metric may jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Locus {
    /// `x[axis] = value`.
    Coordinate { axis: usize, value: f64 },
    /// `|x - center| = radius` (Euclidean chart norm).
    Sphere { center: Vec<f64>, radius: f64 },
}

impl Locus {
    /// Signed event function; changes sign across the locus.
    pub fn signed(&self, x: &[f64]) -> f64 {
        match self {
            Locus::Coordinate { axis, value } => x[*axis] - value,
            Locus::Sphere { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c) * (xi - c)).sum();
                r2.sqrt() - radius
            }
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.signed(x).abs()
    }

    fn within_box(&self, chart: &ChartDomain) -> bool {
        match self {
            Locus::Coordinate { axis, value } => {
                *axis < chart.dim && *value >= chart.lower[*axis] && *value <= chart.upper[*axis]
            }
            Locus::Sphere { center, .. } => center.len() == chart.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Smoothness {
    Smooth,
    C11 { loci: Vec<Locus> },
}

impl Smoothness {
    pub fn loci(&self) -> &[Locus] {
        match self {
            Smoothness::Smooth => &[],
            Smoothness::C11 { loci } => loci,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalClass {
    Timelike,
    Null,
    Spacelike,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Vec<f64>,
    pub components: Vec<f64>,
    pub causal: Option<CausalClass>,
}

impl TangentVector {
    pub fn new(base: Vec<f64>, components: Vec<f64>) -> Self {
        TangentVector {
            base,
            components,
            causal: None,
        }
    }

    /// Classify with respect to `metric` at the base point and cache the result.
    pub fn classified(mut self, metric: &MetricField, tol: f64) -> Result<Self> {
        let q = metric.norm_sq(&self.base, &self.components)?;
        self.causal = Some(if !metric.signature.is_lorentzian() {
            if q > tol {
                CausalClass::Spacelike
            } else {
                CausalClass::Undetermined
            }
        } else if q < -tol {
            CausalClass::Timelike
        } else if q > tol {
            CausalClass::Spacelike
        } else {
            CausalClass::Null
        });
        Ok(self)
    }
}

/// A metric on one chart.
#[derive(Clone)]
pub struct MetricField {
    pub chart: ChartDomain,
    pub signature: Signature,
    pub smoothness: Smoothness,
    pub mode: DerivativeMode,
    pub label: String,
    source: Arc<dyn ComponentSource>,
    fd_step: Vector,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("label", &self.label)
            .field("chart", &self.chart)
            .field("signature", &self.signature)
            .field("smoothness", &self.smoothness)
            .field("mode", &self.mode)
            .finish()
    }
}

impl MetricField {
    /// Build a metric. The derivative mode is closed-form when the source
    /// provides exact jets, finite-difference otherwise.
    pub fn new(
        chart: ChartDomain,
        signature: Signature,
        smoothness: Smoothness,
        source: Arc<dyn ComponentSource>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if source.dim() != chart.dim {
            return Err(GeomError::invalid(format!(
                "source dimension {} differs from chart dimension {}",
                source.dim(),
                chart.dim
            )));
        }
        if let Signature::Lorentzian { time_covector } = &signature {
            if time_covector.len() != chart.dim {
                return Err(GeomError::invalid("time covector has the wrong length"));
            }
        }
        for locus in smoothness.loci() {
            if !locus.within_box(&chart) {
                return Err(GeomError::invalid(format!(
                    "interface locus {locus:?} lies outside the chart box"
                )));
            }
        }
        let mode = if source.has_jets() {
            DerivativeMode::ClosedForm
        } else {
            DerivativeMode::FiniteDifference
        };
        let mut fd_step = [0.0; MAX_DIM];
        for (i, step) in fd_step.iter_mut().enumerate().take(chart.dim) {
            *step = DEFAULT_FD_FRACTION * chart.extent(i);
        }
        Ok(MetricField {
            chart,
            signature,
            smoothness,
            mode,
            label: label.into(),
            source,
            fd_step,
        })
    }

    /// Force finite differences even if the source has exact jets.
    pub fn with_finite_differences(mut self) -> Self {
        self.mode = DerivativeMode::FiniteDifference;
        self
    }

    pub fn with_fd_step(mut self, step: &[f64]) -> Self {
        self.fd_step[..step.len()].copy_from_slice(step);
        self
    }

    pub fn with_chart(mut self, chart: ChartDomain) -> Result<Self> {
        if chart.dim != self.chart.dim {
            return Err(GeomError::invalid("replacement chart has a different dimension"));
        }
        self.chart = chart;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn source(&self) -> &Arc<dyn ComponentSource> {
        &self.source
    }

    pub fn fd_step(&self) -> &[f64] {
        &self.fd_step[..self.dim()]
    }

    fn check_in_chart(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() || !self.chart.contains(x) {
            return Err(GeomError::OutsideChart { point: x.to_vec() });
        }
        Ok(())
    }

    /// Components at `x`; fails outside the chart box.
    pub fn eval(&self, x: &[f64]) -> Result<Matrix> {
        self.check_in_chart(x)?;
        Ok(self.value(x))
    }

    /// Components without the chart check (integrator stages may probe just
    /// outside the box before an exit event is located).
    #[inline]
    pub fn value(&self, x: &[f64]) -> Matrix {
        self.source.value(x)
    }

    pub fn norm_sq(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.eval(x)?;
        Ok(linalg::bilinear(&g, self.dim(), v, v))
    }

    pub fn inner(&self, x: &[f64], v: &[f64], w: &[f64]) -> f64 {
        linalg::bilinear(&self.value(x), self.dim(), v, w)
    }

    /// Eigenvalues of `g(x)`, sorted ascending.
    pub fn eigenvalues(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.eval(x)?;
        Ok(linalg::sym_eigenvalues(&g, self.dim()))
    }

    pub fn check_signature_at(&self, x: &[f64]) -> Result<()> {
        let ev = self.eigenvalues(x)?;
        if !self.signature.matches(&ev) {
            return Err(GeomError::SignatureMismatch {
                point: x.to_vec(),
                expected: self.signature.describe().to_string(),
                eigenvalues: ev,
            });
        }
        Ok(())
    }

    /// Future-directedness of a timelike vector; `true` for Riemannian metrics.
    pub fn is_future(&self, v: &[f64]) -> bool {
        match &self.signature {
            Signature::Riemannian => true,
            Signature::Lorentzian { time_covector } => linalg::dot(self.dim(), time_covector, v) > 0.0,
        }
    }

    pub fn loci(&self) -> &[Locus] {
        self.smoothness.loci()
    }

    /// Whether `x` lies within one stencil width of a declared interface.
    pub fn near_locus(&self, x: &[f64]) -> bool {
        let width = self.stencil_width();
        self.loci().iter().any(|l| l.distance(x) <= width)
    }

    fn stencil_width(&self) -> f64 {
        STENCIL_WIDTH_STEPS * self.fd_step().iter().copied().fold(0.0, f64::max)
    }

    /// Metric value plus first (and optionally second) partial derivatives.
    pub fn jet(&self, x: &[f64], second: bool) -> Result<MetricJet> {
        match self.mode {
            DerivativeMode::ClosedForm => self
                .source
                .jet(x, second)
                .ok_or_else(|| GeomError::invalid("source lost its closed-form jets")),
            DerivativeMode::FiniteDifference => Ok(self.fd_jet(x, second)),
        }
    }

    /// Checked variant used by the public curvature operations: the point
    /// must be in the box and, in FD mode, a full stencil must fit.
    pub fn checked_jet(&self, x: &[f64], second: bool) -> Result<MetricJet> {
        self.check_in_chart(x)?;
        if self.mode == DerivativeMode::FiniteDifference {
            let reach: Vec<f64> = self.fd_step().iter().map(|h| h * STENCIL_WIDTH_STEPS).collect();
            if !self.chart.contains_with_margin(x, &reach) {
                return Err(GeomError::StencilExitsChart { point: x.to_vec() });
            }
        }
        self.jet(x, second)
    }

    fn axis_stencil(&self, x: &[f64], axis: usize) -> StencilKind {
        let h = self.fd_step[axis];
        for locus in self.loci() {
            if let Locus::Coordinate { axis: a, value } = locus {
                if *a == axis && (x[axis] - value).abs() < STENCIL_WIDTH_STEPS * h {
                    return if x[axis] >= *value {
                        StencilKind::Forward
                    } else {
                        StencilKind::Backward
                    };
                }
            }
        }
        StencilKind::Central
    }

    fn fd_jet(&self, x: &[f64], second: bool) -> MetricJet {
        let n = self.dim();
        let mut cache: HashMap<[i8; MAX_DIM], Matrix> = HashMap::new();
        let mut sample = |offset: [i8; MAX_DIM]| -> Matrix {
            *cache.entry(offset).or_insert_with(|| {
                let mut y = [0.0; MAX_DIM];
                for i in 0..n {
                    y[i] = x[i] + offset[i] as f64 * self.fd_step[i];
                }
                self.source.value(&y[..n])
            })
        };
        let kinds: Vec<StencilKind> = (0..n).map(|a| self.axis_stencil(x, a)).collect();
        let mut jet = MetricJet::zero(n);
        jet.g = sample([0; MAX_DIM]);
        for a in 0..n {
            let h = self.fd_step[a];
            let mut acc = ZERO_MAT;
            for &(off, w) in kinds[a].first() {
                let mut o = [0i8; MAX_DIM];
                o[a] = off;
                add_scaled(&mut acc, &sample(o), w / h, n);
            }
            jet.dg[a] = acc;
        }
        if second {
            for a in 0..n {
                for b in a..n {
                    let mut acc = ZERO_MAT;
                    if a == b {
                        let h = self.fd_step[a];
                        for &(off, w) in kinds[a].second() {
                            let mut o = [0i8; MAX_DIM];
                            o[a] = off;
                            add_scaled(&mut acc, &sample(o), w / (h * h), n);
                        }
                    } else {
                        let (ha, hb) = (self.fd_step[a], self.fd_step[b]);
                        for &(oa, wa) in kinds[a].first() {
                            for &(ob, wb) in kinds[b].first() {
                                let mut o = [0i8; MAX_DIM];
                                o[a] = oa;
                                o[b] = ob;
                                add_scaled(&mut acc, &sample(o), wa * wb / (ha * hb), n);
                            }
                        }
                    }
                    jet.ddg[a][b] = acc;
                    jet.ddg[b][a] = acc;
                }
            }
        }
        jet
    }

    pub fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        let jet = self.checked_jet(x, false)?;
        Christoffel::from_jet(&jet).ok_or_else(|| GeomError::SingularMetric { point: x.to_vec() })
    }

    /// Christoffel symbols without chart checks (integrator hot path).
    #[inline]
    pub fn christoffel_unchecked(&self, x: &[f64]) -> Result<Christoffel> {
        let jet = self.jet(x, false)?;
        Christoffel::from_jet(&jet).ok_or_else(|| GeomError::SingularMetric { point: x.to_vec() })
    }

    /// Christoffel symbols and their derivatives without chart checks.
    pub fn connection_unchecked(&self, x: &[f64]) -> Result<ConnectionJet> {
        let jet = self.jet(x, true)?;
        ConnectionJet::from_jet(&jet).ok_or_else(|| GeomError::SingularMetric { point: x.to_vec() })
    }

    pub fn ricci_at(&self, x: &[f64]) -> Result<CurvatureSample> {
        let jet = self.checked_jet(x, true)?;
        let ricci = curvature::ricci_from_jet(&jet).ok_or_else(|| GeomError::SingularMetric { point: x.to_vec() })?;
        Ok(CurvatureSample {
            point: x.to_vec(),
            ricci,
            n: self.dim(),
            valid: !self.near_locus(x),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StencilKind {
    Central,
    Forward,
    Backward,
}

impl StencilKind {
    fn first(self) -> &'static [(i8, f64)] {
        match self {
            StencilKind::Central => &[(-1, -0.5), (1, 0.5)],
            StencilKind::Forward => &[(0, -1.5), (1, 2.0), (2, -0.5)],
            StencilKind::Backward => &[(0, 1.5), (-1, -2.0), (-2, 0.5)],
        }
    }

    fn second(self) -> &'static [(i8, f64)] {
        match self {
            StencilKind::Central => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            StencilKind::Forward => &[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)],
            StencilKind::Backward => &[(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)],
        }
    }
}

fn add_scaled(acc: &mut Matrix, m: &Matrix, w: f64, n: usize) {
    for i in 0..n {
        for j in 0..n {
            acc[i][j] += w * m[i][j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::dsl::builtin;
    use std::collections::BTreeMap;

    #[test]
    fn chart_rejects_degenerate_boxes() {
        assert!(ChartDomain::boxed(&[0.0], &[1.0]).is_err());
        assert!(ChartDomain::boxed(&[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(ChartDomain::boxed(&[0.0; 5], &[1.0; 5]).is_err());
        assert!(ChartDomain::boxed(&[0.0, 0.0], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn metric_eval_checks_the_box() {
        let m = builtin("euclidean2", &BTreeMap::new()).unwrap().metric;
        assert!(m.eval(&[100.0, 0.0]).is_err());
        let g = m.eval(&[0.3, -0.2]).unwrap();
        assert_eq!(g[0][0], 1.0);
        assert_eq!(g[0][1], 0.0);
        assert_eq!(g[1][1], 1.0);
    }

    #[test]
    fn remark_fixture_value() {
        let m = builtin("remark", &BTreeMap::new()).unwrap().metric;
        let g = m.eval(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(g[0][0], -2.0);
        assert_eq!(g[1][1], 1.0);
        assert_eq!(g[2][2], 1.0);
        assert_eq!(g[0][1], 0.0);
    }

    #[test]
    fn fd_and_closed_form_christoffels_agree() {
        let m = builtin("sphere2", &BTreeMap::new()).unwrap().metric;
        let fd = m.clone().with_finite_differences();
        let x = [0.8, 0.3];
        let a = m.christoffel_at(&x).unwrap();
        let b = fd.christoffel_at(&x).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a.get(k, i, j) - b.get(k, i, j)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn one_sided_stencils_near_interfaces() {
        // g_00 = -1, g_11 = a(t)^2 with a second-derivative jump at t = 0.5.
        let doc = r#"{"kind":"warped_product","n":2,"f":"piecewise(t < 0.5, 1, 1 - (t-0.5)^2)",
            "fiber":"flat","box":[[0,1],[-1,1]],"interfaces":["t = 0.5"]}"#;
        let m = dsl::parse_metric_spec(doc).unwrap().with_finite_differences();
        let step = m.fd_step()[0];
        // Just above the interface: forward stencil sees only the quadratic branch.
        let x = [0.5 + 0.5 * step, 0.0];
        let jet = m.jet(&x, true).unwrap();
        let t: f64 = x[0];
        let a = 1.0 - (t - 0.5).powi(2);
        let da = -2.0 * (t - 0.5);
        let dda = 2.0 * (da * da + a * -2.0);
        assert!((jet.dg[0][1][1] - 2.0 * a * da).abs() < 1e-6);
        assert!(
            (jet.ddg[0][0][1][1] - dda).abs() < 1e-4,
            "{} vs {}",
            jet.ddg[0][0][1][1],
            dda
        );
        assert!(!m.ricci_at(&x).unwrap().valid);
        assert!(m.ricci_at(&[0.3, 0.0]).unwrap().valid);
    }
}
