//! Geodesic flow: fixed-step RK4 with step-doubling error control, event
//! location at interfaces and chart faces, dense output, and variational
//! (Jacobi) and parallel-transport fields carried along the geodesic.

mod shooting;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg::{self, Vector, MAX_DIM};
use crate::metric::{Christoffel, ConnectionJet, MetricField, TangentVector};
use crate::quadrature::gauss_legendre_on;

pub use shooting::{riemannian_distance, shoot};

/// Maximum number of Jacobi fields carried along one geodesic.
pub const MAX_FIELDS: usize = MAX_DIM;
/// Maximum number of parallel-transported vectors.
pub const MAX_TRANSPORTS: usize = MAX_DIM - 1;

const STATE_LEN: usize = 2 * MAX_DIM + 2 * MAX_DIM * MAX_FIELDS + MAX_DIM * MAX_TRANSPORTS + 1;

type State = [f64; STATE_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Step attempted first; halved until the local error estimate passes.
    pub base_step: f64,
    pub min_step: f64,
    /// Local error tolerance on position and velocity per step (relative to
    /// `max(1, |y|)`). Non-finite disables error control.
    pub tolerance: f64,
    /// Width to which interface crossings and chart exits are located.
    pub event_tolerance: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            base_step: 0.02,
            min_step: 1e-9,
            tolerance: 1e-11,
            event_tolerance: 1e-10,
        }
    }
}

impl StepControl {
    /// Plain RK4 with step `h`; events are still located.
    pub fn fixed(h: f64) -> Self {
        StepControl {
            base_step: h,
            min_step: h * 1e-6,
            tolerance: f64::INFINITY,
            event_tolerance: 1e-10,
        }
    }

    fn adaptive(&self) -> bool {
        self.tolerance.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedT,
    ExitedChart,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Initial data of one variation field: `(δx(0), δv(0))`.
pub type FieldInit = (Vector, Vector);

#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    fields: usize,
    transports: usize,
    accumulate: bool,
}

impl Layout {
    fn field_x(&self, a: usize) -> usize {
        2 * self.n + 2 * self.n * a
    }

    fn field_v(&self, a: usize) -> usize {
        self.field_x(a) + self.n
    }

    fn transport(&self, b: usize) -> usize {
        2 * self.n + 2 * self.n * self.fields + self.n * b
    }

    fn acc(&self) -> usize {
        self.transport(self.transports)
    }

    fn len(&self) -> usize {
        self.acc() + usize::from(self.accumulate)
    }

    /// Error control uses position and velocity only.
    fn controlled(&self) -> usize {
        2 * self.n
    }
}

/// Dense geodesic with optional variation and transport fields.
#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    layout: Layout,
    times: Vec<f64>,
    states: Vec<State>,
    derivs: Vec<State>,
    pub energy: Vec<f64>,
    pub termination: Termination,
    /// Node indices at which the volume Jacobian changed sign.
    pub flagged: Vec<usize>,
    /// Interface crossing parameters.
    pub crossings: Vec<f64>,
    j0: f64,
    abs_det_g: Vec<f64>,
}

struct Flow<'a> {
    metric: &'a MetricField,
    layout: Layout,
    j0: f64,
}

impl Flow<'_> {
    fn rhs(&self, y: &State) -> Option<State> {
        let Layout {
            n,
            fields,
            transports,
            accumulate,
        } = self.layout;
        let x = &y[..n];
        let v = &y[n..2 * n];
        let mut dy = [0.0; STATE_LEN];
        let second = fields > 0;
        let jet = self.metric.jet(x, second).ok()?;
        let (gamma, conn) = if second {
            let c = ConnectionJet::from_jet(&jet)?;
            (c.christoffel, Some(c))
        } else {
            (Christoffel::from_jet(&jet)?, None)
        };
        dy[..n].copy_from_slice(v);
        let acc = gamma.acceleration(v);
        dy[n..2 * n].copy_from_slice(&acc[..n]);
        if let Some(conn) = conn {
            for a in 0..fields {
                let ox = self.layout.field_x(a);
                let ov = self.layout.field_v(a);
                for k in 0..n {
                    dy[ox + k] = y[ov + k];
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let vv = v[i] * v[j];
                            let mut d = 0.0;
                            for m in 0..n {
                                d += conn.dgamma[m][k][i][j] * y[ox + m];
                            }
                            s += d * vv + 2.0 * gamma.gamma[k][i][j] * v[i] * y[ov + j];
                        }
                    }
                    dy[ov + k] = -s;
                }
            }
        }
        for b in 0..transports {
            let o = self.layout.transport(b);
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += gamma.gamma[k][i][j] * v[i] * y[o + j];
                    }
                }
                dy[o + k] = -s;
            }
        }
        if accumulate {
            dy[self.layout.acc()] =
                volume_jacobian(&self.layout, y, linalg::determinant(&jet.g, n).abs(), self.j0).abs();
        }
        if dy[..self.layout.len()].iter().all(|d| d.is_finite()) {
            Some(dy)
        } else {
            None
        }
    }

    fn rk4(&self, y: &State, k1: &State, h: f64) -> Option<State> {
        let len = self.layout.len();
        let mut tmp = *y;
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = self.rhs(&tmp)?;
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = self.rhs(&tmp)?;
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        let k4 = self.rhs(&tmp)?;
        let mut out = *y;
        for i in 0..len {
            out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Some(out)
    }

    /// One controlled step of size `h`; returns the new state and the error
    /// estimate (zero without error control).
    fn step(&self, y: &State, k1: &State, h: f64, control: &StepControl) -> Option<(State, f64)> {
        if !control.adaptive() {
            return Some((self.rk4(y, k1, h)?, 0.0));
        }
        let full = self.rk4(y, k1, h)?;
        let mid = self.rk4(y, k1, 0.5 * h)?;
        let kmid = self.rhs(&mid)?;
        let two = self.rk4(&mid, &kmid, 0.5 * h)?;
        let c = self.layout.controlled();
        let mut err = 0.0_f64;
        for i in 0..c {
            let scale = two[i].abs().max(1.0);
            err = err.max((two[i] - full[i]).abs() / (15.0 * scale));
        }
        Some((two, err))
    }
}

/// `√|det g| det[v, Y_1, …] / j0`, the volume Jacobian of the flow.
fn volume_jacobian(layout: &Layout, y: &State, abs_det_g: f64, j0: f64) -> f64 {
    let n = layout.n;
    if layout.fields + 1 != n {
        return f64::NAN;
    }
    let mut cols = [[0.0; MAX_DIM]; MAX_DIM];
    cols[0][..n].copy_from_slice(&y[n..2 * n]);
    for a in 0..layout.fields {
        let o = layout.field_x(a);
        cols[a + 1][..n].copy_from_slice(&y[o..o + n]);
    }
    abs_det_g.sqrt() * linalg::det_columns(&cols, n) / j0
}

fn chart_margin(metric: &MetricField, x: &[f64]) -> f64 {
    let c = &metric.chart;
    (0..c.dim)
        .map(|i| (x[i] - c.lower[i]).min(c.upper[i] - x[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Options for [`integrate_flow`].
#[derive(Debug, Clone, Default)]
pub struct FlowSpec {
    /// Jacobi fields `(Y(0), Y'(0))`.
    pub fields: Vec<FieldInit>,
    /// Vectors parallel-transported along the geodesic.
    pub transports: Vec<Vector>,
    /// When set (requires `n − 1` fields), accumulate `∫|J|` with `J`
    /// normalized by this value.
    pub accumulate_with: Option<f64>,
}

/// Integrate the geodesic equation (and any requested variational fields)
/// from `(x0, v0)` to parameter `t_end`.
pub fn integrate_flow(
    metric: &MetricField,
    x0: &[f64],
    v0: &[f64],
    spec: &FlowSpec,
    t_end: f64,
    control: &StepControl,
) -> Result<GeodesicSolution> {
    let n = metric.dim();
    if spec.fields.len() > MAX_FIELDS || spec.transports.len() > MAX_TRANSPORTS {
        return Err(GeomError::invalid("too many variation or transport fields"));
    }
    if spec.accumulate_with.is_some() && spec.fields.len() + 1 != n {
        return Err(GeomError::invalid("volume accumulation needs n − 1 Jacobi fields"));
    }
    if !(t_end > 0.0) {
        return Err(GeomError::invalid(format!(
            "integration horizon must be positive, got {t_end}"
        )));
    }
    if x0.len() != n || !metric.chart.contains(x0) {
        return Err(GeomError::DomainExit { t: 0.0, target: t_end });
    }
    let layout = Layout {
        n,
        fields: spec.fields.len(),
        transports: spec.transports.len(),
        accumulate: spec.accumulate_with.is_some(),
    };
    let flow = Flow {
        metric,
        layout,
        j0: spec.accumulate_with.unwrap_or(1.0),
    };
    let mut y = [0.0; STATE_LEN];
    y[..n].copy_from_slice(x0);
    y[n..2 * n].copy_from_slice(&v0[..n]);
    for (a, (jx, jv)) in spec.fields.iter().enumerate() {
        y[layout.field_x(a)..layout.field_x(a) + n].copy_from_slice(&jx[..n]);
        y[layout.field_v(a)..layout.field_v(a) + n].copy_from_slice(&jv[..n]);
    }
    for (b, e) in spec.transports.iter().enumerate() {
        y[layout.transport(b)..layout.transport(b) + n].copy_from_slice(&e[..n]);
    }
    let k1 = flow
        .rhs(&y)
        .ok_or_else(|| GeomError::SingularMetric { point: x0.to_vec() })?;

    let mut sol = GeodesicSolution {
        layout,
        times: vec![0.0],
        states: vec![y],
        derivs: vec![k1],
        energy: Vec::new(),
        termination: Termination::ReachedT,
        flagged: Vec::new(),
        crossings: Vec::new(),
        j0: flow.j0,
        abs_det_g: Vec::new(),
    };
    let loci = metric.loci();
    let mut t = 0.0;
    let mut k1 = k1;
    let mut h_try = control.base_step;
    loop {
        if t >= t_end {
            sol.termination = Termination::ReachedT;
            break;
        }
        let mut h = h_try.min(t_end - t);
        let h_full = h;
        let landing_on_end = h == t_end - t;
        let accepted = loop {
            match flow.step(&y, &k1, h, control) {
                Some((next, err)) if err <= control.tolerance => break Some(next),
                _ => {
                    h *= 0.5;
                    if h < control.min_step {
                        break None;
                    }
                }
            }
        };
        let Some(mut next) = accepted else {
            sol.termination = Termination::StepFailure;
            break;
        };
        let mut h_taken = h;
        let mut exited = false;
        // Chart exit takes precedence over interface crossings in the same step.
        if chart_margin(metric, &next[..n]) < 0.0 {
            let (lo, lo_state) = locate(&flow, &y, &k1, h, control, |s| chart_margin(metric, &s[..n]) < 0.0);
            h_taken = lo;
            match lo_state {
                Some(s) => next = s,
                None => {
                    sol.termination = Termination::ExitedChart;
                    break;
                }
            }
            exited = true;
        }
        if !exited {
            let crossing = loci.iter().any(|l| l.signed(&y[..n]) * l.signed(&next[..n]) < 0.0);
            if crossing {
                let start = y;
                let crosses = |s: &State| loci.iter().any(|l| l.signed(&start[..n]) * l.signed(&s[..n]) < 0.0);
                let (lo, _) = locate(&flow, &y, &k1, h, control, crosses);
                let hi = (lo + control.event_tolerance).min(h);
                if let Some((s, _)) = flow.step(&y, &k1, hi, control) {
                    next = s;
                    h_taken = hi;
                    sol.crossings.push(t + hi);
                }
            }
        }
        t = if landing_on_end && h_taken == h_full {
            t_end
        } else {
            t + h_taken
        };
        let Some(k_next) = flow.rhs(&next) else {
            sol.termination = Termination::StepFailure;
            break;
        };
        y = next;
        k1 = k_next;
        sol.times.push(t);
        sol.states.push(y);
        sol.derivs.push(k1);
        if exited {
            sol.termination = Termination::ExitedChart;
            break;
        }
        h_try = if h_taken < h_try {
            (2.0 * h_taken).min(control.base_step)
        } else {
            control.base_step
        };
        if h_try < control.min_step {
            h_try = control.base_step;
        }
    }
    if sol.times.len() < 2 && sol.termination != Termination::ReachedT {
        return match sol.termination {
            Termination::ExitedChart => Err(GeomError::DomainExit { t: 0.0, target: t_end }),
            _ => Err(GeomError::StepUnderflow {
                t: 0.0,
                step: control.min_step,
            }),
        };
    }
    sol.finish(metric);
    Ok(sol)
}

/// Largest partial step `lo ∈ [0, h]` (to event tolerance) for which
/// `event` is false, with the state there.
fn locate(
    flow: &Flow,
    y: &State,
    k1: &State,
    h: f64,
    control: &StepControl,
    event: impl Fn(&State) -> bool,
) -> (f64, Option<State>) {
    let mut lo = 0.0;
    let mut hi = h;
    let mut lo_state = None;
    while hi - lo > control.event_tolerance {
        let mid = 0.5 * (lo + hi);
        match flow.step(y, k1, mid, control) {
            Some((s, _)) if !event(&s) => {
                lo = mid;
                lo_state = Some(s);
            }
            _ => hi = mid,
        }
    }
    (lo, lo_state)
}

impl GeodesicSolution {
    fn finish(&mut self, metric: &MetricField) {
        let n = self.layout.n;
        self.energy = self
            .states
            .iter()
            .map(|s| metric.inner(&s[..n], &s[n..2 * n], &s[n..2 * n]))
            .collect();
        self.abs_det_g = self
            .states
            .iter()
            .map(|s| linalg::determinant(&metric.value(&s[..n]), n).abs())
            .collect();
        if self.layout.fields + 1 == n {
            let mut prev = self.node_jacobian(0);
            for i in 1..self.states.len() {
                let j = self.node_jacobian(i);
                if j == 0.0 {
                    continue;
                }
                if prev != 0.0 && j.signum() != prev.signum() {
                    self.flagged.push(i);
                }
                prev = j;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.n
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn node(&self, i: usize) -> GeodesicState {
        let n = self.layout.n;
        GeodesicState {
            t: self.times[i],
            position: self.states[i][..n].to_vec(),
            velocity: self.states[i][n..2 * n].to_vec(),
        }
    }

    pub fn nodes(&self) -> Vec<GeodesicState> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.t_end().abs());
        if t < self.t_start() - slack || t > self.t_end() + slack {
            return Err(GeomError::SpanViolation {
                requested: t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        Ok(())
    }

    /// Cubic Hermite interpolation of the full state.
    fn interpolate(&self, t: f64) -> State {
        let i = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => return self.states[i],
            Err(0) => return self.states[0],
            Err(i) if i >= self.times.len() => return *self.states.last().unwrap(),
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (y0, y1, d0, d1) = (
            &self.states[i],
            &self.states[i + 1],
            &self.derivs[i],
            &self.derivs[i + 1],
        );
        let mut out = [0.0; STATE_LEN];
        for k in 0..self.layout.len() {
            out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
        }
        out
    }

    pub fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.check_span(t)?;
        Ok(self.interpolate(t)[..self.layout.n].to_vec())
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>> {
        self.check_span(t)?;
        let n = self.layout.n;
        Ok(self.interpolate(t)[n..2 * n].to_vec())
    }

    pub fn state(&self, t: f64) -> Result<GeodesicState> {
        self.check_span(t)?;
        let s = self.interpolate(t);
        let n = self.layout.n;
        Ok(GeodesicState {
            t,
            position: s[..n].to_vec(),
            velocity: s[n..2 * n].to_vec(),
        })
    }

    /// Jacobi field `a` at `t`: `(Y(t), Y'(t))`.
    pub fn jacobi_field(&self, a: usize, t: f64) -> Result<(Vector, Vector)> {
        self.check_span(t)?;
        if a >= self.layout.fields {
            return Err(GeomError::invalid("no such Jacobi field"));
        }
        let s = self.interpolate(t);
        let n = self.layout.n;
        let mut y = [0.0; MAX_DIM];
        let mut dy = [0.0; MAX_DIM];
        y[..n].copy_from_slice(&s[self.layout.field_x(a)..self.layout.field_x(a) + n]);
        dy[..n].copy_from_slice(&s[self.layout.field_v(a)..self.layout.field_v(a) + n]);
        Ok((y, dy))
    }

    /// Transported vector `b` at `t`.
    pub fn transported(&self, b: usize, t: f64) -> Result<Vector> {
        self.check_span(t)?;
        if b >= self.layout.transports {
            return Err(GeomError::invalid("no such transported vector"));
        }
        let s = self.interpolate(t);
        let mut e = [0.0; MAX_DIM];
        let o = self.layout.transport(b);
        e[..self.layout.n].copy_from_slice(&s[o..o + self.layout.n]);
        Ok(e)
    }

    fn node_jacobian(&self, i: usize) -> f64 {
        volume_jacobian(&self.layout, &self.states[i], self.abs_det_g[i], self.j0)
    }

    /// Volume Jacobian `J(t)` (requires `n − 1` Jacobi fields).
    pub fn jacobian(&self, metric: &MetricField, t: f64) -> Result<f64> {
        self.check_span(t)?;
        if self.layout.fields + 1 != self.layout.n {
            return Err(GeomError::invalid("volume Jacobian needs n − 1 Jacobi fields"));
        }
        let s = self.interpolate(t);
        let n = self.layout.n;
        let det = linalg::determinant(&metric.value(&s[..n]), n).abs();
        Ok(volume_jacobian(&self.layout, &s, det, self.j0))
    }

    /// Jacobian values at the integration nodes.
    pub fn node_jacobians(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node_jacobian(i)).collect()
    }

    /// `∫₀ᵗ |J|` (requires accumulation).
    pub fn accumulated(&self, t: f64) -> Result<f64> {
        self.check_span(t)?;
        if !self.layout.accumulate {
            return Err(GeomError::invalid("solution was integrated without accumulation"));
        }
        Ok(self.interpolate(t)[self.layout.acc()])
    }

    /// `max |g(γ̇,γ̇)(t) − g(γ̇,γ̇)(0)|` over nodes.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x*, v*, energy, J` (J empty when unavailable).
    pub fn to_csv(&self) -> String {
        let n = self.layout.n;
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",x{i}");
        }
        for i in 0..n {
            let _ = write!(out, ",v{i}");
        }
        out.push_str(",energy,J\n");
        let has_j = self.layout.fields + 1 == n;
        for i in 0..self.len() {
            let s = &self.states[i];
            let _ = write!(out, "{:.12e}", self.times[i]);
            for v in &s[..2 * n] {
                let _ = write!(out, ",{v:.12e}");
            }
            let _ = write!(out, ",{:.12e},", self.energy[i]);
            if has_j {
                let _ = write!(out, "{:.12e}", self.node_jacobian(i));
            }
            out.push('\n');
        }
        out
    }
}

/// Integrate the geodesic with initial tangent vector `v` up to `t_end`.
pub fn integrate_geodesic(
    metric: &MetricField,
    v: &TangentVector,
    t_end: f64,
    control: &StepControl,
) -> Result<GeodesicSolution> {
    integrate_flow(metric, &v.base, &v.components, &FlowSpec::default(), t_end, control)
}

/// `exp_p(w)`; fails if the geodesic leaves the chart before parameter 1.
pub fn exp_map(metric: &MetricField, p: &[f64], w: &[f64], control: &StepControl) -> Result<Vec<f64>> {
    if w.iter().all(|c| *c == 0.0) {
        metric.eval(p)?;
        return Ok(p.to_vec());
    }
    let sol = integrate_flow(metric, p, w, &FlowSpec::default(), 1.0, control)?;
    if sol.termination != Termination::ReachedT {
        return Err(GeomError::DomainExit {
            t: sol.t_end(),
            target: 1.0,
        });
    }
    sol.position(1.0)
}

/// Gauss-Legendre nodes per node interval for [`arc_length`].
const ARC_GL_ORDER: usize = 4;

/// `∫ √|g(γ̇,γ̇)| dt` over `[t1, t2]` using the dense output.
pub fn arc_length(metric: &MetricField, sol: &GeodesicSolution, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 < t2) {
        return Err(GeomError::SpanViolation {
            requested: t2,
            start: t1,
            end: t1,
        });
    }
    sol.check_span(t1)?;
    sol.check_span(t2)?;
    let n = sol.dim();
    let mut breaks: Vec<f64> = vec![t1];
    breaks.extend(sol.times.iter().copied().filter(|t| *t > t1 && *t < t2));
    breaks.push(t2);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        for (t, wt) in gauss_legendre_on(ARC_GL_ORDER, w[0], w[1]) {
            let s = sol.interpolate(t);
            let q = metric.inner(&s[..n], &s[n..2 * n], &s[n..2 * n]);
            total += wt * q.abs().sqrt();
        }
    }
    Ok(total)
}

/// Length of a polyline, each segment measured with the metric at its
/// midpoint.
pub fn polyline_length(metric: &MetricField, points: &[Vec<f64>]) -> Result<f64> {
    let n = metric.dim();
    let mut total = 0.0;
    for w in points.windows(2) {
        let mid: Vec<f64> = (0..n).map(|i| 0.5 * (w[0][i] + w[1][i])).collect();
        let d: Vec<f64> = (0..n).map(|i| w[1][i] - w[0][i]).collect();
        total += metric.norm_sq(&mid, &d)?.abs().sqrt();
    }
    Ok(total)
}

/// Orthonormal frame and volume Jacobian of the normal exponential map
/// along one normal geodesic.
#[derive(Debug, Clone)]
pub struct TransportFrame {
    pub foot: Vec<f64>,
    pub normal: Vec<f64>,
    pub solution: GeodesicSolution,
    /// `max |g(E_a,E_b) − δ_ab|` and `max |g(E_a, γ̇)|` over nodes.
    pub frame_deviation: f64,
}

impl TransportFrame {
    pub fn jacobian(&self, metric: &MetricField, tau: f64) -> Result<f64> {
        self.solution.jacobian(metric, tau)
    }
}

/// Jacobi initial data for the normal exponential map of `Σ` at the foot
/// point, for a given list of tangent vectors.
pub fn normal_fields(frame: &crate::hypersurface::NormalFrame, tangents: &[Vector]) -> Vec<FieldInit> {
    let n = frame.n;
    tangents
        .iter()
        .map(|e| {
            let mut dv = [0.0; MAX_DIM];
            for k in 0..n {
                dv[k] = (0..n).map(|j| frame.dnormal[k][j] * e[j]).sum();
            }
            (*e, dv)
        })
        .collect()
}

/// Integrate the future normal geodesic from `q ∈ Σ` with the Jacobi fields
/// of the normal exponential map and a transported orthonormal frame.
pub fn normal_jacobian(
    metric: &MetricField,
    sigma: &crate::hypersurface::Hypersurface,
    q: &[f64],
    tau_max: f64,
    control: &StepControl,
) -> Result<TransportFrame> {
    let n = metric.dim();
    let normal = sigma.unit_normal(metric, q)?;
    let frame = sigma.normal_field(metric, q)?;
    let basis = sigma.tangent_frame(metric, q, &normal)?;
    let g = metric.value(q);
    let mut cols = vec![normal];
    cols.extend(basis.iter().copied());
    let j0 = linalg::determinant(&g, n).abs().sqrt() * linalg::det_columns(&cols, n);
    let spec = FlowSpec {
        fields: normal_fields(&frame, &basis),
        transports: basis.clone(),
        accumulate_with: Some(j0),
    };
    let solution = integrate_flow(metric, q, &normal[..n], &spec, tau_max, control)?;
    let mut deviation = 0.0_f64;
    for i in 0..solution.len() {
        let s = &solution.states[i];
        let x = &s[..n];
        let v = &s[n..2 * n];
        let gx = metric.value(x);
        let frame: Vec<&[f64]> = (0..basis.len())
            .map(|b| &s[solution.layout.transport(b)..solution.layout.transport(b) + n])
            .collect();
        for a in 0..frame.len() {
            deviation = deviation.max(linalg::bilinear(&gx, n, frame[a], v).abs());
            for b in 0..frame.len() {
                let target = if a == b { 1.0 } else { 0.0 };
                deviation = deviation.max((linalg::bilinear(&gx, n, frame[a], frame[b]) - target).abs());
            }
        }
    }
    Ok(TransportFrame {
        foot: q.to_vec(),
        normal: normal[..n].to_vec(),
        solution,
        frame_deviation: deviation,
    })
}

/// `g`-orthonormal completion of a unit vector `v` (Riemannian).
pub fn orthonormal_complement(metric: &MetricField, p: &[f64], v: &[f64]) -> Result<Vec<Vector>> {
    let n = metric.dim();
    let g = metric.value(p);
    let mut vectors = vec![linalg::to_vector(&v[..n])];
    for i in 0..n {
        let mut e = [0.0; MAX_DIM];
        e[i] = 1.0;
        vectors.push(e);
    }
    // Gram-Schmidt greedily, skipping near-dependent coordinate vectors.
    let mut out: Vec<Vector> = Vec::new();
    for w in vectors {
        let mut u = w;
        for e in &out {
            let c = linalg::bilinear(&g, n, &u, e);
            for k in 0..n {
                u[k] -= c * e[k];
            }
        }
        let q = linalg::bilinear(&g, n, &u, &u);
        if q > 1e-8 {
            let s = q.sqrt();
            for uk in u.iter_mut().take(n) {
                *uk /= s;
            }
            out.push(u);
        }
        if out.len() == n {
            break;
        }
    }
    if out.len() != n {
        return Err(GeomError::SingularMetric { point: p.to_vec() });
    }
    Ok(out[1..].to_vec())
}

/// Radial geodesic from `p` with unit initial velocity `v` and the Jacobi
/// fields `Y(0) = 0, Y'(0) = e_a`; `J` is normalized so that `J(r) ~ r^{n−1}`.
pub fn polar_ray(
    metric: &MetricField,
    p: &[f64],
    v: &[f64],
    r_max: f64,
    control: &StepControl,
) -> Result<GeodesicSolution> {
    let n = metric.dim();
    let complement = orthonormal_complement(metric, p, v)?;
    let g = metric.value(p);
    let mut cols = vec![linalg::to_vector(&v[..n])];
    cols.extend(complement.iter().copied());
    let j0 = linalg::determinant(&g, n).abs().sqrt() * linalg::det_columns(&cols, n);
    let spec = FlowSpec {
        fields: complement.iter().map(|e| ([0.0; MAX_DIM], *e)).collect(),
        transports: Vec::new(),
        accumulate_with: Some(j0),
    };
    integrate_flow(metric, p, v, &spec, r_max, control)
}

#[cfg(test)]
mod tests;
