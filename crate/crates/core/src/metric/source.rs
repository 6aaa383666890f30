//! Component sources: the functions `x ↦ g_ij(x)` behind a [`MetricField`].
//!
//! [`MetricField`]: super::MetricField

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::jet::Jet;
use crate::linalg::{Matrix, MAX_DIM, ZERO_MAT};

/// Metric value with first and second partial derivatives.
/// `dg[k][i][j] = ∂_k g_ij`, `ddg[k][l][i][j] = ∂_k ∂_l g_ij`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub n: usize,
    pub g: Matrix,
    pub dg: [Matrix; MAX_DIM],
    pub ddg: [[Matrix; MAX_DIM]; MAX_DIM],
}

impl MetricJet {
    pub fn zero(n: usize) -> Self {
        MetricJet {
            n,
            g: ZERO_MAT,
            dg: [ZERO_MAT; MAX_DIM],
            ddg: [[ZERO_MAT; MAX_DIM]; MAX_DIM],
        }
    }

    /// Assemble from per-entry jets of the upper triangle.
    pub fn from_entries(n: usize, entry: impl Fn(usize, usize) -> Jet) -> Self {
        let mut out = MetricJet::zero(n);
        for i in 0..n {
            for j in i..n {
                let e = entry(i, j);
                out.g[i][j] = e.v;
                out.g[j][i] = e.v;
                for k in 0..n {
                    out.dg[k][i][j] = e.d[k];
                    out.dg[k][j][i] = e.d[k];
                    for l in 0..n {
                        out.ddg[k][l][i][j] = e.h[k][l];
                        out.ddg[k][l][j][i] = e.h[k][l];
                    }
                }
            }
        }
        out
    }
}

pub trait ComponentSource: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Symmetric components at `x` (leading `n × n` block).
    fn value(&self, x: &[f64]) -> Matrix;

    /// Whether [`ComponentSource::jet`] returns exact derivatives.
    fn has_jets(&self) -> bool {
        false
    }

    /// Exact derivatives; `second` requests the Hessian block as well.
    fn jet(&self, _x: &[f64], _second: bool) -> Option<MetricJet> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct ConstantSource {
    n: usize,
    g: Matrix,
}

impl ConstantSource {
    pub fn new(n: usize, g: Matrix) -> Self {
        ConstantSource { n, g }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut g = ZERO_MAT;
        for (i, d) in diag.iter().enumerate() {
            g[i][i] = *d;
        }
        ConstantSource { n: diag.len(), g }
    }
}

impl ComponentSource for ConstantSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _x: &[f64]) -> Matrix {
        self.g
    }

    fn has_jets(&self) -> bool {
        true
    }

    fn jet(&self, _x: &[f64], _second: bool) -> Option<MetricJet> {
        let mut j = MetricJet::zero(self.n);
        j.g = self.g;
        Some(j)
    }
}

/// Components given as expressions of the upper triangle, row-major.
#[derive(Debug, Clone)]
pub struct ExpressionSource {
    n: usize,
    entries: Vec<Expr>,
}

impl ExpressionSource {
    pub fn new(n: usize, entries: Vec<Expr>) -> Self {
        assert_eq!(entries.len(), n * (n + 1) / 2, "upper triangle expected");
        ExpressionSource { n, entries }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[self.index(i, j)]
    }
}

impl ComponentSource for ExpressionSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Matrix {
        let mut g = ZERO_MAT;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.entry(i, j).eval(x);
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        g
    }

    fn has_jets(&self) -> bool {
        true
    }

    fn jet(&self, x: &[f64], _second: bool) -> Option<MetricJet> {
        let vars = Jet::vars(&x[..self.n]);
        Some(MetricJet::from_entries(self.n, |i, j| self.entry(i, j).eval_jet(&vars)))
    }
}

/// A scalar profile function with two derivatives, e.g. a warping function.
pub trait Profile: Send + Sync + fmt::Debug {
    /// `(f(t), f'(t), f''(t))`.
    fn eval(&self, t: f64) -> (f64, f64, f64);
}

/// Profile backed by a one-variable expression.
#[derive(Debug, Clone)]
pub struct ExprProfile(pub Expr);

impl Profile for ExprProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let j = self.0.eval_jet(&[Jet::var(t, 0)]);
        (j.v, j.d[0], j.h[0][0])
    }
}

/// Constant-curvature fiber in conformally flat coordinates:
/// flat `δ`, sphere `4δ/(1+|x|²)²`, hyperbolic `4δ/(1−|x|²)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fiber {
    Flat,
    Sphere,
    Hyperbolic,
}

impl Fiber {
    fn conformal(self, s: Jet) -> Jet {
        match self {
            Fiber::Flat => Jet::constant(1.0),
            Fiber::Sphere => (s + 1.0).powf(-2.0) * 4.0,
            Fiber::Hyperbolic => (s * -1.0 + 1.0).powf(-2.0) * 4.0,
        }
    }

    fn conformal_value(self, s: f64) -> f64 {
        match self {
            Fiber::Flat => 1.0,
            Fiber::Sphere => 4.0 / ((1.0 + s) * (1.0 + s)),
            Fiber::Hyperbolic => 4.0 / ((1.0 - s) * (1.0 - s)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fiber::Flat => "flat",
            Fiber::Sphere => "sphere",
            Fiber::Hyperbolic => "hyperbolic",
        }
    }
}

/// `−dt² + f(t)² h` with `h` a constant-curvature fiber metric. Coordinate
/// 0 is `t`, coordinates `1..n` parametrize the fiber.
#[derive(Debug, Clone)]
pub struct WarpedProductSource {
    n: usize,
    profile: Arc<dyn Profile>,
    fiber: Fiber,
}

impl WarpedProductSource {
    pub fn new(n: usize, profile: Arc<dyn Profile>, fiber: Fiber) -> Self {
        WarpedProductSource { n, profile, fiber }
    }

    pub fn profile(&self) -> &Arc<dyn Profile> {
        &self.profile
    }
}

impl ComponentSource for WarpedProductSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Matrix {
        let (f, _, _) = self.profile.eval(x[0]);
        let s: f64 = x[1..self.n].iter().map(|v| v * v).sum();
        let w = f * f * self.fiber.conformal_value(s);
        let mut g = ZERO_MAT;
        g[0][0] = -1.0;
        for i in 1..self.n {
            g[i][i] = w;
        }
        g
    }

    fn has_jets(&self) -> bool {
        true
    }

    fn jet(&self, x: &[f64], _second: bool) -> Option<MetricJet> {
        let (f0, f1, f2) = self.profile.eval(x[0]);
        let f = Jet::var(x[0], 0).chain(f0, f1, f2);
        let mut s = Jet::constant(0.0);
        for i in 1..self.n {
            let xi = Jet::var(x[i], i);
            s = s + xi * xi;
        }
        let w = f * f * self.fiber.conformal(s);
        Some(MetricJet::from_entries(self.n, |i, j| {
            if i != j {
                Jet::constant(0.0)
            } else if i == 0 {
                Jet::constant(-1.0)
            } else {
                w
            }
        }))
    }
}

/// One analytic piece of a radial profile `φ(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RadialPiece {
    /// `amp · sin(ω r + phase)`, curvature `ω²`.
    Sine { amp: f64, omega: f64, phase: f64 },
    /// `slope · r + offset`, curvature 0.
    Linear { slope: f64, offset: f64 },
    /// `amp · sinh(ω r + phase)`, curvature `−ω²`.
    Sinh { amp: f64, omega: f64, phase: f64 },
}

impl RadialPiece {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            RadialPiece::Sine { amp, omega, phase } => {
                let (s, c) = (omega * r + phase).sin_cos();
                (amp * s, amp * omega * c, -amp * omega * omega * s)
            }
            RadialPiece::Linear { slope, offset } => (slope * r + offset, slope, 0.0),
            RadialPiece::Sinh { amp, omega, phase } => {
                let a = omega * r + phase;
                (amp * a.sinh(), amp * omega * a.cosh(), amp * omega * omega * a.sinh())
            }
        }
    }

    /// Gaussian curvature `−φ''/φ` of this piece.
    pub fn curvature(&self) -> f64 {
        match *self {
            RadialPiece::Sine { omega, .. } => omega * omega,
            RadialPiece::Linear { .. } => 0.0,
            RadialPiece::Sinh { omega, .. } => -omega * omega,
        }
    }
}

/// Piecewise radial profile. Piece `k` is used on `[breaks[k-1], breaks[k])`;
/// the first piece must be regular at the pole (`φ(0) = 0`, `φ'(0) = 1`, no
/// phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub pieces: Vec<RadialPiece>,
    pub breaks: Vec<f64>,
}

impl RadialProfile {
    pub fn single(piece: RadialPiece) -> Self {
        RadialProfile {
            pieces: vec![piece],
            breaks: vec![],
        }
    }

    /// Constant curvature `k` near the pole, matched `C¹` to further pieces
    /// of curvatures `outer` at radii `breaks`.
    pub fn matched(k_inner: f64, outer: &[(f64, f64)]) -> Self {
        let mut pieces = vec![pole_piece(k_inner)];
        let mut breaks = Vec::new();
        for &(radius, k) in outer {
            let prev = *pieces.last().unwrap();
            let (v, d, _) = prev.eval(radius);
            pieces.push(match_piece(k, radius, v, d));
            breaks.push(radius);
        }
        RadialProfile { pieces, breaks }
    }

    fn piece_index(&self, r: f64) -> usize {
        self.breaks.iter().take_while(|&&b| r >= b).count()
    }

    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        self.pieces[self.piece_index(r)].eval(r)
    }

    /// First zero of `φ` beyond the pole, scanning with step `dr` up to `r_max`.
    pub fn first_zero(&self, r_max: f64) -> Option<f64> {
        let dr = 1e-3;
        let mut r = dr;
        let mut prev = self.eval(r).0;
        while r < r_max {
            let next = r + dr;
            let v = self.eval(next).0;
            if v <= 0.0 && prev > 0.0 {
                let (mut a, mut b) = (r, next);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if self.eval(m).0 > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = v;
            r = next;
        }
        None
    }

    pub fn min_curvature(&self) -> f64 {
        self.pieces
            .iter()
            .map(RadialPiece::curvature)
            .fold(f64::INFINITY, f64::min)
    }
}

fn pole_piece(k: f64) -> RadialPiece {
    if k > 0.0 {
        let w = k.sqrt();
        RadialPiece::Sine {
            amp: 1.0 / w,
            omega: w,
            phase: 0.0,
        }
    } else if k < 0.0 {
        let w = (-k).sqrt();
        RadialPiece::Sinh {
            amp: 1.0 / w,
            omega: w,
            phase: 0.0,
        }
    } else {
        RadialPiece::Linear {
            slope: 1.0,
            offset: 0.0,
        }
    }
}

fn match_piece(k: f64, r: f64, v: f64, d: f64) -> RadialPiece {
    if k > 0.0 {
        let w = k.sqrt();
        // amp sin(w r + c) = v, amp w cos(w r + c) = d
        let angle = v.atan2(d / w);
        let amp = (v * v + (d / w) * (d / w)).sqrt();
        RadialPiece::Sine {
            amp,
            omega: w,
            phase: angle - w * r,
        }
    } else if k < 0.0 {
        let w = (-k).sqrt();
        // amp sinh(a) = v, amp w cosh(a) = d; requires d/w > |v|.
        let a = (v / (d / w)).atanh();
        let amp = v / a.sinh();
        RadialPiece::Sinh {
            amp,
            omega: w,
            phase: a - w * r,
        }
    } else {
        RadialPiece::Linear {
            slope: d,
            offset: v - d * r,
        }
    }
}

/// Rotationally symmetric metric `dr² + φ(r)² dΩ²` written in Cartesian-like
/// coordinates around the pole: `g = ψ δ + χ x xᵀ` with `ψ = (φ/r)²` and
/// `χ = (1 − ψ)/r²`. Straight lines through the origin are unit-speed
/// geodesics and `|x|` is the distance to the pole.
#[derive(Debug, Clone)]
pub struct RevolutionSource {
    n: usize,
    profile: RadialProfile,
}

/// Below this value of `ω² r²` the pole piece uses its power series.
const SERIES_THRESHOLD: f64 = 0.5;

impl RevolutionSource {
    pub fn new(n: usize, profile: RadialProfile) -> Self {
        RevolutionSource { n, profile }
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// `(ψ, ψ_s, ψ_ss, χ, χ_s, χ_ss)` as functions of `s = r²`.
    fn radial_terms(&self, s: f64) -> [f64; 6] {
        let r = s.sqrt();
        let idx = self.profile.piece_index(r);
        let piece = self.profile.pieces[idx];
        if idx == 0 {
            let (sign, w2) = match piece {
                RadialPiece::Sine { omega, .. } => (-1.0, omega * omega),
                RadialPiece::Sinh { omega, .. } => (1.0, omega * omega),
                RadialPiece::Linear { .. } => return [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            };
            let u = w2 * s;
            if u < SERIES_THRESHOLD {
                let (f, f1, f2, g, g1, g2) = sinc_sq_series(sign, u);
                return [f, w2 * f1, w2 * w2 * f2, w2 * g, w2 * w2 * g1, w2 * w2 * w2 * g2];
            }
        }
        // Closed form in r, converted to s-derivatives.
        let (p0, p1, p2) = piece.eval(r);
        let rj = Jet::var(r, 0);
        let phi = rj.chain(p0, p1, p2);
        let psi = (phi / rj).powf(2.0);
        let chi = (Jet::constant(1.0) - psi) / (rj * rj);
        let to_s = |j: Jet| {
            let d1 = j.d[0] / (2.0 * r);
            let d2 = (j.h[0][0] - j.d[0] / r) / (4.0 * s);
            (j.v, d1, d2)
        };
        let (a, b, c) = to_s(psi);
        let (d, e, f) = to_s(chi);
        [a, b, c, d, e, f]
    }
}

/// For `F(u) = sin²(√u)/u` (sign = −1) or `sinh²(√u)/u` (sign = +1) and
/// `G(u) = (1 − F(u))/u`: values and two derivatives from the power series
/// `F(u) = Σ sign^k 2^{2k+1} u^k / (2k+2)!`.
fn sinc_sq_series(sign: f64, u: f64) -> (f64, f64, f64, f64, f64, f64) {
    const TERMS: usize = 18;
    let mut coeff = [0.0; TERMS];
    let mut fact = 2.0; // (2k+2)! for k = 0
    let mut pow2 = 2.0; // 2^{2k+1}
    let mut sgn = 1.0;
    for (k, c) in coeff.iter_mut().enumerate() {
        if k > 0 {
            fact *= (2 * k + 1) as f64 * (2 * k + 2) as f64;
            pow2 *= 4.0;
            sgn *= sign;
        }
        *c = sgn * pow2 / fact;
    }
    let poly = |c: &[f64]| {
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (k, &ck) in c.iter().enumerate() {
            let kf = k as f64;
            v += ck * u.powi(k as i32);
            if k >= 1 {
                d1 += ck * kf * u.powi(k as i32 - 1);
            }
            if k >= 2 {
                d2 += ck * kf * (kf - 1.0) * u.powi(k as i32 - 2);
            }
        }
        (v, d1, d2)
    };
    let (f, f1, f2) = poly(&coeff);
    let g_coeff: Vec<f64> = coeff[1..].iter().map(|c| -c).collect();
    let (g, g1, g2) = poly(&g_coeff);
    (f, f1, f2, g, g1, g2)
}

impl ComponentSource for RevolutionSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Matrix {
        let s: f64 = x[..self.n].iter().map(|v| v * v).sum();
        let t = self.radial_terms(s);
        let mut g = ZERO_MAT;
        for i in 0..self.n {
            for j in i..self.n {
                g[i][j] = t[3] * x[i] * x[j] + if i == j { t[0] } else { 0.0 };
                g[j][i] = g[i][j];
            }
        }
        g
    }

    fn has_jets(&self) -> bool {
        true
    }

    fn jet(&self, x: &[f64], _second: bool) -> Option<MetricJet> {
        let vars = Jet::vars(&x[..self.n]);
        let mut s = Jet::constant(0.0);
        for v in &vars {
            s = s + *v * *v;
        }
        let t = self.radial_terms(s.v);
        let psi = s.chain(t[0], t[1], t[2]);
        let chi = s.chain(t[3], t[4], t[5]);
        Some(MetricJet::from_entries(self.n, |i, j| {
            let base = chi * vars[i] * vars[j];
            if i == j {
                base + psi
            } else {
                base
            }
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_closed_form_near_threshold() {
        for &sign in &[-1.0, 1.0] {
            let u: f64 = 0.3;
            let y = u.sqrt();
            let exact = if sign < 0.0 {
                y.sin().powi(2) / u
            } else {
                y.sinh().powi(2) / u
            };
            let (f, _, _, g, _, _) = sinc_sq_series(sign, u);
            assert!((f - exact).abs() < 1e-15);
            assert!((g - (1.0 - exact) / u).abs() < 1e-14);
        }
    }

    #[test]
    fn revolution_jet_is_continuous_across_series_switch() {
        let src = RevolutionSource::new(2, RadialProfile::single(pole_piece(1.0)));
        let r_switch = SERIES_THRESHOLD.sqrt();
        let below = src.jet(&[r_switch - 1e-9, 0.0], true).unwrap();
        let above = src.jet(&[r_switch + 1e-9, 0.0], true).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((below.g[i][j] - above.g[i][j]).abs() < 1e-8);
                for k in 0..2 {
                    assert!((below.dg[k][i][j] - above.dg[k][i][j]).abs() < 1e-7);
                    for l in 0..2 {
                        assert!((below.ddg[k][l][i][j] - above.ddg[k][l][i][j]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn matched_profile_is_c1() {
        let p = RadialProfile::matched(4.0, &[(0.5, 1.0)]);
        let (a0, a1, _) = p.pieces[0].eval(0.5);
        let (b0, b1, _) = p.pieces[1].eval(0.5);
        assert!((a0 - b0).abs() < 1e-14);
        assert!((a1 - b1).abs() < 1e-14);
        let z = p.first_zero(10.0).unwrap();
        assert!(z > 2.5 && z < 3.2, "{z}");
        let q = RadialProfile::matched(1.0, &[(0.5, -1.0)]);
        let (c0, c1, _) = q.pieces[1].eval(0.5);
        assert!((c0 - 0.5f64.sin()).abs() < 1e-14 && (c1 - 0.5f64.cos()).abs() < 1e-14);
    }
}
