//! Two-point geodesics by Newton shooting with Jacobi-field derivatives.

use super::{integrate_flow, FlowSpec, StepControl, Termination};
use crate::error::{GeomError, Result};
use crate::linalg::{self, Matrix, MAX_DIM, ZERO_MAT};
use crate::metric::MetricField;

const MAX_ITERATIONS: usize = 40;
const RESIDUAL_TOL: f64 = 1e-10;

/// `exp_p(w)` and its differential `d(exp_p)_w` (columns are the images of
/// the coordinate basis), or `None` when the geodesic leaves the chart.
fn exp_with_differential(
    metric: &MetricField,
    p: &[f64],
    w: &[f64],
    control: &StepControl,
) -> Option<(Vec<f64>, Matrix)> {
    let n = metric.dim();
    let fields = (0..n)
        .map(|j| {
            let mut e = [0.0; MAX_DIM];
            e[j] = 1.0;
            ([0.0; MAX_DIM], e)
        })
        .collect();
    let spec = FlowSpec {
        fields,
        ..FlowSpec::default()
    };
    let sol = integrate_flow(metric, p, w, &spec, 1.0, control).ok()?;
    if sol.termination != Termination::ReachedT {
        return None;
    }
    let x = sol.position(1.0).ok()?;
    let mut d = ZERO_MAT;
    for j in 0..n {
        let (y, _) = sol.jacobi_field(j, 1.0).ok()?;
        for k in 0..n {
            d[k][j] = y[k];
        }
    }
    Some((x, d))
}

/// Initial velocity `w` with `exp_p(w) = q`, by damped Newton iteration
/// starting from `guess` (default `q − p`).
pub fn shoot(
    metric: &MetricField,
    p: &[f64],
    q: &[f64],
    guess: Option<&[f64]>,
    control: &StepControl,
) -> Result<Vec<f64>> {
    let n = metric.dim();
    metric.eval(p)?;
    metric.eval(q)?;
    let mut w: Vec<f64> = match guess {
        Some(g) => g.to_vec(),
        None => (0..n).map(|i| q[i] - p[i]).collect(),
    };
    if w.iter().all(|c| *c == 0.0) {
        return Ok(w);
    }
    let residual = |x: &[f64]| -> f64 { linalg::norm(n, &(0..n).map(|i| x[i] - q[i]).collect::<Vec<_>>()) };
    let Some((mut x, mut d)) = exp_with_differential(metric, p, &w, control) else {
        return Err(GeomError::NoConvergence(format!(
            "shooting from {p:?}: initial guess leaves the chart"
        )));
    };
    let mut r = residual(&x);
    for _ in 0..MAX_ITERATIONS {
        if r < RESIDUAL_TOL {
            return Ok(w);
        }
        let f: Vec<f64> = (0..n).map(|i| q[i] - x[i]).collect();
        let Some(delta) = linalg::solve(&d, n, &f) else {
            break;
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial: Vec<f64> = (0..n).map(|i| w[i] + step * delta[i]).collect();
            if let Some((xt, dt)) = exp_with_differential(metric, p, &trial, control) {
                let rt = residual(&xt);
                if rt < r {
                    w = trial;
                    x = xt;
                    d = dt;
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
    if r < 1e3 * RESIDUAL_TOL {
        return Ok(w);
    }
    Err(GeomError::NoConvergence(format!(
        "shooting from {p:?} to {q:?} stalled with residual {r:.3e}"
    )))
}

const CONTINUATION_STEPS: usize = 4;

/// Shooting along the targets `p + s(q − p)`, `s = 1/k, …, 1`, each from the
/// rescaled previous solution; stays on the branch of short geodesics.
fn shoot_continued(metric: &MetricField, p: &[f64], q: &[f64], control: &StepControl) -> Result<Vec<f64>> {
    let n = metric.dim();
    let k = CONTINUATION_STEPS;
    let mut w: Vec<f64> = (0..n).map(|i| (q[i] - p[i]) / k as f64).collect();
    for j in 1..=k {
        let s = j as f64 / k as f64;
        let target: Vec<f64> = (0..n).map(|i| p[i] + s * (q[i] - p[i])).collect();
        w = shoot(metric, p, &target, Some(&w), control)?;
        if j < k {
            let scale = (j + 1) as f64 / j as f64;
            w.iter_mut().for_each(|c| *c *= scale);
        }
    }
    Ok(w)
}

/// Riemannian distance estimate `|w|_g` of the geodesic found by
/// continuation along the segment from `p` to `q`, falling back to shooting
/// from the straight-line guess.
pub fn riemannian_distance(metric: &MetricField, p: &[f64], q: &[f64], control: &StepControl) -> Result<f64> {
    let w = match shoot_continued(metric, p, q, control) {
        Ok(w) => w,
        Err(_) => shoot(metric, p, q, None, control)?,
    };
    Ok(metric.norm_sq(p, &w)?.max(0.0).sqrt())
}
