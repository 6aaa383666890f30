//! JSON-framed metric documents and the builtin fixture library.
//!
//! ```json
//! {"kind": "components", "n": 2, "coords": ["t", "x"],
//!  "box": [[0, 1], [-1, 1]], "signature": "lorentzian", "time_covector": [1, 0],
//!  "components": ["-1", "0", "exp(2*t)"], "interfaces": ["t = 0.5"]}
//! ```
//!
//! `kind` is one of `builtin` (with `name` and optional `params`),
//! `components` (upper triangle row by row, or a full nested `n × n` array)
//! or `warped_product` (`f` as an expression in `t`, `fiber` one of
//! `flat | sphere | hyperbolic`). Any document may carry a `sigma` object
//! describing a hypersurface and its patch.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use super::source::{
    ComponentSource, ConstantSource, ExprProfile, ExpressionSource, Fiber, Profile, RadialPiece, RadialProfile,
    RevolutionSource, WarpedProductSource,
};
use super::{ChartDomain, Locus, MetricField, Signature, Smoothness};
use crate::error::{GeomError, Result};
use crate::expr::{Expr, ExprError};
use crate::hypersurface::{Hypersurface, Patch};
use crate::models::{ComparisonModel, MODEL_COLLAPSE_GAP};

/// Names accepted by `{"kind": "builtin"}`.
pub const BUILTIN_NAMES: &[&str] = &[
    "minkowski2",
    "minkowski3",
    "minkowski4",
    "minkowski_hyperboloid",
    "euclidean2",
    "euclidean3",
    "sphere2",
    "sphere_normal2",
    "sphere_normal3",
    "sphere_stereo2",
    "sphere_stereo3",
    "remark",
    "model",
    "rw_c11",
    "revolution_c11",
];

/// A parsed document: the metric, an optional hypersurface, and for
/// rotationally symmetric fixtures the pole.
#[derive(Debug, Clone)]
pub struct MetricDocument {
    pub metric: MetricField,
    pub sigma: Option<Hypersurface>,
    pub pole: Option<Vec<f64>>,
    /// Comparison model the fixture is built from, when there is one.
    pub model: Option<ComparisonModel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    kind: String,
    name: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    n: Option<usize>,
    coords: Option<Vec<String>>,
    #[serde(rename = "box")]
    bbox: Option<Vec<[f64; 2]>>,
    signature: Option<String>,
    time_covector: Option<Vec<f64>>,
    components: Option<Value>,
    f: Option<String>,
    fiber: Option<Fiber>,
    #[serde(default)]
    interfaces: Vec<String>,
    sigma: Option<RawSigma>,
    probe: Option<Vec<f64>>,
    mode: Option<String>,
    label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSigma {
    level_set: String,
    patch: RawPatch,
    #[serde(default = "default_search_margin")]
    search_margin: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPatch {
    params: Vec<String>,
    #[serde(rename = "box")]
    bbox: Vec<[f64; 2]>,
    embedding: Vec<String>,
}

fn default_search_margin() -> f64 {
    0.5
}

/// Parse a document and return only its metric.
pub fn parse_metric_spec(document: &str) -> Result<MetricField> {
    Ok(parse_document(document)?.metric)
}

pub fn parse_document(document: &str) -> Result<MetricDocument> {
    let raw: RawDocument = serde_json::from_str(document).map_err(|e| GeomError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let ctx = Ctx { text: document };
    let mut doc = match raw.kind.as_str() {
        "builtin" => {
            let name = raw
                .name
                .as_deref()
                .ok_or_else(|| GeomError::invalid("builtin document needs a `name`"))?;
            builtin(name, &raw.params)?
        }
        "components" => components_document(&raw, &ctx)?,
        "warped_product" => warped_document(&raw, &ctx)?,
        other => {
            return Err(GeomError::invalid(format!(
                "unknown document kind `{other}` (expected builtin, components or warped_product)"
            )))
        }
    };
    if let Some(sigma) = &raw.sigma {
        doc.sigma = Some(parse_sigma(sigma, &doc.metric.chart.names, &raw.params, &ctx)?);
    }
    match raw.mode.as_deref() {
        None | Some("closed_form") => {}
        Some("finite_difference") => doc.metric = doc.metric.clone().with_finite_differences(),
        Some(other) => return Err(GeomError::invalid(format!("unknown derivative mode `{other}`"))),
    }
    if let Some(label) = raw.label {
        doc.metric.label = label;
    }
    let probe = raw.probe.unwrap_or_else(|| doc.metric.chart.center());
    doc.metric.check_signature_at(&probe)?;
    Ok(doc)
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    /// Map an expression error to a document position by locating the
    /// quoted expression in the source text.
    fn expr_error(&self, src: &str, err: ExprError) -> GeomError {
        let needle = serde_json::to_string(src).unwrap_or_else(|_| format!("\"{src}\""));
        if let Some(offset) = self.text.find(&needle) {
            let before = &self.text[..offset];
            let line = before.matches('\n').count() + 1;
            let line_start = before.rfind('\n').map_or(0, |i| i + 1);
            let column = self.text[line_start..offset].chars().count() + 1 + err.column;
            GeomError::Syntax {
                line,
                column,
                message: err.message,
            }
        } else {
            GeomError::Syntax {
                line: 0,
                column: err.column,
                message: format!("in `{src}`: {}", err.message),
            }
        }
    }

    fn parse(&self, src: &str, vars: &[String], params: &BTreeMap<String, f64>) -> Result<Expr> {
        Expr::parse(src, vars, params).map_err(|e| self.expr_error(src, e))
    }
}

fn chart_from(raw: &RawDocument, n: usize, default_names: Vec<String>) -> Result<ChartDomain> {
    let names = raw.coords.clone().unwrap_or(default_names);
    let bbox = raw
        .bbox
        .as_ref()
        .ok_or_else(|| GeomError::invalid("document needs a coordinate `box`"))?;
    if bbox.len() != n {
        return Err(GeomError::invalid(format!("box has {} axes but n = {n}", bbox.len())));
    }
    ChartDomain::new(
        bbox.iter().map(|b| b[0]).collect(),
        bbox.iter().map(|b| b[1]).collect(),
        names,
    )
}

fn signature_from(raw: &RawDocument, n: usize) -> Result<Signature> {
    match raw.signature.as_deref().unwrap_or("riemannian") {
        "riemannian" => Ok(Signature::Riemannian),
        "lorentzian" => {
            let covector = raw.time_covector.clone().unwrap_or_else(|| {
                let mut c = vec![0.0; n];
                c[0] = 1.0;
                c
            });
            Ok(Signature::Lorentzian {
                time_covector: covector,
            })
        }
        other => Err(GeomError::invalid(format!("unknown signature `{other}`"))),
    }
}

fn smoothness_from(interfaces: &[String], names: &[String]) -> Result<Smoothness> {
    if interfaces.is_empty() {
        return Ok(Smoothness::Smooth);
    }
    let loci = interfaces
        .iter()
        .map(|s| parse_interface(s, names))
        .collect::<Result<Vec<_>>>()?;
    Ok(Smoothness::C11 { loci })
}

/// `"t = 0.5"` → coordinate locus.
fn parse_interface(text: &str, names: &[String]) -> Result<Locus> {
    let (lhs, rhs) = text
        .split_once('=')
        .ok_or_else(|| GeomError::invalid(format!("interface `{text}` is not of the form `coord = value`")))?;
    let name = lhs.trim();
    let axis = names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| GeomError::invalid(format!("interface `{text}` names unknown coordinate `{name}`")))?;
    let value: f64 = rhs
        .trim()
        .parse()
        .map_err(|_| GeomError::invalid(format!("interface `{text}` has a non-numeric value")))?;
    Ok(Locus::Coordinate { axis, value })
}

fn components_document(raw: &RawDocument, ctx: &Ctx) -> Result<MetricDocument> {
    let n = raw
        .n
        .ok_or_else(|| GeomError::invalid("components document needs `n`"))?;
    let default_names = (0..n).map(|i| format!("x{i}")).collect();
    let chart = chart_from(raw, n, default_names)?;
    let comps = raw
        .components
        .as_ref()
        .ok_or_else(|| GeomError::invalid("components document needs `components`"))?;
    let list = comps
        .as_array()
        .ok_or_else(|| GeomError::invalid("`components` must be an array"))?;
    let expected = n * (n + 1) / 2;
    let parse = |v: &Value| -> Result<Expr> {
        match v {
            Value::String(s) => ctx.parse(s, &chart.names, &raw.params),
            Value::Number(x) => Ok(Expr::constant(x.as_f64().unwrap_or(f64::NAN))),
            _ => Err(GeomError::invalid("components must be expression strings or numbers")),
        }
    };
    let entries = if list.iter().all(Value::is_array) && !list.is_empty() {
        if list.len() != n || list.iter().any(|row| row.as_array().map_or(0, Vec::len) != n) {
            let found = list.iter().map(|row| row.as_array().map_or(0, Vec::len)).sum();
            return Err(GeomError::IncompleteMatrix {
                n,
                expected: n * n,
                found,
            });
        }
        let full: Vec<Vec<Expr>> = list
            .iter()
            .map(|row| row.as_array().unwrap().iter().map(&parse).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut upper = Vec::with_capacity(expected);
        for i in 0..n {
            for j in i..n {
                if !full[i][j].same_tree(&full[j][i]) {
                    return Err(GeomError::Asymmetric { i, j });
                }
                upper.push(full[i][j].clone());
            }
        }
        upper
    } else {
        if list.len() != expected {
            return Err(GeomError::IncompleteMatrix {
                n,
                expected,
                found: list.len(),
            });
        }
        list.iter().map(parse).collect::<Result<Vec<_>>>()?
    };
    let signature = signature_from(raw, n)?;
    let smoothness = smoothness_from(&raw.interfaces, &chart.names)?;
    let source = Arc::new(ExpressionSource::new(n, entries));
    let metric = MetricField::new(chart, signature, smoothness, source, "components")?;
    Ok(MetricDocument {
        metric,
        sigma: None,
        pole: None,
        model: None,
    })
}

fn warped_document(raw: &RawDocument, ctx: &Ctx) -> Result<MetricDocument> {
    let n = raw
        .n
        .ok_or_else(|| GeomError::invalid("warped_product document needs `n`"))?;
    let mut default_names = vec!["t".to_string()];
    default_names.extend((1..n).map(|i| format!("x{i}")));
    let chart = chart_from(raw, n, default_names)?;
    let f_src = raw
        .f
        .as_deref()
        .ok_or_else(|| GeomError::invalid("warped_product document needs `f`"))?;
    let f = ctx.parse(f_src, &chart.names[..1], &raw.params)?;
    let fiber = raw.fiber.unwrap_or(Fiber::Flat);
    let mut covector = vec![0.0; n];
    covector[0] = 1.0;
    let signature = Signature::Lorentzian {
        time_covector: raw.time_covector.clone().unwrap_or(covector),
    };
    let smoothness = smoothness_from(&raw.interfaces, &chart.names)?;
    let source = Arc::new(WarpedProductSource::new(n, Arc::new(ExprProfile(f)), fiber));
    let metric = MetricField::new(chart, signature, smoothness, source, "warped_product")?;
    Ok(MetricDocument {
        metric,
        sigma: None,
        pole: None,
        model: None,
    })
}

fn parse_sigma(raw: &RawSigma, names: &[String], params: &BTreeMap<String, f64>, ctx: &Ctx) -> Result<Hypersurface> {
    let level = ctx.parse(&raw.level_set, names, params)?;
    let dim = raw.patch.params.len();
    if dim + 1 != names.len() || raw.patch.bbox.len() != dim || raw.patch.embedding.len() != names.len() {
        return Err(GeomError::invalid(
            "sigma patch needs n−1 parameters, an (n−1)-axis box and n embedding expressions",
        ));
    }
    for (a, b) in raw.patch.bbox.iter().enumerate() {
        if !(b[1] > b[0]) {
            return Err(GeomError::invalid(format!("patch box has no extent on axis {a}")));
        }
    }
    let embedding = raw
        .patch
        .embedding
        .iter()
        .map(|s| ctx.parse(s, &raw.patch.params, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(Hypersurface::new(
        level,
        Patch {
            lower: raw.patch.bbox.iter().map(|b| b[0]).collect(),
            upper: raw.patch.bbox.iter().map(|b| b[1]).collect(),
            embedding,
        },
        raw.search_margin,
    ))
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn dim_param(params: &BTreeMap<String, f64>, default: usize) -> Result<usize> {
    let n = param(params, "n", default as f64);
    if n.fract() != 0.0 || !(2.0..=4.0).contains(&n) {
        return Err(GeomError::invalid(format!(
            "dimension parameter n = {n} must be 2, 3 or 4"
        )));
    }
    Ok(n as usize)
}

fn names_tx(n: usize) -> Vec<String> {
    let mut names = vec!["t".to_string()];
    names.extend((1..n).map(|i| format!("x{i}")));
    names
}

fn names_x(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn time_covector(n: usize) -> Signature {
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    Signature::Lorentzian { time_covector: c }
}

/// `Σ = {t = 0}` with patch `[−w, w]^{n−1}` embedded as `(0, u₁, …)`.
pub fn time_slice(n: usize, half_width: f64, search_margin: f64) -> Hypersurface {
    let level = Expr::parse(&names_tx(n)[0], &names_tx(n), &BTreeMap::new()).expect("valid level set");
    let params: Vec<String> = (1..n).map(|i| format!("u{i}")).collect();
    let mut embedding = vec![Expr::constant(0.0)];
    for p in &params {
        embedding.push(Expr::parse(p, &params, &BTreeMap::new()).expect("valid embedding"));
    }
    Hypersurface::new(
        level,
        Patch {
            lower: vec![-half_width; n - 1],
            upper: vec![half_width; n - 1],
            embedding,
        },
        search_margin,
    )
}

fn plain(metric: MetricField) -> MetricDocument {
    MetricDocument {
        metric,
        sigma: None,
        pole: None,
        model: None,
    }
}

/// Resolve a builtin fixture by name.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<MetricDocument> {
    match name {
        "minkowski2" | "minkowski3" | "minkowski4" => {
            let n: usize = name[9..].parse().unwrap();
            let mut diag = vec![1.0; n];
            diag[0] = -1.0;
            let half = param(params, "half_width", 5.0);
            let chart = ChartDomain::new(vec![-half; n], vec![half; n], names_tx(n))?;
            let metric = MetricField::new(
                chart,
                time_covector(n),
                Smoothness::Smooth,
                Arc::new(ConstantSource::diagonal(&diag)),
                name,
            )?;
            let mut doc = plain(metric);
            doc.sigma = Some(time_slice(n, param(params, "patch_half_width", 1.0), 0.5));
            doc.model = Some(ComparisonModel::new(0.0, 0.0, n)?);
            Ok(doc)
        }
        "minkowski_hyperboloid" => {
            let n = dim_param(params, 2)?;
            let mut diag = vec![1.0; n];
            diag[0] = -1.0;
            let chart = ChartDomain::new(
                vec![0.5; 1].into_iter().chain(vec![-2.0; n - 1]).collect(),
                {
                    let mut u = vec![4.0];
                    u.extend(vec![2.0; n - 1]);
                    u
                },
                names_tx(n),
            )?;
            let metric = MetricField::new(
                chart,
                time_covector(n),
                Smoothness::Smooth,
                Arc::new(ConstantSource::diagonal(&diag)),
                name,
            )?;
            let names = names_tx(n);
            let radicand: Vec<String> = names[1..].iter().map(|x| format!("{x}^2")).collect();
            let level = Expr::parse(
                &format!("t - sqrt(1 + {})", radicand.join(" + ")),
                &names,
                &BTreeMap::new(),
            )
            .expect("valid level set");
            let pnames: Vec<String> = (1..n).map(|i| format!("u{i}")).collect();
            let psq: Vec<String> = pnames.iter().map(|u| format!("{u}^2")).collect();
            let mut embedding =
                vec![Expr::parse(&format!("sqrt(1 + {})", psq.join(" + ")), &pnames, &BTreeMap::new()).unwrap()];
            for p in &pnames {
                embedding.push(Expr::parse(p, &pnames, &BTreeMap::new()).unwrap());
            }
            let w = param(params, "patch_half_width", 0.5);
            let mut doc = plain(metric);
            doc.sigma = Some(Hypersurface::new(
                level,
                Patch {
                    lower: vec![-w; n - 1],
                    upper: vec![w; n - 1],
                    embedding,
                },
                0.5,
            ));
            doc.model = Some(ComparisonModel::new(0.0, (n - 1) as f64, n)?);
            Ok(doc)
        }
        "euclidean2" | "euclidean3" => {
            let n: usize = name[9..].parse().unwrap();
            let chart = ChartDomain::new(vec![-5.0; n], vec![5.0; n], names_x(n))?;
            let metric = MetricField::new(
                chart,
                Signature::Riemannian,
                Smoothness::Smooth,
                Arc::new(ConstantSource::diagonal(&vec![1.0; n])),
                name,
            )?;
            let mut doc = plain(metric);
            doc.pole = Some(vec![0.0; n]);
            Ok(doc)
        }
        "sphere2" => {
            let names = vec!["th".to_string(), "ph".to_string()];
            let entries = vec![
                Expr::constant(1.0),
                Expr::constant(0.0),
                Expr::parse("sin(th)^2", &names, &BTreeMap::new()).unwrap(),
            ];
            let chart = ChartDomain::new(vec![0.05, -2.0 * PI], vec![PI - 0.05, 2.0 * PI], names)?;
            let metric = MetricField::new(
                chart,
                Signature::Riemannian,
                Smoothness::Smooth,
                Arc::new(ExpressionSource::new(2, entries)),
                name,
            )?;
            Ok(plain(metric))
        }
        "sphere_normal2" | "sphere_normal3" => {
            let n: usize = name[13..].parse().unwrap();
            let half = if n == 2 { 2.2 } else { 1.8 };
            revolution_fixture(
                name,
                n,
                half,
                RadialProfile::single(RadialPiece::Sine {
                    amp: 1.0,
                    omega: 1.0,
                    phase: 0.0,
                }),
                Smoothness::Smooth,
            )
        }
        "sphere_stereo2" | "sphere_stereo3" => {
            let n: usize = name[13..].parse().unwrap();
            let half = param(params, "half_width", 20.0);
            let names = names_x(n);
            let sq: Vec<String> = names.iter().map(|x| format!("{x}^2")).collect();
            let conformal = format!("4 / (1 + {})^2", sq.join(" + "));
            let mut entries = Vec::new();
            for i in 0..n {
                for j in i..n {
                    entries.push(if i == j {
                        Expr::parse(&conformal, &names, &BTreeMap::new()).unwrap()
                    } else {
                        Expr::constant(0.0)
                    });
                }
            }
            let chart = ChartDomain::new(vec![-half; n], vec![half; n], names)?;
            let metric = MetricField::new(
                chart,
                Signature::Riemannian,
                Smoothness::Smooth,
                Arc::new(ExpressionSource::new(n, entries)),
                name,
            )?;
            let mut doc = plain(metric);
            doc.pole = Some(vec![0.0; n]);
            Ok(doc)
        }
        "remark" => {
            let eps = param(params, "eps", 1.0);
            let names = vec!["x".to_string(), "y".to_string(), "z".to_string()];
            let mut p = BTreeMap::new();
            p.insert("eps".to_string(), eps);
            let entries = vec![
                Expr::parse("-1 - eps*x^2*y^2*z^2", &names, &p).unwrap(),
                Expr::constant(0.0),
                Expr::constant(0.0),
                Expr::constant(1.0),
                Expr::constant(0.0),
                Expr::constant(1.0),
            ];
            let chart = ChartDomain::new(vec![-2.0; 3], vec![2.0; 3], names)?;
            let metric = MetricField::new(
                chart,
                Signature::Lorentzian {
                    time_covector: vec![1.0, 0.0, 0.0],
                },
                Smoothness::Smooth,
                Arc::new(ExpressionSource::new(3, entries)),
                format!("remark(eps={eps})"),
            )?;
            Ok(plain(metric))
        }
        "model" => {
            let n = dim_param(params, 2)?;
            let model = ComparisonModel::new(param(params, "kappa", 0.0), param(params, "beta", 0.0), n)?;
            let metric = model.metric_field(param(params, "horizon", 3.0), param(params, "half_width", 0.5))?;
            let mut doc = plain(metric);
            doc.sigma = Some(time_slice(n, param(params, "patch_half_width", 0.25), 0.5));
            doc.model = Some(model);
            Ok(doc)
        }
        "rw_c11" => {
            let n = dim_param(params, 2)?;
            let profile = RwProfile::new(
                param(params, "kappa", 0.0),
                param(params, "kappa2", 1.0),
                param(params, "ts", 0.4),
                n,
            )?;
            let horizon = param(params, "horizon", 3.0);
            let (lo, _) = profile.base.time_range(horizon);
            let hi = match profile.collapse() {
                Some(c) => (c - MODEL_COLLAPSE_GAP).min(horizon.max(profile.ts + 0.1)),
                None => horizon,
            };
            if hi <= profile.ts {
                return Err(GeomError::invalid("rw_c11 interface lies beyond the chart horizon"));
            }
            let half = param(params, "half_width", 0.5);
            let mut lower = vec![lo];
            let mut upper = vec![hi];
            lower.extend(vec![-half; n - 1]);
            upper.extend(vec![half; n - 1]);
            let chart = ChartDomain::new(lower, upper, names_tx(n))?;
            let ts = profile.ts;
            let fiber = profile.base.fiber;
            let metric = MetricField::new(
                chart,
                time_covector(n),
                Smoothness::C11 {
                    loci: vec![Locus::Coordinate { axis: 0, value: ts }],
                },
                Arc::new(WarpedProductSource::new(n, Arc::new(profile), fiber)),
                format!("rw_c11(n={n})"),
            )?;
            let mut doc = plain(metric);
            doc.sigma = Some(time_slice(n, param(params, "patch_half_width", 0.25), 0.5));
            doc.model = Some(ComparisonModel::new(param(params, "kappa", 0.0), 0.0, n)?);
            Ok(doc)
        }
        "revolution_c11" => {
            let n = dim_param(params, 2)?;
            let k_inner = param(params, "k_inner", 4.0);
            let k_outer = param(params, "k_outer", 1.0);
            let r0 = param(params, "r0", 0.5);
            let profile = RadialProfile::matched(k_inner, &[(r0, k_outer)]);
            let zero = profile.first_zero(20.0).unwrap_or(20.0);
            let half = param(params, "half_width", (0.95 * zero / (n as f64).sqrt()).min(5.0));
            revolution_fixture(
                name,
                n,
                half,
                profile,
                Smoothness::C11 {
                    loci: vec![Locus::Sphere {
                        center: vec![0.0; n],
                        radius: r0,
                    }],
                },
            )
        }
        other => Err(GeomError::UnknownBuiltin(format!(
            "{other} (known: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn revolution_fixture(
    name: &str,
    n: usize,
    half: f64,
    profile: RadialProfile,
    smoothness: Smoothness,
) -> Result<MetricDocument> {
    let chart = ChartDomain::new(vec![-half; n], vec![half; n], names_x(n))?;
    let source: Arc<dyn ComponentSource> = Arc::new(RevolutionSource::new(n, profile));
    let metric = MetricField::new(chart, Signature::Riemannian, smoothness, source, name)?;
    let mut doc = plain(metric);
    doc.pole = Some(vec![0.0; n]);
    Ok(doc)
}

/// Robertson-Walker warping function that follows the `(κ, β = 0)` model
/// (normalized to `f(0) = 1`) up to `ts` and continues `C¹` with
/// `f'' = −κ₂ f` afterwards.
#[derive(Debug, Clone, Copy)]
pub struct RwProfile {
    pub base: ComparisonModel,
    pub kappa2: f64,
    pub ts: f64,
    scale: f64,
    f_s: f64,
    df_s: f64,
}

impl RwProfile {
    pub fn new(kappa: f64, kappa2: f64, ts: f64, n: usize) -> Result<Self> {
        let base = ComparisonModel::new(kappa, 0.0, n)?;
        if base.is_collapsing() && ts >= base.collapse {
            return Err(GeomError::invalid("interface time lies beyond the model collapse"));
        }
        if ts <= 0.0 {
            return Err(GeomError::invalid("interface time must be positive"));
        }
        let scale = 1.0 / base.f(0.0);
        let (f, df, _) = base.f_derivs(ts);
        Ok(RwProfile {
            base,
            kappa2,
            ts,
            scale,
            f_s: f * scale,
            df_s: df * scale,
        })
    }

    /// First zero of `f` after `ts`, if any.
    pub fn collapse(&self) -> Option<f64> {
        let (a, b) = (self.f_s, self.df_s);
        if self.kappa2 > 0.0 {
            let w = self.kappa2.sqrt();
            // a cos(wτ) + (b/w) sin(wτ) = 0
            let mut tau = (-a * w / b).atan() / w;
            while tau <= 0.0 {
                tau += PI / w;
            }
            Some(self.ts + tau)
        } else if self.kappa2 == 0.0 {
            (b < 0.0).then(|| self.ts - a / b)
        } else {
            let w = (-self.kappa2).sqrt();
            let r = -a * w / b;
            (b < 0.0 && r.abs() < 1.0).then(|| self.ts + r.atanh() / w)
        }
    }
}

impl Profile for RwProfile {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t < self.ts {
            let (f, df, ddf) = self.base.f_derivs(t);
            return (f * self.scale, df * self.scale, ddf * self.scale);
        }
        let tau = t - self.ts;
        let (a, b) = (self.f_s, self.df_s);
        if self.kappa2 > 0.0 {
            let w = self.kappa2.sqrt();
            let (s, c) = (w * tau).sin_cos();
            let f = a * c + b / w * s;
            (f, -a * w * s + b * c, -self.kappa2 * f)
        } else if self.kappa2 == 0.0 {
            (a + b * tau, b, 0.0)
        } else {
            let w = (-self.kappa2).sqrt();
            let (s, c) = ((w * tau).sinh(), (w * tau).cosh());
            let f = a * c + b / w * s;
            (f, a * w * s + b * c, -self.kappa2 * f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minkowski4_is_constant() {
        let m = builtin("minkowski4", &BTreeMap::new()).unwrap().metric;
        let g = m.eval(&[0.3, -1.0, 2.0, 4.0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i != j {
                    0.0
                } else if i == 0 {
                    -1.0
                } else {
                    1.0
                };
                assert_eq!(g[i][j], e);
            }
        }
    }

    #[test]
    fn incomplete_component_list() {
        let doc = r#"{"kind":"components","n":3,"box":[[0,1],[0,1],[0,1]],"components":["1","0","0","1","0"]}"#;
        match parse_metric_spec(doc) {
            Err(GeomError::IncompleteMatrix {
                expected: 6, found: 5, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_full_matrix() {
        let doc = r#"{"kind":"components","n":2,"box":[[0,1],[0,1]],"components":[["1","x0"],["0","1"]]}"#;
        assert!(matches!(
            parse_metric_spec(doc),
            Err(GeomError::Asymmetric { i: 0, j: 1 })
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let doc = "{\"kind\": \"components\",\n \"n\": 2, \"box\": [[0,1],[0,1]],\n \"components\": [\"1\", \"0\", \"1 + * x0\"]}";
        match parse_metric_spec(doc) {
            Err(GeomError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 20, "column {column}");
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_metric_spec("{\"kind\": \n\"builtin\",, }") {
            Err(GeomError::Syntax { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn signature_mismatch_at_probe() {
        let doc =
            r#"{"kind":"components","n":2,"box":[[0,1],[0,1]],"signature":"lorentzian","components":["1","0","1"]}"#;
        assert!(matches!(
            parse_metric_spec(doc),
            Err(GeomError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn warped_flat_profile_is_flat_model() {
        let doc = r#"{"kind":"warped_product","n":3,"f":"1","fiber":"flat","box":[[-1,1],[-1,1],[-1,1]]}"#;
        let m = parse_metric_spec(doc).unwrap();
        let g = m.eval(&[0.2, 0.1, -0.3]).unwrap();
        assert_eq!(g[0][0], -1.0);
        assert_eq!(g[1][1], 1.0);
        assert_eq!(g[2][2], 1.0);
        let ric = m.ricci_at(&[0.2, 0.1, -0.3]).unwrap();
        assert!(ric.ricci.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = builtin("klein_bottle", &BTreeMap::new()).unwrap_err();
        assert!(err.to_string().contains("minkowski4"));
    }

    #[test]
    fn rw_profile_is_c1_at_the_interface() {
        let p = RwProfile::new(1.0, 4.0, 0.4, 2).unwrap();
        let below = p.eval(0.4 - 1e-12);
        let above = p.eval(0.4);
        assert!((below.0 - above.0).abs() < 1e-10);
        assert!((below.1 - above.1).abs() < 1e-10);
        assert!((below.2 - above.2).abs() > 0.1);
        let c = p.collapse().unwrap();
        assert!(p.eval(c).0.abs() < 1e-12);
        assert!(c < PI / 2.0);
    }
}
