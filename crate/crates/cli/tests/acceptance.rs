//! Acceptance criteria, one pass/fail line each. Runs every scenario with
//! its default configuration and fails if any criterion is red.

use std::time::Instant;

use geomlab_cli::{run_scenario, Check, RunReport, Scenario, ScenarioConfig};
use serde_json::json;

struct Run {
    report: RunReport,
    seconds: f64,
}

fn run(scenario: Scenario, params: Option<serde_json::Value>) -> Run {
    let mut cfg = ScenarioConfig::new(scenario);
    if let Some(serde_json::Value::Object(map)) = params {
        for (k, v) in map {
            cfg.set_param(&k, v);
        }
    }
    let start = Instant::now();
    let report = run_scenario(&cfg).unwrap_or_else(|e| panic!("{scenario} failed to run: {e:#}"));
    Run {
        report,
        seconds: start.elapsed().as_secs_f64(),
    }
}

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
    seconds: Option<f64>,
    budget: Option<f64>,
    /// Minimum number of checks the criterion must cover.
    expected: usize,
}

impl Criterion {
    fn pass(&self) -> bool {
        self.checks.len() >= self.expected
            && self.checks.iter().all(|c| c.pass)
            && match (self.seconds, self.budget) {
                (Some(s), Some(b)) => s < b,
                _ => true,
            }
    }

    fn line(&self) -> String {
        let passing = self.checks.iter().filter(|c| c.pass).count();
        let time = match (self.seconds, self.budget) {
            (Some(s), Some(b)) => format!(", {s:.2} s (budget {b} s)"),
            (Some(s), None) => format!(", {s:.2} s"),
            _ => String::new(),
        };
        format!(
            "[{}] criterion {:>2} {}: {passing}/{} checks{time}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len()
        )
    }
}

fn select(report: &RunReport, keep: impl Fn(&Check) -> bool) -> Vec<Check> {
    report.checks.iter().filter(|c| keep(c)).cloned().collect()
}

fn is_agreement(c: &Check) -> bool {
    c.name.contains("quadrature vs Monte Carlo")
}

#[test]
fn acceptance_criteria() {
    let table = run(Scenario::Table1Audit, None);
    let remark = run(Scenario::MollifyCheck, Some(json!({ "run_family": false })));
    let myers = run(Scenario::Myers, None);
    let bishop = run(Scenario::BishopGromov, None);
    let lorentz = run(Scenario::LorentzVolume, None);
    let singular = run(Scenario::SingularityBound, None);
    let mollify = run(Scenario::MollifyCheck, Some(json!({ "remark": { "enabled": false } })));
    let cut = run(Scenario::CutLocus, None);

    let mut agreement = Vec::new();
    for r in [&bishop, &lorentz, &singular] {
        agreement.extend(select(&r.report, is_agreement));
    }
    let criteria = vec![
        Criterion {
            id: 1,
            title: "Table 1 audit (Ric and H within 1e-6)",
            checks: select(&table.report, |c| {
                c.name.contains("|Ric(dt,dt)") || c.name.contains("|H(Sigma)")
            }),
            seconds: Some(table.seconds),
            budget: Some(5.0),
            expected: 18,
        },
        Criterion {
            id: 2,
            title: "counterexample Ricci matrix and unbounded Ric(X,X)",
            checks: remark.report.checks.clone(),
            seconds: Some(remark.seconds),
            budget: Some(1.0),
            expected: 2,
        },
        Criterion {
            id: 3,
            title: "Myers diameter bound on the round 2-sphere",
            checks: myers.report.checks.clone(),
            seconds: Some(myers.seconds),
            budget: Some(30.0),
            expected: 5,
        },
        Criterion {
            id: 4,
            title: "Bishop-Gromov ratio on S3 and the C11 revolution surface",
            checks: select(&bishop.report, |c| !is_agreement(c)),
            seconds: Some(bishop.seconds),
            budget: Some(120.0),
            expected: 11,
        },
        Criterion {
            id: 5,
            title: "Lorentzian volume ratio on C11 Robertson-Walker and the model",
            checks: select(&lorentz.report, |c| !is_agreement(c)),
            seconds: Some(lorentz.seconds),
            budget: Some(300.0),
            expected: 11,
        },
        Criterion {
            id: 6,
            title: "singularity bound tau_Sigma <= pi/2 and cut function",
            checks: select(&singular.report, |c| !is_agreement(c)),
            seconds: Some(singular.seconds),
            budget: None,
            expected: 9,
        },
        Criterion {
            id: 7,
            title: "mollifier suite",
            checks: mollify.report.checks.clone(),
            seconds: Some(mollify.seconds),
            budget: Some(180.0),
            expected: 10,
        },
        Criterion {
            id: 8,
            title: "f~ limit behavior along k = 4, 8, 16",
            checks: select(&table.report, |c| c.name.starts_with("f~ limit")),
            seconds: Some(table.seconds),
            budget: Some(5.0),
            expected: 6,
        },
        Criterion {
            id: 9,
            title: "cut-set thinness proxy on the (1, 0) model",
            checks: cut.report.checks.clone(),
            seconds: Some(cut.seconds),
            budget: Some(120.0),
            expected: 2,
        },
        Criterion {
            id: 10,
            title: "quadrature vs Monte Carlo within 3 sigma",
            checks: agreement,
            seconds: None,
            budget: None,
            expected: 6,
        },
    ];

    let mut red = Vec::new();
    for c in &criteria {
        println!("{}", c.line());
        for check in c.checks.iter().filter(|k| !k.pass) {
            println!("        {check}");
        }
        if !c.pass() {
            red.push(c.id);
        }
    }
    assert!(red.is_empty(), "criteria failing: {red:?}");
}
