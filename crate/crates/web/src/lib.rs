//! Browser bindings for the `etdb` demo page. Every export takes plain
//! numbers or JSON text and returns a JSON string; failures come back as
//! `{"error": "..."}`.

use etdb::balance::{balance_report, Outcome};
use etdb::catalog;
use etdb::channel::cj_relative;
use etdb::classical::{check_classical_db, check_classical_db_parity, reverse_chain};
use etdb::parity::{check_etdb_p, reflection_parity, ParityOp};
use etdb::schema::{self, ChainDoc};
use etdb::transitions::decompose;
use etdb::ToleranceConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
struct Residual {
    name: &'static str,
    residual: Option<f64>,
    passed: Option<bool>,
}

impl Residual {
    fn from_outcome(name: &'static str, o: &Outcome) -> Self {
        let c = o.check();
        Self {
            name,
            residual: c.map(|c| c.residual),
            passed: c.map(|c| c.passed),
        }
    }
}

#[derive(Debug, Serialize)]
struct CycleResult {
    p: f64,
    checks: Vec<Residual>,
    /// Weights of the elementary transitions.
    weights: Vec<f64>,
    complete: Option<bool>,
}

#[derive(Debug, Serialize)]
struct ShiftClockResult {
    m: usize,
    checks: Vec<Residual>,
}

#[derive(Debug, Serialize)]
struct ChainResult {
    balanced: bool,
    max_violation: f64,
    /// 1-based, as in the input format.
    worst_pair: Option<(usize, usize)>,
    parity: Option<ClassicalParity>,
    reverse: Option<ChainDoc>,
    reverse_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct ClassicalParity {
    balanced: bool,
    max_violation: f64,
    worst_pair: Option<(usize, usize)>,
}

fn one_based(pair: Option<(usize, usize)>) -> Option<(usize, usize)> {
    pair.map(|(i, j)| (i + 1, j + 1))
}

fn respond<T: Serialize>(r: etdb::Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn cycle(p: f64) -> etdb::Result<CycleResult> {
    if !(0.0..=1.0).contains(&p) {
        return Err(etdb::Error::InvalidInput(format!(
            "p = {p} is outside [0, 1]"
        )));
    }
    let tol = ToleranceConfig::default();
    let (ch, rho) = catalog::cycle3(p);
    let report = balance_report(&ch, &rho, &tol)?;
    let d = decompose(&cj_relative(&ch, &rho, &tol)?, &tol)?.report()?;
    Ok(CycleResult {
        p,
        checks: vec![
            Residual::from_outcome("invariance", &report.invariance),
            Residual::from_outcome("etdb", &report.etdb),
            Residual::from_outcome("sqdb", &report.sqdb),
        ],
        weights: d.items.iter().map(|it| it.p).collect(),
        complete: d.complete,
    })
}

fn shift_clock(m: usize) -> etdb::Result<ShiftClockResult> {
    if !(2..=12).contains(&m) {
        return Err(etdb::Error::InvalidInput(format!(
            "m = {m}; the demo accepts 2 to 12"
        )));
    }
    let tol = ToleranceConfig::default();
    let (ch, rho) = catalog::shift_channel(m);
    let mut checks = Vec::new();
    for (name, p) in [
        ("no parity", ParityOp::identity(m)),
        ("complex conjugation", ParityOp::conjugation(m)),
        ("reflection k to -k", reflection_parity(m)),
    ] {
        let c = check_etdb_p(&ch, &rho, &p, &tol)?.check;
        checks.push(Residual {
            name,
            residual: Some(c.residual),
            passed: Some(c.passed),
        });
    }
    Ok(ShiftClockResult { m, checks })
}

fn chain(json: &str) -> etdb::Result<ChainResult> {
    let (mc, pi) = schema::parse::<ChainDoc>(json)?.into_chain()?;
    let db = check_classical_db(&mc)?;
    let parity = match pi {
        Some(pi) => {
            let c = check_classical_db_parity(&mc, &pi)?;
            Some(ClassicalParity {
                balanced: c.passed,
                max_violation: c.max_violation,
                worst_pair: one_based(c.worst_pair),
            })
        }
        None => None,
    };
    let (reverse, reverse_error) = match reverse_chain(&mc) {
        Ok(r) => (Some(ChainDoc::from_chain(&r)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ChainResult {
        balanced: db.passed,
        max_violation: db.max_violation,
        worst_pair: one_based(db.worst_pair),
        parity,
        reverse,
        reverse_error,
    })
}

/// Balance residuals and transition weights of the three-level cycle with
/// forward weight `p`.
#[wasm_bindgen]
pub fn cycle_demo(p: f64) -> String {
    respond(cycle(p))
}

/// ETDB of the `m`-level shift under three candidate parities.
#[wasm_bindgen]
pub fn shift_clock_demo(m: usize) -> String {
    respond(shift_clock(m))
}

/// Classical detailed balance and the reverse chain for a chain document
/// `{"rho": [...], "tau": [[...]], "pi": [...]}`.
#[wasm_bindgen]
pub fn chain_demo(json: &str) -> String {
    respond(chain(json))
}

/// A starting chain for the editor.
#[wasm_bindgen]
pub fn sample_chain() -> String {
    schema::to_json(&ChainDoc::from_chain(&catalog::classical_cycle3()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn cycle_balances_only_at_one_half() {
        let v = parse(&cycle_demo(0.5));
        assert!(v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c["passed"] == true));
        assert_eq!(v["weights"].as_array().unwrap().len(), 2);
        let v = parse(&cycle_demo(0.8));
        assert_eq!(v["checks"][0]["passed"], true);
        assert_eq!(v["checks"][1]["passed"], false);
        assert!(parse(&cycle_demo(1.5))["error"].is_string());
    }

    #[test]
    fn shift_balances_under_reflection() {
        let v = parse(&shift_clock_demo(5));
        let passed: Vec<bool> = v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["passed"].as_bool().unwrap())
            .collect();
        assert_eq!(passed, [false, false, true]);
        assert!(parse(&shift_clock_demo(1))["error"].is_string());
    }

    #[test]
    fn chain_report() {
        let v = parse(&chain_demo(&sample_chain()));
        assert_eq!(v["balanced"], false);
        assert_eq!(v["worst_pair"], serde_json::json!([1, 2]));
        assert!(v["reverse"]["tau"].is_array());

        let v = parse(&chain_demo(
            r#"{"rho":[0.5,0.5],"tau":[[0.5,0.5],[0.5,0.5]],"pi":[2,1]}"#,
        ));
        assert_eq!(v["balanced"], true);
        assert_eq!(v["parity"]["balanced"], true);

        let err = parse(&chain_demo("{\"rho\": [1]"))["error"]
            .as_str()
            .unwrap()
            .to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
