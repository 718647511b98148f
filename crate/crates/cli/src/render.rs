//! Report formatting. JSON output is pretty-printed with a trailing newline;
//! all collections are ordered, so equal inputs give byte-identical output.

use std::fmt::Write as _;

use curvhom::classify::{HomogeneityReport, InvariantTable, Summary};
use curvhom::verify::VerifyReport;
use curvhom::Family;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn num(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, |x| json!(x))
}

/// `invariants` as a report with the common top-level layout; each row is
/// an object keyed by coordinate and column name.
pub fn invariants_report(cfg: &RunConfig, table: &InvariantTable) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let mut m = Map::new();
            m.insert("t".into(), json!(r.point.t));
            m.insert("x".into(), json!(r.point.x));
            m.insert("y".into(), json!(r.point.y));
            for (c, v) in table.columns.iter().zip(&r.values) {
                m.insert(c.clone(), num(*v));
            }
            Value::Object(m)
        })
        .collect();
    let exclusions: Vec<Value> = table
        .rows
        .iter()
        .filter_map(|r| r.excluded.as_ref().map(|reason| json!({ "point": r.point, "reason": reason })))
        .collect();
    json!({
        "config": {
            "family": cfg.spec.family(),
            "function": cfg.spec.function().map(|e| e.to_string()),
            "order": cfg.order,
            "grid": cfg.axes.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "columns": table.columns,
        },
        "verdicts": [],
        "invariants": rows,
        "exclusions": exclusions,
        "tool_version": curvhom::classify::TOOL_VERSION,
    })
}

pub fn invariants_csv(table: &InvariantTable) -> Result<String, std::io::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "x".to_string(), "y".to_string()];
    header.extend(table.columns.iter().cloned());
    header.push("excluded".into());
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec: Vec<String> = r.point.coords().iter().map(|v| v.to_string()).collect();
        rec.extend(r.values.iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
        rec.push(r.excluded.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.10}"))
}

pub fn invariants_text(table: &InvariantTable) -> String {
    let mut s = String::new();
    for r in &table.rows {
        let _ = write!(s, "{}", r.point);
        for (c, v) in table.columns.iter().zip(&r.values) {
            let _ = write!(s, "  {c}={}", fmt_opt(*v));
        }
        if let Some(e) = &r.excluded {
            let _ = write!(s, "  [{e}]");
        }
        s.push('\n');
    }
    s
}

fn family_line(family: Family, function: Option<&str>) -> String {
    match function {
        Some(f) => format!("{family}-family, function {f}"),
        None => format!("{family} metric"),
    }
}

pub fn verify_text(r: &VerifyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}; {} sample points, order {}", family_line(r.config.family, r.config.function.as_deref()), r.config.samples.len(), r.config.order);
    for v in &r.verdicts {
        let _ = write!(s, "{:<22} {:?}", v.check, v.status);
        if let Some(d) = v.deviation {
            let _ = write!(s, "  max rel {:.3e}, max |zero entry| {:.3e}", d.max_rel_nonzero, d.max_abs_zero);
        }
        if let Some(m) = v.identity_max {
            let _ = write!(s, "  max residual {m:.3e}");
        }
        if let Some(n) = &v.note {
            let _ = write!(s, "  ({n})");
        }
        s.push('\n');
    }
    for e in &r.exclusions {
        let _ = writeln!(s, "excluded {}: {}", e.point, e.reason);
    }
    s
}

fn summary_text(s: &Option<Summary>) -> String {
    match s {
        Some(s) => format!("min {:.6e} max {:.6e} spread {:.3e}", s.min, s.max, s.spread),
        None => "no samples".into(),
    }
}

pub fn classify_text(r: &HomogeneityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{}; {} sample points, order {}, tol {:e}",
        family_line(r.config.family, r.config.function.as_deref()),
        r.config.samples.len(),
        r.config.order,
        r.config.tol
    );
    if let Some(d) = &r.degenerate {
        let _ = writeln!(s, "{d}");
    }
    for v in &r.verdicts {
        let _ = writeln!(s, "{:<20} {:?}", v.property, v.status);
        for n in &v.notes {
            let _ = writeln!(s, "    {n}");
        }
    }
    let _ = writeln!(s, "invariants:");
    for i in &r.invariants {
        let _ = writeln!(s, "  {:<10} {}", i.name, summary_text(&i.summary));
    }
    for n in &r.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "excluded points: {}", r.exclusions.len());
    s
}
