//! CSV and JSONL serialization of experiment reports.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sausage_core::experiments::{Cell, ExperimentReport};

use crate::CliError;

/// Decimal text with 17 significant digits. Plain notation for exponents in
/// `[-5, 16]`, scientific otherwise; non-finite values as `NaN`, `inf`, `-inf`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("rust scientific format");
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Real(v) => format_real(*v),
        Cell::Text(s) => csv_field(s),
    }
}

pub fn csv_string(report: &ExperimentReport) -> String {
    let mut s = String::new();
    let header: Vec<String> = report.table.columns.iter().map(|c| csv_field(c)).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in &report.table.rows {
        let cells: Vec<String> = row.iter().map(cell_text).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        format_real(v)
    } else {
        "null".into()
    }
}

/// One JSON object per statistic.
pub fn jsonl_string(report: &ExperimentReport, config_hash: &str, seed: u64) -> String {
    let quote = |s: &str| serde_json::to_string(s).expect("strings serialize");
    let mut s = String::new();
    for stat in &report.statistics {
        let _ = writeln!(
            s,
            "{{\"experiment\":{},\"config_hash\":{},\"seed\":{},\"name\":{},\"value\":{},\"stderr\":{}}}",
            quote(&report.experiment),
            quote(config_hash),
            seed,
            quote(&stat.name),
            json_number(stat.value),
            stat.stderr.map_or_else(|| "null".to_string(), json_number),
        );
    }
    s
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(content.as_bytes()).map_err(io)?;
    f.flush().map_err(io)
}

pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<(), CliError> {
    write_file(path, &csv_string(report))
}

pub fn emit_jsonl(report: &ExperimentReport, config_hash: &str, seed: u64, path: &Path) -> Result<(), CliError> {
    write_file(path, &jsonl_string(report, config_hash, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sausage_core::experiments::Table;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_real(1.0), "1.0000000000000000");
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(-200.0), "-200.00000000000000");
        assert_eq!(format_real(1.5e-7), "1.4999999999999999e-7");
        assert_eq!(format_real(2e20), "2.0000000000000000e20");
        assert_eq!(format_real(0.0), "0.0000000000000000");
        assert_eq!(format_real(f64::NAN), "NaN");
        for v in [std::f64::consts::PI, 1e300, -3.3e-300, 123456.789, 2.0f64.sqrt() * 1e-5] {
            assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::new(
            "x",
            vec![],
            Table::new(&["replica_id", "t", "volume", "centered", "standardized"]),
        );
        assert_eq!(csv_string(&r), "replica_id,t,volume,centered,standardized\n");
        assert_eq!(jsonl_string(&r, "h", 1), "");
    }

    #[test]
    fn rows_and_records() {
        let mut t = Table::new(&["n", "v", "note"]);
        t.push(vec![Cell::Int(3), Cell::Real(0.5), Cell::Text("a,b".into())]);
        let mut r = ExperimentReport::new("lln", vec![], t);
        r.stat("ks", 0.25, None);
        r.stat("mean", f64::NAN, Some(0.5));
        assert_eq!(csv_string(&r), "n,v,note\n3,0.50000000000000000,\"a,b\"\n");
        let lines: Vec<serde_json::Value> = jsonl_string(&r, "abc", 7)
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        let keys: Vec<&str> = lines[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys.len(), 6);
        for k in ["experiment", "config_hash", "seed", "name", "value", "stderr"] {
            assert!(keys.contains(&k));
        }
        assert_eq!(lines[0]["value"], 0.25);
        assert!(lines[1]["value"].is_null());
        assert_eq!(lines[1]["stderr"], 0.5);
    }
}
