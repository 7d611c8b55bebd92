use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::{Report, ScenarioReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

const COLUMNS: [&str; 14] = [
    "name",
    "k",
    "s",
    "rounds",
    "slack",
    "trials",
    "exact_abstain",
    "empirical_abstain",
    "abstain_bound",
    "tv_to_exact",
    "tv_tolerance",
    "max_calls",
    "call_budget",
    "violations",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn row(sc: &ScenarioReport) -> Vec<String> {
    vec![
        sc.name.clone(),
        sc.k.to_string(),
        sc.s.to_string(),
        sc.rounds.to_string(),
        sc.slack.to_string(),
        sc.trials.to_string(),
        opt(sc.abstention.exact),
        format!("{:.6}", sc.abstention.empirical),
        opt(sc.abstention.bound.as_ref().map(|b| b.value)),
        opt(sc.empirical.tv_to_exact),
        opt(sc.empirical.tolerance),
        sc.oracle_calls.max_per_invocation.to_string(),
        sc.oracle_calls
            .budget_per_invocation
            .map(|b| b.to_string())
            .unwrap_or_default(),
        sc.violations.join(";"),
    ]
}

fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes rows as CSV with a header line.
pub fn write_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let fields: Vec<String> = r.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes rows as a left-aligned text table.
pub fn write_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, f) in widths.iter_mut().zip(r) {
            *w = (*w).max(f.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, fields: Vec<&str>| {
        let cells: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    };
    line(&mut out, header.to_vec());
    for r in rows {
        line(&mut out, r.iter().map(String::as_str).collect());
    }
    out
}

/// Serializes any value as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn render_report(report: &Report, format: Format) -> Result<String> {
    let rows: Vec<Vec<String>> = report.scenarios.iter().map(row).collect();
    match format {
        Format::Json => to_json(report),
        Format::Csv => Ok(write_csv(&COLUMNS, &rows)),
        Format::Table => Ok(write_table(&COLUMNS, &rows)),
    }
}

pub fn emit_report(report: &Report, format: Format, out: &mut dyn Write) -> Result<()> {
    out.write_all(render_report(report, format)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_renders() {
        let report = Report::new(Vec::new());
        let json = render_report(&report, Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["scenarios"].as_array().unwrap().len(), 0);
        let csv = render_report(&report, Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(render_report(&report, Format::Table)
            .unwrap()
            .starts_with("name"));
    }

    #[test]
    fn csv_quotes_separators() {
        let out = write_csv(&["a", "b"], &[vec!["x,y".into(), "q\"".into()]]);
        assert_eq!(out, "a,b\n\"x,y\",\"q\"\"\"\n");
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }
}
