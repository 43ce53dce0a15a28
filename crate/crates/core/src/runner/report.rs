use std::fmt::Write;
use std::str::FromStr;

use serde_json::json;

use crate::runner::{ScenarioReport, SweepResult};

pub const REPORT_SCHEMA: &str = "berthsim.report/1";

pub const REPORT_CSV_HEADER: &str = "scenario,replications,master_seed,mean_days,std_days,ci95_halfwidth_days,min_days,max_days,production_rate_m_per_day,berth_length_m,comment";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format `{other}` (expected table, csv or json)")),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn table(reports: &[ScenarioReport]) -> String {
    let head = ["Scenario", "Production Rate", "Total Production Time", "Comments"];
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.scenario.clone(),
                format!("{:.2} m/day", r.production_rate_m_per_day),
                format!("{:.2} days", r.mean_days),
                r.comment.clone(),
            ]
        })
        .collect();
    let mut width = head.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(width).enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            if i == 3 {
                s.push_str(c);
            } else {
                let _ = write!(s, "{c:<w$}");
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(head);
    out.push('\n');
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-|-"));
    out.push('\n');
    for row in &rows {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
        out.push('\n');
    }
    out
}

fn csv(reports: &[ScenarioReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.scenario),
            r.replications,
            r.master_seed,
            r.mean_days,
            r.std_days,
            r.ci95_halfwidth_days,
            r.min_days,
            r.max_days,
            r.production_rate_m_per_day,
            r.berth_length_m,
            csv_field(&r.comment)
        );
    }
    out
}

fn json_doc(reports: &[ScenarioReport], master_seed: u64, warnings: &[String]) -> String {
    let doc = json!({
        "schema": REPORT_SCHEMA,
        "master_seed": master_seed,
        "scenarios": reports,
        "warnings": warnings,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
    s.push('\n');
    s
}

/// Renders a single scenario report.
pub fn render(report: &ScenarioReport, format: ReportFormat) -> String {
    render_many(std::slice::from_ref(report), report.master_seed, &[], format)
}

pub fn render_sweep(result: &SweepResult, format: ReportFormat) -> String {
    render_many(&result.reports, result.master_seed, &result.warnings, format)
}

fn render_many(reports: &[ScenarioReport], seed: u64, warnings: &[String], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => table(reports),
        ReportFormat::Csv => csv(reports),
        ReportFormat::Json => json_doc(reports, seed, warnings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn rep(name: &str, mean: f64) -> ScenarioReport {
        ScenarioReport {
            scenario: name.into(),
            replications: 3,
            master_seed: 42,
            mean_days: mean,
            std_days: 0.0,
            ci95_halfwidth_days: 0.0,
            min_days: mean,
            max_days: mean,
            production_rate_m_per_day: 100.0 / mean,
            berth_length_m: 100.0,
            utilization: BTreeMap::new(),
            counters: BTreeMap::new(),
            comment: "a, \"quoted\" note".into(),
        }
    }

    #[test]
    fn table_has_report_columns() {
        let t = table(&[rep("Ideal", 193.38)]);
        let first = t.lines().next().unwrap();
        let cols: Vec<&str> = first.split(" | ").map(str::trim).collect();
        assert_eq!(
            cols,
            ["Scenario", "Production Rate", "Total Production Time", "Comments"]
        );
        assert!(t.contains("0.52 m/day"));
        assert!(t.contains("193.38 days"));
    }

    #[test]
    fn csv_row_count() {
        let c = csv(&[rep("a", 1.0), rep("b", 2.0)]);
        assert_eq!(c.lines().count(), 3);
        assert!(c.contains("\"a, \"\"quoted\"\" note\""));
    }

    #[test]
    fn json_round_trips() {
        let r = rep("a", 10.0);
        let text = render(&r, ReportFormat::Json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        let back: ScenarioReport = serde_json::from_value(v["scenarios"][0].clone()).unwrap();
        assert_eq!(back, r);
    }
}
