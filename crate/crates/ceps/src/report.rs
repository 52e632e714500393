//! Report files: a per-instance CSV table and a summary document per
//! evaluated portfolio, and one SVG boxplot of the per-instance medians.

use std::fmt::Write as _;
use std::path::Path;

use ceps_core::ceps::AuditEvent;
use ceps_core::portfolio::median;

use crate::error::{Error, Result};
use crate::harness::{aggregate, EvaluationReport};
use crate::store::{read_text, write_audit, write_json, write_text};

/// Writes, for every report, `<label>.csv` and `<label>.summary.json`, plus
/// `summary.json` (all summaries), `boxplot.svg`, `evaluation.json` (the
/// full reports) and, when given, `audit.jsonl`.
pub fn emit_report(
    reports: &[EvaluationReport],
    audit: Option<&[AuditEvent]>,
    out: &Path,
) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::usage("nothing to report"));
    }
    for r in reports {
        write_text(&out.join(format!("{}.csv", r.label)), &table(r))?;
        write_json(&out.join(format!("{}.summary.json", r.label)), &r.summary())?;
    }
    let summaries: Vec<_> = reports.iter().map(EvaluationReport::summary).collect();
    write_json(&out.join("summary.json"), &summaries)?;
    write_json(&out.join("evaluation.json"), &reports)?;
    write_text(&out.join("boxplot.svg"), &boxplot(reports))?;
    if let Some(events) = audit {
        write_audit(&out.join("audit.jsonl"), events)?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `instance,name,member_0..member_{K-1},median,winner,run_timeouts`.
/// Numbers are written in shortest round-trip form.
pub fn table(report: &EvaluationReport) -> String {
    let mut s = String::from("instance,name");
    for j in 0..report.members.len() {
        let _ = write!(s, ",member_{j}");
    }
    s.push_str(",median,winner,run_timeouts\n");
    for row in &report.rows {
        let _ = write!(s, "{},{}", row.instance, csv_field(&row.name));
        for v in &row.member_scores {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(s, ",{},{},{}", row.median, row.winner, row.run_timeouts);
    }
    s
}

/// Reads the `median` column back from a table.
pub fn read_medians(csv: &str) -> Result<Vec<f64>> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| Error::usage("empty table"))?;
    let col = header
        .split(',')
        .position(|h| h == "median")
        .ok_or_else(|| Error::usage("table has no median column"))?;
    // names are the only quoted field and sit left of the scores, so count
    // columns from the right
    let from_right = header.split(',').count() - col;
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let fields: Vec<&str> = l.rsplitn(from_right + 1, ',').collect();
            fields[from_right - 1]
                .parse::<f64>()
                .map_err(|_| Error::usage(format!("bad median in row {l:?}")))
        })
        .collect()
}

/// `(#TOs, aggregate)` recomputed from a table file.
pub fn recompute_from_table(path: &Path, penalty: f64) -> Result<(usize, f64)> {
    aggregate(&read_medians(&read_text(path)?)?, penalty)
}

/// Quartile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug)]
struct BoxStats {
    q1: f64,
    median: f64,
    q3: f64,
    lo: f64,
    hi: f64,
    mean: f64,
    outliers: Vec<f64>,
}

fn box_stats(values: &[f64]) -> BoxStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| (fence_lo..=fence_hi).contains(x))
        .collect();
    BoxStats {
        q1,
        median: median(&v).unwrap_or(f64::NAN),
        q3,
        lo: inside.first().copied().unwrap_or(q1),
        hi: inside.last().copied().unwrap_or(q3),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        outliers: v
            .iter()
            .copied()
            .filter(|x| !(fence_lo..=fence_hi).contains(x))
            .collect(),
    }
}

/// One box per report over its per-instance medians: box from the first
/// to the third quartile, median line, whiskers to the furthest points
/// within 1.5 IQR, circles for outliers and a triangle at the mean.
pub fn boxplot(reports: &[EvaluationReport]) -> String {
    const SLOT: f64 = 140.0;
    const LEFT: f64 = 70.0;
    const TOP: f64 = 40.0;
    const PLOT_H: f64 = 300.0;
    let stats: Vec<BoxStats> = reports
        .iter()
        .map(|r| box_stats(&r.rows.iter().map(|x| x.median).collect::<Vec<_>>()))
        .collect();
    let all = reports.iter().flat_map(|r| r.rows.iter().map(|x| x.median));
    let (mut y_min, mut y_max) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if y_max <= y_min {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let y = |v: f64| TOP + PLOT_H * (y_max - v) / (y_max - y_min);
    let width = LEFT + SLOT * reports.len() as f64 + 20.0;
    let height = TOP + PLOT_H + 60.0;
    let measure = reports.first().map_or("score", |r| r.measure.as_str());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        TOP + PLOT_H
    );
    for t in 0..=4 {
        let v = y_min + (y_max - y_min) * t as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">{measure}</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );
    for (i, (r, b)) in reports.iter().zip(&stats).enumerate() {
        let cx = LEFT + SLOT * (i as f64 + 0.5);
        let half = SLOT * 0.25;
        let _ = writeln!(
            s,
            r#"<g class="box" data-method="{}">"#,
            xml_escape(&r.label)
        );
        let _ = writeln!(
            s,
            r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.hi),
            y(b.q3)
        );
        let _ = writeln!(
            s,
            r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(b.q1),
            y(b.lo)
        );
        for w in [b.lo, b.hi] {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
                cx - half / 2.0,
                y(w),
                cx + half / 2.0,
                y(w)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            cx - half,
            y(b.q3),
            2.0 * half,
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r#"<line class="median" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(b.median),
            cx + half,
            y(b.median)
        );
        for o in &b.outliers {
            let _ = writeln!(
                s,
                r#"<circle class="outlier" cx="{cx:.2}" cy="{:.2}" r="3" fill="none" stroke="black"/>"#,
                y(*o)
            );
        }
        let my = y(b.mean);
        let _ = writeln!(
            s,
            r##"<polygon class="mean" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#d62728"><title>mean {}</title></polygon>"##,
            cx,
            my - 5.0,
            cx - 5.0,
            my + 4.0,
            cx + 5.0,
            my + 4.0,
            b.mean
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + PLOT_H + 20.0,
            xml_escape(&r.label)
        );
        s.push_str("</g>\n");
    }
    let _ = writeln!(
        s,
        r##"<text x="{LEFT}" y="{:.2}" fill="#d62728">▲ mean</text>"##,
        TOP + PLOT_H + 45.0
    );
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert_eq!(b.outliers, vec![100.0]);
        assert_eq!((b.lo, b.hi, b.mean), (1.0, 4.0, 22.0));
    }

    #[test]
    fn quoted_names_do_not_shift_columns() {
        let csv = "instance,name,member_0,median,winner,run_timeouts\nab,\"x,y\",3,2.5,0,0\n";
        assert_eq!(read_medians(csv).unwrap(), vec![2.5]);
    }
}
