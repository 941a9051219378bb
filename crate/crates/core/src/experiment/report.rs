//! CSV, JSON and SVG renderings of an [`ExperimentRecord`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{io_err, ExperimentError, ExperimentRecord, ExperimentRow};
use crate::game::GameKind;

/// Bound checks that get a slack column, in column order.
pub const BOUND_COLUMNS: [&str; 8] = [
    "sum-cost-lower",
    "sum-cost-upper",
    "sum-diameter",
    "sum-edge-weight",
    "max-cost-lower",
    "max-cost-upper",
    "max-diameter",
    "clique-ratio",
];

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "game", "price", "alpha", "eps", "n", "case", "family", "stable", "ne_cost", "opt_cost",
        "ratio", "ceiling", "poa_ratio", "dynamics_runs", "dynamics_converged",
        "dynamics_certified", "violations",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    h.extend(BOUND_COLUMNS.iter().map(|b| format!("slack:{b}")));
    h.push("error".into());
    h
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn csv_record(row: &ExperimentRow) -> Vec<String> {
    let mut r = vec![
        row.kind.to_string(),
        row.price.clone(),
        num(row.alpha),
        row.eps.map(num).unwrap_or_default(),
        row.n.to_string(),
        row.case.clone().unwrap_or_default(),
        row.family.map(|f| f.to_string()).unwrap_or_default(),
        row.stable.map(|s| s.to_string()).unwrap_or_default(),
        num(row.ne_cost),
        num(row.opt_cost),
        num(row.ratio),
        num(row.ceiling),
        num(row.poa_ratio),
        row.dynamics_runs.to_string(),
        row.dynamics_converged.to_string(),
        row.dynamics_certified.to_string(),
        row.violations.to_string(),
    ];
    for name in BOUND_COLUMNS {
        // the tightest check of each name
        let slack = row
            .bounds
            .iter()
            .filter(|b| b.name == name)
            .map(|b| b.slack)
            .reduce(f64::min);
        r.push(slack.map(num).unwrap_or_default());
    }
    r.push(row.error.clone().unwrap_or_default());
    r
}

pub fn to_csv(record: &ExperimentRecord) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header()).expect("in-memory write");
    for row in &record.rows {
        w.write_record(csv_record(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write_csv(record: &ExperimentRecord, path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, to_csv(record)).map_err(io_err(path))
}

pub fn write_json(record: &ExperimentRecord, path: &Path) -> Result<(), ExperimentError> {
    let text = serde_json::to_string_pretty(record).expect("record serialises");
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json(path: &Path) -> Result<ExperimentRecord, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Constant in the reciprocal-price anarchy curve `C sqrt(alpha) / lo`.
pub const RECIPROCAL_CURVE_CONSTANT: f64 = 8.0;

/// Bound drawn over the data at one row: `C sqrt(alpha) / lo` for SUM games
/// with reciprocal prices, the construction's ceiling otherwise.
fn bound_curve(row: &ExperimentRow) -> Option<f64> {
    if row.kind == GameKind::Sum && row.price.starts_with("reciprocal:") {
        let lo = row
            .price
            .split(',')
            .find_map(|kv| kv.strip_prefix("lo="))
            .and_then(|v| v.parse::<f64>().ok())?;
        Some(RECIPROCAL_CURVE_CONSTANT * row.alpha.sqrt() / lo)
    } else if row.ceiling.is_finite() {
        Some(row.ceiling)
    } else {
        None
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Ratio against alpha, one polyline per n, with the bound curve dashed.
/// Alpha is drawn on a log axis when it spans more than a decade.
pub fn to_svg(record: &ExperimentRecord) -> String {
    let (w, h, m) = (720.0, 440.0, 60.0);
    let rows: Vec<&ExperimentRow> = record.rows.iter().filter(|r| r.ratio.is_finite()).collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if rows.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}">no finite ratios</text>"#, w / 2.0 - 50.0, h / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let (amin, amax) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.alpha), b.max(r.alpha)));
    let log = amin > 0.0 && amax / amin > 10.0;
    let tx = |a: f64| if log { a.log10() } else { a };
    let (x0, x1) = (tx(amin), tx(amax));
    let curve: Vec<(f64, f64)> = {
        let mut c: Vec<(f64, f64)> = rows.iter().filter_map(|r| bound_curve(r).map(|b| (r.alpha, b))).collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        c.dedup_by(|b, a| a.0 == b.0);
        c
    };
    let ymax = rows
        .iter()
        .map(|r| r.ratio)
        .chain(curve.iter().map(|c| c.1))
        .fold(1.0f64, f64::max)
        * 1.05;
    let px = |a: f64| {
        if x1 > x0 {
            m + (tx(a) - x0) / (x1 - x0) * (w - 2.0 * m)
        } else {
            w / 2.0
        }
    };
    let py = |y: f64| h - m - y / ymax * (h - 2.0 * m);

    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for i in 0..=4 {
        let y = ymax * i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#, m - 6.0, py(y) + 4.0, y);
    }
    let mut alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    for a in &alphas {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{a}</text>"#, px(*a), h - m + 18.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">alpha{}</text>"#,
        w / 2.0,
        h - 14.0,
        if log { " (log scale)" } else { "" }
    );
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">ratio</text>"#, h / 2.0, h / 2.0);

    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort();
    ns.dedup();
    for (i, n) in ns.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.n == *n).map(|r| (r.alpha, r.ratio)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|&(a, y)| format!("{:.2},{:.2}", px(a), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">n = {n}</text>"#, w - m + 6.0, m + 14.0 * i as f64);
    }
    if !curve.is_empty() {
        let path: Vec<String> = curve.iter().map(|&(a, y)| format!("{:.2},{:.2}", px(a), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="black" stroke-dasharray="6 4" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">bound</text>"#, w - m + 6.0, m + 14.0 * ns.len() as f64);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(record: &ExperimentRecord, path: &Path) -> Result<(), ExperimentError> {
    fs::write(path, to_svg(record)).map_err(io_err(path))
}
