use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::log::EventLog;
use super::metrics::{compute_metrics, MetricsSummary};
use super::{RunError, TaskSpec};

/// CSV tables and SVG charts keyed by file name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub tables: BTreeMap<String, String>,
    pub charts: BTreeMap<String, String>,
}

impl Report {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), RunError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, body) in self.tables.iter().chain(&self.charts) {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn check_comparable(logs: &[(String, EventLog)]) -> Result<(), RunError> {
    let Some((first_label, first)) = logs.first() else {
        return Ok(());
    };
    for (label, log) in &logs[1..] {
        if log.header.graph_hash != first.header.graph_hash {
            return Err(RunError::MixedLogs(format!(
                "{label} and {first_label} use different graphs"
            )));
        }
        if log.header.config.task != first.header.config.task {
            return Err(RunError::MixedLogs(format!(
                "{label} and {first_label} use different task specs"
            )));
        }
    }
    Ok(())
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

/// Builds comparison tables over labelled logs. Logs on different graphs or
/// task specs are refused unless `allow_mixed`.
pub fn report(logs: &[(String, EventLog)], allow_mixed: bool) -> Result<Report, RunError> {
    if !allow_mixed {
        check_comparable(logs)?;
    }
    let metrics: Vec<(&str, MetricsSummary)> = logs
        .iter()
        .map(|(label, log)| Ok((label.as_str(), compute_metrics(log)?)))
        .collect::<Result<_, RunError>>()?;

    let mut success = String::from(
        "label,agent,depth,distractors,episodes,mean,within_trial_var,across_trial_var,total_var\n",
    );
    let mut final_inv = String::from("label,trial,final_inventory\n");
    let mut curve = String::from("label,step,mean_inventory\n");
    let mut copy = String::from("label,copy_time,count\n");
    let mut conn = String::from("label,trial,final_inventory,difference_vs_reference\n");
    let reference = metrics
        .first()
        .map(|(_, m)| m.final_inventory.per_trial.clone());
    for ((label, m), (_, log)) in metrics.iter().zip(logs) {
        if let Some(s) = &m.success {
            let cfg = &log.header.config;
            let (depth, distractors) = match &cfg.task {
                TaskSpec::Targeted {
                    depth, distractors, ..
                } => (depth.to_string(), distractors.to_string()),
                TaskSpec::OpenEnded { .. } => (String::new(), String::new()),
            };
            let _ = writeln!(
                success,
                "{label},{},{depth},{distractors},{},{},{},{},{}",
                cfg.agent.label(),
                s.episodes,
                f(s.mean),
                f(s.within_trial_var),
                f(s.across_trial_var),
                f(s.total_var)
            );
        }
        for (t, v) in m.final_inventory.per_trial.iter().enumerate() {
            let _ = writeln!(final_inv, "{label},{t},{}", f(*v));
        }
        for (t, v) in m.inventory_curve.iter().enumerate() {
            let _ = writeln!(curve, "{label},{t},{}", f(*v));
        }
        for (dt, n) in &m.copy_time.histogram {
            let _ = writeln!(copy, "{label},{dt},{n}");
        }
        let _ = writeln!(copy, "{label},censored,{}", m.copy_time.censored);
        let base = reference.as_deref().unwrap_or_default();
        let mut diffs = Vec::new();
        for (t, v) in m.final_inventory.per_trial.iter().enumerate() {
            let d = base.get(t).map(|b| v - b);
            diffs.extend(d);
            let d = d.map(f).unwrap_or_default();
            let _ = writeln!(conn, "{label},{t},{},{d}", f(*v));
        }
        let mean_diff = if diffs.is_empty() {
            String::new()
        } else {
            f(diffs.iter().sum::<f64>() / diffs.len() as f64)
        };
        let _ = writeln!(
            conn,
            "{label},mean,{},{mean_diff}",
            f(m.final_inventory.mean)
        );
    }

    let mut r = Report::default();
    r.tables.insert("success.csv".into(), success);
    r.tables.insert("final_inventory.csv".into(), final_inv);
    r.tables.insert("inventory_curve.csv".into(), curve);
    r.tables.insert("copy_time.csv".into(), copy);
    r.tables.insert("connectivity.csv".into(), conn);

    let series = |pick: &dyn Fn(&MetricsSummary) -> Vec<f64>| -> Vec<(&str, Vec<f64>)> {
        metrics.iter().map(|(l, m)| (*l, pick(m))).collect()
    };
    r.charts.insert(
        "inventory_curve.svg".into(),
        line_chart(
            "mean inventory by step",
            &series(&|m| m.inventory_curve.clone()),
        ),
    );
    r.charts.insert(
        "success.svg".into(),
        bar_chart(
            "success rate",
            &metrics
                .iter()
                .map(|(l, m)| (*l, m.success.as_ref().map_or(0.0, |s| s.mean)))
                .collect::<Vec<_>>(),
        ),
    );
    r.charts.insert(
        "copy_time.svg".into(),
        line_chart(
            "copy time histogram",
            &series(&|m| {
                let max = m.copy_time.histogram.keys().max().copied().unwrap_or(0);
                (0..=max)
                    .map(|d| *m.copy_time.histogram.get(&d).unwrap_or(&0) as f64)
                    .collect()
            }),
        ),
    );
    Ok(r)
}

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <text x=\"{PAD}\" y=\"20\" font-size=\"14\">{}</text>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n",
        escape(title),
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn line_chart(title: &str, series: &[(&str, Vec<f64>)]) -> String {
    let mut svg = svg_open(title);
    let xmax = series
        .iter()
        .map(|(_, v)| v.len())
        .max()
        .unwrap_or(1)
        .saturating_sub(1)
        .max(1) as f64;
    let ymax = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    for (i, (label, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(x, y)| {
                let px = PAD + x as f64 / xmax * (W - 2.0 * PAD);
                let py = H - PAD - y / ymax * (H - 2.0 * PAD);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>",
            W - PAD - 120.0,
            PAD + 14.0 * i as f64,
            escape(label)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"4\" y=\"{PAD}\" font-size=\"10\">{ymax:.2}</text>"
    );
    svg.push_str("</svg>\n");
    svg
}

fn bar_chart(title: &str, bars: &[(&str, f64)]) -> String {
    let mut svg = svg_open(title);
    let ymax = bars
        .iter()
        .map(|(_, v)| *v)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let slot = (W - 2.0 * PAD) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = v / ymax * (H - 2.0 * PAD);
        let x = PAD + slot * i as f64 + slot * 0.1;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
            H - PAD - h,
            slot * 0.8,
            COLORS[i % COLORS.len()]
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{}\" font-size=\"11\">{} ({v:.3})</text>",
            H - PAD + 14.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
