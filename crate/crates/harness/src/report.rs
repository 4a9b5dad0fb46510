//! Summary tables and static SVG plots from metrics files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::metrics::RunMetrics;
use crate::stats::median;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Metrics files under `paths`; directories are searched recursively.
pub fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| HarnessError::io(path, e))?
                .map(|e| e.map(|e| e.path()).map_err(|err| HarnessError::io(path, err)))
                .collect::<Result<_>>()?;
            entries.sort();
            files.extend(collect_files(&entries)?);
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            files.push(path.clone());
        } else if !path.exists() {
            return Err(HarnessError::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    Ok(files)
}

/// Group label: the parent directory for `seed-N.jsonl` files, else the strategy.
fn group_label(path: &Path, metrics: &RunMetrics) -> String {
    let is_seed_file = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed-"));
    match path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()) {
        Some(dir) if is_seed_file => dir.to_owned(),
        _ => metrics.header.strategy.name().to_owned(),
    }
}

pub fn load_groups(paths: &[PathBuf]) -> Result<BTreeMap<String, Vec<RunMetrics>>> {
    let mut groups: BTreeMap<String, Vec<RunMetrics>> = BTreeMap::new();
    for file in collect_files(paths)? {
        let metrics = RunMetrics::load(&file)?;
        groups.entry(group_label(&file, &metrics)).or_default().push(metrics);
    }
    Ok(groups)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "censored".to_owned(), |x| format!("{x:.digits$}"))
}

pub fn summary_table(groups: &BTreeMap<String, Vec<RunMetrics>>) -> String {
    let mut s = String::from(
        "| arm | runs | steps to 5th interaction (median) | censored | final interactions (median) | final held-out loss per phase (median) |\n\
         |---|---|---|---|---|---|\n",
    );
    for (label, runs) in groups {
        let k5: Vec<Option<f64>> = runs.iter().map(|r| r.steps_to_kth_interaction(5).map(|v| v as f64)).collect();
        let censored = k5.iter().filter(|v| v.is_none()).count();
        let inter: Vec<Option<f64>> = runs.iter().map(|r| Some(r.summary.interactions as f64)).collect();
        let phases = runs.first().map_or(0, |r| r.header.heldout_phases.len());
        let losses: Vec<String> = (0..phases)
            .map(|p| {
                let v: Vec<Option<f64>> =
                    runs.iter().map(|r| r.records.last().and_then(|rec| rec.heldout_loss.get(p).copied())).collect();
                fmt_opt(median(&v), 6)
            })
            .collect();
        let _ = writeln!(
            s,
            "| {label} | {} | {} | {censored} | {} | {} |",
            runs.len(),
            fmt_opt(median(&k5), 0),
            fmt_opt(median(&inter), 0),
            losses.join(" / ")
        );
    }
    s
}

/// Mean over runs of `value(record)` at each recorded step.
fn mean_series(runs: &[RunMetrics], value: impl Fn(&crate::metrics::IntervalRecord) -> Option<f64>) -> Vec<(f64, f64)> {
    let mut by_step: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for run in runs {
        for r in &run.records {
            if let Some(v) = value(r).filter(|v| v.is_finite()) {
                let e = by_step.entry(r.step).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    by_step.into_iter().map(|(s, (sum, n))| (s as f64, sum / n as f64)).collect()
}

/// Line chart with one polyline per series. `log_y` plots log10 of positive values.
pub fn line_chart_svg(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)], log_y: bool) -> String {
    let (w, h, left, right, top, bottom) = (720.0, 420.0, 70.0, 170.0, 40.0, 50.0);
    let transform = |y: f64| if log_y { y.max(1e-12).log10() } else { y };
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, s)| s.iter().map(|&(x, y)| (x, transform(y)))).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" font-size="15">{}</text>"#, left, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=4 {
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{ylab}</text>"#, left - 6.0, py(fy) + 4.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.0}</text>"#, px(fx), h - bottom + 18.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">step</text>"#, (left + w - right) / 2.0, h - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (i, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(transform(y)))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        let ly = top + 16.0 * i as f64 + 8.0;
        let _ = writeln!(svg, r#"<rect x="{}" y="{:.1}" width="12" height="3" fill="{color}"/>"#, w - right + 10.0, ly);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}">{}</text>"#, w - right + 28.0, ly + 5.0, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Write `summary.md`, `interactions.svg` and one `heldout_loss_phase<P>.svg` per phase.
pub fn write_report(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let groups = load_groups(paths)?;
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut write = |name: String, text: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    write("summary.md".into(), summary_table(&groups))?;
    let interactions: Vec<(String, Vec<(f64, f64)>)> =
        groups.iter().map(|(l, runs)| (l.clone(), mean_series(runs, |r| Some(r.interactions as f64)))).collect();
    write("interactions.svg".into(), line_chart_svg("Cumulative interactions (mean over runs)", "interactions", &interactions, false))?;
    let phases: Vec<u8> = groups.values().flatten().next().map_or_else(Vec::new, |r| r.header.heldout_phases.clone());
    for (column, phase) in phases.iter().enumerate() {
        let series: Vec<(String, Vec<(f64, f64)>)> = groups
            .iter()
            .map(|(l, runs)| (l.clone(), mean_series(runs, |r| r.heldout_loss.get(column).copied())))
            .collect();
        write(
            format!("heldout_loss_phase{phase}.svg"),
            line_chart_svg(&format!("Held-out model loss, phase {phase} (mean over runs)"), "loss", &series, true),
        )?;
    }
    Ok(written)
}
