//! Recall-versus-reviewed curves as CSV and a dependency-free SVG.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{median_iqr, SimulationResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// `treatment,seed,reviewed,found,recall`, one row per label.
pub fn curves_csv(results: &[SimulationResult]) -> String {
    let mut out = String::from("treatment,seed,reviewed,found,recall\n");
    for r in results {
        for &(reviewed, found) in &r.trajectory {
            let recall = found as f64 / r.relevant.max(1) as f64;
            let _ = writeln!(out, "{},{},{},{},{:.6}", r.treatment, r.seed, reviewed, found, recall);
        }
    }
    out
}

/// Picks, per treatment, the run whose X95 is the median.
pub fn median_runs(results: &[SimulationResult]) -> Vec<&SimulationResult> {
    let mut groups: BTreeMap<String, Vec<&SimulationResult>> = BTreeMap::new();
    for r in results {
        groups.entry(r.treatment.to_string()).or_default().push(r);
    }
    groups
        .into_values()
        .map(|mut runs| {
            let x: Vec<f64> = runs.iter().map(|r| r.x95 as f64).collect();
            let (m, _) = median_iqr(&x).expect("group is non-empty");
            runs.sort_by_key(|r| ((r.x95 as f64 - m).abs() as u64, r.seed));
            runs[0]
        })
        .collect()
}

/// One polyline per treatment (its median run), recall on the y axis.
pub fn curves_svg(results: &[SimulationResult], title: &str) -> String {
    let runs = median_runs(results);
    let x_max = runs
        .iter()
        .flat_map(|r| r.trajectory.last().map(|t| t.0))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x / x_max * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - y * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{:.1}</text>"#,
            MARGIN - 6.0,
            py(f) + 4.0,
            f
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.0}</text>"#,
            px(f * x_max),
            HEIGHT - MARGIN + 16.0,
            f * x_max
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">studies reviewed</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle" font-family="sans-serif" font-size="12">recall</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (i, r) in runs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let denom = r.relevant.max(1) as f64;
        let mut points = format!("{:.1},{:.1}", px(0.0), py(0.0));
        for &(reviewed, found) in &r.trajectory {
            let _ = write!(points, " {:.1},{:.1}", px(reviewed as f64), py(found as f64 / denom));
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let ly = MARGIN + 16.0 * i as f64;
        let lx = WIDTH - MARGIN - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{} (X95 {})</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            r.treatment,
            r.x95
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
