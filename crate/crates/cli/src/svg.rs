//! Minimal SVG line plots of the evaluation curves.

use std::fmt::Write;

use lungnet::EvalReport;

const SIZE: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], diagonal: bool) -> String {
    let total = SIZE + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x * SIZE;
    let py = |y: f64| MARGIN + (1.0 - y) * SIZE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, px(t), py(0.0) + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, px(0.0) - 6.0, py(t) + 4.0);
    }
    if diagonal {
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
            px(0.0),
            py(0.0),
            px(1.0),
            py(1.0)
        );
    }
    let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        coords.join(" ")
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, total / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, total / 2.0, total - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        total / 2.0,
        total / 2.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn pr_plot(report: &EvalReport) -> String {
    let mut pts = vec![(0.0, 1.0)];
    pts.extend(report.pr_points.iter().map(|p| (p.recall, p.precision)));
    plot(
        &format!("Precision-recall (AP = {:.4})", report.average_precision),
        "Recall",
        "Precision",
        &pts,
        false,
    )
}

pub fn roc_plot(report: &EvalReport) -> String {
    let pts: Vec<(f64, f64)> = report.roc_points.iter().map(|p| (p.fpr, p.tpr)).collect();
    plot(&format!("ROC (AUC = {:.4})", report.roc_auc), "False positive rate", "True positive rate", &pts, true)
}
