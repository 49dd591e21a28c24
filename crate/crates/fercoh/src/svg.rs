//! Minimal SVG charts.

use std::fmt::Write;

use fercoh_core::dataset::Emotion;
use fercoh_core::eval::TimelineExport;

const PALETTE: [&str; 7] = ["#c0392b", "#8e44ad", "#2c3e50", "#f1c40f", "#2980b9", "#27ae60", "#95a5a6"];
const SERIES: [&str; 4] = ["#34495e", "#e67e22", "#16a085", "#7f8c8d"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars on a 0..100 axis. `values[g][s]` is series `s` in group `g`;
/// missing values leave a gap. Groups in `highlight` get a black border.
pub fn bar_chart(title: &str, groups: &[String], series: &[&str], values: &[Vec<Option<f64>>], highlight: &[usize]) -> String {
    let bar = 18.0;
    let gap = 24.0;
    let left = 50.0;
    let top = 40.0;
    let plot_h = 220.0;
    let group_w = bar * series.len() as f64 + gap;
    let width = left + group_w * groups.len() as f64 + 20.0;
    let height = top + plot_h + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">{}</text>"#, esc(title));
    for tick in [0, 25, 50, 75, 100] {
        let y = top + plot_h * (1.0 - tick as f64 / 100.0);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
            width - 20.0,
            left - 4.0,
            y + 4.0
        );
    }
    for (g, name) in groups.iter().enumerate() {
        let x0 = left + gap / 2.0 + group_w * g as f64;
        for (k, v) in values[g].iter().enumerate() {
            let Some(v) = v else { continue };
            let h = plot_h * v.clamp(0.0, 100.0) / 100.0;
            let stroke = if highlight.contains(&g) {
                r#" stroke="black" stroke-width="2""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{bar}" height="{h}" fill="{}"{stroke}><title>{}: {v:.2}</title></rect>"#,
                x0 + bar * k as f64,
                top + plot_h - h,
                SERIES[k % SERIES.len()],
                esc(series[k])
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + bar * series.len() as f64 / 2.0,
            top + plot_h + 16.0,
            esc(name)
        );
    }
    for (k, name) in series.iter().enumerate() {
        let x = left + 110.0 * k as f64;
        let y = top + plot_h + 40.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{y}">{}</text>"#,
            y - 9.0,
            SERIES[k % SERIES.len()],
            x + 14.0,
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn initial(e: Emotion) -> &'static str {
    match e {
        Emotion::Anger => "A",
        Emotion::Disgust => "D",
        Emotion::Fear => "F",
        Emotion::Happiness => "H",
        Emotion::Sadness => "Sa",
        Emotion::Surprise => "Su",
        Emotion::Neutral => "N",
    }
}

/// One strip per configuration, one cell per frame, colored by predicted
/// class. The top strip shades the known frame labels. Predictions that
/// disagree with a known label get a red border.
pub fn timeline_strip(t: &TimelineExport) -> String {
    let cell = 18.0;
    let label_w = 140.0;
    let row_h = 26.0;
    let n = t.truth.len();
    let width = label_w + cell * n as f64 + 20.0;
    let height = 40.0 + row_h * (t.tracks.len() + 1) as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="16" font-size="12">{} (label: {})</text>"#,
        esc(&t.video_id),
        t.video_label.map_or("none", |e| e.name())
    );
    let row = |s: &mut String, r: usize, name: &str, cells: &[Option<Emotion>], truth: Option<&[Option<Emotion>]>| {
        let y = 30.0 + row_h * r as f64;
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + 13.0, esc(name));
        for (i, c) in cells.iter().enumerate() {
            let x = label_w + cell * i as f64;
            let (fill, text) = match c {
                Some(e) => (PALETTE[e.index()], initial(*e)),
                None => ("#ffffff", ""),
            };
            let wrong = matches!((truth.and_then(|t| t[i]), c), (Some(a), Some(b)) if a != *b);
            let stroke = if wrong { r#"stroke="red" stroke-width="2""# } else { r##"stroke="#999""## };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" {stroke}/><text x="{}" y="{}" text-anchor="middle" fill="white">{text}</text>"#,
                x + cell / 2.0,
                y + 12.5
            );
        }
    };
    row(&mut s, 0, "ground truth", &t.truth, None);
    for (k, tr) in t.tracks.iter().enumerate() {
        let cells: Vec<Option<Emotion>> = tr.decisions.iter().copied().map(Some).collect();
        row(&mut s, k + 1, &format!("{} ({} flips)", tr.name, tr.flips), &cells, Some(&t.truth));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use fercoh_core::eval::TimelineTrack;

    #[test]
    fn bar_chart_has_one_rect_per_value() {
        let svg = bar_chart(
            "t",
            &["a".into(), "b<".into()],
            &["micro", "macro"],
            &[vec![Some(50.0), None], vec![Some(10.0), Some(100.0)]],
            &[1],
        );
        assert_eq!(svg.matches("<rect").count(), 3 + 2);
        assert!(svg.contains("b&lt;"));
        assert_eq!(svg.matches(r#"stroke="black""#).count(), 2);
    }

    #[test]
    fn wrong_cells_are_marked() {
        use Emotion::*;
        let t = TimelineExport {
            video_id: "v".into(),
            video_label: Some(Surprise),
            truth: vec![Some(Neutral), None, Some(Surprise)],
            tracks: vec![TimelineTrack {
                name: "x".into(),
                decisions: vec![Neutral, Fear, Fear],
                flips: 1,
            }],
        };
        let svg = timeline_strip(&t);
        assert_eq!(svg.matches(r#"stroke="red""#).count(), 1);
        assert_eq!(svg.matches("<rect").count(), 6);
    }
}
