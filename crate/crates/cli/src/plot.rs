//! Static SVG line charts for trace, ratio and phase CSV files.

use std::fmt::Write as _;

use irls_core::io::{CsvTable, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trace,
    Ratios,
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// The numbers behind a chart; `render` turns it into SVG.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn numeric(table: &CsvTable, name: &str) -> Result<Vec<Option<f64>>, FormatError> {
    table.floats(name)
}

/// Builds the chart data for `kind` from CSV text.
pub fn chart(kind: PlotKind, csv: &str) -> Result<Chart, FormatError> {
    let table = CsvTable::parse(csv)?;
    match kind {
        PlotKind::Trace | PlotKind::Ratios => {
            table.require(&["n", "ref_error_l1"])?;
            let n = numeric(&table, "n")?;
            let err = numeric(&table, "ref_error_l1")?;
            let pairs: Vec<(f64, f64)> = n
                .into_iter()
                .zip(err)
                .filter_map(|(n, e)| Some((n?, e?)))
                .filter(|(_, e)| *e > 0.0)
                .collect();
            if kind == PlotKind::Trace {
                Ok(Chart {
                    title: "Reference error".into(),
                    x_label: "iteration n".into(),
                    y_label: "log10 ||x^n - x*||_1".into(),
                    series: vec![Series {
                        label: "error".into(),
                        points: pairs.iter().map(|&(n, e)| (n, e.log10())).collect(),
                    }],
                })
            } else {
                Ok(Chart {
                    title: "Linear contraction ratio".into(),
                    x_label: "iteration n".into(),
                    y_label: "E(n+1) / E(n)".into(),
                    series: vec![Series {
                        label: "ratio".into(),
                        points: pairs.windows(2).map(|p| (p[0].0, p[1].1 / p[0].1)).collect(),
                    }],
                })
            }
        }
        PlotKind::Phase => {
            table.require(&["k", "method", "success_rate"])?;
            let k = numeric(&table, "k")?;
            let rate = numeric(&table, "success_rate")?;
            let method = table.strings("method")?;
            let mut series: Vec<Series> = Vec::new();
            for ((k, r), m) in k.into_iter().zip(rate).zip(method) {
                let (Some(k), Some(r)) = (k, r) else { continue };
                match series.iter_mut().find(|s| s.label == m) {
                    Some(s) => s.points.push((k, r)),
                    None => series.push(Series { label: m, points: vec![(k, r)] }),
                }
            }
            for s in &mut series {
                s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            Ok(Chart {
                title: "Recovery success rate".into(),
                x_label: "sparsity k".into(),
                y_label: "success rate".into(),
                series,
            })
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Renders the chart; one `<polyline>` per series, a legend when there is
/// more than one series.
pub fn render(chart: &Chart) -> String {
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    );

    // axes and ticks
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    let mut ticks = String::new();
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = write!(
            ticks,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            sx(xv),
            TOP + plot_h + 16.0,
            tick_label(xv),
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(out, r#"<g class="ticks">{ticks}</g>"#);
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(&chart.y_label)
    );

    for (i, s) in chart.series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            COLORS[i % COLORS.len()],
            pts.join(" "),
            escape(&s.label)
        );
    }

    if chart.series.len() > 1 {
        let mut legend = String::new();
        for (i, s) in chart.series.iter().enumerate() {
            let y = TOP + 10.0 + 16.0 * i as f64;
            let x = LEFT + plot_w - 150.0;
            let _ = write!(
                legend,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text class="legend-entry" x="{:.1}" y="{:.1}">{}</text>"#,
                x + 20.0,
                COLORS[i % COLORS.len()],
                x + 26.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        let _ = writeln!(out, r#"<g class="legend">{legend}</g>"#);
    }
    out.push_str("</svg>\n");
    out
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_chart_has_one_polyline() {
        let csv = "n,surrogate,eps,step_l1,ref_error_l1\n1,1,1,1,1e-1\n2,1,1,1,1e-2\n3,1,1,1,1e-3\n";
        let c = chart(PlotKind::Trace, csv).unwrap();
        assert_eq!(c.series.len(), 1);
        assert_eq!(c.series[0].points, vec![(1.0, -1.0), (2.0, -2.0), (3.0, -3.0)]);
        let svg = render(&c);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("legend"));
    }

    #[test]
    fn phase_chart_groups_methods() {
        let csv = "k,method,trials,successes,success_rate,mean_iters\n\
                   5,tau=1,10,10,1,20\n5,hybrid_tau=0.5,10,10,1,25\n\
                   10,tau=1,10,4,0.4,40\n10,hybrid_tau=0.5,10,6,0.6,45\n";
        let c = chart(PlotKind::Phase, csv).unwrap();
        assert_eq!(c.series.len(), 2);
        assert_eq!(c.series[1].label, "hybrid_tau=0.5");
        assert_eq!(c.series[1].points, vec![(5.0, 1.0), (10.0, 0.6)]);
        let svg = render(&c);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
    }

    #[test]
    fn missing_column_is_named() {
        let err = chart(PlotKind::Phase, "k,method,trials\n1,a,2\n").unwrap_err();
        assert!(matches!(err, FormatError::SchemaMismatch(ref c) if c == "success_rate"), "{err}");
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(-6.5), "-6.5");
        assert_eq!(tick_label(1e-5), "1.0e-5");
    }
}
