//! Minimal self-contained SVG plotting: line, scatter, and bar charts.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub kind: SeriesKind,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            kind: SeriesKind::Line,
        }
    }

    pub fn scatter(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
            kind: SeriesKind::Scatter,
        }
    }
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            xr = (xr.0.min(x), xr.1.max(x));
            yr = (yr.0.min(y), yr.1.max(y));
        }
    }
    // degenerate ranges get padded so the plot stays finite
    if !(xr.0.is_finite() && xr.1.is_finite()) {
        xr = (0.0, 1.0);
    }
    if !(yr.0.is_finite() && yr.1.is_finite()) {
        yr = (0.0, 1.0);
    }
    if xr.0 == xr.1 {
        xr = (xr.0 - 0.5, xr.1 + 0.5);
    }
    if yr.0 == yr.1 {
        yr = (yr.0 - 0.5, yr.1 + 0.5);
    }
    (xr, yr)
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Render a chart with shared axes; line and scatter series may be mixed.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(series);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // axis labels and extent ticks
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    ));
    for (v, x, y, anchor) in [
        (x0, MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (x1, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (y0, MARGIN - 4.0, HEIGHT - MARGIN, "end"),
        (y1, MARGIN - 4.0, MARGIN + 4.0, "end"),
    ] {
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\">{}</text>\n",
            fmt(v)
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        match s.kind {
            SeriesKind::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                out.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>\n",
                    pts.join(" ")
                ));
            }
            SeriesKind::Scatter => {
                for &(x, y) in &s.points {
                    out.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"{color}\"/>\n",
                        px(x),
                        py(y)
                    ));
                }
            }
        }
        // legend entry
        let ly = MARGIN + 16.0 * i as f64 + 4.0;
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            ly,
            WIDTH - MARGIN - 135.0,
            ly + 9.0,
            escape(&s.label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart over labelled values.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], values: &[f64]) -> String {
    assert_eq!(labels.len(), values.len());
    let vmax = values.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let n = values.len().max(1) as f64;
    let band = (WIDTH - 2.0 * MARGIN) / n;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    ));
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        b = HEIGHT - MARGIN
    ));
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let h = (v / vmax) * (HEIGHT - 2.0 * MARGIN);
        let x = MARGIN + band * i as f64 + band * 0.15;
        let y = HEIGHT - MARGIN - h;
        out.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>\n",
            band * 0.7,
            PALETTE[0]
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            x + band * 0.35,
            HEIGHT - MARGIN + 16.0,
            escape(label)
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
            x + band * 0.35,
            y - 4.0,
            fmt(v)
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
