//! Minimal SVG emitter for log-log convergence plots. No plotting
//! dependencies; one polyline-with-markers series per norm.

use std::fmt::Write as _;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const W: f64 = 720.0;
const H: f64 = 520.0;
const ML: f64 = 70.0;
const MR: f64 = 180.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

/// Log-log scatter+line plot. Points with nonpositive coordinates are
/// dropped (they have no logarithm).
pub fn loglog_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (_, pts) in series {
        for &(x, y) in pts {
            if x > 0.0 && y > 0.0 {
                xs.push(x.log10());
                ys.push(y.log10());
            }
        }
    }
    let (x_lo, x_hi) = padded_range(&xs);
    let (y_lo, y_hi) = padded_range(&ys);
    let sx = move |x: f64| ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let sy = move |y: f64| H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="monospace" font-size="16" text-anchor="middle">{}</text>"#,
        (ML + W - MR) / 2.0,
        escape(title)
    );

    // frame
    let _ = writeln!(
        out,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );

    // decade ticks and grid
    for d in (x_lo.floor() as i64)..=(x_hi.ceil() as i64) {
        let x = d as f64;
        if x < x_lo || x > x_hi {
            continue;
        }
        let px = sx(x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{MT}" x2="{px:.2}" y2="{}" stroke="#dddddd"/>"##,
            H - MB
        );
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{}" font-family="monospace" font-size="12" text-anchor="middle">1e{d}</text>"#,
            H - MB + 18.0
        );
    }
    for d in (y_lo.floor() as i64)..=(y_hi.ceil() as i64) {
        let y = d as f64;
        if y < y_lo || y > y_hi {
            continue;
        }
        let py = sy(y);
        let _ = writeln!(
            out,
            r##"<line x1="{ML}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#dddddd"/>"##,
            W - MR
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{py:.2}" font-family="monospace" font-size="12" text-anchor="end">1e{d}</text>"#,
            ML - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="13" text-anchor="middle">{}</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="monospace" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(y_label)
    );

    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        let mut markers = String::new();
        let mut sorted: Vec<(f64, f64)> =
            pts.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(x, y)) in sorted.iter().enumerate() {
            let (px, py) = (sx(x.log10()), sy(y.log10()));
            let _ = write!(path, "{}{px:.2},{py:.2} ", if i == 0 { "M" } else { "L" });
            let _ = writeln!(markers, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3.2" fill="{color}"/>"#);
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#, path.trim());
        out.push_str(&markers);
        let ly = MT + 18.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            W - MR + 10.0,
            W - MR + 30.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" font-family="monospace" font-size="12">{}</text>"#,
            W - MR + 36.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn padded_range(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (-1.0, 1.0);
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo).abs() < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.06 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_wellformed_svg() {
        let series = vec![
            ("h1_err".to_string(), vec![(0.25, 0.5), (0.125, 0.36), (0.0625, 0.25)]),
            ("l2_err".to_string(), vec![(0.25, 0.1), (0.125, 0.04), (0.0625, 0.012)]),
        ];
        let svg = loglog_plot("rates", "delta", "error", &series);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("h1_err"));
        // Deterministic output.
        assert_eq!(svg, loglog_plot("rates", "delta", "error", &series));
    }

    #[test]
    fn tolerates_empty_and_nonpositive_points() {
        let svg = loglog_plot("empty", "x", "y", &[("s".into(), vec![(0.0, 1.0), (-1.0, 2.0)])]);
        assert!(svg.contains("</svg>"));
    }
}
