//! Minimal deterministic SVG rendering: line plots (optionally log-scale y)
//! and histograms with an overlay curve. Output depends only on the input
//! data, never on time or environment.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        escape(y_label)
    );
}

fn axes(out: &mut String, frame: &Frame, log_y: bool) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let xv = frame.x_lo + (frame.x_hi - frame.x_lo) * i as f64 / 4.0;
        let px = frame.px(xv);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            tick_label(xv)
        );
    }
    if log_y {
        let lo = frame.y_lo.floor() as i64;
        let hi = frame.y_hi.ceil() as i64;
        let step = ((hi - lo) / 8).max(1);
        let mut e = lo;
        while e <= hi {
            let v = e as f64;
            if v >= frame.y_lo && v <= frame.y_hi {
                let py = frame.py(v);
                let _ = writeln!(
                    out,
                    r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
                    x0 - 5.0,
                    x0 - 8.0,
                    py + 4.0
                );
            }
            e += step;
        }
    } else {
        for i in 0..=4 {
            let yv = frame.y_lo + (frame.y_hi - frame.y_lo) * i as f64 / 4.0;
            let py = frame.py(yv);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                py + 4.0,
                tick_label(yv)
            );
        }
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

impl LinePlot {
    /// Renders the plot. With `log_y`, non-positive and non-finite y values
    /// are dropped (they break the polyline into segments).
    pub fn render(&self) -> String {
        let tf = |y: f64| if self.log_y { y.log10() } else { y };
        let mut x_lo = f64::INFINITY;
        let mut x_hi = f64::NEG_INFINITY;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for s in &self.series {
            for &(x, y) in &s.points {
                let ty = tf(y);
                if x.is_finite() && ty.is_finite() {
                    x_lo = x_lo.min(x);
                    x_hi = x_hi.max(x);
                    y_lo = y_lo.min(ty);
                    y_hi = y_hi.max(ty);
                }
            }
        }
        let (x_lo, x_hi) = padded(x_lo, x_hi);
        let (y_lo, y_hi) = padded(y_lo, y_hi);
        let frame = Frame {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        };
        let mut out = String::new();
        header(&mut out, &self.title, &self.x_label, &self.y_label);
        axes(&mut out, &frame, self.log_y);
        for (i, s) in self.series.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in &s.points {
                let ty = tf(y);
                if !(x.is_finite() && ty.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(
                    d,
                    "{}{:.2},{:.2} ",
                    if pen_down { "L" } else { "M" },
                    frame.px(x),
                    frame.py(ty)
                );
                pen_down = true;
            }
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                d.trim_end()
            );
            let ly = MARGIN_T + 16.0 * i as f64 + 8.0;
            let lx = WIDTH - MARGIN_R + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Bar chart of a histogram with an overlay curve (e.g. a fitted normal).
pub fn histogram_svg(
    title: &str,
    x_label: &str,
    edges: &[f64],
    counts: &[u64],
    overlay: &[(f64, f64)],
) -> String {
    let x_lo = edges.first().copied().unwrap_or(0.0);
    let x_hi = edges.last().copied().unwrap_or(1.0);
    let y_hi = counts
        .iter()
        .map(|&c| c as f64)
        .chain(overlay.iter().map(|p| p.1))
        .fold(0.0_f64, f64::max);
    let (x_lo, x_hi) = padded(x_lo, x_hi);
    let (y_lo, y_hi) = padded(0.0, y_hi);
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo,
        y_hi,
    };
    let mut out = String::new();
    header(&mut out, title, x_label, "count");
    axes(&mut out, &frame, false);
    for (i, &c) in counts.iter().enumerate() {
        let (a, b) = if edges[i] == edges[i + 1] {
            (frame.px(edges[i]) - 2.0, frame.px(edges[i]) + 2.0)
        } else {
            (frame.px(edges[i]), frame.px(edges[i + 1]))
        };
        let top = frame.py(c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{a:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
            (b - a).max(0.5),
            frame.py(0.0) - top
        );
    }
    if !overlay.is_empty() {
        let d: Vec<String> = overlay
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, frame.px(x), frame.py(y))
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<path d="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
            d.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot() -> LinePlot {
        LinePlot {
            title: "gap <test>".into(),
            x_label: "k".into(),
            y_label: "f - f*".into(),
            log_y: true,
            series: vec![Series {
                name: "median".into(),
                points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0), (3.0, 0.01)],
            }],
        }
    }

    #[test]
    fn deterministic_and_escaped() {
        let a = plot().render();
        assert_eq!(a, plot().render());
        assert!(a.starts_with("<svg"));
        assert!(a.contains("gap &lt;test&gt;"));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn zero_breaks_log_polyline() {
        let a = plot().render();
        let path = a.lines().find(|l| l.contains("stroke-width=\"1.5\"")).unwrap();
        assert_eq!(path.matches('M').count(), 2);
    }

    #[test]
    fn histogram_renders_bars() {
        let s = histogram_svg("h", "x", &[0.0, 1.0, 2.0], &[3, 5], &[(0.5, 3.0), (1.5, 4.0)]);
        assert_eq!(s.matches("<rect").count(), 3); // background + 2 bars
    }
}
