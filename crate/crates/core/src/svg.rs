//! Minimal SVG scatter/line plot writer with linear or logarithmic axes.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub log: bool,
}

impl Axis {
    pub fn linear(min: f64, max: f64) -> Self {
        Axis {
            min,
            max,
            log: false,
        }
    }

    pub fn log(min: f64, max: f64) -> Self {
        Axis {
            min,
            max,
            log: true,
        }
    }

    /// Position in [0, 1] along the axis.
    fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.min.log10()) / (self.max.log10() - self.min.log10())
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let lo = self.min.log10().ceil() as i32;
            let hi = self.max.log10().floor() as i32;
            (lo..=hi).map(|e| 10f64.powi(e)).collect()
        } else {
            let span = self.max - self.min;
            if span <= 0.0 || !span.is_finite() {
                return vec![self.min];
            }
            let raw = span / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| span / s <= 6.0)
                .unwrap_or(10.0 * mag);
            let first = (self.min / step).ceil() as i64;
            let last = (self.max / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Accumulates plot elements in data coordinates and renders them to SVG.
#[derive(Debug, Clone)]
pub struct Plot {
    width: f64,
    height: f64,
    margin: f64,
    x: Axis,
    y: Axis,
    title: String,
    x_label: String,
    y_label: String,
    body: String,
}

impl Plot {
    pub fn new(x: Axis, y: Axis) -> Self {
        Plot {
            width: 720.0,
            height: 520.0,
            margin: 70.0,
            x,
            y,
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            body: String::new(),
        }
    }

    pub fn title(mut self, t: &str) -> Self {
        self.title = t.to_string();
        self
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.to_string();
        self.y_label = y.to_string();
        self
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.width - 2.0 * self.margin;
        let h = self.height - 2.0 * self.margin;
        (
            self.margin + self.x.frac(x) * w,
            self.height - self.margin - self.y.frac(y) * h,
        )
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, dashed: bool, width: f64) {
        if points.len() < 2 {
            return;
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (a, b) = self.px(x, y);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let dash = if dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"{dash} points=\"{}\"/>",
            pts.join(" ")
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, stroke: &str, filled: bool, title: &str) {
        let (a, b) = self.px(x, y);
        let fill = if filled { stroke } else { "white" };
        let _ = writeln!(
            self.body,
            "<circle cx=\"{a:.2}\" cy=\"{b:.2}\" r=\"5\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"1.5\"><title>{}</title></circle>",
            escape(title)
        );
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, fill: &str) {
        let (a, b) = self.px(x, y);
        let _ = writeln!(
            self.body,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{fill}\">{}</text>",
            a + 4.0,
            b - 4.0,
            escape(s)
        );
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let (w, h, m) = (self.width, self.height, self.margin);
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">"
        );
        let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
            w - 2.0 * m,
            h - 2.0 * m
        );
        for t in self.x.ticks() {
            let (a, _) = self.px(t, self.y.min);
            let _ = writeln!(
                out,
                "<line x1=\"{a:.2}\" y1=\"{m}\" x2=\"{a:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/><text x=\"{a:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
                h - m,
                h - m + 18.0,
                fmt_tick(t)
            );
        }
        for t in self.y.ticks() {
            let (_, b) = self.px(self.x.min, t);
            let _ = writeln!(
                out,
                "<line x1=\"{m}\" y1=\"{b:.2}\" x2=\"{:.2}\" y2=\"{b:.2}\" stroke=\"#ddd\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
                w - m,
                m - 6.0,
                b + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            w / 2.0,
            h - 20.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text transform=\"translate(18,{:.2}) rotate(-90)\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            h / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"30\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            "<clipPath id=\"plot-area\"><rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\"/></clipPath>",
            w - 2.0 * m,
            h - 2.0 * m
        );
        let _ = writeln!(out, "<g clip-path=\"url(#plot-area)\">");
        out.push_str(&self.body);
        out.push_str("</g>\n</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_ticks_are_decades() {
        assert_eq!(
            Axis::log(0.01, 100.0).ticks(),
            vec![0.01, 0.1, 1.0, 10.0, 100.0]
        );
    }

    #[test]
    fn linear_ticks_cover_range() {
        let t = Axis::linear(0.0, 1.0).ticks();
        assert_eq!(t.first().copied(), Some(0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renders_elements() {
        let mut p = Plot::new(Axis::log(0.1, 10.0), Axis::log(1.0, 100.0)).title("a<b");
        p.polyline(&[(0.1, 1.0), (10.0, 100.0)], "#000", false, 2.0);
        p.circle(1.0, 10.0, "#f00", true, "pt");
        let svg = p.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("<circle"));
        assert!(svg.contains("a&lt;b"));
    }
}
