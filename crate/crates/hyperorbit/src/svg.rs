//! Deterministic SVG scatter plots with a fixed viewport taken from the box.

use std::collections::BTreeSet;
use std::fmt::Write;

const SIZE: u32 = 600;
const MARGIN: u32 = 40;

/// Maps a box to plot pixels; one-dimensional boxes get a strip.
#[derive(Clone, Debug)]
pub struct Viewport {
    x: (f64, f64),
    y: Option<(f64, f64)>,
}

impl Viewport {
    pub fn new(x: (f64, f64), y: Option<(f64, f64)>) -> Self {
        Viewport { x, y }
    }

    pub fn pixel(&self, p: &[f64]) -> Option<(u32, u32)> {
        let inner = (SIZE - 2 * MARGIN) as f64;
        let scale = |v: f64, (lo, hi): (f64, f64)| {
            let t = (v - lo) / (hi - lo);
            (0.0..=1.0).contains(&t).then(|| (t * inner).round() as u32)
        };
        let px = MARGIN + scale(*p.first()?, self.x)?;
        let py = match self.y {
            Some(r) => SIZE - MARGIN - scale(*p.get(1)?, r)?,
            None => SIZE / 2,
        };
        Some((px, py))
    }
}

/// Collects orbit points as distinct pixels, plus optional target marks.
#[derive(Clone, Debug)]
pub struct Scatter {
    view: Viewport,
    points: BTreeSet<(u32, u32)>,
    marks: BTreeSet<(u32, u32)>,
}

impl Scatter {
    pub fn new(view: Viewport) -> Self {
        Scatter { view, points: BTreeSet::new(), marks: BTreeSet::new() }
    }

    pub fn point(&mut self, p: &[f64]) {
        if let Some(px) = self.view.pixel(p) {
            self.points.insert(px);
        }
    }

    pub fn mark(&mut self, p: &[f64]) {
        if let Some(px) = self.view.pixel(p) {
            self.marks.insert(px);
        }
    }

    pub fn render(&self, title: &str) -> String {
        let mut s = String::new();
        let inner = SIZE - 2 * MARGIN;
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
        let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
        let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="gray"/>"#);
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-family="monospace" font-size="13">{}</text>"#, escape(title));
        let label = |v: f64| format!("{v}");
        let bottom = SIZE - MARGIN + 16;
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{bottom}" font-family="monospace" font-size="11">{}</text>"#, label(self.view.x.0));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{bottom}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
            SIZE - MARGIN,
            label(self.view.x.1)
        );
        if let Some((lo, hi)) = self.view.y {
            let _ = writeln!(s, r#"<text x="4" y="{}" font-family="monospace" font-size="11">{}</text>"#, SIZE - MARGIN, label(lo));
            let _ = writeln!(s, r#"<text x="4" y="{}" font-family="monospace" font-size="11">{}</text>"#, MARGIN + 4, label(hi));
        }
        let _ = writeln!(s, r#"<g fill="navy">"#);
        for (x, y) in &self.points {
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="1" height="1"/>"#);
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r#"<g stroke="crimson" fill="none">"#);
        for (x, y) in &self.marks {
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3"/>"#);
        }
        let _ = writeln!(s, "</g>");
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
