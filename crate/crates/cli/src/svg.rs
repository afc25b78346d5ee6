use std::fmt::Write;

use detstab_core::limits::ConvergenceReport;
use detstab_core::linalg::C64;
use detstab_core::roots::{Contour, Root};

const SIZE: f64 = 320.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Panel {
    title: String,
    xlabel: &'static str,
    ylabel: &'static str,
    /// Polylines with a palette index.
    curves: Vec<(Vec<C64>, usize)>,
    /// Limit roots drawn as squares.
    limit: Vec<Root>,
    /// Viscous roots drawn as circles, with a palette index.
    viscous: Vec<(Root, usize)>,
}

impl Panel {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self
            .curves
            .iter()
            .flat_map(|(c, _)| c.iter().copied())
            .chain(self.limit.iter().map(Root::z))
            .chain(self.viscous.iter().map(|(r, _)| r.z()));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in pts {
            x0 = x0.min(p.re);
            x1 = x1.max(p.re);
            y0 = y0.min(p.im);
            y1 = y1.max(p.im);
        }
        if x0 > x1 {
            return (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        (x0 - pad, x1 + pad, y0 - pad, y1 + pad)
    }

    fn render(&self, out: &mut String, ox: f64) {
        let (x0, x1, y0, y1) = self.bounds();
        let span = (x1 - x0).max(y1 - y0);
        let map = |z: C64| {
            (
                ox + MARGIN + (z.re - x0) / span * SIZE,
                MARGIN + SIZE - (z.im - y0) / span * SIZE,
            )
        };
        let _ = writeln!(out, r#"<g class="panel">"#);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#999"/>"##,
            ox + MARGIN,
            MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            ox + MARGIN + SIZE / 2.0,
            MARGIN - 16.0,
            self.title
        );
        let (ax, ay) = map(C64::new(0.0, y0));
        let (_, ay1) = map(C64::new(0.0, y0 + span));
        if (x0..=x0 + span).contains(&0.0) {
            let _ = writeln!(out, r##"<line x1="{ax:.2}" y1="{ay:.2}" x2="{ax:.2}" y2="{ay1:.2}" stroke="#ccc"/>"##);
        }
        let (bx, by) = map(C64::new(x0, 0.0));
        let (bx1, _) = map(C64::new(x0 + span, 0.0));
        if (y0..=y0 + span).contains(&0.0) {
            let _ = writeln!(out, r##"<line x1="{bx:.2}" y1="{by:.2}" x2="{bx1:.2}" y2="{by:.2}" stroke="#ccc"/>"##);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{} [{:.3}, {:.3}]</text>"#,
            ox + MARGIN + SIZE / 2.0,
            MARGIN + SIZE + 28.0,
            self.xlabel,
            x0,
            x0 + span
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" transform="rotate(-90 {:.2} {:.2})" text-anchor="middle">{} [{:.3}, {:.3}]</text>"#,
            ox + MARGIN - 20.0,
            MARGIN + SIZE / 2.0,
            ox + MARGIN - 20.0,
            MARGIN + SIZE / 2.0,
            self.ylabel,
            y0,
            y0 + span
        );
        for (curve, k) in &self.curves {
            let pts: Vec<String> = curve
                .iter()
                .map(|&z| {
                    let (x, y) = map(z);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline class="contour" points="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
                pts.join(" "),
                PALETTE[k % PALETTE.len()]
            );
        }
        for r in &self.limit {
            let (x, y) = map(r.z());
            let h = 3.0 + 2.0 * r.multiplicity.max(1) as f64;
            let _ = writeln!(
                out,
                r#"<rect class="limit-root" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                x - h,
                y - h,
                2.0 * h,
                2.0 * h
            );
        }
        for (r, k) in &self.viscous {
            let (x, y) = map(r.z());
            let _ = writeln!(
                out,
                r#"<circle class="viscous-root" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="{}"/>"#,
                2.0 + 2.0 * r.multiplicity.max(1) as f64,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(out, "</g>");
    }
}

fn legend(out: &mut String, eps: &[f64], top: f64) {
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{top:.2}" font-size="12">squares: ZND / Neumann shock roots; circles: viscous roots</text>"#
    );
    for (i, e) in eps.iter().enumerate() {
        let x = MARGIN + 120.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="12">eps = {e}</text>"#,
            x + 5.0,
            top + 16.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            top + 20.0
        );
    }
}

fn pts(c: Option<Contour>) -> Vec<C64> {
    c.map(|c| c.polyline(64)).unwrap_or_default()
}

/// Static zero map with one panel per region that was run.
pub fn zero_map(report: &ConvergenceReport) -> String {
    let cfg = &report.config;
    let mut panels = Vec::new();
    if let Some(r) = &report.region1 {
        let mut curves = Vec::new();
        let mut viscous = Vec::new();
        for (k, e) in r.per_eps.iter().enumerate() {
            curves.push((pts(Contour::indented_box(-e.eta, cfg.c_i, cfg.c_i, cfg.indent).ok()), k));
            viscous.extend(e.roots.iter().map(|x| (x.clone(), k)));
        }
        panels.push(Panel {
            title: "Region I".into(),
            xlabel: "Re lambda",
            ylabel: "Im lambda",
            curves,
            limit: r.znd_roots.clone(),
            viscous,
        });
    }
    if let Some(r) = &report.region2 {
        let mut curves = Vec::new();
        let mut viscous = Vec::new();
        let mut limit = Vec::new();
        for (k, e) in r.per_eps.iter().enumerate() {
            let c = Contour::annular_sector(-e.eps * cfg.eta, cfg.c_ii * e.eps, 1.0 / cfg.c_ii).ok();
            curves.push((pts(c), k));
            viscous.extend(e.roots_scaled.iter().map(|x| (x.clone(), k)));
            if k == 0 {
                limit = e.ns_roots.clone();
            }
        }
        panels.push(Panel {
            title: "Region II (stretched)".into(),
            xlabel: "Re eps lambda",
            ylabel: "Im eps lambda",
            curves,
            limit,
            viscous,
        });
    }
    if let Some(r) = &report.region3 {
        let mut curves = Vec::new();
        let mut viscous = Vec::new();
        for (k, e) in r.per_eps.iter().enumerate() {
            curves.push((pts(Contour::half_disk(e.radius, cfg.indent).ok()), k));
            viscous.extend(e.roots.iter().map(|x| (x.clone(), k)));
        }
        panels.push(Panel {
            title: "Region III".into(),
            xlabel: "Re lambda",
            ylabel: "Im lambda",
            curves,
            limit: Vec::new(),
            viscous,
        });
    }
    let width = (panels.len().max(1) as f64) * (SIZE + 2.0 * MARGIN);
    let height = SIZE + 2.0 * MARGIN + 60.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, i as f64 * (SIZE + 2.0 * MARGIN));
    }
    legend(&mut out, &cfg.eps, SIZE + 2.0 * MARGIN + 8.0);
    out.push_str("</svg>\n");
    out
}
