use std::fmt::Write;

use rbmo_core::{AtomId, Error, Filtration, PointMeasure, Result};

use crate::config::PlotSection;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Convex hull by the monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

struct View {
    x0: f64,
    y1: f64,
    scale: f64,
    margin: f64,
}

impl View {
    fn x(&self, x: f64) -> f64 {
        self.margin + (x - self.x0) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        self.margin + (self.y1 - y) * self.scale
    }
}

/// SVG of the atoms of `cfg.level`: support points with area proportional to
/// mass, atom hulls, balls `B_T` and their dilates.
pub fn render(mu: &PointMeasure, f: &Filtration, cfg: &PlotSection) -> Result<String> {
    if mu.dim() != 2 {
        return Err(Error::InvalidParams(format!("plot needs d = 2, got d = {}", mu.dim())));
    }
    let level = f.levels().get(cfg.level).ok_or_else(|| {
        Error::InvalidParams(format!("level {} out of range (filtration has {})", cfg.level, f.depth()))
    })?;
    let pts = mu.points();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p.coords()[k]);
            hi[k] = hi[k].max(p.coords()[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let pad = 0.05 * span;
    let size = cfg.size.max(100.0);
    let margin = 10.0;
    let view = View {
        x0: lo[0] - pad,
        y1: hi[1] + pad,
        scale: (size - 2.0 * margin) / (span + 2.0 * pad),
        margin,
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        s,
        "<title>filtration {} (system {}, family {}), level {} (generation {}), {} atoms</title>",
        cfg.filtration,
        f.system,
        f.family,
        cfg.level,
        level.generation,
        level.atoms.len()
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (i, a) in level.atoms.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let members = f.members(AtomId::new(cfg.level, i))?;
        let hull = convex_hull(members.iter().map(|&p| [pts[p as usize].coords()[0], pts[p as usize].coords()[1]]).collect());
        if hull.len() >= 3 {
            let path: Vec<String> = hull
                .iter()
                .map(|p| format!("{:.3},{:.3}", view.x(p[0]), view.y(p[1])))
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon class="atom" points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1"/>"#,
                path.join(" ")
            );
        }
        let c = a.ball.center();
        let (cx, cy) = (view.x(c.coords()[0]), view.y(c.coords()[1]));
        let _ = writeln!(
            s,
            r#"<circle class="ball" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            a.ball.radius() * view.scale
        );
        for &k in &cfg.dilates {
            let _ = writeln!(
                s,
                r#"<circle class="dilate" data-factor="{k}" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="{color}" stroke-width="0.5" stroke-dasharray="4 3"/>"#,
                a.ball.radius() * k * view.scale
            );
        }
    }

    let wmax = mu.weights().iter().cloned().fold(0.0, f64::max);
    let rmax = 0.01 * size;
    for (p, &w) in pts.iter().zip(mu.weights()) {
        let r = (rmax * (w / wmax).sqrt()).max(0.5);
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="{r:.3}" fill="black"/>"#,
            view.x(p.coords()[0]),
            view.y(p.coords()[1])
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
