//! SVG figures: curves (edges, dashed bridges, vertices) and labelled point
//! clouds, projected onto two coordinate axes.

use std::fmt::Write;

use rectify_core::curve::Gamma;

use crate::error::{CliError, CliResult};

/// Axis-aligned box of the projected data, widened by 5% on each side. An
/// empty input, or a zero extent along an axis, falls back to unit extent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl ViewBox {
    pub fn fit(points: impl IntoIterator<Item = (f64, f64)>) -> ViewBox {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !(lo.0 <= hi.0) {
            return ViewBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 };
        }
        let axis = |a: f64, b: f64| {
            let span = b - a;
            if span > 0.0 {
                (a - 0.05 * span, 1.1 * span)
            } else {
                (a - 0.5, 1.0)
            }
        };
        let (x, w) = axis(lo.0, hi.0);
        let (y, h) = axis(lo.1, hi.1);
        ViewBox { x, y, w, h }
    }

    fn unit(&self) -> f64 {
        self.w.max(self.h)
    }
}

fn check_axes(dim: usize, axes: (usize, usize)) -> CliResult<()> {
    if axes.0 == axes.1 || axes.0 >= dim || axes.1 >= dim {
        return Err(CliError::input(format!(
            "projection axes ({}, {}) must be two distinct coordinates below {dim}",
            axes.0, axes.1
        )));
    }
    Ok(())
}

/// SVG y grows downwards, so the second axis is negated.
fn project(p: &[f64], axes: (usize, usize)) -> (f64, f64) {
    (p[axes.0], -p[axes.1])
}

fn header(out: &mut String, vb: &ViewBox) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        vb.x,
        vb.y,
        vb.w,
        vb.h,
        (800.0 * vb.h / vb.w).round().max(1.0)
    );
}

pub fn render_gamma(gamma: &Gamma, axes: (usize, usize)) -> CliResult<String> {
    let dim = gamma.vertices.first().map_or(2, |p| p.dim());
    check_axes(dim, axes)?;
    let mut pts: Vec<(f64, f64)> = gamma.vertices.iter().map(|p| project(p, axes)).collect();
    for b in &gamma.bridges {
        pts.extend(b.polyline.iter().map(|p| project(p, axes)));
    }
    let vb = ViewBox::fit(pts.iter().copied());
    let stroke = vb.unit() * 0.002;
    let mut out = String::new();
    header(&mut out, &vb);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="{stroke}" fill="none">"#);
    for &(a, b) in &gamma.edges {
        let (p, q) = (project(&gamma.vertices[a], axes), project(&gamma.vertices[b], axes));
        let _ = writeln!(out, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, p.0, p.1, q.0, q.1);
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<g stroke="firebrick" stroke-width="{stroke}" stroke-dasharray="{} {}" fill="none">"#,
        4.0 * stroke,
        2.0 * stroke
    );
    for b in &gamma.bridges {
        let coords: Vec<String> = b
            .polyline
            .iter()
            .map(|p| {
                let (x, y) = project(p, axes);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}"/>"#, coords.join(" "));
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, r#"<g fill="steelblue">"#);
    for &(x, y) in &pts[..gamma.vertices.len()] {
        let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="{}"/>"#, 2.0 * stroke);
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

const PALETTE: [&str; 6] = ["steelblue", "firebrick", "seagreen", "darkorange", "purple", "gray"];

/// Points coloured by label, labels sorted to fix the colour assignment.
pub fn render_labels(points: &[Vec<f64>], labels: &[String], axes: (usize, usize)) -> CliResult<String> {
    if points.len() != labels.len() {
        return Err(CliError::input(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let dim = points.first().map_or(2, Vec::len);
    check_axes(dim, axes)?;
    let mut names: Vec<&String> = labels.iter().collect();
    names.sort();
    names.dedup();
    let pts: Vec<(f64, f64)> = points.iter().map(|p| project(p, axes)).collect();
    let vb = ViewBox::fit(pts.iter().copied());
    let r = vb.unit() * 0.004;
    let mut out = String::new();
    header(&mut out, &vb);
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, r#"<g fill="{}" data-label="{name}">"#, PALETTE[i % PALETTE.len()]);
        for (p, l) in pts.iter().zip(labels) {
            if l == *name {
                let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="{r}"/>"#, p.0, p.1);
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rectify_core::Point;

    fn gamma(points: &[[f64; 2]], edges: Vec<(usize, usize)>) -> Gamma {
        Gamma { vertices: points.iter().map(|p| Point::new(p.to_vec()).unwrap()).collect(), edges, bridges: Vec::new() }
    }

    #[test]
    fn empty_curve_has_unit_box_and_no_paths() {
        let svg = render_gamma(&gamma(&[], vec![]), (0, 1)).unwrap();
        assert!(svg.contains(r#"viewBox="0 0 1 1""#));
        assert!(!svg.contains("<line") && !svg.contains("<polyline") && !svg.contains("<path"));
    }

    #[test]
    fn one_edge_one_line() {
        let svg = render_gamma(&gamma(&[[0.0, 0.0], [1.0, 1.0]], vec![(0, 1)]), (0, 1)).unwrap();
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains(r#"viewBox="-0.05 -1.05 1.1 1.1""#));
    }

    #[test]
    fn flat_data_gets_unit_height() {
        let vb = ViewBox::fit([(0.0, 0.0), (2.0, 0.0)]);
        assert_eq!(vb, ViewBox { x: -0.1, y: -0.5, w: 2.2, h: 1.0 });
    }

    #[test]
    fn bad_axes_rejected() {
        assert!(render_gamma(&gamma(&[[0.0, 0.0]], vec![]), (0, 2)).is_err());
        assert!(render_gamma(&gamma(&[[0.0, 0.0]], vec![]), (1, 1)).is_err());
    }
}
