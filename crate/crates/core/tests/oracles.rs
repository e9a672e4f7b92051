//! Frozen reference values, each computed independently of the code path it
//! checks (closed forms, exact counts or brute force).

use rectify_core::beta::{beta2_with_line, center_of_mass};
use rectify_core::cones::{
    classify_graph_rectifiable, cone_mass_ratio, default_alpha_grid, direction_grid, eta_alpha, geometric_radii,
    graph_extract, ConeSpec,
};
use rectify_core::geometry::order_by_projection;
use rectify_core::jones::JonesEngine;
use rectify_core::measures::{doubling_profile, generate, measured_doubling_constant, MeasureSpec};
use rectify_core::nets::build_family;
use rectify_core::{Ball, DiscreteMeasure, Line, MPlane, Point};

fn pt(c: &[f64]) -> Point {
    Point::new(c.to_vec()).unwrap()
}

#[test]
fn eta_at_one_half() {
    let eta = eta_alpha(0.5).unwrap();
    assert!((eta.value - (1.0 - 3f64.sqrt() / 2.0).sqrt()).abs() < 1e-15);
    assert!((eta.value - 0.36603).abs() < 1e-5);
    assert!(eta.in_domain);
    assert!(eta_alpha(1e-9).unwrap().value < 1e-4);
}

/// Points on both lines' 2ε-neighbourhoods, ε < 1/32, 1-separated.
#[test]
fn orderings_under_close_lines_agree() {
    let eps = 1.0 / 40.0;
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let t = 1.3 * i as f64 + 0.2 * ((i * 7 % 5) as f64);
            vec![t, eps * ((i * 3 % 7) as f64 / 7.0 - 0.5)]
        })
        .collect();
    let span = pts.last().unwrap()[0];
    let theta = eps / span;
    let l1 = Line::new(pt(&[0.0, 0.0]), vec![1.0, 0.0]).unwrap();
    let l2 = Line::new(pt(&[0.0, 0.0]), vec![-theta.cos(), -theta.sin()]).unwrap();
    for p in &pts {
        assert!(l1.dist(p) <= 2.0 * eps && l2.dist(p) <= 2.0 * eps);
    }
    let mut a = order_by_projection(&pts, &l1);
    let b = order_by_projection(&pts, &l2);
    if a != b {
        a.reverse();
    }
    assert_eq!(a, b);
}

#[test]
fn segment_doubling_near_two() {
    let n = 1000;
    let mu = generate(&MeasureSpec::default_for("segment").unwrap(), n, 0).unwrap();
    let x = mu.atom(500).clone();
    for r in [0.02, 0.05, 0.1, 0.2] {
        let p = doubling_profile(&mu, &x, r, r, 1).unwrap();
        assert!((p.ratios[0] - 2.0).abs() <= 2.0 / (n as f64 * r), "r = {r}: {}", p.ratios[0]);
    }
}

#[test]
fn cantor_depth6_doubling_at_most_16() {
    let mu = generate(&MeasureSpec::Cantor4 { depth: 6, dim: 2 }, 0, 0).unwrap();
    let d = measured_doubling_constant(&mu, 4f64.powi(-6), 1.0, 13).unwrap();
    assert!(d <= 16.0 + 1e-12, "{d}");
}

#[test]
fn plane_stack_geometric_mass() {
    let spec = MeasureSpec::PlaneStack { planes: 3, coefficients: Some(vec![1.0, 0.5, 0.25]), gap: 1.0, dim: 3 };
    let mu = generate(&spec, 400, 0).unwrap();
    let base =
        generate(&MeasureSpec::PlaneStack { planes: 1, coefficients: Some(vec![1.0]), gap: 1.0, dim: 3 }, 400, 0)
            .unwrap();
    assert!((mu.total_mass() - 1.75 * base.total_mass()).abs() < 1e-12);
}

#[test]
fn equispaced_net_sizes() {
    let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 1024, 0).unwrap();
    let fam = build_family(&mu, 0, 10, 1.1, 10).unwrap();
    for level in &fam.levels {
        let size = level.indices.len();
        let lo = if level.k == 0 { 1 } else { 1 << (level.k - 1) };
        assert!(size >= lo && size <= (1 << level.k) + 1, "k = {}: {size}", level.k);
    }
}

/// Unit-square corners: every line through the centroid leaves mean squared
/// distance 1/4, the minimum over a 10⁴-angle grid.
#[test]
fn square_corners_attain_one_quarter() {
    let mu =
        DiscreteMeasure::uniform(vec![pt(&[0.0, 0.0]), pt(&[1.0, 0.0]), pt(&[0.0, 1.0]), pt(&[1.0, 1.0])]).unwrap();
    let window = Ball::new(pt(&[0.5, 0.5]), 2f64.sqrt() / 2.0).unwrap();
    let z = center_of_mass(&mu, &window).unwrap();
    assert_eq!(z.coords(), &[0.5, 0.5]);
    let mut best = f64::INFINITY;
    for i in 0..10_000 {
        let t = std::f64::consts::PI * i as f64 / 10_000.0;
        let line = Line::new(z.clone(), vec![t.cos(), t.sin()]).unwrap();
        let b = beta2_with_line(&mu, &window, &line).unwrap() * window.diam();
        best = best.min(b * b);
    }
    assert!((best - 0.25).abs() < 1e-12, "{best}");
}

/// Partial sums at a centre-region atom keep growing over k in [2, 8].
#[test]
fn cantor_profile_grows() {
    let mu = generate(&MeasureSpec::Cantor4 { depth: 8, dim: 2 }, 0, 0).unwrap();
    let fam = build_family(&mu, 0, 12, 1.1, 10).unwrap();
    let engine = JonesEngine::new(&mu, &fam).unwrap();
    let x = mu
        .atoms()
        .iter()
        .min_by(|a, b| {
            let d = |p: &Point| (p[0] - 0.5).hypot(p[1] - 0.5);
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let p = engine.profile(x, f64::INFINITY).unwrap();
    let growth: Vec<f64> = (2..=8).map(|k| p.partial_sums[&k] - p.partial_sums[&(k - 1)]).collect();
    let c = growth.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(c > 0.0, "{growth:?}");
}

#[test]
fn cantor_corner_has_bad_cone_mass() {
    let mu = generate(&MeasureSpec::Cantor4 { depth: 6, dim: 2 }, 0, 0).unwrap();
    let corner = mu.atom(0).clone();
    let spec = ConeSpec::new(corner, MPlane::coordinate(2, 1).unwrap(), 0.5, Some(1.0)).unwrap();
    assert!(cone_mass_ratio(&mu, &spec).unwrap() > 0.2);
}

#[test]
fn graph_of_half_slope_is_extracted() {
    let pts: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 / 199.0;
            vec![t, t / 2.0]
        })
        .collect();
    let alpha = 0.5f64.atan().sin();
    assert!((alpha - 0.44721).abs() < 1e-5);
    let g = graph_extract(&pts, &MPlane::coordinate(2, 1).unwrap(), alpha).unwrap();
    assert_eq!(g.accepted.len(), 200);
    assert!((g.bound - 1.11803).abs() < 1e-5);
    assert!(g.lipschitz <= g.bound * (1.0 + 1e-9) && g.within_bound);

    let on_plane: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
    let g = graph_extract(&on_plane, &MPlane::coordinate(2, 1).unwrap(), 0.3).unwrap();
    assert_eq!((g.accepted.len(), g.lipschitz), (10, 1.0));

    let stacked = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
    let g = graph_extract(&stacked, &MPlane::coordinate(2, 1).unwrap(), 0.3).unwrap();
    assert_eq!(g.rejected, vec![(1, 0)]);
}

#[test]
fn segment_cones_all_positive_along_segment() {
    let mu = generate(&MeasureSpec::default_for("segment").unwrap(), 500, 0).unwrap();
    let atoms: Vec<usize> = (0..500).step_by(5).collect();
    let planes = direction_grid(2, 8).unwrap();
    let labels =
        classify_graph_rectifiable(&mu, &atoms, &planes, &default_alpha_grid(), &geometric_radii(0.5, 0.5, 8), 0.01)
            .unwrap();
    assert!(labels.iter().all(|l| l.positive && l.plane == Some(0)));
}

/// The radius grid has to stop well above the atom spacing (7.3e-4 at depth
/// 6): a ball holding only its apex has no bad mass, so finer grids label
/// atoms positive by resolution alone (103/205 with twelve radii).
#[test]
fn cantor_depth6_rarely_positive() {
    let mu = generate(&MeasureSpec::Cantor4 { depth: 6, dim: 2 }, 0, 0).unwrap();
    let atoms: Vec<usize> = (0..mu.len()).step_by(mu.len() / 200).collect();
    let planes = direction_grid(2, 8).unwrap();
    let radii = geometric_radii(0.5, 0.5, 6);
    assert!(radii[5] > 20.0 * mu.min_atom_gap().unwrap());
    let labels = classify_graph_rectifiable(&mu, &atoms, &planes, &default_alpha_grid(), &radii, 0.01).unwrap();
    let positive = labels.iter().filter(|l| l.positive).count();
    assert_eq!((positive, labels.len()), (10, 205));
    assert!(positive as f64 <= 0.05 * labels.len() as f64);
}
