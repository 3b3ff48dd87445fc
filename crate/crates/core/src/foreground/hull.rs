//! Convex hull of a pixel set and its rasterization.

use ndarray::Array2;

type Point = (i64, i64); // (x = col, y = row)

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; returns vertices counter-clockwise (in x-right,
/// y-up terms) without collinear points.
fn hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn div_floor(a: i64, b: i64) -> i64 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -div_floor(-a, b)
}

/// Pixels whose centres lie inside or on the convex hull of the `true`
/// pixels of `mask`. Exact integer arithmetic; an empty mask stays empty.
pub fn fill_convex_hull(mask: &Array2<bool>) -> Array2<bool> {
    let (rows, cols) = mask.dim();
    let pts: Vec<Point> = mask
        .indexed_iter()
        .filter(|(_, &v)| v)
        .map(|((r, c), _)| (c as i64, r as i64))
        .collect();
    let mut out = Array2::from_elem((rows, cols), false);
    if pts.is_empty() {
        return out;
    }
    let poly = hull(pts);
    let (min_x, max_x) = poly.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    let (min_y, max_y) = poly.iter().fold((i64::MAX, i64::MIN), |(lo, hi), p| {
        (lo.min(p.1), hi.max(p.1))
    });
    let edges: Vec<(Point, Point)> = match poly.len() {
        1 => Vec::new(),
        2 => vec![(poly[0], poly[1]), (poly[1], poly[0])],
        n => (0..n).map(|i| (poly[i], poly[(i + 1) % n])).collect(),
    };
    for y in min_y..=max_y {
        let (mut lo, mut hi) = (min_x, max_x);
        for &(a, b) in &edges {
            // inside: (b - a) x (p - a) >= 0, linear in p.x for fixed y
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let rhs = dx * (y - a.1);
            if dy > 0 {
                // dy * (x - ax) <= rhs
                hi = hi.min(a.0 + div_floor(rhs, dy));
            } else if dy < 0 {
                lo = lo.max(a.0 + div_ceil(rhs, dy));
            } else if rhs < 0 {
                lo = 1;
                hi = 0;
                break;
            }
        }
        for x in lo.max(0)..=hi.min(cols as i64 - 1) {
            out[[y as usize, x as usize]] = true;
        }
    }
    out
}
