//! Planar geometry on (lat, lon) pairs: ring simplicity, point containment,
//! point-to-ring distance, and great-circle distance for proximity counts.

/// A vertex as `(lat, lon)` in degrees.
pub type Point = (f64, f64);

const EARTH_RADIUS_M: f64 = 6_371_008.8;

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// True when closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Checks that an implicitly closed ring is simple. Returns a description of
/// the first defect found.
pub fn ring_defect(ring: &[Point]) -> Option<String> {
    let n = ring.len();
    if n < 3 {
        return Some(format!("ring has {n} vertices, at least 3 required"));
    }
    for (i, p) in ring.iter().enumerate() {
        if !p.0.is_finite() || !p.1.is_finite() {
            return Some(format!("vertex {i} is not finite"));
        }
    }
    let edge = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        if a == b {
            return Some(format!("edge {i} has zero length"));
        }
    }
    for i in 0..n {
        let (a, b) = edge(i);
        for j in (i + 1)..n {
            let (c, d) = edge(j);
            let adjacent_next = j == i + 1;
            let adjacent_wrap = i == 0 && j == n - 1;
            if adjacent_next {
                // shared vertex b == c; the edges may only meet there
                if orient(a, b, d) == 0.0 && on_segment(a, b, d) {
                    return Some(format!("edges {i} and {j} overlap"));
                }
                if orient(c, d, a) == 0.0 && on_segment(c, d, a) {
                    return Some(format!("edges {i} and {j} overlap"));
                }
            } else if adjacent_wrap {
                // shared vertex a == d
                if orient(c, d, b) == 0.0 && on_segment(c, d, b) {
                    return Some(format!("edges {i} and {j} overlap"));
                }
                if orient(a, b, c) == 0.0 && on_segment(a, b, c) {
                    return Some(format!("edges {i} and {j} overlap"));
                }
            } else if segments_intersect(a, b, c, d) {
                return Some(format!("edges {i} and {j} intersect"));
            }
        }
    }
    None
}

/// Distance from `p` to the closed segment `ab` in the coordinate plane.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

/// Minimum distance from `p` to the boundary of the ring.
pub fn ring_distance(p: Point, ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| point_segment_distance(p, ring[i], ring[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Even-odd containment test. Points on the boundary count as inside.
pub fn ring_contains(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if orient(a, b, p) == 0.0 && on_segment(a, b, p) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Great-circle distance in meters.
pub fn haversine_m(a: Point, b: Point) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}
