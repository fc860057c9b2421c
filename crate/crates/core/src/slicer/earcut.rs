//! Ear-clipping triangulation of a simple polygon with holes in 2D.
//!
//! Holes are spliced into the outer loop with bridge edges (Eberly,
//! "Triangulation by Ear Clipping"), then ears are clipped from the merged
//! polygon. Positions may repeat after bridging; a point coincident with an
//! ear corner never blocks that ear.

use nalgebra::Point2;

fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Twice the signed area; positive for counter-clockwise loops.
pub(crate) fn signed_area2(pts: &[Point2<f64>], ring: &[usize]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[ring[i]], pts[ring[(i + 1) % n]]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

/// Even-odd point-in-polygon.
pub(crate) fn point_in_ring(pts: &[Point2<f64>], ring: &[usize], p: &Point2<f64>) -> bool {
    let mut inside = false;
    let n = ring.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (pts[ring[i]], pts[ring[j]]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn in_triangle(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

/// True if `p` lies in the interior angle at `v` between edges prev→v→next.
fn in_sector(prev: &Point2<f64>, v: &Point2<f64>, next: &Point2<f64>, p: &Point2<f64>) -> bool {
    if cross(prev, v, next) >= 0.0 {
        cross(v, next, p) >= 0.0 && cross(prev, v, p) >= 0.0
    } else {
        !(cross(v, next, p) < 0.0 && cross(prev, v, p) < 0.0)
    }
}

/// Splices `hole` (clockwise) into `outer` (counter-clockwise).
fn bridge_hole(pts: &[Point2<f64>], outer: &mut Vec<usize>, hole: &[usize]) {
    let (hm, &m_ix) = hole
        .iter()
        .enumerate()
        .max_by(|(_, &a), (_, &b)| pts[a].x.total_cmp(&pts[b].x).then(pts[b].y.total_cmp(&pts[a].y)))
        .expect("empty hole");
    let m = pts[m_ix];
    let n = outer.len();

    // Nearest hit of the +x ray from M against the outer polygon.
    let mut best: Option<(f64, usize, Point2<f64>)> = None; // (distance, outer position, hit point)
    for i in 0..n {
        let a = pts[outer[i]];
        let b = pts[outer[(i + 1) % n]];
        if a.y == m.y && a.x >= m.x {
            let d = a.x - m.x;
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, i, a));
            }
            continue;
        }
        if (a.y < m.y && b.y > m.y) || (a.y > m.y && b.y < m.y) {
            let x = a.x + (m.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x >= m.x {
                let d = x - m.x;
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    let pick = if a.x >= b.x { i } else { (i + 1) % n };
                    best = Some((d, pick, Point2::new(x, m.y)));
                }
            }
        }
    }
    let mut target = match best {
        Some((_, i, _)) => i,
        None => {
            // Degenerate geometry: fall back to the closest outer vertex.
            (0..n)
                .min_by(|&i, &j| (pts[outer[i]] - m).norm_squared().total_cmp(&(pts[outer[j]] - m).norm_squared()))
                .unwrap()
        }
    };
    if let Some((_, _, hit)) = best {
        let p = pts[outer[target]];
        if p != hit {
            // Reflex vertices inside triangle (M, hit, P) can block the bridge;
            // take the one with the smallest angle to the ray.
            let (t0, t1, t2) = if hit.y < p.y { (m, hit, p) } else { (m, p, hit) };
            let mut best_angle = f64::INFINITY;
            let mut best_d = f64::INFINITY;
            for i in 0..n {
                let r = pts[outer[i]];
                if r == p || r == m {
                    continue;
                }
                let prev = pts[outer[(i + n - 1) % n]];
                let next = pts[outer[(i + 1) % n]];
                let reflex = cross(&prev, &r, &next) <= 0.0;
                if reflex && r.x >= m.x && in_triangle(&r, &t0, &t1, &t2) {
                    let dv = r - m;
                    let angle = dv.y.abs().atan2(dv.x);
                    let d = dv.norm_squared();
                    if angle < best_angle || (angle == best_angle && d < best_d) {
                        best_angle = angle;
                        best_d = d;
                        target = i;
                    }
                }
            }
        }
    }
    // A bridged vertex may appear several times; use an occurrence whose
    // interior wedge contains M.
    let pos = pts[outer[target]];
    let occurrences: Vec<usize> = (0..n).filter(|&i| pts[outer[i]] == pos).collect();
    if occurrences.len() > 1 {
        if let Some(&i) =
            occurrences.iter().find(|&&i| in_sector(&pts[outer[(i + n - 1) % n]], &pos, &pts[outer[(i + 1) % n]], &m))
        {
            target = i;
        }
    }
    let mut merged = Vec::with_capacity(n + hole.len() + 2);
    merged.extend_from_slice(&outer[..=target]);
    merged.extend(hole[hm..].iter().chain(&hole[..=hm]));
    merged.extend_from_slice(&outer[target..]);
    *outer = merged;
}

/// Triangulates `outer` (counter-clockwise) minus `holes` (clockwise).
/// Indices refer to `pts`; output triangles are counter-clockwise.
pub(crate) fn triangulate(pts: &[Point2<f64>], outer: &[usize], holes: &[Vec<usize>]) -> Vec<[usize; 3]> {
    let mut poly = outer.to_vec();
    let mut holes: Vec<&Vec<usize>> = holes.iter().filter(|h| h.len() >= 3).collect();
    let max_x = |h: &Vec<usize>| h.iter().map(|&i| pts[i].x).fold(f64::NEG_INFINITY, f64::max);
    holes.sort_by(|a, b| max_x(b).total_cmp(&max_x(a)));
    for h in holes {
        bridge_hole(pts, &mut poly, h);
    }
    clip_ears(pts, poly)
}

fn clip_ears(pts: &[Point2<f64>], mut poly: Vec<usize>) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(poly.len().saturating_sub(2));
    // Relaxation levels: 0 strict ears, 1 ignore blocking points, 2 any vertex.
    let mut level = 0;
    let mut i = 0;
    let mut misses = 0;
    while poly.len() > 3 {
        let n = poly.len();
        let (ia, ib, ic) = ((i + n - 1) % n, i % n, (i + 1) % n);
        let (a, b, c) = (pts[poly[ia]], pts[poly[ib]], pts[poly[ic]]);
        let convex = cross(&a, &b, &c) > 0.0;
        let is_ear = match level {
            0 => {
                convex
                    && !poly.iter().enumerate().any(|(k, &v)| {
                        if k == ia || k == ib || k == ic {
                            return false;
                        }
                        let p = pts[v];
                        p != a && p != b && p != c && in_triangle(&p, &a, &b, &c)
                    })
            }
            1 => convex,
            _ => true,
        };
        if is_ear {
            out.push([poly[ia], poly[ib], poly[ic]]);
            poly.remove(ib);
            misses = 0;
            i = if ib == 0 { 0 } else { ib - 1 };
        } else {
            i = (i + 1) % n;
            misses += 1;
            if misses >= n {
                level += 1;
                misses = 0;
            }
        }
    }
    if poly.len() == 3 {
        out.push([poly[0], poly[1], poly[2]]);
    }
    out
}
