//! Bowyer-Watson Delaunay triangulation of a small planar point set, with
//! adaptive-precision predicates. The result covers the convex hull.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use robust::{incircle, orient2d, Coord};

use crate::{Error, Result};

pub type Point = [f64; 2];

#[inline]
fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
pub(crate) fn orient(a: Point, b: Point, p: Point) -> f64 {
    orient2d(c(a), c(b), c(p))
}

#[inline]
fn in_circle(a: Point, b: Point, cc: Point, d: Point) -> f64 {
    incircle(c(a), c(b), c(cc), c(d))
}

/// Counter-clockwise triangles over `points`. Errors when fewer than three
/// points are non-collinear. Coincident points must be rejected by the caller.
pub fn triangulate(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    let non_collinear =
        n >= 3 && (2..n).any(|k| (1..k).any(|j| orient(points[0], points[j], points[k]) != 0.0));
    if !non_collinear {
        return Err(Error::Degenerate(
            "fewer than 3 non-collinear electrodes".into(),
        ));
    }

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12) * 1e4;
    let mut pts: Vec<Point> = points.to_vec();
    pts.push([mid[0] - span, mid[1] - span]);
    pts.push([mid[0] + span, mid[1] - span]);
    pts.push([mid[0], mid[1] + span]);

    let mut tris: Vec<[usize; 3]> = alloc::vec![[n, n + 1, n + 2]];
    for i in 0..n {
        let p = pts[i];
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .into_iter()
            .partition(|t| in_circle(pts[t[0]], pts[t[1]], pts[t[2]], p) > 0.0);
        tris = keep;
        let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if edges[&(a.min(b), a.max(b))] == 1 {
                    if orient(pts[a], pts[b], p) <= 0.0 {
                        return Err(Error::Degenerate("cavity is not star-shaped".into()));
                    }
                    tris.push([a, b, i]);
                }
            }
        }
    }
    tris.retain(|t| t.iter().all(|&v| v < n));
    fill_hull_pockets(points, &mut tris);
    lawson_flips(points, &mut tris);
    Ok(tris)
}

/// Directed boundary edges `(a, b)` with the mesh on their left.
pub(crate) fn boundary_edges(tris: &[[usize; 3]]) -> BTreeMap<usize, usize> {
    let mut directed = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]), ());
        }
    }
    directed
        .keys()
        .filter(|(a, b)| !directed.contains_key(&(*b, *a)))
        .map(|&(a, b)| (a, b))
        .collect()
}

/// Adds ears at reflex boundary vertices until the boundary is convex. Points
/// outside the mesh after super-triangle removal can leave concave pockets.
fn fill_hull_pockets(points: &[Point], tris: &mut Vec<[usize; 3]>) {
    loop {
        let next = boundary_edges(tris);
        let ear = next.iter().find_map(|(&p, &q)| {
            let r = next[&q];
            let (a, b, cc) = (points[p], points[q], points[r]);
            if orient(a, b, cc) >= 0.0 {
                return None;
            }
            // triangle (p, r, q) is CCW; it must not swallow another vertex
            let empty = (0..points.len())
                .filter(|&v| v != p && v != q && v != r)
                .all(|v| {
                    let x = points[v];
                    !(orient(a, cc, x) >= 0.0 && orient(cc, b, x) >= 0.0 && orient(b, a, x) >= 0.0)
                });
            empty.then_some([p, r, q])
        });
        match ear {
            Some(t) => tris.push(t),
            None => break,
        }
    }
}

/// Restores the empty-circumcircle property by edge flips.
fn lawson_flips(points: &[Point], tris: &mut [[usize; 3]]) {
    // each pass flips at least one edge or ends; bound guards against cycling on ties
    for _ in 0..10 * tris.len() * tris.len() + 10 {
        let mut owner: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for k in 0..3 {
                owner.insert((t[k], t[(k + 1) % 3]), (ti, k));
            }
        }
        let flip = owner.iter().find_map(|(&(a, b), &(ti, k))| {
            let &(tj, kj) = owner.get(&(b, a))?;
            let cc = tris[ti][(k + 2) % 3];
            let d = tris[tj][(kj + 2) % 3];
            let (pa, pb, pc, pd) = (points[a], points[b], points[cc], points[d]);
            let convex = orient(pc, pa, pd) > 0.0 && orient(pd, pb, pc) > 0.0;
            (convex && in_circle(pa, pb, pc, pd) > 0.0).then_some((ti, tj, a, b, cc, d))
        });
        match flip {
            Some((ti, tj, a, b, cc, d)) => {
                tris[ti] = [a, d, cc];
                tris[tj] = [d, b, cc];
            }
            None => return,
        }
    }
}
