//! Azimuthal equidistant projection about the head vertex, plus the
//! triangulated layout used for interpolation.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::delaunay::{boundary_edges, triangulate, Point};
use crate::data::Montage;
use crate::{Error, Result};

const COINCIDENT_TOL: f64 = 1e-9;

/// Plane coordinates of a unit vector: radius `acos(z)`, azimuth `atan2(y, x)`.
///
/// Written as `rho * (x, y) / |(x, y)|` so negating `x` negates `u` exactly.
pub fn azimuthal_equidistant(p: [f64; 3]) -> Point {
    let rho = libm::acos(p[2].clamp(-1.0, 1.0));
    let r = libm::hypot(p[0], p[1]);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    [rho * p[0] / r, rho * p[1] / r]
}

/// Projected electrode positions and their Delaunay mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLayout {
    pub names: Vec<String>,
    pub points: Vec<Point>,
    /// Boundary vertices in counter-clockwise order.
    pub hull: Vec<usize>,
    /// Counter-clockwise triangles.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted mesh neighbours per point.
    pub neighbors: Vec<Vec<usize>>,
}

impl ProjectedLayout {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Builds a layout from plane points directly.
    pub fn from_points(names: Vec<String>, points: Vec<Point>) -> Result<Self> {
        if names.len() != points.len() {
            return Err(Error::ShapeMismatch {
                what: "layout names".into(),
                expected: points.len(),
                found: names.len(),
            });
        }
        for i in 0..points.len() {
            for j in 0..i {
                let d = libm::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
                if d < COINCIDENT_TOL {
                    return Err(Error::CoincidentElectrodes(
                        names[j].clone(),
                        names[i].clone(),
                    ));
                }
            }
        }
        let triangles = triangulate(&points)?;
        let mut nb: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); points.len()];
        for t in &triangles {
            for k in 0..3 {
                nb[t[k]].insert(t[(k + 1) % 3]);
                nb[t[(k + 1) % 3]].insert(t[k]);
            }
        }
        let next = boundary_edges(&triangles);
        let start = *next.keys().next().expect("mesh has a boundary");
        let mut hull = alloc::vec![start];
        let mut v = next[&start];
        while v != start && hull.len() <= next.len() {
            hull.push(v);
            v = next[&v];
        }
        Ok(ProjectedLayout {
            names,
            points,
            hull,
            triangles,
            neighbors: nb.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Shoelace area of the boundary polygon.
    pub fn hull_area(&self) -> f64 {
        polygon_area(self.hull.iter().map(|&i| self.points[i]))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.points[i]);
        ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) / 2.0
    }

    /// `(u_min, u_max, v_min, v_max)` of the points.
    pub fn bounds(&self) -> [f64; 4] {
        let mut e = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for p in &self.points {
            e[0] = e[0].min(p[0]);
            e[1] = e[1].max(p[0]);
            e[2] = e[2].min(p[1]);
            e[3] = e[3].max(p[1]);
        }
        e
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.points[i]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// First triangle containing `p` (with a small tolerance) and its
    /// barycentric coordinates, or `None` outside the hull.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = -1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..self.triangles.len() {
            let l = self.barycentric(t, p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if worst >= TOL && best.is_none_or(|b| worst > b.2) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }
}

pub(crate) fn polygon_area(pts: impl Iterator<Item = Point>) -> f64 {
    let pts: Vec<Point> = pts.collect();
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Projects every montage electrode and triangulates the result.
pub fn project_electrodes(montage: &Montage) -> Result<ProjectedLayout> {
    montage.validate()?;
    let names = montage.names().map(String::from).collect();
    let points = montage
        .entries()
        .iter()
        .map(|e| azimuthal_equidistant(e.position()))
        .collect();
    ProjectedLayout::from_points(names, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Electrode;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn pole_and_equator() {
        assert_eq!(azimuthal_equidistant([0.0, 0.0, 1.0]), [0.0, 0.0]);
        let e = azimuthal_equidistant([1.0, 0.0, 0.0]);
        assert!((e[0] - FRAC_PI_2).abs() < 1e-15 && e[1] == 0.0);
    }

    fn electrode(name: &str, theta: f64, phi: f64) -> Electrode {
        Electrode {
            name: name.into(),
            x: libm::sin(theta) * libm::cos(phi),
            y: libm::sin(theta) * libm::sin(phi),
            z: libm::cos(theta),
        }
    }

    #[test]
    fn coincident_electrodes_are_rejected() {
        let m = Montage::new(alloc::vec![
            electrode("a", 0.5, 0.0),
            electrode("b", 0.5, 2.0),
            electrode("c", 0.5, 4.0),
            electrode("d", 0.5, 2.0 + 1e-12),
        ])
        .unwrap();
        assert!(matches!(
            project_electrodes(&m),
            Err(Error::CoincidentElectrodes(_, _))
        ));
    }

    #[test]
    fn ring_layout_covers_hull() {
        let mut es = alloc::vec![electrode("top", 0.0, 0.0)];
        for k in 0..12 {
            es.push(electrode(
                &alloc::format!("r{k}"),
                1.0,
                k as f64 * core::f64::consts::FRAC_PI_6,
            ));
        }
        let lay = project_electrodes(&Montage::new(es).unwrap()).unwrap();
        let total: f64 = (0..lay.triangles.len()).map(|t| lay.triangle_area(t)).sum();
        assert!((total - lay.hull_area()).abs() < 1e-9);
        assert_eq!(lay.hull.len(), 12);
        assert_eq!(lay.neighbors[0].len(), 12);
        assert!(lay.locate([0.1, 0.1]).is_some());
        assert!(lay.locate([5.0, 0.0]).is_none());
    }
}
