//! Clough-Tocher C1 interpolant: every triangle is split at its centroid into
//! three cubic Bezier patches.
//!
//! Control net of one triangle (indices into a `[f64; 19]`):
//! - `0..3`   vertex values `f_i`
//! - `3..9`   `c[2e_i + e_j]` on the outer edges, see [`cij`]
//! - `9..12`  `c[2e_i + e_C]` on the spokes towards the centroid
//! - `12..15` `c[e_i + e_{i+1} + e_C]`, interior point next to edge `(i, i+1)`
//! - `15..18` `c[e_i + 2e_C]`
//! - `18`     centroid value

use alloc::vec::Vec;

use super::delaunay::Point;
use super::projection::ProjectedLayout;
use crate::{Error, Result};

pub const N_CONTROL: usize = 19;
const CENTRE: usize = 18;

#[inline]
fn cij(i: usize, j: usize) -> usize {
    3 + 2 * i + usize::from(j != (i + 1) % 3)
}

/// Control indices for the sub-triangle `(P_j, P_k, C)` opposite vertex `i`,
/// ordered as in [`cubic_basis`].
pub fn sub_patch(i: usize) -> [usize; 10] {
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    [
        j,
        k,
        CENTRE,
        cij(j, k),
        cij(k, j),
        9 + j,
        9 + k,
        15 + j,
        15 + k,
        12 + j,
    ]
}

/// Cubic Bernstein weights for local coordinates `(s, r, w)`, order
/// `b300 b030 b003 b210 b120 b201 b021 b102 b012 b111`.
pub fn cubic_basis(s: f64, r: f64, w: f64) -> [f64; 10] {
    [
        s * s * s,
        r * r * r,
        w * w * w,
        3.0 * s * s * r,
        3.0 * s * r * r,
        3.0 * s * s * w,
        3.0 * r * r * w,
        3.0 * s * w * w,
        3.0 * r * w * w,
        6.0 * s * r * w,
    ]
}

/// Sub-triangle and local coordinates for barycentric `l`.
pub fn split_coordinates(l: [f64; 3]) -> (usize, [f64; 3]) {
    let i = (0..3).min_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap_or(0);
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    (i, [l[j] - l[i], l[k] - l[i], 3.0 * l[i]])
}

/// Per-vertex gradients from a weighted least-squares plane through each
/// value, fitted over mesh neighbours with weights `1 / d^2`. Exact for affine data.
pub fn vertex_gradients(layout: &ProjectedLayout, values: &[f64]) -> Vec<[f64; 2]> {
    layout
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let p = layout.points[i];
            let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &j in nb {
                let dx = layout.points[j][0] - p[0];
                let dy = layout.points[j][1] - p[1];
                let w = 1.0 / (dx * dx + dy * dy);
                let df = values[j] - values[i];
                sxx += w * dx * dx;
                sxy += w * dx * dy;
                syy += w * dy * dy;
                bx += w * dx * df;
                by += w * dy * df;
            }
            let det = sxx * syy - sxy * sxy;
            [(syy * bx - sxy * by) / det, (sxx * by - sxy * bx) / det]
        })
        .collect()
}

/// Largest factor in `[0, 1]` keeping every first-ring control point
/// `f_i + s * g_i . (P_j - P_i) / 3` between `f_i` and `f_j`.
fn gradient_scale(
    layout: &ProjectedLayout,
    values: &[f64],
    grads: &[[f64; 2]],
    slack: f64,
) -> Vec<f64> {
    (0..layout.len())
        .map(|i| {
            let (p, g, fi) = (layout.points[i], grads[i], values[i]);
            layout.neighbors[i].iter().fold(1.0f64, |s, &j| {
                let q = layout.points[j];
                let delta = (g[0] * (q[0] - p[0]) + g[1] * (q[1] - p[1])) / 3.0;
                let fj = values[j];
                let room = if delta > 0.0 {
                    fi.max(fj) - fi + slack
                } else {
                    fi.min(fj) - fi - slack
                };
                if delta != 0.0 && delta.abs() > room.abs() {
                    s.min((room / delta).max(0.0))
                } else {
                    s
                }
            })
        })
        .collect()
}

/// A Clough-Tocher interpolant over a layout for one set of values.
#[derive(Debug, Clone)]
pub struct CloughTocher<'a> {
    layout: &'a ProjectedLayout,
    control: Vec<[f64; N_CONTROL]>,
}

impl<'a> CloughTocher<'a> {
    /// With `limit_gradients` the control net of each triangle stays inside the
    /// range of its vertex values, so the surface cannot overshoot the data.
    pub fn new(layout: &'a ProjectedLayout, values: &[f64], limit_gradients: bool) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::ShapeMismatch {
                what: "electrode values".into(),
                expected: layout.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!(
                "value at electrode {}",
                layout.names[i]
            )));
        }
        let mut grads = vertex_gradients(layout, values);
        if limit_gradients {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(*v), b.max(*v))
                });
            let slack = 1e-12 * (1.0 + (hi - lo));
            let scale = gradient_scale(layout, values, &grads, slack);
            for (g, s) in grads.iter_mut().zip(scale) {
                g[0] *= s;
                g[1] *= s;
            }
        }
        let control = layout
            .triangles
            .iter()
            .map(|t| {
                control_net(
                    t.map(|i| layout.points[i]),
                    t.map(|i| values[i]),
                    t.map(|i| grads[i]),
                    limit_gradients,
                )
            })
            .collect();
        Ok(CloughTocher { layout, control })
    }

    pub fn control(&self, t: usize) -> &[f64; N_CONTROL] {
        &self.control[t]
    }

    /// Value at barycentric `l` of triangle `t`.
    pub fn eval_in(&self, t: usize, l: [f64; 3]) -> f64 {
        let (i, [s, r, w]) = split_coordinates(l);
        let c = &self.control[t];
        sub_patch(i)
            .iter()
            .zip(cubic_basis(s, r, w))
            .map(|(&k, b)| c[k] * b)
            .sum()
    }

    /// Value at a plane point, `None` outside the hull.
    pub fn eval(&self, p: Point) -> Option<f64> {
        self.layout.locate(p).map(|(t, l)| self.eval_in(t, l))
    }
}

fn control_net(p: [Point; 3], f: [f64; 3], g: [[f64; 2]; 3], clip: bool) -> [f64; N_CONTROL] {
    let mut c = [0.0; N_CONTROL];
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    c[..3].copy_from_slice(&f);
    for i in 0..3 {
        for j in [(i + 1) % 3, (i + 2) % 3] {
            let d = [p[j][0] - p[i][0], p[j][1] - p[i][1]];
            c[cij(i, j)] = f[i] + (g[i][0] * d[0] + g[i][1] * d[1]) / 3.0;
        }
    }
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        c[9 + i] = (f[i] + c[cij(i, j)] + c[cij(i, k)]) / 3.0;
    }
    let (lo, hi) = (f[0].min(f[1]).min(f[2]), f[0].max(f[1]).max(f[2]));
    for i in 0..3 {
        let j = (i + 1) % 3;
        // Sub-triangle (A, B, C): choose the interior point so the derivative
        // across edge AB, along its normal, is linear in the edge parameter.
        let (a, b) = (p[i], p[j]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let h = [centroid[0] - a[0], centroid[1] - a[1]];
        let n = [-e[1], e[0]];
        let det = e[0] * h[1] - e[1] * h[0];
        let beta = (n[0] * h[1] - n[1] * h[0]) / det;
        let gamma = (e[0] * n[1] - e[1] * n[0]) / det;
        let alpha = -beta - gamma;
        let (b300, b030, b210, b120, b201, b021) =
            (f[i], f[j], c[cij(i, j)], c[cij(j, i)], c[9 + i], c[9 + j]);
        let q0 = alpha * b300 + beta * b210 + gamma * b201;
        let q2 = alpha * b120 + beta * b030 + gamma * b021;
        let mut b111 = ((q0 + q2) / 2.0 - alpha * b210 - beta * b120) / gamma;
        if clip {
            b111 = b111.clamp(lo, hi);
        }
        c[12 + i] = b111;
    }
    for i in 0..3 {
        c[15 + i] = (c[12 + i] + c[12 + (i + 2) % 3] + c[9 + i]) / 3.0;
    }
    c[CENTRE] = (c[15] + c[16] + c[17]) / 3.0;
    c
}
