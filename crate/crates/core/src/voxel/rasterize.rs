//! Center-rule rasterization of analytic shapes.
//!
//! A voxel is occupied iff its center lies in the shape; sheet shapes (`shell`,
//! `polyline`) occupy voxels whose center is within `h/2` of the curve/surface.

use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Disk (2D) or ball (3D).
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
    /// Simple polygon; even-odd fill.
    Polygon { vertices: Vec<[f64; 2]> },
    /// Closed triangle mesh; even-odd fill along x-rays.
    Mesh { triangles: Vec<[[f64; 3]; 3]> },
    /// Union of pairwise disjoint balls.
    Balls { centers: Vec<Vec<f64>>, radii: Vec<f64> },
    /// Circle (2D) or sphere (3D) as a thin sheet.
    Shell { center: Vec<f64>, radius: f64 },
    /// Planar polyline as a thin sheet.
    Polyline {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        closed: bool,
    },
    /// `base × [0, length]` along z for a planar base.
    Extrude { base: std::boxed::Box<Shape>, length: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Ball { center, .. } | Shape::Shell { center, .. } => center.len(),
            Shape::Box { min, .. } => min.len(),
            Shape::Polygon { .. } | Shape::Polyline { .. } => 2,
            Shape::Mesh { .. } | Shape::Extrude { .. } => 3,
            Shape::Balls { centers, .. } => centers.first().map_or(3, |c| c.len()),
        }
    }

    /// Whether the shape is a thin sheet (nominally Lebesgue-null).
    pub fn is_sheet(&self) -> bool {
        matches!(self, Shape::Shell { .. } | Shape::Polyline { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !(n == 2 || n == 3) {
            return Err(Error::InvalidInput(format!("shapes are 2D or 3D, got {n}")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Shape::Ball { center, radius } | Shape::Shell { center, radius } => {
                finite(center) && *radius >= 0.0 && radius.is_finite()
            }
            Shape::Box { min, max } => {
                min.len() == max.len() && finite(min) && finite(max) && min.iter().zip(max).all(|(a, b)| a <= b)
            }
            Shape::Polygon { vertices } => vertices.len() >= 3 && vertices.iter().all(|v| finite(v)),
            Shape::Mesh { triangles } => triangles.iter().flatten().all(|v| finite(v)),
            Shape::Balls { centers, radii } => {
                centers.len() == radii.len()
                    && centers.iter().all(|c| c.len() == n && finite(c))
                    && radii.iter().all(|r| *r >= 0.0 && r.is_finite())
            }
            Shape::Polyline { points, .. } => points.len() >= 2 && points.iter().all(|v| finite(v)),
            Shape::Extrude { base, length } => {
                base.validate()?;
                base.dim() == 2 && *length > 0.0 && length.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("malformed shape: {}", self.tag())))
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            Shape::Ball { .. } => "ball",
            Shape::Box { .. } => "box",
            Shape::Polygon { .. } => "polygon",
            Shape::Mesh { .. } => "mesh",
            Shape::Balls { .. } => "balls",
            Shape::Shell { .. } => "shell",
            Shape::Polyline { .. } => "polyline",
            Shape::Extrude { .. } => "extrude",
        }
    }

    /// Axis-aligned bounding box; `None` for an empty shape.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim();
        let from_points = |pts: &mut dyn Iterator<Item = (Vec<f64>, f64)>| {
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            let mut any = false;
            for (p, pad) in pts {
                any = true;
                for k in 0..n {
                    lo[k] = lo[k].min(p[k] - pad);
                    hi[k] = hi[k].max(p[k] + pad);
                }
            }
            any.then_some((lo, hi))
        };
        match self {
            Shape::Ball { center, radius } => from_points(&mut std::iter::once((center.clone(), *radius))),
            Shape::Shell { center, radius } => from_points(&mut std::iter::once((center.clone(), *radius))),
            Shape::Box { min, max } => Some((min.clone(), max.clone())),
            Shape::Polygon { vertices } => from_points(&mut vertices.iter().map(|v| (v.to_vec(), 0.0))),
            Shape::Polyline { points, .. } => from_points(&mut points.iter().map(|v| (v.to_vec(), 0.0))),
            Shape::Mesh { triangles } => {
                from_points(&mut triangles.iter().flatten().map(|v| (v.to_vec(), 0.0)))
            }
            Shape::Balls { centers, radii } => {
                from_points(&mut centers.iter().cloned().zip(radii.iter().copied()))
            }
            Shape::Extrude { base, length } => base.bounding_box().map(|(lo, hi)| {
                (vec![lo[0], lo[1], 0.0], vec![hi[0], hi[1], *length])
            }),
        }
    }

    /// Bounding box snapped outwards to multiples of `h`, plus `margin` voxels.
    pub fn auto_bbox(&self, h: f64, margin: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let (lo, hi) = self.bounding_box().unwrap_or((vec![0.0; n], vec![0.0; n]));
        let m = margin as f64;
        (
            lo.iter().map(|x| ((x / h).floor() - m) * h).collect(),
            hi.iter().map(|x| ((x / h).ceil() + m) * h).collect(),
        )
    }
}

/// Rasterizes `shape` into a grid spanning `[bbox_min, bbox_max]` at spacing `h`.
pub fn rasterize(shape: &Shape, bbox_min: &[f64], bbox_max: &[f64], h: f64) -> Result<VoxelGrid> {
    shape.validate()?;
    let n = shape.dim();
    if bbox_min.len() != n || bbox_max.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bbox_min.len(),
        });
    }
    if let Some((lo, hi)) = shape.bounding_box() {
        let tol = 1e-9 * h;
        let inside = (0..n).all(|k| lo[k] >= bbox_min[k] - tol && hi[k] <= bbox_max[k] + tol);
        if !inside {
            return Err(Error::BboxTooSmall {
                required_min: lo,
                required_max: hi,
            });
        }
    }
    let dims: Vec<usize> = (0..n)
        .map(|k| (((bbox_max[k] - bbox_min[k]) / h) - 1e-9).ceil().max(1.0) as usize)
        .collect();
    let mut g = VoxelGrid::new(bbox_min.to_vec(), h, &dims)?;
    paint(shape, &mut g);
    Ok(g)
}

/// Occupies voxels of row `(y, z)` whose center x lies in `[lo, hi]`.
fn fill_interval(g: &mut VoxelGrid, y: usize, z: usize, lo: f64, hi: f64) {
    let (ox, h, nx) = (g.origin()[0], g.spacing(), g.dims()[0] as f64);
    let i0 = ((lo - ox) / h - 0.5).ceil().max(0.0);
    let i1 = ((hi - ox) / h - 0.5).floor().min(nx - 1.0);
    if i1 >= i0 {
        g.fill_span(y, z, i0 as usize, i1 as usize);
    }
}

/// Index range of voxel centers along axis `k` within `[lo, hi]`.
fn center_range(g: &VoxelGrid, k: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let (o, h, n) = (g.origin()[k], g.spacing(), g.dims()[k] as f64);
    let i0 = ((lo - o) / h - 0.5).ceil().max(0.0);
    let i1 = ((hi - o) / h - 0.5).floor().min(n - 1.0);
    if i1 < i0 {
        0..0
    } else {
        i0 as usize..i1 as usize + 1
    }
}

fn center_coord(g: &VoxelGrid, k: usize, i: usize) -> f64 {
    g.origin()[k] + (i as f64 + 0.5) * g.spacing()
}

fn paint_ball(g: &mut VoxelGrid, c: &[f64], rho: f64) {
    let three = g.dim() == 3;
    let zs = if three { center_range(g, 2, c[2] - rho, c[2] + rho) } else { 0..1 };
    for z in zs {
        let dz = if three { center_coord(g, 2, z) - c[2] } else { 0.0 };
        let s2 = rho * rho - dz * dz;
        if s2 < 0.0 {
            continue;
        }
        let s = s2.sqrt();
        for y in center_range(g, 1, c[1] - s, c[1] + s) {
            let dy = center_coord(g, 1, y) - c[1];
            let w2 = s2 - dy * dy;
            if w2 >= 0.0 {
                let w = w2.sqrt();
                fill_interval(g, y, z, c[0] - w, c[0] + w);
            }
        }
    }
}

fn paint_shell(g: &mut VoxelGrid, c: &[f64], rho: f64) {
    let t = 0.5 * g.spacing();
    let (ri, ro) = ((rho - t).max(0.0), rho + t);
    let three = g.dim() == 3;
    let zs = if three { center_range(g, 2, c[2] - ro, c[2] + ro) } else { 0..1 };
    for z in zs {
        let dz = if three { center_coord(g, 2, z) - c[2] } else { 0.0 };
        for y in center_range(g, 1, c[1] - ro, c[1] + ro) {
            let dy = center_coord(g, 1, y) - c[1];
            let d2 = dy * dy + dz * dz;
            let wo2 = ro * ro - d2;
            if wo2 < 0.0 {
                continue;
            }
            let wo = wo2.sqrt();
            let wi2 = ri * ri - d2;
            if wi2 <= 0.0 {
                fill_interval(g, y, z, c[0] - wo, c[0] + wo);
            } else {
                let wi = wi2.sqrt();
                fill_interval(g, y, z, c[0] - wo, c[0] - wi);
                fill_interval(g, y, z, c[0] + wi, c[0] + wo);
            }
        }
    }
}

fn paint_polygon(g: &mut VoxelGrid, v: &[[f64; 2]], z: usize) {
    let (ylo, yhi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[1]), b.max(p[1])));
    let mut xs = Vec::new();
    for y in center_range(g, 1, ylo, yhi) {
        let yc = center_coord(g, 1, y);
        xs.clear();
        for i in 0..v.len() {
            let (p, q) = (v[i], v[(i + 1) % v.len()]);
            if (p[1] > yc) != (q[1] > yc) {
                xs.push(p[0] + (yc - p[1]) * (q[0] - p[0]) / (q[1] - p[1]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            fill_interval(g, y, z, pair[0], pair[1]);
        }
    }
}

/// Distance-`s` neighbourhood of segment `pq` intersected with the line `y = yc`.
fn capsule_row(p: [f64; 2], q: [f64; 2], s: f64, yc: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in [p, q] {
        let d = yc - c[1];
        if d.abs() <= s {
            let w = (s * s - d * d).sqrt();
            lo = lo.min(c[0] - w);
            hi = hi.max(c[0] + w);
        }
    }
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    if len > 0.0 {
        let (ux, uy) = (dx / len, dy / len);
        // constraints on x: |(-uy)(x-px) + ux(yc-py)| ≤ s and 0 ≤ ux(x-px) + uy(yc-py) ≤ len
        let mut a = f64::NEG_INFINITY;
        let mut b = f64::INFINITY;
        let mut clip = |coef: f64, rest: f64, lo_v: f64, hi_v: f64| -> bool {
            // lo_v ≤ coef·(x − px) + rest ≤ hi_v
            if coef.abs() < 1e-300 {
                return rest >= lo_v && rest <= hi_v;
            }
            let (t1, t2) = ((lo_v - rest) / coef, (hi_v - rest) / coef);
            a = a.max(t1.min(t2));
            b = b.min(t1.max(t2));
            true
        };
        let ok = clip(-uy, ux * (yc - p[1]), -s, s) && clip(ux, uy * (yc - p[1]), 0.0, len);
        if ok && a <= b {
            lo = lo.min(p[0] + a);
            hi = hi.max(p[0] + b);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn paint_polyline(g: &mut VoxelGrid, pts: &[[f64; 2]], closed: bool) {
    let s = 0.5 * g.spacing();
    let m = pts.len();
    let segs = if closed { m } else { m - 1 };
    for i in 0..segs {
        let (p, q) = (pts[i], pts[(i + 1) % m]);
        for y in center_range(g, 1, p[1].min(q[1]) - s, p[1].max(q[1]) + s) {
            if let Some((lo, hi)) = capsule_row(p, q, s, center_coord(g, 1, y)) {
                fill_interval(g, y, 0, lo, hi);
            }
        }
    }
}

fn paint_mesh(g: &mut VoxelGrid, tris: &[[[f64; 3]; 3]]) {
    // project to (y, z), orient counter-clockwise, and apply a top-left tie rule so
    // rays through shared edges or vertices are counted exactly once
    struct Proj {
        p: [[f64; 2]; 3],
        x: [f64; 3],
    }
    let mut projected = Vec::new();
    for t in tris {
        let mut p = [[t[0][1], t[0][2]], [t[1][1], t[1][2]], [t[2][1], t[2][2]]];
        let mut x = [t[0][0], t[1][0], t[2][0]];
        let area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            p.swap(1, 2);
            x.swap(1, 2);
        }
        projected.push(Proj { p, x });
    }
    let mut xs = Vec::new();
    for z in 0..g.dims()[2] {
        let zc = center_coord(g, 2, z);
        let active: Vec<&Proj> = projected
            .iter()
            .filter(|t| {
                let (a, b) = t.p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), q| (a.min(q[1]), b.max(q[1])));
                zc >= a && zc <= b
            })
            .collect();
        if active.is_empty() {
            continue;
        }
        for y in 0..g.dims()[1] {
            let yc = center_coord(g, 1, y);
            xs.clear();
            for t in &active {
                let mut w = [0.0; 3];
                let mut inside = true;
                for i in 0..3 {
                    let (a, b) = (t.p[(i + 1) % 3], t.p[(i + 2) % 3]);
                    let e = (b[0] - a[0]) * (zc - a[1]) - (b[1] - a[1]) * (yc - a[0]);
                    let top_left = (b[1] - a[1]) < 0.0 || ((b[1] - a[1]) == 0.0 && (b[0] - a[0]) > 0.0);
                    if e < 0.0 || (e == 0.0 && !top_left) {
                        inside = false;
                        break;
                    }
                    w[i] = e;
                }
                if inside {
                    let s = w[0] + w[1] + w[2];
                    xs.push((w[0] * t.x[0] + w[1] * t.x[1] + w[2] * t.x[2]) / s);
                }
            }
            if xs.len() < 2 {
                continue;
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                fill_interval(g, y, z, pair[0], pair[1]);
            }
        }
    }
}

fn paint(shape: &Shape, g: &mut VoxelGrid) {
    match shape {
        Shape::Ball { center, radius } => paint_ball(g, center, *radius),
        Shape::Shell { center, radius } => paint_shell(g, center, *radius),
        Shape::Box { min, max } => {
            let three = g.dim() == 3;
            let zs = if three { center_range(g, 2, min[2], max[2]) } else { 0..1 };
            for z in zs {
                for y in center_range(g, 1, min[1], max[1]) {
                    fill_interval(g, y, z, min[0], max[0]);
                }
            }
        }
        Shape::Polygon { vertices } => paint_polygon(g, vertices, 0),
        Shape::Polyline { points, closed } => paint_polyline(g, points, *closed),
        Shape::Mesh { triangles } => paint_mesh(g, triangles),
        Shape::Balls { centers, radii } => {
            for (c, r) in centers.iter().zip(radii) {
                paint_ball(g, c, *r);
            }
        }
        Shape::Extrude { base, length } => {
            let d = g.dims();
            let o = g.origin();
            let mut slice =
                VoxelGrid::new(vec![o[0], o[1]], g.spacing(), &[d[0], d[1]]).expect("slice fits");
            paint(base, &mut slice);
            for z in center_range(g, 2, 0.0, *length) {
                for y in 0..d[1] {
                    let src = slice.row(y, 0).to_vec();
                    g.row_mut(y, z).copy_from_slice(&src);
                }
            }
        }
    }
}
