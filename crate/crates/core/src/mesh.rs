//! Triangle-mesh generators with outward orientation.

use std::collections::HashMap;

pub type Triangle = [[f64; 3]; 3];

/// The unit cube `[0,1]³` as 12 outward triangles.
pub fn unit_cube() -> Vec<Triangle> {
    // each face: axis, side, then two in-face axes ordered so (a × b) points outward
    let mut tris = Vec::with_capacity(12);
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0.0, 1.0] {
            let corner = |s: f64, t: f64| {
                let mut p = [0.0; 3];
                p[axis] = side;
                p[a] = s;
                p[b] = t;
                p
            };
            let (p00, p10, p11, p01) = (
                corner(0.0, 0.0),
                corner(1.0, 0.0),
                corner(1.0, 1.0),
                corner(0.0, 1.0),
            );
            if side == 1.0 {
                tris.push([p00, p10, p11]);
                tris.push([p00, p11, p01]);
            } else {
                tris.push([p00, p11, p10]);
                tris.push([p00, p01, p11]);
            }
        }
    }
    tris
}

/// Icosahedron refined `subdivisions` times with vertices pushed to the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> Vec<Triangle> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |i: usize, j: usize, verts: &mut Vec<[f64; 3]>| {
            let key = (i.min(j), i.max(j));
            *midpoints.entry(key).or_insert_with(|| {
                let (a, b) = (verts[i], verts[j]);
                verts.push(unit([a[0] + b[0], a[1] + b[1], a[2] + b[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let s = |p: [f64; 3]| [p[0] * radius, p[1] * radius, p[2] * radius];
    faces
        .into_iter()
        .map(|[a, b, c]| [s(verts[a]), s(verts[b]), s(verts[c])])
        .collect()
}

fn unit(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}
