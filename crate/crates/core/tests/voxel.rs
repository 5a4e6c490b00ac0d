use std::f64::consts::PI;

use minkowski_content::mesh;
use minkowski_content::voxel::*;
use minkowski_content::StructuringElement;

fn unit_square(h: f64, margin: usize) -> VoxelGrid {
    let s = Shape::Box {
        min: vec![0.0, 0.0],
        max: vec![1.0, 1.0],
    };
    let (lo, hi) = s.auto_bbox(h, margin);
    rasterize(&s, &lo, &hi, h).unwrap()
}

/// Reference dilation: shift every occupied voxel by every offset.
fn naive_dilate(a: &VoxelGrid, k: &OffsetSet) -> Vec<[i64; 3]> {
    let d = a.dims();
    let mut out = Vec::new();
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                if a.get([x, y, z]) {
                    for o in k.offsets() {
                        out.push([x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]]);
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn occupied_physical(g: &VoxelGrid) -> Vec<[i64; 3]> {
    // lattice coordinates relative to a common origin (multiples of h)
    let d = g.dims();
    let h = g.spacing();
    let off: Vec<i64> = g.origin().iter().map(|o| (o / h).round() as i64).collect();
    let mut out = Vec::new();
    for z in 0..d[2] {
        for y in 0..d[1] {
            for x in 0..d[0] {
                if g.get([x, y, z]) {
                    let oz = if off.len() == 3 { off[2] } else { 0 };
                    out.push([x as i64 + off[0], y as i64 + off[1], z as i64 + oz]);
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn dilation_matches_naive_union_of_shifts() {
    let h = 1.0;
    let mut a = VoxelGrid::new(vec![0.0, 0.0], h, &[90, 40]).unwrap();
    for (x, y) in [(0, 0), (5, 3), (70, 39), (64, 20), (63, 20), (30, 10)] {
        a.set([x, y, 0], true);
    }
    a.fill_span(15, 0, 10, 80);
    for q in [
        StructuringElement::unit_ball(2),
        StructuringElement::origin_segment(&[0.8, -0.6]).unwrap(),
        StructuringElement::polytope(vec![vec![-1.0, 0.0], vec![2.0, 0.5], vec![0.0, 3.0]]).unwrap(),
    ] {
        let k = build_offsets(&q, 7.3, h, 512).unwrap();
        let d = dilate(&a, &k).unwrap();
        let shifted: Vec<[i64; 3]> = naive_dilate(&a, &k);
        assert_eq!(occupied_physical(&d), shifted);
    }
}

#[test]
fn dilation_3d_matches_naive() {
    let mut a = VoxelGrid::new(vec![0.0, 0.0, 0.0], 1.0, &[70, 6, 5]).unwrap();
    a.set([0, 0, 0], true);
    a.set([69, 5, 4], true);
    a.fill_span(2, 3, 1, 66);
    let q = StructuringElement::unit_disk(vec![1.0, 0.0, 0.3], vec![0.0, 1.0, 0.0]).unwrap();
    let k = build_offsets(&q, 3.0, 1.0, 512).unwrap();
    let d = dilate(&a, &k).unwrap();
    assert_eq!(occupied_physical(&d), naive_dilate(&a, &k));
}

#[test]
fn identity_and_segment_examples() {
    let a = unit_square(1.0 / 64.0, 2);
    let id = dilate(&a, &OffsetSet::origin(2)).unwrap();
    assert_eq!(id, a);

    let mut one = VoxelGrid::new(vec![0.0, 0.0], 1.0, &[3, 3]).unwrap();
    one.set([1, 1, 0], true);
    let k = build_offsets(&StructuringElement::origin_segment(&[1.0, 0.0]).unwrap(), 5.0, 1.0, 512)
        .unwrap();
    assert_eq!(dilate(&one, &k).unwrap().count(), 6);
}

#[test]
fn rasterized_volumes() {
    let h = 1.0 / 256.0;
    let sq = unit_square(h, 0);
    assert!((sq.volume() - 1.0).abs() <= 2.0 * h * 4.0);
    let ball = Shape::Ball {
        center: vec![0.0; 3],
        radius: 1.0,
    };
    let (lo, hi) = ball.auto_bbox(1.0 / 128.0, 1);
    let g = rasterize(&ball, &lo, &hi, 1.0 / 128.0).unwrap();
    assert!((g.volume() / (4.0 * PI / 3.0) - 1.0).abs() < 0.01);
    let empty = Shape::Balls {
        centers: vec![],
        radii: vec![],
    };
    let g = rasterize(&empty, &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 0.1).unwrap();
    assert!(g.is_empty());
}

#[test]
fn mesh_rasterization_matches_box() {
    let h = 1.0 / 32.0;
    let cube = Shape::Mesh {
        triangles: mesh::unit_cube(),
    };
    let bx = Shape::Box {
        min: vec![0.0; 3],
        max: vec![1.0; 3],
    };
    let (lo, hi) = bx.auto_bbox(h, 2);
    let a = rasterize(&cube, &lo, &hi, h).unwrap();
    let b = rasterize(&bx, &lo, &hi, h).unwrap();
    assert_eq!(a, b);
    let sphere = Shape::Mesh {
        triangles: mesh::icosphere(1.0, 3),
    };
    let (lo, hi) = sphere.auto_bbox(h, 1);
    let g = rasterize(&sphere, &lo, &hi, h).unwrap();
    assert!((g.volume() / (4.0 * PI / 3.0) - 1.0).abs() < 0.03);
}

#[test]
fn bbox_too_small_is_reported() {
    let s = Shape::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    match rasterize(&s, &[-0.5, -0.5], &[0.5, 0.5], 0.1) {
        Err(minkowski_content::Error::BboxTooSmall { required_min, required_max }) => {
            assert_eq!(required_min, vec![-1.0, -1.0]);
            assert_eq!(required_max, vec![1.0, 1.0]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn square_dilated_by_disk() {
    let h = 1.0 / 256.0;
    let a = unit_square(h, 0);
    let r = 1.0 / 16.0;
    let k = build_offsets(&StructuringElement::unit_ball(2), r, h, 512).unwrap();
    let d = dilate(&a, &k).unwrap();
    let exact = 1.0 + 4.0 * r + PI * r * r;
    assert!((d.volume() / exact - 1.0).abs() < 0.02);
    assert!(a.is_subset_of(&d));
}

#[test]
fn excess_examples() {
    let h = 1.0 / 256.0;
    let a = unit_square(h, 0);
    let seg = StructuringElement::origin_segment(&[1.0, 0.0]).unwrap();
    let e = excess_volume(&a, &seg, 0.125, 512).unwrap();
    assert!((e - 0.125).abs() <= 2.0 * h);
    assert_eq!(excess_volume(&a, &StructuringElement::unit_ball(2), 0.0, 512).unwrap(), 0.0);

    let hb = 1.0 / 64.0;
    let ball = Shape::Ball {
        center: vec![0.0; 3],
        radius: 1.0,
    };
    let (lo, hi) = ball.auto_bbox(hb, 0);
    let g = rasterize(&ball, &lo, &hi, hb).unwrap();
    let disk = StructuringElement::unit_disk(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
    let r = 1.0 / 4.0;
    let e = excess_volume(&g, &disk, r, 512).unwrap();
    let exact = PI * PI * r + 2.0 * PI * r * r;
    assert!((e / exact - 1.0).abs() < 0.03, "{e} vs {exact}");
}

#[test]
fn covariogram_examples() {
    let h = 1.0 / 128.0;
    let a = unit_square(h, 1);
    let g0 = covariogram(&a, [0, 0, 0]);
    assert_eq!(g0.value, a.volume());
    for t in [1i64, 10, 64, 127] {
        let g = covariogram(&a, [t, 0, 0]).value;
        assert!((g - (1.0 - t as f64 * h)).abs() < 1e-12);
    }
    let far = covariogram(&a, [1000, 0, 0]);
    assert!(far.beyond_extent && far.value == 0.0);
    let d = covariogram_derivative(&a, &[1.0, 0.0], &[0.05, 0.1, 0.2]).unwrap();
    assert!((d.slope + 1.0).abs() < 1e-12);
    let d = covariogram_derivative(&a, &[-1.0, 0.0], &[0.05, 0.1, 0.2]).unwrap();
    assert!((d.slope + 1.0).abs() < 1e-12);
}

#[test]
fn covariogram_and_singleton_excess_agree_bitwise() {
    let h = 1.0 / 64.0;
    let s = Shape::Polygon {
        vertices: vec![[0.0, 0.0], [1.0, 0.1], [0.7, 0.9], [0.1, 0.6]],
    };
    let (lo, hi) = s.auto_bbox(h, 1);
    let a = rasterize(&s, &lo, &hi, h).unwrap();
    for x in [[3i64, 0, 0], [-5, 7, 0], [0, -20, 0]] {
        let k = OffsetSet::from_offsets(2, vec![x]).unwrap();
        let (g, _) = covariogram_count(&a, x);
        assert_eq!(g, a.count() - excess_count(&a, &k).unwrap());
    }
}

#[test]
fn regularization_examples() {
    let h = 1.0 / 128.0;
    let a = unit_square(h, 8);
    let p = RegularizeParams {
        window: 3,
        threshold: 0.05,
    };
    let b = density_regularize(&a, p).unwrap();
    assert_eq!(b, a);

    // the same square in a box widened to the right, plus a 50-voxel whisker
    let d = a.dims();
    let mut w = VoxelGrid::new(a.origin().to_vec(), h, &[d[0] + 60, d[1]]).unwrap();
    for y in 0..d[1] {
        for x in 0..d[0] {
            if a.get([x, y, 0]) {
                w.set([x, y, 0], true);
            }
        }
    }
    let x0 = 8 + 128;
    w.fill_span(d[1] / 2, 0, x0, x0 + 49);
    let r = density_regularize(&w, RegularizeParams::default_for(2)).unwrap();
    // the whisker is gone except for a stub of at most two voxels
    assert!(r.count() <= a.count() + 2);
    assert!(r.count() >= a.count());
    let empty = VoxelGrid::new(vec![0.0, 0.0], h, &[10, 10]).unwrap();
    assert!(density_regularize(&empty, p).unwrap().is_empty());
}

#[test]
fn product_excess_examples() {
    let h = 1.0 / 256.0;
    let disk = Shape::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let (lo, hi) = disk.auto_bbox(h, 0);
    let c = rasterize(&disk, &lo, &hi, h).unwrap();
    let b2 = StructuringElement::unit_ball(2);
    let r = 1.0 / 32.0;
    let e = product_excess(&c, 1.0, &b2, r, 512).unwrap();
    assert!((e / (2.0 * PI * r + PI * r * r) - 1.0).abs() < 0.02);
    assert_eq!(product_excess(&c, 2.0, &b2, 0.0, 512).unwrap(), 0.0);
}

#[test]
fn sheets_are_thin() {
    let h = 1.0 / 128.0;
    let circle = Shape::Shell {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let (lo, hi) = circle.auto_bbox(h, 1);
    let g = rasterize(&circle, &lo, &hi, h).unwrap();
    // a one-voxel band around a length-2π curve
    assert!((g.volume() / (2.0 * PI * h) - 1.0).abs() < 0.1);
    let line = Shape::Polyline {
        points: vec![[0.0, 0.0], [1.0, 0.0]],
        closed: false,
    };
    let (lo, hi) = line.auto_bbox(h, 2);
    let g = rasterize(&line, &lo, &hi, h).unwrap();
    assert!(g.count() >= 128 && g.count() <= 2 * 129);
}
