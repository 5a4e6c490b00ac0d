//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every criterion writes its CSV/JSON artifacts into a run directory; the last
//! criterion reruns the others into a second directory and compares bytes.
//! Criteria listed in `EXPECTED_FAILURES` are known to be unattainable at desk
//! scale (see the decisions ledger); any other failure fails the target.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use minkowski_content::estimate::*;
use minkowski_content::generate::*;
use minkowski_content::linalg::direction_net;
use minkowski_content::voxel::{
    self, covariogram_count, covariogram_derivative, density_regularize, excess_count, rasterize,
    OffsetSet, RegularizeParams, Shape, VoxelGrid,
};
use minkowski_content::{DiscreteSurfaceMeasure, StructuringElement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const EXPECTED_FAILURES: &[&str] = &["6"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) {
    fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn write_report(dir: &Path, stem: &str, rep: &ConvergenceReport) {
    fs::write(dir.join(format!("{stem}.csv")), rep.to_csv()).unwrap();
    write_json(dir, &format!("{stem}.json"), rep);
}

fn square(min: f64, side: f64) -> Shape {
    Shape::Box {
        min: vec![min, min],
        max: vec![min + side, min + side],
    }
}

/// Convex polygon with one vertex per angular sector, on a random ellipse.
fn random_convex_polygon(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let m = rng.gen_range(3..10);
    let (a, b) = (rng.gen_range(0.2..0.4), rng.gen_range(0.2..0.4));
    let phase = rng.gen_range(0.0..2.0 * PI);
    (0..m)
        .map(|i| {
            let t = phase + 2.0 * PI * (i as f64 + rng.gen_range(0.1..0.9)) / m as f64;
            [a * t.cos(), b * t.sin()]
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn c1_isotropic_square(dir: &Path) -> Outcome {
    let h = 1.0 / 1024.0;
    let a = rasterize(&square(0.0, 1.0), &[-0.25, -0.25], &[1.25, 1.25], h).unwrap();
    let sched = RSchedule::geometric(1.0 / 16.0, 1.0 / 128.0, 10).unwrap().snapped(h).unwrap();
    let rep = outer_content(&a, &StructuringElement::unit_ball(2), &sched, EstimateOptions::default()).unwrap();
    write_report(dir, "c1_square_ball", &rep);
    let c0_ok = (rep.c0 - 4.0).abs() <= 0.01 * 4.0;
    let worst = rep
        .samples
        .iter()
        .map(|s| s.f - 4.0 * (1.0 - 3.0 * h / s.r))
        .fold(f64::INFINITY, f64::min);
    Outcome {
        id: "1",
        pass: c0_ok && worst >= 0.0,
        detail: format!("c0 = {:.5} (target 4 ± 1%), min f(r) − 4(1−3h/r) = {worst:.4}", rep.c0),
    }
}

fn c2_segment_contents(dir: &Path) -> Outcome {
    let h = 1.0 / 1024.0;
    let sched = RSchedule::geometric(0.5, 0.125, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut rows = String::from("case,exact,c0,rel_err\n");
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let verts = random_convex_polygon(&mut rng);
        let u = random_unit(&mut rng, 2);
        let s = DiscreteSurfaceMeasure::polygon(&verts).unwrap();
        let exact = segment_outer_exact(&s, &u).unwrap();
        let lo = -0.4 - sched.r_max();
        let a = rasterize(&Shape::Polygon { vertices: verts }, &[lo, lo], &[-lo, -lo], h).unwrap();
        let q = StructuringElement::origin_segment(&u).unwrap();
        let rep = outer_content(&a, &q, &sched, EstimateOptions::default()).unwrap();
        let err = rep.c0 / exact - 1.0;
        worst = worst.max(err.abs());
        rows.push_str(&format!("{i},{exact:e},{:e},{err:e}\n", rep.c0));
    }
    fs::write(dir.join("c2_polygons.csv"), rows).unwrap();

    // unit square, u = e₁: the dilation adds an exact strip
    let a = rasterize(&square(0.0, 1.0), &[-0.5, -0.5], &[1.5, 1.5], h).unwrap();
    let q = StructuringElement::origin_segment(&[1.0, 0.0]).unwrap();
    let sq = RSchedule::geometric(0.5, 1.0 / 64.0, 8).unwrap();
    let rep = outer_content(&a, &q, &sq, EstimateOptions::default()).unwrap();
    write_report(dir, "c2_square_e1", &rep);
    let strip_ok = rep.samples.iter().all(|s| (s.f - 1.0).abs() <= 2.0 * h / s.r);
    Outcome {
        id: "2",
        pass: worst <= 0.015 && strip_ok,
        detail: format!("worst polygon c0 error {:.3}% (≤ 1.5%), square strip within 2h/r: {strip_ok}", worst * 100.0),
    }
}

fn c3_ball_planar_disk(dir: &Path) -> Outcome {
    let h = 1.0 / 256.0;
    let sched = RSchedule::geometric(0.25, 1.0 / 32.0, 10).unwrap();
    let m = 1.0 + sched.r_max() + 4.0 * h;
    let a = rasterize(
        &Shape::Ball {
            center: vec![0.0, 0.0, 0.0],
            radius: 1.0,
        },
        &[-m, -m, -1.0 - 4.0 * h],
        &[m, m, 1.0 + 4.0 * h],
        h,
    )
    .unwrap();
    let q = StructuringElement::unit_disk(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
    let rep = outer_content(&a, &q, &sched, EstimateOptions::default()).unwrap();
    write_report(dir, "c3_ball_disk", &rep);
    let c0_err = rep.c0 / (PI * PI) - 1.0;
    let worst = rep
        .samples
        .iter()
        .map(|s| (s.excess / (PI * PI * s.r + 2.0 * PI * s.r * s.r) - 1.0).abs())
        .fold(0.0, f64::max);
    Outcome {
        id: "3",
        pass: c0_err.abs() <= 0.02 && worst <= 0.03,
        detail: format!(
            "c0 = {:.4} (π² ± 2%, err {:+.2}%), worst pointwise excess error {:.2}% (≤ 3%)",
            rep.c0,
            c0_err * 100.0,
            worst * 100.0
        ),
    }
}

fn c4_symmetral_identities(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut elements = Vec::new();
    for dim in [2, 3] {
        let p = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        elements.push(StructuringElement::singleton(p(&mut rng)).unwrap());
        elements.push(StructuringElement::segment(p(&mut rng), p(&mut rng)).unwrap());
        elements.push(StructuringElement::polytope((0..6).map(|_| p(&mut rng)).collect()).unwrap());
        elements.push(StructuringElement::ball(p(&mut rng), 0.7).unwrap());
        let basis = vec![random_unit(&mut rng, dim)];
        elements.push(StructuringElement::ball_in_subspace(p(&mut rng), 0.5, basis).unwrap());
    }
    let u3 = random_unit(&mut rng, 3);
    let mut w3 = random_unit(&mut rng, 3);
    let d = u3.iter().zip(&w3).map(|(a, b)| a * b).sum::<f64>();
    for k in 0..3 {
        w3[k] -= d * u3[k];
    }
    elements.push(StructuringElement::unit_disk(u3, w3).unwrap());
    let mut support_err: f64 = 0.0;
    for q in &elements {
        let sym = q.symmetral();
        for v in direction_net(q.ambient_dim()) {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let want = 0.5 * (q.support(&v) + q.support(&neg));
            support_err = support_err.max((sym.support(&v) - want).abs());
        }
    }

    let mut perim_err: f64 = 0.0;
    for _ in 0..10 {
        let s = DiscreteSurfaceMeasure::polygon(&random_convex_polygon(&mut rng)).unwrap();
        let mut verts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        verts.push(vec![0.0, 0.0]);
        let q = StructuringElement::polytope(verts).unwrap();
        let p_sym = s.anisotropic_perimeter(&q.symmetral().into_body()).unwrap();
        let p_q = s.anisotropic_perimeter(&q).unwrap();
        let p_neg = s.anisotropic_perimeter(&q.reflect()).unwrap();
        perim_err = perim_err.max((p_sym - 0.5 * (p_q + p_neg)).abs());
    }

    let sphere = DiscreteSurfaceMeasure::sphere(1.0, 3).unwrap();
    let disk = StructuringElement::unit_disk(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
    let quad = sphere.anisotropic_perimeter(&disk).unwrap();
    let quad_err = (quad - PI * PI).abs();
    #[derive(Serialize)]
    struct C4 {
        support_err: f64,
        perimeter_err: f64,
        sphere_disk_integral: f64,
    }
    write_json(
        dir,
        "c4_identities.json",
        &C4 {
            support_err,
            perimeter_err: perim_err,
            sphere_disk_integral: quad,
        },
    );
    Outcome {
        id: "4",
        pass: support_err <= 1e-10 && perim_err <= 1e-10 && quad_err <= 1e-4,
        detail: format!("support err {support_err:.1e}, perimeter err {perim_err:.1e}, |∫‖p_L v‖dS − π²| = {quad_err:.1e}"),
    }
}

fn packing3() -> BallPacking {
    let law = DeltaLaw::Power { k: 4.0 };
    let t_min = tune_t_min(3, law, 5e5);
    gen_packing(&PackingParams::new(3, law, t_min, 3)).unwrap()
}

fn c5_packing_headline(dir: &Path, p: &BallPacking) -> Outcome {
    let summary = packing_summary(p, &t_grid(p.t_min, 9));
    write_json(dir, "c5_packing_summary.json", &summary);
    let comps = p.components();
    // fill regime: dilations of neighbouring balls merge
    let iso_sched = RSchedule::geometric(0.375, 1.0 / 64.0, 12).unwrap();
    let (iso, iso_parts) = union_outer_content(&comps, &UnionQ::Ball, &iso_sched, UnionOptions::default()).unwrap();
    write_report(dir, "c5_isotropic", &iso);
    write_json(dir, "c5_isotropic_parts.json", &iso_parts);
    // below the ball scale, where the planar limit is visible
    let disk_sched = RSchedule::geometric(1e-6, 1e-8, 12).unwrap();
    let q = UnionQ::PlanarDisk {
        basis: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
    };
    let (disk, disk_parts) = union_outer_content(&comps, &q, &disk_sched, UnionOptions::default()).unwrap();
    write_report(dir, "c5_planar_disk", &disk);
    write_json(dir, "c5_planar_disk_parts.json", &disk_parts);
    let target = summary.p_disk.unwrap();
    let disk_err = disk.c0 / target - 1.0;
    let iso_ok = iso.trend == Trend::Diverging && iso.growth_ratio >= 3.0;
    let disk_ok = disk.trend == Trend::Converging && disk_err.abs() <= 0.05;
    Outcome {
        id: "5",
        pass: iso_ok && disk_ok && p.atoms.len() <= 500_000,
        detail: format!(
            "{} balls (t_min {}), isotropic {:?} growth {:.3}; planar {:?} c0 err {:+.2e}",
            p.atoms.len(),
            p.t_min,
            iso.trend,
            iso.growth_ratio,
            disk.trend,
            disk_err
        ),
    }
}

fn c6_afp(dir: &Path, p: &BallPacking) -> Outcome {
    let samples = stratified_afp_samples(p, 1000, 6);
    let l = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let rep = afp_check(p, &l, &samples).unwrap();
    #[derive(Serialize)]
    struct Brief {
        gamma_hat: f64,
        pass: bool,
        samples: usize,
    }
    write_json(
        dir,
        "c6_afp.json",
        &Brief {
            gamma_hat: rep.gamma_hat,
            pass: rep.pass,
            samples: rep.samples.len(),
        },
    );
    let iso = isotropic_afp_diagnostic(p, 8).unwrap();
    write_json(dir, "c6_isotropic_afp.json", &iso);
    let afp_ok = rep.pass && rep.gamma_hat > 0.0 && rep.samples.len() >= 1000;
    let iso_ok = iso.monotone_decreasing && iso.drop_factor >= 5.0;
    Outcome {
        id: "6",
        pass: afp_ok && iso_ok,
        detail: format!(
            "AFP(L=e₁e₂) pass={} gamma_hat={:.3e} over {} samples; isotropic ratio monotone={} drop ×{:.3} (need ≥ 5)",
            rep.pass,
            rep.gamma_hat,
            rep.samples.len(),
            iso.monotone_decreasing,
            iso.drop_factor
        ),
    }
}

fn c7_product(dir: &Path) -> Outcome {
    let law = DeltaLaw::Power { k: 3.0 };
    let d = gen_packing(&PackingParams::new(2, law, 0.5, 7)).unwrap();
    let ex = Example1::new(2, 4, PlanarFactor::Disk { radius: 1.0 }, d).unwrap();
    let h = 1.0 / 512.0;
    let sched = RSchedule::geometric(1.0 / 8.0, 1.0 / 64.0, 8).unwrap();
    let m = 1.0 + sched.r_max() + 4.0 * h;
    let c = rasterize(&ex.c.shape(), &[-m, -m], &[m, m], h).unwrap();
    let q = StructuringElement::unit_ball(2);
    let samples = sched
        .radii()
        .iter()
        .map(|&r| {
            let e = voxel::product_excess(&c, ex.d_volume(), &q, r, voxel::DEFAULT_KERNEL_CAP).unwrap();
            Sample { r, excess: e, f: e / r }
        })
        .collect();
    let prod = ConvergenceReport::from_samples(samples, TrendParams::default());
    write_report(dir, "c7_product", &prod);
    let slope_err = prod.c0 / ex.slope() - 1.0;

    let d_sched = RSchedule::geometric(0.5, 1.0 / 32.0, 10).unwrap();
    let (drep, _) = union_outer_content(&ex.d.components(), &UnionQ::Ball, &d_sched, UnionOptions::default()).unwrap();
    write_report(dir, "c7_d_isotropic", &drep);
    Outcome {
        id: "7",
        pass: slope_err.abs() <= 0.02 && drep.trend == Trend::Diverging,
        detail: format!(
            "slope {:.5e} vs 2πλ₂(D) = {:.5e} (err {:+.2}%), D ({} disks) isotropic {:?} growth {:.2}",
            prod.c0,
            ex.slope(),
            slope_err * 100.0,
            ex.d.atoms.len(),
            drep.trend,
            drep.growth_ratio
        ),
    }
}

fn c8_covariogram(dir: &Path) -> Outcome {
    let h = 1.0 / 1024.0;
    let a = rasterize(&square(0.0, 1.0), &[-0.125, -0.125], &[1.125, 1.125], h).unwrap();
    let steps: Vec<f64> = (1..=8).map(|i| i as f64 / 256.0).collect();
    let der = covariogram_derivative(&a, &[1.0, 0.0], &steps).unwrap();
    write_json(dir, "c8_covariogram.json", &der);
    let slope_ok = (der.slope + 1.0).abs() <= 0.02;
    let g0_ok = covariogram_count(&a, [0; 3]).0 == a.count();
    // g_A(x) = λ(A) − λ((A + x) ∖ A) on the lattice
    let mut consistent = true;
    for x in [[1i64, 0, 0], [5, -3, 0], [-40, 17, 0], [300, 300, 0]] {
        let k = OffsetSet::from_offsets(2, vec![x]).unwrap();
        let lhs = covariogram_count(&a, x).0;
        consistent &= lhs == a.count() - excess_count(&a, &k).unwrap();
    }
    Outcome {
        id: "8",
        pass: slope_ok && g0_ok && consistent,
        detail: format!("slope {:.5} (−1 ± 2%), g(0) exact: {g0_ok}, bitwise identity: {consistent}", der.slope),
    }
}

fn whisker_square(h: f64, len: f64) -> VoxelGrid {
    let mut a = rasterize(&square(0.0, 1.0), &[-0.5, -0.5], &[1.5 + len, 1.5], h).unwrap();
    let y = ((0.5 - a.origin()[1]) / h) as usize;
    let x0 = ((1.0 - a.origin()[0]) / h) as usize;
    let n = (len / h).round() as usize;
    a.fill_span(y, 0, x0, x0 + n - 1);
    a
}

fn c9_regularization(dir: &Path) -> Outcome {
    let h = 1.0 / 256.0;
    let len = 0.25;
    let raw = whisker_square(h, len);
    let clean = rasterize(&square(0.0, 1.0), &[-0.5, -0.5], &[1.5 + len, 1.5], h).unwrap();
    let reg = density_regularize(&raw, RegularizeParams::default_for(2)).unwrap();
    let q = StructuringElement::unit_ball(2);
    let cap = voxel::DEFAULT_KERNEL_CAP;
    let mut rows = String::from("r,raw,regularized,clean\n");
    let (mut bound_ok, mut worst): (bool, f64) = (true, 0.0);
    for r in [1.0 / 32.0, 1.0 / 24.0, 1.0 / 16.0, 1.0 / 12.0, 1.0 / 8.0] {
        let e_raw = voxel::excess_volume(&raw, &q, r, cap).unwrap();
        let e_reg = voxel::excess_volume(&reg, &q, r, cap).unwrap();
        let e_clean = voxel::excess_volume(&clean, &q, r, cap).unwrap();
        bound_ok &= e_reg <= e_raw + 4.0 * h * len;
        worst = worst.max((e_reg / e_clean - 1.0).abs());
        rows.push_str(&format!("{r:e},{e_raw:e},{e_reg:e},{e_clean:e}\n"));
    }
    fs::write(dir.join("c9_regularization.csv"), rows).unwrap();
    Outcome {
        id: "9",
        pass: bound_ok && worst <= 0.01,
        detail: format!("bound holds at every r: {bound_ok}, worst regularized vs clean {:.3}%", worst * 100.0),
    }
}

fn run_all(dir: &Path, report: bool) -> Vec<Outcome> {
    fs::create_dir_all(dir).unwrap();
    let mut out = Vec::new();
    let mut push = |o: Outcome, t: Instant| {
        if report {
            print_line(&o, t);
        }
        out.push(o);
    };
    let t = Instant::now();
    push(c1_isotropic_square(dir), t);
    let t = Instant::now();
    push(c2_segment_contents(dir), t);
    let t = Instant::now();
    push(c3_ball_planar_disk(dir), t);
    let t = Instant::now();
    push(c4_symmetral_identities(dir), t);
    let t = Instant::now();
    let p = packing3();
    push(c5_packing_headline(dir, &p), t);
    let t = Instant::now();
    push(c6_afp(dir, &p), t);
    let t = Instant::now();
    push(c7_product(dir), t);
    let t = Instant::now();
    push(c8_covariogram(dir), t);
    let t = Instant::now();
    push(c9_regularization(dir), t);
    out
}

fn print_line(o: &Outcome, t: Instant) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {:>2}: {} [{:.1}s]", o.id, o.detail, t.elapsed().as_secs_f64());
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn main() {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    let (a, b) = (root.join("run1"), root.join("run2"));
    let mut outcomes = run_all(&a, true);

    let t = Instant::now();
    run_all(&b, false);
    let (fa, fb) = (files(&a), files(&b));
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    let mut differing = Vec::new();
    if names(&fa) != names(&fb) {
        differing.push("<file set>".to_string());
    }
    for (x, y) in fa.iter().zip(&fb) {
        if fs::read(x).unwrap() != fs::read(y).unwrap() {
            differing.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let o = Outcome {
        id: "10",
        pass: differing.is_empty(),
        detail: format!(
            "{} artifacts byte-identical across reruns{}",
            fa.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!("; differing: {differing:?}")
            }
        ),
    };
    print_line(&o, t);
    outcomes.push(o);

    println!("artifacts: {}", a.display());
    let unexpected: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && !EXPECTED_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let expected: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.pass && EXPECTED_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    println!(
        "{} of {} criteria pass; documented desk-scale failures: {:?}",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        expected
    );
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
