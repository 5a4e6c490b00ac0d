//! Greedy ball packings, product sets and the three-copies scene.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::Component;
use crate::linalg::{compensated_sum, halton, norm};

/// Radius law `t ↦ δ(t)` of the packing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeltaLaw {
    /// `δ(t) = t^k / (32k)`.
    Power { k: f64 },
    /// `δ(t) = δ₀ e^{−1/t}`.
    Exp { delta0: f64 },
}

/// Largest `δ₀` keeping `δ′ ≤ 1/32` on `(0, 1]`; `δ′` peaks at `t = 1/2`.
pub fn exp_delta0_max() -> f64 {
    1.0 / (32.0 * 4.0 * (-2.0f64).exp())
}

impl DeltaLaw {
    pub fn delta(&self, t: f64) -> f64 {
        match *self {
            DeltaLaw::Power { k } => t.powf(k) / (32.0 * k),
            DeltaLaw::Exp { delta0 } => {
                if t <= 0.0 {
                    0.0
                } else {
                    delta0 * (-1.0 / t).exp()
                }
            }
        }
    }

    /// Checks monotonicity, `δ′ ≤ 1/32` and `δ(t) = o(tⁿ)`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            DeltaLaw::Power { k } => {
                if !(k.is_finite() && k > dim as f64) {
                    return Err(Error::InvalidInput(format!(
                        "power law needs k > {dim} so that δ(t) = o(t^{dim}), got k = {k}"
                    )));
                }
            }
            DeltaLaw::Exp { delta0 } => {
                if !(delta0 > 0.0 && delta0 <= exp_delta0_max()) {
                    return Err(Error::InvalidInput(format!(
                        "exponential law needs 0 < δ₀ ≤ {:.6} so that δ′ ≤ 1/32, got {delta0}",
                        exp_delta0_max()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Small-ball radius: `δ³` in 3D, `δ²` in the planar analogue.
pub fn rho_of(delta: f64, dim: usize) -> f64 {
    delta.powi(dim as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingAtom {
    pub x: Vec<f64>,
    pub delta: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub probes: usize,
    pub uncovered: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallPacking {
    pub dim: usize,
    pub law: DeltaLaw,
    pub t_min: f64,
    pub seed: u64,
    pub atoms: Vec<PackingAtom>,
    pub audit: Option<Audit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingParams {
    pub dim: usize,
    pub law: DeltaLaw,
    pub t_min: f64,
    pub seed: u64,
    /// Consecutive rejections ending a band.
    pub max_rejections: u64,
    pub audit_probes: usize,
    pub bands: usize,
    /// Largest admissible predicted atom count.
    pub max_count: f64,
}

impl PackingParams {
    pub fn new(dim: usize, law: DeltaLaw, t_min: f64, seed: u64) -> Self {
        Self {
            dim,
            law,
            t_min,
            seed,
            max_rejections: 100_000,
            audit_probes: 10_000,
            bands: 8,
            max_count: 1e7,
        }
    }
}

/// Packing fractions of the δ-balls used for count prediction, measured on this
/// generator (outside-in Halton bands pack denser than random sequential
/// addition) and rounded up so that predictions stay conservative.
fn packing_fraction(dim: usize) -> f64 {
    if dim == 2 {
        0.57
    } else {
        0.50
    }
}

/// Expected atom count: `φ ∫ |∂B(0,t)| / |B(0,δ(t))| dt` over `[t_min, 1]`.
pub fn predicted_count(dim: usize, law: DeltaLaw, t_min: f64) -> f64 {
    if t_min >= 1.0 {
        return 0.0;
    }
    let f = |t: f64| {
        let d = law.delta(t);
        if dim == 2 {
            2.0 * t / (d * d)
        } else {
            3.0 * t * t / d.powi(3)
        }
    };
    // Simpson in s = ln t
    let (a, b) = (t_min.max(1e-300).ln(), 0.0);
    let n = 2048;
    let hs = (b - a) / n as f64;
    let g = |s: f64| {
        let t = s.exp();
        f(t) * t
    };
    let mut acc = g(a) + g(b);
    for i in 1..n {
        acc += g(a + i as f64 * hs) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    packing_fraction(dim) * acc * hs / 3.0
}

/// Smallest `t_min` (to 1e-4) whose predicted count does not exceed `cap`.
pub fn tune_t_min(dim: usize, law: DeltaLaw, cap: f64) -> f64 {
    let (mut lo, mut hi) = (1e-3, 1.0);
    if predicted_count(dim, law, lo) <= cap {
        return lo;
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if predicted_count(dim, law, mid) <= cap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi * 1e4).ceil() / 1e4
}

/// Dense cell list over `[-1, 1]ⁿ` with cells no smaller than the largest
/// possible conflict distance.
struct CellGrid {
    dim: usize,
    per_axis: usize,
    cell: f64,
    head: Vec<u32>,
    next: Vec<u32>,
    /// `(x, y, z, δ)` per inserted id.
    pos: Vec<[f64; 4]>,
}

const NIL: u32 = u32::MAX;

impl CellGrid {
    fn new(dim: usize, min_cell: f64) -> Self {
        let budget: usize = if dim == 2 { 1 << 22 } else { 1 << 24 };
        let max_axis = (budget as f64).powf(1.0 / dim as f64).floor() as usize;
        let per_axis = ((2.0 / min_cell).floor() as usize).clamp(1, max_axis);
        let cell = 2.0 / per_axis as f64;
        Self {
            dim,
            per_axis,
            cell,
            head: vec![NIL; per_axis.pow(dim as u32)],
            next: Vec::new(),
            pos: Vec::new(),
        }
    }

    fn coord(&self, v: f64) -> usize {
        (((v + 1.0) / self.cell).floor().max(0.0) as usize).min(self.per_axis - 1)
    }

    fn index(&self, c: [usize; 3]) -> usize {
        let mut i = c[0] + self.per_axis * c[1];
        if self.dim == 3 {
            i += self.per_axis * self.per_axis * c[2];
        }
        i
    }

    fn cell_of(&self, x: &[f64]) -> [usize; 3] {
        let mut c = [0; 3];
        for k in 0..self.dim {
            c[k] = self.coord(x[k]);
        }
        c
    }

    fn insert(&mut self, x: &[f64], delta: f64) {
        let i = self.index(self.cell_of(x));
        let id = self.next.len() as u32;
        self.next.push(self.head[i]);
        self.head[i] = id;
        let mut p = [0.0, 0.0, 0.0, delta];
        p[..self.dim].copy_from_slice(x);
        self.pos.push(p);
    }

    fn cell_conflicts(&self, cell: usize, x: &[f64; 3], delta: f64) -> bool {
        let mut id = self.head[cell];
        while id != NIL {
            let p = &self.pos[id as usize];
            let (dx, dy, dz) = (p[0] - x[0], p[1] - x[1], p[2] - x[2]);
            let s = p[3] + delta;
            if dx * dx + dy * dy + dz * dz <= s * s {
                return true;
            }
            id = self.next[id as usize];
        }
        false
    }

    /// Whether `B(x, δ)` meets any stored ball `B(xᵢ, δᵢ)` (closed).
    fn conflicts(&self, x: &[f64], delta: f64) -> bool {
        let c = self.cell_of(x);
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(x);
        if self.cell_conflicts(self.index(c), &p, delta) {
            return true;
        }
        let range = |v: usize| v.saturating_sub(1)..=(v + 1).min(self.per_axis - 1);
        let zs = if self.dim == 3 { range(c[2]) } else { 0..=0 };
        for z in zs {
            for y in range(c[1]) {
                for xx in range(c[0]) {
                    let n = [xx, y, z];
                    if n == c {
                        continue;
                    }
                    if self.cell_conflicts(self.index(n), &p, delta) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn shell_point(u: &[f64; 3], dim: usize, ta: f64, tb: f64) -> [f64; 3] {
    let n = dim as i32;
    let t = (ta.powi(n) + u[0] * (tb.powi(n) - ta.powi(n))).powf(1.0 / dim as f64);
    if dim == 2 {
        let (s, c) = (2.0 * PI * u[1]).sin_cos();
        [t * c, t * s, 0.0]
    } else {
        let z = 1.0 - 2.0 * u[1];
        let r = (1.0 - z * z).max(0.0).sqrt();
        let (s, c) = (2.0 * PI * u[2]).sin_cos();
        [t * r * c, t * r * s, t * z]
    }
}

/// Greedy maximal packing of `B(x, δ(‖x‖))` in `B(0,1) ∖ B(0,t_min)`.
///
/// Candidates come from a Cranley–Patterson shifted Halton sequence, one shell
/// band at a time from the outside in; a band ends after `max_rejections`
/// consecutive rejections.
pub fn gen_packing(p: &PackingParams) -> Result<BallPacking> {
    if p.dim != 2 && p.dim != 3 {
        return Err(Error::InvalidInput(format!("packing dimension must be 2 or 3, got {}", p.dim)));
    }
    p.law.validate(p.dim)?;
    if !(p.t_min > 0.0) {
        return Err(Error::InvalidInput(format!("t_min must be positive, got {}", p.t_min)));
    }
    let mut out = BallPacking {
        dim: p.dim,
        law: p.law,
        t_min: p.t_min,
        seed: p.seed,
        atoms: Vec::new(),
        audit: None,
    };
    if p.t_min >= 1.0 {
        return Ok(out);
    }
    let predicted = predicted_count(p.dim, p.law, p.t_min);
    if predicted > p.max_count {
        return Err(Error::ResourceCap(format!(
            "t_min = {} predicts ~{predicted:.3e} balls, above the cap {:.0e}",
            p.t_min, p.max_count
        )));
    }
    if p.bands == 0 || p.max_rejections == 0 {
        return Err(Error::InvalidInput("bands and max_rejections must be positive".into()));
    }

    let dmax = p.law.delta(1.0);
    let mut grid = CellGrid::new(p.dim, 2.0 * dmax);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let nb = p.bands;
    for band in 0..nb {
        let tb = 1.0 - (1.0 - p.t_min) * band as f64 / nb as f64;
        let ta = 1.0 - (1.0 - p.t_min) * (band + 1) as f64 / nb as f64;
        let shift: Vec<f64> = (0..p.dim).map(|_| rng.gen::<f64>()).collect();
        let mut rejections = 0u64;
        let mut index = 1u64;
        while rejections < p.max_rejections {
            let h = halton(index, p.dim);
            index += 1;
            let mut u = [0.0; 3];
            for k in 0..p.dim {
                u[k] = (h[k] + shift[k]).fract();
            }
            let x3 = shell_point(&u, p.dim, ta, tb);
            let x = &x3[..p.dim];
            let t = norm(x);
            if !(t >= p.t_min && t <= 1.0) {
                rejections += 1;
                continue;
            }
            let d = p.law.delta(t);
            if grid.conflicts(x, d) {
                rejections += 1;
            } else {
                rejections = 0;
                grid.insert(x, d);
                out.atoms.push(PackingAtom {
                    rho: rho_of(d, p.dim),
                    x: x.to_vec(),
                    delta: d,
                });
            }
        }
    }

    // fresh probes, uniform in the shell
    let mut probe_rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed_a0d1_7000_0001);
    let mut uncovered = 0;
    for _ in 0..p.audit_probes {
        let u: [f64; 3] = probe_rng.gen();
        let y = &shell_point(&u, p.dim, p.t_min, 1.0)[..p.dim];
        if !grid.conflicts(y, p.law.delta(norm(y))) {
            uncovered += 1;
        }
    }
    out.audit = Some(Audit {
        probes: p.audit_probes,
        uncovered,
    });
    Ok(out)
}

impl BallPacking {
    /// Rechecks disjointness, law conformance and the shell constraint.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidInput(format!("packing dimension must be 2 or 3, got {}", self.dim)));
        }
        self.law.validate(self.dim)?;
        let dmax = self.atoms.iter().map(|a| a.delta).fold(0.0, f64::max);
        let mut grid = CellGrid::new(self.dim, 2.0 * dmax.max(1e-12));
        for (i, a) in self.atoms.iter().enumerate() {
            if a.x.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: a.x.len(),
                });
            }
            let t = norm(&a.x);
            if !(t >= self.t_min && t <= 1.0) {
                return Err(Error::InvalidInput(format!("atom {i}: center norm {t} outside [t_min, 1]")));
            }
            let d = self.law.delta(t);
            if (a.delta - d).abs() > 1e-12 * d.max(1e-300) || (a.rho - rho_of(a.delta, self.dim)).abs() > 1e-12 * a.rho.max(1e-300) {
                return Err(Error::InvalidInput(format!("atom {i}: radii do not follow the law")));
            }
            if grid.conflicts(&a.x, a.delta) {
                return Err(Error::InvalidInput(format!("atom {i}: δ-balls overlap")));
            }
            grid.insert(&a.x, a.delta);
        }
        Ok(())
    }

    pub fn components(&self) -> Vec<Component> {
        self.atoms
            .iter()
            .map(|a| Component::Ball {
                center: a.x.clone(),
                rho: a.rho,
            })
            .collect()
    }

    /// JSON lines, one `{x, delta, rho}` per atom.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for a in &self.atoms {
            serde_json::to_writer(&mut w, a)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads atoms written by [`write_jsonl`](Self::write_jsonl) and validates them.
    pub fn read_jsonl<R: BufRead>(r: R, dim: usize, law: DeltaLaw, t_min: f64) -> Result<Self> {
        let mut atoms = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            atoms.push(serde_json::from_str(&line)?);
        }
        let p = BallPacking {
            dim,
            law,
            t_min,
            seed: 0,
            atoms,
            audit: None,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingSummary {
    pub count: usize,
    /// `4πΣρ²` (3D) or `2πΣρ` (2D).
    pub p_iso: f64,
    /// `π²Σρ²`; 3D only.
    pub p_disk: Option<f64>,
    /// `Σ(4π/3)ρ³` (3D) or `Σπρ²` (2D).
    pub volume: f64,
    /// `(t, Σ_{‖x‖<t} ρ)`.
    pub b: Vec<(f64, f64)>,
}

/// Closed-form sums over the packing; `b` is sampled on `grid` (sorted).
pub fn packing_summary(p: &BallPacking, grid: &[f64]) -> PackingSummary {
    let rho = |f: &dyn Fn(f64) -> f64| compensated_sum(p.atoms.iter().map(|a| f(a.rho)));
    let (p_iso, p_disk, volume) = if p.dim == 2 {
        (2.0 * PI * rho(&|r| r), None, PI * rho(&|r| r * r))
    } else {
        (
            4.0 * PI * rho(&|r| r * r),
            Some(PI * PI * rho(&|r| r * r)),
            4.0 / 3.0 * PI * rho(&|r| r.powi(3)),
        )
    };
    let mut by_t: Vec<(f64, f64)> = p.atoms.iter().map(|a| (norm(&a.x), a.rho)).collect();
    by_t.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut b = Vec::with_capacity(grid.len());
    let mut j = 0;
    let mut acc = Vec::new();
    for &t in grid {
        while j < by_t.len() && by_t[j].0 < t {
            acc.push(by_t[j].1);
            j += 1;
        }
        b.push((t, compensated_sum(acc.iter().copied())));
    }
    PackingSummary {
        count: p.atoms.len(),
        p_iso,
        p_disk,
        volume,
        b,
    }
}

/// `count` evenly spaced values in `[t_min, 1]`.
pub fn t_grid(t_min: f64, count: usize) -> Vec<f64> {
    let t0 = t_min.min(1.0);
    if count <= 1 {
        return vec![1.0];
    }
    (0..count).map(|i| t0 + (1.0 - t0) * i as f64 / (count - 1) as f64).collect()
}

/// Planar factor `C` of the product example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanarFactor {
    Disk { radius: f64 },
    Square { side: f64 },
}

impl PlanarFactor {
    pub fn perimeter(&self) -> f64 {
        match *self {
            PlanarFactor::Disk { radius } => 2.0 * PI * radius,
            PlanarFactor::Square { side } => 4.0 * side,
        }
    }

    pub fn shape(&self) -> crate::voxel::Shape {
        match *self {
            PlanarFactor::Disk { radius } => crate::voxel::Shape::Ball {
                center: vec![0.0, 0.0],
                radius,
            },
            PlanarFactor::Square { side } => crate::voxel::Shape::Box {
                min: vec![0.0, 0.0],
                max: vec![side, side],
            },
        }
    }
}

/// `A = C × D ⊂ R^n` with `C ⊂ R^k` convex and `D ⊂ R^{n−k}` a packing union.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example1 {
    pub k: usize,
    pub n: usize,
    pub c: PlanarFactor,
    pub d: BallPacking,
}

impl Example1 {
    pub fn new(k: usize, n: usize, c: PlanarFactor, d: BallPacking) -> Result<Self> {
        if !(k >= 2 && k + 2 <= n) {
            return Err(Error::InvalidInput(format!("need 2 ≤ k ≤ n − 2, got k = {k}, n = {n}")));
        }
        if k != 2 || d.dim != n - k {
            return Err(Error::Unsupported(format!(
                "only planar C and a {}-dimensional packing D are built (k = 2, n = {}), got k = {k}, n = {n}",
                d.dim,
                2 + d.dim
            )));
        }
        Ok(Self { k, n, c, d })
    }

    /// `λ_{n−k}(D)`.
    pub fn d_volume(&self) -> f64 {
        packing_summary(&self.d, &[]).volume
    }

    /// Limit slope of the product excess along `B^k × {0}`: `P(C)·λ_{n−k}(D)`.
    pub fn slope(&self) -> f64 {
        self.c.perimeter() * self.d_volume()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneCopy {
    /// Cylinder axis, 0, 1 or 2.
    pub axis: usize,
    pub offset: [f64; 3],
}

/// Isometric copies of `D × [0, 1]` along different coordinate axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub copies: Vec<SceneCopy>,
    #[serde(rename = "D")]
    pub d: BallPacking,
}

/// Three copies with axes e₁, e₂, e₃, their bounding boxes ≥ 1 apart.
pub fn gen_example2(d: BallPacking) -> Result<Scene> {
    if d.dim != 2 {
        return Err(Error::InvalidInput("the scene needs a planar packing D".into()));
    }
    let s = Scene {
        copies: (0..3)
            .map(|i| SceneCopy {
                axis: i,
                offset: [4.0 * i as f64, 0.0, 0.0],
            })
            .collect(),
        d,
    };
    s.validate()?;
    Ok(s)
}

impl Scene {
    /// The two axes spanning `D`'s plane for a copy along `axis`.
    fn cross_axes(axis: usize) -> [usize; 2] {
        match axis {
            0 => [1, 2],
            1 => [2, 0],
            _ => [0, 1],
        }
    }

    pub fn copy_bbox(&self, i: usize) -> ([f64; 3], [f64; 3]) {
        let c = &self.copies[i];
        let [a, b] = Self::cross_axes(c.axis);
        let mut lo = c.offset;
        let mut hi = c.offset;
        hi[c.axis] += 1.0;
        for k in [a, b] {
            lo[k] -= 1.0;
            hi[k] += 1.0;
        }
        (lo, hi)
    }

    /// Smallest gap between copy bounding boxes (Chebyshev separation).
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.copies.len() {
            for j in i + 1..self.copies.len() {
                let (a0, a1) = self.copy_bbox(i);
                let (b0, b1) = self.copy_bbox(j);
                let g = (0..3)
                    .map(|k| (b0[k] - a1[k]).max(a0[k] - b1[k]))
                    .fold(f64::NEG_INFINITY, f64::max);
                gap = gap.min(g);
            }
        }
        gap
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.dim != 2 {
            return Err(Error::InvalidInput("scene factor D must be planar".into()));
        }
        if self.copies.iter().any(|c| c.axis > 2) {
            return Err(Error::InvalidInput("copy axis must be 0, 1 or 2".into()));
        }
        if self.copies.len() > 1 && self.min_gap() < 1.0 {
            return Err(Error::InvalidInput(format!(
                "copies must be at least 1 apart, got {}",
                self.min_gap()
            )));
        }
        self.d.validate()
    }

    /// Rods of copy `i` in scene coordinates.
    pub fn copy_components(&self, i: usize) -> Vec<Component> {
        let c = &self.copies[i];
        let [a, b] = Self::cross_axes(c.axis);
        self.d
            .atoms
            .iter()
            .map(|atom| {
                let mut start = c.offset;
                start[a] += atom.x[0];
                start[b] += atom.x[1];
                Component::Rod {
                    start,
                    axis: c.axis,
                    length: 1.0,
                    rho: atom.rho,
                }
            })
            .collect()
    }

    pub fn components(&self) -> Vec<Component> {
        (0..self.copies.len()).flat_map(|i| self.copy_components(i)).collect()
    }

    /// Rods of one copy, all laid along the x axis; isometric to the copy.
    pub fn canonical_copy(&self) -> Vec<Component> {
        self.d
            .atoms
            .iter()
            .map(|atom| Component::Rod {
                start: [0.0, atom.x[0], atom.x[1]],
                axis: 0,
                length: 1.0,
                rho: atom.rho,
            })
            .collect()
    }
}
