//! Limit estimators over r-schedules, exact oracles and AFP checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::StructuringElement;
use crate::error::{Error, Result};
use crate::generate::BallPacking;
use crate::linalg::{compensated_sum, dot, fit_affine, fit_quadratic, gram_schmidt, norm};
use crate::surface::DiscreteSurfaceMeasure;
use crate::voxel::{self, Body, SliceCap, VoxelGrid};

/// Strictly decreasing positive radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RSchedule {
    r: Vec<f64>,
}

/// Smallest admissible `r/h`.
pub const MIN_R_OVER_H: f64 = 8.0;

impl RSchedule {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Schedule("schedule is empty".into()));
        }
        if r.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Schedule("radii must be positive and finite".into()));
        }
        if r.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Schedule("radii must be strictly decreasing".into()));
        }
        Ok(Self { r })
    }

    /// `count` radii from `r_max` down to `r_min`, geometrically spaced.
    pub fn geometric(r_max: f64, r_min: f64, count: usize) -> Result<Self> {
        if count == 0 || !(r_min > 0.0) || !(r_max >= r_min) {
            return Err(Error::Schedule(format!(
                "need 0 < r_min ≤ r_max and count ≥ 1, got [{r_min}, {r_max}] × {count}"
            )));
        }
        if count == 1 {
            return Self::new(vec![r_max]);
        }
        let q = (r_min / r_max).powf(1.0 / (count - 1) as f64);
        let mut r: Vec<f64> = (0..count).map(|i| r_max * q.powi(i as i32)).collect();
        r[count - 1] = r_min;
        Self::new(r)
    }

    /// Default schedule: 12 radii from `r_max` with ratio `2^{-1/2}`.
    pub fn default_from(r_max: f64) -> Result<Self> {
        Self::geometric(r_max, r_max * 0.5f64.powf(5.5), 12)
    }

    /// Rounds every radius to a positive multiple of `h` and drops duplicates,
    /// so that digital kernels are not truncated mid-voxel.
    pub fn snapped(&self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Schedule(format!("grid spacing must be positive, got {h}")));
        }
        let mut r: Vec<f64> = self.r.iter().map(|x| (x / h).round().max(1.0) * h).collect();
        r.dedup();
        Self::new(r)
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn r_min(&self) -> f64 {
        *self.r.last().expect("nonempty")
    }

    pub fn r_max(&self) -> f64 {
        self.r[0]
    }

    /// Enforces `r_min ≥ 8h`.
    pub fn check_resolution(&self, h: f64) -> Result<()> {
        if self.r_min() < MIN_R_OVER_H * h * (1.0 - 1e-12) {
            return Err(Error::Schedule(format!(
                "r_min = {} is below {MIN_R_OVER_H}·h = {}",
                self.r_min(),
                MIN_R_OVER_H * h
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Converging,
    Diverging,
    Inconclusive,
}

/// Extrapolation model for `f(r)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `c₀ + c₁r`.
    #[default]
    Affine,
    /// `c₀ + c₁r + c₂r²`.
    Quadratic,
}

/// Thresholds for trend classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendParams {
    /// Trailing samples that must increase strictly for divergence.
    pub window: usize,
    /// Minimum `f(r_min)/f(r_max)` for divergence.
    pub growth: f64,
    /// Maximum rms residual relative to `c₀` for convergence.
    pub rel_residual: f64,
    pub model: FitModel,
}

impl Default for TrendParams {
    fn default() -> Self {
        Self {
            window: 6,
            growth: 2.0,
            rel_residual: 0.05,
            model: FitModel::Affine,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    /// Excess volume (outer content) or dilated volume (content).
    pub excess: f64,
    pub f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub samples: Vec<Sample>,
    pub c0: f64,
    pub c1: f64,
    /// Zero under the affine model.
    pub c2: f64,
    pub rms: f64,
    pub trend: Trend,
    pub growth_ratio: f64,
}

impl ConvergenceReport {
    /// Fits `f(r) = c₀ + c₁r` (or the quadratic model) and classifies the trend.
    ///
    /// Divergence is tested first (strict increase over the trailing window as r
    /// decreases, plus enough growth); otherwise the fit must be tight and `c₀ > 0`.
    /// Anything else — including oscillation — is inconclusive.
    pub fn from_samples(samples: Vec<Sample>, params: TrendParams) -> Self {
        let rs: Vec<f64> = samples.iter().map(|s| s.r).collect();
        let fs: Vec<f64> = samples.iter().map(|s| s.f).collect();
        let (c0, c1, c2, rms) = match params.model {
            FitModel::Affine => {
                let (c0, c1, rms) = fit_affine(&rs, &fs);
                (c0, c1, 0.0, rms)
            }
            FitModel::Quadratic => fit_quadratic(&rs, &fs),
        };
        let growth_ratio = match (fs.first(), fs.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => f64::NAN,
        };
        let m = fs.len();
        let w = params.window.min(m);
        let increasing = w >= 2 && fs[m - w..].windows(2).all(|p| p[1] > p[0]);
        let trend = if increasing && growth_ratio >= params.growth {
            Trend::Diverging
        } else if c0 > 0.0 && rms <= params.rel_residual * c0 {
            Trend::Converging
        } else {
            Trend::Inconclusive
        };
        Self {
            samples,
            c0,
            c1,
            c2,
            rms,
            trend,
            growth_ratio,
        }
    }

    /// CSV with columns `r,excess,f,fit_c0,fit_c1,residual,trend`.
    pub fn to_csv(&self) -> String {
        let trend = serde_json::to_value(self.trend)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let mut out = String::from("r,excess,f,fit_c0,fit_c1,residual,trend\n");
        for s in &self.samples {
            let resid = s.f - (self.c0 + self.c1 * s.r + self.c2 * s.r * s.r);
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
                s.r, s.excess, s.f, self.c0, self.c1, resid, trend
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub kernel_cap: usize,
    pub trend: TrendParams,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            kernel_cap: voxel::DEFAULT_KERNEL_CAP,
            trend: TrendParams::default(),
        }
    }
}

/// Samples `λ_n((A ⊕ rQ) ∖ A)/r` over the schedule.
pub fn outer_content(
    a: &VoxelGrid,
    q: &StructuringElement,
    sched: &RSchedule,
    opts: EstimateOptions,
) -> Result<ConvergenceReport> {
    sched.check_resolution(a.spacing())?;
    let samples = sched
        .radii()
        .par_iter()
        .map(|&r| {
            let e = voxel::excess_volume(a, q, r, opts.kernel_cap)?;
            Ok(Sample { r, excess: e, f: e / r })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_samples(samples, opts.trend))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentOptions {
    pub estimate: EstimateOptions,
    /// Subtract `λ_n(E)/(2r)` to remove the sheet's own one-voxel thickness.
    pub thickness_correction: bool,
    /// Largest admissible fraction of occupied voxels whose 2n face neighbours
    /// are all occupied; thicker inputs are not measure-zero surrogates.
    pub sheet_threshold: f64,
}

impl Default for ContentOptions {
    fn default() -> Self {
        Self {
            estimate: EstimateOptions::default(),
            thickness_correction: true,
            sheet_threshold: 0.1,
        }
    }
}

/// Fraction of occupied voxels all of whose face neighbours are occupied.
pub fn interior_fraction(e: &VoxelGrid) -> f64 {
    let d = e.dims();
    let total = e.count();
    if total == 0 {
        return 0.0;
    }
    let mut interior = 0u64;
    let occupied = |x: i64, y: i64, z: i64| {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < d[0]
            && (y as usize) < d[1]
            && (z as usize) < d[2]
            && e.get([x as usize, y as usize, z as usize])
    };
    for z in 0..d[2] as i64 {
        for y in 0..d[1] as i64 {
            for x in 0..d[0] as i64 {
                if !occupied(x, y, z) {
                    continue;
                }
                let mut all = occupied(x - 1, y, z)
                    && occupied(x + 1, y, z)
                    && occupied(x, y - 1, z)
                    && occupied(x, y + 1, z);
                if e.dim() == 3 {
                    all = all && occupied(x, y, z - 1) && occupied(x, y, z + 1);
                }
                interior += all as u64;
            }
        }
    }
    interior as f64 / total as f64
}

/// Samples `λ_n(E ⊕ rQ)/(2r)` for a thin sheet `E`.
pub fn minkowski_content(
    e: &VoxelGrid,
    q: &StructuringElement,
    sched: &RSchedule,
    opts: ContentOptions,
) -> Result<ConvergenceReport> {
    sched.check_resolution(e.spacing())?;
    let frac = interior_fraction(e);
    if frac > opts.sheet_threshold {
        return Err(Error::InvalidInput(format!(
            "set is not sheet-like: {:.3} of its voxels are interior (threshold {})",
            frac, opts.sheet_threshold
        )));
    }
    let base = e.volume();
    let samples = sched
        .radii()
        .par_iter()
        .map(|&r| {
            let k = voxel::build_offsets(q, r, e.spacing(), opts.estimate.kernel_cap)?;
            let v = voxel::dilate(e, &k)?.volume();
            let num = if opts.thickness_correction { v - base } else { v };
            Ok(Sample {
                r,
                excess: v,
                f: num / (2.0 * r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_samples(samples, opts.estimate.trend))
}

/// Shapes with closed-form parallel volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnalyticShape {
    Square { side: f64 },
    Disk { radius: f64 },
    Ball { radius: f64 },
    Cube { side: f64 },
    /// Convex polygon, counter-clockwise.
    Polygon { vertices: Vec<[f64; 2]> },
}

/// Structuring elements of the oracle table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnalyticQ {
    /// Unit ball of the ambient space.
    Ball,
    /// `[0, u]`.
    Segment { u: Vec<f64> },
    /// Unit disk in the plane with unit normal `normal` (3D only).
    PlanarDisk { normal: Vec<f64> },
}

/// Exact `λ_n((A ⊕ rQ) ∖ A)` for the supported pairs.
pub fn analytic_excess(shape: &AnalyticShape, q: &AnalyticQ, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::NegativeScale(r));
    }
    let unsupported = || Error::Unsupported(format!("no oracle for {shape:?} with {q:?}"));
    let pos = |x: f64| x.max(0.0);
    Ok(match (shape, q) {
        (AnalyticShape::Square { side: s }, AnalyticQ::Ball) => 4.0 * s * r + PI * r * r,
        (AnalyticShape::Disk { radius: p }, AnalyticQ::Ball) => 2.0 * PI * p * r + PI * r * r,
        (AnalyticShape::Ball { radius: p }, AnalyticQ::Ball) => {
            4.0 * PI * p * p * r + 4.0 * PI * p * r * r + 4.0 / 3.0 * PI * r.powi(3)
        }
        (AnalyticShape::Cube { side: s }, AnalyticQ::Ball) => {
            6.0 * s * s * r + 3.0 * PI * s * r * r + 4.0 / 3.0 * PI * r.powi(3)
        }
        (AnalyticShape::Ball { radius: p }, AnalyticQ::PlanarDisk { .. }) => {
            PI * PI * p * p * r + 2.0 * PI * p * r * r
        }
        (AnalyticShape::Cube { side: s }, AnalyticQ::PlanarDisk { normal }) => {
            let n = crate::linalg::normalized(normal).ok_or_else(unsupported)?;
            if !n.iter().any(|c| (c.abs() - 1.0).abs() < 1e-12) {
                return Err(unsupported());
            }
            4.0 * s * s * r + PI * s * r * r
        }
        (AnalyticShape::Square { side: s }, AnalyticQ::Segment { u }) if u.len() == 2 => {
            r * s * (u[0].abs() + u[1].abs())
        }
        (AnalyticShape::Cube { side: s }, AnalyticQ::Segment { u }) if u.len() == 3 => {
            r * s * s * (u[0].abs() + u[1].abs() + u[2].abs())
        }
        (AnalyticShape::Disk { radius: p }, AnalyticQ::Segment { u }) if u.len() == 2 => {
            2.0 * p * norm(u) * r
        }
        (AnalyticShape::Ball { radius: p }, AnalyticQ::Segment { u }) if u.len() == 3 => {
            PI * p * p * norm(u) * r
        }
        (AnalyticShape::Polygon { vertices }, AnalyticQ::Segment { u }) if u.len() == 2 => {
            let s = DiscreteSurfaceMeasure::polygon(vertices)?;
            r * compensated_sum(s.atoms.iter().map(|a| a.weight * pos(dot(u, &a.normal))))
        }
        _ => return Err(unsupported()),
    })
}

/// `∫⟨u, v⟩⁺ S*(dv)`, the outer `[0,u]`-content of a set with surface measure `S`.
pub fn segment_outer_exact(s: &DiscreteSurfaceMeasure, u: &[f64]) -> Result<f64> {
    if !s.atoms.is_empty() && u.len() != s.dim {
        return Err(Error::DimensionMismatch {
            expected: s.dim,
            found: u.len(),
        });
    }
    Ok(compensated_sum(
        s.atoms.iter().map(|a| a.weight * dot(u, &a.normal).max(0.0)),
    ))
}

/// Area of `∂B(x, ρ) ∩ B(a, r)` for a sphere whose center is at distance `d` from `a`.
pub fn cap_area(rho: f64, d: f64, r: f64) -> f64 {
    if d + rho <= r {
        return 4.0 * PI * rho * rho;
    }
    if d >= rho + r || d + r <= rho {
        return 0.0;
    }
    (PI * rho * (r * r - (rho - d) * (rho - d)) / d).clamp(0.0, 4.0 * PI * rho * rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfpSample {
    pub a: Vec<f64>,
    pub r: f64,
    pub nu: f64,
    pub proj: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfpReport {
    pub gamma_hat: f64,
    pub pass: bool,
    pub samples: Vec<AfpSample>,
}

/// `ν(B(a, r)) = Σ ρᵢ⁻¹ · area(∂B(xᵢ, ρᵢ) ∩ B(a, r))`.
pub fn nu_ball(p: &BallPacking, a: &[f64], r: f64) -> f64 {
    compensated_sum(p.atoms.iter().map(|b| {
        let d = crate::linalg::dist(&b.x, a);
        if d >= b.rho + r {
            0.0
        } else {
            cap_area(b.rho, d, r) / b.rho
        }
    }))
}

/// Over-approximates `λ₁(p_w(E ∩ B(a, r)))`: every sphere meeting the ball
/// contributes its whole projected interval, clipped to `[⟨a,w⟩ − r, ⟨a,w⟩ + r]`.
/// A larger denominator only lowers the ratio, so a pass remains sufficient.
fn projected_measure(p: &BallPacking, w: &[f64], a: &[f64], r: f64) -> f64 {
    let c = dot(a, w);
    let mut iv: Vec<(f64, f64)> = p
        .atoms
        .iter()
        .filter(|b| {
            let d = crate::linalg::dist(&b.x, a);
            d < b.rho + r && d + r > b.rho
        })
        .map(|b| {
            let t = dot(&b.x, w);
            ((t - b.rho).max(c - r), (t + b.rho).min(c + r))
        })
        .filter(|(lo, hi)| hi > lo)
        .collect();
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (lo, hi) in iv {
        cur = match cur {
            Some((a0, b0)) if lo <= b0 => Some((a0, b0.max(hi))),
            Some((a0, b0)) => {
                total += b0 - a0;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((a0, b0)) = cur {
        total += b0 - a0;
    }
    total
}

/// AFP condition relative to a 2-plane `L` in R³ for the union of the packing's
/// ρ-spheres, with `ν` the sphere-wise ρ⁻¹-weighted surface measure.
pub fn afp_check(p: &BallPacking, l_basis: &[Vec<f64>], samples: &[(Vec<f64>, f64)]) -> Result<AfpReport> {
    if p.dim != 3 {
        return Err(Error::Unsupported("the AFP check is implemented for 3D packings".into()));
    }
    if p.atoms.is_empty() {
        return Err(Error::InvalidInput("packing is empty: no boundary to sample".into()));
    }
    let basis = gram_schmidt(l_basis, 1e-9);
    if basis.len() != 2 || basis.iter().any(|b| b.len() != 3) {
        return Err(Error::InvalidInput("L must be spanned by two independent 3-vectors".into()));
    }
    let c = crate::linalg::cross3(&basis[0], &basis[1]);
    let w = c.to_vec();
    for (a, r) in samples {
        if a.len() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: a.len(),
            });
        }
        if !(*r > 0.0 && *r < 1.0) {
            return Err(Error::InvalidInput(format!("sample radius must lie in (0,1), got {r}")));
        }
        let on_sphere = p
            .atoms
            .iter()
            .any(|b| (crate::linalg::dist(&b.x, a) - b.rho).abs() <= 1e-9 * b.rho.max(1e-300) + 1e-15);
        if !on_sphere {
            return Err(Error::InvalidInput(format!("sample point {a:?} is not on any sphere")));
        }
    }
    let out: Vec<AfpSample> = samples
        .par_iter()
        .map(|(a, r)| {
            let nu = nu_ball(p, a, *r);
            let proj = projected_measure(p, &w, a, *r);
            let ratio = if proj > 0.0 { nu / (r * proj) } else { f64::INFINITY };
            AfpSample {
                a: a.clone(),
                r: *r,
                nu,
                proj,
                ratio,
            }
        })
        .collect();
    let gamma_hat = out.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let pass = !out.is_empty() && gamma_hat > 0.0 && out.iter().all(|s| s.ratio.is_finite());
    Ok(AfpReport {
        gamma_hat,
        pass,
        samples: out,
    })
}

fn random_unit3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

/// Stratified AFP sample points: spheres drawn per dyadic shell of `‖x‖`, a
/// uniform point on each, and radii `{‖a‖/4, ‖a‖, 4‖a‖} ∩ (0,1)` plus one
/// log-uniform radius in `[ρ/4, 1)`.
pub fn stratified_afp_samples(p: &BallPacking, points: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bands: Vec<Vec<usize>> = Vec::new();
    for (i, b) in p.atoms.iter().enumerate() {
        let t = norm(&b.x);
        let j = if t > 0.0 { (-t.log2()).floor().max(0.0) as usize } else { 60 };
        if bands.len() <= j {
            bands.resize(j + 1, Vec::new());
        }
        bands[j].push(i);
    }
    bands.retain(|b| !b.is_empty());
    let mut out = Vec::new();
    if bands.is_empty() {
        return out;
    }
    for k in 0..points {
        let band = &bands[k % bands.len()];
        let b = &p.atoms[band[rng.gen_range(0..band.len())]];
        let u = random_unit3(&mut rng);
        let a: Vec<f64> = (0..3).map(|i| b.x[i] + b.rho * u[i]).collect();
        let t = norm(&a);
        for r in [t / 4.0, t, 4.0 * t] {
            if r > 0.0 && r < 1.0 {
                out.push((a.clone(), r));
            }
        }
        let lo = (b.rho / 4.0).ln();
        let r = (lo + rng.gen::<f64>() * (0.0 - lo)).exp().min(0.999);
        out.push((a, r));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoAfpPoint {
    pub a_norm: f64,
    pub r: f64,
    pub nu: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoAfpDiagnostic {
    pub points: Vec<IsoAfpPoint>,
    pub monotone_decreasing: bool,
    /// `ratio(first) / ratio(last)`.
    pub drop_factor: f64,
}

/// Isotropic AFP ratio `ν(B(a, r))/r²` with `r = ‖a‖/2` along spheres of
/// decreasing `‖x‖`, `a` being the point of each sphere nearest the origin.
pub fn isotropic_afp_diagnostic(p: &BallPacking, count: usize) -> Result<IsoAfpDiagnostic> {
    if p.atoms.is_empty() {
        return Err(Error::InvalidInput("packing is empty: no boundary to sample".into()));
    }
    if count < 2 {
        return Err(Error::InvalidInput("need at least two diagnostic points".into()));
    }
    let mut order: Vec<usize> = (0..p.atoms.len()).collect();
    order.sort_by(|&i, &j| norm(&p.atoms[j].x).total_cmp(&norm(&p.atoms[i].x)));
    let picks: Vec<usize> = (0..count)
        .map(|k| order[k * (order.len() - 1) / (count - 1)])
        .collect();
    let points: Vec<IsoAfpPoint> = picks
        .par_iter()
        .map(|&i| {
            let b = &p.atoms[i];
            let t = norm(&b.x);
            let a: Vec<f64> = b.x.iter().map(|x| x * (1.0 - b.rho / t)).collect();
            let an = norm(&a);
            let r = an / 2.0;
            let nu = nu_ball(p, &a, r);
            IsoAfpPoint {
                a_norm: an,
                r,
                nu,
                ratio: nu / (r * r),
            }
        })
        .collect();
    let monotone_decreasing = points.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let drop_factor = points[0].ratio / points[points.len() - 1].ratio;
    Ok(IsoAfpDiagnostic {
        points,
        monotone_decreasing,
        drop_factor,
    })
}

/// A component of a union of small bodies, before dilation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Component {
    Ball { center: Vec<f64>, rho: f64 },
    /// Solid cylinder of radius `rho` from `start` along a coordinate axis.
    Rod {
        start: [f64; 3],
        axis: usize,
        length: f64,
        rho: f64,
    },
}

/// Dilation mode for [`union_outer_content`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UnionQ {
    /// Ambient unit ball.
    Ball,
    /// Unit disk in a 2-plane of R³; slicing of touching bodies needs the xy-plane.
    PlanarDisk { basis: Vec<Vec<f64>> },
}

impl Component {
    pub fn volume(&self) -> f64 {
        match self {
            Component::Ball { center, rho } => {
                if center.len() == 2 {
                    PI * rho * rho
                } else {
                    4.0 / 3.0 * PI * rho.powi(3)
                }
            }
            Component::Rod { length, rho, .. } => PI * rho * rho * length,
        }
    }

    fn dilated(&self, q: &UnionQ, r: f64) -> Result<Body> {
        Ok(match (self, q) {
            (Component::Ball { center, rho }, UnionQ::Ball) => Body::Ball {
                center: center.clone(),
                radius: rho + r,
            },
            (Component::Ball { center, rho }, UnionQ::PlanarDisk { .. }) if center.len() == 3 => {
                Body::BallDisk {
                    center: [center[0], center[1], center[2]],
                    rho: *rho,
                    r,
                }
            }
            (
                Component::Rod {
                    start,
                    axis,
                    length,
                    rho,
                },
                UnionQ::Ball,
            ) => Body::Rod {
                start: *start,
                axis: *axis,
                length: *length,
                rho: *rho,
                r,
            },
            _ => {
                return Err(Error::Unsupported(format!(
                    "no closed form for {self:?} dilated by {q:?}"
                )))
            }
        })
    }

    /// Exact `λ((C ⊕ rQ) ∖ C)` for a lone component.
    fn lone_excess(&self, q: &UnionQ, r: f64) -> Result<f64> {
        Ok(match (self, q) {
            (Component::Ball { center, rho }, UnionQ::Ball) => {
                if center.len() == 2 {
                    2.0 * PI * rho * r + PI * r * r
                } else {
                    4.0 * PI * rho * rho * r + 4.0 * PI * rho * r * r + 4.0 / 3.0 * PI * r.powi(3)
                }
            }
            (Component::Ball { rho, .. }, UnionQ::PlanarDisk { .. }) => {
                PI * PI * rho * rho * r + 2.0 * PI * rho * r * r
            }
            (Component::Rod { length, rho, .. }, UnionQ::Ball) => {
                2.0 * PI * length * rho * r + PI * length * r * r + 2.0 * PI * rho * rho * r
                    + PI * PI * rho * r * r
                    + 4.0 / 3.0 * PI * r.powi(3)
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "no closed form for {self:?} dilated by {q:?}"
                )))
            }
        })
    }
}

/// How the excess at one radius was assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionExcess {
    pub r: f64,
    pub excess: f64,
    pub isolated: usize,
    pub clustered: usize,
    pub groups: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionOptions {
    /// Slice rows across the thinnest cross-section of a cluster's bodies.
    pub slices_per_width: f64,
    pub max_intervals: u64,
    pub trend: TrendParams,
}

impl Default for UnionOptions {
    fn default() -> Self {
        Self {
            slices_per_width: 16.0,
            max_intervals: SliceCap::default().max_intervals,
            trend: TrendParams::default(),
        }
    }
}

/// Cross-section widths in y and z.
fn body_width(b: &Body) -> [f64; 2] {
    match b {
        Body::Ball { radius, .. } => [2.0 * radius; 2],
        Body::BallDisk { rho, r, .. } => [2.0 * (rho + r), 2.0 * rho],
        Body::Rod { rho, r, .. } => [2.0 * (rho + r); 2],
    }
}

/// `λ_n((A ⊕ rQ) ∖ A)` for `A` a union of disjoint components.
///
/// A dilated body whose bounding box meets no other box is handled by its closed
/// form; the remaining bodies are grouped by adjacency of hash cells and each
/// group's union volume is sliced.
pub fn union_excess(components: &[Component], q: &UnionQ, r: f64, opts: UnionOptions) -> Result<UnionExcess> {
    if let UnionQ::PlanarDisk { basis } = q {
        let b = gram_schmidt(basis, 1e-9);
        if b.len() != 2 || b.iter().any(|v| v.len() != 3) {
            return Err(Error::InvalidInput("planar disk needs two independent 3-vectors".into()));
        }
    }
    let bodies: Vec<Body> = components.iter().map(|c| c.dilated(q, r)).collect::<Result<_>>()?;
    let boxes: Vec<([f64; 3], [f64; 3])> = bodies.iter().map(Body::bbox).collect();
    let dim = bodies.first().map_or(3, Body::dim);
    // per-axis cells no smaller than any box, so overlapping boxes sit in adjacent cells
    let mut cell = [1e-300f64; 3];
    for (lo, hi) in &boxes {
        for k in 0..dim {
            cell[k] = cell[k].max(hi[k] - lo[k]);
        }
    }
    let key = |b: &([f64; 3], [f64; 3])| -> [i64; 3] {
        let mut k = [0i64; 3];
        for i in 0..dim {
            k[i] = (0.5 * (b.0[i] + b.1[i]) / cell[i]).floor() as i64;
        }
        k
    };
    let mut cells: std::collections::HashMap<[i64; 3], Vec<usize>> = std::collections::HashMap::new();
    for (i, b) in boxes.iter().enumerate() {
        cells.entry(key(b)).or_default().push(i);
    }
    let overlap = |a: usize, b: usize| (0..dim).all(|k| boxes[a].0[k] < boxes[b].1[k] && boxes[b].0[k] < boxes[a].1[k]);
    let neighbours = |c: [i64; 3]| {
        let zr = if dim == 3 { -1..=1 } else { 0..=0 };
        zr.flat_map(move |dz| (-1..=1).flat_map(move |dy| (-1..=1).map(move |dx| [c[0] + dx, c[1] + dy, c[2] + dz])))
    };
    let isolated: Vec<bool> = (0..bodies.len())
        .into_par_iter()
        .map(|i| {
            let c = key(&boxes[i]);
            !neighbours(c).any(|n| {
                cells
                    .get(&n)
                    .is_some_and(|v| v.iter().any(|&j| j != i && overlap(i, j)))
            })
        })
        .collect();

    let lone = compensated_sum(
        components
            .iter()
            .zip(&isolated)
            .filter(|(_, &iso)| iso)
            .map(|(c, _)| c.lone_excess(q, r))
            .collect::<Result<Vec<_>>>()?,
    );

    // group clustered bodies by 26-connectivity of their cells
    let mut clustered_cells: Vec<[i64; 3]> = Vec::new();
    let mut cell_members: std::collections::HashMap<[i64; 3], Vec<usize>> = std::collections::HashMap::new();
    for (i, &iso) in isolated.iter().enumerate() {
        if !iso {
            let c = key(&boxes[i]);
            let e = cell_members.entry(c).or_default();
            if e.is_empty() {
                clustered_cells.push(c);
            }
            e.push(i);
        }
    }
    clustered_cells.sort();
    let mut seen: std::collections::HashSet<[i64; 3]> = std::collections::HashSet::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &start in &clustered_cells {
        if !seen.insert(start) {
            continue;
        }
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(c) = stack.pop() {
            members.extend_from_slice(&cell_members[&c]);
            for n in neighbours(c) {
                if cell_members.contains_key(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    if !groups.is_empty() {
        if let UnionQ::PlanarDisk { basis } = q {
            let b = gram_schmidt(basis, 1e-9);
            let n = crate::linalg::cross3(&b[0], &b[1]);
            if (n[2].abs() - 1.0).abs() > 1e-9 {
                return Err(Error::Unsupported(
                    "touching bodies under a planar disk are sliced only for the xy-plane".into(),
                ));
            }
        }
    }
    let cap = SliceCap {
        max_intervals: opts.max_intervals,
    };
    let mut grouped = 0.0;
    let mut clustered = 0;
    for g in &groups {
        let members: Vec<Body> = g.iter().map(|&i| bodies[i].clone()).collect();
        let width = members.iter().map(body_width).fold([f64::INFINITY; 2], |w, b| {
            [w[0].min(b[0]), w[1].min(b[1])]
        });
        let spacing = [width[0] / opts.slices_per_width, width[1] / opts.slices_per_width];
        let v = voxel::union_volume_with(&members, spacing, cap)?;
        let base = compensated_sum(g.iter().map(|&i| components[i].volume()));
        grouped += v - base;
        clustered += g.len();
    }
    Ok(UnionExcess {
        r,
        excess: lone + grouped,
        isolated: bodies.len() - clustered,
        clustered,
        groups: groups.len(),
    })
}

/// Outer content estimator for a union of small components (packings and rod
/// scenes), evaluated without a global voxel grid.
pub fn union_outer_content(
    components: &[Component],
    q: &UnionQ,
    sched: &RSchedule,
    opts: UnionOptions,
) -> Result<(ConvergenceReport, Vec<UnionExcess>)> {
    let parts = sched
        .radii()
        .iter()
        .map(|&r| union_excess(components, q, r, opts))
        .collect::<Result<Vec<_>>>()?;
    let samples = parts
        .iter()
        .map(|p| Sample {
            r: p.r,
            excess: p.excess,
            f: p.excess / p.r,
        })
        .collect();
    Ok((ConvergenceReport::from_samples(samples, opts.trend), parts))
}
