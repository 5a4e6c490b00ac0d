//! Dilation, excess volume, covariogram and density regularization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bits;
use super::kernel::{build_offsets, OffsetSet};
use super::VoxelGrid;
use crate::convex::StructuringElement;
use crate::error::{Error, Result};
use crate::linalg::fit_affine;

/// `A ⊕ K`, with the box grown by the kernel extent so nothing is clipped.
///
/// Each kernel row is a set of x-runs; a run of length `L` is applied as two
/// shifted copies of the `2^⌊log₂L⌋`-smear of `A`, and the smears are built by
/// doubling. Destination rows are filled in parallel; OR is order-independent so
/// the result does not depend on the schedule.
pub fn dilate(a: &VoxelGrid, k: &OffsetSet) -> Result<VoxelGrid> {
    if k.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: k.dim(),
        });
    }
    let (lo, hi) = k.bounds();
    let dim = a.dim();
    let ad = a.dims();
    let mut dims = vec![ad[0] + (hi[0] - lo[0]) as usize, ad[1] + (hi[1] - lo[1]) as usize];
    if dim == 3 {
        dims.push(ad[2] + (hi[2] - lo[2]) as usize);
    }
    let h = a.spacing();
    let origin = (0..dim).map(|i| a.origin()[i] + lo[i] as f64 * h).collect();
    let mut out = VoxelGrid::new(origin, h, &dims)?;
    let wpr = out.words_per_row();

    struct Entry {
        dy: usize,
        dz: usize,
        runs: Vec<(usize, usize)>,
    }
    let mut max_len = 1;
    let entries: Vec<Entry> = k
        .row_runs()
        .into_iter()
        .map(|((dy, dz), runs)| Entry {
            dy: (dy - lo[1]) as usize,
            dz: (dz - lo[2]) as usize,
            runs: runs
                .into_iter()
                .map(|(x0, x1)| {
                    let len = (x1 - x0 + 1) as usize;
                    max_len = max_len.max(len);
                    ((x0 - lo[0]) as usize, len)
                })
                .collect(),
        })
        .collect();

    let in_rows = a.rows();
    let nonempty: Vec<bool> = a.words().chunks(a.words_per_row()).map(|r| r.iter().any(|&w| w != 0)).collect();
    let mut powers: Vec<Vec<u64>> = Vec::new();
    let mut base = vec![0u64; in_rows * wpr];
    for (dst, src) in base.chunks_mut(wpr).zip(a.words().chunks(a.words_per_row())) {
        dst[..src.len()].copy_from_slice(src);
    }
    powers.push(base);
    while (1usize << powers.len()) <= max_len {
        let step = 1usize << (powers.len() - 1);
        let prev = powers.last().expect("nonempty");
        let mut next = prev.clone();
        next.par_chunks_mut(wpr)
            .zip(prev.par_chunks(wpr))
            .for_each(|(d, s)| bits::or_shifted(d, s, step));
        powers.push(next);
    }

    let (ny_in, nz_in) = (ad[1], ad[2]);
    let ny_out = out.dims()[1];
    out.words_mut()
        .par_chunks_mut(wpr)
        .enumerate()
        .for_each(|(row, dst)| {
            let (y, z) = (row % ny_out, row / ny_out);
            for e in &entries {
                if y < e.dy || z < e.dz {
                    continue;
                }
                let (sy, sz) = (y - e.dy, z - e.dz);
                if sy >= ny_in || sz >= nz_in {
                    continue;
                }
                let src_row = sy + ny_in * sz;
                if !nonempty[src_row] {
                    continue;
                }
                for &(a0, len) in &e.runs {
                    let p = usize::BITS as usize - 1 - len.leading_zeros() as usize;
                    let src = &powers[p][src_row * wpr..(src_row + 1) * wpr];
                    bits::or_shifted(dst, src, a0);
                    if len > 1 << p {
                        bits::or_shifted(dst, src, a0 + len - (1 << p));
                    }
                }
            }
        });
    Ok(out)
}

/// Voxel count of `(A ⊕ K) ∖ A`.
pub fn excess_count(a: &VoxelGrid, k: &OffsetSet) -> Result<u64> {
    let d = dilate(a, k)?;
    let (lo, _) = k.bounds();
    let ny_out = d.dims()[1];
    let ad = a.dims();
    let wpr = d.words_per_row();
    let total = d
        .words()
        .par_chunks(wpr)
        .enumerate()
        .map_init(
            || vec![0u64; wpr],
            |scratch, (row, dst)| {
                let (y, z) = ((row % ny_out) as i64, (row / ny_out) as i64);
                let (sy, sz) = (y + lo[1], z + lo[2]);
                let covered = sy >= 0 && sz >= 0 && (sy as usize) < ad[1] && (sz as usize) < ad[2];
                if !covered {
                    return dst.iter().map(|w| w.count_ones() as u64).sum::<u64>();
                }
                scratch.iter_mut().for_each(|w| *w = 0);
                let src = a.row(sy as usize, sz as usize);
                if lo[0] <= 0 {
                    bits::or_shifted(scratch, src, (-lo[0]) as usize);
                } else {
                    bits::or_shifted_down(scratch, src, lo[0] as usize);
                }
                dst.iter()
                    .zip(scratch.iter())
                    .map(|(d, s)| (d & !s).count_ones() as u64)
                    .sum::<u64>()
            },
        )
        .sum();
    Ok(total)
}

/// `λ_n((A ⊕ rQ) ∖ A)` on the grid.
pub fn excess_volume(a: &VoxelGrid, q: &StructuringElement, r: f64, cap: usize) -> Result<f64> {
    if q.ambient_dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: q.ambient_dim(),
        });
    }
    let k = build_offsets(q, r, a.spacing(), cap)?;
    Ok(excess_count(a, &k)? as f64 * a.cell_volume())
}

/// `λ_k((C ⊕ rQ) ∖ C) · λ_{n−k}(D)` for a product `C × D` dilated inside the
/// first factor.
pub fn product_excess(
    c: &VoxelGrid,
    d_volume: f64,
    q: &StructuringElement,
    r: f64,
    cap: usize,
) -> Result<f64> {
    if !(d_volume > 0.0 && d_volume.is_finite()) {
        return Err(Error::InvalidInput(format!("factor volume must be positive, got {d_volume}")));
    }
    Ok(excess_volume(c, q, r, cap)? * d_volume)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovariogramValue {
    pub value: f64,
    /// The offset moves `A` completely off its own box.
    pub beyond_extent: bool,
}

/// `|A ∩ (A + x)|` in voxels, plus the beyond-extent flag.
pub fn covariogram_count(a: &VoxelGrid, x: [i64; 3]) -> (u64, bool) {
    let d = a.dims();
    let beyond = (0..3).any(|k| x[k].unsigned_abs() as usize >= d[k]);
    if beyond {
        return (0, true);
    }
    let mut scratch = Vec::new();
    let mut total = 0;
    for z in 0..d[2] {
        let sz = z as i64 - x[2];
        if sz < 0 || sz as usize >= d[2] {
            continue;
        }
        for y in 0..d[1] {
            let sy = y as i64 - x[1];
            if sy < 0 || sy as usize >= d[1] {
                continue;
            }
            let row = a.row(y, z);
            if row.iter().all(|&w| w == 0) {
                continue;
            }
            total += bits::and_count_shifted(row, a.row(sy as usize, sz as usize), x[0], &mut scratch);
        }
    }
    (total, false)
}

/// `g_A(x) = λ_n(A ∩ (A + x))` for an integer voxel offset `x`.
pub fn covariogram(a: &VoxelGrid, x: [i64; 3]) -> CovariogramValue {
    let (count, beyond_extent) = covariogram_count(a, x);
    CovariogramValue {
        value: count as f64 * a.cell_volume(),
        beyond_extent,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovariogramDerivative {
    /// `(t, g_A(t·u))` with `t` the length of the rounded lattice shift.
    pub samples: Vec<(f64, f64)>,
    /// Affine-fit limit of `(g_A(0) − g_A(tu))/t` as `t → 0`: the outer
    /// content `∫⟨u,v⟩⁺ S*(dv)`.
    pub outer: f64,
    /// One-sided derivative of `t ↦ g_A(tu)` at 0, i.e. `−outer`.
    pub slope: f64,
    pub rms: f64,
}

/// Finite-difference derivative of the covariogram along `u` over `steps`.
pub fn covariogram_derivative(a: &VoxelGrid, u: &[f64], steps: &[f64]) -> Result<CovariogramDerivative> {
    if u.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: u.len(),
        });
    }
    let h = a.spacing();
    let g0 = covariogram_count(a, [0; 3]).0;
    let mut samples = Vec::with_capacity(steps.len());
    let (mut ts, mut qs) = (Vec::new(), Vec::new());
    for &r in steps {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Schedule(format!("covariogram steps must be positive, got {r}")));
        }
        let mut x = [0i64; 3];
        for k in 0..a.dim() {
            x[k] = (r * u[k] / h).round() as i64;
        }
        let t = h * x.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        if t == 0.0 {
            return Err(Error::Schedule(format!("step {r} rounds to a zero shift")));
        }
        let (g, _) = covariogram_count(a, x);
        let gv = g as f64 * a.cell_volume();
        samples.push((t, gv));
        ts.push(t);
        qs.push((g0 - g) as f64 * a.cell_volume() / t);
    }
    let (outer, _, rms) = fit_affine(&ts, &qs);
    Ok(CovariogramDerivative {
        samples,
        outer,
        slope: -outer,
        rms,
    })
}

/// Window radius (voxels) and density threshold for [`density_regularize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizeParams {
    pub window: usize,
    pub threshold: f64,
}

impl RegularizeParams {
    /// Defaults separating one-voxel features from solid boundaries: a digital
    /// line has density 7/29 in the radius-3 disk, a square corner 11/29; a
    /// digital sheet has density 113/925 in the radius-6 ball, a cube corner ≈ 0.18.
    pub fn default_for(dim: usize) -> Self {
        if dim == 3 {
            Self {
                window: 6,
                threshold: 0.14,
            }
        } else {
            Self {
                window: 3,
                threshold: 0.30,
            }
        }
    }
}

/// Keeps an occupied voxel iff the occupied fraction of the digital ball of
/// radius `window` around it exceeds `threshold`. Voxels outside the grid count
/// as empty; unoccupied voxels are never added.
pub fn density_regularize(a: &VoxelGrid, p: RegularizeParams) -> Result<VoxelGrid> {
    if !(p.threshold > 0.0 && p.threshold < 1.0) || p.window == 0 {
        return Err(Error::InvalidInput(format!(
            "regularization needs window ≥ 1 and threshold in (0,1), got {p:?}"
        )));
    }
    let w = p.window as i64;
    let zr = if a.dim() == 3 { w } else { 0 };
    let mut ball = Vec::new();
    for z in -zr..=zr {
        for y in -w..=w {
            for x in -w..=w {
                if x * x + y * y + z * z <= w * w {
                    ball.push([x, y, z]);
                }
            }
        }
    }
    let kernel = OffsetSet::from_offsets(a.dim(), ball)?;
    let size = kernel.len() as f64;
    let runs: Vec<((i64, i64), (i64, i64))> = kernel
        .row_runs()
        .into_iter()
        .map(|(k, v)| (k, v[0]))
        .collect();
    let mut out = a.clone();
    let d = a.dims();
    let nx = d[0];
    let wpr = a.words_per_row();
    out.words_mut()
        .par_chunks_mut(wpr)
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(prefix, counts): &mut (Vec<u32>, Vec<u32>), (row, dst)| {
                if dst.iter().all(|&x| x == 0) {
                    return;
                }
                let (y, z) = ((row % d[1]) as i64, (row / d[1]) as i64);
                let xs: Vec<usize> = bits::ones(dst).collect();
                counts.clear();
                counts.resize(xs.len(), 0);
                for &((dy, dz), (x0, x1)) in &runs {
                    let (sy, sz) = (y + dy, z + dz);
                    if sy < 0 || sz < 0 || sy as usize >= d[1] || sz as usize >= d[2] {
                        continue;
                    }
                    bits::prefix_counts(a.row(sy as usize, sz as usize), nx, prefix);
                    for (c, &x) in counts.iter_mut().zip(&xs) {
                        let lo = (x as i64 + x0).clamp(0, nx as i64) as usize;
                        let hi = (x as i64 + x1 + 1).clamp(0, nx as i64) as usize;
                        *c += prefix[hi] - prefix[lo];
                    }
                }
                for (&x, &c) in xs.iter().zip(counts.iter()) {
                    if !(c as f64 / size > p.threshold) {
                        dst[x / 64] &= !(1u64 << (x % 64));
                    }
                }
            },
        );
    Ok(out)
}
