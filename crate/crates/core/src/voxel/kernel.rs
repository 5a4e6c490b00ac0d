//! Digitization of `rQ` into integer offsets.
//!
//! An offset `z` is kept when `h·z` is within `ALONG_TOL·h` of `rQ` measured
//! inside the affine hull of `rQ`, and within `ACROSS_TOL·h` orthogonally to it.
//! Full-dimensional bodies thus get a solid kernel slightly larger than `rQ`,
//! segments a digital line and planar disks a one-voxel-thick digital disk.
//! A point-like `rQ` maps to the single nearest lattice point.

use std::collections::BTreeMap;

use crate::convex::{PreparedBody, StructuringElement};
use crate::error::{Error, Result};

pub const ALONG_TOL: f64 = 0.25;
pub const ACROSS_TOL: f64 = 0.5;
pub const DEFAULT_KERNEL_CAP: usize = 512;

const TIE_EPS: f64 = 1e-9;

/// Integer offsets (in voxels) rasterizing `rQ`, grouped by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffsetSet {
    dim: usize,
    offsets: Vec<[i64; 3]>,
}

/// Maximal x-runs of one kernel row: `(dy, dz) -> [(x0, x1)]`.
pub(crate) type RowRuns = BTreeMap<(i64, i64), Vec<(i64, i64)>>;

impl OffsetSet {
    pub fn from_offsets(dim: usize, mut offsets: Vec<[i64; 3]>) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidInput(format!("kernels are 2D or 3D, got {dim}")));
        }
        if offsets.is_empty() {
            return Err(Error::InvalidInput("offset set must be nonempty".into()));
        }
        if dim == 2 && offsets.iter().any(|o| o[2] != 0) {
            return Err(Error::InvalidInput("2D offsets must have zero z".into()));
        }
        offsets.sort_by_key(|o| (o[2], o[1], o[0]));
        offsets.dedup();
        Ok(Self { dim, offsets })
    }

    /// The kernel `{0}`.
    pub fn origin(dim: usize) -> Self {
        Self {
            dim,
            offsets: vec![[0; 3]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Offsets sorted by `(z, y, x)`.
    pub fn offsets(&self) -> &[[i64; 3]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, z: [i64; 3]) -> bool {
        self.offsets.binary_search_by_key(&(z[2], z[1], z[0]), |o| (o[2], o[1], o[0])).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        self.offsets
            .iter()
            .all(|o| self.contains([-o[0], -o[1], -o[2]]))
    }

    /// Componentwise `(min, max)`.
    pub fn bounds(&self) -> ([i64; 3], [i64; 3]) {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for o in &self.offsets {
            for k in 0..3 {
                lo[k] = lo[k].min(o[k]);
                hi[k] = hi[k].max(o[k]);
            }
        }
        (lo, hi)
    }

    pub(crate) fn row_runs(&self) -> RowRuns {
        let mut rows: RowRuns = BTreeMap::new();
        for o in &self.offsets {
            let runs = rows.entry((o[1], o[2])).or_default();
            match runs.last_mut() {
                Some(last) if last.1 + 1 == o[0] => last.1 = o[0],
                _ => runs.push((o[0], o[0])),
            }
        }
        rows
    }
}

/// Rasterizes `rQ` at spacing `h`; `cap` bounds `r·diam(Q)/h`.
pub fn build_offsets(q: &StructuringElement, r: f64, h: f64, cap: usize) -> Result<OffsetSet> {
    let n = q.ambient_dim();
    if !(n == 2 || n == 3) {
        return Err(Error::Unsupported(format!("voxel kernels need n ∈ {{2,3}}, got {n}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("spacing must be positive, got {h}")));
    }
    let extent = r * q.diameter() / h;
    if !(extent <= cap as f64) {
        return Err(Error::KernelTooLarge {
            extent,
            cap,
        });
    }
    let rq = q.scale(r)?;
    let body = PreparedBody::new(&rq);
    let lift = |z: &[i64; 3]| -> Vec<f64> { (0..n).map(|k| z[k] as f64 * h).collect() };

    if body.span_dim() == 0 {
        let (lo, _) = rq.bounding_box();
        let mut z = [0i64; 3];
        for k in 0..n {
            z[k] = (lo[k] / h).round() as i64;
        }
        return OffsetSet::from_offsets(n, vec![z]);
    }

    let (lo, hi) = rq.bounding_box();
    let mut lo_i = [0i64; 3];
    let mut hi_i = [0i64; 3];
    for k in 0..n {
        lo_i[k] = (lo[k] / h).floor() as i64 - 1;
        hi_i[k] = (hi[k] / h).ceil() as i64 + 1;
    }
    let mut offsets = Vec::new();
    for zz in lo_i[2]..=hi_i[2] {
        for y in lo_i[1]..=hi_i[1] {
            for x in lo_i[0]..=hi_i[0] {
                let z = [x, y, zz];
                let (along, across) = body.decompose(&lift(&z));
                if along <= (ALONG_TOL + TIE_EPS) * h && across <= (ACROSS_TOL + TIE_EPS) * h {
                    offsets.push(z);
                }
            }
        }
    }
    if offsets.is_empty() {
        // a thin body can slip between lattice points; fall back to its nearest one
        let anchor: Vec<f64> = (0..n).map(|k| 0.5 * (lo[k] + hi[k])).collect();
        let mut z = [0i64; 3];
        for k in 0..n {
            z[k] = (anchor[k] / h).round() as i64;
        }
        offsets.push(z);
    }
    OffsetSet::from_offsets(n, offsets)
}
