//! Binary voxel sets on isotropic grids in R² and R³.
//!
//! Occupancy is stored row-major with x fastest: each `(y, z)` row is a run of
//! `words_per_row` 64-bit words whose unused tail bits are always zero. 2D grids
//! have `dims[2] == 1`.

mod bits;
mod kernel;
mod morph;
mod rasterize;
mod slices;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use kernel::{build_offsets, OffsetSet, ACROSS_TOL, ALONG_TOL, DEFAULT_KERNEL_CAP};
pub use morph::{
    covariogram, covariogram_count, covariogram_derivative, density_regularize, dilate,
    excess_count, excess_volume, product_excess, CovariogramDerivative, CovariogramValue,
    RegularizeParams,
};
pub use rasterize::{rasterize, Shape};
pub use slices::{union_volume, union_volume_with, Body, SliceCap};

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    dim: usize,
    origin: Vec<f64>,
    h: f64,
    dims: [usize; 3],
    words_per_row: usize,
    bits: Vec<u64>,
}

/// JSON header accompanying a raw bitset dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub dims: Vec<usize>,
}

/// Hard ceiling on the number of voxels in a single grid.
pub const MAX_VOXELS: usize = 1 << 34;

impl VoxelGrid {
    /// An empty grid with `dims.len() ∈ {2, 3}` axes.
    pub fn new(origin: Vec<f64>, h: f64, dims: &[usize]) -> Result<Self> {
        let dim = dims.len();
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidInput(format!("voxel grids are 2D or 3D, got {dim} axes")));
        }
        if origin.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: origin.len(),
            });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("spacing must be positive, got {h}")));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        let d = [dims[0], dims[1], if dim == 3 { dims[2] } else { 1 }];
        let total = d.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
        match total {
            Some(t) if t <= MAX_VOXELS => {}
            _ => {
                return Err(Error::ResourceCap(format!(
                    "grid of {d:?} voxels exceeds the cap of {MAX_VOXELS}"
                )))
            }
        }
        let words_per_row = d[0].div_ceil(64).max(1);
        Ok(Self {
            dim,
            origin,
            h,
            dims: d,
            words_per_row,
            bits: vec![0; words_per_row * d[1] * d[2]],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Axis lengths; for 2D grids the third entry is 1.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn rows(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    pub fn row(&self, y: usize, z: usize) -> &[u64] {
        let i = (y + self.dims[1] * z) * self.words_per_row;
        &self.bits[i..i + self.words_per_row]
    }

    pub fn row_mut(&mut self, y: usize, z: usize) -> &mut [u64] {
        let i = (y + self.dims[1] * z) * self.words_per_row;
        &mut self.bits[i..i + self.words_per_row]
    }

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.bits
    }

    pub fn get(&self, idx: [usize; 3]) -> bool {
        let w = self.row(idx[1], idx[2])[idx[0] / 64];
        (w >> (idx[0] % 64)) & 1 == 1
    }

    pub fn set(&mut self, idx: [usize; 3], value: bool) {
        let x = idx[0];
        let w = &mut self.row_mut(idx[1], idx[2])[x / 64];
        if value {
            *w |= 1 << (x % 64);
        } else {
            *w &= !(1 << (x % 64));
        }
    }

    /// Sets voxels `x0..=x1` of one row.
    pub fn fill_span(&mut self, y: usize, z: usize, x0: usize, x1: usize) {
        bits::fill_range(self.row_mut(y, z), x0, x1);
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.cell_volume()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Physical center of voxel `idx`.
    pub fn center(&self, idx: [usize; 3]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| self.origin[k] + (idx[k] as f64 + 0.5) * self.h)
            .collect()
    }

    /// Physical extent `(min, max)` of the grid box.
    pub fn extent(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = (0..self.dim)
            .map(|k| self.origin[k] + self.dims[k] as f64 * self.h)
            .collect();
        (self.origin.clone(), hi)
    }

    /// Copy of the grid with `pad` empty voxels added on every side.
    pub fn padded(&self, pad: usize) -> Result<Self> {
        let mut dims = vec![self.dims[0] + 2 * pad, self.dims[1] + 2 * pad];
        if self.dim == 3 {
            dims.push(self.dims[2] + 2 * pad);
        }
        let origin = self.origin.iter().map(|o| o - pad as f64 * self.h).collect();
        let mut out = Self::new(origin, self.h, &dims)?;
        let zpad = if self.dim == 3 { pad } else { 0 };
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                let src = self.row(y, z).to_vec();
                bits::or_shifted(out.row_mut(y + pad, z + zpad), &src, pad);
            }
        }
        Ok(out)
    }

    /// Bitwise AND-NOT popcount against a grid with identical geometry.
    pub fn count_and_not(&self, other: &Self) -> Result<u64> {
        self.check_same_geometry(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & !b).count_ones() as u64)
            .sum())
    }

    /// Whether every occupied voxel of `self` is occupied in `other`
    /// (`other` may be larger; both are compared in physical coordinates).
    pub fn is_subset_of(&self, other: &Self) -> bool {
        if self.h != other.h || self.dim != other.dim {
            return false;
        }
        let mut off = [0i64; 3];
        for k in 0..self.dim {
            let d = (self.origin[k] - other.origin[k]) / self.h;
            if (d - d.round()).abs() > 1e-6 {
                return false;
            }
            off[k] = d.round() as i64;
        }
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in bits::ones(self.row(y, z)) {
                    let p = [x as i64 + off[0], y as i64 + off[1], z as i64 + off[2]];
                    let inside = (0..3).all(|k| p[k] >= 0 && (p[k] as usize) < other.dims[k]);
                    if !inside || !other.get([p[0] as usize, p[1] as usize, p[2] as usize]) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn check_same_geometry(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims || self.h != other.h || self.origin != other.origin {
            return Err(Error::InvalidInput("grids differ in geometry".into()));
        }
        Ok(())
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            origin: self.origin.clone(),
            spacing: self.h,
            dims: self.dims[..self.dim].to_vec(),
        }
    }

    /// Raw little-endian dump of the padded row words.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<()> {
        for word in &self.bits {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw<R: Read>(header: &GridHeader, mut r: R) -> Result<Self> {
        let mut grid = Self::new(header.origin.clone(), header.spacing, &header.dims)?;
        let mut buf = [0u8; 8];
        for word in grid.bits.iter_mut() {
            r.read_exact(&mut buf)?;
            *word = u64::from_le_bytes(buf);
        }
        let tail = grid.dims[0] % 64;
        if tail != 0 {
            let mask = (1u64 << tail) - 1;
            let wpr = grid.words_per_row;
            if grid.bits.chunks(wpr).any(|row| row[wpr - 1] & !mask != 0) {
                return Err(Error::InvalidInput("raw grid has bits beyond the row length".into()));
            }
        }
        Ok(grid)
    }
}
