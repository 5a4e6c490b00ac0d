//! JSON configuration documents, one per subcommand. Every optional field is
//! resolved to a concrete value before a command runs, and the resolved document
//! is echoed into its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use minkowski_content::estimate::TrendParams;
use minkowski_content::generate::{DeltaLaw, PlanarFactor};
use minkowski_content::voxel::{Shape, DEFAULT_KERNEL_CAP};
use minkowski_content::StructuringElement;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reads a config file, or parses `{}` when none is given.
pub fn load<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<T> {
    let text = match path {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
        None => "{}".to_string(),
    };
    serde_json::from_str(&text).map_err(|e| match path {
        Some(p) => CliError::Config(format!("{}: {e}", p.display())),
        None => CliError::Config(format!("--config is required: {e}")),
    })
}

/// Resolves `p` against the directory holding the config file.
pub fn relative_to(config: Option<&Path>, p: &Path) -> PathBuf {
    match config.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    /// Omitted: the smallest lattice-aligned box covering `A ⊕ r_max·Q`.
    #[serde(default)]
    pub bbox: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub r_max: f64,
    pub r_min: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Round radii to multiples of the grid spacing.
    #[serde(default)]
    pub snap: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeConfig {
    #[serde(default)]
    pub on: bool,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentConfig {
    #[serde(default = "yes")]
    pub thickness_correction: bool,
    #[serde(default = "default_sheet_threshold")]
    pub sheet_threshold: f64,
}

impl Default for ContentConfig {
    fn default() -> Self {
        Self {
            thickness_correction: true,
            sheet_threshold: default_sheet_threshold(),
        }
    }
}

/// `estimate` and `content`. Exactly one of `shape`, `packing`, `scene`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
    /// Packing JSON written by `generate packing2|packing3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packing: Option<PathBuf>,
    /// Scene JSON written by `generate example2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub q: StructuringElement,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub regularize: RegularizeConfig,
    #[serde(default = "default_kernel_cap")]
    pub kernel_cap: usize,
    #[serde(default)]
    pub trend: TrendParams,
    /// Slice rows per cross-section width (packing and scene inputs).
    #[serde(default = "default_slices")]
    pub slices_per_width: f64,
    #[serde(default)]
    pub content: ContentConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerimeterConfig {
    pub shape: Shape,
    pub q: StructuringElement,
    /// Sphere quadrature level for round 3D shapes.
    #[serde(default = "default_level")]
    pub quadrature_level: u32,
    /// Normals in the circle net for round 2D shapes.
    #[serde(default = "default_circle_nodes")]
    pub circle_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub law: Option<DeltaLaw>,
    /// Omitted: the smallest `t_min` whose predicted count stays within `count_cap`.
    #[serde(default)]
    pub t_min: Option<f64>,
    #[serde(default = "default_count_cap")]
    pub count_cap: f64,
    #[serde(default = "default_rejections")]
    pub max_rejections: u64,
    #[serde(default = "default_probes")]
    pub audit_probes: usize,
    #[serde(default = "default_bands")]
    pub bands: usize,
    #[serde(default = "default_max_count")]
    pub max_count: f64,
    /// Points of the `Σ_{‖x‖<t} ρ` table in the summary.
    #[serde(default = "default_summary_points")]
    pub summary_points: usize,
    #[serde(default)]
    pub seed: u64,
    /// Planar factor `C` (example1).
    #[serde(default)]
    pub factor: Option<PlanarFactor>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n")]
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AfpConfig {
    pub packing: PathBuf,
    #[serde(default = "default_basis")]
    pub basis: Vec<Vec<f64>>,
    /// Sample points; each carries up to four radii.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub isotropic: bool,
    #[serde(default = "default_iso_points")]
    pub iso_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariogramConfig {
    pub shape: Shape,
    pub grid: GridConfig,
    pub u: Vec<f64>,
    /// Omitted: `h, 2h, …, 8h`.
    #[serde(default)]
    pub steps: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}
fn default_count() -> usize {
    12
}
fn default_kernel_cap() -> usize {
    DEFAULT_KERNEL_CAP
}
fn default_sheet_threshold() -> f64 {
    0.1
}
fn default_slices() -> f64 {
    16.0
}
fn default_level() -> u32 {
    3
}
fn default_circle_nodes() -> usize {
    4096
}
fn default_count_cap() -> f64 {
    1e5
}
fn default_rejections() -> u64 {
    100_000
}
fn default_probes() -> usize {
    10_000
}
fn default_bands() -> usize {
    8
}
fn default_max_count() -> f64 {
    1e7
}
fn default_summary_points() -> usize {
    11
}
fn default_k() -> usize {
    2
}
fn default_n() -> usize {
    4
}
fn default_basis() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]
}
fn default_points() -> usize {
    1000
}
fn default_iso_points() -> usize {
    8
}
