use std::fs;
use std::path::Path;

use minkowski_content::estimate::{
    afp_check, isotropic_afp_diagnostic, minkowski_content, outer_content, stratified_afp_samples,
    union_outer_content, AfpReport, Component, ContentOptions, ConvergenceReport, EstimateOptions,
    IsoAfpDiagnostic, RSchedule, Sample, UnionExcess, UnionOptions, UnionQ,
};
use minkowski_content::generate::{
    gen_example2, gen_packing, packing_summary, predicted_count, t_grid, tune_t_min, BallPacking,
    DeltaLaw, Example1, PackingParams, PackingSummary, PlanarFactor, Scene,
};
use minkowski_content::mesh::unit_cube;
use minkowski_content::voxel::{
    covariogram_derivative, density_regularize, rasterize, GridHeader, RegularizeParams, Shape,
    VoxelGrid, MAX_VOXELS,
};
use minkowski_content::{DiscreteSurfaceMeasure, StructuringElement};
use serde::{Deserialize, Serialize};

use crate::config::{
    relative_to, AfpConfig, BBox, CovariogramConfig, EstimateConfig, GenerateConfig, GridConfig,
    PerimeterConfig, RegularizeConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Lattice-aligned box for `shape`, grown to cover `shape ⊕ r·Q` when `dilation`
/// is given. An explicit box is checked, not adjusted.
fn resolve_bbox(
    shape: &Shape,
    grid: &GridConfig,
    dilation: Option<(&StructuringElement, f64)>,
) -> CliResult<BBox> {
    shape.validate()?;
    let h = grid.h;
    if !(h > 0.0 && h.is_finite()) {
        return Err(config_err(format!("grid.h must be positive, got {h}")));
    }
    let n = shape.dim();
    let (lo, hi) = shape
        .bounding_box()
        .ok_or_else(|| config_err("shape is empty"))?;
    let (mut req_lo, mut req_hi) = (lo.clone(), hi.clone());
    if let Some((q, r)) = dilation {
        let (qlo, qhi) = q.bounding_box();
        for k in 0..n {
            req_lo[k] = req_lo[k].min(lo[k] + r * qlo[k]);
            req_hi[k] = req_hi[k].max(hi[k] + r * qhi[k]);
        }
    }
    let bbox = match &grid.bbox {
        Some(b) => {
            if b.min.len() != n || b.max.len() != n {
                return Err(config_err(format!("grid.bbox must have {n} coordinates per corner")));
            }
            let tol = 1e-9 * h;
            let covers = (0..n).all(|k| b.min[k] <= req_lo[k] + tol && b.max[k] >= req_hi[k] - tol);
            if !covers {
                return Err(config_err(format!(
                    "grid.bbox {{min: {:?}, max: {:?}}} does not cover the shape dilated by r_max·Q; required bbox: min {:?}, max {:?}",
                    b.min, b.max, req_lo, req_hi
                )));
            }
            b.clone()
        }
        None => BBox {
            min: req_lo.iter().map(|x| ((x / h).floor() - 2.0) * h).collect(),
            max: req_hi.iter().map(|x| ((x / h).ceil() + 2.0) * h).collect(),
        },
    };
    let voxels = (0..n).try_fold(1.0f64, |acc, k| {
        let d = ((bbox.max[k] - bbox.min[k]) / h).ceil();
        (d >= 1.0).then_some(acc * d)
    });
    match voxels {
        None => Err(config_err("grid.bbox has an empty axis")),
        Some(v) if v > MAX_VOXELS as f64 => Err(CliError::Resource(format!(
            "grid of {v:.3e} voxels exceeds the cap of {MAX_VOXELS}"
        ))),
        Some(_) => Ok(bbox),
    }
}

fn schedule(cfg: &EstimateConfig, h: Option<f64>) -> CliResult<RSchedule> {
    let s = &cfg.schedule;
    let sched = RSchedule::geometric(s.r_max, s.r_min, s.count)?;
    match (s.snap, h) {
        (false, _) => Ok(sched),
        (true, Some(h)) => Ok(sched.snapped(h)?),
        (true, None) => Err(config_err("schedule.snap needs a voxel grid")),
    }
}

fn resolve_regularize(r: &mut RegularizeConfig, dim: usize) -> CliResult<RegularizeParams> {
    let d = RegularizeParams::default_for(dim);
    let p = RegularizeParams {
        window: *r.window.get_or_insert(d.window),
        threshold: *r.threshold.get_or_insert(d.threshold),
    };
    if p.window == 0 || !(p.threshold > 0.0 && p.threshold < 1.0) {
        return Err(config_err(format!(
            "regularize needs window ≥ 1 and 0 < threshold < 1, got {} and {}",
            p.window, p.threshold
        )));
    }
    Ok(p)
}

fn check_kernel(q: &StructuringElement, r_max: f64, h: f64, cap: usize) -> CliResult<()> {
    let extent = r_max * q.diameter() / h;
    if extent > cap as f64 {
        return Err(CliError::Resource(format!(
            "kernel extent {extent:.1} voxels at r_max exceeds kernel_cap = {cap}; use a coarser h or a smaller r_max"
        )));
    }
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| config_err(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| config_err(format!("{what} {}: {e}", path.display())))
}

fn load_packing(path: &Path) -> CliResult<BallPacking> {
    let p: BallPacking = read_json(path, "packing")?;
    p.validate()?;
    Ok(p)
}

/// The unit ball or a unit planar disk through the origin, as used by the
/// grid-free union estimator.
fn union_q(q: &StructuringElement, dim: usize) -> CliResult<UnionQ> {
    if let StructuringElement::BallInSubspace {
        center,
        radius,
        basis,
    } = q
    {
        let centred = center.iter().all(|c| *c == 0.0);
        if centred && *radius == 1.0 && center.len() == dim {
            if basis.len() == dim {
                return Ok(UnionQ::Ball);
            }
            if dim == 3 && basis.len() == 2 {
                return Ok(UnionQ::PlanarDisk { basis: basis.clone() });
            }
        }
    }
    Err(config_err(
        "packing and scene inputs support Q = the unit ball or a unit planar disk centred at 0",
    ))
}

#[derive(Serialize)]
struct EstimateOut<'a> {
    command: &'a str,
    config: &'a EstimateConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridHeader>,
    /// `λ_n` of the (regularized) input.
    input_volume: f64,
    report: &'a ConvergenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    union: Option<&'a [UnionExcess]>,
}

fn rasterized(cfg: &mut EstimateConfig, shape: &Shape, sched: &RSchedule) -> CliResult<VoxelGrid> {
    let grid = cfg
        .grid
        .clone()
        .ok_or_else(|| config_err("a shape input needs grid {h, bbox}"))?;
    if shape.dim() != cfg.q.ambient_dim() {
        return Err(config_err(format!(
            "shape is {}D but Q lives in R^{}",
            shape.dim(),
            cfg.q.ambient_dim()
        )));
    }
    sched.check_resolution(grid.h)?;
    check_kernel(&cfg.q, sched.r_max(), grid.h, cfg.kernel_cap)?;
    let reg = resolve_regularize(&mut cfg.regularize, shape.dim())?;
    let bbox = resolve_bbox(shape, &grid, Some((&cfg.q, sched.r_max())))?;
    cfg.grid = Some(GridConfig {
        h: grid.h,
        bbox: Some(bbox.clone()),
    });
    let a = rasterize(shape, &bbox.min, &bbox.max, grid.h)?;
    Ok(if cfg.regularize.on { density_regularize(&a, reg)? } else { a })
}

/// `estimate` (outer content) or `content` (Minkowski content of a sheet).
pub fn estimate(mut cfg: EstimateConfig, config_path: Option<&Path>, sheet: bool) -> CliResult<Outputs> {
    let command = if sheet { "content" } else { "estimate" };
    let inputs = [cfg.shape.is_some(), cfg.packing.is_some(), cfg.scene.is_some()];
    if inputs.iter().filter(|&&x| x).count() != 1 {
        return Err(config_err("give exactly one of shape, packing, scene"));
    }
    let mut out = Outputs::default();
    let (report, grid, volume, parts) = if let Some(shape) = cfg.shape.clone() {
        let sched = schedule(&cfg, cfg.grid.as_ref().map(|g| g.h))?;
        let a = rasterized(&mut cfg, &shape, &sched)?;
        let opts = EstimateOptions {
            kernel_cap: cfg.kernel_cap,
            trend: cfg.trend,
        };
        let report = if sheet {
            let copts = ContentOptions {
                estimate: opts,
                thickness_correction: cfg.content.thickness_correction,
                sheet_threshold: cfg.content.sheet_threshold,
            };
            minkowski_content(&a, &cfg.q, &sched, copts)?
        } else {
            outer_content(&a, &cfg.q, &sched, opts)?
        };
        (report, Some(a.header()), a.volume(), None)
    } else {
        if sheet {
            return Err(config_err("content needs a sheet shape; packings and scenes are solid"));
        }
        if cfg.grid.is_some() || cfg.regularize.on {
            return Err(config_err("grid and regularize apply to shape inputs only"));
        }
        let sched = schedule(&cfg, None)?;
        let uopts = UnionOptions {
            slices_per_width: cfg.slices_per_width,
            trend: cfg.trend,
            ..UnionOptions::default()
        };
        if !(cfg.slices_per_width >= 1.0) {
            return Err(config_err("slices_per_width must be ≥ 1"));
        }
        let (components, copies, volume) = if let Some(p) = &cfg.packing {
            let p = load_packing(&relative_to(config_path, p))?;
            let v = packing_summary(&p, &[]).volume;
            (p.components(), 1usize, v)
        } else {
            let path = relative_to(config_path, cfg.scene.as_ref().expect("one input is set"));
            let scene: Scene = read_json(&path, "scene")?;
            scene.validate()?;
            if 2.0 * sched.r_max() >= scene.min_gap() {
                return Err(config_err(format!(
                    "r_max must stay below half the gap between copies ({})",
                    scene.min_gap() / 2.0
                )));
            }
            let v = scene.copies.len() as f64 * packing_summary(&scene.d, &[]).volume;
            // copies never interact below half their gap, and Q = B³ is rotation
            // invariant, so every copy contributes the same excess
            (scene.canonical_copy(), scene.copies.len(), v)
        };
        let dim = components.first().map_or(3, |c| match c {
            Component::Ball { center, .. } => center.len(),
            Component::Rod { .. } => 3,
        });
        let q = union_q(&cfg.q, dim)?;
        if cfg.scene.is_some() && q != UnionQ::Ball {
            return Err(config_err("scene inputs support Q = the unit ball only"));
        }
        if components.is_empty() {
            return Err(config_err("input has no components"));
        }
        let (report, mut parts) = union_outer_content(&components, &q, &sched, uopts)?;
        let report = if copies > 1 {
            for p in &mut parts {
                p.excess *= copies as f64;
            }
            let samples = parts
                .iter()
                .map(|p| Sample {
                    r: p.r,
                    excess: p.excess,
                    f: p.excess / p.r,
                })
                .collect();
            ConvergenceReport::from_samples(samples, cfg.trend)
        } else {
            report
        };
        (report, None, volume, Some(parts))
    };
    out.add("report.csv", report.to_csv().into_bytes());
    out.json(
        "report.json",
        &EstimateOut {
            command,
            config: &cfg,
            grid,
            input_volume: volume,
            report: &report,
            union: parts.as_deref(),
        },
    )?;
    Ok(out)
}

/// Exact (or quadrature) surface measure of a shape.
fn surface_measure(cfg: &PerimeterConfig) -> CliResult<DiscreteSurfaceMeasure> {
    let shape = &cfg.shape;
    shape.validate()?;
    let round = |center: &[f64], radius: f64| -> CliResult<DiscreteSurfaceMeasure> {
        Ok(if center.len() == 2 {
            DiscreteSurfaceMeasure::circle(radius, cfg.circle_nodes)?
        } else {
            DiscreteSurfaceMeasure::sphere(radius, cfg.quadrature_level)?
        })
    };
    match shape {
        Shape::Polygon { vertices } => Ok(DiscreteSurfaceMeasure::polygon(vertices)?),
        Shape::Box { min, max } if min.len() == 2 => Ok(DiscreteSurfaceMeasure::polygon(&[
            [min[0], min[1]],
            [max[0], min[1]],
            [max[0], max[1]],
            [min[0], max[1]],
        ])?),
        Shape::Box { min, max } => {
            let tris: Vec<_> = unit_cube()
                .into_iter()
                .map(|t| t.map(|p| [0, 1, 2].map(|k| min[k] + p[k] * (max[k] - min[k]))))
                .collect();
            Ok(DiscreteSurfaceMeasure::mesh(&tris))
        }
        Shape::Mesh { triangles } => Ok(DiscreteSurfaceMeasure::mesh(triangles)),
        Shape::Ball { center, radius } => round(center, *radius),
        Shape::Balls { centers, radii } => {
            let parts = centers
                .iter()
                .zip(radii)
                .map(|(c, r)| round(c, *r))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(DiscreteSurfaceMeasure::disjoint_union(&parts)?)
        }
        Shape::Shell { .. } | Shape::Polyline { .. } | Shape::Extrude { .. } => Err(config_err(
            "perimeter supports polygon, box, mesh, ball and balls shapes",
        )),
    }
}

#[derive(Serialize)]
struct PerimeterOut<'a> {
    config: &'a PerimeterConfig,
    #[serde(rename = "P_Q")]
    p_q: f64,
    #[serde(rename = "P_symmetral")]
    p_symmetral: f64,
    #[serde(rename = "P_iso")]
    p_iso: f64,
    measure: minkowski_content::surface::MeasureSummary,
}

pub fn perimeter(cfg: PerimeterConfig) -> CliResult<Outputs> {
    let s = surface_measure(&cfg)?;
    if cfg.q.ambient_dim() != s.dim {
        return Err(config_err(format!("shape is {}D but Q lives in R^{}", s.dim, cfg.q.ambient_dim())));
    }
    let p_q = s.anisotropic_perimeter(&cfg.q)?;
    let p_symmetral = s.anisotropic_perimeter(&cfg.q.symmetral().into_body())?;
    let p_iso = s.anisotropic_perimeter(&StructuringElement::unit_ball(s.dim))?;
    let mut out = Outputs::default();
    out.json(
        "perimeter.json",
        &PerimeterOut {
            config: &cfg,
            p_q,
            p_symmetral,
            p_iso,
            measure: s.summary(),
        },
    )?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Packing2,
    Packing3,
    Example1,
    Example2,
}

#[derive(Serialize)]
struct GenerateOut<'a> {
    kind: Kind,
    config: &'a GenerateConfig,
    predicted_count: f64,
    summary: PackingSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    example1: Option<Example1Numbers>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scene_min_gap: Option<f64>,
}

#[derive(Serialize)]
struct Example1Numbers {
    c_perimeter: f64,
    d_volume: f64,
    /// `P(C)·λ(D)`.
    slope: f64,
}

fn check_factor(c: &PlanarFactor) -> CliResult<()> {
    let size = match c {
        PlanarFactor::Disk { radius } => *radius,
        PlanarFactor::Square { side } => *side,
    };
    if !(size > 0.0 && size.is_finite()) {
        return Err(config_err(format!("factor size must be positive, got {size}")));
    }
    Ok(())
}

pub fn generate(kind: Kind, mut cfg: GenerateConfig) -> CliResult<Outputs> {
    let dim = if kind == Kind::Packing3 { 3 } else { 2 };
    let law = *cfg.law.get_or_insert(DeltaLaw::Power { k: dim as f64 + 1.0 });
    law.validate(dim)?;
    if !(cfg.count_cap >= 1.0) || !(cfg.max_count >= 1.0) {
        return Err(config_err("count_cap and max_count must be ≥ 1"));
    }
    if cfg.max_rejections == 0 || cfg.bands == 0 || cfg.summary_points < 2 {
        return Err(config_err("need max_rejections ≥ 1, bands ≥ 1 and summary_points ≥ 2"));
    }
    let t_min = *cfg.t_min.get_or_insert_with(|| tune_t_min(dim, law, cfg.count_cap));
    if !(t_min > 0.0 && t_min.is_finite()) {
        return Err(config_err(format!("t_min must be positive, got {t_min}")));
    }
    if kind == Kind::Example1 {
        let c = cfg.factor.get_or_insert(PlanarFactor::Square { side: 1.0 }).clone();
        check_factor(&c)?;
        let probe = BallPacking {
            dim: cfg.n.saturating_sub(cfg.k),
            law,
            t_min: 1.0,
            seed: 0,
            atoms: Vec::new(),
            audit: None,
        };
        Example1::new(cfg.k, cfg.n, c, probe)?;
    } else if cfg.factor.is_some() {
        return Err(config_err("factor applies to example1 only"));
    }
    let predicted = if t_min >= 1.0 { 0.0 } else { predicted_count(dim, law, t_min) };
    let mut params = PackingParams::new(dim, law, t_min, cfg.seed);
    params.max_rejections = cfg.max_rejections;
    params.audit_probes = cfg.audit_probes;
    params.bands = cfg.bands;
    params.max_count = cfg.max_count;
    let packing = gen_packing(&params)?;
    let summary = packing_summary(&packing, &t_grid(t_min, cfg.summary_points));

    let mut out = Outputs::default();
    let (mut example1, mut scene_min_gap) = (None, None);
    match kind {
        Kind::Packing2 | Kind::Packing3 => out.json_compact("packing.json", &packing)?,
        Kind::Example1 => {
            let c = cfg.factor.clone().expect("set above");
            let ex = Example1::new(cfg.k, cfg.n, c, packing)?;
            example1 = Some(Example1Numbers {
                c_perimeter: ex.c.perimeter(),
                d_volume: ex.d_volume(),
                slope: ex.slope(),
            });
            out.json_compact("example1.json", &ex)?;
        }
        Kind::Example2 => {
            let scene = gen_example2(packing)?;
            scene_min_gap = Some(scene.min_gap());
            out.json_compact("scene.json", &scene)?;
        }
    }
    out.json(
        "summary.json",
        &GenerateOut {
            kind,
            config: &cfg,
            predicted_count: predicted,
            summary,
            example1,
            scene_min_gap,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct AfpOut<'a> {
    config: &'a AfpConfig,
    atoms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a AfpReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    isotropic: Option<&'a IsoAfpDiagnostic>,
}

pub fn afp(cfg: AfpConfig, config_path: Option<&Path>) -> CliResult<Outputs> {
    if cfg.points == 0 || cfg.iso_points < 2 {
        return Err(config_err("need points ≥ 1 and iso_points ≥ 2"));
    }
    let p = load_packing(&relative_to(config_path, &cfg.packing))?;
    if p.atoms.is_empty() {
        return Err(config_err("packing is empty: no boundary to sample"));
    }
    let mut out = Outputs::default();
    if cfg.isotropic {
        let diag = isotropic_afp_diagnostic(&p, cfg.iso_points)?;
        let mut csv = String::from("a_norm,r,nu,ratio\n");
        for q in &diag.points {
            csv.push_str(&format!("{:e},{:e},{:e},{:e}\n", q.a_norm, q.r, q.nu, q.ratio));
        }
        out.add("iso_afp.csv", csv.into_bytes());
        out.json(
            "iso_afp.json",
            &AfpOut {
                config: &cfg,
                atoms: p.atoms.len(),
                report: None,
                isotropic: Some(&diag),
            },
        )?;
    } else {
        let samples = stratified_afp_samples(&p, cfg.points, cfg.seed);
        let report = afp_check(&p, &cfg.basis, &samples)?;
        let mut csv = String::from("a0,a1,a2,r,nu,proj,ratio\n");
        for s in &report.samples {
            csv.push_str(&format!(
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                s.a[0], s.a[1], s.a[2], s.r, s.nu, s.proj, s.ratio
            ));
        }
        out.add("afp_samples.csv", csv.into_bytes());
        out.json(
            "afp.json",
            &AfpOut {
                config: &cfg,
                atoms: p.atoms.len(),
                report: Some(&report),
                isotropic: None,
            },
        )?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CovariogramOut<'a> {
    config: &'a CovariogramConfig,
    grid: GridHeader,
    /// `g_A(0) = λ_n(A)`.
    g0: f64,
    /// Outer `[0,u]`-content, `lim (g(0) − g(tu))/t`.
    outer: f64,
    /// One-sided derivative of `t ↦ g_A(tu)` at 0.
    slope: f64,
    rms: f64,
}

pub fn covariogram(mut cfg: CovariogramConfig) -> CliResult<Outputs> {
    let h = cfg.grid.h;
    let bbox = resolve_bbox(&cfg.shape, &cfg.grid, None)?;
    if cfg.u.len() != cfg.shape.dim() {
        return Err(config_err(format!("u must have {} coordinates", cfg.shape.dim())));
    }
    if !cfg.u.iter().all(|x| x.is_finite()) || cfg.u.iter().all(|x| *x == 0.0) {
        return Err(config_err("u must be a finite nonzero vector"));
    }
    let steps = cfg
        .steps
        .get_or_insert_with(|| (1..=8).map(|i| i as f64 * h).collect())
        .clone();
    if steps.is_empty() || steps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(config_err("steps must be a nonempty list of positive numbers"));
    }
    cfg.grid.bbox = Some(bbox.clone());
    let a = rasterize(&cfg.shape, &bbox.min, &bbox.max, h)?;
    let d = covariogram_derivative(&a, &cfg.u, &steps)?;
    let g0 = a.volume();
    let mut csv = format!("t,g\n{:e},{:e}\n", 0.0, g0);
    for (t, g) in &d.samples {
        csv.push_str(&format!("{t:e},{g:e}\n"));
    }
    let mut out = Outputs::default();
    out.add("covariogram.csv", csv.into_bytes());
    out.json(
        "covariogram.json",
        &CovariogramOut {
            config: &cfg,
            grid: a.header(),
            g0,
            outer: d.outer,
            slope: d.slope,
            rms: d.rms,
        },
    )?;
    Ok(out)
}
