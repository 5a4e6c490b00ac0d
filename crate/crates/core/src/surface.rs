//! Discrete generalized surface area measures and exact anisotropic perimeters.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::convex::StructuringElement;
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, cross3, fibonacci_sphere, norm};

/// Relative closedness tolerance for exact polytopal measures.
pub const CLOSEDNESS_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub normal: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    ExactPolytopal,
    Quadrature,
}

/// A finite list of weighted unit normals standing in for `S*_{n-1}(A, ·)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSurfaceMeasure {
    pub dim: usize,
    pub kind: MeasureKind,
    pub atoms: Vec<Atom>,
    /// Set when clockwise polygon input was reversed.
    #[serde(default)]
    pub reversed_input: bool,
    /// Zero-area mesh triangles skipped at construction.
    #[serde(default)]
    pub dropped_degenerate: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureSummary {
    pub total_mass: f64,
    pub closedness_defect: f64,
    pub closed: bool,
    pub atoms: usize,
}

impl DiscreteSurfaceMeasure {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            kind: MeasureKind::ExactPolytopal,
            atoms: Vec::new(),
            reversed_input: false,
            dropped_degenerate: 0,
        }
    }

    /// One atom per edge of a simple polygon; clockwise input is reversed.
    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        let m = vertices.len();
        if m < 3 {
            return Err(Error::DegeneratePolygon(format!("{m} vertices")));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegeneratePolygon("non-finite vertex".into()));
        }
        let scale = vertices
            .iter()
            .flatten()
            .fold(0.0_f64, |a, x| a.max(x.abs()))
            .max(1e-300);
        for i in 0..m {
            let (p, q) = (vertices[i], vertices[(i + 1) % m]);
            if ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() <= 1e-14 * scale {
                return Err(Error::DegeneratePolygon(format!("zero-length edge at vertex {i}")));
            }
        }
        let area = signed_area(vertices);
        if area.abs() <= 1e-12 * scale * scale {
            return Err(Error::DegeneratePolygon("polygon has zero area".into()));
        }
        if self_intersects(vertices) {
            return Err(Error::DegeneratePolygon("polygon is self-intersecting".into()));
        }
        let mut verts = vertices.to_vec();
        let reversed = area < 0.0;
        if reversed {
            verts.reverse();
        }
        let atoms = (0..m)
            .map(|i| {
                let (p, q) = (verts[i], verts[(i + 1) % m]);
                let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                let len = dx.hypot(dy);
                Atom {
                    normal: vec![dy / len, -dx / len],
                    weight: len,
                }
            })
            .collect();
        Ok(Self {
            dim: 2,
            kind: MeasureKind::ExactPolytopal,
            atoms,
            reversed_input: reversed,
            dropped_degenerate: 0,
        })
    }

    /// One atom per oriented triangle; zero-area triangles are dropped and counted.
    pub fn mesh(triangles: &[[[f64; 3]; 3]]) -> Self {
        let mut atoms = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for [a, b, c] in triangles {
            let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = cross3(&e1, &e2);
            let len = norm(&n);
            let scale = norm(&e1) * norm(&e2);
            if !(len > 1e-14 * scale) || !len.is_finite() {
                dropped += 1;
                continue;
            }
            atoms.push(Atom {
                normal: n.iter().map(|x| x / len).collect(),
                weight: 0.5 * len,
            });
        }
        Self {
            dim: 3,
            kind: MeasureKind::ExactPolytopal,
            atoms,
            reversed_input: false,
            dropped_degenerate: dropped,
        }
    }

    /// Number of Fibonacci-net nodes used at a quadrature level.
    pub fn sphere_nodes(level: u32) -> usize {
        1000 << (2 * (level.clamp(1, 6) - 1))
    }

    /// Equal-weight Fibonacci quadrature for the sphere of radius `rho`, total
    /// mass exactly `4πρ²`. Level `l` uses `1000·4^(l−1)` nodes (capped at level 6).
    pub fn sphere(rho: f64, level: u32) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidInput(format!("sphere radius must be positive, got {rho}")));
        }
        if level == 0 {
            return Err(Error::InvalidInput("quadrature level must be positive".into()));
        }
        let nodes = fibonacci_sphere(Self::sphere_nodes(level));
        let w = 4.0 * std::f64::consts::PI * rho * rho / nodes.len() as f64;
        Ok(Self {
            dim: 3,
            kind: MeasureKind::Quadrature,
            atoms: nodes
                .into_iter()
                .map(|normal| Atom { normal, weight: w })
                .collect(),
            reversed_input: false,
            dropped_degenerate: 0,
        })
    }

    /// Measure of the boundary of the disk of radius `rho` in the plane: an
    /// equal-weight net of `count` normals with total mass `2πρ`.
    pub fn circle(rho: f64, count: usize) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) || count == 0 {
            return Err(Error::InvalidInput("circle needs positive radius and count".into()));
        }
        let w = 2.0 * std::f64::consts::PI * rho / count as f64;
        Ok(Self {
            dim: 2,
            kind: MeasureKind::Quadrature,
            atoms: crate::linalg::circle_net(count)
                .into_iter()
                .map(|normal| Atom { normal, weight: w })
                .collect(),
            reversed_input: false,
            dropped_degenerate: 0,
        })
    }

    /// Concatenation over (caller-asserted) disjoint pieces.
    pub fn disjoint_union(parts: &[Self]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Ok(Self::empty(0));
        };
        let dim = first.dim;
        let mut out = Self::empty(dim);
        out.kind = first.kind;
        for p in parts {
            if p.dim != dim && !p.atoms.is_empty() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim,
                });
            }
            if p.kind == MeasureKind::Quadrature {
                out.kind = MeasureKind::Quadrature;
            }
            out.atoms.extend(p.atoms.iter().cloned());
            out.dropped_degenerate += p.dropped_degenerate;
        }
        Ok(out)
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// `‖Σ wᵢ vᵢ‖`.
    pub fn closedness_defect(&self) -> f64 {
        let v: Vec<f64> = (0..self.dim)
            .map(|k| compensated_sum(self.atoms.iter().map(|a| a.weight * a.normal[k])))
            .collect();
        norm(&v)
    }

    pub fn is_closed(&self) -> bool {
        self.closedness_defect() <= CLOSEDNESS_TOL * self.total_mass()
    }

    /// `Σ wᵢ · h(Q ∪ {0}, vᵢ)`.
    pub fn anisotropic_perimeter(&self, q: &StructuringElement) -> Result<f64> {
        if self.atoms.is_empty() {
            return Ok(0.0);
        }
        if q.ambient_dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.ambient_dim(),
            });
        }
        Ok(compensated_sum(
            self.atoms.iter().map(|a| a.weight * q.support_star(&a.normal)),
        ))
    }

    /// Surface measure of the complement: every normal negated.
    pub fn reflect(&self) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            for x in &mut a.normal {
                *x = -*x;
            }
        }
        out
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary {
            total_mass: self.total_mass(),
            closedness_defect: self.closedness_defect(),
            closed: self.is_closed(),
            atoms: self.atoms.len(),
        }
    }

    /// CSV dump with columns `nx,ny[,nz],weight`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols = ["nx", "ny", "nz"];
        writeln!(w, "{},weight", cols[..self.dim.min(3)].join(","))?;
        for a in &self.atoms {
            for x in &a.normal {
                write!(w, "{x:e},")?;
            }
            writeln!(w, "{:e}", a.weight)?;
        }
        Ok(())
    }
}

pub fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let m = vertices.len();
    0.5 * compensated_sum((0..m).map(|i| {
        let (p, q) = (vertices[i], vertices[(i + 1) % m]);
        p[0] * q[1] - q[0] * p[1]
    }))
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_meet(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn self_intersects(v: &[[f64; 2]]) -> bool {
    let m = v.len();
    for i in 0..m {
        let (a, b) = (v[i], v[(i + 1) % m]);
        for j in i + 1..m {
            let adjacent = j == i + 1 || (i == 0 && j == m - 1);
            let (c, d) = (v[j], v[(j + 1) % m]);
            if adjacent {
                // adjacent edges may only share their common vertex: reject folds back
                let shared = if j == i + 1 { b } else { a };
                let (other_a, other_b) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(other_a, shared, other_b) == 0.0 {
                    let da = [other_a[0] - shared[0], other_a[1] - shared[1]];
                    let db = [other_b[0] - shared[0], other_b[1] - shared[1]];
                    if da[0] * db[0] + da[1] * db[1] > 0.0 {
                        return true;
                    }
                }
                continue;
            }
            if segments_meet(a, b, c, d) {
                return true;
            }
        }
    }
    false
}
