//! Structuring elements: compact convex bodies given by exact support functions.
//!
//! Every body lives in a fixed ambient dimension `n`. Redundant polytope vertices
//! are never pruned; support evaluation is a max over points and is unaffected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, gram_schmidt, norm, solve, sub};

/// Tolerance for the orthonormality of a subspace basis.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// A compact convex structuring element `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", try_from = "RawElement")]
pub enum StructuringElement {
    Singleton {
        point: Vec<f64>,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    #[serde(rename = "polytope")]
    PolytopeHull {
        vertices: Vec<Vec<f64>>,
    },
    /// `center + radius·(B^n ∩ span(basis))`.
    #[serde(rename = "ball")]
    BallInSubspace {
        center: Vec<f64>,
        radius: f64,
        basis: Vec<Vec<f64>>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RawElement {
    Singleton {
        point: Vec<f64>,
    },
    Segment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Polytope {
        vertices: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        basis: Option<Vec<Vec<f64>>>,
    },
}

impl TryFrom<RawElement> for StructuringElement {
    type Error = Error;

    fn try_from(raw: RawElement) -> Result<Self> {
        match raw {
            RawElement::Singleton { point } => Self::singleton(point),
            RawElement::Segment { a, b } => Self::segment(a, b),
            RawElement::Polytope { vertices } => Self::polytope(vertices),
            RawElement::Ball {
                center,
                radius,
                basis,
            } => match basis {
                Some(basis) => Self::ball_in_subspace(center, radius, basis),
                None => Self::ball(center, radius),
            },
        }
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} must be a nonempty finite vector")));
    }
    Ok(())
}

impl StructuringElement {
    pub fn singleton(point: Vec<f64>) -> Result<Self> {
        check_finite(&point, "point")?;
        Ok(Self::Singleton { point })
    }

    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_finite(&a, "segment endpoint")?;
        check_finite(&b, "segment endpoint")?;
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        Ok(Self::Segment { a, b })
    }

    /// The segment `[0, u]`.
    pub fn origin_segment(u: &[f64]) -> Result<Self> {
        Self::segment(vec![0.0; u.len()], u.to_vec())
    }

    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidInput("polytope needs at least one vertex".into()))?;
        let n = first.len();
        for v in &vertices {
            check_finite(v, "vertex")?;
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(Self::PolytopeHull { vertices })
    }

    /// Full-dimensional Euclidean ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        let basis = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Self::ball_in_subspace(center, radius, basis)
    }

    /// The unit ball `B^n` centred at the origin.
    pub fn unit_ball(n: usize) -> Self {
        Self::ball(vec![0.0; n], 1.0).expect("unit ball is valid")
    }

    /// `center + radius·(B^n ∩ L)` with `L = span(basis)`.
    ///
    /// The basis is re-orthonormalized; linearly dependent input is rejected.
    pub fn ball_in_subspace(center: Vec<f64>, radius: f64, basis: Vec<Vec<f64>>) -> Result<Self> {
        check_finite(&center, "center")?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("ball radius must be nonnegative, got {radius}")));
        }
        let n = center.len();
        if basis.len() > n {
            return Err(Error::InvalidInput(format!(
                "subspace basis has {} vectors in dimension {n}",
                basis.len()
            )));
        }
        for b in &basis {
            check_finite(b, "basis vector")?;
            if b.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.len(),
                });
            }
        }
        let ortho = gram_schmidt(&basis, 1e-9);
        if ortho.len() != basis.len() {
            return Err(Error::InvalidInput("subspace basis is linearly dependent".into()));
        }
        Ok(Self::BallInSubspace {
            center,
            radius,
            basis: ortho,
        })
    }

    /// The unit disk `B^n ∩ span(u, w)` centred at the origin.
    pub fn unit_disk(u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = u.len();
        Self::ball_in_subspace(vec![0.0; n], 1.0, vec![u, w])
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Singleton { point } => point.len(),
            Self::Segment { a, .. } => a.len(),
            Self::PolytopeHull { vertices } => vertices[0].len(),
            Self::BallInSubspace { center, .. } => center.len(),
        }
    }

    /// `h_Q(v) = max_{x∈Q} ⟨x, v⟩`.
    pub fn support(&self, v: &[f64]) -> f64 {
        match self {
            Self::Singleton { point } => dot(point, v),
            Self::Segment { a, b } => dot(a, v).max(dot(b, v)),
            Self::PolytopeHull { vertices } => vertices
                .iter()
                .map(|x| dot(x, v))
                .fold(f64::NEG_INFINITY, f64::max),
            Self::BallInSubspace {
                center,
                radius,
                basis,
            } => {
                let proj: f64 = basis.iter().map(|b| dot(b, v).powi(2)).sum();
                dot(center, v) + radius * proj.sqrt()
            }
        }
    }

    /// `h(Q ∪ {0}, v) = max(0, h_Q(v))`.
    pub fn support_star(&self, v: &[f64]) -> f64 {
        self.support(v).max(0.0)
    }

    pub fn symmetral(&self) -> SymmetricBody {
        let n = self.ambient_dim();
        let body = match self {
            Self::Singleton { .. } => Self::Singleton {
                point: vec![0.0; n],
            },
            Self::Segment { a, b } => {
                let half: Vec<f64> = b.iter().zip(a).map(|(x, y)| 0.5 * (x - y)).collect();
                Self::Segment {
                    a: half.iter().map(|x| -x).collect(),
                    b: half,
                }
            }
            Self::PolytopeHull { vertices } => {
                let mut out = Vec::with_capacity(vertices.len() * vertices.len());
                for vi in vertices {
                    for vj in vertices {
                        out.push(vi.iter().zip(vj).map(|(x, y)| 0.5 * (x - y)).collect());
                    }
                }
                Self::PolytopeHull { vertices: out }
            }
            Self::BallInSubspace { radius, basis, .. } => Self::BallInSubspace {
                center: vec![0.0; n],
                radius: *radius,
                basis: basis.clone(),
            },
        };
        SymmetricBody(body)
    }

    /// `rQ`; `0·Q = {0}`.
    pub fn scale(&self, r: f64) -> Result<Self> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::NegativeScale(r));
        }
        if r == 0.0 {
            return Ok(Self::Singleton {
                point: vec![0.0; self.ambient_dim()],
            });
        }
        let s = |v: &Vec<f64>| v.iter().map(|x| x * r).collect::<Vec<f64>>();
        Ok(match self {
            Self::Singleton { point } => Self::Singleton { point: s(point) },
            Self::Segment { a, b } => Self::Segment { a: s(a), b: s(b) },
            Self::PolytopeHull { vertices } => Self::PolytopeHull {
                vertices: vertices.iter().map(s).collect(),
            },
            Self::BallInSubspace {
                center,
                radius,
                basis,
            } => Self::BallInSubspace {
                center: s(center),
                radius: radius * r,
                basis: basis.clone(),
            },
        })
    }

    /// `−Q`, the reflection through the origin.
    pub fn reflect(&self) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| -x).collect::<Vec<f64>>();
        match self {
            Self::Singleton { point } => Self::Singleton { point: s(point) },
            Self::Segment { a, b } => Self::Segment { a: s(a), b: s(b) },
            Self::PolytopeHull { vertices } => Self::PolytopeHull {
                vertices: vertices.iter().map(s).collect(),
            },
            Self::BallInSubspace {
                center,
                radius,
                basis,
            } => Self::BallInSubspace {
                center: s(center),
                radius: *radius,
                basis: basis.clone(),
            },
        }
    }

    pub fn translate(&self, t: &[f64]) -> Result<Self> {
        let n = self.ambient_dim();
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.len(),
            });
        }
        let s = |v: &Vec<f64>| v.iter().zip(t).map(|(x, y)| x + y).collect::<Vec<f64>>();
        Ok(match self {
            Self::Singleton { point } => Self::Singleton { point: s(point) },
            Self::Segment { a, b } => Self::Segment { a: s(a), b: s(b) },
            Self::PolytopeHull { vertices } => Self::PolytopeHull {
                vertices: vertices.iter().map(s).collect(),
            },
            Self::BallInSubspace {
                center,
                radius,
                basis,
            } => Self::BallInSubspace {
                center: s(center),
                radius: *radius,
                basis: basis.clone(),
            },
        })
    }

    /// Points whose convex hull is `Q`, if `Q` is a polytope (singletons and
    /// segments included).
    pub fn hull_points(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Self::Singleton { point } => Some(vec![point.clone()]),
            Self::Segment { a, b } => Some(vec![a.clone(), b.clone()]),
            Self::PolytopeHull { vertices } => Some(vertices.clone()),
            Self::BallInSubspace { center, radius, basis } => {
                (*radius == 0.0 || basis.is_empty()).then(|| vec![center.clone()])
            }
        }
    }

    /// Minkowski sum of two polytopes as the list of all pairwise vertex sums.
    pub fn minkowski_sum_hull(&self, other: &Self) -> Result<Self> {
        let (Some(p1), Some(p2)) = (self.hull_points(), other.hull_points()) else {
            return Err(Error::Unsupported(
                "vertex-level Minkowski sums need polytopal operands".into(),
            ));
        };
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found: other.ambient_dim(),
            });
        }
        let mut vertices = Vec::with_capacity(p1.len() * p2.len());
        for a in &p1 {
            for b in &p2 {
                vertices.push(a.iter().zip(b).map(|(x, y)| x + y).collect());
            }
        }
        Ok(Self::PolytopeHull { vertices })
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            Self::BallInSubspace { radius, basis, .. } => {
                if basis.is_empty() {
                    0.0
                } else {
                    2.0 * radius
                }
            }
            _ => {
                let pts = self.hull_points().expect("polytopal variant");
                let mut d: f64 = 0.0;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        d = d.max(norm(&sub(a, b)));
                    }
                }
                d
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.ambient_dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            hi[i] = self.support(&e);
            e[i] = -1.0;
            lo[i] = -self.support(&e);
        }
        (lo, hi)
    }

    /// Whether the origin lies in `Q` (to a small absolute tolerance).
    pub fn contains_origin(&self) -> bool {
        let (along, across) = PreparedBody::new(self).decompose(&vec![0.0; self.ambient_dim()]);
        along <= 1e-12 && across <= 1e-12
    }

    /// Dimension of the affine hull of `Q`.
    pub fn affine_dim(&self) -> usize {
        PreparedBody::new(self).span_dim()
    }
}

/// An origin-symmetric body, as produced by [`StructuringElement::symmetral`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetricBody(StructuringElement);

impl SymmetricBody {
    pub fn body(&self) -> &StructuringElement {
        &self.0
    }

    pub fn into_body(self) -> StructuringElement {
        self.0
    }

    pub fn support(&self, v: &[f64]) -> f64 {
        self.0.support(v)
    }
}

/// A body with its affine frame precomputed, for repeated point queries.
///
/// `decompose(p)` splits the distance from `p` to `Q` into the component inside
/// the affine hull of `Q` (`along`) and the component orthogonal to it (`across`);
/// `dist(p, Q)² = along² + across²`.
#[derive(Clone, Debug)]
pub struct PreparedBody {
    anchor: Vec<f64>,
    frame: Vec<Vec<f64>>,
    shape: PreparedShape,
}

#[derive(Clone, Debug)]
enum PreparedShape {
    Point,
    /// Interval `[0, len]` along the single frame direction.
    Interval(f64),
    /// Ball of the given radius in frame coordinates, centred at the anchor.
    Ball(f64),
    /// Hull of points given in frame coordinates.
    Hull(Vec<Vec<f64>>),
}

impl PreparedBody {
    pub fn new(q: &StructuringElement) -> Self {
        match q {
            StructuringElement::Singleton { point } => Self {
                anchor: point.clone(),
                frame: vec![],
                shape: PreparedShape::Point,
            },
            StructuringElement::Segment { a, b } => {
                let d = sub(b, a);
                let len = norm(&d);
                if len <= 1e-300 {
                    return Self {
                        anchor: a.clone(),
                        frame: vec![],
                        shape: PreparedShape::Point,
                    };
                }
                Self {
                    anchor: a.clone(),
                    frame: vec![d.iter().map(|x| x / len).collect()],
                    shape: PreparedShape::Interval(len),
                }
            }
            StructuringElement::BallInSubspace {
                center,
                radius,
                basis,
            } => {
                if *radius == 0.0 || basis.is_empty() {
                    return Self {
                        anchor: center.clone(),
                        frame: vec![],
                        shape: PreparedShape::Point,
                    };
                }
                Self {
                    anchor: center.clone(),
                    frame: basis.clone(),
                    shape: PreparedShape::Ball(*radius),
                }
            }
            StructuringElement::PolytopeHull { vertices } => {
                let anchor = vertices[0].clone();
                let diffs: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v, &anchor)).collect();
                let frame = gram_schmidt(&diffs, 1e-10);
                if frame.is_empty() {
                    return Self {
                        anchor,
                        frame,
                        shape: PreparedShape::Point,
                    };
                }
                let coords = diffs
                    .iter()
                    .map(|d| frame.iter().map(|b| dot(d, b)).collect())
                    .collect();
                Self {
                    anchor,
                    frame,
                    shape: PreparedShape::Hull(coords),
                }
            }
        }
    }

    pub fn span_dim(&self) -> usize {
        self.frame.len()
    }

    pub fn decompose(&self, p: &[f64]) -> (f64, f64) {
        let d = sub(p, &self.anchor);
        let coords: Vec<f64> = self.frame.iter().map(|b| dot(&d, b)).collect();
        let in_span_sq: f64 = coords.iter().map(|c| c * c).sum();
        let across = (dot(&d, &d) - in_span_sq).max(0.0).sqrt();
        let along = match &self.shape {
            PreparedShape::Point => 0.0,
            PreparedShape::Interval(len) => {
                let t = coords[0];
                (-t).max(t - len).max(0.0)
            }
            PreparedShape::Ball(radius) => (in_span_sq.sqrt() - radius).max(0.0),
            PreparedShape::Hull(points) => hull_distance(&coords, points),
        };
        (along, across)
    }
}

/// Euclidean distance from `p` to the convex hull of `points`.
///
/// Gilbert's algorithm with a brute-force affine subproblem over the subsets of
/// the current simplex (at most `dim + 1` points).
pub fn hull_distance(p: &[f64], points: &[Vec<f64>]) -> f64 {
    let w: Vec<Vec<f64>> = points.iter().map(|v| sub(v, p)).collect();
    let scale = w.iter().map(|x| norm(x)).fold(0.0, f64::max).max(1e-300);
    let start = (0..w.len())
        .min_by(|&i, &j| dot(&w[i], &w[i]).total_cmp(&dot(&w[j], &w[j])))
        .expect("nonempty point set");
    let mut simplex = vec![start];
    let mut x = w[start].clone();
    for _ in 0..64 {
        let xx = dot(&x, &x);
        if xx <= (1e-14 * scale).powi(2) {
            return 0.0;
        }
        let s = (0..w.len())
            .min_by(|&i, &j| dot(&w[i], &x).total_cmp(&dot(&w[j], &x)))
            .expect("nonempty point set");
        if xx - dot(&w[s], &x) <= 1e-12 * scale * scale || simplex.contains(&s) {
            break;
        }
        simplex.push(s);
        let (nx, ns) = min_norm_on_simplex(&w, &simplex);
        x = nx;
        simplex = ns;
    }
    norm(&x)
}

fn min_norm_on_simplex(w: &[Vec<f64>], simplex: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let m = simplex.len();
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    for mask in 1u32..(1 << m) {
        let subset: Vec<usize> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| simplex[i])
            .collect();
        let Some(lambda) = affine_min_norm(w, &subset) else {
            continue;
        };
        if lambda.iter().any(|&l| l < -1e-12) {
            continue;
        }
        let n = w[0].len();
        let mut point = vec![0.0; n];
        for (l, &i) in lambda.iter().zip(&subset) {
            for (pk, wk) in point.iter_mut().zip(&w[i]) {
                *pk += l * wk;
            }
        }
        let nn = dot(&point, &point);
        if best.as_ref().map_or(true, |b| nn < b.0) {
            let keep = subset
                .iter()
                .zip(&lambda)
                .filter(|(_, &l)| l > 1e-12)
                .map(|(&i, _)| i)
                .collect::<Vec<_>>();
            best = Some((nn, point, if keep.is_empty() { subset } else { keep }));
        }
    }
    let (_, point, subset) = best.expect("single vertices are always feasible");
    (point, subset)
}

/// Barycentric coordinates of the min-norm point of the affine hull of `w[subset]`.
fn affine_min_norm(w: &[Vec<f64>], subset: &[usize]) -> Option<Vec<f64>> {
    let m = subset.len();
    if m == 1 {
        return Some(vec![1.0]);
    }
    // minimize |Σ λ_i w_i|² subject to Σ λ_i = 1 (KKT system)
    let mut mat = vec![vec![0.0; m + 1]; m + 1];
    let mut rhs = vec![0.0; m + 1];
    for i in 0..m {
        for j in 0..m {
            mat[i][j] = dot(&w[subset[i]], &w[subset[j]]);
        }
        mat[i][m] = 1.0;
        mat[m][i] = 1.0;
    }
    rhs[m] = 1.0;
    let sol = solve(mat, rhs)?;
    Some(sol[..m].to_vec())
}
