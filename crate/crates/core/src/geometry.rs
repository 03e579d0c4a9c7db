//! Candidate embedding geometries: distances, analytic gradients, and
//! domain projections behind one pluggable interface.
//!
//! Three geometries are supported:
//! - Euclidean: d(u, v) = ||u - v||
//! - Cosine dissimilarity: d(u, v) = 1 - cos(u, v), range [0, 2]
//! - Poincare ball: d(u, v) = arcosh(1 + 2||u - v||^2 / ((1 - ||u||^2)(1 - ||v||^2)))
//!
//! Cosine is a dissimilarity, not a metric; it is excluded from triangle
//! inequality guarantees. Poincare points must stay strictly inside the unit
//! ball; `ball_epsilon` keeps the conformal factors bounded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Euclidean,
    Cosine,
    Poincare,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 3] =
        [GeometryKind::Euclidean, GeometryKind::Cosine, GeometryKind::Poincare];

    pub fn as_str(&self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Cosine => "cosine",
            GeometryKind::Poincare => "poincare",
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(GeometryKind::Euclidean),
            "cosine" => Ok(GeometryKind::Cosine),
            "poincare" => Ok(GeometryKind::Poincare),
            other => Err(Error::InvalidGeometry(format!("unknown geometry '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub dim: usize,
    /// Poincare only: points are kept at squared norm <= (1 - ball_epsilon)^2.
    pub ball_epsilon: f64,
}

/// Ambient gradients of the distance with respect to both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGradient {
    pub wrt_u: Vec<f64>,
    pub wrt_v: Vec<f64>,
    /// Set when the distance is not differentiable at the pair (coincident
    /// points); both gradients are then the zero subgradient.
    pub subgradient: bool,
}

impl Geometry {
    pub const DEFAULT_DIM: usize = 5;
    pub const DEFAULT_BALL_EPSILON: f64 = 1e-5;
    /// Below this norm a cosine point counts as the zero vector.
    const TINY_NORM: f64 = 1e-12;

    pub fn new(kind: GeometryKind, dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGeometry("dim must be >= 1".into()));
        }
        Ok(Self { kind, dim, ball_epsilon: Self::DEFAULT_BALL_EPSILON })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::Euclidean, dim)
    }

    pub fn cosine(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::Cosine, dim)
    }

    pub fn poincare(dim: usize) -> Result<Self> {
        Self::new(GeometryKind::Poincare, dim)
    }

    pub fn with_ball_epsilon(mut self, ball_epsilon: f64) -> Result<Self> {
        if !(ball_epsilon > 0.0 && ball_epsilon < 0.1) {
            return Err(Error::InvalidGeometry(format!(
                "ball_epsilon must lie in (0, 0.1), got {ball_epsilon}"
            )));
        }
        self.ball_epsilon = ball_epsilon;
        Ok(self)
    }

    /// Enforce the point invariants: finite coordinates of the right length,
    /// strictly inside the shrunk ball for Poincare, non-zero for cosine.
    pub fn validate_point(&self, p: &[f64]) -> Result<()> {
        self.check_coords(p)?;
        match self.kind {
            GeometryKind::Euclidean => Ok(()),
            GeometryKind::Cosine => {
                if norm_sq(p) == 0.0 {
                    Err(Error::DomainViolation("zero vector has no direction".into()))
                } else {
                    Ok(())
                }
            }
            GeometryKind::Poincare => {
                let max = 1.0 - self.ball_epsilon;
                if norm_sq(p) > max * max {
                    Err(Error::DomainViolation(format!(
                        "point norm {} exceeds ball radius {max}",
                        norm_sq(p).sqrt()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn check_coords(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: p.len() });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::DomainViolation("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_coords(u)?;
        self.check_coords(v)?;
        match self.kind {
            GeometryKind::Euclidean => Ok(dist_sq(u, v).sqrt()),
            GeometryKind::Cosine => {
                let (uh, vh) = self.unit_pair(u, v)?;
                // 1 - cos via ||u^ - v^||^2 / 2: exact 0 at coincidence.
                Ok(dist_sq(&uh, &vh) / 2.0)
            }
            GeometryKind::Poincare => {
                let (alpha, beta) = self.ball_factors(u, v)?;
                let t = 2.0 * dist_sq(u, v) / (alpha * beta);
                // arcosh(1 + t), written to stay accurate for small t
                Ok((t + (t * (t + 2.0)).sqrt()).ln_1p())
            }
        }
    }

    /// Analytic ambient gradients of `distance`. Coincident points in the
    /// Euclidean and Poincare geometries yield the zero subgradient with a
    /// flag instead of an error.
    pub fn distance_gradient(&self, u: &[f64], v: &[f64]) -> Result<DistanceGradient> {
        self.check_coords(u)?;
        self.check_coords(v)?;
        match self.kind {
            GeometryKind::Euclidean => {
                let d = dist_sq(u, v).sqrt();
                if d == 0.0 {
                    return Ok(DistanceGradient::zero(self.dim));
                }
                let wrt_u: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b) / d).collect();
                let wrt_v: Vec<f64> = wrt_u.iter().map(|g| -g).collect();
                Ok(DistanceGradient { wrt_u, wrt_v, subgradient: false })
            }
            GeometryKind::Cosine => {
                let (uh, vh) = self.unit_pair(u, v)?;
                let cos = dot(&uh, &vh).clamp(-1.0, 1.0);
                let nu = norm_sq(u).sqrt();
                let nv = norm_sq(v).sqrt();
                let wrt_u: Vec<f64> = uh.iter().zip(&vh).map(|(a, b)| (cos * a - b) / nu).collect();
                let wrt_v: Vec<f64> = vh.iter().zip(&uh).map(|(a, b)| (cos * a - b) / nv).collect();
                Ok(DistanceGradient { wrt_u, wrt_v, subgradient: false })
            }
            GeometryKind::Poincare => {
                let (alpha, beta) = self.ball_factors(u, v)?;
                let diff_sq = dist_sq(u, v);
                let t = 2.0 * diff_sq / (alpha * beta);
                let s = (t * (t + 2.0)).sqrt();
                if s == 0.0 {
                    return Ok(DistanceGradient::zero(self.dim));
                }
                let uv = dot(u, v);
                let u_sq = norm_sq(u);
                let v_sq = norm_sq(v);
                let wrt_u = poincare_grad(u, v, v_sq, uv, alpha, beta, s);
                let wrt_v = poincare_grad(v, u, u_sq, uv, beta, alpha, s);
                Ok(DistanceGradient { wrt_u, wrt_v, subgradient: false })
            }
        }
    }

    /// Pull a point back into the geometry's domain. Euclidean is the
    /// identity; a (near-)zero cosine point becomes the first basis vector;
    /// a Poincare point outside the shrunk ball is radially rescaled onto it.
    pub fn project_to_domain(&self, p: &[f64]) -> Vec<f64> {
        let mut out = p.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, p: &mut [f64]) {
        match self.kind {
            GeometryKind::Euclidean => {}
            GeometryKind::Cosine => {
                if norm_sq(p).sqrt() < Self::TINY_NORM {
                    p.fill(0.0);
                    p[0] = 1.0;
                }
            }
            GeometryKind::Poincare => {
                let max = 1.0 - self.ball_epsilon;
                let norm = norm_sq(p).sqrt();
                if norm > max {
                    let scale = max / norm;
                    for c in p.iter_mut() {
                        *c *= scale;
                    }
                }
            }
        }
    }

    fn unit_pair(&self, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let nu = norm_sq(u).sqrt();
        let nv = norm_sq(v).sqrt();
        if nu == 0.0 || nv == 0.0 {
            return Err(Error::DomainViolation(
                "cosine distance undefined for the zero vector".into(),
            ));
        }
        let uh = u.iter().map(|c| c / nu).collect();
        let vh = v.iter().map(|c| c / nv).collect();
        Ok((uh, vh))
    }

    fn ball_factors(&self, u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
        let u_sq = norm_sq(u);
        let v_sq = norm_sq(v);
        if u_sq >= 1.0 || v_sq >= 1.0 {
            return Err(Error::DomainViolation(format!(
                "point on or outside the unit ball (norms {}, {})",
                u_sq.sqrt(),
                v_sq.sqrt()
            )));
        }
        Ok((1.0 - u_sq, 1.0 - v_sq))
    }
}

impl DistanceGradient {
    fn zero(dim: usize) -> Self {
        Self { wrt_u: vec![0.0; dim], wrt_v: vec![0.0; dim], subgradient: true }
    }
}

/// Gradient of the Poincare distance with respect to its first argument:
/// (4 / (beta * s)) * ((||v||^2 - 2<u,v> + 1) / alpha^2 * u - v / alpha)
/// with s = sqrt((1 + t)^2 - 1).
fn poincare_grad(
    u: &[f64],
    v: &[f64],
    v_sq: f64,
    uv: f64,
    alpha: f64,
    beta: f64,
    s: f64,
) -> Vec<f64> {
    let cu = (v_sq - 2.0 * uv + 1.0) / (alpha * alpha);
    let cv = 1.0 / alpha;
    let scale = 4.0 / (beta * s);
    u.iter().zip(v).map(|(a, b)| scale * (cu * a - cv * b)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
