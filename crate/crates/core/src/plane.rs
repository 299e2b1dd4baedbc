//! Totally geodesic planes as affine 2-planes in an ambient chart.
//!
//! Every plane family in this crate is affine in its ambient coordinates:
//! translates `gF` of a flat subgroup are affine in exponential coordinates,
//! and the warped planes `E_α` are linear planes through the `t`-axis in
//! Cartesian coordinates. A [`PlaneChart`] records the embedding
//! `(u, v) ↦ origin + u d1 + v d2` and which intrinsic metric the chart
//! carries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default incidence tolerance for "x lies on Σ" (ambient chart distance).
pub const PLANE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneGeometry {
    /// Chart `(u, v)` is Euclidean.
    Flat,
    /// Chart `(u, v)` carries `du² + e^{2u} dv²`, curvature −1.
    Hyperbolic,
}

impl PlaneGeometry {
    pub fn curvature(self) -> f64 {
        match self {
            PlaneGeometry::Flat => 0.0,
            PlaneGeometry::Hyperbolic => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneChart {
    label: String,
    origin: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    geometry: PlaneGeometry,
    /// Inverse of the 2×2 Gram matrix of (d1, d2).
    gram_inv: [[f64; 2]; 2],
}

impl PlaneChart {
    pub fn new(
        label: impl Into<String>,
        origin: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
        geometry: PlaneGeometry,
    ) -> Result<Self> {
        let n = origin.len();
        if d1.len() != n || d2.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d1.len().max(d2.len()) });
        }
        let g11 = dot(&d1, &d1);
        let g12 = dot(&d1, &d2);
        let g22 = dot(&d2, &d2);
        let det = g11 * g22 - g12 * g12;
        if det <= 1e-24 * g11 * g22 || g11 == 0.0 || g22 == 0.0 {
            return Err(Error::DegenerateSpan);
        }
        let gram_inv = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]];
        Ok(PlaneChart { label: label.into(), origin, d1, d2, geometry, gram_inv })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn geometry(&self) -> PlaneGeometry {
        self.geometry
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn directions(&self) -> (&[f64], &[f64]) {
        (&self.d1, &self.d2)
    }

    pub fn embed(&self, u: f64, v: f64) -> Vec<f64> {
        self.origin
            .iter()
            .zip(self.d1.iter().zip(&self.d2))
            .map(|(o, (a, b))| o + u * a + v * b)
            .collect()
    }

    /// Chart coordinates of the closest point of the plane (in the ambient
    /// Euclidean chart metric) and the ambient distance to it.
    pub fn project(&self, x: &[f64]) -> ([f64; 2], f64) {
        let rel: Vec<f64> = x.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        let b1 = dot(&self.d1, &rel);
        let b2 = dot(&self.d2, &rel);
        let u = self.gram_inv[0][0] * b1 + self.gram_inv[0][1] * b2;
        let v = self.gram_inv[1][0] * b1 + self.gram_inv[1][1] * b2;
        let dist2: f64 = rel
            .iter()
            .zip(self.d1.iter().zip(&self.d2))
            .map(|(r, (a, b))| {
                let d = r - u * a - v * b;
                d * d
            })
            .sum();
        ([u, v], dist2.sqrt())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.project(x).1 <= tol
    }

    /// Distance measured in the plane's own metric.
    pub fn intrinsic_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self.geometry {
            PlaneGeometry::Flat => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            PlaneGeometry::Hyperbolic => {
                let (x1, y1) = chart_to_half_plane(a);
                let (x2, y2) = chart_to_half_plane(b);
                let arg = 1.0 + ((x1 - x2).powi(2) + (y1 - y2).powi(2)) / (2.0 * y1 * y2);
                arg.max(1.0).acosh()
            }
        }
    }

    /// Coordinates in which geodesics of the plane are straight lines:
    /// the chart itself when flat, the Klein disk when hyperbolic.
    pub fn to_straight_model(&self, p: [f64; 2]) -> [f64; 2] {
        match self.geometry {
            PlaneGeometry::Flat => p,
            PlaneGeometry::Hyperbolic => chart_to_klein(p),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(u, v) ↦ (x, y) = (v, e^{-u})` in the upper half-plane.
pub fn chart_to_half_plane(p: [f64; 2]) -> (f64, f64) {
    (p[1], (-p[0]).exp())
}

pub fn half_plane_to_chart(x: f64, y: f64) -> [f64; 2] {
    [-y.ln(), x]
}

/// Hyperbolic chart → Klein disk, through the Cayley map to the Poincaré
/// disk `w = (z − i)/(z + i)` and then `k = 2w / (1 + |w|²)`.
pub fn chart_to_klein(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = chart_to_half_plane(p);
    // (z - i)/(z + i) with z = x + iy
    let den = x * x + (y + 1.0) * (y + 1.0);
    let wr = (x * x + y * y - 1.0) / den;
    let wi = -2.0 * x / den;
    let s = 2.0 / (1.0 + wr * wr + wi * wi);
    [s * wr, s * wi]
}

pub fn klein_to_chart(k: [f64; 2]) -> [f64; 2] {
    let r2 = k[0] * k[0] + k[1] * k[1];
    let f = 1.0 / (1.0 + (1.0 - r2).max(0.0).sqrt());
    let (wr, wi) = (k[0] * f, k[1] * f);
    // z = i (1 + w)/(1 - w)
    let den = (1.0 - wr).powi(2) + wi * wi;
    let x = -2.0 * wi / den;
    let y = (1.0 - wr * wr - wi * wi) / den;
    half_plane_to_chart(x, y)
}

/// Hyperbolic distance between two points of the Klein disk.
pub fn klein_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let num = 1.0 - a[0] * b[0] - a[1] * b[1];
    let den = ((1.0 - a[0] * a[0] - a[1] * a[1]) * (1.0 - b[0] * b[0] - b[1] * b[1])).sqrt();
    (num / den).max(1.0).acosh()
}
