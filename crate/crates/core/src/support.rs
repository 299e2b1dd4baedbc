//! Convex hulls in flat and hyperbolic planes and the support set
//!
//! ```text
//! K̂ = ⋂_{Σ ∈ P} ((M ∖ Σ) ∪ conv_Σ(K ∩ Σ))
//! ```
//!
//! over a sampled plane family. Hyperbolic hulls are taken in the Klein
//! model, where geodesics are chords, so one monotone-chain routine serves
//! both geometries.
//!
//! Compact sets are described analytically (balls, boxes, finite point sets
//! and unions) so that their slices `K ∩ Σ` are 2-dimensional regions rather
//! than measure-zero samples.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{dot, klein_distance, PlaneChart, PlaneGeometry, PLANE_TOL};

/// Half-plane membership tolerance for hull tests.
pub const HULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanarGeometry {
    Flat,
    /// Points are Klein-disk coordinates of a hyperbolic plane.
    Klein,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSet {
    pub points: Vec<[f64; 2]>,
    pub geometry: PlanarGeometry,
}

impl PlanarSet {
    pub fn flat(points: Vec<[f64; 2]>) -> Self {
        PlanarSet { points, geometry: PlanarGeometry::Flat }
    }

    pub fn klein(points: Vec<[f64; 2]>) -> Self {
        PlanarSet { points, geometry: PlanarGeometry::Klein }
    }

    pub fn diameter(&self) -> f64 {
        point_diameter(&self.points, self.geometry)
    }
}

fn planar_distance(a: [f64; 2], b: [f64; 2], geometry: PlanarGeometry) -> f64 {
    match geometry {
        PlanarGeometry::Flat => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
        PlanarGeometry::Klein => klein_distance(a, b),
    }
}

fn point_diameter(points: &[[f64; 2]], geometry: PlanarGeometry) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(planar_distance(*a, *b, geometry));
        }
    }
    best
}

/// Counter-clockwise hull polygon (possibly degenerate: empty, a point or a
/// segment).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<[f64; 2]>,
    geometry: PlanarGeometry,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; collinear boundary points are dropped.
pub fn convex_hull(set: &PlanarSet) -> Result<ConvexHull> {
    if set.geometry == PlanarGeometry::Klein
        && set.points.iter().any(|p| p[0] * p[0] + p[1] * p[1] >= 1.0)
    {
        return Err(Error::InvalidArgument("Klein-model points must lie inside the unit disk".into()));
    }
    if set.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    let mut pts = set.points.clone();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(ConvexHull { vertices: pts, geometry: set.geometry });
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    Ok(ConvexHull { vertices: hull, geometry: set.geometry })
}

impl ConvexHull {
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn geometry(&self) -> PlanarGeometry {
        self.geometry
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.contains_with_tol(p, HULL_TOL)
    }

    pub fn contains_with_tol(&self, p: [f64; 2], tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => planar_distance(self.vertices[0], p, PlanarGeometry::Flat) <= tol,
            2 => segment_distance(self.vertices[0], self.vertices[1], p) <= tol,
            n => (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                cross(a, b, p) >= -tol * len
            }),
        }
    }

    /// Diameter in the hull's own geometry (attained at vertices).
    pub fn diameter(&self) -> f64 {
        point_diameter(&self.vertices, self.geometry)
    }

    pub fn as_set(&self) -> PlanarSet {
        PlanarSet { points: self.vertices.clone(), geometry: self.geometry }
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) };
    ((ap[0] - t * ab[0]).powi(2) + (ap[1] - t * ab[1]).powi(2)).sqrt()
}

/// A compact subset of the ambient chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompactSet {
    Empty,
    Points { points: Vec<Vec<f64>> },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Union { parts: Vec<CompactSet> },
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl CompactSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        CompactSet::Ball { center, radius }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            CompactSet::Empty => true,
            CompactSet::Points { points } => points.is_empty(),
            CompactSet::Ball { radius, .. } => *radius < 0.0,
            CompactSet::Box { lo, hi } => lo.iter().zip(hi).any(|(l, h)| l > h),
            CompactSet::Union { parts } => parts.iter().all(CompactSet::is_empty),
        }
    }

    /// Euclidean chart distance from `x` to the set (0 inside), `+∞` if empty.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            CompactSet::Empty => f64::INFINITY,
            CompactSet::Points { points } => {
                points.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min)
            }
            CompactSet::Ball { center, radius } => (dist(center, x) - radius).max(0.0),
            CompactSet::Box { lo, hi } => {
                if self.is_empty() {
                    return f64::INFINITY;
                }
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (l, h))| {
                        let d = if v < l { l - v } else if v > h { v - h } else { 0.0 };
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            CompactSet::Union { parts } => {
                parts.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Points that realize the extent of the set: centers for balls (paired
    /// with their radius), corners for boxes, the points themselves.
    fn extremal(&self, out: &mut Vec<(Vec<f64>, f64)>) {
        match self {
            CompactSet::Empty => {}
            CompactSet::Points { points } => out.extend(points.iter().map(|p| (p.clone(), 0.0))),
            CompactSet::Ball { center, radius } => {
                if *radius >= 0.0 {
                    out.push((center.clone(), *radius));
                }
            }
            CompactSet::Box { lo, hi } => {
                if self.is_empty() {
                    return;
                }
                let n = lo.len();
                for mask in 0..(1usize << n) {
                    let corner = (0..n).map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
                    out.push((corner, 0.0));
                }
            }
            CompactSet::Union { parts } => parts.iter().for_each(|p| p.extremal(out)),
        }
    }

    /// Exact Euclidean chart diameter.
    pub fn diameter(&self) -> f64 {
        let mut ext = Vec::new();
        self.extremal(&mut ext);
        let mut best: f64 = 0.0;
        for (i, (a, ra)) in ext.iter().enumerate() {
            best = best.max(2.0 * ra);
            for (b, rb) in &ext[i + 1..] {
                best = best.max(dist(a, b) + ra + rb);
            }
        }
        best
    }

    /// Largest chart norm of a point of the set.
    pub fn max_norm(&self) -> f64 {
        let mut ext = Vec::new();
        self.extremal(&mut ext);
        ext.iter()
            .map(|(p, r)| p.iter().map(|v| v * v).sum::<f64>().sqrt() + r)
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut ext = Vec::new();
        self.extremal(&mut ext);
        let (first, _) = ext.first()?;
        let n = first.len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for (p, r) in &ext {
            for i in 0..n {
                lo[i] = lo[i].min(p[i] - r);
                hi[i] = hi[i].max(p[i] + r);
            }
        }
        Some((lo, hi))
    }

    /// Conservative containment test `other ⊆ self`; `false` means "could not
    /// certify", not "certainly not contained".
    pub fn contains_set(&self, other: &CompactSet) -> bool {
        const TOL: f64 = 1e-12;
        match other {
            CompactSet::Empty => return true,
            CompactSet::Union { parts } => return parts.iter().all(|p| self.contains_set(p)),
            CompactSet::Points { points } => {
                return points.iter().all(|p| self.contains(p, TOL));
            }
            _ => {}
        }
        if other.is_empty() {
            return true;
        }
        match (self, other) {
            (CompactSet::Ball { center, radius }, CompactSet::Ball { center: c2, radius: r2 }) => {
                dist(center, c2) + r2 <= radius + TOL
            }
            (CompactSet::Ball { center, radius }, CompactSet::Box { .. }) => {
                let mut ext = Vec::new();
                other.extremal(&mut ext);
                ext.iter().all(|(p, _)| dist(center, p) <= radius + TOL)
            }
            (CompactSet::Box { lo, hi }, CompactSet::Ball { center, radius }) => center
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (l, h))| c - radius >= l - TOL && c + radius <= h + TOL),
            (CompactSet::Box { lo, hi }, CompactSet::Box { lo: l2, hi: h2 }) => lo
                .iter()
                .zip(hi)
                .zip(l2.iter().zip(h2))
                .all(|((l, h), (a, b))| a >= &(l - TOL) && b <= &(h + TOL)),
            (CompactSet::Union { parts }, _) => parts.iter().any(|p| p.contains_set(other)),
            _ => false,
        }
    }

    /// Chart coordinates of a planar region containing `K ∩ Σ` whose convex
    /// hull equals (up to sampling) the hull of the slice. Balls give a
    /// circumscribed `samples`-gon of the slice ellipse, boxes give the exact
    /// slice polygon, points within `PLANE_TOL` of Σ are kept as is.
    pub fn slice(&self, plane: &PlaneChart, samples: usize) -> Vec<[f64; 2]> {
        let mut out = Vec::new();
        self.slice_into(plane, samples.max(3), &mut out);
        out
    }

    fn slice_into(&self, plane: &PlaneChart, samples: usize, out: &mut Vec<[f64; 2]>) {
        match self {
            CompactSet::Empty => {}
            CompactSet::Points { points } => {
                for p in points {
                    let (uv, d) = plane.project(p);
                    if d <= PLANE_TOL {
                        out.push(uv);
                    }
                }
            }
            CompactSet::Ball { center, radius } => {
                slice_ball(plane, center, *radius, samples, out);
            }
            CompactSet::Box { lo, hi } => {
                if !self.is_empty() {
                    slice_box(plane, lo, hi, out);
                }
            }
            CompactSet::Union { parts } => {
                parts.iter().for_each(|p| p.slice_into(plane, samples, out));
            }
        }
    }
}

fn gram(plane: &PlaneChart) -> [[f64; 2]; 2] {
    let (d1, d2) = plane.directions();
    [[dot(d1, d1), dot(d1, d2)], [dot(d1, d2), dot(d2, d2)]]
}

fn slice_ball(plane: &PlaneChart, center: &[f64], radius: f64, samples: usize, out: &mut Vec<[f64; 2]>) {
    if radius < 0.0 {
        return;
    }
    let (w, d) = plane.project(center);
    let r2 = radius * radius - d * d;
    if r2 < 0.0 {
        return;
    }
    if r2 == 0.0 {
        out.push(w);
        return;
    }
    // slice: (q - w)^T G (q - w) <= r2; G = L L^T, q = w + sqrt(r2) L^{-T} e
    let g = gram(plane);
    let l11 = g[0][0].sqrt();
    let l21 = g[1][0] / l11;
    let l22 = (g[1][1] - l21 * l21).sqrt();
    let scale = r2.sqrt() / (std::f64::consts::PI / samples as f64).cos();
    for k in 0..samples {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let (c, s) = (scale * phi.cos(), scale * phi.sin());
        // solve L^T q = (c, s)
        let q2 = s / l22;
        let q1 = (c - l21 * q2) / l11;
        out.push([w[0] + q1, w[1] + q2]);
    }
}

fn slice_box(plane: &PlaneChart, lo: &[f64], hi: &[f64], out: &mut Vec<[f64; 2]>) {
    let center: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let half_diag = 0.5 * dist(lo, hi);
    let (w, d) = plane.project(&center);
    if d > half_diag + PLANE_TOL {
        return;
    }
    let g = gram(plane);
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
    let lambda_min = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    let extent = 1.01 * half_diag / lambda_min.sqrt() + 1.0;
    let mut poly = vec![
        [w[0] - extent, w[1] - extent],
        [w[0] + extent, w[1] - extent],
        [w[0] + extent, w[1] + extent],
        [w[0] - extent, w[1] + extent],
    ];
    let origin = plane.origin();
    let (d1, d2) = plane.directions();
    for i in 0..lo.len() {
        // lo_i - o_i <= u d1_i + v d2_i <= hi_i - o_i
        let a = [d1[i], d2[i]];
        poly = clip(&poly, a, hi[i] - origin[i] + PLANE_TOL);
        poly = clip(&poly, [-a[0], -a[1]], -(lo[i] - origin[i]) + PLANE_TOL);
        if poly.is_empty() {
            return;
        }
    }
    out.extend(poly);
}

/// Sutherland-Hodgman clip of a convex polygon against `a·q <= b`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let inside = |q: [f64; 2]| a[0] * q[0] + a[1] * q[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (fp, fq) = (inside(p), inside(q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KhatOptions {
    /// Boundary samples per ball slice.
    pub slice_samples: usize,
    /// Ambient distance below which a point counts as lying on a plane.
    pub plane_tol: f64,
    /// Subdivisions per slice-polygon edge before mapping to the Klein disk.
    pub hyperbolic_edge_subdivisions: usize,
}

impl Default for KhatOptions {
    fn default() -> Self {
        KhatOptions { slice_samples: 128, plane_tol: PLANE_TOL, hyperbolic_edge_subdivisions: 16 }
    }
}

/// A sampled plane together with the hull of `K ∩ Σ` in its straight model.
#[derive(Debug, Clone)]
pub struct PlaneHull {
    pub plane: PlaneChart,
    pub hull: ConvexHull,
    /// Intrinsic diameter of the slice (0 for empty slices).
    pub slice_diameter: f64,
}

impl PlaneHull {
    pub fn build(k: &CompactSet, plane: &PlaneChart, opts: &KhatOptions) -> Result<Self> {
        let slice = k.slice(plane, opts.slice_samples);
        let slice_diameter = slice_diameter(plane, &slice);
        let (points, geometry) = match plane.geometry() {
            PlaneGeometry::Flat => (slice, PlanarGeometry::Flat),
            PlaneGeometry::Hyperbolic => {
                let dense = densify(&slice, opts.hyperbolic_edge_subdivisions);
                (dense.into_iter().map(|p| plane.to_straight_model(p)).collect(), PlanarGeometry::Klein)
            }
        };
        let hull = convex_hull(&PlanarSet { points, geometry })?;
        Ok(PlaneHull { plane: plane.clone(), hull, slice_diameter })
    }

    /// Whether chart point `uv` of this plane lies in `conv_Σ(K)`.
    pub fn hull_contains(&self, uv: [f64; 2]) -> bool {
        self.hull.contains(self.plane.to_straight_model(uv))
    }
}

fn slice_diameter(plane: &PlaneChart, pts: &[[f64; 2]]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max(plane.intrinsic_distance(*a, *b));
        }
    }
    best
}

/// Inserts `k - 1` points along each edge of the closed polygon `pts`
/// (treated as a cyclic vertex list when it has at least 3 points).
fn densify(pts: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    if pts.len() < 2 || k <= 1 {
        return pts.to_vec();
    }
    let n = pts.len();
    let mut out = Vec::with_capacity(n * k);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        for j in 0..k {
            let t = j as f64 / k as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Sampled support set over a finite plane family.
///
/// Points lying on no sampled plane are unconstrained, so the predicate is
/// an over-approximation of the true `K̂`; adding planes can only shrink it.
/// An empty `K` gives the empty set (the family is assumed to be a cover).
#[derive(Debug, Clone)]
pub struct KHat {
    planes: Vec<PlaneHull>,
    k_empty: bool,
    plane_tol: f64,
}

pub fn khat(k: &CompactSet, planes: &[PlaneChart]) -> Result<KHat> {
    khat_with(k, planes, &KhatOptions::default())
}

pub fn khat_with(k: &CompactSet, planes: &[PlaneChart], opts: &KhatOptions) -> Result<KHat> {
    if planes.is_empty() {
        return Err(Error::Empty("plane family"));
    }
    let built: Result<Vec<PlaneHull>> = planes.par_iter().map(|p| PlaneHull::build(k, p, opts)).collect();
    Ok(KHat { planes: built?, k_empty: k.is_empty(), plane_tol: opts.plane_tol })
}

impl KHat {
    pub fn planes(&self) -> &[PlaneHull] {
        &self.planes
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if self.k_empty {
            return false;
        }
        self.planes.iter().all(|ph| {
            let (uv, d) = ph.plane.project(x);
            d > self.plane_tol || ph.hull_contains(uv)
        })
    }

    /// Whether `x` lies on at least one sampled plane.
    pub fn constrained(&self, x: &[f64]) -> bool {
        self.planes.iter().any(|ph| ph.plane.contains(x, self.plane_tol))
    }

    /// Membership of each probe, evaluated in parallel.
    pub fn occupancy(&self, probes: &[Vec<f64>]) -> Vec<bool> {
        probes.par_iter().map(|p| self.contains(p)).collect()
    }

    /// Sampled `D_K`: largest intrinsic slice diameter over the planes.
    pub fn d_k(&self) -> f64 {
        self.planes.iter().map(|p| p.slice_diameter).fold(0.0, f64::max)
    }
}

/// Euclidean chart diameter of a point cloud.
pub fn cloud_diameter(points: &[Vec<f64>]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| dist(&points[i], q))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Plane-aligned probe points: for every plane, a square grid of chart
/// points centered at the projection of `center`, so every probe lies on at
/// least one sampled plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub spacing: f64,
}

impl ProbeGrid {
    pub fn probes(&self, planes: &[PlaneChart]) -> Vec<Vec<f64>> {
        let steps = (self.half_width / self.spacing).floor() as i64;
        let mut out = Vec::new();
        for plane in planes {
            let (w, _) = plane.project(&self.center);
            for i in -steps..=steps {
                for j in -steps..=steps {
                    out.push(plane.embed(w[0] + i as f64 * self.spacing, w[1] + j as f64 * self.spacing));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DkBound {
    pub d_k: f64,
    pub diam_k: f64,
    /// `2 D_K + diam K`.
    pub bound: f64,
    pub planes_meeting_k: usize,
}

/// `D_K = max_g diam^{gΣ}(K ∩ gΣ)` over the sampled translates and the
/// resulting bound on the diameter of `K̂`.
pub fn dk_bound(k: &CompactSet, planes: &[PlaneChart]) -> Result<DkBound> {
    if planes.is_empty() {
        return Err(Error::Empty("group sample"));
    }
    let opts = KhatOptions::default();
    let hulls: Result<Vec<PlaneHull>> = planes.par_iter().map(|p| PlaneHull::build(k, p, &opts)).collect();
    let hulls = hulls?;
    let d_k = hulls.iter().map(|h| h.slice_diameter).fold(0.0, f64::max);
    let planes_meeting_k = hulls.iter().filter(|h| !h.hull.is_empty()).count();
    let diam_k = if k.is_empty() { 0.0 } else { k.diameter() };
    Ok(DkBound { d_k, diam_k, bound: 2.0 * d_k + diam_k, planes_meeting_k })
}

/// Accepted probes and their diameter for one `K̂`.
pub fn measured_khat(khat: &KHat, probes: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let inside: Vec<Vec<f64>> = probes
        .iter()
        .zip(khat.occupancy(probes))
        .filter(|(_, ok)| *ok)
        .map(|(p, _)| p.clone())
        .collect();
    let d = cloud_diameter(&inside);
    (inside, d)
}

/// Measured diameters of `K̂_n` for a nested sequence `K_1 ⊇ K_2 ⊇ …`.
pub fn shrinking_check(seq: &[CompactSet], planes: &[PlaneChart], grid: &ProbeGrid) -> Result<Vec<f64>> {
    for i in 1..seq.len() {
        if !seq[i - 1].contains_set(&seq[i]) {
            return Err(Error::NotNested(i));
        }
    }
    let probes = grid.probes(planes);
    seq.iter()
        .map(|k| {
            let kh = khat(k, planes)?;
            Ok(measured_khat(&kh, &probes).1)
        })
        .collect()
}

/// Sorts by the first coordinate then the second; handy for comparing hulls.
pub fn sort_points(points: &mut [[f64; 2]]) {
    points.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap_or(Ordering::Equal).then(a[1].partial_cmp(&b[1]).unwrap_or(Ordering::Equal)));
}
