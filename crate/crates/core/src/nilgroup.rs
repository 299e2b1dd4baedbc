//! 2-step nilpotent Lie groups in exponential coordinates.
//!
//! The group is identified with its Lie algebra through `Exp`, so a point is
//! a coordinate vector and the product is the truncated BCH formula
//! `p · q = p + q + ½[p, q]`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::LieAlgebra;
use crate::linalg;
use crate::ode::Rk4;
use crate::path::GeodesicPath;
use crate::plane::{PlaneChart, PlaneGeometry};
use crate::support::{khat_with, CompactSet, KHat, KhatOptions};

/// Relative energy drift accepted by [`geodesic_flow`].
pub const ENERGY_TOL: f64 = 1e-8;

const TWO_STEP_TOL: f64 = 1e-12;
const MAX_REFINEMENTS: usize = 12;

/// A 2-step nilpotent metric Lie group.
#[derive(Debug, Clone)]
pub struct TwoStepGroup {
    algebra: LieAlgebra,
    ip: Vec<f64>,
    ip_inv: Vec<f64>,
    identity_ip: bool,
}

impl TwoStepGroup {
    pub fn new(algebra: LieAlgebra) -> Result<Self> {
        let residual = algebra.two_step_residual();
        if residual > TWO_STEP_TOL {
            return Err(Error::NotTwoStep { residual });
        }
        let n = algebra.dim();
        let g = algebra.inner_product().clone();
        let inv = g.clone().try_inverse().ok_or_else(|| Error::InvalidAlgebra("singular inner product".into()))?;
        let identity_ip = g == DMatrix::identity(n, n);
        Ok(TwoStepGroup {
            ip: row_major(&g),
            ip_inv: row_major(&inv),
            identity_ip,
            algebra,
        })
    }

    pub fn heisenberg() -> Self {
        TwoStepGroup::new(LieAlgebra::heisenberg()).expect("Heisenberg algebra is 2-step")
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        Ok(())
    }

    pub fn bracket(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.algebra.bracket_into(p, q, &mut out);
        out
    }

    pub fn product(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        self.check(q)?;
        let b = self.bracket(p, q);
        Ok(p.iter().zip(q).zip(&b).map(|((a, c), d)| a + c + 0.5 * d).collect())
    }

    pub fn inverse(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|v| -v).collect()
    }

    /// `⟨a, b⟩` in the left-invariant metric.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.identity_ip {
            return a.iter().zip(b).map(|(x, y)| x * y).sum();
        }
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[i] * self.ip[i * n + j] * b[j];
            }
        }
        s
    }

    /// Right-hand side of the geodesic system for the state `(p, V)`:
    /// `ṗ = V + ½[p, V]` and `⟨V̇, w⟩ = ⟨V, [V, w]⟩`.
    fn rhs(&self, y: &[f64], dy: &mut [f64], scratch: &mut Scratch) {
        let n = self.dim();
        let (p, v) = y.split_at(n);
        let (dp, dv) = dy.split_at_mut(n);
        self.algebra.bracket_into(p, v, &mut scratch.b);
        for k in 0..n {
            dp[k] = v[k] + 0.5 * scratch.b[k];
        }
        // covector u = G V, then b_w = Σ_i V_i Σ_k c[i][w][k] u_k
        for i in 0..n {
            scratch.u[i] = if self.identity_ip {
                v[i]
            } else {
                (0..n).map(|j| self.ip[i * n + j] * v[j]).sum()
            };
        }
        for w in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                if v[i] == 0.0 {
                    continue;
                }
                let base = (i * n + w) * n;
                let mut t = 0.0;
                for k in 0..n {
                    t += self.algebra.structure_constant_flat(base + k) * scratch.u[k];
                }
                s += v[i] * t;
            }
            scratch.c[w] = s;
        }
        for w in 0..n {
            dv[w] = if self.identity_ip {
                scratch.c[w]
            } else {
                (0..n).map(|j| self.ip_inv[w * n + j] * scratch.c[j]).sum()
            };
        }
    }
}

struct Scratch {
    b: Vec<f64>,
    u: Vec<f64>,
    c: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { b: vec![0.0; n], u: vec![0.0; n], c: vec![0.0; n] }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n * n).map(|k| m[(k / n, k % n)]).collect()
}

/// `p · q` in exponential coordinates.
pub fn bch_product(algebra: &LieAlgebra, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    TwoStepGroup::new(algebra.clone())?.product(p, q)
}

/// Closed-form Heisenberg geodesic `γ_{x,α}^z`: the path
/// `t ↦ (x, t, x t / 2 + z)` rotated by `α` about the central axis.
/// Unit speed; the domain defaults to `[-100, 100]`.
pub fn heisenberg_geodesic(x: f64, alpha: f64, z: f64) -> GeodesicPath {
    let (s, c) = alpha.sin_cos();
    GeodesicPath::closed_form(3, (-100.0, 100.0), 1.0, move |t| {
        vec![x * c - t * s, x * s + t * c, 0.5 * x * t + z]
    })
    .with_velocity(move |_| vec![-s, c, 0.5 * x])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub energy_tol: f64,
    pub max_refinements: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { energy_tol: ENERGY_TOL, max_refinements: MAX_REFINEMENTS }
    }
}

/// Result of integrating one geodesic, with its measured energy drift.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub path: GeodesicPath,
    pub step: f64,
    pub energy_drift: f64,
}

/// Integrates the left-invariant geodesic with `p(0) = p0`, `V(0) = v0` on
/// `[-T, T]` by RK4, halving `step` until the relative energy drift is at
/// most [`ENERGY_TOL`].
pub fn geodesic_flow(group: &TwoStepGroup, p0: &[f64], v0: &[f64], horizon: f64, step: f64) -> Result<GeodesicPath> {
    Ok(geodesic_flow_with(group, p0, v0, horizon, step, &FlowOptions::default())?.path)
}

pub fn geodesic_flow_with(
    group: &TwoStepGroup,
    p0: &[f64],
    v0: &[f64],
    horizon: f64,
    step: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    group.check(p0)?;
    group.check(v0)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let e0 = group.inner(v0, v0);
    if !(e0 > 0.0) {
        return Err(Error::InvalidArgument("initial velocity must be nonzero".into()));
    }
    let mut h = step;
    let mut last_drift = f64::INFINITY;
    for _ in 0..=opts.max_refinements {
        let (fwd, d1) = sweep(group, p0, v0, horizon, h, e0);
        let (bwd, d2) = sweep(group, p0, v0, horizon, -h, e0);
        let drift = d1.max(d2);
        if drift <= opts.energy_tol {
            let n = group.dim();
            let mut times = Vec::with_capacity(fwd.times.len() + bwd.times.len());
            let mut points = Vec::new();
            let mut vels = Vec::new();
            for k in (1..bwd.times.len()).rev() {
                times.push(bwd.times[k]);
                points.extend_from_slice(&bwd.points[k * n..(k + 1) * n]);
                vels.extend_from_slice(&bwd.vels[k * n..(k + 1) * n]);
            }
            times.extend_from_slice(&fwd.times);
            points.extend_from_slice(&fwd.points);
            vels.extend_from_slice(&fwd.vels);
            let path = GeodesicPath::from_samples(n, times, points, vels, e0.sqrt());
            return Ok(FlowResult { path, step: h, energy_drift: drift });
        }
        last_drift = drift;
        h *= 0.5;
    }
    Err(Error::Integration(format!(
        "energy drift {last_drift:e} above {:e} after {} refinements",
        opts.energy_tol, opts.max_refinements
    )))
}

struct Samples {
    times: Vec<f64>,
    points: Vec<f64>,
    vels: Vec<f64>,
}

/// One-directional sweep to `±horizon`; returns samples and the max drift.
fn sweep(group: &TwoStepGroup, p0: &[f64], v0: &[f64], horizon: f64, h: f64, e0: f64) -> (Samples, f64) {
    let n = group.dim();
    let steps = (horizon / h.abs()).ceil() as usize;
    let h = h.signum() * horizon / steps as f64;
    let mut y: Vec<f64> = p0.iter().chain(v0).copied().collect();
    let mut dy = vec![0.0; 2 * n];
    let mut scratch = Scratch::new(n);
    let mut rk = Rk4::new(2 * n);
    let mut out = Samples {
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity((steps + 1) * n),
        vels: Vec::with_capacity((steps + 1) * n),
    };
    let mut drift: f64 = 0.0;
    let record = |t: f64, y: &[f64], dy: &mut [f64], scratch: &mut Scratch, out: &mut Samples| {
        group.rhs(y, dy, scratch);
        out.times.push(t);
        out.points.extend_from_slice(&y[..n]);
        out.vels.extend_from_slice(&dy[..n]);
    };
    record(0.0, &y, &mut dy, &mut scratch, &mut out);
    let mut scratch2 = Scratch::new(n);
    let mut f = |s: &[f64], d: &mut [f64]| group.rhs(s, d, &mut scratch2);
    for k in 1..=steps {
        rk.step(&mut f, &mut y, h);
        let e = group.inner(&y[n..], &y[n..]);
        drift = drift.max((e - e0).abs() / e0);
        record(k as f64 * h, &y, &mut dy, &mut scratch, &mut out);
    }
    (out, drift)
}

/// Gap `w − (u² + v²)/4` to the model paraboloid; `≤ 0` outside its interior.
pub fn paraboloid_gap(p: &[f64]) -> f64 {
    p[2] - 0.25 * (p[0] * p[0] + p[1] * p[1])
}

/// Parameter in `[a, b]` where the path touches the model paraboloid, found
/// as the zero of the derivative of [`paraboloid_gap`] by bisection.
pub fn paraboloid_contact(path: &GeodesicPath, a: f64, b: f64) -> Result<f64> {
    let slope = |t: f64| {
        let (p, v) = path.eval(t);
        v[2] - 0.5 * (p[0] * v[0] + p[1] * v[1])
    };
    let (mut lo, mut hi) = (a, b);
    let (mut slo, shi) = (slope(lo), slope(hi));
    if slo == 0.0 {
        return Ok(lo);
    }
    if shi == 0.0 {
        return Ok(hi);
    }
    if slo.signum() == shi.signum() {
        return Err(Error::InvalidArgument("no contact inside the bracket".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sm = slope(mid);
        if sm == 0.0 {
            return Ok(mid);
        }
        if sm.signum() == slo.signum() {
            lo = mid;
            slo = sm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeOptions {
    /// Time after which a sample that is still inside the ball is reported.
    pub horizon: f64,
    pub step: f64,
    /// Seed for the direction sample when the dimension is not 3.
    pub seed: u64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        EscapeOptions { horizon: 200.0, step: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeProfile {
    pub radius: f64,
    pub max_exit_time: f64,
    pub exit_times: Vec<f64>,
}

/// Deterministic unit directions: a Fibonacci sphere in dimension 3, seeded
/// Gaussian samples otherwise, each normalized in the group metric.
pub fn direction_grid(group: &TwoStepGroup, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = group.dim();
    let raw: Vec<Vec<f64>> = if n == 3 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..count)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                vec![r * phi.cos(), r * phi.sin(), z]
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    };
    raw.into_iter()
        .map(|v| {
            let s = group.inner(&v, &v).sqrt();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Max over sampled unit-speed geodesics from the identity of the first
/// time the chart norm reaches `radius`.
pub fn escape_profile(group: &TwoStepGroup, radius: f64, num_samples: usize, opts: &EscapeOptions) -> Result<EscapeProfile> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if num_samples == 0 {
        return Err(Error::Empty("direction sample"));
    }
    let dirs = direction_grid(group, num_samples, opts.seed);
    let times: Vec<Option<f64>> = dirs.par_iter().map(|v| exit_time(group, v, radius, opts)).collect();
    let mut exit_times = Vec::with_capacity(times.len());
    for t in times {
        exit_times.push(t.ok_or(Error::HorizonExceeded { radius, horizon: opts.horizon })?);
    }
    let max_exit_time = exit_times.iter().copied().fold(0.0, f64::max);
    Ok(EscapeProfile { radius, max_exit_time, exit_times })
}

fn exit_time(group: &TwoStepGroup, v0: &[f64], radius: f64, opts: &EscapeOptions) -> Option<f64> {
    let n = group.dim();
    let mut y: Vec<f64> = vec![0.0; n].into_iter().chain(v0.iter().copied()).collect();
    let mut scratch = Scratch::new(n);
    let mut rhs = |s: &[f64], d: &mut [f64]| group.rhs(s, d, &mut scratch);
    let mut rk = Rk4::new(2 * n);
    let norm = |y: &[f64]| y[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
    let steps = (opts.horizon / opts.step).ceil() as usize;
    let h = opts.horizon / steps as f64;
    let mut t = 0.0;
    for _ in 0..steps {
        let prev = y.clone();
        rk.step(&mut rhs, &mut y, h);
        if norm(&y) >= radius {
            let (mut lo, mut hi) = (0.0, h);
            let mut trial = prev.clone();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                trial.copy_from_slice(&prev);
                rk.step(&mut rhs, &mut trial, mid);
                if norm(&trial) >= radius {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(t + 0.5 * (lo + hi));
        }
        t += h;
    }
    None
}

/// Rotation of the first two coordinates by `angle` composed with a left
/// translation: `g(u) = translation · R(u)`. Rotations about the central
/// axis are automorphisms of the Heisenberg group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub angle: f64,
    pub translation: [f64; 3],
}

impl Frame {
    pub fn identity() -> Self {
        Frame { angle: 0.0, translation: [0.0; 3] }
    }

    pub fn apply(&self, u: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.angle.sin_cos();
        let r = [c * u[0] - s * u[1], s * u[0] + c * u[1], u[2]];
        heis_mul(self.translation, r)
    }

    pub fn pull_back(&self, y: [f64; 3]) -> [f64; 3] {
        let tau = self.translation;
        let q = heis_mul([-tau[0], -tau[1], -tau[2]], y);
        let (s, c) = self.angle.sin_cos();
        [c * q[0] + s * q[1], -s * q[0] + c * q[1], q[2]]
    }
}

fn heis_mul(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2] + 0.5 * (p[0] * q[1] - p[1] * q[0])]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `{w ≥ (u² + v²)/4 − h}`: the model paraboloid lowered by `h`.
    Up,
    /// `{w ≤ h − (u² + v²)/4}`: the reflected paraboloid raised by `h`.
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paraboloid {
    pub shift: f64,
    pub orientation: Orientation,
    pub frame: Frame,
}

impl Paraboloid {
    pub fn contains(&self, y: [f64; 3]) -> bool {
        let u = self.frame.pull_back(y);
        let q = 0.25 * (u[0] * u[0] + u[1] * u[1]);
        match self.orientation {
            Orientation::Up => u[2] >= q - self.shift - 1e-12,
            Orientation::Down => u[2] <= self.shift - q + 1e-12,
        }
    }
}

/// Frames from `rotations` equally spaced angles in `[0, 2π)` crossed with
/// the given translations (the identity translation is always included).
/// Rotations fix the model paraboloid, so only the translations change the
/// resulting sandwiches and `rotations = 1` is usually enough.
pub fn frame_grid(rotations: usize, translations: &[[f64; 3]]) -> Vec<Frame> {
    let mut ts: Vec<[f64; 3]> = vec![[0.0; 3]];
    ts.extend(translations.iter().filter(|t| **t != [0.0; 3]));
    let mut out = Vec::new();
    for t in &ts {
        for k in 0..rotations.max(1) {
            let angle = std::f64::consts::TAU * k as f64 / rotations.max(1) as f64;
            out.push(Frame { angle, translation: *t });
        }
    }
    out
}

/// Translations on a cubic lattice with the given spacing covering the
/// bounding box of `points` enlarged by `margin`.
pub fn translation_lattice(points: &[[f64; 3]], spacing: f64, margin: f64) -> Vec<[f64; 3]> {
    if points.is_empty() || !(spacing > 0.0) {
        return Vec::new();
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i] - margin);
            hi[i] = hi[i].max(p[i] + margin);
        }
    }
    let axis = |i: usize| -> Vec<f64> {
        let n = ((hi[i] - lo[i]) / spacing).floor() as usize;
        let start = 0.5 * (lo[i] + hi[i]) - 0.5 * n as f64 * spacing;
        (0..=n).map(|k| start + k as f64 * spacing).collect()
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                out.push([x, y, z]);
            }
        }
    }
    out
}

/// Intersection over frames of the tightest paraboloid sandwiches holding
/// `K`; always a superset of `K`.
#[derive(Debug, Clone, Serialize)]
pub struct ParaboloidKhat {
    pub frames: Vec<Frame>,
    pub h_minus: Vec<f64>,
    pub h_plus: Vec<f64>,
}

pub fn paraboloid_khat(k: &[[f64; 3]], frames: &[Frame]) -> Result<ParaboloidKhat> {
    if k.is_empty() {
        return Err(Error::Empty("point set K"));
    }
    if frames.is_empty() {
        return Err(Error::Empty("frame set"));
    }
    let (h_minus, h_plus): (Vec<f64>, Vec<f64>) = frames
        .par_iter()
        .map(|f| {
            let mut hm = f64::NEG_INFINITY;
            let mut hp = f64::NEG_INFINITY;
            for y in k {
                let u = f.pull_back(*y);
                let q = 0.25 * (u[0] * u[0] + u[1] * u[1]);
                hm = hm.max(q - u[2]);
                hp = hp.max(u[2] + q);
            }
            (hm, hp)
        })
        .unzip();
    Ok(ParaboloidKhat { frames: frames.to_vec(), h_minus, h_plus })
}

impl ParaboloidKhat {
    pub fn paraboloids(&self) -> Vec<(Paraboloid, Paraboloid)> {
        self.frames
            .iter()
            .zip(self.h_minus.iter().zip(&self.h_plus))
            .map(|(f, (hm, hp))| {
                (
                    Paraboloid { shift: *hm, orientation: Orientation::Up, frame: f.clone() },
                    Paraboloid { shift: *hp, orientation: Orientation::Down, frame: f.clone() },
                )
            })
            .collect()
    }

    pub fn contains(&self, y: [f64; 3]) -> bool {
        const TOL: f64 = 1e-12;
        self.frames.iter().zip(self.h_minus.iter().zip(&self.h_plus)).all(|(f, (hm, hp))| {
            let u = f.pull_back(y);
            let q = 0.25 * (u[0] * u[0] + u[1] * u[1]);
            u[2] >= q - hm - TOL && u[2] <= hp - q + TOL
        })
    }

    /// Chart bounding box: each sandwich is the affine image of the model
    /// box `|u|, |v| ≤ √(2(h₋ + h₊))`, `−h₋ ≤ w ≤ h₊`; boxes are intersected.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::NEG_INFINITY; 3];
        let mut hi = [f64::INFINITY; 3];
        for (f, (hm, hp)) in self.frames.iter().zip(self.h_minus.iter().zip(&self.h_plus)) {
            let rho = (2.0 * (hm + hp)).max(0.0).sqrt();
            let mut flo = [f64::INFINITY; 3];
            let mut fhi = [f64::NEG_INFINITY; 3];
            for mask in 0..8 {
                let corner = [
                    if mask & 1 == 0 { -rho } else { rho },
                    if mask & 2 == 0 { -rho } else { rho },
                    if mask & 4 == 0 { -hm } else { *hp },
                ];
                let y = f.apply(corner);
                for i in 0..3 {
                    flo[i] = flo[i].min(y[i]);
                    fhi[i] = fhi[i].max(y[i]);
                }
            }
            for i in 0..3 {
                lo[i] = lo[i].max(flo[i]);
                hi[i] = hi[i].min(fhi[i]);
            }
        }
        (lo, hi)
    }
}

/// The translate `g F` of `F = Exp(span{x, y})`, which in exponential
/// coordinates is the affine plane `g + r(x + ½[g,x]) + s(y + ½[g,y])`.
pub fn translated_plane(group: &TwoStepGroup, g: &[f64], x: &[f64], y: &[f64], label: impl Into<String>) -> Result<PlaneChart> {
    let gx = group.bracket(g, x);
    let gy = group.bracket(g, y);
    let d1 = x.iter().zip(&gx).map(|(a, b)| a + 0.5 * b).collect();
    let d2 = y.iter().zip(&gy).map(|(a, b)| a + 0.5 * b).collect();
    PlaneChart::new(label, g.to_vec(), d1, d2, PlaneGeometry::Flat)
}

/// Lattice of translations in the orthogonal complement of `span{x, y}`
/// covering the chart bounding box `[lo, hi]`.
pub fn complement_lattice(group: &TwoStepGroup, x: &[f64], y: &[f64], lo: &[f64], hi: &[f64], spacing: f64) -> Result<Vec<Vec<f64>>> {
    if !(spacing > 0.0) {
        return Err(Error::InvalidGrid(format!("lattice spacing must be positive, got {spacing}")));
    }
    let n = group.dim();
    let ip = group.algebra().inner_product();
    let pair = linalg::orthonormalize(ip, &[DVector::from_column_slice(x), DVector::from_column_slice(y)]);
    if pair.len() < 2 {
        return Err(Error::DegenerateSpan);
    }
    let residuals: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let e = linalg::unit(n, i);
            &e - linalg::project(ip, &pair, &e)
        })
        .collect();
    let comp = linalg::orthonormalize(ip, &residuals);
    // coefficient ranges of the box corners along each complement direction
    let mut ranges = Vec::with_capacity(comp.len());
    for c in &comp {
        let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
        for mask in 0..(1usize << n) {
            let corner = DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] });
            let v = linalg::inner(ip, c, &corner);
            a = a.min(v);
            b = b.max(v);
        }
        let m = ((b - a) / spacing).floor() as usize;
        let start = 0.5 * (a + b) - 0.5 * m as f64 * spacing;
        ranges.push((0..=m).map(|k| start + k as f64 * spacing).collect::<Vec<f64>>());
    }
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for (c, vals) in comp.iter().zip(&ranges) {
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for base in &out {
            for v in vals {
                next.push(base.iter().zip(c.iter()).map(|(b, ci)| b + v * ci).collect());
            }
        }
        out = next;
    }
    Ok(out)
}

/// Plane family `{g F}` for a certified commuting pair.
pub fn group_planes(group: &TwoStepGroup, pair: (&[f64], &[f64]), translations: &[Vec<f64>]) -> Result<Vec<PlaneChart>> {
    let ip = group.algebra().inner_product();
    let xy = linalg::orthonormalize(ip, &[DVector::from_column_slice(pair.0), DVector::from_column_slice(pair.1)]);
    if xy.len() < 2 {
        return Err(Error::DegenerateSpan);
    }
    let cert = group.algebra().certify_plane(&xy[0], &xy[1])?;
    if !cert.is_plane {
        return Err(Error::ConditionFails(format!(
            "pair does not span a flat: |[x,y]| = {:e}, |∇x x| = {:e}, |∇x y| = {:e}, |∇y y| = {:e}",
            cert.bracket_norm, cert.nabla_xx, cert.nabla_xy, cert.nabla_yy
        )));
    }
    let (x, y) = (xy[0].as_slice(), xy[1].as_slice());
    translations
        .iter()
        .enumerate()
        .map(|(i, g)| translated_plane(group, g, x, y, format!("gF[{i}]")))
        .collect()
}

/// `K̂` over the translates of the flat spanned by `pair`, sampled on a
/// complement lattice of the given spacing around `K`.
pub fn group_plane_khat(group: &TwoStepGroup, k: &CompactSet, pair: (&[f64], &[f64]), spacing: f64, margin: f64) -> Result<KHat> {
    let planes = group_plane_family(group, k, pair, spacing, margin)?;
    khat_with(k, &planes, &KhatOptions::default())
}

/// The plane family used by [`group_plane_khat`]. An empty `K` still gets a
/// single plane through the identity so the predicate is well defined.
pub fn group_plane_family(group: &TwoStepGroup, k: &CompactSet, pair: (&[f64], &[f64]), spacing: f64, margin: f64) -> Result<Vec<PlaneChart>> {
    let n = group.dim();
    let translations = match k.bounding_box() {
        Some((lo, hi)) => {
            let lo: Vec<f64> = lo.iter().map(|v| v - margin).collect();
            let hi: Vec<f64> = hi.iter().map(|v| v + margin).collect();
            complement_lattice(group, pair.0, pair.1, &lo, &hi, spacing)?
        }
        None => vec![vec![0.0; n]],
    };
    group_planes(group, pair, &translations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn heisenberg_product_formula() {
        let g = TwoStepGroup::heisenberg();
        assert_eq!(g.product(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), vec![1.0, 1.0, 0.5]);
        let (x, y, z, a, b, c) = (0.3, -1.2, 2.0, 0.7, 0.4, -0.9);
        let p = g.product(&[x, y, z], &[a, b, c]).unwrap();
        assert_eq!(p, vec![x + a, y + b, z + c + (x * b - y * a) / 2.0]);
        let q = [0.2, 5.0, -1.0];
        assert!(g.product(&q, &g.inverse(&q)).unwrap().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn three_step_algebra_is_rejected() {
        let l4 = crate::liealg::filiform(4).unwrap();
        assert!(matches!(TwoStepGroup::new(l4), Err(Error::NotTwoStep { .. })));
    }

    proptest! {
        #[test]
        fn bch_is_associative(p in prop::array::uniform4(-3.0..3.0f64), q in prop::array::uniform4(-3.0..3.0f64), r in prop::array::uniform4(-3.0..3.0f64)) {
            let g = TwoStepGroup::new(LieAlgebra::heisenberg_plus_line()).unwrap();
            let a = g.product(&g.product(&p, &q).unwrap(), &r).unwrap();
            let b = g.product(&p, &g.product(&q, &r).unwrap()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_geodesic_values() {
        let g = heisenberg_geodesic(1.0, 0.0, 0.0);
        assert_eq!(g.point(1.0), vec![1.0, 1.0, 0.5]);
        let y_axis = heisenberg_geodesic(0.0, 0.0, 0.0);
        assert_eq!(y_axis.point(2.5), vec![0.0, 2.5, 0.0]);
        // tangency (x - t)^2 = 0
        for &x in &[-2.0, 0.5, 3.0] {
            let gx = heisenberg_geodesic(x, 0.0, 0.0);
            assert!(paraboloid_gap(&gx.point(x)).abs() < 1e-14);
            for k in -20..=20 {
                assert!(paraboloid_gap(&gx.point(0.37 * k as f64)) <= 1e-14);
            }
        }
    }

    #[test]
    fn ode_matches_closed_form() {
        let g = TwoStepGroup::heisenberg();
        let x = 1.3;
        let path = geodesic_flow(&g, &[x, 0.0, 0.0], &[0.0, 1.0, 0.0], 10.0, 0.01).unwrap();
        let mut err: f64 = 0.0;
        for k in 0..=400 {
            let t = -10.0 + 0.05 * k as f64;
            let p = path.point(t);
            let q = [x, t, x * t / 2.0];
            for i in 0..3 {
                err = err.max((p[i] - q[i]).abs());
            }
        }
        assert!(err < 1e-9, "sup error {err}");
        let t = paraboloid_contact(&path, 0.0, 5.0).unwrap();
        assert!((t - x).abs() < 1e-6);
    }

    #[test]
    fn rotated_and_central_geodesics() {
        let g = TwoStepGroup::heisenberg();
        let closed = heisenberg_geodesic(0.8, 0.6, -0.4);
        let (p0, v0) = closed.eval(0.0);
        // V = ṗ − ½[p, ṗ] at t = 0
        let b = g.bracket(&p0, &v0);
        let v: Vec<f64> = v0.iter().zip(&b).map(|(a, c)| a - 0.5 * c).collect();
        let ode = geodesic_flow(&g, &p0, &v, 5.0, 0.01).unwrap();
        for k in -50..=50 {
            let t = 0.1 * k as f64;
            let (a, c) = (ode.point(t), closed.point(t));
            assert!(a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-9));
        }
        let up = geodesic_flow(&g, &[0.0; 3], &[0.0, 0.0, 1.0], 3.0, 0.01).unwrap();
        assert!((up.point(2.0)[2] - 2.0).abs() < 1e-12 && up.point(2.0)[0].abs() < 1e-12);
    }

    #[test]
    fn abelian_geodesics_are_lines_and_escape_at_radius() {
        let g = TwoStepGroup::new(LieAlgebra::abelian(3).unwrap()).unwrap();
        let path = geodesic_flow(&g, &[1.0, 2.0, 3.0], &[0.0, 0.6, 0.8], 4.0, 0.1).unwrap();
        let p = path.point(-2.5);
        assert!((p[1] - 0.5).abs() < 1e-12 && (p[2] - 1.0).abs() < 1e-12);
        let prof = escape_profile(&g, 1.5, 16, &EscapeOptions::default()).unwrap();
        assert!(prof.exit_times.iter().all(|t| (t - 1.5).abs() < 1e-9));
    }

    #[test]
    fn energy_and_left_invariance() {
        let g = TwoStepGroup::new(LieAlgebra::heisenberg_plus_line()).unwrap();
        let p0 = [0.1, -0.2, 0.3, 0.0];
        let v0 = [0.5, 0.3, 0.7, -0.4];
        let res = geodesic_flow_with(&g, &p0, &v0, 20.0, 0.02, &FlowOptions::default()).unwrap();
        assert!(res.energy_drift <= ENERGY_TOL);
        let q = [1.0, 0.5, -2.0, 0.3];
        let moved = geodesic_flow(&g, &g.product(&q, &p0).unwrap(), &v0, 5.0, 0.02).unwrap();
        for k in -10..=10 {
            let t = 0.5 * k as f64;
            let a = g.product(&q, &res.path.point(t)).unwrap();
            let b = moved.point(t);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-7));
        }
        assert!(geodesic_flow(&g, &p0, &v0, 1.0, 0.0).is_err());
        assert!(geodesic_flow(&g, &p0, &v0, -1.0, 0.1).is_err());
    }

    #[test]
    fn heisenberg_escape_is_monotone() {
        let g = TwoStepGroup::heisenberg();
        let opts = EscapeOptions::default();
        let a = escape_profile(&g, 1.0, 64, &opts).unwrap();
        let b = escape_profile(&g, 2.0, 64, &opts).unwrap();
        assert!(a.max_exit_time.is_finite() && a.max_exit_time <= b.max_exit_time);
        let short = EscapeOptions { horizon: 0.5, ..opts };
        assert!(matches!(escape_profile(&g, 1.0, 8, &short), Err(Error::HorizonExceeded { .. })));
    }

    #[test]
    fn paraboloid_sandwich_examples() {
        let id = [Frame::identity()];
        let one = paraboloid_khat(&[[0.0; 3]], &id).unwrap();
        assert_eq!((one.h_minus[0], one.h_plus[0]), (0.0, 0.0));
        let two = paraboloid_khat(&[[0.0; 3], [0.0, 0.0, 1.0]], &id).unwrap();
        assert_eq!((two.h_minus[0], two.h_plus[0]), (0.0, 1.0));
        assert!(paraboloid_khat(&[], &id).is_err());
        let f = Frame { angle: 0.7, translation: [0.3, -1.0, 2.0] };
        let u = [0.4, 0.1, -0.5];
        let back = f.pull_back(f.apply(u));
        assert!(u.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-14));
        let (lo, hi) = two.bounding_box();
        assert!(lo[2] <= 0.0 && hi[2] >= 1.0);
    }

    #[test]
    fn translated_planes_are_left_translates() {
        let g = TwoStepGroup::new(LieAlgebra::heisenberg_plus_line()).unwrap();
        let (x, y) = g.algebra().find_commuting_pair(1).unwrap();
        let h = [0.4, -0.7, 0.2, 1.1];
        let plane = translated_plane(&g, &h, x.as_slice(), y.as_slice(), "t").unwrap();
        let (r, s) = (0.3, -1.4);
        let w: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| r * a + s * b).collect();
        let expect = g.product(&h, &w).unwrap();
        let got = plane.embed(r, s);
        assert!(expect.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn group_plane_khat_basics() {
        let g = TwoStepGroup::new(LieAlgebra::heisenberg_plus_line()).unwrap();
        let (x, y) = g.algebra().find_commuting_pair(1).unwrap();
        let pair = (x.as_slice(), y.as_slice());
        let k = CompactSet::ball(vec![0.0; 4], 1.0);
        let kh = group_plane_khat(&g, &k, pair, 0.25, 0.0).unwrap();
        assert!(kh.contains(&[0.0, 0.0, 0.3, -0.2]));
        assert!(!kh.contains(&[0.0, 0.0, 1.5, 0.0]));
        let empty = group_plane_khat(&g, &CompactSet::Empty, pair, 0.25, 0.0).unwrap();
        assert!(!empty.contains(&[0.0; 4]));
        let h = TwoStepGroup::heisenberg();
        let e = [1.0, 0.0, 0.0];
        let f = [0.0, 1.0, 0.0];
        let k3 = CompactSet::ball(vec![0.0; 3], 1.0);
        assert!(matches!(group_plane_khat(&h, &k3, (&e, &f), 0.5, 0.0), Err(Error::ConditionFails(_))));
    }
}
