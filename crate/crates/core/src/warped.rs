//! Warped metrics on ℝ³ in cylindrical coordinates `(t, r, α)`:
//!
//! ```text
//! euclidean:  g = dt² + dr² + f(r,t)² dα²
//! hyperbolic: g = dt² + e^{2t} (dr² + f(r,t)² dα²)
//! ```
//!
//! Paths are reported in the Cartesian chart `(t, r cos α, r sin α)`, where
//! every plane `E_α` is the linear plane spanned by the `t`-axis and
//! `(cos α, sin α)`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Rk4;
use crate::path::GeodesicPath;
use crate::plane::{PlaneChart, PlaneGeometry};
use crate::support::{khat_with, CompactSet, KHat, KhatOptions};

pub const ENERGY_TOL: f64 = 1e-8;
/// Centered difference step for curvature from Christoffel symbols.
pub const CURVATURE_STEP: f64 = 1e-4;

const BLEND_START: f64 = 3.0 * PI / 4.0;
const BUMP_START: f64 = 2.0 * PI;
/// Switch into the axis chart below this radius, back out above the next.
const AXIS_ENTER: f64 = 0.3;
const AXIS_LEAVE: f64 = 0.5;
const MAX_REFINEMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Euclidean,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlendParams {
    /// Smoothstep class of the blend on `[3π/4, π]`: 1, 2 or 3.
    pub order: u8,
}

impl Default for BlendParams {
    fn default() -> Self {
        BlendParams { order: 2 }
    }
}

/// `f = 2 + r − π + σ(t) ψ(r − 2π)` for `r ≥ 2π`, `t > 0`, with
/// `σ(t) = amplitude τ³/(1 + τ³)`, `τ = t / t_scale`, and
/// `ψ(u) = v³/(1 + v²)`, `v = u / r_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BumpParams {
    pub amplitude: f64,
    pub t_scale: f64,
    pub r_scale: f64,
}

impl Default for BumpParams {
    fn default() -> Self {
        BumpParams { amplitude: 1.0, t_scale: 1.0, r_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpedConfig {
    pub variant: Variant,
    #[serde(default)]
    pub blend: BlendParams,
    #[serde(default)]
    pub bump: BumpParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub t: f64,
    pub r: f64,
    pub alpha: f64,
}

impl CylPoint {
    pub fn new(t: f64, r: f64, alpha: f64) -> Result<Self> {
        if !(r >= 0.0) || !t.is_finite() || !r.is_finite() || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid cylindrical point ({t}, {r}, {alpha})")));
        }
        Ok(CylPoint { t, r, alpha: alpha.rem_euclid(2.0 * PI) })
    }

    pub fn from_cartesian(p: [f64; 3]) -> Self {
        CylPoint { t: p[0], r: p[1].hypot(p[2]), alpha: p[2].atan2(p[1]).rem_euclid(2.0 * PI) }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        [self.t, self.r * self.alpha.cos(), self.r * self.alpha.sin()]
    }
}

pub type Christoffel = [[[f64; 3]; 3]; 3];
pub type Riemann = [[[[f64; 3]; 3]; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpedMetric {
    config: WarpedConfig,
}

impl WarpedMetric {
    pub fn new(config: WarpedConfig) -> Result<Self> {
        if !(1..=3).contains(&config.blend.order) {
            return Err(Error::InvalidArgument(format!("blend order must be 1, 2 or 3, got {}", config.blend.order)));
        }
        let b = config.bump;
        if !(b.amplitude > 0.0 && b.t_scale > 0.0 && b.r_scale > 0.0) {
            return Err(Error::InvalidArgument("bump amplitude and scales must be positive".into()));
        }
        Ok(WarpedMetric { config })
    }

    pub fn euclidean() -> Self {
        WarpedMetric { config: WarpedConfig { variant: Variant::Euclidean, blend: BlendParams::default(), bump: BumpParams::default() } }
    }

    pub fn hyperbolic() -> Self {
        WarpedMetric { config: WarpedConfig { variant: Variant::Hyperbolic, ..Self::euclidean().config } }
    }

    pub fn config(&self) -> &WarpedConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Profile `f(r, t)`.
    pub fn profile(&self, r: f64, t: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("profile needs r >= 0, got {r}")));
        }
        Ok(self.profile_derivs(r, t).0)
    }

    /// `(f, ∂f/∂r, ∂f/∂t)`.
    pub fn profile_derivs(&self, r: f64, t: f64) -> (f64, f64, f64) {
        if r <= BLEND_START {
            return (r.sin(), r.cos(), 0.0);
        }
        if r < PI {
            let w = PI - BLEND_START;
            let u = (r - BLEND_START) / w;
            let (chi, dchi) = smoothstep(self.config.blend.order, u);
            let (s, c) = r.sin_cos();
            let lin = 2.0 + r - PI;
            let f = (1.0 - chi) * s + chi * lin;
            let fr = (1.0 - chi) * c + chi + dchi / w * (lin - s);
            return (f, fr, 0.0);
        }
        let lin = 2.0 + r - PI;
        if r <= BUMP_START || t <= 0.0 {
            return (lin, 1.0, 0.0);
        }
        let b = self.config.bump;
        let tau = t / b.t_scale;
        let tau3 = tau * tau * tau;
        let sigma = b.amplitude * tau3 / (1.0 + tau3);
        let dsigma = b.amplitude * 3.0 * tau * tau / ((1.0 + tau3) * (1.0 + tau3)) / b.t_scale;
        let v = (r - BUMP_START) / b.r_scale;
        let v2 = v * v;
        let psi = v2 * v / (1.0 + v2);
        let dpsi = (3.0 * v2 + v2 * v2) / ((1.0 + v2) * (1.0 + v2)) / b.r_scale;
        (lin + sigma * psi, 1.0 + sigma * dpsi, dsigma * psi)
    }

    /// Conformal factor `E(t)` in front of `dr² + f² dα²` and `E'/E`.
    fn warp(&self, t: f64) -> (f64, f64) {
        match self.config.variant {
            Variant::Euclidean => (1.0, 0.0),
            Variant::Hyperbolic => ((2.0 * t).exp(), 2.0),
        }
    }

    /// Diagonal of the metric in `(t, r, α)` order.
    pub fn metric_tensor(&self, p: &CylPoint) -> Result<[[f64; 3]; 3]> {
        if p.r <= 0.0 {
            return Err(Error::AxisDegenerate);
        }
        let d = self.metric_diag(p.t, p.r);
        Ok([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    fn metric_diag(&self, t: f64, r: f64) -> [f64; 3] {
        let (f, _, _) = self.profile_derivs(r, t);
        let (e, _) = self.warp(t);
        [1.0, e, e * f * f]
    }

    pub fn christoffel(&self, p: &CylPoint) -> Result<Christoffel> {
        if p.r <= 0.0 {
            return Err(Error::AxisDegenerate);
        }
        Ok(self.christoffel_at(p.t, p.r))
    }

    /// `Γ^i_jk = ½ g^ii (δ_ik ∂_j g_ii + δ_ij ∂_k g_ii − δ_jk ∂_i g_jj)` for a
    /// diagonal metric depending on `(t, r)` only.
    fn christoffel_at(&self, t: f64, r: f64) -> Christoffel {
        let (f, fr, ft) = self.profile_derivs(r, t);
        let (e, le) = self.warp(t);
        let g = [1.0, e, e * f * f];
        // dg[m][i] = ∂_m g_ii
        let dg = [
            [0.0, le * e, e * (le * f * f + 2.0 * f * ft)],
            [0.0, 0.0, 2.0 * e * f * fr],
            [0.0, 0.0, 0.0],
        ];
        let mut out = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    if i == k {
                        s += dg[j][i];
                    }
                    if i == j {
                        s += dg[k][i];
                    }
                    if j == k {
                        s -= dg[i][j];
                    }
                    out[i][j][k] = 0.5 * s / g[i];
                }
            }
        }
        out
    }

    /// `R^i_jkl`, the `i`-component of `R(∂_k, ∂_l) ∂_j`, from centered
    /// differences of the Christoffel symbols.
    pub fn riemann(&self, p: &CylPoint) -> Result<Riemann> {
        if p.r <= CURVATURE_STEP {
            return Err(Error::AxisDegenerate);
        }
        Ok(self.riemann_at(p.t, p.r))
    }

    fn riemann_at(&self, t: f64, r: f64) -> Riemann {
        let h = CURVATURE_STEP;
        let gam = self.christoffel_at(t, r);
        let plus_t = self.christoffel_at(t + h, r);
        let minus_t = self.christoffel_at(t - h, r);
        let plus_r = self.christoffel_at(t, r + h);
        let minus_r = self.christoffel_at(t, r - h);
        let mut dgam = [[[[0.0; 3]; 3]; 3]; 3]; // dgam[m][i][j][k] = ∂_m Γ^i_jk
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    dgam[0][i][j][k] = (plus_t[i][j][k] - minus_t[i][j][k]) / (2.0 * h);
                    dgam[1][i][j][k] = (plus_r[i][j][k] - minus_r[i][j][k]) / (2.0 * h);
                }
            }
        }
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut v = dgam[k][i][l][j] - dgam[l][i][k][j];
                        for m in 0..3 {
                            v += gam[i][k][m] * gam[m][l][j] - gam[i][l][m] * gam[m][k][j];
                        }
                        out[i][j][k][l] = v;
                    }
                }
            }
        }
        out
    }

    /// Sectional curvature of `span{u, v}` at `p`.
    pub fn sectional_curvature(&self, p: &CylPoint, u: [f64; 3], v: [f64; 3]) -> Result<f64> {
        let rm = self.riemann(p)?;
        let g = self.metric_diag(p.t, p.r);
        let ip = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| g[i] * a[i] * b[i]).sum::<f64>();
        let area = ip(&u, &u) * ip(&v, &v) - ip(&u, &v).powi(2);
        if area <= 1e-14 * ip(&u, &u) * ip(&v, &v) {
            return Err(Error::DegenerateSpan);
        }
        let mut ruvv = [0.0; 3];
        for (i, out) in ruvv.iter_mut().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        *out += rm[i][j][k][l] * v[j] * u[k] * v[l];
                    }
                }
            }
        }
        Ok(ip(&ruvv, &u) / area)
    }

    fn energy_cyl(&self, y: &[f64]) -> f64 {
        let g = self.metric_diag(y[0], y[1]);
        g[0] * y[3] * y[3] + g[1] * y[4] * y[4] + g[2] * y[5] * y[5]
    }

    fn energy_axis(&self, y: &[f64]) -> f64 {
        let (e, _) = self.warp(y[0]);
        y[3] * y[3] + e * sphere_norm2(y)
    }

    fn rhs_cyl(&self, y: &[f64], dy: &mut [f64]) {
        let gam = self.christoffel_at(y[0], y[1]);
        let v = [y[3], y[4], y[5]];
        dy[..3].copy_from_slice(&v);
        for i in 0..3 {
            let mut a = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    a -= gam[i][j][k] * v[j] * v[k];
                }
            }
            dy[3 + i] = a;
        }
    }

    /// Axis chart `(t, X, Y)` with `(X, Y) = sin r (cos α, sin α)`, valid
    /// where `f = sin r`. Geodesics there are those of `dt² + E(t) g_{S²}`.
    fn rhs_axis(&self, y: &[f64], dy: &mut [f64]) {
        let gh = sphere_norm2(y);
        dy[..3].copy_from_slice(&y[3..6]);
        match self.config.variant {
            Variant::Euclidean => {
                dy[3] = 0.0;
                dy[4] = -y[1] * gh;
                dy[5] = -y[2] * gh;
            }
            Variant::Hyperbolic => {
                let e = (2.0 * y[0]).exp();
                dy[3] = e * gh;
                dy[4] = -2.0 * y[3] * y[4] - y[1] * gh;
                dy[5] = -2.0 * y[3] * y[5] - y[2] * gh;
            }
        }
    }
}

/// Round-sphere norm `|Ẋ|² + (X·Ẋ)²/(1 − |X|²)` in orthographic coordinates.
fn sphere_norm2(y: &[f64]) -> f64 {
    let rho2 = y[1] * y[1] + y[2] * y[2];
    let xd = y[1] * y[4] + y[2] * y[5];
    y[4] * y[4] + y[5] * y[5] + xd * xd / (1.0 - rho2)
}

fn smoothstep(order: u8, u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let w = 1.0 - u;
    match order {
        1 => (u * u * (3.0 - 2.0 * u), 6.0 * u * w),
        2 => (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u), 30.0 * u * u * w * w),
        _ => (
            u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u.powi(3)),
            140.0 * u.powi(3) * w.powi(3),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    Cyl,
    Axis,
}

/// `(t, r, α, ṫ, ṙ, α̇)` → `(t, X, Y, ṫ, Ẋ, Ẏ)`.
fn cyl_to_axis(y: &[f64]) -> [f64; 6] {
    let (sr, cr) = y[1].sin_cos();
    let (sa, ca) = y[2].sin_cos();
    [
        y[0],
        sr * ca,
        sr * sa,
        y[3],
        cr * ca * y[4] - sr * sa * y[5],
        cr * sa * y[4] + sr * ca * y[5],
    ]
}

/// Inverse of [`cyl_to_axis`]; `alpha_ref` selects the branch of `α`.
fn axis_to_cyl(y: &[f64], alpha_ref: f64) -> [f64; 6] {
    let rho = y[1].hypot(y[2]);
    let r = rho.asin();
    let raw = y[2].atan2(y[1]);
    let alpha = raw + 2.0 * PI * ((alpha_ref - raw) / (2.0 * PI)).round();
    let xd = y[1] * y[4] + y[2] * y[5];
    let (rdot, adot) = if rho > 0.0 {
        (xd / (rho * (1.0 - rho * rho).sqrt()), (y[1] * y[5] - y[2] * y[4]) / (rho * rho))
    } else {
        (y[4].hypot(y[5]), 0.0)
    };
    [y[0], r, alpha, y[3], rdot, adot]
}

/// Cartesian position and velocity from either chart.
fn to_cartesian(chart: Chart, y: &[f64]) -> ([f64; 3], [f64; 3]) {
    match chart {
        Chart::Cyl => {
            let (sa, ca) = y[2].sin_cos();
            (
                [y[0], y[1] * ca, y[1] * sa],
                [y[3], y[4] * ca - y[1] * sa * y[5], y[4] * sa + y[1] * ca * y[5]],
            )
        }
        Chart::Axis => {
            let rho2 = y[1] * y[1] + y[2] * y[2];
            let rho = rho2.sqrt();
            // k = asin ρ / ρ,  q = k'(ρ) / ρ
            let (k, q) = if rho < 0.02 {
                (
                    1.0 + rho2 / 6.0 + 3.0 * rho2 * rho2 / 40.0 + 5.0 * rho2.powi(3) / 112.0,
                    1.0 / 3.0 + 3.0 * rho2 / 10.0 + 15.0 * rho2 * rho2 / 56.0 + 35.0 * rho2.powi(3) / 144.0,
                )
            } else {
                let a = rho.asin();
                (a / rho, (rho / (1.0 - rho2).sqrt() - a) / (rho2 * rho))
            };
            let xd = y[1] * y[4] + y[2] * y[5];
            (
                [y[0], k * y[1], k * y[2]],
                [y[3], k * y[4] + q * xd * y[1], k * y[5] + q * xd * y[2]],
            )
        }
    }
}

/// Cylindrical state from Cartesian position and velocity (`r > 0`).
fn cartesian_to_cyl(p: &[f64], v: &[f64]) -> [f64; 6] {
    let r = p[1].hypot(p[2]);
    let alpha = p[2].atan2(p[1]);
    [p[0], r, alpha, v[0], (p[1] * v[1] + p[2] * v[2]) / r, (p[1] * v[2] - p[2] * v[1]) / (r * r)]
}

/// One sample of a geodesic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    /// Arclength parameter.
    pub s: f64,
    pub t: f64,
    pub r: f64,
    pub alpha: f64,
    pub vt: f64,
    pub vr: f64,
    pub valpha: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicTrace {
    pub path: GeodesicPath,
    pub samples: Vec<TraceSample>,
    pub step: f64,
    pub energy_drift: f64,
}

struct Sweep {
    times: Vec<f64>,
    points: Vec<f64>,
    vels: Vec<f64>,
    samples: Vec<TraceSample>,
    drift: f64,
}

/// Integrator state that carries its chart.
struct Walker<'a> {
    metric: &'a WarpedMetric,
    chart: Chart,
    y: [f64; 6],
    alpha_ref: f64,
    rk: Rk4,
}

impl<'a> Walker<'a> {
    fn start(metric: &'a WarpedMetric, p0: &CylPoint, v0: [f64; 3]) -> Self {
        let cyl = [p0.t, p0.r, p0.alpha, v0[0], v0[1], v0[2]];
        let mut w = Walker { metric, chart: Chart::Cyl, y: cyl, alpha_ref: p0.alpha, rk: Rk4::new(6) };
        if p0.r < AXIS_ENTER {
            w.chart = Chart::Axis;
            w.y = cyl_to_axis(&cyl);
        }
        w
    }

    fn step(&mut self, h: f64) {
        let m = self.metric;
        match self.chart {
            Chart::Cyl => self.rk.step(&mut |s: &[f64], d: &mut [f64]| m.rhs_cyl(s, d), &mut self.y, h),
            Chart::Axis => self.rk.step(&mut |s: &[f64], d: &mut [f64]| m.rhs_axis(s, d), &mut self.y, h),
        }
        match self.chart {
            Chart::Cyl if self.y[1] < AXIS_ENTER => {
                self.alpha_ref = self.y[2];
                self.y = cyl_to_axis(&self.y);
                self.chart = Chart::Axis;
            }
            Chart::Axis if self.y[1].hypot(self.y[2]) > AXIS_LEAVE.sin() => {
                self.y = axis_to_cyl(&self.y, self.alpha_ref);
                self.chart = Chart::Cyl;
            }
            Chart::Axis => {
                let raw = self.y[2].atan2(self.y[1]);
                if self.y[1].hypot(self.y[2]) > 1e-9 {
                    self.alpha_ref = raw + 2.0 * PI * ((self.alpha_ref - raw) / (2.0 * PI)).round();
                }
            }
            _ => {}
        }
    }

    fn energy(&self) -> f64 {
        match self.chart {
            Chart::Cyl => self.metric.energy_cyl(&self.y),
            Chart::Axis => self.metric.energy_axis(&self.y),
        }
    }

    fn cyl(&self) -> [f64; 6] {
        match self.chart {
            Chart::Cyl => self.y,
            Chart::Axis => axis_to_cyl(&self.y, self.alpha_ref),
        }
    }
}

impl WarpedMetric {
    fn sweep(&self, p0: &CylPoint, v0: [f64; 3], horizon: f64, h: f64) -> Sweep {
        let steps = (horizon / h).ceil().max(1.0) as usize;
        let h = horizon / steps as f64;
        let mut w = Walker::start(self, p0, v0);
        let e0 = w.energy();
        let mut out = Sweep {
            times: Vec::with_capacity(steps + 1),
            points: Vec::with_capacity(3 * (steps + 1)),
            vels: Vec::with_capacity(3 * (steps + 1)),
            samples: Vec::with_capacity(steps + 1),
            drift: 0.0,
        };
        let record = |s: f64, w: &Walker, out: &mut Sweep| {
            let (p, v) = to_cartesian(w.chart, &w.y);
            out.times.push(s);
            out.points.extend_from_slice(&p);
            out.vels.extend_from_slice(&v);
            let c = w.cyl();
            let e = w.energy();
            out.samples.push(TraceSample {
                s,
                t: c[0],
                r: c[1],
                alpha: c[2].rem_euclid(2.0 * PI),
                vt: c[3],
                vr: c[4],
                valpha: c[5],
                energy: e,
            });
            out.drift = out.drift.max((e - e0).abs() / e0);
        };
        record(0.0, &w, &mut out);
        for k in 1..=steps {
            w.step(h);
            record(k as f64 * h, &w, &mut out);
        }
        out
    }

    /// Normalizes a cylindrical velocity at `p` to unit speed. On the axis
    /// `(ṫ, ṙ)` is read as a direction along angle `α`.
    fn unit_velocity(&self, p: &CylPoint, v: [f64; 3]) -> Result<[f64; 3]> {
        let y = [p.t, p.r, p.alpha, v[0], v[1], v[2]];
        let e = if p.r < AXIS_ENTER { self.energy_axis(&cyl_to_axis(&y)) } else { self.energy_cyl(&y) };
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidArgument("initial velocity must be nonzero".into()));
        }
        let s = e.sqrt();
        Ok([v[0] / s, v[1] / s, v[2] / s])
    }

    /// Unit-speed geodesic on `[0, T]` from `p0` with cylindrical velocity
    /// `v0 = (ṫ, ṙ, α̇)` (rescaled to unit speed), refining `step` until the
    /// relative energy drift is at most [`ENERGY_TOL`].
    pub fn geodesic_integrate(&self, p0: &CylPoint, v0: [f64; 3], horizon: f64, step: f64) -> Result<GeodesicTrace> {
        check_horizon(horizon, step)?;
        let v = self.unit_velocity(p0, v0)?;
        let mut h = step;
        let mut drift = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENTS {
            let sw = self.sweep(p0, v, horizon, h);
            if sw.drift <= ENERGY_TOL {
                let path = GeodesicPath::from_samples(3, sw.times, sw.points, sw.vels, 1.0);
                return Ok(GeodesicTrace { path, samples: sw.samples, step: h, energy_drift: sw.drift });
            }
            drift = sw.drift;
            h *= 0.5;
        }
        Err(Error::Integration(format!("energy drift {drift:e} above tolerance")))
    }

    /// Two-sided unit-speed geodesic on `[-T, T]` through `p0`.
    pub fn geodesic_line(&self, p0: &CylPoint, v0: [f64; 3], horizon: f64, step: f64) -> Result<GeodesicPath> {
        check_horizon(horizon, step)?;
        let v = self.unit_velocity(p0, v0)?;
        let back = [-v[0], -v[1], -v[2]];
        let mut h = step;
        for _ in 0..=MAX_REFINEMENTS {
            let fwd = self.sweep(p0, v, horizon, h);
            let bwd = self.sweep(p0, back, horizon, h);
            if fwd.drift.max(bwd.drift) <= ENERGY_TOL {
                let mut times = Vec::with_capacity(fwd.times.len() + bwd.times.len());
                let mut points = Vec::new();
                let mut vels = Vec::new();
                for k in (1..bwd.times.len()).rev() {
                    times.push(-bwd.times[k]);
                    points.extend_from_slice(&bwd.points[3 * k..3 * k + 3]);
                    vels.extend(bwd.vels[3 * k..3 * k + 3].iter().map(|x| -x));
                }
                times.extend_from_slice(&fwd.times);
                points.extend_from_slice(&fwd.points);
                vels.extend_from_slice(&fwd.vels);
                return Ok(GeodesicPath::from_samples(3, times, points, vels, 1.0));
            }
            h *= 0.5;
        }
        Err(Error::Integration("energy drift above tolerance".into()))
    }

    /// Two-sided geodesic from Cartesian initial data.
    pub fn geodesic_line_cartesian(&self, p0: [f64; 3], v0: [f64; 3], horizon: f64, step: f64) -> Result<GeodesicPath> {
        let r = p0[1].hypot(p0[2]);
        if r > 1e-12 {
            let c = cartesian_to_cyl(&p0, &v0);
            let p = CylPoint::new(c[0], c[1], c[2])?;
            self.geodesic_line(&p, [c[3], c[4], c[5]], horizon, step)
        } else {
            let h = v0[1].hypot(v0[2]);
            let alpha = if h > 0.0 { v0[2].atan2(v0[1]) } else { 0.0 };
            let p = CylPoint { t: p0[0], r: 0.0, alpha: alpha.rem_euclid(2.0 * PI) };
            self.geodesic_line(&p, [v0[0], h, 0.0], horizon, step)
        }
    }

    /// Times in `(0, T]` where `det[J₁, J₂, γ̇]` changes sign, for the two
    /// Jacobi fields with `J(0) = 0` and orthonormal transverse `J'(0)`.
    /// The geodesic is re-integrated from the initial data of `path`
    /// together with the Jacobi system; it must stay off the axis.
    pub fn jacobi_conjugate_points(&self, path: &GeodesicPath, horizon: f64) -> Result<Vec<f64>> {
        check_horizon(horizon, 0.01)?;
        let s0 = path.domain().0;
        let (p, v) = path.eval(s0);
        if p[1].hypot(p[2]) < AXIS_LEAVE {
            return Err(Error::AxisDegenerate);
        }
        let c = cartesian_to_cyl(&p, &v);
        let g = self.metric_diag(c[0], c[1]);
        let vel = [c[3], c[4], c[5]];
        let ip = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| g[i] * a[i] * b[i]).sum::<f64>();
        let speed = ip(&vel, &vel).sqrt();
        let vel = [vel[0] / speed, vel[1] / speed, vel[2] / speed];
        let mut basis: Vec<[f64; 3]> = Vec::new();
        for e in 0..3 {
            let mut w = [0.0; 3];
            w[e] = 1.0;
            let mut prev = vec![vel];
            prev.extend(basis.iter().copied());
            for q in &prev {
                let c = ip(&w, q);
                for i in 0..3 {
                    w[i] -= c * q[i];
                }
            }
            let n = ip(&w, &w).sqrt();
            if n > 1e-6 {
                basis.push([w[0] / n, w[1] / n, w[2] / n]);
            }
            if basis.len() == 2 {
                break;
            }
        }
        let mut y = [0.0; 18];
        y[..3].copy_from_slice(&c[..3]);
        y[3..6].copy_from_slice(&vel);
        y[9..12].copy_from_slice(&basis[0]);
        y[15..18].copy_from_slice(&basis[1]);

        let h = 0.005;
        let steps = (horizon / h).ceil() as usize;
        let h = horizon / steps as f64;
        let mut rk = Rk4::new(18);
        let mut rhs = |s: &[f64], d: &mut [f64]| self.jacobi_rhs(s, d);
        let mut out = Vec::new();
        let mut prev_det = jacobi_det(&y);
        let mut s = 0.0;
        for _ in 0..steps {
            let before = y;
            rk.step(&mut rhs, &mut y, h);
            if y[1] < AXIS_ENTER {
                return Err(Error::AxisDegenerate);
            }
            let det = jacobi_det(&y);
            if s > 0.0 && prev_det != 0.0 && det != 0.0 && prev_det.signum() != det.signum() {
                let (mut lo, mut hi) = (0.0, h);
                let mut trial = before;
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    trial = before;
                    rk.step(&mut rhs, &mut trial, mid);
                    if jacobi_det(&trial).signum() == prev_det.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let _ = trial;
                out.push(s + 0.5 * (lo + hi));
            }
            prev_det = det;
            s += h;
        }
        Ok(out)
    }

    /// State `(x, ẋ, J₁, W₁, J₂, W₂)` with `J̇ = W − Γ(ẋ, J)` and
    /// `Ẇ = −Γ(ẋ, W) − R(J, ẋ)ẋ`.
    fn jacobi_rhs(&self, y: &[f64], d: &mut [f64]) {
        let gam = self.christoffel_at(y[0], y[1]);
        let rm = self.riemann_at(y[0], y[1]);
        let v = [y[3], y[4], y[5]];
        d[..3].copy_from_slice(&v);
        for i in 0..3 {
            let mut a = 0.0;
            for j in 0..3 {
                for k in 0..3 {
                    a -= gam[i][j][k] * v[j] * v[k];
                }
            }
            d[3 + i] = a;
        }
        for f in 0..2 {
            let base = 6 + 6 * f;
            let jv = [y[base], y[base + 1], y[base + 2]];
            let wv = [y[base + 3], y[base + 4], y[base + 5]];
            for i in 0..3 {
                let mut dj = wv[i];
                let mut dw = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        dj -= gam[i][j][k] * v[j] * jv[k];
                        dw -= gam[i][j][k] * v[j] * wv[k];
                        for l in 0..3 {
                            dw -= rm[i][j][k][l] * v[j] * jv[k] * v[l];
                        }
                    }
                }
                d[base + i] = dj;
                d[base + 3 + i] = dw;
            }
        }
    }

    /// The plane `E_α` (`α` taken mod π) with chart `(t, s)`.
    pub fn plane(&self, alpha: f64) -> PlaneChart {
        let a = alpha.rem_euclid(PI);
        let geometry = match self.config.variant {
            Variant::Euclidean => PlaneGeometry::Flat,
            Variant::Hyperbolic => PlaneGeometry::Hyperbolic,
        };
        PlaneChart::new(format!("E[{a:.6}]"), vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, a.cos(), a.sin()], geometry)
            .expect("E_alpha directions are independent")
    }

    /// `count` planes `E_α` at `α = jπ/count`.
    pub fn plane_family(&self, count: usize) -> Vec<PlaneChart> {
        (0..count).map(|j| self.plane(PI * j as f64 / count as f64)).collect()
    }

    /// `K̂` over the sampled planes `E_α` together with the radius
    /// `D = max √(t² + r²)` over `K`.
    pub fn plane_khat(&self, k: &CompactSet, alpha_samples: usize) -> Result<PlaneKhat> {
        if k.is_empty() {
            return Err(Error::Empty("compact set K"));
        }
        if alpha_samples == 0 {
            return Err(Error::Empty("plane family"));
        }
        let planes = self.plane_family(alpha_samples);
        let khat = khat_with(k, &planes, &KhatOptions::default())?;
        Ok(PlaneKhat { khat, radius_bound: k.max_norm() })
    }
}

#[derive(Debug, Clone)]
pub struct PlaneKhat {
    pub khat: KHat,
    /// `D`: every point of `K̂` has chart norm at most `D` (euclidean variant).
    pub radius_bound: f64,
}

fn jacobi_det(y: &[f64]) -> f64 {
    let a = [y[6], y[7], y[8]];
    let b = [y[12], y[13], y[14]];
    let c = [y[3], y[4], y[5]];
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn check_horizon(horizon: f64, step: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    Ok(())
}

/// Equator start point of the hemisphere `S_t`.
pub fn equator_point(t: f64, alpha: f64) -> CylPoint {
    CylPoint { t, r: FRAC_PI_2, alpha: alpha.rem_euclid(2.0 * PI) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_christoffel(m: &WarpedMetric, t: f64, r: f64) -> Christoffel {
        // independent route: differentiate the metric numerically
        let h = 1e-5;
        let g = m.metric_diag(t, r);
        let dt: Vec<f64> = (0..3).map(|i| (m.metric_diag(t + h, r)[i] - m.metric_diag(t - h, r)[i]) / (2.0 * h)).collect();
        let dr: Vec<f64> = (0..3).map(|i| (m.metric_diag(t, r + h)[i] - m.metric_diag(t, r - h)[i]) / (2.0 * h)).collect();
        let d = |coord: usize, i: usize| match coord {
            0 => dt[i],
            1 => dr[i],
            _ => 0.0,
        };
        let mut out = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    // full formula with g_ab = δ_ab g_a
                    let gij = |a: usize, b: usize, c: usize| if a == b { d(c, a) } else { 0.0 };
                    out[i][j][k] = 0.5 / g[i] * (gij(i, k, j) + gij(i, j, k) - gij(j, k, i));
                }
            }
        }
        out
    }

    #[test]
    fn profile_pieces() {
        let m = WarpedMetric::euclidean();
        assert!((m.profile(FRAC_PI_2, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.profile(2.0 * PI, -1.0).unwrap() - (2.0 + PI)).abs() < 1e-12);
        assert!(m.profile(2.0 * PI + 1.0, 1.0).unwrap() > 3.0 + PI);
        assert!(m.profile(-0.1, 0.0).is_err());
        for k in 1..=200 {
            let r = 0.05 * k as f64;
            for &t in &[-2.0, 0.0, 0.5, 3.0] {
                assert!(m.profile(r, t).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn profile_is_c2_across_junctions() {
        let m = WarpedMetric::euclidean();
        let h = 1e-5;
        let f = |r: f64, t: f64| m.profile_derivs(r, t).0;
        let d2 = |r: f64, t: f64| (f(r + h, t) - 2.0 * f(r, t) + f(r - h, t)) / (h * h);
        for &r0 in &[BLEND_START, PI, BUMP_START] {
            for &t in &[-1.0, 0.7, 2.0] {
                let left = d2(r0 - 3.0 * h, t);
                let right = d2(r0 + 3.0 * h, t);
                assert!((left - right).abs() < 1e-2, "r={r0} t={t}: {left} vs {right}");
                let (_, fr, _) = m.profile_derivs(r0 - 1e-9, t);
                let (_, fr2, _) = m.profile_derivs(r0 + 1e-9, t);
                assert!((fr - fr2).abs() < 1e-7);
            }
        }
        // second t-derivative continuous at t = 0 in the bump region
        let ft = |t: f64| m.profile_derivs(2.0 * PI + 1.0, t).2;
        assert!(ft(1e-6).abs() < 1e-9 && ft(-1e-6) == 0.0);
    }

    #[test]
    fn metric_examples() {
        let e = WarpedMetric::euclidean();
        let h = WarpedMetric::hyperbolic();
        let p = CylPoint::new(0.0, FRAC_PI_2, 0.0).unwrap();
        assert_eq!(e.metric_tensor(&p).unwrap(), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(h.metric_tensor(&p).unwrap(), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let q = CylPoint::new(0.0, 1.5 * PI, 0.0).unwrap();
        let g = e.metric_tensor(&q).unwrap();
        assert!((g[2][2] - (2.0 + FRAC_PI_2).powi(2)).abs() < 1e-12);
        assert!(matches!(e.metric_tensor(&CylPoint::new(0.0, 0.0, 0.0).unwrap()), Err(Error::AxisDegenerate)));
    }

    #[test]
    fn christoffel_matches_metric_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [WarpedMetric::euclidean(), WarpedMetric::hyperbolic()] {
            for _ in 0..1000 {
                let t = rng.random_range(-2.0..2.0);
                let r = rng.random_range(0.05..9.0);
                let a = m.christoffel(&CylPoint::new(t, r, 0.0).unwrap()).unwrap();
                let b = fd_christoffel(&m, t, r);
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            let scale = 1.0 + b[i][j][k].abs();
                            assert!((a[i][j][k] - b[i][j][k]).abs() <= 1e-6 * scale, "{t} {r} {i}{j}{k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_closed_forms() {
        let e = WarpedMetric::euclidean();
        let r = 1.1;
        let g = e.christoffel(&CylPoint::new(0.3, r, 0.0).unwrap()).unwrap();
        assert!((g[1][2][2] + r.sin() * r.cos()).abs() < 1e-15);
        assert!((g[2][1][2] - r.cos() / r.sin()).abs() < 1e-15);
        let flat = e.christoffel(&CylPoint::new(-1.0, 4.0, 0.0).unwrap()).unwrap();
        let f = 2.0 + 4.0 - PI;
        assert!((flat[1][2][2] + f).abs() < 1e-14 && (flat[2][1][2] - 1.0 / f).abs() < 1e-14);
        assert_eq!(flat[0], [[0.0; 3]; 3]);
        let h = WarpedMetric::hyperbolic();
        let t = 0.4;
        let gh = h.christoffel(&CylPoint::new(t, 1.0, 0.0).unwrap()).unwrap();
        assert!((gh[0][1][1] + (2.0 * t).exp()).abs() < 1e-14);
        assert!((gh[1][0][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn curvature_regimes() {
        let e = WarpedMetric::euclidean();
        let flat = CylPoint::new(-1.0, 4.5, 0.3).unwrap();
        for (u, v) in [([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), ([1.0, 0.5, 0.0], [0.2, 0.0, 0.7])] {
            assert!(e.sectional_curvature(&flat, u, v).unwrap().abs() < 1e-3);
        }
        let sphere = CylPoint::new(0.5, 1.0, 0.0).unwrap();
        let k = e.sectional_curvature(&sphere, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-3, "{k}");
        let h = WarpedMetric::hyperbolic();
        for p in [CylPoint::new(0.2, 1.0, 0.0).unwrap(), CylPoint::new(-0.5, 5.0, 1.0).unwrap(), CylPoint::new(0.8, 7.0, 2.0).unwrap()] {
            let k = h.sectional_curvature(&p, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
            assert!((k + 1.0).abs() < 1e-3, "{k}");
        }
        assert!(matches!(e.sectional_curvature(&sphere, [0.0, 1.0, 0.0], [0.0, 2.0, 0.0]), Err(Error::DegenerateSpan)));
    }

    #[test]
    fn radial_geodesics_from_origin_are_lines() {
        for m in [WarpedMetric::euclidean(), WarpedMetric::hyperbolic()] {
            let p = CylPoint::new(0.0, 0.0, 0.7).unwrap();
            let tr = m.geodesic_integrate(&p, [0.0, 1.0, 0.0], 5.0, 0.01).unwrap();
            for s in [0.5, 1.0, 2.5, 4.0] {
                let q = tr.path.point(s);
                let c = CylPoint::from_cartesian([q[0], q[1], q[2]]);
                if m.variant() == Variant::Euclidean {
                    assert!((c.r - s).abs() < 1e-8 && (c.alpha - 0.7).abs() < 1e-8);
                }
                assert!((c.alpha - 0.7).abs() < 1e-8);
            }
            assert!(tr.energy_drift <= ENERGY_TOL);
        }
    }

    #[test]
    fn euclidean_plane_geodesics_are_chart_lines() {
        let m = WarpedMetric::euclidean();
        let p = CylPoint::new(-1.0, 1.2, 0.0).unwrap();
        let path = m.geodesic_line(&p, [0.6, -0.8, 0.0], 6.0, 0.01).unwrap();
        for k in -60..=60 {
            let s = 0.1 * k as f64;
            let q = path.point(s);
            assert!((q[0] - (-1.0 + 0.6 * s)).abs() < 1e-7);
            assert!((q[1] - (1.2 - 0.8 * s)).abs() < 1e-7);
            assert!(q[2].abs() < 1e-9);
        }
    }

    #[test]
    fn tilted_great_circle_has_period_two_pi() {
        let m = WarpedMetric::euclidean();
        let tilt: f64 = PI / 8.0;
        // equator point, heading tilted towards the pole
        let p = CylPoint::new(0.3, FRAC_PI_2, 0.0).unwrap();
        let tr = m.geodesic_integrate(&p, [0.0, -tilt.sin(), tilt.cos()], 2.0 * PI, 0.005).unwrap();
        let a = tr.path.point(0.0);
        let b = tr.path.point(2.0 * PI);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
        let max_r = tr.samples.iter().map(|s| s.r).fold(0.0, f64::max);
        assert!((max_r - (FRAC_PI_2 + tilt)).abs() < 1e-6);
    }

    #[test]
    fn equator_conjugate_time_is_pi() {
        let m = WarpedMetric::euclidean();
        let p = equator_point(0.0, 0.0);
        let tr = m.geodesic_integrate(&p, [0.0, 0.0, 1.0], 4.0, 0.01).unwrap();
        let c = m.jacobi_conjugate_points(&tr.path, 4.0).unwrap();
        assert!(!c.is_empty());
        assert!((c[0] - PI).abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn hyperbolic_antipodal_conjugate_time() {
        // (x, y) = (α, e^{-t}) is the half-plane model on {r = π/2};
        // the geodesic from (0, 1) to (π, 1) has length acosh(1 + π²/2)
        let m = WarpedMetric::hyperbolic();
        let n = (1.0 + PI * PI / 4.0).sqrt();
        let p = equator_point(0.0, 0.0);
        let tr = m.geodesic_integrate(&p, [-FRAC_PI_2 / n, 0.0, 1.0 / n], 4.0, 0.01).unwrap();
        let expect = (1.0 + PI * PI / 2.0).acosh();
        let end = tr.path.point(expect);
        let c = CylPoint::from_cartesian([end[0], end[1], end[2]]);
        assert!((c.alpha - PI).abs() < 1e-6 && c.t.abs() < 1e-6);
        let conj = m.jacobi_conjugate_points(&tr.path, 4.0).unwrap();
        assert!((conj[0] - expect).abs() < 1e-3, "{conj:?} vs {expect}");
    }

    #[test]
    fn flat_region_has_no_conjugate_points() {
        let m = WarpedMetric::euclidean();
        let p = CylPoint::new(-5.0, 5.0, 0.0).unwrap();
        let tr = m.geodesic_integrate(&p, [0.3, 0.0, 0.1], 3.0, 0.01).unwrap();
        assert!(tr.samples.iter().all(|s| s.t < 0.0 && s.r > PI));
        assert!(m.jacobi_conjugate_points(&tr.path, 3.0).unwrap().is_empty());
        let h = WarpedMetric::hyperbolic();
        let q = CylPoint::new(0.0, 2.0, 0.0).unwrap();
        let th = h.geodesic_integrate(&q, [0.6, 0.8, 0.0], 3.0, 0.01).unwrap();
        assert!(h.jacobi_conjugate_points(&th.path, 3.0).unwrap().is_empty());
    }

    #[test]
    fn t_translation_invariance_and_its_failure() {
        let m = WarpedMetric::euclidean();
        let shift = 1.7;
        let v = [0.3, 0.4, 0.5];
        let inside = CylPoint::new(-0.5, 2.0, 0.0).unwrap();
        let a = m.geodesic_integrate(&inside, v, 4.0, 0.01).unwrap();
        let b = m.geodesic_integrate(&CylPoint { t: inside.t + shift, ..inside }, v, 4.0, 0.01).unwrap();
        assert!(a.samples.iter().all(|s| s.r <= 2.0 * PI));
        for k in 0..=40 {
            let s = 0.1 * k as f64;
            let (p, q) = (a.path.point(s), b.path.point(s));
            assert!((p[0] + shift - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6 && (p[2] - q[2]).abs() < 1e-6);
        }
        // out in the bump region the shift changes the geodesic
        let outer = CylPoint::new(0.5, 7.0, 0.0).unwrap();
        let c = m.geodesic_integrate(&outer, [0.3, 0.3, 0.1], 4.0, 0.01).unwrap();
        let d = m.geodesic_integrate(&CylPoint { t: -3.0, ..outer }, [0.3, 0.3, 0.1], 4.0, 0.01).unwrap();
        let p = c.path.point(4.0);
        let q = d.path.point(4.0);
        let diff = (p[1] - q[1]).abs() + (p[2] - q[2]).abs();
        assert!(diff > 1e-4, "{diff}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn in_plane_geodesics_stay_in_plane(
            hyper in any::<bool>(),
            t in -1.5..1.5f64,
            s0 in -6.0..6.0f64,
            ang in 0.0..std::f64::consts::TAU,
            a0 in 0.0..PI,
        ) {
            let m = if hyper { WarpedMetric::hyperbolic() } else { WarpedMetric::euclidean() };
            let (dir_t, dir_s) = (ang.cos(), ang.sin());
            let nrm = [0.0, -a0.sin(), a0.cos()];
            let p0 = [t, s0 * a0.cos(), s0 * a0.sin()];
            let v0 = [dir_t, dir_s * a0.cos(), dir_s * a0.sin()];
            let path = m.geodesic_line_cartesian(p0, v0, 5.0, 0.01).unwrap();
            for k in -50..=50 {
                let q = path.point(0.1 * k as f64);
                let off: f64 = q.iter().zip(&nrm).map(|(a, b)| a * b).sum();
                prop_assert!(off.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plane_khat_two_points_and_ball_bound() {
        let m = WarpedMetric::euclidean();
        let k = CompactSet::Points { points: vec![vec![0.0, 1.0, 0.0], vec![1.0, -1.0, 0.0]] };
        let pk = m.plane_khat(&k, 8).unwrap();
        assert!(pk.khat.contains(&[0.25, 0.5, 0.0]));
        assert!(!pk.khat.contains(&[0.5, 0.5, 0.0]));
        // the t-axis lies on every plane, and the other planes miss K
        assert!(!pk.khat.contains(&[0.5, 0.0, 0.0]));
        assert!(m.plane_khat(&CompactSet::Empty, 8).is_err());
        let ball = CompactSet::ball(vec![0.5, 1.0, 0.5], 0.7);
        let pk = m.plane_khat(&ball, 24).unwrap();
        let grid = crate::support::ProbeGrid { center: vec![0.0; 3], half_width: 3.0, spacing: 0.1 };
        for p in grid.probes(&m.plane_family(24)) {
            if pk.khat.contains(&p) {
                let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(n <= pk.radius_bound + 1e-9);
            }
        }
    }

    #[test]
    fn config_roundtrip_and_validation() {
        let cfg: WarpedConfig = serde_json::from_str(r#"{"variant":"hyperbolic","bump":{"amplitude":2.0}}"#).unwrap();
        assert_eq!(cfg.bump.t_scale, 1.0);
        assert_eq!(cfg.blend.order, 2);
        assert!(WarpedMetric::new(cfg).is_ok());
        let bad = WarpedConfig { blend: BlendParams { order: 7 }, ..cfg };
        assert!(WarpedMetric::new(bad).is_err());
    }
}
