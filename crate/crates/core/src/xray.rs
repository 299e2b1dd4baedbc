//! Geodesic X-ray transform of bump phantoms.
//!
//! `X f(γ) = ∫ f(γ(t)) |γ'(t)| dt`, evaluated only on the parameter
//! intervals where `γ` passes through a bump.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::GeodesicPath;
use crate::plane::{half_plane_to_chart, PlaneChart, PlaneGeometry};
use crate::quad::adaptive_simpson;

/// `amplitude (1 − |x − c|²/ρ²)³` inside the ball, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let u = 1.0 - d2 / (self.radius * self.radius);
        if u <= 0.0 {
            0.0
        } else {
            self.amplitude * u * u * u
        }
    }

    /// Integral along a straight unit-speed line at distance `p` from the
    /// center.
    pub fn line_integral(&self, p: f64) -> f64 {
        let c = 1.0 - p * p / (self.radius * self.radius);
        if c <= 0.0 {
            0.0
        } else {
            self.amplitude * 32.0 / 35.0 * self.radius * c.powf(3.5)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub bumps: Vec<Bump>,
    pub support_ball: SupportBall,
}

impl Phantom {
    /// Phantom with the support ball centered at the middle of the bumps'
    /// bounding box.
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::Empty("bump list"));
        }
        let n = bumps[0].center.len();
        for b in &bumps {
            if b.center.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: b.center.len() });
            }
            if !(b.radius > 0.0) || !b.amplitude.is_finite() {
                return Err(Error::InvalidArgument("bump radius must be positive and amplitude finite".into()));
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for b in &bumps {
            for i in 0..n {
                lo[i] = lo[i].min(b.center[i] - b.radius);
                hi[i] = hi[i].max(b.center[i] + b.radius);
            }
        }
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let radius = bumps.iter().map(|b| dist(&b.center, &center) + b.radius).fold(0.0, f64::max);
        Ok(Phantom { bumps, support_ball: SupportBall { center, radius } })
    }

    /// Checks the declared support ball against the bumps.
    pub fn validate(&self) -> Result<()> {
        for b in &self.bumps {
            if dist(&b.center, &self.support_ball.center) + b.radius > self.support_ball.radius * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument("support ball does not cover every bump".into()));
            }
        }
        Ok(())
    }

    pub fn single(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        Phantom::new(vec![Bump { center, radius, amplitude }]).expect("one valid bump")
    }

    pub fn dim(&self) -> usize {
        self.support_ball.center.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.value(x)).sum()
    }

    pub fn amplitude_scale(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude.abs()).fold(0.0, f64::max)
    }

    /// `c₁ f₁ + c₂ f₂` as a phantom.
    pub fn combine(c1: f64, f1: &Phantom, c2: f64, f2: &Phantom) -> Result<Phantom> {
        let scaled = |c: f64, f: &Phantom| -> Vec<Bump> {
            f.bumps.iter().map(|b| Bump { amplitude: c * b.amplitude, ..b.clone() }).collect()
        };
        let mut bumps = scaled(c1, f1);
        bumps.extend(scaled(c2, f2));
        Phantom::new(bumps)
    }

    /// Smallest chart distance from `x` to a bump support.
    pub fn support_distance(&self, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| dist(x, &b.center) - b.radius).fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSettings {
    /// Target absolute error relative to the phantom's largest amplitude.
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Largest parameter step of the support scan.
    pub scan_step: f64,
    /// Scan steps per bump radius (in chart distance).
    pub steps_per_radius: f64,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings { rel_tol: 1e-10, max_depth: 40, scan_step: 0.05, steps_per_radius: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XrayValue {
    pub value: f64,
    pub error: f64,
}

/// Whether `γ` ends outside the support ball and moving away from it at
/// both ends of its domain.
pub fn is_escaping(f: &Phantom, path: &GeodesicPath) -> bool {
    let (a, b) = path.domain();
    let c = &f.support_ball.center;
    let r = f.support_ball.radius;
    let end = |t: f64, sign: f64| {
        let (p, v) = path.eval(t);
        let rel: Vec<f64> = p.iter().zip(c).map(|(x, y)| x - y).collect();
        let outward: f64 = rel.iter().zip(&v).map(|(x, y)| x * y).sum();
        dist(&p, c) > r && sign * outward > 0.0
    };
    end(b, 1.0) && end(a, -1.0)
}

pub fn xray_transform(f: &Phantom, path: &GeodesicPath, quad: &QuadSettings) -> Result<XrayValue> {
    if path.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: path.dim() });
    }
    if !is_escaping(f, path) {
        return Err(Error::NonEscaping);
    }
    let (a, b) = path.domain();
    let speed = path.speed();
    let abs_tol = quad.rel_tol * f.amplitude_scale().max(f64::MIN_POSITIVE);
    let mut total = XrayValue { value: 0.0, error: 0.0 };
    for bump in &f.bumps {
        let intervals = bump_intervals(bump, path, a, b, quad);
        for (lo, hi) in intervals {
            let g = |t: f64| bump.value(&path.point(t)) * speed;
            let r = adaptive_simpson(&g, lo, hi, abs_tol, quad.max_depth, 4);
            total.value += r.value;
            total.error += r.error;
        }
    }
    Ok(total)
}

/// Parameter intervals on which `γ` lies inside the bump ball, from a scan
/// of `|γ − c|² − ρ²` refined by bisection.
fn bump_intervals(bump: &Bump, path: &GeodesicPath, a: f64, b: f64, quad: &QuadSettings) -> Vec<(f64, f64)> {
    let rho2 = bump.radius * bump.radius;
    let q = |t: f64| {
        let p = path.point(t);
        p.iter().zip(&bump.center).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() - rho2
    };
    let refine = |mut lo: f64, mut hi: f64, qlo: f64| {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (q(mid) < 0.0) == (qlo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut out = Vec::new();
    let mut t = a;
    let mut qt = q(t);
    let mut start = if qt < 0.0 { Some(a) } else { None };
    while t < b {
        let (p, v) = path.eval(t);
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        // far from the ball we may stride faster
        let gap = (dist(&p, &bump.center) - bump.radius).max(0.0);
        let local = (bump.radius / quad.steps_per_radius + 0.5 * gap) / vn;
        let h = local.min(quad.scan_step.max(bump.radius / quad.steps_per_radius / vn));
        let next = (t + h).min(b);
        let qn = q(next);
        if (qt < 0.0) != (qn < 0.0) {
            let root = refine(t, next, qt);
            match start.take() {
                Some(s) => out.push((s, root)),
                None => start = Some(root),
            }
        }
        t = next;
        qt = qn;
    }
    if let Some(s) = start {
        out.push((s, b));
    }
    out
}

/// Geodesic of a plane chart with signed offset `s` and angle `θ`.
///
/// Flat charts use the line `s(cos θ, sin θ) + τ(−sin θ, cos θ)`. Hyperbolic
/// charts use the hyperboloid geodesic `cosh τ q + sinh τ m` with
/// `q = cosh s o + sinh s n`, `n = (0, cos θ, sin θ)`, `m = (0, −sin θ, cos θ)`,
/// carried to the chart through the half-plane model. Either way `τ` is
/// arclength in the plane.
pub fn plane_line(plane: &PlaneChart, offset: f64, angle: f64, half_length: f64) -> GeodesicPath {
    let plane2 = plane.clone();
    let (sn, cs) = angle.sin_cos();
    let (d1, d2) = plane.directions();
    let (d1, d2) = (d1.to_vec(), d2.to_vec());
    match plane.geometry() {
        PlaneGeometry::Flat => GeodesicPath::closed_form(plane.ambient_dim(), (-half_length, half_length), 1.0, move |tau| {
            plane2.embed(offset * cs - tau * sn, offset * sn + tau * cs)
        })
        .with_velocity(move |_| d1.iter().zip(&d2).map(|(a, b)| -sn * a + cs * b).collect()),
        PlaneGeometry::Hyperbolic => {
            let chart = move |tau: f64| -> [f64; 2] {
                let (ch, sh) = (offset.cosh(), offset.sinh());
                let q = [ch, sh * cs, sh * sn];
                let m = [0.0, -sn, cs];
                let (ct, st) = (tau.cosh(), tau.sinh());
                let x = [ct * q[0] + st * m[0], ct * q[1] + st * m[1], ct * q[2] + st * m[2]];
                let y = 1.0 / (x[0] - x[1]);
                half_plane_to_chart(x[2] * y, y)
            };
            let vel_chart = chart;
            let plane3 = plane.clone();
            GeodesicPath::closed_form(plane.ambient_dim(), (-half_length, half_length), 1.0, move |tau| {
                let uv = chart(tau);
                plane2.embed(uv[0], uv[1])
            })
            .with_velocity(move |tau| {
                // d/dτ of the chart point, then pushed forward by the embedding
                let h = 1e-6;
                let a = vel_chart(tau + h);
                let b = vel_chart(tau - h);
                let du = (a[0] - b[0]) / (2.0 * h);
                let dv = (a[1] - b[1]) / (2.0 * h);
                let (e1, e2) = plane3.directions();
                e1.iter().zip(e2).map(|(x, y)| du * x + dv * y).collect()
            })
        }
    }
}

/// [`plane_line`] with a domain long enough to escape the support ball.
pub fn escaping_plane_line(f: &Phantom, plane: &PlaneChart, offset: f64, angle: f64) -> Result<GeodesicPath> {
    let mut l = 1.0;
    for _ in 0..40 {
        let path = plane_line(plane, offset, angle, l);
        if is_escaping(f, &path) {
            return Ok(path);
        }
        l *= 1.5;
    }
    Err(Error::NonEscaping)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sinogram {
    /// Row-major values, `values[i * angles.len() + j]` for offset `i`, angle `j`.
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub offsets: Vec<f64>,
    pub angles: Vec<f64>,
    pub geometry: PlaneGeometry,
    pub plane: String,
}

impl Sinogram {
    pub fn get(&self, offset: usize, angle: usize) -> f64 {
        self.values[offset * self.angles.len() + angle]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

pub fn sinogram_plane(f: &Phantom, plane: &PlaneChart, offsets: &[f64], angles: &[f64], quad: &QuadSettings) -> Result<Sinogram> {
    if offsets.is_empty() || angles.is_empty() {
        return Err(Error::InvalidGrid("offset and angle grids must be nonempty".into()));
    }
    if offsets.iter().chain(angles).any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("grid values must be finite".into()));
    }
    if plane.ambient_dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: plane.ambient_dim() });
    }
    let na = angles.len();
    let cells: Result<Vec<XrayValue>> = (0..offsets.len() * na)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / na, idx % na);
            let path = escaping_plane_line(f, plane, offsets[i], angles[j])?;
            xray_transform(f, &path, quad)
        })
        .collect();
    let cells = cells?;
    Ok(Sinogram {
        values: cells.iter().map(|c| c.value).collect(),
        errors: cells.iter().map(|c| c.error).collect(),
        offsets: offsets.to_vec(),
        angles: angles.to_vec(),
        geometry: plane.geometry(),
        plane: plane.label().to_string(),
    })
}

/// `n` equally spaced values on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` angles `jπ/n`.
pub fn half_turn_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| std::f64::consts::PI * j as f64 / n as f64).collect()
}

/// 1D profile on `ℝ` extended constantly over the `S²` factor of `ℝ × S²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineProfile {
    /// `amplitude · v (1 − v²)³`, `v = u / width`; odd.
    OddBump { amplitude: f64, width: f64 },
    /// `amplitude · (1 − v²)³`; even.
    EvenBump { amplitude: f64, width: f64 },
}

impl LineProfile {
    pub fn width(&self) -> f64 {
        match *self {
            LineProfile::OddBump { width, .. } | LineProfile::EvenBump { width, .. } => width,
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        let w = self.width();
        let v = u / w;
        if v.abs() >= 1.0 {
            return 0.0;
        }
        let c = (1.0 - v * v).powi(3);
        match *self {
            LineProfile::OddBump { amplitude, .. } => amplitude * v * c,
            LineProfile::EvenBump { amplitude, .. } => amplitude * c,
        }
    }

    /// Largest `|f₀|`, by dense sampling.
    pub fn max_abs(&self) -> f64 {
        let w = self.width();
        (0..=20000).map(|k| self.value(-w + 2.0 * w * k as f64 / 20000.0).abs()).fold(0.0, f64::max)
    }
}

/// Unit-speed geodesic of `ℝ × S²` in `ℝ × ℝ³`: line part `x0 + a t`, great
/// circle part `cos(bt) p + sin(bt) w` with `p ⊥ w` unit vectors.
pub fn product_sphere_geodesic(x0: f64, a: f64, p: [f64; 3], w: [f64; 3], half_length: f64) -> Result<GeodesicPath> {
    if a == 0.0 {
        return Err(Error::NonEscaping);
    }
    if !(a.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("line speed must lie in [-1, 1], got {a}")));
    }
    let b = (1.0 - a * a).sqrt();
    Ok(GeodesicPath::closed_form(4, (-half_length, half_length), 1.0, move |t| {
        let (s, c) = (b * t).sin_cos();
        vec![x0 + a * t, c * p[0] + s * w[0], c * p[1] + s * w[1], c * p[2] + s * w[2]]
    })
    .with_velocity(move |t| {
        let (s, c) = (b * t).sin_cos();
        vec![a, b * (-s * p[0] + c * w[0]), b * (-s * p[1] + c * w[1]), b * (-s * p[2] + c * w[2])]
    }))
}

/// `∫ f₀(γ(t)₀) dt` over the parameters where the line part is in the
/// support of `f₀`.
pub fn product_sphere_integral(f0: &LineProfile, path: &GeodesicPath) -> Result<XrayValue> {
    let (_, v) = path.eval(0.0);
    let a = v[0];
    if a == 0.0 {
        return Err(Error::NonEscaping);
    }
    let x0 = path.point(0.0)[0];
    let w = f0.width();
    let (t1, t2) = ((-w - x0) / a, (w - x0) / a);
    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    let (d0, d1) = path.domain();
    if lo < d0 || hi > d1 {
        return Err(Error::NonEscaping);
    }
    let g = |t: f64| f0.value(path.point(t)[0]);
    let r = adaptive_simpson(&g, lo, hi, 1e-13, 50, 8);
    Ok(XrayValue { value: r.value, error: r.error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductSphereReport {
    pub samples: usize,
    pub max_abs_integral: f64,
    pub max_abs_f: f64,
}

/// Integrates `f₀` over `samples` escaping geodesics of `ℝ × S²` with line
/// speeds `a ∈ (0, 1]` and offsets spread over `[−2w, 2w]`.
pub fn product_sphere_demo(f0: &LineProfile, samples: usize) -> Result<ProductSphereReport> {
    if samples == 0 {
        return Err(Error::Empty("geodesic sample"));
    }
    let w = f0.width();
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let values: Result<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            // a in (0, 1], never zero
            let a = ((k as f64 + 0.5) / samples as f64).max(1e-3);
            let x0 = w * (4.0 * ((k as f64 * golden).fract()) - 2.0);
            let phi = 2.0 * std::f64::consts::PI * ((k as f64 * 0.3819660112501051).fract());
            let p = [phi.cos(), phi.sin(), 0.0];
            let q = [0.0, 0.0, 1.0];
            let half = (x0.abs() + w) / a + 1.0;
            let path = product_sphere_geodesic(x0, a, p, q, half)?;
            Ok(product_sphere_integral(f0, &path)?.value)
        })
        .collect();
    let max_abs_integral = values?.into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ProductSphereReport { samples, max_abs_integral, max_abs_f: f0.max_abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xy_plane() -> PlaneChart {
        PlaneChart::new("xy", vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], PlaneGeometry::Flat).unwrap()
    }

    /// Midpoint rule on a very fine grid, used as an independent oracle.
    fn dense_line(f: &Phantom, p: [f64; 3], d: [f64; 3], half: f64, n: usize) -> f64 {
        let h = 2.0 * half / n as f64;
        (0..n)
            .map(|k| {
                let t = -half + (k as f64 + 0.5) * h;
                f.value(&[p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]])
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn line_through_bump_matches_oracles() {
        let f = Phantom::single(vec![0.2, -0.1, 0.0], 0.7, 1.3);
        let plane = xy_plane();
        for &(s, th) in &[(0.0, 0.3), (0.35, 1.1), (-0.5, 2.0)] {
            let path = escaping_plane_line(&f, &plane, s, th).unwrap();
            let v = xray_transform(&f, &path, &QuadSettings::default()).unwrap();
            let p = (0.2 * th.cos() - 0.1 * th.sin() - s).abs();
            let exact = f.bumps[0].line_integral(p);
            assert!((v.value - exact).abs() <= 1e-6 * exact.abs().max(1e-12), "{} vs {exact}", v.value);
            let dense = dense_line(&f, [s * th.cos(), s * th.sin(), 0.0], [-th.sin(), th.cos(), 0.0], 3.0, 200_000);
            assert!((v.value - dense).abs() <= 1e-6 * dense.abs());
        }
    }

    #[test]
    fn disjoint_and_non_escaping() {
        let f = Phantom::single(vec![0.0, 5.0, 0.0], 0.5, 1.0);
        let path = escaping_plane_line(&f, &xy_plane(), 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_eq!(xray_transform(&f, &path, &QuadSettings::default()).unwrap().value, 0.0);
        let short = plane_line(&xy_plane(), 0.0, 0.0, 1.0);
        assert!(matches!(xray_transform(&f, &short, &QuadSettings::default()), Err(Error::NonEscaping)));
    }

    #[test]
    fn centered_bump_sinogram_is_angle_constant() {
        let f = Phantom::single(vec![0.0; 3], 0.8, 1.0);
        let s = sinogram_plane(&f, &xy_plane(), &uniform_grid(-1.0, 1.0, 9), &half_turn_angles(12), &QuadSettings::default()).unwrap();
        for i in 0..9 {
            let row: Vec<f64> = (0..12).map(|j| s.get(i, j)).collect();
            let spread = row.iter().fold(f64::NEG_INFINITY, |m: f64, v| m.max(*v)) - row.iter().fold(f64::INFINITY, |m: f64, v| m.min(*v));
            assert!(spread <= 1e-6);
        }
        let off = Phantom::single(vec![0.0, 0.0, 2.0], 0.8, 1.0);
        let z = sinogram_plane(&off, &xy_plane(), &uniform_grid(-1.0, 1.0, 5), &half_turn_angles(4), &QuadSettings::default()).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert!(sinogram_plane(&f, &xy_plane(), &[], &[0.0], &QuadSettings::default()).is_err());
    }

    #[test]
    fn hyperbolic_lines_are_unit_speed_geodesics() {
        let plane = PlaneChart::new("h", vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], PlaneGeometry::Hyperbolic).unwrap();
        let path = plane_line(&plane, 0.4, 0.9, 3.0);
        // intrinsic distance between parameters equals their difference
        for &(a, b) in &[(-2.0, 1.0), (0.0, 2.5), (-0.3, 0.2)] {
            let pa = path.point(a);
            let pb = path.point(b);
            let d = plane.intrinsic_distance([pa[0], pa[1]], [pb[0], pb[1]]);
            assert!((d - (b - a)).abs() < 1e-9, "{d}");
        }
    }

    #[test]
    fn odd_profile_integrates_to_zero() {
        let odd = LineProfile::OddBump { amplitude: 5.0, width: 1.0 };
        let rep = product_sphere_demo(&odd, 100).unwrap();
        assert!(rep.max_abs_f >= 1.0);
        assert!(rep.max_abs_integral <= 1e-8, "{}", rep.max_abs_integral);
        let even = LineProfile::EvenBump { amplitude: 1.0, width: 1.0 };
        assert!(product_sphere_demo(&even, 10).unwrap().max_abs_integral > 0.1);
        assert!(matches!(product_sphere_geodesic(0.0, 0.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 5.0), Err(Error::NonEscaping)));
        let pure = product_sphere_geodesic(0.3, 1.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 5.0).unwrap();
        assert!(product_sphere_integral(&odd, &pure).unwrap().value.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn linear_reversible_positive(
            c1 in -2.0..2.0f64, c2 in -2.0..2.0f64,
            s in -0.5..0.5f64, th in 0.0..std::f64::consts::PI,
        ) {
            let f1 = Phantom::single(vec![0.1, 0.2, 0.0], 0.6, 1.0);
            let f2 = Phantom::new(vec![
                Bump { center: vec![-0.3, 0.0, 0.0], radius: 0.4, amplitude: 2.0 },
                Bump { center: vec![0.2, -0.3, 0.0], radius: 0.3, amplitude: 0.5 },
            ]).unwrap();
            let comb = Phantom::combine(c1, &f1, c2, &f2).unwrap();
            let plane = xy_plane();
            let q = QuadSettings::default();
            let path = escaping_plane_line(&comb, &plane, s, th).unwrap();
            let x = |f: &Phantom| xray_transform(f, &path, &q).unwrap().value;
            prop_assert!((x(&comb) - c1 * x(&f1) - c2 * x(&f2)).abs() <= 1e-8);
            let back = path.reversed();
            prop_assert!((xray_transform(&comb, &back, &q).unwrap().value - x(&comb)).abs() <= 1e-10);
            // line through the interior of a nonnegative bump
            let through = escaping_plane_line(&f1, &plane, 0.1 * th.cos() + 0.2 * th.sin(), th).unwrap();
            prop_assert!(x_pos(&f1, &through) > 0.0);
        }
    }

    fn x_pos(f: &Phantom, path: &GeodesicPath) -> f64 {
        xray_transform(f, path, &QuadSettings::default()).unwrap().value
    }

    #[test]
    fn quadrature_converges() {
        let f = Phantom::single(vec![0.1, 0.0, 0.0], 0.5, 1.0);
        let path = escaping_plane_line(&f, &xy_plane(), 0.2, 0.4).unwrap();
        let a = xray_transform(&f, &path, &QuadSettings::default()).unwrap().value;
        let fine = QuadSettings { scan_step: 0.025, steps_per_radius: 16.0, ..QuadSettings::default() };
        let b = xray_transform(&f, &path, &fine).unwrap().value;
        assert!((a - b).abs() <= 1e-8);
    }
}
