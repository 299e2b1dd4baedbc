//! Filtered backprojection on flat planes and end-to-end support checks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nilgroup::{geodesic_flow_with, FlowOptions, TwoStepGroup};
use crate::path::GeodesicPath;
use crate::plane::{PlaneChart, PlaneGeometry};
use crate::support::{khat_with, CompactSet, KhatOptions, PlaneHull, ProbeGrid};
use crate::warped::{Variant, WarpedMetric};
use crate::xray::{escaping_plane_line, half_turn_angles, is_escaping, sinogram_plane, Sinogram, uniform_grid, xray_transform, Phantom, QuadSettings};

/// Square pixel grid on a plane chart, `pixels × pixels` cells centred on
/// `center` with half side `half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub pixels: usize,
    pub half_width: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

impl ImageGrid {
    pub fn new(pixels: usize, half_width: f64) -> Self {
        ImageGrid { pixels, half_width, center: [0.0, 0.0] }
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_width / self.pixels as f64
    }

    /// Chart coordinates of the centre of pixel `(ix, iy)`.
    pub fn coords(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.pixel_size();
        [
            self.center[0] - self.half_width + (ix as f64 + 0.5) * h,
            self.center[1] - self.half_width + (iy as f64 + 0.5) * h,
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.pixels == 0 || !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "image grid needs pixels > 0 and a positive half width, got {} and {}",
                self.pixels, self.half_width
            )));
        }
        Ok(())
    }
}

/// Row-major image, `values[iy * pixels + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub grid: ImageGrid,
    pub values: Vec<f64>,
}

impl Image {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.pixels + ix]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Samples `f` at the pixel centres.
    pub fn sample(grid: ImageGrid, f: impl Fn([f64; 2]) -> f64 + Sync) -> Self {
        let n = grid.pixels;
        let values = (0..n * n).into_par_iter().map(|k| f(grid.coords(k % n, k / n))).collect();
        Image { grid, values }
    }

    /// `‖self − truth‖₂ / ‖truth‖₂` over the pixels selected by `mask`.
    pub fn relative_l2_error(&self, truth: &Image, mask: impl Fn([f64; 2]) -> bool) -> f64 {
        let n = self.grid.pixels;
        let (mut num, mut den) = (0.0, 0.0);
        for iy in 0..n {
            for ix in 0..n {
                if mask(self.grid.coords(ix, iy)) {
                    let t = truth.get(ix, iy);
                    num += (self.get(ix, iy) - t).powi(2);
                    den += t * t;
                }
            }
        }
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }

    /// Centroid of `|value|` over pixels where `select` holds.
    pub fn centroid(&self, select: impl Fn([f64; 2]) -> bool) -> Option<[f64; 2]> {
        let n = self.grid.pixels;
        let (mut w, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for iy in 0..n {
            for ix in 0..n {
                let p = self.grid.coords(ix, iy);
                if select(p) {
                    let v = self.get(ix, iy).abs();
                    w += v;
                    cx += v * p[0];
                    cy += v * p[1];
                }
            }
        }
        (w > 0.0).then(|| [cx / w, cy / w])
    }

    /// 8-bit grey levels, linearly mapping `[min, max]` to `[0, 255]`.
    pub fn to_grey(&self) -> Vec<u8> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let n = self.grid.pixels;
        // top row of the picture is the largest v
        let mut out = Vec::with_capacity(n * n);
        for iy in (0..n).rev() {
            for ix in 0..n {
                out.push((255.0 * (self.get(ix, iy) - lo) / span).round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }
}

/// Band-limited ramp filter sampled at spacing `delta`, for lags
/// `-(n-1)..=(n-1)`, stored at index `lag + n - 1`.
pub fn ramp_kernel(n: usize, delta: f64) -> Vec<f64> {
    let mut k = vec![0.0; 2 * n - 1];
    for (i, slot) in k.iter_mut().enumerate() {
        let m = i as i64 - (n as i64 - 1);
        *slot = if m == 0 {
            1.0 / (4.0 * delta * delta)
        } else if m % 2 != 0 {
            -1.0 / ((m * m) as f64 * PI * PI * delta * delta)
        } else {
            0.0
        };
    }
    k
}

fn uniform_spacing(values: &[f64], what: &str) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidGrid(format!("{what} grid needs at least two samples")));
    }
    let d = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
    if !(d > 0.0) {
        return Err(Error::InvalidGrid(format!("{what} grid must be increasing")));
    }
    for (i, v) in values.iter().enumerate() {
        let expect = values[0] + i as f64 * d;
        if (v - expect).abs() > 1e-9 * d.max(v.abs()) {
            return Err(Error::InvalidGrid(format!("{what} grid is not uniform at index {i}")));
        }
    }
    Ok(d)
}

/// Filtered backprojection of a flat-plane sinogram onto `grid`.
///
/// Offsets must be uniform; angles must be uniform with spacing `π / N`
/// so that they cover a half turn. Each projection is convolved with the
/// ramp kernel through a zero-padded FFT and the filtered projections are
/// backprojected with linear interpolation.
pub fn filtered_backprojection(s: &Sinogram, grid: &ImageGrid) -> Result<Image> {
    if s.geometry != PlaneGeometry::Flat {
        return Err(Error::InvalidArgument("filtered backprojection needs a flat plane".into()));
    }
    grid.validate()?;
    let ds = uniform_spacing(&s.offsets, "offset")?;
    let na = s.angles.len();
    let dtheta = if na == 1 {
        PI
    } else {
        uniform_spacing(&s.angles, "angle")?
    };
    if ((na as f64) * dtheta - PI).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!("{na} angles with spacing {dtheta} do not cover a half turn")));
    }
    if s.values.len() != s.offsets.len() * na {
        return Err(Error::InvalidGrid("sinogram size does not match its grids".into()));
    }
    let filtered = filter_projections(s, ds);
    let n = grid.pixels;
    let no = s.offsets.len();
    let s0 = s.offsets[0];
    let trig: Vec<(f64, f64)> = s.angles.iter().map(|a| a.sin_cos()).collect();
    let values = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let [x, y] = grid.coords(k % n, k / n);
            let mut acc = 0.0;
            for (j, (sn, cs)) in trig.iter().enumerate() {
                let pos = (x * cs + y * sn - s0) / ds;
                if pos < 0.0 || pos > (no - 1) as f64 {
                    continue;
                }
                let i = (pos.floor() as usize).min(no - 2);
                let w = pos - i as f64;
                let q = &filtered[j];
                acc += (1.0 - w) * q[i] + w * q[i + 1];
            }
            acc * dtheta
        })
        .collect();
    Ok(Image { grid: *grid, values })
}


/// Ramp-filtered projections, one vector of offsets per angle.
fn filter_projections(s: &Sinogram, ds: f64) -> Vec<Vec<f64>> {
    let no = s.offsets.len();
    let na = s.angles.len();
    let len = (2 * no).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let kernel = ramp_kernel(no, ds);
    let mut kf = vec![Complex::new(0.0, 0.0); len];
    for (i, v) in kernel.iter().enumerate() {
        let lag = i as i64 - (no as i64 - 1);
        kf[lag.rem_euclid(len as i64) as usize] = Complex::new(*v, 0.0);
    }
    fwd.process(&mut kf);
    (0..na)
        .into_par_iter()
        .map(|j| {
            let mut buf = vec![Complex::new(0.0, 0.0); len];
            for i in 0..no {
                buf[i] = Complex::new(s.get(i, j), 0.0);
            }
            fwd.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kf) {
                *b *= k;
            }
            inv.process(&mut buf);
            let scale = ds / len as f64;
            buf[..no].iter().map(|c| c.re * scale).collect()
        })
        .collect()
}

/// A plane cover on which support can be checked end to end.
pub trait CoverGeometry: Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// The sampled plane family; fixed for the lifetime of the cover.
    fn planes(&self) -> &[PlaneChart];
    /// Two-sided unit-speed geodesic through `start` with initial direction
    /// `direction` (any nonzero chart vector), defined on `[-horizon, horizon]`.
    fn geodesic(&self, start: &[f64], direction: &[f64], horizon: f64) -> Result<GeodesicPath>;
    /// Radius `D` with `K̂ ⊂ B_D`, when the cover guarantees one.
    fn radius_bound(&self, _k: &CompactSet) -> Option<f64> {
        None
    }
}

/// Warped manifold with the planes `E_α`.
#[derive(Debug, Clone)]
pub struct WarpedCover {
    pub metric: WarpedMetric,
    pub step: f64,
    planes: Vec<PlaneChart>,
}

impl WarpedCover {
    pub fn new(metric: WarpedMetric, plane_count: usize, step: f64) -> Result<Self> {
        if plane_count == 0 {
            return Err(Error::Empty("plane family"));
        }
        let planes = metric.plane_family(plane_count);
        Ok(WarpedCover { metric, step, planes })
    }
}

impl CoverGeometry for WarpedCover {
    fn name(&self) -> String {
        match self.metric.variant() {
            Variant::Euclidean => "warped-euclidean".into(),
            Variant::Hyperbolic => "warped-hyperbolic".into(),
        }
    }

    fn dim(&self) -> usize {
        3
    }

    fn planes(&self) -> &[PlaneChart] {
        &self.planes
    }

    fn geodesic(&self, start: &[f64], direction: &[f64], horizon: f64) -> Result<GeodesicPath> {
        if start.len() != 3 || direction.len() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: start.len().max(direction.len()) });
        }
        self.metric.geodesic_line_cartesian(
            [start[0], start[1], start[2]],
            [direction[0], direction[1], direction[2]],
            horizon,
            self.step,
        )
    }

    fn radius_bound(&self, k: &CompactSet) -> Option<f64> {
        (self.metric.variant() == Variant::Euclidean).then(|| k.max_norm())
    }
}

/// Two-step nilpotent group with the translates of one flat.
#[derive(Debug, Clone)]
pub struct GroupCover {
    pub group: TwoStepGroup,
    pub step: f64,
    planes: Vec<PlaneChart>,
}

impl GroupCover {
    pub fn new(group: TwoStepGroup, planes: Vec<PlaneChart>, step: f64) -> Result<Self> {
        if planes.is_empty() {
            return Err(Error::Empty("plane family"));
        }
        if let Some(p) = planes.iter().find(|p| p.ambient_dim() != group.dim()) {
            return Err(Error::DimensionMismatch { expected: group.dim(), got: p.ambient_dim() });
        }
        Ok(GroupCover { group, step, planes })
    }
}

impl CoverGeometry for GroupCover {
    fn name(&self) -> String {
        format!("group-dim{}", self.group.dim())
    }

    fn dim(&self) -> usize {
        self.group.dim()
    }

    fn planes(&self) -> &[PlaneChart] {
        &self.planes
    }

    fn geodesic(&self, start: &[f64], direction: &[f64], horizon: f64) -> Result<GeodesicPath> {
        let norm = self.group.inner(direction, direction).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("zero initial direction".into()));
        }
        let v: Vec<f64> = direction.iter().map(|x| x / norm).collect();
        Ok(geodesic_flow_with(&self.group, start, &v, horizon, self.step, &FlowOptions::default())?.path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// In-plane lines per plane for the vanishing-data check.
    pub hypothesis_offsets: usize,
    pub hypothesis_angles: usize,
    /// Random geodesics off the sampled planes.
    pub extra_geodesics: usize,
    pub extra_horizon: f64,
    pub seed: u64,
    /// Flat planes that also get a reconstruction.
    pub reconstruct_planes: usize,
    pub fbp_offsets: usize,
    pub fbp_angles: usize,
    pub image_pixels: usize,
    /// Allowed `max |FBP|` outside the hull, relative to the phantom amplitude.
    pub residual_tol: f64,
    /// `|Xf|` on avoiding geodesics may reach this multiple of the
    /// quadrature error estimate.
    pub hypothesis_factor: f64,
    pub probe_spacing: f64,
    /// Chart step used when deciding whether a geodesic meets `K`.
    pub avoidance_step: f64,
    pub quad: QuadSettings,
    pub khat: KhatOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            hypothesis_offsets: 21,
            hypothesis_angles: 24,
            extra_geodesics: 48,
            extra_horizon: 12.0,
            seed: 0,
            reconstruct_planes: 2,
            fbp_offsets: 128,
            fbp_angles: 160,
            image_pixels: 64,
            residual_tol: 0.05,
            hypothesis_factor: 10.0,
            probe_spacing: 0.1,
            avoidance_step: 0.01,
            quad: QuadSettings::default(),
            khat: KhatOptions::default(),
        }
    }
}

/// Vanishing of `Xf` on the sampled geodesics that avoid `K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub geodesics_sampled: usize,
    pub avoiding: usize,
    /// Off-plane samples dropped because they did not leave the support ball.
    pub non_escaping: usize,
    pub max_abs_xray: f64,
    pub max_quad_error: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneResidual {
    pub plane: String,
    pub meets_support: bool,
    pub hull_vertices: usize,
    /// `max |f|` at pixel centres outside the hull (exact phantom values).
    pub max_outside_exact: f64,
    /// `max |FBP|` outside the hull, relative to the phantom amplitude.
    pub max_outside_reconstructed: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyCheck {
    pub probes: usize,
    pub inside_khat: usize,
    /// Probes where `f ≠ 0`.
    pub support_probes: usize,
    pub support_outside_khat: usize,
    pub radius_bound: Option<f64>,
    pub max_inside_norm: f64,
    pub bound_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub geometry: String,
    pub hypothesis: HypothesisCheck,
    pub planes: Vec<PlaneResidual>,
    pub occupancy: OccupancyCheck,
    /// `supp f` inside the hull on every plane and inside `K̂` at every probe.
    pub conclusion_holds: bool,
    pub hypothesis_violated: bool,
    /// The hypothesis fails or the conclusion holds.
    pub consistent: bool,
    #[serde(skip)]
    pub images: Vec<(String, Image)>,
}

/// Smallest chart distance from `path` to `k`, sampled with chart step
/// `step` over the whole domain.
pub fn path_distance(k: &CompactSet, path: &GeodesicPath, step: f64) -> f64 {
    let (a, b) = path.domain();
    let mut t = a;
    let mut best = f64::INFINITY;
    loop {
        let (p, v) = path.eval(t);
        let d = k.distance(&p);
        best = best.min(d);
        if t >= b || best <= 0.0 {
            break;
        }
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        // stride further while far away; the distance is 1-Lipschitz
        let h = (step.max(0.5 * d)) / vn;
        t = (t + h).min(b);
    }
    best
}

/// Whether `path` stays more than one sampling step away from `k`.
pub fn avoids(k: &CompactSet, path: &GeodesicPath, step: f64) -> bool {
    path_distance(k, path, step) > step
}

/// Recentred copy of a flat plane with origin at chart point `c`.
fn recentre(plane: &PlaneChart, c: [f64; 2]) -> Result<PlaneChart> {
    let (d1, d2) = plane.directions();
    PlaneChart::new(plane.label(), plane.embed(c[0], c[1]), d1.to_vec(), d2.to_vec(), plane.geometry())
}

/// Centre and radius, in chart units, of a disc containing the slice of the
/// phantom's support ball (`None` when the plane misses the ball).
fn support_disc(f: &Phantom, plane: &PlaneChart) -> Option<([f64; 2], f64)> {
    let ball = CompactSet::ball(f.support_ball.center.clone(), f.support_ball.radius);
    let slice = ball.slice(plane, 64);
    if slice.is_empty() {
        return None;
    }
    let n = slice.len() as f64;
    let c = [slice.iter().map(|p| p[0]).sum::<f64>() / n, slice.iter().map(|p| p[1]).sum::<f64>() / n];
    let r = slice.iter().map(|p| plane.intrinsic_distance(c, *p)).fold(0.0, f64::max);
    Some((c, r.max(1e-9)))
}

/// End-to-end check of the support theorem for `f` and `K` on `cover`.
///
/// The hypothesis is tested on in-plane lines and random off-plane
/// geodesics, all chosen independently of `K`, so enlarging `K` can only
/// shrink the set of avoiding geodesics. The conclusion is checked on every
/// plane (exact phantom values outside the hull, plus FBP residuals on a few
/// flat planes) and on a probe grid against `K̂`.
pub fn support_verification<G: CoverGeometry + ?Sized>(
    f: &Phantom,
    k: &CompactSet,
    cover: &G,
    config: &VerifyConfig,
) -> Result<VerificationReport> {
    f.validate()?;
    if f.dim() != cover.dim() {
        return Err(Error::DimensionMismatch { expected: cover.dim(), got: f.dim() });
    }
    let planes = cover.planes();
    let amp = f.amplitude_scale();
    let hulls: Vec<PlaneHull> = planes.par_iter().map(|p| PlaneHull::build(k, p, &config.khat)).collect::<Result<_>>()?;
    let discs: Vec<Option<([f64; 2], f64)>> = planes.iter().map(|p| support_disc(f, p)).collect();

    // in-plane lines
    let mut lines: Vec<GeodesicPath> = Vec::new();
    for (plane, disc) in planes.iter().zip(&discs) {
        let Some((c, r)) = disc else { continue };
        let chart = match plane.geometry() {
            PlaneGeometry::Flat => recentre(plane, *c)?,
            PlaneGeometry::Hyperbolic => plane.clone(),
        };
        let offsets = match plane.geometry() {
            PlaneGeometry::Flat => uniform_grid(-r, *r, config.hypothesis_offsets),
            PlaneGeometry::Hyperbolic => {
                let reach = plane.intrinsic_distance([0.0, 0.0], *c) + r;
                uniform_grid(-reach, reach, config.hypothesis_offsets)
            }
        };
        for s in &offsets {
            for a in half_turn_angles(config.hypothesis_angles) {
                lines.push(escaping_plane_line(f, &chart, *s, a)?);
            }
        }
    }
    // off-plane geodesics from the support ball
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut non_escaping = 0;
    let mut extra_inputs = Vec::with_capacity(config.extra_geodesics);
    for _ in 0..config.extra_geodesics {
        let dir: Vec<f64> = (0..f.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let offs: Vec<f64> = (0..f.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let on = offs.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let rad = f.support_ball.radius * rng.random_range(0.0..1.0f64).powf(1.0 / f.dim() as f64);
        let start: Vec<f64> = f.support_ball.center.iter().zip(&offs).map(|(c, o)| c + rad * o / on).collect();
        extra_inputs.push((start, dir));
    }
    let extra: Vec<Result<GeodesicPath>> =
        extra_inputs.par_iter().map(|(s, d)| cover.geodesic(s, d, config.extra_horizon)).collect();
    for g in extra {
        let g = g?;
        if is_escaping(f, &g) {
            lines.push(g);
        } else {
            non_escaping += 1;
        }
    }

    let evaluated: Vec<(f64, f64, bool)> = lines
        .par_iter()
        .map(|g| {
            let x = xray_transform(f, g, &config.quad)?;
            Ok((x.value, x.error, avoids(k, g, config.avoidance_step)))
        })
        .collect::<Result<_>>()?;
    let max_quad_error = evaluated.iter().map(|e| e.1).fold(0.0, f64::max);
    let threshold = config.hypothesis_factor * max_quad_error.max(config.quad.rel_tol * amp);
    let max_abs_xray = evaluated.iter().filter(|e| e.2).map(|e| e.0.abs()).fold(0.0, f64::max);
    let hypothesis = HypothesisCheck {
        geodesics_sampled: evaluated.len(),
        avoiding: evaluated.iter().filter(|e| e.2).count(),
        non_escaping,
        max_abs_xray,
        max_quad_error,
        threshold,
        holds: max_abs_xray <= threshold,
    };

    // conclusion on each plane
    let mut order: Vec<usize> = (0..planes.len()).filter(|&i| discs[i].is_some() && planes[i].geometry() == PlaneGeometry::Flat).collect();
    order.sort_by(|&a, &b| discs[b].unwrap().1.total_cmp(&discs[a].unwrap().1).then(a.cmp(&b)));
    order.truncate(config.reconstruct_planes);
    let mut residuals = Vec::with_capacity(planes.len());
    let mut images = Vec::new();
    for (i, (plane, ph)) in planes.iter().zip(&hulls).enumerate() {
        let Some((c, r)) = discs[i] else {
            residuals.push(PlaneResidual {
                plane: plane.label().to_string(),
                meets_support: false,
                hull_vertices: ph.hull.vertices().len(),
                max_outside_exact: 0.0,
                max_outside_reconstructed: None,
                holds: true,
            });
            continue;
        };
        let grid = ImageGrid { pixels: config.image_pixels, half_width: 1.1 * r, center: c };
        let exact = Image::sample(grid, |uv| f.value(&plane.embed(uv[0], uv[1])));
        let margin = 2.0 * grid.pixel_size();
        let outside = |uv: [f64; 2]| match plane.geometry() {
            PlaneGeometry::Flat => !ph.hull.contains_with_tol(uv, margin),
            PlaneGeometry::Hyperbolic => !ph.hull_contains(uv),
        };
        let max_exact = masked_max(&exact, outside);
        let mut recon = None;
        if order.contains(&i) {
            let chart = recentre(plane, c)?;
            let ds = r * 1.05;
            let sino = sinogram_plane(f, &chart, &uniform_grid(-ds, ds, config.fbp_offsets), &half_turn_angles(config.fbp_angles), &config.quad)?;
            let local = ImageGrid { center: [0.0, 0.0], ..grid };
            let mut img = filtered_backprojection(&sino, &local)?;
            img.grid = grid;
            recon = Some(masked_max(&img, outside) / amp.max(f64::MIN_POSITIVE));
            images.push((plane.label().to_string(), img));
        }
        let holds = max_exact == 0.0 && recon.is_none_or(|v| v <= config.residual_tol);
        residuals.push(PlaneResidual {
            plane: plane.label().to_string(),
            meets_support: true,
            hull_vertices: ph.hull.vertices().len(),
            max_outside_exact: max_exact,
            max_outside_reconstructed: recon,
            holds,
        });
    }

    // probes against K̂
    let khat = khat_with(k, planes, &config.khat)?;
    let grid = ProbeGrid {
        center: f.support_ball.center.clone(),
        half_width: 1.5 * f.support_ball.radius.max(k.max_norm()),
        spacing: config.probe_spacing,
    };
    let probes = grid.probes(planes);
    let inside = khat.occupancy(&probes);
    let support_flags: Vec<bool> = probes.iter().map(|p| f.value(p) != 0.0).collect();
    let support_outside = support_flags.iter().zip(&inside).filter(|(s, i)| **s && !**i).count();
    let max_inside_norm = probes
        .iter()
        .zip(&inside)
        .filter(|(_, i)| **i)
        .map(|(p, _)| p.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let radius_bound = cover.radius_bound(k);
    let occupancy = OccupancyCheck {
        probes: probes.len(),
        inside_khat: inside.iter().filter(|b| **b).count(),
        support_probes: support_flags.iter().filter(|b| **b).count(),
        support_outside_khat: support_outside,
        radius_bound,
        max_inside_norm,
        bound_holds: radius_bound.map(|d| max_inside_norm <= d + config.khat.plane_tol + 1e-9),
    };

    let conclusion_holds =
        residuals.iter().all(|r| r.holds) && occupancy.support_outside_khat == 0 && occupancy.bound_holds != Some(false);
    let hypothesis_violated = !hypothesis.holds;
    Ok(VerificationReport {
        geometry: cover.name(),
        consistent: hypothesis_violated || conclusion_holds,
        hypothesis,
        planes: residuals,
        occupancy,
        conclusion_holds,
        hypothesis_violated,
        images,
    })
}

fn masked_max(img: &Image, select: impl Fn([f64; 2]) -> bool) -> f64 {
    let n = img.grid.pixels;
    let mut m: f64 = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            if select(img.grid.coords(ix, iy)) {
                m = m.max(img.get(ix, iy).abs());
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::Bump;

    fn xy_plane() -> PlaneChart {
        PlaneChart::new("xy", vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], PlaneGeometry::Flat).unwrap()
    }

    /// Closed-form sinogram of planar bumps (independent of the quadrature).
    fn analytic_sinogram(bumps: &[([f64; 2], f64, f64)], offsets: &[f64], angles: &[f64]) -> Sinogram {
        let mut values = Vec::new();
        for s in offsets {
            for a in angles {
                let (sn, cs) = a.sin_cos();
                let mut v = 0.0;
                for (c, rho, amp) in bumps {
                    let p = s - (c[0] * cs + c[1] * sn);
                    let u = 1.0 - p * p / (rho * rho);
                    if u > 0.0 {
                        v += amp * 32.0 / 35.0 * rho * u.powf(3.5);
                    }
                }
                values.push(v);
            }
        }
        Sinogram {
            errors: vec![0.0; values.len()],
            values,
            offsets: offsets.to_vec(),
            angles: angles.to_vec(),
            geometry: PlaneGeometry::Flat,
            plane: "test".into(),
        }
    }

    fn bump2(c: [f64; 2], rho: f64, amp: f64) -> impl Fn([f64; 2]) -> f64 {
        move |p| {
            let u = 1.0 - ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (rho * rho);
            if u > 0.0 { amp * u * u * u } else { 0.0 }
        }
    }

    #[test]
    fn ramp_kernel_values() {
        let k = ramp_kernel(4, 0.5);
        assert_eq!(k.len(), 7);
        assert!((k[3] - 1.0).abs() < 1e-15);
        assert!((k[2] + 4.0 / (PI * PI)).abs() < 1e-15);
        assert_eq!(k[1], 0.0);
        assert_eq!(k[0], k[6]);
    }

    #[test]
    fn fbp_recovers_centred_bump() {
        let s = analytic_sinogram(&[([0.0, 0.0], 1.0, 1.0)], &uniform_grid(-1.5, 1.5, 128), &half_turn_angles(180));
        let grid = ImageGrid::new(64, 1.0);
        let img = filtered_backprojection(&s, &grid).unwrap();
        let truth = Image::sample(grid, bump2([0.0, 0.0], 1.0, 1.0));
        let err = img.relative_l2_error(&truth, |p| p[0] * p[0] + p[1] * p[1] <= 1.0);
        assert!(err < 0.03, "relative error {err}");
    }

    #[test]
    fn fbp_refinement_reduces_error() {
        let grid = ImageGrid::new(48, 1.0);
        let truth = Image::sample(grid, bump2([0.2, -0.1], 0.7, 1.0));
        let mut prev = f64::INFINITY;
        for (no, na) in [(24, 30), (64, 80), (160, 200)] {
            let s = analytic_sinogram(&[([0.2, -0.1], 0.7, 1.0)], &uniform_grid(-1.5, 1.5, no), &half_turn_angles(na));
            let img = filtered_backprojection(&s, &grid).unwrap();
            let err = img.relative_l2_error(&truth, |_| true);
            assert!(err < prev, "{err} !< {prev}");
            prev = err;
        }
    }

    #[test]
    fn fbp_rejects_bad_grids() {
        let mut s = analytic_sinogram(&[([0.0, 0.0], 1.0, 1.0)], &uniform_grid(-1.5, 1.5, 16), &half_turn_angles(8));
        s.offsets[3] += 0.01;
        assert!(matches!(filtered_backprojection(&s, &ImageGrid::new(8, 1.0)), Err(Error::InvalidGrid(_))));
        let s = analytic_sinogram(&[([0.0, 0.0], 1.0, 1.0)], &uniform_grid(-1.5, 1.5, 16), &uniform_grid(0.0, 1.0, 8));
        assert!(matches!(filtered_backprojection(&s, &ImageGrid::new(8, 1.0)), Err(Error::InvalidGrid(_))));
        let mut s = analytic_sinogram(&[([0.0, 0.0], 1.0, 1.0)], &uniform_grid(-1.5, 1.5, 16), &half_turn_angles(8));
        s.geometry = PlaneGeometry::Hyperbolic;
        assert!(filtered_backprojection(&s, &ImageGrid::new(8, 1.0)).is_err());
    }

    #[test]
    fn fbp_shift_covariance() {
        let offsets = uniform_grid(-2.0, 2.0, 160);
        let angles = half_turn_angles(160);
        let grid = ImageGrid::new(64, 1.6);
        let h = grid.pixel_size();
        let a = filtered_backprojection(&analytic_sinogram(&[([0.0, 0.0], 0.5, 1.0)], &offsets, &angles), &grid).unwrap();
        let shift = [0.3, -0.2];
        let b = filtered_backprojection(&analytic_sinogram(&[(shift, 0.5, 1.0)], &offsets, &angles), &grid).unwrap();
        let ca = a.centroid(|p| p[0].hypot(p[1]) < 0.5).unwrap();
        let cb = b.centroid(|p| (p[0] - shift[0]).hypot(p[1] - shift[1]) < 0.5).unwrap();
        let d = (cb[0] - ca[0] - shift[0]).hypot(cb[1] - ca[1] - shift[1]);
        assert!(d <= h, "shift error {d} vs pixel {h}");
    }

    #[test]
    fn fbp_of_quadrature_sinogram() {
        let f = Phantom::new(vec![Bump { center: vec![0.1, 0.2, 0.0], radius: 0.6, amplitude: 2.0 }]).unwrap();
        let s = sinogram_plane(&f, &xy_plane(), &uniform_grid(-1.2, 1.2, 96), &half_turn_angles(120), &QuadSettings::default()).unwrap();
        let grid = ImageGrid::new(48, 1.0);
        let img = filtered_backprojection(&s, &grid).unwrap();
        let truth = Image::sample(grid, |p| f.value(&[p[0], p[1], 0.0]));
        let err = img.relative_l2_error(&truth, |p| (p[0] - 0.1).hypot(p[1] - 0.2) <= 0.6);
        assert!(err < 0.05, "relative error {err}");
    }

    #[test]
    fn path_distance_is_sampled_minimum() {
        let path = GeodesicPath::closed_form(3, (-5.0, 5.0), 1.0, |t| vec![t, 2.0, 0.0]);
        let k = CompactSet::ball(vec![0.0, 0.0, 0.0], 1.0);
        let d = path_distance(&k, &path, 0.01);
        // adaptive strides can overshoot the closest approach a little
        assert!((1.0..1.05).contains(&d), "{d}");
        assert!(avoids(&k, &path, 0.01));
        let k2 = CompactSet::ball(vec![0.0, 0.0, 0.0], 2.5);
        assert!(!avoids(&k2, &path, 0.01));
    }

    fn small_config() -> VerifyConfig {
        VerifyConfig {
            hypothesis_offsets: 9,
            hypothesis_angles: 8,
            extra_geodesics: 8,
            reconstruct_planes: 1,
            fbp_offsets: 64,
            fbp_angles: 64,
            image_pixels: 32,
            probe_spacing: 0.2,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn verification_on_warped_cover() {
        let cover = WarpedCover::new(WarpedMetric::euclidean(), 6, 0.02).unwrap();
        let f = Phantom::new(vec![Bump { center: vec![0.2, 0.3, 0.1], radius: 0.5, amplitude: 1.0 }]).unwrap();
        let k = CompactSet::ball(vec![0.2, 0.3, 0.1], 0.6);
        let rep = support_verification(&f, &k, &cover, &small_config()).unwrap();
        assert!(rep.hypothesis.holds, "{:?}", rep.hypothesis);
        assert!(rep.conclusion_holds, "{:?} {:?}", rep.planes, rep.occupancy);
        assert!(rep.consistent);
        assert_eq!(rep.occupancy.bound_holds, Some(true));
        assert!(!rep.images.is_empty());

        // K that misses part of the support: the data cannot vanish
        let k_small = CompactSet::ball(vec![0.2, 0.3, 0.1], 0.2);
        let rep = support_verification(&f, &k_small, &cover, &small_config()).unwrap();
        assert!(rep.hypothesis_violated);
        assert!(rep.hypothesis.max_abs_xray > 1e-3);
        assert!(rep.consistent);
    }

    #[test]
    fn verification_on_group_cover() {
        use crate::liealg::LieAlgebra;
        use crate::nilgroup::{complement_lattice, group_planes};
        let group = TwoStepGroup::new(LieAlgebra::heisenberg_plus_line()).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0];
        let y = [0.0, 0.0, 0.0, 1.0];
        let lat = complement_lattice(&group, &x, &y, &[-0.5; 4], &[0.5; 4], 0.25).unwrap();
        let planes = group_planes(&group, (&x, &y), &lat).unwrap();
        let cover = GroupCover::new(group, planes, 0.02).unwrap();
        let f = Phantom::new(vec![Bump { center: vec![0.0; 4], radius: 0.3, amplitude: 1.0 }]).unwrap();
        let k = CompactSet::ball(vec![0.0; 4], 0.35);
        let cfg = VerifyConfig { extra_horizon: 6.0, ..small_config() };
        let rep = support_verification(&f, &k, &cover, &cfg).unwrap();
        assert!(rep.hypothesis.holds, "{:?}", rep.hypothesis);
        assert!(rep.conclusion_holds, "{:?}", rep.planes);
        assert_eq!(rep.occupancy.radius_bound, None);
    }

    #[test]
    fn enlarging_k_keeps_hypothesis() {
        let cover = WarpedCover::new(WarpedMetric::euclidean(), 4, 0.02).unwrap();
        let f = Phantom::new(vec![Bump { center: vec![0.0, 0.5, 0.0], radius: 0.3, amplitude: 1.0 }]).unwrap();
        let cfg = small_config();
        let mut prev_avoiding = usize::MAX;
        for r in [0.35, 0.6, 1.0] {
            let rep = support_verification(&f, &CompactSet::ball(vec![0.0, 0.5, 0.0], r), &cover, &cfg).unwrap();
            assert!(rep.hypothesis.holds);
            assert!(rep.hypothesis.avoiding <= prev_avoiding);
            prev_avoiding = rep.hypothesis.avoiding;
        }
    }
}
