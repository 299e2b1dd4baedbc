//! One function per subcommand. Each writes its artifacts and reports
//! whether its numerical checks passed.

use planecover::nilgroup::{
    complement_lattice, escape_profile, frame_grid, geodesic_flow_with, group_planes, paraboloid_khat, translation_lattice,
    EscapeOptions, FlowOptions, TwoStepGroup, ENERGY_TOL,
};
use planecover::reconstruct::{filtered_backprojection, support_verification, CoverGeometry, GroupCover, ImageGrid, WarpedCover};
use planecover::support::{dk_bound, khat_with, measured_khat, CompactSet, KhatOptions, ProbeGrid};
use planecover::warped::{CylPoint, WarpedMetric};
use planecover::xray::{half_turn_angles, sinogram_plane, uniform_grid, xray_transform};
use planecover::{GeodesicPath, PlaneChart, PlaneGeometry};
use serde_json::json;

use crate::artifacts::OutDir;
use crate::config::*;
use crate::exit::Failure;

pub struct Ctx {
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
    pub config_dir: std::path::PathBuf,
}

pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    /// Seed actually used, when the command draws random samples.
    pub seed: Option<u64>,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary, seed: None }
}

fn vec_json(v: &[f64]) -> serde_json::Value {
    json!(v)
}

pub fn algebra(cfg: &AlgebraConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    let a = cfg.algebra.build()?;
    let jacobi = a.jacobi_residual();
    let dims = a.central_series_dims()?;
    let condition = a.dimension_condition()?;
    let mut layers = Vec::new();
    for i in 1..=dims.len() {
        layers.push(a.layer(i)?.dim());
    }
    let mut plane_ok = true;
    let pair = match condition {
        None => serde_json::Value::Null,
        Some(i) => {
            let (x, y) = a.find_commuting_pair(i)?;
            let cert = a.certify_plane(&x, &y)?;
            plane_ok = cert.is_plane;
            json!({ "layer": i, "x": vec_json(x.as_slice()), "y": vec_json(y.as_slice()), "certificate": cert })
        }
    };
    let tol = 1e-12 * ctx.tolerance_scale;
    let passed = jacobi <= tol && plane_ok;
    out.json(
        "algebra.json",
        &json!({
            "dim": a.dim(),
            "jacobi_residual": jacobi,
            "jacobi_tolerance": tol,
            "two_step": a.is_two_step(),
            "two_step_residual": a.two_step_residual(),
            "central_series_dims": dims,
            "nilpotency_step": dims.len(),
            "layer_dims": layers,
            "dimension_condition": match condition { Some(i) => json!(i), None => json!("none") },
            "commuting_pair": pair,
            "structure": a.to_file(),
        }),
    )?;
    let cond = condition.map_or("none".to_string(), |i| i.to_string());
    Ok(outcome(passed, format!("central series {dims:?}, dimension condition {cond}, Jacobi residual {jacobi:e}")))
}

pub fn geodesic(cfg: &GeodesicConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    if !(cfg.output_step > 0.0) {
        return Err(Failure::config("output_step must be positive"));
    }
    let energy_tol = ENERGY_TOL * ctx.tolerance_scale;
    match &cfg.manifold {
        ManifoldSpec::Group { algebra } => {
            let g = algebra.group()?;
            let opts = FlowOptions { energy_tol, ..FlowOptions::default() };
            let res = geodesic_flow_with(&g, &cfg.start, &cfg.velocity, cfg.horizon, cfg.step, &opts)?;
            let n = g.dim();
            let e0 = g.inner(&cfg.velocity, &cfg.velocity);
            let steps = (cfg.horizon / cfg.output_step).floor() as i64;
            let mut rows = Vec::new();
            let mut energy = Vec::new();
            for k in -steps..=steps {
                let s = k as f64 * cfg.output_step;
                let (p, v) = res.path.eval(s);
                let e = group_energy(&g, &p, &v);
                let mut row = vec![s];
                row.extend(&p);
                row.extend(&v);
                row.push(e);
                rows.push(row);
                energy.push(vec![s, e, (e - e0) / e0]);
            }
            let mut header = vec!["s".to_string()];
            header.extend((1..=n).map(|i| format!("x{i}")));
            header.extend((1..=n).map(|i| format!("dx{i}")));
            header.push("energy".into());
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            out.table("trace.csv", &refs, rows)?;
            out.table("energy.csv", &["s", "energy", "relative_drift"], energy)?;
            out.json(
                "geodesic.json",
                &json!({
                    "manifold": "group",
                    "domain": [-cfg.horizon, cfg.horizon],
                    "step": res.step,
                    "energy_drift": res.energy_drift,
                    "energy_tolerance": energy_tol,
                    "speed": res.path.speed(),
                }),
            )?;
            Ok(outcome(res.energy_drift <= energy_tol, format!("energy drift {:e} at step {}", res.energy_drift, res.step)))
        }
        ManifoldSpec::Warped { metric } => {
            let m = WarpedMetric::new(*metric).map_err(Failure::config_from)?;
            let (s, v) = (&cfg.start, &cfg.velocity);
            if s.len() != 3 || v.len() != 3 {
                return Err(Failure::config("warped start and velocity are cylindrical triples (t, r, alpha)"));
            }
            let p = CylPoint::new(s[0], s[1], s[2]).map_err(Failure::config_from)?;
            let tr = m.geodesic_integrate(&p, [v[0], v[1], v[2]], cfg.horizon, cfg.step)?;
            let e0 = tr.samples[0].energy;
            let mut rows = Vec::new();
            let mut energy = Vec::new();
            let mut next = 0.0;
            for smp in &tr.samples {
                if smp.s + 1e-9 >= next {
                    rows.push(vec![smp.s, smp.t, smp.r, smp.alpha, smp.vt, smp.vr, smp.valpha, smp.energy]);
                    energy.push(vec![smp.s, smp.energy, (smp.energy - e0) / e0]);
                    next += cfg.output_step;
                }
            }
            out.table("trace.csv", &["s", "t", "r", "alpha", "vt", "vr", "valpha", "energy"], rows)?;
            out.table("energy.csv", &["s", "energy", "relative_drift"], energy)?;
            out.json(
                "geodesic.json",
                &json!({
                    "manifold": "warped",
                    "metric": metric,
                    "domain": [0.0, cfg.horizon],
                    "step": tr.step,
                    "energy_drift": tr.energy_drift,
                    "energy_tolerance": energy_tol,
                }),
            )?;
            Ok(outcome(tr.energy_drift <= energy_tol, format!("energy drift {:e} at step {}", tr.energy_drift, tr.step)))
        }
    }
}

/// `|V|²` for the left-trivialized velocity `V = ṗ − ½[p, ṗ]` (exact in a
/// two-step group).
fn group_energy(g: &TwoStepGroup, p: &[f64], v: &[f64]) -> f64 {
    let br = g.bracket(p, v);
    let w: Vec<f64> = v.iter().zip(&br).map(|(a, b)| a - 0.5 * b).collect();
    g.inner(&w, &w)
}

pub fn escape(cfg: &EscapeConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    let g = cfg.algebra.group()?;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    let opts = EscapeOptions { horizon: cfg.horizon, step: cfg.step, seed };
    let mut radii = cfg.radii.clone();
    radii.sort_by(f64::total_cmp);
    let mut profile = Vec::new();
    let mut all = Vec::new();
    for &r in &radii {
        let prof = escape_profile(&g, r, cfg.samples, &opts)?;
        for (i, t) in prof.exit_times.iter().enumerate() {
            all.push(vec![r, i as f64, *t]);
        }
        profile.push(vec![r, prof.max_exit_time]);
    }
    let monotone = profile.windows(2).all(|w| w[0][1] <= w[1][1]);
    out.table("profile.csv", &["radius", "max_exit_time"], profile.clone())?;
    out.table("exit_times.csv", &["radius", "sample", "exit_time"], all)?;
    out.json(
        "escape.json",
        &json!({
            "samples": cfg.samples,
            "horizon": cfg.horizon,
            "seed": seed,
            "radii": radii,
            "max_exit_times": profile.iter().map(|r| r[1]).collect::<Vec<_>>(),
            "monotone": monotone,
        }),
    )?;
    let summary = format!("{} radii, all {} samples exit, monotone={monotone}", radii.len(), cfg.samples);
    Ok(Outcome { passed: monotone, summary, seed: Some(seed) })
}

fn manifold_geodesic(m: &ManifoldSpec, start: &[f64], velocity: &[f64], horizon: f64, step: f64) -> Result<GeodesicPath, Failure> {
    match m {
        ManifoldSpec::Group { algebra } => {
            let g = algebra.group()?;
            Ok(geodesic_flow_with(&g, start, velocity, horizon, step, &FlowOptions::default())?.path)
        }
        ManifoldSpec::Warped { metric } => {
            let m = WarpedMetric::new(*metric).map_err(Failure::config_from)?;
            if start.len() != 3 || velocity.len() != 3 {
                return Err(Failure::config("warped geodesics need Cartesian triples"));
            }
            Ok(m.geodesic_line_cartesian([start[0], start[1], start[2]], [velocity[0], velocity[1], velocity[2]], horizon, step)?)
        }
    }
}

fn resolve_plane(m: &ManifoldSpec, spec: &PlaneSpec) -> Result<PlaneChart, Failure> {
    match (m, spec) {
        (ManifoldSpec::Warped { metric }, PlaneSpec::Warped { alpha }) => {
            Ok(WarpedMetric::new(*metric).map_err(Failure::config_from)?.plane(*alpha))
        }
        (ManifoldSpec::Group { algebra }, PlaneSpec::Group { x, y, translation }) => {
            let g = algebra.group()?;
            let t = translation.clone().unwrap_or_else(|| vec![0.0; g.dim()]);
            let mut planes = group_planes(&g, (x, y), &[t])?;
            Ok(planes.remove(0))
        }
        _ => Err(Failure::config("plane spec does not match the manifold kind")),
    }
}

pub fn xray(cfg: &XrayConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    let f = phantom(&cfg.phantom)?;
    let _ = ctx;
    let mut rows = Vec::new();
    for (i, gs) in cfg.geodesics.iter().enumerate() {
        let path = manifold_geodesic(&cfg.manifold, &gs.start, &gs.velocity, gs.horizon, cfg.step)?;
        let x = xray_transform(&f, &path, &cfg.quad)?;
        rows.push(vec![i as f64, x.value, x.error]);
    }
    let mut summary = json!({ "geodesics": rows.len() });
    if !rows.is_empty() {
        summary["max_abs_integral"] = json!(rows.iter().map(|r| r[1].abs()).fold(0.0, f64::max));
        out.table("integrals.csv", &["index", "value", "error"], rows.clone())?;
    }
    if let Some(sg) = &cfg.sinogram {
        let plane = resolve_plane(&cfg.manifold, &sg.plane)?;
        let offsets = uniform_grid(sg.offsets.lo, sg.offsets.hi, sg.offsets.n);
        let s = sinogram_plane(&f, &plane, &offsets, &half_turn_angles(sg.angles), &cfg.quad)?;
        out.sinogram("sinogram", &s)?;
        summary["sinogram"] = json!({ "plane": s.plane, "max_abs": s.max_abs(), "max_quadrature_error": s.max_error() });
        if let Some((pixels, half_width)) = sg.image {
            if plane.geometry() != PlaneGeometry::Flat {
                return Err(Failure::config("filtered backprojection needs a flat plane"));
            }
            let img = filtered_backprojection(&s, &ImageGrid::new(pixels, half_width))?;
            out.pgm("reconstruction.pgm", &img)?;
            summary["reconstruction"] = json!({ "pixels": pixels, "half_width": half_width, "max_abs": img.max_abs() });
        }
    }
    out.json("xray.json", &summary)?;
    Ok(outcome(true, format!("{} integrals, sinogram={}", rows.len(), cfg.sinogram.is_some())))
}

/// A cover together with its name for reports.
fn build_cover(spec: &CoverSpec, step: f64) -> Result<Box<dyn CoverGeometry>, Failure> {
    match spec {
        CoverSpec::Warped { metric, plane_count } => {
            let m = WarpedMetric::new(*metric).map_err(Failure::config_from)?;
            Ok(Box::new(WarpedCover::new(m, *plane_count, step).map_err(Failure::config_from)?))
        }
        CoverSpec::Group(gs) => {
            let g = gs.algebra.group()?;
            let (x, y) = match &gs.pair {
                Some((x, y)) => (x.clone(), y.clone()),
                None => {
                    let i = g
                        .algebra()
                        .dimension_condition()?
                        .ok_or_else(|| Failure::check("dimension condition fails; no plane cover of translates"))?;
                    let (x, y) = g.algebra().find_commuting_pair(i)?;
                    (x.as_slice().to_vec(), y.as_slice().to_vec())
                }
            };
            if gs.lattice_lo.len() != g.dim() || gs.lattice_hi.len() != g.dim() {
                return Err(Failure::config("lattice box must match the group dimension"));
            }
            let lat = complement_lattice(&g, &x, &y, &gs.lattice_lo, &gs.lattice_hi, gs.lattice_spacing)?;
            let planes = group_planes(&g, (&x, &y), &lat)?;
            Ok(Box::new(GroupCover::new(g, planes, step).map_err(Failure::config_from)?))
        }
    }
}

fn cover_dim(spec: &CoverSpec) -> Result<usize, Failure> {
    Ok(match spec {
        CoverSpec::Warped { .. } => 3,
        CoverSpec::Group(gs) => gs.algebra.build()?.dim(),
    })
}

pub fn khat(cfg: &KhatConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    match cfg {
        KhatConfig::PlaneCover { cover, k, probes, .. } => {
            let dim = cover_dim(cover)?;
            let k = k.resolve(&ctx.config_dir, dim)?;
            let cov = build_cover(cover, 0.01)?;
            let planes = cov.planes();
            if probes.center.len() != dim || !(probes.spacing > 0.0) {
                return Err(Failure::config("probe grid needs a center of the manifold dimension and a positive spacing"));
            }
            let kh = khat_with(&k, planes, &KhatOptions::default())?;
            let grid = ProbeGrid { center: probes.center.clone(), half_width: probes.half_width, spacing: probes.spacing };
            let pts = grid.probes(planes);
            let inside = kh.occupancy(&pts);
            let (accepted, measured) = measured_khat(&kh, &pts);
            let bound = dk_bound(&k, planes)?;
            let max_norm = accepted.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
            let radius = cov.radius_bound(&k);
            let radius_ok = radius.map(|d| max_norm <= d + 1e-9 * ctx.tolerance_scale);
            let diameter_ok = matches!(cover, CoverSpec::Group(_)).then(|| measured <= bound.bound * (1.0 + 1e-12 * ctx.tolerance_scale));
            out.occupancy("occupancy.csv", &pts, &inside)?;
            out.json(
                "khat.json",
                &json!({
                    "mode": "plane_cover",
                    "cover": cov.name(),
                    "planes": planes.len(),
                    "planes_meeting_k": bound.planes_meeting_k,
                    "d_k": bound.d_k,
                    "diam_k": bound.diam_k,
                    "diameter_bound": bound.bound,
                    "probes": pts.len(),
                    "inside": accepted.len(),
                    "measured_diameter": measured,
                    "radius_bound": radius,
                    "max_inside_norm": max_norm,
                    "checks": { "radius_bound": radius_ok, "diameter_bound": diameter_ok },
                }),
            )?;
            let passed = radius_ok != Some(false) && diameter_ok != Some(false);
            Ok(outcome(passed, format!("{} of {} probes inside, measured diameter {measured:.4}, bound {:.4}", accepted.len(), pts.len(), bound.bound)))
        }
        KhatConfig::Paraboloid { k, frames, .. } => {
            let k = k.resolve(&ctx.config_dir, 3)?;
            let CompactSet::Points { points } = k else {
                return Err(Failure::config("paraboloid mode takes K as a point set"));
            };
            let pts: Vec<[f64; 3]> = points.iter().map(|p| [p[0], p[1], p[2]]).collect();
            let trans = translation_lattice(&pts, frames.translation_spacing, frames.translation_margin);
            let fr = frame_grid(frames.rotations, &trans);
            let pk = paraboloid_khat(&pts, &fr)?;
            let (lo, hi) = pk.bounding_box();
            let n = frames.probes_per_axis.max(1);
            let mut probes = Vec::with_capacity((n + 1).pow(3));
            for i in 0..=n {
                for j in 0..=n {
                    for l in 0..=n {
                        let c = |d: usize, s: usize| lo[d] + (hi[d] - lo[d]) * s as f64 / n as f64;
                        probes.push(vec![c(0, i), c(1, j), c(2, l)]);
                    }
                }
            }
            let inside: Vec<bool> = probes.iter().map(|p| pk.contains([p[0], p[1], p[2]])).collect();
            let contains_k = pts.iter().all(|p| pk.contains(*p));
            out.occupancy("occupancy.csv", &probes, &inside)?;
            out.json(
                "khat.json",
                &json!({
                    "mode": "paraboloid",
                    "frame_count": fr.len(),
                    "frames": fr,
                    "h_minus": pk.h_minus,
                    "h_plus": pk.h_plus,
                    "bounding_box": { "lo": lo, "hi": hi },
                    "probes": probes.len(),
                    "inside": inside.iter().filter(|b| **b).count(),
                    "checks": { "contains_k": contains_k },
                }),
            )?;
            Ok(outcome(contains_k, format!("{} frames, K contained={contains_k}", fr.len())))
        }
    }
}

pub fn verify(cfg: &VerifyFile, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    let dim = cover_dim(&cfg.cover)?;
    let f = phantom(&cfg.phantom)?;
    let k = cfg.k.resolve(&ctx.config_dir, dim)?;
    let cov = build_cover(&cfg.cover, cfg.step)?;
    let mut settings = cfg.settings.clone();
    if let Some(s) = ctx.seed {
        settings.seed = s;
    }
    settings.residual_tol *= ctx.tolerance_scale;
    settings.hypothesis_factor *= ctx.tolerance_scale;
    let rep = support_verification(&f, &k, cov.as_ref(), &settings)?;
    let mut images = Vec::new();
    for (i, (label, img)) in rep.images.iter().enumerate() {
        let name = format!("reconstruction_{i}.pgm");
        out.pgm(&name, img)?;
        images.push(json!({ "plane": label, "file": name }));
    }
    out.json("report.json", &json!({ "report": rep, "settings": settings, "images": images }))?;
    let summary = format!(
        "hypothesis holds={} (max |Xf| {:e} vs {:e}), conclusion holds={}, consistent={}",
        rep.hypothesis.holds, rep.hypothesis.max_abs_xray, rep.hypothesis.threshold, rep.conclusion_holds, rep.consistent
    );
    Ok(Outcome { passed: rep.consistent, summary, seed: Some(settings.seed) })
}

pub fn demo_noninjective(cfg: &DemoConfig, ctx: &Ctx, out: &mut OutDir) -> Result<Outcome, Failure> {
    use planecover::xray::{product_sphere_demo, LineProfile};
    let rep = product_sphere_demo(&cfg.profile, cfg.samples)?;
    let w = cfg.profile.width();
    let rows = (0..=200).map(|i| {
        let u = -w + 2.0 * w * i as f64 / 200.0;
        vec![u, cfg.profile.value(u)]
    });
    out.table("profile.csv", &["u", "f0"], rows)?;
    let odd = matches!(cfg.profile, LineProfile::OddBump { .. });
    let threshold = 1e-8 * ctx.tolerance_scale;
    let passed = !odd || (rep.max_abs_integral <= threshold && rep.max_abs_f > 0.0);
    out.json(
        "demo.json",
        &json!({
            "samples": rep.samples,
            "max_abs_integral": rep.max_abs_integral,
            "max_abs_f": rep.max_abs_f,
            "odd_profile": odd,
            "threshold": threshold,
            "vanishing_data_nonzero_f": odd && passed,
        }),
    )?;
    Ok(outcome(passed, format!("max |Xf| {:e} over {} geodesics, max |f| {:.4}", rep.max_abs_integral, rep.samples, rep.max_abs_f)))
}
