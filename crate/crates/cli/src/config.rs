//! JSON config schemas, one per subcommand.

use std::path::{Path, PathBuf};

use planecover::liealg::{filiform, AlgebraFile, LieAlgebra};
use planecover::nilgroup::TwoStepGroup;
use planecover::support::CompactSet;
use planecover::warped::WarpedConfig;
use planecover::xray::{Bump, LineProfile, Phantom, QuadSettings};
use planecover::{io, VerifyConfig};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::exit::Failure;

pub const SCHEMA_VERSION: u32 = 1;

/// Raw config bytes plus the parsed value.
pub struct Loaded<T> {
    pub bytes: Vec<u8>,
    pub value: T,
    pub dir: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let raw: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => return Err(Failure::config(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"))),
        None => return Err(Failure::config("missing schema_version")),
    }
    let value = serde_json::from_value(raw).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { bytes, value, dir })
}

/// An algebra given by name or by structure constants.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSpec {
    Preset {
        preset: String,
        #[serde(default)]
        n: Option<usize>,
    },
    Explicit(AlgebraFile),
}

impl AlgebraSpec {
    pub fn build(&self) -> Result<LieAlgebra, Failure> {
        match self {
            AlgebraSpec::Preset { preset, n } => match (preset.as_str(), n) {
                ("heisenberg", None) => Ok(LieAlgebra::heisenberg()),
                ("heisenberg_plus_line", None) => Ok(LieAlgebra::heisenberg_plus_line()),
                ("filiform", Some(n)) => filiform(*n).map_err(Failure::config_from),
                ("filiform", None) => Err(Failure::config("preset filiform needs n")),
                (other, _) => Err(Failure::config(format!("unknown algebra preset {other:?}"))),
            },
            AlgebraSpec::Explicit(file) => LieAlgebra::from_file(file).map_err(Failure::config_from),
        }
    }

    pub fn group(&self) -> Result<TwoStepGroup, Failure> {
        TwoStepGroup::new(self.build()?).map_err(Failure::config_from)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub algebra: AlgebraSpec,
}

/// A manifold on which geodesics can be traced.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Group { algebra: AlgebraSpec },
    Warped {
        #[serde(default = "default_warped")]
        metric: WarpedConfig,
    },
}

fn default_warped() -> WarpedConfig {
    serde_json::from_str(r#"{"variant":"euclidean"}"#).expect("valid default")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub manifold: ManifoldSpec,
    /// Chart point; cylindrical `(t, r, α)` on warped manifolds.
    pub start: Vec<f64>,
    /// Chart velocity; cylindrical `(ṫ, ṙ, α̇)` on warped manifolds.
    pub velocity: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Spacing of rows in the trace CSV.
    #[serde(default = "default_output_step")]
    pub output_step: f64,
}

fn default_step() -> f64 {
    0.01
}

fn default_output_step() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeConfig {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub algebra: AlgebraSpec,
    pub radii: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_escape_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    64
}

fn default_escape_horizon() -> f64 {
    200.0
}

/// A plane of a cover.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PlaneSpec {
    /// `E_α` of a warped manifold.
    Warped { alpha: f64 },
    /// `g · exp(span{x, y})` in a group.
    Group {
        x: Vec<f64>,
        y: Vec<f64>,
        #[serde(default)]
        translation: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub start: Vec<f64>,
    pub velocity: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinogramSpec {
    pub plane: PlaneSpec,
    pub offsets: GridSpec,
    /// Number of angles `jπ/n`.
    pub angles: usize,
    /// Pixel count and half width for a filtered backprojection (flat planes).
    #[serde(default)]
    pub image: Option<(usize, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XrayConfig {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub manifold: ManifoldSpec,
    pub phantom: Vec<Bump>,
    #[serde(default)]
    pub geodesics: Vec<GeodesicSpec>,
    #[serde(default)]
    pub sinogram: Option<SinogramSpec>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub quad: QuadSettings,
}

/// `K` inline or as a CSV point file (relative to the config file).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    File { points_csv: String },
    Set(CompactSet),
}

impl KSpec {
    pub fn resolve(&self, dir: &Path, dim: usize) -> Result<CompactSet, Failure> {
        let k = match self {
            KSpec::File { points_csv } => {
                let path = dir.join(points_csv);
                let points = io::read_points_file(&path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                CompactSet::Points { points }
            }
            KSpec::Set(k) => k.clone(),
        };
        check_set(&k, dim)?;
        Ok(k)
    }
}

fn check_set(k: &CompactSet, dim: usize) -> Result<(), Failure> {
    let bad_dim = |n: usize| Failure::config(format!("K has a part of dimension {n}, expected {dim}"));
    match k {
        CompactSet::Empty => Ok(()),
        CompactSet::Points { points } => match points.iter().find(|p| p.len() != dim) {
            Some(p) => Err(bad_dim(p.len())),
            None => Ok(()),
        },
        CompactSet::Ball { center, radius } => {
            if center.len() != dim {
                Err(bad_dim(center.len()))
            } else if !(*radius >= 0.0) {
                Err(Failure::config(format!("ball radius must be nonnegative, got {radius}")))
            } else {
                Ok(())
            }
        }
        CompactSet::Box { lo, hi } => {
            if lo.len() != dim || hi.len() != dim {
                Err(bad_dim(lo.len().max(hi.len())))
            } else if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                Err(Failure::config("box needs lo <= hi in every coordinate"))
            } else {
                Ok(())
            }
        }
        CompactSet::Union { parts } => parts.iter().try_for_each(|p| check_set(p, dim)),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub center: Vec<f64>,
    pub half_width: f64,
    pub spacing: f64,
}

/// Plane cover of a group: translates of one flat over a lattice box.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupCoverSpec {
    pub algebra: AlgebraSpec,
    /// Commuting pair; found from the dimension condition when omitted.
    #[serde(default)]
    pub pair: Option<(Vec<f64>, Vec<f64>)>,
    pub lattice_lo: Vec<f64>,
    pub lattice_hi: Vec<f64>,
    pub lattice_spacing: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverSpec {
    Warped {
        #[serde(default = "default_warped")]
        metric: WarpedConfig,
        plane_count: usize,
    },
    Group(GroupCoverSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParaboloidSpec {
    #[serde(default = "default_rotations")]
    pub rotations: usize,
    pub translation_spacing: f64,
    #[serde(default)]
    pub translation_margin: f64,
    /// Probes per axis over the bounding box.
    #[serde(default = "default_probe_count")]
    pub probes_per_axis: usize,
}

fn default_rotations() -> usize {
    1
}

fn default_probe_count() -> usize {
    24
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum KhatConfig {
    PlaneCover {
        #[allow(dead_code)] // validated by `load`
        schema_version: u32,
        cover: CoverSpec,
        k: KSpec,
        probes: ProbeSpec,
    },
    Paraboloid {
        #[allow(dead_code)] // validated by `load`
        schema_version: u32,
        k: KSpec,
        frames: ParaboloidSpec,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub cover: CoverSpec,
    pub phantom: Vec<Bump>,
    pub k: KSpec,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub settings: VerifyConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    #[allow(dead_code)] // validated by `load`
    pub schema_version: u32,
    pub profile: LineProfile,
    #[serde(default = "default_demo_samples")]
    pub samples: usize,
}

fn default_demo_samples() -> usize {
    100
}

pub fn phantom(bumps: &[Bump]) -> Result<Phantom, Failure> {
    Phantom::new(bumps.to_vec()).map_err(Failure::config_from)
}
