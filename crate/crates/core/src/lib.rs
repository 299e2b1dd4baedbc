//! Geodesic X-ray transforms and support recovery on nilpotent Lie groups
//! with left-invariant metrics and on warped products that fail to be
//! simple. Both carry families of totally geodesic planes.
//!
//! The crate is organised bottom-up. [`liealg`] handles metric Lie algebras,
//! [`nilgroup`] the corresponding two-step groups and their geodesics,
//! [`warped`] the warped-product manifolds, [`xray`] the transform itself,
//! [`support`] the hull construction of `K̂`, and [`reconstruct`] the
//! flat-plane inversion together with end-to-end support checks.

pub mod error;
pub mod io;
pub mod liealg;
mod linalg;
pub mod nilgroup;
pub mod ode;
pub mod path;
pub mod plane;
pub mod quad;
pub mod reconstruct;
pub mod support;
pub mod warped;
pub mod xray;

pub use error::{Error, Result};
pub use liealg::{filiform, AlgebraFile, LieAlgebra, PlaneCertificate};
pub use nilgroup::{geodesic_flow, Frame, ParaboloidKhat, TwoStepGroup};
pub use path::{GeodesicPath, Provenance};
pub use plane::{PlaneChart, PlaneGeometry};
pub use reconstruct::{
    filtered_backprojection, support_verification, CoverGeometry, GroupCover, Image, ImageGrid, VerificationReport,
    VerifyConfig, WarpedCover,
};
pub use support::{khat, CompactSet, ConvexHull, KHat};
pub use warped::{CylPoint, Variant, WarpedConfig, WarpedMetric};
pub use xray::{xray_transform, Bump, Phantom, QuadSettings, Sinogram, XrayValue};
