//! Families of Taylor-polynomial surface solutions for shaded Lambertian
//! image patches.
//!
//! Given the derivatives of an image patch (from an analytic scene or a
//! least-squares fit to samples), the induction in [`induction`] produces
//! every normal field, expressed as a truncated Taylor series in a frame
//! aligned with the center normal and the light, whose rendered image
//! reproduces the input coefficients exactly and whose length stays unit
//! through the truncation order. The free third projections parameterize the
//! ambiguity: the rank-2 family uses two constants, arbitrary rows give the
//! rest. [`genericity`] scores the rank structure, and [`recon`] rotates a
//! solution into the world, renders it, integrates it to heights, and exports
//! meshes.
//!
//! The `parallel` feature (on by default) runs grid evaluation and the
//! Poisson synthesis on rayon; the sequential fallback produces bit-identical
//! results.

pub mod error;
pub mod genericity;
pub mod image;
pub mod induction;
pub mod jet;
mod math;
mod parallel;
mod poisson;
pub mod recon;
pub mod scenes;
pub mod tensor;

/// Threshold on `|i0|` past which the tangential light direction is
/// numerically undefined.
pub const LIGHT_DEGENERACY_TOLERANCE: f64 = 1e-6;

/// Highest supported image derivative order; keeps the `2^j` unfoldings and
/// fit systems small.
pub const MAX_IMAGE_ORDER: usize = 8;

pub use error::{Error, Result};
pub use genericity::{
    genericity_score, genericity_score_with, stack_beta, BetaStack, GenericityReport,
    ScoreOptions,
};
pub use image::{
    delta_error, derive_from_scene, fit_from_samples, ErrorStats, FitOutcome, ImageTensors,
    PatchGrid,
};
pub use induction::{
    generic_row, lighting_row, normalization_row, solve_generic, solve_with_rows,
    CanonicalLight, CanonicalSolution,
};
pub use jet::{height_to_normal_jets, Jet2, VecJet2};
pub use recon::{
    export_mesh, integrate_heights, pose_from_scene, render_lambertian, shadow_count,
    world_normal_field, GridSpec, Integration, Mesh, NormalGrid, ScenePose,
};
pub use scenes::Scene;
pub use tensor::{read_tensor_file, write_tensor_file, DerivTensor, UnfoldedRows};
