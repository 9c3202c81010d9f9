//! Blowup analysis of jump sets for functions sampled on regular grids.
//!
//! A grid function is rescaled around a point, `u^{x,r}(y) = u(x + r y)`,
//! and sampled on a fixed lattice of the unit ball. The behaviour of these
//! blowups as `r` shrinks classifies the point as approximately continuous,
//! a jump point, a singular non-jump point, or non-convergent. Sets of
//! points with controlled blowup oscillation are then checked for the cone
//! property and covered by Lipschitz graphs.

pub mod classify;
pub mod cli;
pub mod decompose;
pub mod error;
pub mod extended;
pub mod gf1;
pub mod grid;
pub mod oscillation;
pub mod report;
pub mod synth;

pub use classify::{
    blowup_converge, classify_grid, classify_point, find_quiet_ball, fit_constant, fit_jump, BlowupSequence,
    ClassifyConfig, Classifier, JumpFit, PointClass, Verdict,
};
pub use decompose::{
    cone_from_params, cover_with_graphs, e_set_membership, extract_e_set, in_cone, rational_ball_family, sweep,
    verify_cone_property, ConeSpec, CoverReport, ESet, ESetParams, SweepConfig,
};
pub use error::{Error, Result};
pub use extended::{classify_extended, measure_distance, phi, phi_apply, phi_inv};
pub use gf1::{read_grid, write_grid};
pub use grid::{blowup_sample, l1_distance, Ball, BlowupSample, GridFunction, UnitBallLattice};
pub use oscillation::{lower_median, osc, weighted_median, Region};
pub use synth::{generate, list_corpus, CorpusSpec, GroundTruth};
