//! Conditional-regularity monitors: eps-Poincare checks and the Moser L-infinity estimator.

pub mod cutoff;
pub mod moser;
pub mod poincare;

pub use cutoff::Cutoff;
pub use moser::{moser_sequence, MoserParams, MoserReport};
pub use poincare::{
    eps_poincare_test, minimal_constant, small_p_ratio, weighted_grad_a_norm, PhiFamily, PoincareParams,
    PoincareReport,
};
