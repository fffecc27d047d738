//! Stochastic representations: global gPC (Legendre), ME-gPC element bases,
//! simplex orthonormal polynomials, and discontinuity-conforming frames.

pub mod element;
pub mod frames;
pub mod gpc;
pub mod quadrature;
pub mod simplex;

pub use element::MeElement;
pub use frames::{build_frames, frame_statistics, Classifier, FrameSet};
pub use gpc::{count_basis, eval_gpc, GpcBasis, MultiIndexSet};
pub use quadrature::gauss_legendre;
pub use simplex::SimplexBasis;
