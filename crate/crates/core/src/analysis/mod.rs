//! Zooms in relative coordinates, Möbius approximants, deviation measurements and the
//! closed-form diagnostics built on them.

mod convergence;
mod denjoy;
mod deviation;
mod mobius;
mod tau;
mod zoom;

pub use deviation::{deviation_from, measure, sample_zoom, Deviation, GaussNode, SweepOptions, ZoomSamples};
pub use mobius::{c2_distance, lipschitz_constant, C2Distance, MobiusApproximant};
pub use zoom::{LetterOrbit, MnEstimate, RelativeOrbit, ZoomPoint};
pub use tau::{
    a_coefficient, diagnostic_sums, psi, tau_at, tau_diagnostics, zqn_closed_form, zqn_identity_check, ACoefficient,
    DiagnosticSums, TauBounds, TauDiagnostics, TauPoint,
};
pub use denjoy::{denjoy_check, log_derivative_variation, DenjoyDepth, DenjoyOptions, DenjoyReport};
pub use convergence::{
    convergence_sweep, least_squares, mobius_identity_constant, per_step_contraction, ConvergenceOptions,
    ConvergenceRecord, ConvergenceSweep, EnvelopeCheck, IdentityCheck, Target, Trend,
};
