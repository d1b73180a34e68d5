//! Section Gram matrices, Bergman densities, the change-of-basis spectrum
//! and the Bergman geodesic.

mod geodesic;
mod gram;
mod spectrum;

pub use geodesic::{geodesic_accel, geodesic_eval, geodesic_velocity, BergmanGeodesic, Moments, Term};
pub use gram::{
    bergman_density, gram_from_samples, gram_matrix, log_sum_exp, orthonormal_basis, projected_from_gram,
    projected_potential, Coefficients, GramMatrix, MomentSamples, Normalization, SectionBasis,
};
pub use spectrum::{
    equilibrated_condition, lambda_bounds_report, max_spacing, spectral_pair, LambdaBounds, SpectralPair,
    MAX_CONDITION,
};
