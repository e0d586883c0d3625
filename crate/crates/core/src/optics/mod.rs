//! Crystal optics for three-photon down-conversion in a uniaxial crystal.

mod geometry;
mod phase_match;
mod sellmeier;

pub use geometry::{
    emission_directions, pump_diameter_ok, EmissionDirections, EmissionGeometry, PumpDiameterCheck,
    Transverse, PARAXIAL_LIMIT,
};
pub use phase_match::{
    bisect, phase_match_angle, walkoff_angle, PhaseMatch, PhaseMatchProblem, Process,
};
pub use sellmeier::{
    CrystalCatalog, OpticSign, Ray, SellmeierCoefficients, UniaxialCrystal, CRYSTAL_DATA_ENV,
    CRYSTAL_DATA_FILE,
};

/// Extraordinary index for propagation at `psi` from the optic axis:
/// `[cos²ψ / n_o² + sin²ψ / n_e²]^(−1/2)`.
pub fn index_at_angle(n_o: f64, n_e: f64, psi: f64) -> f64 {
    let (s, c) = psi.sin_cos();
    (c * c / (n_o * n_o) + s * s / (n_e * n_e)).powf(-0.5)
}
