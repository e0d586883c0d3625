//! Collinear phase matching for degenerate three-photon decay.

use std::f64::consts::FRAC_PI_2;

use super::sellmeier::{Ray, UniaxialCrystal};
use crate::error::{Error, Result};

/// Polarization assignment of the pump and its three daughters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Process {
    pub pump: Ray,
    pub daughters: [Ray; 3],
}

impl Default for Process {
    /// e → (o, o′, e)
    fn default() -> Self {
        Self {
            pump: Ray::Extraordinary,
            daughters: [Ray::Ordinary, Ray::Ordinary, Ray::Extraordinary],
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseMatchProblem<'a> {
    pub crystal: &'a UniaxialCrystal,
    pub pump_wavelength_nm: f64,
    pub process: Process,
}

impl<'a> PhaseMatchProblem<'a> {
    pub fn new(crystal: &'a UniaxialCrystal, pump_wavelength_nm: f64) -> Self {
        Self {
            crystal,
            pump_wavelength_nm,
            process: Process::default(),
        }
    }

    /// Degenerate daughters carry three times the pump wavelength.
    pub fn daughter_wavelength_nm(&self) -> f64 {
        3.0 * self.pump_wavelength_nm
    }

    /// `3 n_pump(ψ) − Σ n_daughter(ψ)`; zero at phase matching.
    pub fn mismatch(&self, psi: f64) -> Result<f64> {
        let pump = self
            .crystal
            .index_along(self.pump_wavelength_nm, self.process.pump, psi)?;
        let mut daughters = 0.0;
        for ray in self.process.daughters {
            daughters += self
                .crystal
                .index_along(self.daughter_wavelength_nm(), ray, psi)?;
        }
        Ok(3.0 * pump - daughters)
    }

    fn check_wavelengths(&self) -> Result<()> {
        if !(self.pump_wavelength_nm > 0.0 && self.pump_wavelength_nm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pump wavelength {} nm",
                self.pump_wavelength_nm
            )));
        }
        for wl in [self.pump_wavelength_nm, self.daughter_wavelength_nm()] {
            self.crystal.refractive_index(wl, Ray::Ordinary)?;
            self.crystal.refractive_index(wl, Ray::Extraordinary)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMatch {
    /// Angle between pump wavevector and optic axis, radians.
    pub psi: f64,
    pub residual: f64,
}

/// Bisection on a sign-changing bracket, run until the interval cannot be
/// split further in `f64`. Returns the endpoint with the smaller residual.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok((lo, 0.0));
    }
    if f_hi == 0.0 {
        return Ok((hi, 0.0));
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidArgument("bracket has no sign change".into()));
    }
    let mut best = if f_lo.abs() < f_hi.abs() {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    loop {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid.abs() < best.1.abs() {
            best = (mid, f_mid);
        }
        if f_mid == 0.0 {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Number of coarse subintervals scanned on [0, π/2] for the first bracket.
const SCAN_STEPS: usize = 90;

/// Solves `3 n_pump(ψ) = Σ n_daughter(ψ)` for ψ ∈ [0, π/2].
///
/// Both extraordinary indices are evaluated at the same ψ (collinear
/// geometry). The first sign change on a 1° scan is refined by bisection.
pub fn phase_match_angle(problem: &PhaseMatchProblem<'_>) -> Result<PhaseMatch> {
    problem.check_wavelengths()?;
    let step = FRAC_PI_2 / SCAN_STEPS as f64;
    let mut prev_psi = 0.0;
    let mut prev = problem.mismatch(prev_psi)?;
    for k in 1..=SCAN_STEPS {
        let psi = if k == SCAN_STEPS {
            FRAC_PI_2
        } else {
            step * k as f64
        };
        let value = problem.mismatch(psi)?;
        if prev == 0.0 || prev.signum() != value.signum() {
            let (psi, residual) = bisect(|x| problem.mismatch(x), prev_psi, psi)?;
            return Ok(PhaseMatch { psi, residual });
        }
        prev_psi = psi;
        prev = value;
    }
    Err(Error::NoPhaseMatching)
}

/// Walk-off angle of the extraordinary ray at `psi`:
/// `tan ρ = (n(ψ)² / 2)(1/n_e² − 1/n_o²) sin 2ψ`, returned as `|ρ|`.
pub fn walkoff_angle(crystal: &UniaxialCrystal, wavelength_nm: f64, psi: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&psi) {
        return Err(Error::InvalidArgument(format!(
            "propagation angle {psi} rad outside [0, π/2]"
        )));
    }
    let n_o = crystal.refractive_index(wavelength_nm, Ray::Ordinary)?;
    let n_e = crystal.refractive_index(wavelength_nm, Ray::Extraordinary)?;
    let n = super::index_at_angle(n_o, n_e, psi);
    let tan_rho = 0.5 * n * n * (1.0 / (n_e * n_e) - 1.0 / (n_o * n_o)) * (2.0 * psi).sin();
    Ok(tan_rho.atan().abs())
}
