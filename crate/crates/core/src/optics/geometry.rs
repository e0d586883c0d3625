//! Paraxial emission geometry of the non-collinear decay.
//!
//! Transverse angles are 2-vectors `(in-plane, out-of-plane)` measured from
//! the pump direction, the first component lying in the plane spanned by the
//! pump and the optic axis. A herald detected at `(φ, 0)` places the centre
//! `P` of the o,o′ rings at `(−φ/2, 0)`; the two ordinary photons sit on
//! opposite ends of a diameter of a ring around `P`.

use crate::error::{Error, Result};

/// Largest transverse angle (rad) treated as paraxial.
pub const PARAXIAL_LIMIT: f64 = 0.3;

pub type Transverse = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionGeometry {
    herald_angle: f64,
    ring: f64,
    azimuth: f64,
}

impl EmissionGeometry {
    /// `herald_angle` φ and `ring` (offset of each o photon from the ring
    /// centre) in radians; `azimuth` orients the o,o′ diameter.
    pub fn new(herald_angle: f64, ring: f64, azimuth: f64) -> Result<Self> {
        if !(herald_angle > 0.0 && herald_angle < PARAXIAL_LIMIT) {
            return Err(Error::NonParaxial(format!(
                "herald angle {herald_angle} rad must lie in (0, {PARAXIAL_LIMIT})"
            )));
        }
        if !(0.0..PARAXIAL_LIMIT).contains(&ring) {
            return Err(Error::NonParaxial(format!(
                "ring offset {ring} rad must lie in [0, {PARAXIAL_LIMIT})"
            )));
        }
        if !azimuth.is_finite() {
            return Err(Error::InvalidArgument("non-finite azimuth".into()));
        }
        let g = Self {
            herald_angle,
            ring,
            azimuth,
        };
        let d = g.directions();
        for (name, v) in [("o", d.o), ("o'", d.o_prime)] {
            if v[0].hypot(v[1]) >= PARAXIAL_LIMIT {
                return Err(Error::NonParaxial(format!(
                    "{name} photon at {:.4} rad from the pump",
                    v[0].hypot(v[1])
                )));
            }
        }
        Ok(g)
    }

    pub fn herald_angle(&self) -> f64 {
        self.herald_angle
    }

    pub fn ring(&self) -> f64 {
        self.ring
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    fn directions(&self) -> EmissionDirections {
        let herald = [self.herald_angle, 0.0];
        let centre = [-0.5 * self.herald_angle, 0.0];
        let (s, c) = self.azimuth.sin_cos();
        let o = [centre[0] - self.ring * c, centre[1] - self.ring * s];
        // Transverse momentum of equal-wavelength daughters sums to the
        // pump's (zero).
        let o_prime = [-herald[0] - o[0], -herald[1] - o[1]];
        EmissionDirections {
            herald,
            o,
            o_prime,
            ring_centre: centre,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionDirections {
    pub herald: Transverse,
    pub o: Transverse,
    pub o_prime: Transverse,
    /// The point P, the symmetry axis of the o,o′ pairs.
    pub ring_centre: Transverse,
}

impl EmissionDirections {
    /// `herald + o + o′` summed in that order.
    pub fn transverse_sum(&self) -> Transverse {
        [
            (self.herald[0] + self.o[0]) + self.o_prime[0],
            (self.herald[1] + self.o[1]) + self.o_prime[1],
        ]
    }
}

/// Directions of the herald and the two ordinary photons.
///
/// `o′` is computed from momentum conservation as `−(herald + o)`, so the
/// ordered sum [`EmissionDirections::transverse_sum`] is exactly zero.
pub fn emission_directions(geom: &EmissionGeometry) -> EmissionDirections {
    geom.directions()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpDiameterCheck {
    pub ok: bool,
    /// `d − φ (l_c + l_w)`, in the units of `d`.
    pub margin: f64,
}

/// Overlap condition for emissions from the two crystals:
/// `d > φ (l_c + l_w)` (strict).
pub fn pump_diameter_ok(d: f64, phi: f64, l_c: f64, l_w: f64) -> Result<PumpDiameterCheck> {
    for (name, v) in [("d", d), ("phi", phi), ("l_c", l_c), ("l_w", l_w)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let margin = d - phi * (l_c + l_w);
    Ok(PumpDiameterCheck {
        ok: margin > 0.0,
        margin,
    })
}
