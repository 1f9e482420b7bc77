//! Hansen solubility parameter algebra.
//!
//! All quantities are in MPa^0.5. A mixture's HSP follows the linear
//! volume-fraction mixing rule, and affinity is measured by the weighted
//! distance `Ra` in which the dispersion gap counts four times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HspError {
    #[error("invalid HSP component {component} = {value} (must be finite and >= 0)")]
    InvalidComponent { component: &'static str, value: f64 },
    #[error("interaction radius must be finite and > 0, got {0}")]
    InvalidRadius(f64),
}

/// A `(δd, δp, δh)` triplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HspVector {
    pub delta_d: f64,
    pub delta_p: f64,
    pub delta_h: f64,
}

impl HspVector {
    /// Validated constructor.
    pub fn new(delta_d: f64, delta_p: f64, delta_h: f64) -> Result<Self, HspError> {
        let v = Self::new_unchecked(delta_d, delta_p, delta_h);
        v.validate()?;
        Ok(v)
    }

    pub const fn new_unchecked(delta_d: f64, delta_p: f64, delta_h: f64) -> Self {
        Self { delta_d, delta_p, delta_h }
    }

    pub const ZERO: HspVector = HspVector::new_unchecked(0.0, 0.0, 0.0);

    pub fn validate(&self) -> Result<(), HspError> {
        for (component, value) in [("delta_d", self.delta_d), ("delta_p", self.delta_p), ("delta_h", self.delta_h)] {
            if !value.is_finite() || value < 0.0 {
                return Err(HspError::InvalidComponent { component, value });
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.delta_d, self.delta_p, self.delta_h]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new_unchecked(a[0], a[1], a[2])
    }

    pub fn axis(&self, axis: HspAxis) -> f64 {
        match axis {
            HspAxis::Dispersion => self.delta_d,
            HspAxis::Polar => self.delta_p,
            HspAxis::Hydrogen => self.delta_h,
        }
    }

    pub(crate) fn scaled_add(&mut self, weight: f64, other: &HspVector) {
        self.delta_d += weight * other.delta_d;
        self.delta_p += weight * other.delta_p;
        self.delta_h += weight * other.delta_h;
    }
}

impl std::fmt::Display for HspVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{:.2}, {:.2}, {:.2}]", self.delta_d, self.delta_p, self.delta_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HspAxis {
    Dispersion,
    Polar,
    Hydrogen,
}

impl std::fmt::Display for HspAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HspAxis::Dispersion => "delta_d",
            HspAxis::Polar => "delta_p",
            HspAxis::Hydrogen => "delta_h",
        })
    }
}

/// A material described by its Hansen sphere: centre HSP and radius `R0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialTarget {
    pub name: String,
    pub hsp: HspVector,
    pub interaction_radius: f64,
}

impl MaterialTarget {
    pub fn new(name: impl Into<String>, hsp: HspVector, interaction_radius: f64) -> Result<Self, HspError> {
        let t = Self { name: name.into(), hsp, interaction_radius };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), HspError> {
        self.hsp.validate()?;
        if !self.interaction_radius.is_finite() || self.interaction_radius <= 0.0 {
            return Err(HspError::InvalidRadius(self.interaction_radius));
        }
        Ok(())
    }

    /// Default resist layer that must dissolve.
    pub fn default_target() -> Self {
        Self {
            name: "S_pre".into(),
            hsp: HspVector::new_unchecked(18.27, 7.11, 8.20),
            interaction_radius: 6.28,
        }
    }

    /// Default protective layer that must stay intact.
    pub fn default_protect() -> Self {
        Self {
            name: "S_post".into(),
            hsp: HspVector::new_unchecked(17.95, 11.47, 14.24),
            interaction_radius: 8.81,
        }
    }
}

/// Volume-fraction weighted HSP of a mixture, `Σ φ_i δ_i`.
///
/// Callers are responsible for `fractions` lying on the simplex; this is the
/// raw mixing rule and also serves intermediate optimizer states.
pub fn mix_vectors(components: &[HspVector], fractions: &[f64]) -> HspVector {
    debug_assert_eq!(components.len(), fractions.len());
    let mut mix = HspVector::ZERO;
    for (hsp, &phi) in components.iter().zip(fractions) {
        mix.scaled_add(phi, hsp);
    }
    mix
}

/// The HSP distance `Ra = sqrt(4Δd² + Δp² + Δh²)`.
pub fn hsp_distance(a: &HspVector, b: &HspVector) -> f64 {
    let dd = a.delta_d - b.delta_d;
    let dp = a.delta_p - b.delta_p;
    let dh = a.delta_h - b.delta_h;
    (4.0 * dd * dd + dp * dp + dh * dh).sqrt()
}

/// Relative energy difference `Ra / R0`.
pub fn red(mix: &HspVector, material: &MaterialTarget) -> f64 {
    hsp_distance(mix, &material.hsp) / material.interaction_radius
}
