//! Constitutive, fracture and transport constants of the steel.

use alloc::format;

use crate::error::{Error, Result};

/// All material constants of the coupled model.
///
/// Defaults are those of a C110 low-alloy steel: elastic constants, power-law
/// hardening fit, hydrogen-free toughness and lattice diffusivity, together
/// with the hydrogen degradation fit of the toughness and the phase-field
/// length scale that gives a strength of four times the yield stress.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MaterialParams {
    /// Young's modulus, MPa.
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Initial yield stress, MPa.
    pub yield_stress: f64,
    /// Power-law hardening exponent, 0 ≤ N ≤ 1.
    pub hardening_exponent: f64,
    /// Hydrogen-free critical energy release rate Gc(0), N/mm.
    pub toughness: f64,
    /// Saturation toughness at high hydrogen content, N/mm.
    pub toughness_min: f64,
    /// Exponential decay rate of the toughness, 1/wt ppm.
    pub degradation_rate: f64,
    /// Phase-field length scale, mm.
    pub length_scale: f64,
    /// Fraction of plastic work stored and available for fracture.
    pub stored_plastic_fraction: f64,
    /// Lattice diffusivity of the undamaged steel, mm²/s.
    pub diffusivity: f64,
    /// Partial molar volume of hydrogen, mm³/mol.
    pub partial_molar_volume: f64,
    /// Gas constant, J/(mol K).
    pub gas_constant: f64,
    /// Absolute temperature, K.
    pub temperature: f64,
    /// Diffusivity amplification in broken material.
    pub diffusivity_amplification: f64,
    /// Damage above which electrolyte is assumed to fill the crack.
    pub damage_threshold: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            youngs_modulus: 207_000.0,
            poisson_ratio: 0.3,
            yield_stress: 800.0,
            hardening_exponent: 0.04,
            toughness: 40.0,
            toughness_min: 2.0,
            degradation_rate: 0.5,
            length_scale: 0.085,
            stored_plastic_fraction: 0.1,
            diffusivity: 1.4e-4,
            partial_molar_volume: 2000.0,
            gas_constant: 8.314,
            temperature: 297.0,
            diffusivity_amplification: 1000.0,
            damage_threshold: 0.8,
        }
    }
}

impl MaterialParams {
    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.youngs_modulus / (3.0 * (1.0 - 2.0 * self.poisson_ratio))
    }

    pub fn lame_lambda(&self) -> f64 {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// E / (1 - ν²).
    pub fn plane_strain_modulus(&self) -> f64 {
        self.youngs_modulus / (1.0 - self.poisson_ratio * self.poisson_ratio)
    }

    /// R·T in N·mm/mol.
    pub fn rt(&self) -> f64 {
        self.gas_constant * 1.0e3 * self.temperature
    }

    /// V_H / (R T), 1/MPa.
    pub fn drift_coefficient(&self) -> f64 {
        self.partial_molar_volume / self.rt()
    }

    /// Checks every invariant; the message names the first violated one.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("youngs_modulus", self.youngs_modulus),
            ("poisson_ratio", self.poisson_ratio),
            ("yield_stress", self.yield_stress),
            ("hardening_exponent", self.hardening_exponent),
            ("toughness", self.toughness),
            ("toughness_min", self.toughness_min),
            ("degradation_rate", self.degradation_rate),
            ("length_scale", self.length_scale),
            ("stored_plastic_fraction", self.stored_plastic_fraction),
            ("diffusivity", self.diffusivity),
            ("partial_molar_volume", self.partial_molar_volume),
            ("gas_constant", self.gas_constant),
            ("temperature", self.temperature),
            ("diffusivity_amplification", self.diffusivity_amplification),
            ("damage_threshold", self.damage_threshold),
        ];
        for (name, v) in all {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        let checks = [
            (self.youngs_modulus > 0.0, "youngs_modulus > 0"),
            (
                (0.0..0.5).contains(&self.poisson_ratio),
                "0 <= poisson_ratio < 0.5",
            ),
            (self.yield_stress > 0.0, "yield_stress > 0"),
            (
                (0.0..=1.0).contains(&self.hardening_exponent),
                "0 <= hardening_exponent <= 1",
            ),
            (
                self.toughness_min > 0.0 && self.toughness_min <= self.toughness,
                "0 < toughness_min <= toughness",
            ),
            (self.degradation_rate >= 0.0, "degradation_rate >= 0"),
            (self.length_scale > 0.0, "length_scale > 0"),
            (
                (0.0..=1.0).contains(&self.stored_plastic_fraction),
                "0 <= stored_plastic_fraction <= 1",
            ),
            (self.diffusivity > 0.0, "diffusivity > 0"),
            (self.partial_molar_volume >= 0.0, "partial_molar_volume >= 0"),
            (self.gas_constant > 0.0, "gas_constant > 0"),
            (self.temperature > 0.0, "temperature > 0"),
            (
                self.diffusivity_amplification >= 0.0,
                "diffusivity_amplification >= 0",
            ),
            (
                (0.0..1.0).contains(&self.damage_threshold),
                "0 <= damage_threshold < 1",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParameter(format!("violated: {msg}")));
            }
        }
        Ok(())
    }
}
