//! Reconstructed permeation transients for the three charging solutions.
//!
//! The rise follows the membrane series with the fitted diffusivity of each
//! solution. After the first day the 10 % and 100 % H₂S currents decay
//! exponentially toward a lower plateau (corrosion-product build-up); the
//! 3 % current stays flat. Steady currents are set from sub-surface
//! concentrations through C0 = (j∞ − j0) l / (F D_avg).

use alloc::string::String;
use alloc::vec::Vec;

use libm::exp;

use crate::diffusion::PPM_TO_MOLAR;
use crate::permeation::{normalized_flux, PermeationTransient, FARADAY};

/// Membrane thickness, m.
pub const MEMBRANE_THICKNESS: f64 = 2.9e-3;
/// Exposed membrane area, m².
pub const MEMBRANE_AREA: f64 = 6.6e-4;
/// Diffusivity used to convert currents to concentrations, m²/s.
pub const AVERAGE_DIFFUSIVITY: f64 = 1.4e-10;
/// Background current before charging, A/m².
pub const BACKGROUND_CURRENT: f64 = 1.5e-3;

/// Shape parameters of one reconstructed transient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientShape {
    /// H₂S in the charging gas, %.
    pub h2s: f64,
    /// Diffusivity governing the rise, m²/s.
    pub diffusivity: f64,
    /// Sub-surface concentration on the first-day plateau, wt ppm.
    pub peak_conc: f64,
    /// Start of the decay, h.
    pub decay_start: f64,
    /// Final plateau as a fraction of the first-day plateau.
    pub plateau_ratio: f64,
    /// e-folding time of the decay, h.
    pub decay_time: f64,
}

pub const H2S_3: TransientShape = TransientShape {
    h2s: 3.0,
    diffusivity: 1.1e-10,
    peak_conc: 3.0,
    decay_start: 24.0,
    plateau_ratio: 1.0,
    decay_time: 80.0,
};

pub const H2S_10: TransientShape = TransientShape {
    h2s: 10.0,
    diffusivity: 1.2e-10,
    peak_conc: 4.4,
    decay_start: 24.0,
    plateau_ratio: 0.5,
    decay_time: 80.0,
};

pub const H2S_100: TransientShape = TransientShape {
    h2s: 100.0,
    diffusivity: 1.9e-10,
    peak_conc: 7.0,
    decay_start: 24.0,
    plateau_ratio: 0.45,
    decay_time: 80.0,
};

pub const ALL: [TransientShape; 3] = [H2S_3, H2S_10, H2S_100];

impl TransientShape {
    /// Steady current above background, A/m².
    pub fn current_amplitude(&self) -> f64 {
        let c0 = self.peak_conc * PPM_TO_MOLAR * 1e9;
        c0 * FARADAY * AVERAGE_DIFFUSIVITY / MEMBRANE_THICKNESS
    }

    /// Relative surface activity at `hours`.
    pub fn decay(&self, hours: f64) -> f64 {
        if hours <= self.decay_start {
            1.0
        } else {
            let r = self.plateau_ratio;
            r + (1.0 - r) * exp(-(hours - self.decay_start) / self.decay_time)
        }
    }

    /// Current density, A/m², at `seconds` after charging starts.
    pub fn current(&self, seconds: f64) -> f64 {
        let tau = self.diffusivity * seconds / (MEMBRANE_THICKNESS * MEMBRANE_THICKNESS);
        BACKGROUND_CURRENT + self.current_amplitude() * normalized_flux(tau) * self.decay(seconds / 3600.0)
    }

    /// Samples every `step` seconds up to `hours`.
    pub fn transient(&self, hours: f64, step: f64) -> PermeationTransient {
        let n = libm::floor(hours * 3600.0 / step) as usize;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let current = times.iter().map(|&t| self.current(t)).collect();
        PermeationTransient {
            times,
            current,
            thickness: MEMBRANE_THICKNESS,
            area: MEMBRANE_AREA,
            label: label(self.h2s),
        }
    }
}

fn label(h2s: f64) -> String {
    alloc::format!("{h2s}% H2S")
}

/// Reconstructed transient at `h2s` percent (3, 10 or 100).
pub fn shape_for(h2s: f64) -> Option<TransientShape> {
    ALL.iter().copied().find(|s| s.h2s == h2s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permeation::{build_env_schedule, fit_transient, subsurface_concentration, ScheduleOptions};

    #[test]
    fn amplitude_inverts_to_concentration() {
        for s in ALL {
            let c = subsurface_concentration(s.current_amplitude(), MEMBRANE_THICKNESS, AVERAGE_DIFFUSIVITY).unwrap();
            assert!((c - s.peak_conc).abs() < 1e-9 * s.peak_conc);
        }
        // 7 ppm at 1.4e-10 m²/s through 2.9 mm
        assert!((H2S_100.current_amplitude() - 0.2546).abs() < 1e-3);
    }

    #[test]
    fn rise_fit_recovers_diffusivity() {
        for s in ALL {
            let data = s.transient(20.0, 60.0);
            let fit = fit_transient(&data).unwrap();
            assert!((fit.diffusivity / s.diffusivity - 1.0).abs() < 1e-3, "{} {}", s.h2s, fit.diffusivity);
            assert!(fit.r_squared >= 0.99);
        }
    }

    #[test]
    fn schedules_decay_after_first_day() {
        let opts = ScheduleOptions::default();
        for s in ALL {
            let data = s.transient(720.0, 600.0);
            let fit = fit_transient(&data.truncated(20.0 * 3600.0)).unwrap();
            let sch = build_env_schedule(&data, &fit, &opts).unwrap();
            assert!(sch.knots().len() <= 50);
            let (tp, cp) = sch.peak();
            assert!((cp / s.peak_conc - 1.0).abs() < 0.01, "{cp}");
            if s.plateau_ratio < 1.0 {
                assert!(tp <= 26.0, "{tp}");
            }
            let end = sch.eval(720.0);
            assert!((end / (s.peak_conc * s.plateau_ratio) - 1.0).abs() < 0.02, "{end}");
        }
    }
}
