use serde::Serialize;

use crate::error::{ConfigError, Result};
use crate::kernel::WavenumberGrid;

/// Initial equal-time correlation `Q(k; 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpectrum {
    /// `A k⁴ exp(−2k²/k_p²)`
    Peaked { amplitude: f64, k_peak: f64 },
    /// `c k^a exp(−k/k_c)`
    PowerExp { c: f64, exponent: f64, cutoff: f64 },
}

impl InitialSpectrum {
    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(format!("initial_spectrum.{key}"), "must be finite and > 0"))
            }
        };
        match *self {
            InitialSpectrum::Peaked { amplitude, k_peak } => {
                positive("amplitude", amplitude)?;
                positive("k_peak", k_peak)?;
            }
            InitialSpectrum::PowerExp { c, exponent, cutoff } => {
                positive("c", c)?;
                positive("cutoff", cutoff)?;
                if !exponent.is_finite() {
                    return Err(ConfigError::new("initial_spectrum.exponent", "must be finite").into());
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, k: f64) -> f64 {
        match *self {
            InitialSpectrum::Peaked { amplitude, k_peak } => {
                amplitude * k.powi(4) * (-2.0 * k * k / (k_peak * k_peak)).exp()
            }
            InitialSpectrum::PowerExp { c, exponent, cutoff } => c * k.powf(exponent) * (-k / cutoff).exp(),
        }
    }

    pub fn sample(&self, grid: &WavenumberGrid) -> Vec<f64> {
        grid.k_nodes().iter().map(|&k| self.eval(k)).collect()
    }
}

/// A gentle low-Reynolds-number start, `0.05 k exp(−2k)`, under which every
/// closure decays stably on the default grid.
impl Default for InitialSpectrum {
    fn default() -> Self {
        InitialSpectrum::PowerExp {
            c: 0.05,
            exponent: 1.0,
            cutoff: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaked_maximum_of_k4_gaussian() {
        // d/dk [k⁴ e^{-2k²/kp²}] = 0 at k = kp
        let s = InitialSpectrum::Peaked { amplitude: 2.0, k_peak: 1.5 };
        let at = |k: f64| s.eval(k);
        assert!(at(1.5) > at(1.49) && at(1.5) > at(1.51));
        assert!((at(1.5) - 2.0 * 1.5f64.powi(4) * (-2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let s = InitialSpectrum::PowerExp { c: 1.0, exponent: 2.0, cutoff: 0.0 };
        assert!(s.validate().is_err());
        assert!(InitialSpectrum::default().validate().is_ok());
    }
}
