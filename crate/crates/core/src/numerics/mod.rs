//! Arithmetic backends, precision settings, quadrature and grid utilities.

mod grid;
mod quadrature;
mod real;

pub use grid::{grid_derivative, midpoint_grid, total_variation, uniform_grid};
pub use quadrature::{gauss_legendre, Quadrature};
pub use real::{pow2, BigFloat, Rational, Real, RATIONAL_FALLBACK_BITS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticMode {
    ExactRational,
    ExtendedFloat,
}

/// Arithmetic mode and numerical tolerances for one computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub mode: ArithmeticMode,
    pub float_bits: u32,
    pub quad_tol: f64,
    pub grid_points: usize,
    pub max_quad_panels: usize,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self::extended(256)
    }
}

impl PrecisionContext {
    pub fn extended(bits: u32) -> Self {
        PrecisionContext {
            mode: ArithmeticMode::ExtendedFloat,
            float_bits: bits,
            quad_tol: Self::default_tol(bits),
            grid_points: 129,
            max_quad_panels: 4000,
        }
    }

    pub fn exact() -> Self {
        PrecisionContext { mode: ArithmeticMode::ExactRational, ..Self::extended(256) }
    }

    /// `1e-20`, loosened when the precision cannot resolve it.
    pub fn default_tol(bits: u32) -> f64 {
        1e-20f64.max(2f64.powi(24 - bits as i32))
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn with_grid_points(mut self, n: usize) -> Self {
        self.grid_points = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == ArithmeticMode::ExtendedFloat && self.float_bits < 64 {
            return Err(Error::BadPrecision(format!("float_bits {} < 64", self.float_bits)));
        }
        if !(self.quad_tol > 0.0) || !self.quad_tol.is_finite() {
            return Err(Error::BadPrecision(format!("quad_tol {} must be positive", self.quad_tol)));
        }
        if self.grid_points < 3 {
            return Err(Error::BadPrecision(format!("grid_points {} < 3", self.grid_points)));
        }
        if self.max_quad_panels < 2 {
            return Err(Error::BadPrecision("max_quad_panels < 2".into()));
        }
        Ok(())
    }

    /// Sup-norm differences below this are treated as rounding noise.
    pub fn noise_floor(&self) -> f64 {
        match self.mode {
            ArithmeticMode::ExactRational => 0.0,
            ArithmeticMode::ExtendedFloat => 2f64.powi(-(self.float_bits as i32) / 2),
        }
    }

    pub fn quadrature<T: Real>(&self, ctx: &T::Ctx) -> Quadrature<T> {
        Quadrature::new(ctx, self.quad_tol, self.max_quad_panels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_settings() {
        assert!(PrecisionContext::extended(32).validate().is_err());
        assert!(PrecisionContext::extended(64).validate().is_ok());
        assert!(PrecisionContext::default().with_grid_points(2).validate().is_err());
        assert!(PrecisionContext::default().with_quad_tol(0.0).validate().is_err());
        assert!(PrecisionContext::exact().validate().is_ok());
    }

    #[test]
    fn default_tolerance_tracks_precision() {
        assert_eq!(PrecisionContext::default_tol(256), 1e-20);
        assert!(PrecisionContext::default_tol(64) > 1e-13);
    }
}
