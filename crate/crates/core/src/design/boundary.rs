use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One parametric decision boundary over enrollment counts:
///
/// ```text
/// b(l) = 1 - scale * max(0, (l - activation) / (m_max - activation))^shape
/// ```
///
/// The boundary is 1 (rule inactive) below the activation count, decreases to
/// `1 - scale` at `m_max` when `shape > 0`, and is the constant `1 - scale`
/// from activation on when `shape == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub scale: f64,
    pub shape: f64,
    pub activation: u32,
    pub m_max: u32,
}

impl BoundarySpec {
    pub fn new(scale: f64, shape: f64, activation: u32, m_max: u32) -> Result<Self> {
        let spec = BoundarySpec {
            scale,
            shape,
            activation,
            m_max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.scale) || !self.scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "boundary scale must be in [0, 1], got {}",
                self.scale
            )));
        }
        if !(self.shape >= 0.0) || !self.shape.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "boundary shape must be >= 0, got {}",
                self.shape
            )));
        }
        if self.activation > self.m_max {
            return Err(Error::InvalidConfig(format!(
                "boundary activation {} exceeds m_max {}",
                self.activation, self.m_max
            )));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("m_max must be positive".into()));
        }
        Ok(())
    }

    /// The enrollment-ratio power term; zero while the rule is inactive.
    ///
    /// For `shape == 0` the term is 1 from activation on, so the boundary is
    /// the constant `1 - scale` there.
    pub fn ratio_power(&self, enrolled: u32) -> f64 {
        if enrolled < self.activation {
            return 0.0;
        }
        if self.shape == 0.0 {
            return 1.0;
        }
        let ratio = if self.m_max == self.activation {
            1.0
        } else {
            (enrolled - self.activation) as f64 / (self.m_max - self.activation) as f64
        };
        ratio.powf(self.shape)
    }

    /// Boundary value at an enrollment count in `[1, m_max]`.
    pub fn value(&self, enrolled: u32) -> f64 {
        assert!(
            enrolled >= 1 && enrolled <= self.m_max,
            "boundary evaluated at {} outside [1, {}]",
            enrolled,
            self.m_max
        );
        1.0 - self.scale * self.ratio_power(enrolled)
    }

    /// True when the rule can fire at this count (boundary strictly below 1).
    pub fn active(&self, enrolled: u32) -> bool {
        enrolled >= 1 && enrolled <= self.m_max && self.scale > 0.0 && self.ratio_power(enrolled) > 0.0
    }

    pub fn with_scale(&self, scale: f64) -> BoundarySpec {
        BoundarySpec { scale, ..*self }
    }
}
