//! Bounded reward shaping built around the `tolerance()` primitive.
//!
//! `tolerance(x, params)` returns 1 while `x` lies inside a target interval
//! and decays towards 0 outside it through one of several unit sigmoids.
//! Because every term lives in `[0, 1]`, products and means of tolerance
//! terms stay in `[0, 1]`, which keeps episode returns interpretable.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("margin must be non-negative, got {0}")]
    NegativeMargin(f64),
    #[error("lower bound {0} exceeds upper bound {1}")]
    InvertedBounds(f64, f64),
    #[error("value_at_margin {value} invalid for {kind:?}: expected {expected}")]
    BadValueAtMargin {
        kind: SigmoidKind,
        value: f64,
        expected: &'static str,
    },
    #[error("sigmoid argument must be non-negative, got {0}")]
    NegativeDistance(f64),
}

/// Shape of the decay outside the tolerance interval.
///
/// The first three have infinite support and therefore need a strictly
/// positive `value_at_margin`; the last three reach zero at a finite
/// distance and also accept `value_at_margin = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmoidKind {
    Gaussian,
    Hyperbolic,
    LongTail,
    Linear,
    Cosine,
    Quadratic,
}

impl SigmoidKind {
    pub fn infinite_support(self) -> bool {
        matches!(
            self,
            SigmoidKind::Gaussian | SigmoidKind::Hyperbolic | SigmoidKind::LongTail
        )
    }
}

/// Validated parameter set for [`tolerance`].
///
/// Constructed through [`ToleranceParams::new`] plus the builder methods,
/// so a value of this type always satisfies `lower <= upper`, `margin >= 0`
/// and a `value_at_margin` admissible for the chosen sigmoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceParams {
    lower: f64,
    upper: f64,
    margin: f64,
    sigmoid: SigmoidKind,
    value_at_margin: f64,
}

impl ToleranceParams {
    /// Tolerance interval `[lower, upper]` with the default shaping:
    /// `margin = 0`, gaussian decay, `value_at_margin = 0.1`.
    pub fn new(lower: f64, upper: f64) -> Result<Self, RewardError> {
        if !(lower <= upper) {
            return Err(RewardError::InvertedBounds(lower, upper));
        }
        Ok(Self {
            lower,
            upper,
            margin: 0.0,
            sigmoid: SigmoidKind::Gaussian,
            value_at_margin: 0.1,
        })
    }

    pub fn margin(mut self, margin: f64) -> Result<Self, RewardError> {
        if !(margin >= 0.0) {
            return Err(RewardError::NegativeMargin(margin));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn sigmoid(mut self, kind: SigmoidKind) -> Result<Self, RewardError> {
        validate_value_at_margin(kind, self.value_at_margin)?;
        self.sigmoid = kind;
        Ok(self)
    }

    pub fn value_at_margin(mut self, value: f64) -> Result<Self, RewardError> {
        validate_value_at_margin(self.sigmoid, value)?;
        self.value_at_margin = value;
        Ok(self)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }
}

fn validate_value_at_margin(kind: SigmoidKind, value: f64) -> Result<(), RewardError> {
    let ok = if kind.infinite_support() {
        value > 0.0 && value < 1.0
    } else {
        (0.0..1.0).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(RewardError::BadValueAtMargin {
            kind,
            value,
            expected: if kind.infinite_support() {
                "a value in (0, 1)"
            } else {
                "a value in [0, 1)"
            },
        })
    }
}

/// Unit sigmoid: `S(0) = 1`, `S(1) = value_at_margin`, monotone
/// non-increasing for `r >= 0`.
pub fn sigmoid(r: f64, kind: SigmoidKind, value_at_margin: f64) -> Result<f64, RewardError> {
    if !(r >= 0.0) {
        return Err(RewardError::NegativeDistance(r));
    }
    validate_value_at_margin(kind, value_at_margin)?;
    Ok(sigmoid_unchecked(r, kind, value_at_margin))
}

fn sigmoid_unchecked(r: f64, kind: SigmoidKind, value_at_margin: f64) -> f64 {
    let v = value_at_margin;
    match kind {
        SigmoidKind::Gaussian => {
            let c = (-2.0 * v.ln()).sqrt();
            (-0.5 * (r * c).powi(2)).exp()
        }
        SigmoidKind::Hyperbolic => {
            let c = (1.0 / v).acosh();
            1.0 / (r * c).cosh()
        }
        SigmoidKind::LongTail => {
            let c = (1.0 / v - 1.0).sqrt();
            1.0 / (1.0 + (r * c).powi(2))
        }
        SigmoidKind::Linear => {
            let scaled = r * (1.0 - v);
            if scaled < 1.0 {
                1.0 - scaled
            } else {
                0.0
            }
        }
        SigmoidKind::Quadratic => {
            let scaled = r * (1.0 - v).sqrt();
            if scaled < 1.0 {
                1.0 - scaled * scaled
            } else {
                0.0
            }
        }
        SigmoidKind::Cosine => {
            let scaled = r * (2.0 * v - 1.0).acos() / std::f64::consts::PI;
            if scaled < 1.0 {
                (1.0 + (std::f64::consts::PI * scaled).cos()) / 2.0
            } else {
                0.0
            }
        }
    }
}

/// Returns 1 while `x` is inside the tolerance interval, otherwise the
/// selected sigmoid of the distance to the interval divided by the margin.
/// With `margin = 0` the output is the indicator of the interval.
pub fn tolerance(x: f64, params: &ToleranceParams) -> f64 {
    let (lower, upper) = (params.lower, params.upper);
    if x >= lower && x <= upper {
        return 1.0;
    }
    if params.margin == 0.0 {
        return 0.0;
    }
    let d = if x < lower { lower - x } else { x - upper };
    sigmoid_unchecked(d / params.margin, params.sigmoid, params.value_at_margin)
}
