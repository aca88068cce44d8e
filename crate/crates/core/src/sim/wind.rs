//! Weibull wind model.
//!
//! Parameter roles follow the density as printed in the source energy
//! model: `a` sits in the speed ratio (`ω/a`) and `b` in the exponent, so
//! `a` acts as the scale and `b` as the shape parameter. Written inline:
//! `p(ω; a, b) = (b/a)·(ω/a)^(b-1)·exp(-(ω/a)^b)` for `ω ≥ 0`, 0 otherwise.
//! The surrounding prose of that model names `a` the shape and `b` the
//! scale, which contradicts the printed formula; this implementation keeps
//! the printed positions, so the mean wind speed is `a·Γ(1 + 1/b)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wind over the working area: Weibull speed plus a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindFieldRepr", into = "WindFieldRepr")]
pub struct WindField {
    /// Scale parameter (in the speed ratio of the density), m/s.
    pub a: f64,
    /// Shape parameter (in the exponent of the density), unitless.
    pub b: f64,
    /// Direction the wind blows toward, degrees in `[0, 360)`.
    pub omega_o: f64,
}

#[derive(Serialize, Deserialize)]
struct WindFieldRepr {
    a: f64,
    b: f64,
    omega_o: f64,
}

impl From<WindField> for WindFieldRepr {
    fn from(w: WindField) -> Self {
        WindFieldRepr { a: w.a, b: w.b, omega_o: w.omega_o }
    }
}

impl TryFrom<WindFieldRepr> for WindField {
    type Error = Error;
    fn try_from(r: WindFieldRepr) -> Result<Self> {
        WindField::new(r.a, r.b, r.omega_o)
    }
}

impl WindField {
    pub fn new(a: f64, b: f64, omega_o: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("wind scale a must be positive, got {a}")));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("wind shape b must be positive, got {b}")));
        }
        if !(0.0..360.0).contains(&omega_o) {
            return Err(Error::invalid(format!("wind direction {omega_o} outside [0, 360)")));
        }
        Ok(WindField { a, b, omega_o })
    }
}

/// Draws a wind speed by inverse CDF: `ω = a·(-ln u)^(1/b)` with
/// `u ~ Uniform(0, 1)`; always non-negative.
pub fn weibull_sample(field: &WindField, rng: &mut impl Rng) -> f64 {
    // map the [0,1) draw onto (0,1] so the logarithm stays finite
    let u: f64 = 1.0 - rng.gen::<f64>();
    field.a * (-u.ln()).powf(1.0 / field.b)
}

/// Density of the sampled speed distribution; zero for negative speeds.
pub fn weibull_pdf(field: &WindField, speed: f64) -> f64 {
    if speed < 0.0 {
        return 0.0;
    }
    let ratio = speed / field.a;
    (field.b / field.a) * ratio.powf(field.b - 1.0) * (-ratio.powf(field.b)).exp()
}
