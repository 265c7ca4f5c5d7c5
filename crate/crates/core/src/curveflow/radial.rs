use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::PotentialField;

/// Round sphere S^n(R) at time t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialState {
    pub n: usize,
    pub r: f64,
    pub t: f64,
}

impl RadialState {
    /// s = ½R².
    pub fn s(&self) -> f64 {
        0.5 * self.r * self.r
    }

    /// |A|² = n / R².
    pub fn a2(&self) -> f64 {
        self.n as f64 / (self.r * self.r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialTrajectory {
    pub states: Vec<RadialState>,
    /// Time at which R² reaches zero, if it does.
    pub blow_down: Option<f64>,
}

fn radial_coefficient(field: &PotentialField) -> Result<f64> {
    match field {
        PotentialField::Constant { .. } => Ok(0.0),
        PotentialField::RadialQuadratic { c, .. } => Ok(*c),
        PotentialField::QuadraticDiagonal { coefficients }
            if coefficients.windows(2).all(|w| w[0] == w[1]) && !coefficients.is_empty() =>
        {
            Ok(coefficients[0])
        }
        other => Err(Error::Unsupported(format!(
            "round spheres stay round only under radial potentials, not {}",
            other.kind_name()
        ))),
    }
}

/// R²(t) for dR/dt = −n/R + cR.
pub fn radius_sq(n: usize, c: f64, r0: f64, t: f64) -> f64 {
    let n = n as f64;
    if c == 0.0 {
        r0 * r0 - 2.0 * n * t
    } else {
        (r0 * r0 - n / c) * (2.0 * c * t).exp() + n / c
    }
}

/// First time R² reaches zero.
pub fn blow_down_time(n: usize, c: f64, r0: f64) -> Option<f64> {
    let nf = n as f64;
    if c == 0.0 {
        return Some(r0 * r0 / (2.0 * nf));
    }
    let gap = nf - c * r0 * r0;
    (gap > 0.0).then(|| (nf / gap).ln() / (2.0 * c))
}

/// The sphere S^n(r0) under a radial potential, sampled at `samples`
/// uniform times in [0, t_end] before any blow-down.
pub fn radial_flow(n: usize, field: &PotentialField, r0: f64, t_end: f64, samples: usize) -> Result<RadialTrajectory> {
    if n == 0 {
        return Err(Error::InvalidParameter("sphere dimension must be at least 1".into()));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter(format!("initial radius must be positive, got {r0}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be nonnegative, got {t_end}")));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two samples are needed".into()));
    }
    if field.dimension() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: field.dimension(),
        });
    }
    let c = radial_coefficient(field)?;
    let blow_down = blow_down_time(n, c, r0);
    let states = (0..samples)
        .map(|k| t_end * k as f64 / (samples - 1) as f64)
        .take_while(|t| blow_down.is_none_or(|tb| *t < tb))
        .map(|t| RadialState {
            n,
            r: radius_sq(n, c, r0, t).max(0.0).sqrt(),
            t,
        })
        .collect();
    Ok(RadialTrajectory { states, blow_down })
}
