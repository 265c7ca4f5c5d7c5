//! Hypotheses of the long-time existence results for a potential and an
//! initial curve, and the |A|² thresholds allowed by the pinching
//! polynomials.

use serde::Serialize;

use crate::curveflow::{bounds_resolution, discrete_geometry, DiscreteCurve};
use crate::error::{Error, Result};
use crate::potential::{HessianBounds, PotentialField, Region};

/// Relative margin used for the strict comparisons |A|² < C.
pub const STRICT_MARGIN: f64 = 1e-12;
pub const THRESHOLD_TOLERANCE: f64 = 1e-12;
/// δ/√C candidates, largest first.
pub const DELTA_FRACTIONS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
const INTERVAL_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Hypersurface,
    HigherCodim,
}

impl Variant {
    /// Curves in the plane are hypersurfaces, space curves are not.
    pub fn for_ambient(dim: usize) -> Self {
        if dim <= 2 {
            Variant::Hypersurface
        } else {
            Variant::HigherCodim
        }
    }

    fn quartic(self) -> f64 {
        match self {
            Variant::Hypersurface => 1.0,
            Variant::HigherCodim => 5.0,
        }
    }

    /// Whether the polynomial condition must hold on both sides of √C.
    pub fn two_sided(self) -> bool {
        self == Variant::Hypersurface
    }
}

/// q·a⁴ + a·C₃ + (λ̄ − 2λ̲)a², with q = 1 for hypersurfaces and 5 otherwise.
pub fn pinch_poly(a: f64, c3: f64, lambda_hi: f64, lambda_lo: f64, variant: Variant) -> f64 {
    let a2 = a * a;
    variant.quartic() * a2 * a2 + a * c3 + (lambda_hi - 2.0 * lambda_lo) * a2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdNote {
    /// λ̄ ≥ 2λ̲.
    HessianNotPinched,
    /// C₃ is large enough that the polynomial never goes negative.
    NoNegativeRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<ThresholdNote>,
}

/// Largest C such that the pinching polynomial is negative just below
/// (and, for hypersurfaces, around) √C: the square of its largest
/// positive root, found by bisection.
pub fn admissible_threshold(c3: f64, lambda_hi: f64, lambda_lo: f64, variant: Variant) -> Threshold {
    let zero = |note| Threshold {
        value: 0.0,
        note: Some(note),
    };
    let d = 2.0 * lambda_lo - lambda_hi;
    if !(d > 0.0) {
        return zero(ThresholdNote::HessianNotPinched);
    }
    let q = variant.quartic();
    // p(a)/a = q·a³ − d·a + C₃, minimal at a_min
    let reduced = |a: f64| q * a * a * a - d * a + c3;
    let a_min = (d / (3.0 * q)).sqrt();
    if reduced(a_min) >= 0.0 {
        return zero(ThresholdNote::NoNegativeRegion);
    }
    let (mut lo, mut hi) = (a_min, (d / q).sqrt());
    if c3 == 0.0 {
        lo = 0.5 * hi;
    }
    while hi - lo > 0.25 * THRESHOLD_TOLERANCE / hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reduced(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Threshold {
        value: hi * hi,
        note: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeBounds {
    Certified,
    Sampled,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialCondition {
    pub holds: bool,
    /// C at which the condition was tested.
    pub c_tested: f64,
    /// Largest passing δ from the scan.
    pub delta: Option<f64>,
    pub two_sided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditions {
    pub hessian_pinch: bool,
    pub initial_a2_below: bool,
    pub polynomial: PolynomialCondition,
    pub derivative_bounds: DerivativeBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub variant: Variant,
    pub bounds: HessianBounds,
    pub a2_initial: f64,
    pub conditions: Conditions,
    pub admissible_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_note: Option<ThresholdNote>,
    pub region_used: Region,
    pub region_contains_curve: bool,
    pub all_met: bool,
}

pub fn max_a2(curve: &DiscreteCurve) -> Result<f64> {
    Ok(discrete_geometry(curve)?.iter().map(|g| g.a2).fold(0.0, f64::max))
}

fn strictly_below(x: f64, c: f64) -> bool {
    x < c * (1.0 - STRICT_MARGIN)
}

/// Largest δ = f·√C from the scan with the polynomial negative on
/// (√C − δ, √C) or (√C − δ, √C + δ).
fn polynomial_condition(c: f64, bounds: &HessianBounds, variant: Variant) -> PolynomialCondition {
    let root = c.sqrt();
    let negative_on = |lo: f64, hi: f64| {
        (1..INTERVAL_SAMPLES).all(|k| {
            let a = lo + (hi - lo) * k as f64 / INTERVAL_SAMPLES as f64;
            pinch_poly(a, bounds.c3, bounds.lambda_hi, bounds.lambda_lo, variant) < 0.0
        })
    };
    let delta = if c > 0.0 {
        DELTA_FRACTIONS.iter().map(|f| f * root).find(|&delta| {
            let hi = if variant.two_sided() { root + delta } else { root };
            // the open interval plus the point √C itself
            negative_on((root - delta).max(0.0), hi)
                && pinch_poly(root, bounds.c3, bounds.lambda_hi, bounds.lambda_lo, variant) < 0.0
        })
    } else {
        None
    };
    PolynomialCondition {
        holds: delta.is_some(),
        c_tested: c,
        delta,
        two_sided: variant.two_sided(),
    }
}

/// Evaluates the four hypotheses for `field` and `curve0` with derivative
/// bounds taken over `region`.
pub fn check_existence_hypotheses(field: &PotentialField, curve0: &DiscreteCurve, variant: Variant, region: &Region) -> Result<HypothesisReport> {
    if field.dimension() != curve0.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve0.dim(),
            got: field.dimension(),
        });
    }
    let bounds = field.hessian_eigen_bounds(region, bounds_resolution(curve0.dim()))?;
    let a2_initial = max_a2(curve0)?;
    let threshold = admissible_threshold(bounds.c3, bounds.lambda_hi, bounds.lambda_lo, variant);
    let hessian_pinch = bounds.lambda_lo > 0.0 && bounds.lambda_hi < 2.0 * bounds.lambda_lo;
    let initial_a2_below = strictly_below(a2_initial, threshold.value);
    // C strictly between the initial curvature and the threshold
    let c_tested = if initial_a2_below {
        0.5 * (a2_initial + threshold.value)
    } else {
        a2_initial.max(threshold.value)
    };
    let polynomial = polynomial_condition(c_tested, &bounds, variant);
    let bounded = region.lo.iter().chain(&region.hi).all(|v| v.is_finite());
    let derivative_bounds = match (bounded, field.is_polynomial()) {
        (false, _) => DerivativeBounds::Unknown,
        (true, true) => DerivativeBounds::Certified,
        (true, false) => DerivativeBounds::Sampled,
    };
    let region_contains_curve = curve0.points().all(|p| region.contains(p));
    let all_met = hessian_pinch && initial_a2_below && polynomial.holds && derivative_bounds != DerivativeBounds::Unknown && region_contains_curve;
    Ok(HypothesisReport {
        variant,
        bounds,
        a2_initial,
        conditions: Conditions {
            hessian_pinch,
            initial_a2_below,
            polynomial,
            derivative_bounds,
        },
        admissible_c: threshold.value,
        threshold_note: threshold.note,
        region_used: region.clone(),
        region_contains_curve,
        all_met,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(rename = "M_lt_2m")]
    pub big_m_lt_2m: bool,
    pub a2_initial: f64,
    /// 2m − M.
    pub threshold: f64,
    pub a2_lt_threshold: bool,
}

impl CorollaryReport {
    pub fn holds(&self) -> bool {
        self.big_m_lt_2m && self.a2_lt_threshold
    }
}

/// Hypotheses for ω = Σ c_i x_i²/2 with m = min c_i, M = max c_i.
pub fn check_two_potential_corollary(coefficients: &[f64], curve0: &DiscreteCurve) -> Result<CorollaryReport> {
    if coefficients.len() != curve0.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve0.dim(),
            got: coefficients.len(),
        });
    }
    if let Some(c) = coefficients.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidParameter(format!("coefficients must be positive, got {c}")));
    }
    let m = coefficients.iter().copied().fold(f64::INFINITY, f64::min);
    let big_m = coefficients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = 2.0 * m - big_m;
    let a2_initial = max_a2(curve0)?;
    Ok(CorollaryReport {
        m,
        big_m,
        big_m_lt_2m: big_m < 2.0 * m,
        a2_initial,
        threshold,
        a2_lt_threshold: threshold > 0.0 && strictly_below(a2_initial, threshold),
    })
}
