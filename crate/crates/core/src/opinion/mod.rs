//! Binomial opinions and the Subjective Logic operator kernel.
//!
//! An [`Opinion`] is a point `(b, d, u)` on the belief/disbelief/uncertainty
//! simplex together with a base rate `a`. Every operator in this module is a
//! pure function over immutable values.

mod deduction;
mod fusion;
mod logic;

pub use deduction::{
    deduce, deduce_traced, marginal_base_rate, ConditionalPair, Deduction, FALLBACK_BASE_RATE,
};
pub use fusion::{fuse, FusionMode, DEFAULT_DOGMATIC_GAMMA};
pub use logic::{comultiply, multiply};

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use thiserror::Error;

/// Absolute tolerance on the simplex constraint `b + d + u = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Sums this close to one are left untouched, so exact inputs stay bit-exact
/// and 12-significant-digit text re-parses to the same values.
const RENORMALIZE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OpinionError {
    #[error("opinion ({b}, {d}, {u}) violates the simplex constraint b + d + u = 1")]
    SimplexViolation { b: f64, d: f64, u: f64 },
    #[error("base rate {0} outside [0, 1]")]
    BaseRateRange(f64),
    #[error("dogmatic opinion (u = 0) has no finite evidence equivalent")]
    DogmaticOpinion,
    #[error("base rates make the operator undefined (a_x = {a_x}, a_y = {a_y})")]
    BaseRateDegenerate { a_x: f64, a_y: f64 },
    #[error("both conditionals are vacuous; the consequent base rate is undetermined")]
    DegenerateConditionals,
    #[error("Beta density diverges at p = {0}")]
    DivergentEndpoint(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
    #[error("invalid evidence: r = {r}, s = {s}, W = {weight}")]
    InvalidEvidence { r: f64, s: f64, weight: f64 },
    #[error("invalid Beta shape: alpha = {alpha}, beta = {beta}")]
    InvalidShape { alpha: f64, beta: f64 },
}

/// A binomial opinion `(b, d, u, a)` about a binary proposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOpinion", into = "RawOpinion")]
pub struct Opinion {
    b: f64,
    d: f64,
    u: f64,
    a: f64,
}

#[derive(Serialize, Deserialize)]
struct RawOpinion {
    b: f64,
    d: f64,
    u: f64,
    a: f64,
}

impl TryFrom<RawOpinion> for Opinion {
    type Error = OpinionError;
    fn try_from(raw: RawOpinion) -> Result<Self, Self::Error> {
        Opinion::new(raw.b, raw.d, raw.u, raw.a)
    }
}

impl From<Opinion> for RawOpinion {
    fn from(o: Opinion) -> Self {
        RawOpinion { b: o.b, d: o.d, u: o.u, a: o.a }
    }
}

impl Opinion {
    /// Validates and normalizes the components; see [`validate_opinion`].
    pub fn new(b: f64, d: f64, u: f64, a: f64) -> Result<Self, OpinionError> {
        validate_opinion(Opinion { b, d, u, a })
    }

    /// The opinion with no committed mass.
    pub fn vacuous(a: f64) -> Self {
        Opinion { b: 0.0, d: 0.0, u: 1.0, a: a.clamp(0.0, 1.0) }
    }

    /// Absolute belief.
    pub fn truth(a: f64) -> Self {
        Opinion { b: 1.0, d: 0.0, u: 0.0, a: a.clamp(0.0, 1.0) }
    }

    /// Absolute disbelief.
    pub fn falsehood(a: f64) -> Self {
        Opinion { b: 0.0, d: 1.0, u: 0.0, a: a.clamp(0.0, 1.0) }
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_dogmatic(&self) -> bool {
        self.u == 0.0
    }

    pub fn is_vacuous(&self) -> bool {
        self.u == 1.0
    }

    /// Same mass assignment under a different base rate.
    pub fn with_base_rate(self, a: f64) -> Result<Self, OpinionError> {
        if !(0.0..=1.0).contains(&a) {
            return Err(OpinionError::BaseRateRange(a));
        }
        Ok(Opinion { a, ..self })
    }

    /// Expected probability `b + a·u`.
    pub fn project(&self) -> f64 {
        project(self)
    }

    /// Settles operator output onto the simplex. Operator formulas keep the
    /// result within floating-point drift of the simplex, so any failure here
    /// is a bug in the caller.
    pub(crate) fn settle(b: f64, d: f64, u: f64, a: f64) -> Self {
        let settled = validate_opinion(Opinion { b, d, u, a });
        debug_assert!(settled.is_ok(), "operator left the simplex: ({b}, {d}, {u}, {a})");
        settled.unwrap_or_else(|_| {
            let (b, d, u) = (b.max(0.0), d.max(0.0), u.max(0.0));
            let s = b + d + u;
            Opinion { b: b / s, d: d / s, u: u / s, a: a.clamp(0.0, 1.0) }
        })
    }
}

/// Accepts opinions within [`SIMPLEX_TOLERANCE`] of the simplex.
///
/// Components in `[-1e-9, 0)` or `(1, 1 + 1e-9]` are clamped onto `[0, 1]`,
/// and a sum within tolerance of one is renormalized. Anything further away is
/// rejected. The base rate gets the same clamping band.
pub fn validate_opinion(o: Opinion) -> Result<Opinion, OpinionError> {
    let Opinion { b, d, u, a } = o;
    let in_band = |x: f64| x.is_finite() && (-SIMPLEX_TOLERANCE..=1.0 + SIMPLEX_TOLERANCE).contains(&x);
    if !(in_band(b) && in_band(d) && in_band(u)) {
        return Err(OpinionError::SimplexViolation { b, d, u });
    }
    if !in_band(a) {
        return Err(OpinionError::BaseRateRange(a));
    }
    let sum = b + d + u;
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(OpinionError::SimplexViolation { b, d, u });
    }
    let (mut b, mut d, mut u) = (b.clamp(0.0, 1.0), d.clamp(0.0, 1.0), u.clamp(0.0, 1.0));
    let sum = b + d + u;
    if (sum - 1.0).abs() > RENORMALIZE_SLACK {
        b /= sum;
        d /= sum;
        u /= sum;
    }
    Ok(Opinion { b, d, u, a: a.clamp(0.0, 1.0) })
}

/// Expected probability of an opinion, `b + a·u`.
pub fn project(o: &Opinion) -> f64 {
    o.b + o.a * o.u
}

/// Positive/negative evidence counts with the non-informative prior weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceCount {
    pub r: f64,
    pub s: f64,
    #[serde(rename = "W")]
    pub weight: f64,
    pub a: f64,
}

impl EvidenceCount {
    pub fn new(r: f64, s: f64, weight: f64, a: f64) -> Result<Self, OpinionError> {
        let e = EvidenceCount { r, s, weight, a };
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<(), OpinionError> {
        let ok = self.r.is_finite()
            && self.s.is_finite()
            && self.weight.is_finite()
            && self.r >= 0.0
            && self.s >= 0.0
            && self.weight > 0.0;
        if !ok {
            return Err(OpinionError::InvalidEvidence { r: self.r, s: self.s, weight: self.weight });
        }
        if !(0.0..=1.0).contains(&self.a) {
            return Err(OpinionError::BaseRateRange(self.a));
        }
        Ok(())
    }
}

/// Maps evidence counts to an opinion: `b = r/(r+s+W)`, `d = s/(r+s+W)`,
/// `u = W/(r+s+W)`.
pub fn from_evidence(e: &EvidenceCount) -> Result<Opinion, OpinionError> {
    e.check()?;
    let total = e.r + e.s + e.weight;
    let b = e.r / total;
    let d = e.s / total;
    Ok(Opinion::settle(b, d, e.weight / total, e.a))
}

/// Inverse of [`from_evidence`] for a given prior weight.
pub fn to_evidence(o: &Opinion, weight: f64) -> Result<EvidenceCount, OpinionError> {
    if !(weight.is_finite() && weight > 0.0) {
        return Err(OpinionError::InvalidEvidence { r: f64::NAN, s: f64::NAN, weight });
    }
    if o.u == 0.0 {
        return Err(OpinionError::DogmaticOpinion);
    }
    Ok(EvidenceCount { r: weight * o.b / o.u, s: weight * o.d / o.u, weight, a: o.a })
}

/// Parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, OpinionError> {
        if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
            Ok(BetaShape { alpha, beta })
        } else {
            Err(OpinionError::InvalidShape { alpha, beta })
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Location of the density maximum, when it is interior or a finite endpoint.
    pub fn mode(&self) -> Option<f64> {
        let (al, be) = (self.alpha, self.beta);
        if al > 1.0 && be > 1.0 {
            Some((al - 1.0) / (al + be - 2.0))
        } else if al > 1.0 && be <= 1.0 {
            Some(1.0)
        } else if al <= 1.0 && be > 1.0 {
            Some(0.0)
        } else {
            None
        }
    }

    /// True when the density is finite at both endpoints.
    pub fn bounded(&self) -> bool {
        self.alpha >= 1.0 && self.beta >= 1.0
    }
}

/// Beta shape of an opinion: `alpha = r + a·W`, `beta = s + (1-a)·W`.
pub fn to_beta(o: &Opinion, weight: f64) -> Result<BetaShape, OpinionError> {
    let e = to_evidence(o, weight)?;
    BetaShape::new(e.r + o.a * weight, e.s + (1.0 - o.a) * weight)
}

/// Beta density at `p`.
///
/// Endpoints follow the limit of `p^(alpha-1)` and `(1-p)^(beta-1)`: a
/// positive exponent gives zero, a zero exponent gives one, and a negative
/// exponent is [`OpinionError::DivergentEndpoint`].
pub fn beta_pdf(shape: &BetaShape, p: f64) -> Result<f64, OpinionError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(OpinionError::ProbabilityRange(p));
    }
    let BetaShape { alpha, beta } = *shape;
    let endpoint = |x: f64, exponent: f64| -> Result<Option<f64>, OpinionError> {
        if x != 0.0 {
            return Ok(None);
        }
        if exponent > 0.0 {
            Ok(Some(0.0))
        } else if exponent == 0.0 {
            Ok(Some(1.0))
        } else {
            Err(OpinionError::DivergentEndpoint(p))
        }
    };
    let left = endpoint(p, alpha - 1.0)?;
    let right = endpoint(1.0 - p, beta - 1.0)?;
    if left == Some(0.0) || right == Some(0.0) {
        return Ok(0.0);
    }
    let log_left = match left {
        Some(_) => 0.0,
        None => (alpha - 1.0) * p.ln(),
    };
    let log_right = match right {
        Some(_) => 0.0,
        None => (beta - 1.0) * (1.0 - p).ln(),
    };
    Ok((log_left + log_right - ln_beta(alpha, beta)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn op(b: f64, d: f64, u: f64, a: f64) -> Opinion {
        Opinion::new(b, d, u, a).unwrap()
    }

    #[test]
    fn exact_simplex_point_is_unchanged() {
        let o = op(0.5, 0.5, 0.0, 0.5);
        assert_eq!((o.b(), o.d(), o.u(), o.a()), (0.5, 0.5, 0.0, 0.5));
    }

    #[test]
    fn overfull_mass_is_rejected() {
        assert!(matches!(
            Opinion::new(0.6, 0.6, 0.2, 0.5),
            Err(OpinionError::SimplexViolation { .. })
        ));
    }

    #[test]
    fn tiny_negative_is_clamped() {
        let o = op(0.8, 0.2, -1e-13, 0.5);
        assert_eq!((o.b(), o.d(), o.u(), o.a()), (0.8, 0.2, 0.0, 0.5));
    }

    #[test]
    fn out_of_band_component_and_base_rate() {
        assert!(matches!(
            Opinion::new(1.1, -0.1, 0.0, 0.5),
            Err(OpinionError::SimplexViolation { .. })
        ));
        assert!(matches!(Opinion::new(0.5, 0.5, 0.0, 1.2), Err(OpinionError::BaseRateRange(_))));
        assert!(matches!(Opinion::new(0.5, 0.5, 0.0, -0.1), Err(OpinionError::BaseRateRange(_))));
        assert!(Opinion::new(f64::NAN, 0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn drift_within_tolerance_is_renormalized() {
        let o = op(0.5 + 4e-10, 0.25, 0.25, 0.5);
        assert_abs_diff_eq!(o.b() + o.d() + o.u(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evidence_mapping() {
        let o = from_evidence(&EvidenceCount::new(8.0, 0.0, 2.0, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(o.b(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(o.d(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.u(), 0.2, epsilon = 1e-12);

        let o = from_evidence(&EvidenceCount::new(0.0, 0.0, 2.0, 0.5).unwrap()).unwrap();
        assert_eq!((o.b(), o.d(), o.u()), (0.0, 0.0, 1.0));

        let o = from_evidence(&EvidenceCount::new(4.0, 2.0, 2.0, 0.5).unwrap()).unwrap();
        assert_eq!((o.b(), o.d(), o.u()), (0.5, 0.25, 0.25));
    }

    #[test]
    fn invalid_evidence() {
        assert!(EvidenceCount::new(-1.0, 0.0, 2.0, 0.5).is_err());
        assert!(EvidenceCount::new(1.0, 0.0, 0.0, 0.5).is_err());
        assert!(EvidenceCount::new(1.0, 0.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn evidence_inverse() {
        let e = to_evidence(&op(0.8, 0.0, 0.2, 0.5), 2.0).unwrap();
        assert_abs_diff_eq!(e.r, 8.0, epsilon = 1e-12);
        assert_eq!(e.s, 0.0);
        let e = to_evidence(&Opinion::vacuous(0.5), 2.0).unwrap();
        assert_eq!((e.r, e.s), (0.0, 0.0));
        assert_eq!(to_evidence(&Opinion::truth(0.5), 2.0), Err(OpinionError::DogmaticOpinion));
    }

    #[test]
    fn projection() {
        assert_eq!(Opinion::vacuous(0.5).project(), 0.5);
        assert_abs_diff_eq!(op(0.8, 0.0, 0.2, 0.5).project(), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(op(0.74, 0.05, 0.21, 0.41341).project(), 0.8268161, epsilon = 1e-9);
    }

    #[test]
    fn beta_shapes() {
        let s = to_beta(&op(0.8, 0.0, 0.2, 0.5), 2.0).unwrap();
        assert_abs_diff_eq!(s.alpha, 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.beta, 1.0, epsilon = 1e-12);
        let s = to_beta(&Opinion::vacuous(0.5), 2.0).unwrap();
        assert_eq!((s.alpha, s.beta), (1.0, 1.0));
        let s = to_beta(&op(0.5, 0.25, 0.25, 0.5), 2.0).unwrap();
        assert_eq!((s.alpha, s.beta), (5.0, 3.0));
        assert_eq!(to_beta(&Opinion::falsehood(0.5), 2.0), Err(OpinionError::DogmaticOpinion));
    }

    #[test]
    fn beta_density_values() {
        let uniform = BetaShape::new(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(beta_pdf(&uniform, 0.3).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_pdf(&uniform, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        let b22 = BetaShape::new(2.0, 2.0).unwrap();
        assert_abs_diff_eq!(beta_pdf(&b22, 0.5).unwrap(), 1.5, epsilon = 1e-12);
        assert_eq!(beta_pdf(&b22, 0.0).unwrap(), 0.0);
        let b91 = BetaShape::new(9.0, 1.0).unwrap();
        assert_abs_diff_eq!(beta_pdf(&b91, 1.0).unwrap(), 9.0, epsilon = 1e-10);
        assert_eq!(beta_pdf(&b91, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn beta_density_divergence_and_range() {
        let s = BetaShape::new(0.5, 2.0).unwrap();
        assert_eq!(beta_pdf(&s, 0.0), Err(OpinionError::DivergentEndpoint(0.0)));
        assert!(beta_pdf(&s, 0.5).unwrap() > 0.0);
        assert_eq!(beta_pdf(&s, 1.5), Err(OpinionError::ProbabilityRange(1.5)));
        assert!(BetaShape::new(0.0, 1.0).is_err());
    }

    #[test]
    fn beta_density_integrates_to_one() {
        for (al, be) in [(1.0, 1.0), (2.0, 2.0), (9.0, 1.0), (5.0, 3.0), (3.0, 7.5)] {
            let s = BetaShape::new(al, be).unwrap();
            let n = 10_000;
            let h = 1.0 / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * beta_pdf(&s, i as f64 * h).unwrap();
            }
            assert_abs_diff_eq!(total * h, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn serde_rejects_invalid_opinion() {
        let ok: Opinion = serde_json::from_str(r#"{"b":0.2,"d":0.3,"u":0.5,"a":0.5}"#).unwrap();
        assert_eq!(ok.u(), 0.5);
        assert!(serde_json::from_str::<Opinion>(r#"{"b":0.9,"d":0.3,"u":0.5,"a":0.5}"#).is_err());
    }
}
