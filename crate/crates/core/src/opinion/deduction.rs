//! Binomial conditional deduction.
//!
//! The deduced opinion is the image of the antecedent under the barycentric
//! map that sends the belief vertex to the positive conditional, the
//! disbelief vertex to the negative conditional, and the uncertainty vertex to
//! an apex opinion: the most uncertain opinion consistent with both
//! conditionals whose projection equals the deduced projection of a vacuous
//! antecedent.

use serde::{Deserialize, Serialize};

use super::{Opinion, OpinionError};

/// Base rate used when the conditionals leave the consequent base rate open
/// and no other default is supplied.
pub const FALLBACK_BASE_RATE: f64 = 0.5;

const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Positive and negative conditional opinions on an inferential step, with an
/// optional explicit consequent base rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPair {
    /// Opinion on the consequent given the antecedent holds.
    pub pos: Opinion,
    /// Opinion on the consequent given the antecedent fails.
    pub neg: Opinion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consequent_base_rate: Option<f64>,
}

impl ConditionalPair {
    pub fn new(pos: Opinion, neg: Opinion) -> Self {
        ConditionalPair { pos, neg, consequent_base_rate: None }
    }

    pub fn with_base_rate(mut self, a: f64) -> Result<Self, OpinionError> {
        if !(0.0..=1.0).contains(&a) {
            return Err(OpinionError::BaseRateRange(a));
        }
        self.consequent_base_rate = Some(a);
        Ok(self)
    }

    fn both_vacuous(&self) -> bool {
        self.pos.is_vacuous() && self.neg.is_vacuous()
    }
}

/// Consequent base rate implied by the conditionals.
///
/// Solves `a_y = a_x·E(pos) + (1-a_x)·E(neg)` where both expectations are
/// taken under `a_y` itself, which is what makes a vacuous antecedent deduce
/// to a vacuous consequent.
pub fn marginal_base_rate(c: &ConditionalPair, a_x: f64) -> Result<f64, OpinionError> {
    if let Some(a) = c.consequent_base_rate {
        return Ok(a);
    }
    let (pos, neg) = (&c.pos, &c.neg);
    let denom = 1.0 - a_x * pos.u() - (1.0 - a_x) * neg.u();
    if denom <= DEGENERATE_DENOMINATOR {
        return Err(OpinionError::DegenerateConditionals);
    }
    Ok(((a_x * pos.b() + (1.0 - a_x) * neg.b()) / denom).clamp(0.0, 1.0))
}

/// A deduced opinion together with the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deduction {
    pub opinion: Opinion,
    /// Consequent base rate `a_y`.
    pub base_rate: f64,
    /// Uncertainty of the apex opinion (image of the vacuous antecedent).
    pub apex_uncertainty: f64,
    /// Uncertainty added on top of the linear interpolation of the
    /// conditionals' uncertainties.
    pub uncertainty_increase: f64,
}

/// Deduces an opinion on the consequent from an antecedent opinion.
pub fn deduce(x: &Opinion, c: &ConditionalPair) -> Opinion {
    deduce_traced(x, c, FALLBACK_BASE_RATE).opinion
}

/// [`deduce`] with provenance. `fallback_base_rate` is used only when the
/// conditionals do not determine the consequent base rate.
pub fn deduce_traced(x: &Opinion, c: &ConditionalPair, fallback_base_rate: f64) -> Deduction {
    let (pos, neg) = (&c.pos, &c.neg);
    if c.both_vacuous() {
        let a = c.consequent_base_rate.unwrap_or(fallback_base_rate);
        return Deduction {
            opinion: Opinion::vacuous(a),
            base_rate: a,
            apex_uncertainty: 1.0,
            uncertainty_increase: 0.0,
        };
    }
    let a_x = x.a();
    // Only reachable with a_x ∈ {0, 1} and the weighted conditional vacuous;
    // every a_y then satisfies the fixpoint.
    let a_y = marginal_base_rate(c, a_x).unwrap_or(fallback_base_rate);

    let e_pos = pos.b() + a_y * pos.u();
    let e_neg = neg.b() + a_y * neg.u();
    let e_vac = a_x * e_pos + (1.0 - a_x) * e_neg;
    let b_min = pos.b().min(neg.b());
    let d_min = pos.d().min(neg.d());

    let mut u_apex = f64::INFINITY;
    if a_y > 0.0 {
        u_apex = u_apex.min((e_vac - b_min) / a_y);
    }
    if a_y < 1.0 {
        u_apex = u_apex.min((1.0 - e_vac - d_min) / (1.0 - a_y));
    }
    let u_apex = u_apex.clamp(0.0, 1.0);
    let b_apex = e_vac - a_y * u_apex;
    let d_apex = 1.0 - b_apex - u_apex;

    let (bx, dx, ux) = (x.b(), x.d(), x.u());
    let b = bx * pos.b() + dx * neg.b() + ux * b_apex;
    let d = bx * pos.d() + dx * neg.d() + ux * d_apex;
    let u = bx * pos.u() + dx * neg.u() + ux * u_apex;
    let interpolated = bx * pos.u() + dx * neg.u() + ux * (a_x * pos.u() + (1.0 - a_x) * neg.u());

    Deduction {
        opinion: Opinion::settle(b, d, u, a_y),
        base_rate: a_y,
        apex_uncertainty: u_apex,
        uncertainty_increase: u - interpolated,
    }
}
