//! Binomial multiplication (AND) and co-multiplication (OR).

use super::{Opinion, OpinionError};

/// Conjunction of opinions on independent propositions.
///
/// The projection of the product equals the product of the projections.
pub fn multiply(x: &Opinion, y: &Opinion) -> Result<Opinion, OpinionError> {
    let (bx, dx, ux, ax) = (x.b(), x.d(), x.u(), x.a());
    let (by, dy, uy, ay) = (y.b(), y.d(), y.u(), y.a());
    let denom = 1.0 - ax * ay;
    if denom <= 0.0 {
        return Err(OpinionError::BaseRateDegenerate { a_x: ax, a_y: ay });
    }
    let b = bx * by + ((1.0 - ax) * ay * bx * uy + ax * (1.0 - ay) * ux * by) / denom;
    let d = dx + dy - dx * dy;
    let u = ux * uy + ((1.0 - ay) * bx * uy + (1.0 - ax) * ux * by) / denom;
    Ok(Opinion::settle(b, d, u, ax * ay))
}

/// Disjunction of opinions on independent propositions.
///
/// The projection of the result is the probabilistic sum `px + py - px·py`.
pub fn comultiply(x: &Opinion, y: &Opinion) -> Result<Opinion, OpinionError> {
    let (bx, dx, ux, ax) = (x.b(), x.d(), x.u(), x.a());
    let (by, dy, uy, ay) = (y.b(), y.d(), y.u(), y.a());
    let a = ax + ay - ax * ay;
    if a <= 0.0 {
        return Err(OpinionError::BaseRateDegenerate { a_x: ax, a_y: ay });
    }
    let b = bx + by - bx * by;
    let d = dx * dy + (ax * (1.0 - ay) * dx * uy + (1.0 - ax) * ay * ux * dy) / a;
    let u = ux * uy + (ay * dx * uy + ax * ux * dy) / a;
    Ok(Opinion::settle(b, d, u, a))
}
