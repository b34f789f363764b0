//! Belief fusion: cumulative, averaging and confidence-weighted.

use serde::{Deserialize, Serialize};

use super::Opinion;

pub const DEFAULT_DOGMATIC_GAMMA: f64 = 0.5;

/// Which fusion rule to apply. `gamma` weights the first operand when both
/// operands are dogmatic and the rule falls back to a weighted average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FusionMode {
    Cumulative { gamma: f64 },
    Averaging,
    Weighted { gamma: f64 },
}

impl FusionMode {
    pub fn cumulative() -> Self {
        FusionMode::Cumulative { gamma: DEFAULT_DOGMATIC_GAMMA }
    }

    pub fn weighted() -> Self {
        FusionMode::Weighted { gamma: DEFAULT_DOGMATIC_GAMMA }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionMode::Cumulative { .. } => "fuse-cumulative",
            FusionMode::Averaging => "fuse-averaging",
            FusionMode::Weighted { .. } => "fuse-weighted",
        }
    }
}

fn gamma_average(x: &Opinion, y: &Opinion, gamma: f64) -> Opinion {
    let g = gamma.clamp(0.0, 1.0);
    let mix = |p: f64, q: f64| g * p + (1.0 - g) * q;
    Opinion::settle(mix(x.b(), y.b()), mix(x.d(), y.d()), 0.0, mix(x.a(), y.a()))
}

/// Fuses two opinions about the same proposition.
pub fn fuse(x: &Opinion, y: &Opinion, mode: FusionMode) -> Opinion {
    match mode {
        FusionMode::Cumulative { gamma } => cumulative(x, y, gamma),
        FusionMode::Averaging => averaging(x, y),
        FusionMode::Weighted { gamma } => weighted(x, y, gamma),
    }
}

/// A vacuous operand contributes nothing; the formulas reduce to the other
/// operand, base rate included. Returned directly so the result is exact.
fn vacuous_shortcut(x: &Opinion, y: &Opinion) -> Option<Opinion> {
    match (x.is_vacuous(), y.is_vacuous()) {
        (false, true) => Some(*x),
        (true, false) => Some(*y),
        _ => None,
    }
}

fn cumulative(x: &Opinion, y: &Opinion, gamma: f64) -> Opinion {
    let (ux, uy) = (x.u(), y.u());
    if ux == 0.0 && uy == 0.0 {
        return gamma_average(x, y, gamma);
    }
    if let Some(o) = vacuous_shortcut(x, y) {
        return o;
    }
    let denom = ux + uy - ux * uy;
    let b = (x.b() * uy + y.b() * ux) / denom;
    let u = ux * uy / denom;
    let a_denom = ux + uy - 2.0 * ux * uy;
    let a = if a_denom == 0.0 {
        (x.a() + y.a()) / 2.0
    } else {
        (x.a() * uy + y.a() * ux - (x.a() + y.a()) * ux * uy) / a_denom
    };
    Opinion::settle(b, 1.0 - b - u, u, a)
}

fn averaging(x: &Opinion, y: &Opinion) -> Opinion {
    let (ux, uy) = (x.u(), y.u());
    if ux == 0.0 && uy == 0.0 {
        return gamma_average(x, y, 0.5);
    }
    let denom = ux + uy;
    let b = (x.b() * uy + y.b() * ux) / denom;
    let u = 2.0 * ux * uy / denom;
    Opinion::settle(b, 1.0 - b - u, u, (x.a() + y.a()) / 2.0)
}

fn weighted(x: &Opinion, y: &Opinion, gamma: f64) -> Opinion {
    let (ux, uy) = (x.u(), y.u());
    if ux == 0.0 && uy == 0.0 {
        return gamma_average(x, y, gamma);
    }
    if ux == 1.0 && uy == 1.0 {
        return Opinion::vacuous((x.a() + y.a()) / 2.0);
    }
    if let Some(o) = vacuous_shortcut(x, y) {
        return o;
    }
    let denom = ux + uy - 2.0 * ux * uy;
    let b = (x.b() * (1.0 - ux) * uy + y.b() * (1.0 - uy) * ux) / denom;
    let u = (2.0 - ux - uy) * ux * uy / denom;
    let a = (x.a() * (1.0 - ux) + y.a() * (1.0 - uy)) / (2.0 - ux - uy);
    Opinion::settle(b, 1.0 - b - u, u, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn op(b: f64, d: f64, u: f64, a: f64) -> Opinion {
        Opinion::new(b, d, u, a).unwrap()
    }

    #[test]
    fn cumulative_matches_evidence_sum() {
        // (r=8, s=0) + (r=0, s=8) = (8, 8) with W = 2: b = d = 8/18, u = 2/18.
        let r = fuse(&op(0.8, 0.0, 0.2, 0.5), &op(0.0, 0.8, 0.2, 0.5), FusionMode::cumulative());
        assert_abs_diff_eq!(r.b(), 8.0 / 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.d(), 8.0 / 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.u(), 2.0 / 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.a(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn vacuous_is_neutral_for_cumulative_and_weighted() {
        let x = op(0.62, 0.13, 0.25, 0.3);
        for mode in [FusionMode::cumulative(), FusionMode::weighted()] {
            let r = fuse(&x, &Opinion::vacuous(0.8), mode);
            assert_eq!((r.b(), r.d(), r.u()), (x.b(), x.d(), x.u()));
            assert_abs_diff_eq!(r.a(), 0.3, epsilon = 1e-12);
            let r = fuse(&Opinion::vacuous(0.8), &x, mode);
            assert_eq!((r.b(), r.d(), r.u()), (x.b(), x.d(), x.u()));
        }
    }

    #[test]
    fn weighted_with_vacuous_hand_value() {
        let r = fuse(&op(0.8, 0.0, 0.2, 0.5), &Opinion::vacuous(0.5), FusionMode::weighted());
        assert_eq!((r.b(), r.d(), r.u(), r.a()), (0.8, 0.0, 0.2, 0.5));
    }

    #[test]
    fn averaging_is_idempotent() {
        let x = op(0.8, 0.0, 0.2, 0.5);
        let r = fuse(&x, &x, FusionMode::Averaging);
        assert_abs_diff_eq!(r.b(), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(r.u(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn dogmatic_pairs_use_gamma() {
        let t = Opinion::truth(0.2);
        let f = Opinion::falsehood(0.6);
        let r = fuse(&t, &f, FusionMode::Cumulative { gamma: 0.75 });
        assert_abs_diff_eq!(r.b(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.d(), 0.25, epsilon = 1e-12);
        assert_eq!(r.u(), 0.0);
        assert_abs_diff_eq!(r.a(), 0.3, epsilon = 1e-12);

        let r = fuse(&t, &f, FusionMode::Weighted { gamma: 0.25 });
        assert_abs_diff_eq!(r.b(), 0.25, epsilon = 1e-12);

        let r = fuse(&t, &f, FusionMode::Averaging);
        assert_abs_diff_eq!(r.b(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.a(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn one_dogmatic_operand_dominates() {
        let t = Opinion::truth(0.5);
        let x = op(0.1, 0.6, 0.3, 0.5);
        for mode in [FusionMode::cumulative(), FusionMode::Averaging, FusionMode::weighted()] {
            let r = fuse(&t, &x, mode);
            assert_abs_diff_eq!(r.b(), 1.0, epsilon = 1e-12);
            assert_eq!(r.u(), 0.0);
        }
    }

    #[test]
    fn both_vacuous() {
        let r = fuse(&Opinion::vacuous(0.2), &Opinion::vacuous(0.6), FusionMode::cumulative());
        assert_eq!((r.b(), r.d(), r.u()), (0.0, 0.0, 1.0));
        assert_abs_diff_eq!(r.a(), 0.4, epsilon = 1e-12);
        let r = fuse(&Opinion::vacuous(0.2), &Opinion::vacuous(0.6), FusionMode::weighted());
        assert_eq!((r.b(), r.d(), r.u()), (0.0, 0.0, 1.0));
        assert_abs_diff_eq!(r.a(), 0.4, epsilon = 1e-12);
    }
}
