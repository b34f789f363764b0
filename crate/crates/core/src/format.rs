//! Display rounding and fixed-width number rendering.

use crate::opinion::Opinion;

/// Scaled values this close to a half are treated as exact ties.
const TIE_TOLERANCE: f64 = 1e-9;

/// Rounds half to even at `precision` decimals and renders the result.
///
/// Ties are detected on the decimal value the caller most likely means, so
/// `0.855` displays as `0.86` even though its binary form is slightly below.
pub fn display(x: f64, precision: u32) -> String {
    let p = precision.min(12) as i32;
    let scale = 10f64.powi(p);
    let y = x * scale;
    let floor = y.floor();
    let frac = y - floor;
    let r = if (frac - 0.5).abs() < TIE_TOLERANCE {
        if floor.rem_euclid(2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        y.round()
    };
    let v = r / scale;
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{:.*}", p as usize, v)
}

/// `(b, d, u)` at display precision.
pub fn triple(o: &Opinion, precision: u32) -> String {
    format!("({}, {}, {})", display(o.b(), precision), display(o.d(), precision), display(o.u(), precision))
}

/// Plain decimal with at most 12 significant digits, for CSV and JSON.
pub fn machine(x: f64) -> String {
    let r = crate::document::round_sig(x);
    if r == 0.0 {
        return "0".to_string();
    }
    let s = format!("{r}");
    s
}
