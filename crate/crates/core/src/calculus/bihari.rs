use serde::Serialize;

use super::CalculusError;
use crate::quadrature::{adaptive_simpson, composite_gauss};

/// Value of the Bihari envelope at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BihariValue {
    Finite(f64),
    /// `G(c) + ∫v` left the range of `G`; the envelope is infinite.
    OutOfDomain,
}

impl BihariValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            BihariValue::Finite(v) => Some(v),
            BihariValue::OutOfDomain => None,
        }
    }
}

const G_TOL: f64 = 1e-14;
const G_DEPTH: u32 = 60;
const INVERSE_TOL: f64 = 1e-12;
const BRACKET_LIMIT: f64 = 1e300;

/// `G(r) = ∫₁^r ds / ψ(s)`, integrated over dyadic segments of `[1, r]`.
fn g_of(psi: &dyn Fn(f64) -> f64, r: f64) -> Result<f64, CalculusError> {
    let inv = |s: f64| {
        let p = psi(s);
        if p > 0.0 {
            1.0 / p
        } else {
            f64::NAN
        }
    };
    let seg = |a: f64, b: f64| {
        adaptive_simpson(&inv, a, b, G_TOL, G_DEPTH)
            .map_err(|s| CalculusError::InvalidInput(format!("psi is not positive and finite at s = {s}")))
    };
    let mut total = 0.0;
    if r >= 1.0 {
        let mut a = 1.0;
        while a < r {
            let b = (2.0 * a).min(r);
            total += seg(a, b)?;
            a = b;
        }
    } else {
        let mut b = 1.0;
        while b > r {
            let a = (0.5 * b).max(r);
            total -= seg(a, b)?;
            b = a;
        }
    }
    Ok(total)
}

/// `t ↦ G⁻¹(G(c₀) + ∫₀ᵗ v(s) ds)` on `t_grid`.
///
/// `c₀ = 0` is replaced by `1e−12`. `G⁻¹` is found by bisection to
/// absolute `1e−12` on a geometrically grown bracket.
pub fn bihari_bound(
    c0: f64,
    v: &dyn Fn(f64) -> f64,
    psi: &dyn Fn(f64) -> f64,
    t_grid: &[f64],
) -> Result<Vec<BihariValue>, CalculusError> {
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(CalculusError::InvalidInput(format!("c0 must be finite and ≥ 0, got {c0}")));
    }
    let c = if c0 == 0.0 { 1e-12 } else { c0 };
    let gc = g_of(psi, c)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CalculusError::InvalidInput(format!("time grid contains {t}")));
        }
        let vint = if t == 0.0 { 0.0 } else { composite_gauss(v, 0.0, t, 64, 8) };
        if !(vint >= 0.0) {
            return Err(CalculusError::InvalidInput(format!("∫v is negative or not finite at t = {t}")));
        }
        out.push(invert(psi, gc + vint, c)?);
    }
    Ok(out)
}

/// Solves `G(r) = target` for `r ≥ floor`, knowing `G(floor) ≤ target`.
fn invert(psi: &dyn Fn(f64) -> f64, target: f64, floor: f64) -> Result<BihariValue, CalculusError> {
    let mut lo = floor;
    let mut hi = (2.0 * floor).max(1.0);
    while g_of(psi, hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Ok(BihariValue::OutOfDomain);
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= INVERSE_TOL || mid <= lo || mid >= hi {
            return Ok(BihariValue::Finite(mid));
        }
        if g_of(psi, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
