//! Choice of the scaling parameter for close/far rounding.
//!
//! The guarantee of the scaled algorithm is the largest of three curves in
//! `γ`: the facility factor `γ`, the close-connection factor `1 + 2e^{-γ}`
//! and the far-connection factor `(e^{-1} + e^{-γ}) / (1 - 1/γ)`. The first
//! grows and the third shrinks, so the minimum of the maximum sits where
//! they cross.

use num_traits::{One, Zero};

use crate::rational::Rational;

/// Default scaling parameter, `63/40 = 1.575`.
pub fn default_gamma() -> Rational {
    Rational::new(63.into(), 40.into())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaRow {
    pub gamma: f64,
    pub facility: f64,
    pub close: f64,
    pub far: f64,
    pub max: f64,
}

pub fn gamma_row(gamma: f64) -> GammaRow {
    let e_g = (-gamma).exp();
    let facility = gamma;
    let close = 1.0 + 2.0 * e_g;
    let far = ((-1.0f64).exp() + e_g) / (1.0 - 1.0 / gamma);
    GammaRow {
        gamma,
        facility,
        close,
        far,
        max: facility.max(close).max(far),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaScan {
    pub rows: Vec<GammaRow>,
    pub argmin: f64,
    pub min: f64,
}

/// Evaluates the curves on `lo + k·step` for every `k` with the point
/// inside `[lo, hi]`; the first minimum wins ties.
pub fn gamma_scan(lo: f64, hi: f64, step: f64) -> GammaScan {
    assert!(step > 0.0 && lo <= hi, "bad scan range");
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let rows: Vec<GammaRow> = (0..=count)
        .map(|k| gamma_row(lo + k as f64 * step))
        .collect();
    let best = rows
        .iter()
        .fold(None::<&GammaRow>, |acc, r| match acc {
            Some(b) if b.max <= r.max => Some(b),
            _ => Some(r),
        })
        .expect("scan has at least one point");
    GammaScan {
        argmin: best.gamma,
        min: best.max,
        rows,
    }
}

/// Both sides of the chained-product inequality for ascending `d` and
/// weights `g` in `(0, 1]`:
///
/// `Σ_t d_t g_t Π_{z<t}(1 - g_z) ≤ (Σ_s d_s g_s)(Σ_t g_t Π_{z<t}(1 - g_z)) / Σ_s g_s`.
pub fn chebyshev_sides(d: &[Rational], g: &[Rational]) -> (Rational, Rational) {
    assert_eq!(d.len(), g.len());
    let mut lhs = Rational::zero();
    let mut chained = Rational::zero();
    let mut survive = Rational::one();
    for (dt, gt) in d.iter().zip(g) {
        let term = gt * &survive;
        lhs += dt * &term;
        chained += term;
        survive *= Rational::one() - gt;
    }
    let weighted: Rational = d.iter().zip(g).map(|(a, b)| a * b).sum();
    let mass: Rational = g.iter().sum();
    if mass.is_zero() {
        return (lhs, Rational::zero());
    }
    (lhs, weighted * chained / mass)
}
