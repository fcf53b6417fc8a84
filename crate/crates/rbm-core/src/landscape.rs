//! Closed-form scalar layer: the two complex potentials f_a, f_b whose
//! exponentials weight the transfer operator, the coupling function L, the
//! Wigner semicircle quantities, and every saddle-point constant derived from
//! them.
//!
//! Conventions fixed here and relied on everywhere else:
//! * principal branch of the complex logarithm throughout; for real arguments
//!   inside the energy window the log arguments never cross the negative real
//!   axis (asserted in debug builds);
//! * `l_plus` is *defined* as `eval_l(a_plus, b_s, E)` — the direct evaluation
//!   satisfies the operative identity L⁺ = 2c₊, which the verification suite
//!   checks to 1e-12;
//! * α₊ is the principal square root of c₊/2 + c₊²/(4W²), which keeps
//!   λ₀₊² · λ₁ˢ = 1 exact in floating point.

use crate::params::ModelParams;
use crate::C64;

/// Semicircle Stieltjes transform on the upper cut: g_sc(E) = (E + i√(4-E²))/2
/// for |E| ≤ 2 (unimodular there).
pub fn g_sc(e: f64) -> C64 {
    debug_assert!(e.abs() <= 2.0);
    C64::new(e / 2.0, (4.0 - e * e).sqrt() / 2.0)
}

/// Semicircle density ρ_sc(E) = √(4-E²)/(2π) on [-2, 2], zero outside.
pub fn rho_sc(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Exact semicircle mass ∫_lo^hi ρ_sc, from the closed-form antiderivative
/// (x√(4-x²)/2 + 2·asin(x/2)) / 2π.
pub fn rho_sc_mass(lo: f64, hi: f64) -> f64 {
    let prim = |x: f64| {
        let x = x.clamp(-2.0, 2.0);
        (x * (4.0 - x * x).sqrt() / 2.0 + 2.0 * (x / 2.0).asin())
            / (2.0 * std::f64::consts::PI)
    };
    prim(hi) - prim(lo)
}

/// Stieltjes transform of the semicircle law at E - iε, on the branch that
/// decays at infinity. For ε > 0 the imaginary part is strictly positive; for
/// ε = 0 and |E| ≤ 2 it reduces to [`g_sc`], outside the spectrum it is real.
pub fn semicircle(e: f64, eps: f64) -> C64 {
    if eps == 0.0 {
        if e.abs() <= 2.0 {
            return g_sc(e);
        }
        let s = (e * e - 4.0).sqrt().copysign(e);
        return C64::new((e - s) / 2.0, 0.0);
    }
    let z = C64::new(e, -eps);
    let mut s = (z * z - 4.0).sqrt();
    // Align the root with z so that g = (z - s)/2 -> 0 as |z| -> infinity.
    if (z * s.conj()).re < 0.0 {
        s = -s;
    }
    (z - s) / 2.0
}

/// The additive constant C* that makes f_a vanish at its right saddle point
/// (and enters f_b with the opposite sign).
fn c_star(e: f64) -> C64 {
    let g = g_sc(e);
    let arg = C64::new(-e / 2.0, (4.0 - e * e).sqrt() / 2.0);
    g * g / 2.0 + arg.ln()
}

/// Potential on the a-axis: f_a(x) = (x - iE/2)²/2 - log(ix - E/2) + C*.
pub fn eval_fa(a: f64, e: f64) -> C64 {
    let x = C64::new(a, -e / 2.0);
    let log_arg = C64::new(-e / 2.0, a);
    debug_assert!(
        log_arg.re < 0.0 || log_arg.im != 0.0,
        "log argument on the branch cut"
    );
    x * x / 2.0 - log_arg.ln() + c_star(e)
}

/// Potential on the b-axis: f_b(x) = (x + i√(4-E²)/2)²/2
///                               + log(x - E + i√(4-E²)/2) - C*.
pub fn eval_fb(b: f64, e: f64) -> C64 {
    let s = (4.0 - e * e).sqrt();
    let x = C64::new(b, s / 2.0);
    let log_arg = C64::new(b - e, s / 2.0);
    x * x / 2.0 + log_arg.ln() - c_star(e)
}

/// Real part of f_a, available without complex arithmetic (used for grid
/// sizing): Re f_a(x) = (x² - E²/4)/2 - ln(x² + E²/4)/2 + (E² - 2)/4.
pub fn re_fa(a: f64, e: f64) -> f64 {
    (a * a - e * e / 4.0) / 2.0 - (a * a + e * e / 4.0).ln() / 2.0 + (e * e - 2.0) / 4.0
}

/// Real part of f_b:
/// Re f_b(x) = (x² - (4-E²)/4)/2 + ln((x-E)² + (4-E²)/4)/2 - (E² - 2)/4.
pub fn re_fb(b: f64, e: f64) -> f64 {
    let s2 = (4.0 - e * e) / 4.0;
    (b * b - s2) / 2.0 + ((b - e) * (b - e) + s2).ln() / 2.0 - (e * e - 2.0) / 4.0
}

/// Coupling function L(a, b) = 1 - ((ia - E/2)(b - E + i√(4-E²)/2))⁻¹.
pub fn eval_l(a: f64, b: f64, e: f64) -> C64 {
    let p = C64::new(-e / 2.0, a);
    let q = C64::new(b - e, (4.0 - e * e).sqrt() / 2.0);
    1.0 - (p * q).inv()
}

/// Uniform bound L₀(E) = 1 + (|E|/2 · √(4-E²)/2)⁻¹ on |L| over the real plane.
pub fn l0_bound(e: f64) -> f64 {
    1.0 + 1.0 / ((e.abs() / 2.0) * ((4.0 - e * e).sqrt() / 2.0))
}

/// Every closed-form constant attached to the saddle points of f_a and f_b.
#[derive(Debug, Clone)]
pub struct SaddleData {
    /// Right/left minimizers of Re f_a: a_± = ±√(4-E²)/2.
    pub a_plus: f64,
    pub a_minus: f64,
    /// Minimizer of Re f_b: b_s = E/2.
    pub b_s: f64,
    /// Half second derivatives c_± = f_a''(a_±)/2; Re c_± > 0 in the window.
    pub c_plus: C64,
    pub c_minus: C64,
    /// L evaluated at the saddles: L⁺ = L(a₊, b_s) = 2c₊, L⁻ = L(a₋, b_s) = 0.
    pub l_plus: C64,
    pub l_minus: C64,
    /// α₊ = √(c₊/2 + c₊²/(4W²)) (principal root, positive real part).
    pub alpha_plus: C64,
    /// λ₀₊ = (1 + 2α₊/W + c₊/W²)^(-1/2) — leading eigenvalue of the local
    /// Gaussian model operator at the right saddle.
    pub lambda_0_plus: C64,
    /// Eigenvalues of the 2×2 mixing matrix S⁺ = S evaluated at L = L⁺;
    /// λ₁ˢ λ₂ˢ = 1 (det S⁺ = 1) and λ₀₊² λ₁ˢ = 1.
    pub lambda1_s: C64,
    pub lambda2_s: C64,
    /// Unit eigenvectors of S⁺: v[0] for λ₁ˢ, v[1] for λ₂ˢ, each with its
    /// first nonzero entry rotated to the positive real axis.
    pub v: [[C64; 2]; 2],
    pub g_sc: C64,
    pub rho_sc: f64,
}

/// Evaluates all saddle-point constants for an energy inside the window at
/// band width `w`.
pub fn saddle_data(e: f64, w: f64) -> SaddleData {
    let s = (4.0 - e * e).sqrt();
    let a_plus = s / 2.0;
    let b_s = e / 2.0;
    let g = g_sc(e);
    let c_plus = (1.0 - g * g) / 2.0;
    let c_minus = c_plus.conj();
    let l_plus = eval_l(a_plus, b_s, e);
    let l_minus = eval_l(-a_plus, b_s, e);
    let alpha_plus = (c_plus / 2.0 + c_plus * c_plus / (4.0 * w * w)).sqrt();
    let lambda1_s = 1.0 + 2.0 * alpha_plus / w + c_plus / (w * w);
    let lambda2_s = lambda1_s.inv();
    let lambda_0_plus = lambda1_s.sqrt().inv();
    let v = [
        s_eigenvector(l_plus, w, lambda1_s),
        s_eigenvector(l_plus, w, lambda2_s),
    ];
    SaddleData {
        a_plus,
        a_minus: -a_plus,
        b_s,
        c_plus,
        c_minus,
        l_plus,
        l_minus,
        alpha_plus,
        lambda_0_plus,
        lambda1_s,
        lambda2_s,
        v,
        g_sc: g,
        rho_sc: rho_sc(e),
    }
}

/// Unit eigenvector of S⁺ = [[1, -L/W], [-1/W, 1 + L/W²]] for eigenvalue λ,
/// first nonzero entry rotated to the positive real axis.
fn s_eigenvector(l: C64, w: f64, lambda: C64) -> [C64; 2] {
    // Row 1 of (S - λ)v = 0: (1 - λ) v₁ = (L/W) v₂.
    let (mut v1, mut v2) = (l / w, 1.0 - lambda);
    let norm = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    let first = if v1.norm() > 1e-300 * norm { v1 } else { v2 };
    let phase = first / first.norm();
    v1 = v1 / phase / norm;
    v2 = v2 / phase / norm;
    [v1, v2]
}

/// Convenience bundle for the validated parameter set.
pub fn saddle_data_for(p: &ModelParams) -> SaddleData {
    saddle_data(p.e, p.w)
}
