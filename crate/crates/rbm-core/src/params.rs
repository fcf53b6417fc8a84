use crate::error::{Error, Result};

/// Lower edge of the supported energy window. Below this the function
/// L(a, b) = 1 - ((ia - E/2)(b - E + i√(4-E²)/2))⁻¹ loses its uniform bound
/// (|ia - E/2| can approach 0 for real a), so the whole transfer-operator
/// construction is restricted to |E| ≥ 0.2.
pub const E_ABS_MIN: f64 = 0.2;

/// Upper edge of the supported energy window, 4√2/3 ≈ 1.8856.
pub const E_ABS_MAX: f64 = 1.885_618_083_164_126_9;

/// Physical parameters of a run: energy E, band width W, matrix size n and
/// the spectral regularization ε (only Monte-Carlo paths need ε > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub e: f64,
    pub w: f64,
    pub n: usize,
    pub eps: f64,
}

impl ModelParams {
    /// Validates the theorem window 0.2 ≤ |E| ≤ 4√2/3, W ≥ 2, n ≥ 1, ε ≥ 0.
    pub fn new(e: f64, w: f64, n: usize, eps: f64) -> Result<Self> {
        if !e.is_finite() || e.abs() < E_ABS_MIN || e.abs() > E_ABS_MAX {
            return Err(Error::validation(format!(
                "E = {e} outside the supported window {E_ABS_MIN} <= |E| <= {E_ABS_MAX:.4}"
            )));
        }
        if !w.is_finite() || w < 2.0 {
            return Err(Error::validation(format!("W = {w} must be finite and >= 2")));
        }
        if n == 0 {
            return Err(Error::validation("n must be >= 1"));
        }
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::validation(format!("eps = {eps} must be finite and >= 0")));
        }
        Ok(ModelParams { e, w, n, eps })
    }

    /// Default matrix size ⌈4 W ln W⌉ — comfortably inside the n ≳ W log W
    /// regime where the transfer-operator density of states has saturated.
    pub fn default_n(w: f64) -> usize {
        (4.0 * w * w.ln()).ceil() as usize
    }
}
