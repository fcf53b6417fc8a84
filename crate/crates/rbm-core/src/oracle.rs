//! Brute-force evaluation of the chain field integrals for n ∈ {1, 2}: the
//! ground truth the transfer sweep must reproduce exactly (same grid, same
//! blur taps, same scalar functions — so agreement is limited only by
//! floating-point noise, not quadrature error).
//!
//! The Grassmann sector of the integrand is a determinant: for the n-site
//! chain it is det(W²·L_N + diag L(a_j, b_j)) with L_N the Neumann path
//! Laplacian. n = 1 needs no coupling; n = 2 is evaluated as a nested
//! contraction through the separable Gaussian coupling
//! e^{-W²(Δa² + Δb²)/2} = (2π/W²)·B_a·B_b, never as a raw 4-d loop.
//!
//! The observable in value_g is the uncentered d(b) = b + i√(4-E²)/2; the
//! transfer module's centered sum G° relates to it exactly by
//! value_g = G° + g_sc·Z.

use crate::error::{Error, Result};
use crate::field::{blur_cols, blur_rows, for_rows, sum_rows, Plane};
use crate::grid::Grid2D;
use crate::C64;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Grassmann determinant of the n-site chain quadratic form:
/// det(W²·L_N + diag(L(a_j, b_j))), via the tridiagonal three-term
/// recurrence.
pub fn grassmann_det(a: &[f64], b: &[f64], e: f64, w: f64) -> C64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    assert!(n >= 1, "chain needs at least one site");
    let w2 = w * w;
    let s_half = (4.0 - e * e).sqrt() / 2.0;
    let l = |j: usize| -> C64 {
        let p = C64::new(-e / 2.0, a[j]);
        let q = C64::new(b[j] - e, s_half);
        1.0 - (p * q).inv()
    };
    let deg = |j: usize| -> f64 {
        if n == 1 {
            0.0
        } else if j == 0 || j == n - 1 {
            1.0
        } else {
            2.0
        }
    };
    let mut d_prev = C64::new(1.0, 0.0);
    let mut d_cur = w2 * deg(0) + l(0);
    for j in 1..n {
        let m = w2 * deg(j) + l(j);
        let next = m * d_cur - w2 * w2 * d_prev;
        d_prev = d_cur;
        d_cur = next;
    }
    d_cur
}

/// Values of the n-chain field integrals on one grid.
#[derive(Debug, Clone, Copy)]
pub struct FieldIntegralResult {
    /// Observable integral: the Stieltjes-transform numerator (uncentered).
    pub value_g: C64,
    /// Partition integral; identically 1 in the continuum.
    pub value_z: C64,
    pub n: usize,
    pub grid_fingerprint: u64,
}

/// Direct quadrature of the n ∈ {1, 2} field integrals on `g`.
pub fn field_integral(n: usize, g: &Grid2D) -> Result<FieldIntegralResult> {
    let (value_z, value_g) = match n {
        1 => integrate_n1(g),
        2 => integrate_n2(g),
        _ => {
            return Err(Error::validation(format!(
                "field_integral: n = {n} unsupported (oracle covers n in {{1, 2}}; the \
                 transfer module is the large-n evaluator)"
            )))
        }
    };
    Ok(FieldIntegralResult { value_g, value_z, n, grid_fingerprint: g.fingerprint })
}

/// n = 1: (2π)⁻¹ ∬ e^{-f_a-f_b} L · {1, d(b)} da db.
fn integrate_n1(g: &Grid2D) -> (C64, C64) {
    let nb = g.nb();
    let (wa, wb) = (&g.axis_a.weights, &g.axis_b.weights);
    let z = sum_rows(g.na(), |ia| {
        let ef_a = g.f0[ia] * g.f0[ia];
        let mut acc = C64::default();
        for ib in 0..nb {
            let ef = ef_a * g.f1[ib] * g.f1[ib];
            acc += wb[ib] * ef * g.l_at(ia, ib);
        }
        wa[ia] * acc
    }) / TWO_PI;
    let gv = sum_rows(g.na(), |ia| {
        let ef_a = g.f0[ia] * g.f0[ia];
        let mut acc = C64::default();
        for ib in 0..nb {
            let ef = ef_a * g.f1[ib] * g.f1[ib];
            acc += wb[ib] * ef * g.l_at(ia, ib) * g.d_at(ib);
        }
        wa[ia] * acc
    }) / TWO_PI;
    (z, gv)
}

/// n = 2: contract site 2 through the separable coupling.
///
/// With ef = e^{-f_a-f_b} and det₂ = L₁(W² + L₂) + W²L₂, the partition
/// integral factors as
///   value_z = (2πW²)⁻¹ Σ₁ w·ef·[L₁·Y₀ + Y₁],
/// where Y₀ = blur²(ef·(W² + L)) and Y₁ = blur²(ef·W²L) are site-2
/// contractions pushed through the same banded blur the transfer uses.
/// The observable ½(d₁ + d₂) adds the mirrored terms with d inserted.
fn integrate_n2(g: &Grid2D) -> (C64, C64) {
    let w2 = g.w * g.w;
    let ef0: Vec<C64> = g.f0.iter().map(|&v| v * v).collect();
    let ef1: Vec<C64> = g.f1.iter().map(|&v| v * v).collect();
    let x0 = plane_from(g, |ia, ib| ef0[ia] * ef1[ib] * (w2 + g.l_at(ia, ib)));
    let x1 = plane_from(g, |ia, ib| ef0[ia] * ef1[ib] * w2 * g.l_at(ia, ib));
    let xd0 = plane_from(g, |ia, ib| ef0[ia] * ef1[ib] * (w2 + g.l_at(ia, ib)) * g.d_at(ib));
    let xd1 = plane_from(g, |ia, ib| ef0[ia] * ef1[ib] * w2 * g.l_at(ia, ib) * g.d_at(ib));
    let y0 = blur2(g, &x0);
    let y1 = blur2(g, &x1);
    let yd0 = blur2(g, &xd0);
    let yd1 = blur2(g, &xd1);
    let (wa, wb) = (&g.axis_a.weights, &g.axis_b.weights);
    let nb = g.nb();
    let z = sum_rows(g.na(), |ia| {
        let mut acc = C64::default();
        for ib in 0..nb {
            let ef = ef0[ia] * ef1[ib];
            acc += wb[ib] * ef * (g.l_at(ia, ib) * y0.at(ia, ib) + y1.at(ia, ib));
        }
        wa[ia] * acc
    }) / (TWO_PI * w2);
    let gv = sum_rows(g.na(), |ia| {
        let mut acc = C64::default();
        for ib in 0..nb {
            let ef = ef0[ia] * ef1[ib];
            let l = g.l_at(ia, ib);
            let core = l * y0.at(ia, ib) + y1.at(ia, ib);
            let mirrored = l * yd0.at(ia, ib) + yd1.at(ia, ib);
            acc += wb[ib] * ef * (g.d_at(ib) * core + mirrored);
        }
        wa[ia] * acc
    }) / (2.0 * TWO_PI * w2);
    (z, gv)
}

fn plane_from(g: &Grid2D, f: impl Fn(usize, usize) -> C64 + Sync + Send) -> Plane {
    let mut p = Plane::zeros(g.na(), g.nb());
    for_rows(&mut p, |ia, re, im| {
        for ib in 0..re.len() {
            let v = f(ia, ib);
            re[ib] = v.re;
            im[ib] = v.im;
        }
    });
    p
}

/// blur_b ∘ blur_a through the exact code path the transfer operator uses.
fn blur2(g: &Grid2D, x: &Plane) -> Plane {
    let mut t = Plane::zeros(g.na(), g.nb());
    let mut y = Plane::zeros(g.na(), g.nb());
    blur_cols(&g.blur_a, x, &mut t);
    blur_rows(&g.blur_b, &t, &mut y, None);
    y
}
