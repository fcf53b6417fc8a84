//! Quadrature grids and the banded Gaussian smoothing kernel.
//!
//! Axes are composite 8-point Gauss–Legendre rules sized so that the largest
//! node gap stays below 1/(νW): ν nodes per kernel width 1/W. Axis ranges
//! cover the sublevel set {Re f ≤ Φ} of the relevant potential plus a margin
//! of one kernel radius and half a unit, which bounds the neglected tail mass
//! by ~e^{-Φ}.
//!
//! The kernel B(x, y) = W/√(2π) · exp(-W²(x-y)²/2) integrates to 1 over the
//! line; truncating it at |x - y| ≤ r/W discards erfc(r/√2) of its mass, below
//! 3e-11 at the default r = 7, so the blur matrix is banded with a
//! W-independent band width of ~rν nodes.
//!
//! The module also carries a separate high-precision test oracle: the Gaussian
//! model operator A★ = e^{-c★x²/2} B e^{-c★x²/2}, whose matrix in a Hermite
//! function basis is upper triangular with an exactly geometric diagonal.

use crate::error::{Error, Result};
use crate::landscape::{re_fa, re_fb};
use crate::C64;

/// Default truncation radius of the Gaussian kernel in units of 1/W; the
/// discarded tail mass erfc(7/√2) is below 3e-11.
const KERNEL_RADIUS_OVER_W: f64 = 7.0;

/// 8-point Gauss–Legendre abscissae (positive half) on [-1, 1].
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
/// Matching weights; the eight weights sum to 2.
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
/// Largest node gap of the 8-point rule as a fraction of the panel width
/// (the central gap 2·0.18343…, relative to the reference length 2).
const GL8_MAX_GAP_FRACTION: f64 = 0.183_434_642_495_649_8;

/// Grid construction options.
#[derive(Debug, Clone, Copy)]
pub struct GridOpts {
    /// Refinement: at least ν quadrature nodes per kernel width 1/W (ν ≥ 4).
    pub nu: f64,
    /// Range cutoff: axes cover {Re f ≤ Φ} plus the margin (Φ ≥ 30).
    pub phi: f64,
    /// Maximum admissible number of 2D product nodes.
    pub node_budget: usize,
    /// Kernel truncation radius in units of 1/W (r ≥ 6; tail mass
    /// erfc(r/√2) ≈ 2e-9 at the floor).
    pub kernel_radius: f64,
}

impl Default for GridOpts {
    fn default() -> Self {
        GridOpts {
            nu: 6.0,
            phi: 36.0,
            node_budget: 25_000_000,
            kernel_radius: KERNEL_RADIUS_OVER_W,
        }
    }
}

impl GridOpts {
    /// Lower-accuracy profile: coarsest spacing, shortest range, and shortest
    /// kernel truncation allowed.
    pub fn quick() -> Self {
        GridOpts { nu: 4.0, phi: 30.0, kernel_radius: 6.0, ..Self::default() }
    }
}

/// A 1D quadrature axis: strictly increasing nodes with positive weights.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub h_max: f64,
}

impl Axis {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Composite 8-point Gauss–Legendre axis over [lo, hi] whose largest node gap
/// (including gaps across panel boundaries) does not exceed `h_max`.
pub fn build_axis(lo: f64, hi: f64, h_max: f64) -> Axis {
    assert!(hi > lo && h_max > 0.0);
    let p_max = h_max / GL8_MAX_GAP_FRACTION;
    let panels = ((hi - lo) / p_max).ceil().max(1.0) as usize;
    let p = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(8 * panels);
    let mut weights = Vec::with_capacity(8 * panels);
    for k in 0..panels {
        let c = lo + (k as f64 + 0.5) * p;
        let half = p / 2.0;
        for i in (0..4).rev() {
            nodes.push(c - half * GL8_X[i]);
            weights.push(half * GL8_W[i]);
        }
        for i in 0..4 {
            nodes.push(c + half * GL8_X[i]);
            weights.push(half * GL8_W[i]);
        }
    }
    let h = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Axis { nodes, weights, h_max: h }
}

/// Endpoints of the interval {x : f(x) ≤ phi} for a potential that grows like
/// x²/2 at infinity, refined by bisection.
fn sublevel_interval(f: impl Fn(f64) -> f64, phi: f64) -> (f64, f64) {
    let scan_max = (2.0 * phi).sqrt() + 12.0;
    let steps = 20_000;
    let dx = 2.0 * scan_max / steps as f64;
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    for i in 0..=steps {
        let x = -scan_max + i as f64 * dx;
        if f(x) <= phi {
            if lo.is_nan() {
                lo = x;
            }
            hi = x;
        }
    }
    assert!(!lo.is_nan(), "empty sublevel set");
    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if f(mid) <= phi {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    (bisect(lo, lo - dx), bisect(hi, hi + dx))
}

/// Banded discretization of the Gaussian kernel on one axis. Row i holds the
/// quadrature-weighted kernel values against every node within the truncation
/// radius, so applying it is a banded matrix-vector product.
#[derive(Debug, Clone)]
pub struct Blur1d {
    /// First source index of each row's band.
    pub(crate) band_lo: Vec<u32>,
    /// Start of each row's taps in `taps` (length rows + 1).
    pub(crate) tap_offsets: Vec<u32>,
    /// Kernel value × source quadrature weight, row-major, band-packed.
    pub(crate) taps: Vec<f64>,
}

impl Blur1d {
    /// Builds the banded kernel at the default truncation radius.
    pub fn build(axis: &Axis, w: f64) -> Self {
        Self::build_with_radius(axis, w, KERNEL_RADIUS_OVER_W)
    }

    /// Builds the banded kernel truncated at |x - y| ≤ `radius_over_w`/W.
    pub fn build_with_radius(axis: &Axis, w: f64, radius_over_w: f64) -> Self {
        let n = axis.len();
        let radius = radius_over_w / w;
        let norm = w / (2.0 * std::f64::consts::PI).sqrt();
        let mut band_lo = Vec::with_capacity(n);
        let mut tap_offsets = Vec::with_capacity(n + 1);
        let mut taps = Vec::new();
        tap_offsets.push(0u32);
        let mut lo = 0usize;
        for i in 0..n {
            let xi = axis.nodes[i];
            while axis.nodes[lo] < xi - radius {
                lo += 1;
            }
            let mut hi = lo;
            while hi < n && axis.nodes[hi] <= xi + radius {
                hi += 1;
            }
            band_lo.push(lo as u32);
            for j in lo..hi {
                let d = xi - axis.nodes[j];
                taps.push(norm * (-w * w * d * d / 2.0).exp() * axis.weights[j]);
            }
            tap_offsets.push(taps.len() as u32);
        }
        Blur1d { band_lo, tap_offsets, taps }
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.band_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.band_lo.is_empty()
    }

    /// (band start, taps) of one row.
    #[inline]
    pub(crate) fn row(&self, i: usize) -> (usize, &[f64]) {
        let lo = self.band_lo[i] as usize;
        let s = self.tap_offsets[i] as usize;
        let e = self.tap_offsets[i + 1] as usize;
        (lo, &self.taps[s..e])
    }

    /// Dense application to a complex field on the same axis.
    pub fn apply(&self, field: &[C64]) -> Vec<C64> {
        assert_eq!(field.len(), self.len());
        (0..self.len())
            .map(|i| {
                let (lo, taps) = self.row(i);
                taps.iter()
                    .zip(&field[lo..lo + taps.len()])
                    .map(|(t, v)| t * v)
                    .sum()
            })
            .collect()
    }
}

/// Quadrature-weighted blur of a 1D complex field: the discrete form of
/// u ↦ ∫ B(x, y) u(y) dy on the axis.
pub fn blur(axis: &Axis, w: f64, field: &[C64]) -> Vec<C64> {
    Blur1d::build(axis, w).apply(field)
}

/// 2D product grid with every precomputed 1D field the transfer operator
/// needs. The 2D weight fields are kept in factored form — F(a, b) = F₀(a)F₁(b)
/// and L(a, b) = 1 - u(a)v(b) — so no O(N²) array is ever materialized.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub e: f64,
    pub w: f64,
    pub axis_a: Axis,
    pub axis_b: Axis,
    /// F₀(a) = e^{-f_a(a)/2} on axis a.
    pub f0: Vec<C64>,
    /// F₁(b) = e^{-f_b(b)/2} on axis b.
    pub f1: Vec<C64>,
    /// u(a) = (ia - E/2)⁻¹: a-factor of 1 - L.
    pub u_a: Vec<C64>,
    /// v(b) = (b - E + i√(4-E²)/2)⁻¹: b-factor of 1 - L.
    pub v_b: Vec<C64>,
    /// Centered multiplication field b - E/2 (the observable 𝓑° acts by it).
    pub d_center: Vec<f64>,
    pub(crate) blur_a: Blur1d,
    pub(crate) blur_b: Blur1d,
    /// Content hash of (E, W, ν, Φ, nodes); identifies the grid in outputs.
    pub fingerprint: u64,
}

impl Grid2D {
    /// L(a_i, b_j).
    #[inline]
    pub fn l_at(&self, i: usize, j: usize) -> C64 {
        1.0 - self.u_a[i] * self.v_b[j]
    }

    /// F(a_i, b_j) = F₀(a_i) F₁(b_j).
    #[inline]
    pub fn f_at(&self, i: usize, j: usize) -> C64 {
        self.f0[i] * self.f1[j]
    }

    /// Uncentered observable d(b_j) = b_j + i√(4-E²)/2 (the centered field
    /// `d_center` plus g_sc).
    #[inline]
    pub fn d_at(&self, j: usize) -> C64 {
        C64::new(self.axis_b.nodes[j], (4.0 - self.e * self.e).sqrt() / 2.0)
    }

    pub fn na(&self) -> usize {
        self.axis_a.len()
    }

    pub fn nb(&self) -> usize {
        self.axis_b.len()
    }

    pub fn fingerprint_hex(&self) -> String {
        format!("{:016x}", self.fingerprint)
    }
}

/// Builds the production grid for energy `e` and band width `w`.
pub fn build_grid(e: f64, w: f64, opts: &GridOpts) -> Result<Grid2D> {
    if !(opts.nu >= 4.0) {
        return Err(Error::validation(format!("nu = {} must be >= 4", opts.nu)));
    }
    if !(opts.phi >= 30.0) {
        return Err(Error::validation(format!("phi = {} must be >= 30", opts.phi)));
    }
    if !(opts.kernel_radius >= 6.0) {
        return Err(Error::validation(format!(
            "kernel_radius = {} must be >= 6",
            opts.kernel_radius
        )));
    }
    let h_max = (1.0 / (opts.nu * w)).min(0.05);
    // The margin past the sublevel set covers one kernel radius (so the blur
    // of anything supported inside still lands on the grid) plus half a unit
    // of decay room, and never less than 3/4 of a unit.
    let margin = (opts.kernel_radius / w + 0.5).max(0.75);
    let (alo, ahi) = sublevel_interval(|x| re_fa(x, e), opts.phi);
    let (blo, bhi) = sublevel_interval(|x| re_fb(x, e), opts.phi);
    let axis_a = build_axis(alo - margin, ahi + margin, h_max);
    let axis_b = build_axis(blo - margin, bhi + margin, h_max);
    let product = axis_a.len() * axis_b.len();
    if product > opts.node_budget {
        return Err(Error::validation(format!(
            "grid of {} x {} = {} product nodes exceeds the node budget {} \
             (axis a: [{:.2}, {:.2}], axis b: [{:.2}, {:.2}], h <= {:.5})",
            axis_a.len(),
            axis_b.len(),
            product,
            opts.node_budget,
            alo - margin,
            ahi + margin,
            blo - margin,
            bhi + margin,
            h_max,
        )));
    }
    let s_half = (4.0 - e * e).sqrt() / 2.0;
    let f0 = axis_a
        .nodes
        .iter()
        .map(|&a| (-crate::landscape::eval_fa(a, e) / 2.0).exp())
        .collect();
    let f1 = axis_b
        .nodes
        .iter()
        .map(|&b| (-crate::landscape::eval_fb(b, e) / 2.0).exp())
        .collect();
    let u_a = axis_a.nodes.iter().map(|&a| C64::new(-e / 2.0, a).inv()).collect();
    let v_b = axis_b.nodes.iter().map(|&b| C64::new(b - e, s_half).inv()).collect();
    let d_center = axis_b.nodes.iter().map(|&b| b - e / 2.0).collect();
    let blur_a = Blur1d::build_with_radius(&axis_a, w, opts.kernel_radius);
    let blur_b = Blur1d::build_with_radius(&axis_b, w, opts.kernel_radius);
    let fingerprint = grid_fingerprint(e, w, opts, &axis_a, &axis_b);
    Ok(Grid2D {
        e,
        w,
        axis_a,
        axis_b,
        f0,
        f1,
        u_a,
        v_b,
        d_center,
        blur_a,
        blur_b,
        fingerprint,
    })
}

fn grid_fingerprint(e: f64, w: f64, opts: &GridOpts, a: &Axis, b: &Axis) -> u64 {
    let mut h = Fnv1a::new();
    for v in [e, w, opts.nu, opts.phi, opts.kernel_radius] {
        h.write_u64(v.to_bits());
    }
    h.write_u64(a.len() as u64);
    h.write_u64(b.len() as u64);
    for &x in a.nodes.iter().chain(b.nodes.iter()) {
        h.write_u64(x.to_bits());
    }
    h.finish()
}

/// FNV-1a, enough for a content fingerprint embedded in run records.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Model operator test oracle
// ---------------------------------------------------------------------------

/// Matrix of the Gaussian model operator A★ = e^{-c★x²/2} B e^{-c★x²/2} in its
/// adapted Hermite-function basis; `entries[j][k] = (A★ψ_k, ψ_j)` under the
/// conjugated L² pairing (the basis is exactly orthonormal under it).
#[derive(Debug, Clone)]
pub struct ModelOpMatrix {
    /// Row-major (m+1)×(m+1): `entries[j * (m + 1) + k]`.
    pub entries: Vec<C64>,
    pub c_star: C64,
    pub w: f64,
    pub m: usize,
}

impl ModelOpMatrix {
    pub fn at(&self, j: usize, k: usize) -> C64 {
        self.entries[j * (self.m + 1) + k]
    }
}

/// Width parameter of the adapted Gaussian: α = √(c★/2 + c★²/(4W²)), the
/// principal root (positive real part for Re c★ > 0).
pub fn model_alpha(c_star: C64, w: f64) -> C64 {
    (c_star / 2.0 + c_star * c_star / (4.0 * w * w)).sqrt()
}

/// Closed-form leading eigenvalue of A★: λ₀ = (1 + 2α/W + c★/W²)^(-1/2).
pub fn model_lambda0(c_star: C64, w: f64) -> C64 {
    (1.0 + 2.0 * model_alpha(c_star, w) / w + c_star / (w * w)).sqrt().inv()
}

/// Quadrature axis adapted to the model basis: covers the classically allowed
/// region of mode `m` plus the Gaussian tail and the kernel radius, with
/// spacing fine enough for both the mode oscillation and the kernel.
pub fn model_axis(c_star: C64, w: f64, m: usize) -> Axis {
    let a1 = model_alpha(c_star, w).re;
    assert!(a1 > 0.0, "Re alpha must be positive");
    let turning = ((2 * m + 1) as f64 / (2.0 * a1 * w)).sqrt();
    let tail = (45.0 / (a1 * w)).sqrt();
    let xmax = 1.2 * turning + tail + KERNEL_RADIUS_OVER_W / w + 0.5;
    let k_osc = ((2 * m + 1) as f64 * 2.0 * a1 * w).sqrt();
    let h = (1.0 / (6.0 * w)).min(0.2 / k_osc).min(0.02);
    build_axis(-xmax, xmax, h)
}

/// Values of the k-th basis function on the axis:
/// ψ_k(x) = h_k^{-1/2} (2α₁W)^{k/2} H_k(x√(2α₁W)) e^{-αWx²} with
/// h_k = k! (4α₁W)^{k-1/2} √(2π), built by the stable three-term recursion
/// x ψ_k = √((k+1)/(4α₁W)) ψ_{k+1} + √(k/(4α₁W)) ψ_{k-1}.
pub fn model_basis(k: usize, c_star: C64, w: f64, axis: &Axis) -> Vec<C64> {
    model_basis_ladder(k, c_star, w, axis).pop().unwrap()
}

/// All of ψ_0 … ψ_k at once (the recursion produces them anyway).
pub fn model_basis_ladder(k: usize, c_star: C64, w: f64, axis: &Axis) -> Vec<Vec<C64>> {
    let alpha = model_alpha(c_star, w);
    let a1 = alpha.re;
    let scale = (4.0 * a1 * w).sqrt();
    let norm0 = (2.0 * a1 * w / std::f64::consts::PI).powf(0.25);
    let psi0: Vec<C64> = axis
        .nodes
        .iter()
        .map(|&x| norm0 * (-alpha * w * x * x).exp())
        .collect();
    let mut ladder = vec![psi0];
    for kk in 0..k {
        let prev = &ladder[kk];
        let next: Vec<C64> = axis
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut v = x * scale * prev[i];
                if kk > 0 {
                    v -= (kk as f64).sqrt() * ladder[kk - 1][i];
                }
                v / ((kk + 1) as f64).sqrt()
            })
            .collect();
        ladder.push(next);
    }
    ladder
}

/// Assembles the (m+1)×(m+1) model-operator matrix on an adapted axis.
pub fn model_operator_matrix(c_star: C64, w: f64, m: usize) -> ModelOpMatrix {
    assert!(c_star.re > 0.0, "Re c_star must be positive");
    assert!(m <= 12, "model operator oracle is intended for small m");
    let axis = model_axis(c_star, w, m);
    let ladder = model_basis_ladder(m, c_star, w, &axis);
    let kernel = Blur1d::build(&axis, w);
    let f_star: Vec<C64> = axis.nodes.iter().map(|&x| (-c_star * x * x / 2.0).exp()).collect();
    let dim = m + 1;
    let mut entries = vec![C64::default(); dim * dim];
    for (k, psi_k) in ladder.iter().enumerate() {
        let weighted: Vec<C64> = psi_k.iter().zip(&f_star).map(|(p, f)| p * f).collect();
        let blurred = kernel.apply(&weighted);
        let a_psi: Vec<C64> = blurred.iter().zip(&f_star).map(|(b, f)| b * f).collect();
        for (j, psi_j) in ladder.iter().enumerate() {
            let mut acc = C64::default();
            for ((av, pj), &wt) in a_psi.iter().zip(psi_j).zip(&axis.weights) {
                acc += wt * av * pj.conj();
            }
            entries[j * dim + k] = acc;
        }
    }
    ModelOpMatrix { entries, c_star, w, m }
}
