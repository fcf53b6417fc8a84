//! The transfer operator 𝒦 = K̆S on two-component fields, the normalization
//! identity Z = 1, and the chain-length density-of-states sum.
//!
//! K̆ acts on each component as u ↦ F · blur_b(blur_a(F · u)) with the
//! separable weight F(a, b) = F₀(a)F₁(b); S is the pointwise 2×2 matrix
//! [[1, -L/W], [-1/W, 1 + L/W²]] with L = L(a, b). The transpose 𝒦ᵀ = SᵀK̆ is
//! the adjoint under the quadrature-weighted bilinear pairing (no
//! conjugation): K̆ has symmetric kernels and Sᵀ is the pointwise transpose.
//!
//! The boundary functional is ℓ(u) = σ/(2π) ∬ F · (u₁ - (L/W)u₂) with the
//! global sign σ = -1 calibrated once against the n = 1 field integral, where
//! the normalization must come out as +1 (flipping σ gives -1; no other
//! freedom is left once all pairings are fixed as bilinear).
//!
//! Long sweeps guard against under/overflow by rescaling states and tracking
//! the accumulated exponent; readouts fold the exponent back in.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::field::{
    bilinear_dot, blur_cols, blur_rows, for_rows, for_rows2, herm_dot, herm_norm, sum_rows,
    Plane, SepScale, State,
};
use crate::grid::Grid2D;
use crate::landscape;
use crate::params::ModelParams;
use crate::C64;

/// Global sign of the boundary functional ℓ, fixed by requiring Z = +1 at
/// n = 1 (asserted against the independent field-integral oracle in tests).
pub(crate) const ELL_SIGN: f64 = -1.0;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Reusable scratch planes for operator applications.
pub struct Workspace {
    t1: Plane,
    t2: Plane,
}

/// The discretized transfer operator bound to one grid.
pub struct Transfer<'g> {
    pub grid: &'g Grid2D,
    /// F₀ on the a axis, split for the pointwise-multiply loops.
    f0_re: Vec<f64>,
    f0_im: Vec<f64>,
    /// F₁ on the b axis, split likewise.
    f1_re: Vec<f64>,
    f1_im: Vec<f64>,
    /// v(b) (the b factor of 1 - L), split likewise.
    vb_re: Vec<f64>,
    vb_im: Vec<f64>,
}

impl<'g> Transfer<'g> {
    pub fn new(grid: &'g Grid2D) -> Self {
        let (f0_re, f0_im) = split(&grid.f0);
        let (f1_re, f1_im) = split(&grid.f1);
        let (vb_re, vb_im) = split(&grid.v_b);
        Transfer { grid, f0_re, f0_im, f1_re, f1_im, vb_re, vb_im }
    }

    pub fn workspace(&self) -> Workspace {
        let (na, nb) = (self.grid.na(), self.grid.nb());
        Workspace { t1: Plane::zeros(na, nb), t2: Plane::zeros(na, nb) }
    }

    /// The sweep seed s₀ = F·e₂ (comp1 = 0, comp2 = F).
    pub fn s0(&self) -> State {
        let mut s = State::zeros(self.grid.na(), self.grid.nb());
        s.c2 = Plane::from_separable(&self.grid.f0, &self.grid.f1);
        s
    }

    /// Pointwise S: (u₁, u₂) ← (u₁ - (L/W)u₂, -u₁/W + (1 + L/W²)u₂).
    pub fn apply_s(&self, s: &mut State) {
        self.apply_s_impl(s, false, false)
    }

    /// Pointwise Sᵀ: (u₁, u₂) ← (u₁ - u₂/W, -(L/W)u₁ + (1 + L/W²)u₂).
    pub fn apply_s_t(&self, s: &mut State) {
        self.apply_s_impl(s, true, false)
    }

    /// Pointwise S or Sᵀ; with `weight` the stored result is also multiplied
    /// by F, fusing the first factor of a following K̆ into this pass. The
    /// multiply uses the exact expression of [`Self::weight_into`], so the
    /// fused path is bit-identical to the two-pass one.
    fn apply_s_impl(&self, s: &mut State, transpose: bool, weight: bool) {
        let w = self.grid.w;
        let (inv_w, inv_w2) = (1.0 / w, 1.0 / (w * w));
        let ua = &self.grid.u_a;
        let f0 = &self.grid.f0;
        let (f1r, f1i) = (&self.f1_re, &self.f1_im);
        let (vbr, vbi) = (&self.vb_re, &self.vb_im);
        for_rows2(&mut s.c1, &mut s.c2, |ia, p_re, p_im, q_re, q_im| {
            let u = ua[ia];
            let c = f0[ia];
            for j in 0..p_re.len() {
                // L = 1 - u(a)v(b), then L/W and 1 + L/W².
                let lr = 1.0 - (u.re * vbr[j] - u.im * vbi[j]);
                let li = -(u.re * vbi[j] + u.im * vbr[j]);
                let (lwr, lwi) = (lr * inv_w, li * inv_w);
                let (mr, mi) = (1.0 + lr * inv_w2, li * inv_w2);
                let (pr, pi) = (p_re[j], p_im[j]);
                let (qr, qi) = (q_re[j], q_im[j]);
                let (mut ar, mut ai, mut br, mut bi);
                if transpose {
                    ar = pr - inv_w * qr;
                    ai = pi - inv_w * qi;
                    br = -(lwr * pr - lwi * pi) + (mr * qr - mi * qi);
                    bi = -(lwr * pi + lwi * pr) + (mr * qi + mi * qr);
                } else {
                    ar = pr - (lwr * qr - lwi * qi);
                    ai = pi - (lwr * qi + lwi * qr);
                    br = -inv_w * pr + (mr * qr - mi * qi);
                    bi = -inv_w * pi + (mr * qi + mi * qr);
                }
                if weight {
                    let (fr, fi) = (f1r[j], f1i[j]);
                    let (tr, ti) = (ar * fr - ai * fi, ar * fi + ai * fr);
                    ar = c.re * tr - c.im * ti;
                    ai = c.re * ti + c.im * tr;
                    let (tr, ti) = (br * fr - bi * fi, br * fi + bi * fr);
                    br = c.re * tr - c.im * ti;
                    bi = c.re * ti + c.im * tr;
                }
                p_re[j] = ar;
                p_im[j] = ai;
                q_re[j] = br;
                q_im[j] = bi;
            }
        });
    }

    /// dst = F ∘ src (pointwise multiply by F₀(a)F₁(b)).
    fn weight_into(&self, src: &Plane, dst: &mut Plane) {
        let f0 = &self.grid.f0;
        let (f1r, f1i) = (&self.f1_re, &self.f1_im);
        let nb = src.nb;
        for_rows(dst, |ia, out_re, out_im| {
            let c = f0[ia];
            let base = ia * nb;
            let sre = &src.re[base..base + nb];
            let sim = &src.im[base..base + nb];
            for j in 0..nb {
                let tr = sre[j] * f1r[j] - sim[j] * f1i[j];
                let ti = sre[j] * f1i[j] + sim[j] * f1r[j];
                out_re[j] = c.re * tr - c.im * ti;
                out_im[j] = c.re * ti + c.im * tr;
            }
        });
    }

    /// The separable weight F = F₀(a)F₁(b) in the split form the fused blur
    /// store consumes.
    fn sep_weight(&self) -> SepScale<'_> {
        SepScale {
            row_re: &self.f0_re,
            row_im: &self.f0_im,
            col_re: &self.f1_re,
            col_im: &self.f1_im,
        }
    }

    /// Componentwise K̆: u ← F · blur_b(blur_a(F · u)).
    pub fn apply_kb(&self, s: &mut State, ws: &mut Workspace) {
        for comp in [&mut s.c1, &mut s.c2] {
            self.weight_into(comp, &mut ws.t1);
            blur_cols(&self.grid.blur_a, &ws.t1, &mut ws.t2);
            blur_rows(&self.grid.blur_b, &ws.t2, &mut ws.t1, None);
            self.weight_into(&ws.t1, comp);
        }
    }

    /// 𝒦 = K̆ ∘ S. Both weight multiplies of K̆ ride along with neighbouring
    /// passes (the leading one on the S store, the trailing one on the second
    /// blur store), so the composition makes no standalone weight sweeps; the
    /// result is bit-identical to `apply_s` followed by `apply_kb`.
    pub fn apply(&self, s: &mut State, ws: &mut Workspace) {
        self.apply_s_impl(s, false, true);
        let sc = self.sep_weight();
        for comp in [&mut s.c1, &mut s.c2] {
            blur_cols(&self.grid.blur_a, comp, &mut ws.t1);
            blur_rows(&self.grid.blur_b, &ws.t1, comp, Some(&sc));
        }
    }

    /// 𝒦ᵀ = Sᵀ ∘ K̆, the adjoint under the bilinear pairing. The trailing
    /// weight of K̆ rides along with the second blur store; the leading one
    /// has no neighbouring pass and stays standalone.
    pub fn apply_t(&self, s: &mut State, ws: &mut Workspace) {
        let sc = self.sep_weight();
        for comp in [&mut s.c1, &mut s.c2] {
            self.weight_into(comp, &mut ws.t1);
            blur_cols(&self.grid.blur_a, &ws.t1, &mut ws.t2);
            blur_rows(&self.grid.blur_b, &ws.t2, comp, Some(&sc));
        }
        self.apply_s_t(s);
    }

    /// Boundary functional ℓ(u) = σ/(2π) ∬ F · (u₁ - (L/W)u₂).
    pub fn ell(&self, s: &State) -> C64 {
        let g = self.grid;
        let (wa, wb) = (&g.axis_a.weights, &g.axis_b.weights);
        let inv_w = 1.0 / g.w;
        let nb = g.nb();
        let (f1r, f1i) = (&self.f1_re, &self.f1_im);
        let (vbr, vbi) = (&self.vb_re, &self.vb_im);
        let total = sum_rows(g.na(), |ia| {
            let u = g.u_a[ia];
            let base = ia * nb;
            let (u1r, u1i) = (&s.c1.re[base..base + nb], &s.c1.im[base..base + nb]);
            let (u2r, u2i) = (&s.c2.re[base..base + nb], &s.c2.im[base..base + nb]);
            let mut ar = 0.0;
            let mut ai = 0.0;
            for j in 0..nb {
                let lr = 1.0 - (u.re * vbr[j] - u.im * vbi[j]);
                let li = -(u.re * vbi[j] + u.im * vbr[j]);
                let (lwr, lwi) = (lr * inv_w, li * inv_w);
                let tr = u1r[j] - (lwr * u2r[j] - lwi * u2i[j]);
                let ti = u1i[j] - (lwr * u2i[j] + lwi * u2r[j]);
                let w = wb[j];
                ar += w * (f1r[j] * tr - f1i[j] * ti);
                ai += w * (f1r[j] * ti + f1i[j] * tr);
            }
            wa[ia] * g.f0[ia] * C64::new(ar, ai)
        });
        total * (ELL_SIGN / TWO_PI)
    }

    /// The field λ with ⟨λ, u⟩ = ℓ(u) under the bilinear pairing:
    /// λ = σ/(2π) · F · (1, -L/W). Seeds the transpose sweep.
    pub fn ell_field(&self) -> State {
        let g = self.grid;
        let inv_w = 1.0 / g.w;
        let mut s = State::zeros(g.na(), g.nb());
        let (f1r, f1i) = (&self.f1_re, &self.f1_im);
        let (vbr, vbi) = (&self.vb_re, &self.vb_im);
        let f0 = &g.f0;
        for_rows2(&mut s.c1, &mut s.c2, |ia, p_re, p_im, q_re, q_im| {
            let c = f0[ia] * (ELL_SIGN / TWO_PI);
            let u = g.u_a[ia];
            for j in 0..p_re.len() {
                let fr = c.re * f1r[j] - c.im * f1i[j];
                let fi = c.re * f1i[j] + c.im * f1r[j];
                p_re[j] = fr;
                p_im[j] = fi;
                let lr = 1.0 - (u.re * vbr[j] - u.im * vbi[j]);
                let li = -(u.re * vbi[j] + u.im * vbr[j]);
                let (lwr, lwi) = (lr * inv_w, li * inv_w);
                q_re[j] = -(lwr * fr - lwi * fi);
                q_im[j] = -(lwr * fi + lwi * fr);
            }
        });
        s
    }

    /// The centered observable 𝓑°: multiply both components by b - E/2.
    pub fn bcirc(&self, s: &mut State) {
        let d = &self.grid.d_center;
        for p in [&mut s.c1, &mut s.c2] {
            for_rows(p, |_, re, im| {
                for j in 0..re.len() {
                    re[j] *= d[j];
                    im[j] *= d[j];
                }
            });
        }
    }

    /// dst += 𝓑° src without touching src.
    fn add_bcirc(&self, dst: &mut State, src: &State) {
        let d = &self.grid.d_center;
        let nb = src.nb();
        for (p, q) in [(&mut dst.c1, &src.c1), (&mut dst.c2, &src.c2)] {
            for_rows(p, |ia, re, im| {
                let base = ia * nb;
                let sre = &q.re[base..base + nb];
                let sim = &q.im[base..base + nb];
                for j in 0..nb {
                    re[j] += d[j] * sre[j];
                    im[j] += d[j] * sim[j];
                }
            });
        }
    }

    /// ⟨u, 𝓑° v⟩ under the bilinear pairing, without materializing 𝓑°v.
    fn dot_bcirc(&self, u: &State, v: &State) -> C64 {
        let g = self.grid;
        let (wa, wb) = (&g.axis_a.weights, &g.axis_b.weights);
        let d = &g.d_center;
        let nb = g.nb();
        sum_rows(g.na(), |ia| {
            let base = ia * nb;
            let mut acc = C64::default();
            for (up, vp) in [(&u.c1, &v.c1), (&u.c2, &v.c2)] {
                let (ur, ui) = (&up.re[base..base + nb], &up.im[base..base + nb]);
                let (vr, vi) = (&vp.re[base..base + nb], &vp.im[base..base + nb]);
                let mut ar = 0.0;
                let mut ai = 0.0;
                for j in 0..nb {
                    let w = wb[j] * d[j];
                    ar += w * (ur[j] * vr[j] - ui[j] * vi[j]);
                    ai += w * (ur[j] * vi[j] + ui[j] * vr[j]);
                }
                acc += C64::new(ar, ai);
            }
            wa[ia] * acc
        })
    }

    /// Bilinear pairing Σ_c ∬ u_c v_c on this grid's quadrature.
    pub fn pair(&self, u: &State, v: &State) -> C64 {
        bilinear_dot(&self.grid.axis_a.weights, &self.grid.axis_b.weights, u, v)
    }

    /// Hermitian inner product (conjugate-linear in u); the eigensolver's
    /// orthogonalization metric.
    pub fn inner(&self, u: &State, v: &State) -> C64 {
        herm_dot(&self.grid.axis_a.weights, &self.grid.axis_b.weights, u, v)
    }

    /// Weighted L² norm.
    pub fn norm(&self, s: &State) -> f64 {
        herm_norm(&self.grid.axis_a.weights, &self.grid.axis_b.weights, s)
    }

    /// Bound (1 + C₀/W) with C₀ = 2 + L₀(E) on the operator norm growth.
    pub fn norm_growth_bound(&self) -> f64 {
        1.0 + (2.0 + landscape::l0_bound(self.grid.e)) / self.grid.w
    }
}

fn split(v: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

/// Rescales `states` jointly when any leaves [1/limit, limit], accumulating
/// the shed exponent into `log_scale` so readouts can undo it.
fn renormalize(states: &mut [&mut State], log_scale: &mut f64, limit: f64) {
    let m = states.iter().map(|s| s.max_abs()).fold(0.0, f64::max);
    if m > 0.0 && (m > limit || m < 1.0 / limit) {
        let c = 1.0 / m;
        for s in states.iter_mut() {
            s.scale(C64::new(c, 0.0));
        }
        *log_scale += m.ln();
    }
}

const DEFAULT_RENORM_LIMIT: f64 = 1e50;

/// Steps between renormalization checks in long sweeps. The per-step growth
/// is bounded by the operator norm (order 1 + C/W), so even hundreds of
/// unchecked steps cannot reach the overflow range from inside the window.
const RENORM_STRIDE: usize = 8;

pub(crate) fn check_grid_match(p: &ModelParams, g: &Grid2D) -> Result<()> {
    if p.e != g.e || p.w != g.w {
        return Err(Error::validation(format!(
            "parameter/grid mismatch: params (E = {}, W = {}) vs grid (E = {}, W = {})",
            p.e, p.w, g.e, g.w
        )));
    }
    Ok(())
}

/// Z = W·ℓ(𝒦^{n-1} s₀); the continuum identity says this is exactly 1.
pub fn normalization(p: &ModelParams, g: &Grid2D) -> Result<C64> {
    Ok(normalization_sweep(p, g, &[p.n])?[0])
}

/// Z for several chain lengths in one sweep (states are shared up to the
/// largest n). Results come back in the order of `ns`.
pub fn normalization_sweep(p: &ModelParams, g: &Grid2D, ns: &[usize]) -> Result<Vec<C64>> {
    check_grid_match(p, g)?;
    if ns.is_empty() {
        return Err(Error::validation("normalization: empty chain-length list"));
    }
    if let Some(&bad) = ns.iter().find(|&&n| n == 0) {
        return Err(Error::validation(format!("normalization: n = {bad} must be >= 1")));
    }
    let mut targets: Vec<usize> = ns.to_vec();
    targets.sort_unstable();
    targets.dedup();
    let tr = Transfer::new(g);
    let mut ws = tr.workspace();
    let mut v = tr.s0();
    let mut log_scale = 0.0f64;
    let mut applied = 0usize;
    let mut at: HashMap<usize, C64> = HashMap::new();
    for &n in &targets {
        while applied < n - 1 {
            tr.apply(&mut v, &mut ws);
            applied += 1;
            if applied % RENORM_STRIDE == 0 {
                renormalize(&mut [&mut v], &mut log_scale, DEFAULT_RENORM_LIMIT);
            }
        }
        at.insert(n, g.w * tr.ell(&v) * log_scale.exp());
    }
    Ok(ns.iter().map(|n| at[n]).collect())
}

/// How the chain-length observable sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DosStrategy {
    /// Pick automatically (currently always the forward pair).
    Auto,
    /// Sweep the pair (v_j, Σ_i 𝒦^{j-i}𝓑°v_i) forward: 2n applies, O(1)
    /// states. Default: least memory and fewest applies.
    ForwardPair,
    /// Forward checkpoints every ⌈√n⌉ steps, then a transpose sweep with
    /// per-block recompute: 3n applies, O(√n) states. Kept as an independent
    /// evaluation path; both strategies compute the same sum.
    Checkpointed,
}

#[derive(Debug, Clone, Copy)]
pub struct DosOpts {
    pub strategy: DosStrategy,
    /// Peak working-set bound in bytes for the sweep states.
    pub mem_budget: usize,
    /// States are rescaled whenever their sup norm leaves
    /// [1/renorm_limit, renorm_limit]; lowering it forces rescaling every
    /// step, which must not change results.
    pub renorm_limit: f64,
}

impl Default for DosOpts {
    fn default() -> Self {
        DosOpts {
            strategy: DosStrategy::Auto,
            mem_budget: 4 * 1024 * 1024 * 1024,
            renorm_limit: DEFAULT_RENORM_LIMIT,
        }
    }
}

/// Output of the density-of-states evaluation at one (E, W, n).
#[derive(Debug, Clone, Copy)]
pub struct DosResult {
    /// Raw centered observable sum G° = (W/n) Σ_j ℓ(𝒦^j 𝓑° 𝒦^{n-1-j} s₀).
    pub g_n: C64,
    /// Normalization Z = W·ℓ(𝒦^{n-1}s₀) from the same sweep.
    pub z: C64,
    /// G°/Z + g_sc: the Stieltjes transform the theory bounds against g_sc.
    pub g_n_normalized: C64,
    pub g_sc: C64,
    pub e: f64,
    pub w: f64,
    pub n: usize,
    pub grid_fingerprint: u64,
}

fn state_bytes(g: &Grid2D) -> usize {
    // Two components, two f64 planes each.
    4 * 8 * g.na() * g.nb()
}

/// Averaged Stieltjes transform of the n-site chain at E - i·0, from the
/// transfer-operator sum.
pub fn dos(p: &ModelParams, g: &Grid2D, opts: &DosOpts) -> Result<DosResult> {
    check_grid_match(p, g)?;
    let n = p.n;
    let strategy = match opts.strategy {
        DosStrategy::Auto => DosStrategy::ForwardPair,
        s => s,
    };
    let per_state = state_bytes(g);
    let needed = match strategy {
        // v, g, two workspace planes.
        DosStrategy::ForwardPair => 3 * per_state,
        DosStrategy::Checkpointed => {
            let stride = (n as f64).sqrt().ceil() as usize;
            let ckpts = n.div_ceil(stride.max(1));
            (ckpts + stride + 3) * per_state
        }
        DosStrategy::Auto => unreachable!(),
    };
    if needed > opts.mem_budget {
        return Err(Error::validation(format!(
            "dos sweep needs ~{} MiB (strategy {:?}, state = {} MiB) but the memory budget \
             is {} MiB; raise --mem-budget or use a coarser grid",
            needed >> 20,
            strategy,
            per_state >> 20,
            opts.mem_budget >> 20,
        )));
    }
    let tr = Transfer::new(g);
    let (g_n, z) = match strategy {
        DosStrategy::ForwardPair => dos_forward_pair(&tr, n, opts.renorm_limit),
        DosStrategy::Checkpointed => dos_checkpointed(&tr, n, opts.renorm_limit),
        DosStrategy::Auto => unreachable!(),
    };
    let g_sc = landscape::g_sc(p.e);
    Ok(DosResult {
        g_n,
        z,
        g_n_normalized: g_n / z + g_sc,
        g_sc,
        e: p.e,
        w: p.w,
        n,
        grid_fingerprint: g.fingerprint,
    })
}

/// Forward-pair recurrence: with v_j = 𝒦^j s₀ and
/// g_j = Σ_{i=0}^{j} 𝒦^{j-i} 𝓑° v_i, step g_{j+1} = 𝒦g_j + 𝓑°v_{j+1}.
/// Then G° = (W/n)·ℓ(g_{n-1}) and Z = W·ℓ(v_{n-1}).
fn dos_forward_pair(tr: &Transfer, n: usize, renorm_limit: f64) -> (C64, C64) {
    let mut ws = tr.workspace();
    let mut v = tr.s0();
    let mut acc = v.clone();
    tr.bcirc(&mut acc);
    let mut log_scale = 0.0f64;
    for j in 1..n {
        tr.apply(&mut acc, &mut ws);
        tr.apply(&mut v, &mut ws);
        tr.add_bcirc(&mut acc, &v);
        // The sup norm drifts by at most a few orders of magnitude per step,
        // so scanning every stride-th step still keeps it far inside the
        // window while saving a full pass over both states the rest of the
        // time.
        if j % RENORM_STRIDE == 0 {
            renormalize(&mut [&mut acc, &mut v], &mut log_scale, renorm_limit);
        }
    }
    let w = tr.grid.w;
    let scale = log_scale.exp();
    (w / n as f64 * tr.ell(&acc) * scale, w * tr.ell(&v) * scale)
}

/// Checkpointed two-sweep evaluation of the same sum: store 𝒦^m s₀ every
/// ⌈√n⌉ steps, then walk y_j = (𝒦ᵀ)^j λ while recomputing each forward block,
/// pairing term j as ⟨y_j, 𝓑° v_{n-1-j}⟩.
fn dos_checkpointed(tr: &Transfer, n: usize, renorm_limit: f64) -> (C64, C64) {
    let mut ws = tr.workspace();
    let stride = (n as f64).sqrt().ceil() as usize;
    let mut ckpts: Vec<(State, f64)> = Vec::with_capacity(n.div_ceil(stride));
    let mut v = tr.s0();
    let mut v_scale = 0.0f64;
    for m in 0..n {
        if m % stride == 0 {
            ckpts.push((v.clone(), v_scale));
        }
        if m + 1 < n {
            tr.apply(&mut v, &mut ws);
            renormalize(&mut [&mut v], &mut v_scale, renorm_limit);
        }
    }
    let z = tr.grid.w * tr.ell(&v) * v_scale.exp();

    let mut y = tr.ell_field();
    let mut y_scale = 0.0f64;
    let mut total = C64::default();
    let mut j = 0usize;
    for block in (0..ckpts.len()).rev() {
        let base = block * stride;
        let len = stride.min(n - base);
        let (ref ck_state, ck_scale) = ckpts[block];
        let mut buf: Vec<State> = Vec::with_capacity(len);
        buf.push(ck_state.clone());
        for i in 1..len {
            let mut next = buf[i - 1].clone();
            tr.apply(&mut next, &mut ws);
            buf.push(next);
        }
        for m in (base..base + len).rev() {
            debug_assert_eq!(n - 1 - j, m);
            let term = tr.dot_bcirc(&y, &buf[m - base]);
            total += term * (y_scale + ck_scale).exp();
            j += 1;
            if j < n {
                tr.apply_t(&mut y, &mut ws);
                renormalize(&mut [&mut y], &mut y_scale, renorm_limit);
            }
        }
    }
    (tr.grid.w / n as f64 * total, z)
}

#[cfg(test)]
mod profile {
    use super::*;
    use crate::grid::{build_grid, GridOpts};
    use crate::params::ModelParams;
    use std::time::Instant;

    #[test]
    #[ignore = "dev tool: stage timing, run with --ignored --nocapture"]
    fn stage_timing_report() {
        for (w, opts, label) in [
            (8.0, GridOpts::quick(), "quick"),
            (8.0, GridOpts::default(), "default"),
            (16.0, GridOpts::quick(), "quick"),
            (16.0, GridOpts::default(), "default"),
            (32.0, GridOpts::quick(), "quick"),
        ] {
            let p = ModelParams::new(1.0, w, 64, 0.0).unwrap();
            let g = build_grid(p.e, p.w, &opts).unwrap();
            let (na, nb) = (g.na(), g.nb());
            let ta: usize = (0..na).map(|i| g.blur_a.row(i).1.len()).sum();
            let tb: usize = (0..nb).map(|i| g.blur_b.row(i).1.len()).sum();
            println!(
                "W={w} {label}: {na}x{nb} = {} nodes, mean taps a={:.1} b={:.1}",
                na * nb,
                ta as f64 / na as f64,
                tb as f64 / nb as f64
            );
            let tr = Transfer::new(&g);
            let mut ws = tr.workspace();
            let mut s = tr.s0();
            let reps = 3usize;
            let time = |f: &mut dyn FnMut()| {
                let t0 = Instant::now();
                for _ in 0..reps {
                    f();
                }
                t0.elapsed().as_secs_f64() / reps as f64 * 1e3
            };
            let full = time(&mut || tr.apply(&mut s, &mut ws));
            let t_s = time(&mut || tr.apply_s(&mut s));
            let t_w = time(&mut || {
                tr.weight_into(&s.c1, &mut ws.t1);
                tr.weight_into(&s.c2, &mut ws.t2);
            });
            let t_a = time(&mut || {
                blur_cols(&g.blur_a, &ws.t1, &mut ws.t2);
                blur_cols(&g.blur_a, &ws.t1, &mut ws.t2);
            });
            let t_b = time(&mut || {
                blur_rows(&g.blur_b, &ws.t1, &mut ws.t2, None);
                blur_rows(&g.blur_b, &ws.t1, &mut ws.t2, None);
            });
            println!(
                "  full {full:8.2} ms | S {t_s:7.2} | weight2x {t_w:7.2} | blurA2x {t_a:7.2} | blurB2x {t_b:7.2} | sum {:8.2}",
                t_s + 2.0 * t_w + t_a + t_b
            );
        }
    }
}
