//! Matrix-free top-of-spectrum computation for the transfer operator and its
//! building blocks: Arnoldi with Krylov–Schur thick restarts over a generic
//! operator interface, plus a separable Galerkin path for grids too large to
//! hold a full Krylov basis.
//!
//! Orthogonalization uses the quadrature-weighted conjugated inner product
//! purely as a numerical device (eigenvalues are basis-independent); the
//! bilinear structure of the operator plays no role in the eigensolver.
//! Every reported eigenpair carries a true residual ‖𝒦v - θv‖/‖v‖ computed
//! with full operator applies, so the Galerkin path is validated by the same
//! yardstick as the Krylov path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eig::{eig_general, schur, schur_reorder, solve_linear};
use crate::error::{Error, Result};
use crate::field::{Plane, State};
use crate::grid::{Axis, Blur1d, Grid2D};
use crate::params::ModelParams;
use crate::transfer::{check_grid_match, Transfer, Workspace};
use crate::C64;

/// Vector interface the Krylov engine needs.
pub trait KrylovVec: Clone {
    fn scale(&mut self, c: C64);
    fn axpy(&mut self, alpha: C64, other: &Self);
}

impl KrylovVec for Vec<C64> {
    fn scale(&mut self, c: C64) {
        for v in self.iter_mut() {
            *v *= c;
        }
    }

    fn axpy(&mut self, alpha: C64, other: &Self) {
        for (v, o) in self.iter_mut().zip(other) {
            *v += alpha * o;
        }
    }
}

impl KrylovVec for State {
    fn scale(&mut self, c: C64) {
        State::scale(self, c)
    }

    fn axpy(&mut self, alpha: C64, other: &Self) {
        State::axpy(self, alpha, other)
    }
}

/// A linear operator with its inner-product space and a seeded start vector.
pub trait LinearOp {
    type V: KrylovVec;
    fn apply(&mut self, v: &mut Self::V);
    /// Conjugate-linear in `u`.
    fn inner(&self, u: &Self::V, v: &Self::V) -> C64;
    fn random_start(&self, seed: u64) -> Self::V;

    fn norm(&self, v: &Self::V) -> f64 {
        self.inner(v, v).re.max(0.0).sqrt()
    }
}

/// One estimated eigenpair: value and true residual ‖Av - θv‖/‖v‖.
#[derive(Debug, Clone, Copy)]
pub struct EigEstimate {
    pub value: C64,
    pub residual: f64,
}

/// Result of a top-of-spectrum computation.
#[derive(Debug, Clone)]
pub struct TopEigs {
    /// Largest-modulus eigenvalues, descending by |value|.
    pub eigs: Vec<EigEstimate>,
    /// Whether the inner iteration met its tolerance before the restart cap;
    /// the residuals are authoritative either way.
    pub converged: bool,
    pub restarts_used: usize,
    pub krylov_dim: usize,
}

/// Largest-modulus eigenvalues with residuals; deterministic given `seed`.
pub fn top_eigs<O: LinearOp>(op: &mut O, k: usize, krylov_dim: usize, seed: u64) -> Result<TopEigs> {
    Ok(top_eig_pairs(op, k, krylov_dim, seed)?.0)
}

const MAX_RESTARTS: usize = 2;
const INNER_TOL: f64 = 1e-9;
const BREAKDOWN_TOL: f64 = 1e-12;

/// As [`top_eigs`], also returning the Ritz vectors (unit norm).
pub fn top_eig_pairs<O: LinearOp>(
    op: &mut O,
    k: usize,
    krylov_dim: usize,
    seed: u64,
) -> Result<(TopEigs, Vec<O::V>)> {
    if k == 0 {
        return Err(Error::validation("top_eigs: k must be >= 1"));
    }
    if krylov_dim < k + 10 {
        return Err(Error::validation(format!(
            "top_eigs: krylov_dim = {krylov_dim} must be at least k + 10 = {}",
            k + 10
        )));
    }
    let m = krylov_dim;
    let mut h = vec![C64::default(); (m + 1) * m];
    let mut basis: Vec<O::V> = Vec::with_capacity(m + 1);
    let mut v0 = op.random_start(seed);
    let n0 = op.norm(&v0);
    if !(n0 > 0.0) {
        return Err(Error::validation("top_eigs: start vector has zero norm"));
    }
    v0.scale(C64::new(1.0 / n0, 0.0));
    basis.push(v0);
    let mut filled = 0usize;
    let mut restarts_used = 0usize;
    loop {
        // Expand the factorization to m columns (or until breakdown).
        let mut breakdown = false;
        while filled < m {
            let mut w = basis[filled].clone();
            op.apply(&mut w);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = op.inner(b, &w);
                    w.axpy(-c, b);
                    h[i * m + filled] += c;
                }
            }
            let hn = op.norm(&w);
            h[(filled + 1) * m + filled] = C64::new(hn, 0.0);
            filled += 1;
            if hn < BREAKDOWN_TOL {
                breakdown = true;
                break;
            }
            w.scale(C64::new(1.0 / hn, 0.0));
            basis.push(w);
        }
        // Ritz pairs of the square part.
        let dim = filled;
        let mut hm = vec![C64::default(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                hm[i * dim + j] = h[i * m + j];
            }
        }
        let pairs = eig_general(&hm, dim)?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            pairs.values[b]
                .norm()
                .partial_cmp(&pairs.values[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let kk = k.min(dim);
        // With a unit-norm coefficient vector y, ‖A·Vy - θ·Vy‖ equals the
        // dangling-row contribution |h_row · y|.
        let approx_res = |idx: usize| -> f64 {
            let y = &pairs.vectors[idx];
            let mut acc = C64::default();
            for j in 0..dim {
                acc += h[dim * m + j] * y[j];
            }
            acc.norm()
        };
        let inner_ok = order[..kk].iter().all(|&i| approx_res(i) <= INNER_TOL);
        if inner_ok || breakdown || restarts_used >= MAX_RESTARTS {
            let mut eigs = Vec::with_capacity(kk);
            let mut vectors = Vec::with_capacity(kk);
            for &idx in &order[..kk] {
                let y = &pairs.vectors[idx];
                let theta = pairs.values[idx];
                let mut x = basis[0].clone();
                x.scale(y[0]);
                for j in 1..dim {
                    x.axpy(y[j], &basis[j]);
                }
                let xn = op.norm(&x);
                x.scale(C64::new(1.0 / xn, 0.0));
                let mut r = x.clone();
                op.apply(&mut r);
                r.axpy(-theta, &x);
                let residual = op.norm(&r);
                eigs.push(EigEstimate { value: theta, residual });
                vectors.push(x);
            }
            let report = TopEigs {
                eigs,
                converged: inner_ok || breakdown,
                restarts_used,
                krylov_dim: m,
            };
            return Ok((report, vectors));
        }
        // Krylov–Schur thick restart: rotate the top block of the Schur form
        // of H_m into the leading position and keep it.
        let keep = (k + 4).min(dim / 2).max(k.min(dim));
        let form = schur(&hm, dim)?;
        let mut sel_order: Vec<usize> = (0..dim).collect();
        sel_order.sort_by(|&a, &b| {
            form.values[b]
                .norm()
                .partial_cmp(&form.values[a].norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut select = vec![false; dim];
        for &i in &sel_order[..keep] {
            select[i] = true;
        }
        let form = schur_reorder(&form, dim, &select)?;
        // New basis W_j = Σ_i Q[i][j]·v_i, j < keep; the dangling vector
        // v_dim stays as the residual direction.
        let mut new_basis: Vec<O::V> = Vec::with_capacity(keep + 1);
        for j in 0..keep {
            let mut x = basis[0].clone();
            x.scale(form.q[j]);
            for i in 1..dim {
                x.axpy(form.q[i * dim + j], &basis[i]);
            }
            new_basis.push(x);
        }
        new_basis.push(basis.pop().expect("dangling Krylov vector"));
        let h_res_row: Vec<C64> = (0..dim).map(|i| h[dim * m + i]).collect();
        h.fill(C64::default());
        for i in 0..keep {
            for j in 0..keep {
                h[i * m + j] = form.t[i * dim + j];
            }
        }
        for j in 0..keep {
            let mut acc = C64::default();
            for i in 0..dim {
                acc += h_res_row[i] * form.q[i * dim + j];
            }
            h[keep * m + j] = acc;
        }
        basis = new_basis;
        filled = keep;
        restarts_used += 1;
    }
}

fn fill_normal(rng: &mut ChaCha8Rng, re: &mut [f64], im: &mut [f64]) {
    for j in 0..re.len() {
        re[j] = rng.sample(StandardNormal);
        im[j] = rng.sample(StandardNormal);
    }
}

/// Dense operator on ℂⁿ with the standard inner product; the small-scale
/// reference instance of [`LinearOp`].
pub struct DenseOp {
    pub m: Vec<C64>,
    pub n: usize,
}

impl LinearOp for DenseOp {
    type V = Vec<C64>;

    fn apply(&mut self, v: &mut Vec<C64>) {
        let mut out = vec![C64::default(); self.n];
        for i in 0..self.n {
            let row = &self.m[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        *v = out;
    }

    fn inner(&self, u: &Vec<C64>, v: &Vec<C64>) -> C64 {
        u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
    }

    fn random_start(&self, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut re = vec![0.0; self.n];
        let mut im = vec![0.0; self.n];
        fill_normal(&mut rng, &mut re, &mut im);
        re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect()
    }
}

/// A 1D weighted-kernel operator v ↦ f ∘ blur(f ∘ v) on an axis: the building
/// block A = F₀BF₀ / A₁ = F₁BF₁ of K̆, and the model operator A★.
pub struct AxisOp {
    pub axis: Axis,
    blur: Blur1d,
    f: Vec<C64>,
}

impl AxisOp {
    pub fn new(axis: Axis, w: f64, f: Vec<C64>) -> Self {
        assert_eq!(axis.len(), f.len());
        let blur = Blur1d::build(&axis, w);
        AxisOp { axis, blur, f }
    }

    /// The a-axis factor A = F₀ B F₀ of the grid's kernel.
    pub fn grid_factor_a(g: &Grid2D) -> Self {
        AxisOp { axis: g.axis_a.clone(), blur: g.blur_a.clone(), f: g.f0.clone() }
    }

    /// The b-axis factor A₁ = F₁ B F₁.
    pub fn grid_factor_b(g: &Grid2D) -> Self {
        AxisOp { axis: g.axis_b.clone(), blur: g.blur_b.clone(), f: g.f1.clone() }
    }
}

impl LinearOp for AxisOp {
    type V = Vec<C64>;

    fn apply(&mut self, v: &mut Vec<C64>) {
        for (x, f) in v.iter_mut().zip(&self.f) {
            *x *= f;
        }
        let mut out = self.blur.apply(v);
        for (x, f) in out.iter_mut().zip(&self.f) {
            *x *= f;
        }
        *v = out;
    }

    fn inner(&self, u: &Vec<C64>, v: &Vec<C64>) -> C64 {
        self.axis
            .weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&w, (a, b))| w * a.conj() * b)
            .sum()
    }

    fn random_start(&self, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.axis.len();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        fill_normal(&mut rng, &mut re, &mut im);
        re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect()
    }
}

/// The full transfer operator as a [`LinearOp`] on two-component states.
pub struct TransferOp<'g> {
    tr: Transfer<'g>,
    ws: Workspace,
}

impl<'g> TransferOp<'g> {
    pub fn new(g: &'g Grid2D) -> Self {
        let tr = Transfer::new(g);
        let ws = tr.workspace();
        TransferOp { tr, ws }
    }
}

impl LinearOp for TransferOp<'_> {
    type V = State;

    fn apply(&mut self, v: &mut State) {
        self.tr.apply(v, &mut self.ws);
    }

    fn inner(&self, u: &State, v: &State) -> C64 {
        self.tr.inner(u, v)
    }

    fn random_start(&self, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.tr.grid;
        let mut s = State::zeros(g.na(), g.nb());
        // Sequential fill (row helpers would reorder draws under rayon).
        let nb = g.nb();
        for p in [&mut s.c1, &mut s.c2] {
            for ia in 0..g.na() {
                let base = ia * nb;
                fill_normal(&mut rng, &mut p.re[base..base + nb], &mut p.im[base..base + nb]);
            }
        }
        s
    }
}

/// Which evaluation route produced a spectral report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralPath {
    /// Arnoldi on the full two-component operator.
    FullKrylov,
    /// Galerkin projection onto tensor products of 1D eigenfunctions,
    /// validated by full-operator residuals.
    SeparableGalerkin,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOpts {
    /// Krylov dimension for the full path (capped by the memory budget).
    pub krylov_dim: usize,
    pub seed: u64,
    /// Bound on Krylov-basis memory; decides full vs separable path.
    pub mem_budget: usize,
    /// 1D modes kept per axis on the separable path.
    pub modes_per_axis: usize,
    /// Force a path instead of choosing by memory.
    pub force_path: Option<SpectralPath>,
}

impl Default for SpectralOpts {
    fn default() -> Self {
        SpectralOpts {
            krylov_dim: 40,
            seed: 7,
            mem_budget: 4 * 1024 * 1024 * 1024,
            modes_per_axis: 14,
            force_path: None,
        }
    }
}

/// Top of the transfer-operator spectrum at one (E, W).
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub lambda0: C64,
    pub lambda1: C64,
    /// 1 - |λ₁|.
    pub gap: f64,
    pub residual0: f64,
    pub residual1: f64,
    pub krylov_dim: usize,
    pub e: f64,
    pub w: f64,
    pub grid_fingerprint: u64,
    pub path: SpectralPath,
    /// Everything computed, descending by modulus (at least two entries).
    pub eigs: Vec<EigEstimate>,
}

impl SpectralReport {
    /// Both reported residuals within the contract bound 1e-8.
    pub fn is_converged(&self) -> bool {
        self.residual0.is_finite()
            && self.residual1.is_finite()
            && self.residual0 <= 1e-8
            && self.residual1 <= 1e-8
    }
}

fn state_bytes(g: &Grid2D) -> usize {
    4 * 8 * g.na() * g.nb()
}

/// Top eigenvalues of 𝒦 on `g`. The spectrum is computed on 𝒦 itself; the
/// constant-matrix similarity to the V̆-conjugated form preserves it.
pub fn transfer_spectrum(p: &ModelParams, g: &Grid2D, opts: &SpectralOpts) -> Result<SpectralReport> {
    check_grid_match(p, g)?;
    let per_state = state_bytes(g);
    // Basis + dangling vector + workspace + Ritz scratch.
    let full_mem = |m: usize| (m + 4) * per_state;
    let k = 2usize;
    let path = opts.force_path.unwrap_or({
        if full_mem(opts.krylov_dim.max(k + 10)) <= opts.mem_budget {
            SpectralPath::FullKrylov
        } else {
            SpectralPath::SeparableGalerkin
        }
    });
    let (eigs, krylov_dim) = match path {
        SpectralPath::FullKrylov => {
            let mut m = opts.krylov_dim;
            while m > k + 10 && full_mem(m) > opts.mem_budget {
                m -= 1;
            }
            if full_mem(m) > opts.mem_budget {
                return Err(Error::validation(format!(
                    "spectrum: even krylov_dim = {m} needs {} MiB > budget {} MiB; \
                     use the separable path",
                    full_mem(m) >> 20,
                    opts.mem_budget >> 20
                )));
            }
            let mut op = TransferOp::new(g);
            let (res, _) = top_eig_pairs(&mut op, k, m, opts.seed)?;
            (res.eigs, m)
        }
        SpectralPath::SeparableGalerkin => {
            (separable_top_eigs(g, opts)?, opts.modes_per_axis)
        }
    };
    if eigs.len() < 2 {
        return Err(Error::non_convergence("spectrum: fewer than two eigenvalues resolved"));
    }
    Ok(SpectralReport {
        lambda0: eigs[0].value,
        lambda1: eigs[1].value,
        gap: 1.0 - eigs[1].value.norm(),
        residual0: eigs[0].residual,
        residual1: eigs[1].residual,
        krylov_dim,
        e: p.e,
        w: p.w,
        grid_fingerprint: g.fingerprint,
        path,
        eigs,
    })
}

/// Leading eigenvalue of the kernel factor K = A ⊗ A₁ (no S), as the product
/// of the two 1D leading eigenvalues.
#[derive(Debug, Clone, Copy)]
pub struct KLeading {
    /// Leading eigenvalue of A (a-axis factor).
    pub mu0: C64,
    /// Leading eigenvalue of A₁ (b-axis factor).
    pub nu0: C64,
    /// λ₀(K) = μ₀ν₀.
    pub lambda0_k: C64,
    /// Max of the two 1D residuals.
    pub residual: f64,
}

pub fn k_leading(p: &ModelParams, g: &Grid2D, seed: u64) -> Result<KLeading> {
    check_grid_match(p, g)?;
    let m = 30;
    let mut op_a = AxisOp::grid_factor_a(g);
    let a = top_eigs(&mut op_a, 1, m, seed)?;
    let mut op_b = AxisOp::grid_factor_b(g);
    let b = top_eigs(&mut op_b, 1, m, seed.wrapping_add(1))?;
    let (mu0, nu0) = (a.eigs[0].value, b.eigs[0].value);
    Ok(KLeading {
        mu0,
        nu0,
        lambda0_k: mu0 * nu0,
        residual: a.eigs[0].residual.max(b.eigs[0].residual),
    })
}

/// Separable path: eigenbases of the 1D factors, Galerkin projection of the
/// pointwise S onto their tensor products (K̆ is exactly diagonal there), a
/// dense eigensolve of the small projected operator, then full-operator
/// residual validation of the materialized Ritz fields.
fn separable_top_eigs(g: &Grid2D, opts: &SpectralOpts) -> Result<Vec<EigEstimate>> {
    let ma = opts.modes_per_axis;
    let mb = opts.modes_per_axis;
    let m1d = (2 * ma + 10).min(g.na().min(g.nb()) - 1).max(ma + 10);
    let mut op_a = AxisOp::grid_factor_a(g);
    let (eig_a, phi) = top_eig_pairs(&mut op_a, ma, m1d, opts.seed)?;
    let mut op_b = AxisOp::grid_factor_b(g);
    let (eig_b, psi) = top_eig_pairs(&mut op_b, mb, m1d, opts.seed.wrapping_add(1))?;
    if eig_a.eigs.len() < ma || eig_b.eigs.len() < mb {
        return Err(Error::non_convergence(
            "spectrum: 1D factor solves returned fewer modes than requested",
        ));
    }
    let mu: Vec<C64> = eig_a.eigs.iter().map(|e| e.value).collect();
    let nu: Vec<C64> = eig_b.eigs.iter().map(|e| e.value).collect();
    // Projected multiplication operators on each axis (Galerkin in the
    // conjugated weighted inner product): P⁻¹U with P the Gram matrix and
    // U the weighted pairing against the multiplier.
    let proj_mult = |vecs: &[Vec<C64>], weights: &[f64], mult: &[C64]| -> Result<Vec<C64>> {
        let mm = vecs.len();
        let n = weights.len();
        let mut gram = vec![C64::default(); mm * mm];
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(mm);
        for jj in 0..mm {
            let mut col = vec![C64::default(); mm];
            for ii in 0..mm {
                let mut pg = C64::default();
                let mut pu = C64::default();
                for t in 0..n {
                    let base = weights[t] * vecs[ii][t].conj();
                    pg += base * vecs[jj][t];
                    pu += base * mult[t] * vecs[jj][t];
                }
                gram[ii * mm + jj] = pg;
                col[ii] = pu;
            }
            cols.push(col);
        }
        let sol = solve_linear(&gram, mm, &cols)?;
        // Column-major columns back to a row-major matrix.
        let mut out = vec![C64::default(); mm * mm];
        for (jj, col) in sol.iter().enumerate() {
            for ii in 0..mm {
                out[ii * mm + jj] = col[ii];
            }
        }
        Ok(out)
    };
    let ua = proj_mult(&phi, &g.axis_a.weights, &g.u_a)?;
    let vb = proj_mult(&psi, &g.axis_b.weights, &g.v_b)?;
    // L̂ = I - Ûa ⊗ V̂b on the ma·mb tensor space.
    let nm = ma * mb;
    let mut lhat = vec![C64::default(); nm * nm];
    for i in 0..ma {
        for j in 0..mb {
            for i2 in 0..ma {
                for j2 in 0..mb {
                    let mut v = -ua[i * ma + i2] * vb[j * mb + j2];
                    if i == i2 && j == j2 {
                        v += 1.0;
                    }
                    lhat[(i * mb + j) * nm + (i2 * mb + j2)] = v;
                }
            }
        }
    }
    // Projected 𝒦 = diag(μ_iν_j per component) · [[I, -L̂/W], [-I/W, I + L̂/W²]].
    let w = g.w;
    let dim = 2 * nm;
    let mut kmat = vec![C64::default(); dim * dim];
    for c in 0..2 {
        for r in 0..nm {
            let (i, j) = (r / mb, r % mb);
            let d = mu[i] * nu[j];
            for c2 in 0..2 {
                for r2 in 0..nm {
                    let l = lhat[r * nm + r2];
                    let mut s = C64::default();
                    if c == 0 && c2 == 0 {
                        if r == r2 {
                            s += 1.0;
                        }
                    } else if c == 0 && c2 == 1 {
                        s = -l / w;
                    } else if c == 1 && c2 == 0 {
                        if r == r2 {
                            s -= C64::new(1.0 / w, 0.0);
                        }
                    } else {
                        s = l / (w * w);
                        if r == r2 {
                            s += 1.0;
                        }
                    }
                    kmat[(c * nm + r) * dim + (c2 * nm + r2)] = d * s;
                }
            }
        }
    }
    let pairs = eig_general(&kmat, dim)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&x, &y| {
        pairs.values[y]
            .norm()
            .partial_cmp(&pairs.values[x].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // Materialize the top Ritz fields and validate with full applies.
    let tr = Transfer::new(g);
    let mut ws = tr.workspace();
    let top = 4.min(dim);
    let mut out = Vec::with_capacity(top);
    for &idx in &order[..top] {
        let y = &pairs.vectors[idx];
        let theta = pairs.values[idx];
        let mut x = State::zeros(g.na(), g.nb());
        for c in 0..2 {
            let plane = if c == 0 { &mut x.c1 } else { &mut x.c2 };
            materialize_plane(plane, &y[c * nm..(c + 1) * nm], &phi, &psi, mb);
        }
        let xn = tr.norm(&x);
        x.scale(C64::new(1.0 / xn, 0.0));
        let mut r = x.clone();
        tr.apply(&mut r, &mut ws);
        r.axpy(-theta, &x);
        out.push(EigEstimate { value: theta, residual: tr.norm(&r) });
    }
    Ok(out)
}

/// plane(a, b) = Σ_{ij} coef[i·mb + j] φ_i(a) ψ_j(b).
fn materialize_plane(plane: &mut Plane, coef: &[C64], phi: &[Vec<C64>], psi: &[Vec<C64>], mb: usize) {
    let nb = plane.nb;
    let ma = phi.len();
    for ia in 0..plane.na {
        // row(b) = Σ_j (Σ_i coef_ij φ_i(a)) ψ_j(b)
        let mut row_coef = vec![C64::default(); mb];
        for i in 0..ma {
            let fa = phi[i][ia];
            for j in 0..mb {
                row_coef[j] += coef[i * mb + j] * fa;
            }
        }
        let base = ia * nb;
        for ib in 0..nb {
            let mut acc = C64::default();
            for (j, rc) in row_coef.iter().enumerate() {
                acc += rc * psi[j][ib];
            }
            plane.re[base + ib] = acc.re;
            plane.im[base + ib] = acc.im;
        }
    }
}
