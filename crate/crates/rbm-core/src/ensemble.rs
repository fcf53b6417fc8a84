//! The Gaussian band-matrix ensemble: covariance profile, sampling, and the
//! Monte-Carlo side of the density-of-states comparison.
//!
//! The variance profile is J = (-W²Δ + 1)⁻¹ with Δ the n-site path Laplacian
//! under Neumann boundary conditions, so every row of J sums to exactly 1.
//! Entries H_ij are independent centered Gaussians (complex Hermitian) with
//! E|H_ij|² = J_ij.
//!
//! Sampling is reproducible: sample k of a run draws from an independent
//! ChaCha substream (seed, k), and all reductions run in fixed sample order,
//! so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eig::eigvals_hermitian;
use crate::error::{Error, Result};
use crate::landscape;
use crate::params::ModelParams;
use crate::C64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Variance profile of the ensemble: J = (-W²Δ + 1)⁻¹, dense symmetric.
#[derive(Debug, Clone)]
pub struct Covariance {
    /// Row-major n×n.
    pub j: Vec<f64>,
    pub n: usize,
    pub w: f64,
}

impl Covariance {
    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.j[i * self.n + k]
    }
}

/// Builds J by solving the symmetric tridiagonal system (-W²Δ + 1)X = I
/// column by column with an LDLᵀ factorization, then symmetrizing.
pub fn build_covariance(n: usize, w: f64) -> Result<Covariance> {
    if n == 0 {
        return Err(Error::validation("covariance: n must be >= 1"));
    }
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::validation(format!("covariance: W = {w} must be finite and > 0")));
    }
    let w2 = w * w;
    // -W²Δ + 1: diagonal W²·deg(i) + 1 (degree 1 at the ends, 2 inside),
    // off-diagonal -W².
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let deg = if n == 1 { 0.0 } else if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            w2 * deg + 1.0
        })
        .collect();
    let off = -w2;
    // LDLᵀ: dmod[i] = diag[i] - off²/dmod[i-1], multiplier l[i] = off/dmod[i-1].
    let mut dmod = vec![0.0f64; n];
    let mut l = vec![0.0f64; n];
    dmod[0] = diag[0];
    for i in 1..n {
        l[i] = off / dmod[i - 1];
        dmod[i] = diag[i] - off * l[i];
    }
    let mut j = vec![0.0f64; n * n];
    let mut col = vec![0.0f64; n];
    for k in 0..n {
        col.fill(0.0);
        col[k] = 1.0;
        for i in 1..n {
            let prev = col[i - 1];
            col[i] -= l[i] * prev;
        }
        col[n - 1] /= dmod[n - 1];
        for i in (0..n - 1).rev() {
            col[i] = col[i] / dmod[i] - l[i + 1] * col[i + 1];
        }
        for i in 0..n {
            j[i * n + k] = col[i];
        }
    }
    for i in 0..n {
        for k in 0..i {
            let s = 0.5 * (j[i * n + k] + j[k * n + i]);
            j[i * n + k] = s;
            j[k * n + i] = s;
        }
    }
    Ok(Covariance { j, n, w })
}

/// One Hermitian sample of the ensemble, row-major n×n. `sample_index`
/// selects the independent substream of `seed`, so (seed, k) is the full
/// reproducibility key.
pub fn sample_matrix(cov: &Covariance, seed: u64, sample_index: u64) -> Vec<C64> {
    let n = cov.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    let mut h = vec![C64::default(); n * n];
    for i in 0..n {
        let gi: f64 = rng.sample(StandardNormal);
        h[i * n + i] = C64::new(gi * cov.at(i, i).sqrt(), 0.0);
        for k in i + 1..n {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let s = (cov.at(i, k) / 2.0).sqrt();
            let v = C64::new(s * x, s * y);
            h[i * n + k] = v;
            h[k * n + i] = v.conj();
        }
    }
    h
}

/// Monte-Carlo estimate of the averaged Stieltjes transform.
#[derive(Debug, Clone, Copy)]
pub struct SampleStats {
    pub g_mean: C64,
    /// Standard error of the mean, max over real and imaginary parts;
    /// +∞ when only one sample was kept.
    pub g_stderr: f64,
    /// Samples requested.
    pub samples: usize,
    pub seed: u64,
    /// Samples dropped because the eigensolver failed on them.
    pub dropped: usize,
}

/// Averages n⁻¹ Tr (E - iε - H)⁻¹ over `samples` draws via full Hermitian
/// eigendecomposition of each sample.
pub fn stieltjes_mc(p: &ModelParams, samples: usize, seed: u64) -> Result<SampleStats> {
    if p.eps <= 0.0 {
        return Err(Error::validation("stieltjes_mc: eps must be > 0"));
    }
    if samples == 0 {
        return Err(Error::validation("stieltjes_mc: samples must be >= 1"));
    }
    let cov = build_covariance(p.n, p.w)?;
    let per_sample = |k: usize| -> Option<C64> {
        let h = sample_matrix(&cov, seed, k as u64);
        let evs = eigvals_hermitian(h, p.n).ok()?;
        let g = evs
            .iter()
            .map(|&lam| C64::new(p.e - lam, -p.eps).inv())
            .sum::<C64>()
            / p.n as f64;
        Some(g)
    };
    #[cfg(feature = "parallel")]
    let draws: Vec<Option<C64>> = (0..samples).into_par_iter().map(per_sample).collect();
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<Option<C64>> = (0..samples).map(per_sample).collect();
    let kept: Vec<C64> = draws.iter().copied().flatten().collect();
    let dropped = samples - kept.len();
    if kept.is_empty() {
        return Err(Error::non_convergence(
            "stieltjes_mc: eigendecomposition failed on every sample",
        ));
    }
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<C64>() / m;
    let g_stderr = if kept.len() < 2 {
        f64::INFINITY
    } else {
        let (mut vr, mut vi) = (0.0f64, 0.0f64);
        for g in &kept {
            vr += (g.re - mean.re).powi(2);
            vi += (g.im - mean.im).powi(2);
        }
        let denom = m * (m - 1.0);
        (vr / denom).sqrt().max((vi / denom).sqrt())
    };
    Ok(SampleStats { g_mean: mean, g_stderr, samples, seed, dropped })
}

/// Eigenvalue histogram over [-3, 3] with uniform bins, in-range mass
/// normalized to 1.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// bins + 1 uniform edges from -3 to 3.
    pub edges: Vec<f64>,
    /// Mass per bin, summing to 1.
    pub mass: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

pub const HIST_LO: f64 = -3.0;
pub const HIST_HI: f64 = 3.0;

/// Pooled eigenvalue histogram of `samples` draws.
pub fn empirical_dos(p: &ModelParams, samples: usize, bins: usize, seed: u64) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::validation(format!("empirical_dos: bins = {bins} must be >= 10")));
    }
    if samples == 0 {
        return Err(Error::validation("empirical_dos: samples must be >= 1"));
    }
    let cov = build_covariance(p.n, p.w)?;
    let width = (HIST_HI - HIST_LO) / bins as f64;
    let per_sample = |k: usize| -> Result<Vec<u64>> {
        let h = sample_matrix(&cov, seed, k as u64);
        let evs = eigvals_hermitian(h, p.n)?;
        let mut counts = vec![0u64; bins];
        for lam in evs {
            if (HIST_LO..HIST_HI).contains(&lam) {
                let b = (((lam - HIST_LO) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        Ok(counts)
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<Result<Vec<u64>>> = (0..samples).into_par_iter().map(per_sample).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Result<Vec<u64>>> = (0..samples).map(per_sample).collect();
    let mut counts = vec![0u64; bins];
    for part in partials {
        let part = part?;
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::non_convergence("empirical_dos: no eigenvalues landed in [-3, 3]"));
    }
    let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let edges = (0..=bins).map(|i| HIST_LO + i as f64 * width).collect();
    Ok(Histogram { edges, mass, samples, seed })
}

impl Histogram {
    /// Sup over bins of |empirical - semicircle| on the density scale
    /// (bin mass divided by bin width, semicircle bin-averaged the same way).
    pub fn sup_distance_to_semicircle(&self) -> f64 {
        let mut sup = 0.0f64;
        for (i, &m) in self.mass.iter().enumerate() {
            let (lo, hi) = (self.edges[i], self.edges[i + 1]);
            let width = hi - lo;
            let sc = landscape::rho_sc_mass(lo, hi);
            sup = sup.max(((m - sc) / width).abs());
        }
        sup
    }

    /// Total mass in bins fully inside [lo, hi].
    pub fn mass_within(&self, lo: f64, hi: f64) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| self.edges[*i] >= lo && self.edges[i + 1] <= hi)
            .map(|(_, m)| m)
            .sum()
    }
}
