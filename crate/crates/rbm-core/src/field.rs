//! Two-component complex fields on the product grid.
//!
//! A field component is stored as separate real and imaginary planes (structure
//! of arrays) so the hot kernels — banded blurs and pointwise complex
//! multiplies — compile to straight-line FMA loops. Layout is a-major: entry
//! (ia, ib) of a plane lives at index `ia * nb + ib`, so the b axis is
//! contiguous.
//!
//! With the `parallel` feature the row loops fan out over a thread pool; the
//! sequential build runs the identical loop bodies in order. Reductions
//! collect per-row partial sums into an indexed buffer and fold it serially,
//! so results are bit-identical across thread counts and across the two
//! builds.

use crate::grid::Blur1d;
use crate::C64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One complex field on the product grid, split into real/imaginary planes.
#[derive(Debug, Clone)]
pub struct Plane {
    pub na: usize,
    pub nb: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Plane {
    pub fn zeros(na: usize, nb: usize) -> Self {
        Plane { na, nb, re: vec![0.0; na * nb], im: vec![0.0; na * nb] }
    }

    /// Builds the separable field col(a)·row(b).
    pub fn from_separable(col: &[C64], row: &[C64]) -> Self {
        let (na, nb) = (col.len(), row.len());
        let mut p = Plane::zeros(na, nb);
        for_rows(&mut p, |ia, re, im| {
            let c = col[ia];
            for (j, &r) in row.iter().enumerate() {
                let v = c * r;
                re[j] = v.re;
                im[j] = v.im;
            }
        });
        p
    }

    #[inline]
    pub fn at(&self, ia: usize, ib: usize) -> C64 {
        let k = ia * self.nb + ib;
        C64::new(self.re[k], self.im[k])
    }

    #[inline]
    pub fn set(&mut self, ia: usize, ib: usize, v: C64) {
        let k = ia * self.nb + ib;
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    pub fn fill_zero(&mut self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
    }
}

/// Runs `f(ia, re_row, im_row)` over every row of a plane, in parallel when
/// the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn for_rows<F>(p: &mut Plane, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    let nb = p.nb;
    p.re
        .par_chunks_mut(nb)
        .zip_eq(p.im.par_chunks_mut(nb))
        .enumerate()
        .for_each(|(ia, (re, im))| f(ia, re, im));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_rows<F>(p: &mut Plane, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]),
{
    let nb = p.nb;
    p.re
        .chunks_mut(nb)
        .zip(p.im.chunks_mut(nb))
        .enumerate()
        .for_each(|(ia, (re, im))| f(ia, re, im));
}

/// Same as [`for_rows`] but over matching rows of two planes at once.
#[cfg(feature = "parallel")]
pub(crate) fn for_rows2<F>(p: &mut Plane, q: &mut Plane, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64], &mut [f64]) + Sync + Send,
{
    let nb = p.nb;
    p.re
        .par_chunks_mut(nb)
        .zip_eq(p.im.par_chunks_mut(nb))
        .zip_eq(q.re.par_chunks_mut(nb).zip_eq(q.im.par_chunks_mut(nb)))
        .enumerate()
        .for_each(|(ia, ((pre, pim), (qre, qim)))| f(ia, pre, pim, qre, qim));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_rows2<F>(p: &mut Plane, q: &mut Plane, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64], &mut [f64]),
{
    let nb = p.nb;
    p.re
        .chunks_mut(nb)
        .zip(p.im.chunks_mut(nb))
        .zip(q.re.chunks_mut(nb).zip(q.im.chunks_mut(nb)))
        .enumerate()
        .for_each(|(ia, ((pre, pim), (qre, qim)))| f(ia, pre, pim, qre, qim));
}

/// Deterministic parallel reduction: per-row partials are written into an
/// indexed buffer and summed in row order.
#[cfg(feature = "parallel")]
pub(crate) fn sum_rows<F>(na: usize, f: F) -> C64
where
    F: Fn(usize) -> C64 + Sync + Send,
{
    let parts: Vec<C64> = (0..na).into_par_iter().map(f).collect();
    parts.into_iter().sum()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn sum_rows<F>(na: usize, f: F) -> C64
where
    F: Fn(usize) -> C64,
{
    (0..na).map(f).sum()
}

/// Deterministic parallel maximum of per-row values.
#[cfg(feature = "parallel")]
pub(crate) fn max_rows<F>(na: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let parts: Vec<f64> = (0..na).into_par_iter().map(f).collect();
    parts.into_iter().fold(0.0, f64::max)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn max_rows<F>(na: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    (0..na).map(f).fold(0.0, f64::max)
}

/// Rows per block in the tiled blur kernels. Sized so the sliding source
/// band of one column strip stays L2-resident across a block while the tap
/// table is amortized over the whole block. A multiple of [`BLUR_GROUP`] so
/// register groups never straddle a block boundary.
const BLUR_BLOCK_ROWS: usize = 192;
/// Columns per strip in [`blur_cols`]: a tap-radius-tall band of one strip
/// is about 1 MiB, safely inside L2.
const BLUR_COL_STRIP: usize = 512;

/// Outputs per register group in the blocked blur kernels. Eight consecutive
/// outputs share one pass over their common source window, so each loaded
/// source vector feeds sixteen FMAs and the window is streamed once per group
/// instead of once per output.
const BLUR_GROUP: usize = 8;

/// Tap bands of [`BLUR_GROUP`] consecutive blur outputs, zero-padded onto
/// their common source window so all their dot products can share one loop
/// over it. The padding is exact: fma(0, x, acc) = acc, so results match the
/// unpadded sums bit for bit.
struct PaddedBands {
    /// Window length allocated per band row (max over groups).
    cap: usize,
    /// Padded taps: group g, band row i starts at (BLUR_GROUP·g + i)·cap.
    pt: Vec<f64>,
    /// Per group: (first source index of the window, window length).
    meta: Vec<(usize, usize)>,
}

impl PaddedBands {
    fn build(op: &Blur1d) -> Self {
        let groups = op.len() / BLUR_GROUP;
        let mut cap = 0;
        let mut meta = Vec::with_capacity(groups);
        for g in 0..groups {
            let mut lmin = usize::MAX;
            let mut hmax = 0;
            for i in 0..BLUR_GROUP {
                let (lo, t) = op.row(BLUR_GROUP * g + i);
                lmin = lmin.min(lo);
                hmax = hmax.max(lo + t.len());
            }
            meta.push((lmin, hmax - lmin));
            cap = cap.max(hmax - lmin);
        }
        let mut pt = vec![0.0f64; BLUR_GROUP * cap * groups];
        for (g, &(lmin, _)) in meta.iter().enumerate() {
            for i in 0..BLUR_GROUP {
                let (lo, t) = op.row(BLUR_GROUP * g + i);
                let off = (BLUR_GROUP * g + i) * cap + (lo - lmin);
                pt[off..off + t.len()].copy_from_slice(t);
            }
        }
        PaddedBands { cap, pt, meta }
    }

    /// (window start, window length, concatenated padded tap rows) of group g;
    /// row i of the group occupies `blk[i * cap .. i * cap + len]`.
    fn group(&self, g: usize) -> (usize, usize, &[f64]) {
        let (lmin, len) = self.meta[g];
        let base = BLUR_GROUP * g * self.cap;
        (lmin, len, &self.pt[base..base + BLUR_GROUP * self.cap])
    }
}

/// Runs `f(first_row, re_rows, im_rows)` over consecutive blocks of
/// `rows` plane rows, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn for_row_blocks<F>(p: &mut Plane, rows: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    let chunk = rows * p.nb;
    p.re
        .par_chunks_mut(chunk)
        .zip_eq(p.im.par_chunks_mut(chunk))
        .enumerate()
        .for_each(|(blk, (re, im))| f(blk * rows, re, im));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_row_blocks<F>(p: &mut Plane, rows: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]),
{
    let chunk = rows * p.nb;
    p.re
        .chunks_mut(chunk)
        .zip(p.im.chunks_mut(chunk))
        .enumerate()
        .for_each(|(blk, (re, im))| f(blk * rows, re, im));
}

/// Column dot across rows: out[j] = Σ_k tap_k · src[start + k·stride + j]
/// for j < out_re.len(), accumulating in registers eight columns at a time.
fn col_dot_strip(
    taps: &[f64],
    sre: &[f64],
    sim: &[f64],
    start: usize,
    stride: usize,
    out_re: &mut [f64],
    out_im: &mut [f64],
) {
    let cw = out_re.len();
    let mut j = 0;
    while j + 8 <= cw {
        let mut ar = [0.0f64; 8];
        let mut ai = [0.0f64; 8];
        for (k, &t) in taps.iter().enumerate() {
            let b = start + k * stride + j;
            let sr = &sre[b..b + 8];
            let si = &sim[b..b + 8];
            for l in 0..8 {
                ar[l] = sr[l].mul_add(t, ar[l]);
                ai[l] = si[l].mul_add(t, ai[l]);
            }
        }
        out_re[j..j + 8].copy_from_slice(&ar);
        out_im[j..j + 8].copy_from_slice(&ai);
        j += 8;
    }
    while j < cw {
        let mut ar = 0.0;
        let mut ai = 0.0;
        for (k, &t) in taps.iter().enumerate() {
            let b = start + k * stride + j;
            ar = sre[b].mul_add(t, ar);
            ai = sim[b].mul_add(t, ai);
        }
        out_re[j] = ar;
        out_im[j] = ai;
        j += 1;
    }
}

/// Vector inner loop of [`col_dot_strip_x8`]: handles j in multiples of eight
/// and returns the first unhandled column offset. `blk` holds the group's
/// padded tap rows, row i at `blk[i * cap ..]`.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[allow(clippy::too_many_arguments)]
#[inline]
fn col_dot_strip_x8_main(
    blk: &[f64],
    cap: usize,
    len: usize,
    sre: &[f64],
    sim: &[f64],
    start: usize,
    stride: usize,
    cw: usize,
    out_re: &mut [f64],
    out_im: &mut [f64],
    o0: usize,
) -> usize {
    use core::arch::x86_64::{
        _mm512_fmadd_pd, _mm512_loadu_pd, _mm512_set1_pd, _mm512_setzero_pd, _mm512_storeu_pd,
        _mm_prefetch, _MM_HINT_T0,
    };
    if cw < 8 || len == 0 {
        return 0;
    }
    assert_eq!(sim.len(), sre.len());
    assert!(start + (len - 1) * stride + cw <= sre.len());
    assert!(o0 + (BLUR_GROUP - 1) * stride + cw <= out_re.len());
    assert_eq!(out_im.len(), out_re.len());
    assert!(cap >= len && blk.len() >= (BLUR_GROUP - 1) * cap + len);
    // Sound: every eight-wide load and store below stays within the bounds
    // established by the asserts above, since j + 8 <= cw in the loop.
    // The source walks whole rows apart per k step, a stride too long for
    // hardware prefetch to follow, so upcoming rows are prefetched by hand.
    unsafe {
        let mut j = 0;
        while j + 8 <= cw {
            let mut ar = [_mm512_setzero_pd(); BLUR_GROUP];
            let mut ai = [_mm512_setzero_pd(); BLUR_GROUP];
            for k in 0..len {
                let b = start + k * stride + j;
                if k + 4 < len {
                    let p = b + 4 * stride;
                    _mm_prefetch::<_MM_HINT_T0>(sre.as_ptr().add(p) as *const i8);
                    _mm_prefetch::<_MM_HINT_T0>(sim.as_ptr().add(p) as *const i8);
                }
                let sr = _mm512_loadu_pd(sre.as_ptr().add(b));
                let si = _mm512_loadu_pd(sim.as_ptr().add(b));
                for (i, (vr, vi)) in ar.iter_mut().zip(ai.iter_mut()).enumerate() {
                    let tv = _mm512_set1_pd(*blk.get_unchecked(i * cap + k));
                    *vr = _mm512_fmadd_pd(sr, tv, *vr);
                    *vi = _mm512_fmadd_pd(si, tv, *vi);
                }
            }
            for (i, (vr, vi)) in ar.iter().zip(ai.iter()).enumerate() {
                let o = o0 + i * stride + j;
                _mm512_storeu_pd(out_re.as_mut_ptr().add(o), *vr);
                _mm512_storeu_pd(out_im.as_mut_ptr().add(o), *vi);
            }
            j += 8;
        }
        j
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
#[allow(clippy::too_many_arguments)]
#[inline]
fn col_dot_strip_x8_main(
    blk: &[f64],
    cap: usize,
    len: usize,
    sre: &[f64],
    sim: &[f64],
    start: usize,
    stride: usize,
    cw: usize,
    out_re: &mut [f64],
    out_im: &mut [f64],
    o0: usize,
) -> usize {
    let mut j = 0;
    while j + 8 <= cw {
        let mut ar = [[0.0f64; 8]; BLUR_GROUP];
        let mut ai = [[0.0f64; 8]; BLUR_GROUP];
        for k in 0..len {
            let b = start + k * stride + j;
            let sr = &sre[b..b + 8];
            let si = &sim[b..b + 8];
            for i in 0..BLUR_GROUP {
                let tv = blk[i * cap + k];
                for l in 0..8 {
                    ar[i][l] = sr[l].mul_add(tv, ar[i][l]);
                    ai[i][l] = si[l].mul_add(tv, ai[i][l]);
                }
            }
        }
        for i in 0..BLUR_GROUP {
            let o = o0 + i * stride + j;
            out_re[o..o + 8].copy_from_slice(&ar[i]);
            out_im[o..o + 8].copy_from_slice(&ai[i]);
        }
        j += 8;
    }
    j
}

/// Multi-row variant of [`col_dot_strip`]: a group's tap bands are padded onto
/// a shared window, so each loaded source vector feeds one FMA per band row
/// per component. `o0` is the output offset of the first row; the others sit
/// `stride` apart.
#[allow(clippy::too_many_arguments)]
fn col_dot_strip_x8(
    blk: &[f64],
    cap: usize,
    len: usize,
    sre: &[f64],
    sim: &[f64],
    start: usize,
    stride: usize,
    cw: usize,
    out_re: &mut [f64],
    out_im: &mut [f64],
    o0: usize,
) {
    let mut j = col_dot_strip_x8_main(blk, cap, len, sre, sim, start, stride, cw, out_re, out_im, o0);
    while j < cw {
        let mut ar = [0.0f64; BLUR_GROUP];
        let mut ai = [0.0f64; BLUR_GROUP];
        for k in 0..len {
            let b = start + k * stride + j;
            let (sr, si) = (sre[b], sim[b]);
            for i in 0..BLUR_GROUP {
                let tv = blk[i * cap + k];
                ar[i] = sr.mul_add(tv, ar[i]);
                ai[i] = si.mul_add(tv, ai[i]);
            }
        }
        for i in 0..BLUR_GROUP {
            out_re[o0 + i * stride + j] = ar[i];
            out_im[o0 + i * stride + j] = ai[i];
        }
        j += 1;
    }
}

/// Blur along the a axis (across rows): dst[ia] = Σ_k tap_k · src[lo + k].
/// Tiled by row blocks and column strips so the band of source rows feeding
/// one strip stays in L2 as the output row advances; output rows are handled
/// a register group at a time so each source load feeds the whole group.
pub(crate) fn blur_cols(op: &Blur1d, src: &Plane, dst: &mut Plane) {
    debug_assert_eq!(op.len(), src.na);
    let nb = src.nb;
    let bands = PaddedBands::build(op);
    let grouped = bands.meta.len() * BLUR_GROUP;
    for_row_blocks(dst, BLUR_BLOCK_ROWS, |ia0, out_re, out_im| {
        let rows = out_re.len() / nb;
        let full = grouped.saturating_sub(ia0).min(rows);
        let mut col0 = 0;
        while col0 < nb {
            let cw = BLUR_COL_STRIP.min(nb - col0);
            let mut r = 0;
            while r + BLUR_GROUP <= full {
                let (lmin, len, blk) = bands.group((ia0 + r) / BLUR_GROUP);
                col_dot_strip_x8(
                    blk,
                    bands.cap,
                    len,
                    &src.re,
                    &src.im,
                    lmin * nb + col0,
                    nb,
                    cw,
                    out_re,
                    out_im,
                    r * nb + col0,
                );
                r += BLUR_GROUP;
            }
            while r < rows {
                let (lo, taps) = op.row(ia0 + r);
                let o0 = r * nb + col0;
                col_dot_strip(
                    taps,
                    &src.re,
                    &src.im,
                    lo * nb + col0,
                    nb,
                    &mut out_re[o0..o0 + cw],
                    &mut out_im[o0..o0 + cw],
                );
                r += 1;
            }
            col0 += cw;
        }
    });
}

/// Banded dot of `taps` against the matching windows of two source rows.
/// Four fixed accumulator lanes keep the summation order deterministic while
/// letting the reduction vectorize.
#[inline]
fn band_dot2(taps: &[f64], sre: &[f64], sim: &[f64]) -> (f64, f64) {
    let mut ar = [0.0f64; 4];
    let mut ai = [0.0f64; 4];
    let mut tc = taps.chunks_exact(4);
    let mut rc = sre.chunks_exact(4);
    let mut ic = sim.chunks_exact(4);
    for ((t4, r4), i4) in (&mut tc).zip(&mut rc).zip(&mut ic) {
        for l in 0..4 {
            ar[l] = t4[l].mul_add(r4[l], ar[l]);
            ai[l] = t4[l].mul_add(i4[l], ai[l]);
        }
    }
    let mut sr = (ar[0] + ar[2]) + (ar[1] + ar[3]);
    let mut si = (ai[0] + ai[2]) + (ai[1] + ai[3]);
    for ((&t, &r), &i) in tc.remainder().iter().zip(rc.remainder()).zip(ic.remainder()) {
        sr = t.mul_add(r, sr);
        si = t.mul_add(i, si);
    }
    (sr, si)
}

/// Group variant of [`band_dot2`]: a group's padded tap rows (row i of `blk`
/// at `i * cap`) share one source window, so each loaded source vector feeds
/// one FMA per band row per component. Eight fixed accumulator lanes per
/// output keep the summation order deterministic; the explicit-SIMD path
/// reduces its lanes in the same pairwise order as the portable one.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline]
fn band_dot2_x8(blk: &[f64], cap: usize, sre: &[f64], sim: &[f64]) -> ([f64; 8], [f64; 8]) {
    use core::arch::x86_64::{
        _mm512_fmadd_pd, _mm512_loadu_pd, _mm512_reduce_add_pd, _mm512_setzero_pd,
    };
    let len = sre.len();
    assert_eq!(sim.len(), len);
    assert!(cap >= len && blk.len() >= (BLUR_GROUP - 1) * cap + len);
    // Sound: every load below reads eight f64s ending at or before offset
    // i·cap + len of its slice, in bounds by the asserts above.
    unsafe {
        let mut ar = [_mm512_setzero_pd(); BLUR_GROUP];
        let mut ai = [_mm512_setzero_pd(); BLUR_GROUP];
        let mut k = 0;
        while k + 8 <= len {
            let sr = _mm512_loadu_pd(sre.as_ptr().add(k));
            let si = _mm512_loadu_pd(sim.as_ptr().add(k));
            for (i, (vr, vi)) in ar.iter_mut().zip(ai.iter_mut()).enumerate() {
                let c = _mm512_loadu_pd(blk.as_ptr().add(i * cap + k));
                *vr = _mm512_fmadd_pd(c, sr, *vr);
                *vi = _mm512_fmadd_pd(c, si, *vi);
            }
            k += 8;
        }
        let mut out_r = [0.0f64; BLUR_GROUP];
        let mut out_i = [0.0f64; BLUR_GROUP];
        for i in 0..BLUR_GROUP {
            out_r[i] = _mm512_reduce_add_pd(ar[i]);
            out_i[i] = _mm512_reduce_add_pd(ai[i]);
        }
        while k < len {
            let sr = sre[k];
            let si = sim[k];
            for i in 0..BLUR_GROUP {
                let tv = blk[i * cap + k];
                out_r[i] = tv.mul_add(sr, out_r[i]);
                out_i[i] = tv.mul_add(si, out_i[i]);
            }
            k += 1;
        }
        (out_r, out_i)
    }
}

#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
#[inline]
fn band_dot2_x8(blk: &[f64], cap: usize, sre: &[f64], sim: &[f64]) -> ([f64; 8], [f64; 8]) {
    let len = sre.len();
    assert_eq!(sim.len(), len);
    assert!(cap >= len && blk.len() >= (BLUR_GROUP - 1) * cap + len);
    let mut ar = [[0.0f64; 8]; BLUR_GROUP];
    let mut ai = [[0.0f64; 8]; BLUR_GROUP];
    let mut k = 0;
    while k + 8 <= len {
        let sr = &sre[k..k + 8];
        let si = &sim[k..k + 8];
        for i in 0..BLUR_GROUP {
            let c = &blk[i * cap + k..i * cap + k + 8];
            for l in 0..8 {
                ar[i][l] = c[l].mul_add(sr[l], ar[i][l]);
                ai[i][l] = c[l].mul_add(si[l], ai[i][l]);
            }
        }
        k += 8;
    }
    let mut out_r = [0.0f64; BLUR_GROUP];
    let mut out_i = [0.0f64; BLUR_GROUP];
    for i in 0..BLUR_GROUP {
        let r = &ar[i];
        let m = &ai[i];
        out_r[i] = ((r[0] + r[4]) + (r[2] + r[6])) + ((r[1] + r[5]) + (r[3] + r[7]));
        out_i[i] = ((m[0] + m[4]) + (m[2] + m[6])) + ((m[1] + m[5]) + (m[3] + m[7]));
    }
    while k < len {
        let sr = sre[k];
        let si = sim[k];
        for i in 0..BLUR_GROUP {
            let tv = blk[i * cap + k];
            out_r[i] = tv.mul_add(sr, out_r[i]);
            out_i[i] = tv.mul_add(si, out_i[i]);
        }
        k += 1;
    }
    (out_r, out_i)
}

/// A separable complex field row(a)·col(b), split into parts: the form the
/// fused post-multiply in [`blur_rows`] consumes.
pub(crate) struct SepScale<'a> {
    pub row_re: &'a [f64],
    pub row_im: &'a [f64],
    pub col_re: &'a [f64],
    pub col_im: &'a [f64],
}

impl SepScale<'_> {
    /// Scales (vr, vi) by row factor (cr, ci) times col factor at j, in the
    /// same two-stage order as a standalone separable multiply pass.
    #[inline]
    fn scale(&self, cr: f64, ci: f64, j: usize, vr: f64, vi: f64) -> (f64, f64) {
        let (fr, fi) = (self.col_re[j], self.col_im[j]);
        let tr = vr * fr - vi * fi;
        let ti = vr * fi + vi * fr;
        (cr * tr - ci * ti, cr * ti + ci * tr)
    }
}

/// Blur along the b axis (within each row): dst[·][ib] = Σ taps · src[·][band],
/// optionally times a separable field at the store (dst = scale ∘ blur(src)).
/// Tiled by row blocks with the output-column loop outermost, so one group's
/// tap rows stay L1-resident across the whole block while its sliding source
/// band stays in L2; outputs are produced a register group at a time from
/// their shared padded source window.
/// Applies the separable store factor to one eight-wide output group and
/// stores it: the same multiply/add ordering as `SepScale::scale`, lane by
/// lane, so the vector path stays bit-identical to the scalar one.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline]
fn scale_store_x8(
    sc: &SepScale<'_>,
    cr: f64,
    ci: f64,
    col0: usize,
    vr: &[f64; BLUR_GROUP],
    vi: &[f64; BLUR_GROUP],
    out_re: &mut [f64],
    out_im: &mut [f64],
) {
    use core::arch::x86_64::{
        _mm512_add_pd, _mm512_loadu_pd, _mm512_mul_pd, _mm512_set1_pd, _mm512_storeu_pd,
        _mm512_sub_pd,
    };
    assert!(col0 + BLUR_GROUP <= sc.col_re.len() && col0 + BLUR_GROUP <= sc.col_im.len());
    assert!(out_re.len() >= BLUR_GROUP && out_im.len() >= BLUR_GROUP);
    // Sound: the asserts above cover every eight-wide load and store below.
    unsafe {
        let fr = _mm512_loadu_pd(sc.col_re.as_ptr().add(col0));
        let fi = _mm512_loadu_pd(sc.col_im.as_ptr().add(col0));
        let av = _mm512_loadu_pd(vr.as_ptr());
        let bv = _mm512_loadu_pd(vi.as_ptr());
        let tr = _mm512_sub_pd(_mm512_mul_pd(av, fr), _mm512_mul_pd(bv, fi));
        let ti = _mm512_add_pd(_mm512_mul_pd(av, fi), _mm512_mul_pd(bv, fr));
        let crv = _mm512_set1_pd(cr);
        let civ = _mm512_set1_pd(ci);
        let or = _mm512_sub_pd(_mm512_mul_pd(crv, tr), _mm512_mul_pd(civ, ti));
        let oi = _mm512_add_pd(_mm512_mul_pd(crv, ti), _mm512_mul_pd(civ, tr));
        _mm512_storeu_pd(out_re.as_mut_ptr(), or);
        _mm512_storeu_pd(out_im.as_mut_ptr(), oi);
    }
}

/// Stores one eight-wide output group, applying the separable factor first
/// when present.
#[inline]
fn store_group(
    scale: Option<&SepScale>,
    ia: usize,
    ib: usize,
    orv: [f64; BLUR_GROUP],
    oiv: [f64; BLUR_GROUP],
    out_re: &mut [f64],
    out_im: &mut [f64],
) {
    match scale {
        Some(sc) => {
            let (cr, ci) = (sc.row_re[ia], sc.row_im[ia]);
            #[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
            scale_store_x8(sc, cr, ci, ib, &orv, &oiv, out_re, out_im);
            #[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
            {
                let (mut vr, mut vi) = (orv, oiv);
                for i in 0..BLUR_GROUP {
                    (vr[i], vi[i]) = sc.scale(cr, ci, ib + i, vr[i], vi[i]);
                }
                out_re[..BLUR_GROUP].copy_from_slice(&vr);
                out_im[..BLUR_GROUP].copy_from_slice(&vi);
            }
        }
        None => {
            out_re[..BLUR_GROUP].copy_from_slice(&orv);
            out_im[..BLUR_GROUP].copy_from_slice(&oiv);
        }
    }
}

/// Prefetches the `len`-long windows at offset `b` of both planes into L1.
/// Consecutive windows sit a full row apart, a stride long enough to cross
/// page boundaries and defeat hardware prefetch, so the next row's window is
/// requested by hand while the current one is being reduced.
#[inline]
fn prefetch_span(sre: &[f64], sim: &[f64], b: usize, len: usize) {
    #[cfg(target_arch = "x86_64")]
    {
        use core::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let end = (b + len).min(sre.len()).min(sim.len());
        let mut p = b;
        while p < end {
            // Sound: p stays below both slice lengths, and prefetch performs
            // no architecturally visible memory access in any case.
            unsafe {
                _mm_prefetch::<_MM_HINT_T0>(sre.as_ptr().add(p) as *const i8);
                _mm_prefetch::<_MM_HINT_T0>(sim.as_ptr().add(p) as *const i8);
            }
            p += 8;
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = (sre, sim, b, len);
}

pub(crate) fn blur_rows(op: &Blur1d, src: &Plane, dst: &mut Plane, scale: Option<&SepScale>) {
    debug_assert_eq!(op.len(), src.nb);
    let nb = src.nb;
    let bands = PaddedBands::build(op);
    let grouped = bands.meta.len() * BLUR_GROUP;
    for_row_blocks(dst, BLUR_BLOCK_ROWS, |ia0, out_re, out_im| {
        let rows = out_re.len() / nb;
        let s0 = ia0 * nb;
        let sre = &src.re[s0..s0 + rows * nb];
        let sim = &src.im[s0..s0 + rows * nb];
        let mut ib = 0;
        while ib < grouped {
            let (lmin, len, blk) = bands.group(ib / BLUR_GROUP);
            for r in 0..rows {
                let rb = r * nb;
                let b = rb + lmin;
                if r + 1 < rows {
                    prefetch_span(sre, sim, b + nb, len);
                }
                let (orv, oiv) =
                    band_dot2_x8(blk, bands.cap, &sre[b..b + len], &sim[b..b + len]);
                store_group(
                    scale,
                    ia0 + r,
                    ib,
                    orv,
                    oiv,
                    &mut out_re[rb + ib..rb + ib + BLUR_GROUP],
                    &mut out_im[rb + ib..rb + ib + BLUR_GROUP],
                );
            }
            ib += BLUR_GROUP;
        }
        while ib < nb {
            let (lo, taps) = op.row(ib);
            let tl = taps.len();
            for r in 0..rows {
                let rb = r * nb;
                let b = rb + lo;
                let (mut ar, mut ai) = band_dot2(taps, &sre[b..b + tl], &sim[b..b + tl]);
                if let Some(sc) = scale {
                    let (cr, ci) = (sc.row_re[ia0 + r], sc.row_im[ia0 + r]);
                    (ar, ai) = sc.scale(cr, ci, ib, ar, ai);
                }
                out_re[rb + ib] = ar;
                out_im[rb + ib] = ai;
            }
            ib += 1;
        }
    });
}

/// A two-component superfield: the state the transfer operator acts on.
#[derive(Debug, Clone)]
pub struct State {
    pub c1: Plane,
    pub c2: Plane,
}

impl State {
    pub fn zeros(na: usize, nb: usize) -> Self {
        State { c1: Plane::zeros(na, nb), c2: Plane::zeros(na, nb) }
    }

    pub fn na(&self) -> usize {
        self.c1.na
    }

    pub fn nb(&self) -> usize {
        self.c1.nb
    }

    pub fn assign_from(&mut self, other: &State) {
        self.c1.re.copy_from_slice(&other.c1.re);
        self.c1.im.copy_from_slice(&other.c1.im);
        self.c2.re.copy_from_slice(&other.c2.re);
        self.c2.im.copy_from_slice(&other.c2.im);
    }

    /// self *= c, componentwise.
    pub fn scale(&mut self, c: C64) {
        for p in [&mut self.c1, &mut self.c2] {
            for_rows(p, |_, re, im| {
                for j in 0..re.len() {
                    let (r, i) = (re[j], im[j]);
                    re[j] = c.re * r - c.im * i;
                    im[j] = c.re * i + c.im * r;
                }
            });
        }
    }

    /// self += alpha · other.
    pub fn axpy(&mut self, alpha: C64, other: &State) {
        let nb = self.nb();
        for (p, q) in [(&mut self.c1, &other.c1), (&mut self.c2, &other.c2)] {
            for_rows(p, |ia, re, im| {
                let base = ia * nb;
                let ore = &q.re[base..base + nb];
                let oim = &q.im[base..base + nb];
                for j in 0..nb {
                    re[j] += alpha.re * ore[j] - alpha.im * oim[j];
                    im[j] += alpha.re * oim[j] + alpha.im * ore[j];
                }
            });
        }
    }

    /// Largest |value| over both components (max of |re|, |im| per entry).
    pub fn max_abs(&self) -> f64 {
        let nb = self.nb();
        max_rows(self.na(), |ia| {
            let base = ia * self.nb();
            let mut m = 0.0f64;
            for p in [&self.c1, &self.c2] {
                for j in base..base + nb {
                    m = m.max(p.re[j].abs()).max(p.im[j].abs());
                }
            }
            m
        })
    }
}

/// Quadrature-weighted bilinear pairing Σ_c Σ w_a w_b u_c v_c, no conjugation.
pub(crate) fn bilinear_dot(wa: &[f64], wb: &[f64], u: &State, v: &State) -> C64 {
    let nb = u.nb();
    sum_rows(u.na(), |ia| {
        let base = ia * nb;
        let mut acc = C64::default();
        for (up, vp) in [(&u.c1, &v.c1), (&u.c2, &v.c2)] {
            let (ur, ui) = (&up.re[base..base + nb], &up.im[base..base + nb]);
            let (vr, vi) = (&vp.re[base..base + nb], &vp.im[base..base + nb]);
            let mut ar = 0.0;
            let mut ai = 0.0;
            for j in 0..nb {
                let w = wb[j];
                ar += w * (ur[j] * vr[j] - ui[j] * vi[j]);
                ai += w * (ur[j] * vi[j] + ui[j] * vr[j]);
            }
            acc += C64::new(ar, ai);
        }
        wa[ia] * acc
    })
}

/// Quadrature-weighted Hermitian inner product Σ_c Σ w_a w_b conj(u_c) v_c,
/// conjugate-linear in the first argument.
pub(crate) fn herm_dot(wa: &[f64], wb: &[f64], u: &State, v: &State) -> C64 {
    let nb = u.nb();
    sum_rows(u.na(), |ia| {
        let base = ia * nb;
        let mut acc = C64::default();
        for (up, vp) in [(&u.c1, &v.c1), (&u.c2, &v.c2)] {
            let (ur, ui) = (&up.re[base..base + nb], &up.im[base..base + nb]);
            let (vr, vi) = (&vp.re[base..base + nb], &vp.im[base..base + nb]);
            let mut ar = 0.0;
            let mut ai = 0.0;
            for j in 0..nb {
                let w = wb[j];
                ar += w * (ur[j] * vr[j] + ui[j] * vi[j]);
                ai += w * (ur[j] * vi[j] - ui[j] * vr[j]);
            }
            acc += C64::new(ar, ai);
        }
        wa[ia] * acc
    })
}

/// √⟨u, u⟩ under the weighted Hermitian product.
pub(crate) fn herm_norm(wa: &[f64], wb: &[f64], u: &State) -> f64 {
    herm_dot(wa, wb, u, u).re.max(0.0).sqrt()
}
