//! Operator algebra and end-to-end identities of the transfer evaluation:
//! sign calibration, adjointness, renormalization invariance, strategy
//! equivalence, and stability under grid refinement.

use num_complex::Complex64 as C64;
use rbm_core::field::State;
use rbm_core::grid::{build_grid, GridOpts};
use rbm_core::params::ModelParams;
use rbm_core::spectral::{LinearOp, TransferOp};
use rbm_core::transfer::{dos, normalization, normalization_sweep, DosOpts, DosStrategy, Transfer};

fn quick_grid(e: f64, w: f64) -> rbm_core::grid::Grid2D {
    build_grid(e, w, &GridOpts::quick()).expect("grid build")
}

fn random_state(g: &rbm_core::grid::Grid2D, seed: u64) -> State {
    TransferOp::new(g).random_start(seed)
}

#[test]
fn start_state_puts_the_weight_in_component_two() {
    let g = quick_grid(1.0, 4.0);
    let tr = Transfer::new(&g);
    let s = tr.s0();
    let c1_mass: f64 = s.c1.re.iter().chain(&s.c1.im).map(|v| v.abs()).sum();
    assert_eq!(c1_mass, 0.0);
    let (i, j) = (g.na() / 2, g.nb() / 2);
    assert!((s.c2.at(i, j) - g.f_at(i, j)).norm() < 1e-15);
}

#[test]
fn partition_sum_is_plus_one_with_the_calibrated_sign() {
    // The global sign is the one free convention; +1 (not -1) at n = 1 pins
    // it, and the identity then holds at every n.
    let g = quick_grid(1.0, 4.0);
    for n in [1usize, 2, 5, 16] {
        let p = ModelParams::new(1.0, 4.0, n, 0.1).unwrap();
        let z = normalization(&p, &g).expect("normalization");
        assert!(
            (z - 1.0).norm() < 1e-6,
            "Z(n={n}) = {z}; sign or normalization drift"
        );
    }
}

#[test]
fn partition_sum_is_stable_across_energies() {
    for &e in &[0.5, 1.0, 1.5, -1.0] {
        let g = quick_grid(e, 4.0);
        let p = ModelParams::new(e, 4.0, 1, 0.1).unwrap();
        let z = normalization(&p, &g).expect("normalization");
        assert!((z - 1.0).norm() < 1e-5, "Z at E={e}: {z}");
    }
}

#[test]
fn sweep_readouts_match_individual_runs() {
    let g = quick_grid(1.0, 4.0);
    let p = ModelParams::new(1.0, 4.0, 7, 0.1).unwrap();
    let zs = normalization_sweep(&p, &g, &[3, 7]).expect("sweep");
    for (n, z) in [(3usize, zs[0]), (7, zs[1])] {
        let pn = ModelParams::new(1.0, 4.0, n, 0.1).unwrap();
        let want = normalization(&pn, &g).unwrap();
        assert!((z - want).norm() < 1e-13, "sweep vs single at n={n}");
    }
}

#[test]
fn mixing_matrix_acts_pointwise_with_the_tabulated_l() {
    let g = quick_grid(1.0, 6.0);
    let tr = Transfer::new(&g);
    let w = g.w;
    let (i, j) = (g.na() / 3, 2 * g.nb() / 3);
    let l = g.l_at(i, j);
    for (c1, c2) in [(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (C64::new(0.3, -0.2), C64::new(-1.0, 0.5))] {
        let mut s = State::zeros(g.na(), g.nb());
        s.c1.set(i, j, c1);
        s.c2.set(i, j, c2);
        tr.apply_s(&mut s);
        let want1 = c1 - l / w * c2;
        let want2 = -c1 / w + (1.0 + l / (w * w)) * c2;
        assert!((s.c1.at(i, j) - want1).norm() < 1e-14);
        assert!((s.c2.at(i, j) - want2).norm() < 1e-14);
        // Other entries untouched: the matrix is pointwise.
        assert!(s.c1.at(i + 1, j).norm() == 0.0 && s.c2.at(i, j + 1).norm() == 0.0);
    }
}

#[test]
fn mixing_matrix_degenerates_where_l_vanishes() {
    // Near (a_-, b_s) the coupling L is ~0 and S must act as
    // [[1, 0], [-1/W, 1]].
    let (e, w) = (1.0, 8.0);
    let g = quick_grid(e, w);
    let s = rbm_core::landscape::saddle_data(e, w);
    let i = (0..g.na()).min_by(|&x, &y| {
        (g.axis_a.nodes[x] - s.a_minus)
            .abs()
            .partial_cmp(&(g.axis_a.nodes[y] - s.a_minus).abs())
            .unwrap()
    }).unwrap();
    let j = (0..g.nb()).min_by(|&x, &y| {
        (g.axis_b.nodes[x] - s.b_s)
            .abs()
            .partial_cmp(&(g.axis_b.nodes[y] - s.b_s).abs())
            .unwrap()
    }).unwrap();
    let l = g.l_at(i, j).norm();
    assert!(l < 0.05, "grid resolves the zero of L: |L| = {l}");
    let tr = Transfer::new(&g);
    let mut st = State::zeros(g.na(), g.nb());
    st.c1.set(i, j, C64::new(1.0, 0.0));
    tr.apply_s(&mut st);
    assert!((st.c1.at(i, j) - 1.0).norm() < 0.05 / w);
    assert!((st.c2.at(i, j) + 1.0 / w).norm() < 1e-14);
}

#[test]
fn apply_is_linear() {
    let g = quick_grid(1.0, 4.0);
    let tr = Transfer::new(&g);
    let mut ws = tr.workspace();
    let u = random_state(&g, 1);
    let v = random_state(&g, 2);
    let alpha = C64::new(0.7, -1.3);
    let mut lin = u.clone();
    lin.scale(alpha);
    lin.axpy(C64::new(1.0, 0.0), &v);
    tr.apply(&mut lin, &mut ws);
    let mut ku = u.clone();
    tr.apply(&mut ku, &mut ws);
    let mut kv = v.clone();
    tr.apply(&mut kv, &mut ws);
    let mut want = ku;
    want.scale(alpha);
    want.axpy(C64::new(1.0, 0.0), &kv);
    want.axpy(C64::new(-1.0, 0.0), &lin);
    assert!(want.max_abs() < 1e-12 * lin.max_abs().max(1.0));
}

#[test]
fn transpose_is_the_bilinear_adjoint() {
    let g = quick_grid(1.0, 4.0);
    let tr = Transfer::new(&g);
    let mut ws = tr.workspace();
    for seed in 0..5u64 {
        let u = random_state(&g, 10 + seed);
        let v = random_state(&g, 20 + seed);
        let mut kv = v.clone();
        tr.apply(&mut kv, &mut ws);
        let mut ktu = u.clone();
        tr.apply_t(&mut ktu, &mut ws);
        let lhs = tr.pair(&ktu, &v);
        let rhs = tr.pair(&u, &kv);
        assert!(
            (lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0),
            "adjoint identity (seed {seed}): {lhs} vs {rhs}"
        );
    }
}

#[test]
fn apply_respects_the_norm_growth_bound() {
    let g = quick_grid(1.0, 4.0);
    let tr = Transfer::new(&g);
    let mut ws = tr.workspace();
    let bound = tr.norm_growth_bound();
    assert!(bound < 2.5, "bound should be 1 + O(1/W): {bound}");
    for seed in 0..3u64 {
        let s = random_state(&g, 30 + seed);
        let before = tr.norm(&s);
        let mut ks = s.clone();
        tr.apply(&mut ks, &mut ws);
        assert!(tr.norm(&ks) <= bound * before * (1.0 + 1e-12), "seed {seed}");
    }
}

#[test]
fn smoothing_keeps_the_peak_at_the_saddle() {
    let (e, w) = (1.0, 8.0);
    let g = quick_grid(e, w);
    let s = rbm_core::landscape::saddle_data(e, w);
    let tr = Transfer::new(&g);
    let mut ws = tr.workspace();
    let mut st = State::zeros(g.na(), g.nb());
    for i in 0..g.na() {
        for j in 0..g.nb() {
            let da = g.axis_a.nodes[i] - s.a_plus;
            let db = g.axis_b.nodes[j] - s.b_s;
            st.c1.set(i, j, C64::new((-200.0 * (da * da + db * db)).exp(), 0.0));
        }
    }
    tr.apply_kb(&mut st, &mut ws);
    let mut best = (0usize, 0usize, 0.0f64);
    for i in 0..g.na() {
        for j in 0..g.nb() {
            let v = st.c1.at(i, j).norm();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    let (i, j, _) = best;
    let cell_a = g.axis_a.nodes[i.min(g.na() - 2) + 1] - g.axis_a.nodes[i.min(g.na() - 2)];
    let cell_b = g.axis_b.nodes[j.min(g.nb() - 2) + 1] - g.axis_b.nodes[j.min(g.nb() - 2)];
    assert!(
        (g.axis_a.nodes[i] - s.a_plus).abs() <= 1.5 * cell_a.max(1.0 / (4.0 * w)),
        "peak drifted along a: {} vs {}",
        g.axis_a.nodes[i],
        s.a_plus
    );
    assert!(
        (g.axis_b.nodes[j] - s.b_s).abs() <= 1.5 * cell_b.max(1.0 / (4.0 * w)),
        "peak drifted along b: {} vs {}",
        g.axis_b.nodes[j],
        s.b_s
    );
}

#[test]
fn renormalized_sweeps_reproduce_unrenormalized_results() {
    let g = quick_grid(1.0, 4.0);
    let p = ModelParams::new(1.0, 4.0, 12, 0.1).unwrap();
    let base = dos(&p, &g, &DosOpts::default()).expect("dos");
    let forced = dos(
        &p,
        &g,
        &DosOpts { renorm_limit: 2.0, ..DosOpts::default() },
    )
    .expect("dos with forced renormalization");
    let rel = (base.g_n_normalized - forced.g_n_normalized).norm() / base.g_n_normalized.norm();
    assert!(rel < 1e-12, "renormalization changed the value: {rel:.2e}");
    assert!((base.z - forced.z).norm() < 1e-12 * base.z.norm());
}

#[test]
fn both_sweep_strategies_agree() {
    let g = quick_grid(1.0, 4.0);
    let p = ModelParams::new(1.0, 4.0, 10, 0.1).unwrap();
    let fp = dos(
        &p,
        &g,
        &DosOpts { strategy: DosStrategy::ForwardPair, ..DosOpts::default() },
    )
    .expect("forward-pair");
    let ck = dos(
        &p,
        &g,
        &DosOpts { strategy: DosStrategy::Checkpointed, ..DosOpts::default() },
    )
    .expect("checkpointed");
    let rel = (fp.g_n - ck.g_n).norm() / fp.g_n.norm().max(1e-30);
    assert!(rel < 1e-11, "strategies disagree: {rel:.2e}");
    assert!((fp.z - ck.z).norm() < 1e-11 * fp.z.norm());
}

#[test]
fn dos_reports_its_memory_needs_when_over_budget() {
    let g = quick_grid(1.0, 4.0);
    let p = ModelParams::new(1.0, 4.0, 64, 0.1).unwrap();
    let err = dos(&p, &g, &DosOpts { mem_budget: 1024, ..DosOpts::default() })
        .unwrap_err()
        .to_string();
    assert!(err.contains("MiB"), "budget diagnostics: {err}");
}

#[test]
fn spectral_density_is_positive_in_the_window() {
    for &e in &[0.3, 1.0, 1.7] {
        let g = quick_grid(e, 4.0);
        let p = ModelParams::new(e, 4.0, 16, 0.1).unwrap();
        let d = dos(&p, &g, &DosOpts::default()).expect("dos");
        assert!(
            d.g_n_normalized.im > 0.0,
            "Im g_n at E={e}: {}",
            d.g_n_normalized.im
        );
        assert!((d.g_sc - rbm_core::landscape::g_sc(e)).norm() < 1e-15);
        assert_eq!(d.grid_fingerprint, g.fingerprint);
    }
}

#[test]
fn dos_is_stable_under_grid_refinement() {
    let p = ModelParams::new(1.0, 8.0, 64, 0.1).unwrap();
    let g6 = build_grid(1.0, 8.0, &GridOpts::default()).expect("nu=6 grid");
    let g8 = build_grid(1.0, 8.0, &GridOpts { nu: 8.0, ..GridOpts::default() }).expect("nu=8 grid");
    let d6 = dos(&p, &g6, &DosOpts::default()).expect("dos nu=6");
    let d8 = dos(&p, &g8, &DosOpts::default()).expect("dos nu=8");
    let dev = (d6.g_n_normalized - d8.g_n_normalized).norm();
    assert!(dev < 1e-5, "refinement moved g_n by {dev:.2e}");
}

#[test]
fn dos_rejects_mismatched_grid_energy() {
    let g = quick_grid(1.0, 4.0);
    let p = ModelParams::new(1.5, 4.0, 4, 0.1).unwrap();
    assert!(dos(&p, &g, &DosOpts::default()).is_err());
    let p2 = ModelParams::new(1.0, 8.0, 4, 0.1).unwrap();
    assert!(normalization(&p2, &g).is_err());
}
