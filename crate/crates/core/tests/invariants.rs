//! Conservation laws, symmetries and structural properties across modules.

use proptest::prelude::*;
use spinlens::lattice::{build_couplings, build_lattice, CouplingModel};
use spinlens::lens::{
    optimize_lens, potential_profile, v_bo, FocusSetup, LensDesign, LensFamily, OptimizeOptions,
};
use spinlens::manybody::{
    build_mb_hamiltonian, density_profile, enumerate_basis, evolve_mb, pair_distance_histogram,
    symmetric_initial_state, Interaction, ManyBodyState,
};
use spinlens::propagator::{expectation, Hamiltonian};
use spinlens::singlex::{evolve, excitation_probability, gaussian_packet, SpinWaveState};
use spinlens::C64;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn norm_and_energy_are_conserved(
        n in 8usize..60,
        alpha in 2.0f64..10.0,
        v in 1e-6f64..0.05,
        sigma in 1.5f64..6.0,
        t in 0.0f64..80.0,
        exp in 8i32..13,
    ) {
        let tol = 10f64.powi(-exp);
        let table = build_lattice(&[n], 1.0).unwrap();
        let c = (n as f64 - 1.0) / 2.0;
        let lens = potential_profile(&LensDesign::thick(vec![v], vec![c]), &table).unwrap();
        let h = build_couplings(&table, &CouplingModel::PowerLaw { j0: 1.0, alpha, cutoff: 20.0 }, &lens).unwrap();
        let s = gaussian_packet(&table, sigma, &[c - 1.0], &[0.7]).unwrap();
        let e0 = expectation(&h, s.amplitudes());
        let out = evolve(&h, &s, t, tol).unwrap();
        let (lo, hi) = h.spectral_bounds().unwrap();
        let hnorm = lo.abs().max(hi.abs());
        prop_assert!((1.0 - out.norm_sqr()).abs() <= 10.0 * tol);
        prop_assert!((expectation(&h, out.amplitudes()) - e0).abs() <= 10.0 * tol * hnorm);
    }

    #[test]
    fn many_body_norm_and_energy(n in 6usize..16, jz in 0.0f64..200.0, t in 0.0f64..30.0) {
        let tol = 1e-10;
        let table = build_lattice(&[n], 1.0).unwrap();
        let h = build_couplings(&table, &CouplingModel::nearest_neighbor(), &vec![0.0; n]).unwrap();
        let basis = enumerate_basis(n, 2).unwrap();
        let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(jz)).unwrap();
        let single = gaussian_packet(&table, 2.0, &[(n as f64 - 1.0) / 2.0], &[]).unwrap();
        let s = symmetric_initial_state(&single, &basis).unwrap();
        let e0 = expectation(&op, s.amplitudes());
        let out = evolve_mb(&op, &s, t, tol).unwrap();
        let (lo, hi) = op.spectral_bounds().unwrap();
        prop_assert!((1.0 - out.norm_sqr()).abs() <= 10.0 * tol);
        prop_assert!((expectation(&op, out.amplitudes()) - e0).abs() <= 10.0 * tol * lo.abs().max(hi.abs()));
    }

    #[test]
    fn single_focus_profiles_are_even(
        n in 5usize..40,
        c2 in 1e-4f64..1e-1,
        c4 in -1e-5f64..1e-5,
        c6 in -1e-8f64..1e-8,
    ) {
        let table = build_lattice(&[2 * n + 1], 1.0).unwrap();
        let v = potential_profile(&LensDesign::thick(vec![c2, c4, c6], vec![n as f64]), &table).unwrap();
        for d in 0..=n {
            prop_assert_eq!(v[n + d], v[n - d]);
        }
    }
}

#[test]
fn single_body_parity_about_focus() {
    for dims in [vec![41usize], vec![21, 21]] {
        let table = build_lattice(&dims, 1.0).unwrap();
        let focus: Vec<f64> = dims.iter().map(|&l| (l as f64 - 1.0) / 2.0).collect();
        let lens = potential_profile(&LensDesign::thick(vec![0.004, 2e-6], focus.clone()), &table)
            .unwrap();
        let h = build_couplings(
            &table,
            &CouplingModel::PowerLaw {
                j0: 1.0,
                alpha: 6.0,
                cutoff: 20.0,
            },
            &lens,
        )
        .unwrap();
        let mut s = gaussian_packet(&table, 4.0, &focus, &[]).unwrap();
        let n = table.len();
        for _ in 0..10 {
            s = evolve(&h, &s, 4.3, 1e-12).unwrap();
            let p = excitation_probability(&s);
            // Row-major labels: point reflection through the center is i -> n-1-i.
            for i in 0..n {
                assert!((p[i] - p[n - 1 - i]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn many_body_parity_about_focus() {
    let n = 21;
    let table = build_lattice(&[n], 1.0).unwrap();
    let lens = potential_profile(&LensDesign::thick(vec![0.01], vec![10.0]), &table).unwrap();
    let h = build_couplings(&table, &CouplingModel::nearest_neighbor(), &lens).unwrap();
    for nu in [2, 3] {
        let basis = enumerate_basis(n, nu).unwrap();
        let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(300.0)).unwrap();
        let single = gaussian_packet(&table, 3.0, &[10.0], &[]).unwrap();
        let mut s = symmetric_initial_state(&single, &basis).unwrap();
        for _ in 0..5 {
            s = evolve_mb(&op, &s, 3.1, 1e-12).unwrap();
            let p = density_profile(&s, &basis, n);
            for i in 0..n {
                assert!((p[i] - p[n - 1 - i]).abs() < 1e-9, "nu={nu}");
            }
            assert!((p.iter().sum::<f64>() - nu as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn non_interacting_separated_packets_factorize() {
    let n = 60;
    let table = build_lattice(&[n], 1.0).unwrap();
    let h = build_couplings(&table, &CouplingModel::nearest_neighbor(), &vec![0.0; n]).unwrap();
    let a = gaussian_packet(&table, 2.0, &[15.0], &[0.5]).unwrap();
    let b = gaussian_packet(&table, 2.0, &[44.0], &[-0.3]).unwrap();
    let basis = enumerate_basis(n, 2).unwrap();
    let amps: Vec<C64> = (0..basis.len())
        .map(|i| {
            let st = basis.state(i);
            let (m, k) = (st[0], st[1]);
            a.amplitudes()[m] * b.amplitudes()[k] + a.amplitudes()[k] * b.amplitudes()[m]
        })
        .collect();
    let s = ManyBodyState::from_amplitudes(&basis, amps).unwrap();
    let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(0.0)).unwrap();
    for t in [1.0, 2.5, 4.0] {
        let p2 = density_profile(&evolve_mb(&op, &s, t, 1e-12).unwrap(), &basis, n);
        let pa = excitation_probability(&evolve(&h, &a, t, 1e-12).unwrap());
        let pb = excitation_probability(&evolve(&h, &b, t, 1e-12).unwrap());
        for i in 0..n {
            assert!((p2[i] - pa[i] - pb[i]).abs() < 1e-6, "t={t} site {i}");
        }
    }
}

/// `σ_f(v₀)` falls, bottoms out below `v_BO`, and rises again.
#[test]
fn focusing_breaks_down_above_bloch_threshold() {
    let sigma0 = 20.0;
    let l = 241;
    let table = build_lattice(&[l], 1.0).unwrap();
    let couplings =
        build_couplings(&table, &CouplingModel::nearest_neighbor(), &vec![0.0; l]).unwrap();
    let initial: SpinWaveState = gaussian_packet(&table, sigma0, &[120.0], &[]).unwrap();
    let setup = FocusSetup {
        table,
        couplings,
        initial,
        focus: vec![120.0],
        sigma0,
        tol: 1e-10,
    };
    let vb = v_bo(sigma0, 1.0, 1.0);
    let scan: Vec<(f64, f64)> = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0]
        .iter()
        .map(|m| {
            let w = setup
                .focus_with(&LensDesign::thick(vec![m * vb], vec![120.0]), 120)
                .unwrap()
                .width;
            (m * vb, w)
        })
        .collect();
    let (v_min, w_min) =
        scan.iter()
            .cloned()
            .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    assert!(v_min < vb);
    assert!(scan[0].1 > w_min && scan.last().unwrap().1 > w_min);
}

/// Strong interactions keep two excitations apart through the focus.
#[test]
fn blockade_suppresses_close_pairs_at_focus() {
    let (n, sigma0) = (101, 20.0);
    let c = 50.0;
    let table = build_lattice(&[n], 1.0).unwrap();
    let couplings =
        build_couplings(&table, &CouplingModel::nearest_neighbor(), &vec![0.0; n]).unwrap();
    let initial = gaussian_packet(&table, sigma0, &[c], &[]).unwrap();
    let setup = FocusSetup {
        table: table.clone(),
        couplings,
        initial: initial.clone(),
        focus: vec![c],
        sigma0,
        tol: 1e-10,
    };
    let lens = optimize_lens(
        &setup,
        LensFamily::Thick { order: 2 },
        &OptimizeOptions::default(),
    )
    .unwrap();
    let (h, _) = setup.prepare(&lens.design).unwrap();
    let basis = enumerate_basis(n, 2).unwrap();
    let psi = symmetric_initial_state(&initial, &basis).unwrap();
    let pairs = |jz: f64| {
        let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(jz)).unwrap();
        let out = evolve_mb(&op, &psi, lens.time, 1e-10).unwrap();
        pair_distance_histogram(&out, &basis, &table)
    };
    let within = |hist: &[(f64, f64)], r: f64| -> f64 {
        hist.iter().filter(|(d, _)| *d < r).map(|x| x.1).sum()
    };
    let (strong, free) = (pairs(5e3), pairs(0.0));
    let r_b = Interaction::new(5e3).blockade_radius();
    assert!(
        within(&strong, 2.0) < 0.05,
        "close-pair weight {}",
        within(&strong, 2.0)
    );
    // Hard-core exclusion alone already depletes d = 1, so compare inside r_B.
    assert!(
        within(&free, r_b) > 2.0 * within(&strong, r_b),
        "free {} vs blockaded {}",
        within(&free, r_b),
        within(&strong, r_b)
    );
}
