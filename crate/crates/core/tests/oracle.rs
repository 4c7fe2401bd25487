//! Propagators against dense matrix exponentials built independently.

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use spinlens::lattice::{
    build_couplings, build_lattice, punch_holes, CouplingModel, HamiltonianTerms, SiteTable,
};
use spinlens::manybody::{
    build_mb_hamiltonian, enumerate_basis, evolve_mb, FockBasis, Interaction, ManyBodyState,
};
use spinlens::rydberg::DressingParams;
use spinlens::singlex::{evolve, SpinWaveState};
use spinlens::C64;

/// `exp(-iHt) ψ` through the eigendecomposition of a real symmetric matrix.
fn dense_evolve(h: &DMatrix<f64>, psi: &[C64], t: f64) -> Vec<C64> {
    let n = psi.len();
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let c: C64 = (0..n).map(|i| psi[i] * v[(i, k)]).sum();
        let c = c * C64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for i in 0..n {
            out[i] += c * v[(i, k)];
        }
    }
    out
}

fn max_err(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `H = diag(ε) − J` over active sites; holes get empty rows.
fn dense_single(h: &HamiltonianTerms) -> DMatrix<f64> {
    let n = h.diagonal().len();
    DMatrix::from_fn(n, n, |i, j| {
        if !h.active()[i] || !h.active()[j] {
            0.0
        } else if i == j {
            h.diagonal()[i]
        } else {
            -h.hop(i, j)
        }
    })
}

fn pseudo_random(seed: u64, n: usize) -> Vec<f64> {
    let mut x = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn random_state(table: &SiteTable, seed: u64) -> SpinWaveState {
    let r = pseudo_random(seed, 2 * table.len());
    let amps = (0..table.len())
        .map(|i| C64::new(r[2 * i], r[2 * i + 1]))
        .collect();
    SpinWaveState::from_amplitudes(table, amps).unwrap()
}

fn check_single(table: &SiteTable, model: &CouplingModel, lens: &[f64], seed: u64, t: f64) {
    let h = build_couplings(table, model, lens).unwrap();
    let s = random_state(table, seed);
    let got = evolve(&h, &s, t, 1e-12).unwrap();
    let want = dense_evolve(&dense_single(&h), s.amplitudes(), t);
    let e = max_err(got.amplitudes(), &want);
    assert!(
        e <= 1e-9,
        "max amplitude error {e:e} for {model:?} at t={t}"
    );
}

#[test]
fn single_body_models_match_dense_exponential() {
    let chain = build_lattice(&[12], 1.0).unwrap();
    let lens: Vec<f64> = pseudo_random(3, 12).iter().map(|x| 2.0 * x).collect();
    check_single(&chain, &CouplingModel::nearest_neighbor(), &lens, 1, 0.7);
    check_single(&chain, &CouplingModel::nearest_neighbor(), &lens, 2, 40.0);
    check_single(
        &chain,
        &CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 3.0,
            cutoff: 20.0,
        },
        &lens,
        4,
        13.0,
    );

    let square = build_lattice(&[3, 4], 1.0).unwrap();
    let lens2: Vec<f64> = pseudo_random(5, 12).iter().map(|x| 0.3 * x).collect();
    check_single(
        &square,
        &CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 6.0,
            cutoff: 20.0,
        },
        &lens2,
        6,
        25.0,
    );

    let p = DressingParams::at_exchange_maximum(1.0, -2.0, 0.7, 1.0).unwrap();
    let holed = punch_holes(&chain, &[3, 8]).unwrap();
    check_single(&holed, &CouplingModel::rydberg(p, 20.0), &lens, 7, 9.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_terms_match_dense(seed in any::<u64>(), n in 2usize..=12, alpha in 1.5f64..8.0, t in 0.0f64..30.0) {
        let table = build_lattice(&[n], 1.0).unwrap();
        let lens: Vec<f64> = pseudo_random(seed ^ 0x5a5a, n);
        check_single(&table, &CouplingModel::PowerLaw { j0: 1.0, alpha, cutoff: 20.0 }, &lens, seed, t);
    }
}

/// Full `2^N` spin Hamiltonian from bit operations:
/// `Σ ε_n n_n − Σ J_nm (σ⁺_nσ⁻_m + h.c.) + Σ_{n<m} 4J_z/r⁶ n_n n_m`.
fn pauli_hamiltonian(h: &HamiltonianTerms, jz: f64) -> DMatrix<f64> {
    let n = h.diagonal().len();
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let mut d = 0.0;
        for i in 0..n {
            if s >> i & 1 == 1 {
                d += h.diagonal()[i];
                for j in i + 1..n {
                    if s >> j & 1 == 1 {
                        d += 4.0 * jz / ((j - i) as f64).powi(6);
                    }
                }
            }
        }
        m[(s, s)] = d;
        for i in 0..n {
            for j in 0..n {
                // σ⁺_i σ⁻_j moves an excitation from j to i.
                if i != j && s >> j & 1 == 1 && s >> i & 1 == 0 {
                    let t = s ^ (1 << j) ^ (1 << i);
                    m[(t, s)] -= h.hop(i, j);
                }
            }
        }
    }
    m
}

fn sector(m: &DMatrix<f64>, states: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), states.len(), |a, b| m[(states[a], states[b])])
}

fn bits(basis: &FockBasis) -> Vec<usize> {
    (0..basis.len())
        .map(|i| basis.state(i).iter().map(|&n| 1usize << n).sum())
        .collect()
}

fn check_many_body(n: usize, nu: usize, jz: f64, t: f64, seed: u64) {
    let table = build_lattice(&[n], 1.0).unwrap();
    let lens: Vec<f64> = pseudo_random(seed, n).iter().map(|x| 0.5 * x).collect();
    let h = build_couplings(&table, &CouplingModel::nearest_neighbor(), &lens).unwrap();
    let basis = enumerate_basis(n, nu).unwrap();
    let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(jz)).unwrap();
    let full = pauli_hamiltonian(&h, jz);
    let idx = bits(&basis);
    let sub = sector(&full, &idx);
    // Excitation number is conserved, so the sector is closed.
    for &s in &idx {
        for r in 0..full.nrows() {
            if full[(r, s)] != 0.0 {
                assert_eq!((r as u64).count_ones() as usize, nu);
            }
        }
    }
    let r = pseudo_random(seed + 1, 2 * basis.len());
    let amps: Vec<C64> = (0..basis.len())
        .map(|i| C64::new(r[2 * i], r[2 * i + 1]))
        .collect();
    let s0 = ManyBodyState::from_amplitudes(&basis, amps).unwrap();
    let got = evolve_mb(&op, &s0, t, 1e-12).unwrap();
    let want = dense_evolve(&sub, s0.amplitudes(), t);
    let e = max_err(got.amplitudes(), &want);
    assert!(
        e <= 1e-9,
        "N={n} nu={nu} Jz={jz}: max amplitude error {e:e}"
    );
}

#[test]
fn many_body_matches_pauli_oracle() {
    check_many_body(8, 2, 0.0, 5.0, 11);
    check_many_body(8, 2, 3.0, 12.0, 12);
    check_many_body(10, 2, 50.0, 4.0, 13);
    check_many_body(10, 3, 2.0, 6.0, 14);
}

#[test]
fn single_excitation_sector_is_single_body() {
    let table = build_lattice(&[30], 1.0).unwrap();
    let lens: Vec<f64> = (0..30).map(|i| 0.004 * (i as f64 - 14.5).powi(2)).collect();
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
    let basis = enumerate_basis(30, 1).unwrap();
    let op = build_mb_hamiltonian(&h, &table, &basis, &Interaction::new(100.0)).unwrap();
    let s = random_state(&table, 21);
    let mb = ManyBodyState::from_amplitudes(&basis, s.amplitudes().to_vec()).unwrap();
    let a = evolve(&h, &s, 17.0, 1e-12).unwrap();
    let b = evolve_mb(&op, &mb, 17.0, 1e-12).unwrap();
    assert!(max_err(a.amplitudes(), b.amplitudes()) <= 1e-10);
}
