//! Exact dynamics of ν ≤ 3 hard-core excitations with a `1/r⁶` density
//! interaction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::lattice::{HamiltonianTerms, SiteTable, DEFAULT_CUTOFF};
use crate::propagator::{self, gershgorin, Hamiltonian};
use crate::singlex::SpinWaveState;
use crate::sparse::CsrMatrix;
use crate::table::{Cell, Table};
use crate::{Result, C64};

/// Largest supported excitation number.
pub const MAX_EXCITATIONS: usize = 3;

/// Occupations `(n₁ < … < n_ν)` in lexicographic order.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: Vec<usize>,
    nu: usize,
    states: Vec<[usize; MAX_EXCITATIONS]>,
    index: HashMap<[usize; MAX_EXCITATIONS], usize>,
}

/// Basis over sites `0..n`.
pub fn enumerate_basis(n: usize, nu: usize) -> Result<FockBasis> {
    FockBasis::new((0..n).collect(), nu)
}

impl FockBasis {
    /// Basis over the given site indices (sorted internally).
    pub fn new(mut sites: Vec<usize>, nu: usize) -> Result<Self> {
        if nu > MAX_EXCITATIONS {
            return Err(Error::Capability(format!(
                "at most {MAX_EXCITATIONS} excitations are supported, got {nu}"
            )));
        }
        if nu == 0 || nu > sites.len() {
            return invalid(format!(
                "need 1 <= nu <= {} sites, got nu = {nu}",
                sites.len()
            ));
        }
        sites.sort_unstable();
        sites.dedup();
        let mut states = Vec::new();
        let mut cur = [usize::MAX; MAX_EXCITATIONS];
        fn rec(
            sites: &[usize],
            start: usize,
            depth: usize,
            nu: usize,
            cur: &mut [usize; 3],
            out: &mut Vec<[usize; 3]>,
        ) {
            if depth == nu {
                out.push(*cur);
                return;
            }
            for i in start..sites.len() - (nu - depth - 1) {
                cur[depth] = sites[i];
                rec(sites, i + 1, depth + 1, nu, cur, out);
            }
        }
        rec(&sites, 0, 0, nu, &mut cur, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(FockBasis {
            sites,
            nu,
            states,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    pub fn nu(&self) -> usize {
        self.nu
    }
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }
    /// Occupied sites of basis state `i`.
    pub fn state(&self, i: usize) -> &[usize] {
        &self.states[i][..self.nu]
    }
    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        let mut key = [usize::MAX; MAX_EXCITATIONS];
        key[..occ.len()].copy_from_slice(occ);
        key[..occ.len()].sort_unstable();
        self.index.get(&key).copied()
    }
}

/// Interaction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    /// `J_z` in units of `J`.
    pub jz: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Keep the single-body and constant terms of `Σ J_z/r⁶ σ_zσ_z`.
    #[serde(default)]
    pub literal_sigma_z: bool,
}

fn default_power() -> f64 {
    6.0
}
fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

impl Interaction {
    pub fn new(jz: f64) -> Self {
        Interaction {
            jz,
            power: 6.0,
            cutoff: DEFAULT_CUTOFF,
            literal_sigma_z: false,
        }
    }

    /// Blockade radius `a (J_z/J)^{1/power}` for unit `J`.
    pub fn blockade_radius(&self) -> f64 {
        self.jz.powf(1.0 / self.power)
    }

    fn pair(&self, table: &SiteTable, i: usize, j: usize) -> f64 {
        let li = table.labels()[i];
        let lj = table.labels()[j];
        let l2: i64 = (0..3).map(|ax| (li[ax] - lj[ax]).pow(2)).sum();
        if l2 as f64 > self.cutoff * self.cutoff + 1e-9 {
            return 0.0;
        }
        let pi = table.positions()[i];
        let pj = table.positions()[j];
        let r = (0..3)
            .map(|ax| (pi[ax] - pj[ax]).powi(2))
            .sum::<f64>()
            .sqrt()
            / table.spacing();
        self.jz / r.powf(self.power)
    }
}

/// Fixed-ν Hamiltonian: hard-core hopping plus diagonal energies.
#[derive(Debug, Clone)]
pub struct ManyBodyOperator {
    hopping: CsrMatrix,
    diagonal: Vec<f64>,
}

/// Builds the ν-excitation Hamiltonian from single-excitation terms.
///
/// Diagonal: `Σ_occ ε_n + Σ_{pairs} 4 J_z/r⁶`, the cross term of
/// `σ_z = 2·occupation − 1`. With `literal_sigma_z` the remaining
/// `−2 Σ_occ R_n + W` (with `R_n = Σ_m J_z/r_nm⁶` and `W` the pair total) is
/// added as well.
pub fn build_mb_hamiltonian(
    terms: &HamiltonianTerms,
    table: &SiteTable,
    basis: &FockBasis,
    interaction: &Interaction,
) -> Result<ManyBodyOperator> {
    if !(interaction.jz >= 0.0) || !(interaction.power > 0.0) {
        return invalid("interaction needs Jz >= 0 and a positive power");
    }
    if terms.diagonal().len() != table.len() {
        return invalid("Hamiltonian terms do not match the table");
    }
    for &s in basis.sites() {
        if s >= table.len() || !table.is_active(s) {
            return invalid(format!("basis site {s} is not an active site"));
        }
    }
    let eps = terms.diagonal();
    let mut pairs = Vec::new();
    let mut diagonal = Vec::with_capacity(basis.len());
    let mut single = HashMap::new();
    let mut total = 0.0;
    if interaction.literal_sigma_z && interaction.jz > 0.0 {
        for (a, &i) in basis.sites().iter().enumerate() {
            let mut r = 0.0;
            for &j in basis.sites() {
                if j != i {
                    r += interaction.pair(table, i, j);
                }
            }
            single.insert(i, r);
            for &j in &basis.sites()[a + 1..] {
                total += interaction.pair(table, i, j);
            }
        }
    }
    let mut occ = [0usize; MAX_EXCITATIONS];
    for idx in 0..basis.len() {
        let st = basis.state(idx);
        let mut d: f64 = st.iter().map(|&n| eps[n]).sum();
        if interaction.jz > 0.0 {
            for a in 0..st.len() {
                for b in a + 1..st.len() {
                    d += 4.0 * interaction.pair(table, st[a], st[b]);
                }
            }
            if interaction.literal_sigma_z {
                d += total - 2.0 * st.iter().map(|n| single[n]).sum::<f64>();
            }
        }
        diagonal.push(d);
        for (p, &n) in st.iter().enumerate() {
            let (cols, vals) = terms.hopping().row(n);
            for (&m, &j) in cols.iter().zip(vals) {
                if st.contains(&m) {
                    continue;
                }
                occ[..st.len()].copy_from_slice(st);
                occ[p] = m;
                let Some(target) = basis.index_of(&occ[..st.len()]) else {
                    return invalid(format!("hop to site {m} leaves the basis"));
                };
                if target > idx {
                    pairs.push((idx, target, j));
                }
            }
        }
    }
    Ok(ManyBodyOperator {
        hopping: CsrMatrix::from_symmetric_pairs(basis.len(), &pairs),
        diagonal,
    })
}

impl ManyBodyOperator {
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }
    pub fn hopping(&self) -> &CsrMatrix {
        &self.hopping
    }
    /// Dense `H`, for small oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = self.hopping.to_dense();
        for (i, row) in d.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[i] = self.diagonal[i];
        }
        d
    }
}

impl Hamiltonian for ManyBodyOperator {
    fn dim(&self) -> usize {
        self.diagonal.len()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.hopping.apply_shifted(&self.diagonal, x, y);
    }
    fn spectral_bounds(&self) -> Result<(f64, f64)> {
        gershgorin(&self.diagonal, &self.hopping.abs_row_sums())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    amps: Vec<C64>,
    time: f64,
}

impl ManyBodyState {
    pub fn from_amplitudes(basis: &FockBasis, mut amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return invalid(format!(
                "{} amplitudes for a basis of {}",
                amps.len(),
                basis.len()
            ));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateInput("state has zero norm".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(ManyBodyState { amps, time: 0.0 })
    }

    pub fn basis_state(basis: &FockBasis, occ: &[usize]) -> Result<Self> {
        let i = basis
            .index_of(occ)
            .ok_or_else(|| Error::InvalidSpec(format!("{occ:?} not in basis")))?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.len()];
        amps[i] = C64::new(1.0, 0.0);
        Ok(ManyBodyState { amps, time: 0.0 })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// `(Ŝ⁺)^ν|G⟩` with `Ŝ⁺ = Σ ψ_n σ₊ⁿ`: amplitude `Π ψ_{n_i}` on distinct
/// sites, renormalized after the hard-core projection.
pub fn symmetric_initial_state(single: &SpinWaveState, basis: &FockBasis) -> Result<ManyBodyState> {
    let psi = single.amplitudes();
    let support = basis
        .sites()
        .iter()
        .filter(|&&s| s < psi.len() && psi[s].norm_sqr() > 0.0)
        .count();
    if support < basis.nu() {
        return Err(Error::DegenerateInput(format!(
            "{} excitations need at least as many occupied sites, found {support}",
            basis.nu()
        )));
    }
    let amps = (0..basis.len())
        .map(|i| basis.state(i).iter().map(|&n| psi[n]).product::<C64>())
        .collect();
    ManyBodyState::from_amplitudes(basis, amps)
}

/// Norm of the unprojected product state restricted to distinct sites,
/// `ν! Σ_{n₁<…<n_ν} Π|ψ_{n_i}|²`; one minus this is the hard-core deficit.
pub fn hard_core_weight(single: &SpinWaveState, basis: &FockBasis) -> f64 {
    let psi = single.amplitudes();
    let fact: f64 = (1..=basis.nu()).map(|k| k as f64).product();
    fact * (0..basis.len())
        .map(|i| {
            basis
                .state(i)
                .iter()
                .map(|&n| psi[n].norm_sqr())
                .product::<f64>()
        })
        .sum::<f64>()
}

pub fn evolve_mb(
    op: &ManyBodyOperator,
    state: &ManyBodyState,
    dt: f64,
    tol: f64,
) -> Result<ManyBodyState> {
    if !(1e-14..=1e-6).contains(&tol) {
        return invalid(format!("tolerance must lie in [1e-14, 1e-6], got {tol}"));
    }
    let mut out = state.clone();
    propagator::evolve(op, &mut out.amps, dt, tol)?;
    out.time += dt;
    Ok(out)
}

/// `p_n = Σ_{states ∋ n} |c|²` over all `n_sites` table sites.
pub fn density_profile(state: &ManyBodyState, basis: &FockBasis, n_sites: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_sites];
    for (i, a) in state.amps.iter().enumerate() {
        let w = a.norm_sqr();
        for &n in basis.state(i) {
            p[n] += w;
        }
    }
    p
}

/// Distribution of pair distances (label units), summed over all pairs of
/// each configuration; total weight is `ν(ν−1)/2`.
pub fn pair_distance_histogram(
    state: &ManyBodyState,
    basis: &FockBasis,
    table: &SiteTable,
) -> Vec<(f64, f64)> {
    let mut h: BTreeMap<i64, f64> = BTreeMap::new();
    for (i, a) in state.amps.iter().enumerate() {
        let st = basis.state(i);
        let w = a.norm_sqr();
        for x in 0..st.len() {
            for y in x + 1..st.len() {
                let (li, lj) = (table.labels()[st[x]], table.labels()[st[y]]);
                let d2: i64 = (0..3).map(|ax| (li[ax] - lj[ax]).pow(2)).sum();
                *h.entry(d2).or_default() += w;
            }
        }
    }
    h.into_iter()
        .map(|(d2, w)| ((d2 as f64).sqrt(), w))
        .collect()
}

pub fn density_table(times: &[f64], profiles: &[Vec<f64>], nu: usize) -> Table {
    let mut t = Table::new(&["t[1/J]", "n[1]", "p_n[1]", "nu[1]"]);
    for (time, p) in times.iter().zip(profiles) {
        for (n, v) in p.iter().enumerate() {
            t.push(vec![
                Cell::Real(*time),
                Cell::from(n),
                Cell::Real(*v),
                Cell::from(nu),
            ]);
        }
    }
    t
}

pub fn pair_histogram_table(hist: &[(f64, f64)]) -> Table {
    let mut t = Table::new(&["distance[a]", "probability[1]"]);
    for &(d, w) in hist {
        t.push(vec![Cell::Real(d), Cell::Real(w)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, CouplingModel};
    use crate::singlex::gaussian_packet;

    #[test]
    fn basis_enumeration() {
        let b = enumerate_basis(4, 2).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.state(0), &[0, 1]);
        assert_eq!(b.state(5), &[2, 3]);
        assert_eq!(enumerate_basis(21, 3).unwrap().len(), 1330);
        let b1 = enumerate_basis(5, 1).unwrap();
        assert_eq!(
            (0..5).map(|i| b1.state(i)[0]).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert!(matches!(enumerate_basis(10, 4), Err(Error::Capability(_))));
    }

    #[test]
    fn round_trip_all_indices() {
        let b = enumerate_basis(21, 3).unwrap();
        for i in 0..b.len() {
            let s = b.state(i);
            assert!(s[0] < s[1] && s[1] < s[2]);
            assert_eq!(b.index_of(s), Some(i));
            if i > 0 {
                assert!(b.state(i - 1) < s);
            }
        }
    }

    #[test]
    fn pair_interaction_diagonal() {
        let t = build_lattice(&[12], 1.0).unwrap();
        let h = build_couplings(&t, &CouplingModel::nearest_neighbor(), &[0.0; 12]).unwrap();
        let b = enumerate_basis(12, 2).unwrap();
        let op = build_mb_hamiltonian(&h, &t, &b, &Interaction::new(3.0)).unwrap();
        for m in 1..12usize {
            let i = b.index_of(&[0, m]).unwrap();
            assert!((op.diagonal()[i] - 12.0 / (m as f64).powi(6)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_basis_state_density() {
        let b = enumerate_basis(8, 2).unwrap();
        let s = ManyBodyState::basis_state(&b, &[2, 5]).unwrap();
        let p = density_profile(&s, &b, 8);
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn symmetric_state_small_cases() {
        let t = build_lattice(&[3], 1.0).unwrap();
        let psi = SpinWaveState::from_amplitudes(&t, vec![C64::new(1.0, 0.0); 3]).unwrap();
        let b = enumerate_basis(3, 2).unwrap();
        let s = symmetric_initial_state(&psi, &b).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        let b1 = enumerate_basis(3, 1).unwrap();
        let s1 = symmetric_initial_state(&psi, &b1).unwrap();
        assert_eq!(s1.amplitudes(), psi.amplitudes());
        let loc = SpinWaveState::localized(&t, 1).unwrap();
        assert!(matches!(
            symmetric_initial_state(&loc, &b),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn hard_core_deficit_is_small_for_wide_packets() {
        let t = build_lattice(&[31], 1.0).unwrap();
        let psi = gaussian_packet(&t, 5.0, &[15.0], &[]).unwrap();
        let b = enumerate_basis(31, 2).unwrap();
        // Deficit is Σ|ψ_n|⁴ = 1/(√(2π)σ) for a wide packet.
        let deficit = 1.0 - hard_core_weight(&psi, &b);
        let direct: f64 = psi.amplitudes().iter().map(|a| a.norm_sqr().powi(2)).sum();
        assert!((deficit - direct).abs() < 1e-14);
        assert!(deficit < 1.0 / 5.0);
    }

    #[test]
    fn operator_closed_and_symmetric() {
        let t = build_lattice(&[9], 1.0).unwrap();
        let m = CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 3.0,
            cutoff: 20.0,
        };
        let h = build_couplings(&t, &m, &[0.1; 9]).unwrap();
        let b = enumerate_basis(9, 3).unwrap();
        let op = build_mb_hamiltonian(&h, &t, &b, &Interaction::new(2.0)).unwrap();
        assert!(op.hopping().is_symmetric());
        let s = ManyBodyState::basis_state(&b, &[0, 4, 8]).unwrap();
        let e = evolve_mb(&op, &s, 2.0, 1e-12).unwrap();
        let p = density_profile(&e, &b, 9);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn pair_histogram_weight() {
        let t = build_lattice(&[6], 1.0).unwrap();
        let b = enumerate_basis(6, 3).unwrap();
        let s = ManyBodyState::basis_state(&b, &[0, 2, 5]).unwrap();
        let h: Vec<_> = pair_distance_histogram(&s, &b, &t)
            .into_iter()
            .filter(|e| e.1 > 0.0)
            .collect();
        assert_eq!(h, vec![(2.0, 1.0), (3.0, 1.0), (5.0, 1.0)]);
    }
}
