//! Lattice geometry and single-excitation Hamiltonian terms.
//!
//! Sites are stored in row-major order over all positions; holes stay in the
//! table and in every per-site vector but are excluded from all couplings.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::propagator::{gershgorin, Hamiltonian};
use crate::rydberg::{dressed_couplings, DressingParams};
use crate::sparse::CsrMatrix;
use crate::{Result, C64};

/// Default range, in lattice spacings, of long-range couplings.
pub const DEFAULT_CUTOFF: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SiteTable {
    dim: usize,
    extents: [usize; 3],
    spacing: f64,
    positions: Vec<[f64; 3]>,
    labels: Vec<[i64; 3]>,
    active: Vec<bool>,
}

/// Row-major lattice with all sites active and positions `a × label`.
pub fn build_lattice(extents: &[usize], spacing: f64) -> Result<SiteTable> {
    if extents.is_empty() || extents.len() > 3 {
        return invalid(format!(
            "dimension must be 1, 2 or 3, got {}",
            extents.len()
        ));
    }
    if extents.contains(&0) {
        return invalid(format!("zero extent in {extents:?}"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return invalid(format!("spacing must be positive, got {spacing}"));
    }
    let mut ext = [1usize; 3];
    ext[..extents.len()].copy_from_slice(extents);
    let n: usize = ext.iter().product();
    let mut labels = Vec::with_capacity(n);
    for i in 0..ext[0] {
        for j in 0..ext[1] {
            for k in 0..ext[2] {
                labels.push([i as i64, j as i64, k as i64]);
            }
        }
    }
    let positions = labels
        .iter()
        .map(|l| l.map(|c| c as f64 * spacing))
        .collect();
    Ok(SiteTable {
        dim: extents.len(),
        extents: ext,
        spacing,
        positions,
        labels,
        active: vec![true; n],
    })
}

impl SiteTable {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn len(&self) -> usize {
        self.labels.len()
    }
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }
    pub fn labels(&self) -> &[[i64; 3]] {
        &self.labels
    }
    pub fn active(&self) -> &[bool] {
        &self.active
    }
    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }
    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Index of the site with integer coordinates `label`, if inside.
    pub fn index_of(&self, label: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for ax in 0..3 {
            let c = label.get(ax).copied().unwrap_or(0);
            if c < 0 || c as usize >= self.extents[ax] {
                return None;
            }
            idx = idx * self.extents[ax] + c as usize;
        }
        Some(idx)
    }

    /// Lattice position of label coordinates (undisplaced), padded to 3D.
    pub fn label_position(&self, label: &[f64]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (ax, c) in label.iter().enumerate().take(3) {
            p[ax] = c * self.spacing;
        }
        p
    }

    /// Geometric center of the label box.
    pub fn center_label(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for ax in 0..self.dim {
            c[ax] = (self.extents[ax] as f64 - 1.0) / 2.0;
        }
        c
    }
}

/// Copy of `table` with the listed sites turned into holes.
pub fn punch_holes(table: &SiteTable, holes: &[usize]) -> Result<SiteTable> {
    let mut seen = HashSet::new();
    let mut out = table.clone();
    for &h in holes {
        if h >= table.len() {
            return invalid(format!("hole index {h} out of range (n = {})", table.len()));
        }
        if !seen.insert(h) {
            return invalid(format!("duplicate hole index {h}"));
        }
        out.active[h] = false;
    }
    Ok(out)
}

/// Copy of `table` with every position shifted by the matching vector.
pub fn displace_sites(table: &SiteTable, displacements: &[Vec<f64>]) -> Result<SiteTable> {
    if displacements.len() != table.len() {
        return invalid(format!(
            "{} displacements for {} sites",
            displacements.len(),
            table.len()
        ));
    }
    let mut out = table.clone();
    for (p, d) in out.positions.iter_mut().zip(displacements) {
        if d.len() != table.dim {
            return invalid(format!(
                "displacement of length {} in {}D",
                d.len(),
                table.dim
            ));
        }
        for (ax, x) in d.iter().enumerate() {
            if !x.is_finite() {
                return invalid("non-finite displacement");
            }
            p[ax] += x;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingModel {
    NearestNeighbor {
        j: f64,
    },
    /// `J₀ / (r/a)^α` between sites whose label distance is within `cutoff`.
    PowerLaw {
        j0: f64,
        alpha: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Hopping `−W_sg(r)/2` and diagonal `Σ_j [V_sg(r_ij) − V_sg(∞)]`.
    RydbergDressed {
        omega: f64,
        delta: f64,
        c12: f64,
        xi: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF
}

impl CouplingModel {
    pub fn nearest_neighbor() -> Self {
        CouplingModel::NearestNeighbor { j: 1.0 }
    }

    pub fn rydberg(params: DressingParams, cutoff: f64) -> Self {
        let DressingParams {
            omega,
            delta,
            c12,
            xi,
        } = params;
        CouplingModel::RydbergDressed {
            omega,
            delta,
            c12,
            xi,
            cutoff,
        }
    }

    /// Dressing parameters of a Rydberg model.
    pub fn dressing(&self) -> Option<DressingParams> {
        match *self {
            CouplingModel::RydbergDressed {
                omega,
                delta,
                c12,
                xi,
                ..
            } => Some(DressingParams {
                omega,
                delta,
                c12,
                xi,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CouplingModel::NearestNeighbor { j } => {
                if !(j > 0.0) {
                    return invalid(format!("J must be positive, got {j}"));
                }
            }
            CouplingModel::PowerLaw { j0, alpha, cutoff } => {
                if !(j0 > 0.0) || !(alpha > 0.0) {
                    return invalid(format!(
                        "power law needs J0 > 0 and alpha > 0, got {j0}, {alpha}"
                    ));
                }
                if !(cutoff >= 1.0) {
                    return invalid(format!("cutoff must be at least 1, got {cutoff}"));
                }
            }
            CouplingModel::RydbergDressed { cutoff, .. } => {
                let params = self.dressing().expect("rydberg variant");
                params.validate()?;
                if !(params.xi >= 0.0) {
                    return invalid(format!("xi must be non-negative, got {}", params.xi));
                }
                if !(cutoff >= 1.0) {
                    return invalid(format!("cutoff must be at least 1, got {cutoff}"));
                }
            }
        }
        Ok(())
    }

    /// Coupling range in lattice spacings (label distance).
    fn range(&self) -> f64 {
        match *self {
            CouplingModel::NearestNeighbor { .. } => 1.0,
            CouplingModel::PowerLaw { cutoff, .. }
            | CouplingModel::RydbergDressed { cutoff, .. } => cutoff,
        }
    }
}

/// Single-excitation Hamiltonian `H = diag(ε) − J`, stored over all sites.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    hopping: Arc<CsrMatrix>,
    /// Coupling-induced diagonal (Rydberg dressing); zero otherwise.
    base_diagonal: Arc<Vec<f64>>,
    diagonal: Vec<f64>,
    active: Arc<Vec<bool>>,
    model: CouplingModel,
}

/// Label offsets with `|d| ≤ range`, one of each `±d` pair.
fn half_offsets(dim: usize, range: f64) -> Vec<[i64; 3]> {
    let r = range.floor() as i64;
    let mut out = Vec::new();
    let span = |ax: usize| if ax < dim { -r..=r } else { 0..=0 };
    for i in span(0) {
        for j in span(1) {
            for k in span(2) {
                let d = [i, j, k];
                let d2 = (i * i + j * j + k * k) as f64;
                if d2 == 0.0 || d2 > range * range + 1e-9 {
                    continue;
                }
                if d > [0, 0, 0] {
                    out.push(d);
                }
            }
        }
    }
    out
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Builds the coupling matrix of `model` on `table`, adding `lens_diagonal`
/// (one entry per site, ignored at holes).
pub fn build_couplings(
    table: &SiteTable,
    model: &CouplingModel,
    lens_diagonal: &[f64],
) -> Result<HamiltonianTerms> {
    model.validate()?;
    if lens_diagonal.len() != table.len() {
        return invalid(format!(
            "diagonal has {} entries for {} sites",
            lens_diagonal.len(),
            table.len()
        ));
    }
    let offsets = half_offsets(table.dim(), model.range());
    let dressing = model.dressing();
    let n = table.len();
    let mut pairs = Vec::new();
    let mut base = vec![0.0; n];
    for i in 0..n {
        if !table.active[i] {
            continue;
        }
        let li = table.labels[i];
        for d in &offsets {
            let lj = [li[0] + d[0], li[1] + d[1], li[2] + d[2]];
            let Some(j) = table.index_of(&lj) else {
                continue;
            };
            if !table.active[j] {
                continue;
            }
            let r = distance(&table.positions[i], &table.positions[j]);
            match *model {
                CouplingModel::NearestNeighbor { j: amp } => pairs.push((i, j, amp)),
                CouplingModel::PowerLaw { j0, alpha, .. } => {
                    if !(r > 0.0) {
                        return invalid(format!("sites {i} and {j} coincide"));
                    }
                    pairs.push((i, j, j0 / (r / table.spacing).powf(alpha)));
                }
                CouplingModel::RydbergDressed { .. } => {
                    let params = dressing.expect("rydberg variant");
                    let (v, w) = dressed_couplings(&params, r);
                    let dv = v - params.v_asymptote();
                    base[i] += dv;
                    base[j] += dv;
                    pairs.push((i, j, -0.5 * w));
                }
            }
        }
    }
    let hopping = CsrMatrix::from_symmetric_pairs(n, &pairs);
    let active = Arc::new(table.active.clone());
    let mut terms = HamiltonianTerms {
        hopping: Arc::new(hopping),
        base_diagonal: Arc::new(base),
        diagonal: Vec::new(),
        active,
        model: *model,
    };
    terms.set_lens_diagonal(lens_diagonal)?;
    Ok(terms)
}

impl HamiltonianTerms {
    /// Replaces the lens part of the diagonal, keeping the couplings.
    pub fn set_lens_diagonal(&mut self, lens: &[f64]) -> Result<()> {
        if lens.len() != self.hopping.dim() {
            return invalid(format!(
                "diagonal has {} entries for {} sites",
                lens.len(),
                self.hopping.dim()
            ));
        }
        let mut d = Vec::with_capacity(lens.len());
        for (i, (&l, &b)) in lens.iter().zip(self.base_diagonal.iter()).enumerate() {
            if !self.active[i] {
                d.push(0.0);
                continue;
            }
            if !l.is_finite() {
                return invalid(format!("non-finite diagonal at site {i}"));
            }
            d.push(l + b);
        }
        self.diagonal = d;
        Ok(())
    }

    /// Copy sharing the couplings with a new lens diagonal.
    pub fn with_lens_diagonal(&self, lens: &[f64]) -> Result<Self> {
        let mut h = self.clone();
        h.set_lens_diagonal(lens)?;
        Ok(h)
    }

    pub fn hopping(&self) -> &CsrMatrix {
        &self.hopping
    }
    /// Full diagonal `ε_n` (lens plus coupling-induced part).
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }
    /// Coupling-induced diagonal alone.
    pub fn coupling_diagonal(&self) -> &[f64] {
        &self.base_diagonal
    }
    pub fn active(&self) -> &[bool] {
        &self.active
    }
    pub fn model(&self) -> &CouplingModel {
        &self.model
    }
    pub fn hop(&self, i: usize, j: usize) -> f64 {
        self.hopping.get(i, j)
    }

    /// Dense matrix of `H`, for small oracles.
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

impl Hamiltonian for HamiltonianTerms {
    fn dim(&self) -> usize {
        self.hopping.dim()
    }
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.hopping.apply_shifted(&self.diagonal, x, y);
    }
    fn spectral_bounds(&self) -> Result<(f64, f64)> {
        gershgorin(&self.diagonal, &self.hopping.abs_row_sums())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rydberg::effective_potentials;
    use proptest::prelude::*;

    #[test]
    fn chain_positions() {
        let t = build_lattice(&[3], 1.0).unwrap();
        let xs: Vec<f64> = t.positions().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
        assert_eq!(build_lattice(&[50, 50], 1.0).unwrap().len(), 2500);
        assert_eq!(build_lattice(&[800], 1.0).unwrap().len(), 800);
        assert!(build_lattice(&[4, 0], 1.0).is_err());
        assert!(build_lattice(&[4], 0.0).is_err());
    }

    #[test]
    fn row_major_indexing() {
        let t = build_lattice(&[3, 4], 2.0).unwrap();
        assert_eq!(t.index_of(&[1, 2]), Some(6));
        assert_eq!(t.labels()[6], [1, 2, 0]);
        assert_eq!(t.positions()[6], [2.0, 4.0, 0.0]);
        assert_eq!(t.index_of(&[3, 0]), None);
    }

    #[test]
    fn holes() {
        let t = build_lattice(&[70], 1.0).unwrap();
        assert_eq!(punch_holes(&t, &[]).unwrap(), t);
        assert_eq!(punch_holes(&t, &[5]).unwrap().n_active(), 69);
        let t2 = build_lattice(&[70, 70], 1.0).unwrap();
        let h: Vec<usize> = (0..10).map(|i| i * 97).collect();
        assert_eq!(punch_holes(&t2, &h).unwrap().n_active(), 4890);
        assert!(punch_holes(&t, &[3, 3]).is_err());
        assert!(punch_holes(&t, &[70]).is_err());
    }

    #[test]
    fn displacement() {
        let t = build_lattice(&[3], 1.0).unwrap();
        let z = vec![vec![0.0]; 3];
        assert_eq!(displace_sites(&t, &z).unwrap(), t);
        let d = displace_sites(&t, &[vec![0.1], vec![0.0], vec![0.0]]).unwrap();
        assert!((distance(&d.positions()[0], &d.positions()[1]) - 0.9).abs() < 1e-15);
        assert!(displace_sites(&t, &z[..2]).is_err());
        assert!(displace_sites(&t, &[vec![0.0, 1.0], vec![0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn nearest_neighbor_chain() {
        let t = build_lattice(&[3], 1.0).unwrap();
        let h = build_couplings(&t, &CouplingModel::nearest_neighbor(), &[0.0; 3]).unwrap();
        assert_eq!(h.hop(0, 1), 1.0);
        assert_eq!(h.hop(1, 2), 1.0);
        assert_eq!(h.hop(0, 2), 0.0);
        assert_eq!(h.hopping().nnz(), 4);
    }

    #[test]
    fn power_law_ratio() {
        let t = build_lattice(&[10], 1.0).unwrap();
        let m = CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 6.0,
            cutoff: 20.0,
        };
        let h = build_couplings(&t, &m, &[0.0; 10]).unwrap();
        assert!((h.hop(3, 5) / h.hop(3, 4) - 0.015625).abs() < 1e-15);
    }

    #[test]
    fn steep_power_law_is_nearest_neighbor() {
        let t = build_lattice(&[30], 1.0).unwrap();
        let m = CouplingModel::PowerLaw {
            j0: 1.0,
            alpha: 40.0,
            cutoff: 20.0,
        };
        let h = build_couplings(&t, &m, &[0.0; 30]).unwrap();
        for i in 0..30 {
            let (c, v) = h.hopping().row(i);
            for (&j, &x) in c.iter().zip(v) {
                if (i as i64 - j as i64).abs() >= 2 {
                    assert!(x.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rydberg_hopping_matches_potential() {
        let p = DressingParams::new(1.0, -2.0, 2.0, 0.5).unwrap();
        let t = build_lattice(&[5], p.rtilde(1.0).recip()).unwrap();
        let m = CouplingModel::rydberg(p, 20.0);
        let h = build_couplings(&t, &m, &[0.0; 5]).unwrap();
        let (_, w_tilde) = effective_potentials(1.0, 0.5);
        assert!((w_tilde - 0.5 / 3.75).abs() < 1e-15);
        let expect = -0.5 * (1.0 / -2.0) / 2.0 * w_tilde;
        assert!((h.hop(1, 2) - expect).abs() < 1e-15);
        let r = t.spacing();
        assert_eq!(h.hop(1, 2), -0.5 * dressed_couplings(&p, r).1);
        let mut d0 = 0.0;
        for j in 1..5 {
            d0 += dressed_couplings(&p, j as f64 * r).0 - p.v_asymptote();
        }
        assert!((h.diagonal()[0] - d0).abs() < 1e-14);
    }

    #[test]
    fn holes_are_decoupled() {
        let t = punch_holes(&build_lattice(&[6, 6], 1.0).unwrap(), &[7, 20]).unwrap();
        let p = DressingParams::new(1.0, -2.0, 1.0, 0.5).unwrap();
        let m = CouplingModel::rydberg(p, 4.0);
        let h = build_couplings(&t, &m, &vec![1.0; 36]).unwrap();
        for hole in [7, 20] {
            assert!(h.hopping().row(hole).0.is_empty());
            assert_eq!(h.diagonal()[hole], 0.0);
            for i in 0..36 {
                assert_eq!(h.hop(i, hole), 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn hopping_is_symmetric(l in 2usize..9, w in 1usize..6, alpha in 1.5f64..8.0, cutoff in 1.0f64..6.0) {
            let t = build_lattice(&[l, w], 1.0).unwrap();
            let m = CouplingModel::PowerLaw { j0: 1.0, alpha, cutoff };
            let h = build_couplings(&t, &m, &vec![0.0; l * w]).unwrap();
            prop_assert!(h.hopping().is_symmetric());
        }

        #[test]
        fn clean_chain_is_translation_invariant(alpha in 1.5f64..8.0, cutoff in 1.0f64..8.0, m in 1i64..8) {
            let t = build_lattice(&[40], 1.0).unwrap();
            let model = CouplingModel::PowerLaw { j0: 1.0, alpha, cutoff };
            let h = build_couplings(&t, &model, &[0.0; 40]).unwrap();
            let reference = h.hop(0, m as usize);
            for n in 0..(40 - m as usize) {
                prop_assert_eq!(h.hop(n, n + m as usize), reference);
            }
        }
    }
}
