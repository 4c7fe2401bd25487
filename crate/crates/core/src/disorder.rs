//! Disorder ensembles (holes, positional noise), their statistics, and the
//! plane-wave energy broadening.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::lattice::{
    build_couplings, displace_sites, punch_holes, CouplingModel, HamiltonianTerms, SiteTable,
};
use crate::lens::{potential_profile, thin_phase_profile, LensDesign};
use crate::propagator::Hamiltonian;
use crate::singlex::{evolve, focus_probability, gaussian_packet, phase_imprint, rms_width};
use crate::sparse::CsrMatrix;
use crate::table::{Cell, Table};
use crate::{Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisorderKind {
    /// Holes placed uniformly, never on the focus site.
    Holes { count: usize },
    /// Gaussian displacement of every Cartesian component, std `delta` (in `a`).
    Displacement { delta: f64 },
}

/// A clean focusing protocol evaluated at a fixed time.
#[derive(Debug, Clone)]
pub struct BaseScenario {
    pub table: SiteTable,
    pub model: CouplingModel,
    pub design: LensDesign,
    pub sigma0: f64,
    /// Packet center, label coordinates.
    pub center: Vec<f64>,
    /// Focus, label coordinates.
    pub focus: Vec<f64>,
    /// Evaluation time (usually the clean focal time).
    pub t_eval: f64,
    pub tol: f64,
    /// Radius of the `P_foc` disk in `a`.
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Realization {
    pub index: usize,
    pub p_foc: f64,
    pub sigma_f: f64,
    /// Norm over active sites at the end of the evolution.
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub sem: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Summary {
            mean,
            std: var.sqrt(),
            sem: (var / n).sqrt(),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub records: Vec<Realization>,
    pub p_foc: Summary,
    pub sigma_f: Summary,
}

impl EnsembleStats {
    pub fn from_records(records: Vec<Realization>) -> Self {
        let p: Vec<f64> = records.iter().map(|r| r.p_foc).collect();
        let s: Vec<f64> = records.iter().map(|r| r.sigma_f).collect();
        EnsembleStats {
            p_foc: Summary::of(&p),
            sigma_f: Summary::of(&s),
            records,
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["realization[1]", "P_foc[1]", "sigma_f[a]"]);
        for r in &self.records {
            t.push(vec![
                Cell::from(r.index),
                Cell::Real(r.p_foc),
                Cell::Real(r.sigma_f),
            ]);
        }
        t
    }
}

/// Random stream of realization `r`: independent of scheduling.
pub fn realization_rng(master_seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(r as u64);
    rng
}

impl BaseScenario {
    fn focus_site(&self) -> Result<usize> {
        let label: Vec<i64> = self.focus.iter().map(|c| c.round() as i64).collect();
        self.table
            .index_of(&label)
            .ok_or_else(|| Error::InvalidSpec("focus outside the lattice".into()))
    }

    /// Disordered copy of the lattice for realization `r`.
    pub fn disordered_table(
        &self,
        kind: DisorderKind,
        master_seed: u64,
        r: usize,
    ) -> Result<SiteTable> {
        let mut rng = realization_rng(master_seed, r);
        match kind {
            DisorderKind::Holes { count } => {
                let focus = self.focus_site()?;
                let candidates: Vec<usize> = (0..self.table.len())
                    .filter(|&i| i != focus && self.table.is_active(i))
                    .collect();
                if count >= candidates.len() {
                    return invalid(format!(
                        "{count} holes but only {} candidate sites",
                        candidates.len()
                    ));
                }
                let picks: Vec<usize> = sample(&mut rng, candidates.len(), count)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect();
                punch_holes(&self.table, &picks)
            }
            DisorderKind::Displacement { delta } => {
                if !(delta >= 0.0) || !delta.is_finite() {
                    return invalid(format!("displacement std must be >= 0, got {delta}"));
                }
                if delta == 0.0 {
                    return Ok(self.table.clone());
                }
                let normal = Normal::new(0.0, delta * self.table.spacing())
                    .map_err(|e| Error::InvalidSpec(e.to_string()))?;
                let d = self.table.dim();
                let disp: Vec<Vec<f64>> = (0..self.table.len())
                    .map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect())
                    .collect();
                displace_sites(&self.table, &disp)
            }
        }
    }

    /// Runs the protocol on `table` and measures at `t_eval`.
    pub fn run_on(&self, table: &SiteTable, index: usize) -> Result<Realization> {
        let lens = potential_profile(&self.design, table)?;
        let h = build_couplings(table, &self.model, &lens)?;
        let mut s = gaussian_packet(table, self.sigma0, &self.center, &[])?;
        if let LensDesign::Thin { .. } = self.design {
            s = phase_imprint(&s, &thin_phase_profile(&self.design, table)?)?;
        }
        let s = evolve(&h, &s, self.t_eval, self.tol)?;
        let norm = s
            .amplitudes()
            .iter()
            .zip(table.active())
            .filter(|(_, &a)| a)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        Ok(Realization {
            index,
            p_foc: focus_probability(table, &s, &self.focus, self.radius),
            sigma_f: rms_width(table, &s),
            norm,
        })
    }

    pub fn run_clean(&self) -> Result<Realization> {
        self.run_on(&self.table, 0)
    }
}

/// Runs `realizations` disordered copies in parallel; records are ordered
/// by realization index.
pub fn run_ensemble(
    base: &BaseScenario,
    kind: DisorderKind,
    realizations: usize,
    master_seed: u64,
) -> Result<EnsembleStats> {
    if realizations == 0 {
        return invalid("need at least one realization");
    }
    let records: Result<Vec<Realization>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let t = base.disordered_table(kind, master_seed, r)?;
            base.run_on(&t, r)
        })
        .collect();
    Ok(EnsembleStats::from_records(records?))
}

/// Finite-lattice plane wave `|k⟩ = N^{-1/2} Σ e^{ik·x_n}|n⟩` over the sites
/// active in `mask`, using label positions.
pub fn plane_wave(table: &SiteTable, mask: &[bool], k: &[f64]) -> Vec<C64> {
    let n = mask.iter().filter(|&&a| a).count() as f64;
    table
        .labels()
        .iter()
        .zip(mask)
        .map(|(l, &a)| {
            if !a {
                return C64::new(0.0, 0.0);
            }
            let ph: f64 = k
                .iter()
                .enumerate()
                .map(|(ax, kk)| kk * l[ax] as f64 * table.spacing())
                .sum();
            C64::from_polar(1.0 / n.sqrt(), ph)
        })
        .collect()
}

/// `(⟨k|Δ²|k⟩, ⟨k|Δ|k⟩)` for a perturbation applied by `delta`.
fn moments(k: &[C64], delta: impl Fn(&[C64], &mut [C64])) -> (f64, f64) {
    let mut v = vec![C64::new(0.0, 0.0); k.len()];
    delta(k, &mut v);
    let second: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let first: f64 = k.iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum();
    (second, first)
}

fn mask_of(a: &HamiltonianTerms, b: &HamiltonianTerms) -> Vec<bool> {
    a.active()
        .iter()
        .zip(b.active())
        .map(|(x, y)| *x && *y)
        .collect()
}

/// Energy uncertainty `√(⟨k|Δ²|k⟩ − ⟨k|Δ|k⟩²)` of the plane wave under
/// `Δ = H − H₀`; zero for a uniform shift.
pub fn plane_wave_broadening(
    h: &HamiltonianTerms,
    h0: &HamiltonianTerms,
    table: &SiteTable,
    k: &[f64],
) -> Result<f64> {
    let (m2, m1) = plane_wave_moments(h, h0, table, k)?;
    Ok((m2 - m1 * m1).max(0.0).sqrt())
}

/// `√⟨k|(H − H₀)²|k⟩` without removing the mean shift.
pub fn plane_wave_second_moment(
    h: &HamiltonianTerms,
    h0: &HamiltonianTerms,
    table: &SiteTable,
    k: &[f64],
) -> Result<f64> {
    Ok(plane_wave_moments(h, h0, table, k)?.0.sqrt())
}

fn plane_wave_moments(
    h: &HamiltonianTerms,
    h0: &HamiltonianTerms,
    table: &SiteTable,
    k: &[f64],
) -> Result<(f64, f64)> {
    if h.dim() != h0.dim() || h.dim() != table.len() {
        return invalid("Hamiltonians and table differ in size");
    }
    let mask = mask_of(h, h0);
    let kv = plane_wave(table, &mask, k);
    Ok(moments(&kv, |x, y| {
        let mut y0 = vec![C64::new(0.0, 0.0); x.len()];
        h.apply(x, y);
        h0.apply(x, &mut y0);
        for ((a, b), &m) in y.iter_mut().zip(&y0).zip(&mask) {
            *a = if m { *a - b } else { C64::new(0.0, 0.0) };
        }
    }))
}

/// First-order change of the couplings under displacements `d`:
/// `δJ_ij = J′(r_ij) û_ij·(d_j − d_i)` and the matching diagonal change.
pub fn linearized_perturbation(
    table: &SiteTable,
    model: &CouplingModel,
    d: &[Vec<f64>],
) -> Result<(CsrMatrix, Vec<f64>)> {
    if d.len() != table.len() {
        return invalid("displacement count does not match the table");
    }
    let clean = build_couplings(table, model, &vec![0.0; table.len()])?;
    let a = table.spacing();
    let mut pairs = Vec::new();
    let mut diag = vec![0.0; table.len()];
    for i in 0..table.len() {
        let (cols, _) = clean.hopping().row(i);
        for &j in cols.iter().filter(|&&j| j > i) {
            let (pi, pj) = (table.positions()[i], table.positions()[j]);
            let r = (0..3)
                .map(|ax| (pj[ax] - pi[ax]).powi(2))
                .sum::<f64>()
                .sqrt();
            let proj: f64 = (0..table.dim())
                .map(|ax| (pj[ax] - pi[ax]) / r * (d[j][ax] - d[i][ax]))
                .sum();
            match *model {
                CouplingModel::NearestNeighbor { .. } => {}
                CouplingModel::PowerLaw { j0, alpha, .. } => {
                    let dj = -alpha * j0 / (r / a).powf(alpha + 1.0) / a;
                    pairs.push((i, j, dj * proj));
                }
                CouplingModel::RydbergDressed { .. } => {
                    let p = model.dressing().expect("rydberg variant");
                    let (dv, dw) = p.coupling_derivatives(r);
                    pairs.push((i, j, -0.5 * dw * proj));
                    diag[i] += dv * proj;
                    diag[j] += dv * proj;
                }
            }
        }
    }
    Ok((CsrMatrix::from_symmetric_pairs(table.len(), &pairs), diag))
}

/// Plane-wave broadening of the linearized perturbation.
pub fn linearized_broadening(
    table: &SiteTable,
    model: &CouplingModel,
    d: &[Vec<f64>],
    k: &[f64],
) -> Result<f64> {
    let (dj, dd) = linearized_perturbation(table, model, d)?;
    let kv = plane_wave(table, table.active(), k);
    let (m2, m1) = moments(&kv, |x, y| dj.apply_shifted(&dd, x, y));
    Ok((m2 - m1 * m1).max(0.0).sqrt())
}

/// One row of a breakdown scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub sigma0: f64,
    pub t_foc: f64,
    pub delta: f64,
    pub ratio: f64,
    pub ratio_sem: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakdownScan {
    pub rows: Vec<BreakdownRow>,
    /// `(σ₀, t_foc, δ_c)`; `δ_c` is NaN if the ratio never exceeds 2.
    pub crossovers: Vec<(f64, f64, f64)>,
}

impl BreakdownScan {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "sigma0[a]",
            "t_foc[1/J]",
            "delta[a]",
            "ratio[1]",
            "ratio_sem[1]",
        ]);
        for r in &self.rows {
            t.push(vec![
                Cell::Real(r.sigma0),
                Cell::Real(r.t_foc),
                Cell::Real(r.delta),
                Cell::Real(r.ratio),
                Cell::Real(r.ratio_sem),
            ]);
        }
        t
    }
}

/// First `δ` where the ratio exceeds `level`, interpolated in `log δ`
/// against the previous grid point.
pub fn crossover(deltas: &[f64], ratios: &[f64], level: f64) -> f64 {
    for i in 0..deltas.len() {
        if ratios[i] > level {
            if i == 0 || deltas[i - 1] <= 0.0 {
                return deltas[i];
            }
            let (d0, d1) = (deltas[i - 1].ln(), deltas[i].ln());
            let f = (level - ratios[i - 1]) / (ratios[i] - ratios[i - 1]);
            return (d0 + f * (d1 - d0)).exp();
        }
    }
    f64::NAN
}

/// Mean `σ_f^δ/σ_f^(0)` per `δ` for each base scenario.
pub fn breakdown_scan(
    bases: &[BaseScenario],
    deltas: &[f64],
    realizations: usize,
    master_seed: u64,
) -> Result<BreakdownScan> {
    if deltas.windows(2).any(|w| w[1] < w[0]) {
        return invalid("delta grid must be ascending");
    }
    let mut rows = Vec::new();
    let mut crossovers = Vec::new();
    for base in bases {
        let clean = base.run_clean()?.sigma_f;
        let mut ratios = Vec::new();
        for &delta in deltas {
            let st = run_ensemble(
                base,
                DisorderKind::Displacement { delta },
                realizations,
                master_seed,
            )?;
            let r: Vec<f64> = st.records.iter().map(|x| x.sigma_f / clean).collect();
            let s = Summary::of(&r);
            rows.push(BreakdownRow {
                sigma0: base.sigma0,
                t_foc: base.t_eval,
                delta,
                ratio: s.mean,
                ratio_sem: s.sem,
            });
            ratios.push(s.mean);
        }
        crossovers.push((base.sigma0, base.t_eval, crossover(deltas, &ratios, 2.0)));
    }
    Ok(BreakdownScan { rows, crossovers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::rydberg::DressingParams;

    fn base_1d() -> BaseScenario {
        let table = build_lattice(&[40], 1.0).unwrap();
        BaseScenario {
            table,
            model: CouplingModel::PowerLaw {
                j0: 1.0,
                alpha: 6.0,
                cutoff: 20.0,
            },
            design: LensDesign::thick(vec![0.01], vec![20.0]),
            sigma0: 6.0,
            center: vec![20.0],
            focus: vec![20.0],
            t_eval: 7.0,
            tol: 1e-10,
            radius: 3.0,
        }
    }

    #[test]
    fn zero_disorder_reproduces_clean_run() {
        let b = base_1d();
        let clean = b.run_clean().unwrap();
        for kind in [
            DisorderKind::Holes { count: 0 },
            DisorderKind::Displacement { delta: 0.0 },
        ] {
            let st = run_ensemble(&b, kind, 4, 7).unwrap();
            assert!(st
                .records
                .iter()
                .all(|r| r.p_foc == clean.p_foc && r.sigma_f == clean.sigma_f));
            assert_eq!(st.p_foc.std, 0.0);
        }
    }

    #[test]
    fn holes_avoid_focus_and_conserve_norm() {
        let b = base_1d();
        for r in 0..50 {
            let t = b
                .disordered_table(DisorderKind::Holes { count: 3 }, 11, r)
                .unwrap();
            assert!(t.is_active(20));
            assert_eq!(t.n_active(), 37);
        }
        let st = run_ensemble(&b, DisorderKind::Holes { count: 2 }, 6, 3).unwrap();
        for r in &st.records {
            assert!((r.norm - 1.0).abs() < 1e-10);
        }
        assert!(run_ensemble(&b, DisorderKind::Holes { count: 39 }, 1, 3).is_err());
    }

    #[test]
    fn ensemble_is_deterministic_across_thread_counts() {
        let b = base_1d();
        let kind = DisorderKind::Displacement { delta: 0.05 };
        let a = run_ensemble(&b, kind, 8, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| run_ensemble(&b, kind, 8, 42).unwrap());
        assert_eq!(a.records, c.records);
        let d = run_ensemble(&b, kind, 8, 43).unwrap();
        assert_ne!(a.records, d.records);
    }

    #[test]
    fn broadening_of_diagonal_perturbation() {
        let t = build_lattice(&[16], 1.0).unwrap();
        let m = CouplingModel::nearest_neighbor();
        let h0 = build_couplings(&t, &m, &[0.0; 16]).unwrap();
        assert_eq!(plane_wave_broadening(&h0, &h0, &t, &[0.3]).unwrap(), 0.0);
        let eta: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 * 0.1 - 0.2).collect();
        let h = build_couplings(&t, &m, &eta).unwrap();
        let n = 16.0;
        let mean = eta.iter().sum::<f64>() / n;
        let expect = (eta.iter().map(|e| e * e).sum::<f64>() / n - mean * mean).sqrt();
        let k = 2.0 * std::f64::consts::PI * 3.0 / 16.0;
        assert!((plane_wave_broadening(&h, &h0, &t, &[k]).unwrap() - expect).abs() < 1e-14);
        let raw = plane_wave_second_moment(&h, &h0, &t, &[k]).unwrap();
        assert!((raw * raw - eta.iter().map(|e| e * e).sum::<f64>() / n).abs() < 1e-14);
    }

    #[test]
    fn linearized_broadening_matches_exact_for_small_delta() {
        let p = DressingParams::new(1.0, -2.0, 1.0, 0.7).unwrap();
        let a = 1.0 / p.rtilde(1.0) * (1.0 - 0.49f64).sqrt().powf(1.0 / 6.0);
        let t = build_lattice(&[60], a).unwrap();
        let m = CouplingModel::rydberg(p, 6.0);
        let base = BaseScenario {
            table: t.clone(),
            model: m,
            ..base_1d()
        };
        let td = base
            .disordered_table(DisorderKind::Displacement { delta: 0.005 }, 5, 0)
            .unwrap();
        let d: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![td.positions()[i][0] - t.positions()[i][0]])
            .collect();
        let h0 = build_couplings(&t, &m, &[0.0; 60]).unwrap();
        let h = build_couplings(&td, &m, &[0.0; 60]).unwrap();
        let k = 0.4 / a;
        let exact = plane_wave_broadening(&h, &h0, &t, &[k]).unwrap();
        let lin = linearized_broadening(&t, &m, &d, &[k]).unwrap();
        assert!((lin / exact - 1.0).abs() < 0.05, "{lin} vs {exact}");
    }

    #[test]
    fn crossover_interpolates() {
        let d = [0.0, 0.01, 0.1];
        assert!(
            (crossover(&d, &[1.0, 1.5, 2.5], 2.0) - (0.01f64.ln() * 0.5 + 0.1f64.ln() * 0.5).exp())
                .abs()
                < 1e-12
        );
        assert!(crossover(&d, &[1.0, 1.1, 1.2], 2.0).is_nan());
    }
}
