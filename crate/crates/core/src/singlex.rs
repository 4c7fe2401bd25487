//! Single-excitation states, their evolution, and observables.
//!
//! States are stored over every site of the table; holes carry zero amplitude
//! and no coupling, so evolution never populates them.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{invalid, Error};
use crate::lattice::{HamiltonianTerms, SiteTable};
use crate::propagator::{self, ChebyshevPropagator};
use crate::table::{Cell, Table};
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveState {
    amps: Vec<C64>,
    time: f64,
}

impl SpinWaveState {
    /// Normalized state from raw amplitudes; hole amplitudes are zeroed.
    pub fn from_amplitudes(table: &SiteTable, mut amps: Vec<C64>) -> Result<Self> {
        if amps.len() != table.len() {
            return invalid(format!(
                "{} amplitudes for {} sites",
                amps.len(),
                table.len()
            ));
        }
        for (a, &act) in amps.iter_mut().zip(table.active()) {
            if !act {
                *a = C64::new(0.0, 0.0);
            }
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateInput(
                "state has zero or non-finite norm".into(),
            ));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(SpinWaveState { amps, time: 0.0 })
    }

    /// State localized on one site.
    pub fn localized(table: &SiteTable, site: usize) -> Result<Self> {
        if site >= table.len() || !table.is_active(site) {
            return invalid(format!("site {site} is not an active site"));
        }
        let mut amps = vec![C64::new(0.0, 0.0); table.len()];
        amps[site] = C64::new(1.0, 0.0);
        Ok(SpinWaveState { amps, time: 0.0 })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }
    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
    /// `|⟨self|other⟩|`, insensitive to global phase.
    pub fn overlap(&self, other: &SpinWaveState) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm()
    }
}

/// Discrete Gaussian sum over an infinite axis relative to its continuum
/// value `√π σ`.
fn axis_discretization_error(sigma: f64, center: f64) -> f64 {
    let reach = (40.0 * sigma + 10.0).ceil() as i64;
    let c0 = center.round() as i64;
    let s: f64 = (c0 - reach..=c0 + reach)
        .map(|n| (-((n as f64 - center) / sigma).powi(2)).exp())
        .sum();
    (s / (PI.sqrt() * sigma) - 1.0).abs()
}

/// `ψ_n ∝ exp(−|x_n − x_c|²/(2σ₀²)) exp(i k₀·x_n)` on active sites, with
/// `x_n` the undisplaced label positions and `center` in label coordinates.
pub fn gaussian_packet(
    table: &SiteTable,
    sigma0: f64,
    center: &[f64],
    k0: &[f64],
) -> Result<SpinWaveState> {
    if !(sigma0 > 0.0) {
        return invalid(format!("sigma0 must be positive, got {sigma0}"));
    }
    let d = table.dim();
    if center.len() != d || (!k0.is_empty() && k0.len() != d) {
        return invalid(format!("center/momentum must have {d} components"));
    }
    for (ax, &c) in center.iter().enumerate() {
        if c < 0.0 || c > (table.extents()[ax] - 1) as f64 {
            return invalid(format!("center {center:?} outside the lattice"));
        }
    }
    let a = table.spacing();
    let s_lab = sigma0 / a;
    let err: f64 = center
        .iter()
        .map(|&c| axis_discretization_error(s_lab, c))
        .fold(0.0, f64::max);
    if err > 1e-6 {
        log::warn!("sigma0 = {sigma0} is too narrow: discretized norm deviates by {err:.2e}");
    }
    let xc = table.label_position(center);
    let amps = table
        .labels()
        .iter()
        .map(|l| {
            let x = table.label_position(&l.map(|c| c as f64));
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for ax in 0..d {
                r2 += (x[ax] - xc[ax]).powi(2);
                if let Some(k) = k0.get(ax) {
                    phase += k * x[ax];
                }
            }
            C64::from_polar((-r2 / (2.0 * sigma0 * sigma0)).exp(), phase)
        })
        .collect();
    SpinWaveState::from_amplitudes(table, amps)
}

/// Fraction of the infinite-lattice norm of the Gaussian that falls outside
/// the table.
pub fn gaussian_tail_loss(table: &SiteTable, sigma0: f64, center: &[f64]) -> f64 {
    let s = sigma0 / table.spacing();
    let mut kept = 1.0;
    for (ax, &c) in center.iter().enumerate() {
        let g = |n: i64| (-((n as f64 - c) / s).powi(2)).exp();
        let reach = (40.0 * s + 10.0).ceil() as i64;
        let c0 = c.round() as i64;
        let total: f64 = (c0 - reach..=c0 + reach).map(g).sum();
        let inside: f64 = (0..table.extents()[ax] as i64).map(g).sum();
        kept *= inside / total;
    }
    1.0 - kept
}

/// `(Hψ)_n = ε_n ψ_n − Σ_m J_nm ψ_m`.
pub fn apply_h(h: &HamiltonianTerms, psi: &[C64]) -> Vec<C64> {
    use crate::propagator::Hamiltonian;
    let mut y = vec![C64::new(0.0, 0.0); psi.len()];
    h.apply(psi, &mut y);
    y
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-14..=1e-6).contains(&tol) {
        return invalid(format!("tolerance must lie in [1e-14, 1e-6], got {tol}"));
    }
    Ok(())
}

/// `ψ(t+Δt) = exp(−iHΔt) ψ(t)`.
pub fn evolve(
    h: &HamiltonianTerms,
    state: &SpinWaveState,
    dt: f64,
    tol: f64,
) -> Result<SpinWaveState> {
    check_tol(tol)?;
    let mut out = state.clone();
    propagator::evolve(h, &mut out.amps, dt, tol)?;
    out.time += dt;
    Ok(out)
}

/// Repeated equal steps under one Hamiltonian.
pub struct Stepper<'a> {
    h: &'a HamiltonianTerms,
    prop: ChebyshevPropagator,
    dt: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(h: &'a HamiltonianTerms, dt: f64, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        Ok(Stepper {
            h,
            prop: ChebyshevPropagator::for_hamiltonian(h, dt, tol)?,
            dt,
        })
    }

    pub fn step(&self, state: &mut SpinWaveState) -> Result<()> {
        self.prop.propagate(self.h, &mut state.amps)?;
        state.time += self.dt;
        Ok(())
    }
}

/// `ψ_n → exp(−iφ_n) ψ_n`.
pub fn phase_imprint(state: &SpinWaveState, phi: &[f64]) -> Result<SpinWaveState> {
    if phi.len() != state.amps.len() {
        return invalid(format!(
            "{} phases for {} sites",
            phi.len(),
            state.amps.len()
        ));
    }
    let mut out = state.clone();
    for (i, (a, &p)) in out.amps.iter_mut().zip(phi).enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        if !p.is_finite() {
            return invalid(format!("non-finite phase at site {i}"));
        }
        *a *= C64::from_polar(1.0, -p);
    }
    Ok(out)
}

pub fn excitation_probability(state: &SpinWaveState) -> Vec<f64> {
    state.amps.iter().map(|a| a.norm_sqr()).collect()
}

/// Probability-weighted mean position.
pub fn mean_position(table: &SiteTable, p: &[f64]) -> [f64; 3] {
    let total: f64 = p.iter().sum();
    let mut m = [0.0; 3];
    for (x, &w) in table.positions().iter().zip(p) {
        for ax in 0..3 {
            m[ax] += w * x[ax];
        }
    }
    m.map(|v| v / total)
}

/// Per-axis widths `√2 · std(x)` of the density.
pub fn axis_widths(table: &SiteTable, state: &SpinWaveState) -> [f64; 3] {
    let p = excitation_probability(state);
    let total: f64 = p.iter().sum();
    let m = mean_position(table, &p);
    let mut var = [0.0; 3];
    for (x, &w) in table.positions().iter().zip(&p) {
        for ax in 0..3 {
            var[ax] += w * (x[ax] - m[ax]).powi(2);
        }
    }
    var.map(|v| (2.0 * v / total).sqrt())
}

/// Radial width `√((2/d) Σ_axis var)`, equal to `σ₀` for an isotropic
/// Gaussian packet of width `σ₀` in any dimension.
pub fn rms_width(table: &SiteTable, state: &SpinWaveState) -> f64 {
    let w = axis_widths(table, state);
    let d = table.dim();
    (w[..d].iter().map(|x| x * x).sum::<f64>() / d as f64).sqrt()
}

/// Probability within `radius` of `center` (label coordinates), selecting
/// sites by their undisplaced position.
pub fn focus_probability(
    table: &SiteTable,
    state: &SpinWaveState,
    center: &[f64],
    radius: f64,
) -> f64 {
    let c = table.label_position(center);
    let r2 = radius * radius * (1.0 + 1e-12) + 1e-12;
    table
        .labels()
        .iter()
        .zip(&state.amps)
        .filter(|(l, _)| {
            let x = table.label_position(&l.map(|v| v as f64));
            (0..3).map(|ax| (x[ax] - c[ax]).powi(2)).sum::<f64>() <= r2
        })
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// Snapshot CSV: labels, positions, amplitude and density per site.
pub fn snapshot_table(table: &SiteTable, state: &SpinWaveState) -> Table {
    let d = table.dim();
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = (0..d).map(|ax| format!("label_{}[1]", axes[ax])).collect();
    header.extend((0..d).map(|ax| format!("{}[a]", axes[ax])));
    header.extend([
        "re_psi[1]".to_string(),
        "im_psi[1]".to_string(),
        "p_n[1]".to_string(),
    ]);
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&hdr);
    for i in 0..table.len() {
        let mut row: Vec<Cell> = (0..d).map(|ax| Cell::Int(table.labels()[i][ax])).collect();
        row.extend((0..d).map(|ax| Cell::Real(table.positions()[i][ax] / table.spacing())));
        let a = state.amps[i];
        row.extend([Cell::Real(a.re), Cell::Real(a.im), Cell::Real(a.norm_sqr())]);
        t.push(row);
    }
    t
}

/// Lattice Wigner function sampled at every site and `k_j = −π/a + 2πj/(n_k a)`.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    /// Row-major: `values[n * k.len() + j]`.
    pub values: Vec<f64>,
    /// Largest imaginary residue encountered before taking the real part.
    pub max_imag: f64,
}

impl WignerGrid {
    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.k.len() + j]
    }

    /// `∫_BZ dk W(x_n, k)` by the periodic rectangle rule.
    pub fn marginal(&self, n: usize) -> f64 {
        let dk = 2.0 * PI / (self.k.len() as f64 * self.lattice_spacing());
        (0..self.k.len()).map(|j| self.at(n, j)).sum::<f64>() * dk
    }

    fn lattice_spacing(&self) -> f64 {
        if self.x.len() > 1 {
            self.x[1] - self.x[0]
        } else {
            1.0
        }
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["x[a]", "k[1/a]", "W[1]"]);
        let a = self.lattice_spacing();
        for (n, &x) in self.x.iter().enumerate() {
            for (j, &k) in self.k.iter().enumerate() {
                t.push(vec![
                    Cell::Real(x / a),
                    Cell::Real(k * a),
                    Cell::Real(self.at(n, j)),
                ]);
            }
        }
        t
    }
}

/// Evaluates `W(x_n,k) = (a/π)∫_{−π/2a}^{π/2a} dq ⟨k−q|ψ⟩⟨ψ|k+q⟩ e^{−2iqx_n}`
/// with `⟨k|ψ⟩ = √(a/2π) Σ_n e^{−ikx_n} ψ_n`.
///
/// With `n_k` momenta the `q` integral uses the trapezoid rule on `2 n_k`
/// intervals. All `k ± q` then fall on a grid of spacing `π/(2 n_k a)`, so the
/// momentum amplitudes come from one FFT and each `k` row from another.
pub fn wigner_lattice(
    table: &SiteTable,
    state: &SpinWaveState,
    momentum_resolution: usize,
) -> Result<WignerGrid> {
    if table.dim() != 1 {
        return Err(Error::Capability(
            "the lattice Wigner function is implemented for 1D only".into(),
        ));
    }
    let n_sites = table.len();
    if momentum_resolution < n_sites {
        return invalid(format!(
            "momentum resolution {momentum_resolution} below site count {n_sites}"
        ));
    }
    let a = table.spacing();
    let nk = momentum_resolution.max(2 * n_sites);
    let m = 2 * nk;
    let fine = 4 * nk;
    let mut planner = FftPlanner::<f64>::new();

    // f(lδ) = Σ_n e^{−i l δ n} ψ_n, δ = 2π/fine (in units of 1/a).
    let mut f = vec![C64::new(0.0, 0.0); fine];
    f[..n_sites].copy_from_slice(&state.amps);
    planner.plan_fft_forward(fine).process(&mut f);
    let f_at = |l: i64| f[l.rem_euclid(fine as i64) as usize];

    let row_fft = planner.plan_fft_forward(m);
    let prefactor = a * a / (2.0 * PI * PI) * (PI / (m as f64 * a));
    let mut values = vec![0.0; n_sites * nk];
    let mut max_imag: f64 = 0.0;
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for j in 0..nk {
        // k_j = −π + 4jδ, q_s = −π/2 + sδ; π = 2 nk δ.
        let kj = 4 * j as i64 - 2 * nk as i64;
        for s in 0..m {
            let q = s as i64 - nk as i64;
            buf[s] = f_at(kj - q) * f_at(kj + q).conj();
        }
        // Trapezoid endpoints s = 0 and s = m share the DFT phase.
        let q = nk as i64;
        buf[0] = 0.5 * (buf[0] + f_at(kj - q) * f_at(kj + q).conj());
        row_fft.process(&mut buf);
        for n in 0..n_sites {
            // e^{−2iq x_n} = e^{iπn} e^{−2πi s n/m}.
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let w = buf[n] * (sign * prefactor);
            max_imag = max_imag.max(w.im.abs());
            values[n * nk + j] = w.re;
        }
    }
    let x = (0..n_sites).map(|n| n as f64 * a).collect();
    let k = (0..nk)
        .map(|j| (-PI + 2.0 * PI * j as f64 / nk as f64) / a)
        .collect();
    Ok(WignerGrid {
        x,
        k,
        values,
        max_imag,
    })
}
