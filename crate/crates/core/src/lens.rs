//! Lens designs, continuum predictions, lattice thresholds, dispersion
//! relations, the semiclassical wing model, and lens-strength optimization.
//!
//! All formulas take `J` as the nearest-neighbour hopping and `a` as the
//! lattice spacing; potentials are `ε_n = V_n` on the diagonal of `H`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};
use crate::lattice::{HamiltonianTerms, SiteTable};
use crate::protocol::{minimize_width, FocusPoint};
use crate::singlex::{phase_imprint, SpinWaveState};
use crate::table::{Cell, Table};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThinProfile {
    #[default]
    Parabolic,
    /// Stationary-time profile that removes the band-curvature aberration.
    Corrected,
}

/// One focusing region of a multi-well thick lens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensRegion {
    /// Focus in label coordinates.
    pub focus: Vec<f64>,
    /// `v₂, v₄, …` in `J` per `site^{2q}`.
    pub coeffs: Vec<f64>,
    /// Optional inclusive label box `[lo, hi]` per axis; when every region
    /// has one they replace the nearest-focus partition.
    #[serde(default)]
    pub bounds: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LensDesign {
    /// `V = Σ_q v_{2q} r^{2q}` with `r` the label distance to the focus.
    Thick {
        coeffs: Vec<f64>,
        focus: Vec<f64>,
    },
    /// Instantaneous phase `φ(r)` imprinted before free evolution.
    Thin {
        phi0: f64,
        focus: Vec<f64>,
        #[serde(default)]
        profile: ThinProfile,
    },
    Multifocal {
        regions: Vec<LensRegion>,
    },
}

/// Largest supported polynomial order `Q`.
pub const MAX_ORDER: usize = 8;

fn check_coeffs(coeffs: &[f64], single_well: bool) -> Result<()> {
    if coeffs.is_empty() || coeffs.len() > MAX_ORDER / 2 {
        return invalid(format!(
            "lens needs 1..={} coefficients, got {}",
            MAX_ORDER / 2,
            coeffs.len()
        ));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return invalid("non-finite lens coefficient");
    }
    if single_well && !(coeffs[0] > 0.0) {
        return invalid(format!("v2 must be positive, got {}", coeffs[0]));
    }
    Ok(())
}

fn check_point(table: &SiteTable, p: &[f64], what: &str) -> Result<()> {
    if p.len() != table.dim() {
        return invalid(format!(
            "{what} has {} components in {}D",
            p.len(),
            table.dim()
        ));
    }
    Ok(())
}

fn label_dist2(label: &[i64; 3], focus: &[f64]) -> f64 {
    focus
        .iter()
        .enumerate()
        .map(|(ax, f)| (label[ax] as f64 - f).powi(2))
        .sum()
}

fn poly_even(coeffs: &[f64], r2: f64) -> f64 {
    let mut acc = 0.0;
    let mut p = r2;
    for c in coeffs {
        acc += c * p;
        p *= r2;
    }
    acc
}

impl LensDesign {
    pub fn thick(coeffs: Vec<f64>, focus: Vec<f64>) -> Self {
        LensDesign::Thick { coeffs, focus }
    }

    pub fn thin(phi0: f64, focus: Vec<f64>, profile: ThinProfile) -> Self {
        LensDesign::Thin {
            phi0,
            focus,
            profile,
        }
    }

    pub fn validate(&self, table: &SiteTable) -> Result<()> {
        match self {
            LensDesign::Thick { coeffs, focus } => {
                check_coeffs(coeffs, true)?;
                check_point(table, focus, "focus")
            }
            LensDesign::Thin { phi0, focus, .. } => {
                if !(*phi0 > 0.0) || !phi0.is_finite() {
                    return invalid(format!("phi0 must be positive, got {phi0}"));
                }
                check_point(table, focus, "focus")
            }
            LensDesign::Multifocal { regions } => {
                if regions.is_empty() {
                    return invalid("multifocal lens without regions");
                }
                let boxed = regions.iter().filter(|r| r.bounds.is_some()).count();
                if boxed != 0 && boxed != regions.len() {
                    return invalid("either all or no multifocal regions may carry bounds");
                }
                for r in regions {
                    check_coeffs(&r.coeffs, false)?;
                    check_point(table, &r.focus, "focus")?;
                    if let Some(b) = &r.bounds {
                        if b.len() != table.dim() || b.iter().any(|[lo, hi]| lo > hi) {
                            return invalid("region bounds need one ordered [lo, hi] per axis");
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Focus of a single-focus design.
    pub fn focus(&self) -> Option<&[f64]> {
        match self {
            LensDesign::Thick { focus, .. } | LensDesign::Thin { focus, .. } => Some(focus),
            LensDesign::Multifocal { .. } => None,
        }
    }
}

/// Region index of every site: explicit boxes if given (first match wins),
/// otherwise the nearest focus with ties going to the lower index.
pub fn assign_regions(regions: &[LensRegion], table: &SiteTable) -> Result<Vec<usize>> {
    let boxed = regions.first().is_some_and(|r| r.bounds.is_some());
    table
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if boxed {
                regions
                    .iter()
                    .position(|r| {
                        r.bounds
                            .as_ref()
                            .unwrap()
                            .iter()
                            .enumerate()
                            .all(|(ax, [lo, hi])| {
                                let c = l[ax] as f64;
                                c >= *lo && c <= *hi
                            })
                    })
                    .ok_or_else(|| {
                        Error::InvalidSpec(format!("site {i} ({l:?}) lies in no lens region"))
                    })
            } else {
                let mut best = (0usize, f64::INFINITY);
                for (k, r) in regions.iter().enumerate() {
                    let d = label_dist2(l, &r.focus);
                    if d < best.1 - 1e-9 {
                        best = (k, d);
                    }
                }
                Ok(best.0)
            }
        })
        .collect()
}

/// Per-site potential `ε_n` of a thick or multifocal design (zero for thin).
pub fn potential_profile(design: &LensDesign, table: &SiteTable) -> Result<Vec<f64>> {
    design.validate(table)?;
    match design {
        LensDesign::Thick { coeffs, focus } => Ok(table
            .labels()
            .iter()
            .map(|l| poly_even(coeffs, label_dist2(l, focus)))
            .collect()),
        LensDesign::Thin { .. } => Ok(vec![0.0; table.len()]),
        LensDesign::Multifocal { regions } => {
            let owner = assign_regions(regions, table)?;
            Ok(table
                .labels()
                .iter()
                .zip(&owner)
                .map(|(l, &k)| poly_even(&regions[k].coeffs, label_dist2(l, &regions[k].focus)))
                .collect())
        }
    }
}

/// Corrected thin-lens phase at radial label distance `r ≥ 0`.
///
/// Under `ψ → e^{−iφ}ψ` the local kick is `−φ′(r)`. Requiring every point to
/// arrive at the focus at `t_f = 1/(2Jφ₀)` with group velocity `2J sin k`
/// gives `φ′ = arcsin(φ₀ r)`, integrated to
/// `φ = r arcsin(φ₀r) + √(1−φ₀²r²)/φ₀ − 1/φ₀` for `r ≤ 1/φ₀`; farther out
/// the phase continues linearly with the boundary slope `π/2`.
pub fn corrected_phase(r: f64, phi0: f64) -> f64 {
    let r = r.abs();
    let r_max = 1.0 / phi0;
    if r <= r_max {
        let s = (phi0 * r).min(1.0);
        // √(1−s²) − 1 written without cancellation.
        r * s.asin() - s * s / (phi0 * (1.0 + (1.0 - s * s).max(0.0).sqrt()))
    } else {
        let edge = r_max * PI / 2.0 - 1.0 / phi0;
        edge + PI / 2.0 * (r - r_max)
    }
}

/// The closed form `−x arcsin(φ₀x) − √(φ₀² − x²)` exactly as commonly
/// printed; it is real only for `|x| ≤ φ₀`. Kept for comparison.
pub fn printed_corrected_phase(x: f64, phi0: f64) -> Option<f64> {
    if x.abs() > phi0 {
        return None;
    }
    Some(-x * (phi0 * x).clamp(-1.0, 1.0).asin() - (phi0 * phi0 - x * x).sqrt())
}

/// Per-site phase `φ_n` of a thin design.
pub fn thin_phase_profile(design: &LensDesign, table: &SiteTable) -> Result<Vec<f64>> {
    design.validate(table)?;
    let LensDesign::Thin {
        phi0,
        focus,
        profile,
    } = design
    else {
        return invalid("thin_phase_profile needs a thin design");
    };
    Ok(table
        .labels()
        .iter()
        .map(|l| {
            let r2 = label_dist2(l, focus);
            match profile {
                ThinProfile::Parabolic => phi0 * r2,
                ThinProfile::Corrected => corrected_phase(r2.sqrt(), *phi0),
            }
        })
        .collect())
}

/// Harmonic-oscillator description of a thick quadratic lens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumPrediction {
    pub omega: f64,
    pub mass: f64,
    pub ell: f64,
    pub t_f: f64,
    pub sigma_f: f64,
}

impl ContinuumPrediction {
    /// `σ(t)` from `σ² = σ₀²[cos²ωt + (ℓ/σ₀)⁴ sin²ωt]`, recovering `σ₀`
    /// from `σ_f = ℓ²/σ₀`.
    pub fn width_at(&self, t: f64) -> f64 {
        let s0 = self.ell * self.ell / self.sigma_f;
        let (s, c) = (self.omega * t).sin_cos();
        s0 * (c * c + (self.ell / s0).powi(4) * s * s).sqrt()
    }
}

pub fn continuum_thick(v0: f64, j: f64, a: f64, sigma0: f64) -> ContinuumPrediction {
    let omega = 2.0 * (v0 * j).sqrt();
    let ell = a * (j / v0).powf(0.25);
    ContinuumPrediction {
        omega,
        mass: 1.0 / (2.0 * j * a * a),
        ell,
        t_f: PI / (2.0 * omega),
        sigma_f: ell * ell / sigma0,
    }
}

/// Thin-lens focal time and width, `(t_f, σ_f)`, in the commonly quoted
/// closed form `Jt_f = 2s⁴φ₀/(4φ₀²s⁴+1)`, `σ_f = σ₀/√(4φ₀²s⁴+1)`, `s = σ₀/a`.
pub fn continuum_thin(phi0: f64, sigma0: f64, a: f64, j: f64) -> (f64, f64) {
    let s4 = (sigma0 / a).powi(4);
    let den = 4.0 * phi0 * phi0 * s4 + 1.0;
    (2.0 * s4 * phi0 / den / j, sigma0 / den.sqrt())
}

/// Thin-lens focus of the continuum Gaussian `e^{−x²/(2σ₀²) − iφ₀x²/a²}`
/// evolving with mass `1/(2Ja²)`: the same width, at `Jt_f = s⁴φ₀/(4φ₀²s⁴+1)`.
pub fn continuum_thin_gaussian(phi0: f64, sigma0: f64, a: f64, j: f64) -> (f64, f64) {
    let s4 = (sigma0 / a).powi(4);
    let den = 4.0 * phi0 * phi0 * s4 + 1.0;
    (s4 * phi0 / den / j, sigma0 / den.sqrt())
}

/// Lattice-correction thresholds and strength scalings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Distance beyond which a quadratic potential drives Bloch oscillations.
    pub sigma_bo: f64,
    /// Potential strength whose `σ_BO` equals `σ₀`.
    pub v_bo: f64,
    /// Phase strength whose kick at `σ₀` reaches the band edge scale.
    pub phi_bo: f64,
    /// `J (a/σ₀)^{8/3}`; the optimum carries an empirical prefactor.
    pub v_opt_scale: f64,
    /// `(a/σ₀)^{4/3}`; same caveat.
    pub phi_opt_scale: f64,
    /// Critical momentum of the thick lens at strength `v₀`.
    pub k_c_thick: f64,
    /// Critical momentum of the thin lens at strength `φ₀`.
    pub k_c_thin: f64,
    pub prefactor_empirical: bool,
}

pub fn thresholds(sigma0: f64, v0: f64, phi0: f64, j: f64, a: f64) -> Thresholds {
    let ratio = a / sigma0;
    Thresholds {
        sigma_bo: sigma_bo(v0, j, a),
        v_bo: 4.0 * j * ratio * ratio,
        phi_bo: ratio,
        v_opt_scale: j * ratio.powf(8.0 / 3.0),
        phi_opt_scale: ratio.powf(4.0 / 3.0),
        k_c_thick: (2304.0 * v0 / (PI * PI * j)).powf(0.125) / a,
        k_c_thin: (24.0 * phi0).powf(0.25) / a,
        prefactor_empirical: true,
    }
}

pub fn sigma_bo(v0: f64, j: f64, a: f64) -> f64 {
    2.0 * a * (j / v0).sqrt()
}

pub fn v_bo(sigma0: f64, j: f64, a: f64) -> f64 {
    4.0 * j * (a / sigma0).powi(2)
}

pub fn phi_bo(sigma0: f64, a: f64) -> f64 {
    a / sigma0
}

/// Band structure of the hopping model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dispersion {
    /// `ε(k) = 2J[1 − cos ka]`.
    NearestNeighbor { j: f64 },
    /// `ε(k) = 2J₀ Σ_n [1 − cos nka]/n^α`, infinite range.
    PowerLaw { j0: f64, alpha: f64 },
}

const TAIL_TOL: f64 = 1e-13;
const MAX_TERMS: f64 = 1e7;

/// Kahan-compensated accumulator.
#[derive(Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `Σ_{n>N} n^{−s}` by Euler–Maclaurin.
fn zeta_tail(s: f64, n: f64) -> f64 {
    n.powf(1.0 - s) / (s - 1.0) - 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

impl Dispersion {
    fn check(&self) -> Result<()> {
        if let Dispersion::PowerLaw { alpha, .. } = *self {
            if alpha <= 1.0 {
                return Err(Error::Divergence(format!(
                    "power-law dispersion diverges for alpha = {alpha} <= 1"
                )));
            }
        }
        Ok(())
    }

    /// Number of direct terms: enough that both the Euler–Maclaurin and
    /// the summation-by-parts remainders fall below `TAIL_TOL`. Accuracy
    /// degrades for `θ → 0` when `α < 3` because of the `1e7` term cap.
    fn terms(alpha: f64, theta: f64) -> usize {
        let s = theta.abs().max(1e-300);
        let osc = (alpha / (s * s * TAIL_TOL)).powf(1.0 / (alpha + 1.0));
        (64.0 / s).max(osc).clamp(64.0, MAX_TERMS) as usize
    }

    /// `ε(k)` in units of the hopping scale, `|ka| ≤ π`.
    pub fn energy(&self, k: f64, a: f64) -> Result<f64> {
        self.check()?;
        let th = k * a;
        match *self {
            Dispersion::NearestNeighbor { j } => Ok(2.0 * j * (1.0 - th.cos())),
            Dispersion::PowerLaw { j0, alpha } => {
                if th == 0.0 {
                    return Ok(0.0);
                }
                let n_max = Self::terms(alpha, th);
                let mut acc = Kahan::default();
                for n in 1..=n_max {
                    let nf = n as f64;
                    acc.add((1.0 - (nf * th).cos()) * nf.powf(-alpha));
                }
                // Σ_{n>N} 1/n^α − Σ_{n>N} cos(nθ)/n^α.
                let nf = n_max as f64;
                let plain = zeta_tail(alpha, nf);
                let half = (0.5 * th).sin();
                let osc = -(nf + 1.0).powf(-alpha) * ((nf + 0.5) * th).sin() / (2.0 * half);
                Ok(2.0 * j0 * (acc.sum + plain - osc))
            }
        }
    }

    /// `v_g = dε/dk`.
    pub fn group_velocity(&self, k: f64, a: f64) -> Result<f64> {
        self.check()?;
        let th = k * a;
        match *self {
            Dispersion::NearestNeighbor { j } => Ok(2.0 * j * a * th.sin()),
            Dispersion::PowerLaw { j0, alpha } => {
                if th == 0.0 || th.abs() == PI {
                    return Ok(0.0);
                }
                let n_max = Self::terms(alpha - 1.0, th);
                let mut acc = Kahan::default();
                for n in 1..=n_max {
                    let nf = n as f64;
                    acc.add((nf * th).sin() * nf.powf(1.0 - alpha));
                }
                let nf = n_max as f64;
                let half = (0.5 * th).sin();
                let osc = (nf + 1.0).powf(1.0 - alpha) * ((nf + 0.5) * th).cos() / (2.0 * half);
                Ok(2.0 * j0 * a * (acc.sum + osc))
            }
        }
    }

    /// `ε(k)` over a uniform grid of `samples` points on `[0, π/a]`.
    pub fn table(&self, a: f64, samples: usize) -> Result<Table> {
        let mut t = Table::new(&["k[1/a]", "epsilon[J]", "v_g[J a]"]);
        let n = samples.max(2);
        for i in 0..n {
            let k = PI / a * i as f64 / (n - 1) as f64;
            t.push(vec![
                Cell::Real(k * a),
                Cell::Real(self.energy(k, a)?),
                Cell::Real(self.group_velocity(k, a)?),
            ]);
        }
        Ok(t)
    }
}

/// Effective mass hopping `½ Σ_m J_cm |x_m − x_c|² / (d a²)` around `site`;
/// equals `J` for nearest-neighbour chains and `J₀ Σ n^{2−α}` for power laws.
pub fn effective_hopping(h: &HamiltonianTerms, table: &SiteTable, site: usize) -> f64 {
    let (cols, vals) = h.hopping().row(site);
    let xc = table.positions()[site];
    let mut s = 0.0;
    for (&m, &jm) in cols.iter().zip(vals) {
        let xm = table.positions()[m];
        s += jm * (0..3).map(|ax| (xm[ax] - xc[ax]).powi(2)).sum::<f64>();
    }
    0.5 * s / (table.dim() as f64 * table.spacing().powi(2))
}

/// Dormand–Prince 5(4) with adaptive steps; calls `record` after each step.
fn dopri5<F, R>(
    f: F,
    y0: [f64; 2],
    t_end: f64,
    rtol: f64,
    atol: f64,
    mut record: R,
) -> Result<[f64; 2]>
where
    F: Fn(&[f64; 2]) -> [f64; 2],
    R: FnMut(f64, &[f64; 2]),
{
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut t = 0.0;
    let mut y = y0;
    let mut h = (t_end / 1000.0).max(1e-6);
    let mut k1 = f(&y);
    let mut steps = 0usize;
    while t < t_end {
        if steps > 50_000_000 {
            return Err(Error::Divergence("ODE integration did not finish".into()));
        }
        steps += 1;
        h = h.min(t_end - t);
        let mut ks = [[0.0; 2]; 7];
        ks[0] = k1;
        for s in 0..6 {
            let mut yt = y;
            for (i, ki) in ks.iter().enumerate().take(s + 1) {
                yt[0] += h * A[s][i] * ki[0];
                yt[1] += h * A[s][i] * ki[1];
            }
            ks[s + 1] = f(&yt);
        }
        let mut y5 = y;
        for (i, ki) in ks.iter().enumerate().take(6) {
            y5[0] += h * A[5][i] * ki[0];
            y5[1] += h * A[5][i] * ki[1];
        }
        let mut err = 0.0f64;
        for c in 0..2 {
            let e: f64 = (0..7).map(|i| E[i] * ks[i][c]).sum::<f64>() * h;
            let sc = atol + rtol * y[c].abs().max(y5[c].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            k1 = ks[6];
            record(t, &y);
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WingRegime {
    /// Starts inside `σ_BO`: oscillates through the focus.
    SingleWell,
    /// Starts beyond `σ_BO`: Bloch-oscillates about a displaced point.
    DoubleWell,
}

/// Semiclassical trajectory of a wave-packet component under
/// `ẋ = 2Ja sin(ka)`, `k̇ = −2v₀x/a²`, started at rest at `x₀`.
#[derive(Debug, Clone)]
pub struct SemiclassicalRun {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub k: Vec<f64>,
    pub regime: WingRegime,
    /// Largest relative drift of `2J(1−cos ka) + v₀x²/a²`.
    pub energy_drift: f64,
    pub crosses_origin: bool,
    /// Time between successive returns to the start (NaN if none seen).
    pub period: f64,
    /// Bloch amplitude `Δn = J/(v₀ x₀)` (in sites, `a = 1` units).
    pub bloch_amplitude: f64,
    /// Bloch frequency `ω_BO = v₀x₀` (tilt `V′ = 2v₀x₀` halved).
    pub bloch_frequency: f64,
}

/// `V_BO(x) = [(2v₀²x₀² − 4v₀J) x² − v₀² x⁴]/2` in lattice units; along any
/// trajectory started at rest at `x₀`, `½ẋ² − V_BO(x)` is conserved.
pub fn bo_potential(x: f64, x0: f64, v0: f64, j: f64) -> f64 {
    ((2.0 * v0 * v0 * x0 * x0 - 4.0 * v0 * j) * x * x - v0 * v0 * x.powi(4)) / 2.0
}

/// Quadratic coefficient of [`bo_potential`]; it vanishes at `x₀ = σ_BO/√2`.
pub fn bo_quadratic_coefficient(x0: f64, v0: f64, j: f64) -> f64 {
    v0 * v0 * x0 * x0 - 2.0 * v0 * j
}

pub fn classify_wing(x0: f64, v0: f64, j: f64) -> WingRegime {
    if x0.abs() < sigma_bo(v0, j, 1.0) {
        WingRegime::SingleWell
    } else {
        WingRegime::DoubleWell
    }
}

/// Integrates the semiclassical equations (lattice units `a = 1`) to `t_end`.
pub fn semiclassical_model(v0: f64, j: f64, x0: f64, t_end: f64) -> Result<SemiclassicalRun> {
    if !(v0 > 0.0 && j > 0.0 && t_end > 0.0) {
        return invalid("semiclassical model needs positive v0, J and t_end");
    }
    let energy = |y: &[f64; 2]| 2.0 * j * (1.0 - y[1].cos()) + v0 * y[0] * y[0];
    let e0 = energy(&[x0, 0.0]);
    let scale = e0.abs().max(j * 1e-12);
    let mut times = vec![0.0];
    let mut xs = vec![x0];
    let mut ks = vec![0.0];
    let mut drift: f64 = 0.0;
    dopri5(
        |y| [2.0 * j * y[1].sin(), -2.0 * v0 * y[0]],
        [x0, 0.0],
        t_end,
        1e-12,
        1e-13 * x0.abs().max(1.0),
        |t, y| {
            drift = drift.max((energy(y) - e0).abs() / scale);
            times.push(t);
            xs.push(y[0]);
            ks.push(y[1]);
        },
    )?;
    let crosses_origin = xs.iter().any(|&x| x * x0 < 0.0);
    // Returns to rest near the start: k passes through a multiple of 2π
    // while x is on the starting side.
    let mut returns = Vec::new();
    for i in 1..ks.len() {
        let a = (ks[i - 1] / (2.0 * PI)).round();
        let near = |v: f64| (v - a * 2.0 * PI).abs() < PI;
        if (a != 0.0 || crosses_origin)
            && near(ks[i - 1])
            && near(ks[i])
            && (ks[i - 1] - a * 2.0 * PI) * (ks[i] - a * 2.0 * PI) < 0.0
        {
            // Sign change of k about a lattice multiple: x is at a turning point.
            let frac = (ks[i - 1] - a * 2.0 * PI) / (ks[i - 1] - ks[i]);
            let t = times[i - 1] + frac * (times[i] - times[i - 1]);
            let x = xs[i - 1] + frac * (xs[i] - xs[i - 1]);
            if (x - x0).abs() < 0.5 * x0.abs().max(1e-9) {
                returns.push(t);
            }
        }
    }
    let period = if returns.is_empty() {
        f64::NAN
    } else {
        returns[0]
    };
    Ok(SemiclassicalRun {
        times,
        x: xs,
        k: ks,
        regime: classify_wing(x0, v0, j),
        energy_drift: drift,
        crosses_origin,
        period,
        bloch_amplitude: j / (v0 * x0.abs()),
        bloch_frequency: v0 * x0.abs(),
    })
}

/// Lens family searched by [`optimize_lens`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LensFamily {
    /// Polynomial thick lens of even order `order` (2, 4, 6 or 8).
    Thick {
        order: usize,
    },
    Thin {
        profile: ThinProfile,
    },
}

/// A focusing problem: couplings without lens, initial packet, and focus.
#[derive(Debug, Clone)]
pub struct FocusSetup {
    pub table: SiteTable,
    pub couplings: HamiltonianTerms,
    pub initial: SpinWaveState,
    pub focus: Vec<f64>,
    pub sigma0: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub points_per_decade: usize,
    /// Strength window as multiples of the scaling estimate.
    pub span: (f64, f64),
    pub time_samples: usize,
    pub golden_iters: usize,
    /// Coordinate-descent sweeps for orders above 2.
    pub sweeps: usize,
    /// Overrides the strength grid (useful for single-point runs).
    pub explicit_grid: Option<Vec<f64>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            points_per_decade: 8,
            span: (0.1, 10.0),
            time_samples: 200,
            golden_iters: 24,
            sweeps: 2,
            explicit_grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub strength: f64,
    pub time: f64,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub struct LensOptimum {
    pub design: LensDesign,
    pub time: f64,
    pub width: f64,
    pub state: SpinWaveState,
    /// True if the best coarse-grid point sits on the grid edge.
    pub on_boundary: bool,
    pub scan: Vec<ScanRow>,
}

impl LensOptimum {
    pub fn scan_table(&self) -> Table {
        let mut t = Table::new(&["strength[J or 1]", "t_f[1/J]", "sigma_f[a]"]);
        for r in &self.scan {
            t.push(vec![
                Cell::Real(r.strength),
                Cell::Real(r.time),
                Cell::Real(r.width),
            ]);
        }
        t
    }
}

impl FocusSetup {
    fn focus_site(&self) -> Result<usize> {
        let label: Vec<i64> = self.focus.iter().map(|c| c.round() as i64).collect();
        self.table
            .index_of(&label)
            .ok_or_else(|| Error::InvalidSpec("focus outside the lattice".into()))
    }

    /// Effective hopping at the focus.
    pub fn j_eff(&self) -> Result<f64> {
        Ok(effective_hopping(
            &self.couplings,
            &self.table,
            self.focus_site()?,
        ))
    }

    /// Focal-time estimate for a design.
    pub fn time_estimate(&self, design: &LensDesign) -> Result<f64> {
        let j = self.j_eff()?;
        match design {
            LensDesign::Thick { coeffs, .. } => Ok(PI / (4.0 * (coeffs[0] * j).sqrt())),
            LensDesign::Thin { phi0, profile, .. } => Ok(match profile {
                ThinProfile::Parabolic => 1.0 / (4.0 * j * phi0),
                ThinProfile::Corrected => 1.0 / (2.0 * j * phi0),
            }),
            LensDesign::Multifocal { regions } => {
                Ok(PI / (4.0 * (regions[0].coeffs[0] * j).sqrt()))
            }
        }
    }

    /// Lens Hamiltonian and post-imprint initial state for a design.
    pub fn prepare(&self, design: &LensDesign) -> Result<(HamiltonianTerms, SpinWaveState)> {
        match design {
            LensDesign::Thin { .. } => {
                let phi = thin_phase_profile(design, &self.table)?;
                Ok((self.couplings.clone(), phase_imprint(&self.initial, &phi)?))
            }
            _ => {
                let v = potential_profile(design, &self.table)?;
                Ok((self.couplings.with_lens_diagonal(&v)?, self.initial.clone()))
            }
        }
    }

    /// Narrowest point within `[0.5, 1.5]` of the time estimate.
    pub fn focus_with(&self, design: &LensDesign, samples: usize) -> Result<FocusPoint> {
        let t_est = self.time_estimate(design)?;
        let (h, s) = self.prepare(design)?;
        let t0 = s.time();
        minimize_width(
            &h,
            &self.table,
            &s,
            t0 + 0.5 * t_est,
            t0 + 1.5 * t_est,
            samples,
            self.tol,
        )
    }
}

fn golden_min<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Searches the lens strength (and higher coefficients for `Q > 2`) that
/// minimizes the focal width, each trial being a full lattice evolution.
pub fn optimize_lens(
    setup: &FocusSetup,
    family: LensFamily,
    opts: &OptimizeOptions,
) -> Result<LensOptimum> {
    let a = setup.table.spacing();
    let th = thresholds(setup.sigma0, 0.0, 0.0, 1.0, a);
    let focus = setup.focus.clone();
    let make = |s: f64| -> LensDesign {
        match family {
            LensFamily::Thick { .. } => LensDesign::thick(vec![s], focus.clone()),
            LensFamily::Thin { profile } => LensDesign::thin(s, focus.clone(), profile),
        }
    };
    let (estimate, order) = match family {
        LensFamily::Thick { order } => {
            if order < 2 || order % 2 != 0 || order > MAX_ORDER {
                return invalid(format!(
                    "lens order must be even and in 2..={MAX_ORDER}, got {order}"
                ));
            }
            (th.v_opt_scale * setup.j_eff()?, order)
        }
        LensFamily::Thin { .. } => (th.phi_opt_scale, 2),
    };
    let grid: Vec<f64> = match &opts.explicit_grid {
        Some(g) => g.clone(),
        None => {
            let (lo, hi) = opts.span;
            let decades = (hi / lo).log10();
            let n = (decades * opts.points_per_decade as f64).round() as usize + 1;
            (0..n)
                .map(|i| estimate * lo * 10f64.powf(decades * i as f64 / (n - 1).max(1) as f64))
                .collect()
        }
    };
    if grid.is_empty() || grid.iter().any(|s| !(*s > 0.0)) {
        return invalid("strength grid must be non-empty and positive");
    }
    let samples = opts.time_samples;
    let coarse: Vec<Result<FocusPoint>> = grid
        .par_iter()
        .map(|&s| setup.focus_with(&make(s), samples))
        .collect();
    let mut scan = Vec::new();
    let mut best = (0usize, f64::INFINITY);
    let mut points = Vec::new();
    for (i, (r, &s)) in coarse.into_iter().zip(&grid).enumerate() {
        let p = r?;
        scan.push(ScanRow {
            strength: s,
            time: p.time,
            width: p.width,
        });
        if p.width < best.1 {
            best = (i, p.width);
        }
        points.push(p);
    }
    let on_boundary = grid.len() > 1 && (best.0 == 0 || best.0 == grid.len() - 1);
    if on_boundary {
        log::warn!(
            "lens optimum at the edge of the strength grid (strength {})",
            grid[best.0]
        );
    }
    let mut best_strength = grid[best.0];
    let mut best_point = points.swap_remove(best.0);
    if grid.len() > 2 && !on_boundary {
        let lo = grid[best.0 - 1].ln();
        let hi = grid[best.0 + 1].ln();
        let (ls, _) = golden_min(
            |ls| {
                let p = setup.focus_with(&make(ls.exp()), samples)?;
                scan.push(ScanRow {
                    strength: ls.exp(),
                    time: p.time,
                    width: p.width,
                });
                Ok(p.width)
            },
            lo,
            hi,
            opts.golden_iters,
        )?;
        let p = setup.focus_with(&make(ls.exp()), samples)?;
        if p.width < best_point.width {
            best_strength = ls.exp();
            best_point = p;
        }
    }
    let mut design = make(best_strength);
    if order > 2 {
        let mut coeffs = vec![best_strength];
        coeffs.resize(order / 2, 0.0);
        // The window stays anchored to the quadratic estimate.
        let t_est = setup.time_estimate(&design)?;
        let eval = |c: &[f64]| -> Result<FocusPoint> {
            let d = LensDesign::thick(c.to_vec(), focus.clone());
            let (h, s) = setup.prepare(&d)?;
            minimize_width(
                &h,
                &setup.table,
                &s,
                0.5 * t_est,
                1.5 * t_est,
                samples,
                setup.tol,
            )
        };
        for _ in 0..opts.sweeps {
            for q in 1..order / 2 {
                let scale = coeffs[0] / setup.sigma0.powi(2 * q as i32);
                // Signed logarithmic grid plus zero.
                let mut cand = vec![0.0];
                for e in 0..=24 {
                    let m = scale * 10f64.powf(-3.0 + e as f64 / 8.0);
                    cand.push(m);
                    cand.push(-m);
                }
                let trial: Vec<Result<f64>> = cand
                    .par_iter()
                    .map(|&v| {
                        let mut c = coeffs.clone();
                        c[q] = v;
                        eval(&c).map(|p| p.width)
                    })
                    .collect();
                let mut bi = 0;
                let mut bw = f64::INFINITY;
                for (i, w) in trial.into_iter().enumerate() {
                    let w = w?;
                    if w < bw {
                        bw = w;
                        bi = i;
                    }
                }
                let v = cand[bi];
                let (lo, hi) = if v == 0.0 {
                    (-scale * 1e-3, scale * 1e-3)
                } else {
                    (v * 10f64.powf(-1.0 / 8.0), v * 10f64.powf(1.0 / 8.0))
                };
                let (vq, wq) = golden_min(
                    |x| {
                        let mut c = coeffs.clone();
                        c[q] = x;
                        eval(&c).map(|p| p.width)
                    },
                    lo.min(hi),
                    lo.max(hi),
                    opts.golden_iters,
                )?;
                coeffs[q] = if wq < bw { vq } else { v };
            }
            // Re-tune the quadratic term with the others fixed.
            let v2 = coeffs[0];
            let (l2, _) = golden_min(
                |ls| {
                    let mut c = coeffs.clone();
                    c[0] = ls.exp();
                    eval(&c).map(|p| p.width)
                },
                (v2 * 0.7).ln(),
                (v2 * 1.4).ln(),
                opts.golden_iters,
            )?;
            let mut c = coeffs.clone();
            c[0] = l2.exp();
            if eval(&c)?.width < eval(&coeffs)?.width {
                coeffs = c;
            }
        }
        let p = eval(&coeffs)?;
        if p.width < best_point.width {
            best_point = p;
            design = LensDesign::thick(coeffs, focus.clone());
        }
    }
    Ok(LensOptimum {
        design,
        time: best_point.time,
        width: best_point.width,
        state: best_point.state,
        on_boundary,
        scan,
    })
}

/// Probabilities inside radius-`radius` disks around two foci and the
/// fidelity `(√P₁ + √P₂)²/2` with the equal superposition of the
/// normalized focal-region projections.
pub fn two_focus_fidelity(
    table: &SiteTable,
    state: &SpinWaveState,
    foci: [&[f64]; 2],
    radius: f64,
) -> (f64, f64, f64) {
    let p1 = crate::singlex::focus_probability(table, state, foci[0], radius);
    let p2 = crate::singlex::focus_probability(table, state, foci[1], radius);
    (p1, p2, (p1.sqrt() + p2.sqrt()).powi(2) / 2.0)
}
