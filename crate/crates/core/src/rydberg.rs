//! Rydberg-dressing algebra: the soft-core potentials `Ṽ`, `W̃` obtained by
//! weakly admixing a Rydberg state to the ground state, the physical couplings
//! `V_sg`, `W_sg`, and the angular/radial van der Waals coefficient algebra.
//!
//! Channel `C₆` values and exchange ratios `ξ` are inputs (see
//! [`read_coefficient_table`]); radial matrix elements are not computed here.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::table::{Cell, Table};
use crate::{Result, C64};

/// Soft-core potentials `(Ṽ, W̃)` at dimensionless distance `r̃`.
///
/// `Ṽ = (r̃¹² + r̃⁶) / ((r̃⁶+1)² − ξ²)` and `W̃ = ξ r̃⁶ / ((r̃⁶+1)² − ξ²)`.
pub fn effective_potentials(rt: f64, xi: f64) -> (f64, f64) {
    let u = rt.powi(6);
    let den = (u + 1.0) * (u + 1.0) - xi * xi;
    ((u * u + u) / den, xi * u / den)
}

/// Derivatives `(dṼ/dr̃, dW̃/dr̃)`.
pub fn effective_potential_derivatives(rt: f64, xi: f64) -> (f64, f64) {
    let u = rt.powi(6);
    let du = 6.0 * rt.powi(5);
    let den = (u + 1.0) * (u + 1.0) - xi * xi;
    let dden = 2.0 * (u + 1.0);
    let dv = ((2.0 * u + 1.0) * den - (u * u + u) * dden) / (den * den);
    let dw = xi * (den - u * dden) / (den * den);
    (dv * du, dw * du)
}

/// Location `r̃*` and value `W̃(r̃*)` of the exchange maximum for `0 < ξ < 1`.
///
/// Setting `dW̃/du = 0` with `u = r̃⁶` gives `u* = √(1−ξ²)`, where
/// `W̃* = ξ / (2(1 + u*))`.
pub fn exchange_maximum(xi: f64) -> (f64, f64) {
    let u = (1.0 - xi * xi).sqrt();
    (u.powf(1.0 / 6.0), xi / (2.0 * (1.0 + u)))
}

/// Laser and interaction parameters of the dressing scheme.
///
/// Energies and frequencies share one unit (angular frequency or `J`), `c12`
/// is in energy × length⁶ with the same length unit as the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressingParams {
    pub omega: f64,
    /// Detuning, sign carried (negative in the usual red-detuned setup).
    pub delta: f64,
    pub c12: f64,
    pub xi: f64,
}

impl DressingParams {
    pub fn new(omega: f64, delta: f64, c12: f64, xi: f64) -> Result<Self> {
        let p = DressingParams {
            omega,
            delta,
            c12,
            xi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters whose length scale puts the distance `spacing` at the
    /// maximum of `W̃`.
    pub fn at_exchange_maximum(omega: f64, delta: f64, xi: f64, spacing: f64) -> Result<Self> {
        if !(xi > 0.0 && xi < 1.0) {
            return invalid(format!("exchange maximum needs 0 < xi < 1, got {xi}"));
        }
        let u = (1.0 - xi * xi).sqrt();
        Self::new(omega, delta, delta.abs() * spacing.powi(6) / u, xi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return invalid(format!(
                "Rabi frequency must be positive, got {}",
                self.omega
            ));
        }
        if self.delta == 0.0 || !self.delta.is_finite() {
            return invalid("detuning must be finite and nonzero");
        }
        if !(self.c12 > 0.0) || !self.c12.is_finite() {
            return invalid(format!("c12 must be positive, got {}", self.c12));
        }
        if !(self.xi.abs() < 1.0) {
            return invalid(format!("|xi| must be < 1, got {}", self.xi));
        }
        if self.validity_ratio() > 0.5 {
            log::warn!(
                "Omega/|Delta| = {:.3} exceeds 0.5; weak-dressing expansion is unreliable",
                self.validity_ratio()
            );
        }
        Ok(())
    }

    /// `Ω/|Δ|`, small in the regime where the dressed model is valid.
    pub fn validity_ratio(&self) -> f64 {
        self.omega / self.delta.abs()
    }

    /// Dimensionless distance `r̃ = (|Δ|/c₁₂)^{1/6} r`.
    pub fn rtilde(&self, r: f64) -> f64 {
        (self.delta.abs() / self.c12).powf(1.0 / 6.0) * r
    }

    fn v_scale(&self) -> f64 {
        self.omega * self.omega / (4.0 * self.delta)
    }

    /// `V_sg` at `r → ∞` (`Ṽ → 1`).
    pub fn v_asymptote(&self) -> f64 {
        self.v_scale()
    }

    /// Hopping amplitude `−W_sg/2` at the exchange maximum.
    pub fn hopping_at_maximum(&self) -> f64 {
        -self.v_scale() * exchange_maximum(self.xi).1
    }

    /// `(dV_sg/dr, dW_sg/dr)`.
    pub fn coupling_derivatives(&self, r: f64) -> (f64, f64) {
        let scale = (self.delta.abs() / self.c12).powf(1.0 / 6.0);
        let (dv, dw) = effective_potential_derivatives(self.rtilde(r), self.xi);
        (
            self.v_scale() * dv * scale,
            2.0 * self.v_scale() * dw * scale,
        )
    }
}

/// Physical couplings `(V_sg, W_sg) = (Ω²/(4Δ) Ṽ, Ω²/(2Δ) W̃)` at distance `r`.
pub fn dressed_couplings(params: &DressingParams, r: f64) -> (f64, f64) {
    let (v, w) = effective_potentials(params.rtilde(r), params.xi);
    let s = params.omega * params.omega / params.delta;
    (s * v / 4.0, s * w / 2.0)
}

/// Radial coefficients of the four intermediate `P_j` channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelC6(pub [f64; 4]);

/// Generalized isotropic and anisotropic vdW coefficients `(a, b)`.
pub fn vdw_iso_aniso(ch: &ChannelC6) -> (f64, f64) {
    let [c1, c2, c3, c4] = ch.0;
    let a = (7.0 * c1 + 25.0 * c2 + 11.0 * (c3 + c4)) / 81.0;
    let b = (c3 + c4 - c1 - c2) / 27.0;
    (a, b)
}

/// Angular matrix `D₀(θ, φ)` in the basis
/// `{|−½,−½⟩, |−½,½⟩, |½,−½⟩, |½,½⟩}`.
pub fn d0_matrix(theta: f64, phi: f64) -> [[C64; 4]; 4] {
    let c2 = (2.0 * theta).cos();
    let s2 = (2.0 * theta).sin();
    let ss = theta.sin().powi(2);
    let e = |m: f64| C64::from_polar(1.0, m * phi);
    let r = |x: f64| C64::new(x, 0.0);
    [
        [r(c2), e(-1.0) * s2, e(-1.0) * s2, e(-2.0) * (2.0 * ss)],
        [
            e(1.0) * s2,
            r(2.0 / 3.0 - c2),
            r(-c2 - 5.0 / 3.0),
            -e(-1.0) * s2,
        ],
        [
            e(1.0) * s2,
            r(-c2 - 5.0 / 3.0),
            r(2.0 / 3.0 - c2),
            -e(-1.0) * s2,
        ],
        [e(2.0) * (2.0 * ss), -e(1.0) * s2, -e(1.0) * s2, r(c2)],
    ]
}

/// One row of an external coefficient table (`n, c11, c12, w12`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub n: u32,
    pub c11: f64,
    pub c12: f64,
    pub w12: f64,
}

impl CoefficientRow {
    /// Relative exchange strength `ξ = w₁₂/c₁₂`.
    pub fn xi(&self) -> f64 {
        self.w12 / self.c12
    }
}

/// Reads a coefficient table with header `n,c11,c12,w12`.
pub fn read_coefficient_table<R: Read>(reader: R) -> Result<Vec<CoefficientRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: CoefficientRow = rec?;
        if row.c12 == 0.0 {
            return invalid(format!("c12 = 0 for n = {}", row.n));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Potential curves `(r̃, Ṽ, W̃)` sampled uniformly on `[0, rt_max]`.
pub fn potential_curve_table(xi: f64, rt_max: f64, samples: usize) -> Table {
    let mut t = Table::new(&["rtilde[1]", "V_tilde[1]", "W_tilde[1]"]);
    let n = samples.max(2);
    for i in 0..n {
        let rt = rt_max * i as f64 / (n - 1) as f64;
        let (v, w) = effective_potentials(rt, xi);
        t.push(vec![Cell::Real(rt), Cell::Real(v), Cell::Real(w)]);
    }
    t
}
