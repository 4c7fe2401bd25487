//! Chebyshev propagator for `exp(-i H t)` with time-independent Hermitian `H`.
//!
//! The expansion `exp(-iHt) = e^{-ict} Σ_k (2-δ_k0)(-i)^k J_k(at) T_k((H-c)/a)`
//! converges super-exponentially once `k > at`, so the error is controlled by
//! truncating when the Bessel weights fall below the tolerance.

use crate::error::Error;
use crate::{Result, C64};

/// A real-symmetric operator that can be applied to complex amplitudes.
pub trait Hamiltonian: Sync {
    fn dim(&self) -> usize;
    /// `y = H x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);
    /// Bounds `(e_min, e_max)` enclosing the spectrum.
    fn spectral_bounds(&self) -> Result<(f64, f64)>;
}

/// Gershgorin bounds from a diagonal and absolute off-diagonal row sums.
pub fn gershgorin(diag: &[f64], abs_row_sums: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&d, &r) in diag.iter().zip(abs_row_sums) {
        lo = lo.min(d - r);
        hi = hi.max(d + r);
    }
    if diag.is_empty() {
        return Ok((0.0, 0.0));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::SpectralBound(format!(
            "non-finite Gershgorin bounds ({lo}, {hi})"
        )));
    }
    Ok((lo, hi))
}

/// Bessel functions `J_0(z) .. J_{n_max}(z)` for `z ≥ 0` by Miller's backward
/// recurrence, normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(z: f64, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = (z + 20.0 * z.cbrt() + 40.0).ceil() as usize;
    let start = start.max(n_max + 20);
    let start = start + (start % 2);
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut vals = vec![0.0; start + 1];
    vals[start] = j_cur;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / z * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        vals[k - 1] = j_cur;
        if j_cur.abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            j_cur *= 1e-250;
            j_next *= 1e-250;
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for (o, v) in out.iter_mut().zip(&vals) {
        *o = v / norm;
    }
    out
}

/// Largest `a·Δt` handled in one expansion; longer steps are split.
const MAX_PHASE_PER_STEP: f64 = 500.0;

/// Precomputed expansion for repeated steps of equal length.
#[derive(Debug, Clone)]
pub struct ChebyshevPropagator {
    center: f64,
    half_width: f64,
    substeps: usize,
    sub_dt: f64,
    /// `(2-δ_k0)(-i)^k J_k(a Δt_sub)`.
    coeffs: Vec<C64>,
}

impl ChebyshevPropagator {
    /// `tol` bounds the local error per unit time and the total truncation
    /// error of one full step.
    pub fn new(bounds: (f64, f64), dt: f64, tol: f64) -> Result<Self> {
        let (lo, hi) = bounds;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::SpectralBound(format!(
                "invalid spectral bounds ({lo}, {hi})"
            )));
        }
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "time step must be finite and non-negative, got {dt}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let center = 0.5 * (hi + lo);
        // Small margin so rounding in the bounds cannot push |x| past 1.
        let half_width = (0.5 * (hi - lo)).max(1e-12) * 1.01 + 1e-12;
        let substeps = ((half_width * dt) / MAX_PHASE_PER_STEP).ceil().max(1.0) as usize;
        let sub_dt = dt / substeps as f64;
        let z = half_width * sub_dt;
        // Per unit time locally, and at most `tol` summed over all substeps.
        let threshold = (tol * sub_dt.min(1.0) / substeps as f64).max(1e-17);
        let n_max = (z + 20.0 * z.cbrt() + 40.0).ceil() as usize;
        let bessel = bessel_j_sequence(z, n_max);
        let mut coeffs = Vec::new();
        let mut below = 0;
        let mut phase = C64::new(1.0, 0.0);
        for (k, &jk) in bessel.iter().enumerate() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(phase * (w * jk));
            phase *= C64::new(0.0, -1.0);
            if k as f64 > z && jk.abs() < threshold {
                below += 1;
                if below >= 2 {
                    break;
                }
            } else {
                below = 0;
            }
        }
        Ok(ChebyshevPropagator {
            center,
            half_width,
            substeps,
            sub_dt,
            coeffs,
        })
    }

    pub fn for_hamiltonian<H: Hamiltonian + ?Sized>(h: &H, dt: f64, tol: f64) -> Result<Self> {
        Self::new(h.spectral_bounds()?, dt, tol)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Advances `psi` by one full step in place.
    pub fn propagate<H: Hamiltonian + ?Sized>(&self, h: &H, psi: &mut [C64]) -> Result<()> {
        let n = h.dim();
        if psi.len() != n {
            return Err(Error::InvalidSpec(format!(
                "state length {} != operator dim {n}",
                psi.len()
            )));
        }
        if self.sub_dt == 0.0 {
            return Ok(());
        }
        let mut prev = vec![C64::new(0.0, 0.0); n];
        let mut cur = vec![C64::new(0.0, 0.0); n];
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let inv_a = 1.0 / self.half_width;
        let c = self.center;
        let global = C64::from_polar(1.0, -c * self.sub_dt);
        for _ in 0..self.substeps {
            prev.copy_from_slice(psi);
            for (a, &p) in acc.iter_mut().zip(prev.iter()) {
                *a = p * self.coeffs[0];
            }
            if self.coeffs.len() > 1 {
                h.apply(&prev, &mut tmp);
                for i in 0..n {
                    cur[i] = (tmp[i] - prev[i] * c) * inv_a;
                    acc[i] += cur[i] * self.coeffs[1];
                }
            }
            for coef in &self.coeffs[2.min(self.coeffs.len())..] {
                h.apply(&cur, &mut tmp);
                for i in 0..n {
                    let next = (tmp[i] - cur[i] * c) * (2.0 * inv_a) - prev[i];
                    prev[i] = cur[i];
                    cur[i] = next;
                    acc[i] += next * *coef;
                }
            }
            for (p, a) in psi.iter_mut().zip(&acc) {
                *p = a * global;
            }
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SpectralBound(
                "propagation produced non-finite amplitudes".into(),
            ));
        }
        Ok(())
    }
}

/// `psi ← exp(-i H dt) psi` with local error below `tol` per unit time.
pub fn evolve<H: Hamiltonian + ?Sized>(h: &H, psi: &mut [C64], dt: f64, tol: f64) -> Result<()> {
    if dt == 0.0 {
        return Ok(());
    }
    ChebyshevPropagator::for_hamiltonian(h, dt, tol)?.propagate(h, psi)
}

/// `⟨ψ|H|ψ⟩` (real part).
pub fn expectation<H: Hamiltonian + ?Sized>(h: &H, psi: &[C64]) -> f64 {
    let mut y = vec![C64::new(0.0, 0.0); psi.len()];
    h.apply(psi, &mut y);
    psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Integral representation `J_n(z) = (1/π)∫₀^π cos(nτ − z sin τ) dτ`; the
    /// integrand is smooth and periodic so the trapezoid rule is spectral.
    fn bessel_integral(n: usize, z: f64) -> f64 {
        let m = 4000;
        let h = std::f64::consts::PI / m as f64;
        let f = |t: f64| (n as f64 * t - z * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 2);
        assert_relative_eq!(j[0], 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_relative_eq!(j[1], 0.440_050_585_744_933_5, epsilon = 1e-15);
        let j = bessel_j_sequence(10.0, 10);
        assert_relative_eq!(j[0], -0.245_935_764_451_348_3, epsilon = 1e-14);
        assert_relative_eq!(j[5], -0.234_061_528_186_793_6, epsilon = 1e-14);
        assert_relative_eq!(j[10], 0.207_486_106_633_358_9, epsilon = 1e-14);
    }

    #[test]
    fn bessel_matches_integral_oracle() {
        for &z in &[0.3, 2.5, 17.0, 120.0, 480.0] {
            let n_max = (z as usize) + 30;
            let j = bessel_j_sequence(z, n_max);
            for n in (0..=n_max).step_by(7) {
                assert!((j[n] - bessel_integral(n, z)).abs() < 1e-12, "z={z}, n={n}");
            }
        }
    }

    struct Dense(Vec<Vec<f64>>);
    impl Hamiltonian for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[C64], y: &mut [C64]) {
            for (i, row) in self.0.iter().enumerate() {
                y[i] = row.iter().zip(x).map(|(a, b)| b * *a).sum();
            }
        }
        fn spectral_bounds(&self) -> Result<(f64, f64)> {
            let d: Vec<f64> = (0..self.0.len()).map(|i| self.0[i][i]).collect();
            let r: Vec<f64> = (0..self.0.len())
                .map(|i| {
                    (0..self.0.len())
                        .filter(|&j| j != i)
                        .map(|j| self.0[i][j].abs())
                        .sum()
                })
                .collect();
            gershgorin(&d, &r)
        }
    }

    #[test]
    fn two_level_rabi() {
        let h = Dense(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]);
        for &t in &[0.0, 0.3, 1.0, 7.5, 2000.0] {
            let mut psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
            evolve(&h, &mut psi, t, 1e-13).unwrap();
            // Contract: local error 1e-13 per unit time.
            let bound = 1e-12 + 1e-13 * t;
            assert!((psi[0] - C64::new(t.cos(), 0.0)).norm() < bound, "t={t}");
            assert!((psi[1] - C64::new(0.0, t.sin())).norm() < bound, "t={t}");
        }
    }

    #[test]
    fn rejects_nonfinite_bounds() {
        assert!(ChebyshevPropagator::new((0.0, f64::NAN), 1.0, 1e-10).is_err());
        let h = Dense(vec![vec![f64::INFINITY]]);
        let mut psi = vec![C64::new(1.0, 0.0)];
        assert!(matches!(
            evolve(&h, &mut psi, 1.0, 1e-10),
            Err(Error::SpectralBound(_))
        ));
    }
}
