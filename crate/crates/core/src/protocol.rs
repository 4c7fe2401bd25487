//! Focusing runs: evolve a prepared state and locate its narrowest point.

use crate::error::invalid;
use crate::lattice::{HamiltonianTerms, SiteTable};
use crate::singlex::{evolve, rms_width, SpinWaveState, Stepper};
use crate::Result;

/// Widths at `times` (ascending, starting at or after the state's own time).
pub fn width_trace(
    h: &HamiltonianTerms,
    table: &SiteTable,
    state: &SpinWaveState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mut s = state.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < s.time() {
            return invalid("trace times must be ascending");
        }
        s = evolve(h, &s, t - s.time(), tol)?;
        out.push(rms_width(table, &s));
    }
    Ok(out)
}

/// Narrowest point of an evolution.
#[derive(Debug, Clone)]
pub struct FocusPoint {
    pub time: f64,
    pub width: f64,
    pub state: SpinWaveState,
    /// True when the minimum sits on the first or last sample.
    pub at_window_edge: bool,
}

/// Minimizes the width over `[t_lo, t_hi]`: `samples` uniform points, then
/// golden-section refinement between the neighbours of the best sample.
pub fn minimize_width(
    h: &HamiltonianTerms,
    table: &SiteTable,
    state: &SpinWaveState,
    t_lo: f64,
    t_hi: f64,
    samples: usize,
    tol: f64,
) -> Result<FocusPoint> {
    if !(t_hi >= t_lo) || t_lo < state.time() || samples < 1 {
        return invalid(format!(
            "bad time window [{t_lo}, {t_hi}] with {samples} samples"
        ));
    }
    let mut s = evolve(h, state, t_lo - state.time(), tol)?;
    if samples == 1 || t_hi == t_lo {
        let width = rms_width(table, &s);
        return Ok(FocusPoint {
            time: s.time(),
            width,
            state: s,
            at_window_edge: true,
        });
    }
    let dt = (t_hi - t_lo) / (samples - 1) as f64;
    let stepper = Stepper::new(h, dt, tol)?;
    let mut prev = s.clone();
    let mut best = (0usize, rms_width(table, &s), s.clone(), s.clone());
    for i in 1..samples {
        prev.clone_from(&s);
        stepper.step(&mut s)?;
        let w = rms_width(table, &s);
        if w < best.1 {
            best = (i, w, prev.clone(), s.clone());
        }
    }
    let (idx, w_best, before, at) = best;
    let at_window_edge = idx == 0 || idx == samples - 1;
    if at_window_edge {
        return Ok(FocusPoint {
            time: at.time(),
            width: w_best,
            state: at,
            at_window_edge,
        });
    }
    // Golden section on [t_{i-1}, t_{i+1}], evolving from the saved state.
    let base = before;
    let eval = |t: f64| -> Result<(f64, SpinWaveState)> {
        let st = evolve(h, &base, t - base.time(), tol)?;
        Ok((rms_width(table, &st), st))
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (base.time(), base.time() + 2.0 * dt);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > 1e-6 * dt.max(1.0) {
        if fc.0 < fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d)?;
        }
    }
    let (w, st) = if fc.0 < fd.0 { fc } else { fd };
    let (width, state) = if w < w_best { (w, st) } else { (w_best, at) };
    Ok(FocusPoint {
        time: state.time(),
        width,
        state,
        at_window_edge,
    })
}
