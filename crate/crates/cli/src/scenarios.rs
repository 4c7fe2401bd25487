//! Scenario runners. Each one reads its sections, writes CSV tables through
//! [`RunDir`] and records derived numbers in the manifest.

use std::f64::consts::PI;

use log::info;
use spinlens::disorder::{breakdown_scan, run_ensemble, BaseScenario};
use spinlens::error::Error;
use spinlens::lattice::{build_couplings, build_lattice, CouplingModel};
use spinlens::lens::{
    continuum_thick, continuum_thin, optimize_lens, phi_bo, sigma_bo, two_focus_fidelity, v_bo,
    Dispersion, FocusSetup, LensDesign, LensFamily, LensOptimum, OptimizeOptions, ThinProfile,
};
use spinlens::manybody::{
    build_mb_hamiltonian, density_profile, density_table, enumerate_basis, evolve_mb,
    pair_distance_histogram, pair_histogram_table, symmetric_initial_state, Interaction,
};
use spinlens::protocol::width_trace;
use spinlens::rydberg::{
    exchange_maximum, potential_curve_table, read_coefficient_table, DressingParams,
};
use spinlens::singlex::{gaussian_packet, snapshot_table, SpinWaveState, Stepper};
use spinlens::table::{Cell, Table};
use spinlens::Result;

use crate::config::{EvolutionSection, LensSection, RunConfig, Scenario};
use crate::manifest::RunDir;

fn missing(what: &str) -> Error {
    Error::InvalidSpec(format!("missing {what}"))
}

pub fn run(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    match cfg.scenario {
        Scenario::Thick1d | Scenario::Thin1d => single_lens(cfg, out),
        Scenario::Cascade => cascade(cfg, out),
        Scenario::ScalingFit => scaling_fit(cfg, out),
        Scenario::Multifocal2d => multifocal(cfg, out),
        Scenario::LongrangeAlpha => longrange(cfg, out),
        Scenario::Nonlinear => nonlinear(cfg, out),
        Scenario::Holes | Scenario::Displacement => ensemble(cfg, out),
        Scenario::Breakdown => breakdown(cfg, out),
        Scenario::RydbergTables => rydberg_tables(cfg, out),
    }
}

fn evolution(cfg: &RunConfig) -> EvolutionSection {
    cfg.evolution.clone().unwrap_or_default()
}

fn setup(cfg: &RunConfig) -> Result<FocusSetup> {
    let l = cfg.lattice.as_ref().ok_or_else(|| missing("[lattice]"))?;
    let p = cfg.packet.as_ref().ok_or_else(|| missing("[packet]"))?;
    let table = build_lattice(&l.extents, l.spacing)?;
    let couplings = build_couplings(&table, &l.coupling, &vec![0.0; table.len()])?;
    let center = cfg.center().ok_or_else(|| missing("packet centre"))?;
    let initial = gaussian_packet(&table, p.sigma0, &center, &p.k0)?;
    let focus = cfg
        .lens
        .as_ref()
        .and_then(|l| l.design.as_ref())
        .and_then(|d| d.focus().map(<[f64]>::to_vec))
        .unwrap_or(center);
    Ok(FocusSetup {
        table,
        couplings,
        initial,
        focus,
        sigma0: p.sigma0,
        tol: evolution(cfg).tol,
    })
}

/// Chain of `max(factor·σ₀, min)` sites with the packet at the middle site.
fn chain(
    model: &CouplingModel,
    sigma0: f64,
    factor: f64,
    min_sites: usize,
    tol: f64,
) -> Result<FocusSetup> {
    let n = ((factor * sigma0) as usize).max(min_sites);
    let table = build_lattice(&[n], 1.0)?;
    let couplings = build_couplings(&table, model, &vec![0.0; n])?;
    let c = ((n - 1) / 2) as f64;
    let initial = gaussian_packet(&table, sigma0, &[c], &[])?;
    Ok(FocusSetup {
        table,
        couplings,
        initial,
        focus: vec![c],
        sigma0,
        tol,
    })
}

/// Focus of the configured lens: design and focal point.
struct Focus {
    design: LensDesign,
    time: f64,
    width: f64,
    state: SpinWaveState,
}

impl From<LensOptimum> for Focus {
    fn from(o: LensOptimum) -> Self {
        Focus {
            design: o.design,
            time: o.time,
            width: o.width,
            state: o.state,
        }
    }
}

fn focus(setup: &FocusSetup, lens: &LensSection, out: &mut RunDir, tag: &str) -> Result<Focus> {
    if let Some(d) = &lens.design {
        let f = setup.focus_with(d, 200)?;
        return Ok(Focus {
            design: d.clone(),
            time: f.time,
            width: f.width,
            state: f.state,
        });
    }
    let opt = lens
        .optimize
        .as_ref()
        .ok_or_else(|| missing("lens design or optimize"))?;
    let o = optimize_lens(setup, opt.family, &opt.options())?;
    out.write_table(&format!("scan{tag}.csv"), &o.scan_table())?;
    out.derive(
        format!("on_boundary{tag}"),
        if o.on_boundary { 1.0 } else { 0.0 },
    );
    Ok(o.into())
}

fn strength(d: &LensDesign) -> f64 {
    match d {
        LensDesign::Thick { coeffs, .. } => coeffs[0],
        LensDesign::Thin { phi0, .. } => *phi0,
        LensDesign::Multifocal { regions } => regions[0].coeffs[0],
    }
}

fn linspace(t_max: f64, samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| t_max * i as f64 / (samples - 1) as f64)
        .collect()
}

fn single_lens(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let s = setup(cfg)?;
    let lens = cfg.lens.as_ref().ok_or_else(|| missing("[lens]"))?;
    let f = focus(&s, lens, out, "")?;
    let a = s.table.spacing();
    out.derive("t_f", f.time);
    out.derive("sigma_f", f.width);
    out.derive("strength", strength(&f.design));
    match &f.design {
        LensDesign::Thick { coeffs, .. } => {
            let c = continuum_thick(coeffs[0], 1.0, a, s.sigma0);
            out.derive("omega", c.omega);
            out.derive("t_f_continuum", c.t_f);
            out.derive("sigma_f_continuum", c.sigma_f);
            out.derive("sigma_bo", sigma_bo(coeffs[0], 1.0, a));
            out.derive("v_bo", v_bo(s.sigma0, 1.0, a));
        }
        LensDesign::Thin { phi0, .. } => {
            let (t, w) = continuum_thin(*phi0, s.sigma0, a, 1.0);
            out.derive("t_f_continuum", t);
            out.derive("sigma_f_continuum", w);
            out.derive("phi_bo", phi_bo(s.sigma0, a));
        }
        LensDesign::Multifocal { .. } => {}
    }
    let ev = evolution(cfg);
    let times = linspace(ev.t_max.unwrap_or(4.0 * f.time), ev.samples);
    let (h, psi) = s.prepare(&f.design)?;
    let widths = width_trace(&h, &s.table, &psi, &times, ev.tol)?;
    let mut t = Table::new(&["t[1/J]", "sigma[a]"]);
    for (ti, w) in times.iter().zip(&widths) {
        t.push(vec![Cell::Real(*ti), Cell::Real(*w)]);
    }
    out.write_table("width_trace.csv", &t)?;
    out.write_table("focus_profile.csv", &snapshot_table(&s.table, &f.state))?;
    Ok(())
}

fn cascade(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let s = setup(cfg)?;
    let lens = cfg.lens.as_ref().ok_or_else(|| missing("[lens]"))?;
    let opt = lens
        .optimize
        .as_ref()
        .ok_or_else(|| missing("[lens] optimize"))?;
    let second = lens
        .second_stage
        .ok_or_else(|| missing("[lens] second_stage"))?;
    let first: Focus = optimize_lens(&s, opt.family, &opt.options())?.into();
    info!("stage 1: sigma_f = {} at t = {}", first.width, first.time);
    let mut initial = first.state.clone();
    initial.set_time(0.0);
    let s2 = FocusSetup {
        initial,
        sigma0: first.width,
        ..s.clone()
    };
    let stage2: Focus = optimize_lens(&s2, second, &opt.options())?.into();
    let mut t = Table::new(&[
        "stage[1]",
        "sigma_in[a]",
        "strength[J or 1]",
        "t_f[1/J]",
        "sigma_f[a]",
    ]);
    for (k, (f, sin)) in [(&first, s.sigma0), (&stage2, first.width)]
        .into_iter()
        .enumerate()
    {
        t.push(vec![
            Cell::from(k + 1),
            Cell::Real(sin),
            Cell::Real(strength(&f.design)),
            Cell::Real(f.time),
            Cell::Real(f.width),
        ]);
        out.write_table(
            &format!("focus_profile_stage{}.csv", k + 1),
            &snapshot_table(&s.table, &f.state),
        )?;
    }
    out.write_table("cascade.csv", &t)?;
    out.derive("sigma_f_stage1", first.width);
    out.derive("sigma_f_stage2", stage2.width);
    out.derive("t_f_stage1", first.time);
    out.derive("t_f_stage2", stage2.time);
    Ok(())
}

fn family_tag(f: &LensFamily) -> String {
    match f {
        LensFamily::Thick { order } => format!("thick_q{order}"),
        LensFamily::Thin {
            profile: ThinProfile::Parabolic,
        } => "thin_parabolic".into(),
        LensFamily::Thin {
            profile: ThinProfile::Corrected,
        } => "thin_corrected".into(),
    }
}

/// Least-squares `(slope, intercept)`.
fn fit_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (slope, my - slope * mx)
}

fn scaling_fit(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| missing("[sweep]"))?;
    let model = cfg
        .lattice
        .as_ref()
        .map_or(CouplingModel::nearest_neighbor(), |l| l.coupling);
    let opts = cfg
        .lens
        .as_ref()
        .and_then(|l| l.optimize.as_ref())
        .map_or_else(OptimizeOptions::default, |o| o.options());
    let tol = evolution(cfg).tol;
    for fam in &sw.families {
        let tag = family_tag(fam);
        let mut t = Table::new(&[
            "sigma0[a]",
            "strength[J or 1]",
            "t_f[1/J]",
            "sigma_f[a]",
            "kappa[1]",
        ]);
        let mut pts = Vec::new();
        for &s0 in &sw.sigma0s {
            let o = optimize_lens(
                &chain(&model, s0, sw.lattice_factor, sw.min_sites, tol)?,
                *fam,
                &opts,
            )?;
            info!("{tag} sigma0 = {s0}: sigma_f = {}", o.width);
            t.push(vec![
                Cell::Real(s0),
                Cell::Real(strength(&o.design)),
                Cell::Real(o.time),
                Cell::Real(o.width),
                Cell::Real(o.width / s0.powf(1.0 / 3.0)),
            ]);
            pts.push((s0.ln(), o.width.ln()));
        }
        out.write_table(&format!("scaling_{tag}.csv"), &t)?;
        let (slope, icpt) = fit_line(&pts);
        out.derive(format!("exponent_{tag}"), slope);
        out.derive(format!("prefactor_{tag}"), icpt.exp());
        // κ at the fixed exponent 1/3.
        let kappa = (pts.iter().map(|p| p.1 - p.0 / 3.0).sum::<f64>() / pts.len() as f64).exp();
        out.derive(format!("kappa_{tag}"), kappa);
    }
    Ok(())
}

fn multifocal(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let s = setup(cfg)?;
    let design = cfg
        .lens
        .as_ref()
        .and_then(|l| l.design.clone())
        .ok_or_else(|| missing("[lens] design"))?;
    let LensDesign::Multifocal { regions } = &design else {
        return Err(Error::InvalidSpec(
            "multifocal2d needs a multifocal design".into(),
        ));
    };
    if regions.len() != 2 {
        return Err(Error::InvalidSpec(
            "multifocal2d needs exactly two regions".into(),
        ));
    }
    let (f1, f2) = (regions[0].focus.clone(), regions[1].focus.clone());
    let radius = cfg.disorder.as_ref().map_or(3.0, |d| d.radius);
    let ev = evolution(cfg);
    let t_max = ev.t_max.unwrap_or(2.0 * s.time_estimate(&design)?);
    let (h, mut psi) = s.prepare(&design)?;
    let stepper = Stepper::new(&h, t_max / (ev.samples - 1) as f64, ev.tol)?;
    let mut t = Table::new(&["t[1/J]", "P_foc_1[1]", "P_foc_2[1]", "fidelity[1]"]);
    let mut best = (f64::NEG_INFINITY, 0.0, psi.clone());
    for i in 0..ev.samples {
        if i > 0 {
            stepper.step(&mut psi)?;
        }
        let (p1, p2, fid) = two_focus_fidelity(&s.table, &psi, [&f1, &f2], radius);
        t.push(vec![
            Cell::Real(psi.time()),
            Cell::Real(p1),
            Cell::Real(p2),
            Cell::Real(fid),
        ]);
        if fid > best.0 {
            best = (fid, psi.time(), psi.clone());
        }
    }
    out.write_table("fidelity.csv", &t)?;
    out.write_table("focus_profile.csv", &snapshot_table(&s.table, &best.2))?;
    out.derive("fidelity_max", best.0);
    out.derive("t_f", best.1);
    Ok(())
}

fn longrange(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| missing("[sweep]"))?;
    let p = cfg.packet.as_ref().ok_or_else(|| missing("[packet]"))?;
    let opts = cfg
        .lens
        .as_ref()
        .and_then(|l| l.optimize.as_ref())
        .map_or_else(OptimizeOptions::default, |o| o.options());
    let family = cfg
        .lens
        .as_ref()
        .and_then(|l| l.optimize.as_ref())
        .map_or(LensFamily::Thick { order: 2 }, |o| o.family);
    let tol = evolution(cfg).tol;
    let s0 = p.sigma0;
    // α = ∞ stands for nearest-neighbour hopping.
    let mut t = Table::new(&[
        "alpha[1]",
        "strength[J or 1]",
        "t_f[1/J]",
        "sigma_f[a]",
        "kappa[1]",
    ]);
    for alpha in std::iter::once(f64::INFINITY).chain(sw.alphas.iter().copied()) {
        let model = if alpha.is_infinite() {
            CouplingModel::nearest_neighbor()
        } else {
            CouplingModel::PowerLaw {
                j0: 1.0,
                alpha,
                cutoff: sw.cutoff,
            }
        };
        let o = optimize_lens(
            &chain(&model, s0, sw.lattice_factor, sw.min_sites, tol)?,
            family,
            &opts,
        )?;
        let kappa = o.width / s0.powf(1.0 / 3.0);
        t.push(vec![
            Cell::Real(alpha),
            Cell::Real(strength(&o.design)),
            Cell::Real(o.time),
            Cell::Real(o.width),
            Cell::Real(kappa),
        ]);
        if alpha.is_finite() {
            out.derive(format!("kappa_alpha_{alpha}"), kappa);
            if alpha > 1.0 {
                let disp = Dispersion::PowerLaw { j0: 1.0, alpha }.table(1.0, 201)?;
                out.write_table(&format!("dispersion_alpha_{alpha}.csv"), &disp)?;
            }
        } else {
            out.derive("kappa_nn", kappa);
        }
    }
    out.write_table("longrange.csv", &t)?;
    Ok(())
}

fn nonlinear(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let s = setup(cfg)?;
    if s.table.dim() != 1 {
        return Err(Error::InvalidSpec("nonlinear runs on a 1D lattice".into()));
    }
    let lens = cfg.lens.as_ref().ok_or_else(|| missing("[lens]"))?;
    let ia = cfg
        .interaction
        .as_ref()
        .ok_or_else(|| missing("[interaction]"))?;
    let f = focus(&s, lens, out, "")?;
    let (h, _) = s.prepare(&f.design)?;
    let interaction = Interaction {
        jz: ia.jz,
        power: ia.power,
        cutoff: ia.cutoff,
        literal_sigma_z: ia.literal_sigma_z,
    };
    out.derive("t_f_single", f.time);
    out.derive("r_blockade", interaction.blockade_radius());
    let ev = evolution(cfg);
    let times = linspace(ev.t_max.unwrap_or(f.time), ev.samples);
    let n = s.table.len();
    for &nu in &ia.nus {
        let basis = enumerate_basis(n, nu)?;
        let op = build_mb_hamiltonian(&h, &s.table, &basis, &interaction)?;
        let mut psi = symmetric_initial_state(&s.initial, &basis)?;
        let mut profiles = Vec::with_capacity(times.len());
        for &t in &times {
            psi = evolve_mb(&op, &psi, t - psi.time(), ev.tol)?;
            profiles.push(density_profile(&psi, &basis, n));
        }
        out.write_table(
            &format!("density_nu{nu}.csv"),
            &density_table(&times, &profiles, nu),
        )?;
        if nu >= 2 {
            let hist = pair_distance_histogram(&psi, &basis, &s.table);
            out.write_table(&format!("pairs_nu{nu}.csv"), &pair_histogram_table(&hist))?;
        }
    }
    Ok(())
}

fn base_scenario(cfg: &RunConfig, s: &FocusSetup, f: &Focus, radius: f64) -> Result<BaseScenario> {
    Ok(BaseScenario {
        table: s.table.clone(),
        model: cfg
            .lattice
            .as_ref()
            .ok_or_else(|| missing("[lattice]"))?
            .coupling,
        design: f.design.clone(),
        sigma0: s.sigma0,
        center: cfg.center().ok_or_else(|| missing("packet centre"))?,
        focus: s.focus.clone(),
        t_eval: f.time,
        tol: s.tol,
        radius,
    })
}

fn ensemble(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let s = setup(cfg)?;
    let lens = cfg.lens.as_ref().ok_or_else(|| missing("[lens]"))?;
    let d = cfg.disorder.as_ref().ok_or_else(|| missing("[disorder]"))?;
    let kind = d
        .kind(cfg.scenario)
        .ok_or_else(|| missing("disorder strength"))?;
    let f = focus(&s, lens, out, "")?;
    let base = base_scenario(cfg, &s, &f, d.radius)?;
    let clean = base.run_clean()?;
    let stats = run_ensemble(&base, kind, d.realizations, cfg.master_seed)?;
    out.write_table("realizations.csv", &stats.to_table())?;
    out.derive("t_eval", f.time);
    out.derive("p_foc_clean", clean.p_foc);
    out.derive("sigma_f_clean", clean.sigma_f);
    out.derive("p_foc_mean", stats.p_foc.mean);
    out.derive("p_foc_sem", stats.p_foc.sem);
    out.derive("sigma_f_mean", stats.sigma_f.mean);
    out.derive("sigma_f_sem", stats.sigma_f.sem);
    Ok(())
}

fn breakdown(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| missing("[sweep]"))?;
    let d = cfg.disorder.as_ref().ok_or_else(|| missing("[disorder]"))?;
    let deltas = d
        .deltas
        .clone()
        .ok_or_else(|| missing("[disorder] deltas"))?;
    let model = cfg
        .lattice
        .as_ref()
        .map_or(CouplingModel::nearest_neighbor(), |l| l.coupling);
    let opt = cfg.lens.as_ref().and_then(|l| l.optimize.as_ref());
    let family = opt.map_or(LensFamily::Thick { order: 2 }, |o| o.family);
    let opts = opt.map_or_else(OptimizeOptions::default, |o| o.options());
    let tol = evolution(cfg).tol;
    let mut bases = Vec::new();
    for &s0 in &sw.sigma0s {
        let s = chain(&model, s0, sw.lattice_factor, sw.min_sites, tol)?;
        let f: Focus = optimize_lens(&s, family, &opts)?.into();
        bases.push(BaseScenario {
            table: s.table.clone(),
            model,
            design: f.design,
            sigma0: s0,
            center: s.focus.clone(),
            focus: s.focus.clone(),
            t_eval: f.time,
            tol,
            radius: d.radius,
        });
    }
    let scan = breakdown_scan(&bases, &deltas, d.realizations, cfg.master_seed)?;
    out.write_table("breakdown.csv", &scan.to_table())?;
    let mut t = Table::new(&[
        "sigma0[a]",
        "t_foc[1/J]",
        "delta_c[a]",
        "delta_c_t_foc[a/J]",
    ]);
    for &(s0, tf, dc) in &scan.crossovers {
        t.push(vec![
            Cell::Real(s0),
            Cell::Real(tf),
            Cell::Real(dc),
            Cell::Real(dc * tf),
        ]);
    }
    out.write_table("crossover.csv", &t)?;
    Ok(())
}

fn rydberg_tables(cfg: &RunConfig, out: &mut RunDir) -> Result<()> {
    let y = cfg.rydberg.as_ref().ok_or_else(|| missing("[rydberg]"))?;
    for (i, &xi) in y.xis.iter().enumerate() {
        out.write_table(
            &format!("potential_curves_{i}.csv"),
            &potential_curve_table(xi, y.rt_max, y.samples),
        )?;
        let (rt, w) = exchange_maximum(xi);
        out.derive(format!("xi_{i}"), xi);
        out.derive(format!("rtilde_max_{i}"), rt);
        out.derive(format!("w_tilde_max_{i}"), w);
        if let (Some(omega), Some(delta)) = (y.omega, y.delta) {
            let p = DressingParams::at_exchange_maximum(omega, delta, xi, 1.0)?;
            let j = p.hopping_at_maximum();
            out.derive(format!("j_nn_{i}"), j);
            out.derive(format!("j_nn_over_2pi_{i}"), j / (2.0 * PI));
        }
    }
    if let Some(path) = &y.coefficients {
        let rows = read_coefficient_table(std::fs::File::open(path)?)?;
        let mut t = Table::new(&[
            "n[1]",
            "c11[1]",
            "c12[1]",
            "w12[1]",
            "xi[1]",
            "W_tilde_max[1]",
        ]);
        for r in rows {
            let xi = r.xi();
            let w = if xi > 0.0 && xi < 1.0 {
                exchange_maximum(xi).1
            } else {
                f64::NAN
            };
            t.push(vec![
                Cell::from(r.n as i64),
                Cell::Real(r.c11),
                Cell::Real(r.c12),
                Cell::Real(r.w12),
                Cell::Real(xi),
                Cell::Real(w),
            ]);
        }
        out.write_table("coefficients.csv", &t)?;
    }
    Ok(())
}
