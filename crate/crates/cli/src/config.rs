//! Run configuration: TOML schema, per-scenario requirements and the physics lint.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinlens::disorder::DisorderKind;
use spinlens::lattice::CouplingModel;
use spinlens::lens::{phi_bo, v_bo, LensDesign, LensFamily, OptimizeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Thick1d,
    Thin1d,
    Cascade,
    ScalingFit,
    Multifocal2d,
    LongrangeAlpha,
    Nonlinear,
    Holes,
    Displacement,
    Breakdown,
    RydbergTables,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Thick1d => "thick1d",
            Scenario::Thin1d => "thin1d",
            Scenario::Cascade => "cascade",
            Scenario::ScalingFit => "scaling_fit",
            Scenario::Multifocal2d => "multifocal2d",
            Scenario::LongrangeAlpha => "longrange_alpha",
            Scenario::Nonlinear => "nonlinear",
            Scenario::Holes => "holes",
            Scenario::Displacement => "displacement",
            Scenario::Breakdown => "breakdown",
            Scenario::RydbergTables => "rydberg_tables",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<PacketSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lens: Option<LensSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rydberg: Option<RydbergSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(default)]
    pub extents: Vec<usize>,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "CouplingModel::nearest_neighbor")]
    pub coupling: CouplingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub sigma0: f64,
    /// Label coordinates; defaults to the lattice centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LensSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<LensDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
    /// Family of the cascade's second lens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_stage: Option<LensFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub family: LensFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_decade: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
}

impl OptimizeSection {
    pub fn options(&self) -> OptimizeOptions {
        let d = OptimizeOptions::default();
        OptimizeOptions {
            points_per_decade: self.points_per_decade.unwrap_or(d.points_per_decade),
            time_samples: self.time_samples.unwrap_or(d.time_samples),
            golden_iters: self.golden_iters.unwrap_or(d.golden_iters),
            sweeps: self.sweeps.unwrap_or(d.sweeps),
            ..d
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    /// End of the output time grid in `1/J`; defaults per scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            t_max: None,
            samples: default_samples(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Displacement std per component in units of `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Ascending `δ` grid of the breakdown scan, starting at 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    pub realizations: usize,
    /// `P_foc` radius in units of `a`.
    #[serde(default = "default_radius")]
    pub radius: f64,
}

impl DisorderSection {
    pub fn kind(&self, scenario: Scenario) -> Option<DisorderKind> {
        match scenario {
            Scenario::Holes => self.count.map(|count| DisorderKind::Holes { count }),
            Scenario::Displacement => self.delta.map(|delta| DisorderKind::Displacement { delta }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    pub jz: f64,
    #[serde(default = "default_nus")]
    pub nus: Vec<usize>,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub literal_sigma_z: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub sigma0s: Vec<f64>,
    #[serde(default = "default_families")]
    pub families: Vec<LensFamily>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Power-law cutoff for `longrange_alpha`, label distance.
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    /// Chains have `max(lattice_factor·σ₀, min_sites)` sites.
    #[serde(default = "default_lattice_factor")]
    pub lattice_factor: f64,
    #[serde(default = "default_min_sites")]
    pub min_sites: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RydbergSection {
    #[serde(default)]
    pub xis: Vec<f64>,
    #[serde(default = "default_rt_max")]
    pub rt_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// CSV with columns `n, c11, c12, w12`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
    /// Dressing laser for the reported coupling numbers (angular units).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_samples() -> usize {
    401
}
fn default_tol() -> f64 {
    1e-10
}
fn default_radius() -> f64 {
    3.0
}
fn default_nus() -> Vec<usize> {
    vec![1, 2]
}
fn default_power() -> f64 {
    6.0
}
fn default_cutoff() -> f64 {
    spinlens::lattice::DEFAULT_CUTOFF
}
fn default_families() -> Vec<LensFamily> {
    vec![LensFamily::Thick { order: 2 }]
}
fn default_lattice_factor() -> f64 {
    12.0
}
fn default_min_sites() -> usize {
    128
}
fn default_rt_max() -> f64 {
    3.0
}

/// Result of [`validate`]: schema errors block a run, warnings do not.
#[derive(Debug, Default, Clone, Serialize)]
pub struct Report {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
    toml::from_str(text)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Packet centre in label coordinates.
    pub fn center(&self) -> Option<Vec<f64>> {
        let p = self.packet.as_ref()?;
        if let Some(c) = &p.center {
            return Some(c.clone());
        }
        let l = self.lattice.as_ref()?;
        Some(
            l.extents
                .iter()
                .map(|&n| ((n.max(1) - 1) / 2) as f64)
                .collect(),
        )
    }
}

/// Schema check for the chosen scenario plus the physics lint.
pub fn validate(cfg: &RunConfig) -> Report {
    let mut r = Report::default();
    let s = cfg.scenario;
    let mut need = |present: bool, what: &str| {
        if !present {
            r.errors.push(format!("scenario {} needs {what}", s.name()));
        }
    };
    let lattice_extents = cfg.lattice.as_ref().is_some_and(|l| !l.extents.is_empty());
    let lens_source = cfg
        .lens
        .as_ref()
        .is_some_and(|l| l.design.is_some() != l.optimize.is_some());
    match s {
        Scenario::Thick1d
        | Scenario::Thin1d
        | Scenario::Holes
        | Scenario::Displacement
        | Scenario::Nonlinear => {
            need(lattice_extents, "[lattice] with extents");
            need(cfg.packet.is_some(), "[packet]");
            need(lens_source, "[lens] with exactly one of design or optimize");
        }
        Scenario::Cascade => {
            need(lattice_extents, "[lattice] with extents");
            need(cfg.packet.is_some(), "[packet]");
            need(
                cfg.lens
                    .as_ref()
                    .is_some_and(|l| l.optimize.is_some() && l.second_stage.is_some()),
                "[lens] with optimize and second_stage",
            );
        }
        Scenario::Multifocal2d => {
            need(lattice_extents, "[lattice] with extents");
            need(cfg.packet.is_some(), "[packet]");
            let two = matches!(
                cfg.lens.as_ref().and_then(|l| l.design.as_ref()),
                Some(LensDesign::Multifocal { regions }) if regions.len() == 2
            );
            need(two, "a multifocal [lens] design with two regions");
        }
        Scenario::ScalingFit | Scenario::Breakdown => {
            need(
                cfg.sweep.as_ref().is_some_and(|w| !w.sigma0s.is_empty()),
                "[sweep] with sigma0s",
            );
        }
        Scenario::LongrangeAlpha => {
            need(cfg.packet.is_some(), "[packet]");
            need(
                cfg.sweep.as_ref().is_some_and(|w| !w.alphas.is_empty()),
                "[sweep] with alphas",
            );
        }
        Scenario::RydbergTables => {
            need(cfg.rydberg.is_some(), "[rydberg]");
        }
    }
    match s {
        Scenario::Holes => need(
            cfg.disorder.as_ref().is_some_and(|d| d.count.is_some()),
            "[disorder] with count",
        ),
        Scenario::Displacement => need(
            cfg.disorder.as_ref().is_some_and(|d| d.delta.is_some()),
            "[disorder] with delta",
        ),
        Scenario::Breakdown => need(
            cfg.disorder.as_ref().is_some_and(|d| d.deltas.is_some()),
            "[disorder] with deltas",
        ),
        Scenario::Nonlinear => need(cfg.interaction.is_some(), "[interaction]"),
        _ => {}
    }
    if s == Scenario::Thin1d
        && cfg
            .lens
            .as_ref()
            .and_then(|l| l.design.as_ref())
            .is_some_and(|d| !matches!(d, LensDesign::Thin { .. }))
    {
        r.errors.push("thin1d needs a thin lens design".into());
    }
    if s == Scenario::Thick1d
        && cfg
            .lens
            .as_ref()
            .and_then(|l| l.design.as_ref())
            .is_some_and(|d| !matches!(d, LensDesign::Thick { .. }))
    {
        r.errors.push("thick1d needs a thick lens design".into());
    }
    if let Some(l) = &cfg.lattice {
        if let Err(e) = l.coupling.validate() {
            r.errors.push(e.to_string());
        }
    }
    if let Some(e) = &cfg.evolution {
        if e.tol.is_nan() || e.tol <= 0.0 || e.samples < 2 {
            r.errors
                .push("[evolution] needs tol > 0 and samples >= 2".into());
        }
    }
    lint(cfg, &mut r);
    r
}

fn lint(cfg: &RunConfig, r: &mut Report) {
    let a = cfg.lattice.as_ref().map_or(1.0, |l| l.spacing);
    if let Some(p) = &cfg.packet {
        let s0 = p.sigma0;
        match cfg.lens.as_ref().and_then(|l| l.design.as_ref()) {
            Some(LensDesign::Thick { coeffs, .. })
                if !coeffs.is_empty() && coeffs[0] > v_bo(s0, 1.0, a) =>
            {
                r.warnings.push(format!(
                    "v0 = {} exceeds v_BO = {} at sigma0 = {s0}: expect Bloch oscillations",
                    coeffs[0],
                    v_bo(s0, 1.0, a)
                ));
            }
            Some(LensDesign::Thin { phi0, .. }) if *phi0 > phi_bo(s0, a) => {
                r.warnings.push(format!(
                    "phi0 = {phi0} exceeds phi_BO = {} at sigma0 = {s0}",
                    phi_bo(s0, a)
                ));
            }
            _ => {}
        }
        if let (Some(l), Some(c)) = (&cfg.lattice, cfg.center()) {
            for (ax, (&n, &x)) in l.extents.iter().zip(&c).enumerate() {
                let gap = x.min(n as f64 - 1.0 - x);
                if gap < 5.0 * s0 {
                    r.warnings.push(format!("packet centre is {gap} sites from the edge of axis {ax}, less than 5 sigma0"));
                }
            }
        }
    }
    let dressing = cfg.lattice.as_ref().and_then(|l| l.coupling.dressing());
    let laser = cfg.rydberg.as_ref().and_then(|y| y.omega.zip(y.delta));
    for (omega, delta) in dressing
        .map(|d| (d.omega, d.delta))
        .into_iter()
        .chain(laser)
    {
        if (omega / delta).abs() > 0.5 {
            r.warnings.push(format!(
                "Omega/|Delta| = {} exceeds 0.5: the dressed expansion is unreliable",
                (omega / delta).abs()
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario = "thick1d"
[lattice]
extents = [200]
[packet]
sigma0 = 10.0
[lens]
design = { kind = "thick", coeffs = [1e-3], focus = [99.0] }
"#;

    #[test]
    fn minimal_config_gives_empty_report() {
        let cfg = parse(MINIMAL).unwrap();
        assert!(validate(&cfg).is_empty(), "{}", validate(&cfg));
    }

    #[test]
    fn strong_lens_warns() {
        let cfg = parse(&MINIMAL.replace("1e-3", "0.4")).unwrap();
        let r = validate(&cfg);
        assert!(r.errors.is_empty());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].contains("v_BO"));
    }

    #[test]
    fn packet_near_edge_warns() {
        let text = MINIMAL.replace("sigma0 = 10.0", "sigma0 = 10.0\ncenter = [20.0]");
        let r = validate(&parse(&text).unwrap());
        assert!(r.warnings.iter().any(|w| w.contains("edge")));
    }

    #[test]
    fn unknown_keys_and_scenarios_are_rejected() {
        assert!(parse(&MINIMAL.replace("thick1d", "fig9")).is_err());
        assert!(parse(&format!("{MINIMAL}colour = 3\n")).is_err());
    }

    #[test]
    fn missing_sections_are_errors() {
        let r = validate(&parse("scenario = \"holes\"").unwrap());
        assert!(r.errors.len() >= 3);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
