//! Scenario files: one TOML document with `model`, `sim`, `grid`, `probes`,
//! `checks` and `ladder` sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use suprema::model::CompoundPoisson;
use suprema::simulator::{JumpSource, Probes, ScriptedEvent, SegmentExtremes, SimConfig};
use suprema::{JumpDistribution, ModelSpec, PerturbationSpec, SubordinatorSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub sim: SimSection,
    pub grid: GridSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub checks: CheckThresholds,
    #[serde(default)]
    pub ladder: LadderSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Premium rate `c`.
    pub premium: f64,
    /// Killing rate `q`.
    pub kill_rate: f64,
    #[serde(default)]
    pub claims: ClaimSection,
    #[serde(default)]
    pub perturbation: PerturbationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSection {
    #[serde(default)]
    pub drift: f64,
    /// `lambda_C`; zero means no claim jumps.
    #[serde(default)]
    pub intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    /// `s` in `psi_Z(beta) = s^2 beta^2 / 2 + ...`.
    #[serde(default)]
    pub brownian_vol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_jumps: Option<JumpSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSection {
    pub intensity: f64,
    pub law: LawConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    Exponential { rate: f64 },
    Deterministic { size: f64 },
    Uniform { lo: f64, hi: f64 },
    Pareto { index: f64, scale: f64 },
}

impl LawConfig {
    pub fn build(&self) -> suprema::Result<JumpDistribution> {
        match *self {
            Self::Exponential { rate } => JumpDistribution::exponential(rate),
            Self::Deterministic { size } => JumpDistribution::deterministic(size),
            Self::Uniform { lo, hi } => JumpDistribution::uniform(lo, hi),
            Self::Pareto { index, scale } => JumpDistribution::pareto(index, scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub n_paths: u64,
    pub dt: f64,
    pub master_seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: u64,
    #[serde(default)]
    pub extremes: SegmentExtremes,
    #[serde(default)]
    pub allow_coarse_dt: bool,
    /// Forced path for hand checks; needs `n_paths = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<ScriptSection>,
}

fn default_batch_size() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSection {
    pub tau: f64,
    #[serde(default)]
    pub events: Vec<ScriptEventConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEventConfig {
    pub time: f64,
    pub size: f64,
    #[serde(default = "default_source")]
    pub source: JumpSource,
}

fn default_source() -> JumpSource {
    JumpSource::Claim
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    pub xmax: f64,
    #[serde(default = "default_series_eps")]
    pub series_eps: f64,
    /// Law of `Shat((sigma ^ tau)-)` for the `analytic` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_source: Option<GSource>,
}

fn default_series_eps() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GSource {
    /// Point mass at zero; exact without perturbation.
    DeltaZero,
    /// An `x,F` CSV such as the `ecdf_g.csv` written by `simulate`.
    /// Relative paths are resolved against the scenario file.
    Ecdf { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    /// `[x, y]` pairs for the occupation-time check.
    #[serde(default)]
    pub occupation: Vec<[f64; 2]>,
    /// `[x, y, z]` triples for the joint-law check.
    #[serde(default)]
    pub joint: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckThresholds {
    /// KS distance of `S(tau)` to `Exp(phi(q))`.
    pub supremum_ks: f64,
    /// `|p_hat - p_tau|` in binomial standard errors.
    pub p_tau_se: f64,
    pub overshoot_ks: f64,
    /// Multiplier of `sqrt((n1 + n2) / (n1 n2))` in the independence check.
    pub independence_band: f64,
    pub min_group: usize,
    pub n_tau_tv: f64,
    /// Sup distance between the PK law and the held-out `Shat(tau)` ECDF.
    pub pk_sup: f64,
    pub occupation_se: f64,
    pub joint_se: f64,
    pub decomposition_rel: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self {
            supremum_ks: 0.01,
            p_tau_se: 3.0,
            overshoot_ks: 0.02,
            independence_band: 1.63,
            min_group: 1000,
            n_tau_tv: 0.02,
            pk_sup: 0.02,
            occupation_se: 3.0,
            joint_se: 3.0,
            decomposition_rel: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    pub beta_max: f64,
    pub points: usize,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            beta_max: 1e6,
            points: 121,
        }
    }
}

fn config_err(what: impl std::fmt::Display) -> CliError {
    CliError::Config(what.to_string())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario = Self::parse(&text)?;
        if let Some(GSource::Ecdf { path: g }) = &mut scenario.grid.g_source {
            if g.is_relative() {
                if let Some(dir) = path.parent() {
                    *g = dir.join(&*g);
                }
            }
        }
        Ok(scenario)
    }

    /// Parses and validates a scenario document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let scenario: Self = toml::from_str(text).map_err(config_err)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model_spec()?;
        self.sim_config().validate(&model).map_err(config_err)?;
        if let Some(script) = &self.sim.script {
            if self.sim.n_paths != 1 {
                return Err(config_err("sim.script needs n_paths = 1"));
            }
            if !(script.tau > 0.0 && script.tau.is_finite()) {
                return Err(config_err("sim.script.tau must be > 0"));
            }
        }
        let g = &self.grid;
        if !(g.h > 0.0 && g.h.is_finite() && g.xmax > g.h && g.xmax.is_finite()) {
            return Err(config_err("grid needs 0 < h < xmax"));
        }
        if g.xmax / g.h > 5e7 {
            return Err(config_err("grid has more than 5e7 cells"));
        }
        if !(g.series_eps > 0.0 && g.series_eps < 1.0) {
            return Err(config_err("grid.series_eps must lie in (0, 1)"));
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !self.probes.occupation.iter().all(|p| positive(p)) || !self.probes.joint.iter().all(|p| positive(p)) {
            return Err(config_err("probe levels must be positive and finite"));
        }
        let c = &self.checks;
        let all = [
            c.supremum_ks,
            c.p_tau_se,
            c.overshoot_ks,
            c.independence_band,
            c.n_tau_tv,
            c.pk_sup,
            c.occupation_se,
            c.joint_se,
            c.decomposition_rel,
        ];
        if !all.iter().all(|&t| t >= 0.0 && t.is_finite()) {
            return Err(config_err("check thresholds must be finite and >= 0"));
        }
        if !(self.ladder.beta_max >= 1e4 && self.ladder.beta_max.is_finite() && self.ladder.points >= 2) {
            return Err(config_err("ladder needs beta_max >= 1e4 and at least 2 points"));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let claim_jumps = match (m.claims.intensity, m.claims.law) {
            (l, _) if l == 0.0 => None,
            (l, Some(law)) => Some(CompoundPoisson::new(l, law.build().map_err(config_err)?).map_err(config_err)?),
            (_, None) => return Err(config_err("model.claims.law is required when intensity > 0")),
        };
        let claims = SubordinatorSpec::new(m.claims.drift, claim_jumps, 0.0).map_err(config_err)?;
        let neg = match &m.perturbation.neg_jumps {
            None => None,
            Some(j) => Some(CompoundPoisson::new(j.intensity, j.law.build().map_err(config_err)?).map_err(config_err)?),
        };
        let perturbation = PerturbationSpec::new(m.perturbation.brownian_vol, neg).map_err(config_err)?;
        ModelSpec::new(m.premium, claims, perturbation, m.kill_rate).map_err(config_err)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            n_paths: s.n_paths,
            dt: s.dt,
            master_seed: s.master_seed,
            batch_size: s.batch_size,
            extremes: s.extremes,
            allow_coarse_dt: s.allow_coarse_dt,
        }
    }

    pub fn probes(&self) -> Probes {
        Probes {
            occupation: self.probes.occupation.iter().map(|p| (p[0], p[1])).collect(),
        }
    }

    pub fn scripted_events(&self) -> Option<(f64, Vec<ScriptedEvent>)> {
        self.sim.script.as_ref().map(|s| {
            let events = s
                .events
                .iter()
                .map(|e| ScriptedEvent {
                    time: e.time,
                    size: e.size,
                    source: e.source,
                })
                .collect();
            (s.tau, events)
        })
    }
}
