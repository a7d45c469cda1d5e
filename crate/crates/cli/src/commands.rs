use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use suprema::fluctuation::largest_root;
use suprema::model::{MeanReport, NpcStatus};
use suprema::pk_engine::{h_tau, p_tau, pk_cdf, GridSpec, LadderProbability, PkOutput, PkParameters};
use suprema::simulator::{
    batch_simulate, simulate_scripted_run, EmpiricalSummary, PathRecord,
};
use suprema::stats::{
    independence_check_with, joint_law_check, ks_check, ks_distance, occupation_check, overshoot_check_with,
    proportion_check, tv_geometric, CheckReport, EmpiricalCdf, JointLawForm,
};
use suprema::{GridDistribution, LadderContext, ModelSpec};

use crate::output::{num, opt, read_ecdf_on_grid, write_csv, write_ecdf, write_grid, write_json};
use crate::scenario::{GSource, Scenario};
use crate::{CliError, Target};

pub const SCHEMA_VERSION: u32 = 1;

fn load(t: &Target) -> Result<Scenario, CliError> {
    Scenario::load(&t.scenario)
}

fn out_dir(t: &Target, scenario: &Scenario) -> Result<PathBuf, CliError> {
    let dir = t
        .out
        .clone()
        .or_else(|| scenario.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn perturbed(model: &ModelSpec) -> bool {
    model.perturbation.brownian_vol > 0.0 || model.perturbation.neg_jumps.is_some()
}

/// Human-readable findings about a model, in a fixed order.
pub fn diagnostics(model: &ModelSpec) -> Vec<String> {
    let MeanReport { value, status } = model.mean_x();
    let mut lines = vec![format!(
        "mean of X(1): {value} (premium {} against claim mean rate {})",
        model.premium,
        model.claims.mean()
    )];
    lines.push(match status {
        NpcStatus::Holds => "NPC holds".to_string(),
        NpcStatus::Boundary => "warning: NPC boundary case, E X(1) = 0".to_string(),
        NpcStatus::Violated => match largest_root(model) {
            Ok(r) => format!("warning: NPC violated; b = {} > 0", r.b),
            Err(_) => "warning: NPC violated; b > 0".to_string(),
        },
    });
    lines.push(format!(
        "finite activity: claim rate {}, perturbation jump rate {}; sigma > 0 almost surely",
        model.claims.intensity(),
        model.perturbation.intensity()
    ));
    if model.claims.jumps.is_none() {
        lines.push("warning: sigma is almost surely infinite; PK reduces to G_tau".to_string());
    }
    if !model.has_exponential_moments() {
        lines.push("warning: heavy-tailed jumps; analytic laws unavailable, simulation only".to_string());
    }
    lines
}

pub fn validate(t: &Target) -> Result<(), CliError> {
    let scenario = load(t)?;
    let model = scenario.model_spec()?;
    for line in diagnostics(&model) {
        println!("{line}");
    }
    if perturbed(&model) && scenario.grid.g_source.is_none() {
        println!("note: `analytic` needs grid.g_source for a perturbed model");
    }
    println!("scenario ok");
    Ok(())
}

#[derive(Debug, Serialize)]
struct PhiB {
    q: f64,
    phi_q: f64,
    b: f64,
    p_tau: f64,
    k: f64,
    integral: f64,
    mean_x: f64,
    npc: NpcStatus,
}

struct Analytic {
    ctx: LadderContext,
    grid: GridSpec<f64>,
    ladder: LadderProbability<f64>,
    overshoot: Option<GridDistribution>,
}

impl Analytic {
    fn new(model: ModelSpec, scenario: &Scenario) -> Result<Self, CliError> {
        if !model.has_exponential_moments() {
            return Err(CliError::Numerical("heavy-tailed jumps: no Laplace exponent".into()));
        }
        let ctx = LadderContext::new(model)?;
        let grid = GridSpec::covering(scenario.grid.h, scenario.grid.xmax)?;
        let ladder = p_tau(&ctx)?;
        let overshoot = match model.claims.jumps {
            Some(_) => Some(h_tau(&ctx, grid)?.distribution),
            None => None,
        };
        Ok(Self {
            ctx,
            grid,
            ladder,
            overshoot,
        })
    }

    fn phi_b(&self) -> PhiB {
        let mean = self.ctx.model.mean_x();
        PhiB {
            q: self.ctx.q,
            phi_q: self.ctx.phi_q,
            b: self.ctx.b,
            p_tau: self.ladder.p,
            k: self.ladder.k,
            integral: self.ladder.integral,
            mean_x: mean.value,
            npc: mean.status,
        }
    }

    fn pk(&self, g: GridDistribution, eps: f64) -> Result<PkOutput<f64>, CliError> {
        match &self.overshoot {
            Some(h) => Ok(pk_cdf(&PkParameters::new(self.ladder.p, h.clone(), g, eps)?)?),
            None => {
                let truncated_mass = g.truncated_mass();
                Ok(PkOutput {
                    cdf: g,
                    terms: 1,
                    series_tail: 0.0,
                    truncated_mass,
                })
            }
        }
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("phi_b.json"), &self.phi_b())?;
        match &self.overshoot {
            Some(h) => write_grid(&dir.join("h_tau.csv"), h),
            None => write_csv(&dir.join("h_tau.csv"), &["x", "F"], Vec::new()),
        }
    }
}

pub fn analytic(t: &Target) -> Result<(), CliError> {
    let scenario = load(t)?;
    let model = scenario.model_spec()?;
    let grid = GridSpec::covering(scenario.grid.h, scenario.grid.xmax)?;
    let g = match &scenario.grid.g_source {
        Some(GSource::DeltaZero) => GridDistribution::delta_zero(grid),
        Some(GSource::Ecdf { path }) => read_ecdf_on_grid(path, grid)?,
        None if perturbed(&model) => {
            return Err(CliError::Config(
                "perturbed model: set grid.g_source to an ECDF file (or delta-zero)".into(),
            ))
        }
        None => GridDistribution::delta_zero(grid),
    };
    let dir = out_dir(t, &scenario)?;
    let a = Analytic::new(model, &scenario)?;
    a.write(&dir)?;
    let pk = a.pk(g, scenario.grid.series_eps)?;
    write_grid(&dir.join("pk_cdf.csv"), &pk.cdf)?;
    println!(
        "phi(q) = {}, b = {}, p_tau = {}, {} series terms, truncated mass {:e}",
        a.ctx.phi_q, a.ctx.b, a.ladder.p, pk.terms, pk.truncated_mass
    );
    Ok(())
}

fn run_simulation(scenario: &Scenario, model: &ModelSpec) -> Result<EmpiricalSummary, CliError> {
    let config = scenario.sim_config();
    let probes = scenario.probes();
    match scenario.scripted_events() {
        Some((tau, events)) => {
            let run = simulate_scripted_run(model, &config, 0, tau, &events)?;
            let record = PathRecord::from_run(&run, &probes)?;
            Ok(EmpiricalSummary::new(probes, vec![record]))
        }
        None => Ok(batch_simulate(model, &config, &probes)?),
    }
}

const SIM_FILES: [&str; 5] = ["samples.csv", "ecdf_shat.csv", "ecdf_g.csv", "overshoots.csv", "n_tau_hist.csv"];

fn write_simulation(dir: &Path, s: &EmpiricalSummary) -> Result<(), CliError> {
    write_csv(
        &dir.join("samples.csv"),
        &["tau", "S_tau", "Shat_tau", "N_tau", "sigma1", "Shat_pre_sigma", "J1"],
        s.records.iter().map(|r| {
            vec![
                num(r.tau),
                num(r.s_tau),
                num(r.shat_tau),
                r.n_tau.to_string(),
                opt(r.sigma1),
                num(r.shat_pre_sigma),
                opt(r.j1),
            ]
        }),
    )?;
    write_ecdf(&dir.join("ecdf_shat.csv"), s.shat_tau())?;
    write_ecdf(&dir.join("ecdf_g.csv"), s.pre_ladder())?;
    write_csv(&dir.join("overshoots.csv"), &["J"], s.overshoots().into_iter().map(|j| vec![num(j)]))?;
    write_csv(
        &dir.join("n_tau_hist.csv"),
        &["n", "count"],
        s.n_tau_histogram().iter().enumerate().map(|(n, c)| vec![n.to_string(), c.to_string()]),
    )
}

fn warn(model: &ModelSpec) {
    for line in diagnostics(model).iter().filter(|l| l.starts_with("warning")) {
        eprintln!("{line}");
    }
}

pub fn simulate(t: &Target) -> Result<(), CliError> {
    let scenario = load(t)?;
    let model = scenario.model_spec()?;
    let dir = out_dir(t, &scenario)?;
    warn(&model);
    let s = run_simulation(&scenario, &model)?;
    write_simulation(&dir, &s)?;
    println!(
        "{} paths, {} with sigma <= tau, mean Shat(tau) = {}",
        s.len(),
        s.ladder_count(),
        s.shat_tau().iter().sum::<f64>() / s.len() as f64
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct Seeds {
    master_seed: u64,
}

#[derive(Debug, Serialize)]
struct AnalyticBlock {
    #[serde(flatten)]
    phi_b: PhiB,
    pk_terms: usize,
    pk_series_tail: f64,
    pk_truncated_mass: f64,
    files: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
struct EmpiricalBlock {
    n_paths: usize,
    ladder_count: usize,
    n_tau_histogram: Vec<u64>,
    max_decomposition_error: f64,
    files: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    schema_version: u32,
    tool: Tool,
    seeds: Seeds,
    scenario: &'a Scenario,
    analytic: Option<AnalyticBlock>,
    empirical: EmpiricalBlock,
    checks: Vec<CheckReport>,
    passed: bool,
}

pub fn compare(t: &Target) -> Result<(), CliError> {
    let scenario = load(t)?;
    if scenario.sim.script.is_some() {
        return Err(CliError::Config("compare does not take a scripted path".into()));
    }
    let model = scenario.model_spec()?;
    let dir = out_dir(t, &scenario)?;
    warn(&model);
    let s = run_simulation(&scenario, &model)?;
    write_simulation(&dir, &s)?;
    let th = &scenario.checks;

    let mut checks = Vec::new();
    let positive = s.records.iter().all(|r| r.min_overshoot.is_none_or(|j| j > 0.0));
    let stat = if positive { s.max_identity_error() } else { f64::INFINITY };
    checks.push(
        CheckReport::evaluate("decomposition", stat, th.decomposition_rel, vec![s.len() as u64])
            .with_note("max relative error of Shat(tau) = sum L + sum J; infinite if an overshoot is <= 0"),
    );
    checks.push(independence_check_with(&s.pre_ladder(), &s.ladder_flags(), th.min_group, th.independence_band)?);

    let analytic = if model.has_exponential_moments() {
        let a = Analytic::new(model, &scenario)?;
        a.write(&dir)?;
        let phi = a.ctx.phi_q;
        let p = a.ladder.p;
        checks.push(ks_check(
            "supremum_law",
            s.s_tau(),
            |x| if x <= 0.0 { 0.0 } else { -(-phi * x).exp_m1() },
            th.supremum_ks,
            1,
        )?);
        checks.push(proportion_check("p_tau", s.ladder_count() as u64, s.len() as u64, p, th.p_tau_se)?);
        checks.push(overshoot_check_with(&s, &a.ctx, th.overshoot_ks, th.min_group)?);
        checks.push(CheckReport::evaluate(
            "n_tau_geometric",
            tv_geometric(&s.n_tau_histogram(), p)?,
            th.n_tau_tv,
            vec![s.len() as u64],
        ));
        for i in 0..scenario.probes.occupation.len() {
            checks.push(occupation_check(&s, &a.ctx, i, th.occupation_se)?);
        }
        for &[x, y, z] in &scenario.probes.joint {
            checks.push(joint_law_check(&s, &a.ctx, (x, y, z), JointLawForm::Compensation, th.joint_se)?);
        }
        // G_tau from even paths, Shat(tau) from odd ones.
        let (fit, held): (Vec<&PathRecord>, Vec<&PathRecord>) = s.records.iter().partition(|r| r.path_index % 2 == 0);
        let sizes = vec![fit.len() as u64, held.len() as u64];
        let g_samples: Vec<f64> = fit.iter().map(|r| r.shat_pre_sigma).collect();
        let pk = if fit.is_empty() {
            a.pk(GridDistribution::delta_zero(a.grid), scenario.grid.series_eps)?
        } else {
            a.pk(GridDistribution::from_samples(a.grid, &g_samples)?, scenario.grid.series_eps)?
        };
        write_grid(&dir.join("pk_cdf.csv"), &pk.cdf)?;
        checks.push(if fit.is_empty() || held.is_empty() {
            CheckReport::inconclusive("pk_split_half", th.pk_sup, sizes, "need at least two paths".into())
        } else {
            let ecdf = EmpiricalCdf::new(held.iter().map(|r| r.shat_tau).collect())?;
            CheckReport::evaluate("pk_split_half", ks_distance(&ecdf, |x| pk.cdf.interpolate(x)), th.pk_sup, sizes)
        });
        Some(AnalyticBlock {
            phi_b: a.phi_b(),
            pk_terms: pk.terms,
            pk_series_tail: pk.series_tail,
            pk_truncated_mass: pk.truncated_mass,
            files: vec!["phi_b.json", "h_tau.csv", "pk_cdf.csv"],
        })
    } else {
        let why = "heavy-tailed jumps: analytic laws unavailable".to_string();
        for name in ["supremum_law", "p_tau", "overshoot", "n_tau_geometric", "pk_split_half"] {
            checks.push(CheckReport::inconclusive(name, f64::NAN, vec![s.len() as u64], why.clone()));
        }
        None
    };

    let failed = checks.iter().filter(|c| c.failed()).count();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        seeds: Seeds {
            master_seed: scenario.sim.master_seed,
        },
        scenario: &scenario,
        analytic,
        empirical: EmpiricalBlock {
            n_paths: s.len(),
            ladder_count: s.ladder_count(),
            n_tau_histogram: s.n_tau_histogram(),
            max_decomposition_error: s.max_identity_error(),
            files: SIM_FILES.to_vec(),
        },
        checks,
        passed: failed == 0,
    };
    write_json(&dir.join("report.json"), &report)?;
    for c in &report.checks {
        println!(
            "{:<13} {:<40} {:>12.5e} <= {:.5e}",
            format!("{:?}", c.status).to_lowercase(),
            c.name,
            c.statistic,
            c.threshold
        );
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LadderJson {
    b: f64,
    target: f64,
    beta_max: f64,
    limit_estimate: f64,
    rel_error: f64,
    npc: NpcStatus,
}

pub fn ladder_diag(t: &Target) -> Result<(), CliError> {
    let scenario = load(t)?;
    let model = scenario.model_spec()?;
    let dir = out_dir(t, &scenario)?;
    if !model.has_exponential_moments() {
        return Err(CliError::Numerical("heavy-tailed jumps: no Laplace exponent".into()));
    }
    let ctx = LadderContext::new(model)?;
    let beta_max = scenario.ladder.beta_max;
    let n = scenario.ladder.points;
    // beta = b + 10^s for s from -3 up to beta = beta_max.
    let (lo, hi) = (-3.0, (beta_max - ctx.b).log10());
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let beta = if k + 1 == n {
            beta_max
        } else {
            ctx.b + 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64)
        };
        rows.push(vec![num(beta), num(ctx.kappa_hat_zero(beta)?), num(ctx.ladder_residual(beta)?)]);
    }
    write_csv(&dir.join("ladder.csv"), &["beta", "kappa_hat", "residual"], rows)?;
    let r = ctx.ladder_limit_check(beta_max)?;
    write_json(
        &dir.join("ladder.json"),
        &LadderJson {
            b: ctx.b,
            target: r.target,
            beta_max,
            limit_estimate: r.limit_estimate,
            rel_error: r.rel_error,
            npc: model.mean_x().status,
        },
    )?;
    println!("b = {}, limit {} vs target {}, rel. error {:e}", ctx.b, r.limit_estimate, r.target, r.rel_error);
    Ok(())
}
