//! Monte Carlo of killed paths of `X(t) = c t - C(t) + Z(t)`.
//!
//! Jump times of every compound Poisson component are exact. Between jumps
//! the drift-plus-diffusion part is advanced on a skeleton of step at most
//! `dt`; the running maximum and minimum over each step are drawn from the
//! exact law of the extremes of a Brownian bridge with the sampled endpoints,
//! so suprema carry no first-order discretisation bias.
//!
//! Each path owns the ChaCha stream `path_index` of the master seed, which
//! makes a path a pure function of `(master_seed, path_index)` whatever the
//! batching.

mod batch;
mod functionals;

pub use batch::{batch_simulate, EmpiricalSummary, PathRecord, Probes};
pub use functionals::{detect_modified_ladder, first_passage, occupation_time, FirstPassage, LadderDecomposition};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;
use crate::{Error, Result};

/// `ln(2^-53)` is about -36.7: a uniform in `(0, 1]` drawn from 53 random
/// bits never falls below `e^{-37.5}`, so a bridge extreme with exceedance
/// probability below that cannot move the running extreme.
const NEGLIGIBLE_LOG_PROB: f64 = -37.5;

/// How the extremes of the continuous part over one skeleton step are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentExtremes {
    /// Exact conditional law of the bridge maximum and minimum.
    #[default]
    Bridge,
    /// Endpoints only. Cheaper, but suprema are biased low by `O(sqrt(dt))`.
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: u64,
    pub dt: f64,
    pub master_seed: u64,
    pub batch_size: u64,
    #[serde(default)]
    pub extremes: SegmentExtremes,
    /// Skip the `dt <= 0.01 / max(1, c + lambda_C)` guard.
    #[serde(default)]
    pub allow_coarse_dt: bool,
}

impl SimConfig {
    pub fn new(n_paths: u64, dt: f64, master_seed: u64, batch_size: u64) -> Self {
        Self {
            n_paths,
            dt,
            master_seed,
            batch_size,
            extremes: SegmentExtremes::Bridge,
            allow_coarse_dt: false,
        }
    }

    /// Largest `dt` accepted by the default guard.
    pub fn dt_limit(model: &ModelSpec<f64>) -> f64 {
        0.01 / (model.premium + model.claims.intensity()).max(1.0)
    }

    pub fn validate(&self, model: &ModelSpec<f64>) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        let limit = Self::dt_limit(model);
        if !self.allow_coarse_dt && self.dt > limit {
            return Err(Error::Config(format!(
                "dt = {} exceeds the guard {limit}; set allow_coarse_dt to override",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSource {
    /// A claim, a jump of `C`.
    Claim,
    /// A downward jump of the perturbation `Z`.
    Perturbation,
}

/// A downward jump of `X`, with the state just before and after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub size: f64,
    pub source: JumpSource,
    /// `X(t-)`.
    pub x_pre: f64,
    /// `Shat(t-)`, the running supremum of `-X` before the jump.
    pub shat_pre: f64,
    pub shat_post: f64,
}

/// A skeleton point. At a jump time there are two knots, before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub x: f64,
    /// Running supremum of `-X` over `[0, t]`.
    pub shat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KilledRun {
    pub path_index: u64,
    pub tau: f64,
    pub dt: f64,
    pub events: Vec<PathEvent>,
    pub skeleton: Vec<Knot>,
    /// `sup X` on `[0, tau]`.
    pub s_tau: f64,
    /// `sup (-X)` on `[0, tau]`.
    pub shat_tau: f64,
    /// `inf X` on `[0, tau]`; always `-shat_tau`.
    pub i_tau: f64,
}

/// A forced jump for hand-traceable runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedEvent {
    pub time: f64,
    pub size: f64,
    pub source: JumpSource,
}

/// Simulates path `path_index` of the configuration.
pub fn simulate_killed_run(model: &ModelSpec<f64>, config: &SimConfig, path_index: u64) -> Result<KilledRun> {
    config.validate(model)?;
    let mut rng = path_rng(config.master_seed, path_index);
    let e: f64 = Exp1.sample(&mut rng);
    let tau = e / model.kill_rate;
    let mut feed = RandomFeed::new(model, &mut rng);
    simulate_with(model, config, path_index, tau, &mut rng, |rng| feed.next(model, rng))
}

/// Runs the continuous part of the model with a fixed killing time and
/// forced jumps instead of the Poisson clocks. Events at or after `tau` are
/// ignored.
pub fn simulate_scripted_run(
    model: &ModelSpec<f64>,
    config: &SimConfig,
    path_index: u64,
    tau: f64,
    events: &[ScriptedEvent],
) -> Result<KilledRun> {
    config.validate(model)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be > 0, got {tau}")));
    }
    let mut last = 0.0;
    for ev in events {
        if !(ev.time > last && ev.time.is_finite()) {
            return Err(Error::InvalidInput("scripted event times must be positive and increasing".into()));
        }
        if !(ev.size > 0.0 && ev.size.is_finite()) {
            return Err(Error::InvalidInput(format!("scripted jump size must be > 0, got {}", ev.size)));
        }
        last = ev.time;
    }
    let mut rng = path_rng(config.master_seed, path_index);
    let mut queue = events.iter().copied();
    simulate_with(model, config, path_index, tau, &mut rng, |_| {
        queue.next().map(|e| (e.time, e.size, e.source))
    })
}

fn path_rng(master_seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path_index);
    rng
}

/// Superposition of the claim and perturbation Poisson clocks.
struct RandomFeed {
    next_claim: f64,
    next_perturbation: f64,
}

impl RandomFeed {
    fn new(model: &ModelSpec<f64>, rng: &mut ChaCha8Rng) -> Self {
        let next_claim = clock(model.claims.intensity(), rng);
        let next_perturbation = clock(model.perturbation.intensity(), rng);
        Self {
            next_claim,
            next_perturbation,
        }
    }

    fn next(&mut self, model: &ModelSpec<f64>, rng: &mut ChaCha8Rng) -> Option<(f64, f64, JumpSource)> {
        if self.next_claim <= self.next_perturbation {
            let law = model.claims.jumps?.law;
            let time = self.next_claim;
            let size = law.sample(rng);
            self.next_claim = time + clock(model.claims.intensity(), rng);
            Some((time, size, JumpSource::Claim))
        } else {
            let law = model.perturbation.neg_jumps?.law;
            let time = self.next_perturbation;
            let size = law.sample(rng);
            self.next_perturbation = time + clock(model.perturbation.intensity(), rng);
            Some((time, size, JumpSource::Perturbation))
        }
    }
}

fn clock(intensity: f64, rng: &mut ChaCha8Rng) -> f64 {
    if intensity > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / intensity
    } else {
        f64::INFINITY
    }
}

struct PathState {
    t: f64,
    x: f64,
    s_max: f64,
    x_min: f64,
    skeleton: Vec<Knot>,
}

impl PathState {
    fn knot(&mut self) {
        self.skeleton.push(Knot {
            t: self.t,
            x: self.x,
            shat: -self.x_min,
        });
    }

    /// Advances the continuous part to `t_end`.
    fn advance(&mut self, t_end: f64, drift: f64, vol: f64, config: &SimConfig, rng: &mut ChaCha8Rng) {
        let span = t_end - self.t;
        if span <= 0.0 {
            return;
        }
        if vol == 0.0 {
            self.x += drift * span;
            self.t = t_end;
            self.s_max = self.s_max.max(self.x);
            self.x_min = self.x_min.min(self.x);
            self.knot();
            return;
        }
        let steps = (span / config.dt).ceil().max(1.0);
        let n = steps as u64;
        let delta = span / steps;
        let sd = vol * delta.sqrt();
        let var = vol * vol * delta;
        let t0 = self.t;
        for k in 1..=n {
            let z: f64 = StandardNormal.sample(rng);
            let x0 = self.x;
            let x1 = x0 + drift * delta + sd * z;
            match config.extremes {
                SegmentExtremes::Endpoint => {
                    self.s_max = self.s_max.max(x1);
                    self.x_min = self.x_min.min(x1);
                }
                SegmentExtremes::Bridge => {
                    let u_max = 1.0 - rng.random::<f64>();
                    let u_min = 1.0 - rng.random::<f64>();
                    self.s_max = bridge_max(x0, x1, var, u_max, self.s_max);
                    self.x_min = -bridge_max(-x0, -x1, var, u_min, -self.x_min);
                }
            }
            self.x = x1;
            self.t = if k == n { t_end } else { t0 + k as f64 * delta };
            self.knot();
        }
    }
}

/// Running maximum after a bridge step from `x0` to `x1` with variance `var`,
/// given the running maximum `current` before it and a uniform `u` in (0, 1].
fn bridge_max(x0: f64, x1: f64, var: f64, u: f64, current: f64) -> f64 {
    let hi = x0.max(x1);
    if hi <= current {
        // P(M > current) = exp(-2 (current - x0) (current - x1) / var).
        let log_p = -2.0 * (current - x0) * (current - x1) / var;
        if log_p < NEGLIGIBLE_LOG_PROB {
            return current;
        }
    }
    let d = x1 - x0;
    let m = 0.5 * (x0 + x1 + (d * d - 2.0 * var * u.ln()).sqrt());
    current.max(m).max(hi)
}

fn simulate_with<F>(
    model: &ModelSpec<f64>,
    config: &SimConfig,
    path_index: u64,
    tau: f64,
    rng: &mut ChaCha8Rng,
    mut next_event: F,
) -> Result<KilledRun>
where
    F: FnMut(&mut ChaCha8Rng) -> Option<(f64, f64, JumpSource)>,
{
    let drift = model.continuous_drift();
    let vol = model.perturbation.brownian_vol;
    let mut state = PathState {
        t: 0.0,
        x: 0.0,
        s_max: 0.0,
        x_min: 0.0,
        skeleton: Vec::new(),
    };
    state.knot();
    let mut events = Vec::new();
    while let Some((time, size, source)) = next_event(rng) {
        if time >= tau {
            break;
        }
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::Simulation {
                path: path_index,
                message: format!("non-positive jump size {size}"),
            });
        }
        state.advance(time, drift, vol, config, rng);
        let x_pre = state.x;
        let shat_pre = -state.x_min;
        state.x -= size;
        state.x_min = state.x_min.min(state.x);
        events.push(PathEvent {
            time,
            size,
            source,
            x_pre,
            shat_pre,
            shat_post: -state.x_min,
        });
        state.knot();
    }
    state.advance(tau, drift, vol, config, rng);
    if !state.x.is_finite() {
        return Err(Error::Simulation {
            path: path_index,
            message: "path diverged".into(),
        });
    }
    Ok(KilledRun {
        path_index,
        tau,
        dt: config.dt,
        events,
        skeleton: state.skeleton,
        s_tau: state.s_max,
        shat_tau: -state.x_min,
        i_tau: state.x_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CompoundPoisson, JumpDistribution, PerturbationSpec, SubordinatorSpec};
    use crate::stats::{ks_distance, EmpiricalCdf};

    fn drift_only(c: f64) -> ModelSpec<f64> {
        ModelSpec::new(c, SubordinatorSpec::none(), PerturbationSpec::none(), 0.5).unwrap()
    }

    fn reference(s: f64) -> ModelSpec<f64> {
        ModelSpec::new(
            1.5,
            SubordinatorSpec::compound_poisson(1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap(),
            PerturbationSpec::brownian(s).unwrap(),
            0.1,
        )
        .unwrap()
    }

    fn config(dt: f64) -> SimConfig {
        SimConfig::new(1, dt, 7, 1)
    }

    #[test]
    fn pure_drift_path() {
        let run = simulate_killed_run(&drift_only(1.0), &config(1e-3), 3).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.shat_tau, 0.0);
        assert!((run.s_tau - run.tau).abs() < 1e-12 * run.tau);
        assert_eq!(run.skeleton.len(), 2);
    }

    #[test]
    fn hand_trace_single_claim() {
        let ev = ScriptedEvent {
            time: 1.0,
            size: 2.0,
            source: JumpSource::Claim,
        };
        let run = simulate_scripted_run(&drift_only(1.0), &config(1e-3), 0, 3.0, &[ev]).unwrap();
        let e = run.events[0];
        assert_eq!((e.x_pre, e.shat_pre, e.shat_post), (1.0, 0.0, 1.0));
        // X(3) = 3 - 2 = 1, the minimum -1 is reached at t = 1.
        assert_eq!(run.s_tau, 1.0);
        assert_eq!(run.shat_tau, 1.0);
        assert_eq!(run.i_tau, -1.0);
        assert_eq!(run.skeleton.len(), 4);
    }

    #[test]
    fn scripted_events_after_tau_are_dropped() {
        let ev = ScriptedEvent {
            time: 5.0,
            size: 2.0,
            source: JumpSource::Claim,
        };
        let run = simulate_scripted_run(&drift_only(1.0), &config(1e-3), 0, 3.0, &[ev]).unwrap();
        assert!(run.events.is_empty());
        let bad = [ev, ev];
        assert!(simulate_scripted_run(&drift_only(1.0), &config(1e-3), 0, 6.0, &bad).is_err());
    }

    #[test]
    fn dt_guard() {
        let m = reference(2f64.sqrt());
        assert!(matches!(simulate_killed_run(&m, &config(0.1), 0), Err(Error::Config(_))));
        let mut c = config(0.1);
        c.allow_coarse_dt = true;
        assert!(simulate_killed_run(&m, &c, 0).is_ok());
        assert!((SimConfig::dt_limit(&m) - 0.004).abs() < 1e-15);
    }

    #[test]
    fn deterministic_per_path_index() {
        let m = reference(2f64.sqrt());
        let c = config(1e-3);
        let a = simulate_killed_run(&m, &c, 11).unwrap();
        let b = simulate_killed_run(&m, &c, 11).unwrap();
        assert_eq!(a, b);
        let other = simulate_killed_run(&m, &c, 12).unwrap();
        assert_ne!(a.tau, other.tau);
    }

    #[test]
    fn duality_and_skeleton_invariants() {
        let m = ModelSpec::new(
            1.5,
            SubordinatorSpec::compound_poisson(1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap(),
            PerturbationSpec::new(
                1.0,
                Some(CompoundPoisson::new(0.5, JumpDistribution::uniform(0.1, 0.4).unwrap()).unwrap()),
            )
            .unwrap(),
            0.2,
        )
        .unwrap();
        for i in 0..50 {
            let run = simulate_killed_run(&m, &config(2e-3), i).unwrap();
            assert_eq!(run.shat_tau, -run.i_tau);
            assert!(run.s_tau >= 0.0 && run.shat_tau >= 0.0);
            assert!(run.events.windows(2).all(|w| w[0].time < w[1].time));
            assert!(run.events.iter().all(|e| e.time < run.tau && e.size > 0.0));
            assert!(run.skeleton.windows(2).all(|w| w[0].t <= w[1].t && w[0].shat <= w[1].shat));
            let last = run.skeleton.last().unwrap();
            assert_eq!(last.t, run.tau);
            assert_eq!(last.shat, run.shat_tau);
            assert!(run.skeleton.iter().all(|k| -k.x <= k.shat && k.x <= run.s_tau));
        }
    }

    #[test]
    fn killing_times_are_exponential() {
        let m = reference(0.0);
        let c = config(1e-3);
        let taus: Vec<f64> = (0..20_000).map(|i| simulate_killed_run(&m, &c, i).unwrap().tau).collect();
        let ecdf = EmpiricalCdf::new(taus).unwrap();
        let d = ks_distance(&ecdf, |x| 1.0 - (-0.1 * x).exp());
        assert!(d < 0.015, "{d}");
    }

    #[test]
    fn bridge_maximum_matches_reflection_law() {
        // Brownian motion from 0 over [0, 1]: P(max > m) = 2 P(B_1 > m).
        let mut rng = path_rng(1, 1);
        let n = 40_000;
        let mut maxima = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u = 1.0 - rng.random::<f64>();
            maxima.push(bridge_max(0.0, z, 1.0, u, 0.0));
        }
        let ecdf = EmpiricalCdf::new(maxima).unwrap();
        // P(max <= m) = 2 Phi(m) - 1 = erf(m / sqrt 2).
        let d = ks_distance(&ecdf, |m| if m < 0.0 { 0.0 } else { erf(m / 2f64.sqrt()) });
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn negligible_bridge_excursions_are_skipped_exactly() {
        // Exceedance probability e^{-40}: no uniform in (0, 1] from 53 bits can reach it.
        let var = 2.0 * 1.0 * 1.0 / 40.0;
        for u in [f64::EPSILON / 2.0, 1e-10, 0.5, 1.0] {
            assert_eq!(bridge_max(0.0, 0.0, var, u, 1.0), 1.0);
            let direct = 0.5 * (0.0f64 - 2.0 * var * u.ln()).sqrt();
            assert!(direct <= 1.0);
        }
    }

    /// Abramowitz-Stegun 7.1.26, absolute error below 1.5e-7.
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.3275911 * x.abs());
        let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        let y = 1.0 - poly * (-x * x).exp();
        if x >= 0.0 { y } else { -y }
    }
}
