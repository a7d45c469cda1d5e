//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per check and exits
//! non-zero when any check fails.
//!
//! Reference models:
//! * M1: c = 1.5, claims at rate 1 with Exp(1) sizes, psi_Z(beta) = beta^2, q = 0.1;
//! * M2: M1 without the Brownian perturbation;
//! * M3: c = 1, unit claims at rate 2, psi_Z(beta) = beta^2.
//!
//! Lines tagged "as stated" evaluate the overshoot law in the integrated-tail
//! form `int_0^x e^{-phi u} nu(u, inf) du / I` (and the joint law with
//! `int_{z+x}^inf`). Those forms miss a factor `e^{phi x}` and are expected
//! to fail; the untagged lines use the law given by the compensation formula.

use std::process::ExitCode;
use std::time::Instant;

use suprema::fluctuation::{largest_root, LadderContext};
use suprema::pk_engine::{
    convolve, discounted_integrated_tail, h_tau, p_tau, pk_cdf, GridSpec, PkParameters,
};
use suprema::quadrature;
use suprema::simulator::{batch_simulate, EmpiricalSummary, Probes, SimConfig};
use suprema::stats::{
    independence_check, joint_law_check, ks_distance, ks_two_sample, occupation_check, overshoot_check,
    proportion_check, tv_geometric, EmpiricalCdf, JointLawForm, MIN_GROUP,
};
use suprema::{GridDistribution, JumpDistribution, ModelSpec, PerturbationSpec, SubordinatorSpec};

const N_PATHS: u64 = 100_000;
const DT: f64 = 1e-3;
const SEED: u64 = 20_240_611;

const OCCUPATION_PROBES: [(f64, f64); 6] = [(0.25, 1.0), (0.5, 2.0), (1.0, 2.0), (1.0, 5.0), (2.0, 5.0), (3.0, 10.0)];
const JOINT_PROBES: [(f64, f64, f64); 4] = [(0.5, 2.0, 0.25), (1.0, 3.0, 0.5), (0.25, 5.0, 1.0), (1.0, 10.0, 1.0)];

struct Tally {
    failed: Vec<String>,
    total: usize,
}

impl Tally {
    fn line(&mut self, id: &str, what: &str, statistic: f64, threshold: f64) -> bool {
        self.flag(id, what, statistic <= threshold, &format!("{statistic:.6e} <= {threshold:.6e}"))
    }

    fn flag(&mut self, id: &str, what: &str, ok: bool, detail: &str) -> bool {
        self.total += 1;
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:<4} {what}: {detail}");
        if !ok {
            self.failed.push(format!("{id} {what}"));
        }
        ok
    }
}

fn cl_model(s: f64) -> ModelSpec {
    ModelSpec::new(
        1.5,
        SubordinatorSpec::compound_poisson(1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap(),
        PerturbationSpec::brownian(s).unwrap(),
        0.1,
    )
    .unwrap()
}

fn m3(law: JumpDistribution) -> ModelSpec {
    ModelSpec::new(
        1.0,
        SubordinatorSpec::compound_poisson(2.0, law).unwrap(),
        PerturbationSpec::brownian(2f64.sqrt()).unwrap(),
        0.1,
    )
    .unwrap()
}

fn simulate(model: &ModelSpec, probes: &Probes) -> (EmpiricalSummary, f64) {
    let start = Instant::now();
    let summary = batch_simulate(model, &SimConfig::new(N_PATHS, DT, SEED, 5_000), probes).unwrap();
    (summary, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut t = Tally {
        failed: Vec::new(),
        total: 0,
    };
    let m1 = cl_model(2f64.sqrt());
    let m2 = cl_model(0.0);
    let c1 = LadderContext::new(m1).unwrap();
    let c2 = LadderContext::new(m2).unwrap();
    let p1 = p_tau(&c1).unwrap().p;
    let p2 = p_tau(&c2).unwrap().p;
    println!("M1: phi(q) = {:.12}, p_tau = {:.12}", c1.phi_q, p1);
    println!("M2: phi(q) = {:.12}, p_tau = {:.12}", c2.phi_q, p2);

    let probes = Probes {
        occupation: OCCUPATION_PROBES.to_vec(),
    };
    let (s1, secs1) = simulate(&m1, &probes);
    let (s2, _) = simulate(&m2, &Probes::default());
    let threads = rayon::current_num_threads();

    // 1. Supremum law.
    let ecdf = EmpiricalCdf::new(s1.s_tau()).unwrap();
    let phi = c1.phi_q;
    t.line("1", "M1 S(tau) vs Exp(phi(q)), KS", ks_distance(&ecdf, |x| 1.0 - (-phi * x).max(f64::MIN).exp()), 0.01);
    let budget = if threads >= 8 { 30.0 } else { 120.0 };
    t.line("1", &format!("M1 simulation wall time in seconds ({threads} worker(s))"), secs1, budget);

    // 2. Ladder probability.
    for (name, s, p) in [("M1", &s1, p1), ("M2", &s2, p2)] {
        let r = proportion_check("p_tau", s.ladder_count() as u64, s.len() as u64, p, 3.0).unwrap();
        t.line("2", &format!("{name} p_hat = {:.5} vs p_tau = {p:.5}, standard errors", s.ladder_count() as f64 / s.len() as f64), r.statistic, 3.0);
    }

    // 3. Overshoot law.
    for (name, s, c) in [("M1", &s1, &c1), ("M2", &s2, &c2)] {
        let r = overshoot_check(s, c, 0.02).unwrap();
        t.line("3", &format!("{name} overshoots vs overshoot law, KS"), r.statistic, 0.02);
    }
    {
        let theta = 1.0 + c1.phi_q;
        let e = EmpiricalCdf::new(s1.overshoots()).unwrap();
        t.line("3", "as stated: M1 overshoots vs integrated-tail H_tau, KS", ks_distance(&e, |x| 1.0 - (-theta * x).exp()), 0.02);
        let theta = 1.0 + c2.phi_q;
        let e = EmpiricalCdf::new(s2.overshoots()).unwrap();
        t.line("3", "as stated: M2 overshoots vs tail e^{-(mu+phi)x}, KS", ks_distance(&e, |x| 1.0 - (-theta * x).exp()), 0.02);
    }

    // 4. Independence of {sigma <= tau} and Shat((sigma ^ tau)-).
    let r = independence_check(&s1.pre_ladder(), &s1.ladder_flags(), MIN_GROUP).unwrap();
    let big_enough = r.sample_sizes.iter().all(|&n| n >= 10_000);
    t.flag("4", "M1 group sizes >= 1e4", big_enough, &format!("{:?}", r.sample_sizes));
    t.line("4", "M1 two-sample KS vs 99% band", r.statistic, r.threshold);

    // 5. Geometric N_tau.
    t.line("5", "M1 N_tau histogram vs geometric, TV", tv_geometric(&s1.n_tau_histogram(), p1).unwrap(), 0.02);

    // 6. Decomposition identity.
    for (name, s) in [("M1", &s1), ("M2", &s2)] {
        let positive = s.records.iter().all(|r| r.min_overshoot.is_none_or(|j| j > 0.0));
        t.flag("6", &format!("{name} every overshoot > 0"), positive, &format!("{} paths", s.len()));
        t.line("6", &format!("{name} max relative decomposition error"), s.max_identity_error(), 1e-9);
    }

    // 7. Pollaczek-Khinchine recomposition.
    let grid = GridSpec::covering(0.005, 80.0).unwrap();
    {
        let ecdf = EmpiricalCdf::new(s2.shat_tau()).unwrap();
        let theta = 1.0 + c2.phi_q;
        let stated = |x: f64| if x < 0.0 { 0.0 } else { 1.0 - p2 * (-theta * (1.0 - p2) * x).exp() };
        t.line("7", "as stated: M2 Shat(tau) vs 1 - p e^{-(mu+phi)(1-p)x}, sup", ks_distance(&ecdf, stated), 0.01);
        let h = h_tau(&c2, grid).unwrap().distribution;
        let pk = pk_cdf(&PkParameters::new(p2, h, GridDistribution::delta_zero(grid), 1e-12).unwrap()).unwrap();
        let closed = |x: f64| if x < 0.0 { 0.0 } else { 1.0 - p2 * (-(1.0 - p2) * x).exp() };
        t.line("7", "M2 pk_cdf (G = delta_0) vs closed form 1 - p e^{-mu(1-p)x}, sup", pk.cdf.sup_distance(closed), 3.0 * grid.step);
        t.line("7", "M2 Shat(tau) vs pk_cdf (G = delta_0), sup", ks_distance(&ecdf, |x| pk.cdf.interpolate(x)), 0.01);
    }
    {
        let (half_g, half_s): (Vec<_>, Vec<_>) = s1.records.iter().partition(|r| r.path_index % 2 == 0);
        let g_samples: Vec<f64> = half_g.iter().map(|r| r.shat_pre_sigma).collect();
        let ecdf = EmpiricalCdf::new(half_s.iter().map(|r| r.shat_tau).collect()).unwrap();
        let g = GridDistribution::from_samples(grid, &g_samples).unwrap();
        let h = h_tau(&c1, grid).unwrap().distribution;
        let pk = pk_cdf(&PkParameters::new(p1, h, g.clone(), 1e-12).unwrap()).unwrap();
        let split = ks_distance(&ecdf, |x| pk.cdf.interpolate(x));
        t.line("7", "M1 Shat(tau) vs pk_cdf with split-half G_tau, sup", split, 0.02);
        let g_full = GridDistribution::from_samples(grid, &s1.pre_ladder()).unwrap();
        let h = h_tau(&c1, grid).unwrap().distribution;
        let full = pk_cdf(&PkParameters::new(p1, h, g_full, 1e-12).unwrap()).unwrap();
        let band = 2.0 * suprema::stats::two_sample_threshold(half_g.len(), half_s.len());
        let shift = (ks_distance(&ecdf, |x| full.cdf.interpolate(x)) - split).abs();
        t.line("7", "M1 split-half vs full-sample G_tau, change in sup", shift, band);
        let stated = discounted_integrated_tail(&c1, grid).unwrap().distribution;
        let pk = pk_cdf(&PkParameters::new(p1, stated, g, 1e-12).unwrap()).unwrap();
        t.line("7", "as stated: M1 Shat(tau) vs pk_cdf with integrated-tail H_tau, sup", ks_distance(&ecdf, |x| pk.cdf.interpolate(x)), 0.02);
    }

    // 8. Occupation time.
    for (i, (x, y)) in OCCUPATION_PROBES.iter().enumerate() {
        let r = occupation_check(&s1, &c1, i, 3.0).unwrap();
        t.line("8", &format!("M1 occupation (x={x}, y={y}), standard errors"), r.statistic, 3.0);
    }

    // 9. Joint law.
    for &(x, y, z) in &JOINT_PROBES {
        let r = joint_law_check(&s1, &c1, (x, y, z), JointLawForm::Compensation, 3.0).unwrap();
        t.line("9", &format!("M1 joint law (x={x}, y={y}, z={z}), standard errors"), r.statistic, 3.0);
    }
    for &(x, y, z) in &JOINT_PROBES {
        let r = joint_law_check(&s1, &c1, (x, y, z), JointLawForm::IntegratedTail, 3.0).unwrap();
        t.line("9", &format!("as stated: M1 joint law, int from z+x (x={x}, y={y}, z={z}), standard errors"), r.statistic, 3.0);
    }

    // 10. Ladder limit in the violated net-profit regime.
    for (name, law) in [
        ("M3 unit claims", JumpDistribution::deterministic(1.0).unwrap()),
        ("as stated: M3 with Exp(1) claims", JumpDistribution::exponential(1.0).unwrap()),
    ] {
        let model = m3(law);
        let ctx = LadderContext::new(model).unwrap();
        let report = ctx.ladder_limit_check(1e6).unwrap();
        t.line("10", &format!("{name} residual limit rel. error at beta = 1e6"), report.rel_error, 1e-3);
        let b = largest_root(&model).unwrap().b;
        let psi = |beta: f64| model.psi_x(beta).unwrap();
        // Sign-change oracle: psi < 0 just inside (0, 0.5], > 0 from 0.6 on.
        let scan = (1..=1000).map(|k| 0.6 + k as f64 * 0.01).all(|v| psi(v) > 0.0);
        let sign = psi(0.5) < 0.0 && psi(0.6) > 0.0 && scan;
        t.flag("10", &format!("{name} b in (0.5, 0.6) with sign change"), sign && b > 0.5 && b < 0.6, &format!("b = {b:.12}"));
    }

    // 11. Normalisation of the renewal function.
    for lambda in [0.5, 1.0, 2.0] {
        let f = |x: f64| lambda * (-lambda * x).exp() * c1.upsilon_q(x);
        let upper = 60.0 / lambda;
        let val = quadrature::integrate(f, 0.0, upper, 1e-13).unwrap();
        t.line("11", &format!("M1 lambda int e^(-lambda x) Upsilon(x) dx, lambda = {lambda}"), (val - 1.0 / (c1.phi_q + lambda)).abs(), 1e-8);
    }

    // 12. Numerical core.
    {
        let worst = (0..=200)
            .map(|k| 10f64.powf(-6.0 + k as f64 * 0.05))
            .map(|q| {
                let ph = c1.phi(q).unwrap();
                (c1.model.psi_x(ph).unwrap() - q).abs() / q.max(1.0)
            })
            .fold(0.0, f64::max);
        t.line("12", "M1 psi(phi(q)) = q over q in [1e-6, 1e4]", worst, 1e-10);
        let mut erlang = 0.0f64;
        for h in [0.02, 0.01, 0.005] {
            let g = GridSpec::covering(h, 30.0).unwrap();
            let e = GridDistribution::from_fn(g, |x: f64| 1.0 - (-x).exp()).unwrap();
            let c = convolve(&e, &e).unwrap();
            let d = c.sup_distance(|x: f64| 1.0 - (-x).exp() * (1.0 + x));
            erlang = erlang.max(d / (2.0 * h));
        }
        t.line("12", "Exp(1) * Exp(1) vs Erlang(2), sup / 2h", erlang, 1.0);
        let coarse_fine = |h: f64| {
            let g = GridSpec::covering(h, 60.0).unwrap();
            let hd = h_tau(&c1, g).unwrap().distribution;
            let gd = GridDistribution::from_fn(g, |x| 1.0 - 0.5 * (-2.0 * x).exp()).unwrap();
            pk_cdf(&PkParameters::new(p1, hd, gd, 1e-12).unwrap()).unwrap().cdf
        };
        let (a, b, c) = (coarse_fine(0.02), coarse_fine(0.01), coarse_fine(0.005));
        let diff = |u: &GridDistribution, v: &GridDistribution| {
            u.cdf().iter().enumerate().map(|(k, x)| (x - v.cdf()[2 * k]).abs()).fold(0.0, f64::max)
        };
        let (d1, d2) = (diff(&a, &b), diff(&b, &c));
        t.line("12", &format!("pk_cdf grid halving, successive differences {d1:.3e} -> {d2:.3e}, ratio"), d2 / d1, 0.6);
        let cfg = |batch| SimConfig::new(500, DT, SEED, batch);
        let a = batch_simulate(&m1, &cfg(500), &probes).unwrap();
        let b = batch_simulate(&m1, &cfg(37), &probes).unwrap();
        let prefix = EmpiricalSummary::new(probes.clone(), s1.records[..500].to_vec());
        t.flag("12", "determinism across reruns and batch sizes", a == b && a == prefix, "500 paths compared bitwise");
        let ks = ks_two_sample(&EmpiricalCdf::new(a.shat_tau()).unwrap(), &EmpiricalCdf::new(prefix.shat_tau()).unwrap());
        t.line("12", "rerun Shat(tau) samples, two-sample KS", ks, 0.0);
    }

    println!("{} of {} checks passed", t.total - t.failed.len(), t.total);
    if t.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed:");
        for f in &t.failed {
            println!("  {f}");
        }
        ExitCode::FAILURE
    }
}
