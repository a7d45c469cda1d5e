//! Empirical laws and the checks that confront simulated paths with the
//! analytic formulas. Every check returns a [`CheckReport`] whose status is
//! `Pass` exactly when `statistic <= threshold`.

use serde::{Deserialize, Serialize};

use crate::fluctuation::LadderContext;
use crate::pk_engine::{n_tau_pmf, weighted_tail_integral};
use crate::simulator::EmpiricalSummary;
use crate::{Error, Result};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Asymptotic 99% quantile of the Kolmogorov distribution.
pub const KS_99: f64 = 1.63;

/// Smallest group size for which the two-sample and KS checks are run.
pub const MIN_GROUP: usize = 1000;

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empirical CDF of an empty sample".into()));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN in sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Distinct sample values with the CDF just after each.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = f,
                _ => out.push((v, f)),
            }
        }
        out
    }
}

/// `sup_x |F_emp(x) - F(x)|`. At every distinct sample value both the left
/// limits and the values are compared, so `reference` may have atoms there.
pub fn ks_distance<F: Fn(f64) -> f64>(emp: &EmpiricalCdf, reference: F) -> f64 {
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for (x, f) in emp.steps() {
        let left = reference(x.next_down());
        let right = reference(x);
        d = d.max((left - below).abs()).max((right - f).abs());
        below = f;
    }
    d
}

/// `sup_x |F_a(x) - F_b(x)|` for two samples.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (xs, ys) = (a.samples(), b.samples());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `1.63 sqrt((n1 + n2) / (n1 n2))`: the 99% two-sample band.
pub fn two_sample_threshold(n1: usize, n2: usize) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    KS_99 * ((a + b) / (a * b)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not enough data to decide.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub status: CheckStatus,
    pub sample_sizes: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn evaluate(name: impl Into<String>, statistic: f64, threshold: f64, sample_sizes: Vec<u64>) -> Self {
        let status = if statistic <= threshold {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            statistic,
            threshold,
            status,
            sample_sizes,
            note: None,
        }
    }

    pub fn inconclusive(name: impl Into<String>, threshold: f64, sample_sizes: Vec<u64>, why: String) -> Self {
        Self {
            name: name.into(),
            statistic: f64::NAN,
            threshold,
            status: CheckStatus::Inconclusive,
            sample_sizes,
            note: Some(why),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

/// KS distance of `samples` to `reference`; inconclusive below `min_n`.
pub fn ks_check<F: Fn(f64) -> f64>(
    name: &str,
    samples: Vec<f64>,
    reference: F,
    threshold: f64,
    min_n: usize,
) -> Result<CheckReport> {
    let n = samples.len();
    if n < min_n.max(1) {
        return Ok(CheckReport::inconclusive(
            name,
            threshold,
            vec![n as u64],
            format!("{n} samples, need {min_n}"),
        ));
    }
    let emp = EmpiricalCdf::new(samples)?;
    Ok(CheckReport::evaluate(name, ks_distance(&emp, reference), threshold, vec![n as u64]))
}

/// Two-sample KS between `values` split by `flags`, against the 99% band.
pub fn independence_check(values: &[f64], flags: &[bool], min_group: usize) -> Result<CheckReport> {
    independence_check_with(values, flags, min_group, KS_99)
}

/// [`independence_check`] with the band `band * sqrt((n1 + n2) / (n1 n2))`.
pub fn independence_check_with(values: &[f64], flags: &[bool], min_group: usize, band: f64) -> Result<CheckReport> {
    const NAME: &str = "independence";
    if values.len() != flags.len() {
        return Err(Error::InvalidInput("values and flags differ in length".into()));
    }
    let (yes, no): (Vec<(f64, bool)>, Vec<(f64, bool)>) =
        values.iter().copied().zip(flags.iter().copied()).partition(|&(_, f)| f);
    let (n1, n2) = (yes.len(), no.len());
    let sizes = vec![n1 as u64, n2 as u64];
    if n1 < min_group.max(1) || n2 < min_group.max(1) {
        let threshold = if n1 > 0 && n2 > 0 { band / KS_99 * two_sample_threshold(n1, n2) } else { f64::NAN };
        return Ok(CheckReport::inconclusive(
            NAME,
            threshold,
            sizes,
            format!("groups of {n1} and {n2}, need {min_group} each"),
        ));
    }
    let a = EmpiricalCdf::new(yes.into_iter().map(|p| p.0).collect())?;
    let b = EmpiricalCdf::new(no.into_iter().map(|p| p.0).collect())?;
    Ok(CheckReport::evaluate(NAME, ks_two_sample(&a, &b), band / KS_99 * two_sample_threshold(n1, n2), sizes))
}

/// `|mean(D)| / (sd(D) / sqrt(n))` for per-path differences `D_i` whose mean
/// is zero under the null.
pub fn standardized_mean(diffs: &[f64]) -> f64 {
    let n = diffs.len() as f64;
    if diffs.is_empty() {
        return f64::NAN;
    }
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let se = (var / n).sqrt();
    if se == 0.0 {
        return if mean == 0.0 { 0.0 } else { f64::INFINITY };
    }
    mean.abs() / se
}

/// `E int_0^{sigma ^ tauhat_y ^ tau} 1{R <= x} dt` against
/// `P(sigma > tau, tauhat_y > tau) (1 - e^{-phi(q) x}) / q`, with the
/// probability estimated on the same paths. Statistic in standard errors.
pub fn occupation_check(
    summary: &EmpiricalSummary,
    ctx: &LadderContext<f64>,
    probe: usize,
    threshold: f64,
) -> Result<CheckReport> {
    let &(x, y) = summary
        .probes
        .occupation
        .get(probe)
        .ok_or_else(|| Error::InvalidInput(format!("no occupation probe {probe}")))?;
    let scale = -(-ctx.phi_q * x).exp_m1() / ctx.q;
    let diffs: Vec<f64> = summary
        .records
        .iter()
        .map(|r| {
            let free = !r.laddered() && r.shat_tau <= y;
            r.occupation[probe] - if free { scale } else { 0.0 }
        })
        .collect();
    Ok(CheckReport::evaluate(
        format!("occupation(x={x}, y={y})"),
        standardized_mean(&diffs),
        threshold,
        vec![summary.len() as u64],
    ))
}

/// Which right-hand side the joint-law check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointLawForm {
    /// `(phi/q) P(sigma > tau, tauhat_y > tau) int_z^inf nu(x + u, inf) e^{-phi u} du`,
    /// what the compensation formula gives.
    Compensation,
    /// `(phi/q) P(sigma > tau, tauhat_y > tau) int_{z+x}^inf nu(u, inf) e^{-phi u} du`.
    IntegratedTail,
}

/// Frequency of `{Shat(sigma-) <= y, Shat(sigma-) - Xhat(sigma-) > z, J > x, sigma <= tau}`
/// against the analytic right-hand side. Statistic in standard errors.
pub fn joint_law_check(
    summary: &EmpiricalSummary,
    ctx: &LadderContext<f64>,
    (x, y, z): (f64, f64, f64),
    form: JointLawForm,
    threshold: f64,
) -> Result<CheckReport> {
    if !(x > 0.0 && y > 0.0 && z > 0.0) {
        return Err(Error::InvalidInput(format!("joint probe ({x}, {y}, {z}) must be positive")));
    }
    let tail = match form {
        JointLawForm::Compensation => weighted_tail_integral(ctx, z, x)?,
        JointLawForm::IntegratedTail => weighted_tail_integral(ctx, z + x, 0.0)?,
    };
    let scale = ctx.phi_q / ctx.q * tail;
    let diffs: Vec<f64> = summary
        .records
        .iter()
        .map(|r| {
            let joint = match (r.gap1, r.j1) {
                (Some(gap), Some(j)) => r.shat_pre_sigma <= y && gap > z && j > x,
                _ => false,
            };
            let free = !r.laddered() && r.shat_tau <= y;
            f64::from(u8::from(joint)) - if free { scale } else { 0.0 }
        })
        .collect();
    let label = match form {
        JointLawForm::Compensation => "joint",
        JointLawForm::IntegratedTail => "joint-integrated-tail",
    };
    Ok(CheckReport::evaluate(
        format!("{label}(x={x}, y={y}, z={z})"),
        standardized_mean(&diffs),
        threshold,
        vec![summary.len() as u64],
    ))
}

/// KS distance of the first overshoots to the overshoot law, evaluated in
/// closed form or by quadrature.
pub fn overshoot_check(summary: &EmpiricalSummary, ctx: &LadderContext<f64>, threshold: f64) -> Result<CheckReport> {
    overshoot_check_with(summary, ctx, threshold, MIN_GROUP)
}

/// [`overshoot_check`] with a custom minimum number of overshoots.
pub fn overshoot_check_with(
    summary: &EmpiricalSummary,
    ctx: &LadderContext<f64>,
    threshold: f64,
    min_n: usize,
) -> Result<CheckReport> {
    let norm = weighted_tail_integral(ctx, 0.0, 0.0)?;
    let failure = std::cell::RefCell::new(None);
    let reference = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        match weighted_tail_integral(ctx, 0.0, x) {
            Ok(t) => 1.0 - t / norm,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let report = ks_check("overshoot", summary.overshoots(), reference, threshold, min_n)?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Wilson score interval at 99%.
pub fn proportion_ci(hits: u64, n: u64) -> Result<(f64, f64)> {
    if n == 0 || hits > n {
        return Err(Error::InvalidInput(format!("invalid proportion {hits}/{n}")));
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z_99 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// `|p_hat - p| / sqrt(p (1 - p) / n)`, in binomial standard errors.
pub fn proportion_check(name: &str, hits: u64, n: u64, p: f64, threshold: f64) -> Result<CheckReport> {
    if n == 0 {
        return Err(Error::InvalidInput("proportion of zero trials".into()));
    }
    let p_hat = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let stat = if se > 0.0 {
        (p_hat - p).abs() / se
    } else if p_hat == p {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CheckReport::evaluate(name, stat, threshold, vec![n]))
}

/// Total variation between a histogram and the law `(1 - rho) rho^n`.
pub fn tv_geometric(hist: &[u64], rho: f64) -> Result<f64> {
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return Err(Error::InvalidInput("empty histogram".into()));
    }
    let mut tv = 0.0;
    let mut covered = 0.0;
    for (k, &c) in hist.iter().enumerate() {
        let p = n_tau_pmf(rho, k)?;
        covered += p;
        tv += (c as f64 / n as f64 - p).abs();
    }
    tv += (1.0 - covered).max(0.0);
    Ok(0.5 * tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpDistribution, ModelSpec, PerturbationSpec, SubordinatorSpec};
    use crate::simulator::{PathRecord, Probes};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1};

    fn exp_cdf(x: f64) -> f64 {
        if x <= 0.0 { 0.0 } else { 1.0 - (-x).exp() }
    }

    #[test]
    fn ecdf_basics() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.25);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.eval(10.0), 1.0);
        assert_eq!(e.steps(), vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
        assert!(EmpiricalCdf::new(vec![]).is_err());
        assert!(EmpiricalCdf::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn ks_single_sample_at_median() {
        let e = EmpiricalCdf::new(vec![2f64.ln()]).unwrap();
        assert!((ks_distance(&e, exp_cdf) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_of_mid_rank_quantiles() {
        for n in [1usize, 10, 1000] {
            let q: Vec<f64> = (1..=n).map(|k| -(1.0 - (k as f64 - 0.5) / n as f64).ln()).collect();
            let d = ks_distance(&EmpiricalCdf::new(q).unwrap(), exp_cdf);
            assert!(d <= 0.5 / n as f64 + 1e-12, "n={n}: {d}");
        }
    }

    #[test]
    fn ks_handles_reference_atoms() {
        // Half the mass at zero, half uniform on (0, 1).
        let f = |x: f64| if x < 0.0 { 0.0 } else { (0.5 + 0.5 * x).min(1.0) };
        let mut s = vec![0.0; 500];
        s.extend((0..500).map(|k| (k as f64 + 0.5) / 500.0));
        let d = ks_distance(&EmpiricalCdf::new(s).unwrap(), f);
        assert!(d <= 0.5 / 500.0 + 1e-12, "{d}");
    }

    #[test]
    fn ks_glivenko_cantelli() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..100_000).map(|_| Exp1.sample(&mut rng)).collect();
        assert!(ks_distance(&EmpiricalCdf::new(s).unwrap(), exp_cdf) < 0.01);
    }

    #[test]
    fn two_sample_examples() {
        let a = EmpiricalCdf::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = EmpiricalCdf::new(vec![4.0, 5.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let c = EmpiricalCdf::new(vec![1.5, 2.5]).unwrap();
        // After 1.5: a = 1/3, c = 1/2; after 2: a = 2/3, c = 1/2; after 2.5: 2/3 vs 1.
        assert!((ks_two_sample(&a, &c) - 1.0 / 3.0).abs() < 1e-15);
        assert!((two_sample_threshold(100, 100) - 1.63 * 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn independence_null_calibration() {
        let mut failures = 0;
        for rep in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let values: Vec<f64> = (0..4000).map(|_| Exp1.sample(&mut rng)).collect();
            let flags: Vec<bool> = (0..4000).map(|_| rng.random::<f64>() < 0.5).collect();
            let r = independence_check(&values, &flags, MIN_GROUP).unwrap();
            assert_ne!(r.status, CheckStatus::Inconclusive);
            failures += usize::from(r.failed());
        }
        assert!(failures <= 5, "{failures} failures");
    }

    #[test]
    fn independence_detects_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let flags: Vec<bool> = (0..4000).map(|_| rng.random::<f64>() < 0.5).collect();
        let values: Vec<f64> = flags
            .iter()
            .map(|&f| {
                let e: f64 = Exp1.sample(&mut rng);
                e + if f { 1.0 } else { 0.0 }
            })
            .collect();
        assert!(independence_check(&values, &flags, MIN_GROUP).unwrap().failed());
    }

    #[test]
    fn independence_small_groups_inconclusive() {
        let values = vec![1.0; 1500];
        let mut flags = vec![false; 1500];
        flags[..10].iter_mut().for_each(|f| *f = true);
        let r = independence_check(&values, &flags, MIN_GROUP).unwrap();
        assert_eq!(r.status, CheckStatus::Inconclusive);
        assert!(!r.passed() && !r.failed());
    }

    #[test]
    fn wilson_examples() {
        let (lo, hi) = proportion_ci(0, 50).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        let (lo, hi) = proportion_ci(50, 50).unwrap();
        assert!(lo < 1.0 && hi == 1.0);
        let (lo, hi) = proportion_ci(5000, 10_000).unwrap();
        assert!(((hi - lo) / 2.0 - 0.0129).abs() < 5e-5, "{}", (hi - lo) / 2.0);
        assert!(proportion_ci(1, 0).is_err());
    }

    #[test]
    fn report_status_follows_threshold() {
        assert!(CheckReport::evaluate("a", 1.0, 1.0, vec![1]).passed());
        assert!(CheckReport::evaluate("a", 1.0 + 1e-12, 1.0, vec![1]).failed());
        assert!(CheckReport::evaluate("a", f64::NAN, 1.0, vec![1]).failed());
        let json = serde_json::to_string(&CheckReport::evaluate("a", 0.5, 1.0, vec![3])).unwrap();
        assert!(json.contains("\"status\":\"pass\""));
    }

    #[test]
    fn tv_examples() {
        assert!((tv_geometric(&[50, 50], 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(tv_geometric(&[1000], 0.0).unwrap() == 0.0);
    }

    #[test]
    fn standardized_mean_examples() {
        assert_eq!(standardized_mean(&[0.0, 0.0]), 0.0);
        assert_eq!(standardized_mean(&[1.0, 1.0]), f64::INFINITY);
        // mean 1, sample sd 1, n = 4: 1 / (1 / 2) = 2.
        let d = [0.0, 1.0, 1.0, 2.0];
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((standardized_mean(&d) - 1.0 / (sd / 2.0)).abs() < 1e-12);
    }

    fn record(i: u64, laddered: bool, shat: f64, occ: f64) -> PathRecord {
        PathRecord {
            path_index: i,
            tau: 1.0,
            s_tau: 0.0,
            shat_tau: shat,
            n_tau: usize::from(laddered),
            sigma1: laddered.then_some(0.5),
            shat_pre_sigma: 0.0,
            gap1: laddered.then_some(1.0),
            j1: laddered.then_some(2.0),
            min_overshoot: laddered.then_some(2.0),
            identity_error: 0.0,
            occupation: vec![occ],
        }
    }

    #[test]
    fn occupation_check_on_constructed_summary() {
        let ctx: LadderContext<f64> = LadderContext::new(
            ModelSpec::new(
                1.5,
                SubordinatorSpec::compound_poisson(1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap(),
                PerturbationSpec::none(),
                0.1,
            )
            .unwrap(),
        )
        .unwrap();
        let scale = -(-ctx.phi_q).exp_m1() / ctx.q;
        let probes = Probes {
            occupation: vec![(1.0, 5.0)],
        };
        // Exact agreement with the formula path by path.
        let recs = (0..10).map(|i| record(i, false, 1.0, scale)).collect();
        let s = EmpiricalSummary::new(probes.clone(), recs);
        assert_eq!(occupation_check(&s, &ctx, 0, 3.0).unwrap().statistic, 0.0);
        let recs = (0..10).map(|i| record(i, false, 1.0, scale + 1.0 + i as f64 * 0.01)).collect();
        let s = EmpiricalSummary::new(probes, recs);
        assert!(occupation_check(&s, &ctx, 0, 3.0).unwrap().failed());
        // Joint event: gap 1 > z, J = 2 > x; with x past the support of a
        // small z the two forms differ.
        let j = joint_law_check(&s, &ctx, (0.5, 5.0, 0.5), JointLawForm::Compensation, 3.0).unwrap();
        assert!(j.statistic.is_finite());
    }
}
