//! Lattice machinery for the geometric compound law of the dual supremum:
//! the overshoot law at a modified ladder epoch, the ladder probability and
//! the Pollaczek-Khinchine series
//!
//! ```text
//! P(Shat(tau) <= x) = (1 - rho) sum_n rho^n (G^{(n+1)*} * H^{n*})(x).
//! ```
//!
//! `G` (the law of the dual supremum before the first ladder epoch) is always
//! an input; only pure compound Poisson models have a known `G = delta_0`.

mod convolve;
mod grid;

pub use convolve::{convolve, convolve_direct, convolve_fft, FFT_THRESHOLD};
pub use grid::{GridDistribution, GridSpec};

use crate::fluctuation::LadderContext;
use crate::model::JumpDistribution;
use crate::quadrature;
use crate::{Error, Real, Result};

/// Inputs of the series. `rho < 1` and `overshoot` has no atom at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PkParameters<T> {
    pub rho_tau: T,
    pub overshoot: GridDistribution<T>,
    pub pre_ladder: GridDistribution<T>,
    pub series_eps: T,
}

impl<T: Real> PkParameters<T> {
    pub fn new(
        rho_tau: T,
        overshoot: GridDistribution<T>,
        pre_ladder: GridDistribution<T>,
        series_eps: T,
    ) -> Result<Self> {
        if !(rho_tau >= T::zero() && rho_tau < T::one()) {
            return Err(Error::Contract(format!(
                "ladder probability must lie in [0, 1), got {rho_tau}"
            )));
        }
        if overshoot.atom_at_zero() != T::zero() {
            return Err(Error::InvalidInput(format!(
                "overshoot law has an atom {} at zero",
                overshoot.atom_at_zero()
            )));
        }
        if !(series_eps > T::zero()) {
            return Err(Error::InvalidInput(format!("series_eps must be > 0, got {series_eps}")));
        }
        overshoot.check_compatible(&pre_ladder)?;
        Ok(Self {
            rho_tau,
            overshoot,
            pre_ladder,
            series_eps,
        })
    }
}

/// The overshoot law with its normalising constant
/// `I = int_0^inf e^{-phi(q) u} nu(u, inf) du`.
#[derive(Debug, Clone, PartialEq)]
pub struct OvershootLaw<T> {
    pub distribution: GridDistribution<T>,
    pub normalizer: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderProbability<T> {
    /// `P(sigma <= tau)`.
    pub p: T,
    /// `K = (phi(q) / q) I`, so that `p = K / (1 + K)`.
    pub k: T,
    pub integral: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PkOutput<T> {
    pub cdf: GridDistribution<T>,
    /// Number of series terms summed (`N + 1`).
    pub terms: usize,
    /// Geometric mass of the dropped terms, `rho^{N+1}`.
    pub series_tail: T,
    /// Everything missing from the grid: series tail plus mass past the end.
    pub truncated_mass: T,
}

/// `int_from^inf e^{-phi v} nu(v + shift, inf) dv`, closed form where the
/// jump law allows it.
pub fn weighted_tail_integral<T: Real>(ctx: &LadderContext<T>, from: T, shift: T) -> Result<T> {
    let Some(jumps) = ctx.model.claims.jumps else {
        return Ok(T::zero());
    };
    let phi = ctx.phi_q;
    let lambda = jumps.intensity;
    match jumps.law {
        JumpDistribution::Exponential { rate } => {
            Ok(lambda * (-rate * shift).exp() * (-(rate + phi) * from).exp() / (rate + phi))
        }
        JumpDistribution::Deterministic { size } => {
            let span = size - shift - from;
            if span <= T::zero() {
                Ok(T::zero())
            } else {
                Ok(lambda * (-phi * from).exp() * -(-phi * span).exp_m1() / phi)
            }
        }
        _ => weighted_tail_integral_quadrature(ctx, from, shift),
    }
}

/// Quadrature route for [`weighted_tail_integral`], valid for every law.
pub fn weighted_tail_integral_quadrature<T: Real>(ctx: &LadderContext<T>, from: T, shift: T) -> Result<T> {
    let claims = ctx.model.claims;
    let Some(jumps) = claims.jumps else {
        return Ok(T::zero());
    };
    let phi = ctx.phi_q;
    // Past `upper` the integrand is below 1e-14 and its integral below 1e-12.
    let decay = (jumps.intensity * T::lit(1e14) / phi.min(T::one())).ln().max(T::zero()) / phi;
    let mut upper = from + decay;
    if let Some(top) = jumps.law.support_max() {
        upper = upper.min(top - shift);
    }
    if upper <= from {
        return Ok(T::zero());
    }
    let mut points = vec![from];
    for bp in jumps.law.breakpoints() {
        let v = bp - shift;
        if v > from && v < upper {
            points.push(v);
        }
    }
    points.push(upper);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    quadrature::integrate_pieces(
        |v: T| (-phi * v).exp() * claims.tail(v + shift),
        &points,
        T::lit(1e-10).max(T::epsilon() * T::lit(1e3)),
    )
}

/// Law of the overshoot `J = Delta C(sigma) - (Shat(sigma-) - Xhat(sigma-))`
/// given `sigma <= tau`:
///
/// ```text
/// P(J > x | sigma <= tau) = int_0^inf e^{-phi v} nu(v + x, inf) dv / I.
/// ```
///
/// For exponential claims this is the claim law itself.
pub fn h_tau<T: Real>(ctx: &LadderContext<T>, grid: GridSpec<T>) -> Result<OvershootLaw<T>> {
    let normalizer = require_jumps(ctx)?;
    let mut cdf = Vec::with_capacity(grid.n + 1);
    for k in 0..=grid.n {
        let tail = if k == 0 {
            normalizer
        } else {
            weighted_tail_integral(ctx, T::zero(), grid.x(k))?
        };
        cdf.push(T::one() - tail / normalizer);
    }
    Ok(OvershootLaw {
        distribution: GridDistribution::from_fn(grid, |x| cdf[(x / grid.step).round().to_usize().unwrap_or(0)])?,
        normalizer,
    })
}

/// `phi(q)`-discounted integrated tail of `nu`,
/// `int_0^x e^{-phi u} nu(u, inf) du / I`. This is not the overshoot law
/// ([`h_tau`]) unless `phi(q) = 0`; the two differ by the factor
/// `e^{phi x}` in the tail.
pub fn discounted_integrated_tail<T: Real>(ctx: &LadderContext<T>, grid: GridSpec<T>) -> Result<OvershootLaw<T>> {
    let normalizer = require_jumps(ctx)?;
    let mut cdf = Vec::with_capacity(grid.n + 1);
    for k in 0..=grid.n {
        let tail = weighted_tail_integral(ctx, grid.x(k), T::zero())?;
        cdf.push(T::one() - tail / normalizer);
    }
    Ok(OvershootLaw {
        distribution: GridDistribution::from_fn(grid, |x| cdf[(x / grid.step).round().to_usize().unwrap_or(0)])?,
        normalizer,
    })
}

fn require_jumps<T: Real>(ctx: &LadderContext<T>) -> Result<T> {
    if ctx.model.claims.jumps.is_none() {
        return Err(Error::UndefinedLaw(
            "no claim jumps: sigma is infinite and has no overshoot".into(),
        ));
    }
    integrated_tail_mass(ctx)
}

/// `I = int_0^inf e^{-phi(q) u} nu(u, inf) du = int (1 - e^{-phi x}) nu(dx) / phi`.
pub fn integrated_tail_mass<T: Real>(ctx: &LadderContext<T>) -> Result<T> {
    let Some(jumps) = ctx.model.claims.jumps else {
        return Ok(T::zero());
    };
    match jumps.law.laplace_complement(ctx.phi_q) {
        Some(lc) => Ok(jumps.intensity * lc / ctx.phi_q),
        None => weighted_tail_integral_quadrature(ctx, T::zero(), T::zero()),
    }
}

/// `P(sigma <= tau)` for a spectrally negative model.
pub fn p_tau<T: Real>(ctx: &LadderContext<T>) -> Result<LadderProbability<T>> {
    let integral = integrated_tail_mass(ctx)?;
    if !integral.is_finite() {
        return Err(Error::Numerical("tail integral diverged".into()));
    }
    let k = ctx.phi_q / ctx.q * integral;
    Ok(LadderProbability {
        p: k / (T::one() + k),
        k,
        integral,
    })
}

/// `P(sigma <= tau)` from `kappa(q, 0)` and `I = int nu(u, inf) Upsilon^q(du)`,
/// solving `p = (1 - p) kappa(q, 0) I / q`.
pub fn rho_tau_general<T: Real>(kappa_q0: T, integral: T, q: T) -> Result<T> {
    if !(integral.is_finite() && integral >= T::zero()) {
        return Err(Error::InvalidInput(format!("tail integral must be finite and >= 0, got {integral}")));
    }
    if !(q.is_finite() && q > T::zero()) {
        return Err(Error::InvalidInput(format!("q must be > 0, got {q}")));
    }
    let k = kappa_q0 * integral / q;
    Ok(k / (T::one() + k))
}

/// `P(N_tau = n) = (1 - rho) rho^n`.
pub fn n_tau_pmf<T: Real>(rho: T, n: usize) -> Result<T> {
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::Contract(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok((T::one() - rho) * rho.powi(n.min(i32::MAX as usize) as i32))
}

/// Number of series terms: the first `N` with `rho^{N+1} < eps (1 - rho)`.
pub fn series_terms<T: Real>(rho: T, eps: T) -> usize {
    let target = eps * (T::one() - rho);
    let mut n = 0usize;
    let mut tail = rho;
    while tail >= target {
        n += 1;
        tail = tail * rho;
    }
    n + 1
}

/// Evaluates the series, summing until the geometric tail is negligible.
pub fn pk_cdf<T: Real>(params: &PkParameters<T>) -> Result<PkOutput<T>> {
    pk_cdf_terms(params, series_terms(params.rho_tau, params.series_eps))
}

/// Evaluates exactly `terms` terms (`n = 0 .. terms - 1`) of the series.
pub fn pk_cdf_terms<T: Real>(params: &PkParameters<T>, terms: usize) -> Result<PkOutput<T>> {
    let rho = params.rho_tau;
    let g = params.pre_ladder.masses();
    let len = g.len();
    let step = params.pre_ladder.step();
    let weight0 = T::one() - rho;
    let mut acc: Vec<T> = g.iter().map(|&m| weight0 * m).collect();
    if terms > 1 && rho > T::zero() {
        let h = params.overshoot.masses();
        let use_fft = len > FFT_THRESHOLD + 1;
        let mut fft = use_fft.then(|| convolve::FftConvolver::new(len));
        // One ladder cycle adds J + L: kernel G * H.
        let kernel = match fft.as_mut() {
            Some(f) => {
                let gs = f.spectrum(&g);
                f.apply(&h, &gs)
            }
            None => convolve::direct_masses(&h, &g),
        };
        let kernel_spectrum = fft.as_mut().map(|f| f.spectrum(&kernel));
        let mut term = g.clone();
        let mut weight = weight0;
        for _ in 1..terms {
            term = match (fft.as_mut(), kernel_spectrum.as_ref()) {
                (Some(f), Some(ks)) => f.apply(&term, ks),
                _ => convolve::direct_masses(&term, &kernel),
            };
            weight = weight * rho;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a = *a + weight * *t;
            }
        }
    }
    let cdf = GridDistribution::from_masses(step, &acc)?;
    let series_tail = rho.powi(terms.min(i32::MAX as usize) as i32);
    let truncated_mass = cdf.truncated_mass();
    Ok(PkOutput {
        cdf,
        terms,
        series_tail,
        truncated_mass,
    })
}
