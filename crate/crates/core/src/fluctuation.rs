//! Inversion of the Laplace exponent and the ladder quantities of a
//! spectrally negative `X`.
//!
//! Normalisation: the ascending ladder exponent is fixed by `kappa(q, 0) =
//! phi(q)`, so that `Upsilon^q(x) = (1 - e^{-phi(q) x}) / phi(q)` and
//! `lambda * int e^{-lambda x} Upsilon^q(x) dx = 1 / kappa(q, lambda)`.

use crate::model::ModelSpec;
use crate::{Error, Real, Result};

const BISECTION_STEPS: usize = 60;
const BRACKET_LIMIT: f64 = 1e9;

/// Largest nonnegative zero of `psi_X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult<T> {
    pub b: T,
    pub bracket: (T, T),
    /// `|psi_X(b)|` at the returned point.
    pub tolerance: T,
}

/// Finds the crossing of the increasing-after-`lo` function `g` through
/// zero inside `[lo, hi]`, where `g(lo) <= 0 < g(hi)`. Bisection followed by
/// a single Newton step when it helps.
fn bisect_then_polish<T, G, D>(g: G, dg: D, mut lo: T, mut hi: T) -> Result<(T, (T, T))>
where
    T: Real,
    G: Fn(T) -> Result<T>,
    D: Fn(T) -> Result<T>,
{
    for _ in 0..BISECTION_STEPS {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bracket = (lo, hi);
    let mut x = lo + (hi - lo) * T::lit(0.5);
    let gx = g(x)?;
    let slope = dg(x)?;
    if slope > T::zero() {
        let cand = x - gx / slope;
        if cand >= lo && cand <= hi && g(cand)?.abs() <= gx.abs() {
            x = cand;
        }
    }
    Ok((x, bracket))
}

/// Doubles `hi` from `start` until `g(hi) > 0`.
fn expand_bracket<T: Real, G: Fn(T) -> Result<T>>(g: &G, start: T) -> Result<T> {
    let mut hi = start;
    let limit = T::lit(BRACKET_LIMIT);
    while g(hi)? <= T::zero() {
        hi = hi + hi;
        if hi > limit {
            return Err(Error::Numerical(format!(
                "root bracket exceeded {BRACKET_LIMIT}: psi_X never rises above the target"
            )));
        }
    }
    Ok(hi)
}

fn check_root<T: Real>(residual: T, scale: T, what: &str) -> Result<()> {
    if residual.abs() <= T::solve_tol() * scale {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "{what}: residual {residual} above tolerance {}",
            T::solve_tol() * scale
        )))
    }
}

/// Largest root `b = phi_X(0)` of `psi_X`. Zero whenever `E X(1) >= 0`.
pub fn largest_root<T: Real>(model: &ModelSpec<T>) -> Result<RootResult<T>> {
    if model.mean_x().value >= T::zero() {
        return Ok(RootResult {
            b: T::zero(),
            bracket: (T::zero(), T::zero()),
            tolerance: T::zero(),
        });
    }
    let g = |beta: T| model.psi_x(beta);
    let hi = expand_bracket(&g, T::one())?;
    let (b, bracket) = bisect_then_polish(g, |beta| model.psi_x_derivative(beta), T::zero(), hi)?;
    let residual = model.psi_x(b)?;
    let slope = model.psi_x_derivative(b)?;
    check_root(residual, slope.abs().max(T::one()), "largest root")?;
    Ok(RootResult {
        b,
        bracket,
        tolerance: residual.abs(),
    })
}

/// Right inverse `phi(q)`: the unique `beta >= b` with `psi_X(beta) = q`.
pub fn phi<T: Real>(model: &ModelSpec<T>, q: T) -> Result<T> {
    let b = largest_root(model)?.b;
    phi_above(model, q, b)
}

fn phi_above<T: Real>(model: &ModelSpec<T>, q: T, b: T) -> Result<T> {
    if !(q.is_finite() && q > T::zero()) {
        return Err(Error::InvalidInput(format!("phi needs finite q > 0, got {q}")));
    }
    let g = |beta: T| model.psi_x(beta).map(|v| v - q);
    let start = (b + b).max(T::one());
    let hi = expand_bracket(&g, start)?;
    let (root, _) = bisect_then_polish(g, |beta| model.psi_x_derivative(beta), b, hi)?;
    let residual = model.psi_x(root)? - q;
    check_root(residual, q.max(T::one()), "phi")?;
    Ok(root)
}

/// Accuracy of the `beta -> infinity` limit of the ladder residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitReport<T> {
    pub beta_max: T,
    pub limit_estimate: T,
    /// `c - d_C + phi_X(0)`, the jump rate of the descending ladder height.
    pub target: T,
    pub rel_error: T,
}

/// A model together with `b`, `phi(q)` at its kill rate and the ladder
/// normalisation constant (always 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderContext<T> {
    pub model: ModelSpec<T>,
    pub q: T,
    pub phi_q: T,
    pub b: T,
    pub k: T,
}

impl<T: Real> LadderContext<T> {
    pub fn new(model: ModelSpec<T>) -> Result<Self> {
        if !model.has_exponential_moments() {
            return Err(Error::Model(
                "ladder quantities need exponential moments (no pareto jumps)".into(),
            ));
        }
        let b = largest_root(&model)?.b;
        let q = model.kill_rate;
        let phi_q = phi_above(&model, q, b)?;
        Ok(Self {
            model,
            q,
            phi_q,
            b,
            k: T::one(),
        })
    }

    /// `phi(alpha)` for another killing rate, reusing the cached root.
    pub fn phi(&self, alpha: T) -> Result<T> {
        phi_above(&self.model, alpha, self.b)
    }

    /// `kappa(q, beta) = phi(q) + beta`.
    pub fn kappa(&self, beta: T) -> T {
        self.phi_q + beta
    }

    /// `kappa_hat(alpha, beta) = (alpha - psi(beta)) / (phi(alpha) - beta)`,
    /// continuous through `beta = phi(alpha)`.
    pub fn kappa_hat(&self, alpha: T, beta: T) -> Result<T> {
        if !(alpha.is_finite() && alpha > T::zero()) {
            return Err(Error::InvalidInput(format!("kappa_hat needs alpha > 0, got {alpha}")));
        }
        let phi_a = self.phi(alpha)?;
        let numerator = |x: T| self.model.psi_x(x).map(|p| alpha - p);
        let gap = phi_a - beta;
        if gap.abs() < T::lit(1e-6) * phi_a.max(T::one()) {
            // Removable singularity: -(d/dbeta) numerator at phi(alpha).
            let h = (T::lit(1e-4) * phi_a.max(T::one())).min(phi_a * T::lit(0.5));
            let slope = (numerator(phi_a + h)? - numerator(phi_a - h)?) / (h + h);
            return Ok(-slope * self.k);
        }
        Ok(self.k * numerator(beta)? / gap)
    }

    /// `lim_{alpha -> 0} kappa_hat(alpha, beta) = psi(beta) / (beta - b)`.
    pub fn kappa_hat_zero(&self, beta: T) -> Result<T> {
        self.require_above_root(beta)?;
        Ok(self.k * self.model.psi_x(beta)? / (beta - self.b))
    }

    /// `Upsilon^q(x) = (1 - e^{-phi(q) x}) / phi(q)`.
    pub fn upsilon_q(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        -(-self.phi_q * x).exp_m1() / self.phi_q
    }

    /// Density of `Upsilon^q(du)` with respect to Lebesgue measure.
    pub fn upsilon_density(&self, u: T) -> T {
        (-self.phi_q * u).exp()
    }

    fn require_above_root(&self, beta: T) -> Result<()> {
        if beta.is_finite() && beta > self.b {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "beta must exceed phi_X(0) = {}, got {beta}",
                self.b
            )))
        }
    }

    /// Net premium rate `c - d_C`.
    fn net_premium(&self) -> T {
        self.model.premium - self.model.claims.drift
    }

    /// `((c + b) beta - int (1 - e^{-beta x}) nu(dx)) / (beta - b)`: the
    /// descending ladder exponent with the perturbation's drift removed.
    pub fn ladder_residual(&self, beta: T) -> Result<T> {
        self.require_above_root(beta)?;
        let jumps = self.model.claims.jump_part(beta)?;
        Ok(((self.net_premium() + self.b) * beta - jumps) / (beta - self.b))
    }

    /// Compares the residual at `beta_max` with its limit `c + b`.
    pub fn ladder_limit_check(&self, beta_max: T) -> Result<LimitReport<T>> {
        if !(beta_max >= T::lit(1e4)) {
            return Err(Error::InvalidInput(format!("beta_max must be >= 1e4, got {beta_max}")));
        }
        let limit_estimate = self.ladder_residual(beta_max)?;
        let target = self.net_premium() + self.b;
        Ok(LimitReport {
            beta_max,
            limit_estimate,
            target,
            rel_error: (limit_estimate - target).abs() / target.abs(),
        })
    }
}
