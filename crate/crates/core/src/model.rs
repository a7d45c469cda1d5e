//! The process family `X(t) = c t - C(t) + Z(t)`: premium drift, a claim
//! subordinator `C` and a zero-mean spectrally negative perturbation `Z`.
//!
//! Laplace exponents follow `E exp(beta X(t)) = exp(t psi(beta))`, so a
//! Brownian perturbation with volatility `s` contributes `s^2 beta^2 / 2`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardUniform};

use crate::{Error, Real, Result};

/// Law of a single (strictly positive) jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpDistribution<T> {
    Exponential { rate: T },
    Deterministic { size: T },
    Uniform { lo: T, hi: T },
    /// `P(xi > u) = (scale / u)^index` for `u >= scale`.
    Pareto { index: T, scale: T },
}

fn finite_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite_nonnegative<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// `(1 - e^{-z}) / z`, accurate near zero.
fn one_minus_exp_over<T: Real>(z: T) -> T {
    if z < T::lit(1e-8) {
        T::one() - z * T::lit(0.5)
    } else {
        -(-z).exp_m1() / z
    }
}

impl<T: Real> JumpDistribution<T> {
    pub fn exponential(rate: T) -> Result<Self> {
        let d = Self::Exponential { rate };
        d.validate().map(|_| d)
    }

    pub fn deterministic(size: T) -> Result<Self> {
        let d = Self::Deterministic { size };
        d.validate().map(|_| d)
    }

    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        let d = Self::Uniform { lo, hi };
        d.validate().map(|_| d)
    }

    pub fn pareto(index: T, scale: T) -> Result<Self> {
        let d = Self::Pareto { index, scale };
        d.validate().map(|_| d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { rate } => finite_positive("exponential rate", rate),
            Self::Deterministic { size } => finite_positive("deterministic size", size),
            Self::Uniform { lo, hi } => {
                finite_nonnegative("uniform lo", lo)?;
                if !(hi.is_finite() && hi > lo) {
                    return Err(Error::InvalidInput(format!(
                        "uniform hi must be finite and > lo, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
            Self::Pareto { index, scale } => {
                finite_positive("pareto scale", scale)?;
                if !(index.is_finite() && index > T::one()) {
                    return Err(Error::InvalidInput(format!(
                        "pareto index must be > 1 for a finite mean, got {index}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `P(xi > u)`; right-continuous, 1 for `u <= 0`.
    pub fn survival(&self, u: T) -> T {
        if u <= T::zero() {
            return T::one();
        }
        match *self {
            Self::Exponential { rate } => (-rate * u).exp(),
            Self::Deterministic { size } => {
                if u < size {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Uniform { lo, hi } => {
                if u < lo {
                    T::one()
                } else if u >= hi {
                    T::zero()
                } else {
                    (hi - u) / (hi - lo)
                }
            }
            Self::Pareto { index, scale } => {
                if u < scale {
                    T::one()
                } else {
                    (scale / u).powf(index)
                }
            }
        }
    }

    pub fn cdf(&self, u: T) -> T {
        T::one() - self.survival(u)
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::Exponential { rate } => rate.recip(),
            Self::Deterministic { size } => size,
            Self::Uniform { lo, hi } => (lo + hi) * T::lit(0.5),
            Self::Pareto { index, scale } => index * scale / (index - T::one()),
        }
    }

    pub fn has_exponential_moments(&self) -> bool {
        !matches!(self, Self::Pareto { .. })
    }

    /// Largest possible jump, if bounded.
    pub fn support_max(&self) -> Option<T> {
        match *self {
            Self::Deterministic { size } => Some(size),
            Self::Uniform { hi, .. } => Some(hi),
            _ => None,
        }
    }

    /// Points where the survival function has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<T> {
        match *self {
            Self::Exponential { .. } => vec![],
            Self::Deterministic { size } => vec![size],
            Self::Uniform { lo, hi } => vec![lo, hi],
            Self::Pareto { scale, .. } => vec![scale],
        }
    }

    /// `E[1 - exp(-beta xi)]` for `beta >= 0`. `None` when the transform has
    /// no closed form here (Pareto with `beta > 0`).
    pub fn laplace_complement(&self, beta: T) -> Option<T> {
        if beta == T::zero() {
            return Some(T::zero());
        }
        Some(match *self {
            Self::Exponential { rate } => beta / (rate + beta),
            Self::Deterministic { size } => -(-beta * size).exp_m1(),
            Self::Uniform { lo, hi } => {
                let z = beta * (hi - lo);
                let g = one_minus_exp_over(z);
                let one_minus_g = if z < T::lit(1e-3) {
                    z * (T::lit(0.5) - z * (T::one() / T::lit(6.0) - z / T::lit(24.0)))
                } else {
                    T::one() - g
                };
                one_minus_g + g * -(-beta * lo).exp_m1()
            }
            Self::Pareto { .. } => return None,
        })
    }

    /// `E[xi exp(-beta xi)]`, the derivative of [`Self::laplace_complement`].
    pub fn laplace_complement_derivative(&self, beta: T) -> Option<T> {
        if beta == T::zero() {
            return Some(self.mean());
        }
        Some(match *self {
            Self::Exponential { rate } => rate / ((rate + beta) * (rate + beta)),
            Self::Deterministic { size } => size * (-beta * size).exp(),
            Self::Uniform { lo, hi } => {
                let w = hi - lo;
                if beta * hi < T::lit(1e-3) {
                    let m1 = (lo + hi) * T::lit(0.5);
                    let m2 = (lo * lo + lo * hi + hi * hi) / T::lit(3.0);
                    let m3 = (lo + hi) * (lo * lo + hi * hi) / T::lit(4.0);
                    m1 - beta * m2 + beta * beta * m3 * T::lit(0.5)
                } else {
                    let ea = (-beta * lo).exp();
                    let eb = (-beta * hi).exp();
                    ((lo * ea - hi * eb) / beta + (ea - eb) / (beta * beta)) / w
                }
            }
            Self::Pareto { .. } => return None,
        })
    }

    /// One draw, deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T
    where
        StandardUniform: Distribution<T>,
        Exp1: Distribution<T>,
    {
        match *self {
            Self::Exponential { rate } => {
                let e: T = Exp1.sample(rng);
                e / rate
            }
            Self::Deterministic { size } => size,
            Self::Uniform { lo, hi } => {
                let u: T = rng.random();
                lo + (hi - lo) * u
            }
            Self::Pareto { index, scale } => {
                // 1 - U lies in (0, 1], so the power is finite.
                let u: T = rng.random();
                scale * (T::one() - u).powf(-index.recip())
            }
        }
    }
}

/// Draws one jump size from `law`.
pub fn sample_jump<T: Real, R: Rng + ?Sized>(law: &JumpDistribution<T>, rng: &mut R) -> T
where
    StandardUniform: Distribution<T>,
    Exp1: Distribution<T>,
{
    law.sample(rng)
}

/// A compound Poisson component: jumps at rate `intensity`, sizes from `law`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundPoisson<T> {
    pub intensity: T,
    pub law: JumpDistribution<T>,
}

impl<T: Real> CompoundPoisson<T> {
    pub fn new(intensity: T, law: JumpDistribution<T>) -> Result<Self> {
        finite_positive("jump intensity", intensity)?;
        law.validate()?;
        Ok(Self { intensity, law })
    }

    pub fn mean_rate(&self) -> T {
        self.intensity * self.law.mean()
    }
}

/// The claim subordinator: continuous drift plus finitely many jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorSpec<T> {
    pub drift: T,
    pub jumps: Option<CompoundPoisson<T>>,
    /// Jumps below this size were folded into `drift` by whoever built the
    /// spec from an infinite-activity law. Informational only.
    pub small_jump_cutoff: T,
}

impl<T: Real> SubordinatorSpec<T> {
    pub fn new(drift: T, jumps: Option<CompoundPoisson<T>>, small_jump_cutoff: T) -> Result<Self> {
        finite_nonnegative("claim drift", drift)?;
        finite_nonnegative("small jump cutoff", small_jump_cutoff)?;
        Ok(Self {
            drift,
            jumps,
            small_jump_cutoff,
        })
    }

    /// Compound Poisson claims without drift.
    pub fn compound_poisson(intensity: T, law: JumpDistribution<T>) -> Result<Self> {
        Self::new(T::zero(), Some(CompoundPoisson::new(intensity, law)?), T::zero())
    }

    pub fn none() -> Self {
        Self {
            drift: T::zero(),
            jumps: None,
            small_jump_cutoff: T::zero(),
        }
    }

    pub fn intensity(&self) -> T {
        self.jumps.map_or(T::zero(), |j| j.intensity)
    }

    /// Total Levy mass `nu(0, inf)`.
    pub fn total_mass(&self) -> T {
        self.intensity()
    }

    /// `nu(u, inf)` without input checks.
    pub(crate) fn tail(&self, u: T) -> T {
        self.jumps
            .map_or(T::zero(), |j| j.intensity * j.law.survival(u))
    }

    /// Levy tail `nu(u, inf) = lambda P(xi > u)`.
    pub fn nu_tail(&self, u: T) -> Result<T> {
        if !u.is_finite() {
            return Err(Error::InvalidInput(format!("nu_tail level must be finite, got {u}")));
        }
        if u <= T::zero() {
            return Err(Error::InvalidInput(format!("nu_tail level must be > 0, got {u}")));
        }
        Ok(self.tail(u))
    }

    /// `psi_C(beta) = d beta + int (1 - e^{-beta x}) nu(dx)`.
    pub fn psi(&self, beta: T) -> Result<T> {
        check_beta(beta)?;
        Ok(self.drift * beta + self.jump_part(beta)?)
    }

    /// `int (1 - e^{-beta x}) nu(dx)` alone.
    pub fn jump_part(&self, beta: T) -> Result<T> {
        match self.jumps {
            None => Ok(T::zero()),
            Some(j) => j
                .law
                .laplace_complement(beta)
                .map(|v| j.intensity * v)
                .ok_or_else(heavy_tail_error),
        }
    }

    fn jump_part_derivative(&self, beta: T) -> Result<T> {
        match self.jumps {
            None => Ok(T::zero()),
            Some(j) => j
                .law
                .laplace_complement_derivative(beta)
                .map(|v| j.intensity * v)
                .ok_or_else(heavy_tail_error),
        }
    }

    /// `E C(1) = d + lambda E xi`.
    pub fn mean(&self) -> T {
        self.drift + self.jumps.map_or(T::zero(), |j| j.mean_rate())
    }
}

/// Zero-mean spectrally negative perturbation: Brownian part plus optional
/// compensated downward jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec<T> {
    pub brownian_vol: T,
    pub neg_jumps: Option<CompoundPoisson<T>>,
}

impl<T: Real> PerturbationSpec<T> {
    pub fn new(brownian_vol: T, neg_jumps: Option<CompoundPoisson<T>>) -> Result<Self> {
        finite_nonnegative("brownian volatility", brownian_vol)?;
        Ok(Self {
            brownian_vol,
            neg_jumps,
        })
    }

    pub fn none() -> Self {
        Self {
            brownian_vol: T::zero(),
            neg_jumps: None,
        }
    }

    pub fn brownian(vol: T) -> Result<Self> {
        Self::new(vol, None)
    }

    /// Upward drift that cancels the mean of the downward jumps.
    pub fn compensation_drift(&self) -> T {
        self.neg_jumps.map_or(T::zero(), |j| j.mean_rate())
    }

    pub fn intensity(&self) -> T {
        self.neg_jumps.map_or(T::zero(), |j| j.intensity)
    }

    pub fn psi(&self, beta: T) -> Result<T> {
        check_beta(beta)?;
        let diffusion = self.brownian_vol * self.brownian_vol * beta * beta * T::lit(0.5);
        let jumps = match self.neg_jumps {
            None => T::zero(),
            Some(j) => {
                let lc = j.law.laplace_complement(beta).ok_or_else(heavy_tail_error)?;
                j.intensity * (beta * j.law.mean() - lc)
            }
        };
        Ok(diffusion + jumps)
    }

    fn psi_derivative(&self, beta: T) -> Result<T> {
        let diffusion = self.brownian_vol * self.brownian_vol * beta;
        let jumps = match self.neg_jumps {
            None => T::zero(),
            Some(j) => {
                let d = j
                    .law
                    .laplace_complement_derivative(beta)
                    .ok_or_else(heavy_tail_error)?;
                j.intensity * (j.law.mean() - d)
            }
        };
        Ok(diffusion + jumps)
    }
}

/// Sign of `E X(1)` relative to the net profit condition `E C(1) < c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcStatus {
    Holds,
    Boundary,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanReport<T> {
    pub value: T,
    pub status: NpcStatus,
}

/// `X(t) = c t - C(t) + Z(t)` killed at an independent `Exp(kill_rate)` time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec<T> {
    pub premium: T,
    pub claims: SubordinatorSpec<T>,
    pub perturbation: PerturbationSpec<T>,
    pub kill_rate: T,
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if beta.is_finite() && beta >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("beta must be finite and >= 0, got {beta}")))
    }
}

fn heavy_tail_error() -> Error {
    Error::Model("pareto jumps have no exponential moments; Laplace exponent unavailable".into())
}

impl<T: Real> ModelSpec<T> {
    pub fn new(
        premium: T,
        claims: SubordinatorSpec<T>,
        perturbation: PerturbationSpec<T>,
        kill_rate: T,
    ) -> Result<Self> {
        if !premium.is_finite() {
            return Err(Error::InvalidInput(format!("premium must be finite, got {premium}")));
        }
        finite_positive("kill rate", kill_rate)?;
        if let Some(j) = claims.jumps {
            j.law.validate()?;
            finite_positive("claim intensity", j.intensity)?;
        }
        if let Some(j) = perturbation.neg_jumps {
            j.law.validate()?;
            finite_positive("perturbation jump intensity", j.intensity)?;
        }
        Ok(Self {
            premium,
            claims,
            perturbation,
            kill_rate,
        })
    }

    /// Whether every jump law has exponential moments, i.e. whether the
    /// analytic engine can be used.
    pub fn has_exponential_moments(&self) -> bool {
        self.claims.jumps.is_none_or(|j| j.law.has_exponential_moments())
            && self
                .perturbation
                .neg_jumps
                .is_none_or(|j| j.law.has_exponential_moments())
    }

    /// Drift of the continuous part of `X` (premium minus claim drift plus
    /// the perturbation's compensation).
    pub fn continuous_drift(&self) -> T {
        self.premium - self.claims.drift + self.perturbation.compensation_drift()
    }

    /// `psi_X(beta) = c beta - psi_C(beta) + psi_Z(beta)`.
    pub fn psi_x(&self, beta: T) -> Result<T> {
        check_beta(beta)?;
        Ok(self.premium * beta - self.claims.psi(beta)? + self.perturbation.psi(beta)?)
    }

    pub fn psi_c(&self, beta: T) -> Result<T> {
        self.claims.psi(beta)
    }

    pub fn psi_z(&self, beta: T) -> Result<T> {
        self.perturbation.psi(beta)
    }

    /// Analytic `psi_X'(beta)`.
    pub fn psi_x_derivative(&self, beta: T) -> Result<T> {
        check_beta(beta)?;
        Ok(self.premium - self.claims.drift - self.claims.jump_part_derivative(beta)?
            + self.perturbation.psi_derivative(beta)?)
    }

    /// `E X(1) = c - E C(1)` with the net-profit classification.
    pub fn mean_x(&self) -> MeanReport<T> {
        let value = self.premium - self.claims.mean();
        let status = if value > T::zero() {
            NpcStatus::Holds
        } else if value == T::zero() {
            NpcStatus::Boundary
        } else {
            NpcStatus::Violated
        };
        MeanReport { value, status }
    }
}
