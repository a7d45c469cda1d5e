use crate::{Error, Real, Result};

/// Uniform lattice `{0, h, 2h, ..., n h}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub step: T,
    pub n: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(step: T, n: usize) -> Result<Self> {
        if !(step.is_finite() && step > T::zero()) {
            return Err(Error::InvalidInput(format!("grid step must be > 0, got {step}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell".into()));
        }
        Ok(Self { step, n })
    }

    /// Smallest grid with step `h` reaching `xmax`.
    pub fn covering(step: T, xmax: T) -> Result<Self> {
        if !(xmax.is_finite() && xmax > T::zero()) {
            return Err(Error::InvalidInput(format!("grid end must be > 0, got {xmax}")));
        }
        let cells = (xmax / step).ceil().to_usize().unwrap_or(0);
        Self::new(step, cells)
    }

    pub fn x(&self, k: usize) -> T {
        self.step * T::count(k)
    }
}

/// A distribution on `[0, inf)` whose mass sits on the lattice `k h`:
/// `cdf[k]` is `P(V <= k h)`. Mass beyond `n h` is not represented and is
/// reported by [`GridDistribution::truncated_mass`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution<T> {
    step: T,
    cdf: Vec<T>,
}

fn same_step<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= T::epsilon() * T::lit(16.0) * a.abs().max(b.abs())
}

impl<T: Real> GridDistribution<T> {
    /// Validates `0 <= F[k] <= 1`, nondecreasing.
    pub fn from_cdf(step: T, cdf: Vec<T>) -> Result<Self> {
        GridSpec::new(step, cdf.len().saturating_sub(1))?;
        let mut prev = T::zero();
        for (k, &f) in cdf.iter().enumerate() {
            if !(f >= prev && f <= T::one()) {
                return Err(Error::InvalidInput(format!(
                    "cdf value {f} at index {k} breaks monotonicity or [0, 1]"
                )));
            }
            prev = f;
        }
        Ok(Self { step, cdf })
    }

    /// Accumulates lattice masses. Tiny negative masses (rounding) are
    /// dropped.
    pub fn from_masses(step: T, masses: &[T]) -> Result<Self> {
        let mut acc = T::zero();
        let cdf = masses
            .iter()
            .map(|&m| {
                acc = (acc + m.max(T::zero())).min(T::one());
                acc
            })
            .collect();
        Self::from_cdf(step, cdf)
    }

    /// Tabulates a CDF at the grid points. `F[k] = f(k h)`; mass of
    /// `((k-1) h, k h]` is moved to `k h`, so the total mass is preserved.
    pub fn from_fn<F: Fn(T) -> T>(grid: GridSpec<T>, f: F) -> Result<Self> {
        let mut prev = T::zero();
        let cdf = (0..=grid.n)
            .map(|k| {
                let v = f(grid.x(k)).max(prev).min(T::one());
                prev = v;
                v
            })
            .collect();
        Self::from_cdf(grid.step, cdf)
    }

    /// Point mass at zero.
    pub fn delta_zero(grid: GridSpec<T>) -> Self {
        Self {
            step: grid.step,
            cdf: vec![T::one(); grid.n + 1],
        }
    }

    /// Empirical CDF of `samples` evaluated at the grid points.
    pub fn from_samples(grid: GridSpec<T>, samples: &[T]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empirical grid needs samples".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::InvalidInput(format!("sample {bad} outside [0, inf)")));
        }
        let mut counts = vec![0usize; grid.n + 1];
        for &v in samples {
            // Index of the first grid point >= v.
            let k = (v / grid.step).ceil().to_usize().unwrap_or(usize::MAX);
            // Guard against k h < v from rounding in the division.
            let k = if k <= grid.n && grid.x(k) < v { k + 1 } else { k };
            if k <= grid.n {
                counts[k] += 1;
            }
        }
        let total = T::count(samples.len());
        let mut acc = 0usize;
        let cdf = counts
            .iter()
            .map(|c| {
                acc += c;
                T::count(acc) / total
            })
            .collect();
        Self::from_cdf(grid.step, cdf)
    }

    pub fn step(&self) -> T {
        self.step
    }

    /// Number of cells `n`; the grid has `n + 1` points.
    pub fn cells(&self) -> usize {
        self.cdf.len() - 1
    }

    pub fn spec(&self) -> GridSpec<T> {
        GridSpec {
            step: self.step,
            n: self.cells(),
        }
    }

    pub fn cdf(&self) -> &[T] {
        &self.cdf
    }

    pub fn atom_at_zero(&self) -> T {
        self.cdf[0]
    }

    /// Mass beyond the last grid point.
    pub fn truncated_mass(&self) -> T {
        T::one() - self.cdf[self.cdf.len() - 1]
    }

    pub fn masses(&self) -> Vec<T> {
        let mut prev = T::zero();
        self.cdf
            .iter()
            .map(|&f| {
                let m = f - prev;
                prev = f;
                m
            })
            .collect()
    }

    pub fn x(&self, k: usize) -> T {
        self.step * T::count(k)
    }

    /// Lattice CDF: `F[floor(x / h)]`, saturating at the grid end.
    pub fn eval(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let k = (x / self.step).floor().to_usize().unwrap_or(usize::MAX);
        self.cdf[k.min(self.cells())]
    }

    /// Piecewise-linear interpolation between grid points, used when the
    /// lattice law stands in for a continuous one.
    pub fn interpolate(&self, x: T) -> T {
        if x <= T::zero() {
            return if x < T::zero() { T::zero() } else { self.cdf[0] };
        }
        let pos = x / self.step;
        let k = pos.floor().to_usize().unwrap_or(usize::MAX);
        if k >= self.cells() {
            return self.cdf[self.cells()];
        }
        let w = pos - T::count(k);
        self.cdf[k] + (self.cdf[k + 1] - self.cdf[k]) * w
    }

    /// `max_k |F[k] - f(k h)|`.
    pub fn sup_distance<F: Fn(T) -> T>(&self, f: F) -> T {
        self.cdf
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, &v)| acc.max((v - f(self.x(k))).abs()))
    }

    /// `max_k |F[k] - G[k]|` for two grids on the same lattice.
    pub fn sup_distance_to(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        Ok(self
            .cdf
            .iter()
            .zip(&other.cdf)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs())))
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_step(self.step, other.step) {
            return Err(Error::GridMismatch(self.step.as_f64(), other.step.as_f64()));
        }
        if self.cells() != other.cells() {
            return Err(Error::InvalidInput(format!(
                "grid lengths differ: {} vs {} cells",
                self.cells(),
                other.cells()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone() {
        assert!(GridDistribution::from_cdf(0.1, vec![0.2, 0.1]).is_err());
        assert!(GridDistribution::from_cdf(0.1, vec![0.2, 1.1]).is_err());
        assert!(GridDistribution::from_cdf(0.0, vec![0.2, 1.0]).is_err());
    }

    #[test]
    fn empirical_grid_counts_ties_on_grid_points() {
        let g = GridSpec::new(0.5, 4).unwrap();
        let d = GridDistribution::from_samples(g, &[0.0, 0.5, 0.7, 10.0]).unwrap();
        assert_eq!(d.cdf(), &[0.25, 0.5, 0.75, 0.75, 0.75]);
        assert_eq!(d.atom_at_zero(), 0.25);
        assert_eq!(d.truncated_mass(), 0.25);
    }

    #[test]
    fn masses_round_trip() {
        let g = GridSpec::new(0.1, 50).unwrap();
        let d = GridDistribution::from_fn(g, |x: f64| 1.0 - (-x).exp()).unwrap();
        let back = GridDistribution::from_masses(0.1, &d.masses()).unwrap();
        assert!(back.sup_distance_to(&d).unwrap() < 1e-15);
    }

    #[test]
    fn eval_and_interpolate() {
        let d = GridDistribution::from_cdf(1.0, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(d.eval(0.99), 0.0);
        assert_eq!(d.eval(1.0), 0.5);
        assert_eq!(d.eval(7.0), 1.0);
        assert_eq!(d.interpolate(1.5), 0.75);
        assert_eq!(d.interpolate(-1.0), 0.0);
    }
}
