//! Adaptive Gauss-Kronrod (7/15 point) quadrature on finite intervals.

use crate::{Error, Real, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Segment<T> {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kron = kron + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T) -> Result<T> {
    integrate_pieces(f, &[a, b], abs_tol)
}

/// Integrates over `[p0, pn]` with the integrand's kinks or jumps listed as
/// interior breakpoints. `points` must be sorted.
pub fn integrate_pieces<T: Real, F: Fn(T) -> T>(f: F, points: &[T], abs_tol: T) -> Result<T> {
    if points.len() < 2 {
        return Ok(T::zero());
    }
    let mut segs: Vec<Segment<T>> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(&f, w[0], w[1]))
        .collect();
    if segs.is_empty() {
        return Ok(T::zero());
    }
    // Below this width further splitting only measures rounding noise.
    let total_width = points[points.len() - 1] - points[0];
    let min_width = total_width * T::epsilon() * T::lit(1e3);
    loop {
        let err: T = segs.iter().fold(T::zero(), |acc, s| acc + s.error);
        if err <= abs_tol {
            break;
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "quadrature did not reach tolerance {} (estimate {})",
                abs_tol, err
            )));
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(i, e), (j, s)| {
                if s.error > e {
                    (j, s.error)
                } else {
                    (i, e)
                }
            });
        let s = segs.swap_remove(worst);
        if s.b - s.a <= min_width {
            // Keep the segment but stop refining it; its error is rounding.
            segs.push(Segment {
                error: T::zero(),
                ..s
            });
            continue;
        }
        let mid = (s.a + s.b) * T::lit(0.5);
        segs.push(kronrod(&f, s.a, mid));
        segs.push(kronrod(&f, mid, s.b));
    }
    // Sum in position order so the result does not depend on split history.
    segs.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(segs.iter().fold(T::zero(), |acc, s| acc + s.value))
}
