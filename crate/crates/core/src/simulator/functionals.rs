//! Path functionals: modified ladder epochs, first passage of the dual and
//! occupation time of the reflected dual.

use super::{JumpSource, KilledRun};
use crate::{Error, Result};

/// Split of `Shat(tau)` at the modified ladder epochs `sigma_i`: the claim
/// times at which the claim exceeds the gap `Shat(t-) - Xhat(t-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderDecomposition {
    pub sigmas: Vec<f64>,
    /// `L_0, ..., L_{N_tau}`: increments of `Shat` between epochs.
    pub l_parts: Vec<f64>,
    /// `J_1, ..., J_{N_tau}`: overshoots at the epochs.
    pub j_parts: Vec<f64>,
    /// Gaps `Shat(sigma_i -) - Xhat(sigma_i -)`.
    pub gaps: Vec<f64>,
    pub n_tau: usize,
    /// `|Shat(tau) - sum L - sum J| / max(1, Shat(tau))`.
    pub identity_error: f64,
}

impl LadderDecomposition {
    /// `Shat((sigma_1 ^ tau)-)`.
    pub fn pre_ladder_supremum(&self) -> f64 {
        self.l_parts[0]
    }

    pub fn first_epoch(&self) -> Option<f64> {
        self.sigmas.first().copied()
    }

    pub fn first_overshoot(&self) -> Option<f64> {
        self.j_parts.first().copied()
    }
}

pub fn detect_modified_ladder(run: &KilledRun) -> LadderDecomposition {
    let mut sigmas = Vec::new();
    let mut j_parts = Vec::new();
    let mut gaps = Vec::new();
    let mut l_parts = Vec::new();
    let mut level = 0.0;
    for e in run.events.iter().filter(|e| e.source == JumpSource::Claim) {
        // Xhat(t-) = -x_pre.
        let gap = e.shat_pre + e.x_pre;
        if e.size > gap {
            l_parts.push(e.shat_pre - level);
            sigmas.push(e.time);
            j_parts.push(e.size - gap);
            gaps.push(gap);
            level = e.shat_post;
        }
    }
    l_parts.push(run.shat_tau - level);
    let total: f64 = l_parts.iter().sum::<f64>() + j_parts.iter().sum::<f64>();
    let identity_error = (run.shat_tau - total).abs() / run.shat_tau.max(1.0);
    LadderDecomposition {
        n_tau: sigmas.len(),
        sigmas,
        l_parts,
        j_parts,
        gaps,
        identity_error,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstPassage {
    pub hit: bool,
    pub time: Option<f64>,
}

/// First time `Xhat = -X` exceeds `y` on `[0, tau]`. `hit` is exactly
/// `Shat(tau) > y`; the time is exact at jumps and without diffusion, and
/// interpolated on the skeleton otherwise.
pub fn first_passage(run: &KilledRun, y: f64) -> Result<FirstPassage> {
    if !(y > 0.0) {
        return Err(Error::InvalidInput(format!("level y must be > 0, got {y}")));
    }
    if run.shat_tau <= y {
        return Ok(FirstPassage { hit: false, time: None });
    }
    let k = run.skeleton.iter().position(|k| k.shat > y).unwrap_or(run.skeleton.len() - 1);
    let cur = run.skeleton[k];
    let time = match k.checked_sub(1).map(|j| run.skeleton[j]) {
        Some(prev) if prev.t < cur.t && -cur.x > y => {
            let (a, b) = (-prev.x, -cur.x);
            let frac = if b > a { ((y - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
            prev.t + frac * (cur.t - prev.t)
        }
        _ => cur.t,
    };
    Ok(FirstPassage { hit: true, time: Some(time) })
}

/// `int_0^{sigma ^ tauhat_y ^ tau} 1{Shat(t) - Xhat(t) <= x} dt`, with the
/// reflected process linear between skeleton knots.
pub fn occupation_time(run: &KilledRun, x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidInput(format!("level x must be > 0, got {x}")));
    }
    let sigma = detect_modified_ladder(run).first_epoch().unwrap_or(run.tau);
    let passage = first_passage(run, y)?.time.unwrap_or(run.tau);
    let horizon = sigma.min(passage).min(run.tau);
    let mut total = 0.0;
    for w in run.skeleton.windows(2) {
        let (p, c) = (w[0], w[1]);
        if p.t >= horizon {
            break;
        }
        let len = c.t - p.t;
        if len <= 0.0 {
            continue;
        }
        let span = horizon.min(c.t) - p.t;
        // R(u) = max(Shat(p) + X(p) + slope u, 0) and x > 0.
        let start = p.shat + p.x;
        let slope = (c.x - p.x) / len;
        total += if slope == 0.0 {
            if start <= x { span } else { 0.0 }
        } else {
            let root = (x - start) / slope;
            if slope > 0.0 {
                root.clamp(0.0, span)
            } else {
                span - root.clamp(0.0, span)
            }
        };
    }
    Ok(total)
}
