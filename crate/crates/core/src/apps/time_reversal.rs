//! Self-time-reversal of the optimal two-emitter scattering: the state after
//! the first emitter, `Ψm = S₀φφ`, is close to its own mirror image
//! `Ψm(−k₁,−k₂) e^{i(k₁+k₂)t_d}`, so the second emitter undoes the first.

use alloc::vec::Vec;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::emitter::{Emitter, EmitterChain};
use crate::error::{Error, Result};
use crate::grid::Pulse;
use crate::scattering::{forward_chain, forward_emitter};
use crate::state::{product_state, TwoPhotonState};
use crate::takagi::leading_mode;

/// Delay scan range and resolution.
pub const SCAN_MAX: f64 = 10.0;
pub const SCAN_STEP: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeReversalFit {
    pub t_d: f64,
    /// `|⟨Ψm′|Ψm⟩| / (‖Ψm′‖‖Ψm‖)`.
    pub overlap: f64,
}

/// Overlap of `Ψ` with its delayed mirror image as a function of the delay.
/// `W_s = Σ_{i+j=s} conj(Ψ(−k_i,−k_j)) Ψ(k_i,k_j)` collects the shells of
/// constant `k₁ + k₂ = −2k_max + s·dk`.
struct MirrorProfile {
    shells: Vec<C64>,
    k_min: f64,
    dk: f64,
    scale: f64,
}

impl MirrorProfile {
    fn new(s: &TwoPhotonState) -> Result<Self> {
        let g = *s.grid();
        let n = g.n();
        let mirror: Vec<usize> = (0..n).map(|j| g.mirror_index(j)).collect();
        let mut shells = alloc::vec![C64::new(0.0, 0.0); 2 * n - 1];
        let mut mirrored_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                let m = s.get(mirror[i], mirror[j]);
                mirrored_sq += m.norm_sqr();
                shells[i + j] += m.conj() * s.get(i, j);
            }
        }
        let dk = g.dk();
        let denom = (mirrored_sq * dk * dk * s.norm_sq()).sqrt();
        if !(denom > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(MirrorProfile { shells, k_min: -2.0 * g.k_max(), dk, scale: dk * dk / denom })
    }

    fn overlap(&self, t: f64) -> f64 {
        let step = C64::from_polar(1.0, -self.dk * t);
        let mut ph = C64::from_polar(1.0, -self.k_min * t);
        let mut acc = C64::new(0.0, 0.0);
        for (s, w) in self.shells.iter().enumerate() {
            if s % 256 == 0 {
                ph = C64::from_polar(1.0, -(self.k_min + s as f64 * self.dk) * t);
            }
            acc += ph * w;
            ph *= step;
        }
        acc.norm() * self.scale
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Best delay `t_d ∈ [0, 10]` for the one-emitter output `Ψm = S₀φφ`.
pub fn time_reversal_fit(e: &Emitter, p: &Pulse) -> Result<TimeReversalFit> {
    let psi_m = forward_emitter(e, &product_state(p)?);
    fit_state(&psi_m)
}

/// Best delay for an arbitrary two-photon state.
pub fn fit_state(s: &TwoPhotonState) -> Result<TimeReversalFit> {
    let prof = MirrorProfile::new(s)?;
    let count = (SCAN_MAX / SCAN_STEP).round() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for m in 0..=count {
        let t = m as f64 * SCAN_STEP;
        let v = prof.overlap(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    let lo = (best.0 - SCAN_STEP).max(0.0);
    let hi = (best.0 + SCAN_STEP).min(SCAN_MAX);
    let t_d = golden_max(|t| prof.overlap(t), lo, hi);
    let overlap = prof.overlap(t_d);
    let (t_d, overlap) = if overlap >= best.1 { (t_d, overlap) } else { best };
    if !overlap.is_finite() {
        return Err(Error::NonFinite("time reversal overlap"));
    }
    Ok(TimeReversalFit { t_d, overlap: overlap.min(1.0) })
}

/// `φ(−k) e^{ik t_d}`, the momentum amplitude of `φ̃(t_d − t)`.
pub fn reversed_input(p: &Pulse, t_d: f64) -> Pulse {
    p.mirrored().delayed(t_d)
}

/// `|⟨qq|S₀Ψm⟩|` with `q = φ̃(t_d − t)`, normalized: the second emitter
/// returns a delayed, time-reversed copy of the input pair.
pub fn second_scatter_overlap(e: &Emitter, p: &Pulse, t_d: f64) -> Result<f64> {
    let first = forward_emitter(e, &product_state(p)?);
    let second = forward_emitter(e, &first);
    let q = reversed_input(p, t_d);
    let ov = second.product_overlap(&q, &q)?;
    Ok(ov.norm() / (second.norm() * q.norm_sq()))
}

/// `|⟨f₁|q⟩|` between the leading Takagi mode of the chain output and the
/// time-reversed, delayed input `q = φ̃(t_d − t)`.
pub fn mode_reversal_overlap(chain: &EmitterChain, p: &Pulse, t_d: f64) -> Result<f64> {
    let out = forward_chain(chain, &product_state(p)?);
    let (_, f1) = leading_mode(&out)?;
    let q = reversed_input(p, t_d).normalize()?;
    Ok(f1.inner(&q)?.norm())
}
