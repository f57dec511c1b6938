//! Parameter sweeps: Lorentzian linewidth, emitter number, coupling and
//! detuning mismatch, and directional efficiency.
//!
//! Every cell is independent of the others except in the mismatch sweep,
//! which walks outward from zero detuning and warm-starts from the
//! neighbouring optimum. The `*_cell` / `*_line` functions are the units a
//! caller may run in parallel.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::emitter::{Emitter, EmitterChain};
use crate::error::{Error, Result};
use crate::grid::{lorentzian_pulse, Grid, Pulse};
use crate::modal::{decompose, sorting_report};
use crate::objective::{evaluate, ObjectiveKind};
use crate::optimize::{gradient_flow, multi_seed, FlowParams};
use crate::scattering::{apply_single_photon, forward_chain};
use crate::state::product_state;

/// Momentum step and extent used by the Lorentzian sweep.
pub const LORENTZIAN_DK: f64 = 0.125;
pub const LORENTZIAN_K_MAX: f64 = 32.0;
/// The momentum step resolves the pulse with at least this many points per `σ`.
pub const LORENTZIAN_POINTS_PER_SIGMA: f64 = 2.5;
pub const LORENTZIAN_MAX_POINTS: usize = 2000;
/// Local minima of `|c₂|²` below this count as zeros.
pub const ZERO_LEVEL: f64 = 1e-2;

/// Grid fine enough to resolve a Lorentzian of width `σ`; the point count is
/// capped, shrinking the extent instead.
pub fn lorentzian_grid(sigma: f64) -> Result<Grid> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter { name: "sigma", value: sigma });
    }
    let dk = LORENTZIAN_DK.min(sigma / LORENTZIAN_POINTS_PER_SIGMA);
    let mut n = (2.0 * LORENTZIAN_K_MAX / dk / 2.0).round() as usize * 2;
    if n > LORENTZIAN_MAX_POINTS {
        n = LORENTZIAN_MAX_POINTS;
    }
    Grid::new(n, 0.5 * n as f64 * dk)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianRow {
    pub sigma: f64,
    pub c1_sq: f64,
    pub c2_sq: f64,
    pub n: usize,
    pub k_max: f64,
}

impl LorentzianRow {
    pub fn error(&self) -> f64 {
        self.c1_sq + self.c2_sq
    }
}

/// A `|c₂|²` zero and whether a `|c₁|²` maximum sits within one σ step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCoincidence {
    pub sigma_zero: f64,
    pub c2_sq: f64,
    /// Closest `|c₁|²` local maximum, if any exist.
    pub nearest_c1_max: Option<f64>,
    pub coincides: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianSweep {
    pub rows: Vec<LorentzianRow>,
    pub c2_zeros: Vec<usize>,
    pub c1_maxima: Vec<usize>,
    pub coincidences: Vec<ZeroCoincidence>,
    /// `(σ, min |c₁|²+|c₂|²)`.
    pub min_error: (f64, f64),
}

impl LorentzianSweep {
    pub fn all_zeros_coincide(&self) -> bool {
        !self.coincidences.is_empty() && self.coincidences.iter().all(|c| c.coincides)
    }
}

/// Modal split of one scattered Lorentzian.
pub fn lorentzian_point(e: &Emitter, sigma: f64) -> Result<LorentzianRow> {
    let g = lorentzian_grid(sigma)?;
    let chain = EmitterChain::new(alloc::vec![*e])?;
    let p = lorentzian_pulse(g, sigma)?;
    let out = forward_chain(&chain, &product_state(&p)?);
    let psi = apply_single_photon(&chain, &p).normalize()?;
    let d = decompose(&psi, &out)?;
    Ok(LorentzianRow { sigma, c1_sq: d.c1 * d.c1, c2_sq: d.c2.norm_sqr(), n: g.n(), k_max: g.k_max() })
}

fn local_extrema(v: &[f64], maxima: bool) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| {
            if maxima {
                v[i] > v[i - 1] && v[i] >= v[i + 1]
            } else {
                v[i] < v[i - 1] && v[i] <= v[i + 1]
            }
        })
        .collect()
}

/// Zeros, maxima and their coincidence from an already computed table.
pub fn analyze_lorentzian(rows: Vec<LorentzianRow>) -> Result<LorentzianSweep> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter { name: "sigmas", value: 0.0 });
    }
    let c1: Vec<f64> = rows.iter().map(|r| r.c1_sq).collect();
    let c2: Vec<f64> = rows.iter().map(|r| r.c2_sq).collect();
    let c2_zeros: Vec<usize> = local_extrema(&c2, false).into_iter().filter(|&i| c2[i] < ZERO_LEVEL).collect();
    let c1_maxima = local_extrema(&c1, true);
    let coincidences = c2_zeros
        .iter()
        .map(|&z| {
            let nearest = c1_maxima.iter().min_by_key(|&&m| z.abs_diff(m)).copied();
            ZeroCoincidence {
                sigma_zero: rows[z].sigma,
                c2_sq: c2[z],
                nearest_c1_max: nearest.map(|m| rows[m].sigma),
                coincides: nearest.is_some_and(|m| z.abs_diff(m) <= 1),
            }
        })
        .collect();
    let min_error = rows
        .iter()
        .map(|r| (r.sigma, r.error()))
        .fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(LorentzianSweep { rows, c2_zeros, c1_maxima, coincidences, min_error })
}

/// Sweep over increasing linewidths.
pub fn sweep_lorentzian(e: &Emitter, sigmas: &[f64]) -> Result<LorentzianSweep> {
    if sigmas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter { name: "sigmas (must increase)", value: f64::NAN });
    }
    let rows = sigmas.iter().map(|&s| lorentzian_point(e, s)).collect::<Result<Vec<_>>>()?;
    analyze_lorentzian(rows)
}

/// `count` log-spaced widths in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return alloc::vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Optimum for `Ne` identical resonant emitters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterRow {
    pub ne: usize,
    pub fidelity: f64,
    /// `|a₁|²` of the optimal output.
    pub leading_population: f64,
    pub converged: bool,
    pub best_seed: usize,
    /// Spread of final objectives over seeds.
    pub spread: f64,
    pub pulse: Option<Pulse>,
}

fn failed_emitter_row(ne: usize) -> EmitterRow {
    EmitterRow { ne, fidelity: f64::NAN, leading_population: f64::NAN, converged: false, best_seed: 0, spread: f64::NAN, pulse: None }
}

/// Multi-seed optimization for one emitter count. Failures are reported in
/// the row, not raised.
pub fn emitter_cell(ne: usize, seeds: &[Pulse], params: &FlowParams) -> EmitterRow {
    let run = || -> Result<EmitterRow> {
        let chain = EmitterChain::identical(ne)?;
        let m = multi_seed(&chain, seeds, params)?;
        let report = sorting_report(&chain, &m.best.final_pulse)?;
        Ok(EmitterRow {
            ne,
            fidelity: report.fidelity,
            leading_population: report.leading_population(),
            converged: m.best.converged,
            best_seed: m.best_index,
            spread: m.spread(),
            pulse: Some(m.best.final_pulse),
        })
    };
    run().unwrap_or_else(|_| failed_emitter_row(ne))
}

pub fn sweep_emitters(ne_list: &[usize], seeds: &[Pulse], params: &FlowParams) -> Vec<EmitterRow> {
    ne_list.iter().map(|&ne| emitter_cell(ne, seeds, params)).collect()
}

/// Resonant unit emitter followed by one with coupling `ratio` and detuning `detuning`.
pub fn mismatch_chain(ratio: f64, detuning: f64) -> Result<EmitterChain> {
    EmitterChain::new(alloc::vec![Emitter::resonant(), Emitter::new(ratio, detuning, 1.0, 0.0)?])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MismatchRow {
    pub ratio: f64,
    pub detuning: f64,
    pub fidelity: f64,
    pub converged: bool,
    /// Whether the cell started from a neighbour's optimum.
    pub warm_started: bool,
    pub pulse: Option<Pulse>,
}

fn mismatch_cell(ratio: f64, detuning: f64, start: &[Pulse], params: &FlowParams) -> MismatchRow {
    let run = || -> Result<MismatchRow> {
        let chain = mismatch_chain(ratio, detuning)?;
        let m = multi_seed(&chain, start, params)?;
        let e = evaluate(&chain, &m.best.final_pulse)?;
        Ok(MismatchRow {
            ratio,
            detuning,
            fidelity: 1.0 - e.error,
            converged: m.best.converged,
            warm_started: false,
            pulse: Some(m.best.final_pulse),
        })
    };
    run().unwrap_or(MismatchRow { ratio, detuning, fidelity: f64::NAN, converged: false, warm_started: false, pulse: None })
}

/// All detunings at one coupling ratio. The cell nearest zero detuning starts
/// from `seeds`; the others walk outward, each warm-started from its inner
/// neighbour. Rows come back in the order of `detunings`.
pub fn mismatch_line(ratio: f64, detunings: &[f64], seeds: &[Pulse], params: &FlowParams) -> Vec<MismatchRow> {
    if detunings.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..detunings.len()).collect();
    order.sort_by(|&a, &b| detunings[a].abs().partial_cmp(&detunings[b].abs()).unwrap().then(a.cmp(&b)));
    let mut rows: Vec<Option<MismatchRow>> = alloc::vec![None; detunings.len()];
    // last optimum on the non-negative and negative side
    let mut frontier: [Option<Pulse>; 2] = [None, None];
    for &i in &order {
        let d = detunings[i];
        let side = usize::from(d < 0.0);
        let warm = frontier[side].clone().or_else(|| frontier[1 - side].clone());
        let row = match warm {
            Some(p) => MismatchRow { warm_started: true, ..mismatch_cell(ratio, d, core::slice::from_ref(&p), params) },
            None => mismatch_cell(ratio, d, seeds, params),
        };
        if let Some(p) = &row.pulse {
            frontier[side] = Some(p.clone());
        }
        rows[i] = Some(row);
    }
    rows.into_iter().map(|r| r.expect("every cell visited")).collect()
}

pub fn sweep_mismatch(ratios: &[f64], detunings: &[f64], seeds: &[Pulse], params: &FlowParams) -> Vec<MismatchRow> {
    ratios.iter().flat_map(|&r| mismatch_line(r, detunings, seeds, params)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub beta: f64,
    pub kind: ObjectiveKind,
    /// `N₂ − E` and `1 − E/N₂` for the reused lossless optimum.
    pub reference_total: f64,
    pub reference_conditional: f64,
    /// The same after re-optimizing at this `β`.
    pub total: f64,
    pub conditional: f64,
    pub converged: bool,
    pub pulse: Option<Pulse>,
}

/// Re-optimize `reference` (the `β = 1` optimum of `base`) at one `β`.
pub fn beta_cell(base: &EmitterChain, reference: &Pulse, beta: f64, kind: ObjectiveKind, params: &FlowParams) -> BetaRow {
    let run = || -> Result<BetaRow> {
        let chain = base.with_beta(beta)?;
        let r = evaluate(&chain, reference)?;
        let trace = gradient_flow(&chain, reference, &FlowParams { kind, ..*params })?;
        let o = evaluate(&chain, &trace.final_pulse)?;
        Ok(BetaRow {
            beta,
            kind,
            reference_total: r.n2 - r.error,
            reference_conditional: 1.0 - r.error / r.n2,
            total: o.n2 - o.error,
            conditional: 1.0 - o.error / o.n2,
            converged: trace.converged,
            pulse: Some(trace.final_pulse),
        })
    };
    run().unwrap_or(BetaRow {
        beta,
        kind,
        reference_total: f64::NAN,
        reference_conditional: f64::NAN,
        total: f64::NAN,
        conditional: f64::NAN,
        converged: false,
        pulse: None,
    })
}

pub fn sweep_beta(base: &EmitterChain, reference: &Pulse, betas: &[f64], kind: ObjectiveKind, params: &FlowParams) -> Vec<BetaRow> {
    betas.iter().map(|&b| beta_cell(base, reference, b, kind, params)).collect()
}
